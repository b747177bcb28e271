#include "fcox/survival.hpp"

#include "fcox/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace fcox {

std::size_t ProtectedColumn::count(int code) const {
    return static_cast<std::size_t>(std::count(values.begin(), values.end(), code));
}

SurvivalDataset::SurvivalDataset(Matrix covariates, Vector event_time,
                                 std::vector<bool> event_indicator,
                                 std::map<std::string, ProtectedColumn> protected_attributes,
                                 std::vector<std::string> feature_names)
    : covariates_(std::move(covariates)),
      time_(std::move(event_time)),
      event_(std::move(event_indicator)),
      protected_(std::move(protected_attributes)),
      names_(std::move(feature_names)) {
    const auto n = static_cast<Eigen::Index>(event_.size());
    if (n < 1) throw InvalidArgument("dataset must contain at least one subject");
    if (time_.size() != n || covariates_.rows() != n)
        throw InvalidArgument("dataset columns have inconsistent lengths");
    if (names_.size() != static_cast<std::size_t>(covariates_.cols()))
        throw InvalidArgument("feature_names length does not match covariate columns");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(time_[i]) || time_[i] < 0)
            throw InvalidArgument("event_time must be finite and nonnegative (row " +
                                  std::to_string(i) + ")");
    }
    if (!covariates_.allFinite()) throw InvalidArgument("covariates contain NaN or infinite values");
    for (const auto& [name, col] : protected_) {
        if (static_cast<Eigen::Index>(col.values.size()) != n)
            throw InvalidArgument("protected column '" + name + "' has wrong length");
        if (col.labels.size() != col.codes.size())
            throw InvalidArgument("protected column '" + name + "' labels/codes mismatch");
        std::set<int> declared(col.codes.begin(), col.codes.end());
        if (declared.size() != col.codes.size())
            throw InvalidArgument("protected column '" + name + "' has duplicate codes");
        for (int v : col.values) {
            if (!declared.count(v))
                throw InvalidArgument("protected column '" + name + "' has undeclared code " +
                                      std::to_string(v));
        }
    }
}

std::size_t SurvivalDataset::num_events() const {
    return static_cast<std::size_t>(std::count(event_.begin(), event_.end(), true));
}

const ProtectedColumn& SurvivalDataset::protected_column(const std::string& name) const {
    auto it = protected_.find(name);
    if (it == protected_.end()) throw InvalidArgument("unknown protected attribute '" + name + "'");
    return it->second;
}

SurvivalDataset SurvivalDataset::subset(std::span<const std::size_t> rows) const {
    const auto m = static_cast<Eigen::Index>(rows.size());
    Matrix x(m, covariates_.cols());
    Vector t(m);
    std::vector<bool> e(rows.size());
    std::map<std::string, ProtectedColumn> prot;
    for (const auto& [name, col] : protected_) {
        ProtectedColumn c{{}, col.codes, col.labels};
        c.values.reserve(rows.size());
        prot.emplace(name, std::move(c));
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto r = rows[static_cast<std::size_t>(k)];
        if (r >= size()) throw InvalidArgument("subset row index out of range");
        x.row(k) = covariates_.row(static_cast<Eigen::Index>(r));
        t[k] = time_[static_cast<Eigen::Index>(r)];
        e[static_cast<std::size_t>(k)] = event_[r];
        for (auto& [name, col] : prot) col.values.push_back(protected_.at(name).values[r]);
    }
    return SurvivalDataset(std::move(x), std::move(t), std::move(e), std::move(prot), names_);
}

void CoxModel::validate() const {
    const auto p = beta.size();
    if (feature_means.size() != p || feature_scales.size() != p)
        throw InvalidArgument("model means/scales must match beta length");
    if (feature_names.size() != static_cast<std::size_t>(p))
        throw InvalidArgument("model feature_names must match beta length");
    if (!beta.allFinite()) throw InvalidArgument("model beta is not finite");
    if (!feature_means.allFinite() || !feature_scales.allFinite() ||
        (p > 0 && feature_scales.minCoeff() <= 0))
        throw InvalidArgument("model feature_scales must be finite and strictly positive");
}

Vector CoxModel::standardize(const Vector& x) const {
    if (x.size() != beta.size())
        throw InvalidArgument("covariate vector has " + std::to_string(x.size()) +
                              " entries, model expects " + std::to_string(beta.size()));
    if (!x.allFinite()) throw InvalidArgument("covariate vector is not finite");
    return ((x - feature_means).array() / feature_scales.array()).matrix();
}

Matrix CoxModel::standardize(const Matrix& X) const {
    if (X.cols() != beta.size())
        throw InvalidArgument("covariate matrix has " + std::to_string(X.cols()) +
                              " columns, model expects " + std::to_string(beta.size()));
    Matrix out = X.rowwise() - feature_means.transpose();
    out.array().rowwise() /= feature_scales.transpose().array();
    return out;
}

Vector CoxModel::linear_predictor(const Matrix& X) const { return standardize(X) * beta; }

Vector CoxModel::raw_coefficients() const {
    return (beta.array() / feature_scales.array()).matrix();
}

CoxModel CoxModel::fit_standardization(const SurvivalDataset& data) {
    const Matrix& X = data.covariates();
    const auto p = X.cols();
    const double n = static_cast<double>(X.rows());
    CoxModel m;
    m.beta = Vector::Zero(p);
    m.feature_means = X.colwise().mean().transpose();
    m.feature_scales = Vector::Ones(p);
    m.feature_names = data.feature_names();
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var = (X.col(j).array() - m.feature_means[j]).square().sum() / n;
        const double sd = std::sqrt(var);
        if (sd > 0 && std::isfinite(sd)) {
            m.feature_scales[j] = sd;
        } else {
            warn("feature '" + m.feature_names[static_cast<std::size_t>(j)] +
                 "' is constant; using scale 1");
        }
    }
    return m;
}

CoxModel CoxModel::with_identity_scaling(Vector beta, std::vector<std::string> names) {
    const auto p = beta.size();
    if (names.empty())
        for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
    CoxModel m{std::move(beta), Vector::Zero(p), Vector::Ones(p), std::move(names)};
    m.validate();
    return m;
}

double BaselineHazard::at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return cumulative[static_cast<std::size_t>(std::distance(times.begin(), it)) - 1];
}

double relative_hazard(const CoxModel& model, const Vector& x) {
    const double eta = model.beta.dot(model.standardize(x));
    const double h = std::exp(eta);
    if (!std::isfinite(h)) throw NumericError("relative hazard overflow");
    return h;
}

IndexList risk_set(const SurvivalDataset& data, double t) {
    if (!(t >= 0)) throw InvalidArgument("risk_set requires t >= 0");
    IndexList out;
    const Vector& time = data.event_time();
    for (Eigen::Index i = 0; i < time.size(); ++i)
        if (time[i] >= t) out.push_back(static_cast<std::size_t>(i));
    return out;
}

PartialLikelihood::PartialLikelihood(Matrix standardized, Vector time, std::vector<bool> event) {
    const auto n = time.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return time[a] > time[b]; });
    x_.resize(n, standardized.cols());
    time_.resize(n);
    event_.resize(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto r = order[static_cast<std::size_t>(k)];
        x_.row(k) = standardized.row(r);
        time_[k] = time[r];
        event_[static_cast<std::size_t>(k)] = event[static_cast<std::size_t>(r)];
    }
    num_events_ = static_cast<std::size_t>(std::count(event_.begin(), event_.end(), true));
}

double PartialLikelihood::value_and_gradient(const Vector& beta, Vector* gradient,
                                             bool normalize) const {
    const auto n = time_.size();
    const auto p = x_.cols();
    if (beta.size() != p) throw InvalidArgument("beta length does not match covariates");
    const Vector eta = x_ * beta;

    // Running log-sum-exp over the growing risk set: sum_exp and weighted_x
    // are scaled by exp(-shift).
    double shift = -std::numeric_limits<double>::infinity();
    double sum_exp = 0.0;
    Vector weighted_x = Vector::Zero(p);
    double loss = 0.0;
    Vector grad = Vector::Zero(p);

    Eigen::Index begin = 0;
    while (begin < n) {
        Eigen::Index end = begin;
        while (end < n && time_[end] == time_[begin]) ++end;
        for (Eigen::Index k = begin; k < end; ++k) {
            if (eta[k] > shift) {
                const double rescale = std::exp(shift - eta[k]);
                sum_exp *= rescale;
                weighted_x *= rescale;
                shift = eta[k];
            }
            const double w = std::exp(eta[k] - shift);
            sum_exp += w;
            weighted_x.noalias() += w * x_.row(k).transpose();
        }
        const double log_denominator = shift + std::log(sum_exp);
        for (Eigen::Index k = begin; k < end; ++k) {
            if (!event_[static_cast<std::size_t>(k)]) continue;
            loss -= eta[k] - log_denominator;
            if (gradient) grad.noalias() += weighted_x / sum_exp - x_.row(k).transpose();
        }
        begin = end;
    }
    if (normalize && num_events_ > 0) {
        loss /= static_cast<double>(num_events_);
        grad /= static_cast<double>(num_events_);
    }
    if (gradient) *gradient = std::move(grad);
    return loss;
}

namespace {

PartialLikelihood prepare(const CoxModel& model, const SurvivalDataset& data) {
    model.validate();
    if (data.num_events() == 0) throw NumericError("no events");
    return PartialLikelihood(model.standardize(data.covariates()), data.event_time(),
                             data.event_indicator());
}

}  // namespace

double neg_log_partial_likelihood(const CoxModel& model, const SurvivalDataset& data,
                                  bool normalize) {
    const double loss = prepare(model, data).value_and_gradient(model.beta, nullptr, normalize);
    if (!std::isfinite(loss)) throw NumericError("partial likelihood is not finite");
    return loss;
}

Vector neg_log_partial_likelihood_gradient(const CoxModel& model, const SurvivalDataset& data,
                                           bool normalize) {
    Vector grad;
    prepare(model, data).value_and_gradient(model.beta, &grad, normalize);
    return grad;
}

BaselineHazard breslow_baseline(const CoxModel& model, const SurvivalDataset& data) {
    model.validate();
    if (data.num_events() == 0) throw NumericError("no events");
    const Vector eta = model.linear_predictor(data.covariates());
    const Vector& time = data.event_time();
    const auto& event = data.event_indicator();
    const auto n = time.size();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return time[a] > time[b]; });

    // Walk from the latest time, accumulating the risk-set denominator.
    const double shift = eta.maxCoeff();
    double risk = 0.0;
    std::vector<std::pair<double, double>> steps;  // (time, increment), descending
    std::size_t begin = 0;
    while (begin < order.size()) {
        std::size_t end = begin;
        const double t = time[order[begin]];
        int deaths = 0;
        while (end < order.size() && time[order[end]] == t) {
            risk += std::exp(eta[order[end]] - shift);
            if (event[static_cast<std::size_t>(order[end])]) ++deaths;
            ++end;
        }
        if (deaths > 0) steps.emplace_back(t, deaths / risk * std::exp(-shift));
        begin = end;
    }

    BaselineHazard h;
    double cum = 0.0;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        cum += it->second;
        h.times.push_back(it->first);
        h.cumulative.push_back(cum);
    }
    return h;
}

double survival_probability(const CoxModel& model, const BaselineHazard& baseline,
                            const Vector& x, double t) {
    if (!(t >= 0)) throw InvalidArgument("survival_probability requires t >= 0");
    return std::exp(-baseline.at(t) * relative_hazard(model, x));
}

}  // namespace fcox
