#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace fcox {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexList = std::vector<std::size_t>;

// Integer-coded protected attribute. `codes` is the declared code set and
// `labels[k]` the raw label for `codes[k]`.
struct ProtectedColumn {
    std::vector<int> values;
    std::vector<int> codes;
    std::vector<std::string> labels;

    std::size_t count(int code) const;
};

// Right-censored survival data. Validated on construction and immutable
// afterwards.
class SurvivalDataset {
public:
    SurvivalDataset(Matrix covariates, Vector event_time, std::vector<bool> event_indicator,
                    std::map<std::string, ProtectedColumn> protected_attributes,
                    std::vector<std::string> feature_names);

    std::size_t size() const { return static_cast<std::size_t>(time_.size()); }
    std::size_t num_features() const { return static_cast<std::size_t>(covariates_.cols()); }
    std::size_t num_events() const;

    const Matrix& covariates() const { return covariates_; }
    const Vector& event_time() const { return time_; }
    const std::vector<bool>& event_indicator() const { return event_; }
    const std::map<std::string, ProtectedColumn>& protected_attributes() const {
        return protected_;
    }
    const ProtectedColumn& protected_column(const std::string& name) const;
    bool has_protected(const std::string& name) const { return protected_.count(name) > 0; }
    const std::vector<std::string>& feature_names() const { return names_; }

    // Rows in the given order; protected code sets are kept as declared.
    SurvivalDataset subset(std::span<const std::size_t> rows) const;

private:
    Matrix covariates_;
    Vector time_;
    std::vector<bool> event_;
    std::map<std::string, ProtectedColumn> protected_;
    std::vector<std::string> names_;
};

// Linear Cox model over standardized covariates: x~ = (x - mean) / scale.
struct CoxModel {
    Vector beta;
    Vector feature_means;
    Vector feature_scales;
    std::vector<std::string> feature_names;

    std::size_t num_features() const { return static_cast<std::size_t>(beta.size()); }

    // Throws InvalidArgument when the invariants do not hold.
    void validate() const;

    Vector standardize(const Vector& x) const;
    Matrix standardize(const Matrix& X) const;

    // beta . x~ for every row of X (raw covariates).
    Vector linear_predictor(const Matrix& X) const;

    // Coefficients expressed on the raw covariate scale (beta / scale).
    Vector raw_coefficients() const;

    // Zero coefficients with means/scales estimated from `data`. A constant
    // feature gets scale 1 and a warning.
    static CoxModel fit_standardization(const SurvivalDataset& data);

    // Identity standardization (mean 0, scale 1).
    static CoxModel with_identity_scaling(Vector beta, std::vector<std::string> names = {});
};

// Step-function estimate of the cumulative baseline hazard.
struct BaselineHazard {
    std::vector<double> times;       // strictly increasing
    std::vector<double> cumulative;  // nondecreasing

    // Value at the largest recorded time <= t, 0 before the first time.
    double at(double t) const;
};

// exp(beta . x~), standardizing x with the model's means/scales.
double relative_hazard(const CoxModel& model, const Vector& x);

// Indices with event_time >= t, ascending.
IndexList risk_set(const SurvivalDataset& data, double t);

// Negative log partial likelihood with Breslow ties; divided by the number
// of events when `normalize` is set. Throws NumericError without events.
double neg_log_partial_likelihood(const CoxModel& model, const SurvivalDataset& data,
                                  bool normalize);

Vector neg_log_partial_likelihood_gradient(const CoxModel& model, const SurvivalDataset& data,
                                           bool normalize = true);

BaselineHazard breslow_baseline(const CoxModel& model, const SurvivalDataset& data);

// exp(-H0(t) * relative_hazard(x)).
double survival_probability(const CoxModel& model, const BaselineHazard& baseline,
                            const Vector& x, double t);

// Partial likelihood over pre-standardized data. Rows are sorted once by
// descending time so repeated evaluations during training are O(n p).
class PartialLikelihood {
public:
    PartialLikelihood(Matrix standardized, Vector time, std::vector<bool> event);

    std::size_t num_events() const { return num_events_; }
    std::size_t size() const { return static_cast<std::size_t>(time_.size()); }
    const Matrix& standardized() const { return x_; }

    // Loss and gradient at beta. Without events both are zero.
    double value_and_gradient(const Vector& beta, Vector* gradient, bool normalize) const;

private:
    Matrix x_;  // rows in descending-time order
    Vector time_;
    std::vector<bool> event_;
    std::size_t num_events_ = 0;
};

}  // namespace fcox
