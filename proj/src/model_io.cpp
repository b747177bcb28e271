#include "fcox/model_io.hpp"

#include "fcox/data_io.hpp"
#include "fcox/error.hpp"
#include "fcox/format.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace fcox {

using nlohmann::json;

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

constexpr const char* kModelMagic = "fcox-model";
constexpr int kModelVersion = 1;

}  // namespace

void write_model(const CoxModel& model, std::ostream& out) {
    model.validate();
    out << kModelMagic << '\t' << kModelVersion << '\n';
    out << "features\t" << model.num_features() << '\n';
    for (std::size_t j = 0; j < model.num_features(); ++j) {
        const auto& name = model.feature_names[j];
        if (name.find_first_of("\t\r\n") != std::string::npos)
            throw InvalidArgument("feature name '" + name + "' contains a tab or line break");
        const auto k = static_cast<Eigen::Index>(j);
        out << "feature\t" << name << '\t' << format_number(model.feature_means[k]) << '\t'
            << format_number(model.feature_scales[k]) << '\t' << format_number(model.beta[k])
            << '\n';
    }
}

CoxModel read_model(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("model file is empty");
    auto head = split_tabs(line);
    if (head.size() != 2 || head[0] != kModelMagic) throw DataError("not a model file");
    if (head[1] != std::to_string(kModelVersion))
        throw DataError("unsupported model file version " + head[1]);
    if (!std::getline(in, line)) throw DataError("model file: missing feature count");
    auto count = split_tabs(line);
    if (count.size() != 2 || count[0] != "features") throw DataError("model file: bad feature count");
    const auto p = static_cast<Eigen::Index>(std::stoul(count[1]));
    CoxModel m;
    m.beta.resize(p);
    m.feature_means.resize(p);
    m.feature_scales.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!std::getline(in, line)) throw DataError("model file: truncated");
        auto f = split_tabs(line);
        if (f.size() != 5 || f[0] != "feature") throw DataError("model file: bad feature line");
        m.feature_names.push_back(f[1]);
        m.feature_means[j] = parse_double(f[2]);
        m.feature_scales[j] = parse_double(f[3]);
        m.beta[j] = parse_double(f[4]);
    }
    m.validate();
    return m;
}

void save_model(const CoxModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    write_model(model, out);
}

CoxModel load_model(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    return read_model(in);
}

const std::vector<std::string>& metric_columns() {
    static const std::vector<std::string> cols{
        "c_index", "brier", "time_dependent_auc", "log_partial_likelihood", "F_i", "F_g", "F_eps"};
    return cols;
}

std::vector<double> metric_values(const MetricReport& r) {
    return {r.c_index,           r.brier,           r.time_dependent_auc,
            r.log_partial_likelihood, r.fairness.individual, r.fairness.group,
            r.fairness.intersectional};
}

MetricReport metric_report_from_values(const std::vector<double>& v) {
    if (v.size() != metric_columns().size()) throw DataError("metric report has wrong field count");
    MetricReport r;
    r.c_index = v[0];
    r.brier = v[1];
    r.time_dependent_auc = v[2];
    r.log_partial_likelihood = v[3];
    r.fairness = {v[4], v[5], v[6]};
    return r;
}

std::string metric_report_to_json(const MetricReport& report) {
    // Numbers are written as raw shortest-round-trip text.
    std::ostringstream out;
    out << "{\n";
    const auto values = metric_values(report);
    const auto& cols = metric_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) {
        out << "  \"" << cols[k] << "\": " << format_number(values[k])
            << (k + 1 < cols.size() ? ",\n" : "\n");
    }
    out << "}\n";
    return out.str();
}

MetricReport metric_report_from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        std::vector<double> v;
        for (const auto& c : metric_columns()) v.push_back(j.at(c).get<double>());
        return metric_report_from_values(v);
    } catch (const json::exception& e) {
        throw DataError(std::string("bad metric report JSON: ") + e.what());
    }
}

std::string metric_report_to_csv(const MetricReport& report) {
    std::ostringstream out;
    const auto& cols = metric_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
    out << '\n';
    const auto values = metric_values(report);
    for (std::size_t k = 0; k < values.size(); ++k) out << (k ? "," : "") << format_number(values[k]);
    out << '\n';
    return out.str();
}

MetricReport metric_report_from_csv(const std::string& text) {
    std::istringstream in(text);
    const auto table = parse_csv(in);
    if (table.rows.size() != 1) throw DataError("metric report CSV must have one data row");
    std::vector<double> v;
    for (const auto& c : metric_columns()) v.push_back(parse_double(table.rows[0][table.column(c)]));
    return metric_report_from_values(v);
}

std::vector<SweepRow> sweep_rows(const SweepResult& sweep) {
    std::vector<SweepRow> rows;
    auto add = [&](const SweepEntry& e, bool is_baseline) {
        SweepRow r;
        r.lambda = e.lambda;
        r.c_index_dev = e.c_index_dev;
        r.f_i = e.fairness.individual;
        r.f_g = e.fairness.group;
        r.f_eps = e.fairness.intersectional;
        r.baseline = is_baseline;
        r.failed = e.failed;
        r.selected = !e.failed && e.lambda == sweep.selected_lambda;
        rows.push_back(r);
    };
    add(sweep.baseline, true);
    for (const auto& e : sweep.entries) add(e, false);
    return rows;
}

std::string sweep_to_csv(const SweepResult& sweep) {
    std::ostringstream out;
    out << "lambda,c_index_dev,F_i,F_g,F_eps,selected,baseline,status\n";
    for (const auto& r : sweep_rows(sweep)) {
        out << format_number(r.lambda) << ',' << format_number(r.c_index_dev) << ','
            << format_number(r.f_i) << ',' << format_number(r.f_g) << ',' << format_number(r.f_eps)
            << ',' << (r.selected ? 1 : 0) << ',' << (r.baseline ? 1 : 0) << ','
            << (r.failed ? "failed" : "ok") << '\n';
    }
    return out.str();
}

std::vector<SweepRow> sweep_rows_from_csv(const std::string& text) {
    std::istringstream in(text);
    const auto t = parse_csv(in);
    std::vector<SweepRow> rows;
    for (const auto& rec : t.rows) {
        SweepRow r;
        r.lambda = parse_double(rec[t.column("lambda")]);
        r.c_index_dev = parse_double(rec[t.column("c_index_dev")]);
        r.f_i = parse_double(rec[t.column("F_i")]);
        r.f_g = parse_double(rec[t.column("F_g")]);
        r.f_eps = parse_double(rec[t.column("F_eps")]);
        r.selected = rec[t.column("selected")] == "1";
        r.baseline = rec[t.column("baseline")] == "1";
        r.failed = rec[t.column("status")] == "failed";
        rows.push_back(r);
    }
    return rows;
}

}  // namespace fcox
