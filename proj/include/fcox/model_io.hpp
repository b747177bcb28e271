#pragma once

#include "fcox/metrics.hpp"
#include "fcox/selection.hpp"
#include "fcox/survival.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fcox {

// Model file, line oriented, tab separated:
//
//   fcox-model<TAB>1
//   features<TAB><p>
//   feature<TAB><name><TAB><mean><TAB><scale><TAB><beta>     (p lines)
//
// Numbers use the shortest decimal form that round-trips exactly.
void write_model(const CoxModel& model, std::ostream& out);
CoxModel read_model(std::istream& in);
void save_model(const CoxModel& model, const std::filesystem::path& path);
CoxModel load_model(const std::filesystem::path& path);

// Column names shared by report CSV/JSON files.
const std::vector<std::string>& metric_columns();
std::vector<double> metric_values(const MetricReport& report);
MetricReport metric_report_from_values(const std::vector<double>& values);

std::string metric_report_to_json(const MetricReport& report);
MetricReport metric_report_from_json(const std::string& text);
std::string metric_report_to_csv(const MetricReport& report);
MetricReport metric_report_from_csv(const std::string& text);

// One row per sweep model, baseline first.
struct SweepRow {
    double lambda = 0.0;
    double c_index_dev = 0.0;
    double f_i = 0.0, f_g = 0.0, f_eps = 0.0;
    bool selected = false;
    bool baseline = false;
    bool failed = false;
};

std::vector<SweepRow> sweep_rows(const SweepResult& sweep);
std::string sweep_to_csv(const SweepResult& sweep);
std::vector<SweepRow> sweep_rows_from_csv(const std::string& text);

}  // namespace fcox
