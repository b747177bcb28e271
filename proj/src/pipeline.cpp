#include "fcox/pipeline.hpp"

#include "fcox/error.hpp"
#include "fcox/format.hpp"
#include "fcox/model_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fcox {

using nlohmann::json;

namespace {

ReportFormat parse_format(const std::string& s) {
    if (s == "json") return ReportFormat::json;
    if (s == "csv") return ReportFormat::csv;
    throw ConfigError("format must be json or csv, got '" + s + "'");
}

std::optional<PenaltyKind> parse_penalty(const std::string& s) {
    if (s == "none") return std::nullopt;
    try {
        return parse_penalty_kind(s);
    } catch (const InvalidArgument&) {
        throw ConfigError("penalty must be none, individual, group or intersectional, got '" + s +
                          "'");
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string report_text(const MetricReport& r, ReportFormat f) {
    return f == ReportFormat::json ? metric_report_to_json(r) : metric_report_to_csv(r);
}

const char* report_extension(ReportFormat f) { return f == ReportFormat::json ? ".json" : ".csv"; }

void ensure_out_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw ConfigError("output directory '" + dir.string() + "' cannot be created");
}

SplitSpec split_spec(const RunConfig& c) {
    SplitSpec s;
    s.test_fraction = c.test_fraction;
    s.dev_fraction_of_train = c.dev_fraction;
    s.seed = c.seed;
    if (!c.stratify_on.empty()) s.stratify_on = c.stratify_on;
    return s;
}

std::string model_label(std::optional<PenaltyKind> kind) {
    if (!kind) return "Typical CPH";
    switch (*kind) {
        case PenaltyKind::individual: return "Individual FCPH";
        case PenaltyKind::group: return "Group FCPH";
        case PenaltyKind::intersectional: return "Intersectional FCPH";
    }
    return "?";
}

SweepOptions sweep_options(const RunConfig& config, PenaltyKind kind,
                           const FairnessSettings& fairness) {
    SweepOptions o;
    o.baseline_config = train_config_for(config, std::nullopt, 0.0);
    o.penalized_config = train_config_for(config, kind, 0.0);
    o.fairness = fairness;
    o.max_degradation = config.max_degradation;
    o.parallel = config.parallel;
    return o;
}

}  // namespace

void apply_config_json(RunConfig& c, const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "dataset") c.dataset = v.get<std::string>();
            else if (key == "schema") c.schema = v.get<std::string>();
            else if (key == "penalty") c.penalty = v.get<std::string>();
            else if (key == "lambda") c.lambda = v.get<double>();
            else if (key == "learning_rate") c.learning_rate = v.get<double>();
            else if (key == "iterations") c.iterations = v.get<std::size_t>();
            else if (key == "epochs") c.epochs = v.get<std::size_t>();
            else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "test_fraction") c.test_fraction = v.get<double>();
            else if (key == "dev_fraction") c.dev_fraction = v.get<double>();
            else if (key == "stratify_on") c.stratify_on = v.get<std::string>();
            else if (key == "grid") c.grid = v.get<std::vector<double>>();
            else if (key == "out") c.out = v.get<std::string>();
            else if (key == "format") c.format = parse_format(v.get<std::string>());
            else if (key == "distance_scale") c.distance_scale = v.get<double>();
            else if (key == "group_attribute") c.group_attribute = v.get<std::string>();
            else if (key == "intersectional_attributes")
                c.intersectional_attributes = v.get<std::vector<std::string>>();
            else if (key == "min_subgroup_count") c.min_subgroup_count = v.get<std::size_t>();
            else if (key == "max_degradation") c.max_degradation = v.get<double>();
            else if (key == "parallel") c.parallel = v.get<bool>();
            else if (key == "compare_lambdas")
                c.compare_lambdas = v.get<std::map<std::string, double>>();
            else if (key == "synth_n") c.synth_n = v.get<std::size_t>();
            else if (key == "synth_beta") c.synth_beta = v.get<std::vector<double>>();
            else if (key == "synth_censoring") c.synth_censoring = v.get<double>();
            else if (key == "synth_group_bias") c.synth_group_bias = v.get<double>();
            else if (key == "synth_group_shift") c.synth_group_shift = v.get<double>();
            else throw ConfigError("config: unknown field '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

PreparedData prepare_data(const RunConfig& config) {
    if (config.schema.empty()) throw ConfigError("no schema given (--schema)");
    if (config.dataset.empty()) throw ConfigError("no dataset given (--dataset)");
    if (!std::filesystem::is_regular_file(config.schema))
        throw ConfigError("schema file '" + config.schema.string() + "' does not exist");
    if (!std::filesystem::is_regular_file(config.dataset))
        throw ConfigError("dataset file '" + config.dataset.string() + "' does not exist");
    auto schema = load_schema(config.schema);
    LoadReport load;
    auto data = load_csv(config.dataset, schema, &load);
    if (load.rows_dropped > 0)
        warn("dropped " + std::to_string(load.rows_dropped) + " of " +
             std::to_string(load.rows_read) + " rows with missing or unmappable values");

    if (schema.protected_attributes.empty())
        throw ConfigError("schema declares no protected attributes");
    FairnessSettings f;
    f.distance_scale = config.distance_scale;
    f.min_subgroup_count = config.min_subgroup_count;
    f.group_attribute = !config.group_attribute.empty()
                            ? config.group_attribute
                            : schema.group_attribute.value_or(schema.protected_attributes[0].name);
    if (!config.intersectional_attributes.empty()) {
        f.intersectional_attributes = config.intersectional_attributes;
    } else {
        for (const auto& p : schema.protected_attributes) f.intersectional_attributes.push_back(p.name);
    }
    if (!data.has_protected(f.group_attribute))
        throw ConfigError("group attribute '" + f.group_attribute + "' is not in the schema");
    for (const auto& a : f.intersectional_attributes)
        if (!data.has_protected(a))
            throw ConfigError("intersectional attribute '" + a + "' is not in the schema");
    return {std::move(schema), std::move(data), std::move(f)};
}

TrainConfig train_config_for(const RunConfig& config, std::optional<PenaltyKind> kind,
                             double lambda) {
    TrainConfig t = default_train_config(kind, lambda, config.seed);
    t.learning_rate = config.learning_rate;
    if (kind == PenaltyKind::individual)
        t.regime = MiniBatch{config.epochs, config.batch_size};
    else
        t.regime = FullBatch{config.iterations};
    return t;
}

FairnessPenalty make_penalty(PenaltyKind kind, const SurvivalDataset& train,
                             const FairnessSettings& settings) {
    switch (kind) {
        case PenaltyKind::individual: return IndividualPenalty{settings.distance_scale};
        case PenaltyKind::group:
            return GroupPenalty{settings.group_attribute, settings.min_subgroup_count};
        case PenaltyKind::intersectional:
            return IntersectionalPenalty{ProtectedSpace::from_dataset(
                train, settings.intersectional_attributes, settings.min_subgroup_count)};
    }
    throw InvalidArgument("unknown penalty kind");
}

void print_report(std::ostream& out, const std::string& title, const MetricReport& r) {
    out << title << '\n';
    const auto& cols = metric_columns();
    const auto values = metric_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k)
        out << "  " << std::left << std::setw(24) << cols[k] << format_fixed(values[k]) << '\n';
}

int cmd_train(const RunConfig& config, std::ostream& out) {
    const auto kind = parse_penalty(config.penalty);
    if (!kind && config.lambda > 0) throw ConfigError("lambda > 0 needs --penalty");
    auto prep = prepare_data(config);
    ensure_out_dir(config.out);
    const auto splits = split(prep.data, split_spec(config));

    std::optional<FairnessPenalty> penalty;
    if (kind) penalty = make_penalty(*kind, splits.train, prep.fairness);
    const auto result = train(splits.train, penalty, train_config_for(config, kind, config.lambda));
    const auto report = evaluate(result.model, splits.train, splits.test, prep.fairness);

    save_model(result.model, config.out / "model.txt");
    write_text(config.out / (std::string("report") + report_extension(config.format)),
               report_text(report, config.format));
    print_report(out, model_label(kind) + " (lambda " + format_number(config.lambda) + "), test split",
                 report);
    return 0;
}

int cmd_sweep(const RunConfig& config, std::ostream& out) {
    const auto kind = parse_penalty(config.penalty);
    if (!kind) throw ConfigError("sweep needs --penalty individual|group|intersectional");
    if (config.grid.empty()) throw ConfigError("sweep needs a nonempty --grid");
    auto prep = prepare_data(config);
    ensure_out_dir(config.out);
    const auto splits = split(prep.data, split_spec(config));

    const auto penalty = make_penalty(*kind, splits.train, prep.fairness);
    const auto sweep = lambda_sweep(splits.train, splits.dev, penalty, config.grid,
                                    sweep_options(config, *kind, prep.fairness));
    write_text(config.out / "sweep.csv", sweep_to_csv(sweep));

    const auto& chosen = sweep.entry(sweep.selected_lambda);
    const auto report = evaluate(*chosen.model, splits.train, splits.test, prep.fairness);
    save_model(*chosen.model, config.out / "selected_model.txt");
    write_text(config.out / (std::string("selected_report") + report_extension(config.format)),
               report_text(report, config.format));

    out << "lambda      c_index_dev  F_i       F_g       F_eps\n";
    for (const auto& r : sweep_rows(sweep)) {
        out << std::left << std::setw(12) << format_number(r.lambda) << std::setw(13)
            << format_fixed(r.c_index_dev) << std::setw(10) << format_fixed(r.f_i) << std::setw(10)
            << format_fixed(r.f_g) << std::setw(10) << format_fixed(r.f_eps)
            << (r.failed ? " failed" : "") << (r.baseline ? " baseline" : "")
            << (r.selected ? " selected" : "") << '\n';
    }
    print_report(out,
                 model_label(kind) + " (lambda " + format_number(sweep.selected_lambda) +
                     "), test split",
                 report);
    return 0;
}

int cmd_compare(const RunConfig& config, std::ostream& out) {
    auto prep = prepare_data(config);
    ensure_out_dir(config.out);
    const auto splits = split(prep.data, split_spec(config));

    struct Row {
        std::optional<PenaltyKind> kind;
        double lambda;
        MetricReport train, test;
    };
    std::vector<Row> rows;

    const auto baseline = train(splits.train, std::nullopt, train_config_for(config, std::nullopt, 0));
    rows.push_back({std::nullopt, 0.0,
                    evaluate(baseline.model, splits.train, splits.train, prep.fairness),
                    evaluate(baseline.model, splits.train, splits.test, prep.fairness)});

    for (auto kind : {PenaltyKind::individual, PenaltyKind::group, PenaltyKind::intersectional}) {
        const auto penalty = make_penalty(kind, splits.train, prep.fairness);
        CoxModel model;
        double lambda = 0.0;
        if (auto it = config.compare_lambdas.find(to_string(kind)); it != config.compare_lambdas.end()) {
            lambda = it->second;
            model = train(splits.train, penalty, train_config_for(config, kind, lambda)).model;
        } else {
            const auto sweep = lambda_sweep(splits.train, splits.dev, penalty, config.grid,
                                            sweep_options(config, kind, prep.fairness));
            write_text(config.out / (std::string("sweep_") + to_string(kind) + ".csv"),
                       sweep_to_csv(sweep));
            lambda = sweep.selected_lambda;
            model = *sweep.entry(lambda).model;
        }
        rows.push_back({kind, lambda, evaluate(model, splits.train, splits.train, prep.fairness),
                        evaluate(model, splits.train, splits.test, prep.fairness)});
    }

    std::ostringstream csv;
    csv << "model,lambda";
    for (const char* split_name : {"train", "test"})
        for (const auto& c : metric_columns()) csv << ',' << split_name << '_' << c;
    csv << '\n';
    json j = json::array();
    for (const auto& r : rows) {
        csv << csv_escape(model_label(r.kind)) << ',' << format_number(r.lambda);
        for (const auto* rep : {&r.train, &r.test})
            for (double v : metric_values(*rep)) csv << ',' << format_number(v);
        csv << '\n';
        json row{{"model", model_label(r.kind)}, {"lambda", r.lambda}};
        row["train"] = json::parse(metric_report_to_json(r.train));
        row["test"] = json::parse(metric_report_to_json(r.test));
        j.push_back(row);
    }
    write_text(config.out / "compare.csv", csv.str());
    write_text(config.out / "compare.json", j.dump(2) + "\n");

    for (const auto& r : rows) {
        print_report(out, model_label(r.kind) + " (lambda " + format_number(r.lambda) + "), train",
                     r.train);
        print_report(out, model_label(r.kind) + " (lambda " + format_number(r.lambda) + "), test",
                     r.test);
    }
    return 0;
}

int cmd_synth(const RunConfig& config, std::ostream& out) {
    ensure_out_dir(config.out);
    SyntheticSpec spec;
    spec.n = config.synth_n;
    spec.beta_true = config.synth_beta;
    spec.censoring_rate_target = config.synth_censoring;
    if (config.synth_group_bias != 1.0) spec.group_bias[1] = config.synth_group_bias;
    spec.group_feature_shift = config.synth_group_shift;
    spec.seed = config.seed;
    const auto data = generate_synthetic(spec);
    std::ostringstream csv;
    write_dataset_csv(data, csv);
    write_text(config.out / "synthetic.csv", csv.str());
    write_text(config.out / "synthetic_schema.json", schema_to_json(synthetic_schema(data)));
    out << "wrote " << data.size() << " subjects (" << data.num_events() << " events) to "
        << (config.out / "synthetic.csv").string() << '\n';
    return 0;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fair Cox proportional hazards models", "fcox"};
    app.require_subcommand(1);

    RunConfig flags;
    std::string config_path, penalty, format, grid;
    // Copies a flag value onto the merged config when it was given.
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;

    auto add_common = [&](CLI::App* sub) {
        auto bind = [&](CLI::Option* opt, std::function<void(RunConfig&)> apply) {
            overrides.emplace_back(opt, std::move(apply));
        };
        sub->add_option("--config", config_path, "JSON run configuration");
        bind(sub->add_option("--dataset", flags.dataset, "CSV dataset"),
             [&](RunConfig& c) { c.dataset = flags.dataset; });
        bind(sub->add_option("--schema", flags.schema, "JSON dataset schema"),
             [&](RunConfig& c) { c.schema = flags.schema; });
        bind(sub->add_option("--penalty", penalty, "none|individual|group|intersectional"),
             [&](RunConfig& c) { c.penalty = penalty; });
        bind(sub->add_option("--lambda", flags.lambda, "fairness trade-off weight"),
             [&](RunConfig& c) { c.lambda = flags.lambda; });
        bind(sub->add_option("--grid", grid, "comma-separated lambda grid"), [&](RunConfig& c) {
            c.grid.clear();
            std::stringstream ss(grid);
            std::string item;
            while (std::getline(ss, item, ',')) {
                try {
                    c.grid.push_back(parse_double(item));
                } catch (const DataError&) {
                    throw ConfigError("bad --grid value '" + item + "'");
                }
            }
        });
        bind(sub->add_option("--seed", flags.seed, "seed for splitting and shuffling"),
             [&](RunConfig& c) { c.seed = flags.seed; });
        bind(sub->add_option("--out", flags.out, "output directory"),
             [&](RunConfig& c) { c.out = flags.out; });
        bind(sub->add_option("--format", format, "report format: json|csv"),
             [&](RunConfig& c) { c.format = parse_format(format); });
        bind(sub->add_option("--learning_rate", flags.learning_rate),
             [&](RunConfig& c) { c.learning_rate = flags.learning_rate; });
        bind(sub->add_option("--iterations", flags.iterations),
             [&](RunConfig& c) { c.iterations = flags.iterations; });
        bind(sub->add_option("--epochs", flags.epochs), [&](RunConfig& c) { c.epochs = flags.epochs; });
        bind(sub->add_option("--batch_size", flags.batch_size),
             [&](RunConfig& c) { c.batch_size = flags.batch_size; });
        bind(sub->add_option("--test_fraction", flags.test_fraction),
             [&](RunConfig& c) { c.test_fraction = flags.test_fraction; });
        bind(sub->add_option("--dev_fraction", flags.dev_fraction),
             [&](RunConfig& c) { c.dev_fraction = flags.dev_fraction; });
        bind(sub->add_option("--stratify_on", flags.stratify_on),
             [&](RunConfig& c) { c.stratify_on = flags.stratify_on; });
        bind(sub->add_option("--distance_scale", flags.distance_scale),
             [&](RunConfig& c) { c.distance_scale = flags.distance_scale; });
        bind(sub->add_option("--group_attribute", flags.group_attribute),
             [&](RunConfig& c) { c.group_attribute = flags.group_attribute; });
        bind(sub->add_option("--intersectional_attributes", flags.intersectional_attributes)
                 ->delimiter(','),
             [&](RunConfig& c) { c.intersectional_attributes = flags.intersectional_attributes; });
        bind(sub->add_option("--min_subgroup_count", flags.min_subgroup_count),
             [&](RunConfig& c) { c.min_subgroup_count = flags.min_subgroup_count; });
        bind(sub->add_option("--max_degradation", flags.max_degradation),
             [&](RunConfig& c) { c.max_degradation = flags.max_degradation; });
        bind(sub->add_option("--parallel", flags.parallel),
             [&](RunConfig& c) { c.parallel = flags.parallel; });
        bind(sub->add_option("--synth_n", flags.synth_n), [&](RunConfig& c) { c.synth_n = flags.synth_n; });
        bind(sub->add_option("--synth_beta", flags.synth_beta)->delimiter(','),
             [&](RunConfig& c) { c.synth_beta = flags.synth_beta; });
        bind(sub->add_option("--synth_censoring", flags.synth_censoring),
             [&](RunConfig& c) { c.synth_censoring = flags.synth_censoring; });
        bind(sub->add_option("--synth_group_bias", flags.synth_group_bias),
             [&](RunConfig& c) { c.synth_group_bias = flags.synth_group_bias; });
        bind(sub->add_option("--synth_group_shift", flags.synth_group_shift),
             [&](RunConfig& c) { c.synth_group_shift = flags.synth_group_shift; });
    };

    std::map<std::string, std::function<int(const RunConfig&, std::ostream&)>> commands{
        {"train", cmd_train}, {"sweep", cmd_sweep}, {"compare", cmd_compare}, {"synth", cmd_synth}};
    const std::map<std::string, std::string> help{
        {"train", "train one model at a fixed lambda and report on the test split"},
        {"sweep", "grid-search lambda on the dev split and pick the fairest model within budget"},
        {"compare", "compare typical CPH with the three fair variants on train and test"},
        {"synth", "write a synthetic survival dataset and its schema"}};
    for (const auto& [name, fn] : commands) add_common(app.add_subcommand(name, help.at(name)));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig config;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
            std::stringstream buf;
            buf << in.rdbuf();
            apply_config_json(config, buf.str());
        }
        for (const auto& [opt, apply] : overrides)
            if (opt->count() > 0) apply(config);
        const auto* sub = app.get_subcommands().front();
        return commands.at(sub->get_name())(config, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace fcox
