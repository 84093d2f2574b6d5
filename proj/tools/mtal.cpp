// Command-line surface: selections, budget solves, simulation sweeps, and
// overlap reports over the file formats in mtal/io.hpp.
//
// Exit codes are a stable contract: 0 success, 2 usage, 3 input format,
// 4 config semantics.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtal/io.hpp"
#include "mtal/stats.hpp"

namespace {

using namespace mtal;

constexpr const char* kToolVersion = "0.1.0";

constexpr int kExitUsage = 2;
constexpr int kExitInputFormat = 3;
constexpr int kExitConfig = 4;

int fail(int code, const std::string& msg) {
    std::cerr << "mtal: " << msg << "\n";
    return code;
}

// MTAL_SEED supplies the default seed; an explicit --seed always wins.
std::uint64_t default_seed() {
    const char* env = std::getenv("MTAL_SEED");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw CLI::ValidationError("MTAL_SEED", "not an unsigned integer");
    return v;
}

json base_manifest(const std::string& command) {
    json m;
    m["tool"] = "mtal";
    m["version"] = kToolVersion;
    m["command"] = command;
    return m;
}

void write_manifest(const std::string& output_path, const json& manifest) {
    atomic_write_file(output_path + ".manifest.json", manifest.dump(2) + "\n");
}

struct SelectArgs {
    std::string input, output, strategy;
    std::size_t n = 0;
    std::optional<double> beta;
    std::size_t task = 0;
    std::optional<std::uint64_t> seed;
};

int run_select(const SelectArgs& args) {
    const auto id = parse_strategy(args.strategy);
    if (!id) return fail(kExitUsage, "unknown strategy '" + args.strategy + "'");

    ConfidenceTable table;
    try {
        table = read_confidence_csv_file(args.input);
    } catch (const csv_error& e) {
        return fail(kExitInputFormat, args.input + ": " + e.what());
    }

    // The csv carries bare scores; agreement-based strategies read the same
    // columns as dropout agreement.
    if (uses_dropout_agreement(*id))
        table.matrix.kinds.assign(table.matrix.tasks(), ScoreKind::dropout_agreement);

    const auto seed = args.seed ? *args.seed : default_seed();

    SelectionResult result;
    if (args.n == 0) {
        result.strategy = to_string(*id);
    } else {
        SelectionParams params;
        params.n = args.n;
        params.beta = args.beta;
        params.selection_task = args.task;
        params.seed = seed;
        try {
            result = select_from_matrix(table.matrix, *id, params);
        } catch (const validation_error& e) {
            return fail(kExitConfig, e.what());
        }
    }

    std::string lines;
    for (auto sid : result.ids) lines += std::to_string(sid) + "\n";
    atomic_write_file(args.output, lines);

    auto manifest = base_manifest("select");
    manifest["strategy"] = to_string(*id);
    manifest["n"] = args.n;
    if (args.beta) manifest["beta"] = *args.beta;
    manifest["selection_task"] = args.task;
    manifest["seed"] = seed;
    manifest["input"] = args.input;
    manifest["output"] = args.output;
    write_manifest(args.output, manifest);
    return 0;
}

struct BudgetArgs {
    std::string input, output, formulation = "JOINT";
    std::int64_t budget = 500;
    std::size_t task = 0;
};

int run_budget(const BudgetArgs& args) {
    Formulation formulation;
    if (args.formulation == "JOINT") formulation = Formulation::joint;
    else if (args.formulation == "UDJS") formulation = Formulation::udjs;
    else if (args.formulation == "EQB-DJS") formulation = Formulation::eqb_djs;
    else if (args.formulation == "STCS") formulation = Formulation::stcs;
    else return fail(kExitUsage, "unknown formulation '" + args.formulation + "'");

    ConfidenceTable table;
    try {
        table = read_confidence_csv_file(args.input);
    } catch (const csv_error& e) {
        return fail(kExitInputFormat, args.input + ": " + e.what());
    }
    if (!table.has_costs())
        return fail(kExitInputFormat, args.input + ": budget solves need the m,nt cost columns");

    BudgetProgram program;
    program.formulation = formulation;
    program.stcs_task = args.task;
    program.ids = table.matrix.ids;
    program.costs = compute_costs(*table.sizes);
    program.budget = args.budget;
    program.uncertainty.resize(table.matrix.examples());
    for (std::size_t i = 0; i < table.matrix.examples(); ++i) {
        auto& row = program.uncertainty[i];
        row.resize(table.matrix.tasks());
        for (std::size_t t = 0; t < table.matrix.tasks(); ++t) row[t] = 1.0 - table.matrix.at(i, t);
    }

    BudgetSolution solution;
    try {
        solution = solve_budget_program(program);
    } catch (const validation_error& e) {
        return fail(kExitConfig, e.what());
    }

    json out = solution;
    out["ids"] = program.ids;
    atomic_write_file(args.output, out.dump(2) + "\n");

    auto manifest = base_manifest("budget");
    manifest["formulation"] = to_string(formulation);
    manifest["budget"] = args.budget;
    if (formulation == Formulation::stcs) manifest["task"] = args.task;
    manifest["input"] = args.input;
    manifest["output"] = args.output;
    write_manifest(args.output, manifest);
    return 0;
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

// Aggregate table shared by simulate and report: one row per strategy with
// mean/std of the final macro score, then one row per tested pair.
std::string aggregate_table(const SimulateConfig& cfg,
                            const std::map<std::string, std::vector<ALRunRecord>>& by_strategy) {
    std::string out = "strategy,runs,mean_final_macro,std_final_macro,mean_pool_oe,p_value\n";
    for (const auto& name : cfg.strategies) {
        const auto& records = by_strategy.at(name);
        double macro = 0.0, oe = 0.0;
        std::vector<double> macros;
        for (const auto& r : records) {
            macro += r.final_macro;
            oe += r.mean_pool_oe;
            macros.push_back(r.final_macro);
        }
        macro /= static_cast<double>(records.size());
        oe /= static_cast<double>(records.size());
        out += name + "," + std::to_string(records.size()) + "," + format_double(macro) + "," +
               format_double(sample_std(macros, macro)) + "," + format_double(oe) + ",\n";
    }
    for (const auto& [a, b] : cfg.pairs) {
        std::vector<double> xs, ys;
        for (const auto& r : by_strategy.at(a)) xs.push_back(r.final_macro);
        for (const auto& r : by_strategy.at(b)) ys.push_back(r.final_macro);
        const auto t = paired_t_test(xs, ys);
        out += a + " vs " + b + "," + std::to_string(xs.size()) + ",,,," + format_double(t.p) + "\n";
    }
    return out;
}

struct SimulateArgs {
    std::string config, out_dir;
};

int run_simulate(const SimulateArgs& args) {
    std::ifstream in(args.config);
    if (!in) return fail(kExitInputFormat, "cannot open '" + args.config + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        return fail(kExitInputFormat, args.config + ": " + e.what());
    }

    SimulateConfig cfg;
    try {
        cfg = simulate_config_from_json(doc);
        cfg.validate();
    } catch (const config_error& e) {
        return fail(kExitConfig, e.what());
    } catch (const validation_error& e) {
        return fail(kExitConfig, e.what());
    }

    std::map<std::string, std::vector<ALRunRecord>> by_strategy;
    json records = json::array();
    for (const auto& name : cfg.strategies) {
        auto exp = cfg.experiment;
        exp.strategy = *parse_strategy(name);
        for (auto seed : cfg.seeds) {
            exp.seed = seed;
            auto record = run_al_experiment(exp);
            records.push_back(record);
            by_strategy[name].push_back(std::move(record));
        }
    }

    std::filesystem::create_directories(args.out_dir);
    const auto dir = std::filesystem::path(args.out_dir);
    atomic_write_file(dir / "records.json", json{{"records", std::move(records)}}.dump(2) + "\n");
    atomic_write_file(dir / "aggregate.csv", aggregate_table(cfg, by_strategy));

    auto manifest = base_manifest("simulate");
    manifest["experiment"] = al_experiment_config_to_json(cfg.experiment);
    manifest["strategies"] = cfg.strategies;
    manifest["seeds"] = cfg.seeds;
    json pairs = json::array();
    for (const auto& [a, b] : cfg.pairs) pairs.push_back(json::array({a, b}));
    manifest["pairs"] = std::move(pairs);
    manifest["config"] = args.config;
    manifest["out_dir"] = args.out_dir;
    atomic_write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    std::cout << (dir / "records.json").string() << "\n" << (dir / "aggregate.csv").string() << "\n";
    return 0;
}

struct OverlapArgs {
    std::vector<std::string> inputs;
    std::string output;
};

int run_overlap(const OverlapArgs& args) {
    std::vector<SelectionResult> selections;
    std::vector<std::string> names;
    for (const auto& path : args.inputs) {
        std::ifstream in(path);
        if (!in) return fail(kExitInputFormat, "cannot open '" + path + "'");
        SelectionResult sel;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            try {
                sel.ids.push_back(detail::parse_number<std::int64_t>(line, lineno, "id"));
            } catch (const csv_error& e) {
                return fail(kExitInputFormat, path + ": " + e.what());
            }
        }
        sel.task_flags.assign(sel.ids.size(), {});
        selections.push_back(std::move(sel));
        names.push_back(std::filesystem::path(path).stem().string());
    }
    if (selections.size() < 2) return fail(kExitUsage, "overlap needs at least two selection files");

    std::string out = "method";
    for (const auto& name : names) out += "," + name;
    out += "\n";
    for (std::size_t i = 0; i < selections.size(); ++i) {
        out += names[i];
        for (std::size_t j = 0; j < selections.size(); ++j) {
            double pct = 0.0;
            try {
                pct = selection_overlap(selections[i], selections[j]);
            } catch (const validation_error& e) {
                return fail(kExitInputFormat, e.what());
            }
            out += "," + format_double(pct);
        }
        out += "\n";
    }
    atomic_write_file(args.output, out);

    auto manifest = base_manifest("overlap");
    manifest["inputs"] = args.inputs;
    manifest["output"] = args.output;
    write_manifest(args.output, manifest);
    return 0;
}

struct ReportArgs {
    std::string records;
    std::vector<std::string> pairs;
};

int run_report(const ReportArgs& args) {
    std::ifstream in(args.records);
    if (!in) return fail(kExitInputFormat, "cannot open '" + args.records + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        return fail(kExitInputFormat, args.records + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("records") || !doc["records"].is_array())
        return fail(kExitInputFormat, args.records + ": expected an object with a 'records' array");

    SimulateConfig cfg;
    std::map<std::string, std::vector<ALRunRecord>> by_strategy;
    for (const auto& r : doc["records"]) {
        ALRunRecord record;
        try {
            record.strategy = r.at("strategy").get<std::string>();
            record.final_macro = r.at("final_macro").get<double>();
            record.mean_pool_oe = r.at("mean_pool_oe").get<double>();
        } catch (const json::exception& e) {
            return fail(kExitInputFormat, args.records + ": " + e.what());
        }
        if (!by_strategy.count(record.strategy)) cfg.strategies.push_back(record.strategy);
        by_strategy[record.strategy].push_back(std::move(record));
    }
    if (by_strategy.empty()) return fail(kExitInputFormat, args.records + ": no records");

    for (const auto& spec : args.pairs) {
        const auto comma = spec.find(',');
        if (comma == std::string::npos)
            return fail(kExitUsage, "--pair wants 'A,B', got '" + spec + "'");
        const auto a = spec.substr(0, comma);
        const auto b = spec.substr(comma + 1);
        if (!by_strategy.count(a) || !by_strategy.count(b))
            return fail(kExitInputFormat, "pair strategy missing from records: " + spec);
        if (by_strategy[a].size() != by_strategy[b].size())
            return fail(kExitInputFormat, "pair runs differ in count: " + spec);
        cfg.pairs.emplace_back(a, b);
    }

    std::cout << aggregate_table(cfg, by_strategy);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-task active-learning selection toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    SelectArgs select_args;
    auto* select = app.add_subcommand("select", "Select examples from a confidence csv");
    select->add_option("--input", select_args.input, "Confidence csv")->required();
    select->add_option("--output", select_args.output, "Selected ids, one per line")->required();
    select->add_option("--strategy", select_args.strategy, "Registry name, e.g. MT-AVG")->required();
    select->add_option("--n", select_args.n, "How many examples")->required();
    select->add_option("--beta", select_args.beta, "Dependent-task weight")->check(CLI::Range(0.0, 1.0));
    select->add_option("--task", select_args.task, "Column for single-column strategies");
    select->add_option("--seed", select_args.seed, "Random-strategy seed (default: MTAL_SEED or 0)");

    BudgetArgs budget_args;
    auto* budget = app.add_subcommand("budget", "Solve a budgeted annotation program");
    budget->add_option("--input", budget_args.input, "Confidence csv with m,nt columns")->required();
    budget->add_option("--output", budget_args.output, "Solution json")->required();
    budget->add_option("--formulation", budget_args.formulation, "JOINT, UDJS, EQB-DJS, or STCS");
    budget->add_option("--budget", budget_args.budget, "Budget B (default 500)");
    budget->add_option("--task", budget_args.task, "Objective task for STCS");

    SimulateArgs simulate_args;
    auto* simulate = app.add_subcommand("simulate", "Run seeded active-learning experiments");
    simulate->add_option("--config", simulate_args.config, "Simulation config json")->required();
    simulate->add_option("--out-dir", simulate_args.out_dir, "Output directory")->required();

    OverlapArgs overlap_args;
    auto* overlap = app.add_subcommand("overlap", "Pairwise overlap of selection files");
    overlap->add_option("--output", overlap_args.output, "Overlap matrix csv")->required();
    overlap->add_option("files", overlap_args.inputs, "Selection files")->required();

    ReportArgs report_args;
    auto* report = app.add_subcommand("report", "Print the aggregate table for a records file");
    report->add_option("--records", report_args.records, "records.json from simulate")->required();
    report->add_option("--pair", report_args.pairs, "Strategy pair 'A,B' to t-test (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (select->parsed()) return run_select(select_args);
        if (budget->parsed()) return run_budget(budget_args);
        if (simulate->parsed()) return run_simulate(simulate_args);
        if (overlap->parsed()) return run_overlap(overlap_args);
        if (report->parsed()) return run_report(report_args);
    } catch (const csv_error& e) {
        return fail(kExitInputFormat, e.what());
    } catch (const config_error& e) {
        return fail(kExitConfig, e.what());
    } catch (const validation_error& e) {
        return fail(kExitConfig, e.what());
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }
    return fail(kExitUsage, "no command");
}
