#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mtal/budget.hpp"
#include "mtal/simlab.hpp"
#include "mtal/strategies.hpp"

// File formats: confidence matrices travel as CSV (diff-able fixtures),
// structured outputs as JSON. Doubles use shortest round-trip formatting in
// both, so a written file re-reads to bit-identical values.

namespace mtal {

using json = nlohmann::ordered_json;

// Shortest decimal string that parses back to exactly this double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Input-format problem, with the 1-based line it was found on.
struct csv_error : std::runtime_error {
    int line;
    csv_error(int line_, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

// Config-semantics problem, naming the offending field.
struct config_error : std::runtime_error {
    std::string field;
    config_error(std::string field_, const std::string& msg)
        : std::runtime_error("config field '" + field_ + "': " + msg), field(std::move(field_)) {}
};

struct ConfidenceTable {
    ConfidenceMatrix matrix;
    std::optional<std::vector<ExampleSize>> sizes;  // present when the csv carries m,nt

    bool has_costs() const { return sizes.has_value(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

template <typename T>
inline T parse_number(const std::string& cell, int line, const char* what) {
    T value{};
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
        throw csv_error(line, std::string("cannot parse ") + what + " from '" + cell + "'");
    return value;
}

} // namespace detail

// Header `id,task_0,..,task_{t-1}[,m,nt]`, one row per example. Column kinds
// are not part of the file; every column reads back as entropy confidence and
// callers reinterpret before dispatching agreement-based strategies.
inline ConfidenceTable read_confidence_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw csv_error(1, "empty input, expected a header");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = detail::split_csv_line(line);
    if (header.empty() || header[0] != "id")
        throw csv_error(1, "header must start with 'id'");

    std::size_t tasks = 0;
    while (1 + tasks < header.size() && header[1 + tasks] == "task_" + std::to_string(tasks)) ++tasks;
    if (tasks == 0) throw csv_error(1, "header needs at least a 'task_0' column");

    bool with_costs = false;
    const std::size_t rest = header.size() - 1 - tasks;
    if (rest == 2 && header[1 + tasks] == "m" && header[2 + tasks] == "nt") {
        with_costs = true;
    } else if (rest != 0) {
        throw csv_error(1, "unexpected column '" + header[1 + tasks] + "' after the task columns");
    }

    ConfidenceTable table;
    table.matrix.kinds.assign(tasks, ScoreKind::entropy_confidence);
    if (with_costs) table.sizes.emplace();

    std::unordered_set<std::int64_t> seen;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw csv_error(lineno, "expected " + std::to_string(header.size()) + " columns, got " +
                                        std::to_string(cells.size()));

        const auto id = detail::parse_number<std::int64_t>(cells[0], lineno, "id");
        if (!seen.insert(id).second)
            throw csv_error(lineno, "duplicate id " + std::to_string(id));
        table.matrix.ids.push_back(id);

        for (std::size_t t = 0; t < tasks; ++t) {
            const auto v = detail::parse_number<double>(cells[1 + t], lineno, "score");
            if (!(v >= 0.0 && v <= 1.0))
                throw csv_error(lineno, "score " + cells[1 + t] + " outside [0,1]");
            table.matrix.scores.push_back(v);
        }

        if (with_costs) {
            ExampleSize sz;
            sz.m = detail::parse_number<std::int64_t>(cells[1 + tasks], lineno, "m");
            sz.nt = detail::parse_number<std::int64_t>(cells[2 + tasks], lineno, "nt");
            if (sz.m < 1) throw csv_error(lineno, "m must be >= 1");
            if (sz.nt < 0 || sz.nt > sz.m) throw csv_error(lineno, "nt must be in [0, m]");
            table.sizes->push_back(sz);
        }
    }
    if (table.matrix.ids.empty()) throw csv_error(lineno, "no data rows");
    return table;
}

inline ConfidenceTable read_confidence_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw csv_error(0, "cannot open '" + path + "'");
    return read_confidence_csv(in);
}

inline std::string write_confidence_csv(const ConfidenceTable& table) {
    table.matrix.validate();
    if (table.sizes)
        require(table.sizes->size() == table.matrix.examples(),
                "write_confidence_csv: size rows != examples");

    std::string out = "id";
    for (std::size_t t = 0; t < table.matrix.tasks(); ++t) out += ",task_" + std::to_string(t);
    if (table.sizes) out += ",m,nt";
    out += "\n";

    for (std::size_t i = 0; i < table.matrix.examples(); ++i) {
        out += std::to_string(table.matrix.ids[i]);
        for (std::size_t t = 0; t < table.matrix.tasks(); ++t)
            out += "," + format_double(table.matrix.at(i, t));
        if (table.sizes)
            out += "," + std::to_string((*table.sizes)[i].m) + "," + std::to_string((*table.sizes)[i].nt);
        out += "\n";
    }
    return out;
}

// Temp-file-then-rename so readers never observe a half-written file.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(out), "atomic_write_file: cannot open '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        require(static_cast<bool>(out), "atomic_write_file: write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// JSON output
// ---------------------------------------------------------------------------

inline void to_json(json& j, const TaskMetrics& m) {
    j = json{{"f1", m.f1}, {"accuracy", m.accuracy}, {"primary", m.primary}};
}

inline void to_json(json& j, const SelectionResult& r) {
    json flags = json::array();
    for (const auto& row : r.task_flags) {
        json jr = json::array();
        for (bool f : row) jr.push_back(f);
        flags.push_back(std::move(jr));
    }
    j = json{{"strategy", r.strategy}, {"ids", r.ids}, {"task_flags", std::move(flags)}};
    if (r.total_cost) j["total_cost"] = *r.total_cost;
}

inline void to_json(json& j, const BudgetSolution& s) {
    json x = json::array();
    for (const auto& row : s.x) {
        json jr = json::array();
        for (bool f : row) jr.push_back(f);
        x.push_back(std::move(jr));
    }
    json y = json::array();
    for (bool f : s.y) y.push_back(f);
    j = json{{"x", std::move(x)},
             {"y", std::move(y)},
             {"objective", s.objective},
             {"total_cost", s.total_cost},
             {"optimal", s.optimal}};
}

inline void to_json(json& j, const IterationRecord& r) {
    json flags = json::array();
    for (const auto& row : r.selected_flags) {
        json jr = json::array();
        for (bool f : row) jr.push_back(f);
        flags.push_back(std::move(jr));
    }
    j = json{{"iteration", r.iteration},
             {"labeled_fraction", r.labeled_fraction},
             {"labeled_per_task", r.labeled_per_task},
             {"labeled_total", r.labeled_total},
             {"labeled_cost", r.labeled_cost},
             {"test", r.test},
             {"dev_score", r.dev_score},
             {"pool_oe", r.pool_oe},
             {"selected_ids", r.selected_ids},
             {"selected_flags", std::move(flags)},
             {"selection_cost", r.selection_cost}};
}

inline void to_json(json& j, const ALRunRecord& r) {
    j = json{{"strategy", r.strategy},
             {"seed", r.seed},
             {"pool_exhausted", r.pool_exhausted},
             {"iterations", r.iterations},
             {"final_test", r.final_test},
             {"final_macro", r.final_macro},
             {"mean_pool_oe", r.mean_pool_oe}};
}

// ---------------------------------------------------------------------------
// JSON config input, strict: unknown or ill-typed fields are named errors
// ---------------------------------------------------------------------------

namespace detail {

inline void expect_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw config_error(where, "expected a JSON object");
}

inline double as_double(const json& v, const std::string& field) {
    if (!v.is_number()) throw config_error(field, "expected a number");
    return v.get<double>();
}

inline std::int64_t as_int(const json& v, const std::string& field) {
    if (!v.is_number_integer()) throw config_error(field, "expected an integer");
    return v.get<std::int64_t>();
}

inline std::uint64_t as_uint(const json& v, const std::string& field) {
    const auto i = as_int(v, field);
    if (i < 0) throw config_error(field, "expected a non-negative integer");
    return static_cast<std::uint64_t>(i);
}

inline std::string as_string(const json& v, const std::string& field) {
    if (!v.is_string()) throw config_error(field, "expected a string");
    return v.get<std::string>();
}

} // namespace detail

inline CorpusConfig corpus_config_from_json(const json& j) {
    detail::expect_object(j, "corpus");
    CorpusConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "train_size") cfg.train_size = static_cast<int>(detail::as_int(value, key));
        else if (key == "dev_size") cfg.dev_size = static_cast<int>(detail::as_int(value, key));
        else if (key == "test_size") cfg.test_size = static_cast<int>(detail::as_int(value, key));
        else if (key == "min_tokens") cfg.min_tokens = static_cast<int>(detail::as_int(value, key));
        else if (key == "max_tokens") cfg.max_tokens = static_cast<int>(detail::as_int(value, key));
        else if (key == "d") cfg.d = static_cast<int>(detail::as_int(value, key));
        else if (key == "labels_a") cfg.labels_a = static_cast<int>(detail::as_int(value, key));
        else if (key == "labels_b") cfg.labels_b = static_cast<int>(detail::as_int(value, key));
        else if (key == "noise") cfg.noise = detail::as_double(value, key);
        else if (key == "feature_sigma") cfg.feature_sigma = detail::as_double(value, key);
        else if (key == "p_null") cfg.p_null = detail::as_double(value, key);
        else throw config_error(key, "unknown corpus field");
    }
    return cfg;
}

inline TrainParams train_params_from_json(const json& j) {
    detail::expect_object(j, "train");
    TrainParams tp;
    for (const auto& [key, value] : j.items()) {
        if (key == "hidden") tp.hidden = static_cast<int>(detail::as_int(value, key));
        else if (key == "epochs") tp.epochs = static_cast<int>(detail::as_int(value, key));
        else if (key == "lr") tp.lr = detail::as_double(value, key);
        else if (key == "patience") tp.patience = static_cast<int>(detail::as_int(value, key));
        else if (key == "ls_alpha") tp.ls_alpha = detail::as_double(value, key);
        else if (key == "loss") {
            const auto name = detail::as_string(value, key);
            if (name == "ce") tp.loss = LossMode::cross_entropy;
            else if (name == "ls") tp.loss = LossMode::label_smoothing;
            else throw config_error(key, "expected 'ce' or 'ls', got '" + name + "'");
        } else throw config_error(key, "unknown train field");
    }
    return tp;
}

inline BudgetMode budget_mode_from_json(const json& j) {
    detail::expect_object(j, "budget");
    BudgetMode mode;
    for (const auto& [key, value] : j.items()) {
        if (key == "regime") {
            const auto name = detail::as_string(value, key);
            const auto parsed = parse_budget_regime(name);
            if (!parsed) throw config_error(key, "unknown budget regime '" + name + "'");
            mode.regime = *parsed;
        } else if (key == "formulation") {
            const auto name = detail::as_string(value, key);
            if (name == "UDJS") mode.formulation = Formulation::udjs;
            else if (name == "EQB-DJS") mode.formulation = Formulation::eqb_djs;
            else if (name == "JOINT") mode.formulation = Formulation::joint;
            else if (name == "STCS") mode.formulation = Formulation::stcs;
            else throw config_error(key, "unknown formulation '" + name + "'");
        } else if (key == "budget") {
            mode.budget = detail::as_int(value, key);
        } else throw config_error(key, "unknown budget field");
    }
    return mode;
}

inline ALExperimentConfig al_experiment_config_from_json(const json& j) {
    detail::expect_object(j, "experiment");
    ALExperimentConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "scenario") {
            const auto name = detail::as_string(value, key);
            const auto parsed = parse_scenario(name);
            if (!parsed) throw config_error(key, "unknown scenario '" + name + "'");
            cfg.scenario = *parsed;
        } else if (key == "strategy") {
            const auto name = detail::as_string(value, key);
            const auto parsed = parse_strategy(name);
            if (!parsed) throw config_error(key, "unknown strategy '" + name + "'");
            cfg.strategy = *parsed;
        } else if (key == "beta") {
            cfg.beta = detail::as_double(value, key);
        } else if (key == "selection_task") {
            cfg.selection_task = static_cast<std::size_t>(detail::as_uint(value, key));
        } else if (key == "iterations") {
            cfg.iterations = static_cast<int>(detail::as_int(value, key));
        } else if (key == "initial_fraction") {
            cfg.initial_fraction = detail::as_double(value, key);
        } else if (key == "acquisition") {
            cfg.acquisition = static_cast<std::size_t>(detail::as_uint(value, key));
        } else if (key == "budget") {
            cfg.budget = budget_mode_from_json(value);
        } else if (key == "dropout_passes") {
            cfg.dropout_passes = static_cast<int>(detail::as_int(value, key));
        } else if (key == "dropout_rate") {
            cfg.dropout_rate = detail::as_double(value, key);
        } else if (key == "train") {
            cfg.train = train_params_from_json(value);
        } else if (key == "corpus") {
            cfg.corpus = corpus_config_from_json(value);
        } else if (key == "seed") {
            cfg.seed = detail::as_uint(value, key);
        } else {
            throw config_error(key, "unknown experiment field");
        }
    }
    return cfg;
}

inline json al_experiment_config_to_json(const ALExperimentConfig& cfg) {
    json j;
    j["scenario"] = to_string(cfg.scenario);
    j["strategy"] = to_string(cfg.strategy);
    if (cfg.beta) j["beta"] = *cfg.beta;
    j["selection_task"] = cfg.selection_task;
    j["iterations"] = cfg.iterations;
    j["initial_fraction"] = cfg.initial_fraction;
    if (cfg.acquisition) j["acquisition"] = *cfg.acquisition;
    if (cfg.budget)
        j["budget"] = json{{"regime", to_string(cfg.budget->regime)},
                           {"formulation", to_string(cfg.budget->formulation)},
                           {"budget", cfg.budget->budget}};
    j["dropout_passes"] = cfg.dropout_passes;
    j["dropout_rate"] = cfg.dropout_rate;
    j["train"] = json{{"hidden", cfg.train.hidden},
                      {"epochs", cfg.train.epochs},
                      {"lr", cfg.train.lr},
                      {"patience", cfg.train.patience},
                      {"loss", to_string(cfg.train.loss)},
                      {"ls_alpha", cfg.train.ls_alpha}};
    j["corpus"] = json{{"train_size", cfg.corpus.train_size},
                       {"dev_size", cfg.corpus.dev_size},
                       {"test_size", cfg.corpus.test_size},
                       {"min_tokens", cfg.corpus.min_tokens},
                       {"max_tokens", cfg.corpus.max_tokens},
                       {"d", cfg.corpus.d},
                       {"labels_a", cfg.corpus.labels_a},
                       {"labels_b", cfg.corpus.labels_b},
                       {"noise", cfg.corpus.noise},
                       {"feature_sigma", cfg.corpus.feature_sigma},
                       {"p_null", cfg.corpus.p_null}};
    j["seed"] = cfg.seed;
    return j;
}

// A simulation sweep: one experiment template run once per (strategy, seed).
struct SimulateConfig {
    ALExperimentConfig experiment;
    std::vector<std::string> strategies;                      // registry names
    std::vector<std::uint64_t> seeds;
    std::vector<std::pair<std::string, std::string>> pairs;   // t-tested on final macro

    void validate() const {
        experiment.validate();
        require(!strategies.empty(), "SimulateConfig: no strategies");
        require(!seeds.empty(), "SimulateConfig: no seeds");
        for (const auto& name : strategies)
            require(parse_strategy(name).has_value(), "SimulateConfig: unknown strategy " + name);
        for (const auto& [a, b] : pairs) {
            auto listed = [&](const std::string& s) {
                for (const auto& name : strategies)
                    if (name == s) return true;
                return false;
            };
            require(listed(a) && listed(b), "SimulateConfig: pair references unlisted strategy");
        }
    }
};

inline SimulateConfig simulate_config_from_json(const json& j) {
    detail::expect_object(j, "simulate");
    SimulateConfig cfg;
    bool saw_experiment = false;
    for (const auto& [key, value] : j.items()) {
        if (key == "experiment") {
            cfg.experiment = al_experiment_config_from_json(value);
            saw_experiment = true;
        } else if (key == "strategies") {
            if (!value.is_array()) throw config_error(key, "expected an array of strategy names");
            for (const auto& v : value) cfg.strategies.push_back(detail::as_string(v, key));
        } else if (key == "seeds") {
            if (!value.is_array()) throw config_error(key, "expected an array of seeds");
            for (const auto& v : value) cfg.seeds.push_back(detail::as_uint(v, key));
        } else if (key == "pairs") {
            if (!value.is_array()) throw config_error(key, "expected an array of [a,b] pairs");
            for (const auto& v : value) {
                if (!v.is_array() || v.size() != 2)
                    throw config_error(key, "each pair must be a two-element array");
                cfg.pairs.emplace_back(detail::as_string(v[0], key), detail::as_string(v[1], key));
            }
        } else {
            throw config_error(key, "unknown simulate field");
        }
    }
    if (!saw_experiment) throw config_error("experiment", "missing");
    if (cfg.strategies.empty()) cfg.strategies.push_back(to_string(cfg.experiment.strategy));
    return cfg;
}

} // namespace mtal
