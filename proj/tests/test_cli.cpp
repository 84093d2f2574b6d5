#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "mtal/io.hpp"

using namespace mtal;
namespace fs = std::filesystem;

namespace {

fs::path test_root() {
    static const fs::path root = [] {
        auto p = fs::temp_directory_path() / ("mtal_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return root;
}

fs::path fresh_dir(const std::string& name) {
    static int counter = 0;
    auto p = test_root() / (name + "_" + std::to_string(counter++));
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const auto dir = fresh_dir("cap");
    const auto out_path = dir / "stdout.txt";
    const auto err_path = dir / "stderr.txt";
    const std::string cmd = env_prefix + MTAL_CLI_PATH " " + args + " > " + out_path.string() +
                            " 2> " + err_path.string();
    const int status = std::system(cmd.c_str());
    CliResult res;
    if (WIFEXITED(status)) res.code = WEXITSTATUS(status);
    res.out = slurp(out_path);
    res.err = slurp(err_path);
    return res;
}

const std::string kPoolCsv = "id,task_0,task_1\n1,0.9,0.2\n2,0.1,0.8\n3,0.5,0.4\n";
const std::string kCostCsv = "id,task_0,task_1,m,nt\n1,0.9,0.2,5,2\n2,0.1,0.8,7,3\n3,0.5,0.4,4,1\n";

} // namespace

TEST_CASE("format_double round trips exactly") {
    for (double v : {0.1, 1.0 / 3.0, 0.9999999999999999, 1e-300, 0.0, 1.0, 0.30000000000000004}) {
        const auto s = format_double(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("confidence csv parses scores and costs") {
    std::istringstream in(kCostCsv);
    const auto table = read_confidence_csv(in);
    REQUIRE(table.matrix.examples() == 3);
    REQUIRE(table.matrix.tasks() == 2);
    CHECK(table.matrix.ids == std::vector<std::int64_t>{1, 2, 3});
    CHECK(table.matrix.at(0, 0) == 0.9);
    CHECK(table.matrix.at(2, 1) == 0.4);
    REQUIRE(table.has_costs());
    CHECK((*table.sizes)[1].m == 7);
    CHECK((*table.sizes)[1].nt == 3);
}

TEST_CASE("confidence csv errors carry line numbers") {
    auto expect_line = [](const std::string& content, int line) {
        std::istringstream in(content);
        try {
            read_confidence_csv(in);
            FAIL("expected csv_error");
        } catch (const csv_error& e) {
            CHECK(e.line == line);
        }
    };
    expect_line("id,task_0\n1,0.5\n1,0.6\n", 3);          // duplicate id
    expect_line("id,task_0\n1,0.5,0.4\n", 2);             // column count
    expect_line("id,task_0\n1,1.5\n", 2);                 // out of range
    expect_line("id,task_0\nx,0.5\n", 2);                 // bad id
    expect_line("id,task_0,m\n1,0.5,4\n", 1);             // m without nt
    expect_line("score,task_0\n1,0.5\n", 1);              // bad leading column
    expect_line("id,task_0\n", 1);                        // no rows
}

TEST_CASE("confidence csv round trips bit for bit") {
    ConfidenceTable table;
    table.matrix.ids = {10, 42, 7};
    table.matrix.kinds = {ScoreKind::entropy_confidence, ScoreKind::entropy_confidence};
    table.matrix.scores = {0.1, 1.0 / 3.0, 0.9999999999999999, 0.0, 1.0, 0.30000000000000004};
    table.sizes = std::vector<ExampleSize>{{5, 2}, {9, 0}, {4, 4}};

    const auto text = write_confidence_csv(table);
    std::istringstream in(text);
    const auto back = read_confidence_csv(in);
    CHECK(back.matrix.ids == table.matrix.ids);
    CHECK(back.matrix.scores == table.matrix.scores);
    CHECK(back.matrix.kinds == table.matrix.kinds);
    REQUIRE(back.has_costs());
    for (std::size_t i = 0; i < table.sizes->size(); ++i) {
        CHECK((*back.sizes)[i].m == (*table.sizes)[i].m);
        CHECK((*back.sizes)[i].nt == (*table.sizes)[i].nt);
    }
    CHECK(write_confidence_csv(back) == text);
}

TEST_CASE("experiment config json round trips and rejects unknown fields") {
    ALExperimentConfig cfg;
    cfg.scenario = Scenario::hierarchical;
    cfg.strategy = StrategyId::mt_par;
    cfg.beta = 0.75;
    cfg.iterations = 3;
    cfg.acquisition = 6;
    cfg.budget = BudgetMode{BudgetRegime::blp_al, Formulation::udjs, 123};
    cfg.train.loss = LossMode::label_smoothing;
    cfg.corpus.labels_b = 4;
    cfg.seed = 99;

    const auto j = al_experiment_config_to_json(cfg);
    const auto back = al_experiment_config_from_json(j);
    CHECK(back.scenario == cfg.scenario);
    CHECK(back.strategy == cfg.strategy);
    CHECK(back.beta == cfg.beta);
    CHECK(back.iterations == cfg.iterations);
    CHECK(back.acquisition == cfg.acquisition);
    REQUIRE(back.budget.has_value());
    CHECK(back.budget->regime == cfg.budget->regime);
    CHECK(back.budget->formulation == cfg.budget->formulation);
    CHECK(back.budget->budget == cfg.budget->budget);
    CHECK(back.train.loss == cfg.train.loss);
    CHECK(back.train.lr == cfg.train.lr);
    CHECK(back.corpus.labels_b == cfg.corpus.labels_b);
    CHECK(back.seed == cfg.seed);

    auto bad = j;
    bad["typo_field"] = 1;
    try {
        al_experiment_config_from_json(bad);
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(e.field == "typo_field");
    }
}

TEST_CASE("select writes the lowest mean confidence id") {
    const auto dir = fresh_dir("select");
    spit(dir / "pool.csv", kPoolCsv);
    const auto res = run_cli("select --input " + (dir / "pool.csv").string() + " --output " +
                             (dir / "sel.txt").string() + " --strategy MT-AVG --n 1");
    REQUIRE(res.code == 0);
    CHECK(slurp(dir / "sel.txt") == "2\n");
    CHECK(fs::exists(dir / "sel.txt.manifest.json"));
}

TEST_CASE("select n=0 writes an empty file") {
    const auto dir = fresh_dir("select0");
    spit(dir / "pool.csv", kPoolCsv);
    const auto res = run_cli("select --input " + (dir / "pool.csv").string() + " --output " +
                             (dir / "sel.txt").string() + " --strategy MT-EC --n 0");
    REQUIRE(res.code == 0);
    CHECK(slurp(dir / "sel.txt").empty());
}

TEST_CASE("select exit codes: usage and input format") {
    const auto dir = fresh_dir("selerr");
    spit(dir / "pool.csv", kPoolCsv);
    spit(dir / "bad.csv", "id,task_0\n1,oops\n");

    auto res = run_cli("select --input " + (dir / "pool.csv").string() + " --output " +
                       (dir / "x.txt").string() + " --strategy MT-FOO --n 1");
    CHECK(res.code == 2);

    res = run_cli("select --input " + (dir / "bad.csv").string() + " --output " +
                  (dir / "x.txt").string() + " --strategy MT-EC --n 1");
    CHECK(res.code == 3);
    CHECK(res.err.find("line 2") != std::string::npos);

    res = run_cli("select");
    CHECK(res.code == 2);
}

TEST_CASE("MTAL_SEED supplies the default seed only") {
    const auto dir = fresh_dir("envseed");
    spit(dir / "pool.csv", kPoolCsv);
    const auto base = "select --input " + (dir / "pool.csv").string() + " --strategy MT-R --n 2";

    auto res = run_cli(base + " --output " + (dir / "env.txt").string(), "MTAL_SEED=7 ");
    REQUIRE(res.code == 0);
    res = run_cli(base + " --output " + (dir / "flag.txt").string() + " --seed 7");
    REQUIRE(res.code == 0);
    CHECK(slurp(dir / "env.txt") == slurp(dir / "flag.txt"));

    // An explicit flag wins over the environment.
    res = run_cli(base + " --output " + (dir / "win.txt").string() + " --seed 3", "MTAL_SEED=7 ");
    REQUIRE(res.code == 0);
    res = run_cli(base + " --output " + (dir / "three.txt").string() + " --seed 3");
    REQUIRE(res.code == 0);
    CHECK(slurp(dir / "win.txt") == slurp(dir / "three.txt"));
}

TEST_CASE("budget solve matches the in-process solver") {
    const auto dir = fresh_dir("budget");
    spit(dir / "costs.csv", kCostCsv);
    const auto res = run_cli("budget --input " + (dir / "costs.csv").string() + " --output " +
                             (dir / "sol.json").string() + " --formulation JOINT --budget 15");
    REQUIRE(res.code == 0);

    std::istringstream in(kCostCsv);
    const auto table = read_confidence_csv(in);
    BudgetProgram program;
    program.formulation = Formulation::joint;
    program.ids = table.matrix.ids;
    program.costs = compute_costs(*table.sizes);
    program.budget = 15;
    program.uncertainty.resize(3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t t = 0; t < 2; ++t) program.uncertainty[i].push_back(1.0 - table.matrix.at(i, t));
    const auto expected = solve_budget_program(program);

    const auto sol = json::parse(slurp(dir / "sol.json"));
    CHECK(sol.at("objective").get<double>() == expected.objective);
    CHECK(sol.at("total_cost").get<std::int64_t>() == expected.total_cost);
    CHECK(sol.at("optimal").get<bool>() == expected.optimal);
    REQUIRE(sol.at("y").size() == expected.y.size());
    for (std::size_t i = 0; i < expected.y.size(); ++i)
        CHECK(sol.at("y")[i].get<bool>() == static_cast<bool>(expected.y[i]));
}

TEST_CASE("budget exit codes and default budget") {
    const auto dir = fresh_dir("budgeterr");
    spit(dir / "pool.csv", kPoolCsv);
    spit(dir / "costs.csv", kCostCsv);

    auto res = run_cli("budget --input " + (dir / "pool.csv").string() + " --output " +
                       (dir / "x.json").string());
    CHECK(res.code == 3);

    res = run_cli("budget --input " + (dir / "costs.csv").string() + " --output " +
                  (dir / "sol.json").string());
    REQUIRE(res.code == 0);
    const auto manifest = json::parse(slurp(dir / "sol.json.manifest.json"));
    CHECK(manifest.at("budget").get<std::int64_t>() == 500);

    res = run_cli("budget --input " + (dir / "costs.csv").string() + " --output " +
                  (dir / "y.json").string() + " --formulation NOPE");
    CHECK(res.code == 2);
}

namespace {

const std::string kSimConfig = R"({
  "experiment": {
    "scenario": "complementary",
    "iterations": 2,
    "initial_fraction": 0.02,
    "train": {"epochs": 10, "patience": 5},
    "corpus": {"train_size": 60, "test_size": 10, "dev_size": 2, "labels_a": 4, "labels_b": 4}
  },
  "strategies": ["MT-AVG", "MT-R"],
  "seeds": [1, 2],
  "pairs": [["MT-AVG", "MT-R"]]
})";

}

TEST_CASE("simulate writes records and reruns byte-identically") {
    const auto dir = fresh_dir("simulate");
    spit(dir / "sim.json", kSimConfig);
    const auto cfg = (dir / "sim.json").string();

    auto res = run_cli("simulate --config " + cfg + " --out-dir " + (dir / "a").string());
    REQUIRE(res.code == 0);
    res = run_cli("simulate --config " + cfg + " --out-dir " + (dir / "b").string());
    REQUIRE(res.code == 0);
    CHECK(slurp(dir / "a" / "records.json") == slurp(dir / "b" / "records.json"));
    CHECK(slurp(dir / "a" / "aggregate.csv") == slurp(dir / "b" / "aggregate.csv"));

    const auto records = json::parse(slurp(dir / "a" / "records.json"));
    REQUIRE(records.at("records").size() == 4);  // 2 strategies x 2 seeds
    CHECK(records["records"][0].at("strategy") == "MT-AVG");
    CHECK(records["records"][0].at("seed") == 1);

    const auto table = slurp(dir / "a" / "aggregate.csv");
    CHECK(table.find("p_value") != std::string::npos);
    CHECK(table.find("MT-AVG vs MT-R") != std::string::npos);

    // The report command reproduces the aggregate table from the records.
    res = run_cli("report --records " + (dir / "a" / "records.json").string() +
                  " --pair MT-AVG,MT-R");
    REQUIRE(res.code == 0);
    CHECK(res.out == table);
}

TEST_CASE("simulate config errors exit 4 naming the field") {
    const auto dir = fresh_dir("simerr");
    spit(dir / "bad.json", R"({"experiment": {"scenario": "complementary"}, "seeds": [1], "bogus": 3})");
    auto res = run_cli("simulate --config " + (dir / "bad.json").string() + " --out-dir " +
                       (dir / "o").string());
    CHECK(res.code == 4);
    CHECK(res.err.find("bogus") != std::string::npos);

    spit(dir / "sem.json", R"({"experiment": {"iterations": 0}, "seeds": [1]})");
    res = run_cli("simulate --config " + (dir / "sem.json").string() + " --out-dir " +
                  (dir / "o").string());
    CHECK(res.code == 4);
    CHECK(res.err.find("iterations") != std::string::npos);

    spit(dir / "syn.json", "not json");
    res = run_cli("simulate --config " + (dir / "syn.json").string() + " --out-dir " +
                  (dir / "o").string());
    CHECK(res.code == 3);
}

TEST_CASE("overlap matrix is symmetric with a 100 diagonal") {
    const auto dir = fresh_dir("overlap");
    spit(dir / "a.txt", "1\n2\n3\n");
    spit(dir / "b.txt", "4\n5\n6\n");
    spit(dir / "c.txt", "1\n2\n9\n");

    auto res = run_cli("overlap --output " + (dir / "ov.csv").string() + " " +
                       (dir / "a.txt").string() + " " + (dir / "b.txt").string() + " " +
                       (dir / "c.txt").string());
    REQUIRE(res.code == 0);
    const auto csv = slurp(dir / "ov.csv");
    CHECK(csv == "method,a,b,c\n"
                 "a,100,0,66.66666666666667\n"
                 "b,0,100,0\n"
                 "c,66.66666666666667,0,100\n");

    spit(dir / "short.txt", "1\n2\n");
    res = run_cli("overlap --output " + (dir / "x.csv").string() + " " + (dir / "a.txt").string() +
                  " " + (dir / "short.txt").string());
    CHECK(res.code == 3);
}

TEST_CASE("atomic writes replace existing files completely") {
    const auto dir = fresh_dir("atomic");
    const auto path = dir / "file.txt";
    atomic_write_file(path, "first version, quite long\n");
    atomic_write_file(path, "second\n");
    CHECK(slurp(path) == "second\n");
    CHECK_FALSE(fs::exists(dir / "file.txt.tmp"));
}
