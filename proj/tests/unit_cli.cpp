#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "cfb/io.hpp"
#include "support.hpp"

#ifndef CFB_CLI_PATH
#error "CFB_CLI_PATH must point at the built command-line binary"
#endif

using namespace cfb;

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
    std::string cmd = std::string(CFB_CLI_PATH) + " " + args + " 2> /dev/null";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fixture_dir() {
    fs::path dir = fs::temp_directory_path() / "cfb_cli_test";
    fs::create_directories(dir);
    return dir;
}

std::string write_fixture(const fs::path& dir, const std::string& name,
                          const std::string& content) {
    std::string path = (dir / name).string();
    write_file(path, content);
    return path;
}

} // namespace

TEST_CASE("validate: exit codes for valid, invalid, and unparseable input") {
    fs::path dir = fixture_dir();
    ModelDoc doc = cfb::test::drug_trial_doc();
    std::string good = write_fixture(dir, "model.json", model_to_json(doc));
    CHECK(run_cli("validate --model " + good) == 0);

    // A constant mechanism is not surjective.
    ModelDoc bad = doc;
    auto& table = bad.model.equations[1]->table;
    std::fill(table.begin(), table.end(), 0);
    std::string broken = write_fixture(dir, "broken.json", model_to_json(bad));
    CHECK(run_cli("validate --model " + broken) == 1);

    std::string garbage = write_fixture(dir, "garbage.json", "{ not json");
    CHECK(run_cli("validate --model " + garbage) == 2);
    CHECK(run_cli("validate --model " + (dir / "absent.json").string()) == 2);
}

TEST_CASE("query: fuses studies and writes the result files") {
    fs::path dir = fixture_dir();
    ModelDoc doc = cfb::test::drug_trial_doc();
    std::string model = write_fixture(dir, "model.json", model_to_json(doc));
    write_fixture(dir, "obs.csv", dataset_to_csv(cfb::test::observational_study(), doc));
    write_fixture(dir, "int.csv", dataset_to_csv(cfb::test::interventional_study(), doc));
    std::string studies = write_fixture(dir, "studies.json",
                                        R"([{"dataset": "obs.csv"},
                                            {"dataset": "int.csv", "intervened": ["V1"]}])");
    std::string query = write_fixture(
        dir, "query.json",
        R"({"kind":"PNS","cause":"V1","effect":"V3",
            "cause_true":"drug","cause_false":"no_drug",
            "effect_true":"survived","effect_false":"dead"})");
    fs::path out = dir / "out";
    int code = run_cli("query --model " + model + " --studies " + studies + " --query " + query +
                       " --runs 16 --seed 2 --threads 2 --out " + out.string());
    CHECK(code == 0);
    REQUIRE(fs::exists(out / "result.json"));
    REQUIRE(fs::exists(out / "per_run.csv"));
    std::string result = read_file((out / "result.json").string());
    CHECK(result.find("\"lower\"") != std::string::npos);
    CHECK(result.find("\"upper\"") != std::string::npos);
    CHECK(result.find("manifest_hash") != std::string::npos);
}

TEST_CASE("query: missing fixture files give the input-error exit code") {
    fs::path dir = fixture_dir();
    ModelDoc doc = cfb::test::drug_trial_doc();
    std::string model = write_fixture(dir, "model.json", model_to_json(doc));
    std::string query = write_fixture(
        dir, "q2.json", R"({"kind":"PNS","cause":"V1","effect":"V3"})");
    CHECK(run_cli("query --model " + model + " --studies " + (dir / "nope.json").string() +
                  " --query " + query + " --runs 2") == 2);
}

TEST_CASE("bias-sweep: writes per-level ranges for an observational study") {
    fs::path dir = fixture_dir();
    ModelDoc doc = cfb::test::pair_doc();
    std::string model = write_fixture(dir, "pair.json", model_to_json(doc));
    write_fixture(dir, "pair.csv", dataset_to_csv(cfb::test::pair_observational(), doc));
    std::string studies =
        write_fixture(dir, "pair_studies.json", R"([{"dataset": "pair.csv"}])");
    std::string query = write_fixture(
        dir, "pair_query.json",
        R"({"kind":"PNS","cause":"V1","effect":"V3",
            "cause_true":"drug","cause_false":"no_drug",
            "effect_true":"survived","effect_false":"dead"})");
    fs::path out = dir / "sweep";
    int code = run_cli("bias-sweep --model " + model + " --studies " + studies + " --query " +
                       query + " --levels 1.0 0.5 --runs 8 --seed 4 --threads 2 --out " +
                       out.string());
    CHECK(code == 0);
    REQUIRE(fs::exists(out / "sweep_ranges.csv"));
    std::string ranges = read_file((out / "sweep_ranges.csv").string());
    // One line per requested level.
    CHECK(ranges.find("\n1,") != std::string::npos);
    CHECK(ranges.find("\n0.5,") != std::string::npos);
}

TEST_CASE("bench: a one-model batch writes its records and summary") {
    fs::path dir = fixture_dir();
    std::string cfg = write_fixture(dir, "bench.json",
                                    R"({"n_models": 1, "n_endogenous_min": 4,
                                        "n_endogenous_max": 5, "dataset_size": 200,
                                        "runs": 3, "max_iterations": 50,
                                        "seed": 6, "threads": 1})");
    fs::path out = dir / "bench";
    int code = run_cli("bench --config " + cfg + " --out " + out.string());
    CHECK(code == 0);
    CHECK(fs::exists(out / "bench.csv"));
    CHECK(fs::exists(out / "summary.json"));
}
