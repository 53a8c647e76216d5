#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "pirt/io.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("PIRT_CLI");
    REQUIRE(env != nullptr);
    return env;
}

int run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("pirt_cli_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static inline int counter = 0;
};

} // namespace

TEST_CASE("synth -> train -> predict -> analyze round trip") {
    TempDir dir;
    const std::string d = dir.path.string();

    REQUIRE(run("synth --out-dir " + d + " --respondents 30 --items-count 20 "
                "--responses-per-respondent 10 --seed 4") == 0);
    REQUIRE(fs::exists(dir.path / "responses.jsonl"));
    REQUIRE(fs::exists(dir.path / "items.jsonl"));
    REQUIRE(fs::exists(dir.path / "truth_model.json"));
    REQUIRE(fs::exists(dir.path / "features.json"));
    REQUIRE(fs::exists(dir.path / "true_abilities.csv"));

    REQUIRE(run("train --responses " + d + "/responses.jsonl --items " + d + "/items.jsonl"
                " --feature-config " + d + "/features.json --out-dir " + d +
                " --epochs 20 --seed 4") == 0);
    REQUIRE(fs::exists(dir.path / "model.json"));
    REQUIRE(fs::exists(dir.path / "train_log.csv"));

    // model file carries the resolved config
    const auto model = nlohmann::json::parse(pirt::read_file(dir.path / "model.json"));
    CHECK(model.contains("config"));
    CHECK(model.at("config").at("train").at("epochs") == 20);

    REQUIRE(run("predict --model " + d + "/model.json --responses " + d + "/responses.jsonl"
                " --items " + d + "/items.jsonl --out " + d + "/predictions.csv") == 0);
    REQUIRE(fs::exists(dir.path / "predictions.csv"));
    const std::string preds = pirt::read_file(dir.path / "predictions.csv");
    CHECK(preds.rfind("respondent,item,probability,label", 0) == 0);

    REQUIRE(run("analyze --model " + d + "/model.json --out-dir " + d) == 0);
    REQUIRE(fs::exists(dir.path / "abilities.csv"));
    REQUIRE(fs::exists(dir.path / "weights.csv"));
}

TEST_CASE("train is byte-identical across reruns and thread counts") {
    TempDir dir;
    const std::string d = dir.path.string();
    REQUIRE(run("synth --out-dir " + d + " --respondents 20 --items-count 12 "
                "--responses-per-respondent 8 --seed 9") == 0);

    const std::string base = "train --responses " + d + "/responses.jsonl --items " + d +
                             "/items.jsonl --feature-config " + d +
                             "/features.json --epochs 10 --seed 9 --out-dir " + d;
    REQUIRE(run(base + " --model " + d + "/m1.json") == 0);
    REQUIRE(run(base + " --model " + d + "/m2.json") == 0);
    REQUIRE(run(base + " --model " + d + "/m3.json --threads 4") == 0);
    const std::string m1 = pirt::read_file(dir.path / "m1.json");
    CHECK(m1 == pirt::read_file(dir.path / "m2.json"));
    CHECK(m1 == pirt::read_file(dir.path / "m3.json"));
}

TEST_CASE("cv writes reports and respects fold bounds") {
    TempDir dir;
    const std::string d = dir.path.string();
    REQUIRE(run("synth --out-dir " + d + " --respondents 20 --items-count 8 "
                "--responses-per-respondent 6 --seed 2") == 0);

    const std::string base = "cv --responses " + d + "/responses.jsonl --items " + d +
                             "/items.jsonl --feature-config " + d + "/features.json --epochs 5";
    SECTION("k larger than item count is a config error") {
        CHECK(run(base + " --folds 20 --out-dir " + d) == 2);
    }
    SECTION("folds 2 on a small dataset") {
        REQUIRE(run(base + " --folds 2 --seed 1 --out-dir " + d) == 0);
        REQUIRE(fs::exists(dir.path / "cv_report.json"));
        REQUIRE(fs::exists(dir.path / "cv_report.csv"));
        const auto report = nlohmann::json::parse(pirt::read_file(dir.path / "cv_report.json"));
        CHECK(report.at("folds") == 2);
        CHECK(report.at("models").at(0).at("fold_accuracy").size() == 2);
    }
    SECTION("cv reports are byte-identical across reruns") {
        REQUIRE(run(base + " --folds 2 --seed 1 --out-dir " + d) == 0);
        const std::string first = pirt::read_file(dir.path / "cv_report.json");
        REQUIRE(run(base + " --folds 2 --seed 1 --out-dir " + d + " --threads 4") == 0);
        CHECK(first == pirt::read_file(dir.path / "cv_report.json"));
    }
}

TEST_CASE("exit codes") {
    TempDir dir;
    const std::string d = dir.path.string();
    // missing responses file -> data error
    CHECK(run("train --responses " + d + "/nope.jsonl --feature-config " + d + "/nope.json") == 3);
    REQUIRE(run("synth --out-dir " + d + " --respondents 5 --items-count 4 "
                "--responses-per-respondent 3 --seed 1") == 0);
    CHECK(run("train --responses " + d + "/missing.jsonl --items " + d + "/items.jsonl"
              " --feature-config " + d + "/features.json") == 3);
    // bad preset -> config error
    CHECK(run("train --responses " + d + "/responses.jsonl --items " + d + "/items.jsonl"
              " --feature-config " + d + "/features.json --preset nonsense") == 2);
    // synth with zero items -> config error
    CHECK(run("synth --out-dir " + d + " --items-count 0") == 2);
    // unknown flag -> config error
    CHECK(run("train --definitely-not-a-flag") == 2);
}

TEST_CASE("gradcheck subcommand") {
    CHECK(run("gradcheck --cases 3") == 0);
    CHECK(run("gradcheck --cases 2 --inject-sign-fault") == 4);
    CHECK(run("gradcheck --cases 2 --rasch-only") == 0);
}

TEST_CASE("help lists flags with defaults") {
    const std::string out_file = (fs::temp_directory_path() / "pirt_help.txt").string();
    const int status = std::system((cli_path() + " train --help > " + out_file + " 2>&1").c_str());
    REQUIRE(status != -1);
    CHECK(WEXITSTATUS(status) == 0);
    const std::string help = pirt::read_file(out_file);
    CHECK(help.find("--seed") != std::string::npos);
    CHECK(help.find("--preset") != std::string::npos);
    CHECK(help.find("--model-kind") != std::string::npos);
    fs::remove(out_file);
}

TEST_CASE("analyze computes covariate correlations") {
    TempDir dir;
    const std::string d = dir.path.string();
    REQUIRE(run("synth --out-dir " + d + " --respondents 25 --items-count 15 "
                "--responses-per-respondent 8 --seed 6") == 0);
    REQUIRE(run("train --responses " + d + "/responses.jsonl --items " + d + "/items.jsonl"
                " --feature-config " + d + "/features.json --out-dir " + d +
                " --epochs 15 --seed 6") == 0);

    // covariate = the true abilities themselves; correlation must be strong
    {
        const std::string truth = pirt::read_file(dir.path / "true_abilities.csv");
        std::ofstream cov(dir.path / "covariates.csv");
        cov << "respondent_id,true_ability\n";
        std::istringstream in(truth);
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line))
            if (!line.empty()) cov << line << "\n";
    }
    REQUIRE(run("analyze --model " + d + "/model.json --out-dir " + d + " --covariates " + d +
                "/covariates.csv") == 0);
    REQUIRE(fs::exists(dir.path / "correlations.csv"));
    const std::string csv = pirt::read_file(dir.path / "correlations.csv");
    CHECK(csv.rfind("covariate,pearson_r,p_value,n", 0) == 0);
    CHECK(csv.find("true_ability") != std::string::npos);
}
