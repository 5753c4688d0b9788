#include "scratch/io.hpp"
#include "scratch/report.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

int run(const std::string& cmd) {
    int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) { return scratch::read_file(p.string()); }

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("scratch_cli_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("attack subcommand produces results, report, manifest and images") {
    TempDir tmp;
    fs::path data = tmp.path / "toy";
    REQUIRE(run(std::string(TOYSET_PATH) + " --out " + data.string() +
                " --split attack --count 9") == 0);
    REQUIRE(fs::exists(data / "labels.csv"));

    fs::path cfg = tmp.path / "toy.toml";
    {
        std::ofstream out(cfg);
        out << "# attack configuration\n"
            << "shape=bezier\n"
            << "scratches=1\n"
            << "population=15\n"
            << "iterations=12\n"
            << "budget=400\n"
            << "seed=5\n";
    }

    fs::path out_dir = tmp.path / "runs" / "a";
    std::string cmd = std::string(SCRATCHKIT_CLI_PATH) + " attack --config " + cfg.string() +
                      " --images " + data.string() + " --out " + out_dir.string() +
                      " --model " + TOY_MODEL_PATH + " --budget 620";
    REQUIRE(run(cmd) == 0);

    CHECK(fs::exists(out_dir / "results.jsonl"));
    CHECK(fs::exists(out_dir / "report.csv"));
    CHECK(fs::exists(out_dir / "manifest.json"));
    CHECK(slurp(out_dir / "report.csv").find("Scratches,Success Rate,Queries,Coverage") == 0);

    // flags beat the config file: budget must be 620, not 400
    CHECK(slurp(out_dir / "configs.json").find("\"budget\":620") != std::string::npos);

    // every successful record got an adversarial image on disk
    std::istringstream results(slurp(out_dir / "results.jsonl"));
    std::string line;
    int successes = 0;
    while (std::getline(results, line)) {
        auto rec = scratch::record_from_jsonl(line);
        if (rec.result.success) {
            ++successes;
            fs::path img = out_dir / "adv" /
                           (fs::path(rec.name).stem().string() + "_r" +
                            std::to_string(rec.restart) + ".ppm");
            CHECK(fs::exists(img));
        }
        CHECK(rec.result.queries <= 620);
    }

    SUBCASE("defend consumes the finished run") {
        if (successes == 0) return;  // nothing to defend against
        fs::path def_dir = tmp.path / "runs" / "defended";
        std::string defend = std::string(SCRATCHKIT_CLI_PATH) + " defend --run " +
                             out_dir.string() + " --defense median --images " + data.string() +
                             " --out " + def_dir.string() + " --model " + TOY_MODEL_PATH;
        REQUIRE(run(defend) == 0);
        CHECK(slurp(def_dir / "recovery.csv")
                  .find("Method,Recovery Rate,Network Domain,Image Domain") == 0);
        CHECK(fs::exists(def_dir / "recovery_log.jsonl"));

        std::string jpeg = std::string(SCRATCHKIT_CLI_PATH) + " defend --run " +
                           out_dir.string() + " --defense jpeg --quality 90 --out " +
                           (tmp.path / "runs" / "j").string() + " --model " + TOY_MODEL_PATH;
        CHECK(run(jpeg) == 0);
        CHECK(slurp(tmp.path / "runs" / "j" / "recovery.csv").find("jpeg-q90") !=
              std::string::npos);
    }

    SUBCASE("report re-aggregates the run") {
        std::string cmd2 = std::string(SCRATCHKIT_CLI_PATH) + " report --run " +
                           out_dir.string() + " --matrix --classes 3 > " +
                           (tmp.path / "report_out.txt").string();
        REQUIRE(WEXITSTATUS(std::system(cmd2.c_str())) == 0);
        std::string text = slurp(tmp.path / "report_out.txt");
        CHECK(text.find("Scratches,Success Rate,Queries,Coverage") == 0);
        CHECK(text.find("Source\\Target") != std::string::npos);
    }

    SUBCASE("predict probes a single image") {
        std::string name;
        {
            std::ifstream labels(data / "labels.csv");
            std::getline(labels, name);
            name = name.substr(0, name.find(','));
        }
        std::string cmd3 = std::string(SCRATCHKIT_CLI_PATH) + " predict --model " +
                           TOY_MODEL_PATH + " " + (data / name).string();
        CHECK(run(cmd3) == 0);
    }
}

TEST_CASE("missing config file exits with a usage error naming the path") {
    TempDir tmp;
    std::string out = (tmp.path / "err.txt").string();
    std::string cmd = std::string(SCRATCHKIT_CLI_PATH) +
                      " attack --config /nowhere/missing.toml --images x --model y 2> " + out;
    int status = WEXITSTATUS(std::system(cmd.c_str()));
    CHECK(status == 2);
    CHECK(slurp(out).find("missing.toml") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run(std::string(SCRATCHKIT_CLI_PATH) + " defend --run /nonexistent --defense blur") ==
          2);
    CHECK(run(std::string(SCRATCHKIT_CLI_PATH) + " attack") == 2);       // missing --images
    CHECK(run(std::string(SCRATCHKIT_CLI_PATH) + " no-such-command") == 2);
}

TEST_CASE("backend failures exit with code 3") {
    TempDir tmp;
    fs::path img = tmp.path / "probe.ppm";
    scratch::Image white(4, 4);
    for (auto& p : white.plane) p.setConstant(1.0);
    scratch::save_ppm(white, img.string());
    CHECK(run(std::string(SCRATCHKIT_CLI_PATH) + " predict --remote 127.0.0.1:1 --classes 3 " +
              img.string()) == 3);
}
