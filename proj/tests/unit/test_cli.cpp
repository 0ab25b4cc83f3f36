#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "app.hpp"
#include "helpers.hpp"
#include "oppsched/fluid.hpp"
#include "presets.hpp"

using namespace oppsched;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string config_path() { return std::string(OPPSCHED_SOURCE_DIR) + "/configs/cdma_table1.json"; }

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

std::vector<std::string> split(const std::string& row) {
    std::vector<std::string> out;
    std::istringstream is(row);
    for (std::string c; std::getline(is, c, ',');) out.push_back(c);
    return out;
}

}  // namespace

TEST_CASE("validate") {
    const auto ok = run({"validate", config_path()});
    CHECK(ok.code == cli::kExitOk);
    CHECK(ok.out.find("rho = 0.85") != std::string::npos);

    const auto bad = testing::temp_path("bad.json");
    std::ofstream(bad) << R"({"classes": [{"lambda": -1, "q": [0.5, 0.6], "mu": [0.2, 0.1]}]})";
    const auto r = run({"validate", bad.string()});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("invalid config") != std::string::npos);
    CHECK(lines(r.err).size() >= 3);

    const auto junk = testing::temp_path("junk.json");
    std::ofstream(junk) << "{ not json";
    CHECK(run({"validate", junk.string()}).code == cli::kExitUsage);
}

TEST_CASE("usage errors exit with 2") {
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"frobnicate"}).code == cli::kExitUsage);
    CHECK(run({"fluid", config_path(), "--x0", "1,abc"}).code == cli::kExitUsage);
    CHECK(run({"fluid", config_path(), "--x0", "1"}).code == cli::kExitUsage);
    CHECK(run({"drift", config_path(), "--policy", "nope"}).code == cli::kExitUsage);
    CHECK(run({"drift", config_path(), "--sat", "7"}).code == cli::kExitUsage);
    CHECK(run({"stability", config_path(), "--sweep", "mu1:0:1"}).code == cli::kExitUsage);
    CHECK(run({"simulate", config_path(), "--r", "0.5"}).code == cli::kExitUsage);
    CHECK(run({"preset", "fig9", "--out-dir", testing::temp_path("fig9").string()}).code == cli::kExitUsage);
    CHECK(run({"preset", "fig2", "--r", "-3", "--out-dir", testing::temp_path("neg").string()}).code ==
          cli::kExitUsage);
}

TEST_CASE("solver errors exit with 1") {
    auto cfg = cdma::two_class(0.24);
    const auto path = testing::temp_path("overload.json");
    write_config(cfg, path);
    const auto r = run({"drift", path.string(), "--policy", "sb", "--sat", "2"});
    CHECK(r.code == cli::kExitRuntime);
    CHECK(r.err.find("not ergodic") != std::string::npos);
}

TEST_CASE("CSV layout and repeatability") {
    const std::vector<std::string> sim{"simulate", config_path(), "--policy", "pi", "--r", "200",
                                       "--horizon", "5", "--dt", "0.5", "--seed", "9"};
    const auto a = run(sim);
    const auto b = run(sim);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    const auto ls = lines(a.out);
    REQUIRE(ls.size() > 2);
    CHECK(ls[0].rfind("# manifest: ", 0) == 0);
    const auto m = nlohmann::json::parse(ls[0].substr(12));
    CHECK(m["command"] == "simulate");
    CHECK(m["seed"] == 9);
    CHECK(m["config"]["classes"].size() == 2);

    auto other = sim;
    other.back() = "10";
    CHECK(run(other).out != a.out);

    const auto out = testing::temp_path("sim.csv");
    auto to_file = sim;
    to_file.insert(to_file.end(), {"--out", out.string()});
    CHECK(run(to_file).code == 0);
    CHECK(slurp(out) == a.out);
}

TEST_CASE("drift, fluid, control and stability subcommands") {
    {
        const auto r = run({"drift", config_path(), "--policy", "pi"});
        REQUIRE(r.code == 0);
        const auto ls = lines(r.out);
        REQUIRE(ls.size() == 4);
        CHECK(split(ls[2]).size() == split(ls[1]).size());
    }
    {
        const auto r = run({"fluid", config_path(), "--policy", "pi", "--x0", "1,1"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("3.84615385") != std::string::npos);
        CHECK(r.out.find("83.3333333") != std::string::npos);
    }
    {
        const auto r = run({"control", config_path(), "--x0", "1,1"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("0.65") != std::string::npos);
    }
    {
        const auto r = run({"stability", config_path(), "--policy", "pb"});
        REQUIRE(r.code == 0);
        const auto row = split(lines(r.out).back());
        CHECK(row.back() == "1");
    }
    {
        const auto r = run({"stability", config_path(), "--policy", "rb", "--sweep", "lambda1:0.004:0.196"});
        REQUIRE(r.code == 0);
        const auto row = split(lines(r.out).back());
        const auto th = stability_threshold(parse_policy("rb", "", 2), load_config(config_path()), {0, 0.004, 0.196});
        CHECK(std::stod(row.back()) == doctest::Approx(th.rho_star).epsilon(1e-8));
    }
}

TEST_CASE("preset files and manifest re-run") {
    const auto dir = testing::temp_path("preset_fig2");
    fs::remove_all(dir);
    const auto r = run({"preset", "fig2", "--r", "10", "--seed", "3", "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["preset"] == "fig2");
    CHECK(manifest["overrides"]["r"] == 10.0);
    REQUIRE(manifest["files"].size() == 10);
    for (const auto& f : manifest["files"]) CHECK(fs::exists(dir / f.get<std::string>()));

    // rebuild the run from the manifest alone
    cli::PresetOverrides ov;
    const auto& o = manifest["overrides"];
    if (o.contains("seed")) ov.seed = o["seed"].get<std::uint64_t>();
    if (o.contains("r")) ov.r = o["r"].get<double>();
    if (o.contains("horizon")) ov.horizon = o["horizon"].get<double>();
    const auto again = testing::temp_path("preset_fig2_again");
    fs::remove_all(again);
    std::ostringstream log;
    cli::run_preset(manifest["preset"].get<std::string>(), again, ov, log);
    for (const auto& f : manifest["files"]) {
        const auto name = f.get<std::string>();
        CHECK(slurp(dir / name) == slurp(again / name));
    }
    CHECK(slurp(dir / "manifest.json") == slurp(again / "manifest.json"));
}

TEST_CASE("table presets") {
    const auto dir = testing::temp_path("preset_table2");
    REQUIRE(run({"preset", "table2", "--out-dir", dir.string()}).code == 0);
    const auto ls = lines(slurp(dir / "table2_drift.csv"));
    CHECK(ls.size() > 2);
    CHECK(ls[0].rfind("# manifest: ", 0) == 0);

    const auto t1 = testing::temp_path("preset_table1");
    REQUIRE(run({"preset", "table1_check", "--out-dir", t1.string()}).code == 0);
    CHECK(lines(slurp(t1 / "table1_check.csv")).size() == 2 + 11 + 7);
}
