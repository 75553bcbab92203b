#include "llg/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using llg::io::json;

namespace {

const fs::path scratch = fs::temp_directory_path() / "llgctl_test";

int llgctl(const std::string& args) {
    const std::string cmd = std::string(LLGCTL_PATH) + " " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path write_config(const std::string& name, const std::string& text) {
    fs::create_directories(scratch);
    const fs::path p = scratch / name;
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

// every output except the manifest is referenced by it exactly once
void expect_manifest_covers(const fs::path& dir) {
    const json m = load(dir / "manifest.json");
    std::map<std::string, int> refs;
    for (const auto& f : m["files"]) ++refs[f.get<std::string>()];
    for (const auto& r : m["runs"])
        for (const auto& f : r["files"]) ++refs[f.get<std::string>()];
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name == "manifest.json") continue;
        EXPECT_EQ(refs[name], 1) << name;
    }
}

} // namespace

TEST(Cli, EmptyAndMalformedConfigsAreSchemaErrors) {
    EXPECT_EQ(llgctl("profile --config " + write_config("empty.json", "{}").string() + " --out " + (scratch / "e").string()), 2);
    EXPECT_EQ(llgctl("profile --config " + write_config("blank.json", "").string() + " --out " + (scratch / "e").string()), 2);
    EXPECT_EQ(llgctl("profile --config " + write_config("unknown.json", R"({"command":"profile","profile":{"c":0.5,"cc":1}})").string() +
                     " --out " + (scratch / "e").string()),
              2);
    EXPECT_EQ(llgctl("regime --config " + write_config("mismatch.json", R"({"command":"profile","profile":{}})").string() +
                     " --out " + (scratch / "e").string()),
              2);
    EXPECT_EQ(llgctl("profile --config " + (scratch / "missing.json").string()), 2);
    EXPECT_EQ(llgctl("nonsense"), 2);
}

TEST(Cli, ConstantProfileForZeroCurvature) {
    const auto out = scratch / "zero";
    fs::remove_all(out);
    ASSERT_EQ(llgctl("profile --config " +
                     write_config("zero.json", R"({"command":"profile","profile":{"c":0,"alpha":0.5,"x_max":2,"h":0.1}})").string() +
                     " --out " + out.string()),
              0);
    std::ifstream in(out / "profile_00.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "x,m1,m2,m3,n1,n2,n3,b1,b2,b3,k,tau");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::stringstream s(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(s, cell, ',')) v.push_back(std::stod(cell));
        EXPECT_EQ(v[1], 1.0);
        EXPECT_EQ(v[2], 0.0);
        EXPECT_EQ(v[3], 0.0);
    }
    EXPECT_EQ(rows, 41);
    expect_manifest_covers(out);
}

TEST(Cli, HydroSolitonRunHasDriftColumnsAndIsDeterministic) {
    const auto cfg = fs::path(LLG_CONFIG_DIR) / "evolve_hydro_soliton.json";
    const auto a = scratch / "hydro_a", b = scratch / "hydro_b";
    fs::remove_all(a), fs::remove_all(b);
    ASSERT_EQ(llgctl("evolve --config " + cfg.string() + " --out " + a.string() + " --seed 11"), 0);
    ASSERT_EQ(llgctl("evolve --config " + cfg.string() + " --out " + b.string() + " --seed 11 --threads 2"), 0);
    for (const char* f : {"diagnostics.csv", "trajectory.csv", "modulation.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    const std::string diag = slurp(a / "diagnostics.csv");
    EXPECT_EQ(diag.substr(0, diag.find('\n')), "t,E,P,sqrt_t_grad_sup,E_drift,P_drift");
    const json m = load(a / "manifest.json");
    EXPECT_EQ(m["runs"][0]["status"], "completed");
    EXPECT_LE(m["runs"][0]["metrics"]["modulation"]["max_distance"].get<double>(), 5e-3);
    EXPECT_EQ(m["seeds"]["perturbation"], 11);
    expect_manifest_covers(a);
    // a different seed perturbs differently
    const auto c = scratch / "hydro_c";
    ASSERT_EQ(llgctl("evolve --config " + cfg.string() + " --out " + c.string() + " --seed 12"), 0);
    EXPECT_NE(slurp(a / "trajectory.csv"), slurp(c / "trajectory.csv"));
}

TEST(Cli, SineGordonSweepReportsSlope) {
    const auto out = scratch / "sg";
    fs::remove_all(out);
    ASSERT_EQ(llgctl("regime --config " + (fs::path(LLG_CONFIG_DIR) / "regime_sg.json").string() + " --out " + out.string()), 0);
    const json r = load(out / "report.json");
    ASSERT_TRUE(r.contains("slope"));
    EXPECT_NEAR(r["slope"].get<double>(), 2.0, 0.3);
    EXPECT_EQ(r["param"].size(), 4u);
    expect_manifest_covers(out);
}

TEST(Cli, GuardAbortExitsZeroWithStatus) {
    const auto out = scratch / "guard";
    fs::remove_all(out);
    const auto cfg = write_config("guard.json", R"({"command":"evolve","evolve":{"formulation":"llg","alpha":1,
        "initial":{"type":"self_similar","c":3,"alpha":1,"t0":1e-4},"guards":{"blowup_ceiling":0.5},"T":0.1}})");
    ASSERT_EQ(llgctl("evolve --config " + cfg.string() + " --out " + out.string()), 0);
    EXPECT_EQ(load(out / "manifest.json")["runs"][0]["status"], "guard-aborted");
}

TEST(Cli, NumericalFailureExitsThree) {
    const auto out = scratch / "cap";
    fs::remove_all(out);
    const auto cfg = write_config("cap.json", R"({"command":"evolve","caps":{"max_steps":10},
        "evolve":{"formulation":"llg","T":1.0,"grid":{"n":201}}})");
    EXPECT_EQ(llgctl("evolve --config " + cfg.string() + " --out " + out.string()), 3);
    EXPECT_EQ(load(out / "manifest.json")["runs"][0]["status"], "failed");
}

TEST(Cli, AngleMapClosedFormAtFullDamping) {
    const auto out = scratch / "angle";
    fs::remove_all(out);
    const auto cfg = write_config("angle.json", R"({"command":"angle-map","angle_map":{"alpha":1,"c_max":2,"n":20}})");
    ASSERT_EQ(llgctl("angle-map --config " + cfg.string() + " --out " + out.string() + " --threads 4"), 0);
    const json m = load(out / "manifest.json");
    EXPECT_LE(m["runs"][0]["metrics"]["max_closed_form_deviation"].get<double>(), 1e-8);
    EXPECT_TRUE(m.contains("figure"));
    expect_manifest_covers(out);
}
