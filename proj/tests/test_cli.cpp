#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "trafficuq/cli/commands.hpp"
#include "trafficuq/cli/run_config.hpp"
#include "trafficuq/common/csv.hpp"
#include "trafficuq/common/io.hpp"
#include "trafficuq/common/math.hpp"
#include "trafficuq/safety/certificate.hpp"
#include "trafficuq/sim/dataset.hpp"

namespace fs = std::filesystem;
using namespace tuq;

namespace {

struct CliRun {
    int code = 0;
    std::string out, err;
};

CliRun cli(const std::vector<std::string>& args) {
    std::ostringstream o, e;
    CliRun r;
    r.code = run_cli(args, o, e);
    r.out = o.str();
    r.err = e.str();
    return r;
}

fs::path fresh(const std::string& name) {
    const fs::path p = fs::path(TRAFFICUQ_TEST_TMP) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// generate + calibrate once for every case that needs a fitted detector
struct Fixture {
    fs::path data, model;
    Fixture() {
        data = fresh("data");
        model = fresh("model");
        REQUIRE(cli({"generate", "--out", data.string(), "--steps", "600", "--seed", "4"}).code == 0);
        REQUIRE(cli({"calibrate", "--data", data.string(), "--out", model.string(), "--set", "detection.clusters=4"})
                    .code == 0);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

}  // namespace

TEST_CASE("generate is deterministic per seed") {
    const auto a = fresh("gen_a"), b = fresh("gen_b"), c = fresh("gen_c");
    CHECK(cli({"generate", "--out", a.string(), "--steps", "300", "--seed", "1"}).code == 0);
    CHECK(cli({"generate", "--out", b.string(), "--steps", "300", "--seed", "1"}).code == 0);
    CHECK(cli({"generate", "--out", c.string(), "--steps", "300", "--seed", "2"}).code == 0);
    CHECK(read_file(a / "observations.csv") == read_file(b / "observations.csv"));
    CHECK(read_file(a / "dataset.json") == read_file(b / "dataset.json"));
    CHECK(read_file(a / "observations.csv") != read_file(c / "observations.csv"));
    CHECK(fs::exists(a / "config.json"));
}

TEST_CASE("configuration errors exit with 2") {
    const auto out = fresh("errs");
    CHECK(cli({"generate", "--out", (out / "missing").string()}).code == kExitConfig);
    CHECK(cli({"generate", "--out", out.string(), "--set", "sim.no_such_key=1"}).code == kExitConfig);
    CHECK(cli({"generate", "--out", out.string(), "--set", "nosection.x=1"}).code == kExitConfig);
    CHECK(cli({"generate", "--out", out.string(), "--steps", "100"}).code == kExitConfig);
    CHECK(cli({"bogus"}).code == kExitConfig);
    CHECK(cli({}).code == kExitConfig);
    CHECK(cli({"certify", "--out", out.string()}).code == kExitConfig);
    const auto r = cli({"calibrate", "--data", (out / "nowhere").string(), "--out", out.string()});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("run config overrides and round trip") {
    Json doc = RunConfig{}.to_json();
    apply_override(doc, "sim.base_rate=0.25");
    apply_override(doc, "detection.procedure=\"BH\"");
    const auto rc = RunConfig::from_json(doc);
    CHECK(rc.sim.base_rate == 0.25);
    const std::string a = dump_json(rc.to_json());
    CHECK(dump_json(RunConfig::from_json(Json::parse(a)).to_json()) == a);
    CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), std::invalid_argument);
}

TEST_CASE("calibrate writes a ledger that round trips byte for byte") {
    const auto& f = fixture();
    const std::string text = read_file(f.model / "ledger.json");
    CHECK(dump_json(CalibrationLedger::from_json(Json::parse(text)).to_json()) == text);
    const Json cov = read_json(f.model / "coverage.json");
    CHECK(cov.at("coverage").get<double>() > 0.5);
    CHECK(fs::exists(f.model / "pit.csv"));
    CHECK(fs::exists(f.model / "reliability.csv"));
}

TEST_CASE("detect then audit") {
    const auto& f = fixture();
    const auto det = fresh("detect");
    auto r = cli({"detect", "--data", f.data.string(), "--model", f.model.string(), "--out", det.string()});
    REQUIRE(r.code == 0);
    const Json rep = read_json(det / "fdr_report.json");
    CHECK(rep.at("c_m").get<double>() == doctest::Approx(harmonic_number(144)));
    const Panel pv = long_to_panel(read_csv(det / "pvalues.csv"), "value");
    const auto d = read_dataset(f.data);
    CHECK(pv.steps == d.splits.test_end - d.splits.test_begin);
    for (double p : pv.values) {
        CHECK(p > 0.0);
        CHECK(p <= 1.0);
    }

    const auto aud = fresh("audit");
    r = cli({"audit-fdr", "--pvalues", (det / "pvalues.csv").string(), "--data", f.data.string(), "--out",
             aud.string(), "--set", "audit.replicates=100"});
    CHECK(r.code == 0);
    CHECK(fs::exists(aud / "dependence_report.json"));

    // a panel shorter than one time block is rejected
    CsvTable tiny = panel_to_long(pv.slice(0, 2), "value");
    write_csv(aud / "tiny.csv", tiny);
    CHECK(cli({"audit-fdr", "--pvalues", (aud / "tiny.csv").string(), "--out", aud.string()}).code == kExitConfig);
}

TEST_CASE("detect rejects an empty test block") {
    const auto& f = fixture();
    const auto broken = fresh("broken_data");
    for (const auto& e : fs::directory_iterator(f.data)) fs::copy(e.path(), broken / e.path().filename());
    Json meta = read_json(broken / "dataset.json");
    meta["splits"]["test_begin"] = meta["splits"]["test_end"];
    write_file_atomic(broken / "dataset.json", dump_json(meta));
    const auto out = fresh("detect_broken");
    CHECK(cli({"detect", "--data", broken.string(), "--model", f.model.string(), "--out", out.string()}).code ==
          kExitConfig);
}

TEST_CASE("certify --toy passes and echoes the threshold arithmetic") {
    const auto out = fresh("toy");
    const auto r = cli({"certify", "--toy", "--out", out.string(), "--seed", "1"});
    REQUIRE(r.code == 0);
    const std::string text = read_file(out / "certificate.json");
    const auto cert = SafetyCertificate::from_json(Json::parse(text));
    CHECK(dump_json(cert.to_json()) == text);
    CHECK(cert.verdict == Verdict::Pass);
    CHECK(cert.eps_star == doctest::Approx(epsilon_star(cert.delta_slack, cert.kappa, cert.dbar_c, cert.L_L, cert.J_W)));
    CHECK(r.out.find("verdict pass") != std::string::npos);
}

TEST_CASE("simulate validates its options") {
    const auto& f = fixture();
    const auto out = fresh("sim");
    CHECK(cli({"simulate", "--data", f.data.string(), "--model", f.model.string(), "--out", out.string(), "--seeds",
               "0"})
              .code == kExitConfig);
    CHECK(cli({"simulate", "--data", f.data.string(), "--model", f.model.string(), "--out", out.string(), "--filter",
               "maybe"})
              .code == kExitConfig);
    const auto r = cli({"simulate", "--data", f.data.string(), "--model", f.model.string(), "--out", out.string(),
                        "--seeds", "1", "--filter", "off", "--set", "closed_loop.episodes=1"});
    CHECK(r.code == 0);
    CHECK(fs::exists(out / "metrics.json"));
}
