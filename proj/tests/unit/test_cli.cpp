#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "artifacts.hpp"
#include "bpl/errors.hpp"
#include "doctest.h"
#include "modes.hpp"

using namespace bpl;
using namespace bpl::cli;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("bpl_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name, const std::string& contents) const {
    const auto p = (dir / name).string();
    std::ofstream(p) << contents;
    return p;
  }
};

struct Exec {
  int code;
  std::string err;
};

Exec bpl_cmd(const std::string& args, const Scratch& s) {
  const auto err = (s.dir / "stderr.txt").string();
  const int status = std::system((std::string(BPL_BINARY) + " " + args + " > /dev/null 2> " + err).c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(err)};
}

json load(const fs::path& p) { return json::parse(read_file(p.string())); }

const bool quiet = [] {
  spdlog::set_level(spdlog::level::warn);
  return true;
}();

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("malformed JSON names the byte offset") {
    try {
      parse_config("{\"mode\": \"flow\",, }", "cfg.json");
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigError);
      CHECK(std::string(e.what()).find("byte 17") != std::string::npos);
    }
  }
  SUBCASE("field paths in errors") {
    const json cfg = {{"mode", "flow"}, {"grid", {{"n_x", 4}}}};
    try {
      run_mode(cfg, 0, 0);
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigError);
      CHECK(std::string(e.what()).find("grid.n_x") != std::string::npos);
    }
    const json typo = {{"mode", "prox"}, {"density", {{"amplitdue", 0.3}}}};
    CHECK_THROWS_WITH_AS(run_mode(typo, 0, 0), doctest::Contains("density.amplitdue: unknown key"), Error);
    CHECK_THROWS_WITH_AS(run_mode(json{{"mode", "dance"}}, 0, 0), doctest::Contains("unknown mode"), Error);
    CHECK_THROWS_WITH_AS(run_mode(json{{"mode", "stationary"}, {"potential", {{"type", "cosine"}}}}, 0, 0),
                         doctest::Contains("potential.amplitude: missing"), Error);
  }
  SUBCASE("hash ignores key order") {
    const json a = json::parse(R"({"mode":"prox","tau":0.1})");
    const json b = json::parse(R"({"tau":0.1,"mode":"prox"})");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash(json::parse(R"({"mode":"prox","tau":0.2})")));
    CHECK(hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
  }
  SUBCASE("flatten") {
    const auto f = flatten(json::parse(R"({"a":1,"b":{"c":[true,"x"]}})"));
    REQUIRE(f.size() == 3);
    CHECK(f[0].first == "a");
    CHECK(f[2].first == "b.c[1]");
    CHECK(f[2].second == "\"x\"");
  }
}

TEST_CASE("modes") {
  SUBCASE("stationary V = 0 gives eta = b(1)") {
    const auto out = run_mode(json::parse(R"({"mode":"stationary","potential":{"type":"zero"},
                                               "pack":{"type":"exp","D":1},"grid":{"n":256}})"),
                              0, 0);
    CHECK(out.exit_code == 0);
    CHECK(out.result["eta_s"].get<double>() == doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
    CHECK(out.result["legendre"]["passed"].get<bool>());
  }
  SUBCASE("validate and liftcheck pass; seeds change only the randomized fields") {
    const auto a = run_mode(json::parse(R"({"mode":"validate","pack":{"type":"exp","D":1}})"), 1, 0);
    const auto b = run_mode(json::parse(R"({"mode":"validate","pack":{"type":"exp","D":1}})"), 2, 0);
    CHECK(a.exit_code == 0);
    CHECK(a.result["all_passed"].get<bool>());
    CHECK(a.result["lambda1"] == b.result["lambda1"]);
    CHECK(a.result["roundtrip_witness"] != b.result["roundtrip_witness"]);
    const auto l = run_mode(json::parse(R"({"mode":"liftcheck","instances":10})"), 5, 0);
    CHECK(l.result["all_passed"].get<bool>());
  }
  SUBCASE("prox reports the 0-error bound") {
    const auto out = run_mode(json::parse(R"({"mode":"prox","grid":{"n":64},"tau":0.1})"), 0, 0);
    CHECK(out.result["zero_tau"]["holds"].get<bool>());
    CHECK(out.files.size() == 3);
  }
}

TEST_CASE("binary") {
  Scratch s;
  const auto st = s.file("st.json", R"({"mode":"stationary","potential":{"type":"zero"},"pack":{"type":"exp","D":1},
                                       "grid":{"n":64}})");
  const auto out = (s.dir / "st").string();

  SUBCASE("run, manifest and replay") {
    REQUIRE(bpl_cmd("run --config " + st + " --out " + out, s).code == 0);
    const auto result = load(s.dir / "st" / "result.json");
    const auto manifest = load(s.dir / "st" / "manifest.json");
    CHECK(result["eta_s"].get<double>() == doctest::Approx(-0.9189385332046727).epsilon(1e-10));
    CHECK(manifest["config_hash"].get<std::string>() == hex64(config_hash(manifest["config"])));
    CHECK(manifest.contains("wall_time_s"));
    CHECK(manifest["versions"].contains("bpl"));
    CHECK(fs::exists(s.dir / "st" / "rho_s.csv"));
    for (const auto& e : fs::directory_iterator(s.dir / "st"))
      CHECK(e.path().string().find(".tmp.") == std::string::npos);

    CHECK(bpl_cmd("replay " + (s.dir / "st" / "manifest.json").string(), s).code == 0);

    auto edited = manifest;
    edited["config"]["grid"]["n"] = 32;
    s.file("tampered.json", edited.dump());
    auto r = bpl_cmd("replay " + (s.dir / "tampered.json").string(), s);
    CHECK(r.code == 1);
    CHECK(r.err.find("ReproMismatch") != std::string::npos);
  }
  SUBCASE("mode subcommand and mismatch") {
    CHECK(bpl_cmd("stationary --config " + st + " --out " + out, s).code == 0);
    auto r = bpl_cmd("prox --config " + st + " --out " + out, s);
    CHECK(r.code == 1);
    CHECK(r.err.find("mode") != std::string::npos);
  }
  SUBCASE("altered seed diverges only on randomized fields") {
    const auto lc = s.file("lc.json", R"({"mode":"liftcheck","instances":5,"trials":5})");
    REQUIRE(bpl_cmd("run --config " + lc + " --seed 11 --out " + out, s).code == 0);
    auto manifest = load(s.dir / "st" / "manifest.json");
    CHECK(manifest["seed"] == 11);
    manifest["seed"] = 12;
    std::ofstream(s.dir / "st" / "alt.json") << manifest.dump();
    const auto r = bpl_cmd("replay " + (s.dir / "st" / "alt.json").string(), s);
    CHECK(r.code == 1);
    CHECK(r.err.find("min_margin") != std::string::npos);
    CHECK(r.err.find("instances") == std::string::npos);
    CHECK(r.err.find("all_passed") == std::string::npos);
  }
  SUBCASE("errors and exit codes") {
    const auto bad = s.file("bad.json", "{\"mode\": \"stationary\", \"grid\": {\"n\": 25");
    auto r = bpl_cmd("run --config " + bad + " --out " + out, s);
    CHECK(r.code == 1);
    CHECK(r.err.find("ConfigError") != std::string::npos);
    CHECK(r.err.find("byte") != std::string::npos);
    CHECK(bpl_cmd("replay " + (s.dir / "missing" / "manifest.json").string(), s).code == 1);
    // A truncated solve leaves room for a Legendre candidate to beat ρ_s: property failure, artifacts still written.
    const auto loose = s.file("loose.json", R"({"mode":"stationary","potential":{"type":"cosine","amplitude":0.5},
                                               "grid":{"n":128},"solver":{"tol":1e-2}})");
    r = bpl_cmd("run --config " + loose + " --out " + out, s);
    CHECK(r.code == 2);
    CHECK(r.err.find("PropertyViolation") != std::string::npos);
    CHECK_FALSE(load(s.dir / "st" / "result.json")["legendre"]["passed"].get<bool>());
    CHECK(bpl_cmd("run --config " + (s.dir / "nope.json").string() + " --out " + out, s).code == 1);
  }
  SUBCASE("flow, diagnose") {
    const auto fl = s.file("fl.json", R"({"mode":"flow","grid":{"n_x":32,"n_v":32,"v_max":8},"dt":2e-3,
                                         "t_end":0.04,"record_every":5,"initial":{"amplitude":0.4}})");
    REQUIRE(bpl_cmd("run --config " + fl + " --out " + out, s).code == 0);
    CHECK(fs::exists(s.dir / "st" / "snap_000000.csv"));
    CHECK(fs::exists(s.dir / "st" / "snap_000020.csv"));
    std::ifstream trace(s.dir / "st" / "trace.csv");
    std::string header;
    std::getline(trace, header);
    CHECK(header.rfind("t,mass,H_tau,kinetic,potE,phi_tau,w2_prox,slope_norm,min_f,max_f,theta_m", 0) == 0);

    const auto report = (s.dir / "report.json").string();
    REQUIRE(bpl_cmd("diagnose --trace " + out + " --out " + report, s).code == 0);
    const auto rep = load(report);
    CHECK(rep["all_passed"].get<bool>());
    CHECK(rep["records"] == 5);
    CHECK(rep["max_identity_error"].get<double>() <= 1e-8);
    CHECK(rep["max_zero_tau_ratio"].get<double>() <= 1.0);
  }
  SUBCASE("diagnose rejects non-flow output") {
    REQUIRE(bpl_cmd("run --config " + st + " --out " + out, s).code == 0);
    const auto r = bpl_cmd("diagnose --trace " + out + " --out " + (s.dir / "r.json").string(), s);
    CHECK(r.code == 1);
  }
}
