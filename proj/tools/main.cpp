#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "artifacts.hpp"
#include "bpl/errors.hpp"
#include "modes.hpp"

#ifndef BPL_VERSION
#define BPL_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace bpl;
using namespace bpl::cli;

namespace {

struct RunArgs {
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
};

void add_run_options(CLI::App& app, RunArgs& a, bool required) {
  auto* c = app.add_option("--config", a.config_path, "JSON run configuration");
  auto* o = app.add_option("--out", a.out_dir, "output directory");
  if (required) {
    c->required();
    o->required();
  }
  app.add_option("--seed", a.seed, "seed for randomized suites (overrides the config)")->each([&a](const std::string&) {
    a.seed_given = true;
  });
  app.add_option("--threads", a.threads, "parallel sweep members (0: one per member)")->check(CLI::NonNegativeNumber);
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("bpl");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("BPL_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

json versions() {
  return {{"bpl", BPL_VERSION},
          {"compiler", __VERSION__},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION}};
}

std::uint64_t effective_seed(const json& config, const RunArgs& a) {
  if (a.seed_given) return a.seed;
  if (config.contains("seed")) {
    if (!config["seed"].is_number_unsigned()) fail(ErrorKind::ConfigError, "seed: expected a non-negative integer");
    return config["seed"].get<std::uint64_t>();
  }
  return 0;
}

int finish(const Outcome& out) {
  if (out.exit_code == 2) {
    std::cerr << "PropertyViolation: " << out.violation << "\n";
    return 2;
  }
  return 0;
}

int do_run(RunArgs a, const std::string& forced_mode) {
  json config = parse_config(read_file(a.config_path), a.config_path);
  if (!config.is_object()) fail(ErrorKind::ConfigError, a.config_path + ": expected a JSON object");
  if (!forced_mode.empty()) {
    if (config.contains("mode") && config["mode"] != forced_mode)
      fail(ErrorKind::ConfigError, "mode: config says " + config["mode"].dump() + ", command says " + forced_mode);
    config["mode"] = forced_mode;
  }
  const auto seed = effective_seed(config, a);

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec || !fs::is_directory(a.out_dir)) fail(ErrorKind::IoError, "cannot create output directory " + a.out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  const Outcome out = run_mode(config, seed, a.threads);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path dir(a.out_dir);
  json files = json::array({"result.json"});
  for (const auto& [name, contents] : out.files) {
    write_atomic((dir / name).string(), contents);
    files.push_back(name);
  }
  write_atomic((dir / "result.json").string(), out.result.dump(2) + "\n");
  const json manifest = {{"tool", "bpl"},
                         {"mode", config["mode"]},
                         {"config_hash", hex64(config_hash(config))},
                         {"seed", seed},
                         {"threads", a.threads},
                         {"config", config},
                         {"versions", versions()},
                         {"wall_time_s", wall},
                         {"exit_code", out.exit_code},
                         {"files", files}};
  write_atomic((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  spdlog::info("{} finished in {:.2f} s; artifacts in {}", config["mode"].get<std::string>(), wall, a.out_dir);
  return finish(out);
}

int do_replay(const std::string& manifest_path) {
  if (!fs::exists(manifest_path)) fail(ErrorKind::IoError, "no manifest at " + manifest_path);
  const json manifest = parse_config(read_file(manifest_path), manifest_path);
  for (const char* key : {"config", "config_hash", "seed"})
    if (!manifest.contains(key)) fail(ErrorKind::ConfigError, manifest_path + ": missing " + key);
  const json& config = manifest["config"];
  if (hex64(config_hash(config)) != manifest["config_hash"])
    fail(ErrorKind::ReproMismatch, "config_hash: stored config does not match its hash");
  if (!manifest["seed"].is_number_unsigned()) fail(ErrorKind::ConfigError, "seed: expected a non-negative integer");

  const auto result_path = (fs::path(manifest_path).parent_path() / "result.json").string();
  const json stored = parse_config(read_file(result_path), result_path);
  const Outcome out = run_mode(config, manifest["seed"].get<std::uint64_t>(), manifest.value("threads", 0));

  const auto a = flatten(stored), b = flatten(out.result);
  std::string diff;
  for (const auto& [k, v] : a) {
    auto it = std::find_if(b.begin(), b.end(), [&](const auto& p) { return p.first == k; });
    if (it == b.end())
      diff += " " + k + " (missing in replay)";
    else if (it->second != v)
      diff += " " + k + " (" + v + " -> " + it->second + ")";
  }
  for (const auto& [k, v] : b)
    if (std::find_if(a.begin(), a.end(), [&](const auto& p) { return p.first == k; }) == a.end())
      diff += " " + k + " (new in replay)";
  if (!diff.empty()) fail(ErrorKind::ReproMismatch, "divergent fields:" + diff);
  std::cout << "replay matches " << result_path << " (" << a.size() << " fields)\n";
  return 0;
}

int do_diagnose(const std::string& trace_dir, const std::string& out_path) {
  std::string violation;
  const json report = diagnose_directory(trace_dir, &violation);
  write_atomic(out_path, report.dump(2) + "\n");
  if (!violation.empty()) {
    std::cerr << "PropertyViolation: " << violation << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bpl: kinetic Bohmian flow toolkit"};
  app.set_version_flag("--version", BPL_VERSION);
  RunArgs top;
  add_run_options(app, top, false);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run the workflow named by the config's mode");
  add_run_options(*run, run_args, true);

  std::vector<std::pair<CLI::App*, RunArgs>> per_mode;
  per_mode.reserve(mode_names().size());
  for (const auto& m : mode_names()) {
    per_mode.emplace_back(nullptr, RunArgs{});
    per_mode.back().first = app.add_subcommand(m, "run the " + m + " workflow");
    add_run_options(*per_mode.back().first, per_mode.back().second, true);
  }

  std::string manifest;
  auto* replay = app.add_subcommand("replay", "re-run a manifest and compare result.json field by field");
  replay->add_option("manifest", manifest, "path to manifest.json")->required();

  std::string trace_dir, report_path;
  auto* diagnose = app.add_subcommand("diagnose", "record checks and weak residuals of a flow output directory");
  diagnose->add_option("--trace", trace_dir, "flow output directory")->required();
  diagnose->add_option("--out", report_path, "report path")->required();
  app.require_subcommand(0, 1);

  CLI11_PARSE(app, argc, argv);
  setup_logging();

  try {
    if (*replay) return do_replay(manifest);
    if (*diagnose) return do_diagnose(trace_dir, report_path);
    if (*run) return do_run(run_args, "");
    for (auto& [sub, args] : per_mode)
      if (*sub) return do_run(args, sub->get_name());
    if (top.config_path.empty() || top.out_dir.empty()) {
      std::cerr << app.help();
      return 1;
    }
    return do_run(top, "");
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.kind() == ErrorKind::PropertyViolation ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
