#include "config.hpp"

#include <cmath>
#include <fstream>

#include "bpl/density_io.hpp"
#include "bpl/errors.hpp"

namespace bpl::cli {

json parse_config(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigError,
         source + ": malformed JSON at byte " + std::to_string(e.byte) + " (" + std::string(e.what()) + ")");
  }
}

Node::Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) fail(ErrorKind::ConfigError, (path_.empty() ? "config" : path_) + ": expected an object");
}

std::string Node::where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

void Node::bad(const std::string& key, const std::string& why) const {
  fail(ErrorKind::ConfigError, where(key) + ": " + why);
}

bool Node::has(const std::string& key) const { return j_.contains(key); }

const json& Node::at(const std::string& key) const {
  if (!has(key)) bad(key, "missing");
  return j_.at(key);
}

Node Node::child(const std::string& key) const {
  static const json empty = json::object();
  if (!has(key)) return Node(empty, where(key));
  if (!j_.at(key).is_object()) bad(key, "expected an object");
  return Node(j_.at(key), where(key));
}

double Node::number(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_number()) bad(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(key, "must be finite");
  return x;
}

double Node::number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

int Node::integer(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (!v.is_number_integer()) bad(key, "expected an integer");
  return v.get<int>();
}

bool Node::flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (!v.is_boolean()) bad(key, "expected true or false");
  return v.get<bool>();
}

std::string Node::text(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> Node::numbers(const std::string& key, std::vector<double> fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (!v.is_array()) bad(key, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) bad(key + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

void Node::only(std::initializer_list<const char*> allowed) const {
  for (const auto& [k, _] : j_.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) bad(k, "unknown key");
  }
}

Potential read_potential(const Node& n) {
  n.only({"type", "amplitude", "frequency"});
  const auto type = n.text("type", "zero");
  if (type == "zero") return Potential::zero();
  if (type != "cosine") n.bad("type", "expected \"zero\" or \"cosine\", got \"" + type + "\"");
  const int k = n.integer("frequency", 1);
  if (k < 1) n.bad("frequency", "must be at least 1");
  return Potential::cosine(n.number("amplitude"), k);
}

json potential_json(const Potential& V) {
  if (V.kind == Potential::Kind::Zero) return {{"type", "zero"}};
  return {{"type", "cosine"}, {"amplitude", V.amplitude}, {"frequency", V.frequency}};
}

KineticsPack read_pack(const Node& n) {
  n.only({"type", "D", "samples"});
  const auto type = n.text("type", "exp");
  const int D = n.integer("D", 1);
  if (D < 1 || D > 3) n.bad("D", "must be 1, 2 or 3");
  if (type == "exp") return KineticsPack::exponential(D);
  if (type != "tabulated") n.bad("type", "expected \"exp\" or \"tabulated\", got \"" + type + "\"");
  if (!n.has("samples") || !n.raw().at("samples").is_array()) n.bad("samples", "expected [[t, F], ...]");
  std::vector<std::pair<double, double>> samples;
  const auto& arr = n.raw().at("samples");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& s = arr[i];
    if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number())
      n.bad("samples[" + std::to_string(i) + "]", "expected [t, F]");
    samples.emplace_back(s[0].get<double>(), s[1].get<double>());
  }
  try {
    return KineticsPack::tabulated(D, std::move(samples));
  } catch (const Error& e) {
    n.bad("samples", e.what());
  }
}

TorusGrid read_grid(const Node& n) {
  n.only({"n", "d"});
  const int size = n.integer("n", 256), d = n.integer("d", 1);
  if (size < 8) n.bad("n", "must be at least 8");
  if (d != 1 && d != 2) n.bad("d", "must be 1 or 2");
  return TorusGrid(d, size);
}

StationaryOptions read_stationary_options(const Node& n) {
  n.only({"method", "tol", "max_iterations", "omega", "change_tol", "scheme"});
  StationaryOptions o;
  o.tol = n.number("tol", o.tol);
  o.max_iterations = n.integer("max_iterations", o.max_iterations);
  o.omega = n.number("omega", o.omega);
  o.change_tol = n.number("change_tol", o.change_tol);
  const auto scheme = n.text("scheme", "scf");
  if (scheme == "explicit")
    o.scheme = FixedPointScheme::Explicit;
  else if (scheme != "scf")
    n.bad("scheme", "expected \"scf\" or \"explicit\"");
  if (!(o.tol > 0.0)) n.bad("tol", "must be positive");
  if (o.max_iterations < 1) n.bad("max_iterations", "must be at least 1");
  if (!(o.omega > 0.0 && o.omega <= 1.0)) n.bad("omega", "must lie in (0, 1]");
  return o;
}

ProxOptions read_prox_options(const Node& n) {
  n.only({"lattice_factor", "gradient_tol", "max_iterations"});
  ProxOptions o;
  const int lf = n.integer("lattice_factor", int(o.lattice_factor));
  if (lf < 1) n.bad("lattice_factor", "must be at least 1");
  o.lattice_factor = std::size_t(lf);
  o.gradient_tol = n.number("gradient_tol", o.gradient_tol);
  o.max_iterations = n.integer("max_iterations", o.max_iterations);
  return o;
}

FlowConfig read_flow(const Node& root) {
  FlowConfig c;
  const auto g = root.child("grid");
  g.only({"n_x", "n_v", "v_max"});
  c.n_x = g.integer("n_x", c.n_x);
  c.n_v = g.integer("n_v", c.n_v);
  c.v_max = g.number("v_max", c.v_max);
  c.tau = root.number("tau", c.tau);
  c.dt = root.number("dt", c.dt);
  c.t_end = root.number("t_end", c.t_end);
  c.potential = read_potential(root.child("potential"));
  const auto init = root.child("initial");
  init.only({"amplitude", "frequency", "sigma", "mean"});
  c.initial.amplitude = init.number("amplitude", c.initial.amplitude);
  c.initial.frequency = init.integer("frequency", c.initial.frequency);
  c.initial.sigma = init.number("sigma", c.initial.sigma);
  c.initial.mean = init.number("mean", c.initial.mean);
  c.record_every = root.integer("record_every", c.record_every);
  c.bohm_enabled = root.flag("bohm_enabled", c.bohm_enabled);
  c.drift_bound = root.number("drift_bound", c.drift_bound);
  c.bulk_v = root.number("bulk_v", c.bulk_v);
  c.leak_tol = root.number("leak_tol", c.leak_tol);
  c.prox = read_prox_options(root.child("prox"));
  c.validate();
  return c;
}

DensityField read_density(const Node& n, const TorusGrid& grid) {
  n.only({"type", "amplitude", "frequency", "path"});
  const auto type = n.text("type", "cosine");
  if (type == "uniform") return uniform_density(grid);
  if (type == "file") {
    const auto path = n.text("path", "");
    std::ifstream in(path);
    if (!in) n.bad("path", "cannot open \"" + path + "\"");
    return read_density_csv(in);
  }
  if (type != "cosine") n.bad("type", "expected \"cosine\", \"uniform\" or \"file\"");
  const double a = n.number("amplitude", 0.5);
  const int k = n.integer("frequency", 1);
  if (!(std::abs(a) < 1.0)) n.bad("amplitude", "must lie in (-1, 1)");
  if (k < 1) n.bad("frequency", "must be at least 1");
  if (grid.d() != 1) n.bad("type", "cosine densities are 1D");
  return density_from_function(grid, [=](double x) { return 1.0 + a * std::cos(2.0 * M_PI * k * x); });
}

}  // namespace bpl::cli
