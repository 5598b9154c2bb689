#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "bpl/flow.hpp"
#include "bpl/kinetics_pack.hpp"
#include "bpl/potential.hpp"
#include "bpl/prox.hpp"
#include "bpl/stationary.hpp"
#include "json.hpp"

namespace bpl::cli {

using json = nlohmann::ordered_json;

// Parses text as JSON; malformed input raises ConfigError naming the byte offset.
json parse_config(const std::string& text, const std::string& source);

// Typed access to one JSON object with its dotted path for error messages.
class Node {
 public:
  Node(const json& j, std::string path);

  bool has(const std::string& key) const;
  Node child(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  double number(const std::string& key) const;
  int integer(const std::string& key, int fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;
  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  // ConfigError for keys outside `allowed`, so typos do not silently fall back to defaults.
  void only(std::initializer_list<const char*> allowed) const;
  [[noreturn]] void bad(const std::string& key, const std::string& why) const;

 private:
  const json& at(const std::string& key) const;
  std::string where(const std::string& key) const;
  const json& j_;
  std::string path_;
};

Potential read_potential(const Node& n);
KineticsPack read_pack(const Node& n);
TorusGrid read_grid(const Node& n);
StationaryOptions read_stationary_options(const Node& n);
ProxOptions read_prox_options(const Node& n);
FlowConfig read_flow(const Node& root);
// Cosine density {"type":"cosine","amplitude","frequency"}, {"type":"uniform"} or {"type":"file","path"}.
DensityField read_density(const Node& n, const TorusGrid& grid);

json potential_json(const Potential& V);

}  // namespace bpl::cli
