#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gridcert {

// A generator node of the reduced network. For the optional infinite bus the
// mechanical parameters (m, d, p) are ignored; only the voltage matters.
struct Generator {
  int id = 0;
  double inertia_m = 0.0;
  double damping_d = 0.0;
  double voltage_v = 0.0;
  double power_p = 0.0;
};

// Undirected line between generator internal nodes, stored with k < j.
struct Edge {
  int k = 0;
  int j = 0;
  double susceptance_b = 0.0;
};

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class BuiltinCase { two_bus, nine_bus, new_england_39 };

// Lossless, Kron-reduced network with constant-magnitude internal voltages.
struct PowerNetwork {
  std::vector<Generator> generators;  // sorted by id; includes infinite bus
  std::optional<int> infinite_bus;    // id of the slack node, if any
  std::vector<Edge> edges;            // sorted ascending by (k, j)

  [[nodiscard]] int state_size() const;
  [[nodiscard]] std::vector<int> state_ids() const;  // non-slack ids, ascending
  [[nodiscard]] const Generator& by_id(int id) const;
  [[nodiscard]] bool is_infinite(int id) const;
  // Coupling coefficient B_kj * V_k * V_j of an edge.
  [[nodiscard]] double edge_weight(const Edge& e) const;
  // Position of a generator id in the state ordering; -1 for the infinite bus.
  [[nodiscard]] int state_index(int id) const;
};

// Throws ModelError describing the first violated rule.
void validate(const PowerNetwork& net);

PowerNetwork parse_network(const std::string& json_text);
PowerNetwork parse_network_file(const std::string& path);
[[nodiscard]] std::string serialize_network(const PowerNetwork& net);

PowerNetwork builtin_case(BuiltinCase which);
PowerNetwork builtin_case(std::string_view name);  // "two_bus", ...
[[nodiscard]] std::vector<std::string> builtin_case_names();

}  // namespace gridcert
