#include "gridcert/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gridcert {
namespace {

constexpr double kPowerBalanceTol = 1e-9;

[[noreturn]] void fail(const std::string& msg) { throw ModelError(msg); }

std::string data_dir() {
  if (const char* env = std::getenv("GRIDCERT_DATA_DIR")) return env;
#ifdef GRIDCERT_DATA_DIR
  return GRIDCERT_DATA_DIR;
#else
  return "data";
#endif
}

}  // namespace

int PowerNetwork::state_size() const {
  return static_cast<int>(generators.size()) - (infinite_bus ? 1 : 0);
}

std::vector<int> PowerNetwork::state_ids() const {
  std::vector<int> ids;
  ids.reserve(generators.size());
  for (const auto& g : generators)
    if (!is_infinite(g.id)) ids.push_back(g.id);
  return ids;
}

const Generator& PowerNetwork::by_id(int id) const {
  for (const auto& g : generators)
    if (g.id == id) return g;
  fail("unknown generator id " + std::to_string(id));
}

bool PowerNetwork::is_infinite(int id) const {
  return infinite_bus && *infinite_bus == id;
}

double PowerNetwork::edge_weight(const Edge& e) const {
  return e.susceptance_b * by_id(e.k).voltage_v * by_id(e.j).voltage_v;
}

int PowerNetwork::state_index(int id) const {
  int idx = 0;
  for (const auto& g : generators) {
    if (is_infinite(g.id)) continue;
    if (g.id == id) return idx;
    ++idx;
  }
  return -1;
}

void validate(const PowerNetwork& net) {
  if (net.generators.empty()) fail("model has no generators");

  std::set<int> ids;
  for (const auto& g : net.generators) {
    if (!ids.insert(g.id).second)
      fail("duplicate generator id " + std::to_string(g.id));
    const bool slack = net.is_infinite(g.id);
    if (!slack && !(g.inertia_m > 0.0))
      fail("nonpositive inertia at generator " + std::to_string(g.id));
    if (!slack && g.damping_d < 0.0)
      fail("negative damping at generator " + std::to_string(g.id));
    if (!(g.voltage_v > 0.0))
      fail("nonpositive voltage at generator " + std::to_string(g.id));
  }
  if (net.infinite_bus && !ids.count(*net.infinite_bus))
    fail("infinite_bus refers to unknown generator id " +
         std::to_string(*net.infinite_bus));
  if (net.state_size() < 1) fail("model needs at least one state generator");

  if (net.edges.empty()) fail("model has no edges");
  std::set<std::pair<int, int>> seen;
  for (const auto& e : net.edges) {
    if (!ids.count(e.k) || !ids.count(e.j))
      fail("edge (" + std::to_string(e.k) + "," + std::to_string(e.j) +
           ") references unknown endpoint");
    if (e.k == e.j) fail("self-loop edge at generator " + std::to_string(e.k));
    if (e.k > e.j) fail("edge endpoints not in canonical ascending order");
    if (!(e.susceptance_b > 0.0))
      fail("nonpositive susceptance on edge (" + std::to_string(e.k) + "," +
           std::to_string(e.j) + ")");
    if (!seen.insert({e.k, e.j}).second)
      fail("duplicate edge (" + std::to_string(e.k) + "," +
           std::to_string(e.j) + ")");
  }

  // Connectivity over the whole node set, infinite bus included.
  std::set<int> reached;
  std::queue<int> frontier;
  frontier.push(net.generators.front().id);
  reached.insert(net.generators.front().id);
  while (!frontier.empty()) {
    const int at = frontier.front();
    frontier.pop();
    for (const auto& e : net.edges) {
      const int other = e.k == at ? e.j : (e.j == at ? e.k : -1);
      if (other >= 0 && reached.insert(other).second) frontier.push(other);
    }
  }
  if (reached.size() != ids.size()) fail("edge graph is disconnected");

  if (!net.infinite_bus) {
    double sum = 0.0;
    for (const auto& g : net.generators) sum += g.power_p;
    if (std::abs(sum) > kPowerBalanceTol)
      fail("power imbalance: sum P = " + std::to_string(sum) +
           " exceeds tolerance");
  }
}

PowerNetwork parse_network(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed JSON: ") + e.what());
  }
  PowerNetwork net;
  try {
    for (const auto& g : doc.at("generators")) {
      Generator gen;
      gen.id = g.at("id").get<int>();
      gen.inertia_m = g.at("m").get<double>();
      gen.damping_d = g.at("d").get<double>();
      gen.voltage_v = g.at("v").get<double>();
      gen.power_p = g.at("p").get<double>();
      net.generators.push_back(gen);
    }
    if (doc.contains("infinite_bus") && !doc["infinite_bus"].is_null())
      net.infinite_bus = doc["infinite_bus"].get<int>();
    for (const auto& e : doc.at("edges")) {
      Edge edge;
      edge.k = e.at("k").get<int>();
      edge.j = e.at("j").get<int>();
      edge.susceptance_b = e.at("b").get<double>();
      if (edge.k > edge.j) std::swap(edge.k, edge.j);
      net.edges.push_back(edge);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("bad model document: ") + e.what());
  }
  std::sort(net.generators.begin(), net.generators.end(),
            [](const Generator& a, const Generator& b) { return a.id < b.id; });
  std::sort(net.edges.begin(), net.edges.end(), [](const Edge& a, const Edge& b) {
    return std::pair{a.k, a.j} < std::pair{b.k, b.j};
  });
  validate(net);
  return net;
}

PowerNetwork parse_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open model file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_network(buffer.str());
}

std::string serialize_network(const PowerNetwork& net) {
  nlohmann::json doc;
  doc["generators"] = nlohmann::json::array();
  for (const auto& g : net.generators)
    doc["generators"].push_back({{"id", g.id},
                                 {"m", g.inertia_m},
                                 {"d", g.damping_d},
                                 {"v", g.voltage_v},
                                 {"p", g.power_p}});
  doc["infinite_bus"] =
      net.infinite_bus ? nlohmann::json(*net.infinite_bus) : nlohmann::json();
  doc["edges"] = nlohmann::json::array();
  for (const auto& e : net.edges)
    doc["edges"].push_back({{"k", e.k}, {"j", e.j}, {"b", e.susceptance_b}});
  return doc.dump(2);
}

PowerNetwork builtin_case(BuiltinCase which) {
  PowerNetwork net;
  switch (which) {
    case BuiltinCase::two_bus:
      // Single machine against an infinite bus; effective coupling 0.8.
      net.generators = {{1, 1.0, 1.0, 1.0, 0.4}, {2, 0.0, 0.0, 1.0, 0.0}};
      net.infinite_bus = 2;
      net.edges = {{1, 2, 0.8}};
      break;
    case BuiltinCase::nine_bus:
      net.generators = {{1, 2.0, 1.0, 1.0566, -0.2464},
                        {2, 2.0, 1.0, 1.0502, 0.2086},
                        {3, 2.0, 1.0, 1.0170, 0.0378}};
      net.edges = {{1, 2, 0.739}, {1, 3, 1.0958}, {2, 3, 1.245}};
      break;
    case BuiltinCase::new_england_39: {
      const std::string path = data_dir() + "/new_england_39.json";
      std::ifstream probe(path);
      if (!probe) fail("missing bundled data file: " + path);
      return parse_network_file(path);
    }
  }
  validate(net);
  return net;
}

PowerNetwork builtin_case(std::string_view name) {
  if (name == "two_bus") return builtin_case(BuiltinCase::two_bus);
  if (name == "nine_bus") return builtin_case(BuiltinCase::nine_bus);
  if (name == "new_england_39")
    return builtin_case(BuiltinCase::new_england_39);
  fail("unknown builtin case: " + std::string(name));
}

std::vector<std::string> builtin_case_names() {
  return {"two_bus", "nine_bus", "new_england_39"};
}

}  // namespace gridcert
