#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "coherent/error.hpp"

#include "json.hpp"

namespace coherent {

/// A single aggregation tree given as an edge list. Aggregates are ordered by
/// first appearance as a parent, bottoms by first encounter as a child.
struct HierarchySpec {
  std::string name;
  std::string top;
  std::vector<std::pair<std::string, std::string>> edges;
};

/// Matrices of one hierarchy: C maps bottoms to aggregates, S stacks
/// [ones row; C; I], U spans the orthogonal complement of the coherent
/// subspace (U' S = 0 in integer arithmetic).
struct Hierarchy {
  std::string name;
  std::string top;
  std::vector<std::string> aggregate_names;  // non-top internal nodes, m_a
  std::vector<std::string> bottom_names;     // leaves, m_b
  Eigen::MatrixXi C;  // m_a x m_b
  Eigen::MatrixXi S;  // (1 + m_a + m_b) x m_b
  Eigen::MatrixXi U;  // (1 + m_a + m_b) x (1 + m_a)

  int num_aggregates() const { return static_cast<int>(aggregate_names.size()); }
  int num_bottoms() const { return static_cast<int>(bottom_names.size()); }
  int num_series() const { return 1 + num_aggregates() + num_bottoms(); }
};

/// L hierarchies sharing one top series, combined into a single constraint
/// system U_full' y = 0 over the global ordering [top, a1, b1, ..., aL, bL].
struct LinkedSystem {
  std::string top_name;
  std::vector<Hierarchy> hierarchies;
  std::vector<std::string> ordering;
  Eigen::MatrixXd U_full;  // K x n, entries in {-1, 0, 1}
  int n = 0;
  int K = 0;
};

namespace detail {

inline void validate_spec(const HierarchySpec& spec) {
  if (spec.top.empty()) throw input_error("hierarchy '" + spec.name + "': empty top name");
  if (spec.edges.empty())
    throw input_error("hierarchy '" + spec.name + "': no edges");

  std::set<std::pair<std::string, std::string>> seen;
  std::map<std::string, std::string> parent_of;
  std::set<std::string> nodes;
  for (const auto& [p, c] : spec.edges) {
    if (!seen.insert({p, c}).second)
      throw input_error("hierarchy '" + spec.name + "': duplicate edge " + p +
                        " -> " + c);
    auto [it, inserted] = parent_of.try_emplace(c, p);
    if (!inserted)
      throw input_error("hierarchy '" + spec.name + "': node '" + c +
                        "' has multiple parents ('" + it->second + "', '" + p +
                        "')");
    nodes.insert(p);
    nodes.insert(c);
  }

  std::vector<std::string> roots;
  for (const auto& node : nodes)
    if (!parent_of.count(node)) roots.push_back(node);
  if (roots.size() != 1)
    throw input_error("hierarchy '" + spec.name + "': expected a single root, found " +
                      std::to_string(roots.size()));
  if (roots.front() != spec.top)
    throw input_error("hierarchy '" + spec.name + "': declared top '" + spec.top +
                      "' does not match root '" + roots.front() + "'");

  // Walking parent links must reach the root without revisiting a node.
  for (const auto& node : nodes) {
    std::set<std::string> visited;
    std::string cur = node;
    while (parent_of.count(cur)) {
      if (!visited.insert(cur).second)
        throw input_error("hierarchy '" + spec.name + "': cycle through '" + cur + "'");
      cur = parent_of.at(cur);
    }
  }
}

}  // namespace detail

/// Parses a hierarchy spec document: JSON with fields `name`, `top`,
/// `edges: [[parent, child], ...]`. Validates tree structure.
inline HierarchySpec parse_hierarchy_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("hierarchy spec is not valid JSON: ") + e.what());
  }
  HierarchySpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    spec.top = j.at("top").get<std::string>();
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2)
        throw input_error("hierarchy spec: each edge must be [parent, child]");
      spec.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("hierarchy spec missing field: ") + e.what());
  }
  detail::validate_spec(spec);
  return spec;
}

/// Builds C, S and U for a validated spec.
inline Hierarchy build_matrices(const HierarchySpec& spec) {
  detail::validate_spec(spec);

  std::map<std::string, std::vector<std::string>> children;
  std::vector<std::string> parent_order;  // document order of internal nodes
  for (const auto& [p, c] : spec.edges) {
    auto [it, inserted] = children.try_emplace(p);
    if (inserted) parent_order.push_back(p);
    it->second.push_back(c);
  }

  Hierarchy h;
  h.name = spec.name;
  h.top = spec.top;
  for (const auto& p : parent_order)
    if (p != spec.top) h.aggregate_names.push_back(p);
  for (const auto& [p, c] : spec.edges)
    if (!children.count(c)) h.bottom_names.push_back(c);

  const int m_a = h.num_aggregates();
  const int m_b = h.num_bottoms();
  std::map<std::string, int> bottom_index;
  for (int i = 0; i < m_b; ++i) bottom_index[h.bottom_names[i]] = i;

  // Row of C for a node = indicator over the bottoms in its subtree.
  auto leaves_under = [&](const std::string& node, auto&& self) -> std::vector<int> {
    auto it = children.find(node);
    if (it == children.end()) return {bottom_index.at(node)};
    std::vector<int> out;
    for (const auto& c : it->second) {
      auto sub = self(c, self);
      out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
  };

  h.C = Eigen::MatrixXi::Zero(m_a, m_b);
  for (int a = 0; a < m_a; ++a)
    for (int idx : leaves_under(h.aggregate_names[a], leaves_under))
      h.C(a, idx) = 1;

  h.S = Eigen::MatrixXi::Zero(1 + m_a + m_b, m_b);
  h.S.row(0).setOnes();
  h.S.block(1, 0, m_a, m_b) = h.C;
  h.S.block(1 + m_a, 0, m_b, m_b) = Eigen::MatrixXi::Identity(m_b, m_b);

  h.U = Eigen::MatrixXi::Zero(1 + m_a + m_b, 1 + m_a);
  h.U.block(0, 0, 1 + m_a, 1 + m_a) = Eigen::MatrixXi::Identity(1 + m_a, 1 + m_a);
  h.U.block(1 + m_a, 0, m_b, 1).setConstant(-1);
  h.U.block(1 + m_a, 1, m_b, m_a) = -h.C.transpose();

  return h;
}

/// Combines hierarchies sharing a top series into one constraint system.
/// Row layout: one top-vs-bottoms row per hierarchy first, then the
/// [I, -C] aggregate block of each hierarchy.
inline LinkedSystem link_hierarchies(const std::vector<HierarchySpec>& specs,
                                     const std::string& top) {
  if (specs.empty()) throw input_error("link_hierarchies: no hierarchies given");

  LinkedSystem sys;
  sys.top_name = top;
  for (const auto& spec : specs) {
    if (spec.top != top)
      throw input_error("hierarchy '" + spec.name + "' has top '" + spec.top +
                        "', expected '" + top + "'");
    sys.hierarchies.push_back(build_matrices(spec));
  }

  sys.ordering.push_back(top);
  std::set<std::string> unique_names{top};
  for (const auto& h : sys.hierarchies) {
    for (const auto& name : h.aggregate_names) {
      if (!unique_names.insert(name).second)
        throw input_error("series '" + name + "' appears in more than one hierarchy");
      sys.ordering.push_back(name);
    }
    for (const auto& name : h.bottom_names) {
      if (!unique_names.insert(name).second)
        throw input_error("series '" + name + "' appears in more than one hierarchy");
      sys.ordering.push_back(name);
    }
  }

  const int L = static_cast<int>(sys.hierarchies.size());
  sys.n = static_cast<int>(sys.ordering.size());
  sys.K = L;
  for (const auto& h : sys.hierarchies) sys.K += h.num_aggregates();

  sys.U_full = Eigen::MatrixXd::Zero(sys.K, sys.n);
  int col = 1;
  int block_row = L;
  for (int l = 0; l < L; ++l) {
    const auto& h = sys.hierarchies[l];
    const int m_a = h.num_aggregates();
    const int m_b = h.num_bottoms();
    const int agg_col = col;
    const int bot_col = col + m_a;

    sys.U_full(l, 0) = 1.0;
    sys.U_full.block(l, bot_col, 1, m_b).setConstant(-1.0);

    sys.U_full.block(block_row, agg_col, m_a, m_a) =
        Eigen::MatrixXd::Identity(m_a, m_a);
    sys.U_full.block(block_row, bot_col, m_a, m_b) = -h.C.cast<double>();

    col += m_a + m_b;
    block_row += m_a;
  }

  // Constraints must be independent for (U' W U) to be invertible downstream.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sys.U_full.transpose());
  qr.setThreshold(1e-10 * sys.U_full.norm());
  if (qr.rank() != sys.K)
    throw numeric_error("linked system is rank deficient: rank " +
                        std::to_string(qr.rank()) + " < K = " +
                        std::to_string(sys.K));
  return sys;
}

/// Index of each series name in the system ordering.
inline std::map<std::string, int> ordering_index(const LinkedSystem& sys) {
  std::map<std::string, int> idx;
  for (int i = 0; i < sys.n; ++i) idx[sys.ordering[i]] = i;
  return idx;
}

}  // namespace coherent
