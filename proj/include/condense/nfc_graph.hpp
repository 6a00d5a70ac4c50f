#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "condense/error.hpp"
#include "condense/rng.hpp"

namespace condense::graph {

struct NodeId {
  std::uint32_t index = 0;
  friend auto operator<=>(NodeId, NodeId) = default;
};

enum class NodeRole { Source, Atomic, Destination };
enum class GraphMode { Tree, Dag };

std::string_view to_string(NodeRole role) noexcept;
std::string_view to_string(GraphMode mode) noexcept;

struct Arc {
  NodeId from;
  NodeId to;
  friend auto operator<=>(const Arc&, const Arc&) = default;
};

struct NodeDecl {
  std::string name;
  NodeRole role = NodeRole::Atomic;
};

// Declarative topology: node list plus, per node, its in-neighbourhood
// (the children whose messages it combines). Child order is significant:
// it fixes the input order of the node's atomic function.
struct TopologyConfig {
  std::vector<NodeDecl> nodes;
  std::vector<std::pair<NodeId, std::vector<NodeId>>> children;
  GraphMode mode = GraphMode::Tree;
};

enum class IssueKind { CycleDetected, RoleConflict, DanglingReference, DuplicateArc, TreeViolation };

struct Issue {
  IssueKind kind;
  std::string message;
  std::optional<NodeId> node;
  std::optional<Arc> arc;
};

ErrorCode to_error_code(IssueKind kind) noexcept;

struct ValidationReport {
  std::vector<Issue> issues;
  bool ok() const noexcept { return issues.empty(); }
  bool contains(IssueKind kind) const noexcept;
};

class NfcGraph;

// Assemble without validating; dangling references are dropped and reported
// by validate_graph. Mostly useful for inspecting broken configurations.
NfcGraph assemble_graph(const TopologyConfig& config);

// Validates and throws Error carrying the first issue's code.
NfcGraph build_graph(const TopologyConfig& config);

ValidationReport validate_graph(const NfcGraph& g);

// Immutable NFC topology. Node ids are dense indices into the declared node
// list; sources additionally get a dense source index 0..N-1 in declaration
// order.
class NfcGraph {
 public:
  std::size_t node_count() const noexcept { return roles_.size(); }
  std::size_t arc_count() const noexcept { return arcs_.size(); }
  GraphMode mode() const noexcept { return mode_; }

  NodeRole role(NodeId v) const { return roles_.at(v.index); }
  const std::string& name(NodeId v) const { return names_.at(v.index); }
  std::optional<NodeId> find(std::string_view name) const;

  std::span<const NodeId> in_neighborhood(NodeId v) const { return in_.at(v.index); }
  std::span<const NodeId> out_neighborhood(NodeId v) const { return out_.at(v.index); }

  // Arcs in canonical order: grouped by head node, children in declared order.
  std::span<const Arc> arcs() const noexcept { return arcs_; }
  std::optional<std::size_t> arc_index(Arc a) const;

  std::span<const NodeId> sources() const noexcept { return sources_; }
  std::span<const NodeId> atomics() const noexcept { return atomics_; }
  std::span<const NodeId> destinations() const noexcept { return destinations_; }
  std::size_t source_count() const noexcept { return sources_.size(); }
  // Dense index of a source among sources(); throws for non-sources.
  std::size_t source_index(NodeId s) const;

  // Deterministic topological order (Kahn, smallest id first). Empty when the
  // graph has a cycle.
  std::span<const NodeId> topological_order() const noexcept { return topo_; }
  bool acyclic() const noexcept { return topo_.size() == roles_.size(); }

  // Echo of the configuration this graph was built from.
  TopologyConfig config() const;

  friend bool operator==(const NfcGraph& a, const NfcGraph& b) {
    return a.roles_ == b.roles_ && a.in_ == b.in_ && a.mode_ == b.mode_;
  }

 private:
  friend NfcGraph assemble_graph(const TopologyConfig& config);
  friend ValidationReport validate_graph(const NfcGraph& g);

  GraphMode mode_ = GraphMode::Tree;
  std::vector<NodeRole> roles_;
  std::vector<std::string> names_;
  std::vector<std::vector<NodeId>> in_;
  std::vector<std::vector<NodeId>> out_;
  std::vector<Arc> arcs_;
  std::vector<NodeId> sources_;
  std::vector<NodeId> atomics_;
  std::vector<NodeId> destinations_;
  std::vector<std::size_t> source_index_;
  std::vector<NodeId> topo_;
  std::vector<Issue> assembly_issues_;
};

// Returns a new graph: patch.nodes are appended (ids continue after the
// existing ones) and every patch.children entry replaces that node's
// in-neighbourhood. The mode of g is kept. Same errors as build_graph.
NfcGraph set_topology(const NfcGraph& g, const TopologyConfig& patch);

// Moves `child` under `new_parent`, removing it from its current parent(s).
NfcGraph reparent(const NfcGraph& g, NodeId child, NodeId new_parent);

// Max-flow value from a super-source to dest with unit arc capacities. The
// super-source arcs are unbounded unless source_rate caps each of them.
// Returns 0 when no source reaches dest. Throws Error(NotADestination) if
// dest is not a Destination.
std::size_t min_cut(const NfcGraph& g, NodeId dest, std::optional<std::size_t> source_rate = std::nullopt);

namespace generators {

// N sources -> one atomic node -> destination.
TopologyConfig star(std::size_t sources);
// Balanced binary tree of the given depth: the root is the destination,
// 2^depth sources at the leaves, all other nodes atomic.
TopologyConfig binary_tree(std::size_t depth);
// source -> atomic -> ... -> destination with `relays` atomic nodes.
TopologyConfig chain(std::size_t relays);
// Random rooted tree: destination root, `sources` leaves, every internal
// node has at least one child and leaf depth never exceeds max_depth.
TopologyConfig random_tree(std::size_t sources, std::size_t max_depth, RngStream& rng);

}  // namespace generators

}  // namespace condense::graph
