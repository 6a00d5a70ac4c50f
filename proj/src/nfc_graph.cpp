#include "condense/nfc_graph.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <queue>
#include <set>
#include <string>

namespace condense::graph {

std::string_view to_string(NodeRole role) noexcept {
  switch (role) {
    case NodeRole::Source: return "source";
    case NodeRole::Atomic: return "atomic";
    case NodeRole::Destination: return "destination";
  }
  return "?";
}

std::string_view to_string(GraphMode mode) noexcept { return mode == GraphMode::Tree ? "tree" : "dag"; }

ErrorCode to_error_code(IssueKind kind) noexcept {
  switch (kind) {
    case IssueKind::CycleDetected: return ErrorCode::CycleDetected;
    case IssueKind::RoleConflict: return ErrorCode::RoleConflict;
    case IssueKind::DanglingReference: return ErrorCode::DanglingReference;
    case IssueKind::DuplicateArc: return ErrorCode::DuplicateArc;
    case IssueKind::TreeViolation: return ErrorCode::TreeViolation;
  }
  return ErrorCode::TreeViolation;
}

bool ValidationReport::contains(IssueKind kind) const noexcept {
  return std::any_of(issues.begin(), issues.end(), [kind](const Issue& i) { return i.kind == kind; });
}

std::optional<NodeId> NfcGraph::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return NodeId{static_cast<std::uint32_t>(i)};
  }
  return std::nullopt;
}

std::optional<std::size_t> NfcGraph::arc_index(Arc a) const {
  // Arcs are grouped by head in node order, so a short scan of the head's
  // block suffices; graphs here are desk-sized.
  for (std::size_t i = 0; i < arcs_.size(); ++i) {
    if (arcs_[i] == a) return i;
  }
  return std::nullopt;
}

std::size_t NfcGraph::source_index(NodeId s) const {
  if (s.index >= roles_.size() || roles_[s.index] != NodeRole::Source) {
    throw Error(ErrorCode::RoleConflict, "node " + std::to_string(s.index) + " is not a source");
  }
  return source_index_[s.index];
}

TopologyConfig NfcGraph::config() const {
  TopologyConfig cfg;
  cfg.mode = mode_;
  for (std::size_t i = 0; i < roles_.size(); ++i) {
    cfg.nodes.push_back({names_[i], roles_[i]});
    if (!in_[i].empty()) cfg.children.emplace_back(NodeId{static_cast<std::uint32_t>(i)}, in_[i]);
  }
  return cfg;
}

NfcGraph assemble_graph(const TopologyConfig& config) {
  NfcGraph g;
  const std::size_t n = config.nodes.size();
  g.mode_ = config.mode;
  g.roles_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.roles_.push_back(config.nodes[i].role);
    g.names_.push_back(config.nodes[i].name.empty() ? "n" + std::to_string(i) : config.nodes[i].name);
  }
  g.in_.assign(n, {});
  g.out_.assign(n, {});
  g.source_index_.assign(n, std::numeric_limits<std::size_t>::max());

  for (const auto& [head, kids] : config.children) {
    if (head.index >= n) {
      g.assembly_issues_.push_back({IssueKind::DanglingReference,
                                    "children declared for undeclared node " + std::to_string(head.index),
                                    head, std::nullopt});
      continue;
    }
    for (NodeId child : kids) {
      if (child.index >= n) {
        g.assembly_issues_.push_back({IssueKind::DanglingReference,
                                      "node '" + g.names_[head.index] + "' references undeclared child " +
                                          std::to_string(child.index),
                                      head, std::nullopt});
        continue;
      }
      auto& in = g.in_[head.index];
      if (std::find(in.begin(), in.end(), child) != in.end()) {
        g.assembly_issues_.push_back({IssueKind::DuplicateArc,
                                      "duplicate arc " + g.names_[child.index] + " -> " + g.names_[head.index],
                                      head, Arc{child, head}});
        continue;
      }
      in.push_back(child);
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    for (NodeId child : g.in_[v]) {
      g.out_[child.index].push_back(NodeId{static_cast<std::uint32_t>(v)});
      g.arcs_.push_back({child, NodeId{static_cast<std::uint32_t>(v)}});
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    const NodeId id{static_cast<std::uint32_t>(v)};
    switch (g.roles_[v]) {
      case NodeRole::Source:
        g.source_index_[v] = g.sources_.size();
        g.sources_.push_back(id);
        break;
      case NodeRole::Atomic: g.atomics_.push_back(id); break;
      case NodeRole::Destination: g.destinations_.push_back(id); break;
    }
  }

  // Kahn's algorithm, smallest ready id first.
  std::vector<std::size_t> indeg(n);
  for (std::size_t v = 0; v < n; ++v) indeg[v] = g.in_[v].size();
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < n; ++v) {
    if (indeg[v] == 0) ready.push(static_cast<std::uint32_t>(v));
  }
  while (!ready.empty()) {
    const std::uint32_t v = ready.top();
    ready.pop();
    g.topo_.push_back(NodeId{v});
    for (NodeId w : g.out_[v]) {
      if (--indeg[w.index] == 0) ready.push(w.index);
    }
  }
  return g;
}

namespace {

// Some arc lying on a cycle, found by DFS restricted to nodes Kahn could not
// order.
std::optional<Arc> find_cycle_arc(const NfcGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<bool> ordered(n, false);
  for (NodeId v : g.topological_order()) ordered[v.index] = true;
  std::vector<int> color(n, 0);  // 0 white, 1 on stack, 2 done
  for (std::size_t start = 0; start < n; ++start) {
    if (ordered[start] || color[start] != 0) continue;
    std::vector<std::pair<NodeId, std::size_t>> stack{{NodeId{static_cast<std::uint32_t>(start)}, 0}};
    color[start] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      const auto outs = g.out_neighborhood(v);
      if (next == outs.size()) {
        color[v.index] = 2;
        stack.pop_back();
        continue;
      }
      const NodeId w = outs[next++];
      if (ordered[w.index]) continue;
      if (color[w.index] == 1) return Arc{v, w};
      if (color[w.index] == 0) {
        color[w.index] = 1;
        stack.emplace_back(w, 0);
      }
    }
  }
  return std::nullopt;
}

}  // namespace

ValidationReport validate_graph(const NfcGraph& g) {
  ValidationReport report;
  report.issues = g.assembly_issues_;
  const std::size_t n = g.node_count();

  std::set<std::string> seen;
  for (std::size_t v = 0; v < n; ++v) {
    if (!seen.insert(g.names_[v]).second) {
      report.issues.push_back({IssueKind::RoleConflict, "node name '" + g.names_[v] + "' declared twice",
                               NodeId{static_cast<std::uint32_t>(v)}, std::nullopt});
    }
  }

  if (!g.acyclic()) {
    Issue issue{IssueKind::CycleDetected, "graph contains a cycle", std::nullopt, find_cycle_arc(g)};
    if (issue.arc) {
      issue.message = "cycle through arc " + g.name(issue.arc->from) + " -> " + g.name(issue.arc->to);
      issue.node = issue.arc->from;
    }
    report.issues.push_back(std::move(issue));
  }

  for (NodeId d : g.destinations()) {
    for (NodeId w : g.out_neighborhood(d)) {
      report.issues.push_back({IssueKind::RoleConflict,
                               "destination '" + g.name(d) + "' has outgoing arc to '" + g.name(w) + "'", d,
                               Arc{d, w}});
    }
  }

  if (g.mode() == GraphMode::Tree) {
    if (g.destinations().size() != 1) {
      report.issues.push_back({IssueKind::TreeViolation,
                               "tree mode needs exactly one destination, found " +
                                   std::to_string(g.destinations().size()),
                               std::nullopt, std::nullopt});
    }
    for (std::size_t v = 0; v < n; ++v) {
      const NodeId id{static_cast<std::uint32_t>(v)};
      const NodeRole role = g.role(id);
      if (role != NodeRole::Destination && g.out_neighborhood(id).size() != 1) {
        report.issues.push_back({IssueKind::TreeViolation,
                                 "node '" + g.name(id) + "' has out-degree " +
                                     std::to_string(g.out_neighborhood(id).size()) + ", tree mode needs 1",
                                 id, std::nullopt});
      }
      if (role == NodeRole::Source && !g.in_neighborhood(id).empty()) {
        report.issues.push_back({IssueKind::TreeViolation,
                                 "source '" + g.name(id) + "' has incoming arcs; sources must be leaves", id,
                                 Arc{g.in_neighborhood(id).front(), id}});
      }
      if (role == NodeRole::Atomic && g.in_neighborhood(id).empty()) {
        report.issues.push_back(
            {IssueKind::TreeViolation, "atomic node '" + g.name(id) + "' has no children", id, std::nullopt});
      }
    }
  }
  return report;
}

NfcGraph build_graph(const TopologyConfig& config) {
  NfcGraph g = assemble_graph(config);
  const ValidationReport report = validate_graph(g);
  if (!report.ok()) {
    const Issue& first = report.issues.front();
    throw Error(to_error_code(first.kind), first.message);
  }
  return g;
}

NfcGraph set_topology(const NfcGraph& g, const TopologyConfig& patch) {
  TopologyConfig cfg = g.config();
  for (const auto& decl : patch.nodes) cfg.nodes.push_back(decl);
  for (const auto& [head, kids] : patch.children) {
    auto it = std::find_if(cfg.children.begin(), cfg.children.end(),
                           [head = head](const auto& entry) { return entry.first == head; });
    if (it != cfg.children.end()) {
      it->second = kids;
    } else {
      cfg.children.emplace_back(head, kids);
    }
  }
  return build_graph(cfg);
}

NfcGraph reparent(const NfcGraph& g, NodeId child, NodeId new_parent) {
  TopologyConfig patch;
  for (NodeId parent : g.out_neighborhood(child)) {
    std::vector<NodeId> kids;
    for (NodeId k : g.in_neighborhood(parent)) {
      if (k != child) kids.push_back(k);
    }
    patch.children.emplace_back(parent, std::move(kids));
  }
  std::vector<NodeId> kids(g.in_neighborhood(new_parent).begin(), g.in_neighborhood(new_parent).end());
  kids.push_back(child);
  patch.children.emplace_back(new_parent, std::move(kids));
  return set_topology(g, patch);
}

std::size_t min_cut(const NfcGraph& g, NodeId dest, std::optional<std::size_t> source_rate) {
  if (dest.index >= g.node_count() || g.role(dest) != NodeRole::Destination) {
    throw Error(ErrorCode::NotADestination, "min_cut target must be a destination");
  }
  // Residual network: node indices 0..n-1 plus super-source n. Every arc has
  // a forward edge (capacity 1) and a reverse edge (capacity 0).
  const std::size_t n = g.node_count();
  const std::size_t super = n;
  struct Edge {
    std::size_t to;
    std::size_t cap;
    std::size_t rev;
  };
  std::vector<std::vector<Edge>> adj(n + 1);
  auto add_edge = [&](std::size_t u, std::size_t v, std::size_t cap) {
    adj[u].push_back({v, cap, adj[v].size()});
    adj[v].push_back({u, 0, adj[u].size() - 1});
  };
  constexpr std::size_t kInfinite = std::numeric_limits<std::size_t>::max() / 2;
  for (NodeId s : g.sources()) add_edge(super, s.index, source_rate.value_or(kInfinite));
  for (const Arc& a : g.arcs()) add_edge(a.from.index, a.to.index, 1);

  // Edmonds-Karp; every augmenting path carries exactly one unit because
  // each path uses at least one unit arc.
  std::size_t flow = 0;
  while (true) {
    std::vector<std::pair<std::size_t, std::size_t>> parent(n + 1, {kInfinite, 0});
    std::deque<std::size_t> queue{super};
    parent[super] = {super, 0};
    while (!queue.empty() && parent[dest.index].first == kInfinite) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t i = 0; i < adj[u].size(); ++i) {
        const Edge& e = adj[u][i];
        if (e.cap > 0 && parent[e.to].first == kInfinite) {
          parent[e.to] = {u, i};
          queue.push_back(e.to);
        }
      }
    }
    if (parent[dest.index].first == kInfinite) break;
    for (std::size_t v = dest.index; v != super;) {
      auto [u, i] = parent[v];
      Edge& e = adj[u][i];
      e.cap -= 1;
      adj[v][e.rev].cap += 1;
      v = u;
    }
    ++flow;
  }
  return flow;
}

namespace generators {

TopologyConfig star(std::size_t sources) {
  TopologyConfig cfg;
  cfg.mode = GraphMode::Tree;
  std::vector<NodeId> kids;
  for (std::size_t i = 0; i < sources; ++i) {
    cfg.nodes.push_back({"s" + std::to_string(i + 1), NodeRole::Source});
    kids.push_back(NodeId{static_cast<std::uint32_t>(i)});
  }
  const NodeId relay{static_cast<std::uint32_t>(sources)};
  cfg.nodes.push_back({"a", NodeRole::Atomic});
  cfg.nodes.push_back({"d", NodeRole::Destination});
  cfg.children.emplace_back(relay, std::move(kids));
  cfg.children.emplace_back(NodeId{relay.index + 1}, std::vector<NodeId>{relay});
  return cfg;
}

TopologyConfig binary_tree(std::size_t depth) {
  // Heap layout: node i has children 2i+1, 2i+2; leaves are the last 2^depth.
  TopologyConfig cfg;
  cfg.mode = GraphMode::Tree;
  const std::size_t total = (std::size_t{1} << (depth + 1)) - 1;
  const std::size_t first_leaf = total - (std::size_t{1} << depth);
  for (std::size_t i = 0; i < total; ++i) {
    if (i == 0) {
      cfg.nodes.push_back({"d", NodeRole::Destination});
    } else if (i >= first_leaf) {
      cfg.nodes.push_back({"s" + std::to_string(i - first_leaf + 1), NodeRole::Source});
    } else {
      cfg.nodes.push_back({"a" + std::to_string(i), NodeRole::Atomic});
    }
  }
  for (std::size_t i = 0; i < first_leaf; ++i) {
    cfg.children.emplace_back(NodeId{static_cast<std::uint32_t>(i)},
                              std::vector<NodeId>{NodeId{static_cast<std::uint32_t>(2 * i + 1)},
                                                  NodeId{static_cast<std::uint32_t>(2 * i + 2)}});
  }
  return cfg;
}

TopologyConfig chain(std::size_t relays) {
  TopologyConfig cfg;
  cfg.mode = GraphMode::Tree;
  cfg.nodes.push_back({"s1", NodeRole::Source});
  for (std::size_t i = 0; i < relays; ++i) cfg.nodes.push_back({"a" + std::to_string(i + 1), NodeRole::Atomic});
  cfg.nodes.push_back({"d", NodeRole::Destination});
  for (std::size_t i = 1; i < cfg.nodes.size(); ++i) {
    cfg.children.emplace_back(NodeId{static_cast<std::uint32_t>(i)},
                              std::vector<NodeId>{NodeId{static_cast<std::uint32_t>(i - 1)}});
  }
  return cfg;
}

TopologyConfig random_tree(std::size_t sources, std::size_t max_depth, RngStream& rng) {
  if (max_depth == 0) throw Error(ErrorCode::TreeViolation, "random tree needs depth >= 1");
  auto pick = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  TopologyConfig cfg;
  cfg.mode = GraphMode::Tree;
  cfg.nodes.push_back({"d", NodeRole::Destination});
  std::vector<std::size_t> depth{0};
  std::vector<std::vector<NodeId>> kids(1);

  const std::size_t atomics = max_depth >= 2 ? pick(sources + 1) : 0;
  for (std::size_t i = 0; i < atomics; ++i) {
    std::vector<std::size_t> candidates;
    for (std::size_t v = 0; v < depth.size(); ++v) {
      if (depth[v] + 2 <= max_depth) candidates.push_back(v);
    }
    const std::size_t parent = candidates[pick(candidates.size())];
    const auto id = static_cast<std::uint32_t>(cfg.nodes.size());
    cfg.nodes.push_back({"a" + std::to_string(i + 1), NodeRole::Atomic});
    depth.push_back(depth[parent] + 1);
    kids.emplace_back();
    kids[parent].push_back(NodeId{id});
  }

  std::vector<std::size_t> childless;
  for (std::size_t v = 0; v < kids.size(); ++v) {
    if (kids[v].empty()) childless.push_back(v);
  }
  for (std::size_t i = 0; i < sources; ++i) {
    const auto id = static_cast<std::uint32_t>(cfg.nodes.size());
    cfg.nodes.push_back({"s" + std::to_string(i + 1), NodeRole::Source});
    const std::size_t parent = i < childless.size() ? childless[i] : pick(kids.size());
    kids[parent].push_back(NodeId{id});
  }
  for (std::size_t v = 0; v < kids.size(); ++v) {
    if (!kids[v].empty()) cfg.children.emplace_back(NodeId{static_cast<std::uint32_t>(v)}, kids[v]);
  }
  return cfg;
}

}  // namespace generators

}  // namespace condense::graph
