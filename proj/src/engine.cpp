#include "condense/engine.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <stdexcept>

#include <fmt/format.h>

#include "condense/error.hpp"
#include "condense/rlnc.hpp"

namespace condense::engine {

namespace {

using graph::NfcGraph;
using graph::NodeRole;

struct Sink {
  std::vector<Event>* audit = nullptr;
  bool trace = false;
};

struct Flow {
  std::uint64_t messages = 0;
  std::uint64_t symbols = 0;
};

// Bookkeeping shared by every application for one generation.
class Meter {
 public:
  Meter(const NfcGraph& g, Metrics& m, GenerationRecord& rec, const Sink& sink)
      : g_(g), m_(m), rec_(rec), audit_(sink.audit), trace_(sink.trace) {
    if (trace_) m_.arc_trace.emplace_back(m_.arcs.size(), 0);
  }

  void charge(NodeId from, NodeId to, Flow f, bool lost) {
    const std::size_t i = *g_.arc_index({from, to});
    ArcCounter& arc = m_.arcs[i];
    arc.messages += f.messages;
    arc.symbols += f.symbols;
    rec_.messages += f.messages;
    rec_.symbols += f.symbols;
    if (lost) {
      arc.lost += f.messages;
      rec_.lost_messages += f.messages;
    }
    if (trace_) m_.arc_trace.back()[i] += f.symbols;
  }

  void event(EventKind kind, NodeId node, std::optional<NodeId> peer = std::nullopt) {
    if (audit_ != nullptr) audit_->push_back({rec_.generation, pass, kind, node, peer});
  }

  std::uint64_t pass = 0;

 private:
  const NfcGraph& g_;
  Metrics& m_;
  GenerationRecord& rec_;
  std::vector<Event>* audit_;
  bool trace_;
};

bool dropped_atomic(const Scenario& s, NodeId v, std::uint64_t draw_gen) {
  if (s.graph.role(v) != NodeRole::Atomic) return false;
  RngStream rng = RngStream::derive(s.seed, v.index, draw_gen, Purpose::Dropout);
  return rng.bernoulli(s.node_dropout_p);
}

bool lost_message(const Scenario& s, NodeId sender, std::uint64_t draw_gen) {
  RngStream rng = RngStream::derive(s.seed, sender.index, draw_gen, Purpose::MessageLoss);
  return rng.bernoulli(s.message_loss_p);
}

// One sweep of the graph under the barrier. eval(v, inputs) produces a
// node's outgoing message (sources get no inputs); flow(msg) meters it.
// Returns whatever reached the destination, in child order.
template <class Msg, class Eval, class Measure>
std::vector<Msg> sweep(const Scenario& s, Meter& meter, std::uint64_t draw_gen, GenerationRecord& rec, Eval eval,
                       Measure flow) {
  const NfcGraph& g = s.graph;
  // inbox[v][p]: message from v's p-th child; arrived marks buffered or lost.
  std::vector<std::vector<std::optional<Msg>>> inbox(g.node_count());
  std::vector<std::vector<bool>> arrived(g.node_count());
  std::vector<bool> dropped(g.node_count(), false);
  for (NodeId v : g.topological_order()) {
    inbox[v.index].resize(g.in_neighborhood(v).size());
    arrived[v.index].assign(g.in_neighborhood(v).size(), false);
  }

  std::vector<Msg> delivered;
  for (NodeId v : g.topological_order()) {
    if (dropped_atomic(s, v, draw_gen)) {
      dropped[v.index] = true;
      ++rec.dropped_nodes;
      meter.event(EventKind::Dropped, v);
      continue;
    }
    const auto kids = g.in_neighborhood(v);
    std::vector<Msg> inputs;
    for (std::size_t p = 0; p < kids.size(); ++p) {
      if (!dropped[kids[p].index] && !arrived[v.index][p]) {
        throw std::logic_error("barrier violated at node " + g.name(v));
      }
      if (inbox[v.index][p]) inputs.push_back(std::move(*inbox[v.index][p]));
    }
    if (g.role(v) == NodeRole::Destination) {
      meter.event(EventKind::Evaluate, v);
      delivered = std::move(inputs);
      continue;
    }
    if (g.role(v) != NodeRole::Source && inputs.empty()) {
      // Nothing to combine: the parents learn the node stays silent.
      for (NodeId parent : g.out_neighborhood(v)) {
        const auto pk = g.in_neighborhood(parent);
        arrived[parent.index][std::find(pk.begin(), pk.end(), v) - pk.begin()] = true;
      }
      continue;
    }
    meter.event(EventKind::Evaluate, v);
    Msg out = eval(v, inputs);
    for (NodeId parent : g.out_neighborhood(v)) {
      const bool lost = lost_message(s, v, draw_gen);
      meter.charge(v, parent, flow(out), lost);
      meter.event(EventKind::Send, v, parent);
      const auto pk = g.in_neighborhood(parent);
      const auto p = static_cast<std::size_t>(std::find(pk.begin(), pk.end(), v) - pk.begin());
      arrived[parent.index][p] = true;
      if (lost) {
        meter.event(EventKind::Lost, v, parent);
      } else {
        meter.event(EventKind::Buffered, v, parent);
        inbox[parent.index][p] = out;
      }
    }
  }
  return delivered;
}

ff::GaloisField field_of_order(std::uint32_t order) {
  if (order < 2 || !std::has_single_bit(order)) {
    throw Error(ErrorCode::InvalidField, "field order " + std::to_string(order) + " is not a power of two");
  }
  const auto m = static_cast<unsigned>(std::countr_zero(order));
  return ff::GaloisField(m, m == 8 ? ff::GaloisField::kDefaultPolynomial : ff::GaloisField::default_polynomial(m));
}

void run_rlnc(const Scenario& s, Metrics& m, ScenarioResult& r, const Sink& sink) {
  const NfcGraph& g = s.graph;
  const ff::GaloisField field = field_of_order(s.field_order);
  const std::size_t n = g.source_count();
  for (std::uint64_t t = 0; t < s.generations; ++t) {
    GenerationRecord& rec = m.generations.emplace_back();
    rec.generation = t;
    Meter meter(g, m, rec, sink);
    const auto sources = rlnc::draw_sources(g, field, s.packet_length, s.seed, t);
    rlnc::DecoderState decoder(field, n, s.packet_length);
    for (std::uint64_t pass = 0; pass < s.n_prime; ++pass) {
      meter.pass = pass;
      const std::uint64_t gen = (t << 32) | pass;
      auto eval = [&](NodeId v, std::span<const rlnc::CodedPacket> in) {
        if (g.role(v) == NodeRole::Source) {
          const std::size_t i = g.source_index(v);
          return rlnc::source_encode(n, i, sources[i]);
        }
        RngStream rng = RngStream::derive(s.seed, v.index, gen, Purpose::LocalCoefficients);
        return rlnc::atomic_recode(field, in, rng);
      };
      auto flow = [](const rlnc::CodedPacket& p) { return Flow{1, p.wire_symbols()}; };
      for (const rlnc::CodedPacket& p : sweep<rlnc::CodedPacket>(s, meter, gen, rec, eval, flow)) decoder.add(p);
    }
    bool ok = false;
    if (decoder.full_rank()) {
      const rlnc::DecodeOutcome outcome = rlnc::destination_decode(decoder);
      const auto* rec_packets = std::get_if<rlnc::Recovered>(&outcome);
      if (rec_packets == nullptr || rec_packets->packets != sources) {
        throw std::logic_error("full-rank decode did not reproduce the source packets");
      }
      ok = true;
    }
    rec.completed = ok;
    rec.value = ok ? 1.0 : 0.0;
    r.successes += ok;
  }
  r.headline_name = "success_probability";
  r.headline = s.generations == 0 ? 0.0 : static_cast<double>(r.successes) / static_cast<double>(s.generations);
}

void run_consensus(const Scenario& s, Metrics& m, ScenarioResult& r, const Sink& sink) {
  const NfcGraph& g = s.graph;
  const afc::FunctionAssignment fns = afc::decompose_average(g);
  const learning::SampleStream samples =
      learning::normal_samples(g.source_count(), s.packet_length, s.sample_mean, s.sample_stddev, s.seed);
  learning::ConsensusState state{std::vector<double>(s.packet_length, 0.0), 0};
  for (std::uint64_t t = 0; t < s.generations; ++t) {
    GenerationRecord& rec = m.generations.emplace_back();
    rec.generation = t;
    Meter meter(g, m, rec, sink);
    const auto x = samples(t);
    auto eval = [&](NodeId v, std::span<const afc::Packet> in) {
      if (g.role(v) == NodeRole::Source) {
        const afc::Packet own = afc::Packet::real(x[g.source_index(v)]);
        return afc::eval_dafc(fns.at(v), std::span(&own, 1));
      }
      return afc::eval_dafc(fns.at(v), in);
    };
    auto flow = [](const afc::Packet& p) { return Flow{1, p.size()}; };
    const std::vector<afc::Packet> arrived = sweep<afc::Packet>(s, meter, t, rec, eval, flow);
    if (arrived.empty()) {
      rec.completed = false;
    } else {
      const afc::Packet mean = afc::eval_dafc(fns.at(g.destinations().front()), arrived);
      state = learning::consensus_step(state, mean.reals(), s.eta);
    }
    rec.value = state.w.front();
  }
  r.final_estimate = state.w;
  r.headline_name = "final_estimate";
  r.headline = state.w.front();
}

void run_forwarding(const Scenario& s, Metrics& m, ScenarioResult& r, const Sink& sink) {
  const NfcGraph& g = s.graph;
  const std::size_t per_packet = s.packet_length + s.forwarding_header;
  using Bundle = std::vector<std::size_t>;  // source indices carried
  double delivered_total = 0.0;
  for (std::uint64_t t = 0; t < s.generations; ++t) {
    GenerationRecord& rec = m.generations.emplace_back();
    rec.generation = t;
    Meter meter(g, m, rec, sink);
    auto eval = [&](NodeId v, std::span<const Bundle> in) {
      if (g.role(v) == NodeRole::Source) return Bundle{g.source_index(v)};
      Bundle out;
      for (const Bundle& b : in) out.insert(out.end(), b.begin(), b.end());
      return out;
    };
    auto flow = [&](const Bundle& b) { return Flow{b.size(), b.size() * per_packet}; };
    std::size_t got = 0;
    for (const Bundle& b : sweep<Bundle>(s, meter, t, rec, eval, flow)) got += b.size();
    rec.completed = got > 0;
    rec.value = static_cast<double>(got) / static_cast<double>(g.source_count());
    delivered_total += rec.value;
  }
  r.headline_name = "delivered_fraction";
  r.headline = s.generations == 0 ? 0.0 : delivered_total / static_cast<double>(s.generations);
}

void run_neural(const Scenario& s, Metrics& m, ScenarioResult& r, const Sink& sink) {
  const NfcGraph& g = s.graph;
  learning::TreeNetwork net(g, 1, s.seed);
  const auto data = learning::separable_dataset(g.source_count(), s.dataset_size, s.seed);
  const learning::FailureModel failures{s.node_dropout_p, s.message_loss_p, s.seed};
  r.initial_loss = learning::dataset_loss(net, data);
  for (std::uint64_t t = 0; t < s.generations; ++t) {
    GenerationRecord& rec = m.generations.emplace_back();
    rec.generation = t;
    Meter meter(g, m, rec, sink);
    const learning::TrainingSample& sample = data[t % data.size()];
    const learning::ForwardResult fwd = learning::nn_upward_pass(net, sample, failures, t);
    // Upward activities, in the order the forward pass evaluated them.
    for (NodeId v : g.topological_order()) {
      if (fwd.dropped[v.index]) {
        meter.event(EventKind::Dropped, v);
        continue;
      }
      if (g.role(v) != NodeRole::Source) meter.event(EventKind::Evaluate, v);
      for (NodeId parent : g.out_neighborhood(v)) {
        meter.charge(v, parent, {1, fwd.activity[v.index].size()}, false);
        meter.event(EventKind::Send, v, parent);
        meter.event(EventKind::Buffered, v, parent);
      }
    }
    // Downward deltas: every live neuron sends one symbol to each neuron child.
    for (NodeId v : net.neurons()) {
      if (fwd.dropped[v.index]) continue;
      for (NodeId k : g.in_neighborhood(v)) {
        if (g.role(k) == NodeRole::Source) continue;
        RngStream rng = RngStream::derive(s.seed, k.index, t, Purpose::MessageLoss);
        meter.charge(k, v, {1, 1}, rng.bernoulli(s.message_loss_p));
      }
    }
    const learning::DownwardReport down =
        learning::nn_downward_pass(net, sample.label, t, learning::step_size(s.eta, t), failures);
    rec.dropped_nodes = fwd.dropped_count;
    if (rec.lost_messages != down.lost_messages) throw std::logic_error("downward loss accounting diverged");
    rec.value = learning::log_loss(fwd.prediction, learning::to_internal_label(sample.label));
  }
  r.final_loss = learning::dataset_loss(net, data);
  r.headline_name = "final_loss";
  r.headline = r.final_loss;
}

}  // namespace

std::string_view to_string(Application app) noexcept {
  switch (app) {
    case Application::Rlnc: return "rlnc";
    case Application::Consensus: return "consensus";
    case Application::Neural: return "neural";
    case Application::Forwarding: return "forwarding";
  }
  return "?";
}

std::optional<Application> parse_application(std::string_view name) noexcept {
  if (name == "rlnc") return Application::Rlnc;
  if (name == "consensus" || name == "average") return Application::Consensus;
  if (name == "neural") return Application::Neural;
  if (name == "forwarding") return Application::Forwarding;
  return std::nullopt;
}

std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::Dropped: return "dropped";
    case EventKind::Send: return "send";
    case EventKind::Lost: return "lost";
    case EventKind::Buffered: return "buffered";
    case EventKind::Evaluate: return "evaluate";
  }
  return "?";
}

std::size_t header_symbols(const Scenario& s) noexcept {
  switch (s.application) {
    case Application::Rlnc: return s.graph.source_count();
    case Application::Consensus: return 1;
    case Application::Neural: return 0;
    case Application::Forwarding: return s.forwarding_header;
  }
  return 0;
}

void validate_scenario(const Scenario& s) {
  const auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidScenario, what); };
  if (s.graph.mode() != graph::GraphMode::Tree) throw Error(ErrorCode::NotATree, "scenarios run over trees");
  if (s.graph.destinations().size() != 1) bad("exactly one destination required");
  if (s.graph.source_count() == 0) bad("no sources");
  if (s.packet_length == 0) bad("packet length L must be positive");
  for (double p : {s.node_dropout_p, s.message_loss_p}) {
    if (!(p >= 0.0 && p <= 1.0)) bad("failure probabilities must lie in [0, 1]");
  }
  switch (s.application) {
    case Application::Rlnc:
      if (s.domain != afc::Domain::Field) bad("rlnc needs a field domain");
      (void)field_of_order(s.field_order);
      break;
    case Application::Consensus:
      if (s.domain != afc::Domain::Real) bad("consensus needs the real domain");
      if (!(s.sample_stddev >= 0.0)) bad("sample stddev must be non-negative");
      break;
    case Application::Neural:
      if (s.domain != afc::Domain::Real) bad("neural needs the real domain");
      if (s.packet_length != 1) bad("neural runs with scalar features, L = 1");
      if (s.dataset_size == 0) bad("empty dataset");
      break;
    case Application::Forwarding:
      break;
  }
}

ScenarioResult run_scenario(const Scenario& s, const RunOptions& options) {
  validate_scenario(s);
  const auto start = std::chrono::steady_clock::now();
  ScenarioResult r;
  r.application = s.application;
  Metrics& m = r.metrics;
  for (graph::Arc a : s.graph.arcs()) m.arcs.push_back({a});
  const Sink sink{options.audit ? &r.audit : nullptr, options.arc_trace};
  switch (s.application) {
    case Application::Rlnc: run_rlnc(s, m, r, sink); break;
    case Application::Consensus: run_consensus(s, m, r, sink); break;
    case Application::Neural: run_neural(s, m, r, sink); break;
    case Application::Forwarding: run_forwarding(s, m, r, sink); break;
  }

  for (const GenerationRecord& g : m.generations) {
    m.total_symbols += g.symbols;
    m.total_messages += g.messages;
    m.dropped_nodes += g.dropped_nodes;
    m.lost_messages += g.lost_messages;
  }
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

bool audit_barrier(const graph::NfcGraph& g, const std::vector<Event>& audit) {
  // State for the current (generation, pass) block.
  std::vector<std::vector<bool>> reported(g.node_count());
  std::vector<bool> dropped, evaluated;
  std::uint64_t gen = 0, pass = 0;
  bool first = true;
  for (const Event& e : audit) {
    if (first || e.generation != gen || e.pass != pass) {
      for (NodeId v : g.topological_order()) reported[v.index].assign(g.in_neighborhood(v).size(), false);
      dropped.assign(g.node_count(), false);
      evaluated.assign(g.node_count(), false);
      gen = e.generation;
      pass = e.pass;
      first = false;
    }
    switch (e.kind) {
      case EventKind::Dropped: dropped[e.node.index] = true; break;
      case EventKind::Send:
        if (evaluated[e.peer->index]) return false;
        break;
      case EventKind::Lost:
      case EventKind::Buffered: {
        const auto kids = g.in_neighborhood(*e.peer);
        for (std::size_t p = 0; p < kids.size(); ++p) {
          if (kids[p] == e.node) reported[e.peer->index][p] = true;
        }
        break;
      }
      case EventKind::Evaluate: {
        // A live child that evaluated must have reported; one that did not
        // evaluate had no inputs and any later Send is caught above.
        const auto kids = g.in_neighborhood(e.node);
        for (std::size_t p = 0; p < kids.size(); ++p) {
          const NodeId k = kids[p];
          if (!dropped[k.index] && evaluated[k.index] && !reported[e.node.index][p]) return false;
        }
        evaluated[e.node.index] = true;
        break;
      }
    }
  }
  return true;
}

CostReport compare_costs(const ScenarioResult& nfc, const ScenarioResult& forwarding) {
  if (forwarding.application != Application::Forwarding) {
    throw Error(ErrorCode::MismatchedScenarios, "second scenario must be a forwarding baseline");
  }
  const auto& a = nfc.metrics;
  const auto& b = forwarding.metrics;
  bool same_arcs = a.arcs.size() == b.arcs.size();
  for (std::size_t i = 0; same_arcs && i < a.arcs.size(); ++i) same_arcs = a.arcs[i].arc == b.arcs[i].arc;
  if (!same_arcs) throw Error(ErrorCode::MismatchedScenarios, "scenarios use different graphs");
  if (a.generations.size() != b.generations.size()) {
    throw Error(ErrorCode::MismatchedScenarios, "scenarios run a different number of generations");
  }
  CostReport report;
  report.nfc_total = a.total_symbols;
  report.forwarding_total = b.total_symbols;
  report.nfc_messages = a.total_messages;
  report.forwarding_messages = b.total_messages;
  if (report.nfc_total > 0) {
    report.ratio = static_cast<double>(report.forwarding_total) / static_cast<double>(report.nfc_total);
  }
  if (report.nfc_messages > 0) {
    report.message_ratio = static_cast<double>(report.forwarding_messages) / static_cast<double>(report.nfc_messages);
  }
  for (std::size_t i = 0; i < a.arcs.size(); ++i) {
    report.arcs.push_back({a.arcs[i].arc, a.arcs[i].symbols, b.arcs[i].symbols});
  }
  return report;
}

CostReport compare_costs(const Scenario& nfc, const Scenario& forwarding) {
  if (!(nfc.graph == forwarding.graph)) throw Error(ErrorCode::MismatchedScenarios, "scenarios use different graphs");
  if (nfc.generations != forwarding.generations) {
    throw Error(ErrorCode::MismatchedScenarios, "scenarios run a different number of generations");
  }
  if (forwarding.application != Application::Forwarding) {
    throw Error(ErrorCode::MismatchedScenarios, "second scenario must be a forwarding baseline");
  }
  return compare_costs(run_scenario(nfc), run_scenario(forwarding));
}

std::string arcs_csv(const graph::NfcGraph& g, const ScenarioResult& r) {
  std::string out = "arc,from,to,messages,symbols,lost\n";
  for (std::size_t i = 0; i < r.metrics.arcs.size(); ++i) {
    const ArcCounter& a = r.metrics.arcs[i];
    out += fmt::format("{},{},{},{},{},{}\n", i, g.name(a.arc.from), g.name(a.arc.to), a.messages, a.symbols, a.lost);
  }
  return out;
}

std::string generations_csv(const ScenarioResult& r) {
  std::string out = "generation,messages,symbols,dropped_nodes,lost_messages,completed\n";
  for (const GenerationRecord& g : r.metrics.generations) {
    out += fmt::format("{},{},{},{},{},{}\n", g.generation, g.messages, g.symbols, g.dropped_nodes, g.lost_messages,
                       g.completed ? 1 : 0);
  }
  return out;
}

std::string trajectory_csv(const ScenarioResult& r) {
  std::string out = "generation,value,dropped_nodes,lost_messages\n";
  for (const GenerationRecord& g : r.metrics.generations) {
    out += fmt::format("{},{},{},{}\n", g.generation, g.value, g.dropped_nodes, g.lost_messages);
  }
  return out;
}

std::string arc_trace_csv(const ScenarioResult& r) {
  std::string out = "generation,arc,symbols\n";
  for (std::size_t t = 0; t < r.metrics.arc_trace.size(); ++t) {
    for (std::size_t i = 0; i < r.metrics.arc_trace[t].size(); ++i) {
      out += fmt::format("{},{},{}\n", t, i, r.metrics.arc_trace[t][i]);
    }
  }
  return out;
}

std::string costs_csv(const graph::NfcGraph& g, const CostReport& report) {
  std::string out = "arc,from,to,nfc_symbols,forwarding_symbols\n";
  for (std::size_t i = 0; i < report.arcs.size(); ++i) {
    const ArcCost& a = report.arcs[i];
    out += fmt::format("{},{},{},{},{}\n", i, g.name(a.arc.from), g.name(a.arc.to), a.nfc_symbols,
                       a.forwarding_symbols);
  }
  return out;
}

std::string summary_line(const Scenario& s, const ScenarioResult& r) {
  return fmt::format("{}: generations={} symbols={} messages={} dropped={} lost={} {}={}", to_string(s.application),
                     r.metrics.generations.size(), r.metrics.total_symbols, r.metrics.total_messages,
                     r.metrics.dropped_nodes, r.metrics.lost_messages, r.headline_name, r.headline);
}

}  // namespace condense::engine
