#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "condense/afc.hpp"
#include "condense/learning.hpp"
#include "condense/nfc_graph.hpp"

namespace condense::engine {

using graph::NodeId;

// rlnc: coded delivery of every source packet (N' passes per generation).
// consensus: in-network average feeding the running-average update.
// neural: one upward/downward training cycle per generation.
// forwarding: raw packets relayed hop by hop to the destination.
enum class Application { Rlnc, Consensus, Neural, Forwarding };

std::string_view to_string(Application app) noexcept;
// Accepts rlnc, consensus (alias average), neural, forwarding.
std::optional<Application> parse_application(std::string_view name) noexcept;

struct Scenario {
  graph::NfcGraph graph;
  Application application = Application::Forwarding;
  afc::Domain domain = afc::Domain::Real;
  std::uint32_t field_order = 256;  // rlnc only
  std::size_t packet_length = 1;    // L
  std::uint64_t generations = 1;    // T
  std::uint64_t seed = 0;
  double node_dropout_p = 0.0;
  double message_loss_p = 0.0;

  std::size_t n_prime = 1;  // rlnc passes per generation

  // consensus samples ~ Normal(sample_mean, sample_stddev), dimension L
  double sample_mean = 0.0;
  double sample_stddev = 1.0;
  learning::EtaSchedule eta = learning::Harmonic{};

  std::size_t dataset_size = 32;  // neural; L must be 1

  // Header symbols per forwarded packet (a source id).
  std::size_t forwarding_header = 0;
};

// Header symbols charged per message by the application.
std::size_t header_symbols(const Scenario& s) noexcept;

// Throws Error(InvalidScenario) for an incompatible application/domain pair,
// bad probabilities, L = 0, or neural with L != 1; Error(NotATree) for dag
// graphs; Error(InvalidField) for a bad rlnc field order.
void validate_scenario(const Scenario& s);

struct ArcCounter {
  graph::Arc arc;
  std::uint64_t messages = 0;
  std::uint64_t symbols = 0;
  std::uint64_t lost = 0;
};

struct GenerationRecord {
  std::uint64_t generation = 0;
  std::uint64_t messages = 0;
  std::uint64_t symbols = 0;
  std::uint64_t dropped_nodes = 0;
  std::uint64_t lost_messages = 0;
  bool completed = true;  // the destination produced an output
  // rlnc: 1/0 decoded; consensus: first coordinate of w; neural: sample
  // loss; forwarding: fraction of source packets delivered.
  double value = 0.0;
};

enum class EventKind { Dropped, Send, Lost, Buffered, Evaluate };
std::string_view to_string(EventKind kind) noexcept;

// pass counts RLNC passes inside a generation; 0 elsewhere.
struct Event {
  std::uint64_t generation = 0;
  std::uint64_t pass = 0;
  EventKind kind = EventKind::Send;
  NodeId node;                  // sender for Send/Lost/Buffered, otherwise the node itself
  std::optional<NodeId> peer;   // receiver for Send/Lost/Buffered
};

struct Metrics {
  std::vector<ArcCounter> arcs;  // canonical arc order
  std::vector<GenerationRecord> generations;
  // arc_trace[t][i] = symbols on arc i in generation t; only when requested.
  std::vector<std::vector<std::uint64_t>> arc_trace;
  std::uint64_t total_symbols = 0;
  std::uint64_t total_messages = 0;
  std::uint64_t dropped_nodes = 0;
  std::uint64_t lost_messages = 0;
  double wall_seconds = 0.0;  // never serialized
};

struct ScenarioResult {
  Application application = Application::Forwarding;
  Metrics metrics;
  std::vector<Event> audit;  // only when requested
  std::string headline_name;
  double headline = 0.0;
  // rlnc
  std::uint64_t successes = 0;
  // consensus
  std::vector<double> final_estimate;
  // neural
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct RunOptions {
  bool audit = false;
  bool arc_trace = false;
};

// Executes generations 0..T-1 under a per-generation barrier: nodes run in
// topological order and a node evaluates only once every live child's
// message for that generation is buffered or known lost. Dropped atomic
// nodes send nothing; a node with no inputs left sends nothing either and
// the generation is recorded as not completed. RLNC draws match
// rlnc::run_recovery_experiment with trial = generation.
ScenarioResult run_scenario(const Scenario& s, const RunOptions& options = {});

// True when no Evaluate event precedes a Buffered event addressed to that
// node for the same generation and pass, and every live child has a
// Buffered or Lost event first.
bool audit_barrier(const graph::NfcGraph& g, const std::vector<Event>& audit);

struct ArcCost {
  graph::Arc arc;
  std::uint64_t nfc_symbols = 0;
  std::uint64_t forwarding_symbols = 0;
};

struct CostReport {
  std::uint64_t nfc_total = 0;
  std::uint64_t forwarding_total = 0;
  std::uint64_t nfc_messages = 0;
  std::uint64_t forwarding_messages = 0;
  double ratio = 0.0;          // forwarding_total / nfc_total, 0 when nothing was sent
  double message_ratio = 0.0;  // same for message counts
  std::vector<ArcCost> arcs;
};

// Throws Error(MismatchedScenarios) unless both scenarios share the graph
// and T and the second one is a forwarding scenario.
CostReport compare_costs(const Scenario& nfc, const Scenario& forwarding);
CostReport compare_costs(const ScenarioResult& nfc, const ScenarioResult& forwarding);

// CSV tables. Floats print in shortest round-trip form.
// arcs: arc,from,to,messages,symbols,lost
std::string arcs_csv(const graph::NfcGraph& g, const ScenarioResult& r);
// generations: generation,messages,symbols,dropped_nodes,lost_messages,completed
std::string generations_csv(const ScenarioResult& r);
// trajectory: generation,value,dropped_nodes,lost_messages
std::string trajectory_csv(const ScenarioResult& r);
// arc_trace: generation,arc,symbols (empty body without a trace)
std::string arc_trace_csv(const ScenarioResult& r);
// costs: arc,from,to,nfc_symbols,forwarding_symbols
std::string costs_csv(const graph::NfcGraph& g, const CostReport& report);
// One line: application, generations, totals, headline statistic.
std::string summary_line(const Scenario& s, const ScenarioResult& r);

}  // namespace condense::engine
