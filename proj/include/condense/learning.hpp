#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "condense/afc.hpp"
#include "condense/nfc_graph.hpp"
#include "condense/rng.hpp"

namespace condense::learning {

using graph::NodeId;

// eta_t = 1/(t+1)
struct Harmonic {};
struct ConstantRate {
  double eta = 0.1;
};
using EtaSchedule = std::variant<Harmonic, ConstantRate>;

double step_size(const EtaSchedule& schedule, std::uint64_t t) noexcept;
std::string describe(const EtaSchedule& schedule);

// ---------------------------------------------------------------- consensus

struct ConsensusState {
  std::vector<double> w;  // dimension Q
  std::uint64_t t = 0;
};

// Harmonic: w <- t/(t+1) w + 1/(t+1) mean; constant eta: w <- (1-eta) w + eta mean.
// Throws Error(DimensionMismatch) if mean and w differ in length.
ConsensusState consensus_step(const ConsensusState& state, std::span<const double> sample_mean,
                              const EtaSchedule& schedule = Harmonic{});

// Per-source sample vectors for generation t, indexed by source index.
using SampleStream = std::function<std::vector<std::vector<double>>(std::uint64_t t)>;

// i.i.d. Normal(mean, stddev) samples of dimension q for n sources, drawn
// from (seed, source, t, Dataset).
SampleStream normal_samples(std::size_t n, std::size_t q, double mean, double stddev, std::uint64_t seed);

struct ConsensusTrajectory {
  std::vector<ConsensusState> states;           // states[t] = w^(t), t = 0..T
  std::vector<std::vector<double>> means;       // network-computed mean per generation
};

// Installs decompose_average on g and, for t = 0..T-1, evaluates the
// network on the generation's samples and applies consensus_step with the
// destination's output. Throws Error(NotATree) for dag graphs.
ConsensusTrajectory consensus_run(const graph::NfcGraph& g, const SampleStream& samples, std::uint64_t generations,
                                  std::vector<double> w0, const EtaSchedule& schedule = Harmonic{});

// ----------------------------------------------------------- neural network

struct FailureModel {
  double node_dropout_p = 0.0;
  double message_loss_p = 0.0;
  std::uint64_t seed = 0;
};

// Labels are +-1 externally; internally 0/1.
struct TrainingSample {
  std::vector<std::vector<double>> x;  // per source, length L
  int label = 1;
};

// -1 -> 0, +1 -> 1; throws Error(DomainError) otherwise.
int to_internal_label(int label);
int to_external_label(int internal);

double sigmoid(double z) noexcept;
// J = -[y ln x + (1-y) ln(1-x)] with x clamped into [1e-15, 1 - 1e-15].
double log_loss(double prediction, int internal_label) noexcept;
// dJ/dx at the top layer: -y/x + (1-y)/(1-x), same clamp.
double top_seed(double prediction, int internal_label) noexcept;

// Upward-pass tuple for one generation: dx/dw = x(1-x) x_in and
// dx/dx_in[k] = x(1-x) w[k].
struct UpwardTuple {
  std::uint64_t t = 0;
  bool dropped = false;
  double activity = 0.0;
  std::vector<double> dx_dw;
  std::vector<double> dx_dxin;
};

UpwardTuple nn_upward_gradients(std::span<const double> weights, std::span<const double> x_in, double x_out,
                                std::uint64_t t);

// Per-node store of upward tuples. Inserting generation t evicts every entry
// older than t - window + 1.
class GradientStore {
 public:
  explicit GradientStore(std::size_t window = 8) : window_(window) {}
  void put(UpwardTuple tuple);
  // Removes and returns the tuple for t, if still held.
  std::optional<UpwardTuple> take(std::uint64_t t);
  bool contains(std::uint64_t t) const { return entries_.contains(t); }
  std::size_t size() const noexcept { return entries_.size(); }
  std::uint64_t evicted() const noexcept { return evicted_; }

 private:
  std::size_t window_;
  std::map<std::uint64_t, UpwardTuple> entries_;
  std::uint64_t evicted_ = 0;
};

inline constexpr std::size_t kStalenessWindow = 8;

// Logistic units on every atomic and destination node of a tree. A neuron's
// input is the concatenation of its children's outputs in child order:
// sources contribute their L-vector, neurons a single activity. Weights
// are indexed by that input, so a neuron's weight count is the sum of its
// children's output widths.
class TreeNetwork {
 public:
  // Weights start uniform in [-0.5, 0.5] from (seed, node, 0, WeightInit).
  // Throws Error(NotATree) for dag graphs.
  TreeNetwork(graph::NfcGraph g, std::size_t packet_length, std::uint64_t seed);

  const graph::NfcGraph& graph() const noexcept { return graph_; }
  std::size_t packet_length() const noexcept { return packet_length_; }
  // Neurons in topological order (children before parents).
  std::span<const NodeId> neurons() const noexcept { return neurons_; }
  NodeId root() const noexcept { return root_; }
  // Sources are level 0; a neuron sits one level above its highest child.
  std::size_t level(NodeId v) const { return level_.at(v.index); }
  std::size_t depth() const noexcept { return level_.at(root_.index); }
  std::size_t input_width(NodeId v) const { return weights_.at(v.index).size(); }
  // Offset of child k's block inside v's input vector.
  std::size_t input_offset(NodeId v, std::size_t child_position) const;

  std::span<const double> weights(NodeId v) const { return weights_.at(v.index); }
  // Throws Error(DimensionMismatch) on a wrong-length vector.
  void set_weights(NodeId v, std::vector<double> w);
  void fill_weights(double value);

  GradientStore& store(NodeId v) { return stores_.at(v.index); }
  const GradientStore& store(NodeId v) const { return stores_.at(v.index); }

 private:
  graph::NfcGraph graph_;
  std::size_t packet_length_;
  NodeId root_;
  std::vector<NodeId> neurons_;
  std::vector<std::size_t> level_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<std::size_t>> offsets_;
  std::vector<GradientStore> stores_;
};

struct ForwardResult {
  std::uint64_t t = 0;
  std::vector<std::vector<double>> activity;  // per node: L values for sources, 1 for neurons
  std::vector<bool> dropped;                  // per node
  std::size_t dropped_count = 0;
  double prediction = 0.0;

  std::vector<double> input_of(const TreeNetwork& net, NodeId v) const;
};

// Level-by-level evaluation of x = sigmoid(w . x_in). Atomic nodes drop with
// probability node_dropout_p from (seed, node, t, Dropout) and then output 0;
// the root is never dropped. Throws Error(DimensionMismatch) if the sample
// does not have N sources of length L.
ForwardResult nn_forward(const TreeNetwork& net, const TrainingSample& sample, const FailureModel& failures,
                         std::uint64_t t = 0);

// Forward pass that also stores every neuron's upward tuple.
ForwardResult nn_upward_pass(TreeNetwork& net, const TrainingSample& sample, const FailureModel& failures,
                             std::uint64_t t);

struct DownwardReport {
  std::uint64_t t = 0;
  std::vector<std::vector<double>> gradient;  // dJ/dw per node, empty where no update happened
  std::size_t lost_messages = 0;
  std::size_t stale_nodes = 0;                // live nodes whose tuple had been evicted
  std::size_t updated_nodes = 0;
};

// Seeds dJ/dx at the root, sends delta(m->k) = dJ/dx_m * dx_m/dx_k to each
// neuron child (each message lost with probability message_loss_p from
// (seed, child, t, MessageLoss)), and applies w <- w - eta * dJ/dx * dx/dw at
// every node holding a generation-t tuple. Tuples for t are removed.
DownwardReport nn_downward_pass(TreeNetwork& net, int label, std::uint64_t t, double eta,
                                const FailureModel& failures);

struct TrainPoint {
  std::uint64_t generation = 0;
  double loss = 0.0;  // per-sample loss of the generation's prediction
  std::size_t dropped_nodes = 0;
  std::size_t lost_messages = 0;
  std::size_t stale_nodes = 0;
};

struct TrainResult {
  std::vector<TrainPoint> trajectory;
  double initial_loss = 0.0;  // mean dataset loss before training, no failures
  double final_loss = 0.0;    // mean dataset loss after training, no failures
};

// Mean log-loss of the dataset with failures disabled.
double dataset_loss(const TreeNetwork& net, std::span<const TrainingSample> dataset);

// One upward/downward cycle per sample per epoch; generation t counts
// samples processed.
TrainResult nn_train(TreeNetwork& net, std::span<const TrainingSample> dataset, std::size_t epochs,
                     const EtaSchedule& schedule, const FailureModel& failures);

// Max over all weights of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6),
// numeric being the central difference of J with the given step.
double gradient_check(const TreeNetwork& net, const TrainingSample& sample, double step = 1e-5);

// Scalar features uniform in [-1, 1] for each source; label +1 when the first
// half of the sources sums higher than the second half, -1 otherwise.
// Samples closer than `margin` to the boundary are redrawn.
std::vector<TrainingSample> separable_dataset(std::size_t sources, std::size_t count, std::uint64_t seed,
                                              double margin = 0.1);

}  // namespace condense::learning
