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

#include "condense/finite_field.hpp"
#include "condense/nfc_graph.hpp"
#include "condense/rng.hpp"

namespace condense::afc {

using ff::Symbol;
using graph::NodeId;

enum class Domain { Field, Real };

std::string_view to_string(Domain domain) noexcept;

// A length-L message: field symbols in digital mode, doubles in analog mode.
class Packet {
 public:
  Packet() = default;
  static Packet field(std::vector<Symbol> symbols) { return Packet(std::move(symbols)); }
  static Packet real(std::vector<double> values) { return Packet(std::move(values)); }

  Domain domain() const noexcept { return data_.index() == 0 ? Domain::Field : Domain::Real; }
  std::size_t size() const noexcept;

  // Throw Error(DomainMismatch) on the wrong domain.
  std::span<const Symbol> symbols() const;
  std::span<const double> reals() const;

  friend bool operator==(const Packet&, const Packet&) = default;

 private:
  explicit Packet(std::vector<Symbol> s) : data_(std::move(s)) {}
  explicit Packet(std::vector<double> r) : data_(std::move(r)) {}
  std::variant<std::vector<Symbol>, std::vector<double>> data_;
};

struct ScalarFunction {
  std::string name;
  std::function<double(double)> apply;
};

namespace kind {

// sum_b e[b] * x^(b) over the field; one coefficient per input.
struct LinearCombination {
  ff::GaloisField field;
  std::vector<Symbol> coefficients;
};
// Symbol-wise reductions. Field symbols are read as integers; Sum and
// Average of field packets therefore yield real packets.
struct Sum {};
struct Max {};
struct Min {};
struct Average {};
// Counts every input symbol into integer bins [0, bins); out-of-range values
// clamp to the edge bins and are counted in EvalCounters::clamped.
struct Histogram {
  std::size_t bins = 0;
};
// Concatenation of the inputs in child order (a pure relay for one input).
struct Identity {};
// psi(sum_s h_s * phi_s(x_s) + noise), symbol-wise. phi_s already carries
// the 1/h_s scaling where a preset needs the channel inverted.
struct Nomographic {
  std::string name;
  std::vector<ScalarFunction> pre;
  std::vector<double> channel;
  ScalarFunction post;
};
// sigma(w . concat(inputs)) with the logistic sigma(z) = 1/(1+exp(-z)).
struct NeuronUnit {
  std::vector<double> weights;
};
// x -> (x, 1): a source's contribution to a (partial_sum, count) pair.
struct AppendCount {};
// Sums (partial_sum, count) inputs and divides the partial sum by the count.
struct CountedMean {};

}  // namespace kind

using AtomicFunctionSpec =
    std::variant<kind::Identity, kind::LinearCombination, kind::Sum, kind::Max, kind::Min, kind::Average,
                 kind::Histogram, kind::Nomographic, kind::NeuronUnit, kind::AppendCount, kind::CountedMean>;

std::string describe(const AtomicFunctionSpec& spec);

struct EvalCounters {
  std::uint64_t clamped = 0;
};

// Digital evaluation. Throws Error(ArityMismatch) when the input count does
// not fit the spec, Error(DomainMismatch) when packet domains are wrong or
// mixed, Error(DimensionMismatch) for unequal packet lengths. Nomographic
// specs are evaluated noise-free.
Packet eval_dafc(const AtomicFunctionSpec& spec, std::span<const Packet> inputs, EvalCounters* counters = nullptr);

// Analog superposition: r[l] = sum_s h_s * phi_s(x_s[l]) + N(0, sigma^2),
// output psi(r[l]). Throws Error(DomainError) when phi or psi produce a
// non-finite value (ln of a non-positive input, sqrt of a negative sum).
Packet eval_aafc(const kind::Nomographic& spec, std::span<const Packet> inputs, double noise_sigma,
                 RngStream& rng);

namespace presets {

// h_s must be nonzero; throws Error(DomainError) otherwise.
kind::Nomographic arithmetic_mean(std::vector<double> channel);
kind::Nomographic euclidean_norm(std::vector<double> channel);
kind::Nomographic geometric_mean(std::vector<double> channel);
// psi = identity, phi_s = x / h_s: the received value is the plain sum.
kind::Nomographic superposition(std::vector<double> channel);

}  // namespace presets

using FunctionAssignment = std::map<NodeId, AtomicFunctionSpec>;

struct EvaluationOptions {
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t generation = 0;
};

struct NetworkOutputs {
  std::vector<Packet> node_outputs;  // indexed by NodeId
  EvalCounters counters;
  const Packet& at(NodeId v) const { return node_outputs.at(v.index); }
};

// A graph with one atomic function per node. Sources without an assignment
// relay their packet; a destination without one must have in-degree 1 and
// relays its single input.
class ConfiguredNetwork {
 public:
  const graph::NfcGraph& graph() const noexcept { return graph_; }
  const AtomicFunctionSpec& function(NodeId v) const { return functions_.at(v.index); }

  // Evaluates in the graph's topological order. source_packets is indexed
  // by source index (0..N-1).
  NetworkOutputs evaluate(std::span<const Packet> source_packets, const EvaluationOptions& options = {}) const;
  // Same, with a caller-chosen order; throws Error(CycleDetected) if the
  // order is not a topological order of the graph.
  NetworkOutputs evaluate(std::span<const Packet> source_packets, std::span<const NodeId> order,
                          const EvaluationOptions& options = {}) const;

 private:
  friend ConfiguredNetwork install_functions(const graph::NfcGraph& g, const FunctionAssignment& assignment);
  graph::NfcGraph graph_;
  std::vector<AtomicFunctionSpec> functions_;
};

// Throws Error(MissingAssignment) naming the first uncovered atomic node,
// Error(ArityMismatch) when a coefficient/channel vector does not match the
// node's in-degree.
ConfiguredNetwork install_functions(const graph::NfcGraph& g, const FunctionAssignment& assignment);

// Sources append a unit count, atomic nodes sum (partial_sum, count) pairs,
// the destination divides. Throws Error(NotATree) for dag-mode graphs.
FunctionAssignment decompose_average(const graph::NfcGraph& g);

// Assigns `spec` to every atomic node and destination; sources relay.
FunctionAssignment uniform_assignment(const graph::NfcGraph& g, const AtomicFunctionSpec& spec);

}  // namespace condense::afc
