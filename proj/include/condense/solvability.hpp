#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "condense/finite_field.hpp"
#include "condense/nfc_graph.hpp"

namespace condense::solvability {

using graph::NodeId;

// Component map f: A^N -> B, applied to each of the K source symbols.
// Symbols of A are integers in [0, q); values of B in [0, output_size).
struct TargetFunction {
  std::string name;
  std::uint64_t output_size = 0;
  std::function<std::uint64_t(std::span<const std::uint32_t>)> component;
};

namespace targets {
// Symbol-wise field addition over GF(2^m), i.e. bitwise xor. B = A.
TargetFunction xor_sum(std::uint32_t q);
// The whole tuple, B = A^N.
TargetFunction identity(std::uint32_t q, std::size_t n);
// Integer sum of the symbols, B = {0..N(q-1)}.
TargetFunction arithmetic_sum(std::uint32_t q, std::size_t n);
TargetFunction maximum(std::uint32_t q);
// Looks up one of the above by name: xor, identity, sum, max.
// Throws Error(InvalidScenario) for other names.
TargetFunction by_name(const std::string& name, std::uint32_t q, std::size_t n);
}  // namespace targets

enum class SearchMode { General, Linear };

struct SolvabilityInstance {
  graph::NfcGraph graph;
  std::uint32_t alphabet = 2;  // q = |A|; a power of two in linear mode
  std::size_t k = 1;           // source symbols per generation block
  std::size_t l = 1;           // symbols per packet
  TargetFunction target;
  SearchMode mode = SearchMode::General;
  double cap = 1e7;            // maximum candidate assignments
};

enum class Answer { Solvable, NotSolvable, UnknownCapped };
std::string_view to_string(Answer answer) noexcept;

// Truth table of one arc, restricted to the inputs that occur. Inputs are
// the tail's own block (sources only) followed by its incoming packets, read
// as one base-q number with the first symbol most significant; every input
// missing from `domain` maps to 0.
struct ArcFunction {
  graph::Arc arc;
  std::vector<std::uint64_t> domain;
  std::vector<std::uint64_t> values;
  std::vector<ff::Symbol> coefficients;  // linear mode: L x width, row-major
  std::size_t width = 0;                 // input symbols, linear mode
};

// Psi at one destination: received tuple -> f-block; unlisted tuples map to 0.
struct DecoderTable {
  NodeId destination;
  std::vector<std::uint64_t> received;
  std::vector<std::uint64_t> values;
};

struct Witness {
  std::vector<ArcFunction> arcs;
  std::vector<DecoderTable> decoders;
};

struct SolvabilityVerdict {
  Answer answer = Answer::UnknownCapped;
  std::optional<Witness> witness;
  std::size_t k = 0;
  std::size_t l = 0;
  double candidate_bound = 0.0;  // upper bound on the candidates enumerated
  std::uint64_t explored = 0;
};

// Upper bound on candidate assignments: prod over arcs of (q^L)^min(|dom|, q^(NK))
// in general mode, q^(L * width) in linear mode.
double candidate_bound(const SolvabilityInstance& instance);

// Enumerates per-arc truth tables (or linear coefficient matrices) in
// lexicographic order, first arc most significant, and returns the first
// assignment under which every destination can decode f. Returns
// UnknownCapped without searching when the bound exceeds instance.cap.
// Throws Error(InvalidScenario) for q < 2 or a non power of two in linear
// mode.
SolvabilityVerdict brute_force_search(const SolvabilityInstance& instance);

// Recomputes every arc and decoder output on all q^(NK) source blocks.
bool verify_witness(const SolvabilityInstance& instance, const Witness& witness);

struct IdentityVerdict {
  bool solvable = false;
  std::size_t cut = 0;
  std::size_t sources = 0;
  std::string describe() const;
};

// Linear delivery of all N sources at K = L = 1 is possible iff the max-flow
// with one unit per source reaches N, i.e. every subset of sources has a cut
// of at least its size to dest.
IdentityVerdict linear_identity_check(const graph::NfcGraph& g, NodeId dest);

struct SweepPoint {
  std::size_t k = 0;
  std::size_t l = 0;
  Answer answer = Answer::UnknownCapped;
  double candidate_bound = 0.0;
};

struct CapacityReport {
  std::vector<SweepPoint> points;
  std::optional<SweepPoint> best;  // largest solvable K/L, earliest on ties
  bool any_capped() const noexcept;
};

// Runs brute_force_search at every (K, L) and keeps the best achieved
// ratio. This is a lower bound on the computing capacity only.
CapacityReport capacity_lower_bound(const SolvabilityInstance& base,
                                    std::span<const std::pair<std::size_t, std::size_t>> sweep);

// All (K, L) with 1 <= K <= max_k, 1 <= L <= max_l.
std::vector<std::pair<std::size_t, std::size_t>> grid(std::size_t max_k, std::size_t max_l);

std::string format_verdict(const SolvabilityInstance& instance, const SolvabilityVerdict& verdict);

}  // namespace condense::solvability
