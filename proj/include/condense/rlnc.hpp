#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "condense/finite_field.hpp"
#include "condense/nfc_graph.hpp"
#include "condense/rng.hpp"

namespace condense::rlnc {

using ff::GaloisField;
using ff::Symbol;

// Payload x^(a) in F^L together with its global coding vector c^(a) in F^N,
// so that payload == sum_s c[s] * x_s.
struct CodedPacket {
  std::vector<Symbol> payload;
  std::vector<Symbol> coding_vector;

  // Symbols on the wire: payload plus the in-band coding-vector header.
  std::size_t wire_symbols() const noexcept { return payload.size() + coding_vector.size(); }
  friend bool operator==(const CodedPacket&, const CodedPacket&) = default;
};

// Leaf rule: coding vector is the unit vector at source_index.
CodedPacket source_encode(std::size_t source_count, std::size_t source_index, std::vector<Symbol> payload);

// Combines children with the given local coefficients e[b]:
//   payload = sum_b e[b] x^(b),  c[s] = sum_b e[b] c^(b)[s].
// Throws Error(InconsistentDimensions) on ragged inputs or a coefficient
// count that differs from the number of children.
CodedPacket recode(const GaloisField& field, std::span<const CodedPacket> children, std::span<const Symbol> local);

// Draws e[b] uniformly from the whole field (zero included), independently
// of the payloads, then recodes.
CodedPacket atomic_recode(const GaloisField& field, std::span<const CodedPacket> children, RngStream& rng);

// Collected (payload, coding vector) pairs at a destination with
// incrementally tracked rank of the coding vectors.
class DecoderState {
 public:
  DecoderState(GaloisField field, std::size_t source_count, std::size_t packet_length);

  // Throws Error(InconsistentDimensions) on a wrong-sized packet.
  void add(const CodedPacket& packet);

  std::size_t rank() const noexcept { return rank_; }
  std::size_t collected() const noexcept { return pairs_.size(); }
  std::size_t source_count() const noexcept { return source_count_; }
  bool full_rank() const noexcept { return rank_ == source_count_; }
  const GaloisField& field() const noexcept { return field_; }
  std::span<const CodedPacket> pairs() const noexcept { return pairs_; }

 private:
  GaloisField field_;
  std::size_t source_count_;
  std::size_t packet_length_;
  std::vector<CodedPacket> pairs_;
  // Reduced coding vectors; pivot_[i] is the pivot column of basis_[i].
  std::vector<std::vector<Symbol>> basis_;
  std::vector<std::size_t> pivot_;
  std::size_t rank_ = 0;
};

struct Recovered {
  std::vector<std::vector<Symbol>> packets;  // indexed by source index
};
struct Insufficient {
  std::size_t rank = 0;
};
using DecodeOutcome = std::variant<Recovered, Insufficient>;

// Solves sum_s c^(d),k[s] x_s = x^(d),k for all x_s by Gaussian elimination.
DecodeOutcome destination_decode(const DecoderState& state);

// Every node's outgoing packet for one pass over a tree. Sources encode,
// atomic nodes recode with fresh coefficients drawn from the substream
// (seed, node, generation, LocalCoefficients); the destination does not
// recode and instead receives every child packet.
struct PassTrace {
  std::vector<CodedPacket> node_packets;  // indexed by NodeId; destination entries stay empty
  std::vector<CodedPacket> delivered;     // packets arriving at the destination, in child order
};

PassTrace run_pass(const graph::NfcGraph& g, const GaloisField& field,
                   std::span<const std::vector<Symbol>> source_payloads, std::uint64_t seed, std::uint64_t generation);

// Source payloads for one trial, drawn from (seed, source, trial, SourceData).
std::vector<std::vector<Symbol>> draw_sources(const graph::NfcGraph& g, const GaloisField& field,
                                              std::size_t packet_length, std::uint64_t seed, std::uint64_t trial);

struct SuccessStats {
  std::uint32_t field_order = 0;
  std::size_t sources = 0;
  std::size_t n_prime = 0;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  std::uint64_t seed = 0;

  double probability() const noexcept {
    return trials == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(trials);
  }
};

// Repeats `trials` independent recoveries; each runs n_prime sequential
// passes over the same source packets (generation = trial << 32 | pass, so a
// larger n_prime extends the same draws) and succeeds when the destination reaches rank N. Successful decodes are
// checked bit-for-bit against the sources. Throws Error(NotATree) unless g
// is a tree.
SuccessStats run_recovery_experiment(const graph::NfcGraph& g, const GaloisField& field, std::size_t n_prime,
                                     std::uint64_t trials, std::uint64_t seed, std::size_t packet_length = 1);

// Columns: field_order,N,N_prime,trials,successes,probability,seed
std::string csv_header();
std::string csv_row(const SuccessStats& stats);

}  // namespace condense::rlnc
