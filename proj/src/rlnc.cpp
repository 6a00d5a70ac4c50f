#include "condense/rlnc.hpp"

#include <fmt/format.h>

#include <stdexcept>

#include "condense/error.hpp"

namespace condense::rlnc {

CodedPacket source_encode(std::size_t source_count, std::size_t source_index, std::vector<Symbol> payload) {
  if (source_index >= source_count) {
    throw Error(ErrorCode::InconsistentDimensions, "source index outside the coding vector");
  }
  CodedPacket packet{std::move(payload), std::vector<Symbol>(source_count, 0)};
  packet.coding_vector[source_index] = 1;
  return packet;
}

CodedPacket recode(const GaloisField& field, std::span<const CodedPacket> children, std::span<const Symbol> local) {
  if (children.empty()) throw Error(ErrorCode::InconsistentDimensions, "recoding needs at least one child packet");
  if (local.size() != children.size()) {
    throw Error(ErrorCode::InconsistentDimensions, "one local coefficient per child required");
  }
  const std::size_t length = children.front().payload.size();
  const std::size_t n = children.front().coding_vector.size();
  CodedPacket out{std::vector<Symbol>(length, 0), std::vector<Symbol>(n, 0)};
  for (std::size_t b = 0; b < children.size(); ++b) {
    const CodedPacket& child = children[b];
    if (child.payload.size() != length || child.coding_vector.size() != n) {
      throw Error(ErrorCode::InconsistentDimensions, "child packets disagree on L or N");
    }
    field.axpy(local[b], child.payload, out.payload);
    field.axpy(local[b], child.coding_vector, out.coding_vector);
  }
  return out;
}

CodedPacket atomic_recode(const GaloisField& field, std::span<const CodedPacket> children, RngStream& rng) {
  std::vector<Symbol> local(children.size());
  for (Symbol& e : local) e = field.random(rng);
  return recode(field, children, local);
}

DecoderState::DecoderState(GaloisField field, std::size_t source_count, std::size_t packet_length)
    : field_(std::move(field)), source_count_(source_count), packet_length_(packet_length) {}

void DecoderState::add(const CodedPacket& packet) {
  if (packet.coding_vector.size() != source_count_ || packet.payload.size() != packet_length_) {
    throw Error(ErrorCode::InconsistentDimensions, "coded packet does not match decoder dimensions");
  }
  pairs_.push_back(packet);
  if (rank_ == source_count_) return;

  std::vector<Symbol> v = packet.coding_vector;
  for (std::size_t i = 0; i < basis_.size(); ++i) {
    const Symbol factor = v[pivot_[i]];
    if (factor != 0) field_.axpy(factor, basis_[i], v);
  }
  std::size_t pivot = 0;
  while (pivot < v.size() && v[pivot] == 0) ++pivot;
  if (pivot == v.size()) return;
  const Symbol scale = field_.inv(v[pivot]);
  for (Symbol& s : v) s = field_.mul(s, scale);
  // Keep the basis fully reduced so each pivot column is zero elsewhere.
  for (auto& row : basis_) {
    const Symbol factor = row[pivot];
    if (factor != 0) field_.axpy(factor, v, row);
  }
  basis_.push_back(std::move(v));
  pivot_.push_back(pivot);
  ++rank_;
}

DecodeOutcome destination_decode(const DecoderState& state) {
  if (!state.full_rank()) return Insufficient{state.rank()};
  const std::size_t rows = state.collected();
  const std::size_t n = state.source_count();
  const std::size_t length = rows == 0 ? 0 : state.pairs().front().payload.size();
  ff::FieldMatrix a(rows, n);
  ff::FieldMatrix b(rows, length);
  for (std::size_t k = 0; k < rows; ++k) {
    const CodedPacket& p = state.pairs()[k];
    std::copy(p.coding_vector.begin(), p.coding_vector.end(), a.row(k).begin());
    std::copy(p.payload.begin(), p.payload.end(), b.row(k).begin());
  }
  ff::SolveResult solved = ff::gaussian_solve(state.field(), a, b);
  if (solved.status != ff::SolveStatus::Solved) return Insufficient{solved.rank};
  Recovered out;
  for (std::size_t s = 0; s < n; ++s) {
    const auto row = solved.solution->row(s);
    out.packets.emplace_back(row.begin(), row.end());
  }
  return out;
}

PassTrace run_pass(const graph::NfcGraph& g, const GaloisField& field,
                   std::span<const std::vector<Symbol>> source_payloads, std::uint64_t seed,
                   std::uint64_t generation) {
  if (g.mode() != graph::GraphMode::Tree) throw Error(ErrorCode::NotATree, "RLNC recovery runs over a tree");
  const std::size_t n = g.source_count();
  if (source_payloads.size() != n) throw Error(ErrorCode::InconsistentDimensions, "one payload per source required");

  PassTrace trace;
  trace.node_packets.resize(g.node_count());
  std::vector<CodedPacket> inputs;
  for (graph::NodeId v : g.topological_order()) {
    switch (g.role(v)) {
      case graph::NodeRole::Source: {
        const std::size_t s = g.source_index(v);
        trace.node_packets[v.index] = source_encode(n, s, source_payloads[s]);
        break;
      }
      case graph::NodeRole::Atomic: {
        inputs.clear();
        for (graph::NodeId child : g.in_neighborhood(v)) inputs.push_back(trace.node_packets[child.index]);
        RngStream rng = RngStream::derive(seed, v.index, generation, Purpose::LocalCoefficients);
        trace.node_packets[v.index] = atomic_recode(field, inputs, rng);
        break;
      }
      case graph::NodeRole::Destination:
        for (graph::NodeId child : g.in_neighborhood(v)) trace.delivered.push_back(trace.node_packets[child.index]);
        break;
    }
  }
  return trace;
}

std::vector<std::vector<Symbol>> draw_sources(const graph::NfcGraph& g, const GaloisField& field,
                                              std::size_t packet_length, std::uint64_t seed, std::uint64_t trial) {
  std::vector<std::vector<Symbol>> payloads;
  payloads.reserve(g.source_count());
  for (graph::NodeId s : g.sources()) {
    RngStream rng = RngStream::derive(seed, s.index, trial, Purpose::SourceData);
    std::vector<Symbol> x(packet_length);
    for (Symbol& v : x) v = field.random(rng);
    payloads.push_back(std::move(x));
  }
  return payloads;
}

SuccessStats run_recovery_experiment(const graph::NfcGraph& g, const GaloisField& field, std::size_t n_prime,
                                     std::uint64_t trials, std::uint64_t seed, std::size_t packet_length) {
  if (g.mode() != graph::GraphMode::Tree) throw Error(ErrorCode::NotATree, "RLNC recovery runs over a tree");
  SuccessStats stats{field.order(), g.source_count(), n_prime, trials, 0, seed};
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    const auto sources = draw_sources(g, field, packet_length, seed, trial);
    DecoderState decoder(field, g.source_count(), packet_length);
    for (std::size_t pass = 0; pass < n_prime; ++pass) {
      const PassTrace trace = run_pass(g, field, sources, seed, (trial << 32) | pass);
      for (const CodedPacket& p : trace.delivered) decoder.add(p);
    }
    if (!decoder.full_rank()) continue;
    const DecodeOutcome outcome = destination_decode(decoder);
    const auto* recovered = std::get_if<Recovered>(&outcome);
    if (recovered == nullptr || recovered->packets != sources) {
      throw std::logic_error("full-rank decode did not reproduce the source packets");
    }
    ++stats.successes;
  }
  return stats;
}

std::string csv_header() { return "field_order,N,N_prime,trials,successes,probability,seed"; }

std::string csv_row(const SuccessStats& stats) {
  return fmt::format("{},{},{},{},{},{},{}", stats.field_order, stats.sources, stats.n_prime, stats.trials,
                     stats.successes, stats.probability(), stats.seed);
}

}  // namespace condense::rlnc
