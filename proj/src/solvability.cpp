#include "condense/solvability.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "condense/error.hpp"

namespace condense::solvability {

namespace targets {

TargetFunction xor_sum(std::uint32_t q) {
  return {"xor", q, [](std::span<const std::uint32_t> x) {
            std::uint64_t acc = 0;
            for (std::uint32_t v : x) acc ^= v;
            return acc;
          }};
}

TargetFunction identity(std::uint32_t q, std::size_t n) {
  std::uint64_t size = 1;
  for (std::size_t i = 0; i < n; ++i) size *= q;
  return {"identity", size, [q](std::span<const std::uint32_t> x) {
            std::uint64_t acc = 0;
            for (std::uint32_t v : x) acc = acc * q + v;
            return acc;
          }};
}

TargetFunction arithmetic_sum(std::uint32_t q, std::size_t n) {
  return {"sum", n * (q - 1) + 1, [](std::span<const std::uint32_t> x) {
            std::uint64_t acc = 0;
            for (std::uint32_t v : x) acc += v;
            return acc;
          }};
}

TargetFunction maximum(std::uint32_t q) {
  return {"max", q, [](std::span<const std::uint32_t> x) {
            std::uint64_t acc = 0;
            for (std::uint32_t v : x) acc = std::max<std::uint64_t>(acc, v);
            return acc;
          }};
}

TargetFunction by_name(const std::string& name, std::uint32_t q, std::size_t n) {
  if (name == "xor") return xor_sum(q);
  if (name == "identity") return identity(q, n);
  if (name == "sum") return arithmetic_sum(q, n);
  if (name == "max") return maximum(q);
  throw Error(ErrorCode::InvalidScenario, "unknown target function '" + name + "' (expected xor, identity, sum, max)");
}

}  // namespace targets

std::string_view to_string(Answer answer) noexcept {
  switch (answer) {
    case Answer::Solvable: return "solvable";
    case Answer::NotSolvable: return "not solvable";
    case Answer::UnknownCapped: return "unknown (capped)";
  }
  return "?";
}

namespace {

constexpr std::uint64_t kMaxBlocks = std::uint64_t{1} << 22;

std::uint64_t power(std::uint64_t base, std::size_t exp) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

// Shared indexing for one instance: arcs in topological order of their
// tails, source blocks as base-q^K digits, packets as base-q^L digits.
struct Layout {
  const SolvabilityInstance& in;
  const graph::NfcGraph& g;
  std::size_t n;
  std::uint64_t q, qk, ql;
  double log_tuples;
  std::uint64_t tuples = 0;
  std::vector<graph::Arc> arcs;
  std::vector<std::vector<std::size_t>> in_arcs;
  std::vector<std::size_t> width;
  std::vector<double> log_domain;
  std::vector<std::vector<NodeId>> checks_after;
  std::vector<NodeId> empty_destinations;

  explicit Layout(const SolvabilityInstance& inst)
      : in(inst), g(inst.graph), n(inst.graph.source_count()), q(inst.alphabet) {
    if (q < 2) throw Error(ErrorCode::InvalidScenario, "alphabet must have at least 2 symbols");
    if (in.k == 0 || in.l == 0) throw Error(ErrorCode::InvalidScenario, "K and L must be positive");
    if (in.mode == SearchMode::Linear && (!std::has_single_bit(q) || q > 65536)) {
      throw Error(ErrorCode::InvalidScenario, "linear search needs a field alphabet 2^m, m <= 16");
    }
    const double lq = std::log(static_cast<double>(q));
    log_tuples = lq * static_cast<double>(n * in.k);
    if (log_tuples <= std::log(static_cast<double>(kMaxBlocks))) tuples = power(q, n * in.k);
    qk = in.k < 64 ? power(q, in.k) : 0;
    ql = in.l < 64 ? power(q, in.l) : 0;

    std::vector<std::size_t> pos(g.node_count());
    const auto order = g.topological_order();
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i].index] = i;
    arcs.assign(g.arcs().begin(), g.arcs().end());
    std::sort(arcs.begin(), arcs.end(), [&](const graph::Arc& a, const graph::Arc& b) {
      return std::pair(pos[a.from.index], pos[a.to.index]) < std::pair(pos[b.from.index], pos[b.to.index]);
    });
    in_arcs.resize(g.node_count());
    for (std::uint32_t v = 0; v < g.node_count(); ++v) {
      for (NodeId child : g.in_neighborhood(NodeId{v})) {
        const auto it = std::find(arcs.begin(), arcs.end(), graph::Arc{child, NodeId{v}});
        in_arcs[v].push_back(static_cast<std::size_t>(it - arcs.begin()));
      }
    }
    checks_after.resize(arcs.size());
    for (NodeId d : g.destinations()) {
      if (in_arcs[d.index].empty()) {
        empty_destinations.push_back(d);
      } else {
        checks_after[*std::max_element(in_arcs[d.index].begin(), in_arcs[d.index].end())].push_back(d);
      }
    }
    for (const graph::Arc& a : arcs) {
      const bool source = g.role(a.from) == graph::NodeRole::Source;
      const std::size_t indeg = in_arcs[a.from.index].size();
      width.push_back((source ? in.k : 0) + indeg * in.l);
      log_domain.push_back(lq * static_cast<double>(width.back()));
    }
  }

  bool is_source(NodeId v) const { return g.role(v) == graph::NodeRole::Source; }

  std::uint64_t block(NodeId s, std::uint64_t tuple) const {
    const std::size_t idx = g.source_index(s);
    return (tuple / power(qk, n - 1 - idx)) % qk;
  }

  std::vector<std::uint64_t> targets() const {
    std::vector<std::uint64_t> out(tuples);
    std::vector<std::uint32_t> args(n);
    const auto sources = g.sources();
    for (std::uint64_t t = 0; t < tuples; ++t) {
      std::uint64_t value = 0;
      for (std::size_t k = 0; k < in.k; ++k) {
        for (std::size_t s = 0; s < n; ++s) {
          args[s] = static_cast<std::uint32_t>((block(sources[s], t) / power(q, in.k - 1 - k)) % q);
        }
        value = value * in.target.output_size + in.target.component(args);
      }
      out[t] = value;
    }
    return out;
  }

  std::uint64_t input_index(NodeId u, std::uint64_t tuple, const std::vector<std::vector<std::uint64_t>>& values) const {
    std::uint64_t idx = is_source(u) ? block(u, tuple) : 0;
    for (std::size_t a : in_arcs[u.index]) idx = idx * ql + values[a][tuple];
    return idx;
  }

  std::uint64_t received_index(NodeId d, std::uint64_t tuple, const std::vector<std::vector<std::uint64_t>>& values) const {
    std::uint64_t idx = 0;
    for (std::size_t a : in_arcs[d.index]) idx = idx * ql + values[a][tuple];
    return idx;
  }

  // Digits of the tail's input in base q, first symbol first.
  std::vector<std::uint32_t> input_symbols(std::uint64_t index, std::size_t w) const {
    std::vector<std::uint32_t> syms(w);
    for (std::size_t c = w; c > 0; --c) {
      syms[c - 1] = static_cast<std::uint32_t>(index % q);
      index /= q;
    }
    return syms;
  }
};

class Search {
 public:
  explicit Search(const Layout& layout)
      : lay_(layout), target_(layout.targets()), values_(layout.arcs.size(), std::vector<std::uint64_t>(layout.tuples)) {
    if (lay_.in.mode == SearchMode::Linear) {
      const auto m = static_cast<unsigned>(std::countr_zero(lay_.q));
      field_.emplace(m, ff::GaloisField::default_polynomial(m));
    }
    witness_.arcs.resize(lay_.arcs.size());
  }

  bool run() {
    for (NodeId d : lay_.empty_destinations) {
      if (!decodable(d)) return false;
    }
    return descend(0);
  }

  std::uint64_t explored() const noexcept { return explored_; }
  Witness take_witness() { return std::move(witness_); }

 private:
  bool decodable(NodeId d) {
    seen_.clear();
    for (std::uint64_t t = 0; t < lay_.tuples; ++t) {
      const auto [it, fresh] = seen_.emplace(lay_.received_index(d, t, values_), target_[t]);
      if (!fresh && it->second != target_[t]) return false;
    }
    return true;
  }

  bool checks_pass(std::size_t arc) {
    for (NodeId d : lay_.checks_after[arc]) {
      if (!decodable(d)) return false;
    }
    return true;
  }

  void record(std::size_t arc, const std::vector<std::uint64_t>& inputs) {
    ArcFunction fn;
    fn.arc = lay_.arcs[arc];
    fn.width = lay_.width[arc];
    std::vector<std::pair<std::uint64_t, std::uint64_t>> table;
    for (std::uint64_t t = 0; t < lay_.tuples; ++t) table.emplace_back(inputs[t], values_[arc][t]);
    std::sort(table.begin(), table.end());
    table.erase(std::unique(table.begin(), table.end()), table.end());
    for (const auto& [x, y] : table) {
      fn.domain.push_back(x);
      fn.values.push_back(y);
    }
    fn.coefficients = coefficients_;
    witness_.arcs[arc] = std::move(fn);
  }

  void record_decoders() {
    witness_.decoders.clear();
    for (NodeId d : lay_.g.destinations()) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> table;
      for (std::uint64_t t = 0; t < lay_.tuples; ++t) table.emplace_back(lay_.received_index(d, t, values_), target_[t]);
      std::sort(table.begin(), table.end());
      table.erase(std::unique(table.begin(), table.end()), table.end());
      DecoderTable dec{d, {}, {}};
      for (const auto& [r, f] : table) {
        dec.received.push_back(r);
        dec.values.push_back(f);
      }
      witness_.decoders.push_back(std::move(dec));
    }
  }

  bool descend(std::size_t arc) {
    if (arc == lay_.arcs.size()) {
      record_decoders();
      return true;
    }
    const NodeId tail = lay_.arcs[arc].from;
    std::vector<std::uint64_t> inputs(lay_.tuples);
    for (std::uint64_t t = 0; t < lay_.tuples; ++t) inputs[t] = lay_.input_index(tail, t, values_);
    return lay_.in.mode == SearchMode::General ? descend_general(arc, inputs) : descend_linear(arc, inputs);
  }

  bool descend_general(std::size_t arc, const std::vector<std::uint64_t>& inputs) {
    std::vector<std::uint64_t> domain = inputs;
    std::sort(domain.begin(), domain.end());
    domain.erase(std::unique(domain.begin(), domain.end()), domain.end());
    std::vector<std::size_t> slot(lay_.tuples);
    for (std::uint64_t t = 0; t < lay_.tuples; ++t) {
      slot[t] = static_cast<std::size_t>(std::lower_bound(domain.begin(), domain.end(), inputs[t]) - domain.begin());
    }
    std::vector<std::uint64_t> digits(domain.size(), 0);
    while (true) {
      for (std::uint64_t t = 0; t < lay_.tuples; ++t) values_[arc][t] = digits[slot[t]];
      ++explored_;
      if (checks_pass(arc) && descend(arc + 1)) {
        coefficients_.clear();
        record(arc, inputs);
        return true;
      }
      std::size_t j = digits.size();
      while (j > 0) {
        --j;
        if (++digits[j] < lay_.ql) break;
        digits[j] = 0;
        if (j == 0) return false;
      }
    }
  }

  bool descend_linear(std::size_t arc, const std::vector<std::uint64_t>& inputs) {
    const std::size_t w = lay_.width[arc];
    const std::size_t rows = lay_.in.l;
    std::vector<std::vector<std::uint32_t>> syms(lay_.tuples);
    for (std::uint64_t t = 0; t < lay_.tuples; ++t) syms[t] = lay_.input_symbols(inputs[t], w);
    std::vector<ff::Symbol> coeffs(rows * w, 0);
    while (true) {
      for (std::uint64_t t = 0; t < lay_.tuples; ++t) {
        std::uint64_t out = 0;
        for (std::size_t r = 0; r < rows; ++r) {
          ff::Symbol acc = 0;
          for (std::size_t c = 0; c < w; ++c) {
            acc ^= field_->mul(coeffs[r * w + c], static_cast<ff::Symbol>(syms[t][c]));
          }
          out = out * lay_.q + acc;
        }
        values_[arc][t] = out;
      }
      ++explored_;
      if (checks_pass(arc) && descend(arc + 1)) {
        coefficients_ = coeffs;
        record(arc, inputs);
        return true;
      }
      std::size_t j = coeffs.size();
      if (j == 0) return false;
      while (j > 0) {
        --j;
        if (++coeffs[j] < lay_.q) break;
        coeffs[j] = 0;
        if (j == 0) return false;
      }
    }
  }

  const Layout& lay_;
  std::vector<std::uint64_t> target_;
  std::vector<std::vector<std::uint64_t>> values_;
  std::optional<ff::GaloisField> field_;
  std::vector<ff::Symbol> coefficients_;
  std::unordered_map<std::uint64_t, std::uint64_t> seen_;
  Witness witness_;
  std::uint64_t explored_ = 0;
};

double log_bound(const Layout& lay) {
  const double lq = std::log(static_cast<double>(lay.q));
  double total = 0.0;
  for (std::size_t a = 0; a < lay.arcs.size(); ++a) {
    if (lay.in.mode == SearchMode::Linear) {
      total += lq * static_cast<double>(lay.in.l * lay.width[a]);
    } else {
      const double entries = std::exp(std::min(lay.log_domain[a], lay.log_tuples));
      total += entries * lq * static_cast<double>(lay.in.l);
    }
  }
  return total;
}

template <class Range>
std::string join_table(const Range& keys, const Range& vals) {
  std::ostringstream os;
  for (std::size_t i = 0; i < keys.size(); ++i) os << (i ? ", " : "") << keys[i] << "->" << vals[i];
  return os.str();
}

}  // namespace

double candidate_bound(const SolvabilityInstance& instance) { return std::exp(log_bound(Layout(instance))); }

SolvabilityVerdict brute_force_search(const SolvabilityInstance& instance) {
  const Layout lay(instance);
  SolvabilityVerdict verdict;
  verdict.k = instance.k;
  verdict.l = instance.l;
  const double lb = log_bound(lay);
  verdict.candidate_bound = std::exp(lb);
  if (lay.tuples == 0 || !(lb <= std::log(instance.cap))) {
    verdict.answer = Answer::UnknownCapped;
    return verdict;
  }
  Search search(lay);
  const bool found = search.run();
  verdict.explored = search.explored();
  if (!found) {
    verdict.answer = Answer::NotSolvable;
    return verdict;
  }
  Witness w = search.take_witness();
  if (!verify_witness(instance, w)) throw std::logic_error("search produced a witness that fails verification");
  verdict.answer = Answer::Solvable;
  verdict.witness = std::move(w);
  return verdict;
}

bool verify_witness(const SolvabilityInstance& instance, const Witness& witness) {
  const Layout lay(instance);
  if (lay.tuples == 0 || witness.arcs.size() != lay.arcs.size()) return false;
  const std::vector<std::uint64_t> target = lay.targets();
  std::vector<std::vector<std::uint64_t>> values(lay.arcs.size(), std::vector<std::uint64_t>(lay.tuples, 0));
  auto lookup = [](const std::vector<std::uint64_t>& keys, const std::vector<std::uint64_t>& vals, std::uint64_t x) {
    const auto it = std::lower_bound(keys.begin(), keys.end(), x);
    return it != keys.end() && *it == x ? vals[static_cast<std::size_t>(it - keys.begin())] : std::uint64_t{0};
  };
  for (std::size_t a = 0; a < lay.arcs.size(); ++a) {
    const auto fn = std::find_if(witness.arcs.begin(), witness.arcs.end(),
                                 [&](const ArcFunction& f) { return f.arc == lay.arcs[a]; });
    if (fn == witness.arcs.end()) return false;
    for (std::uint64_t t = 0; t < lay.tuples; ++t) {
      values[a][t] = lookup(fn->domain, fn->values, lay.input_index(lay.arcs[a].from, t, values));
    }
  }
  for (NodeId d : lay.g.destinations()) {
    const auto dec = std::find_if(witness.decoders.begin(), witness.decoders.end(),
                                  [&](const DecoderTable& x) { return x.destination == d; });
    if (dec == witness.decoders.end()) return false;
    for (std::uint64_t t = 0; t < lay.tuples; ++t) {
      if (lookup(dec->received, dec->values, lay.received_index(d, t, values)) != target[t]) return false;
    }
  }
  return true;
}

std::string IdentityVerdict::describe() const {
  std::ostringstream os;
  if (solvable) {
    os << "solvable (cut " << cut << " >= N=" << sources << ")";
  } else {
    os << "not solvable (cut " << cut << " < N=" << sources << ")";
  }
  return os.str();
}

IdentityVerdict linear_identity_check(const graph::NfcGraph& g, NodeId dest) {
  // Each source offers one symbol per generation; with unbounded source arcs
  // one well-connected source could hide another that is cut off.
  const std::size_t cut = graph::min_cut(g, dest, 1);
  return {cut >= g.source_count(), cut, g.source_count()};
}

bool CapacityReport::any_capped() const noexcept {
  return std::any_of(points.begin(), points.end(), [](const SweepPoint& p) { return p.answer == Answer::UnknownCapped; });
}

CapacityReport capacity_lower_bound(const SolvabilityInstance& base,
                                    std::span<const std::pair<std::size_t, std::size_t>> sweep) {
  CapacityReport report;
  for (const auto& [k, l] : sweep) {
    SolvabilityInstance inst = base;
    inst.k = k;
    inst.l = l;
    const SolvabilityVerdict v = brute_force_search(inst);
    const SweepPoint point{k, l, v.answer, v.candidate_bound};
    report.points.push_back(point);
    if (v.answer == Answer::Solvable && (!report.best || k * report.best->l > report.best->k * l)) report.best = point;
  }
  return report;
}

std::vector<std::pair<std::size_t, std::size_t>> grid(std::size_t max_k, std::size_t max_l) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 1; k <= max_k; ++k) {
    for (std::size_t l = 1; l <= max_l; ++l) out.emplace_back(k, l);
  }
  return out;
}

std::string format_verdict(const SolvabilityInstance& instance, const SolvabilityVerdict& verdict) {
  const graph::NfcGraph& g = instance.graph;
  std::ostringstream os;
  os << "target " << instance.target.name << ", q=" << instance.alphabet << ", K=" << verdict.k << ", L=" << verdict.l
     << (instance.mode == SearchMode::Linear ? ", linear" : ", general") << ": " << to_string(verdict.answer);
  if (verdict.answer == Answer::UnknownCapped) {
    os << " (bound " << verdict.candidate_bound << " > cap " << instance.cap << ")";
  }
  if (verdict.witness) os << ", witness attached";
  os << '\n';
  if (!verdict.witness) return os.str();
  os << "  ratio K/L = " << verdict.k << "/" << verdict.l << '\n';
  for (const ArcFunction& fn : verdict.witness->arcs) {
    os << "  g[" << g.name(fn.arc.from) << "->" << g.name(fn.arc.to) << "]: " << join_table(fn.domain, fn.values);
    if (!fn.coefficients.empty()) {
      os << "  coefficients";
      for (ff::Symbol c : fn.coefficients) os << ' ' << c;
    }
    os << '\n';
  }
  for (const DecoderTable& dec : verdict.witness->decoders) {
    os << "  psi[" << g.name(dec.destination) << "]: " << join_table(dec.received, dec.values) << '\n';
  }
  return os.str();
}

}  // namespace condense::solvability
