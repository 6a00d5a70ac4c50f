#include "condense/afc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "condense/error.hpp"

namespace condense::afc {

std::string_view to_string(Domain domain) noexcept { return domain == Domain::Field ? "field" : "real"; }

std::size_t Packet::size() const noexcept {
  return std::visit([](const auto& v) { return v.size(); }, data_);
}

std::span<const Symbol> Packet::symbols() const {
  if (const auto* s = std::get_if<std::vector<Symbol>>(&data_)) return *s;
  throw Error(ErrorCode::DomainMismatch, "expected a field packet, got a real one");
}

std::span<const double> Packet::reals() const {
  if (const auto* r = std::get_if<std::vector<double>>(&data_)) return *r;
  throw Error(ErrorCode::DomainMismatch, "expected a real packet, got a field one");
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Common shape checks; returns the shared packet length.
std::size_t common_length(std::span<const Packet> inputs) {
  if (inputs.empty()) throw Error(ErrorCode::ArityMismatch, "atomic function applied to zero inputs");
  const Domain domain = inputs.front().domain();
  const std::size_t length = inputs.front().size();
  for (const Packet& p : inputs) {
    if (p.domain() != domain) throw Error(ErrorCode::DomainMismatch, "inputs mix field and real packets");
    if (p.size() != length) throw Error(ErrorCode::DimensionMismatch, "inputs have different packet lengths");
  }
  return length;
}

void require_domain(std::span<const Packet> inputs, Domain domain, std::string_view what) {
  if (inputs.front().domain() != domain) {
    throw Error(ErrorCode::DomainMismatch,
                std::string(what) + " needs " + std::string(to_string(domain)) + " packets");
  }
}

// Symbol-wise view as doubles regardless of domain.
double value_at(const Packet& p, std::size_t i) {
  return p.domain() == Domain::Real ? p.reals()[i] : static_cast<double>(p.symbols()[i]);
}

template <class Combine>
Packet fold(std::span<const Packet> inputs, Combine combine, bool keep_field) {
  const std::size_t length = common_length(inputs);
  if (keep_field && inputs.front().domain() == Domain::Field) {
    std::vector<Symbol> out(inputs.front().symbols().begin(), inputs.front().symbols().end());
    for (std::size_t b = 1; b < inputs.size(); ++b) {
      const auto sym = inputs[b].symbols();
      for (std::size_t i = 0; i < length; ++i) {
        out[i] = static_cast<Symbol>(combine(static_cast<double>(out[i]), static_cast<double>(sym[i])));
      }
    }
    return Packet::field(std::move(out));
  }
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = value_at(inputs.front(), i);
  for (std::size_t b = 1; b < inputs.size(); ++b) {
    for (std::size_t i = 0; i < length; ++i) out[i] = combine(out[i], value_at(inputs[b], i));
  }
  return Packet::real(std::move(out));
}

double checked(double v, std::string_view where) {
  if (!std::isfinite(v)) throw Error(ErrorCode::DomainError, std::string(where) + " produced a non-finite value");
  return v;
}

Packet nomographic(const kind::Nomographic& spec, std::span<const Packet> inputs, double noise_sigma,
                   RngStream* rng) {
  const std::size_t length = common_length(inputs);
  require_domain(inputs, Domain::Real, "nomographic function");
  if (spec.pre.size() != inputs.size() || spec.channel.size() != inputs.size()) {
    throw Error(ErrorCode::ArityMismatch, "nomographic '" + spec.name + "' expects " +
                                              std::to_string(spec.channel.size()) + " inputs, got " +
                                              std::to_string(inputs.size()));
  }
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  std::vector<double> out(length);
  for (std::size_t l = 0; l < length; ++l) {
    double received = 0.0;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      received += spec.channel[s] * checked(spec.pre[s].apply(inputs[s].reals()[l]), spec.pre[s].name);
    }
    if (noise_sigma > 0.0 && rng != nullptr) received += noise(*rng);
    out[l] = checked(spec.post.apply(received), spec.post.name);
  }
  return Packet::real(std::move(out));
}

}  // namespace

std::string describe(const AtomicFunctionSpec& spec) {
  return std::visit(Overloaded{
                        [](const kind::LinearCombination& k) {
                          return "linear_combination[GF(2^" + std::to_string(k.field.degree()) + ")," +
                                 std::to_string(k.coefficients.size()) + "]";
                        },
                        [](const kind::Sum&) { return std::string("sum"); },
                        [](const kind::Max&) { return std::string("max"); },
                        [](const kind::Min&) { return std::string("min"); },
                        [](const kind::Average&) { return std::string("average"); },
                        [](const kind::Histogram& k) { return "histogram[" + std::to_string(k.bins) + "]"; },
                        [](const kind::Identity&) { return std::string("identity"); },
                        [](const kind::Nomographic& k) { return "nomographic[" + k.name + "]"; },
                        [](const kind::NeuronUnit& k) { return "neuron[" + std::to_string(k.weights.size()) + "]"; },
                        [](const kind::AppendCount&) { return std::string("append_count"); },
                        [](const kind::CountedMean&) { return std::string("counted_mean"); },
                    },
                    spec);
}

Packet eval_dafc(const AtomicFunctionSpec& spec, std::span<const Packet> inputs, EvalCounters* counters) {
  return std::visit(
      Overloaded{
          [&](const kind::LinearCombination& k) {
            const std::size_t length = common_length(inputs);
            require_domain(inputs, Domain::Field, "linear combination");
            if (k.coefficients.size() != inputs.size()) {
              throw Error(ErrorCode::ArityMismatch, "linear combination has " +
                                                        std::to_string(k.coefficients.size()) +
                                                        " coefficients for " + std::to_string(inputs.size()) +
                                                        " inputs");
            }
            std::vector<Symbol> out(length, 0);
            for (std::size_t b = 0; b < inputs.size(); ++b) {
              const auto sym = inputs[b].symbols();
              for (Symbol v : sym) {
                if (!k.field.contains(v)) throw Error(ErrorCode::DomainMismatch, "symbol outside the field");
              }
              k.field.axpy(k.coefficients[b], sym, out);
            }
            return Packet::field(std::move(out));
          },
          [&](const kind::Sum&) { return fold(inputs, [](double a, double b) { return a + b; }, false); },
          [&](const kind::Max&) { return fold(inputs, [](double a, double b) { return std::max(a, b); }, true); },
          [&](const kind::Min&) { return fold(inputs, [](double a, double b) { return std::min(a, b); }, true); },
          [&](const kind::Average&) {
            Packet total = fold(inputs, [](double a, double b) { return a + b; }, false);
            std::vector<double> out(total.reals().begin(), total.reals().end());
            for (double& v : out) v /= static_cast<double>(inputs.size());
            return Packet::real(std::move(out));
          },
          [&](const kind::Histogram& k) {
            if (k.bins == 0) throw Error(ErrorCode::ArityMismatch, "histogram needs at least one bin");
            const std::size_t length = common_length(inputs);
            std::vector<double> counts(k.bins, 0.0);
            for (const Packet& p : inputs) {
              for (std::size_t i = 0; i < length; ++i) {
                const double v = std::floor(value_at(p, i));
                std::size_t bin = 0;
                if (v < 0.0) {
                  if (counters) ++counters->clamped;
                } else if (v >= static_cast<double>(k.bins)) {
                  bin = k.bins - 1;
                  if (counters) ++counters->clamped;
                } else {
                  bin = static_cast<std::size_t>(v);
                }
                counts[bin] += 1.0;
              }
            }
            return Packet::real(std::move(counts));
          },
          [&](const kind::Identity&) {
            if (inputs.empty()) throw Error(ErrorCode::ArityMismatch, "identity applied to zero inputs");
            const Domain domain = inputs.front().domain();
            for (const Packet& p : inputs) {
              if (p.domain() != domain) throw Error(ErrorCode::DomainMismatch, "inputs mix field and real packets");
            }
            if (inputs.size() == 1) return inputs.front();
            if (domain == Domain::Field) {
              std::vector<Symbol> out;
              for (const Packet& p : inputs) out.insert(out.end(), p.symbols().begin(), p.symbols().end());
              return Packet::field(std::move(out));
            }
            std::vector<double> out;
            for (const Packet& p : inputs) out.insert(out.end(), p.reals().begin(), p.reals().end());
            return Packet::real(std::move(out));
          },
          [&](const kind::Nomographic& k) { return nomographic(k, inputs, 0.0, nullptr); },
          [&](const kind::NeuronUnit& k) {
            if (inputs.empty()) throw Error(ErrorCode::ArityMismatch, "neuron applied to zero inputs");
            double z = 0.0;
            std::size_t w = 0;
            for (const Packet& p : inputs) {
              for (double x : p.reals()) {
                if (w == k.weights.size()) throw Error(ErrorCode::ArityMismatch, "more inputs than neuron weights");
                z += k.weights[w++] * x;
              }
            }
            if (w != k.weights.size()) throw Error(ErrorCode::ArityMismatch, "fewer inputs than neuron weights");
            return Packet::real({logistic(z)});
          },
          [&](const kind::AppendCount&) {
            if (inputs.size() != 1) throw Error(ErrorCode::ArityMismatch, "append_count takes one input");
            std::vector<double> out(inputs.front().reals().begin(), inputs.front().reals().end());
            out.push_back(1.0);
            return Packet::real(std::move(out));
          },
          [&](const kind::CountedMean&) {
            const std::size_t length = common_length(inputs);
            require_domain(inputs, Domain::Real, "counted mean");
            if (length < 2) throw Error(ErrorCode::DimensionMismatch, "counted mean needs (sum..., count) packets");
            std::vector<double> total(length, 0.0);
            for (const Packet& p : inputs) {
              for (std::size_t i = 0; i < length; ++i) total[i] += p.reals()[i];
            }
            const double count = total.back();
            total.pop_back();
            for (double& v : total) v /= count;
            return Packet::real(std::move(total));
          },
      },
      spec);
}

Packet eval_aafc(const kind::Nomographic& spec, std::span<const Packet> inputs, double noise_sigma,
                 RngStream& rng) {
  if (noise_sigma < 0.0) throw Error(ErrorCode::DomainError, "noise sigma must be non-negative");
  return nomographic(spec, inputs, noise_sigma, &rng);
}

namespace presets {

namespace {

void require_nonzero(const std::vector<double>& channel) {
  for (double h : channel) {
    if (h == 0.0 || !std::isfinite(h)) throw Error(ErrorCode::DomainError, "channel coefficients must be nonzero");
  }
}

kind::Nomographic build(std::string name, std::vector<double> channel, std::string pre_name,
                        double (*pre)(double), ScalarFunction post) {
  require_nonzero(channel);
  kind::Nomographic spec{std::move(name), {}, std::move(channel), std::move(post)};
  for (double h : spec.channel) {
    spec.pre.push_back({pre_name + "/h", [pre, h](double x) { return pre(x) / h; }});
  }
  return spec;
}

}  // namespace

kind::Nomographic arithmetic_mean(std::vector<double> channel) {
  const double n = static_cast<double>(channel.size());
  return build("arithmetic_mean", std::move(channel), "x", [](double x) { return x; },
               {"r/N", [n](double r) { return r / n; }});
}

kind::Nomographic euclidean_norm(std::vector<double> channel) {
  return build("euclidean_norm", std::move(channel), "x^2", [](double x) { return x * x; },
               {"sqrt", [](double r) { return std::sqrt(r); }});
}

kind::Nomographic geometric_mean(std::vector<double> channel) {
  const double n = static_cast<double>(channel.size());
  return build("geometric_mean", std::move(channel), "ln", [](double x) { return std::log(x); },
               {"exp(r/N)", [n](double r) { return std::exp(r / n); }});
}

kind::Nomographic superposition(std::vector<double> channel) {
  return build("superposition", std::move(channel), "x", [](double x) { return x; },
               {"identity", [](double r) { return r; }});
}

}  // namespace presets

ConfiguredNetwork install_functions(const graph::NfcGraph& g, const FunctionAssignment& assignment) {
  const graph::ValidationReport report = graph::validate_graph(g);
  if (!report.ok()) {
    throw Error(graph::to_error_code(report.issues.front().kind), report.issues.front().message);
  }
  ConfiguredNetwork net;
  net.graph_ = g;
  net.functions_.reserve(g.node_count());
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    const NodeId id{static_cast<std::uint32_t>(v)};
    const std::size_t indeg = g.in_neighborhood(id).size();
    const std::size_t arity = g.role(id) == graph::NodeRole::Source ? 1 : indeg;
    auto it = assignment.find(id);
    if (it == assignment.end()) {
      if (g.role(id) == graph::NodeRole::Atomic || (g.role(id) == graph::NodeRole::Destination && indeg != 1)) {
        throw Error(ErrorCode::MissingAssignment, "no atomic function assigned to node '" + g.name(id) + "'");
      }
      net.functions_.emplace_back(kind::Identity{});
      continue;
    }
    const AtomicFunctionSpec& spec = it->second;
    std::optional<std::size_t> declared;
    if (const auto* lc = std::get_if<kind::LinearCombination>(&spec)) declared = lc->coefficients.size();
    if (const auto* nm = std::get_if<kind::Nomographic>(&spec)) {
      if (nm->pre.size() != nm->channel.size()) {
        throw Error(ErrorCode::ArityMismatch, "nomographic pre/channel sizes differ");
      }
      declared = nm->channel.size();
    }
    if (declared && *declared != arity) {
      throw Error(ErrorCode::ArityMismatch, "node '" + g.name(id) + "' has in-degree " + std::to_string(arity) +
                                                " but " + describe(spec) + " expects " + std::to_string(*declared));
    }
    net.functions_.push_back(spec);
  }
  for (const auto& [id, spec] : assignment) {
    if (id.index >= g.node_count()) {
      throw Error(ErrorCode::DanglingReference, "assignment for undeclared node " + std::to_string(id.index));
    }
  }
  return net;
}

NetworkOutputs ConfiguredNetwork::evaluate(std::span<const Packet> source_packets,
                                           const EvaluationOptions& options) const {
  return evaluate(source_packets, graph_.topological_order(), options);
}

NetworkOutputs ConfiguredNetwork::evaluate(std::span<const Packet> source_packets, std::span<const NodeId> order,
                                           const EvaluationOptions& options) const {
  if (source_packets.size() != graph_.source_count()) {
    throw Error(ErrorCode::ArityMismatch, "expected " + std::to_string(graph_.source_count()) +
                                              " source packets, got " + std::to_string(source_packets.size()));
  }
  if (order.size() != graph_.node_count()) throw Error(ErrorCode::CycleDetected, "order does not cover the graph");

  NetworkOutputs out;
  out.node_outputs.resize(graph_.node_count());
  std::vector<bool> done(graph_.node_count(), false);
  std::vector<Packet> inputs;
  for (NodeId v : order) {
    inputs.clear();
    if (graph_.role(v) == graph::NodeRole::Source) {
      inputs.push_back(source_packets[graph_.source_index(v)]);
    }
    for (NodeId child : graph_.in_neighborhood(v)) {
      if (!done[child.index]) {
        throw Error(ErrorCode::CycleDetected, "node '" + graph_.name(v) + "' evaluated before its child '" +
                                                  graph_.name(child) + "'");
      }
      inputs.push_back(out.node_outputs[child.index]);
    }
    const AtomicFunctionSpec& spec = functions_[v.index];
    if (const auto* nm = std::get_if<kind::Nomographic>(&spec); nm && options.noise_sigma > 0.0) {
      RngStream rng = RngStream::derive(options.seed, v.index, options.generation, Purpose::ChannelNoise);
      out.node_outputs[v.index] = eval_aafc(*nm, inputs, options.noise_sigma, rng);
    } else {
      out.node_outputs[v.index] = eval_dafc(spec, inputs, &out.counters);
    }
    done[v.index] = true;
  }
  return out;
}

FunctionAssignment decompose_average(const graph::NfcGraph& g) {
  if (g.mode() != graph::GraphMode::Tree) throw Error(ErrorCode::NotATree, "average decomposition needs a tree");
  FunctionAssignment assignment;
  for (NodeId s : g.sources()) assignment.emplace(s, kind::AppendCount{});
  for (NodeId a : g.atomics()) assignment.emplace(a, kind::Sum{});
  for (NodeId d : g.destinations()) assignment.emplace(d, kind::CountedMean{});
  return assignment;
}

FunctionAssignment uniform_assignment(const graph::NfcGraph& g, const AtomicFunctionSpec& spec) {
  FunctionAssignment assignment;
  for (NodeId a : g.atomics()) assignment.emplace(a, spec);
  for (NodeId d : g.destinations()) assignment.emplace(d, spec);
  return assignment;
}

}  // namespace condense::afc
