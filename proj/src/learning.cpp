#include "condense/learning.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "condense/error.hpp"

namespace condense::learning {

namespace {

constexpr double kClamp = 1e-15;

double clamp_prediction(double x) noexcept { return std::clamp(x, kClamp, 1.0 - kClamp); }

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

double step_size(const EtaSchedule& schedule, std::uint64_t t) noexcept {
  return std::visit(Overloaded{[&](const Harmonic&) { return 1.0 / (static_cast<double>(t) + 1.0); },
                               [](const ConstantRate& c) { return c.eta; }},
                    schedule);
}

std::string describe(const EtaSchedule& schedule) {
  return std::visit(Overloaded{[](const Harmonic&) { return std::string("harmonic"); },
                               [](const ConstantRate& c) { return "constant(" + std::to_string(c.eta) + ")"; }},
                    schedule);
}

ConsensusState consensus_step(const ConsensusState& state, std::span<const double> sample_mean,
                              const EtaSchedule& schedule) {
  if (sample_mean.size() != state.w.size()) {
    throw Error(ErrorCode::DimensionMismatch, "sample mean and estimate differ in dimension");
  }
  ConsensusState next{state.w, state.t + 1};
  if (std::holds_alternative<Harmonic>(schedule)) {
    const double t = static_cast<double>(state.t);
    const double keep = t / (t + 1.0);
    const double take = 1.0 / (t + 1.0);
    for (std::size_t i = 0; i < next.w.size(); ++i) next.w[i] = keep * state.w[i] + take * sample_mean[i];
  } else {
    const double eta = std::get<ConstantRate>(schedule).eta;
    for (std::size_t i = 0; i < next.w.size(); ++i) next.w[i] = (1.0 - eta) * state.w[i] + eta * sample_mean[i];
  }
  return next;
}

SampleStream normal_samples(std::size_t n, std::size_t q, double mean, double stddev, std::uint64_t seed) {
  return [=](std::uint64_t t) {
    std::vector<std::vector<double>> out(n, std::vector<double>(q));
    for (std::size_t s = 0; s < n; ++s) {
      RngStream rng = RngStream::derive(seed, s, t, Purpose::Dataset);
      std::normal_distribution<double> dist(mean, stddev);
      for (double& v : out[s]) v = dist(rng);
    }
    return out;
  };
}

ConsensusTrajectory consensus_run(const graph::NfcGraph& g, const SampleStream& samples, std::uint64_t generations,
                                  std::vector<double> w0, const EtaSchedule& schedule) {
  const afc::ConfiguredNetwork net = afc::install_functions(g, afc::decompose_average(g));
  const NodeId dest = g.destinations().front();
  ConsensusTrajectory out;
  out.states.push_back({std::move(w0), 0});
  std::vector<afc::Packet> packets;
  for (std::uint64_t t = 0; t < generations; ++t) {
    packets.clear();
    for (auto& x : samples(t)) packets.push_back(afc::Packet::real(std::move(x)));
    const afc::NetworkOutputs result = net.evaluate(packets, {0.0, 0, t});
    const auto mean = result.at(dest).reals();
    out.means.emplace_back(mean.begin(), mean.end());
    out.states.push_back(consensus_step(out.states.back(), mean, schedule));
  }
  return out;
}

int to_internal_label(int label) {
  if (label == 1) return 1;
  if (label == -1) return 0;
  throw Error(ErrorCode::DomainError, "labels must be -1 or +1, got " + std::to_string(label));
}

int to_external_label(int internal) { return internal == 1 ? 1 : -1; }

double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

double log_loss(double prediction, int y) noexcept {
  const double x = clamp_prediction(prediction);
  return -(y * std::log(x) + (1 - y) * std::log(1.0 - x));
}

double top_seed(double prediction, int y) noexcept {
  const double x = clamp_prediction(prediction);
  return -y / x + (1 - y) / (1.0 - x);
}

UpwardTuple nn_upward_gradients(std::span<const double> weights, std::span<const double> x_in, double x_out,
                                std::uint64_t t) {
  if (weights.size() != x_in.size()) throw Error(ErrorCode::DimensionMismatch, "weights and inputs differ in length");
  const double slope = x_out * (1.0 - x_out);
  UpwardTuple tuple{t, false, x_out, std::vector<double>(x_in.size()), std::vector<double>(x_in.size())};
  for (std::size_t i = 0; i < x_in.size(); ++i) {
    tuple.dx_dw[i] = slope * x_in[i];
    tuple.dx_dxin[i] = slope * weights[i];
  }
  return tuple;
}

void GradientStore::put(UpwardTuple tuple) {
  const std::uint64_t t = tuple.t;
  entries_.insert_or_assign(t, std::move(tuple));
  if (t + 1 < window_) return;
  const std::uint64_t oldest = t + 1 - window_;
  for (auto it = entries_.begin(); it != entries_.end() && it->first < oldest;) {
    it = entries_.erase(it);
    ++evicted_;
  }
}

std::optional<UpwardTuple> GradientStore::take(std::uint64_t t) {
  const auto it = entries_.find(t);
  if (it == entries_.end()) return std::nullopt;
  UpwardTuple tuple = std::move(it->second);
  entries_.erase(it);
  return tuple;
}

TreeNetwork::TreeNetwork(graph::NfcGraph g, std::size_t packet_length, std::uint64_t seed)
    : graph_(std::move(g)), packet_length_(packet_length) {
  if (graph_.mode() != graph::GraphMode::Tree) throw Error(ErrorCode::NotATree, "neural training runs over a tree");
  const std::size_t n = graph_.node_count();
  root_ = graph_.destinations().front();
  level_.assign(n, 0);
  weights_.resize(n);
  offsets_.resize(n);
  stores_.assign(n, GradientStore(kStalenessWindow));
  for (NodeId v : graph_.topological_order()) {
    if (graph_.role(v) == graph::NodeRole::Source) continue;
    neurons_.push_back(v);
    std::size_t width = 0;
    for (NodeId child : graph_.in_neighborhood(v)) {
      level_[v.index] = std::max(level_[v.index], level_[child.index] + 1);
      offsets_[v.index].push_back(width);
      width += graph_.role(child) == graph::NodeRole::Source ? packet_length_ : 1;
    }
    RngStream rng = RngStream::derive(seed, v.index, 0, Purpose::WeightInit);
    weights_[v.index].resize(width);
    for (double& w : weights_[v.index]) w = rng.uniform() - 0.5;
  }
}

std::size_t TreeNetwork::input_offset(NodeId v, std::size_t child_position) const {
  return offsets_.at(v.index).at(child_position);
}

void TreeNetwork::set_weights(NodeId v, std::vector<double> w) {
  if (w.size() != weights_.at(v.index).size()) {
    throw Error(ErrorCode::DimensionMismatch, "node " + graph_.name(v) + " expects " +
                                                  std::to_string(weights_[v.index].size()) + " weights");
  }
  weights_[v.index] = std::move(w);
}

void TreeNetwork::fill_weights(double value) {
  for (NodeId v : neurons_) std::fill(weights_[v.index].begin(), weights_[v.index].end(), value);
}

std::vector<double> ForwardResult::input_of(const TreeNetwork& net, NodeId v) const {
  std::vector<double> in;
  in.reserve(net.input_width(v));
  for (NodeId child : net.graph().in_neighborhood(v)) {
    in.insert(in.end(), activity[child.index].begin(), activity[child.index].end());
  }
  return in;
}

ForwardResult nn_forward(const TreeNetwork& net, const TrainingSample& sample, const FailureModel& failures,
                         std::uint64_t t) {
  const graph::NfcGraph& g = net.graph();
  if (sample.x.size() != g.source_count()) throw Error(ErrorCode::DimensionMismatch, "one feature vector per source");
  ForwardResult out;
  out.t = t;
  out.activity.resize(g.node_count());
  out.dropped.assign(g.node_count(), false);
  for (NodeId s : g.sources()) {
    const auto& x = sample.x[g.source_index(s)];
    if (x.size() != net.packet_length()) throw Error(ErrorCode::DimensionMismatch, "feature vector length != L");
    out.activity[s.index] = x;
  }
  for (NodeId v : net.neurons()) {
    if (g.role(v) == graph::NodeRole::Atomic) {
      RngStream rng = RngStream::derive(failures.seed, v.index, t, Purpose::Dropout);
      if (rng.bernoulli(failures.node_dropout_p)) {
        out.dropped[v.index] = true;
        ++out.dropped_count;
        out.activity[v.index] = {0.0};
        continue;
      }
    }
    const std::vector<double> in = out.input_of(net, v);
    const auto w = net.weights(v);
    double z = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) z += w[i] * in[i];
    out.activity[v.index] = {sigmoid(z)};
  }
  out.prediction = out.activity[net.root().index].front();
  return out;
}

ForwardResult nn_upward_pass(TreeNetwork& net, const TrainingSample& sample, const FailureModel& failures,
                             std::uint64_t t) {
  ForwardResult fwd = nn_forward(net, sample, failures, t);
  for (NodeId v : net.neurons()) {
    if (fwd.dropped[v.index]) {
      net.store(v).put(UpwardTuple{t, true, 0.0, {}, {}});
      continue;
    }
    net.store(v).put(nn_upward_gradients(net.weights(v), fwd.input_of(net, v), fwd.activity[v.index].front(), t));
  }
  return fwd;
}

DownwardReport nn_downward_pass(TreeNetwork& net, int label, std::uint64_t t, double eta,
                                const FailureModel& failures) {
  const graph::NfcGraph& g = net.graph();
  const int y = to_internal_label(label);
  DownwardReport report;
  report.t = t;
  report.gradient.resize(g.node_count());
  std::vector<double> dj_dx(g.node_count(), 0.0);

  const auto neurons = net.neurons();
  for (auto it = neurons.rbegin(); it != neurons.rend(); ++it) {
    const NodeId v = *it;
    std::optional<UpwardTuple> tuple = net.store(v).take(t);
    if (!tuple) {
      ++report.stale_nodes;
      continue;
    }
    if (tuple->dropped) continue;
    if (v == net.root()) dj_dx[v.index] = top_seed(tuple->activity, y);
    const double upstream = dj_dx[v.index];
    std::vector<double> grad(tuple->dx_dw.size());
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = upstream * tuple->dx_dw[i];

    const auto kids = g.in_neighborhood(v);
    for (std::size_t p = 0; p < kids.size(); ++p) {
      const NodeId k = kids[p];
      if (g.role(k) == graph::NodeRole::Source) continue;
      RngStream rng = RngStream::derive(failures.seed, k.index, t, Purpose::MessageLoss);
      if (rng.bernoulli(failures.message_loss_p)) {
        ++report.lost_messages;
        continue;
      }
      dj_dx[k.index] += upstream * tuple->dx_dxin[net.input_offset(v, p)];
    }

    std::vector<double> w(net.weights(v).begin(), net.weights(v).end());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * grad[i];
    net.set_weights(v, std::move(w));
    report.gradient[v.index] = std::move(grad);
    ++report.updated_nodes;
  }
  return report;
}

double dataset_loss(const TreeNetwork& net, std::span<const TrainingSample> dataset) {
  if (dataset.empty()) return 0.0;
  double total = 0.0;
  for (const TrainingSample& sample : dataset) {
    total += log_loss(nn_forward(net, sample, {}).prediction, to_internal_label(sample.label));
  }
  return total / static_cast<double>(dataset.size());
}

TrainResult nn_train(TreeNetwork& net, std::span<const TrainingSample> dataset, std::size_t epochs,
                     const EtaSchedule& schedule, const FailureModel& failures) {
  TrainResult result;
  result.initial_loss = dataset_loss(net, dataset);
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (const TrainingSample& sample : dataset) {
      const ForwardResult fwd = nn_upward_pass(net, sample, failures, t);
      const DownwardReport down = nn_downward_pass(net, sample.label, t, step_size(schedule, t), failures);
      result.trajectory.push_back({t, log_loss(fwd.prediction, to_internal_label(sample.label)), fwd.dropped_count,
                                   down.lost_messages, down.stale_nodes});
      ++t;
    }
  }
  result.final_loss = dataset_loss(net, dataset);
  return result;
}

double gradient_check(const TreeNetwork& net, const TrainingSample& sample, double step) {
  const int y = to_internal_label(sample.label);
  TreeNetwork work = net;
  const std::uint64_t t = 0;
  for (NodeId v : work.neurons()) (void)work.store(v).take(t);
  nn_upward_pass(work, sample, {}, t);
  const DownwardReport analytic = nn_downward_pass(work, sample.label, t, 0.0, {});

  double worst = 0.0;
  TreeNetwork probe = net;
  for (NodeId v : probe.neurons()) {
    const std::vector<double> base(net.weights(v).begin(), net.weights(v).end());
    for (std::size_t i = 0; i < base.size(); ++i) {
      std::vector<double> w = base;
      w[i] = base[i] + step;
      probe.set_weights(v, w);
      const double up = log_loss(nn_forward(probe, sample, {}).prediction, y);
      w[i] = base[i] - step;
      probe.set_weights(v, w);
      const double down = log_loss(nn_forward(probe, sample, {}).prediction, y);
      probe.set_weights(v, base);
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.gradient[v.index].at(i);
      const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  }
  return worst;
}

std::vector<TrainingSample> separable_dataset(std::size_t sources, std::size_t count, std::uint64_t seed,
                                              double margin) {
  RngStream rng = RngStream::derive(seed, 0, 0, Purpose::Dataset);
  std::vector<TrainingSample> out;
  out.reserve(count);
  while (out.size() < count) {
    TrainingSample sample;
    double score = 0.0;
    for (std::size_t s = 0; s < sources; ++s) {
      const double x = 2.0 * rng.uniform() - 1.0;
      sample.x.push_back({x});
      score += s < sources / 2 ? x : -x;
    }
    if (std::abs(score) < margin) continue;
    sample.label = score > 0 ? 1 : -1;
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace condense::learning
