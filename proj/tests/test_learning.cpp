#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "condense/error.hpp"
#include "condense/learning.hpp"
#include "reference_nn.hpp"

using namespace condense;
using namespace condense::learning;
using graph::NodeId;

namespace {

graph::NfcGraph tree7() { return graph::build_graph(graph::generators::binary_tree(2)); }

TrainingSample sample4(const std::array<double, 4>& x, int label) { return {{{x[0]}, {x[1]}, {x[2]}, {x[3]}}, label}; }

// Copy reference weights into the library network (root 0, hidden 1 and 2).
void load(TreeNetwork& net, const reference::SevenNodeNet& ref) {
  net.set_weights(NodeId{0}, {ref.v[0], ref.v[1]});
  net.set_weights(NodeId{1}, {ref.u1[0], ref.u1[1]});
  net.set_weights(NodeId{2}, {ref.u2[0], ref.u2[1]});
}

reference::SevenNodeNet random_reference(std::mt19937& gen) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  reference::SevenNodeNet ref;
  for (auto* w : {&ref.v, &ref.u1, &ref.u2}) (*w) = {u(gen), u(gen)};
  return ref;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("consensus_step examples") {
  ConsensusState s{{42.0}, 0};
  s = consensus_step(s, std::vector<double>{7.0});
  CHECK(s.w[0] == 7.0);
  CHECK(s.t == 1);

  ConsensusState c{{-3.0}, 0};
  for (int i = 0; i < 50; ++i) {
    c = consensus_step(c, std::vector<double>{1.5});
    CHECK(c.w[0] == doctest::Approx(1.5).epsilon(1e-15));
  }

  ConsensusState r{{0.0}, 0};
  for (double m : {1.0, 2.0, 3.0}) r = consensus_step(r, std::vector<double>{m});
  CHECK(r.w[0] == doctest::Approx(2.0).epsilon(1e-15));

  ConsensusState k{{0.0}, 0};
  k = consensus_step(k, std::vector<double>{10.0}, ConstantRate{0.25});
  CHECK(k.w[0] == doctest::Approx(2.5));
  CHECK_THROWS_AS(consensus_step(k, std::vector<double>{1.0, 2.0}), Error);
}

TEST_CASE("consensus_run equals the running average for any initializer") {
  RngStream rng(12);
  const auto g = graph::build_graph(graph::generators::random_tree(100, 4, rng));
  const auto samples = normal_samples(100, 1, 5.0, 1.0, 3);
  const ConsensusTrajectory a = consensus_run(g, samples, 1000, {0.0});
  const ConsensusTrajectory b = consensus_run(g, samples, 1000, {-1e6});
  double sum = 0.0;
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    // Oracle mean taken directly from the samples, not from the network.
    const auto xs = samples(t);
    double m = 0.0;
    for (const auto& x : xs) m += x[0];
    m /= 100.0;
    sum += m;
    const double running = sum / static_cast<double>(t + 1);
    worst = std::max({worst, rel(a.states[t + 1].w[0], running), rel(b.states[t + 1].w[0], running)});
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("consensus_run converges within the CLT band") {
  const auto g = graph::build_graph(graph::generators::star(10));
  const ConsensusTrajectory tr = consensus_run(g, normal_samples(10, 1, 5.0, 1.0, 9), 1000, {0.0});
  CHECK(std::abs(tr.states.back().w[0] - 5.0) <= 3.0 / std::sqrt(10.0 * 1000.0));
}

TEST_CASE("consensus_run on a single constant source") {
  const auto g = graph::build_graph(graph::generators::chain(2));
  const SampleStream constant = [](std::uint64_t) { return std::vector<std::vector<double>>{{3.25}}; };
  const ConsensusTrajectory tr = consensus_run(g, constant, 20, {100.0});
  for (std::size_t t = 1; t < tr.states.size(); ++t) CHECK(tr.states[t].w[0] == doctest::Approx(3.25).epsilon(1e-15));
}

TEST_CASE("consensus_run is deterministic and handles vectors") {
  const auto g = graph::build_graph(graph::generators::binary_tree(3));
  const auto s = normal_samples(8, 3, 0.0, 2.0, 4);
  const auto a = consensus_run(g, s, 50, {0, 0, 0});
  const auto b = consensus_run(g, s, 50, {0, 0, 0});
  for (std::size_t t = 0; t < a.states.size(); ++t) CHECK(a.states[t].w == b.states[t].w);
  CHECK(a.states.back().w.size() == 3);
}

TEST_CASE("label mapping") {
  CHECK(to_internal_label(1) == 1);
  CHECK(to_internal_label(-1) == 0);
  CHECK(to_external_label(to_internal_label(-1)) == -1);
  CHECK_THROWS_AS(to_internal_label(0), Error);
}

TEST_CASE("nn_forward basics") {
  TreeNetwork net(tree7(), 1, 1);
  CHECK(net.depth() == 2);
  CHECK(net.level(NodeId{1}) == 1);
  net.fill_weights(0.0);
  const ForwardResult f = nn_forward(net, sample4({1, -2, 3, 4}, 1), {});
  for (NodeId v : net.neurons()) CHECK(f.activity[v.index][0] == 0.5);

  TreeNetwork edge(graph::build_graph(graph::generators::chain(0)), 1, 1);
  edge.set_weights(edge.root(), {0.7});
  CHECK(nn_forward(edge, {{{1.0}}, 1}, {}).prediction == sigmoid(0.7));
  CHECK(sigmoid(0.7) == doctest::Approx(1.0 / (1.0 + std::exp(-0.7))));
}

TEST_CASE("nn_forward matches the straight-line reference") {
  std::mt19937 gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    const reference::SevenNodeNet ref = random_reference(gen);
    TreeNetwork net(tree7(), 1, 0);
    load(net, ref);
    std::uniform_real_distribution<double> u(-2, 2);
    const std::array<double, 4> x{u(gen), u(gen), u(gen), u(gen)};
    CHECK(std::abs(nn_forward(net, sample4(x, 1), {}).prediction - ref.forward(x).p) <= 1e-15);
  }
}

TEST_CASE("nn_upward_gradients") {
  const std::vector<double> w{1.0, 2.0};
  const std::vector<double> x{3.0, -5.0};
  for (double sat : {0.0, 1.0}) {
    const UpwardTuple t = nn_upward_gradients(w, x, sat, 0);
    CHECK(t.dx_dw == std::vector<double>{0.0, -0.0});
    CHECK(t.dx_dxin == std::vector<double>{0.0, 0.0});
  }
  const UpwardTuple h = nn_upward_gradients(w, x, 0.5, 4);
  CHECK(h.t == 4);
  CHECK(h.dx_dw == std::vector<double>{0.75, -1.25});
  CHECK(h.dx_dxin == std::vector<double>{0.25, 0.5});

  // Central differences of the node's own activity.
  std::mt19937 gen(8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> ww(3), xx(3);
    for (auto& v : ww) v = u(gen);
    for (auto& v : xx) v = u(gen);
    auto act = [&](const std::vector<double>& a, const std::vector<double>& b) {
      return sigmoid(std::inner_product(a.begin(), a.end(), b.begin(), 0.0));
    };
    const UpwardTuple tup = nn_upward_gradients(ww, xx, act(ww, xx), 0);
    const double step = 1e-5;
    for (std::size_t i = 0; i < 3; ++i) {
      auto wp = ww, wm = ww, xp = xx, xm = xx;
      wp[i] += step, wm[i] -= step, xp[i] += step, xm[i] -= step;
      CHECK(std::abs(tup.dx_dw[i] - (act(wp, xx) - act(wm, xx)) / (2 * step)) <= 1e-6);
      CHECK(std::abs(tup.dx_dxin[i] - (act(ww, xp) - act(ww, xm)) / (2 * step)) <= 1e-6);
    }
  }
}

TEST_CASE("top seed and loss") {
  CHECK(top_seed(0.5, 1) == -2.0);
  CHECK(top_seed(0.5, 0) == 2.0);
  CHECK(log_loss(0.5, 1) == doctest::Approx(std::log(2.0)));
  CHECK(std::isfinite(top_seed(1.0, 0)));
}

TEST_CASE("distributed updates equal centralized backprop") {
  std::mt19937 gen(21);
  reference::SevenNodeNet ref = random_reference(gen);
  TreeNetwork net(tree7(), 1, 0);
  load(net, ref);
  const auto data = separable_dataset(4, 100, 6);
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const TrainingSample& s = data[t];
    const std::array<double, 4> x{s.x[0][0], s.x[1][0], s.x[2][0], s.x[3][0]};
    nn_upward_pass(net, s, {}, t);
    nn_downward_pass(net, s.label, t, 0.5, {});
    ref.step(x, to_internal_label(s.label), 0.5);
    for (int i = 0; i < 2; ++i) {
      worst = std::max({worst, std::abs(net.weights(NodeId{0})[i] - ref.v[i]),
                        std::abs(net.weights(NodeId{1})[i] - ref.u1[i]),
                        std::abs(net.weights(NodeId{2})[i] - ref.u2[i])});
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("downward pass purges tuples and reports lost messages") {
  TreeNetwork net(tree7(), 1, 4);
  const TrainingSample s = sample4({0.1, 0.2, -0.3, 0.4}, -1);
  nn_upward_pass(net, s, {}, 3);
  for (NodeId v : net.neurons()) CHECK(net.store(v).contains(3));
  nn_downward_pass(net, s.label, 3, 0.1, {});
  for (NodeId v : net.neurons()) CHECK_FALSE(net.store(v).contains(3));

  const std::vector<double> u1(net.weights(NodeId{1}).begin(), net.weights(NodeId{1}).end());
  const std::vector<double> u2(net.weights(NodeId{2}).begin(), net.weights(NodeId{2}).end());
  const std::vector<double> v(net.weights(NodeId{0}).begin(), net.weights(NodeId{0}).end());
  const FailureModel all_lost{0.0, 1.0, 1};
  nn_upward_pass(net, s, all_lost, 4);
  const DownwardReport r = nn_downward_pass(net, s.label, 4, 0.1, all_lost);
  CHECK(r.lost_messages == 2);
  CHECK(std::vector<double>(net.weights(NodeId{1}).begin(), net.weights(NodeId{1}).end()) == u1);
  CHECK(std::vector<double>(net.weights(NodeId{2}).begin(), net.weights(NodeId{2}).end()) == u2);
  CHECK(std::vector<double>(net.weights(NodeId{0}).begin(), net.weights(NodeId{0}).end()) != v);
}

TEST_CASE("stale tuples are evicted and skipped") {
  GradientStore store(8);
  for (std::uint64_t t = 0; t < 8; ++t) store.put({t, false, 0.5, {1.0}, {1.0}});
  CHECK(store.size() == 8);
  store.put({8, false, 0.5, {1.0}, {1.0}});
  CHECK_FALSE(store.contains(0));
  CHECK(store.evicted() == 1);
  CHECK(store.size() == 8);

  TreeNetwork net(tree7(), 1, 2);
  const TrainingSample s = sample4({1, 1, 1, 1}, 1);
  for (std::uint64_t t = 0; t < 9; ++t) nn_upward_pass(net, s, {}, t);
  const std::vector<double> before(net.weights(NodeId{0}).begin(), net.weights(NodeId{0}).end());
  const DownwardReport r = nn_downward_pass(net, 1, 0, 0.5, {});
  CHECK(r.stale_nodes == 3);
  CHECK(r.updated_nodes == 0);
  CHECK(std::vector<double>(net.weights(NodeId{0}).begin(), net.weights(NodeId{0}).end()) == before);
}

TEST_CASE("a dropped child is the same as a zero summand") {
  TreeNetwork net(tree7(), 1, 3);
  const TrainingSample s = sample4({0.3, -0.8, 0.5, 0.9}, 1);
  const FailureModel half{0.5, 0.0, 17};
  int checked = 0;
  for (std::uint64_t t = 0; t < 64; ++t) {
    const ForwardResult f = nn_forward(net, s, half, t);
    CHECK_FALSE(f.dropped[net.root().index]);
    if (f.dropped_count != 1) continue;
    TreeNetwork zeroed = net;
    std::vector<double> v(net.weights(net.root()).begin(), net.weights(net.root()).end());
    v[f.dropped[1] ? 0 : 1] = 0.0;
    zeroed.set_weights(net.root(), v);
    CHECK(nn_forward(zeroed, s, {}).prediction == f.prediction);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("gradient_check on the seven-node tree") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TreeNetwork net(tree7(), 1, seed);
    const auto data = separable_dataset(4, 5, seed);
    for (const auto& s : data) CHECK(gradient_check(net, s) < 1e-4);
  }
  TreeNetwork zero(tree7(), 1, 0);
  zero.fill_weights(0.0);
  CHECK(gradient_check(zero, sample4({0.5, -1, 2, 0.25}, -1)) < 1e-4);
}

TEST_CASE("gradient_check on random trees up to depth 4, width 8") {
  RngStream rng(40);
  for (int i = 0; i < 40; ++i) {
    const auto g = graph::build_graph(graph::generators::random_tree(1 + rng() % 8, 1 + rng() % 4, rng));
    TreeNetwork net(g, 1 + rng() % 2, rng());
    TrainingSample s;
    for (std::size_t k = 0; k < g.source_count(); ++k) {
      s.x.emplace_back();
      for (std::size_t l = 0; l < net.packet_length(); ++l) s.x.back().push_back(2 * rng.uniform() - 1);
    }
    s.label = rng() % 2 ? 1 : -1;
    CHECK(gradient_check(net, s) < 1e-4);
  }
}

TEST_CASE("single-edge gradient matches the closed form") {
  TreeNetwork net(graph::build_graph(graph::generators::chain(0)), 1, 0);
  net.set_weights(net.root(), {0.3});
  const double x = 1.7;
  nn_upward_pass(net, {{{x}}, 1}, {}, 0);
  const DownwardReport r = nn_downward_pass(net, 1, 0, 0.0, {});
  const double p = 1.0 / (1.0 + std::exp(-0.3 * x));
  const double hand = p * (1 - p) * x * (-1.0 / p);
  CHECK(std::abs(r.gradient[net.root().index][0] - hand) <= 1e-10);
}

TEST_CASE("nn_train reduces loss on a separable set") {
  std::vector<double> initial, final;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TreeNetwork net(graph::build_graph(graph::generators::star(2)), 1, seed);
    const auto data = separable_dataset(2, 20, seed);
    const TrainResult r = nn_train(net, data, 200, ConstantRate{0.5}, {});
    initial.push_back(r.initial_loss);
    final.push_back(r.final_loss);
    CHECK(r.trajectory.size() == 4000);
  }
  CHECK(median(final) < median(initial));
}

TEST_CASE("full hidden dropout freezes the loss") {
  TreeNetwork net(tree7(), 1, 5);
  const auto data = separable_dataset(4, 10, 5);
  const TrainResult r = nn_train(net, data, 5, ConstantRate{0.5}, {1.0, 0.0, 2});
  for (const TrainPoint& p : r.trajectory) {
    CHECK(p.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(p.dropped_nodes == 2);
  }
}

TEST_CASE("training is deterministic") {
  auto run = [] {
    TreeNetwork net(tree7(), 1, 11);
    const auto data = separable_dataset(4, 30, 11);
    return nn_train(net, data, 10, Harmonic{}, {0.2, 0.1, 3});
  };
  const TrainResult a = run(), b = run();
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].loss == b.trajectory[i].loss);
    CHECK(a.trajectory[i].dropped_nodes == b.trajectory[i].dropped_nodes);
    CHECK(a.trajectory[i].lost_messages == b.trajectory[i].lost_messages);
  }
}

TEST_CASE("neural training rejects dag graphs") {
  graph::TopologyConfig cfg = graph::generators::star(2);
  cfg.mode = graph::GraphMode::Dag;
  CHECK_THROWS_AS(TreeNetwork(graph::build_graph(cfg), 1, 0), Error);
}
