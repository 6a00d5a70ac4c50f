#include <doctest.h>

#include <numeric>

#include "condense/engine.hpp"
#include "condense/error.hpp"
#include "condense/rlnc.hpp"

using namespace condense;
using namespace condense::engine;

namespace {

graph::NfcGraph tree(std::size_t depth) { return graph::build_graph(graph::generators::binary_tree(depth)); }

Scenario make(graph::NfcGraph g, Application app, std::size_t l = 1, std::uint64_t t = 1) {
  Scenario s;
  s.graph = std::move(g);
  s.application = app;
  s.domain = app == Application::Rlnc ? afc::Domain::Field : afc::Domain::Real;
  s.packet_length = l;
  s.generations = t;
  s.seed = 11;
  return s;
}

std::uint64_t arc_sum(const Metrics& m) {
  return std::accumulate(m.arcs.begin(), m.arcs.end(), std::uint64_t{0},
                         [](std::uint64_t a, const ArcCounter& c) { return a + c.symbols; });
}

std::string all_csv(const Scenario& s, const ScenarioResult& r) {
  return arcs_csv(s.graph, r) + generations_csv(r) + trajectory_csv(r) + arc_trace_csv(r);
}

}  // namespace

TEST_CASE("forwarding baseline charges the path-length sum") {
  for (std::size_t l : {1u, 5u, 64u}) {
    const ScenarioResult r = run_scenario(make(tree(6), Application::Forwarding, l));
    CHECK(r.metrics.total_symbols == 64 * 6 * l);
    CHECK(r.metrics.total_messages == 64 * 6);
    CHECK(arc_sum(r.metrics) == r.metrics.total_symbols);
    CHECK(r.headline == 1.0);
  }
  Scenario s = make(tree(6), Application::Forwarding, 4);
  s.forwarding_header = 1;
  CHECK(run_scenario(s).metrics.total_symbols == 64 * 6 * 5);
}

TEST_CASE("average sends one message of L+1 symbols per arc") {
  for (std::size_t l : {1u, 3u, 64u}) {
    const Scenario s = make(tree(6), Application::Consensus, l, 2);
    CHECK(s.graph.arc_count() == 126);
    const ScenarioResult r = run_scenario(s);
    for (const GenerationRecord& g : r.metrics.generations) CHECK(g.symbols == 126 * (l + 1));
    for (const ArcCounter& a : r.metrics.arcs) {
      CHECK(a.symbols == 2 * (l + header_symbols(s)));
      CHECK(a.messages == 2);
    }
    CHECK(arc_sum(r.metrics) == r.metrics.total_symbols);
  }
}

TEST_CASE("compare_costs on the 64-source tree") {
  const std::size_t l = 64;
  const CostReport c = compare_costs(make(tree(6), Application::Consensus, l), make(tree(6), Application::Forwarding, l));
  CHECK(c.nfc_total == 126 * (l + 1));
  CHECK(c.forwarding_total == 64 * 6 * l);
  CHECK(c.ratio == static_cast<double>(64 * 6 * l) / static_cast<double>(126 * (l + 1)));
  CHECK(c.ratio == doctest::Approx(3.0).epsilon(0.01));
  CHECK(c.arcs.size() == 126);
  std::uint64_t nfc = 0, fwd = 0;
  for (const ArcCost& a : c.arcs) {
    nfc += a.nfc_symbols;
    fwd += a.forwarding_symbols;
  }
  CHECK(nfc == c.nfc_total);
  CHECK(fwd == c.forwarding_total);
  CHECK(costs_csv(make(tree(6), Application::Consensus).graph, c).starts_with("arc,from,to,nfc_symbols,"));
}

TEST_CASE("single-source chain costs the same either way") {
  const auto chain = graph::build_graph(graph::generators::chain(3));
  Scenario fwd = make(chain, Application::Forwarding, 8, 5);
  fwd.forwarding_header = 1;
  const CostReport c = compare_costs(make(chain, Application::Consensus, 8, 5), fwd);
  CHECK(c.ratio == 1.0);
  CHECK(c.message_ratio == 1.0);
  // Without a source id the message counts still match.
  CHECK(compare_costs(make(chain, Application::Consensus, 8, 5), make(chain, Application::Forwarding, 8, 5))
            .message_ratio == 1.0);
}

TEST_CASE("T = 0 gives empty metrics") {
  for (Application app : {Application::Rlnc, Application::Consensus, Application::Neural, Application::Forwarding}) {
    const ScenarioResult r = run_scenario(make(tree(2), app, 1, 0));
    CHECK(r.metrics.generations.empty());
    CHECK(r.metrics.total_symbols == 0);
    CHECK(arc_sum(r.metrics) == 0);
  }
  const CostReport c =
      compare_costs(make(tree(2), Application::Consensus, 1, 0), make(tree(2), Application::Forwarding, 1, 0));
  CHECK(c.ratio == 0.0);
}

TEST_CASE("compare_costs rejects mismatched scenarios") {
  const auto fwd = make(tree(2), Application::Forwarding);
  CHECK_THROWS_AS(compare_costs(make(tree(3), Application::Consensus), fwd), Error);
  CHECK_THROWS_AS(compare_costs(make(tree(2), Application::Consensus, 1, 2), fwd), Error);
  CHECK_THROWS_AS(compare_costs(make(tree(2), Application::Consensus), make(tree(2), Application::Consensus)), Error);
  try {
    compare_costs(make(tree(3), Application::Consensus), fwd);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MismatchedScenarios);
  }
}

TEST_CASE("engine rlnc reproduces the recovery experiment") {
  struct Case {
    graph::NfcGraph g;
    std::uint32_t q;
    std::size_t n_prime, l;
  };
  const std::vector<Case> cases{{graph::build_graph(graph::generators::star(2)), 2, 2, 1},
                                {tree(2), 16, 3, 2},
                                {graph::build_graph(graph::generators::star(5)), 256, 5, 3}};
  for (const Case& c : cases) {
    Scenario s = make(c.g, Application::Rlnc, c.l, 500);
    s.field_order = c.q;
    s.n_prime = c.n_prime;
    const ScenarioResult r = run_scenario(s);
    const unsigned m = static_cast<unsigned>(std::countr_zero(c.q));
    const ff::GaloisField field(m, m == 8 ? ff::GaloisField::kDefaultPolynomial : ff::GaloisField::default_polynomial(m));
    const rlnc::SuccessStats ref = rlnc::run_recovery_experiment(c.g, field, c.n_prime, 500, s.seed, c.l);
    CHECK(r.successes == ref.successes);
    CHECK(r.headline == ref.probability());
    // Every message carries L payload symbols plus an N-symbol coding vector.
    for (const ArcCounter& a : r.metrics.arcs) CHECK(a.symbols == a.messages * (c.l + c.g.source_count()));
    CHECK(r.metrics.total_messages == 500 * c.n_prime * c.g.arc_count());
  }
}

TEST_CASE("engine consensus matches consensus_run") {
  const Scenario s = make(tree(3), Application::Consensus, 2, 50);
  const ScenarioResult r = run_scenario(s);
  const auto ref = learning::consensus_run(
      s.graph, learning::normal_samples(8, 2, s.sample_mean, s.sample_stddev, s.seed), 50, {0.0, 0.0});
  for (std::size_t t = 0; t < 50; ++t) CHECK(r.metrics.generations[t].value == ref.states[t + 1].w[0]);
  CHECK(r.final_estimate == ref.states.back().w);
}

TEST_CASE("engine neural matches nn_train, with and without failures") {
  for (double p : {0.0, 0.3}) {
    Scenario s = make(tree(2), Application::Neural, 1, 64);
    s.dataset_size = 16;
    s.eta = learning::ConstantRate{0.5};
    s.node_dropout_p = p;
    s.message_loss_p = p;
    const ScenarioResult r = run_scenario(s);

    learning::TreeNetwork net(s.graph, 1, s.seed);
    const auto data = learning::separable_dataset(4, 16, s.seed);
    const auto ref = learning::nn_train(net, data, 4, s.eta, {p, p, s.seed});
    CHECK(r.initial_loss == ref.initial_loss);
    CHECK(r.final_loss == ref.final_loss);
    REQUIRE(r.metrics.generations.size() == ref.trajectory.size());
    for (std::size_t t = 0; t < ref.trajectory.size(); ++t) {
      CHECK(r.metrics.generations[t].value == ref.trajectory[t].loss);
      CHECK(r.metrics.generations[t].dropped_nodes == ref.trajectory[t].dropped_nodes);
      CHECK(r.metrics.generations[t].lost_messages == ref.trajectory[t].lost_messages);
    }
  }
}

TEST_CASE("failures: dropped relays stop forwarding and are counted") {
  Scenario s = make(tree(3), Application::Forwarding, 2, 3);
  s.node_dropout_p = 1.0;
  const ScenarioResult r = run_scenario(s);
  for (const GenerationRecord& g : r.metrics.generations) {
    CHECK(g.dropped_nodes == 6);
    CHECK_FALSE(g.completed);
    CHECK(g.value == 0.0);
    CHECK(g.symbols == 8 * 2);  // only the source uplinks
  }

  s.node_dropout_p = 0.0;
  s.message_loss_p = 1.0;
  const ScenarioResult lossy = run_scenario(s);
  CHECK(lossy.metrics.lost_messages == lossy.metrics.total_messages);
  CHECK(lossy.headline == 0.0);

  Scenario avg = make(tree(3), Application::Consensus, 1, 200);
  avg.node_dropout_p = 0.3;
  const ScenarioResult a = run_scenario(avg);
  CHECK(a.metrics.dropped_nodes > 0);
  // Every surviving message still has L + 1 symbols.
  for (const ArcCounter& c : a.metrics.arcs) CHECK(c.symbols == 2 * c.messages);
}

TEST_CASE("barrier audit holds for every application") {
  for (Application app : {Application::Rlnc, Application::Consensus, Application::Neural, Application::Forwarding}) {
    Scenario s = make(tree(3), app, 1, 20);
    s.n_prime = 2;
    s.node_dropout_p = 0.2;
    s.message_loss_p = 0.1;
    const ScenarioResult r = run_scenario(s, {.audit = true});
    REQUIRE_FALSE(r.audit.empty());
    CHECK(audit_barrier(s.graph, r.audit));
  }

  const Scenario s = make(tree(2), Application::Consensus);
  std::vector<Event> log = run_scenario(s, {.audit = true}).audit;
  // Move the root's evaluation to the front: it now precedes its inputs.
  const auto root = std::find_if(log.begin(), log.end(), [&](const Event& e) {
    return e.kind == EventKind::Evaluate && e.node == s.graph.destinations().front();
  });
  REQUIRE(root != log.end());
  std::rotate(log.begin(), root, root + 1);
  CHECK_FALSE(audit_barrier(s.graph, log));
}

TEST_CASE("arc trace adds up to the arc counters") {
  Scenario s = make(tree(3), Application::Consensus, 2, 7);
  s.message_loss_p = 0.2;
  const ScenarioResult r = run_scenario(s, {.arc_trace = true});
  REQUIRE(r.metrics.arc_trace.size() == 7);
  for (std::size_t i = 0; i < r.metrics.arcs.size(); ++i) {
    std::uint64_t sum = 0;
    for (const auto& row : r.metrics.arc_trace) sum += row[i];
    CHECK(sum == r.metrics.arcs[i].symbols);
  }
}

TEST_CASE("identical scenarios give identical bytes") {
  for (Application app : {Application::Rlnc, Application::Consensus, Application::Neural, Application::Forwarding}) {
    Scenario s = make(tree(3), app, 1, 30);
    s.node_dropout_p = 0.25;
    s.message_loss_p = 0.25;
    const std::string a = all_csv(s, run_scenario(s, {.arc_trace = true}));
    const std::string b = all_csv(s, run_scenario(s, {.arc_trace = true}));
    CHECK(a == b);
    s.seed = 12;
    CHECK(a != all_csv(s, run_scenario(s, {.arc_trace = true})));
  }
}

TEST_CASE("csv headers and summary") {
  const Scenario s = make(tree(1), Application::Forwarding, 3);
  const ScenarioResult r = run_scenario(s);
  CHECK(arcs_csv(s.graph, r).starts_with("arc,from,to,messages,symbols,lost\n"));
  CHECK(generations_csv(r) == "generation,messages,symbols,dropped_nodes,lost_messages,completed\n0,2,6,0,0,1\n");
  CHECK(trajectory_csv(r) == "generation,value,dropped_nodes,lost_messages\n0,1,0,0\n");
  CHECK(summary_line(s, r) == "forwarding: generations=1 symbols=6 messages=2 dropped=0 lost=0 delivered_fraction=1");
}

TEST_CASE("scenario validation") {
  Scenario s = make(tree(2), Application::Rlnc);
  s.domain = afc::Domain::Real;
  CHECK_THROWS_AS(validate_scenario(s), Error);
  s.domain = afc::Domain::Field;
  s.field_order = 6;
  CHECK_THROWS_AS(validate_scenario(s), Error);
  s.field_order = 4;
  CHECK_NOTHROW(validate_scenario(s));

  Scenario nn = make(tree(2), Application::Neural, 2);
  CHECK_THROWS_AS(validate_scenario(nn), Error);

  Scenario c = make(tree(2), Application::Consensus);
  c.node_dropout_p = 1.5;
  CHECK_THROWS_AS(validate_scenario(c), Error);

  graph::TopologyConfig dag = graph::generators::star(2);
  dag.mode = graph::GraphMode::Dag;
  CHECK_THROWS_AS(run_scenario(make(graph::build_graph(dag), Application::Forwarding)), Error);

  CHECK(parse_application("average") == Application::Consensus);
  CHECK_FALSE(parse_application("gossip"));
}
