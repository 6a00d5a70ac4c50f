#include "condense/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "condense/error.hpp"
#include "condense/rlnc.hpp"

namespace condense::cli {

namespace {

using graph::NodeRole;

std::size_t line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : static_cast<std::size_t>(n.Mark().line) + 1; }

class Reader {
 public:
  std::vector<Diagnostic> diags;

  void fail(std::size_t line, std::string msg) { diags.push_back({line, std::move(msg)}); }
  void fail(const YAML::Node& at, std::string msg) { fail(line_of(at), std::move(msg)); }

  bool is_map(const YAML::Node& n, std::string_view what) {
    if (n.IsMap()) return true;
    fail(n, fmt::format("'{}' must be a mapping", what));
    return false;
  }

  void allow(const YAML::Node& map, std::string_view section, std::initializer_list<std::string_view> keys) {
    for (auto it = map.begin(); it != map.end(); ++it) {
      if (!it->first.IsScalar()) {
        fail(it->first, "keys must be plain scalars");
        continue;
      }
      const std::string key = it->first.Scalar();
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        fail(it->first, section.empty() ? fmt::format("unknown key '{}'", key)
                                        : fmt::format("unknown key '{}' in {}", key, section));
      }
    }
  }

  std::optional<std::string> text(const YAML::Node& map, const char* key) {
    const YAML::Node n = map[key];
    if (!n) return std::nullopt;
    if (!n.IsScalar()) {
      fail(n, fmt::format("'{}' must be a scalar", key));
      return std::nullopt;
    }
    return n.Scalar();
  }

  std::optional<std::uint64_t> count(const YAML::Node& map, const char* key) {
    const auto s = text(map, key);
    if (!s) return std::nullopt;
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
    if (ec != std::errc{} || end != s->data() + s->size()) {
      fail(map[key], fmt::format("'{}' must be a non-negative integer, got '{}'", key, *s));
      return std::nullopt;
    }
    return v;
  }

  std::optional<double> real(const YAML::Node& map, const char* key) {
    const YAML::Node n = map[key];
    if (!n) return std::nullopt;
    try {
      const double v = n.as<double>();
      if (std::isfinite(v)) return v;
    } catch (const YAML::Exception&) {
    }
    fail(n, fmt::format("'{}' must be a finite number", key));
    return std::nullopt;
  }
};

struct TopologyLines {
  std::size_t section = 0;
  std::map<std::string, std::size_t> nodes;
  std::map<std::pair<std::string, std::string>, std::size_t> arcs;
};

std::optional<graph::TopologyConfig> read_generator(Reader& r, const YAML::Node& t, const std::string& kind) {
  r.allow(t, "topology", {"generator", "sources", "depth", "relays", "seed"});
  const auto need = [&](const char* key, std::uint64_t min) -> std::optional<std::uint64_t> {
    const auto v = r.count(t, key);
    if (!v) {
      if (!t[key]) r.fail(t, fmt::format("generator '{}' needs '{}'", kind, key));
      return std::nullopt;
    }
    if (*v < min) {
      r.fail(t[key], fmt::format("'{}' must be at least {}", key, min));
      return std::nullopt;
    }
    return v;
  };
  if (kind == "star") {
    if (auto n = need("sources", 1)) return graph::generators::star(*n);
  } else if (kind == "binary_tree") {
    if (auto d = need("depth", 1)) {
      if (*d > 20) {
        r.fail(t["depth"], "'depth' above 20 is not supported");
        return std::nullopt;
      }
      return graph::generators::binary_tree(*d);
    }
  } else if (kind == "chain") {
    if (auto n = need("relays", 0)) return graph::generators::chain(*n);
  } else if (kind == "random_tree") {
    const auto n = need("sources", 1);
    const auto d = need("depth", 1);
    const std::uint64_t seed = r.count(t, "seed").value_or(0);
    if (n && d) {
      RngStream rng = RngStream::derive(seed, 0, 0, Purpose::Shuffle);
      return graph::generators::random_tree(*n, *d, rng);
    }
  } else {
    r.fail(t["generator"], fmt::format("unknown generator '{}' (star, binary_tree, chain, random_tree)", kind));
  }
  return std::nullopt;
}

std::optional<graph::TopologyConfig> read_explicit(Reader& r, const YAML::Node& t, TopologyLines& lines) {
  r.allow(t, "topology", {"mode", "nodes", "arcs"});
  graph::TopologyConfig cfg;
  const std::size_t before = r.diags.size();
  if (auto mode = r.text(t, "mode")) {
    if (*mode == "dag") {
      cfg.mode = graph::GraphMode::Dag;
    } else if (*mode != "tree") {
      r.fail(t["mode"], fmt::format("unknown mode '{}' (tree, dag)", *mode));
    }
  }
  const YAML::Node nodes = t["nodes"];
  if (!nodes || !nodes.IsSequence()) {
    r.fail(t, "topology needs a 'nodes' list or a 'generator'");
    return std::nullopt;
  }
  std::map<std::string, graph::NodeId> ids;
  for (const YAML::Node& n : nodes) {
    if (!r.is_map(n, "nodes entry")) continue;
    r.allow(n, "node", {"name", "role"});
    const auto name = r.text(n, "name");
    const auto role = r.text(n, "role");
    if (!name || !role) {
      r.fail(n, "node needs 'name' and 'role'");
      continue;
    }
    NodeRole parsed = NodeRole::Atomic;
    if (*role == "source") {
      parsed = NodeRole::Source;
    } else if (*role == "destination") {
      parsed = NodeRole::Destination;
    } else if (*role != "atomic") {
      r.fail(n["role"], fmt::format("unknown role '{}' (source, atomic, destination)", *role));
      continue;
    }
    if (ids.contains(*name)) {
      r.fail(n, fmt::format("node '{}' declared twice", *name));
      continue;
    }
    ids.emplace(*name, graph::NodeId{static_cast<std::uint32_t>(cfg.nodes.size())});
    lines.nodes[*name] = line_of(n);
    cfg.nodes.push_back({*name, parsed});
  }
  const YAML::Node arcs = t["arcs"];
  if (arcs && !arcs.IsSequence()) r.fail(arcs, "'arcs' must be a list of [from, to] pairs");
  if (arcs && arcs.IsSequence()) {
    for (const YAML::Node& a : arcs) {
      if (!a.IsSequence() || a.size() != 2 || !a[0].IsScalar() || !a[1].IsScalar()) {
        r.fail(a, "arc must be a [from, to] pair");
        continue;
      }
      const std::string from = a[0].Scalar(), to = a[1].Scalar();
      lines.arcs.emplace(std::pair{from, to}, line_of(a));
      const auto f = ids.find(from), h = ids.find(to);
      if (f == ids.end() || h == ids.end()) {
        r.fail(a, fmt::format("arc {} -> {} references unknown node '{}'", from, to, f == ids.end() ? from : to));
        continue;
      }
      auto slot = std::find_if(cfg.children.begin(), cfg.children.end(),
                               [&](const auto& e) { return e.first == h->second; });
      if (slot == cfg.children.end()) {
        cfg.children.emplace_back(h->second, std::vector<graph::NodeId>{f->second});
      } else {
        slot->second.push_back(f->second);
      }
    }
  }
  if (r.diags.size() != before) return std::nullopt;
  return cfg;
}

std::optional<graph::NfcGraph> read_topology(Reader& r, const YAML::Node& t) {
  if (!r.is_map(t, "topology")) return std::nullopt;
  TopologyLines lines;
  lines.section = line_of(t);
  std::optional<graph::TopologyConfig> cfg;
  if (auto kind = r.text(t, "generator")) {
    cfg = read_generator(r, t, *kind);
  } else {
    cfg = read_explicit(r, t, lines);
  }
  if (!cfg) return std::nullopt;
  graph::NfcGraph g = graph::assemble_graph(*cfg);
  const graph::ValidationReport report = graph::validate_graph(g);
  for (const graph::Issue& issue : report.issues) {
    std::size_t line = lines.section;
    std::string msg = issue.message;
    if (issue.arc) {
      const std::string from = g.name(issue.arc->from), to = g.name(issue.arc->to);
      if (auto it = lines.arcs.find({from, to}); it != lines.arcs.end()) line = it->second;
      if (msg.find(from + " -> " + to) == std::string::npos) msg += fmt::format(" (arc {} -> {})", from, to);
    } else if (issue.node) {
      if (auto it = lines.nodes.find(g.name(*issue.node)); it != lines.nodes.end()) line = it->second;
    }
    r.fail(line, msg);
  }
  if (!report.ok()) return std::nullopt;
  return g;
}

void read_capacity(Reader& r, const YAML::Node& c, std::size_t sources, ScenarioFile& file) {
  if (!r.is_map(c, "capacity")) return;
  r.allow(c, "capacity", {"target", "alphabet", "max_k", "max_l", "mode", "cap"});
  CapacitySpec spec;
  if (auto t = r.text(c, "target")) spec.target = *t;
  if (auto q = r.count(c, "alphabet")) {
    if (*q < 2 || *q > 256) {
      r.fail(c["alphabet"], "'alphabet' must lie in [2, 256]");
    } else {
      spec.alphabet = static_cast<std::uint32_t>(*q);
    }
  }
  for (auto [key, slot] : {std::pair{"max_k", &spec.max_k}, std::pair{"max_l", &spec.max_l}}) {
    if (auto v = r.count(c, key)) {
      if (*v == 0) {
        r.fail(c[key], fmt::format("'{}' must be at least 1", key));
      } else {
        *slot = *v;
      }
    }
  }
  if (auto m = r.text(c, "mode")) {
    if (*m == "linear") {
      spec.mode = solvability::SearchMode::Linear;
      if ((spec.alphabet & (spec.alphabet - 1)) != 0) r.fail(c["mode"], "linear mode needs a power-of-two alphabet");
    } else if (*m != "general") {
      r.fail(c["mode"], fmt::format("unknown mode '{}' (general, linear)", *m));
    }
  }
  if (auto cap = r.real(c, "cap")) {
    if (*cap <= 0) {
      r.fail(c["cap"], "'cap' must be positive");
    } else {
      spec.cap = *cap;
    }
  }
  try {
    (void)solvability::targets::by_name(spec.target, spec.alphabet, sources);
  } catch (const Error& e) {
    r.fail(c["target"] ? c["target"] : c, e.what());
  }
  file.capacity = spec;
}

void read_body(Reader& r, const YAML::Node& root, ScenarioFile& file) {
  r.allow(root, "",
          {"schema_version", "tool_version", "topology", "application", "domain", "field_order", "packet_length",
           "generations", "n_prime", "seed", "failures", "eta", "samples", "dataset_size", "forwarding_header",
           "output", "capacity"});
  const auto version = r.count(root, "schema_version");
  if (!root["schema_version"]) {
    r.fail(root, "missing 'schema_version'");
  } else if (version && *version != kSchemaVersion) {
    r.fail(root["schema_version"], fmt::format("unsupported schema_version {} (expected {})", *version, kSchemaVersion));
  }

  engine::Scenario& s = file.scenario;
  if (!root["topology"]) {
    r.fail(root, "missing 'topology'");
  } else if (auto g = read_topology(r, root["topology"])) {
    s.graph = std::move(*g);
  }

  if (auto app = r.text(root, "application")) {
    if (auto parsed = engine::parse_application(*app)) {
      s.application = *parsed;
      file.has_application = true;
      s.domain = *parsed == engine::Application::Rlnc ? afc::Domain::Field : afc::Domain::Real;
    } else {
      r.fail(root["application"], fmt::format("unknown application '{}' (rlnc, consensus, average, neural, forwarding)", *app));
    }
  }
  if (auto d = r.text(root, "domain")) {
    if (*d == "field") {
      s.domain = afc::Domain::Field;
    } else if (*d == "real") {
      s.domain = afc::Domain::Real;
    } else {
      r.fail(root["domain"], fmt::format("unknown domain '{}' (field, real)", *d));
    }
  }
  if (auto v = r.count(root, "field_order")) {
    if (*v > (1u << 16)) {
      r.fail(root["field_order"], "'field_order' above 65536 is not supported");
    } else {
      s.field_order = static_cast<std::uint32_t>(*v);
    }
  }
  if (auto v = r.count(root, "packet_length")) s.packet_length = *v;
  if (auto v = r.count(root, "generations")) s.generations = *v;
  if (auto v = r.count(root, "n_prime")) s.n_prime = *v;
  if (auto v = r.count(root, "seed")) s.seed = *v;
  if (auto v = r.count(root, "dataset_size")) s.dataset_size = *v;
  if (auto v = r.count(root, "forwarding_header")) s.forwarding_header = *v;
  if (auto v = r.text(root, "output")) file.output = *v;

  if (const YAML::Node f = root["failures"]; f && r.is_map(f, "failures")) {
    r.allow(f, "failures", {"node_dropout", "message_loss"});
    if (auto p = r.real(f, "node_dropout")) s.node_dropout_p = *p;
    if (auto p = r.real(f, "message_loss")) s.message_loss_p = *p;
  }
  if (const YAML::Node e = root["eta"]) {
    if (e.IsScalar() && e.Scalar() == "harmonic") {
      s.eta = learning::Harmonic{};
    } else if (e.IsMap()) {
      r.allow(e, "eta", {"constant"});
      if (auto c = r.real(e, "constant")) {
        if (*c <= 0) r.fail(e["constant"], "'constant' step size must be positive");
        s.eta = learning::ConstantRate{*c};
      }
    } else {
      r.fail(e, "'eta' must be 'harmonic' or {constant: <step>}");
    }
  }
  if (const YAML::Node m = root["samples"]; m && r.is_map(m, "samples")) {
    r.allow(m, "samples", {"mean", "stddev"});
    if (auto v = r.real(m, "mean")) s.sample_mean = *v;
    if (auto v = r.real(m, "stddev")) s.sample_stddev = *v;
  }
  if (const YAML::Node c = root["capacity"]) read_capacity(r, c, s.graph.source_count(), file);

  if (file.has_application && r.diags.empty()) {
    try {
      engine::validate_scenario(s);
    } catch (const Error& e) {
      r.fail(root["application"], e.what());
    }
  }
}

std::string fmt_real(double v) { return fmt::format("{}", v); }

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) return std::nullopt;
  return os.str();
}

bool write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
  return static_cast<bool>(out);
}

struct Loaded {
  std::optional<ScenarioFile> file;
  int status = kOk;
};

Loaded load(const std::string& path, std::ostream& err) {
  const auto text = read_file(path);
  if (!text) {
    err << fmt::format("{}: cannot read file\n", path);
    return {std::nullopt, kIo};
  }
  ParseResult parsed = parse_scenario(*text);
  if (!parsed.file) {
    for (const Diagnostic& d : parsed.diagnostics) err << path << ':' << d.str() << '\n';
    return {std::nullopt, kValidation};
  }
  return {std::move(parsed.file), kOk};
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  std::optional<std::string> out;
  bool quiet = false;
};

void apply(const Overrides& o, ScenarioFile& f) {
  if (o.seed) f.scenario.seed = *o.seed;
  if (o.trials) f.scenario.generations = *o.trials;
}

int cmd_validate(const std::string& path, std::ostream& err) { return load(path, err).status; }

int cmd_run(const std::string& path, const Overrides& o, std::ostream& out, std::ostream& err) {
  Loaded loaded = load(path, err);
  if (!loaded.file) return loaded.status;
  ScenarioFile& file = *loaded.file;
  if (!file.has_application) {
    err << path << ": 'application' is required to run a scenario\n";
    return kValidation;
  }
  apply(o, file);
  const engine::Scenario& s = file.scenario;

  engine::ScenarioResult result;
  try {
    result = engine::run_scenario(s);
  } catch (const std::exception& e) {
    err << fmt::format("{}: run failed ({} application, seed {}): {}\n", path, engine::to_string(s.application),
                       s.seed, e.what());
    return kRuntime;
  }

  const std::filesystem::path dir = o.out.value_or(file.output.value_or("condense_out"));
  file.output = dir.string();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  bool ok = !ec;
  ok = ok && write_file(dir / "arcs.csv", engine::arcs_csv(s.graph, result));
  ok = ok && write_file(dir / "generations.csv", engine::generations_csv(result));
  ok = ok && write_file(dir / "trajectory.csv", engine::trajectory_csv(result));
  if (s.application == engine::Application::Rlnc) {
    rlnc::SuccessStats stats{s.field_order, s.graph.source_count(), s.n_prime, s.generations, result.successes, s.seed};
    ok = ok && write_file(dir / "success.csv", rlnc::csv_header() + "\n" + rlnc::csv_row(stats) + "\n");
  }
  ok = ok && write_file(dir / "manifest.yaml", manifest_yaml(file));
  if (!ok) {
    err << fmt::format("{}: cannot write results to {}\n", path, dir.string());
    return kIo;
  }
  if (!o.quiet) out << engine::summary_line(s, result) << '\n';
  return kOk;
}

int cmd_compare(const std::string& path, const Overrides& o, std::ostream& out, std::ostream& err) {
  Loaded loaded = load(path, err);
  if (!loaded.file) return loaded.status;
  ScenarioFile& file = *loaded.file;
  if (!file.has_application) {
    err << path << ": 'application' is required to compare costs\n";
    return kValidation;
  }
  apply(o, file);
  engine::Scenario baseline = file.scenario;
  baseline.application = engine::Application::Forwarding;
  engine::CostReport report;
  try {
    report = engine::compare_costs(file.scenario, baseline);
  } catch (const std::exception& e) {
    err << fmt::format("{}: compare failed: {}\n", path, e.what());
    return kRuntime;
  }
  if (o.out || file.output) {
    const std::filesystem::path dir = o.out.value_or(*file.output);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !write_file(dir / "costs.csv", engine::costs_csv(file.scenario.graph, report))) {
      err << fmt::format("{}: cannot write results to {}\n", path, dir.string());
      return kIo;
    }
  }
  if (!o.quiet) {
    out << fmt::format("compare {} vs forwarding: nfc_symbols={} forwarding_symbols={} ratio={} message_ratio={}\n",
                       engine::to_string(file.scenario.application), report.nfc_total, report.forwarding_total,
                       report.ratio, report.message_ratio);
  }
  return kOk;
}

int cmd_capacity(const std::string& path, const Overrides& o, std::ostream& out, std::ostream& err) {
  Loaded loaded = load(path, err);
  if (!loaded.file) return loaded.status;
  const ScenarioFile& file = *loaded.file;
  if (!file.capacity) {
    err << path << ": 'capacity' section is required\n";
    return kValidation;
  }
  const CapacitySpec& c = *file.capacity;
  const graph::NfcGraph& g = file.scenario.graph;
  solvability::SolvabilityInstance base{g, c.alphabet, 1, 1,
                                        solvability::targets::by_name(c.target, c.alphabet, g.source_count()), c.mode,
                                        c.cap};
  for (graph::NodeId d : g.destinations()) {
    out << fmt::format("identity min-cut check at {}: {}\n", g.name(d), solvability::linear_identity_check(g, d).describe());
  }
  bool capped = false;
  std::optional<solvability::SweepPoint> best;
  try {
    for (const auto& [k, l] : solvability::grid(c.max_k, c.max_l)) {
      solvability::SolvabilityInstance inst = base;
      inst.k = k;
      inst.l = l;
      const solvability::SolvabilityVerdict v = solvability::brute_force_search(inst);
      if (!o.quiet || v.answer != solvability::Answer::NotSolvable) out << solvability::format_verdict(inst, v);
      capped = capped || v.answer == solvability::Answer::UnknownCapped;
      if (v.answer == solvability::Answer::Solvable && (!best || k * best->l > best->k * l)) {
        best = solvability::SweepPoint{k, l, v.answer, v.candidate_bound};
      }
    }
  } catch (const std::exception& e) {
    err << fmt::format("{}: capacity search failed: {}\n", path, e.what());
    return kRuntime;
  }
  if (best) {
    out << fmt::format("computing capacity lower bound: K/L >= {}/{}\n", best->k, best->l);
  } else {
    out << "computing capacity lower bound: no solvable (K, L) in the sweep\n";
  }
  if (capped) {
    err << path << ": some (K, L) exceeded the search cap; their verdict is unknown\n";
    return kCap;
  }
  return kOk;
}

}  // namespace

std::string Diagnostic::str() const {
  return line == 0 ? message : fmt::format("{}: {}", line, message);
}

ParseResult parse_scenario(std::string_view text) {
  ParseResult result;
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    result.diagnostics.push_back({static_cast<std::size_t>(e.mark.line) + 1, e.msg});
    return result;
  }
  if (!root.IsMap()) {
    result.diagnostics.push_back({line_of(root), "scenario must be a YAML mapping"});
    return result;
  }
  Reader r;
  ScenarioFile file;
  read_body(r, root, file);
  result.diagnostics = std::move(r.diags);
  std::stable_sort(result.diagnostics.begin(), result.diagnostics.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.line < b.line; });
  if (result.diagnostics.empty()) result.file = std::move(file);
  return result;
}

std::string manifest_yaml(const ScenarioFile& file) {
  const engine::Scenario& s = file.scenario;
  const graph::NfcGraph& g = s.graph;
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "schema_version" << YAML::Value << kSchemaVersion;
  e << YAML::Key << "tool_version" << YAML::Value << std::string(kToolVersion);
  e << YAML::Key << "seed" << YAML::Value << s.seed;

  e << YAML::Key << "topology" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "mode" << YAML::Value << std::string(graph::to_string(g.mode()));
  e << YAML::Key << "nodes" << YAML::Value << YAML::BeginSeq;
  for (std::uint32_t v = 0; v < g.node_count(); ++v) {
    const graph::NodeId id{v};
    e << YAML::Flow << YAML::BeginMap << YAML::Key << "name" << YAML::Value << g.name(id) << YAML::Key << "role"
      << YAML::Value << std::string(graph::to_string(g.role(id))) << YAML::EndMap;
  }
  e << YAML::EndSeq;
  e << YAML::Key << "arcs" << YAML::Value << YAML::BeginSeq;
  for (const graph::Arc& a : g.arcs()) e << YAML::Flow << YAML::BeginSeq << g.name(a.from) << g.name(a.to) << YAML::EndSeq;
  e << YAML::EndSeq << YAML::EndMap;

  if (file.has_application) {
    e << YAML::Key << "application" << YAML::Value << std::string(engine::to_string(s.application));
    e << YAML::Key << "domain" << YAML::Value << std::string(afc::to_string(s.domain));
    e << YAML::Key << "field_order" << YAML::Value << s.field_order;
    e << YAML::Key << "packet_length" << YAML::Value << s.packet_length;
    e << YAML::Key << "generations" << YAML::Value << s.generations;
    e << YAML::Key << "n_prime" << YAML::Value << s.n_prime;
    e << YAML::Key << "failures" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "node_dropout" << YAML::Value << fmt_real(s.node_dropout_p);
    e << YAML::Key << "message_loss" << YAML::Value << fmt_real(s.message_loss_p) << YAML::EndMap;
    e << YAML::Key << "eta" << YAML::Value;
    if (const auto* c = std::get_if<learning::ConstantRate>(&s.eta)) {
      e << YAML::BeginMap << YAML::Key << "constant" << YAML::Value << fmt_real(c->eta) << YAML::EndMap;
    } else {
      e << "harmonic";
    }
    e << YAML::Key << "samples" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "mean" << YAML::Value << fmt_real(s.sample_mean);
    e << YAML::Key << "stddev" << YAML::Value << fmt_real(s.sample_stddev) << YAML::EndMap;
    e << YAML::Key << "dataset_size" << YAML::Value << s.dataset_size;
    e << YAML::Key << "forwarding_header" << YAML::Value << s.forwarding_header;
  }
  if (file.output) e << YAML::Key << "output" << YAML::Value << *file.output;
  if (file.capacity) {
    const CapacitySpec& c = *file.capacity;
    e << YAML::Key << "capacity" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "target" << YAML::Value << c.target;
    e << YAML::Key << "alphabet" << YAML::Value << c.alphabet;
    e << YAML::Key << "max_k" << YAML::Value << c.max_k;
    e << YAML::Key << "max_l" << YAML::Value << c.max_l;
    e << YAML::Key << "mode" << YAML::Value << (c.mode == solvability::SearchMode::Linear ? "linear" : "general");
    e << YAML::Key << "cap" << YAML::Value << fmt_real(c.cap) << YAML::EndMap;
  }
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Condense network-function-computation simulator", "condense"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string path;
  Overrides o;
  auto add_common = [&](CLI::App* sub, bool run_flags) {
    sub->add_option("scenario", path, "scenario YAML file")->required();
    sub->add_flag("--quiet", o.quiet, "suppress the summary line");
    if (!run_flags) return;
    sub->add_option("--seed", o.seed, "override the scenario seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--trials", o.trials, "override the number of generations (rlnc trials)");
  };
  CLI::App* validate = app.add_subcommand("validate", "check a scenario file");
  validate->add_option("scenario", path, "scenario YAML file")->required();
  CLI::App* run_cmd = app.add_subcommand("run", "run a scenario and write CSV metrics");
  add_common(run_cmd, true);
  CLI::App* capacity = app.add_subcommand("capacity", "solvability verdicts over a (K, L) sweep");
  add_common(capacity, false);
  CLI::App* compare = app.add_subcommand("compare", "communication cost against raw forwarding");
  add_common(compare, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  if (validate->parsed()) return cmd_validate(path, err);
  if (run_cmd->parsed()) return cmd_run(path, o, out, err);
  if (capacity->parsed()) return cmd_capacity(path, o, out, err);
  return cmd_compare(path, o, out, err);
}

}  // namespace condense::cli
