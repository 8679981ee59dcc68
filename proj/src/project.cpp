#include "bmfa/project.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <yaml-cpp/yaml.h>

#include "bmfa/error.hpp"
#include "bmfa/report.hpp"

namespace bmfa {

std::string to_string(PriorStyle s) {
  switch (s) {
    case PriorStyle::aluminium: return "aluminium";
    case PriorStyle::zinc_weak: return "zinc-weak";
    case PriorStyle::zinc_uninformative: return "zinc-uninformative";
    case PriorStyle::explicit_only: return "explicit";
  }
  return "";
}

bool PriorSettings::operator==(const PriorSettings& o) const {
  if (style != o.style || upper != o.upper || likelihood_upper != o.likelihood_upper || scale != o.scale ||
      reported != o.reported || stock_signs != o.stock_signs || explicit_priors.size() != o.explicit_priors.size())
    return false;
  for (const auto& [name, vp] : explicit_priors) {
    auto it = o.explicit_priors.find(name);
    if (it == o.explicit_priors.end() || it->second.mu != vp.mu || it->second.sigma != vp.sigma) return false;
  }
  return true;
}

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& what) {
  const YAML::Mark m = node.Mark();
  throw ParseError(what, m.line + 1, m.column + 1);
}

void expect_map(const YAML::Node& node, const std::string& where) {
  if (!node.IsMap()) fail(node, where + " must be a mapping");
}

void expect_seq(const YAML::Node& node, const std::string& where) {
  if (!node.IsSequence()) fail(node, where + " must be a list");
}

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  expect_map(node, where);
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = it->first.as<std::string>();
    bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!ok) fail(it->first, "unknown key '" + key + "' in " + where);
  }
}

YAML::Node required(const YAML::Node& node, const char* key, const std::string& where) {
  YAML::Node v = node[key];
  if (!v) fail(node, "missing key '" + std::string(key) + "' in " + where);
  return v;
}

std::string as_string(const YAML::Node& node, const std::string& what) {
  if (!node.IsScalar()) fail(node, what + " must be a scalar");
  return node.Scalar();
}

double as_double(const YAML::Node& node, const std::string& what) {
  if (!node.IsScalar()) fail(node, what + " must be a number");
  try {
    double v = node.as<double>();
    if (!std::isfinite(v)) fail(node, what + " must be finite");
    return v;
  } catch (const YAML::BadConversion&) {
    fail(node, what + " must be a number");
  }
}

double as_positive(const YAML::Node& node, const std::string& what) {
  double v = as_double(node, what);
  if (!(v > 0.0)) fail(node, what + " must be positive");
  return v;
}

template <class Int>
Int as_count(const YAML::Node& node, const std::string& what) {
  if (!node.IsScalar()) fail(node, what + " must be an integer");
  try {
    long long v = node.as<long long>();
    if (v < 0) fail(node, what + " must not be negative");
    return static_cast<Int>(v);
  } catch (const YAML::BadConversion&) {
    fail(node, what + " must be an integer");
  }
}

bool as_bool(const YAML::Node& node, const std::string& what) {
  if (!node.IsScalar()) fail(node, what + " must be true or false");
  try {
    return node.as<bool>();
  } catch (const YAML::BadConversion&) {
    fail(node, what + " must be true or false");
  }
}

std::map<std::string, double> parse_number_map(const YAML::Node& node, const std::string& where) {
  expect_map(node, where);
  std::map<std::string, double> out;
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = as_string(it->first, "variable name");
    if (!out.emplace(key, as_double(it->second, where + " value")).second) fail(it->first, "duplicate key '" + key + "'");
  }
  return out;
}

void parse_system(const YAML::Node& node, Project& p) {
  check_keys(node, "system", {"processes", "parents", "flows"});
  YAML::Node processes = required(node, "processes", "system");
  expect_seq(processes, "system.processes");
  for (const YAML::Node& e : processes) {
    check_keys(e, "system.processes entry", {"id", "stock"});
    SystemDefinition::ChildEntry c;
    c.id = as_string(required(e, "id", "process"), "process id");
    if (e["stock"]) c.has_stock = as_bool(e["stock"], "stock");
    p.system.children.push_back(c);
  }
  if (YAML::Node parents = node["parents"]) {
    expect_seq(parents, "system.parents");
    for (const YAML::Node& e : parents) {
      check_keys(e, "system.parents entry", {"id", "members"});
      SystemDefinition::ParentEntry pe;
      pe.id = as_string(required(e, "id", "parent"), "parent id");
      YAML::Node members = required(e, "members", "parent " + pe.id);
      expect_seq(members, "members of " + pe.id);
      for (const YAML::Node& m : members) pe.members.push_back(as_string(m, "member id"));
      p.system.parents.push_back(pe);
    }
  }
  if (YAML::Node flows = node["flows"]) {
    expect_seq(flows, "system.flows");
    for (const YAML::Node& e : flows) {
      check_keys(e, "system.flows entry", {"from", "to"});
      p.system.flows.push_back(
          {as_string(required(e, "from", "flow"), "flow source"), as_string(required(e, "to", "flow"), "flow target")});
    }
  }
}

void parse_observations(const YAML::Node& node, Project& p) {
  if (node.IsNull()) return;
  expect_seq(node, "observations");
  for (const YAML::Node& e : node) {
    expect_map(e, "observation");
    const std::string type = as_string(required(e, "type", "observation"), "observation type");
    ObservationEntry o;
    if (type == "stock") {
      check_keys(e, "stock observation", {"type", "process", "value", "sd"});
      o.type = ObservationType::stock;
      o.process = as_string(required(e, "process", "stock observation"), "process");
      o.value = as_double(required(e, "value", "stock observation"), "value");
    } else if (type == "flow") {
      check_keys(e, "flow observation", {"type", "from", "to", "value", "sd"});
      o.type = ObservationType::flow;
      o.from = as_string(required(e, "from", "flow observation"), "from");
      o.to = as_string(required(e, "to", "flow observation"), "to");
      o.value = as_double(required(e, "value", "flow observation"), "value");
    } else if (type == "ratio") {
      check_keys(e, "ratio observation", {"type", "from", "to", "alpha", "sd", "form"});
      o.type = ObservationType::ratio;
      o.from = as_string(required(e, "from", "ratio observation"), "from");
      o.to = as_string(required(e, "to", "ratio observation"), "to");
      YAML::Node alpha = required(e, "alpha", "ratio observation");
      o.value = as_double(alpha, "alpha");
      if (!(o.value > 0.0 && o.value <= 1.0)) fail(alpha, "alpha must lie in (0, 1]");
      if (YAML::Node form = e["form"]) {
        const std::string f = as_string(form, "form");
        if (f == "nonlinear") o.form = RatioForm::nonlinear;
        else if (f == "linear") o.form = RatioForm::linear;
        else fail(form, "form must be 'nonlinear' or 'linear'");
      }
    } else {
      fail(e["type"], "observation type must be stock, flow or ratio");
    }
    if (YAML::Node sd = e["sd"]) o.sd = as_positive(sd, "sd");
    p.observations.push_back(o);
  }
}

void parse_noise(const YAML::Node& node, Project& p) {
  check_keys(node, "noise", {"mode", "balance_sd", "data_sd", "balance_opt_out"});
  if (YAML::Node mode = node["mode"]) {
    const std::string m = as_string(mode, "noise mode");
    if (m == "plug-in") p.noise.mode = NoiseMode::plug_in;
    else if (m == "inverse-gamma") p.noise.mode = NoiseMode::inverse_gamma;
    else fail(mode, "noise mode must be 'plug-in' or 'inverse-gamma'");
  }
  if (YAML::Node v = node["balance_sd"]) p.noise.balance_sd = as_positive(v, "balance_sd");
  if (YAML::Node v = node["data_sd"]) p.noise.data_sd = as_positive(v, "data_sd");
  if (YAML::Node v = node["balance_opt_out"]) {
    expect_seq(v, "balance_opt_out");
    for (const YAML::Node& id : v) p.noise.balance_opt_out.push_back(as_string(id, "process id"));
  }
}

void parse_priors(const YAML::Node& node, Project& p) {
  check_keys(node, "priors",
             {"style", "upper", "likelihood_upper", "scale", "reported", "stock_signs", "explicit"});
  PriorSettings& s = p.priors;
  if (YAML::Node style = node["style"]) {
    const std::string v = as_string(style, "prior style");
    if (v == "aluminium") s.style = PriorStyle::aluminium;
    else if (v == "zinc-weak") s.style = PriorStyle::zinc_weak;
    else if (v == "zinc-uninformative") s.style = PriorStyle::zinc_uninformative;
    else if (v == "explicit") s.style = PriorStyle::explicit_only;
    else fail(style, "prior style must be aluminium, zinc-weak, zinc-uninformative or explicit");
  }
  if (YAML::Node v = node["upper"]) s.upper = as_positive(v, "upper");
  if (YAML::Node v = node["likelihood_upper"]) s.likelihood_upper = as_positive(v, "likelihood_upper");
  if (YAML::Node v = node["scale"]) s.scale = as_positive(v, "scale");
  if (YAML::Node v = node["reported"]) s.reported = parse_number_map(v, "priors.reported");
  if (YAML::Node v = node["stock_signs"]) {
    expect_map(v, "priors.stock_signs");
    for (auto it = v.begin(); it != v.end(); ++it) {
      double sign = as_double(it->second, "stock sign");
      if (sign != 1.0 && sign != -1.0) fail(it->second, "stock sign must be 1 or -1");
      s.stock_signs[as_string(it->first, "variable name")] = static_cast<int>(sign);
    }
  }
  if (YAML::Node v = node["explicit"]) {
    expect_map(v, "priors.explicit");
    for (auto it = v.begin(); it != v.end(); ++it) {
      const std::string name = as_string(it->first, "variable name");
      check_keys(it->second, "prior for " + name, {"mu", "sigma"});
      VariablePrior vp;
      vp.mu = as_double(required(it->second, "mu", "prior for " + name), "mu");
      vp.sigma = as_positive(required(it->second, "sigma", "prior for " + name), "sigma");
      if (!s.explicit_priors.emplace(name, vp).second) fail(it->first, "duplicate prior for " + name);
    }
  }
}

void parse_sampler(const YAML::Node& node, Project& p) {
  check_keys(node, "sampler",
             {"chains", "draws", "tune", "target_accept", "max_tree_depth", "seed", "init", "parallel",
              "gradient_check"});
  SamplerConfig& c = p.sampler;
  if (YAML::Node v = node["chains"]) c.chains = as_count<std::size_t>(v, "chains");
  if (YAML::Node v = node["draws"]) c.draws = as_count<std::size_t>(v, "draws");
  if (YAML::Node v = node["tune"]) c.tune = as_count<std::size_t>(v, "tune");
  if (YAML::Node v = node["target_accept"]) c.target_accept = as_double(v, "target_accept");
  if (YAML::Node v = node["max_tree_depth"]) c.max_tree_depth = as_count<int>(v, "max_tree_depth");
  if (YAML::Node v = node["seed"]) c.seed = as_count<std::uint64_t>(v, "seed");
  if (YAML::Node v = node["init"]) {
    const std::string m = as_string(v, "init");
    if (m == "jittered") c.init = InitMode::jittered;
    else if (m == "prior-mode") c.init = InitMode::prior_mode;
    else fail(v, "init must be 'jittered' or 'prior-mode'");
  }
  if (YAML::Node v = node["parallel"]) c.parallel = as_bool(v, "parallel");
  if (YAML::Node v = node["gradient_check"]) c.gradient_check = as_bool(v, "gradient_check");
  try {
    c.validate();
  } catch (const ValidationError& e) {
    fail(node, e.what());
  }
}

void parse_experiment(const YAML::Node& node, Project& p) {
  check_keys(node, "experiment", {"runs", "batch", "seed", "chains", "draws", "tune", "mass"});
  ExperimentSettings& e = p.experiment;
  if (YAML::Node v = node["runs"]) e.runs = as_count<std::size_t>(v, "runs");
  if (YAML::Node v = node["batch"]) e.batch = as_count<std::size_t>(v, "batch");
  if (YAML::Node v = node["seed"]) e.seed = as_count<std::uint64_t>(v, "seed");
  if (YAML::Node v = node["chains"]) e.chains = as_count<std::size_t>(v, "chains");
  if (YAML::Node v = node["draws"]) e.draws = as_count<std::size_t>(v, "draws");
  if (YAML::Node v = node["tune"]) e.tune = as_count<std::size_t>(v, "tune");
  if (YAML::Node v = node["mass"]) {
    e.mass = as_double(v, "mass");
    if (!(e.mass > 0.0 && e.mass < 1.0)) fail(v, "mass must lie in (0, 1)");
  }
  if (e.runs == 0) fail(node, "runs must be positive");
  if (e.batch == 0) fail(node, "batch must be positive");
}

}  // namespace

Project parse_project(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(e.msg, e.mark.line + 1, e.mark.column + 1);
  }
  if (!root || root.IsNull()) throw ParseError("project file is empty", 1, 1);
  Project p;
  try {
    check_keys(root, "project", {"units", "system", "observations", "noise", "priors", "sampler", "truth", "experiment"});
    if (YAML::Node v = root["units"]) p.units = as_string(v, "units");
    parse_system(required(root, "system", "project"), p);
    if (YAML::Node v = root["observations"]) parse_observations(v, p);
    if (YAML::Node v = root["noise"]) parse_noise(v, p);
    if (YAML::Node v = root["priors"]) parse_priors(v, p);
    if (YAML::Node v = root["sampler"]) parse_sampler(v, p);
    if (YAML::Node v = root["truth"]) p.truth = parse_number_map(v, "truth");
    if (YAML::Node v = root["experiment"]) parse_experiment(v, p);
  } catch (const YAML::Exception& e) {
    throw ParseError(e.msg, e.mark.line + 1, e.mark.column + 1);
  }
  return p;
}

Project load_project(const std::string& path) { return parse_project(read_text(path)); }

namespace {

// Numbers are emitted as plain scalars in shortest round-trip form.
YAML::Emitter& num(YAML::Emitter& out, double v) { return out << format_double(v); }

}  // namespace

std::string dump_project(const Project& p) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  if (!p.units.empty()) out << YAML::Key << "units" << YAML::Value << YAML::DoubleQuoted << p.units;

  out << YAML::Key << "system" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "processes" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : p.system.children) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << YAML::DoubleQuoted << c.id;
    out << YAML::Key << "stock" << YAML::Value << c.has_stock << YAML::EndMap;
  }
  out << YAML::EndSeq;
  if (!p.system.parents.empty()) {
    out << YAML::Key << "parents" << YAML::Value << YAML::BeginSeq;
    for (const auto& pe : p.system.parents) {
      out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << YAML::DoubleQuoted << pe.id;
      out << YAML::Key << "members" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (const auto& m : pe.members) out << YAML::DoubleQuoted << m;
      out << YAML::EndSeq << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  out << YAML::Key << "flows" << YAML::Value << YAML::BeginSeq;
  for (const auto& f : p.system.flows) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "from" << YAML::Value << YAML::DoubleQuoted << f.from;
    out << YAML::Key << "to" << YAML::Value << YAML::DoubleQuoted << f.to << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "observations" << YAML::Value << YAML::BeginSeq;
  for (const auto& o : p.observations) {
    out << YAML::Flow << YAML::BeginMap;
    switch (o.type) {
      case ObservationType::stock:
        out << YAML::Key << "type" << YAML::Value << "stock";
        out << YAML::Key << "process" << YAML::Value << YAML::DoubleQuoted << o.process;
        out << YAML::Key << "value" << YAML::Value;
        num(out, o.value);
        break;
      case ObservationType::flow:
        out << YAML::Key << "type" << YAML::Value << "flow";
        out << YAML::Key << "from" << YAML::Value << YAML::DoubleQuoted << o.from;
        out << YAML::Key << "to" << YAML::Value << YAML::DoubleQuoted << o.to;
        out << YAML::Key << "value" << YAML::Value;
        num(out, o.value);
        break;
      case ObservationType::ratio:
        out << YAML::Key << "type" << YAML::Value << "ratio";
        out << YAML::Key << "from" << YAML::Value << YAML::DoubleQuoted << o.from;
        out << YAML::Key << "to" << YAML::Value << YAML::DoubleQuoted << o.to;
        out << YAML::Key << "alpha" << YAML::Value;
        num(out, o.value);
        if (o.form == RatioForm::linear) out << YAML::Key << "form" << YAML::Value << "linear";
        break;
    }
    if (o.sd) {
      out << YAML::Key << "sd" << YAML::Value;
      num(out, *o.sd);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << (p.noise.mode == NoiseMode::plug_in ? "plug-in" : "inverse-gamma");
  out << YAML::Key << "balance_sd" << YAML::Value;
  num(out, p.noise.balance_sd);
  if (p.noise.data_sd) {
    out << YAML::Key << "data_sd" << YAML::Value;
    num(out, *p.noise.data_sd);
  }
  if (!p.noise.balance_opt_out.empty()) {
    out << YAML::Key << "balance_opt_out" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& id : p.noise.balance_opt_out) out << YAML::DoubleQuoted << id;
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;

  const PriorSettings& s = p.priors;
  out << YAML::Key << "priors" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "style" << YAML::Value << to_string(s.style);
  out << YAML::Key << "upper" << YAML::Value;
  num(out, s.upper);
  out << YAML::Key << "likelihood_upper" << YAML::Value;
  num(out, s.likelihood_upper);
  if (s.scale) {
    out << YAML::Key << "scale" << YAML::Value;
    num(out, *s.scale);
  }
  if (!s.reported.empty()) {
    out << YAML::Key << "reported" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : s.reported) {
      out << YAML::Key << YAML::DoubleQuoted << k << YAML::Value;
      num(out, v);
    }
    out << YAML::EndMap;
  }
  if (!s.stock_signs.empty()) {
    out << YAML::Key << "stock_signs" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : s.stock_signs) out << YAML::Key << YAML::DoubleQuoted << k << YAML::Value << v;
    out << YAML::EndMap;
  }
  if (!s.explicit_priors.empty()) {
    out << YAML::Key << "explicit" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : s.explicit_priors) {
      out << YAML::Key << YAML::DoubleQuoted << k << YAML::Value << YAML::Flow << YAML::BeginMap;
      out << YAML::Key << "mu" << YAML::Value;
      num(out, v.mu);
      out << YAML::Key << "sigma" << YAML::Value;
      num(out, v.sigma);
      out << YAML::EndMap;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  const SamplerConfig& c = p.sampler;
  out << YAML::Key << "sampler" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "chains" << YAML::Value << c.chains;
  out << YAML::Key << "draws" << YAML::Value << c.draws;
  out << YAML::Key << "tune" << YAML::Value << c.tune;
  out << YAML::Key << "target_accept" << YAML::Value;
  num(out, c.target_accept);
  out << YAML::Key << "max_tree_depth" << YAML::Value << c.max_tree_depth;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "init" << YAML::Value << (c.init == InitMode::jittered ? "jittered" : "prior-mode");
  out << YAML::Key << "parallel" << YAML::Value << c.parallel;
  out << YAML::Key << "gradient_check" << YAML::Value << c.gradient_check;
  out << YAML::EndMap;

  if (!p.truth.empty()) {
    out << YAML::Key << "truth" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : p.truth) {
      out << YAML::Key << YAML::DoubleQuoted << k << YAML::Value;
      num(out, v);
    }
    out << YAML::EndMap;
  }

  const ExperimentSettings& e = p.experiment;
  out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "runs" << YAML::Value << e.runs;
  out << YAML::Key << "batch" << YAML::Value << e.batch;
  out << YAML::Key << "seed" << YAML::Value << e.seed;
  out << YAML::Key << "chains" << YAML::Value << e.chains;
  out << YAML::Key << "draws" << YAML::Value << e.draws;
  out << YAML::Key << "tune" << YAML::Value << e.tune;
  out << YAML::Key << "mass" << YAML::Value;
  num(out, e.mass);
  out << YAML::EndMap;

  out << YAML::EndMap;
  if (!out.good()) throw std::runtime_error("YAML emitter error: " + out.GetLastError());
  return std::string(out.c_str()) + "\n";
}

namespace {

std::size_t lookup(const VariableIndex& index, const std::string& name, const std::string& where) {
  auto i = index.find(name);
  if (!i) throw ValidationError(where + ": unknown variable " + name);
  return *i;
}

}  // namespace

AssembledModel assemble(const Project& p) {
  AssembledModel m;
  m.units = p.units;
  m.graph = build_graph(p.system);
  const VariableIndex& index = m.graph.index();

  for (const auto& o : p.observations) {
    const double sd = o.sd.value_or(1.0);
    switch (o.type) {
      case ObservationType::stock: m.rows.push_back(stock_row(m.graph, o.process, o.value, sd)); break;
      case ObservationType::flow: m.rows.push_back(flow_row(m.graph, o.from, o.to, o.value, sd)); break;
      case ObservationType::ratio: m.rows.push_back(ratio_row(m.graph, o.from, o.to, o.value, sd, o.form)); break;
    }
  }
  m.data_count = m.rows.size();
  for (const auto& id : p.noise.balance_opt_out) {
    if (!m.graph.contains(id) || m.graph.is_parent(id))
      throw ValidationError("balance_opt_out: " + id + " is not a child process");
  }
  for (auto& row : balance_rows(m.graph, p.noise.balance_sd, p.noise.balance_opt_out)) m.rows.push_back(row);

  m.noise = plug_in_noise(m.rows, p.noise.mode, p.noise.balance_sd);
  for (std::size_t i = 0; i < m.data_count; ++i) {
    std::optional<double> sd = p.observations[i].sd ? p.observations[i].sd : p.noise.data_sd;
    if (!sd) continue;
    m.noise.tau[i] = *sd;
    if (m.noise.hyper[i]) m.noise.hyper[i] = InverseGammaPrior{4.0, 3.0 * *sd};
  }
  m.rows = with_noise(m.rows, m.noise);
  m.compiled = compile(m.graph, m.rows, p.priors.likelihood_upper);

  // Reports: explicit list, or direct observations of single variables.
  const PriorSettings& s = p.priors;
  std::vector<std::optional<double>> reported(index.size());
  if (!s.reported.empty()) {
    for (const auto& [name, v] : s.reported) reported[lookup(index, name, "priors.reported")] = v;
  } else {
    for (std::size_t i = 0; i < m.data_count; ++i) {
      const ObservationRow& row = m.rows[i];
      if ((row.kind != RowKind::stock_obs && row.kind != RowKind::flow_obs) || row.terms.size() != 1) continue;
      auto& slot = reported[row.terms.front().index];
      if (!slot) slot = row.value;
    }
  }

  switch (s.style) {
    case PriorStyle::aluminium: m.prior = elicit_aluminium_style(index, reported, s.upper); break;
    case PriorStyle::zinc_weak:
    case PriorStyle::zinc_uninformative: {
      ZincOptions opt;
      opt.mode = s.style == PriorStyle::zinc_weak ? ZincMode::weakly : ZincMode::uninformative;
      if (s.scale) {
        opt.scale = *s.scale;
      } else if (std::all_of(reported.begin(), reported.end(), [](const auto& r) { return r.has_value(); })) {
        opt.scale = mean_absolute_value(reported);
      }
      if (!s.stock_signs.empty()) {
        opt.stock_signs.assign(index.stock_count(), 0);
        for (const auto& [name, sign] : s.stock_signs) {
          std::size_t i = lookup(index, name, "priors.stock_signs");
          if (index.is_flow(i)) throw ValidationError("priors.stock_signs: " + name + " is not a stock");
          opt.stock_signs[i] = sign;
        }
      }
      m.prior = elicit_zinc_style(index, reported, opt, s.upper);
      break;
    }
    case PriorStyle::explicit_only:
      m.prior.stock_count = index.stock_count();
      m.prior.upper = s.upper;
      m.prior.variables.assign(index.size(), VariablePrior{});
      for (std::size_t i = 0; i < index.size(); ++i) {
        if (!s.explicit_priors.count(index.name(i)))
          throw ValidationError("explicit priors: no prior given for " + index.name(i));
      }
      break;
  }
  for (const auto& [name, vp] : s.explicit_priors) m.prior.variables[lookup(index, name, "priors.explicit")] = vp;
  m.prior.validate();

  if (!p.truth.empty()) {
    if (p.truth.size() != index.size()) throw ValidationError("truth must give a value for every variable");
    m.truth = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index.size()));
    for (const auto& [name, v] : p.truth) m.truth(static_cast<Eigen::Index>(lookup(index, name, "truth"))) = v;
  }
  return m;
}

LogPosterior AssembledModel::posterior() const {
  LogPosterior lp(compiled, prior, noise);
  lp.set_variable_names(graph.index().names());
  return lp;
}

Fixture AssembledModel::fixture() const {
  Fixture f;
  f.units = units;
  f.graph = graph;
  f.data.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(data_count));
  f.balance.assign(rows.begin() + static_cast<std::ptrdiff_t>(data_count), rows.end());
  f.prior = prior;
  f.truth = truth;
  f.likelihood_upper = compiled.likelihood_upper;
  return f;
}

Project project_from_fixture(const Fixture& f) {
  Project p;
  p.units = f.units;
  p.system = f.graph.definition();
  for (const ObservationRow& row : f.data) {
    ObservationEntry o;
    switch (row.kind) {
      case RowKind::ratio:
        o.type = ObservationType::ratio;
        o.from = row.from;
        o.to = row.to;
        o.value = row.alpha;
        o.form = row.ratio_form;
        break;
      case RowKind::mass_balance: throw ValidationError("fixture data contains a balance row");
      default:
        if (!row.process.empty()) {
          o.type = ObservationType::stock;
          o.process = row.process;
        } else {
          o.type = ObservationType::flow;
          o.from = row.from;
          o.to = row.to;
        }
        o.value = row.value;
    }
    o.sd = row.noise_sd;
    p.observations.push_back(o);
  }
  std::set<std::string> balanced;
  for (const ObservationRow& row : f.balance) balanced.insert(row.process);
  if (!f.balance.empty()) p.noise.balance_sd = f.balance.front().noise_sd;
  for (const auto& id : f.graph.child_ids())
    if (!balanced.count(id)) p.noise.balance_opt_out.push_back(id);

  const VariableIndex& index = f.graph.index();
  p.priors.style = PriorStyle::explicit_only;
  p.priors.upper = f.prior.upper;
  p.priors.likelihood_upper = f.likelihood_upper;
  for (std::size_t i = 0; i < index.size(); ++i) p.priors.explicit_priors[index.name(i)] = f.prior.variables[i];
  for (Eigen::Index i = 0; i < f.truth.size(); ++i) p.truth[index.name(static_cast<std::size_t>(i))] = f.truth(i);
  return p;
}

}  // namespace bmfa
