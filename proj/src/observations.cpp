#include "bmfa/observations.hpp"

#include <algorithm>
#include <cmath>

#include "bmfa/error.hpp"

namespace bmfa {

namespace {

void check_noise(double sd, const std::string& label) {
  if (!(sd > 0.0) || !std::isfinite(sd))
    throw ValidationError("row " + label + ": noise standard deviation must be positive and finite");
}

std::size_t require_flow(const SystemGraph& graph, const std::string& from, const std::string& to) {
  auto idx = graph.index().flow(from, to);
  if (!idx) throw ValidationError("no flow " + from + "->" + to + " in the system");
  return *idx;
}

void require_child(const SystemGraph& graph, const std::string& id) {
  if (graph.is_parent(id)) throw ValidationError("process '" + id + "' is a parent; expected a child process");
}

}  // namespace

std::string to_string(RowKind kind) {
  switch (kind) {
    case RowKind::stock_obs: return "stock";
    case RowKind::flow_obs: return "flow";
    case RowKind::aggregate_obs: return "aggregate";
    case RowKind::mass_balance: return "balance";
    case RowKind::ratio: return "ratio";
  }
  return "unknown";
}

ObservationRow stock_row(const SystemGraph& graph, const std::string& process, double value, double noise_sd) {
  ObservationRow row;
  row.label = "S:" + process;
  row.process = process;
  row.value = value;
  row.noise_sd = noise_sd;
  row.family = Family::normal;
  check_noise(noise_sd, row.label);
  row.kind = graph.is_parent(process) ? RowKind::aggregate_obs : RowKind::stock_obs;
  for (const std::string& child : graph.expand_parent(process)) {
    if (auto idx = graph.index().stock(child)) row.terms.push_back({*idx, 1.0});
  }
  if (row.terms.empty()) throw ValidationError("process '" + process + "' has no stock to observe");
  return row;
}

ObservationRow flow_row(const SystemGraph& graph, const std::string& from, const std::string& to, double value,
                        double noise_sd) {
  if (graph.is_parent(from) || graph.is_parent(to)) return aggregate_row(graph, from, to, value, noise_sd);
  ObservationRow row;
  row.kind = RowKind::flow_obs;
  row.family = Family::truncated_normal;
  row.label = "U:" + from + "->" + to;
  row.from = from;
  row.to = to;
  row.value = value;
  row.noise_sd = noise_sd;
  check_noise(noise_sd, row.label);
  row.terms.push_back({require_flow(graph, from, to), 1.0});
  return row;
}

ObservationRow aggregate_row(const SystemGraph& graph, const std::string& from, const std::string& to, double value,
                             double noise_sd) {
  if (!graph.is_parent(from) && !graph.is_parent(to))
    throw ValidationError("aggregate flow " + from + "->" + to + " needs a parent endpoint");
  ObservationRow row;
  row.kind = RowKind::aggregate_obs;
  row.family = Family::truncated_normal;
  row.label = "U:" + from + "->" + to;
  row.from = from;
  row.to = to;
  row.value = value;
  row.noise_sd = noise_sd;
  check_noise(noise_sd, row.label);
  const auto sources = graph.expand_parent(from);
  const auto targets = graph.expand_parent(to);
  for (const std::string& s : sources)
    for (const std::string& t : targets)
      if (auto idx = graph.index().flow(s, t)) row.terms.push_back({*idx, 1.0});
  if (row.terms.empty()) throw ValidationError("aggregate flow " + from + "->" + to + " has no constituent flows");
  std::sort(row.terms.begin(), row.terms.end(), [](const Term& a, const Term& b) { return a.index < b.index; });
  return row;
}

ObservationRow mass_balance_row(const SystemGraph& graph, const std::string& child, double noise_sd) {
  require_child(graph, child);
  ObservationRow row;
  row.kind = RowKind::mass_balance;
  row.family = Family::normal;
  row.label = "balance:" + child;
  row.process = child;
  row.value = 0.0;
  row.noise_sd = noise_sd;
  check_noise(noise_sd, row.label);
  const VariableIndex& index = graph.index();
  if (auto s = index.stock(child)) row.terms.push_back({*s, 1.0});
  for (const FlowArc& arc : graph.inflows(child)) row.terms.push_back({*index.flow(arc.from, arc.to), -1.0});
  for (const FlowArc& arc : graph.outflows(child)) row.terms.push_back({*index.flow(arc.from, arc.to), 1.0});
  if (row.terms.empty()) throw ValidationError("process '" + child + "' has neither stock nor flows to balance");
  std::sort(row.terms.begin(), row.terms.end(), [](const Term& a, const Term& b) { return a.index < b.index; });
  return row;
}

ObservationRow ratio_row(const SystemGraph& graph, const std::string& from, const std::string& to, double alpha,
                         double noise_sd, RatioForm form) {
  require_child(graph, from);
  require_child(graph, to);
  ObservationRow row;
  row.kind = RowKind::ratio;
  row.family = Family::normal;
  row.label = "ratio:" + from + "->" + to;
  row.from = from;
  row.to = to;
  row.alpha = alpha;
  row.ratio_form = form;
  row.noise_sd = noise_sd;
  check_noise(noise_sd, row.label);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("row " + row.label + ": ratio must lie in (0, 1]");
  row.numerator = require_flow(graph, from, to);
  for (const FlowArc& arc : graph.outflows(from)) row.denominator.push_back(*graph.index().flow(arc.from, arc.to));
  if (form == RatioForm::nonlinear) {
    row.value = alpha;
  } else {
    // U_num - alpha * sum(U_out) = 0
    row.value = 0.0;
    for (std::size_t idx : row.denominator)
      row.terms.push_back({idx, idx == row.numerator ? 1.0 - alpha : -alpha});
  }
  return row;
}

std::vector<ObservationRow> balance_rows(const SystemGraph& graph, double noise_sd,
                                         std::span<const std::string> opt_out) {
  std::vector<ObservationRow> rows;
  for (const std::string& child : graph.child_ids()) {
    if (std::find(opt_out.begin(), opt_out.end(), child) != opt_out.end()) continue;
    rows.push_back(mass_balance_row(graph, child, noise_sd));
  }
  return rows;
}

CompiledModel compile(const SystemGraph& graph, std::span<const ObservationRow> rows, double likelihood_upper) {
  if (!(likelihood_upper > 0.0)) throw ValidationError("likelihood upper bound must be positive");
  CompiledModel m;
  m.p = graph.index().size();
  m.likelihood_upper = likelihood_upper;

  std::vector<std::size_t> linear, nonlinear;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const ObservationRow& row = rows[r];
    check_noise(row.noise_sd, row.label);
    if (row.is_linear()) {
      bool any = false;
      for (const Term& t : row.terms) {
        if (t.index >= m.p) throw ValidationError("row " + row.label + " references variable outside the system");
        any = any || t.coeff != 0.0;
      }
      if (!any) throw ValidationError("row " + row.label + " is empty");
      linear.push_back(r);
    } else {
      if (row.numerator >= m.p || row.denominator.empty())
        throw ValidationError("ratio row " + row.label + " references variable outside the system");
      for (std::size_t idx : row.denominator)
        if (idx >= m.p) throw ValidationError("ratio row " + row.label + " references variable outside the system");
      nonlinear.push_back(r);
    }
  }

  const std::size_t n = rows.size();
  m.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(linear.size()), static_cast<Eigen::Index>(m.p));
  m.Y.resize(static_cast<Eigen::Index>(n));
  m.tau.resize(static_cast<Eigen::Index>(n));
  std::size_t out = 0;
  auto push_meta = [&](std::size_t r) {
    const ObservationRow& row = rows[r];
    m.Y(static_cast<Eigen::Index>(out)) = row.value;
    m.tau(static_cast<Eigen::Index>(out)) = row.noise_sd;
    m.family.push_back(row.family);
    m.kind.push_back(row.kind);
    m.labels.push_back(row.label);
    m.row_provenance.push_back(r);
    ++out;
  };
  for (std::size_t r : linear) {
    for (const Term& t : rows[r].terms)
      m.X(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(t.index)) += t.coeff;
    push_meta(r);
  }
  for (std::size_t r : nonlinear) {
    m.ratio_specs.push_back({rows[r].numerator, rows[r].denominator, rows[r].alpha});
    push_meta(r);
  }
  return m;
}

double eval_ratio(const Eigen::VectorXd& theta, const RatioSpec& spec) {
  double denom = 0.0;
  for (std::size_t idx : spec.denominator) denom += theta(static_cast<Eigen::Index>(idx));
  if (!(denom > 0.0)) throw NumericalError("transfer-coefficient denominator is not positive");
  return theta(static_cast<Eigen::Index>(spec.numerator)) / denom;
}

Eigen::VectorXd row_means(const CompiledModel& model, const Eigen::VectorXd& theta) {
  Eigen::VectorXd mean(static_cast<Eigen::Index>(model.n()));
  const Eigen::Index nl = static_cast<Eigen::Index>(model.n_linear());
  mean.head(nl) = model.X * theta;
  for (std::size_t k = 0; k < model.ratio_specs.size(); ++k)
    mean(nl + static_cast<Eigen::Index>(k)) = eval_ratio(theta, model.ratio_specs[k]);
  return mean;
}

}  // namespace bmfa
