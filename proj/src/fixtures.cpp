#include "bmfa/fixtures.hpp"

#include <cmath>
#include <map>

#include "bmfa/error.hpp"

namespace bmfa {

namespace {

SystemGraph nested_graph() {
  SystemDefinition def;
  for (const char* id : {"1", "2", "3"}) def.children.push_back({id, false});
  def.children.push_back({"4", true});
  def.children.push_back({"5", true});
  def.parents.push_back({"A", {"1", "2"}});
  def.parents.push_back({"B", {"A", "3"}});
  def.parents.push_back({"C", {"4", "5"}});
  for (auto [from, to] : std::initializer_list<std::pair<const char*, const char*>>{
           {"1", "3"}, {"1", "4"}, {"1", "5"}, {"2", "4"}, {"2", "5"},
           {"3", "4"}, {"3", "5"}, {"4", "1"}, {"4", "2"}, {"4", "3"}})
    def.flows.push_back({from, to});
  return build_graph(def);
}

// Stock changes implied by the flows: inflow minus outflow per stocked child.
void fill_stocks(const SystemGraph& g, Eigen::VectorXd& theta) {
  const VariableIndex& idx = g.index();
  for (std::size_t s = 0; s < idx.stock_count(); ++s) {
    const std::string& p = idx.stock_processes()[s];
    double net = 0.0;
    for (const FlowArc& a : g.inflows(p)) net += theta(static_cast<Eigen::Index>(*idx.flow(a.from, a.to)));
    for (const FlowArc& a : g.outflows(p)) net -= theta(static_cast<Eigen::Index>(*idx.flow(a.from, a.to)));
    theta(static_cast<Eigen::Index>(s)) = net;
  }
}

Eigen::VectorXd flows_to_theta(const SystemGraph& g, const std::map<std::pair<std::string, std::string>, double>& f) {
  const VariableIndex& idx = g.index();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
  for (const auto& [arc, v] : f) {
    const auto i = idx.flow(arc.first, arc.second);
    if (!i) throw ValidationError("fixture flow " + arc.first + "->" + arc.second + " is not in the system");
    theta(static_cast<Eigen::Index>(*i)) = v;
  }
  fill_stocks(g, theta);
  return theta;
}

std::vector<std::optional<double>> as_reports(const Eigen::VectorXd& theta) {
  std::vector<std::optional<double>> out;
  for (Eigen::Index i = 0; i < theta.size(); ++i) out.emplace_back(theta(i));
  return out;
}

SystemGraph zinc_graph() {
  SystemDefinition def;
  def.children = {{"Lithosphere", true}, {"Production", true},   {"F&M", false},     {"Use", true},
                  {"WM", false},         {"Environment", true},  {"ImportExport", true}, {"Unknown", true}};
  def.flows = {{"Lithosphere", "Production"}, {"Production", "F&M"}, {"Production", "ImportExport"},
               {"Production", "Environment"}, {"Production", "Unknown"}, {"F&M", "Use"},
               {"F&M", "WM"},                 {"Use", "WM"},            {"WM", "Production"},
               {"WM", "F&M"},                 {"WM", "Environment"},    {"ImportExport", "WM"},
               {"ImportExport", "F&M"},       {"Unknown", "WM"}};
  return build_graph(def);
}

ObservationRow truth_row(const SystemGraph& g, const std::string& name, const Eigen::VectorXd& truth, double sd) {
  const VariableIndex& idx = g.index();
  const auto i = idx.find(name);
  if (!i) throw ValidationError("fixture variable " + name + " is not in the system");
  const double v = truth(static_cast<Eigen::Index>(*i));
  if (!idx.is_flow(*i)) return stock_row(g, idx.stock_processes()[*i], v, sd);
  const FlowArc& a = idx.flow_arcs()[*i - idx.stock_count()];
  return flow_row(g, a.from, a.to, v, sd);
}

}  // namespace

std::vector<ObservationRow> Fixture::rows() const {
  std::vector<ObservationRow> out = data;
  out.insert(out.end(), balance.begin(), balance.end());
  return out;
}

CompiledModel Fixture::compile() const {
  const std::vector<ObservationRow> all = rows();
  return bmfa::compile(graph, all, likelihood_upper);
}

Fixture small_nested_system() {
  Fixture f;
  f.name = "small-nested";
  f.units = "t/yr";
  f.graph = nested_graph();
  const SystemGraph& g = f.graph;
  f.data = {flow_row(g, "1", "3", 1.7, 1.0), stock_row(g, "C", 11.6, 1.0), flow_row(g, "4", "B", 2.3, 1.0),
            flow_row(g, "B", "C", 10.4, 1.0), flow_row(g, "A", "5", 5.8, 1.0)};
  f.balance = balance_rows(g, 1.0);
  std::vector<std::optional<double>> reports(g.index().size());
  reports[*g.index().find("U:1->3")] = 1.7;
  f.prior = elicit_aluminium_style(g.index(), reports);
  return f;
}

Fixture small_nested_conjugate() {
  Fixture f;
  f.name = "small-nested-conjugate";
  f.units = "t/yr";
  f.graph = nested_graph();
  f.likelihood_upper = 1e6;
  const SystemGraph& g = f.graph;
  // Balanced: process 1 ships 150 and receives 150, process 2 ships and receives 120, and so on.
  f.truth = flows_to_theta(g, {{{"1", "3"}, 60.0}, {{"1", "4"}, 50.0}, {{"1", "5"}, 40.0},
                               {{"2", "4"}, 70.0}, {{"2", "5"}, 50.0}, {{"3", "4"}, 80.0},
                               {{"3", "5"}, 60.0}, {{"4", "1"}, 150.0}, {{"4", "2"}, 120.0},
                               {{"4", "3"}, 80.0}});
  const Eigen::VectorXd& t = f.truth;
  auto at = [&](const char* name) { return t(static_cast<Eigen::Index>(*g.index().find(name))); };
  f.data = {flow_row(g, "1", "3", at("U:1->3") + 0.8, 1.0),
            stock_row(g, "C", at("S:4") + at("S:5") - 1.1, 1.0),
            flow_row(g, "4", "B", at("U:4->1") + at("U:4->2") + at("U:4->3") + 1.4, 1.0),
            flow_row(g, "B", "C",
                     at("U:1->4") + at("U:2->4") + at("U:3->4") + at("U:1->5") + at("U:2->5") + at("U:3->5") - 0.6,
                     1.0),
            flow_row(g, "A", "5", at("U:1->5") + at("U:2->5") + 0.3, 1.0)};
  f.balance = balance_rows(g, 0.5);
  f.prior.stock_count = g.index().stock_count();
  f.prior.upper = 1e6;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const bool flow = g.index().is_flow(static_cast<std::size_t>(i));
    // Modes off the truth by a few units; flows sit at least 6 prior sds above zero.
    const double shift = (i % 3 == 0 ? 4.0 : (i % 3 == 1 ? -3.0 : 2.0));
    f.prior.variables.push_back({t(i) + shift, flow ? 5.0 : 10.0});
  }
  return f;
}

Fixture zinc_like() {
  Fixture f;
  f.name = "zinc-like";
  f.units = "1e5 t/yr";
  f.graph = zinc_graph();
  const SystemGraph& g = f.graph;
  Eigen::VectorXd truth = flows_to_theta(g, {{{"Lithosphere", "Production"}, 13.0},
                                             {{"Production", "F&M"}, 10.5},
                                             {{"Production", "ImportExport"}, 1.26},
                                             {{"Production", "Environment"}, 0.6},
                                             {{"Production", "Unknown"}, 0.02},
                                             {{"F&M", "Use"}, 9.5},
                                             {{"F&M", "WM"}, 2.6},
                                             {{"Use", "WM"}, 3.0},
                                             {{"WM", "Production"}, 2.0},
                                             {{"WM", "F&M"}, 1.5},
                                             {{"WM", "Environment"}, 2.7},
                                             {{"ImportExport", "WM"}, 0.1},
                                             {{"ImportExport", "F&M"}, 0.1},
                                             {{"Unknown", "WM"}, 0.5}});
  // Rescaling keeps every balance exact.
  truth *= kZincMeanAbsolute / truth.cwiseAbs().mean();
  f.truth = truth;
  for (const char* name : {"S:Use", "U:Production->ImportExport", "S:Environment", "U:WM->Production",
                           "U:ImportExport->WM", "U:Unknown->WM", "U:Lithosphere->Production", "S:Production",
                           "U:Production->F&M", "S:Lithosphere", "U:F&M->Use", "S:Unknown",
                           "U:Production->Unknown", "U:F&M->WM", "U:Use->WM", "U:WM->F&M", "S:ImportExport",
                           "U:WM->Environment", "U:ImportExport->F&M", "U:Production->Environment"})
    f.data.push_back(truth_row(g, name, truth, 1.0));
  f.balance = balance_rows(g, 1.0);
  const auto reports = as_reports(truth);
  f.prior = elicit_zinc_style(g.index(), reports, ZincOptions{ZincMode::weakly, kZincMeanAbsolute, {}});
  return f;
}

std::vector<std::string> zinc_like_misfit_variables() { return {"S:Lithosphere", "U:Lithosphere->Production"}; }

Fixture zinc_like_misfit() {
  Fixture f = zinc_like();
  f.name = "zinc-like-misfit";
  for (const std::string& name : zinc_like_misfit_variables()) {
    const std::size_t i = *f.graph.index().find(name);
    const double t = f.truth(static_cast<Eigen::Index>(i));
    f.prior.variables[i] = {t + (t < 0.0 ? -17.0 : 17.0), 7.0};
  }
  return f;
}

Fixture remelting_imbalance() {
  Fixture f;
  f.name = "remelting-imbalance";
  f.units = "Mt/yr";
  SystemDefinition def;
  def.children = {{"Scrap", true}, {"Remelting", false}, {"Semis", true}};
  def.flows = {{"Scrap", "Remelting"}, {"Remelting", "Semis"}};
  f.graph = build_graph(def);
  const SystemGraph& g = f.graph;
  f.data = {flow_row(g, "Scrap", "Remelting", 7.1, 0.71), flow_row(g, "Remelting", "Semis", 9.3, 0.93),
            stock_row(g, "Scrap", -7.1, 0.71), stock_row(g, "Semis", 9.3, 0.93)};
  f.balance = balance_rows(g, 0.5);
  std::vector<std::optional<double>> reports(g.index().size());
  for (const ObservationRow& r : f.data) reports[r.terms.front().index] = r.value;
  f.prior = elicit_aluminium_style(g.index(), reports);
  return f;
}

}  // namespace bmfa
