#include "bmfa/system_model.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "bmfa/error.hpp"

namespace bmfa {

namespace {

std::string arc_label(const FlowArc& arc) { return arc.from + "->" + arc.to; }

}  // namespace

VariableIndex::VariableIndex(std::vector<std::string> stock_processes, std::vector<FlowArc> flow_arcs)
    : stocks_(std::move(stock_processes)), flows_(std::move(flow_arcs)) {
  std::sort(stocks_.begin(), stocks_.end());
  std::sort(flows_.begin(), flows_.end());
  for (std::size_t i = 0; i < size(); ++i) by_name_.emplace(name(i), i);
}

std::optional<std::size_t> VariableIndex::stock(std::string_view process) const {
  auto it = std::lower_bound(stocks_.begin(), stocks_.end(), process);
  if (it == stocks_.end() || *it != process) return std::nullopt;
  return static_cast<std::size_t>(it - stocks_.begin());
}

std::optional<std::size_t> VariableIndex::flow(std::string_view from, std::string_view to) const {
  const FlowArc key{std::string(from), std::string(to)};
  auto it = std::lower_bound(flows_.begin(), flows_.end(), key);
  if (it == flows_.end() || *it != key) return std::nullopt;
  return stocks_.size() + static_cast<std::size_t>(it - flows_.begin());
}

std::string VariableIndex::name(std::size_t i) const {
  if (i < stocks_.size()) return "S:" + stocks_[i];
  const FlowArc& arc = flows_.at(i - stocks_.size());
  return "U:" + arc.from + "->" + arc.to;
}

std::vector<std::string> VariableIndex::names() const {
  std::vector<std::string> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(name(i));
  return out;
}

std::optional<std::size_t> VariableIndex::find(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

bool SystemGraph::contains(std::string_view id) const { return processes_.find(id) != processes_.end(); }

bool SystemGraph::is_parent(std::string_view id) const { return process(id).kind == ProcessKind::parent; }

const Process& SystemGraph::process(std::string_view id) const {
  auto it = processes_.find(id);
  if (it == processes_.end()) throw ValidationError("unknown process '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> SystemGraph::expand_parent(std::string_view id) const {
  const Process& p = process(id);
  if (p.kind == ProcessKind::child) return {p.id};
  return p.children;
}

bool SystemGraph::has_stock(std::string_view id) const {
  const Process& p = process(id);
  if (p.kind == ProcessKind::child) return p.has_stock;
  return std::any_of(p.children.begin(), p.children.end(),
                     [&](const std::string& c) { return process(c).has_stock; });
}

std::vector<FlowArc> SystemGraph::inflows(std::string_view child) const {
  std::vector<FlowArc> out;
  for (const FlowArc& arc : arcs())
    if (arc.to == child) out.push_back(arc);
  return out;
}

std::vector<FlowArc> SystemGraph::outflows(std::string_view child) const {
  std::vector<FlowArc> out;
  for (const FlowArc& arc : arcs())
    if (arc.from == child) out.push_back(arc);
  return out;
}

SystemDefinition SystemGraph::definition() const {
  SystemDefinition def;
  for (const std::string& id : child_ids_) def.children.push_back({id, process(id).has_stock});
  for (const std::string& id : parent_ids_) def.parents.push_back({id, process(id).children});
  def.flows = arcs();
  return def;
}

SystemGraph build_graph(const SystemDefinition& spec) {
  SystemGraph g;

  for (const auto& c : spec.children) {
    if (c.id.empty()) throw ValidationError("process id must not be empty");
    Process p{c.id, ProcessKind::child, {}, c.has_stock};
    if (!g.processes_.emplace(c.id, std::move(p)).second)
      throw ValidationError("duplicate process id '" + c.id + "'");
    g.child_ids_.push_back(c.id);
  }

  std::map<std::string, const SystemDefinition::ParentEntry*, std::less<>> parents;
  for (const auto& p : spec.parents) {
    if (p.id.empty()) throw ValidationError("process id must not be empty");
    if (g.processes_.count(p.id) || !parents.emplace(p.id, &p).second)
      throw ValidationError("duplicate process id '" + p.id + "'");
    if (p.members.empty()) throw ValidationError("parent process '" + p.id + "' has no children");
  }

  // Flatten containment depth-first; grey marks detect cycles.
  enum class Mark { white, grey, black };
  std::map<std::string, Mark, std::less<>> mark;
  std::map<std::string, std::set<std::string>, std::less<>> flat;
  std::function<const std::set<std::string>&(const std::string&)> flatten =
      [&](const std::string& id) -> const std::set<std::string>& {
    Mark& m = mark[id];
    if (m == Mark::black) return flat[id];
    if (m == Mark::grey) throw ValidationError("containment cycle through parent process '" + id + "'");
    m = Mark::grey;
    std::set<std::string> members;
    for (const std::string& member : parents.at(id)->members) {
      if (member == id) throw ValidationError("containment cycle through parent process '" + id + "'");
      if (g.processes_.count(member)) {
        members.insert(member);
      } else if (parents.count(member)) {
        const auto& sub = flatten(member);
        members.insert(sub.begin(), sub.end());
      } else {
        throw ValidationError("parent process '" + id + "' lists unknown member '" + member + "'");
      }
    }
    mark[id] = Mark::black;
    return flat[id] = std::move(members);
  };
  for (const auto& [id, entry] : parents) flatten(id);

  // Child sets must form a nested (laminar) family.
  for (auto a = flat.begin(); a != flat.end(); ++a) {
    for (auto b = std::next(a); b != flat.end(); ++b) {
      std::vector<std::string> common;
      std::set_intersection(a->second.begin(), a->second.end(), b->second.begin(), b->second.end(),
                            std::back_inserter(common));
      if (common.empty()) continue;
      if (common.size() != a->second.size() && common.size() != b->second.size())
        throw ValidationError("parent processes '" + a->first + "' and '" + b->first +
                              "' share children without one containing the other");
    }
  }

  for (auto& [id, members] : flat) {
    g.processes_.emplace(id, Process{id, ProcessKind::parent, {members.begin(), members.end()}, false});
    g.parent_ids_.push_back(id);
  }
  for (auto& id : g.parent_ids_) g.processes_.at(id).has_stock = g.has_stock(id);

  std::set<FlowArc> seen;
  for (const FlowArc& arc : spec.flows) {
    for (const std::string* end : {&arc.from, &arc.to}) {
      auto it = g.processes_.find(*end);
      if (it == g.processes_.end())
        throw ValidationError("flow " + arc_label(arc) + " references unknown process '" + *end + "'");
      if (it->second.kind == ProcessKind::parent)
        throw ValidationError("flow " + arc_label(arc) + " has parent process '" + *end +
                              "' as an endpoint; flows must connect child processes");
    }
    if (arc.from == arc.to) throw ValidationError("flow " + arc_label(arc) + " is a self-loop");
    if (!seen.insert(arc).second) throw ValidationError("duplicate flow " + arc_label(arc));
  }

  std::sort(g.child_ids_.begin(), g.child_ids_.end());
  std::sort(g.parent_ids_.begin(), g.parent_ids_.end());
  std::vector<std::string> stocks;
  for (const std::string& id : g.child_ids_)
    if (g.processes_.at(id).has_stock) stocks.push_back(id);
  g.index_ = VariableIndex(std::move(stocks), {seen.begin(), seen.end()});
  return g;
}

}  // namespace bmfa
