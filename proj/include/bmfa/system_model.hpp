#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bmfa {

enum class ProcessKind { child, parent };

/// A node of the system. Parents store their flattened child set.
struct Process {
  std::string id;
  ProcessKind kind = ProcessKind::child;
  std::vector<std::string> children;
  bool has_stock = false;
};

/// Directed flow between two child processes.
struct FlowArc {
  std::string from;
  std::string to;

  auto operator<=>(const FlowArc&) const = default;
};

/// Unvalidated system description as read from a project file.
struct SystemDefinition {
  struct ChildEntry {
    std::string id;
    bool has_stock = false;
  };
  struct ParentEntry {
    std::string id;
    std::vector<std::string> members;  // child or parent ids
  };

  std::vector<ChildEntry> children;
  std::vector<ParentEntry> parents;
  std::vector<FlowArc> flows;
};

/// Canonical position of every inferred variable: stock changes first, then
/// flows, each block sorted lexicographically.
class VariableIndex {
 public:
  VariableIndex() = default;
  VariableIndex(std::vector<std::string> stock_processes, std::vector<FlowArc> flow_arcs);

  std::size_t size() const { return stocks_.size() + flows_.size(); }
  std::size_t stock_count() const { return stocks_.size(); }
  std::size_t flow_count() const { return flows_.size(); }
  bool is_flow(std::size_t i) const { return i >= stocks_.size(); }

  std::optional<std::size_t> stock(std::string_view process) const;
  std::optional<std::size_t> flow(std::string_view from, std::string_view to) const;

  /// "S:<process>" or "U:<from>-><to>".
  std::string name(std::size_t i) const;
  std::vector<std::string> names() const;
  std::optional<std::size_t> find(std::string_view name) const;

  const std::vector<std::string>& stock_processes() const { return stocks_; }
  const std::vector<FlowArc>& flow_arcs() const { return flows_; }

  bool operator==(const VariableIndex&) const = default;

 private:
  std::vector<std::string> stocks_;
  std::vector<FlowArc> flows_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
};

/// Validated, immutable system graph.
class SystemGraph {
 public:
  bool contains(std::string_view id) const;
  bool is_parent(std::string_view id) const;
  const Process& process(std::string_view id) const;

  /// Child ids of a parent (sorted), or {id} for a child.
  std::vector<std::string> expand_parent(std::string_view id) const;

  /// Parent stock presence is derived: true if any constituent child has a stock.
  bool has_stock(std::string_view id) const;

  const std::vector<std::string>& child_ids() const { return child_ids_; }
  const std::vector<std::string>& parent_ids() const { return parent_ids_; }
  const std::vector<FlowArc>& arcs() const { return index_.flow_arcs(); }
  const VariableIndex& index() const { return index_; }

  std::vector<FlowArc> inflows(std::string_view child) const;
  std::vector<FlowArc> outflows(std::string_view child) const;

  /// Reconstructs a definition that builds back into an identical graph
  /// (parents are emitted with their flattened child sets).
  SystemDefinition definition() const;

  friend SystemGraph build_graph(const SystemDefinition& spec);

 private:
  std::map<std::string, Process, std::less<>> processes_;
  std::vector<std::string> child_ids_;
  std::vector<std::string> parent_ids_;
  VariableIndex index_;
};

/// Validates a definition, flattens containment and assigns variable indices.
/// Throws ValidationError on duplicate ids, arcs touching parents or unknown
/// processes, self-loops, empty parents, containment cycles and overlapping
/// (non-nested) parents.
SystemGraph build_graph(const SystemDefinition& spec);

}  // namespace bmfa
