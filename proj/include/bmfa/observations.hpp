#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmfa/system_model.hpp"

namespace bmfa {

enum class RowKind { stock_obs, flow_obs, aggregate_obs, mass_balance, ratio };

/// Likelihood family of a row. Flow data (direct or aggregate) use a normal
/// truncated to [0, L']; everything else is a plain normal.
enum class Family { normal, truncated_normal };

enum class RatioForm { nonlinear, linear };

std::string to_string(RowKind kind);

struct Term {
  std::size_t index;
  double coeff;
};

/// One datum or physical constraint. Built through the factory functions
/// below, which resolve process ids against a graph.
struct ObservationRow {
  RowKind kind = RowKind::stock_obs;
  Family family = Family::normal;
  std::string label;
  std::vector<Term> terms;  // linear coefficients; unused by nonlinear ratio rows
  double value = 0.0;
  double noise_sd = 1.0;

  // Targets as given, for provenance and serialization.
  std::string process;
  std::string from;
  std::string to;

  // Ratio rows only.
  RatioForm ratio_form = RatioForm::nonlinear;
  std::size_t numerator = 0;
  std::vector<std::size_t> denominator;  // all outflows of the source, numerator included
  double alpha = 0.0;

  bool is_linear() const { return kind != RowKind::ratio || ratio_form == RatioForm::linear; }
};

/// Observed stock change. A parent process yields an aggregate row summing
/// the stocks of its children.
ObservationRow stock_row(const SystemGraph& graph, const std::string& process, double value, double noise_sd);

/// Observed flow. Parent endpoints yield an aggregate row.
ObservationRow flow_row(const SystemGraph& graph, const std::string& from, const std::string& to, double value,
                        double noise_sd);

/// Flow between expanded process sets: +1 on every existing child arc.
ObservationRow aggregate_row(const SystemGraph& graph, const std::string& from, const std::string& to, double value,
                             double noise_sd);

/// S_child - inflows + outflows = 0.
ObservationRow mass_balance_row(const SystemGraph& graph, const std::string& child, double noise_sd = 0.5);

/// Transfer coefficient alpha of arc from->to relative to all outflows of `from`.
ObservationRow ratio_row(const SystemGraph& graph, const std::string& from, const std::string& to, double alpha,
                         double noise_sd, RatioForm form = RatioForm::nonlinear);

/// Balance rows for every child process not listed in `opt_out`, in child-id order.
std::vector<ObservationRow> balance_rows(const SystemGraph& graph, double noise_sd = 0.5,
                                         std::span<const std::string> opt_out = {});

struct RatioSpec {
  std::size_t numerator;
  std::vector<std::size_t> denominator;
  double alpha;
};

/// Linear rows first (design matrix X), nonlinear ratio rows after; Y, tau and
/// the per-row metadata cover both blocks in that order.
struct CompiledModel {
  std::size_t p = 0;
  Eigen::MatrixXd X;
  Eigen::VectorXd Y;
  Eigen::VectorXd tau;
  std::vector<RatioSpec> ratio_specs;
  std::vector<Family> family;
  std::vector<RowKind> kind;
  std::vector<std::string> labels;
  std::vector<std::size_t> row_provenance;  // index into the input row list
  double likelihood_upper = 1e4;            // L'

  std::size_t n() const { return static_cast<std::size_t>(Y.size()); }
  std::size_t n_linear() const { return static_cast<std::size_t>(X.rows()); }
};

CompiledModel compile(const SystemGraph& graph, std::span<const ObservationRow> rows, double likelihood_upper = 1e4);

/// U_num / sum(U_den). Throws NumericalError when the denominator is not positive.
double eval_ratio(const Eigen::VectorXd& theta, const RatioSpec& spec);

/// Mean of every compiled row at theta: X theta for linear rows, R(theta) for ratio rows.
Eigen::VectorXd row_means(const CompiledModel& model, const Eigen::VectorXd& theta);

}  // namespace bmfa
