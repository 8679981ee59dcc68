#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmfa/observations.hpp"
#include "bmfa/priors.hpp"
#include "bmfa/system_model.hpp"

namespace bmfa {

/// A ready-made system with data, balance constraints and priors.
struct Fixture {
  std::string name;
  std::string units;
  SystemGraph graph;
  std::vector<ObservationRow> data;     // declared order
  std::vector<ObservationRow> balance;  // one row per balanced child
  PriorSpec prior;
  Eigen::VectorXd truth;                // empty when there is no ground truth
  double likelihood_upper = kDefaultMassBound;

  /// Data rows followed by balance rows.
  std::vector<ObservationRow> rows() const;
  CompiledModel compile() const;
};

/// Five child processes (stocks on 4 and 5) nested in parents A = {1, 2},
/// B = {A, 3}, C = {4, 5}, with one direct flow, one parent stock and three
/// aggregate flows observed (tau = 1). Priors: aluminium-style, U:1->3 reported.
Fixture small_nested_system();

/// Same topology with a balanced, well-separated truth, every flow far from
/// zero and L = L' = 1e6, so truncation is inactive and the posterior is the
/// conjugate Gaussian to numerical precision.
Fixture small_nested_conjugate();

/// Eight-process zinc-style cycle with 20 variables (6 stocks, 14 flows), a
/// balanced truth with mean absolute value 3.6575, every variable observed
/// once (rows in batch order), tau = 1 on data and balance rows, and the
/// weakly-informative prior elicited from the truth.
Fixture zinc_like();

/// zinc_like() with deliberately mis-centred priors on the Lithosphere pair
/// (S:Lithosphere, U:Lithosphere->Production): mode 17 units from the truth
/// with sigma 7.
Fixture zinc_like_misfit();

/// Names of the variables whose priors zinc_like_misfit() replaces.
std::vector<std::string> zinc_like_misfit_variables();

/// Scrap -> Remelting -> Semis with the remelter receiving 7.1 and shipping
/// 9.3; both stock changes observed consistently. 10% plug-in noise,
/// balance sd 0.5, aluminium-style priors from the reports.
Fixture remelting_imbalance();

}  // namespace bmfa
