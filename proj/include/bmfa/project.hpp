#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmfa/fixtures.hpp"
#include "bmfa/observations.hpp"
#include "bmfa/posterior_core.hpp"
#include "bmfa/priors.hpp"
#include "bmfa/sampler.hpp"
#include "bmfa/system_model.hpp"

namespace bmfa {

enum class ObservationType { stock, flow, ratio };

/// One data row as written in a project file. A parent process in `process`,
/// `from` or `to` turns the row into an aggregate observation.
struct ObservationEntry {
  ObservationType type = ObservationType::flow;
  std::string process;
  std::string from;
  std::string to;
  double value = 0.0;              // mass per period, or alpha for ratio rows
  std::optional<double> sd;        // overrides the noise rule for this row
  RatioForm form = RatioForm::nonlinear;

  bool operator==(const ObservationEntry&) const = default;
};

struct NoiseSettings {
  NoiseMode mode = NoiseMode::plug_in;
  double balance_sd = 0.5;
  std::optional<double> data_sd;   // replaces the plug-in rule for every data row
  std::vector<std::string> balance_opt_out;

  bool operator==(const NoiseSettings&) const = default;
};

enum class PriorStyle { aluminium, zinc_weak, zinc_uninformative, explicit_only };
std::string to_string(PriorStyle s);

struct PriorSettings {
  PriorStyle style = PriorStyle::aluminium;
  double upper = kDefaultMassBound;             // L
  double likelihood_upper = kDefaultMassBound;  // L'
  std::optional<double> scale;                  // uninformative magnitude; default: mean |report|
  /// Reported values by variable name. When empty, direct (non-aggregate)
  /// stock and flow observations serve as reports.
  std::map<std::string, double> reported;
  std::map<std::string, int> stock_signs;
  /// Per-variable priors applied after the style rule (all variables for explicit_only).
  std::map<std::string, VariablePrior> explicit_priors;

  bool operator==(const PriorSettings&) const;
};

struct ExperimentSettings {
  std::size_t runs = 50;
  std::size_t batch = 5;
  std::uint64_t seed = 0;
  std::size_t chains = 2;
  std::size_t draws = 1000;
  std::size_t tune = 1000;
  double mass = 0.95;

  bool operator==(const ExperimentSettings&) const = default;
};

struct Project {
  std::string units;
  SystemDefinition system;
  std::vector<ObservationEntry> observations;
  NoiseSettings noise;
  PriorSettings priors;
  SamplerConfig sampler;
  std::map<std::string, double> truth;
  ExperimentSettings experiment;
};

/// Parses project text. Throws ParseError (with 1-based line and column) on
/// malformed YAML, unknown keys, wrong types and bad values.
Project parse_project(const std::string& text);
Project load_project(const std::string& path);

/// Canonical YAML; parse_project(dump_project(p)) dumps back to the same text.
std::string dump_project(const Project& project);

/// Everything needed for inference, built from a project.
struct AssembledModel {
  std::string units;
  SystemGraph graph;
  std::vector<ObservationRow> rows;  // data rows in file order, then balance rows
  std::size_t data_count = 0;
  NoisePriorSpec noise;              // indexed like `rows`
  PriorSpec prior;
  CompiledModel compiled;
  Eigen::VectorXd truth;             // empty without a truth section

  std::size_t balance_count() const { return rows.size() - data_count; }
  LogPosterior posterior() const;
  /// Fixture view for the experiment drivers (requires a truth).
  Fixture fixture() const;
};

AssembledModel assemble(const Project& project);

/// Project that reproduces a fixture: same graph, data, noise and explicit priors.
Project project_from_fixture(const Fixture& fixture);

}  // namespace bmfa
