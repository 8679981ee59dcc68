#include <doctest.h>

#include <string>

#include "bmfa/error.hpp"
#include "bmfa/fixtures.hpp"
#include "bmfa/project.hpp"
#include "bmfa/report.hpp"

using namespace bmfa;

namespace {

std::string data_file(const std::string& name) { return std::string(BMFA_DATA_DIR) + "/" + name; }

const char* kMinimal = R"(units: Mt/yr
system:
  processes:
    - {id: Scrap, stock: true}
    - {id: Remelting}
    - {id: Semis, stock: true}
  flows:
    - {from: Scrap, to: Remelting}
    - {from: Remelting, to: Semis}
observations:
  - {type: flow, from: Scrap, to: Remelting, value: 7.1}
  - {type: flow, from: Remelting, to: Semis, value: 9.3}
  - {type: ratio, from: Remelting, to: Semis, alpha: 0.9, form: linear, sd: 0.02}
)";

void check_same_model(const AssembledModel& a, const Fixture& f) {
  const CompiledModel c = f.compile();
  CHECK(a.graph.index() == f.graph.index());
  CHECK(a.compiled.X == c.X);
  CHECK(a.compiled.Y == c.Y);
  CHECK(a.compiled.tau == c.tau);
  CHECK(a.compiled.labels == c.labels);
  CHECK(a.compiled.likelihood_upper == c.likelihood_upper);
  REQUIRE(a.prior.size() == f.prior.size());
  for (std::size_t i = 0; i < a.prior.size(); ++i) {
    CHECK(a.prior.variables[i].mu == f.prior.variables[i].mu);
    CHECK(a.prior.variables[i].sigma == f.prior.variables[i].sigma);
  }
  CHECK(a.prior.upper == f.prior.upper);
  CHECK(a.truth.size() == f.truth.size());
  if (f.truth.size()) CHECK(a.truth == f.truth);
}

}  // namespace

TEST_CASE("minimal project parses with defaults") {
  const Project p = parse_project(kMinimal);
  CHECK(p.units == "Mt/yr");
  CHECK(p.system.children.size() == 3);
  CHECK_FALSE(p.system.children[1].has_stock);
  REQUIRE(p.observations.size() == 3);
  CHECK(p.observations[2].type == ObservationType::ratio);
  CHECK(p.observations[2].form == RatioForm::linear);
  CHECK(*p.observations[2].sd == 0.02);
  CHECK(p.priors.style == PriorStyle::aluminium);
  CHECK(p.sampler.draws == SamplerConfig{}.draws);

  const AssembledModel m = assemble(p);
  CHECK(m.data_count == 3);
  CHECK(m.balance_count() == 3);
  // Plug-in noise for rows without an explicit sd.
  CHECK(m.noise.tau[0] == doctest::Approx(0.71));
  CHECK(m.noise.tau[2] == 0.02);
  // Direct observations act as reports.
  CHECK(m.prior.variables[*m.graph.index().find("U:Scrap->Remelting")].mu == 10.0);
  CHECK(m.prior.variables[*m.graph.index().find("S:Scrap")].mu == 1.0);
}

TEST_CASE("dump and parse round-trip") {
  for (const char* name : {"small_nested.yaml", "small_nested_conjugate.yaml", "zinc_like.yaml",
                           "zinc_like_misfit.yaml", "remelting_imbalance.yaml"}) {
    CAPTURE(name);
    const Project p = load_project(data_file(name));
    const std::string once = dump_project(p);
    const Project q = parse_project(once);
    CHECK(dump_project(q) == once);
    CHECK(q.observations == p.observations);
    CHECK(q.priors == p.priors);
    CHECK(q.noise == p.noise);
    CHECK(q.truth == p.truth);
  }
  const Project m = parse_project(kMinimal);
  CHECK(dump_project(parse_project(dump_project(m))) == dump_project(m));
}

TEST_CASE("shipped project files reproduce the fixtures") {
  check_same_model(assemble(load_project(data_file("small_nested.yaml"))), small_nested_system());
  check_same_model(assemble(load_project(data_file("small_nested_conjugate.yaml"))), small_nested_conjugate());
  check_same_model(assemble(load_project(data_file("zinc_like.yaml"))), zinc_like());
  check_same_model(assemble(load_project(data_file("zinc_like_misfit.yaml"))), zinc_like_misfit());
  check_same_model(assemble(load_project(data_file("remelting_imbalance.yaml"))), remelting_imbalance());
}

TEST_CASE("project_from_fixture round-trips through text") {
  const Fixture f = zinc_like_misfit();
  check_same_model(assemble(parse_project(dump_project(project_from_fixture(f)))), f);
}

TEST_CASE("unknown keys are rejected with their location") {
  const std::string text = std::string(kMinimal) + "sampler:\n  chains: 2\n  drawz: 100\n";
  try {
    parse_project(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("drawz") != std::string::npos);
    CHECK(e.line() == 16);
    CHECK(e.column() == 3);
  }
  CHECK_THROWS_AS(parse_project(std::string(kMinimal) + "colour: red\n"), ParseError);
}

TEST_CASE("malformed input reports line and column") {
  try {
    parse_project("system:\n  processes: [ {id: a}\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() >= 2);
  }
  try {
    parse_project("system:\n  processes:\n    - {id: a, stock: maybe}\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_project(""), ParseError);
  CHECK_THROWS_AS(parse_project(std::string(kMinimal) + "sampler: {target_accept: 2}\n"), ParseError);
  CHECK_THROWS_AS(parse_project(std::string(kMinimal) + "experiment: {runs: -1}\n"), ParseError);
}

TEST_CASE("an arc touching a parent is reported by name") {
  const std::string text = R"(system:
  processes: [{id: a}, {id: b}, {id: c}]
  parents: [{id: P, members: [a, b]}]
  flows: [{from: P, to: c}]
)";
  CHECK_THROWS_WITH_AS(assemble(parse_project(text)), doctest::Contains("P->c"), ValidationError);
}

TEST_CASE("a project without observations has only balance rows") {
  const std::string text = R"(system:
  processes: [{id: a, stock: true}, {id: b}]
  flows: [{from: a, to: b}, {from: b, to: a}]
)";
  const AssembledModel m = assemble(parse_project(text));
  CHECK(m.data_count == 0);
  CHECK(m.compiled.n() == 2);
  CHECK(m.prior.variables[0].mu == 1.0);
  CHECK(m.prior.variables[0].sigma == 10.0);
}

TEST_CASE("prior styles and overrides") {
  const std::string base = R"(system:
  processes: [{id: a, stock: true}, {id: b}]
  flows: [{from: a, to: b}, {from: b, to: a}]
observations:
  - {type: stock, process: a, value: -3}
  - {type: flow, from: a, to: b, value: 8}
  - {type: flow, from: b, to: a, value: 5}
)";
  SUBCASE("zinc weak from the observations") {
    const AssembledModel m = assemble(parse_project(base + "priors: {style: zinc-weak}\n"));
    CHECK(m.prior.variables[0].mu == -1.0);
    CHECK(m.prior.variables[1].mu == 10.0);
    CHECK(m.prior.variables[1].sigma == 4.0);
  }
  SUBCASE("zinc uninformative uses the mean absolute report") {
    const AssembledModel m = assemble(parse_project(base + "priors: {style: zinc-uninformative}\n"));
    CHECK(m.prior.variables[0].mu == doctest::Approx(-16.0 / 3.0));
    CHECK(m.prior.variables[2].mu == doctest::Approx(16.0 / 3.0));
  }
  SUBCASE("explicit overrides win") {
    const AssembledModel m =
        assemble(parse_project(base + "priors:\n  explicit:\n    \"U:b->a\": {mu: 2.5, sigma: 0.5}\n"));
    CHECK(m.prior.variables[2].mu == 2.5);
    CHECK(m.prior.variables[2].sigma == 0.5);
  }
  SUBCASE("explicit style needs every variable") {
    CHECK_THROWS_AS(assemble(parse_project(base + "priors:\n  style: explicit\n  explicit: {\"S:a\": {mu: 0, sigma: 1}}\n")),
                    ValidationError);
  }
  SUBCASE("unknown variable names are rejected") {
    CHECK_THROWS_AS(assemble(parse_project(base + "priors: {reported: {\"U:x->y\": 1}}\n")), ValidationError);
    CHECK_THROWS_AS(assemble(parse_project(base + "truth: {\"S:a\": 1}\n")), ValidationError);
  }
  SUBCASE("inverse-gamma noise frees every data row") {
    const AssembledModel m = assemble(parse_project(base + "noise: {mode: inverse-gamma, data_sd: 2}\n"));
    CHECK(m.posterior().tau_dim() == 3);
    CHECK(m.noise.hyper[0]->scale == 6.0);
  }
}

TEST_CASE("CSV helpers") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-0.0) == "0");
  CHECK(parse_double(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(std::isinf(parse_double("-inf")));
  CHECK_THROWS_AS(parse_double("1.0x"), ValidationError);
  CsvTable t({"a", "b"});
  t.row({"x,y", "say \"hi\""});
  const CsvTable back = CsvTable::parse(t.str());
  CHECK(back.data()[0][0] == "x,y");
  CHECK(back.data()[0][1] == "say \"hi\"");
  CHECK_THROWS_AS(t.row({"only one"}), ValidationError);
}
