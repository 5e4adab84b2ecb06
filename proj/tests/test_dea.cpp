#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "frontier_match/dea.hpp"
#include "oracles.hpp"

using namespace frontier_match;

namespace {

dea::FrontierSample make_sample(std::vector<dea::FrontierUnit> units,
                                dea::Scope scope = dea::Scope::common,
                                std::vector<std::string> groups = {}) {
  dea::FrontierSample s;
  s.units = std::move(units);
  s.n_inputs = s.units.front().inputs.size();
  s.n_outputs = s.units.front().outputs.size();
  s.scope = scope;
  s.groups = std::move(groups);
  return s;
}

}  // namespace

TEST_CASE("a unit evaluated against itself is fully efficient", "[dea]") {
  const dea::FrontierUnit u{"A", {100, 50}, {90, 40}};
  const auto s = make_sample({u});
  const auto score = dea::solve_envelopment(u, s);
  CHECK(score.score == 1.0);
  CHECK(score.binding_peers == std::vector<std::string>{"A"});
}

TEST_CASE("a dominated clone with doubled inputs scores one half", "[dea]") {
  const dea::FrontierUnit a{"A", {1, 1}, {1, 1}};
  const dea::FrontierUnit b{"B", {2, 2}, {1, 1}};
  const auto s = make_sample({a, b});
  const auto score = dea::solve_envelopment(b, s);
  CHECK(score.score == Catch::Approx(0.5).margin(1e-12));
  CHECK(score.binding_peers == std::vector<std::string>{"A"});
}

TEST_CASE("three-unit mix matches the enumeration oracle value 0.75", "[dea]") {
  const dea::FrontierUnit a{"A", {1, 2}, {2, 1}};
  const dea::FrontierUnit b{"B", {2, 1}, {1, 2}};
  const dea::FrontierUnit c{"C", {2, 2}, {1.5, 1.5}};
  const auto s = make_sample({a, b, c});
  const auto score = dea::solve_envelopment(c, s);
  CHECK(score.score == Catch::Approx(0.75).margin(1e-9));
  const auto oracle = oracles::envelopment_vertex_oracle(c, s.units, 2, 2);
  REQUIRE(oracle.has_value());
  CHECK(*oracle == Catch::Approx(0.75).margin(1e-9));
}

TEST_CASE("an undominated target outside the reference set is infeasible", "[dea]") {
  const dea::FrontierUnit a{"A", {5, 5}, {1, 1}};
  const dea::FrontierUnit star{"S", {1, 1}, {10, 10}};
  const auto s = make_sample({a});
  CHECK_THROWS_AS(dea::solve_envelopment(star, s), numeric_error);
}

TEST_CASE("every non-empty sample attains the frontier", "[dea]") {
  std::mt19937_64 eng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const auto units = oracles::random_units(eng, 1 + rep % 9, 2, 2);
    const auto scores = dea::score_all(make_sample(units));
    bool any_efficient = false;
    for (const auto& s : scores) any_efficient |= s.score == 1.0;
    CHECK(any_efficient);
  }
}

TEST_CASE("two identical groups score the same under both scopes", "[dea]") {
  std::mt19937_64 eng(12);
  auto units = oracles::random_units(eng, 5, 2, 2);
  std::vector<dea::FrontierUnit> twice = units;
  std::vector<std::string> groups(5, "g0");
  for (auto u : units) {
    u.unit_id += "_dup";
    twice.push_back(u);
    groups.push_back("g1");
  }
  const auto common = dea::score_all(make_sample(twice));
  const auto split = dea::score_all(make_sample(twice, dea::Scope::by_group, groups));
  for (std::size_t i = 0; i < twice.size(); ++i)
    CHECK(split[i].score == Catch::Approx(common[i].score).margin(1e-9));
}

TEST_CASE("six-unit fixture: separate frontiers dominate the common one", "[dea]") {
  std::mt19937_64 eng(13);
  const auto units = oracles::random_units(eng, 6, 2, 2);
  std::vector<std::string> groups = {"a", "a", "a", "b", "b", "b"};
  const auto common = dea::score_all(make_sample(units));
  const auto split = dea::score_all(make_sample(units, dea::Scope::by_group, groups));
  for (std::size_t i = 0; i < units.size(); ++i) {
    CHECK(split[i].score >= common[i].score - 1e-9);
    // oracle agreement on both scopes
    std::vector<dea::FrontierUnit> group_ref;
    for (std::size_t j = 0; j < units.size(); ++j)
      if (groups[j] == groups[i]) group_ref.push_back(units[j]);
    const auto oc = oracles::envelopment_vertex_oracle(units[i], units, 2, 2);
    const auto os = oracles::envelopment_vertex_oracle(units[i], group_ref, 2, 2);
    REQUIRE(oc.has_value());
    REQUIRE(os.has_value());
    const double oc_snap = *oc >= 1.0 - 1e-9 ? 1.0 : *oc;
    const double os_snap = *os >= 1.0 - 1e-9 ? 1.0 : *os;
    CHECK(common[i].score == Catch::Approx(oc_snap).margin(1e-6));
    CHECK(split[i].score == Catch::Approx(os_snap).margin(1e-6));
  }
}

TEST_CASE("random instances match the vertex-enumeration oracle", "[dea]") {
  std::mt19937_64 eng(517);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  for (int rep = 0; rep < 40; ++rep) {
    const auto units = oracles::random_units(eng, size(eng), 2, 2);
    const auto scores = dea::score_all(make_sample(units));
    for (std::size_t i = 0; i < units.size(); ++i) {
      const auto oracle = oracles::envelopment_vertex_oracle(units[i], units, 2, 2);
      REQUIRE(oracle.has_value());
      const double snapped = *oracle >= 1.0 - 1e-9 ? 1.0 : *oracle;
      CHECK(scores[i].score == Catch::Approx(snapped).margin(1e-6));
    }
  }
}

TEST_CASE("scores are bounded, scale-invariant and monotone in the reference",
          "[dea]") {
  std::mt19937_64 eng(991);
  std::uniform_int_distribution<std::size_t> size(3, 12);
  std::uniform_real_distribution<double> scale(0.25, 4.0);
  for (int rep = 0; rep < 40; ++rep) {
    auto units = oracles::random_units(eng, size(eng), 2, 2);
    const auto base = dea::score_all(make_sample(units));
    for (const auto& s : base) {
      CHECK(s.score > 0.0);
      CHECK(s.score <= 1.0);
    }

    // units invariance: rescale one input coordinate for every unit
    const std::size_t coord = eng() % 2;
    const double c = scale(eng);
    auto rescaled = units;
    for (auto& u : rescaled) u.inputs[coord] *= c;
    const auto after = dea::score_all(make_sample(rescaled));
    for (std::size_t i = 0; i < units.size(); ++i)
      CHECK(after[i].score == Catch::Approx(base[i].score).margin(1e-9));

    // CRS ray invariance: rescale one unit's whole input/output bundle
    auto rayed = units;
    const std::size_t pick = eng() % units.size();
    const double cr = scale(eng);
    for (auto& v : rayed[pick].inputs) v *= cr;
    for (auto& v : rayed[pick].outputs) v *= cr;
    const auto after_ray = dea::score_all(make_sample(rayed));
    CHECK(after_ray[pick].score == Catch::Approx(base[pick].score).margin(1e-9));

    // monotonicity: adding a unit weakly decreases every score
    auto extended = units;
    extended.push_back(oracles::random_units(eng, 1, 2, 2)[0]);
    extended.back().unit_id = "EXTRA";
    const auto after_add = dea::score_all(make_sample(extended));
    for (std::size_t i = 0; i < units.size(); ++i)
      CHECK(after_add[i].score <= base[i].score + 1e-9);
  }
}

TEST_CASE("score export uses the documented schema", "[dea]") {
  const dea::FrontierUnit a{"A", {1, 1}, {1, 1}};
  const dea::FrontierUnit b{"B", {2, 2}, {1, 1}};
  const auto s = make_sample({a, b});
  const auto scores = dea::score_all(s);
  std::ostringstream out;
  dea::write_scores_csv(out, scores, s);
  const std::string text = out.str();
  CHECK(text.find("unit_id,scope,group,score,peers") == 0);
  CHECK(text.find("A,common,,1,A") != std::string::npos);
  CHECK(text.find("B,common,,0.5,A") != std::string::npos);
}

TEST_CASE("invalid samples are rejected", "[dea]") {
  dea::FrontierSample empty;
  empty.n_inputs = empty.n_outputs = 2;
  CHECK_THROWS_AS(dea::score_all(empty), validation_error);
  const dea::FrontierUnit bad{"A", {1, -1}, {1, 1}};
  CHECK_THROWS_AS(dea::score_all(make_sample({bad})), validation_error);
  const dea::FrontierUnit a{"A", {1, 1}, {1, 1}};
  auto s = make_sample({a}, dea::Scope::by_group);
  CHECK_THROWS_AS(dea::score_all(s), validation_error);
}
