#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "frontier_match/balance.hpp"
#include "frontier_match/matching.hpp"
#include "oracles.hpp"

using namespace frontier_match;

namespace {

// model with prescribed log-odds (matching only reads log_odds/scores)
pscore::PropensityModel model_from_log_odds(const std::vector<double>& lo) {
  pscore::PropensityModel m;
  m.log_odds.resize(static_cast<Eigen::Index>(lo.size()));
  for (std::size_t i = 0; i < lo.size(); ++i)
    m.log_odds(static_cast<Eigen::Index>(i)) = lo[i];
  m.scores = (1.0 / (1.0 + (-m.log_odds.array()).exp())).matrix();
  m.converged = true;
  return m;
}

double max_abs_smd(const dataset::DesignMatrix& design, const matching::MatchedSample& m) {
  std::vector<const matching::MatchedSample*> ptr{&m};
  const auto rows = balance::covariate_smds(design, ptr);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, std::fabs(r.after.at(0)));
  return worst;
}

}  // namespace

TEST_CASE("an exact log-odds twin is matched at distance zero", "[matching]") {
  const auto design = oracles::make_design({"t1", "c1", "c2"}, {0.7, 0.7, 2.0}, {1, 0, 0});
  const auto model = model_from_log_odds({0.7, 0.7, 2.0});
  const auto m = matching::match_nn(design, model);
  REQUIRE_FALSE(m.pairs.empty());
  CHECK(m.pairs[0].focal_id == "t1");
  CHECK(m.pairs[0].matched_id == "c1");
  CHECK(m.pairs[0].distance == 0.0);
}

TEST_CASE("equidistant controls resolve to the lower contract id", "[matching]") {
  const auto design =
      oracles::make_design({"t1", "c9", "c2"}, {1.0, 1.2, 0.8}, {1, 0, 0});
  const auto model = model_from_log_odds({1.0, 1.2, 0.8});
  const auto m = matching::match_nn(design, model);
  REQUIRE_FALSE(m.pairs.empty());
  CHECK(m.pairs[0].matched_id == "c2");
  CHECK(m.pairs[0].distance == Catch::Approx(0.2));
}

TEST_CASE("greedy matching equals the exhaustive same-order oracle", "[matching]") {
  std::mt19937_64 eng(37);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n_t = 5, n_c = 7;
    std::vector<std::string> ids;
    std::vector<double> lo;
    std::vector<int> t;
    for (std::size_t i = 0; i < n_t + n_c; ++i) {
      ids.push_back("u" + std::to_string(i));
      lo.push_back(gauss(eng));
      t.push_back(i < n_t ? 1 : 0);
    }
    const auto design = oracles::make_design(ids, lo, t);
    const auto model = model_from_log_odds(lo);
    for (bool with_replacement : {false, true}) {
      const auto m = matching::match_nn(design, model, {with_replacement, {}});
      const double inf = std::numeric_limits<double>::infinity();
      const auto t2c = oracles::greedy_nn_oracle(ids, lo, t, true, with_replacement, inf);
      const auto c2t = oracles::greedy_nn_oracle(ids, lo, t, false, with_replacement, inf);
      std::size_t k = 0;
      for (const auto& expected : t2c) {
        REQUIRE(k < m.pairs.size());
        CHECK(m.pairs[k].direction == matching::Direction::treated_to_control);
        CHECK(m.pairs[k].focal_id == expected.focal_id);
        CHECK(m.pairs[k].matched_id == expected.matched_id);
        CHECK(m.pairs[k].distance == Catch::Approx(expected.distance).margin(1e-12));
        ++k;
      }
      for (const auto& expected : c2t) {
        REQUIRE(k < m.pairs.size());
        CHECK(m.pairs[k].direction == matching::Direction::control_to_treated);
        CHECK(m.pairs[k].focal_id == expected.focal_id);
        CHECK(m.pairs[k].matched_id == expected.matched_id);
        ++k;
      }
      CHECK(k == m.pairs.size());
    }
  }
}

TEST_CASE("without replacement no control is consumed twice", "[matching]") {
  std::mt19937_64 eng(41);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::string> ids;
  std::vector<double> lo;
  std::vector<int> t;
  for (std::size_t i = 0; i < 24; ++i) {
    ids.push_back("u" + std::to_string(i));
    lo.push_back(gauss(eng));
    t.push_back(i % 3 == 0 ? 1 : 0);
  }
  const auto design = oracles::make_design(ids, lo, t);
  const auto model = model_from_log_odds(lo);
  const auto without = matching::match_nn(design, model, {false, {}});
  std::set<std::string> seen;
  for (const auto& p : without.pairs) {
    if (p.direction != matching::Direction::treated_to_control) continue;
    CHECK(seen.insert(p.matched_id).second);
  }
  // with replacement the closest control can repeat
  const auto with = matching::match_nn(design, model, {true, {}});
  std::set<std::string> matched;
  std::size_t t2c_pairs = 0;
  for (const auto& p : with.pairs)
    if (p.direction == matching::Direction::treated_to_control) {
      matched.insert(p.matched_id);
      ++t2c_pairs;
    }
  CHECK(matched.size() <= t2c_pairs);
}

TEST_CASE("a caliper leaves distant focals unmatched", "[matching]") {
  const auto design = oracles::make_design({"t1", "t2", "c1", "c2"},
                                           {0.0, 5.0, 0.1, -0.2}, {1, 1, 0, 0});
  const auto model = model_from_log_odds({0.0, 5.0, 0.1, -0.2});
  const auto m = matching::match_nn(design, model, {false, 0.25});
  // sd of log-odds ~ 2.46; threshold ~ 0.61: t2 at distance 4.9 stays unmatched
  bool t2_matched = false;
  for (const auto& p : m.pairs) t2_matched |= p.focal_id == "t2";
  CHECK_FALSE(t2_matched);
  CHECK(std::find(m.unmatched_ids.begin(), m.unmatched_ids.end(), "t2") !=
        m.unmatched_ids.end());
}

TEST_CASE("NN matches are invariant to affine maps of the log-odds", "[matching]") {
  std::mt19937_64 eng(43);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::string> ids;
  std::vector<double> lo, lo_affine;
  std::vector<int> t;
  for (std::size_t i = 0; i < 20; ++i) {
    ids.push_back("u" + std::to_string(i));
    lo.push_back(gauss(eng));
    lo_affine.push_back(3.0 * lo.back() - 1.7);
    t.push_back(i % 2 == 0 ? 1 : 0);
  }
  const auto design = oracles::make_design(ids, lo, t);
  const auto m1 = matching::match_nn(design, model_from_log_odds(lo));
  const auto m2 = matching::match_nn(design, model_from_log_odds(lo_affine));
  REQUIRE(m1.pairs.size() == m2.pairs.size());
  for (std::size_t i = 0; i < m1.pairs.size(); ++i) {
    CHECK(m1.pairs[i].focal_id == m2.pairs[i].focal_id);
    CHECK(m1.pairs[i].matched_id == m2.pairs[i].matched_id);
    CHECK(m2.pairs[i].distance == Catch::Approx(3.0 * m1.pairs[i].distance).margin(1e-9));
  }
}

TEST_CASE("with one covariate any positive weighting reproduces NN", "[matching]") {
  const std::vector<std::string> ids = {"a", "b", "c", "d", "e", "f"};
  const std::vector<double> x = {-1.2, 0.3, 0.9, -0.4, 1.8, 0.2};
  const std::vector<int> t = {1, 1, 1, 0, 0, 0};
  const auto design = oracles::make_design(ids, x, t);
  // log-odds affine in the covariate, as a fitted one-covariate model gives
  std::vector<double> lo;
  for (double v : x) lo.push_back(0.4 + 1.3 * v);
  const auto model = model_from_log_odds(lo);
  const auto nn = matching::match_nn(design, model);
  for (const std::vector<double>& w :
       {std::vector<double>{1.0, 1.0}, {0.2, 1.8}, {1.9, 0.1}}) {
    const auto wm = matching::match_weighted(design, model, w);
    REQUIRE(wm.pairs.size() == nn.pairs.size());
    for (std::size_t i = 0; i < nn.pairs.size(); ++i) {
      CHECK(wm.pairs[i].focal_id == nn.pairs[i].focal_id);
      CHECK(wm.pairs[i].matched_id == nn.pairs[i].matched_id);
    }
  }
}

TEST_CASE("unit weights reproduce Euclidean matching on standardized features",
          "[matching]") {
  std::mt19937_64 eng(47);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::string> ids;
  std::vector<double> x, lo;
  std::vector<int> t;
  for (std::size_t i = 0; i < 16; ++i) {
    ids.push_back("u" + std::to_string(i));
    x.push_back(gauss(eng));
    lo.push_back(gauss(eng));
    t.push_back(i % 2 ? 1 : 0);
  }
  const auto design = oracles::make_design(ids, x, t);
  const auto model = model_from_log_odds(lo);
  const auto wm = matching::match_weighted(design, model, {1.0, 1.0});

  // brute-force greedy on hand-standardized coordinates
  auto standardize = [](std::vector<double> v) {
    std::vector<double> out = v;
    const double mu = stats::mean(v), sd = stats::stddev(v);
    for (auto& e : out) e = (e - mu) / sd;
    return out;
  };
  const auto zx = standardize(x), zlo = standardize(lo);
  std::vector<std::size_t> focal, donors;
  for (std::size_t i = 0; i < ids.size(); ++i) (t[i] ? focal : donors).push_back(i);
  std::sort(focal.begin(), focal.end(), [&](std::size_t a, std::size_t b) {
    if (lo[a] != lo[b]) return lo[a] > lo[b];
    return ids[a] < ids[b];
  });
  std::set<std::size_t> used;
  std::size_t k = 0;
  for (std::size_t f : focal) {
    std::size_t best = SIZE_MAX;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t d : donors) {
      if (used.count(d)) continue;
      const double dist = std::sqrt((zx[f] - zx[d]) * (zx[f] - zx[d]) +
                                    (zlo[f] - zlo[d]) * (zlo[f] - zlo[d]));
      if (dist < best_d || (best != SIZE_MAX && dist == best_d && ids[d] < ids[best])) {
        best = d;
        best_d = dist;
      }
    }
    used.insert(best);
    REQUIRE(k < wm.pairs.size());
    CHECK(wm.pairs[k].focal_id == ids[f]);
    CHECK(wm.pairs[k].matched_id == ids[best]);
    CHECK(wm.pairs[k].distance == Catch::Approx(best_d).margin(1e-12));
    ++k;
  }
}

TEST_CASE("genetic matching is deterministic and never balances worse than NN",
          "[matching]") {
  std::mt19937_64 eng(53);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t n = 30;
  std::vector<std::string> ids;
  std::vector<int> t;
  Eigen::MatrixXd cov(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("u" + std::to_string(i));
    t.push_back(i % 3 == 0 ? 1 : 0);
    cov(static_cast<Eigen::Index>(i), 0) = 1.0;
    cov(static_cast<Eigen::Index>(i), 1) = gauss(eng) + (t.back() ? 0.8 : 0.0);
    cov(static_cast<Eigen::Index>(i), 2) = gauss(eng) + (t.back() ? -0.5 : 0.0);
  }
  dataset::DesignMatrix design;
  design.covariates = cov;
  design.treatment.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    design.treatment(static_cast<Eigen::Index>(i)) = t[i];
  design.ids = ids;
  design.column_names = {"constant", "x1", "x2"};
  std::vector<double> lo;
  for (std::size_t i = 0; i < n; ++i)
    lo.push_back(0.3 * cov(static_cast<Eigen::Index>(i), 1));
  const auto model = model_from_log_odds(lo);

  matching::GeneticOptions opt;
  opt.population = 12;
  opt.generations = 6;
  opt.seed = 99;
  const auto g1 = matching::match_genetic(design, model, opt);
  const auto g2 = matching::match_genetic(design, model, opt);
  REQUIRE(g1.pairs.size() == g2.pairs.size());
  for (std::size_t i = 0; i < g1.pairs.size(); ++i) {
    CHECK(g1.pairs[i].focal_id == g2.pairs[i].focal_id);
    CHECK(g1.pairs[i].matched_id == g2.pairs[i].matched_id);
    CHECK(g1.pairs[i].distance == g2.pairs[i].distance);
  }
  CHECK(g1.weights == g2.weights);

  const auto nn = matching::match_nn(design, model);
  CHECK(max_abs_smd(design, g1) <= max_abs_smd(design, nn) + 1e-12);

  // longer runs can only improve the incumbent (elitism)
  matching::GeneticOptions longer = opt;
  longer.generations = 12;
  const auto g3 = matching::match_genetic(design, model, longer);
  CHECK(max_abs_smd(design, g3) <= max_abs_smd(design, g1) + 1e-12);
}

TEST_CASE("genetic options are validated", "[matching]") {
  const auto design = oracles::make_design({"a", "b"}, {0.0, 1.0}, {1, 0});
  const auto model = model_from_log_odds({0.0, 1.0});
  matching::GeneticOptions opt;
  opt.population = 4;
  CHECK_THROWS_AS(matching::match_genetic(design, model, opt), validation_error);
  opt.population = 8;
  opt.generations = 0;
  CHECK_THROWS_AS(matching::match_genetic(design, model, opt), validation_error);
}

TEST_CASE("matched-sample export lists pairs with method and direction", "[matching]") {
  const auto design = oracles::make_design({"t1", "c1"}, {0.5, 0.4}, {1, 0});
  const auto m = matching::match_nn(design, model_from_log_odds({0.5, 0.4}));
  std::ostringstream out;
  matching::write_matched_csv(out, m);
  CHECK(out.str().find("focal_id,matched_id,direction,distance,method") == 0);
  CHECK(out.str().find("t1,c1,treated_to_control,") != std::string::npos);
  CHECK(out.str().find("c1,t1,control_to_treated,") != std::string::npos);
}
