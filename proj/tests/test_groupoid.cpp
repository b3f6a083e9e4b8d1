#include <doctest.h>

#include "support.hpp"

using namespace fellkms;
using namespace fellkms::testing;

TEST_CASE("pair groupoid and cyclic group validate cleanly") {
  CHECK(validate_groupoid(*pair_groupoid(2)).ok());
  CHECK(validate_groupoid(*cyclic_group_groupoid(2)).ok());
  CHECK(validate_groupoid(*pair_groupoid(1)).ok());
}

TEST_CASE("misdeclared inverse is cited with the inverse axiom") {
  auto g = pair_groupoid(2);
  FiniteGroupoid bad = *g;
  // inv((1,2)) should be (2,1); declare it as (1,2) itself.
  int a12 = bad.arrow_index("(1,2)");
  bad.inv[a12] = a12;
  ValidationReport r = validate_groupoid(bad);
  CHECK(!r.ok());
  CHECK(r.cites("inverse"));
}

TEST_CASE("random catalogue groupoids validate cleanly") {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    auto g = random_groupoid(rng);
    CAPTURE(trial);
    CHECK(validate_groupoid(*g).ok());
  }
}

TEST_CASE("isotropy at a pair-groupoid unit is the trivial group") {
  auto g = pair_groupoid(2);
  auto iso = isotropy(g, 0);
  CHECK(iso->num_units() == 1);
  CHECK(iso->num_arrows() == 1);
  CHECK(iso->arrow_ids[0] == "(1,1)");  // shares the arrow identifier
}

TEST_CASE("isotropy of a one-unit group is the whole groupoid") {
  auto g = cyclic_group_groupoid(2);
  auto iso = isotropy(g, 0);
  CHECK(iso->num_arrows() == g->num_arrows());
  CHECK(validate_groupoid(*iso).ok());
}

TEST_CASE("isotropy rejects unknown units") {
  auto g = pair_groupoid(2);
  CHECK_THROWS_AS(isotropy(g, 5), std::invalid_argument);
}

TEST_CASE("isotropy bundle of a group bundle is the whole groupoid") {
  auto g = group_bundle_groupoid({2, 3});
  auto ib = isotropy_bundle(g);
  CHECK(ib->num_arrows() == g->num_arrows());
  CHECK(ib->num_units() == g->num_units());
}

TEST_CASE("isotropy of a trivial two-point action recovers the group") {
  // Z/2 acting trivially on two points, as a transformation groupoid.
  GSpace gs;
  gs.groupoid = cyclic_group_groupoid(2);
  gs.point_ids = {"p", "q"};
  gs.momentum = {0, 0};
  gs.action = {{0, 0}, {1, 1}};  // x . gamma = x for both arrows
  REQUIRE(validate_gspace(gs).ok());
  auto t = transformation_groupoid(gs);
  REQUIRE(validate_groupoid(*t).ok());
  for (int x = 0; x < 2; ++x) {
    // Oracle: enumerate arrows with equal source and target by hand.
    int count = 0;
    for (int a = 0; a < t->num_arrows(); ++a)
      if (t->src[a] == x && t->tgt[a] == x) ++count;
    CHECK(count == 2);
    auto iso = isotropy(t, x);
    CHECK(iso->num_arrows() == count);
    CHECK(validate_groupoid(*iso).ok());
  }
}

TEST_CASE("isotropy bundle matches the brute-force arrow filter") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = random_groupoid(rng);
    auto ib = isotropy_bundle(g);
    std::set<int> expected;
    for (int a = 0; a < g->num_arrows(); ++a)
      if (g->src[a] == g->tgt[a]) expected.insert(a);
    std::set<int> got(ib->parent_arrow.begin(), ib->parent_arrow.end());
    CHECK(got == expected);
    CHECK(validate_groupoid(*ib).ok());
  }
}

TEST_CASE("isotropy bundle of a principal groupoid is the unit arrows") {
  auto g = pair_groupoid(3);
  auto ib = isotropy_bundle(g);
  CHECK(ib->num_arrows() == 3);
  for (int a = 0; a < ib->num_arrows(); ++a) CHECK(ib->is_unit_arrow(a));
}

TEST_CASE("isotropy bundle of a product keeps exactly the group part") {
  auto g = product_groupoid(pair_groupoid(2), cyclic_group_groupoid(3));
  auto ib = isotropy_bundle(g);
  // Oracle: arrows (p, q) with p a pair-groupoid unit arrow, q anything.
  int expected = 0;
  for (int a = 0; a < g->num_arrows(); ++a)
    if (g->src[a] == g->tgt[a]) ++expected;
  CHECK(ib->num_arrows() == expected);
  CHECK(expected == 2 * 3);
}

TEST_CASE("cocycle validation accepts coboundaries and rejects torsion") {
  Rng rng(3);
  auto g = random_groupoid(rng);
  Cocycle c = random_cocycle(rng, *g);
  CHECK(validate_cocycle(*g, c).ok());

  auto z2 = cyclic_group_groupoid(2);
  Cocycle bad;
  bad.values = {0.0, 1.0};  // c(g) = 1 cannot be additive on g g = e
  ValidationReport r = validate_cocycle(*z2, bad);
  CHECK(!r.ok());
  CHECK(r.cites("cocycle-additivity"));
}

TEST_CASE("quasi-invariance of the two-level Gibbs measure") {
  auto model = build_pair_model(2, {"pt"}, {Matrix::Identity(1, 1)});
  Cocycle c = h_minus_k_cocycle(model);
  const double beta = std::log(2.0);
  UnitMeasure mu;
  mu.weights = RealVector(2);
  mu.weights << 2.0 / 3.0, 1.0 / 3.0;

  // Oracle: all four arrows by hand. mu(h) = 2^{k-h} mu(k) must hold.
  const auto& g = *model.groupoid;
  auto delta = rn_derivative(c, beta);
  for (int a = 0; a < 4; ++a)
    CHECK(mu.weights(g.tgt[a]) ==
          doctest::Approx(delta[a] * mu.weights(g.src[a])));

  CHECK(check_quasi_invariant(g, mu, delta).ok);

  UnitMeasure uniform_mu;
  uniform_mu.weights = RealVector::Constant(2, 0.5);
  auto fail = check_quasi_invariant(g, uniform_mu, delta);
  CHECK(!fail.ok);
  CHECK(g.arrow_ids[fail.witness_arrow] == "(1,pt,2)");
}

TEST_CASE("invariant measures are exactly the orbit-constant ones") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = random_groupoid(rng);
    std::vector<double> delta(g->num_arrows(), 1.0);

    UnitMeasure mu;
    mu.weights = RealVector::Zero(g->num_units());
    bool constant_on_orbits = uniform_int(rng, 0, 1) == 1;
    if (constant_on_orbits) {
      for (const auto& orbit : g->orbits()) {
        double v = uniform(rng, 0.1, 1.0);
        for (int x : orbit) mu.weights(x) = v;
      }
    } else {
      for (int x = 0; x < g->num_units(); ++x)
        mu.weights(x) = uniform(rng, 0.1, 1.0);
    }

    // Brute-force orbit check of constancy.
    bool really_constant = true;
    for (int x = 0; x < g->num_units(); ++x)
      for (int y : brute_force_orbit(*g, x))
        if (std::abs(mu.weights(x) - mu.weights(y)) > 1e-12)
          really_constant = false;

    CHECK(check_quasi_invariant(*g, mu, delta).ok == really_constant);
  }
}

TEST_CASE("solver returns the Gibbs measure on the two-level system") {
  auto model = build_pair_model(2, {"pt"}, {Matrix::Identity(1, 1)});
  Cocycle c = h_minus_k_cocycle(model);
  // Oracle: mu(1) = 2 mu(2) and mu(1) + mu(2) = 1 give (2/3, 1/3).
  auto sol = solve_quasi_invariant(*model.groupoid, c, std::log(2.0));
  REQUIRE(sol.extreme_points.size() == 1);
  CHECK(sol.extreme_points[0].weights(model.unit_index(1, 0)) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(sol.extreme_points[0].weights(model.unit_index(2, 0)) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("solver at beta zero yields uniform measures per orbit") {
  Rng rng(23);
  auto g = random_groupoid(rng);
  Cocycle c = random_cocycle(rng, *g);
  auto sol = solve_quasi_invariant(*g, c, 0.0);
  auto orbits = g->orbits();
  REQUIRE(sol.extreme_points.size() == orbits.size());
  for (size_t i = 0; i < orbits.size(); ++i) {
    const auto& mu = sol.extreme_points[i];
    for (int x : orbits[i])
      CHECK(mu.weights(x) == doctest::Approx(1.0 / orbits[i].size()));
  }
}

TEST_CASE("cycle obstruction empties the solution set") {
  auto z2 = cyclic_group_groupoid(2);
  Cocycle not_a_cocycle;
  not_a_cocycle.values = {0.0, 1.0};
  auto sol = solve_quasi_invariant(*z2, not_a_cocycle, 1.0);
  CHECK(sol.extreme_points.empty());
  REQUIRE(sol.orbit_diagnoses.size() == 1);
  CHECK(!sol.orbit_diagnoses[0].feasible);
  CHECK(sol.orbit_diagnoses[0].obstruction_arrow == 1);
}

TEST_CASE("every solved measure passes the quasi-invariance check") {
  Rng rng(29);
  for (int trial = 0; trial < 25; ++trial) {
    auto g = random_groupoid(rng);
    Cocycle c = random_cocycle(rng, *g);
    double beta = uniform(rng, -2.0, 2.0);
    auto sol = solve_quasi_invariant(*g, c, beta);
    auto delta = rn_derivative(c, beta);
    for (const auto& mu : sol.extreme_points) {
      CHECK(mu.is_probability());
      CHECK(check_quasi_invariant(*g, mu, delta).ok);
    }
  }
}

TEST_CASE("cocycle additivity is exact on composable pairs") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = random_groupoid(rng);
    Cocycle c = random_cocycle(rng, *g);
    for (int a = 0; a < g->num_arrows(); ++a)
      for (int b = 0; b < g->num_arrows(); ++b) {
        if (!g->composable(a, b)) continue;
        int ab = g->compose(a, b);
        REQUIRE(ab >= 0);
        // Dyadic coboundary weights make the identity exact, not approximate.
        CHECK(c.values[ab] - c.values[a] - c.values[b] == 0.0);
      }
  }
}
