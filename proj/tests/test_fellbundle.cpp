#include <doctest.h>

#include "support.hpp"

using namespace fellkms;
using namespace fellkms::testing;

TEST_CASE("trivial line bundle over a pair groupoid validates") {
  auto b = trivial_bundle(pair_groupoid(2), {Matrix::Identity(1, 1)});
  CHECK(validate_bundle(*b).ok());
  CHECK(b->total_dim() == 4);
}

TEST_CASE("trivial matrix bundle over a group validates") {
  auto b = trivial_bundle(cyclic_group_groupoid(2), full_matrix_algebra_basis(2));
  CHECK(validate_bundle(*b).ok());
  CHECK(b->unit_dim(0) == 2);
  CHECK(approx_equal(b->unit_element(0), Matrix::Identity(2, 2)));
}

TEST_CASE("random builder bundles validate cleanly") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    CAPTURE(trial);
    auto g = random_groupoid(rng);
    auto b = random_bundle(rng, g);
    CHECK(validate_bundle(*b).ok());
  }
}

TEST_CASE("declared involution mismatch cites the involution axioms") {
  // Two-dimensional diagonal fibres over Z/2; corrupt the fibre over g so
  // that its adjoints no longer span the fibre over g^{-1} = g.
  auto g = cyclic_group_groupoid(2);
  std::vector<Matrix> diag = block_diagonal_algebra_basis({1, 1});
  std::vector<Fiber> fibers;
  fibers.emplace_back(0, 2, 2, diag);
  Matrix e01 = Matrix::Zero(2, 2);
  e01(0, 1) = 1;
  Matrix e00 = Matrix::Zero(2, 2);
  e00(0, 0) = 1;
  fibers.emplace_back(1, 2, 2, std::vector<Matrix>{e00, e01});
  auto b = FellBundle::build(g, std::move(fibers));
  ValidationReport r = validate_bundle(*b);
  CHECK(!r.ok());
  CHECK(r.cites("involution"));
}

TEST_CASE("a zero fibre on a transitive non-unit arrow breaks saturation") {
  auto g = pair_groupoid(2);
  auto good = trivial_bundle(g, {Matrix::Identity(1, 1)});
  std::vector<Fiber> fibers;
  for (int a = 0; a < g->num_arrows(); ++a) {
    if (g->arrow_ids[a] == "(1,2)" || g->arrow_ids[a] == "(2,1)")
      fibers.emplace_back(a, 1, 1, std::vector<Matrix>{});
    else
      fibers.emplace_back(a, 1, 1, good->fiber(a).basis());
  }
  auto b = FellBundle::build(g, std::move(fibers));
  ValidationReport r = validate_bundle(*b);
  CHECK(!r.ok());
  CHECK(r.cites("saturation"));
}

TEST_CASE("a dependent basis is cited") {
  auto g = cyclic_group_groupoid(1);
  Matrix id = Matrix::Identity(1, 1);
  auto b = FellBundle::build(g, {Fiber(0, 1, 1, {id, Matrix(2.0 * id)})});
  ValidationReport r = validate_bundle(*b);
  CHECK(!r.ok());
  CHECK(r.cites("basis-independence"));
}

TEST_CASE("trivial bundle builder realises the stated operations") {
  Rng rng(43);
  auto g = pair_groupoid(3);
  auto algebra = random_algebra(rng, {2});
  auto b = trivial_bundle(g, algebra);
  const auto& gr = *g;
  // ((h,m), a)((m,k), b) = ((h,k), ab): matrix product within a fibre copy.
  for (int a1 = 0; a1 < gr.num_arrows(); ++a1)
    for (int a2 = 0; a2 < gr.num_arrows(); ++a2) {
      if (!gr.composable(a1, a2)) continue;
      int a3 = gr.compose(a1, a2);
      Matrix prod = b->fiber(a1).basis()[1] * b->fiber(a2).basis()[0];
      CHECK(b->fiber(a3).contains(prod));
    }
}

TEST_CASE("actions validate and pull back to valid bundles") {
  Rng rng(47);
  for (int trial = 0; trial < 12; ++trial) {
    CAPTURE(trial);
    auto g = random_groupoid(rng, 20);
    std::vector<int> blocks(uniform_int(rng, 1, 2));
    for (auto& bsz : blocks) bsz = uniform_int(rng, 1, 2);
    GroupoidAction act = random_action(rng, g, blocks);
    CHECK(validate_action(act).ok());
    auto b = pullback_bundle(act);
    CHECK(validate_bundle(*b).ok());
  }
}

TEST_CASE("trivial action pullback agrees with the trivial bundle") {
  auto g = pair_groupoid(2);
  GroupoidAction act;
  act.groupoid = g;
  act.dim.assign(2, 2);
  act.algebra.assign(2, full_matrix_algebra_basis(2));
  act.unitary.assign(4, Matrix::Identity(2, 2));
  REQUIRE(validate_action(act).ok());
  auto pulled = pullback_bundle(act);
  auto plain = trivial_bundle(g, full_matrix_algebra_basis(2));
  for (int a = 0; a < g->num_arrows(); ++a)
    for (const auto& m : plain->fiber(a).basis())
      CHECK(pulled->fiber(a).contains(m));
  CHECK(validate_bundle(*pulled).ok());
}

TEST_CASE("swap action of Z/2 on two scalar summands") {
  // alpha_g swaps the two diagonal entries; the crossed product is the full
  // 2x2 matrix algebra. Oracle below: an explicit basis map that is a
  // *-isomorphism onto M_2.
  auto z2 = cyclic_group_groupoid(2);
  GroupoidAction act;
  act.groupoid = z2;
  act.dim = {2};
  act.algebra = {block_diagonal_algebra_basis({1, 1})};
  Matrix swap = Matrix::Zero(2, 2);
  swap(0, 1) = swap(1, 0) = 1;
  act.unitary = {Matrix::Identity(2, 2), swap};
  REQUIRE(validate_action(act).ok());
  auto b = pullback_bundle(act);
  CHECK(validate_bundle(*b).ok());

  auto model = AlgebraModel::build(b);
  REQUIRE(model->dim() == 4);

  // The *-isomorphism onto M_2: with p = diag(1,0), q = diag(0,1) over the
  // unit and the same coefficients over g, the images below multiply like
  // matrix units.
  //   p delta_e -> E11, q delta_e -> E22, p delta_g -> E12, q delta_g -> E21.
  auto delta = [&](int arrow, int which) {
    return Section::delta(b, arrow, b->fiber(arrow).basis()[which]);
  };
  Section images[4] = {delta(0, 0), delta(0, 1), delta(1, 0), delta(1, 1)};
  auto unit_of = [](int i) {
    // (row, col) of the matrix unit each image should behave like.
    switch (i) {
      case 0: return std::pair{0, 0};
      case 1: return std::pair{1, 1};
      case 2: return std::pair{0, 1};
      default: return std::pair{1, 0};
    }
  };
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      Section prod = convolve(images[i], images[j]);
      auto [ri, ci] = unit_of(i);
      auto [rj, cj] = unit_of(j);
      if (ci == rj) {
        // Expected: the image representing the matrix unit (ri, cj).
        int expect = -1;
        for (int k = 0; k < 4; ++k) {
          auto [rk, ck] = unit_of(k);
          if (rk == ri && ck == cj) expect = k;
        }
        CHECK(prod.max_abs_difference(images[expect]) < 1e-12);
      } else {
        CHECK(prod.is_zero());
      }
    }
}

TEST_CASE("restriction to the isotropy keeps shared fibres") {
  auto g = pair_groupoid(2);
  auto b = trivial_bundle(g, {Matrix::Identity(1, 1)});
  auto iso = isotropy(g, 0);
  auto rb = restrict_bundle(b, iso);
  CHECK(rb->num_arrows() == 1);
  CHECK(rb->fiber(0).dim() == 1);
  CHECK(validate_bundle(*rb).ok());

  auto frame = source_fiber_frame(*b, 0);
  CHECK(frame.size() == 2);  // two arrows end at each unit of the pair groupoid

  auto gb = group_bundle_groupoid({2, 3});
  auto bb = trivial_bundle(gb, {Matrix::Identity(1, 1)});
  auto ib = isotropy_bundle(gb);
  auto rbb = restrict_bundle(bb, ib);
  CHECK(rbb->num_arrows() == bb->num_arrows());
}

TEST_CASE("restriction rejects foreign subgroupoids") {
  auto b = trivial_bundle(pair_groupoid(2), {Matrix::Identity(1, 1)});
  auto other = isotropy(pair_groupoid(2), 0);
  CHECK_THROWS_AS(restrict_bundle(b, other), std::invalid_argument);
}

TEST_CASE("fibre norms satisfy the C*-identity and positivity") {
  Rng rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = random_groupoid(rng, 16);
    auto b = random_bundle(rng, g);
    for (int a = 0; a < g->num_arrows(); ++a) {
      const Fiber& f = b->fiber(a);
      if (f.dim() == 0) continue;
      Vector coords(f.dim());
      for (int k = 0; k < f.dim(); ++k) coords(k) = random_complex(rng);
      Matrix v = f.from_coords(coords);
      Matrix vv = v.adjoint() * v;
      double n = operator_norm(v);
      CHECK(operator_norm(vv) == doctest::Approx(n * n).epsilon(1e-9));
      CHECK(min_eigenvalue(vv) >= -1e-10);
    }
  }
}

TEST_CASE("saturation dimension equality on random bundles") {
  Rng rng(59);
  auto g = random_groupoid(rng, 16);
  auto b = random_bundle(rng, g);
  for (int a1 = 0; a1 < g->num_arrows(); ++a1)
    for (int a2 = 0; a2 < g->num_arrows(); ++a2) {
      if (!g->composable(a1, a2)) continue;
      int a3 = g->compose(a1, a2);
      // dim span(A_a1 A_a2) equals dim A_{a1 a2}: collect products.
      const Fiber& f1 = b->fiber(a1);
      const Fiber& f2 = b->fiber(a2);
      Matrix prods(f1.rows() * f2.cols(), f1.dim() * f2.dim());
      int col = 0;
      for (const auto& m1 : f1.basis())
        for (const auto& m2 : f2.basis()) prods.col(col++) = vectorize(m1 * m2);
      Eigen::ColPivHouseholderQR<Matrix> qr(prods);
      qr.setThreshold(1e-9);
      CHECK(static_cast<int>(qr.rank()) == b->fiber(a3).dim());
    }
}
