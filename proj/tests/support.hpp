// Shared fixtures for the test suites: deterministic random generators for
// groupoids, bundles, cocycles, sections and fields, plus brute-force
// oracles that the expected values in the tests are frozen against.
#ifndef FELLKMS_TESTS_SUPPORT_HPP
#define FELLKMS_TESTS_SUPPORT_HPP

#include <random>

#include "fellkms/induction.hpp"
#include "fellkms/models.hpp"

namespace fellkms::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Complex random_complex(Rng& rng, double scale = 1.0) {
  return Complex(uniform(rng, -scale, scale), uniform(rng, -scale, scale));
}

inline Matrix random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = random_complex(rng, scale);
  return m;
}

/// Haar-ish random unitary via QR of a Gaussian matrix.
inline Matrix random_unitary(Rng& rng, int d) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = Complex(gauss(rng), gauss(rng));
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < d; ++i) q.col(i) *= r(i, i) / std::abs(r(i, i));
  return q;
}

/// A random unital matrix *-algebra: a block-diagonal algebra conjugated by
/// a random unitary. Ambient dimension is the sum of the block sizes.
inline std::vector<Matrix> random_algebra(Rng& rng,
                                          const std::vector<int>& blocks) {
  int d = 0;
  for (int b : blocks) d += b;
  return block_diagonal_algebra_basis(blocks, random_unitary(rng, d));
}

/// Random groupoid drawn from the catalogue: pair groupoids, cyclic groups,
/// group bundles, products of pairs with cyclic groups, disjoint unions.
inline GroupoidPtr random_groupoid(Rng& rng, int max_arrows = 30) {
  for (;;) {
    GroupoidPtr g;
    switch (uniform_int(rng, 0, 5)) {
      case 0:
        g = pair_groupoid(uniform_int(rng, 1, 4));
        break;
      case 1:
        g = cyclic_group_groupoid(uniform_int(rng, 1, 4));
        break;
      case 2: {
        std::vector<int> orders(uniform_int(rng, 1, 3));
        for (auto& o : orders) o = uniform_int(rng, 1, 3);
        g = group_bundle_groupoid(orders);
        break;
      }
      case 3:
        g = product_groupoid(pair_groupoid(uniform_int(rng, 2, 3)),
                             cyclic_group_groupoid(uniform_int(rng, 2, 3)));
        break;
      case 4:
        g = disjoint_union_groupoid(
            pair_groupoid(uniform_int(rng, 1, 3)),
            cyclic_group_groupoid(uniform_int(rng, 1, 3)));
        break;
      default:
        g = disjoint_union_groupoid(
            pair_groupoid(uniform_int(rng, 2, 3)),
            group_bundle_groupoid({uniform_int(rng, 1, 2)}));
        break;
    }
    if (g->num_arrows() <= max_arrows) return g;
  }
}

/// Every real cocycle on a finite groupoid vanishes on isotropy (elements
/// have finite order), so the general form is a coboundary from unit
/// weights. Dyadic weights keep the additivity identity exact in floating
/// point.
inline Cocycle random_cocycle(Rng& rng, const FiniteGroupoid& g,
                              double scale = 1.0) {
  std::vector<double> w(g.num_units());
  for (auto& v : w) v = scale * 0.25 * uniform_int(rng, -6, 6);
  Cocycle c;
  c.values.resize(g.num_arrows());
  for (int a = 0; a < g.num_arrows(); ++a)
    c.values[a] = w[g.tgt[a]] - w[g.src[a]];
  return c;
}

/// Random strict unitary homomorphism: a coboundary U_gamma = V_r V_s^*,
/// which always satisfies U_{gamma eta} = U_gamma U_eta.
inline GroupoidAction random_action(Rng& rng, GroupoidPtr g,
                                    const std::vector<int>& blocks) {
  GroupoidAction act;
  act.groupoid = g;
  int d = 0;
  for (int b : blocks) d += b;
  std::vector<Matrix> conj(g->num_units());
  act.dim.assign(g->num_units(), d);
  act.algebra.resize(g->num_units());
  // A common block algebra conjugated per unit keeps alpha an isomorphism
  // between the unit algebras.
  std::vector<Matrix> base = block_diagonal_algebra_basis(blocks);
  for (int x = 0; x < g->num_units(); ++x) {
    conj[x] = random_unitary(rng, d);
    act.algebra[x].reserve(base.size());
    for (const auto& m : base)
      act.algebra[x].push_back(conj[x] * m * conj[x].adjoint());
  }
  act.unitary.resize(g->num_arrows());
  for (int a = 0; a < g->num_arrows(); ++a)
    act.unitary[a] = conj[g->tgt[a]] * conj[g->src[a]].adjoint();
  return act;
}

/// Random bundle from the builder catalogue, with fibres up to M_3.
inline BundlePtr random_bundle(Rng& rng, GroupoidPtr g) {
  switch (uniform_int(rng, 0, 2)) {
    case 0: {
      std::vector<int> blocks(uniform_int(rng, 1, 2));
      for (auto& b : blocks) b = uniform_int(rng, 1, 2);
      if (blocks.size() == 1 && uniform_int(rng, 0, 1))
        blocks[0] = uniform_int(rng, 1, 3);
      return trivial_bundle(g, random_algebra(rng, blocks));
    }
    case 1:
      return trivial_bundle(g, {Matrix::Identity(1, 1)});
    default: {
      std::vector<int> blocks(uniform_int(rng, 1, 2));
      for (auto& b : blocks) b = uniform_int(rng, 1, 2);
      return pullback_bundle(random_action(rng, g, blocks));
    }
  }
}

inline Section random_section(Rng& rng, const BundlePtr& b, int max_support = 6,
                              double scale = 1.0) {
  Section f(b);
  const auto& g = *b->groupoid();
  int n = uniform_int(rng, 1, max_support);
  for (int i = 0; i < n; ++i) {
    int a = uniform_int(rng, 0, g.num_arrows() - 1);
    const Fiber& fib = b->fiber(a);
    if (fib.dim() == 0) continue;
    Vector coords(fib.dim());
    for (int k = 0; k < fib.dim(); ++k) coords(k) = random_complex(rng, scale);
    f.set(a, Matrix(f.value(a) + fib.from_coords(coords)));
  }
  return f;
}

inline ModuleElement random_module_element(Rng& rng, const InductionModule& Y,
                                           double scale = 1.0) {
  ModuleElement xi = Y.zero();
  for (int t : Y.carrier_arrows()) {
    const Fiber& fib = Y.bundle()->fiber(t);
    if (fib.dim() == 0 || uniform_int(rng, 0, 2) == 0) continue;
    Vector coords(fib.dim());
    for (int k = 0; k < fib.dim(); ++k) coords(k) = random_complex(rng, scale);
    xi.set(t, fib.from_coords(coords));
  }
  return xi;
}

/// Random density-matrix state on a modelled algebra, through its faithful
/// representation: phi(a) = tr(rho rep(a)) with rho a normalised random
/// PSD matrix. Always a state.
inline State random_state(Rng& rng, const AlgebraPtr& m) {
  int R = m->rep_dim();
  Matrix w = random_matrix(rng, R, R);
  Matrix rho = w * w.adjoint();
  Section unit = Section::unit(m->bundle());
  double norm = (rho * m->represent(unit)).trace().real();
  rho /= norm;
  Vector coeffs(m->dim());
  for (int i = 0; i < m->dim(); ++i)
    coeffs(i) = (rho * m->represent(m->basis_section(i))).trace();
  return State(m, std::move(coeffs));
}

/// Random tracial state on a modelled algebra: a convex combination of the
/// traces of the isotypic blocks. For our models the normalised trace of
/// the representation is tracial; random tracial states come from randomly
/// weighting the units' blocks of the representation.
inline State trace_state(const AlgebraPtr& m) {
  Vector coeffs(m->dim());
  Section unit = Section::unit(m->bundle());
  double norm = m->represent(unit).trace().real();
  for (int i = 0; i < m->dim(); ++i)
    coeffs(i) = m->represent(m->basis_section(i)).trace() / norm;
  return State(m, std::move(coeffs));
}

/// Brute-force orbit of a unit: reachable units through arrows either way.
inline std::vector<int> brute_force_orbit(const FiniteGroupoid& g, int x0) {
  std::vector<int> seen(g.num_units(), 0);
  seen[x0] = 1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int a = 0; a < g.num_arrows(); ++a) {
      if (seen[g.src[a]] && !seen[g.tgt[a]]) seen[g.tgt[a]] = changed = true;
      if (seen[g.tgt[a]] && !seen[g.src[a]]) seen[g.src[a]] = changed = true;
    }
  }
  std::vector<int> out;
  for (int x = 0; x < g.num_units(); ++x)
    if (seen[x]) out.push_back(x);
  return out;
}

}  // namespace fellkms::testing

#endif  // FELLKMS_TESTS_SUPPORT_HPP
