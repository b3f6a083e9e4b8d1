#include "fellkms/models.hpp"

#include <sstream>
#include <stdexcept>

namespace fellkms {

int PairModel::unit_index(int k, int x) const { return (k - 1) * num_points() + x; }

int PairModel::arrow_index(int h, int x, int k) const {
  return ((h - 1) * num_points() + x) * n + (k - 1);
}

PairModel build_pair_model(int n, const std::vector<std::string>& points,
                           const std::vector<Matrix>& coefficient_algebra) {
  if (n < 1 || points.empty())
    throw std::invalid_argument("pair model: need n >= 1 and a nonempty base");
  PairModel model;
  model.n = n;
  model.points = points;

  auto g = std::make_shared<FiniteGroupoid>();
  const int P = static_cast<int>(points.size());
  for (int k = 1; k <= n; ++k)
    for (int x = 0; x < P; ++x)
      g->unit_ids.push_back("(" + std::to_string(k) + "," + points[x] + ")");
  auto uidx = [&](int k, int x) { return (k - 1) * P + x; };
  auto aidx = [&](int h, int x, int k) { return ((h - 1) * P + x) * n + (k - 1); };
  for (int h = 1; h <= n; ++h)
    for (int x = 0; x < P; ++x)
      for (int k = 1; k <= n; ++k) {
        g->arrow_ids.push_back("(" + std::to_string(h) + "," + points[x] + "," +
                               std::to_string(k) + ")");
        g->tgt.push_back(uidx(h, x));
        g->src.push_back(uidx(k, x));
        g->inv.push_back(aidx(k, x, h));
      }
  for (int k = 1; k <= n; ++k)
    for (int x = 0; x < P; ++x) g->unit_arrow.push_back(aidx(k, x, k));
  const int na = g->num_arrows();
  g->compose_table.assign(na, std::vector<int>(na, -1));
  for (int h = 1; h <= n; ++h)
    for (int x = 0; x < P; ++x)
      for (int m = 1; m <= n; ++m)
        for (int k = 1; k <= n; ++k)
          g->compose_table[aidx(h, x, m)][aidx(m, x, k)] = aidx(h, x, k);

  model.groupoid = g;
  model.bundle = trivial_bundle(model.groupoid, coefficient_algebra);
  model.system = std::make_shared<BundleSystem>(model.bundle);
  return model;
}

Cocycle h_minus_k_cocycle(const PairModel& model) {
  Cocycle c;
  c.values.assign(model.groupoid->num_arrows(), 0.0);
  for (int h = 1; h <= model.n; ++h)
    for (int x = 0; x < model.num_points(); ++x)
      for (int k = 1; k <= model.n; ++k)
        c.values[model.arrow_index(h, x, k)] = static_cast<double>(h - k);
  return c;
}

UnitMeasure measure_from_mu1(const PairModel& model, const RealVector& mu1,
                             const Cocycle& c, double beta) {
  if (mu1.size() != model.num_points())
    throw std::invalid_argument("measure_from_mu1: base measure has wrong length");
  if (mu1.minCoeff() < 0)
    throw std::invalid_argument("measure_from_mu1: base measure must be nonnegative");
  if (mu1.sum() <= 0)
    throw std::invalid_argument("measure_from_mu1: base measure vanishes identically");
  UnitMeasure nu;
  nu.weights = RealVector::Zero(model.groupoid->num_units());
  // weights(k, x) = e^{-beta c(k,x,1)} mu1(x), then normalised.
  for (int k = 1; k <= model.n; ++k)
    for (int x = 0; x < model.num_points(); ++x)
      nu.weights(model.unit_index(k, x)) =
          std::exp(-beta * c.values[model.arrow_index(k, x, 1)]) * mu1(x);
  nu.weights /= nu.weights.sum();
  return nu;
}

RealVector mu1_from_measure(const PairModel& model, const UnitMeasure& nu,
                            const Cocycle& c, double beta, double tol) {
  QuasiInvarianceCheck check =
      check_quasi_invariant(*model.groupoid, nu, rn_derivative(c, beta), tol);
  if (!check.ok) {
    std::ostringstream os;
    os << "mu1_from_measure: measure fails quasi-invariance at arrow "
       << model.groupoid->arrow_ids[check.witness_arrow] << " (" << check.lhs
       << " vs " << check.rhs << ")";
    throw std::invalid_argument(os.str());
  }
  RealVector mu1(model.num_points());
  for (int x = 0; x < model.num_points(); ++x)
    mu1(x) = nu.weights(model.unit_index(1, x));
  return mu1;
}

std::pair<State, KmsCertificate> kms_states_matrix_model(
    const PairModel& model, const RealVector& mu1,
    const std::map<int, Vector>& phi_A, const Cocycle& c, double beta,
    double tol) {
  const auto& sys = *model.system;
  UnitMeasure nu = measure_from_mu1(model, mu1, c, beta);

  // The per-unit functionals live on the coefficient algebra, which is the
  // fibre over every unit arrow. With trivial isotropy the exchange
  // condition reads phi_(k,x)(a xi* xi) = phi_(m,x)(xi a xi*).
  const Fiber& coeff_fiber =
      model.bundle->fiber(model.groupoid->unit_arrow[0]);
  const int adim = coeff_fiber.dim();
  auto value_of = [&](int unit, const Matrix& m) {
    bool in_span = false;
    Vector cc = coeff_fiber.to_coords(m, &in_span, 1e-8);
    if (!in_span)
      throw std::invalid_argument(
          "kms_states_matrix_model: element escapes the coefficient algebra");
    Complex v = 0;
    const Vector& f = phi_A.at(unit);
    for (int l = 0; l < adim; ++l) v += cc(l) * f(l);
    return v;
  };

  for (int x = 0; x < model.num_points(); ++x) {
    if (mu1(x) <= tol) continue;
    for (int k = 1; k <= model.n; ++k)
      if (!phi_A.count(model.unit_index(k, x)))
        throw std::invalid_argument(
            "kms_states_matrix_model: field undefined on an in-support unit");
    for (int k = 1; k <= model.n; ++k)
      for (int m = 1; m <= model.n; ++m)
        for (int ka = 0; ka < adim; ++ka)
          for (int kx = 0; kx < adim; ++kx) {
            const Matrix& a = coeff_fiber.basis()[ka];
            const Matrix& xi = coeff_fiber.basis()[kx];
            Complex lhs = value_of(model.unit_index(k, x),
                                   a * xi.adjoint() * xi);
            Complex rhs = value_of(model.unit_index(m, x),
                                   xi * a * xi.adjoint());
            if (std::abs(lhs - rhs) >
                std::max(tol, 1e-8) *
                    std::max({1.0, std::abs(lhs), std::abs(rhs)})) {
              std::ostringstream os;
              os << "kms_states_matrix_model: exchange condition fails at "
                 << "(k,m,x,a,xi) = (" << k << "," << m << "," << model.points[x]
                 << "," << ka << "," << kx << ")";
              throw std::invalid_argument(os.str());
            }
          }
  }

  StateField field;
  for (const auto& [unit, f] : phi_A) {
    const auto& iso_model = sys.isotropy_algebra(unit);
    if (iso_model->dim() != adim)
      throw std::invalid_argument("kms_states_matrix_model: functional length mismatch");
    field.members.emplace(unit, State(iso_model, f));
    field.support.insert(unit);
  }
  return kms_from_pair(sys, nu, field, beta, c, tol);
}

std::vector<int> GSpace::fiber(int unit) const {
  std::vector<int> out;
  for (int x = 0; x < num_points(); ++x)
    if (momentum[x] == unit) out.push_back(x);
  return out;
}

ValidationReport validate_gspace(const GSpace& gs) {
  ValidationReport report;
  auto add = [&](const std::string& axiom, const std::string& detail) {
    report.violations.push_back({axiom, detail, {}});
  };
  const auto& g = *gs.groupoid;
  const int P = gs.num_points();
  if (static_cast<int>(gs.momentum.size()) != P ||
      static_cast<int>(gs.action.size()) != P) {
    add("shape", "momentum or action table has wrong size");
    return report;
  }
  for (int x = 0; x < P; ++x) {
    if (gs.momentum[x] < 0 || gs.momentum[x] >= g.num_units())
      add("shape", "momentum of " + gs.point_ids[x] + " is not a unit");
    if (static_cast<int>(gs.action[x].size()) != g.num_arrows())
      add("shape", "action row of " + gs.point_ids[x] + " malformed");
  }
  if (!report.ok()) return report;

  for (int x = 0; x < P; ++x) {
    for (int a = 0; a < g.num_arrows(); ++a) {
      int y = gs.action[x][a];
      bool should = (gs.momentum[x] == g.tgt[a]);
      if (should && y < 0)
        add("action-domain", "x.gamma undefined for " + gs.point_ids[x] +
                                 " and " + g.arrow_ids[a]);
      if (!should && y >= 0)
        add("action-domain", "x.gamma defined off the momentum fibre for " +
                                 gs.point_ids[x] + " and " + g.arrow_ids[a]);
      if (y >= 0 && gs.momentum[y] != g.src[a])
        add("action-momentum", "x.gamma leaves the source fibre for " +
                                   gs.point_ids[x] + " and " + g.arrow_ids[a]);
    }
    int u = g.unit_arrow[gs.momentum[x]];
    if (gs.action[x][u] != x)
      add("action-unit", "x.unit != x for " + gs.point_ids[x]);
  }
  for (int x = 0; x < P; ++x)
    for (int a = 0; a < g.num_arrows(); ++a) {
      if (gs.action[x][a] < 0) continue;
      for (int b = 0; b < g.num_arrows(); ++b) {
        if (!g.composable(a, b)) continue;
        int ab = g.compose_table[a][b];
        if (ab < 0) continue;
        int lhs = gs.action[gs.action[x][a]][b];
        int rhs = gs.action[x][ab];
        if (lhs != rhs)
          add("action-compatibility",
              "(x.gamma).eta != x.(gamma eta) for " + gs.point_ids[x] + ", " +
                  g.arrow_ids[a] + ", " + g.arrow_ids[b]);
      }
    }
  return report;
}

GroupoidPtr transformation_groupoid(const GSpace& gs) {
  const auto& g = *gs.groupoid;
  auto t = std::make_shared<FiniteGroupoid>();
  t->unit_ids = gs.point_ids;

  std::vector<std::pair<int, int>> arrows;  // (point, groupoid arrow)
  std::vector<std::vector<int>> index(gs.num_points(),
                                      std::vector<int>(g.num_arrows(), -1));
  for (int x = 0; x < gs.num_points(); ++x)
    for (int a = 0; a < g.num_arrows(); ++a) {
      if (gs.action[x][a] < 0) continue;
      index[x][a] = static_cast<int>(arrows.size());
      arrows.emplace_back(x, a);
      t->arrow_ids.push_back("(" + gs.point_ids[x] + "|" + g.arrow_ids[a] + ")");
      t->tgt.push_back(x);
      t->src.push_back(gs.action[x][a]);
    }
  for (const auto& [x, a] : arrows)
    t->inv.push_back(index[gs.action[x][a]][g.inv[a]]);
  for (int x = 0; x < gs.num_points(); ++x)
    t->unit_arrow.push_back(index[x][g.unit_arrow[gs.momentum[x]]]);
  const int na = static_cast<int>(arrows.size());
  t->compose_table.assign(na, std::vector<int>(na, -1));
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) {
      const auto& [x, a] = arrows[i];
      const auto& [y, bgs] = arrows[j];
      // (x, a)(x.a, b) = (x, ab)
      if (t->src[i] != t->tgt[j]) continue;
      if (!g.composable(a, bgs)) continue;
      int ab = g.compose_table[a][bgs];
      if (ab < 0) continue;
      t->compose_table[i][j] = index[x][ab];
    }
  return t;
}

std::vector<std::pair<int, int>> transformation_arrow_table(const GSpace& gs) {
  std::vector<std::pair<int, int>> arrows;
  for (int x = 0; x < gs.num_points(); ++x)
    for (int a = 0; a < gs.groupoid->num_arrows(); ++a)
      if (gs.action[x][a] >= 0) arrows.emplace_back(x, a);
  return arrows;
}

std::vector<int> stabilizer(const GSpace& gs, int x) {
  std::vector<int> out;
  for (int a = 0; a < gs.groupoid->num_arrows(); ++a)
    if (gs.action[x][a] == x) out.push_back(a);
  return out;
}

Cocycle pullback_cocycle(const GSpace& gs, const GroupoidPtr& tg,
                         const Cocycle& c_on_g) {
  auto table = transformation_arrow_table(gs);
  if (static_cast<size_t>(tg->num_arrows()) != table.size())
    throw std::invalid_argument(
        "pullback_cocycle: groupoid is not the transformation groupoid of "
        "this space");
  Cocycle out;
  out.values.resize(table.size());
  for (size_t i = 0; i < table.size(); ++i)
    out.values[i] = c_on_g.values[table[i].second];
  return out;
}

GSpaceKmsTriple gspace_double_disintegrate(const GSpace& gs,
                                           const BundleSystem& sys,
                                           const State& phi, double beta,
                                           const Cocycle& c, double tol) {
  const auto& t = *sys.groupoid();
  const auto& g = *gs.groupoid;
  {
    auto table = transformation_arrow_table(gs);
    bool matches = t.num_units() == gs.num_points() &&
                   static_cast<size_t>(t.num_arrows()) == table.size();
    for (size_t i = 0; matches && i < table.size(); ++i) {
      const auto& [x, a] = table[i];
      matches = t.tgt[i] == x && t.src[i] == gs.action[x][a];
    }
    if (!matches)
      throw std::invalid_argument(
          "gspace_double_disintegrate: system is not over the transformation "
          "groupoid of this space");
  }

  GSpaceKmsTriple out;
  KmsCertificate cert = is_kms(phi, beta, Dynamics{sys.groupoid(), c}, tol);
  if (!cert.pass)
    throw std::invalid_argument(
        "gspace_double_disintegrate: state fails the KMS identity (residual " +
        std::to_string(cert.kms_residual) + ")");

  // First, the measure over the unit space of G: the mass of each momentum
  // fibre.
  Disintegration over_points = disintegrate(sys, phi, tol);
  out.mu.weights = RealVector::Zero(g.num_units());
  for (int u = 0; u < g.num_units(); ++u)
    for (int x : gs.fiber(u)) out.mu.weights(u) += over_points.mu.weights(x);

  // Then, inside each in-support fibre, the restriction of phi to the
  // transformation group of the fibre is a state, and it disintegrates
  // over the fibre into a measure and per-point states on the stabiliser
  // group algebras.
  for (int u = 0; u < g.num_units(); ++u) {
    if (out.mu.weights(u) <= tol) continue;
    std::vector<int> fiber_points = gs.fiber(u);
    std::vector<int> sub_arrows;
    for (int a = 0; a < t.num_arrows(); ++a) {
      if (gs.momentum[t.tgt[a]] == u && gs.momentum[t.src[a]] == u)
        sub_arrows.push_back(a);
    }
    GroupoidPtr tu = subgroupoid(sys.groupoid(), fiber_points, sub_arrows);
    BundlePtr bu = restrict_bundle(sys.bundle(), tu);
    BundleSystem sub_sys(bu);

    Vector coeffs(sub_sys.algebra()->dim());
    for (int i = 0; i < sub_sys.algebra()->dim(); ++i) {
      const auto& be = sub_sys.algebra()->basis()[i];
      int parent = tu->parent_arrow[be.arrow];
      coeffs(i) =
          phi.value_basis(sys.algebra()->basis_offset(parent) + be.fiber_index) /
          out.mu.weights(u);
    }
    State phi_u(sub_sys.algebra(), std::move(coeffs));
    Disintegration dis = disintegrate(sub_sys, phi_u, tol);

    auto& nu_u = out.nu[u];
    auto& tau_u = out.tau[u];
    for (int lx = 0; lx < tu->num_units(); ++lx) {
      int point = tu->parent_unit[lx];
      nu_u[point] = dis.mu.weights(lx);
      if (dis.field.defined_on(lx)) {
        tau_u.emplace(point, dis.field.at(lx));
        out.fiber_groupoid[u] = tu;
      }
    }
  }

  // Reproduction residual against the composed integration formula.
  State reproduced = gspace_integrate_triple(gs, sys, out);
  out.reproduction_residual = reproduced.distance(phi);

  // Composed measure on the points is quasi-invariant for the
  // transformation-groupoid dynamics.
  UnitMeasure nu_hat;
  nu_hat.weights = RealVector::Zero(t.num_units());
  for (int x = 0; x < t.num_units(); ++x) {
    int u = gs.momentum[x];
    if (out.mu.weights(u) > tol && out.nu.count(u))
      nu_hat.weights(x) = out.mu.weights(u) * out.nu.at(u).at(x);
  }
  out.composed_condition_I =
      check_quasi_invariant(t, nu_hat, rn_derivative(c, beta), std::max(tol, 1e-8));

  // When the cocycle is constant on each G-arrow across the fibre it
  // descends to G, and the base measure inherits quasi-invariance.
  auto table = transformation_arrow_table(gs);
  Cocycle c_g;
  c_g.values.assign(g.num_arrows(), 0.0);
  std::vector<bool> seen(g.num_arrows(), false);
  out.cocycle_descends = true;
  for (size_t i = 0; i < table.size(); ++i) {
    int ga = table[i].second;
    if (!seen[ga]) {
      seen[ga] = true;
      c_g.values[ga] = c.values[i];
    } else if (!approx_equal(c_g.values[ga], c.values[i], tol)) {
      out.cocycle_descends = false;
    }
  }
  if (out.cocycle_descends) {
    out.base_condition_I = check_quasi_invariant(
        g, out.mu, rn_derivative(c_g, beta), std::max(tol, 1e-8));
  } else {
    out.base_condition_I.max_residual = -1;
  }
  return out;
}

State gspace_integrate_triple(const GSpace& gs, const BundleSystem& sys,
                              const GSpaceKmsTriple& triple) {
  const auto& t = *sys.groupoid();
  Vector coeffs = Vector::Zero(sys.algebra()->dim());
  for (int i = 0; i < sys.algebra()->dim(); ++i) {
    const auto& be = sys.algebra()->basis()[i];
    int arrow = be.arrow;
    int x = t.tgt[arrow];
    if (t.src[arrow] != x) continue;  // off the stabiliser, mass zero
    int u = gs.momentum[x];
    if (!triple.nu.count(u) || !triple.tau.count(u)) continue;
    const auto& nu_u = triple.nu.at(u);
    const auto& tau_u = triple.tau.at(u);
    if (!nu_u.count(x) || !tau_u.count(x)) continue;
    const State& tau = tau_u.at(x);
    // Evaluate tau_{u,x} on the class of this arrow in the stabiliser
    // algebra at x.
    const auto& iso_model = tau.algebra();
    const auto& iso_g = *iso_model->bundle()->groupoid();
    int iso_index = -1;
    for (int a = 0; a < iso_g.num_arrows(); ++a) {
      // The stabiliser groupoid is carved out of the fibre subgroupoid,
      // which is carved out of the full transformation groupoid.
      int parent = iso_g.parent_arrow[a];
      int grandparent = iso_g.parent->parent_arrow[parent];
      if (grandparent == arrow) {
        iso_index = iso_model->basis_offset(a) + be.fiber_index;
        break;
      }
    }
    if (iso_index < 0) continue;
    coeffs(i) = triple.mu.weights(u) * nu_u.at(x) * tau.value_basis(iso_index);
  }
  return State(sys.algebra(), std::move(coeffs));
}

}  // namespace fellkms
