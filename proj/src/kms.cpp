#include "fellkms/kms.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>
#include <stdexcept>

namespace fellkms {

Section Dynamics::apply(const Section& f, double t) const {
  Section out(f.bundle());
  for (const auto& [a, v] : f.values())
    out.set(a, Matrix(std::exp(Complex(0, t * cocycle.values[a])) * v));
  return out;
}

Section Dynamics::apply_imaginary(const Section& f, double beta) const {
  Section out(f.bundle());
  for (const auto& [a, v] : f.values())
    out.set(a, Matrix(std::exp(-beta * cocycle.values[a]) * v));
  return out;
}

Vector Dynamics::scale_imaginary(const AlgebraModel& m, const Vector& v,
                                 double beta) const {
  Vector out = v;
  for (int i = 0; i < m.dim(); ++i)
    out(i) *= std::exp(-beta * cocycle.values[m.basis()[i].arrow]);
  return out;
}

KmsCertificate is_kms(const State& phi, double beta, const Dynamics& dyn,
                      double tol) {
  KmsCertificate cert;
  cert.beta = beta;
  const auto& m = *phi.algebra();
  if (dyn.groupoid != m.groupoid())
    throw std::invalid_argument("is_kms: dynamics lives on a different groupoid");

  bool state_ok = phi.is_state(std::max(tol, 1e-8));

  // phi(e_i e_j) = e^{-beta c(arrow_i)} phi(e_j e_i) over the basis grid;
  // every element is analytic because the dynamics scales arrows.
  for (int i = 0; i < m.dim(); ++i) {
    double scale = std::exp(-beta * dyn.cocycle.values[m.basis()[i].arrow]);
    for (int j = 0; j < m.dim(); ++j) {
      Complex lhs = 0, rhs = 0;
      for (const auto& [k, c] : m.basis_product(i, j)) lhs += c * phi.value_basis(k);
      for (const auto& [k, c] : m.basis_product(j, i)) rhs += c * phi.value_basis(k);
      rhs *= scale;
      double res = std::abs(lhs - rhs) /
                   std::max({1.0, std::abs(lhs), std::abs(rhs)});
      if (res > cert.kms_residual) {
        cert.kms_residual = res;
        cert.witness = {i, j, lhs, rhs};
      }
    }
  }
  cert.kms_pass = state_ok && cert.kms_residual <= tol;
  cert.pass = cert.kms_pass;
  return cert;
}

QuasiInvarianceCheck check_condition_I(const FiniteGroupoid& g,
                                       const UnitMeasure& mu, double beta,
                                       const Cocycle& c, double tol) {
  return check_quasi_invariant(g, mu, rn_derivative(c, beta), tol);
}

ConditionIIResult check_condition_II(const BundleSystem& sys,
                                     const StateField& phi,
                                     const std::vector<int>& support,
                                     double tol) {
  ConditionIIResult out;
  const auto& g = *sys.groupoid();
  const auto& b = *sys.bundle();
  std::set<int> in_support(support.begin(), support.end());

  for (int x : support) {
    if (!phi.defined_on(x))
      throw std::invalid_argument("check_condition_II: field undefined on unit " +
                                  g.unit_ids[x]);
    for (int gamma : g.isotropy_arrows(x)) {
      for (int eta : g.arrows_with_source(x)) {
        int y = g.tgt[eta];
        // Units outside the support carry no field member; such eta are
        // null-set exceptions.
        if (!in_support.count(y) || !phi.defined_on(y)) continue;
        int ge = g.compose(eta, gamma);       // eta gamma
        int conj = g.compose(ge, g.inv[eta]); // eta gamma eta^{-1}
        const Fiber& fa = b.fiber(gamma);
        const Fiber& fx = b.fiber(eta);
        for (int ka = 0; ka < fa.dim(); ++ka) {
          const Matrix& a = fa.basis()[ka];
          for (int kx = 0; kx < fx.dim(); ++kx) {
            const Matrix& xi = fx.basis()[kx];
            // phi_{s(eta)}(a xi* xi delta_gamma)
            Matrix lhs_el = a * (xi.adjoint() * xi);
            bool in_span = false;
            Vector lc = fa.to_coords(lhs_el, &in_span, 1e-8);
            if (!in_span)
              throw std::runtime_error(
                  "check_condition_II: a xi* xi escapes its fibre");
            Complex lhs = 0;
            for (int l = 0; l < lc.size(); ++l)
              lhs += lc(l) * phi.at(x).value_basis(
                                 sys.isotropy_basis_index(x, gamma, l));
            // phi_{r(eta)}(xi a xi* delta_{eta gamma eta^{-1}})
            Matrix rhs_el = xi * a * xi.adjoint();
            const Fiber& fc = b.fiber(conj);
            Vector rc = fc.to_coords(rhs_el, &in_span, 1e-8);
            if (!in_span)
              throw std::runtime_error(
                  "check_condition_II: xi a xi* escapes its fibre");
            Complex rhs = 0;
            for (int l = 0; l < rc.size(); ++l)
              rhs += rc(l) * phi.at(y).value_basis(
                                 sys.isotropy_basis_index(y, conj, l));
            double res = std::abs(lhs - rhs) /
                         std::max({1.0, std::abs(lhs), std::abs(rhs)});
            if (res > out.max_residual) {
              out.max_residual = res;
              if (res > tol && out.ok) {
                out.ok = false;
                out.witness = {x, gamma, eta, ka, kx, lhs, rhs};
              }
            }
          }
        }
      }
    }
  }
  out.ok = out.max_residual <= tol;
  return out;
}

std::pair<State, KmsCertificate> kms_from_pair(const BundleSystem& sys,
                                               const UnitMeasure& mu,
                                               const StateField& phi,
                                               double beta, const Cocycle& c,
                                               double tol) {
  QuasiInvarianceCheck one =
      check_condition_I(*sys.groupoid(), mu, beta, c, std::max(tol, 1e-8));
  if (!one.ok) {
    std::ostringstream os;
    os << "kms_from_pair: measure is not quasi-invariant with derivative "
          "e^{-beta c}; witness arrow "
       << sys.groupoid()->arrow_ids[one.witness_arrow];
    throw std::invalid_argument(os.str());
  }
  ConditionIIResult two =
      check_condition_II(sys, phi, mu.support(tol), std::max(tol, 1e-8));
  if (!two.ok) {
    std::ostringstream os;
    os << "kms_from_pair: exchange condition fails at unit "
       << sys.groupoid()->unit_ids[two.witness.x] << " with residual "
       << two.max_residual;
    throw std::invalid_argument(os.str());
  }
  State integrated = integrate(sys, mu, phi, tol);
  KmsCertificate cert = is_kms(integrated, beta, Dynamics{sys.groupoid(), c}, tol);
  cert.condition_I_residual = one.max_residual;
  cert.condition_II_residual = two.max_residual;
  cert.pass = cert.kms_pass;
  return {std::move(integrated), cert};
}

KmsDisintegration pair_from_kms(const BundleSystem& sys, const State& phi,
                                double beta, const Cocycle& c, double tol) {
  KmsDisintegration out;
  out.certificate = is_kms(phi, beta, Dynamics{sys.groupoid(), c}, tol);
  if (!out.certificate.pass)
    throw std::invalid_argument(
        "pair_from_kms: state fails the KMS identity (residual " +
        std::to_string(out.certificate.kms_residual) + ")");
  Disintegration dis = disintegrate(sys, phi, tol);
  out.mu = std::move(dis.mu);
  out.field = std::move(dis.field);
  out.condition_I =
      check_condition_I(*sys.groupoid(), out.mu, beta, c, std::max(tol, 1e-7));
  std::vector<int> support(out.field.support.begin(), out.field.support.end());
  out.condition_II = check_condition_II(sys, out.field, support, std::max(tol, 1e-7));
  return out;
}

ConditionIIResult check_crossed_product_condition(
    const BundleSystem& sys, const StateField& phi, const GroupoidAction& act,
    const std::vector<int>& support, double tol) {
  ConditionIIResult out;
  const auto& g = *sys.groupoid();
  if (act.groupoid != sys.groupoid())
    throw std::invalid_argument(
        "check_crossed_product_condition: action lives on a different groupoid");
  // The system must be of pullback form: fibre over gamma spanned by
  // A(r(gamma)) U_gamma.
  for (int a = 0; a < g.num_arrows(); ++a) {
    const Fiber& f = sys.bundle()->fiber(a);
    for (const auto& m : act.algebra[g.tgt[a]])
      if (!f.contains(m * act.unitary[a], 1e-8))
        throw std::invalid_argument(
            "check_crossed_product_condition: bundle is not the pullback of "
            "this action");
  }
  std::set<int> in_support(support.begin(), support.end());

  auto alpha = [&](int arrow, const Matrix& m) { return act.apply(arrow, m); };

  for (int x : support) {
    for (int gamma : g.isotropy_arrows(x)) {
      for (int eta : g.arrows_with_source(x)) {
        int y = g.tgt[eta];
        if (!in_support.count(y) || !phi.defined_on(y)) continue;
        int ge = g.compose(eta, gamma);
        int conj = g.compose(ge, g.inv[eta]);
        int gamma_etainv = g.compose(gamma, g.inv[eta]);
        for (size_t ka = 0; ka < act.algebra[x].size(); ++ka) {
          const Matrix& a = act.algebra[x][ka];
          for (size_t kx = 0; kx < act.algebra[y].size(); ++kx) {
            const Matrix& xi = act.algebra[y][kx];
            // (gamma, a alpha_{gamma eta^{-1}}(xi* xi)) against
            // (eta gamma eta^{-1},
            //  xi alpha_eta(a) alpha_{eta gamma eta^{-1}}(xi*)).
            Matrix lhs_coeff = a * alpha(gamma_etainv, xi.adjoint() * xi);
            Matrix rhs_coeff = xi * alpha(eta, a) * alpha(conj, xi.adjoint());
            // Ambient realisation: (gamma, w) corresponds to w U_gamma.
            Matrix lhs_el = lhs_coeff * act.unitary[gamma];
            Matrix rhs_el = rhs_coeff * act.unitary[conj];
            const Fiber& fl = sys.bundle()->fiber(gamma);
            const Fiber& fr = sys.bundle()->fiber(conj);
            bool ok1 = false, ok2 = false;
            Vector lc = fl.to_coords(lhs_el, &ok1, 1e-8);
            Vector rc = fr.to_coords(rhs_el, &ok2, 1e-8);
            if (!ok1 || !ok2)
              throw std::runtime_error(
                  "check_crossed_product_condition: element escapes its fibre");
            Complex lhs = 0, rhs = 0;
            for (int l = 0; l < lc.size(); ++l)
              lhs += lc(l) * phi.at(x).value_basis(
                                 sys.isotropy_basis_index(x, gamma, l));
            for (int l = 0; l < rc.size(); ++l)
              rhs += rc(l) * phi.at(y).value_basis(
                                 sys.isotropy_basis_index(y, conj, l));
            double res = std::abs(lhs - rhs) /
                         std::max({1.0, std::abs(lhs), std::abs(rhs)});
            if (res > out.max_residual) {
              out.max_residual = res;
              if (res > tol && out.ok) {
                out.ok = false;
                out.witness = {x,  gamma, eta, static_cast<int>(ka),
                               static_cast<int>(kx), lhs, rhs};
              }
            }
          }
        }
      }
    }
  }
  out.ok = out.max_residual <= tol;
  return out;
}

namespace {

/// Real parametrisation of a Hermitian matrix: the diagonal followed by
/// (re, im) pairs of the strictly upper triangle.
int herm_param_count(int n) { return n * n; }

Matrix herm_from_params(const RealVector& p, int n) {
  Matrix m(n, n);
  int idx = 0;
  for (int i = 0; i < n; ++i) m(i, i) = p(idx++);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double re = p(idx++), im = p(idx++);
      m(i, j) = Complex(re, im);
      m(j, i) = Complex(re, -im);
    }
  return m;
}

RealVector herm_to_params(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  RealVector p(herm_param_count(n));
  int idx = 0;
  for (int i = 0; i < n; ++i) p(idx++) = m(i, i).real();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      p(idx++) = m(i, j).real();
      p(idx++) = m(i, j).imag();
    }
  return p;
}

/// Real-linear coefficients of p -> tr(rho(p) K) as two rows (Re, Im).
void trace_functional_rows(const Matrix& K, RealVector& re_row,
                           RealVector& im_row) {
  const int n = static_cast<int>(K.rows());
  re_row = RealVector::Zero(herm_param_count(n));
  im_row = RealVector::Zero(herm_param_count(n));
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    Complex c = K(i, i);  // coefficient of rho_ii
    re_row(idx) = c.real();
    im_row(idx) = c.imag();
    ++idx;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Complex c_re = K(j, i) + K(i, j);                  // d tr / d re_ij
      Complex c_im = Complex(0, 1) * (K(j, i) - K(i, j));  // d tr / d im_ij
      re_row(idx) = c_re.real();
      im_row(idx) = c_re.imag();
      ++idx;
      re_row(idx) = c_im.real();
      im_row(idx) = c_im.imag();
      ++idx;
    }
}

Matrix project_psd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es((m + m.adjoint()) / 2.0);
  RealVector ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() *
         es.eigenvectors().adjoint();
}

}  // namespace

KmsSolveResult solve_kms(const BundleSystem& sys, const Cocycle& c,
                         double beta, const KmsSolveOptions& options) {
  KmsSolveResult result;
  const auto& g = *sys.groupoid();
  const double tol = options.tol;

  QuasiInvariantSolution qs = solve_quasi_invariant(g, c, beta, tol);
  for (const auto& diag : qs.orbit_diagnoses) {
    if (!diag.feasible) {
      std::ostringstream os;
      os << "orbit {";
      for (size_t i = 0; i < diag.units.size(); ++i)
        os << (i ? "," : "") << g.unit_ids[diag.units[i]];
      os << "}: cycle obstruction at arrow "
         << g.arrow_ids[diag.obstruction_arrow]
         << " forces zero mass";
      result.diagnoses.push_back(os.str());
    }
  }

  for (const auto& mu : qs.extreme_points) {
    KmsCandidate cand;
    cand.mu = mu;
    std::vector<int> support = mu.support(tol);

    // One Hermitian density per in-support unit, acting through the
    // representation of its isotropy algebra. States of the isotropy
    // algebra are exactly the trace functionals against such densities.
    std::vector<int> rep_dim(support.size());
    std::vector<int> param_offset(support.size());
    int total_params = 0;
    for (size_t s = 0; s < support.size(); ++s) {
      rep_dim[s] = sys.isotropy_algebra(support[s])->rep_dim();
      param_offset[s] = total_params;
      total_params += herm_param_count(rep_dim[s]);
    }
    std::map<int, int> slot;
    for (size_t s = 0; s < support.size(); ++s) slot[support[s]] = static_cast<int>(s);

    // Precompute represented basis elements per in-support unit.
    std::vector<std::vector<Matrix>> rep_basis(support.size());
    for (size_t s = 0; s < support.size(); ++s) {
      const auto& model = sys.isotropy_algebra(support[s]);
      rep_basis[s].reserve(model->dim());
      for (int i = 0; i < model->dim(); ++i)
        rep_basis[s].push_back(model->represent(model->basis_section(i)));
    }
    auto rep_of_coords = [&](size_t s, const Vector& coords) {
      Matrix K = Matrix::Zero(rep_dim[s], rep_dim[s]);
      for (int i = 0; i < coords.size(); ++i)
        if (!approx_zero(coords(i), 1e-15)) K += coords(i) * rep_basis[s][i];
      return K;
    };

    // Affine system rows over the real parameters.
    std::vector<RealVector> rows;
    std::vector<double> rhs;
    auto add_rows = [&](const std::map<size_t, Matrix>& terms, Complex value) {
      RealVector re_total = RealVector::Zero(total_params);
      RealVector im_total = RealVector::Zero(total_params);
      for (const auto& [s, K] : terms) {
        RealVector re_row, im_row;
        trace_functional_rows(K, re_row, im_row);
        re_total.segment(param_offset[s], re_row.size()) += re_row;
        im_total.segment(param_offset[s], im_row.size()) += im_row;
      }
      rows.push_back(re_total);
      rhs.push_back(value.real());
      rows.push_back(im_total);
      rhs.push_back(value.imag());
    };

    // Normalisation: tr(rho_x rep(1)) = 1.
    for (size_t s = 0; s < support.size(); ++s) {
      const auto& model = sys.isotropy_algebra(support[s]);
      add_rows({{s, rep_of_coords(s, model->unit_coords())}}, Complex(1, 0));
    }

    // Centraliser of A_x: tr(rho_x rep(u e - e u)) = 0.
    for (size_t s = 0; s < support.size(); ++s) {
      int x = support[s];
      const auto& model = sys.isotropy_algebra(x);
      int u_sub = sys.isotropy_groupoid(x)->unit_arrow[0];
      for (int k = 0; k < sys.isotropy_bundle(x)->fiber(u_sub).dim(); ++k) {
        Vector u = Vector::Zero(model->dim());
        u(model->basis_offset(u_sub) + k) = 1;
        for (int i = 0; i < model->dim(); ++i) {
          Vector e = Vector::Zero(model->dim());
          e(i) = 1;
          Vector commutator = model->multiply(u, e) - model->multiply(e, u);
          if (commutator.cwiseAbs().maxCoeff() < 1e-14) continue;
          add_rows({{s, rep_of_coords(s, commutator)}}, Complex(0, 0));
        }
      }
    }

    // Exchange condition rows linking units along arrows in the orbit.
    const auto& b = *sys.bundle();
    std::set<int> in_support(support.begin(), support.end());
    for (int x : support) {
      for (int gamma : g.isotropy_arrows(x)) {
        for (int eta : g.arrows_with_source(x)) {
          int y = g.tgt[eta];
          if (!in_support.count(y)) continue;
          int conj = g.compose(g.compose(eta, gamma), g.inv[eta]);
          const Fiber& fa = b.fiber(gamma);
          const Fiber& fx = b.fiber(eta);
          for (int ka = 0; ka < fa.dim(); ++ka)
            for (int kx = 0; kx < fx.dim(); ++kx) {
              const Matrix& a = fa.basis()[ka];
              const Matrix& xi = fx.basis()[kx];
              Vector lc = Vector::Zero(sys.isotropy_algebra(x)->dim());
              {
                bool in_span = false;
                Vector cc = fa.to_coords(a * (xi.adjoint() * xi), &in_span, 1e-8);
                for (int l = 0; l < cc.size(); ++l)
                  lc(sys.isotropy_basis_index(x, gamma, l)) += cc(l);
              }
              Vector rc = Vector::Zero(sys.isotropy_algebra(y)->dim());
              {
                bool in_span = false;
                Vector cc = b.fiber(conj).to_coords(xi * a * xi.adjoint(),
                                                    &in_span, 1e-8);
                for (int l = 0; l < cc.size(); ++l)
                  rc(sys.isotropy_basis_index(y, conj, l)) += cc(l);
              }
              std::map<size_t, Matrix> terms;
              size_t sx = slot.at(x), sy = slot.at(y);
              Matrix KL = rep_of_coords(sx, lc);
              Matrix KR = rep_of_coords(sy, rc);
              if (sx == sy)
                terms[sx] = KL - KR;
              else {
                terms[sx] = KL;
                terms[sy] = -KR;
              }
              add_rows(terms, Complex(0, 0));
            }
        }
      }
    }

    Eigen::MatrixXd C(rows.size(), total_params);
    Eigen::VectorXd d(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
      C.row(r) = rows[r].transpose();
      d(r) = rhs[r];
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(C);

    // Seed: the normalised trace of each representation.
    RealVector z(total_params);
    for (size_t s = 0; s < support.size(); ++s) {
      const auto& model = sys.isotropy_algebra(support[s]);
      Matrix rep_unit = rep_of_coords(s, model->unit_coords());
      double nu = rep_unit.trace().real();
      Matrix rho = Matrix::Identity(rep_dim[s], rep_dim[s]) / nu;
      z.segment(param_offset[s], herm_param_count(rep_dim[s])) =
          herm_to_params(rho);
    }

    // Alternating projection between the affine set and the cone of
    // positive densities.
    const double inner_tol = std::max(1e-13, tol * 1e-3);
    bool converged = false;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
      Eigen::VectorXd residual = C * z.matrix() - d;
      if (residual.cwiseAbs().maxCoeff() > inner_tol) z -= cod.solve(residual);
      double psd_defect = 0;
      for (size_t s = 0; s < support.size(); ++s) {
        Matrix rho = herm_from_params(
            z.segment(param_offset[s], herm_param_count(rep_dim[s])),
            rep_dim[s]);
        Matrix proj = project_psd(rho);
        psd_defect = std::max(psd_defect,
                              (rho - proj).cwiseAbs().maxCoeff());
        z.segment(param_offset[s], herm_param_count(rep_dim[s])) =
            herm_to_params(proj);
      }
      Eigen::VectorXd post = C * z.matrix() - d;
      if (post.cwiseAbs().maxCoeff() <= inner_tol && psd_defect <= inner_tol) {
        converged = true;
        break;
      }
    }

    if (!converged) {
      cand.converged = false;
      cand.diagnosis =
          "alternating projection did not converge; the exchange-condition "
          "affine set may not intersect the state space on this orbit";
      result.candidates.push_back(std::move(cand));
      continue;
    }

    // Read the field off the densities.
    StateField field;
    for (size_t s = 0; s < support.size(); ++s) {
      int x = support[s];
      const auto& model = sys.isotropy_algebra(x);
      Matrix rho = herm_from_params(
          z.segment(param_offset[s], herm_param_count(rep_dim[s])),
          rep_dim[s]);
      Vector coeffs(model->dim());
      for (int i = 0; i < model->dim(); ++i)
        coeffs(i) = (rho * rep_basis[s][i]).trace();
      field.members.emplace(x, State(model, std::move(coeffs)));
      field.support.insert(x);
    }

    cand.converged = true;
    try {
      auto [state, cert] = kms_from_pair(sys, mu, field, beta, c, tol);
      cand.state = std::move(state);
      cand.certificate = cert;
      cand.field = std::move(field);
      if (!cert.pass)
        cand.diagnosis = "integrated state failed the KMS re-certification";
    } catch (const std::exception& e) {
      cand.converged = false;
      cand.diagnosis = std::string("re-certification failed: ") + e.what();
    }
    result.candidates.push_back(std::move(cand));
  }

  if (result.candidates.empty() && result.diagnoses.empty())
    result.diagnoses.push_back("no orbits");
  return result;
}

}  // namespace fellkms
