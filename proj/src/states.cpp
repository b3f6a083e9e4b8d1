#include "fellkms/states.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>
#include <stdexcept>

namespace fellkms {

State::State(AlgebraPtr algebra, Vector coeffs)
    : algebra_(std::move(algebra)), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != algebra_->dim())
    throw std::invalid_argument("state: coefficient vector has wrong length");
}

Complex State::value(const Vector& coords) const {
  return coords.transpose() * coeffs_;
}

Complex State::value(const Section& f) const {
  return value(algebra_->coords(f));
}

Matrix State::gram() const {
  if (gram_) return *gram_;
  const int D = algebra_->dim();
  Matrix M = Matrix::Zero(D, D);
  for (int i = 0; i < D; ++i)
    for (const auto& [l, sc] : algebra_->basis_involution(i))
      for (int j = 0; j < D; ++j)
        for (const auto& [k, pc] : algebra_->basis_product(l, j))
          M(i, j) += sc * pc * coeffs_(k);
  gram_ = M;
  return M;
}

double State::min_gram_eigenvalue() const {
  Matrix M = gram();
  Eigen::SelfAdjointEigenSolver<Matrix> es((M + M.adjoint()) / 2.0);
  return es.eigenvalues()(0);
}

bool State::is_positive(double tol) const {
  // The Gram matrix must be Hermitian up to tolerance and PSD.
  Matrix M = gram();
  if ((M - M.adjoint()).cwiseAbs().maxCoeff() > std::max(tol, 1e-8)) return false;
  return min_gram_eigenvalue() >= -std::max(tol, 1e-8);
}

Complex State::norm_value() const {
  return value(algebra_->unit_coords());
}

bool State::is_state(double tol) const {
  return is_positive(tol) && approx_equal(norm_value(), Complex(1, 0), tol);
}

double State::trace_defect() const {
  const int D = algebra_->dim();
  double defect = 0;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) {
      Complex ab = 0, ba = 0;
      for (const auto& [k, c] : algebra_->basis_product(i, j)) ab += c * coeffs_(k);
      for (const auto& [k, c] : algebra_->basis_product(j, i)) ba += c * coeffs_(k);
      defect = std::max(defect, std::abs(ab - ba));
    }
  return defect;
}

bool State::is_trace(double tol) const { return trace_defect() <= tol; }

double State::distance(const State& other) const {
  return (coeffs_ - other.coeffs_).cwiseAbs().maxCoeff();
}

BundleSystem::BundleSystem(BundlePtr bundle) : bundle_(std::move(bundle)) {
  full_ = AlgebraModel::build(bundle_);
  const auto& g = *bundle_->groupoid();
  iso_g_.reserve(g.num_units());
  iso_b_.reserve(g.num_units());
  iso_a_.reserve(g.num_units());
  for (int x = 0; x < g.num_units(); ++x) {
    iso_g_.push_back(isotropy(bundle_->groupoid(), x));
    iso_b_.push_back(restrict_bundle(bundle_, iso_g_.back()));
    iso_a_.push_back(AlgebraModel::build(iso_b_.back()));
  }
}

int BundleSystem::isotropy_basis_index(int x, int parent_arrow,
                                       int fiber_index) const {
  const auto& iso = *iso_g_[x];
  for (int a = 0; a < iso.num_arrows(); ++a)
    if (iso.parent_arrow[a] == parent_arrow)
      return iso_a_[x]->basis_offset(a) + fiber_index;
  throw std::invalid_argument("arrow is not in the isotropy at this unit");
}

int BundleSystem::full_basis_index(int x, int iso_basis) const {
  const auto& be = iso_a_[x]->basis()[iso_basis];
  int parent = iso_g_[x]->parent_arrow[be.arrow];
  return full_->basis_offset(parent) + be.fiber_index;
}

State BundleSystem::isotropy_state_from_full(const Vector& full_coeffs, int x,
                                             double mass) const {
  const auto& iso_model = iso_a_[x];
  Vector c = Vector::Zero(iso_model->dim());
  for (int i = 0; i < iso_model->dim(); ++i)
    c(i) = full_coeffs(full_basis_index(x, i)) / mass;
  return State(iso_model, std::move(c));
}

std::vector<int> BundleSystem::unit_fiber_basis_indices() const {
  std::vector<int> out;
  const auto& g = *bundle_->groupoid();
  for (int x = 0; x < g.num_units(); ++x) {
    int u = g.unit_arrow[x];
    for (int k = 0; k < bundle_->fiber(u).dim(); ++k)
      out.push_back(full_->basis_offset(u) + k);
  }
  return out;
}

CentralizerCheck centralizer_contains(const State& phi,
                                      const std::vector<int>& sub_basis,
                                      double tol) {
  CentralizerCheck out;
  const auto& m = *phi.algebra();
  for (int k : sub_basis) {
    for (int g = 0; g < m.dim(); ++g) {
      Complex kg = 0, gk = 0;
      for (const auto& [l, c] : m.basis_product(k, g)) kg += c * phi.value_basis(l);
      for (const auto& [l, c] : m.basis_product(g, k)) gk += c * phi.value_basis(l);
      double res = std::abs(kg - gk) /
                   std::max({1.0, std::abs(kg), std::abs(gk)});
      out.max_residual = std::max(out.max_residual, res);
      if (res > tol && out.ok) {
        out.ok = false;
        out.witness_sub = k;
        out.witness_basis = g;
      }
    }
  }
  return out;
}

CentralizerCheck centralizer_contains(const State& phi,
                                      const std::vector<Section>& sub_basis,
                                      double tol) {
  CentralizerCheck out;
  const auto& m = *phi.algebra();
  for (size_t s = 0; s < sub_basis.size(); ++s) {
    Vector k = m.coords(sub_basis[s]);
    for (int g = 0; g < m.dim(); ++g) {
      Vector eg = Vector::Zero(m.dim());
      eg(g) = 1;
      Complex kg = phi.value(m.multiply(k, eg));
      Complex gk = phi.value(m.multiply(eg, k));
      double res = std::abs(kg - gk) /
                   std::max({1.0, std::abs(kg), std::abs(gk)});
      out.max_residual = std::max(out.max_residual, res);
      if (res > tol && out.ok) {
        out.ok = false;
        out.witness_sub = static_cast<int>(s);
        out.witness_basis = g;
      }
    }
  }
  return out;
}

State integrate(const BundleSystem& sys, const UnitMeasure& mu,
                const StateField& phi, double tol) {
  const auto& g = *sys.groupoid();
  if (!mu.is_probability(tol))
    throw std::invalid_argument("integrate: measure is not a probability measure");
  for (int x : mu.support(tol)) {
    if (!phi.defined_on(x))
      throw std::invalid_argument(
          "integrate: field undefined on in-support unit " + g.unit_ids[x]);
    const State& sx = phi.at(x);
    if (sx.algebra() != sys.isotropy_algebra(x))
      throw std::invalid_argument(
          "integrate: field member does not live on the isotropy algebra at " +
          g.unit_ids[x]);
    if (!sx.is_state(std::max(tol, 1e-8)))
      throw std::invalid_argument("integrate: field member at " +
                                  g.unit_ids[x] + " is not a state");
    // A_x must be contained in the centraliser of phi_x.
    std::vector<int> ax_basis;
    int u_sub = sys.isotropy_groupoid(x)->unit_arrow[0];
    for (int k = 0; k < sys.isotropy_bundle(x)->fiber(u_sub).dim(); ++k)
      ax_basis.push_back(sys.isotropy_algebra(x)->basis_offset(u_sub) + k);
    CentralizerCheck cc = centralizer_contains(sx, ax_basis, std::max(tol, 1e-8));
    if (!cc.ok)
      throw std::invalid_argument(
          "integrate: A_x is not in the centraliser of the field member at " +
          g.unit_ids[x]);
  }

  const auto& full = *sys.algebra();
  Vector coeffs = Vector::Zero(full.dim());
  for (int i = 0; i < full.dim(); ++i) {
    const auto& be = full.basis()[i];
    int gamma = be.arrow;
    int x = g.tgt[gamma];
    if (g.src[gamma] != x) continue;
    if (mu.weights(x) <= tol || !phi.defined_on(x)) continue;
    int iso_i = sys.isotropy_basis_index(x, gamma, be.fiber_index);
    coeffs(i) = mu.weights(x) * phi.at(x).value_basis(iso_i);
  }
  State out(sys.algebra(), std::move(coeffs));

  CentralizerCheck post =
      centralizer_contains(out, sys.unit_fiber_basis_indices(), std::max(tol, 1e-8));
  if (!post.ok)
    throw std::runtime_error(
        "integrate: integrated state lost the unit-fibre centraliser property");
  return out;
}

Disintegration disintegrate(const BundleSystem& sys, const State& phi,
                            double tol) {
  if (phi.algebra() != sys.algebra())
    throw std::invalid_argument("disintegrate: state is not on this system's algebra");
  CentralizerCheck pre =
      centralizer_contains(phi, sys.unit_fiber_basis_indices(), std::max(tol, 1e-8));
  if (!pre.ok)
    throw std::invalid_argument(
        "disintegrate: centraliser of the state does not contain the "
        "unit-fibre subalgebra (residual " +
        std::to_string(pre.max_residual) + ")");

  const auto& g = *sys.groupoid();
  const auto& full = *sys.algebra();

  Disintegration out;

  // A state with the centraliser property vanishes on sections supported
  // off the isotropy bundle.
  for (int i = 0; i < full.dim(); ++i) {
    int gamma = full.basis()[i].arrow;
    if (g.src[gamma] != g.tgt[gamma])
      out.off_isotropy_residual =
          std::max(out.off_isotropy_residual, std::abs(phi.value_basis(i)));
  }
  if (out.off_isotropy_residual > std::max(tol, 1e-8))
    throw std::runtime_error(
        "disintegrate: state does not vanish off the isotropy bundle "
        "(residual " +
        std::to_string(out.off_isotropy_residual) +
        "); not a valid input state");

  out.mu.weights = RealVector::Zero(g.num_units());
  for (int x = 0; x < g.num_units(); ++x) {
    Section ux = Section::delta(sys.bundle(), g.unit_arrow[x],
                                sys.bundle()->unit_element(x));
    Complex mass = phi.value(ux);
    if (std::abs(mass.imag()) > std::max(tol, 1e-8))
      throw std::runtime_error("disintegrate: unit mass is not real at " +
                               g.unit_ids[x]);
    out.mu.weights(x) = std::max(0.0, mass.real());
  }

  for (int x : out.mu.support(tol)) {
    State sx = sys.isotropy_state_from_full(phi.coeffs(), x, out.mu.weights(x));
    if (!sx.is_state(std::max(tol, 1e-7)))
      throw std::runtime_error(
          "disintegrate: extracted field member is not a state at " +
          g.unit_ids[x]);
    std::vector<int> ax_basis;
    int u_sub = sys.isotropy_groupoid(x)->unit_arrow[0];
    for (int k = 0; k < sys.isotropy_bundle(x)->fiber(u_sub).dim(); ++k)
      ax_basis.push_back(sys.isotropy_algebra(x)->basis_offset(u_sub) + k);
    CentralizerCheck cc = centralizer_contains(sx, ax_basis, std::max(tol, 1e-7));
    if (!cc.ok)
      throw std::runtime_error(
          "disintegrate: A_x is not in the centraliser of the field member at " +
          g.unit_ids[x]);
    out.field.members.emplace(x, std::move(sx));
    out.field.support.insert(x);
  }
  return out;
}

C0XDecomposition decompose_c0x_state(const BundleSystem& sys, const State& phi,
                                     double tol) {
  const auto& g = *sys.groupoid();
  for (int a = 0; a < g.num_arrows(); ++a)
    if (g.src[a] != g.tgt[a])
      throw std::invalid_argument(
          "decompose_c0x_state: algebra is not a direct sum over the base "
          "(arrow " +
          g.arrow_ids[a] + " joins different units)");
  if (phi.algebra() != sys.algebra())
    throw std::invalid_argument("decompose_c0x_state: state is not on this algebra");

  C0XDecomposition out;
  out.trace_flag = phi.is_trace(std::max(tol, 1e-8));
  out.mu.weights = RealVector::Zero(g.num_units());
  for (int x = 0; x < g.num_units(); ++x) {
    // mu(x) = phi(unit of the fibre algebra over x).
    Vector unit_block = Vector::Zero(sys.algebra()->dim());
    const auto& iso_model = sys.isotropy_algebra(x);
    Vector iso_unit = iso_model->unit_coords();
    for (int i = 0; i < iso_model->dim(); ++i)
      unit_block(sys.full_basis_index(x, i)) = iso_unit(i);
    Complex mass = phi.value(unit_block);
    out.mu.weights(x) = std::max(0.0, mass.real());
  }

  for (int x : out.mu.support(tol)) {
    State sx = sys.isotropy_state_from_full(phi.coeffs(), x, out.mu.weights(x));
    out.fiber_trace_flags[x] = sx.is_trace(std::max(tol, 1e-8));
    out.fiber_states.emplace(x, std::move(sx));
  }

  // Reproduction: phi(f) = sum_x mu(x) phi_x(f(x)) on every basis element.
  const auto& full = *sys.algebra();
  for (int i = 0; i < full.dim(); ++i) {
    int gamma = full.basis()[i].arrow;
    int x = g.tgt[gamma];
    Complex expected = 0;
    if (out.mu.weights(x) > tol && out.fiber_states.count(x)) {
      int iso_i = sys.isotropy_basis_index(x, gamma, full.basis()[i].fiber_index);
      expected = out.mu.weights(x) * out.fiber_states.at(x).value_basis(iso_i);
    }
    out.reproduction_residual = std::max(
        out.reproduction_residual, std::abs(phi.value_basis(i) - expected));
  }
  return out;
}

}  // namespace fellkms
