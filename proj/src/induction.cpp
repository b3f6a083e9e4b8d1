#include "fellkms/induction.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>
#include <stdexcept>

#include "fellkms/states.hpp"

namespace fellkms {

Matrix ModuleElement::value(int arrow) const {
  auto it = values_.find(arrow);
  if (it != values_.end()) return it->second;
  const Fiber& f = module_->bundle()->fiber(arrow);
  return Matrix::Zero(f.rows(), f.cols());
}

void ModuleElement::set(int arrow, Matrix value, double tol) {
  if (module_->carrier_offset_[arrow] < 0)
    throw std::invalid_argument("module element set outside the source fibre");
  const Fiber& f = module_->bundle()->fiber(arrow);
  if (value.rows() != f.rows() || value.cols() != f.cols())
    throw std::invalid_argument("module value has wrong shape");
  if (!f.contains(value, std::max(tol, 1e-8)))
    throw std::invalid_argument("module value escapes its fibre");
  if (approx_zero(value))
    values_.erase(arrow);
  else
    values_[arrow] = std::move(value);
}

ModuleElement ModuleElement::operator+(const ModuleElement& other) const {
  ModuleElement out = *this;
  for (const auto& [a, v] : other.values_) {
    auto it = out.values_.find(a);
    if (it == out.values_.end())
      out.values_[a] = v;
    else {
      it->second += v;
      if (approx_zero(it->second)) out.values_.erase(it);
    }
  }
  return out;
}

ModuleElement ModuleElement::operator-(const ModuleElement& other) const {
  return *this + other * Complex(-1, 0);
}

ModuleElement ModuleElement::operator*(const Complex& scalar) const {
  ModuleElement out(module_);
  if (approx_zero(scalar)) return out;
  for (const auto& [a, v] : values_) out.values_[a] = scalar * v;
  return out;
}

double ModuleElement::max_abs_difference(const ModuleElement& other) const {
  double m = 0;
  for (const auto& [a, v] : values_)
    m = std::max(m, (v - other.value(a)).cwiseAbs().maxCoeff());
  for (const auto& [a, v] : other.values_)
    m = std::max(m, (value(a) - v).cwiseAbs().maxCoeff());
  return m;
}

bool ModuleElement::is_zero(double tol) const {
  for (const auto& [a, v] : values_)
    if (!approx_zero(v, tol)) return false;
  return true;
}

InductionModule::InductionModule(AlgebraPtr left_algebra, int x)
    : left_(std::move(left_algebra)), x_(x) {
  const auto& g = *left_->groupoid();
  if (x < 0 || x >= g.num_units())
    throw std::invalid_argument("induction module: unknown unit");
  iso_ = isotropy(left_->groupoid(), x);
  right_ = AlgebraModel::build(restrict_bundle(left_->bundle(), iso_));
  carrier_arrows_ = g.arrows_with_source(x);
  carrier_offset_.assign(g.num_arrows(), -1);
  for (int t : carrier_arrows_) {
    carrier_offset_[t] = vector_dim_;
    vector_dim_ += left_->bundle()->fiber(t).dim();
  }
}

ModuleElement InductionModule::delta(int arrow, Matrix value) const {
  ModuleElement e(this);
  e.set(arrow, std::move(value));
  return e;
}

ModuleElement InductionModule::fiber_unit_element() const {
  int u = left_->groupoid()->unit_arrow[x_];
  return delta(u, left_->bundle()->unit_element(x_));
}

Vector InductionModule::onb_coords(const ModuleElement& xi) const {
  Vector v = Vector::Zero(vector_dim_);
  for (const auto& [a, val] : xi.values()) {
    Vector c = left_->bundle()->fiber(a).onb_coords(val);
    v.segment(carrier_offset_[a], c.size()) = c;
  }
  return v;
}

ModuleElement InductionModule::from_onb_coords(const Vector& v) const {
  ModuleElement out(this);
  for (int t : carrier_arrows_) {
    const Fiber& f = left_->bundle()->fiber(t);
    if (f.dim() == 0) continue;
    Matrix val = f.from_onb_coords(v.segment(carrier_offset_[t], f.dim()));
    if (!approx_zero(val)) out.set(t, std::move(val));
  }
  return out;
}

ModuleElement left_act(const Section& g, const ModuleElement& xi) {
  const InductionModule& Y = *xi.module();
  if (g.bundle() != Y.bundle())
    throw std::invalid_argument("left_act: bundle mismatch");
  const auto& gpd = *Y.bundle()->groupoid();
  ModuleElement out(&Y);
  std::map<int, Matrix> acc;
  for (const auto& [tau, vt] : g.values()) {
    for (const auto& [t, vx] : xi.values()) {
      if (!gpd.composable(tau, t)) continue;
      int z = gpd.compose(tau, t);
      if (z < 0) continue;
      Matrix p = vt * vx;
      auto it = acc.find(z);
      if (it == acc.end())
        acc[z] = std::move(p);
      else
        it->second += p;
    }
  }
  for (auto& [z, v] : acc)
    if (!approx_zero(v)) out.set(z, std::move(v));
  return out;
}

ModuleElement right_act(const ModuleElement& xi, const Section& f) {
  const InductionModule& Y = *xi.module();
  if (f.bundle() != Y.right_algebra()->bundle())
    throw std::invalid_argument(
        "right_act: section must live on the isotropy bundle at the module's unit");
  const auto& gpd = *Y.bundle()->groupoid();
  const auto& iso = *Y.isotropy_groupoid();
  ModuleElement out(&Y);
  std::map<int, Matrix> acc;
  // xi *'' f (z) = sum_upsilon xi(z upsilon) f(upsilon^{-1}); with
  // upsilon = w^{-1} the term is xi(t) f(w) placed at z = t w.
  for (const auto& [t, vt] : xi.values()) {
    for (const auto& [w_sub, vw] : f.values()) {
      int w = iso.parent_arrow[w_sub];
      int z = gpd.compose(t, w);
      if (z < 0) continue;
      Matrix p = vt * vw;
      auto it = acc.find(z);
      if (it == acc.end())
        acc[z] = std::move(p);
      else
        it->second += p;
    }
  }
  for (auto& [z, v] : acc)
    if (!approx_zero(v)) out.set(z, std::move(v));
  return out;
}

Section inner(const ModuleElement& xi, const ModuleElement& zeta) {
  const InductionModule& Y = *xi.module();
  if (zeta.module() != &Y)
    throw std::invalid_argument("inner: elements of different modules");
  const auto& gpd = *Y.bundle()->groupoid();
  const auto& iso = *Y.isotropy_groupoid();
  std::map<int, int> sub_of_parent;
  for (int a = 0; a < iso.num_arrows(); ++a)
    sub_of_parent[iso.parent_arrow[a]] = a;

  Section out(Y.right_algebra()->bundle());
  std::map<int, Matrix> acc;
  // <xi, zeta>(gamma) = sum_t xi(t)* zeta(t gamma); the pair (t, u) with
  // u = t gamma contributes at gamma = t^{-1} u.
  for (const auto& [t, vt] : xi.values()) {
    for (const auto& [u, vu] : zeta.values()) {
      int gamma = gpd.compose(gpd.inv[t], u);
      if (gamma < 0) continue;
      Matrix p = vt.adjoint() * vu;
      auto it = acc.find(gamma);
      if (it == acc.end())
        acc[gamma] = std::move(p);
      else
        it->second += p;
    }
  }
  for (auto& [gamma, v] : acc) {
    if (approx_zero(v)) continue;
    out.set(sub_of_parent.at(gamma), std::move(v));
  }
  return out;
}

bool adjointability_check(const Section& g, const ModuleElement& xi,
                          const ModuleElement& zeta, double tol) {
  Section lhs = inner(left_act(g, xi), zeta);
  Section rhs = inner(xi, left_act(involute(g), zeta));
  return lhs.max_abs_difference(rhs) <= tol;
}

Matrix GNSTriple::represent(const Vector& coords) const {
  Matrix out = Matrix::Zero(dim, dim);
  for (int i = 0; i < coords.size(); ++i)
    if (!approx_zero(coords(i), 1e-15)) out += coords(i) * rep[i];
  return out;
}

Matrix GNSTriple::represent(const Section& f) const {
  return represent(algebra->coords(f));
}

Complex GNSTriple::state_value(const Vector& coords) const {
  return (cyclic.adjoint() * represent(coords) * cyclic)(0, 0);
}

Complex GNSTriple::state_value(const Section& f) const {
  return state_value(algebra->coords(f));
}

ValidationReport GNSTriple::verify(const Vector& state_coeffs,
                                   double tol) const {
  ValidationReport report;
  auto add = [&](const std::string& what, const std::string& detail) {
    report.violations.push_back({what, detail, {}});
  };
  const int D = algebra->dim();

  for (int i = 0; i < D; ++i) {
    Vector ei = Vector::Zero(D);
    ei(i) = 1;
    Matrix ri = represent(ei);
    if (!approx_equal(Matrix(ri.adjoint()), represent(algebra->involution(ei)),
                      std::max(tol, 1e-8)))
      add("star", "rep(a)* != rep(a*) on basis element " + std::to_string(i));
    for (int j = 0; j < D; ++j) {
      Vector ej = Vector::Zero(D);
      ej(j) = 1;
      if (!approx_equal(Matrix(ri * represent(ej)),
                        represent(algebra->multiply(ei, ej)),
                        std::max(tol, 1e-8))) {
        add("homomorphism", "rep(ab) != rep(a) rep(b) on basis pair " +
                                std::to_string(i) + "," + std::to_string(j));
        break;
      }
    }
    if (!approx_equal(state_value(ei), state_coeffs(i), std::max(tol, 1e-8)))
      add("state-recovery",
          "<xi, L(a) xi> != phi(a) on basis element " + std::to_string(i));
  }

  // Cyclicity: the orbit of the cyclic vector spans the space.
  Matrix orbit(dim, D);
  for (int i = 0; i < D; ++i) {
    Vector ei = Vector::Zero(D);
    ei(i) = 1;
    orbit.col(i) = represent(ei) * cyclic;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(orbit);
  qr.setThreshold(1e-9);
  if (static_cast<int>(qr.rank()) != dim)
    add("cyclic", "cyclic vector does not generate the space");

  return report;
}

namespace {

/// Quotient data of a PSD Gram matrix: the map q onto orthonormal
/// coordinates of the range and its right inverse.
struct GramQuotient {
  Matrix q;     // r x n with <q u, q v> = u* M v
  Matrix pinv;  // n x r, q pinv = identity on the range
  int rank = 0;
  double min_eigenvalue = 0;
};

GramQuotient gram_quotient(const Matrix& gram, double tol) {
  GramQuotient out;
  Eigen::SelfAdjointEigenSolver<Matrix> es((gram + gram.adjoint()) / 2.0);
  const auto& ev = es.eigenvalues();
  out.min_eigenvalue = ev(0);
  double cut = std::max(tol, 1e-12 * std::max(1.0, ev(ev.size() - 1)));
  std::vector<int> keep;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > cut) keep.push_back(i);
  out.rank = static_cast<int>(keep.size());
  out.q.resize(out.rank, gram.rows());
  out.pinv.resize(gram.rows(), out.rank);
  for (int r = 0; r < out.rank; ++r) {
    double s = std::sqrt(ev(keep[r]));
    out.q.row(r) = s * es.eigenvectors().col(keep[r]).adjoint();
    out.pinv.col(r) = es.eigenvectors().col(keep[r]) / s;
  }
  return out;
}

}  // namespace

GNSTriple gns(const State& phi, double tol) {
  Matrix gram = phi.gram();
  GramQuotient gq = gram_quotient(gram, tol);
  if (gq.min_eigenvalue < -std::max(tol, 1e-8))
    throw std::invalid_argument(
        "gns: functional is not positive (min Gram eigenvalue " +
        std::to_string(gq.min_eigenvalue) + ")");

  const auto& m = *phi.algebra();
  const int D = m.dim();
  GNSTriple out;
  out.algebra = phi.algebra();
  out.dim = gq.rank;
  out.rep.reserve(D);
  for (int i = 0; i < D; ++i) {
    // Left multiplication matrix in algebra coordinates.
    Matrix L = Matrix::Zero(D, D);
    for (int j = 0; j < D; ++j)
      for (const auto& [k, c] : m.basis_product(i, j)) L(k, j) += c;
    out.rep.push_back(gq.q * L * gq.pinv);
  }
  out.cyclic = gq.q * m.unit_coords();
  return out;
}

GNSTriple induce_representation(const GNSTriple& L, const InductionModule& Y,
                                double tol) {
  if (L.algebra != Y.right_algebra())
    throw std::invalid_argument(
        "induce_representation: representation is not of this module's "
        "isotropy algebra");
  if (L.dim == 0) throw std::invalid_argument("induce_representation: degenerate representation");
  const int m = Y.vector_dim();
  const int r = L.dim;
  const int n = m * r;

  // Module vector-space basis: HS-orthonormal delta elements.
  std::vector<ModuleElement> y;
  y.reserve(m);
  for (int t : Y.carrier_arrows()) {
    const Fiber& f = Y.bundle()->fiber(t);
    for (int k = 0; k < f.dim(); ++k) y.push_back(Y.delta(t, f.onb()[k]));
  }

  // Gram of the spanning family y_i (x) h_p with
  // <a (x) h, b (x) k> = <h, L(<a, b>) k>.
  Matrix gram(n, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Matrix blk = L.represent(inner(y[i], y[j]));
      gram.block(i * r, j * r, r, r) = blk;
    }
  GramQuotient gq = gram_quotient(gram, tol);
  if (gq.min_eigenvalue < -std::max(tol, 1e-7))
    throw std::runtime_error("induce_representation: inner-product Gram is not positive");

  const auto& full = Y.left_algebra();
  GNSTriple out;
  out.algebra = full;
  out.dim = gq.rank;
  out.rep.reserve(full->dim());
  for (int i = 0; i < full->dim(); ++i) {
    Section e = full->basis_section(i);
    // Action on the first tensor factor: e acts on y_j by *'. The operator
    // on the spanning family is W tensor the identity of H, so the
    // quotient representative is assembled blockwise.
    Matrix W(m, m);
    for (int j = 0; j < m; ++j) W.col(j) = Y.onb_coords(left_act(e, y[j]));
    Matrix qw = Matrix::Zero(gq.rank, n);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        if (!approx_zero(W(a, b), 1e-15))
          qw.middleCols(b * r, r) += W(a, b) * gq.q.middleCols(a * r, r);
    out.rep.push_back(qw * gq.pinv);
  }

  Vector u = Y.onb_coords(Y.fiber_unit_element());
  Vector span_coords = Vector::Zero(n);
  for (int i = 0; i < m; ++i)
    span_coords.segment(i * r, r) = u(i) * L.cyclic;
  out.cyclic = gq.q * span_coords;
  return out;
}

}  // namespace fellkms
