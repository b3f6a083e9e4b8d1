#include "fellkms/fellbundle.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace fellkms {

Fiber::Fiber(int arrow, int rows, int cols, std::vector<Matrix> basis)
    : arrow_(arrow), rows_(rows), cols_(cols), basis_(std::move(basis)) {
  for (const auto& m : basis_) {
    if (m.rows() != rows_ || m.cols() != cols_)
      throw std::invalid_argument("fiber basis element has wrong shape");
  }
  basis_matrix_.resize(rows_ * cols_, dim());
  for (int j = 0; j < dim(); ++j) basis_matrix_.col(j) = vectorize(basis_[j]);
  if (dim() > 0) {
    basis_solver_.compute(basis_matrix_);
    numeric_rank_ = static_cast<int>(basis_solver_.rank());
  }

  // Hilbert-Schmidt orthonormalisation via thin QR of the vectorised basis.
  if (dim() > 0) {
    Eigen::HouseholderQR<Matrix> qr(basis_matrix_);
    Matrix q = qr.householderQ() * Matrix::Identity(rows_ * cols_, dim());
    onb_matrix_ = q;
    onb_.reserve(dim());
    for (int j = 0; j < dim(); ++j)
      onb_.push_back(unvectorize(q.col(j), rows_, cols_));
  } else {
    onb_matrix_.resize(rows_ * cols_, 0);
  }
}

Vector Fiber::to_coords(const Matrix& v, bool* out_in_span, double tol) const {
  if (dim() == 0) {
    if (out_in_span) *out_in_span = approx_zero(v, tol);
    return Vector(0);
  }
  Vector rhs = vectorize(v);
  Vector coords = basis_solver_.solve(rhs);
  if (out_in_span) {
    double residual = (basis_matrix_ * coords - rhs).norm();
    double scale = std::max(1.0, rhs.norm());
    *out_in_span = residual <= tol * scale;
  }
  return coords;
}

Matrix Fiber::from_coords(const Vector& coords) const {
  Matrix out = Matrix::Zero(rows_, cols_);
  for (int j = 0; j < dim(); ++j) out += coords(j) * basis_[j];
  return out;
}

bool Fiber::contains(const Matrix& v, double tol) const {
  bool in_span = false;
  to_coords(v, &in_span, tol);
  return in_span;
}

bool Fiber::basis_independent(double tol) const {
  (void)tol;
  return numeric_rank_ == dim();
}

Vector Fiber::onb_coords(const Matrix& v) const {
  return onb_matrix_.adjoint() * vectorize(v);
}

Matrix Fiber::from_onb_coords(const Vector& coords) const {
  Matrix out = Matrix::Zero(rows_, cols_);
  for (int j = 0; j < dim(); ++j) out += coords(j) * onb_[j];
  return out;
}

BundlePtr FellBundle::build(GroupoidPtr groupoid, std::vector<Fiber> fibers) {
  auto b = std::make_shared<FellBundle>();
  if (static_cast<int>(fibers.size()) != groupoid->num_arrows())
    throw std::invalid_argument("bundle: one fiber per arrow required");
  b->groupoid_ = std::move(groupoid);
  b->fibers_ = std::move(fibers);

  const auto& g = *b->groupoid_;
  b->unit_dim_.assign(g.num_units(), -1);
  for (int x = 0; x < g.num_units(); ++x) {
    const Fiber& f = b->fibers_[g.unit_arrow[x]];
    if (f.rows() != f.cols())
      throw std::invalid_argument("bundle: unit fiber must be square");
    b->unit_dim_[x] = f.rows();
  }
  for (int a = 0; a < g.num_arrows(); ++a) {
    const Fiber& f = b->fibers_[a];
    if (f.rows() != b->unit_dim_[g.tgt[a]] || f.cols() != b->unit_dim_[g.src[a]])
      throw std::invalid_argument("bundle: fiber shape inconsistent over " +
                                  g.arrow_ids[a]);
  }

  // Unit of each unit-fiber algebra: the element e with e b = b e = b for
  // every basis element b, found by least squares over the span.
  b->unit_element_.resize(g.num_units());
  b->unit_ok_.assign(g.num_units(), false);
  for (int x = 0; x < g.num_units(); ++x) {
    const Fiber& f = b->fibers_[g.unit_arrow[x]];
    const int k = f.dim();
    const int d = f.rows();
    if (k == 0) continue;
    Matrix lhs(2 * k * d * d, k);
    Vector rhs(2 * k * d * d);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        lhs.block(i * d * d, j, d * d, 1) = vectorize(f.basis()[j] * f.basis()[i]);
        lhs.block((k + i) * d * d, j, d * d, 1) =
            vectorize(f.basis()[i] * f.basis()[j]);
      }
      rhs.segment(i * d * d, d * d) = vectorize(f.basis()[i]);
      rhs.segment((k + i) * d * d, d * d) = vectorize(f.basis()[i]);
    }
    Vector c = lhs.completeOrthogonalDecomposition().solve(rhs);
    double residual = (lhs * c - rhs).norm();
    if (residual <= 1e-8 * std::max(1.0, rhs.norm())) {
      b->unit_element_[x] = f.from_coords(c);
      b->unit_ok_[x] = true;
    }
  }
  return b;
}

const Matrix& FellBundle::unit_element(int x) const {
  if (!unit_ok_[x])
    throw std::runtime_error("unit fiber over " + groupoid_->unit_ids[x] +
                             " has no unit element");
  return unit_element_[x];
}

int FellBundle::total_dim() const {
  int d = 0;
  for (const auto& f : fibers_) d += f.dim();
  return d;
}

namespace {

/// dim of span(A B) inside the ambient rows x cols matrix space, together
/// with a flag for containment in the target fiber span.
struct ProductSpan {
  int dim = 0;
  bool contained = true;
  std::pair<int, int> witness{-1, -1};
};

ProductSpan product_span(const Fiber& fa, const Fiber& fb, const Fiber& target,
                         double tol) {
  ProductSpan out;
  if (fa.dim() == 0 || fb.dim() == 0) return out;
  Matrix prods(fa.rows() * fb.cols(), fa.dim() * fb.dim());
  int col = 0;
  for (int i = 0; i < fa.dim(); ++i)
    for (int j = 0; j < fb.dim(); ++j) {
      Matrix p = fa.basis()[i] * fb.basis()[j];
      prods.col(col++) = vectorize(p);
      if (out.contained && !target.contains(p, tol)) {
        out.contained = false;
        out.witness = {i, j};
      }
    }
  Eigen::ColPivHouseholderQR<Matrix> qr(prods);
  qr.setThreshold(1e-8);
  out.dim = static_cast<int>(qr.rank());
  return out;
}

bool same_span(const Fiber& a, const Fiber& b, bool adjoint_a, double tol) {
  if (a.rows() * a.cols() == 0 && b.rows() * b.cols() == 0) return true;
  for (const auto& m : a.basis()) {
    Matrix v = adjoint_a ? Matrix(m.adjoint()) : m;
    if (!b.contains(v, tol)) return false;
  }
  for (const auto& m : b.basis()) {
    Matrix v = adjoint_a ? Matrix(m.adjoint()) : m;
    if (!a.contains(v, tol)) return false;
  }
  return true;
}

}  // namespace

ValidationReport validate_bundle(const FellBundle& b, double tol) {
  ValidationReport report;
  const auto& g = *b.groupoid();
  auto add = [&](const std::string& axiom, const std::string& detail,
                 std::vector<int> witness = {}) {
    report.violations.push_back({axiom, detail, std::move(witness)});
  };

  for (int a = 0; a < g.num_arrows(); ++a) {
    const Fiber& f = b.fiber(a);
    if (!f.basis_independent(tol))
      add("basis-independence",
          "fiber over " + g.arrow_ids[a] + " has a dependent basis", {a});
    if (f.dim() != b.fiber(g.inv[a]).dim())
      add("involution",
          "fibers over " + g.arrow_ids[a] + " and its inverse have different dimensions",
          {a, g.inv[a]});
  }

  // Involution compatibility: A_gamma^* = A_{gamma^{-1}} as subspaces.
  for (int a = 0; a < g.num_arrows(); ++a) {
    if (!same_span(b.fiber(a), b.fiber(g.inv[a]), /*adjoint_a=*/true, tol))
      add("involution",
          "adjoints of the fiber over " + g.arrow_ids[a] +
              " do not span the fiber over its inverse",
          {a, g.inv[a]});
  }

  // Product containment and saturation on every composable pair.
  for (int a = 0; a < g.num_arrows(); ++a) {
    for (int c = 0; c < g.num_arrows(); ++c) {
      if (!g.composable(a, c)) continue;
      int ac = g.compose_table[a][c];
      if (ac < 0) continue;
      ProductSpan ps = product_span(b.fiber(a), b.fiber(c), b.fiber(ac), tol);
      if (!ps.contained) {
        std::ostringstream os;
        os << "basis product " << g.arrow_ids[a] << "[" << ps.witness.first
           << "] * " << g.arrow_ids[c] << "[" << ps.witness.second
           << "] escapes the fiber over " << g.arrow_ids[ac];
        add("product-containment", os.str(), {a, c, ac});
      }
      if (ps.dim != b.fiber(ac).dim() || (ps.dim == 0 && b.fiber(ac).dim() > 0))
        add("saturation",
            "span(A_" + g.arrow_ids[a] + " A_" + g.arrow_ids[c] +
                ") has dimension " + std::to_string(ps.dim) + " but A_" +
                g.arrow_ids[ac] + " has dimension " +
                std::to_string(b.fiber(ac).dim()),
            {a, c, ac});
    }
  }

  // C*-identity and positivity, sampled over all basis elements.
  for (int a = 0; a < g.num_arrows(); ++a) {
    for (int i = 0; i < b.fiber(a).dim(); ++i) {
      const Matrix& m = b.fiber(a).basis()[i];
      Matrix mm = m.adjoint() * m;
      double n2 = operator_norm(m);
      if (!approx_equal(operator_norm(mm), n2 * n2, std::max(tol, 1e-8)))
        add("cstar-identity",
            "|a* a| != |a|^2 for basis element " + std::to_string(i) +
                " over " + g.arrow_ids[a],
            {a});
      if (min_eigenvalue(mm) < -std::max(tol, 1e-8))
        add("positivity",
            "a* a has a negative eigenvalue for basis element " +
                std::to_string(i) + " over " + g.arrow_ids[a],
            {a});
    }
  }

  // Unit fibres must be unital *-algebras (closure under product and
  // adjoint is covered by the containment and involution checks above).
  for (int x = 0; x < g.num_units(); ++x) {
    if (!b.has_unit_element(x))
      add("unit-fiber",
          "fiber algebra over unit " + g.unit_ids[x] + " has no unit element",
          {g.unit_arrow[x]});
  }

  return report;
}

std::vector<Matrix> full_matrix_algebra_basis(int d) {
  std::vector<Matrix> basis;
  basis.reserve(d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Matrix e = Matrix::Zero(d, d);
      e(i, j) = 1.0;
      basis.push_back(e);
    }
  return basis;
}

std::vector<Matrix> block_diagonal_algebra_basis(const std::vector<int>& blocks,
                                                 const Matrix& conjugator) {
  int d = 0;
  for (int s : blocks) d += s;
  std::vector<Matrix> basis;
  int off = 0;
  for (int s : blocks) {
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) {
        Matrix e = Matrix::Zero(d, d);
        e(off + i, off + j) = 1.0;
        if (conjugator.size() > 0) e = conjugator * e * conjugator.adjoint();
        basis.push_back(e);
      }
    off += s;
  }
  return basis;
}

BundlePtr trivial_bundle(GroupoidPtr g, const std::vector<Matrix>& algebra_basis) {
  if (algebra_basis.empty())
    throw std::invalid_argument("trivial_bundle: empty algebra basis");
  const int d = static_cast<int>(algebra_basis.front().rows());
  std::vector<Fiber> fibers;
  fibers.reserve(g->num_arrows());
  for (int a = 0; a < g->num_arrows(); ++a)
    fibers.emplace_back(a, d, d, algebra_basis);
  return FellBundle::build(std::move(g), std::move(fibers));
}

Matrix GroupoidAction::apply(int arrow, const Matrix& a) const {
  return unitary[arrow] * a * unitary[arrow].adjoint();
}

ValidationReport validate_action(const GroupoidAction& act, double tol) {
  ValidationReport report;
  const auto& g = *act.groupoid;
  auto add = [&](const std::string& axiom, const std::string& detail,
                 std::vector<int> witness = {}) {
    report.violations.push_back({axiom, detail, std::move(witness)});
  };
  for (int a = 0; a < g.num_arrows(); ++a) {
    const Matrix& u = act.unitary[a];
    if (u.rows() != act.dim[g.tgt[a]] || u.cols() != act.dim[g.src[a]]) {
      add("shape", "unitary over " + g.arrow_ids[a] + " has wrong shape", {a});
      continue;
    }
    if (!approx_equal(Matrix(u.adjoint() * u),
                      Matrix::Identity(u.cols(), u.cols()), tol))
      add("unitary", "datum over " + g.arrow_ids[a] + " is not unitary", {a});
  }
  if (!report.ok()) return report;
  for (int x = 0; x < g.num_units(); ++x) {
    if (!approx_equal(act.unitary[g.unit_arrow[x]],
                      Matrix::Identity(act.dim[x], act.dim[x]), tol))
      add("action-unit",
          "unitary at unit " + g.unit_ids[x] + " is not the identity",
          {g.unit_arrow[x]});
  }
  for (int a = 0; a < g.num_arrows(); ++a)
    for (int c = 0; c < g.num_arrows(); ++c) {
      if (!g.composable(a, c)) continue;
      int ac = g.compose_table[a][c];
      if (ac < 0) continue;
      if (!approx_equal(Matrix(act.unitary[a] * act.unitary[c]),
                        act.unitary[ac], tol))
        add("action-cocycle",
            "U(" + g.arrow_ids[a] + ") U(" + g.arrow_ids[c] + ") != U(" +
                g.arrow_ids[ac] + ")",
            {a, c, ac});
    }
  // alpha must carry A(s(gamma)) onto A(r(gamma)).
  for (int a = 0; a < g.num_arrows(); ++a) {
    Fiber target(a, act.dim[g.tgt[a]], act.dim[g.tgt[a]],
                 act.algebra[g.tgt[a]]);
    for (const auto& m : act.algebra[g.src[a]]) {
      if (!target.contains(act.apply(a, m), tol)) {
        add("action-isomorphism",
            "alpha over " + g.arrow_ids[a] +
                " does not map the source algebra into the target algebra",
            {a});
        break;
      }
    }
  }
  return report;
}

BundlePtr pullback_bundle(const GroupoidAction& act) {
  const auto& g = *act.groupoid;
  for (int a = 0; a < g.num_arrows(); ++a) {
    if (act.unitary[a].rows() != act.dim[g.tgt[a]] ||
        act.unitary[a].cols() != act.dim[g.src[a]])
      throw std::invalid_argument(
          "pullback_bundle: incompatible fiber dimensions along " +
          g.arrow_ids[a]);
  }
  std::vector<Fiber> fibers;
  fibers.reserve(g.num_arrows());
  for (int a = 0; a < g.num_arrows(); ++a) {
    // Fibre over gamma is A(r(gamma)); the ambient matrix for (gamma, b)
    // is b U_gamma.
    std::vector<Matrix> basis;
    basis.reserve(act.algebra[g.tgt[a]].size());
    for (const auto& m : act.algebra[g.tgt[a]]) basis.push_back(m * act.unitary[a]);
    fibers.emplace_back(a, act.dim[g.tgt[a]], act.dim[g.src[a]],
                        std::move(basis));
  }
  return FellBundle::build(act.groupoid, std::move(fibers));
}

BundlePtr restrict_bundle(const BundlePtr& b, const GroupoidPtr& sub) {
  if (sub->parent != b->groupoid())
    throw std::invalid_argument(
        "restrict_bundle: subgroupoid was not carved from this bundle's groupoid");
  std::vector<Fiber> fibers;
  fibers.reserve(sub->num_arrows());
  for (int a = 0; a < sub->num_arrows(); ++a) {
    const Fiber& f = b->fiber(sub->parent_arrow[a]);
    fibers.emplace_back(a, f.rows(), f.cols(), f.basis());
  }
  return FellBundle::build(sub, std::move(fibers));
}

std::vector<std::pair<int, const Fiber*>> source_fiber_frame(
    const FellBundle& b, int x) {
  std::vector<std::pair<int, const Fiber*>> out;
  for (int a : b.groupoid()->arrows_with_source(x))
    out.emplace_back(a, &b.fiber(a));
  return out;
}

}  // namespace fellkms
