#include "fellkms/algebra.hpp"

#include <Eigen/QR>
#include <sstream>
#include <stdexcept>

namespace fellkms {

AlgebraPtr AlgebraModel::build(BundlePtr bundle) {
  auto m = std::make_shared<AlgebraModel>();
  m->bundle_ = std::move(bundle);
  const auto& g = *m->bundle_->groupoid();

  m->offset_.assign(g.num_arrows(), 0);
  for (int a = 0; a < g.num_arrows(); ++a) {
    m->offset_[a] = m->dim();
    for (int k = 0; k < m->bundle_->fiber(a).dim(); ++k)
      m->basis_.push_back({a, k});
  }
  const int D = m->dim();

  // Structure constants of convolution: delta-section products reduce to
  // fibre products placed over composed arrows.
  m->products_.resize(static_cast<size_t>(D) * D);
  for (int i = 0; i < D; ++i) {
    const auto [ai, ki] = m->basis_[i];
    const Matrix& bi = m->bundle_->fiber(ai).basis()[ki];
    for (int j = 0; j < D; ++j) {
      const auto [aj, kj] = m->basis_[j];
      if (!g.composable(ai, aj)) continue;
      int ac = g.compose(ai, aj);
      if (ac < 0) continue;
      const Fiber& target = m->bundle_->fiber(ac);
      bool in_span = false;
      Vector c = target.to_coords(bi * m->bundle_->fiber(aj).basis()[kj],
                                  &in_span, 1e-8);
      if (!in_span)
        throw std::runtime_error(
            "algebra model: basis product escapes its fiber; bundle is not "
            "multiplicatively closed over " +
            g.arrow_ids[ac]);
      SparseVec& sv = m->products_[static_cast<size_t>(i) * D + j];
      for (int l = 0; l < c.size(); ++l)
        if (!approx_zero(c(l), 1e-14)) sv.emplace_back(m->offset_[ac] + l, c(l));
    }
  }

  m->involutions_.resize(D);
  for (int i = 0; i < D; ++i) {
    const auto [ai, ki] = m->basis_[i];
    int inv = g.inv[ai];
    const Fiber& target = m->bundle_->fiber(inv);
    bool in_span = false;
    Vector c = target.to_coords(
        m->bundle_->fiber(ai).basis()[ki].adjoint(), &in_span, 1e-8);
    if (!in_span)
      throw std::runtime_error(
          "algebra model: basis adjoint escapes the inverse fiber over " +
          g.arrow_ids[inv]);
    for (int l = 0; l < c.size(); ++l)
      if (!approx_zero(c(l), 1e-14))
        m->involutions_[i].emplace_back(m->offset_[inv] + l, c(l));
  }

  m->unit_coords_ = m->coords(Section::unit(m->bundle_));

  m->carrier_.resize(g.num_units());
  m->carrier_offset_.assign(g.num_units(),
                            std::vector<int>(g.num_arrows(), -1));
  for (int x = 0; x < g.num_units(); ++x) {
    for (int t : g.arrows_with_source(x)) {
      m->carrier_offset_[x][t] = static_cast<int>(m->carrier_[x].size());
      for (int k = 0; k < m->bundle_->fiber(t).dim(); ++k)
        m->carrier_[x].push_back({t, k});
    }
    m->rep_dim_ += static_cast<int>(m->carrier_[x].size());
  }
  return m;
}

Section AlgebraModel::basis_section(int i) const {
  const auto [a, k] = basis_[i];
  return Section::delta(bundle_, a, bundle_->fiber(a).basis()[k]);
}

Vector AlgebraModel::coords(const Section& f) const {
  if (f.bundle() != bundle_)
    throw std::invalid_argument("coords: section lives on a different bundle");
  Vector v = Vector::Zero(dim());
  for (const auto& [a, val] : f.values()) {
    bool in_span = false;
    Vector c = bundle_->fiber(a).to_coords(val, &in_span, 1e-8);
    if (!in_span)
      throw std::invalid_argument("coords: value escapes fiber over arrow " +
                                  groupoid()->arrow_ids[a]);
    v.segment(offset_[a], c.size()) = c;
  }
  return v;
}

Section AlgebraModel::section_from_coords(const Vector& v) const {
  Section f(bundle_);
  for (int a = 0; a < groupoid()->num_arrows(); ++a) {
    const Fiber& fib = bundle_->fiber(a);
    if (fib.dim() == 0) continue;
    Vector c = v.segment(offset_[a], fib.dim());
    if (c.cwiseAbs().maxCoeff() == 0.0) continue;
    Matrix val = fib.from_coords(c);
    if (!approx_zero(val)) f.set(a, std::move(val));
  }
  return f;
}

Vector AlgebraModel::multiply(const Vector& v, const Vector& w) const {
  Vector out = Vector::Zero(dim());
  for (int i = 0; i < dim(); ++i) {
    if (approx_zero(v(i), 1e-15)) continue;
    for (int j = 0; j < dim(); ++j) {
      if (approx_zero(w(j), 1e-15)) continue;
      for (const auto& [k, c] : basis_product(i, j)) out(k) += v(i) * w(j) * c;
    }
  }
  return out;
}

Vector AlgebraModel::involution(const Vector& v) const {
  Vector out = Vector::Zero(dim());
  for (int i = 0; i < dim(); ++i) {
    if (approx_zero(v(i), 1e-15)) continue;
    Complex vc = std::conj(v(i));
    for (const auto& [k, c] : involutions_[i]) out(k) += vc * c;
  }
  return out;
}

Matrix AlgebraModel::represent_at_unit(const Section& f, int x) const {
  if (f.bundle() != bundle_)
    throw std::invalid_argument(
        "represent: section lives on a different bundle than this model");
  const auto& g = *groupoid();
  const auto& carrier = carrier_[x];
  const int dx = static_cast<int>(carrier.size());
  Matrix block = Matrix::Zero(dx, dx);
  for (int col = 0; col < dx; ++col) {
    const auto [t, k] = carrier[col];
    const Matrix& xi = bundle_->fiber(t).onb()[k];
    // Left action of f on the delta module element at t: each value
    // f(gamma) with s(gamma) = r(t) contributes f(gamma) xi at gamma t.
    for (const auto& [gamma, val] : f.values()) {
      if (!g.composable(gamma, t)) continue;
      int gt = g.compose(gamma, t);
      if (gt < 0) continue;
      Vector c = bundle_->fiber(gt).onb_coords(val * xi);
      block.block(carrier_offset_[x][gt], col, c.size(), 1) += c;
    }
  }
  return block;
}

Matrix AlgebraModel::represent(const Section& f) const {
  Matrix out = Matrix::Zero(rep_dim_, rep_dim_);
  int off = 0;
  for (int x = 0; x < groupoid()->num_units(); ++x) {
    int dx = static_cast<int>(carrier_[x].size());
    out.block(off, off, dx, dx) = represent_at_unit(f, x);
    off += dx;
  }
  return out;
}

double AlgebraModel::cstar_norm(const Section& f) const {
  double m = 0;
  for (int x = 0; x < groupoid()->num_units(); ++x)
    m = std::max(m, operator_norm(represent_at_unit(f, x)));
  return m;
}

bool AlgebraModel::representation_faithful(double tol) const {
  (void)tol;
  int rows = 0;
  for (const auto& c : carrier_) rows += static_cast<int>(c.size() * c.size());
  Matrix stacked(rows, dim());
  for (int i = 0; i < dim(); ++i) {
    Section e = basis_section(i);
    int off = 0;
    for (int x = 0; x < groupoid()->num_units(); ++x) {
      Matrix blk = represent_at_unit(e, x);
      stacked.block(off, i, blk.size(), 1) = vectorize(blk);
      off += static_cast<int>(blk.size());
    }
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
  qr.setThreshold(1e-9);
  return static_cast<int>(qr.rank()) == dim();
}

ValidationReport AlgebraModel::verify(double tol) const {
  ValidationReport report;
  auto add = [&](const std::string& what, const std::string& detail) {
    report.violations.push_back({what, detail, {}});
  };
  const int D = dim();

  // Associativity of the structure constants on basis triples.
  for (int i = 0; i < D; ++i) {
    Vector ei = Vector::Zero(D);
    ei(i) = 1;
    for (int j = 0; j < D; ++j) {
      Vector ej = Vector::Zero(D);
      ej(j) = 1;
      Vector ij = multiply(ei, ej);
      for (int k = 0; k < D; ++k) {
        Vector ek = Vector::Zero(D);
        ek(k) = 1;
        Vector lhs = multiply(ij, ek);
        Vector rhs = multiply(ei, multiply(ej, ek));
        if ((lhs - rhs).cwiseAbs().maxCoeff() > tol) {
          add("associativity", "structure constants fail on basis triple " +
                                   std::to_string(i) + "," + std::to_string(j) +
                                   "," + std::to_string(k));
          break;
        }
      }
    }
  }

  // Involution: antilinear antihomomorphism squaring to the identity.
  for (int i = 0; i < D; ++i) {
    Vector ei = Vector::Zero(D);
    ei(i) = 1;
    if ((involution(involution(ei)) - ei).cwiseAbs().maxCoeff() > tol)
      add("involution", "involution table does not square to the identity");
    for (int j = 0; j < D; ++j) {
      Vector ej = Vector::Zero(D);
      ej(j) = 1;
      Vector lhs = involution(multiply(ei, ej));
      Vector rhs = multiply(involution(ej), involution(ei));
      if ((lhs - rhs).cwiseAbs().maxCoeff() > tol) {
        add("involution", "(ab)* != b* a* on basis pair " + std::to_string(i) +
                              "," + std::to_string(j));
        break;
      }
    }
  }

  // The representation is a *-homomorphism.
  for (int i = 0; i < D; ++i) {
    Section e = basis_section(i);
    Section estar = section_from_coords(involution(coords(e)));
    Matrix re = represent(e);
    if (!approx_equal(Matrix(re.adjoint()), represent(estar), tol))
      add("representation", "rep(a*) != rep(a)* on basis element " +
                                std::to_string(i));
    for (int j = 0; j < D; ++j) {
      Section f = basis_section(j);
      Matrix lhs = represent(convolve(e, f));
      Matrix rhs = re * represent(f);
      if (!approx_equal(lhs, rhs, tol)) {
        add("representation", "rep(ab) != rep(a) rep(b) on basis pair " +
                                  std::to_string(i) + "," + std::to_string(j));
        break;
      }
    }
  }

  if (!representation_faithful(tol))
    add("representation", "representation fails to separate the basis");

  return report;
}

std::vector<std::tuple<int, int, int, Complex>>
AlgebraModel::structure_constants() const {
  std::vector<std::tuple<int, int, int, Complex>> out;
  for (int i = 0; i < dim(); ++i)
    for (int j = 0; j < dim(); ++j)
      for (const auto& [k, c] : basis_product(i, j)) out.emplace_back(i, j, k, c);
  return out;
}

double cstar_norm(const Section& f, const AlgebraModel& m) {
  return m.cstar_norm(f);
}

StructureMap StructureMap::build(AlgebraPtr model) {
  StructureMap sm;
  sm.model_ = std::move(model);
  const auto& g = *sm.model_->groupoid();
  const auto& b = *sm.model_->bundle();

  for (int x = 0; x < g.num_units(); ++x)
    if (g.isotropy_arrows(x).size() != 1)
      throw std::invalid_argument(
          "structure map: groupoid is not principal at unit " + g.unit_ids[x]);

  auto orbits = g.orbits();
  sm.n_ = static_cast<int>(orbits.front().size());
  for (const auto& orbit : orbits)
    if (static_cast<int>(orbit.size()) != sm.n_)
      throw std::invalid_argument(
          "structure map: orbits have unequal sizes, not a pair-model shape");

  // Constant fibres: every fibre must share the span of a unit fibre.
  const Fiber& ref = b.fiber(g.unit_arrow[0]);
  sm.fiber_dim_ambient_ = ref.rows();
  for (int a = 0; a < g.num_arrows(); ++a) {
    const Fiber& f = b.fiber(a);
    if (f.rows() != ref.rows() || f.cols() != ref.cols())
      throw std::invalid_argument("structure map: fibres have unequal shape");
    for (const auto& m : f.basis())
      if (!ref.contains(m, 1e-8))
        throw std::invalid_argument(
            "structure map: fibres are not a constant algebra");
  }

  sm.orbit_units_ = std::move(orbits);
  sm.arrow_table_.resize(sm.orbit_units_.size());
  for (size_t x = 0; x < sm.orbit_units_.size(); ++x) {
    auto& table = sm.arrow_table_[x];
    table.assign(sm.n_, std::vector<int>(sm.n_, -1));
    for (int h = 0; h < sm.n_; ++h)
      for (int k = 0; k < sm.n_; ++k) {
        for (int a = 0; a < g.num_arrows(); ++a)
          if (g.tgt[a] == sm.orbit_units_[x][h] &&
              g.src[a] == sm.orbit_units_[x][k]) {
            if (table[h][k] >= 0)
              throw std::invalid_argument(
                  "structure map: multiple arrows between units, not principal");
            table[h][k] = a;
          }
        if (table[h][k] < 0)
          throw std::invalid_argument(
              "structure map: orbit is not transitive with unique arrows");
      }
  }
  return sm;
}

std::vector<Matrix> StructureMap::to_matrix_function(const Section& f) const {
  const int d = fiber_dim_ambient_;
  std::vector<Matrix> out(num_points(), Matrix::Zero(n_ * d, n_ * d));
  for (int x = 0; x < num_points(); ++x)
    for (int h = 0; h < n_; ++h)
      for (int k = 0; k < n_; ++k)
        out[x].block(h * d, k * d, d, d) = f.value(arrow_table_[x][h][k]);
  return out;
}

Section StructureMap::from_matrix_function(const std::vector<Matrix>& mats) const {
  const int d = fiber_dim_ambient_;
  Section f(model_->bundle());
  for (int x = 0; x < num_points(); ++x)
    for (int h = 0; h < n_; ++h)
      for (int k = 0; k < n_; ++k) {
        Matrix blk = mats[x].block(h * d, k * d, d, d);
        if (!approx_zero(blk)) f.set(arrow_table_[x][h][k], blk);
      }
  return f;
}

ValidationReport StructureMap::verify(double tol) const {
  ValidationReport report;
  auto add = [&](const std::string& what, const std::string& detail) {
    report.violations.push_back({what, detail, {}});
  };
  const int D = model_->dim();
  auto as_vec = [&](const std::vector<Matrix>& mats) {
    Vector v(num_points() * block_dim() * block_dim());
    int off = 0;
    for (const auto& m : mats) {
      v.segment(off, m.size()) = vectorize(m);
      off += static_cast<int>(m.size());
    }
    return v;
  };

  Matrix map_matrix(num_points() * block_dim() * block_dim(), D);
  for (int i = 0; i < D; ++i) {
    Section e = model_->basis_section(i);
    map_matrix.col(i) = as_vec(to_matrix_function(e));
    // Round trip through the inverse.
    Section back = from_matrix_function(to_matrix_function(e));
    if (back.max_abs_difference(e) > tol)
      add("invertible", "inverse fails on basis element " + std::to_string(i));
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(map_matrix);
  qr.setThreshold(1e-9);
  if (static_cast<int>(qr.rank()) != D)
    add("invertible", "map is not injective on the basis");

  for (int i = 0; i < D; ++i) {
    Section e = model_->basis_section(i);
    auto me = to_matrix_function(e);
    auto mes = to_matrix_function(involute(e));
    for (int x = 0; x < num_points(); ++x)
      if (!approx_equal(Matrix(me[x].adjoint()), mes[x], tol)) {
        add("involutive", "conjugate transpose mismatch at point " +
                              std::to_string(x));
        break;
      }
    for (int j = 0; j < D; ++j) {
      Section f = model_->basis_section(j);
      auto mf = to_matrix_function(f);
      auto mef = to_matrix_function(convolve(e, f));
      for (int x = 0; x < num_points(); ++x)
        if (!approx_equal(Matrix(me[x] * mf[x]), mef[x], tol)) {
          add("multiplicative", "pointwise product mismatch on basis pair " +
                                    std::to_string(i) + "," + std::to_string(j));
          break;
        }
      if (!report.ok() && report.violations.back().axiom == "multiplicative")
        break;
    }
  }
  return report;
}

}  // namespace fellkms
