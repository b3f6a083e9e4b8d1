#include "fellkms/section.hpp"

#include <stdexcept>

namespace fellkms {

Section Section::delta(BundlePtr bundle, int arrow, Matrix value) {
  Section s(std::move(bundle));
  s.set(arrow, std::move(value));
  return s;
}

Section Section::unit(BundlePtr bundle) {
  Section s(bundle);
  const auto& g = *bundle->groupoid();
  for (int x = 0; x < g.num_units(); ++x)
    s.set(g.unit_arrow[x], bundle->unit_element(x));
  return s;
}

Matrix Section::value(int arrow) const {
  auto it = values_.find(arrow);
  if (it != values_.end()) return it->second;
  const Fiber& f = bundle_->fiber(arrow);
  return Matrix::Zero(f.rows(), f.cols());
}

std::vector<int> Section::support() const {
  std::vector<int> out;
  for (const auto& [a, v] : values_)
    if (!approx_zero(v)) out.push_back(a);
  return out;
}

bool Section::is_zero(double tol) const {
  for (const auto& [a, v] : values_)
    if (!approx_zero(v, tol)) return false;
  return true;
}

void Section::set(int arrow, Matrix value, double tol) {
  const Fiber& f = bundle_->fiber(arrow);
  if (value.rows() != f.rows() || value.cols() != f.cols())
    throw std::invalid_argument("section value has wrong shape over arrow " +
                                bundle_->groupoid()->arrow_ids[arrow]);
  if (!f.contains(value, std::max(tol, 1e-8)))
    throw std::invalid_argument("section value escapes the fiber over arrow " +
                                bundle_->groupoid()->arrow_ids[arrow]);
  if (approx_zero(value))
    values_.erase(arrow);
  else
    values_[arrow] = std::move(value);
}

Section Section::operator+(const Section& other) const {
  if (bundle_ != other.bundle_)
    throw std::invalid_argument("section arithmetic: bundle mismatch");
  Section out = *this;
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

Section Section::operator-(const Section& other) const {
  return *this + other * Complex(-1.0, 0.0);
}

Section Section::operator*(const Complex& scalar) const {
  Section out(bundle_);
  if (approx_zero(scalar)) return out;
  for (const auto& [a, v] : values_) out.values_[a] = scalar * v;
  return out;
}

double Section::max_abs_difference(const Section& other) const {
  double m = 0;
  for (const auto& [a, v] : values_)
    m = std::max(m, (v - other.value(a)).cwiseAbs().maxCoeff());
  for (const auto& [a, v] : other.values_)
    m = std::max(m, (value(a) - v).cwiseAbs().maxCoeff());
  return m;
}

Section convolve(const Section& f, const Section& g) {
  if (f.bundle() != g.bundle())
    throw std::invalid_argument("convolve: bundle mismatch");
  const auto& gpd = *f.bundle()->groupoid();
  Section out(f.bundle());
  std::map<int, Matrix> acc;
  for (const auto& [a, va] : f.values()) {
    for (const auto& [b, vb] : g.values()) {
      if (!gpd.composable(a, b)) continue;
      int c = gpd.compose(a, b);
      if (c < 0) continue;
      Matrix p = va * vb;
      auto it = acc.find(c);
      if (it == acc.end())
        acc[c] = std::move(p);
      else
        it->second += p;
    }
  }
  for (auto& [c, v] : acc)
    if (!approx_zero(v)) out.set(c, std::move(v));
  return out;
}

Section involute(const Section& f) {
  const auto& gpd = *f.bundle()->groupoid();
  Section out(f.bundle());
  for (const auto& [a, v] : f.values()) out.set(gpd.inv[a], v.adjoint());
  return out;
}

double i_norm(const Section& f) {
  const auto& gpd = *f.bundle()->groupoid();
  RealVector by_target = RealVector::Zero(gpd.num_units());
  RealVector by_source = RealVector::Zero(gpd.num_units());
  for (const auto& [a, v] : f.values()) {
    double n = operator_norm(v);
    by_target(gpd.tgt[a]) += n;
    by_source(gpd.src[a]) += n;
  }
  double m1 = gpd.num_units() ? by_target.maxCoeff() : 0.0;
  double m2 = gpd.num_units() ? by_source.maxCoeff() : 0.0;
  return std::max(m1, m2);
}

double sup_norm(const Section& f) {
  double m = 0;
  for (const auto& [a, v] : f.values()) m = std::max(m, operator_norm(v));
  return m;
}

}  // namespace fellkms
