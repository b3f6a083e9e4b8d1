#ifndef FELLKMS_SECTION_HPP
#define FELLKMS_SECTION_HPP

#include <map>

#include "fellkms/fellbundle.hpp"

namespace fellkms {

/// A compactly supported section of a Fell bundle: a sparse assignment of a
/// fibre element to each arrow. Values are stored as ambient matrices;
/// coordinates in the declared fibre bases are produced on demand.
class Section {
 public:
  explicit Section(BundlePtr bundle) : bundle_(std::move(bundle)) {}

  static Section delta(BundlePtr bundle, int arrow, Matrix value);
  /// The unit section x -> 1_{A_x} delta_x.
  static Section unit(BundlePtr bundle);

  const BundlePtr& bundle() const { return bundle_; }
  const std::map<int, Matrix>& values() const { return values_; }
  Matrix value(int arrow) const;
  std::vector<int> support() const;
  bool is_zero(double tol = kDefaultTol) const;

  /// Sets the value over an arrow. Throws when the value does not lie in
  /// the fibre span.
  void set(int arrow, Matrix value, double tol = kDefaultTol);

  Section operator+(const Section& other) const;
  Section operator-(const Section& other) const;
  Section operator*(const Complex& scalar) const;

  double max_abs_difference(const Section& other) const;

 private:
  BundlePtr bundle_;
  std::map<int, Matrix> values_;
};

/// Convolution f*g(gamma) = sum over factorisations alpha beta = gamma of
/// f(alpha) g(beta). The support of f*g is contained in
/// support(f) support(g).
Section convolve(const Section& f, const Section& g);

/// Involution f^*(gamma) = f(gamma^{-1})^*.
Section involute(const Section& f);

/// max( sup_x sum_{gamma in G^x} |f(gamma)|,
///      sup_x sum_{gamma in G_x} |f(gamma)| )  with fibre operator norms.
double i_norm(const Section& f);

/// Sup over arrows of the fibre operator norm.
double sup_norm(const Section& f);

}  // namespace fellkms

#endif  // FELLKMS_SECTION_HPP
