#ifndef FELLKMS_INDUCTION_HPP
#define FELLKMS_INDUCTION_HPP

#include <map>

#include "fellkms/algebra.hpp"

namespace fellkms {

class InductionModule;

/// An element of the induction module at x: a finitely supported assignment
/// of a fibre element to each arrow of the source fibre G_x.
class ModuleElement {
 public:
  ModuleElement() = default;
  explicit ModuleElement(const InductionModule* module) : module_(module) {}

  const InductionModule* module() const { return module_; }
  const std::map<int, Matrix>& values() const { return values_; }
  Matrix value(int arrow) const;
  void set(int arrow, Matrix value, double tol = kDefaultTol);

  ModuleElement operator+(const ModuleElement& other) const;
  ModuleElement operator-(const ModuleElement& other) const;
  ModuleElement operator*(const Complex& scalar) const;
  double max_abs_difference(const ModuleElement& other) const;
  bool is_zero(double tol = kDefaultTol) const;

 private:
  const InductionModule* module_ = nullptr;
  std::map<int, Matrix> values_;
};

/// The bimodule of sections over the source fibre G_x, a left module over
/// the full section algebra and a right inner-product module over the
/// isotropy algebra at x. Completion is vacuous at finite scale, so the
/// module itself already carries the correspondence structure.
class InductionModule {
 public:
  InductionModule(AlgebraPtr left_algebra, int x);

  int unit() const { return x_; }
  const BundlePtr& bundle() const { return left_->bundle(); }
  const AlgebraPtr& left_algebra() const { return left_; }
  const AlgebraPtr& right_algebra() const { return right_; }
  const GroupoidPtr& isotropy_groupoid() const { return iso_; }
  const std::vector<int>& carrier_arrows() const { return carrier_arrows_; }

  ModuleElement zero() const { return ModuleElement(this); }
  ModuleElement delta(int arrow, Matrix value) const;
  /// 1_{A_x} delta_x, the canonical cyclic element of the module.
  ModuleElement fiber_unit_element() const;

  /// Dimension of the module as a complex vector space.
  int vector_dim() const { return vector_dim_; }
  /// Coordinates in the HS-orthonormal frame over the carrier arrows.
  Vector onb_coords(const ModuleElement& xi) const;
  ModuleElement from_onb_coords(const Vector& v) const;

 private:
  AlgebraPtr left_;
  AlgebraPtr right_;
  GroupoidPtr iso_;
  int x_;
  std::vector<int> carrier_arrows_;
  std::vector<int> carrier_offset_;  // per groupoid arrow, -1 off carrier
  int vector_dim_ = 0;

  friend class ModuleElement;
};

/// g *' xi (z) = sum over tau in G^{r(z)} of g(tau) xi(tau^{-1} z).
ModuleElement left_act(const Section& g, const ModuleElement& xi);

/// xi *'' f (z) = sum over upsilon in the isotropy of xi(z upsilon)
/// f(upsilon^{-1}); f is a section over the isotropy bundle at x.
ModuleElement right_act(const ModuleElement& xi, const Section& f);

/// <xi, zeta>(gamma) = sum over t in G_x of xi(t)* zeta(t gamma), a section
/// over the isotropy bundle at x.
Section inner(const ModuleElement& xi, const ModuleElement& zeta);

/// Verifies <g *' xi, zeta> = <xi, g* *' zeta> within tol.
bool adjointability_check(const Section& g, const ModuleElement& xi,
                          const ModuleElement& zeta, double tol = kDefaultTol);

/// A GNS-style triple: a finite-dimensional Hilbert space, a representation
/// given by one matrix per algebra basis element, and a cyclic vector. The
/// represented state is a -> <xi, L(a) xi>.
struct GNSTriple {
  AlgebraPtr algebra;
  int dim = 0;
  std::vector<Matrix> rep;  // per basis element of the algebra
  Vector cyclic;

  Matrix represent(const Vector& coords) const;
  Matrix represent(const Section& f) const;
  Complex state_value(const Vector& coords) const;
  Complex state_value(const Section& f) const;

  /// Checks the *-homomorphism property, cyclicity and state recovery.
  ValidationReport verify(const Vector& state_coeffs,
                          double tol = kDefaultTol) const;
};

class State;

/// GNS construction for a state on a modelled algebra. The Hilbert space is
/// the algebra modulo the null space of (a, b) -> phi(a* b), with the null
/// space cut at an eigenvalue tolerance. Throws when phi is not positive.
GNSTriple gns(const State& phi, double tol = kDefaultTol);

/// Induces a representation of the full algebra from a representation of
/// the isotropy algebra through the induction module: the carrier is the
/// balanced tensor product of the module with the given Hilbert space,
/// quotiented by null vectors, and the cyclic vector is
/// (1_{A_x} delta_x) tensor xi.
GNSTriple induce_representation(const GNSTriple& L, const InductionModule& Y,
                                double tol = kDefaultTol);

}  // namespace fellkms

#endif  // FELLKMS_INDUCTION_HPP
