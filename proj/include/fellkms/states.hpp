#ifndef FELLKMS_STATES_HPP
#define FELLKMS_STATES_HPP

#include <map>
#include <optional>
#include <set>

#include "fellkms/algebra.hpp"

namespace fellkms {

/// A complex-linear functional on a modelled *-algebra, stored as its values
/// on the algebra basis. Positivity is certified through the Gram matrix
/// M_ij = phi(e_i* e_j).
class State {
 public:
  State() = default;
  State(AlgebraPtr algebra, Vector coeffs);

  const AlgebraPtr& algebra() const { return algebra_; }
  const Vector& coeffs() const { return coeffs_; }

  Complex value(const Vector& coords) const;
  Complex value(const Section& f) const;
  Complex value_basis(int i) const { return coeffs_(i); }

  Matrix gram() const;
  double min_gram_eigenvalue() const;
  bool is_positive(double tol = kDefaultTol) const;
  Complex norm_value() const;  // phi(unit)
  bool is_state(double tol = kDefaultTol) const;
  bool is_trace(double tol = kDefaultTol) const;
  double trace_defect() const;  // max |phi(ab) - phi(ba)| over basis pairs

  double distance(const State& other) const;  // max basis deviation

 private:
  AlgebraPtr algebra_;
  Vector coeffs_;
  mutable std::optional<Matrix> gram_;
};

/// The per-unit isotropy data of a bundle: the isotropy subgroupoid, the
/// restricted bundle and its algebra model at every unit, plus the full
/// algebra model. Built once and shared.
class BundleSystem {
 public:
  explicit BundleSystem(BundlePtr bundle);

  const BundlePtr& bundle() const { return bundle_; }
  const AlgebraPtr& algebra() const { return full_; }
  const GroupoidPtr& groupoid() const { return bundle_->groupoid(); }
  const GroupoidPtr& isotropy_groupoid(int x) const { return iso_g_[x]; }
  const BundlePtr& isotropy_bundle(int x) const { return iso_b_[x]; }
  const AlgebraPtr& isotropy_algebra(int x) const { return iso_a_[x]; }

  /// Index in the isotropy algebra basis at x of the element sitting over
  /// the (parent) arrow with the given fibre index.
  int isotropy_basis_index(int x, int parent_arrow, int fiber_index) const;
  /// Index in the full algebra basis of a basis element of the isotropy
  /// algebra at x.
  int full_basis_index(int x, int iso_basis) const;

  /// The state on the isotropy algebra at x given by its values over
  /// isotropy arrows of the full algebra, divided by mass.
  State isotropy_state_from_full(const Vector& full_coeffs, int x,
                                 double mass) const;

  /// Coordinates of the sub-basis of functions supported on unit arrows,
  /// used for centraliser checks against C0(G^(0); A).
  std::vector<int> unit_fiber_basis_indices() const;

 private:
  BundlePtr bundle_;
  AlgebraPtr full_;
  std::vector<GroupoidPtr> iso_g_;
  std::vector<BundlePtr> iso_b_;
  std::vector<AlgebraPtr> iso_a_;
};

/// A field of states on the isotropy algebras, defined on a support set of
/// units. Equivalence of fields is equality on the support.
struct StateField {
  std::map<int, State> members;  // unit -> state on the isotropy algebra
  std::set<int> support;

  bool defined_on(int x) const { return members.count(x) > 0; }
  const State& at(int x) const { return members.at(x); }
};

struct CentralizerCheck {
  bool ok = true;
  int witness_sub = -1;    // index into the sub-basis
  int witness_basis = -1;  // index into the algebra basis
  double max_residual = 0;
};

/// True iff phi(k g) = phi(g k) for every k in the sub-basis (given by
/// algebra basis indices) and every g in the algebra basis.
CentralizerCheck centralizer_contains(const State& phi,
                                      const std::vector<int>& sub_basis,
                                      double tol = kDefaultTol);

/// Convenience: sub-basis given as sections.
CentralizerCheck centralizer_contains(const State& phi,
                                      const std::vector<Section>& sub_basis,
                                      double tol = kDefaultTol);

/// Integration of a probability measure and a field of states into a state
/// on the full algebra:
///   phi(f) = sum_x mu(x) sum_{gamma in G^x_x} phi_x(f(gamma) delta_gamma).
/// Preconditions (checked): mu is a probability measure; the field is
/// defined on its support; each phi_x is a state with A_x in its
/// centraliser. Postcondition (verified): the centraliser of the result
/// contains the unit-fibre subalgebra.
State integrate(const BundleSystem& sys, const UnitMeasure& mu,
                const StateField& phi, double tol = kDefaultTol);

struct Disintegration {
  UnitMeasure mu;
  StateField field;
  /// Largest value of |phi| on basis elements off the isotropy bundle;
  /// a state with the centraliser property vanishes there.
  double off_isotropy_residual = 0;
};

/// Closed-form disintegration of a state whose centraliser contains the
/// unit-fibre subalgebra: mu({x}) = phi(1_{A_x} delta_x) and, on the
/// support, phi_x(a delta_gamma) = phi(a delta_gamma) / mu({x}).
/// Throws when the centraliser precondition fails or when phi does not
/// vanish off the isotropy bundle.
Disintegration disintegrate(const BundleSystem& sys, const State& phi,
                            double tol = kDefaultTol);

struct C0XDecomposition {
  UnitMeasure mu;
  std::map<int, State> fiber_states;  // on the fibre algebras A_x
  std::map<int, bool> fiber_trace_flags;
  double reproduction_residual = 0;
  bool trace_flag = false;
};

/// Integration-disintegration for states on a direct sum over a finite
/// base: mu(x) = phi(1_{A_x}), phi_x = phi|_{A_x} / mu(x) on the support,
/// and phi(f) = sum_x mu(x) phi_x(f(x)). No centraliser hypothesis; the
/// trace flag propagates to the fibres. The algebra must be supported on
/// unit arrows only (a direct-sum model), e.g. the restriction of a bundle
/// to the unit subgroupoid.
C0XDecomposition decompose_c0x_state(const BundleSystem& sys, const State& phi,
                                     double tol = kDefaultTol);

}  // namespace fellkms

#endif  // FELLKMS_STATES_HPP
