#ifndef FELLKMS_FELLBUNDLE_HPP
#define FELLKMS_FELLBUNDLE_HPP

#include <memory>
#include <vector>

#include "fellkms/common.hpp"
#include "fellkms/groupoid.hpp"

namespace fellkms {

/// One fibre of the bundle realised inside the ambient matrix model: a
/// linear subspace of d_{r(gamma)} x d_{s(gamma)} complex matrices, spanned
/// by `basis`. Bundle multiplication is matrix multiplication and the
/// involution is the conjugate transpose, so the Fell axioms reduce to
/// span containments that validate_bundle checks numerically.
class Fiber {
 public:
  Fiber() = default;
  Fiber(int arrow, int rows, int cols, std::vector<Matrix> basis);

  int arrow() const { return arrow_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int dim() const { return static_cast<int>(basis_.size()); }
  const std::vector<Matrix>& basis() const { return basis_; }

  /// Coordinates of v in the declared basis (least squares). If out_in_span
  /// is given it receives whether v actually lies in the span.
  Vector to_coords(const Matrix& v, bool* out_in_span = nullptr,
                   double tol = kDefaultTol) const;
  Matrix from_coords(const Vector& coords) const;
  bool contains(const Matrix& v, double tol = kDefaultTol) const;
  bool basis_independent(double tol = kDefaultTol) const;

  /// Hilbert-Schmidt orthonormal basis of the same span; used wherever the
  /// standard coordinate inner product must agree with tr(a* b).
  const std::vector<Matrix>& onb() const { return onb_; }
  Vector onb_coords(const Matrix& v) const;
  Matrix from_onb_coords(const Vector& coords) const;

 private:
  int arrow_ = -1;
  int rows_ = 0, cols_ = 0;
  std::vector<Matrix> basis_;
  std::vector<Matrix> onb_;
  Matrix basis_matrix_;  // (rows*cols) x dim, columns vec(basis)
  Matrix onb_matrix_;
  Eigen::CompleteOrthogonalDecomposition<Matrix> basis_solver_;
  int numeric_rank_ = 0;
};

class FellBundle;
using BundlePtr = std::shared_ptr<const FellBundle>;

/// A saturated Fell bundle with finite-dimensional fibres over a finite
/// groupoid, in the ambient matrix realisation. Immutable after build.
class FellBundle {
 public:
  static BundlePtr build(GroupoidPtr groupoid, std::vector<Fiber> fibers);

  const GroupoidPtr& groupoid() const { return groupoid_; }
  const Fiber& fiber(int arrow) const { return fibers_[arrow]; }
  int num_arrows() const { return static_cast<int>(fibers_.size()); }

  /// Ambient dimension over each unit, read off the unit-arrow fibres.
  int unit_dim(int x) const { return unit_dim_[x]; }

  /// The unit element of the C*-algebra A_x sitting over the unit arrow of
  /// x. Throws when A_x has no unit in its span, which validate_bundle
  /// reports instead of throwing.
  const Matrix& unit_element(int x) const;
  bool has_unit_element(int x) const { return unit_ok_[x]; }

  /// Total algebra dimension, the sum of all fibre dimensions.
  int total_dim() const;

 private:
  GroupoidPtr groupoid_;
  std::vector<Fiber> fibers_;
  std::vector<int> unit_dim_;
  std::vector<Matrix> unit_element_;
  std::vector<bool> unit_ok_;
};

/// Checks every Fell-bundle axiom and saturation; lists violations with
/// witness basis elements. Axiom labels:
///   "shape"                  fibre dimensions inconsistent with the groupoid
///   "basis-independence"     declared basis linearly dependent
///   "product-containment"    A_gamma A_eta not inside A_{gamma eta} (1)-(4)
///   "involution"             A_gamma^* != A_{gamma^{-1}} (5)-(8)
///   "cstar-identity"         |a* a| != |a|^2 on a fibre element (9)
///   "positivity"             a* a has a negative eigenvalue (10)
///   "unit-fiber"             a unit fibre is not a unital *-algebra
///   "saturation"             span(A_gamma A_eta) != A_{gamma eta}
ValidationReport validate_bundle(const FellBundle& b,
                                 double tol = kDefaultTol);

/// The trivial bundle G x A for a unital matrix *-algebra A given by a
/// spanning set inside M_d. Every fibre is a copy of A.
BundlePtr trivial_bundle(GroupoidPtr g, const std::vector<Matrix>& algebra_basis);

/// Convenience: the full matrix algebra M_d.
std::vector<Matrix> full_matrix_algebra_basis(int d);

/// Block-diagonal algebra with the given block sizes, optionally conjugated
/// by a unitary.
std::vector<Matrix> block_diagonal_algebra_basis(const std::vector<int>& blocks,
                                                 const Matrix& conjugator = Matrix());

/// A groupoid acting on a bundle of matrix algebras by unitary conjugation:
/// alpha_gamma(a) = U_gamma a U_gamma^*. The unitaries must form a strict
/// homomorphism, U_{gamma eta} = U_gamma U_eta with U at units the identity,
/// which validate_action enforces; block permutations are unitaries, so
/// direct-sum swaps are covered.
struct GroupoidAction {
  GroupoidPtr groupoid;
  std::vector<int> dim;                       // per unit
  std::vector<std::vector<Matrix>> algebra;   // per unit, basis of A(x)
  std::vector<Matrix> unitary;                // per arrow, d_r x d_s

  Matrix apply(int arrow, const Matrix& a) const;
};

ValidationReport validate_action(const GroupoidAction& act,
                                 double tol = kDefaultTol);

/// The pullback bundle of an action along the range map. The fibre over
/// gamma is A(r(gamma)); the ambient realisation twists its basis by
/// U_gamma so that (gamma, a)(eta, b) = (gamma eta, a alpha_gamma(b)) and
/// (gamma, a)^* = (gamma^{-1}, alpha_{gamma^{-1}}(a^*)) become plain matrix
/// product and adjoint.
BundlePtr pullback_bundle(const GroupoidAction& act);

/// Restriction to a subgroupoid (one built with subgroupoid/isotropy from
/// the bundle's own groupoid). Fibres are shared by identifier.
BundlePtr restrict_bundle(const BundlePtr& b, const GroupoidPtr& sub);

/// The source fibre G_x as a right-module index set: the arrows of G_x
/// paired with their fibres. This is the carrier frame of the induction
/// module at x.
std::vector<std::pair<int, const Fiber*>> source_fiber_frame(
    const FellBundle& b, int x);

}  // namespace fellkms

#endif  // FELLKMS_FELLBUNDLE_HPP
