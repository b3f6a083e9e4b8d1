#ifndef FELLKMS_ALGEBRA_HPP
#define FELLKMS_ALGEBRA_HPP

#include <memory>
#include <vector>

#include "fellkms/section.hpp"

namespace fellkms {

class AlgebraModel;
using AlgebraPtr = std::shared_ptr<const AlgebraModel>;

/// Finite-dimensional model of the section *-algebra of a Fell bundle over
/// a finite groupoid: a basis enumeration, structure constants for the
/// convolution product, the involution table, and a faithful block
/// *-representation assembled from the module of sections over each source
/// fibre G_x with the Hilbert-Schmidt inner product. On a finite groupoid
/// the full and reduced norms agree, so the operator norm in this
/// representation is the C*-norm; faithfulness is verified per instance.
class AlgebraModel : public std::enable_shared_from_this<AlgebraModel> {
 public:
  struct BasisElement {
    int arrow;
    int fiber_index;
  };
  using SparseVec = std::vector<std::pair<int, Complex>>;

  static AlgebraPtr build(BundlePtr bundle);

  const BundlePtr& bundle() const { return bundle_; }
  const GroupoidPtr& groupoid() const { return bundle_->groupoid(); }
  int dim() const { return static_cast<int>(basis_.size()); }
  const std::vector<BasisElement>& basis() const { return basis_; }
  int basis_offset(int arrow) const { return offset_[arrow]; }
  Section basis_section(int i) const;

  Vector coords(const Section& f) const;
  Section section_from_coords(const Vector& v) const;

  /// Structure constants: e_i e_j as a sparse coordinate vector.
  const SparseVec& basis_product(int i, int j) const {
    return products_[i * dim() + j];
  }
  /// e_i^* as a sparse coordinate vector.
  const SparseVec& basis_involution(int i) const { return involutions_[i]; }

  Vector multiply(const Vector& v, const Vector& w) const;
  Vector involution(const Vector& v) const;  // antilinear
  Vector unit_coords() const { return unit_coords_; }

  /// Block of the representation over the unit x applied to f.
  Matrix represent_at_unit(const Section& f, int x) const;
  /// Full block-diagonal representation of f.
  Matrix represent(const Section& f) const;
  int rep_dim() const { return rep_dim_; }
  int rep_block_dim(int x) const { return static_cast<int>(carrier_[x].size()); }

  double cstar_norm(const Section& f) const;

  /// Rank test: the representation separates the basis.
  bool representation_faithful(double tol = kDefaultTol) const;

  /// Structure-level checks: associativity of the product table, the
  /// involution being an antihomomorphism, and the representation being a
  /// faithful *-homomorphism.
  ValidationReport verify(double tol = kDefaultTol) const;

  /// Export of the structure-constant tensors for external verification.
  std::vector<std::tuple<int, int, int, Complex>> structure_constants() const;

 private:
  BundlePtr bundle_;
  std::vector<BasisElement> basis_;
  std::vector<int> offset_;  // per arrow
  std::vector<SparseVec> products_;
  std::vector<SparseVec> involutions_;
  Vector unit_coords_;
  // Carrier of the representation: per unit x, the list of
  // (arrow in G_x, HS-orthonormal fibre basis index) pairs.
  std::vector<std::vector<BasisElement>> carrier_;
  std::vector<std::vector<int>> carrier_offset_;  // per unit, per arrow
  int rep_dim_ = 0;
};

/// Operator norm of f in the assembled representation.
double cstar_norm(const Section& f, const AlgebraModel& m);

/// The *-isomorphism between the section algebra of a constant bundle over
/// a principal groupoid with equal orbit sizes and matrix-valued functions:
/// a section f maps, orbit by orbit, to the block matrix whose (h, k) entry
/// is the fibre value on the unique arrow from the k-th to the h-th unit of
/// the orbit. Convolution becomes the pointwise matrix product and the
/// involution the conjugate transpose.
class StructureMap {
 public:
  /// Throws std::invalid_argument when the groupoid is not of pair-model
  /// shape (principal, constant orbit size, constant fibres).
  static StructureMap build(AlgebraPtr model);

  int n() const { return n_; }
  int num_points() const { return static_cast<int>(orbit_units_.size()); }
  int block_dim() const { return n_ * fiber_dim_ambient_; }

  /// One matrix per point of the base.
  std::vector<Matrix> to_matrix_function(const Section& f) const;
  Section from_matrix_function(const std::vector<Matrix>& mats) const;

  /// Multiplicativity, involutivity, linearity and invertibility, checked
  /// on the full basis.
  ValidationReport verify(double tol = kDefaultTol) const;

 private:
  AlgebraPtr model_;
  int n_ = 0;
  int fiber_dim_ambient_ = 0;                   // ambient d of each fibre
  std::vector<std::vector<int>> orbit_units_;   // per point, ordered units
  std::vector<std::vector<std::vector<int>>> arrow_table_;  // [x][h][k]
};

}  // namespace fellkms

#endif  // FELLKMS_ALGEBRA_HPP
