#ifndef FELLKMS_MODELS_HPP
#define FELLKMS_MODELS_HPP

#include "fellkms/kms.hpp"

namespace fellkms {

/// The pair-groupoid model of matrix-valued functions: the groupoid
/// N x X x N over a finite point set X with composition
/// (h,x,m)(m,x,k) = (h,x,k), carrying the trivial bundle with a fixed
/// coefficient algebra. Its section algebra is the matrix algebra of size
/// n over functions on X with entries in the coefficient algebra.
struct PairModel {
  int n = 0;
  std::vector<std::string> points;
  GroupoidPtr groupoid;
  BundlePtr bundle;
  std::shared_ptr<const BundleSystem> system;

  int unit_index(int k, int x) const;        // unit (k, x), k in 1..n
  int arrow_index(int h, int x, int k) const;  // arrow (h, x, k)
  int num_points() const { return static_cast<int>(points.size()); }
};

/// Builds the model. The coefficient algebra is a unital matrix *-algebra
/// given by a spanning set; scalars are the 1 x 1 identity.
PairModel build_pair_model(int n, const std::vector<std::string>& points,
                           const std::vector<Matrix>& coefficient_algebra);

/// The cocycle c(h, x, k) = h - k.
Cocycle h_minus_k_cocycle(const PairModel& model);

/// Builds the quasi-invariant probability measure from a finite measure on
/// the base: weights (k, x) proportional to e^{-beta c(k,x,1)} mu1(x),
/// normalised to total mass one. Throws when mu1 vanishes identically.
UnitMeasure measure_from_mu1(const PairModel& model, const RealVector& mu1,
                             const Cocycle& c, double beta);

/// Inverse direction: the slice of a quasi-invariant measure over the first
/// row, rescaled so the round trip through measure_from_mu1 is exact.
/// Throws (with the witness arrow in the message) when nu fails the
/// quasi-invariance check.
RealVector mu1_from_measure(const PairModel& model, const UnitMeasure& nu,
                            const Cocycle& c, double beta,
                            double tol = kDefaultTol);

/// KMS states of the matrix model with coefficients: verifies the exchange
/// condition for the per-unit field of states on the coefficient algebra
/// (with trivial isotropy it forces the states to match across the rows of
/// each column x), integrates against measure_from_mu1(mu1) and certifies.
/// phi_A maps each unit (k, x) to a functional on the coefficient algebra
/// basis. Throws with a witness when the condition fails.
std::pair<State, KmsCertificate> kms_states_matrix_model(
    const PairModel& model, const RealVector& mu1,
    const std::map<int, Vector>& phi_A, const Cocycle& c, double beta,
    double tol = kDefaultTol);

/// A finite right G-space: points with a momentum map m to the unit space
/// and an action x . gamma defined when m(x) = r(gamma), landing in
/// m^{-1}(s(gamma)).
struct GSpace {
  GroupoidPtr groupoid;
  std::vector<std::string> point_ids;
  std::vector<int> momentum;               // per point, unit index
  std::vector<std::vector<int>> action;    // [point][arrow] -> point or -1

  int num_points() const { return static_cast<int>(point_ids.size()); }
  int act(int x, int arrow) const { return action[x][arrow]; }
  std::vector<int> fiber(int unit) const;  // m^{-1}(unit)
};

ValidationReport validate_gspace(const GSpace& gs);

/// The transformation groupoid X x| G: arrows (x, gamma) with target x and
/// source x . gamma, composition (x, gamma)(x . gamma, eta) = (x, gamma eta),
/// unit space X.
GroupoidPtr transformation_groupoid(const GSpace& gs);

/// The (point, arrow) decomposition of the transformation groupoid's
/// arrows, in the enumeration order transformation_groupoid uses.
std::vector<std::pair<int, int>> transformation_arrow_table(const GSpace& gs);

/// Stabiliser subgroup of x: arrows gamma of G with x . gamma = x.
std::vector<int> stabilizer(const GSpace& gs, int x);

/// Pulls a cocycle on G back to the transformation groupoid.
Cocycle pullback_cocycle(const GSpace& gs, const GroupoidPtr& tg,
                         const Cocycle& c_on_g);

/// The double disintegration of a KMS state on the crossed product of a
/// G-space, produced by disintegrating first over the unit space of G and
/// then, inside every isotropy block (the transformation group of the
/// fibre), over the fibre itself.
struct GSpaceKmsTriple {
  UnitMeasure mu;                               // on G^(0)
  std::map<int, std::map<int, double>> nu;      // unit -> point -> weight
  std::map<int, std::map<int, State>> tau;      // unit -> point -> state on C*(St(x))
  /// Per in-support unit, the transformation group of its fibre; the
  /// isotropy of this groupoid at a point is the stabiliser of the point.
  std::map<int, GroupoidPtr> fiber_groupoid;
  double reproduction_residual = 0;
  /// Quasi-invariance of the composed measure on X for the transformation
  /// groupoid dynamics.
  QuasiInvarianceCheck composed_condition_I;
  /// Quasi-invariance of mu on G^(0) when the cocycle descends to G;
  /// left unevaluated (residual -1) otherwise.
  QuasiInvarianceCheck base_condition_I;
  bool cocycle_descends = false;
};

/// sys must be the system of the trivial line bundle over the
/// transformation groupoid of gs; phi a state on its algebra; c a cocycle
/// on the transformation groupoid. Throws when is_kms fails.
GSpaceKmsTriple gspace_double_disintegrate(const GSpace& gs,
                                           const BundleSystem& sys,
                                           const State& phi, double beta,
                                           const Cocycle& c,
                                           double tol = kDefaultTol);

/// Re-integrates a triple through
///   phi(f) = sum_u mu(u) sum_{x in m^{-1}(u)} nu_u(x)
///            sum_{eta in St(x)} f(x, eta) tau_{u,x}(delta_eta)
/// and returns the state on the transformation-groupoid algebra.
State gspace_integrate_triple(const GSpace& gs, const BundleSystem& sys,
                              const GSpaceKmsTriple& triple);

}  // namespace fellkms

#endif  // FELLKMS_MODELS_HPP
