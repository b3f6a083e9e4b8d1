#ifndef FELLKMS_GROUPOID_HPP
#define FELLKMS_GROUPOID_HPP

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fellkms/common.hpp"

namespace fellkms {

class FiniteGroupoid;
using GroupoidPtr = std::shared_ptr<const FiniteGroupoid>;

/// A finite groupoid with opaque arrow identifiers and a stored composition
/// table. Range-first convention: compose(a, b) = ab is defined exactly when
/// src(a) == tgt(b), with tgt(ab) = tgt(a) and src(ab) = src(b).
class FiniteGroupoid {
 public:
  std::vector<std::string> unit_ids;
  std::vector<std::string> arrow_ids;
  std::vector<int> src;   // per arrow, unit index
  std::vector<int> tgt;   // per arrow, unit index
  std::vector<int> inv;   // per arrow, arrow index
  std::vector<int> unit_arrow;             // per unit, its identity arrow
  std::vector<std::vector<int>> compose_table;  // [a][b] -> arrow or -1

  // Subgroupoids keep a handle to the groupoid they were carved out of so
  // that bundles and cocycles can be restricted by index translation.
  GroupoidPtr parent;
  std::vector<int> parent_arrow;  // per arrow, index in parent
  std::vector<int> parent_unit;   // per unit, index in parent

  int num_units() const { return static_cast<int>(unit_ids.size()); }
  int num_arrows() const { return static_cast<int>(arrow_ids.size()); }

  bool composable(int a, int b) const { return src[a] == tgt[b]; }
  int compose(int a, int b) const { return compose_table[a][b]; }

  int unit_index(const std::string& id) const;
  int arrow_index(const std::string& id) const;

  /// G_x: arrows with source x.
  std::vector<int> arrows_with_source(int x) const;
  /// G^x: arrows with target x.
  std::vector<int> arrows_with_target(int x) const;
  /// G^x_x: arrows with source and target both x.
  std::vector<int> isotropy_arrows(int x) const;

  /// Orbit partition of the unit space: x ~ y iff some arrow joins them.
  std::vector<std::vector<int>> orbits() const;

  bool is_unit_arrow(int a) const;
};

struct AxiomViolation {
  std::string axiom;                 // short label, e.g. "inverse"
  std::string detail;                // human-readable witness description
  std::vector<int> witness_arrows;   // arrow indices involved
};

struct ValidationReport {
  std::vector<AxiomViolation> violations;
  bool ok() const { return violations.empty(); }
  bool cites(const std::string& axiom) const;
  std::string to_string() const;
};

/// Checks every groupoid axiom and reports each violation with witnesses.
/// Never throws; an empty report certifies a valid groupoid.
ValidationReport validate_groupoid(const FiniteGroupoid& g);

/// The isotropy group at x as a one-unit groupoid sharing arrow identifiers.
GroupoidPtr isotropy(const GroupoidPtr& g, int x);

/// The isotropy bundle {gamma : r(gamma) = s(gamma)} as a subgroupoid over
/// the full unit space.
GroupoidPtr isotropy_bundle(const GroupoidPtr& g);

/// Generic subgroupoid on a subset of units and arrows; arrows must close
/// under composition and inverse within the subset.
GroupoidPtr subgroupoid(const GroupoidPtr& g, const std::vector<int>& units,
                        const std::vector<int>& arrows);

/// Real-valued arrow weights. A valid cocycle satisfies
/// c(ab) = c(a) + c(b); validate_cocycle checks this. Solvers accept raw
/// tables and surface inconsistencies as infeasibility.
struct Cocycle {
  std::vector<double> values;  // per arrow
  double operator()(int a) const { return values[a]; }
};

ValidationReport validate_cocycle(const FiniteGroupoid& g, const Cocycle& c,
                                  double tol = kDefaultTol);

/// Nonnegative weights on the unit space.
struct UnitMeasure {
  RealVector weights;
  double total() const { return weights.sum(); }
  bool is_probability(double tol = kDefaultTol) const {
    return weights.minCoeff() >= -tol && approx_equal(total(), 1.0, tol);
  }
  std::vector<int> support(double tol = kDefaultTol) const;
};

struct QuasiInvarianceCheck {
  bool ok = true;
  int witness_arrow = -1;   // first failing arrow when !ok
  double lhs = 0, rhs = 0;  // mu(r(gamma)) and delta(gamma) * mu(s(gamma))
  double max_residual = 0;
};

/// Per-arrow quasi-invariance test: mu(r(gamma)) = delta(gamma) mu(s(gamma))
/// for every arrow, within tol. Singleton arrow sets are bisections, so this
/// is the full quasi-invariance condition on a finite etale groupoid.
QuasiInvarianceCheck check_quasi_invariant(
    const FiniteGroupoid& g, const UnitMeasure& mu,
    const std::vector<double>& delta, double tol = kDefaultTol);

struct OrbitDiagnosis {
  std::vector<int> units;
  bool feasible = true;
  int obstruction_arrow = -1;  // cycle obstruction witness when infeasible
};

struct QuasiInvariantSolution {
  /// Extreme points of the feasible polytope, one per consistent orbit.
  std::vector<UnitMeasure> extreme_points;
  std::vector<OrbitDiagnosis> orbit_diagnoses;
  bool feasible() const { return !extreme_points.empty(); }
};

/// Solves mu(r(gamma)) = e^{-beta c(gamma)} mu(s(gamma)), mu >= 0,
/// sum mu = 1. Orbits whose cycles force mu = 0 are reported, not errors.
QuasiInvariantSolution solve_quasi_invariant(const FiniteGroupoid& g,
                                             const Cocycle& c, double beta,
                                             double tol = kDefaultTol);

/// e^{-beta c} as a per-arrow table, the Radon-Nikodym derivative of the
/// cocycle dynamics.
std::vector<double> rn_derivative(const Cocycle& c, double beta);

// --- canonical builders used across tests and the CLI ---

/// Pair groupoid on n points: arrows (h,k), tgt (h), src (k),
/// (h,k)(k,l) = (h,l).
GroupoidPtr pair_groupoid(int n);

/// Cyclic group Z/n as a one-unit groupoid.
GroupoidPtr cyclic_group_groupoid(int n);

/// Group bundle with a cyclic group Z/orders[x] sitting over each unit.
GroupoidPtr group_bundle_groupoid(const std::vector<int>& orders);

/// Direct product of two groupoids; units and arrows are pairs.
GroupoidPtr product_groupoid(const GroupoidPtr& a, const GroupoidPtr& b);

/// Disjoint union.
GroupoidPtr disjoint_union_groupoid(const GroupoidPtr& a,
                                    const GroupoidPtr& b);

}  // namespace fellkms

#endif  // FELLKMS_GROUPOID_HPP
