#ifndef FELLKMS_KMS_HPP
#define FELLKMS_KMS_HPP

#include "fellkms/states.hpp"

namespace fellkms {

/// The one-parameter dynamics generated by a cocycle:
/// sigma_t(f)(gamma) = e^{i t c(gamma)} f(gamma). The analytic continuation
/// to imaginary time multiplies by e^{-beta c(gamma)}; every section is
/// entire because the action is diagonal over arrows.
struct Dynamics {
  GroupoidPtr groupoid;
  Cocycle cocycle;

  Section apply(const Section& f, double t) const;
  Section apply_imaginary(const Section& f, double beta) const;
  /// Diagonal scaling of algebra coordinates by e^{-beta c}.
  Vector scale_imaginary(const AlgebraModel& m, const Vector& v,
                         double beta) const;
};

struct KmsWitness {
  int i = -1, j = -1;  // algebra basis pair
  Complex lhs, rhs;
};

/// Certificate for the KMS identity phi(f g) = phi(g sigma_{i beta}(f)),
/// checked over the full basis grid, together with the residuals of the
/// quasi-invariance condition on the measure and the exchange condition on
/// the field when those were evaluated.
struct KmsCertificate {
  double beta = 0;
  double kms_residual = 0;
  double condition_I_residual = -1;   // negative when not evaluated
  double condition_II_residual = -1;  // negative when not evaluated
  bool kms_pass = false;
  bool pass = false;
  KmsWitness witness;
};

/// Runs the KMS grid check. The state must be a state (positivity and
/// normalisation are re-certified and recorded through kms_pass).
KmsCertificate is_kms(const State& phi, double beta, const Dynamics& dyn,
                      double tol = kDefaultTol);

/// Condition on the measure: quasi-invariance with derivative e^{-beta c}.
QuasiInvarianceCheck check_condition_I(const FiniteGroupoid& g,
                                       const UnitMeasure& mu, double beta,
                                       const Cocycle& c,
                                       double tol = kDefaultTol);

struct ConditionIIWitness {
  int x = -1;      // unit
  int gamma = -1;  // isotropy arrow at x
  int eta = -1;    // arrow with source x
  int a_index = -1, xi_index = -1;  // fibre basis indices
  Complex lhs, rhs;
};

struct ConditionIIResult {
  bool ok = true;
  double max_residual = 0;
  ConditionIIWitness witness;
};

/// The exchange condition on a field of states: for x in the support,
/// gamma in G^x_x, eta in G_x with r(eta) in the support, and fibre basis
/// elements a over gamma and xi over eta,
///   phi_{s(eta)}(a xi* xi delta_gamma)
///     = phi_{r(eta)}(xi a xi* delta_{eta gamma eta^{-1}}).
/// The identity is linear in a and sesquilinear in xi, so the basis grid
/// decides it.
ConditionIIResult check_condition_II(const BundleSystem& sys,
                                     const StateField& phi,
                                     const std::vector<int>& support,
                                     double tol = kDefaultTol);

/// Integrates a pair satisfying both conditions and certifies the result.
/// Throws when a precondition fails, naming the condition.
std::pair<State, KmsCertificate> kms_from_pair(const BundleSystem& sys,
                                               const UnitMeasure& mu,
                                               const StateField& phi,
                                               double beta, const Cocycle& c,
                                               double tol = kDefaultTol);

struct KmsDisintegration {
  UnitMeasure mu;
  StateField field;
  KmsCertificate certificate;  // of the input state
  QuasiInvarianceCheck condition_I;
  ConditionIIResult condition_II;
};

/// Disintegrates a certified KMS state and verifies that the resulting pair
/// satisfies both conditions, which the correspondence guarantees.
/// Throws when is_kms fails.
KmsDisintegration pair_from_kms(const BundleSystem& sys, const State& phi,
                                double beta, const Cocycle& c,
                                double tol = kDefaultTol);

/// The exchange condition written through a groupoid action, for bundles of
/// pullback form: for a in A(s(eta)) and xi in A(r(eta)),
///   phi_{s(eta)}(a alpha_{gamma eta^{-1}}(xi* xi) delta_gamma)
///     = phi_{r(eta)}(xi alpha_eta(a) alpha_{eta gamma eta^{-1}}(xi*)
///                    delta_{eta gamma eta^{-1}}).
/// Agrees with check_condition_II through the pullback identification.
ConditionIIResult check_crossed_product_condition(
    const BundleSystem& sys, const StateField& phi, const GroupoidAction& act,
    const std::vector<int>& support, double tol = kDefaultTol);

struct KmsCandidate {
  UnitMeasure mu;
  StateField field;
  State state;
  KmsCertificate certificate;
  bool converged = false;
  std::string diagnosis;
};

struct KmsSolveOptions {
  int max_iterations = 20000;
  double tol = kDefaultTol;
};

struct KmsSolveResult {
  std::vector<KmsCandidate> candidates;
  std::vector<std::string> diagnoses;  // per infeasible orbit or failure
  bool feasible() const {
    for (const auto& c : candidates)
      if (c.converged && c.certificate.pass) return true;
    return false;
  }
};

/// Solves for KMS states: the measure comes from the quasi-invariance
/// system (one extreme point per consistent orbit); the field comes from
/// alternating projection between the affine set cut out by the exchange
/// condition plus normalisation and the positive cone, seeded with the
/// normalised trace of the representation. Non-convergence is reported,
/// never silently accepted.
KmsSolveResult solve_kms(const BundleSystem& sys, const Cocycle& c,
                         double beta, const KmsSolveOptions& options = {});

}  // namespace fellkms

#endif  // FELLKMS_KMS_HPP
