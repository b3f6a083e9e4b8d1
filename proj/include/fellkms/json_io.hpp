#ifndef FELLKMS_JSON_IO_HPP
#define FELLKMS_JSON_IO_HPP

#include <json.hpp>
#include <optional>

#include "fellkms/models.hpp"

namespace fellkms {

using Json = nlohmann::json;

/// Rounds to 12 significant digits so that reports serialise with a fixed
/// float format.
double round12(double v);
Json jnum(double v);
Json jcomplex(const Complex& v);

// --- instance ingestion ---

/// {"units": [...], "arrows": [{"id","src","tgt"}...],
///  "compose": [["a","b","ab"]...], "inv": [["a","ainv"]...],
///  "unit_arrows": {"x": "ux"} (optional, inferred when missing)}
GroupoidPtr parse_groupoid(const Json& j);

/// {"arrow_id": value, ...}
Cocycle parse_cocycle(const Json& j, const FiniteGroupoid& g);

/// {"unit_id": weight, ...}
UnitMeasure parse_measure(const Json& j, const FiniteGroupoid& g);

/// Algebra spec: {"dim": d} for the full matrix algebra M_d,
/// {"blocks": [d1, d2, ...]} for a block-diagonal algebra, or
/// {"dim": d, "basis": [matrix...]} with matrix = [[[re,im]...]...].
std::vector<Matrix> parse_algebra_spec(const Json& j);

/// Explicit bundle: {"arrows": {"id": {"rows", "cols", "basis": [...]}}}.
BundlePtr parse_bundle(const Json& j, GroupoidPtr g);

/// {"dims": {"unit": d}, "algebras": {"unit": ALGSPEC} (optional, full),
///  "unitaries": {"arrow": matrix}}
GroupoidAction parse_action(const Json& j, GroupoidPtr g);

/// {"arrow_id": [[re,im], ...coords...], ...}
Section parse_section(const Json& j, BundlePtr b);

/// {"coeffs": {"(arrow,k)": [re,im], ...}}
State parse_state(const Json& j, AlgebraPtr algebra);
Json state_to_json(const State& s);

/// {"unit_id": {"coeffs": ...}, ...} with members on isotropy algebras.
StateField parse_field(const Json& j, const BundleSystem& sys);

/// {"groupoid": <groupoid json>, "points": [...], "momentum": {"p": "u"},
///  "action": {"p": {"arrow": "q"}}}
GSpace parse_gspace(const Json& j);

/// A fully resolved scenario: groupoid and bundle (explicit or through a
/// builder shorthand), optional cocycle/beta/measure/state/field inputs.
struct Scenario {
  GroupoidPtr groupoid;
  BundlePtr bundle;
  std::shared_ptr<const BundleSystem> system;
  std::optional<Cocycle> cocycle;
  std::optional<double> beta;
  std::optional<UnitMeasure> measure;
  std::optional<State> state;
  std::optional<StateField> field;
  std::optional<PairModel> pair;  // present when built from the shorthand
  std::optional<GSpace> gspace;   // present for transformation shorthand
};

/// The groupoid of a scenario alone, without building bundles or algebra
/// models; lets validation report on a broken groupoid before anything is
/// constructed on top of it.
GroupoidPtr parse_scenario_groupoid(const Json& j);

/// Accepted groupoid shorthands: {"pair_model": {"n", "X"}},
/// {"cyclic_group": n}, {"group_bundle": [orders...]},
/// {"transformation": <gspace json>}, or an explicit groupoid object.
/// Bundle shorthands: {"trivial": ALGSPEC}, {"pullback": <action json>},
/// explicit {"arrows": ...}, or omitted (trivial line bundle).
/// Cocycle: "h_minus_k" (pair model) or an explicit table.
Scenario parse_scenario(const Json& j);

// --- report serialisation ---

Json validation_to_json(const ValidationReport& r);
Json measure_to_json(const UnitMeasure& mu, const FiniteGroupoid& g);
Json certificate_to_json(const KmsCertificate& cert);
Json field_to_json(const StateField& field, const BundleSystem& sys);

}  // namespace fellkms

#endif  // FELLKMS_JSON_IO_HPP
