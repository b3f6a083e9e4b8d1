#include "fellkms/json_io.hpp"

#include <cstdio>
#include <stdexcept>

namespace fellkms {

double round12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::strtod(buf, nullptr);
}

Json jnum(double v) { return Json(round12(v)); }

Json jcomplex(const Complex& v) {
  return Json::array({round12(v.real()), round12(v.imag())});
}

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument("input error: " + what);
}

Complex parse_complex(const Json& j) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2)
    return Complex(j[0].get<double>(), j[1].get<double>());
  fail("expected a number or an [re, im] pair");
}

Matrix parse_matrix(const Json& j) {
  if (!j.is_array() || j.empty()) fail("expected a matrix as a list of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols) fail("ragged matrix rows");
    for (int c = 0; c < cols; ++c) m(r, c) = parse_complex(j[r][c]);
  }
  return m;
}

}  // namespace

GroupoidPtr parse_groupoid(const Json& j) {
  auto g = std::make_shared<FiniteGroupoid>();
  if (!j.contains("units") || !j.contains("arrows"))
    fail("groupoid needs \"units\" and \"arrows\"");
  for (const auto& u : j.at("units")) g->unit_ids.push_back(u.get<std::string>());
  for (const auto& a : j.at("arrows")) {
    g->arrow_ids.push_back(a.at("id").get<std::string>());
    g->src.push_back(g->unit_index(a.at("src").get<std::string>()));
    g->tgt.push_back(g->unit_index(a.at("tgt").get<std::string>()));
  }
  const int na = g->num_arrows();
  g->inv.assign(na, -1);
  for (const auto& pair : j.at("inv")) {
    int a = g->arrow_index(pair[0].get<std::string>());
    int b = g->arrow_index(pair[1].get<std::string>());
    g->inv[a] = b;
    if (g->inv[b] < 0) g->inv[b] = a;
  }
  for (int a = 0; a < na; ++a)
    if (g->inv[a] < 0) fail("arrow " + g->arrow_ids[a] + " has no inverse entry");
  g->compose_table.assign(na, std::vector<int>(na, -1));
  for (const auto& triple : j.at("compose")) {
    int a = g->arrow_index(triple[0].get<std::string>());
    int b = g->arrow_index(triple[1].get<std::string>());
    int c = g->arrow_index(triple[2].get<std::string>());
    g->compose_table[a][b] = c;
  }
  g->unit_arrow.assign(g->num_units(), -1);
  if (j.contains("unit_arrows")) {
    for (const auto& [unit, arrow] : j.at("unit_arrows").items())
      g->unit_arrow[g->unit_index(unit)] = g->arrow_index(arrow.get<std::string>());
  } else {
    // Infer: the endo-arrow at x acting as a two-sided identity.
    for (int x = 0; x < g->num_units(); ++x) {
      for (int u = 0; u < na && g->unit_arrow[x] < 0; ++u) {
        if (g->src[u] != x || g->tgt[u] != x) continue;
        bool identity = g->compose_table[u][u] == u;
        for (int a = 0; a < na && identity; ++a) {
          if (g->src[a] == x && g->compose_table[a][u] != a) identity = false;
          if (g->tgt[a] == x && g->compose_table[u][a] != a) identity = false;
        }
        if (identity) g->unit_arrow[x] = u;
      }
      if (g->unit_arrow[x] < 0)
        fail("no identity arrow found at unit " + g->unit_ids[x] +
             " (declare \"unit_arrows\")");
    }
  }
  return g;
}

Cocycle parse_cocycle(const Json& j, const FiniteGroupoid& g) {
  Cocycle c;
  c.values.assign(g.num_arrows(), 0.0);
  for (const auto& [id, v] : j.items())
    c.values[g.arrow_index(id)] = v.get<double>();
  return c;
}

UnitMeasure parse_measure(const Json& j, const FiniteGroupoid& g) {
  UnitMeasure mu;
  mu.weights = RealVector::Zero(g.num_units());
  for (const auto& [id, v] : j.items())
    mu.weights(g.unit_index(id)) = v.get<double>();
  return mu;
}

std::vector<Matrix> parse_algebra_spec(const Json& j) {
  if (j.contains("basis")) {
    std::vector<Matrix> basis;
    for (const auto& m : j.at("basis")) basis.push_back(parse_matrix(m));
    return basis;
  }
  if (j.contains("blocks"))
    return block_diagonal_algebra_basis(j.at("blocks").get<std::vector<int>>());
  if (j.contains("dim")) return full_matrix_algebra_basis(j.at("dim").get<int>());
  fail("algebra spec needs \"dim\", \"blocks\" or \"basis\"");
}

BundlePtr parse_bundle(const Json& j, GroupoidPtr g) {
  if (!j.contains("arrows")) fail("bundle needs an \"arrows\" object");
  std::vector<Fiber> fibers;
  fibers.reserve(g->num_arrows());
  for (int a = 0; a < g->num_arrows(); ++a) {
    const Json& fj = j.at("arrows").at(g->arrow_ids[a]);
    int rows = fj.at("rows").get<int>();
    int cols = fj.at("cols").get<int>();
    std::vector<Matrix> basis;
    for (const auto& m : fj.at("basis")) basis.push_back(parse_matrix(m));
    fibers.emplace_back(a, rows, cols, std::move(basis));
  }
  return FellBundle::build(std::move(g), std::move(fibers));
}

GroupoidAction parse_action(const Json& j, GroupoidPtr g) {
  GroupoidAction act;
  act.groupoid = g;
  act.dim.assign(g->num_units(), 0);
  for (const auto& [unit, d] : j.at("dims").items())
    act.dim[g->unit_index(unit)] = d.get<int>();
  act.algebra.resize(g->num_units());
  for (int x = 0; x < g->num_units(); ++x) {
    if (j.contains("algebras") && j.at("algebras").contains(g->unit_ids[x]))
      act.algebra[x] = parse_algebra_spec(j.at("algebras").at(g->unit_ids[x]));
    else
      act.algebra[x] = full_matrix_algebra_basis(act.dim[x]);
  }
  act.unitary.resize(g->num_arrows());
  for (int a = 0; a < g->num_arrows(); ++a) {
    if (j.contains("unitaries") && j.at("unitaries").contains(g->arrow_ids[a]))
      act.unitary[a] = parse_matrix(j.at("unitaries").at(g->arrow_ids[a]));
    else if (act.dim[g->tgt[a]] == act.dim[g->src[a]])
      act.unitary[a] = Matrix::Identity(act.dim[g->tgt[a]], act.dim[g->src[a]]);
    else
      fail("action unitary missing over arrow " + g->arrow_ids[a]);
  }
  return act;
}

Section parse_section(const Json& j, BundlePtr b) {
  Section s(b);
  const auto& g = *b->groupoid();
  for (const auto& [id, coords] : j.items()) {
    int a = g.arrow_index(id);
    const Fiber& f = b->fiber(a);
    if (static_cast<int>(coords.size()) != f.dim())
      fail("section coordinates over " + id + " have wrong length");
    Vector c(f.dim());
    for (int k = 0; k < f.dim(); ++k) c(k) = parse_complex(coords[k]);
    Matrix v = f.from_coords(c);
    if (!approx_zero(v)) s.set(a, std::move(v));
  }
  return s;
}

namespace {

std::pair<std::string, int> split_state_key(const std::string& key) {
  if (key.size() < 4 || key.front() != '(' || key.back() != ')')
    fail("state coefficient key must look like \"(arrow,k)\"");
  auto comma = key.rfind(',');
  if (comma == std::string::npos) fail("state coefficient key missing comma");
  std::string arrow = key.substr(1, comma - 1);
  int idx = std::stoi(key.substr(comma + 1, key.size() - comma - 2));
  return {arrow, idx};
}

}  // namespace

State parse_state(const Json& j, AlgebraPtr algebra) {
  Vector coeffs = Vector::Zero(algebra->dim());
  const auto& g = *algebra->groupoid();
  for (const auto& [key, v] : j.at("coeffs").items()) {
    auto [arrow_id, k] = split_state_key(key);
    int a = g.arrow_index(arrow_id);
    if (k < 0 || k >= algebra->bundle()->fiber(a).dim())
      fail("state coefficient index out of range in " + key);
    coeffs(algebra->basis_offset(a) + k) = parse_complex(v);
  }
  return State(algebra, std::move(coeffs));
}

Json state_to_json(const State& s) {
  Json coeffs = Json::object();
  const auto& m = *s.algebra();
  const auto& g = *m.groupoid();
  for (int i = 0; i < m.dim(); ++i) {
    Complex v = s.value_basis(i);
    if (approx_zero(v, 1e-14)) continue;
    const auto& be = m.basis()[i];
    coeffs["(" + g.arrow_ids[be.arrow] + "," + std::to_string(be.fiber_index) +
           ")"] = jcomplex(v);
  }
  return Json{{"coeffs", coeffs}};
}

StateField parse_field(const Json& j, const BundleSystem& sys) {
  StateField field;
  const auto& g = *sys.groupoid();
  for (const auto& [unit, sj] : j.items()) {
    int x = g.unit_index(unit);
    field.members.emplace(x, parse_state(sj, sys.isotropy_algebra(x)));
    field.support.insert(x);
  }
  return field;
}

GSpace parse_gspace(const Json& j) {
  GSpace gs;
  gs.groupoid = parse_groupoid(j.at("groupoid"));
  for (const auto& p : j.at("points")) gs.point_ids.push_back(p.get<std::string>());
  const auto& g = *gs.groupoid;
  gs.momentum.assign(gs.num_points(), -1);
  auto point_index = [&](const std::string& id) {
    for (int i = 0; i < gs.num_points(); ++i)
      if (gs.point_ids[i] == id) return i;
    fail("unknown point: " + id);
    return -1;
  };
  for (const auto& [p, u] : j.at("momentum").items())
    gs.momentum[point_index(p)] = g.unit_index(u.get<std::string>());
  gs.action.assign(gs.num_points(), std::vector<int>(g.num_arrows(), -1));
  for (const auto& [p, row] : j.at("action").items()) {
    int x = point_index(p);
    for (const auto& [arrow, q] : row.items())
      gs.action[x][g.arrow_index(arrow)] = point_index(q.get<std::string>());
  }
  return gs;
}

GroupoidPtr parse_scenario_groupoid(const Json& j) {
  const Json& gj = j.at("groupoid");
  if (gj.contains("pair_model")) {
    const Json& pm = gj.at("pair_model");
    std::vector<std::string> points;
    for (const auto& p : pm.at("X")) points.push_back(p.get<std::string>());
    return build_pair_model(pm.at("n").get<int>(), points,
                            {Matrix::Identity(1, 1)})
        .groupoid;
  }
  if (gj.contains("cyclic_group"))
    return cyclic_group_groupoid(gj.at("cyclic_group").get<int>());
  if (gj.contains("group_bundle"))
    return group_bundle_groupoid(gj.at("group_bundle").get<std::vector<int>>());
  if (gj.contains("transformation")) {
    GSpace gs = parse_gspace(gj.at("transformation"));
    ValidationReport vr = validate_gspace(gs);
    if (!vr.ok()) fail("invalid groupoid action:\n" + vr.to_string());
    return transformation_groupoid(gs);
  }
  return parse_groupoid(gj);
}

Scenario parse_scenario(const Json& j) {
  Scenario sc;

  const Json& gj = j.at("groupoid");
  if (gj.contains("pair_model")) {
    const Json& pm = gj.at("pair_model");
    int n = pm.at("n").get<int>();
    std::vector<std::string> points;
    for (const auto& p : pm.at("X")) points.push_back(p.get<std::string>());
    std::vector<Matrix> coeff = {Matrix::Identity(1, 1)};
    if (pm.contains("A"))
      coeff = parse_algebra_spec(pm.at("A"));
    else if (j.contains("bundle") && j.at("bundle").contains("trivial"))
      coeff = parse_algebra_spec(j.at("bundle").at("trivial"));
    sc.pair = build_pair_model(n, points, coeff);
    sc.groupoid = sc.pair->groupoid;
    sc.bundle = sc.pair->bundle;
    sc.system = sc.pair->system;
    if (pm.contains("cocycle") && !j.contains("cocycle")) {
      if (pm.at("cocycle").is_string() &&
          pm.at("cocycle").get<std::string>() == "h_minus_k")
        sc.cocycle = h_minus_k_cocycle(*sc.pair);
      else
        sc.cocycle = parse_cocycle(pm.at("cocycle"), *sc.groupoid);
    }
  } else if (gj.contains("cyclic_group")) {
    sc.groupoid = cyclic_group_groupoid(gj.at("cyclic_group").get<int>());
  } else if (gj.contains("group_bundle")) {
    sc.groupoid =
        group_bundle_groupoid(gj.at("group_bundle").get<std::vector<int>>());
  } else if (gj.contains("transformation")) {
    sc.gspace = parse_gspace(gj.at("transformation"));
    ValidationReport vr = validate_gspace(*sc.gspace);
    if (!vr.ok()) fail("invalid groupoid action:\n" + vr.to_string());
    sc.groupoid = transformation_groupoid(*sc.gspace);
  } else {
    sc.groupoid = parse_groupoid(gj);
  }

  if (!sc.bundle) {
    if (j.contains("bundle")) {
      const Json& bj = j.at("bundle");
      if (bj.contains("trivial"))
        sc.bundle = trivial_bundle(sc.groupoid, parse_algebra_spec(bj.at("trivial")));
      else if (bj.contains("pullback")) {
        GroupoidAction act = parse_action(bj.at("pullback"), sc.groupoid);
        ValidationReport vr = validate_action(act);
        if (!vr.ok()) fail("invalid action:\n" + vr.to_string());
        sc.bundle = pullback_bundle(act);
      } else
        sc.bundle = parse_bundle(bj, sc.groupoid);
    } else {
      sc.bundle = trivial_bundle(sc.groupoid, {Matrix::Identity(1, 1)});
    }
    sc.system = std::make_shared<BundleSystem>(sc.bundle);
  }

  if (j.contains("cocycle")) {
    if (j.at("cocycle").is_string()) {
      std::string name = j.at("cocycle").get<std::string>();
      if (name == "h_minus_k" && sc.pair)
        sc.cocycle = h_minus_k_cocycle(*sc.pair);
      else
        fail("unknown cocycle shorthand \"" + name + "\"");
    } else {
      sc.cocycle = parse_cocycle(j.at("cocycle"), *sc.groupoid);
    }
  }
  if (j.contains("beta")) {
    sc.beta = j.at("beta").get<double>();
    if (!std::isfinite(*sc.beta)) fail("beta must be finite");
  }
  if (j.contains("measure")) sc.measure = parse_measure(j.at("measure"), *sc.groupoid);
  if (j.contains("state")) sc.state = parse_state(j.at("state"), sc.system->algebra());
  if (j.contains("field")) sc.field = parse_field(j.at("field"), *sc.system);
  return sc;
}

Json validation_to_json(const ValidationReport& r) {
  Json out = Json::object();
  out["ok"] = r.ok();
  Json list = Json::array();
  for (const auto& v : r.violations) {
    Json item;
    item["axiom"] = v.axiom;
    item["detail"] = v.detail;
    item["witness_arrows"] = v.witness_arrows;
    list.push_back(item);
  }
  out["violations"] = list;
  return out;
}

Json measure_to_json(const UnitMeasure& mu, const FiniteGroupoid& g) {
  Json out = Json::object();
  for (int x = 0; x < g.num_units(); ++x)
    out[g.unit_ids[x]] = jnum(mu.weights(x));
  return out;
}

Json certificate_to_json(const KmsCertificate& cert) {
  Json out;
  out["beta"] = jnum(cert.beta);
  out["kms_residual"] = jnum(cert.kms_residual);
  out["pass"] = cert.pass;
  if (cert.condition_I_residual >= 0)
    out["condition_I_residual"] = jnum(cert.condition_I_residual);
  if (cert.condition_II_residual >= 0)
    out["condition_II_residual"] = jnum(cert.condition_II_residual);
  if (cert.witness.i >= 0) {
    out["witness"] = Json{{"i", cert.witness.i},
                          {"j", cert.witness.j},
                          {"lhs", jcomplex(cert.witness.lhs)},
                          {"rhs", jcomplex(cert.witness.rhs)}};
  }
  return out;
}

Json field_to_json(const StateField& field, const BundleSystem& sys) {
  Json out = Json::object();
  for (const auto& [x, s] : field.members)
    out[sys.groupoid()->unit_ids[x]] = state_to_json(s);
  return out;
}

}  // namespace fellkms
