#include "fellkms/groupoid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace fellkms {

int FiniteGroupoid::unit_index(const std::string& id) const {
  for (int i = 0; i < num_units(); ++i)
    if (unit_ids[i] == id) return i;
  throw std::invalid_argument("unknown unit: " + id);
}

int FiniteGroupoid::arrow_index(const std::string& id) const {
  for (int i = 0; i < num_arrows(); ++i)
    if (arrow_ids[i] == id) return i;
  throw std::invalid_argument("unknown arrow: " + id);
}

std::vector<int> FiniteGroupoid::arrows_with_source(int x) const {
  std::vector<int> out;
  for (int a = 0; a < num_arrows(); ++a)
    if (src[a] == x) out.push_back(a);
  return out;
}

std::vector<int> FiniteGroupoid::arrows_with_target(int x) const {
  std::vector<int> out;
  for (int a = 0; a < num_arrows(); ++a)
    if (tgt[a] == x) out.push_back(a);
  return out;
}

std::vector<int> FiniteGroupoid::isotropy_arrows(int x) const {
  std::vector<int> out;
  for (int a = 0; a < num_arrows(); ++a)
    if (src[a] == x && tgt[a] == x) out.push_back(a);
  return out;
}

bool FiniteGroupoid::is_unit_arrow(int a) const {
  int x = tgt[a];
  return src[a] == x && unit_arrow[x] == a;
}

std::vector<std::vector<int>> FiniteGroupoid::orbits() const {
  std::vector<int> comp(num_units(), -1);
  int next = 0;
  for (int x = 0; x < num_units(); ++x) {
    if (comp[x] >= 0) continue;
    comp[x] = next;
    std::queue<int> q;
    q.push(x);
    while (!q.empty()) {
      int y = q.front();
      q.pop();
      for (int a = 0; a < num_arrows(); ++a) {
        if (src[a] == y && comp[tgt[a]] < 0) {
          comp[tgt[a]] = next;
          q.push(tgt[a]);
        }
        if (tgt[a] == y && comp[src[a]] < 0) {
          comp[src[a]] = next;
          q.push(src[a]);
        }
      }
    }
    ++next;
  }
  std::vector<std::vector<int>> out(next);
  for (int x = 0; x < num_units(); ++x) out[comp[x]].push_back(x);
  return out;
}

bool ValidationReport::cites(const std::string& axiom) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const AxiomViolation& v) { return v.axiom == axiom; });
}

std::string ValidationReport::to_string() const {
  if (ok()) return "valid";
  std::ostringstream os;
  for (const auto& v : violations) os << "[" << v.axiom << "] " << v.detail << "\n";
  return os.str();
}

ValidationReport validate_groupoid(const FiniteGroupoid& g) {
  ValidationReport report;
  auto add = [&](const std::string& axiom, const std::string& detail,
                 std::vector<int> witness = {}) {
    report.violations.push_back({axiom, detail, std::move(witness)});
  };

  const int nu = g.num_units();
  const int na = g.num_arrows();

  // Shape of the tables.
  if (static_cast<int>(g.src.size()) != na ||
      static_cast<int>(g.tgt.size()) != na ||
      static_cast<int>(g.inv.size()) != na ||
      static_cast<int>(g.unit_arrow.size()) != nu ||
      static_cast<int>(g.compose_table.size()) != na) {
    add("shape", "table sizes do not match unit/arrow counts");
    return report;
  }
  for (int a = 0; a < na; ++a) {
    if (g.src[a] < 0 || g.src[a] >= nu || g.tgt[a] < 0 || g.tgt[a] >= nu)
      add("shape", "arrow " + g.arrow_ids[a] + " references unknown unit", {a});
    if (g.inv[a] < 0 || g.inv[a] >= na)
      add("shape", "arrow " + g.arrow_ids[a] + " has no inverse entry", {a});
    if (static_cast<int>(g.compose_table[a].size()) != na)
      add("shape", "composition row for " + g.arrow_ids[a] + " malformed", {a});
  }
  if (!report.ok()) return report;

  // Composition domain: defined exactly on composable pairs, with the
  // range-first source/target bookkeeping.
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < na; ++b) {
      int c = g.compose_table[a][b];
      if (g.composable(a, b)) {
        if (c < 0) {
          add("compose-domain",
              "composable pair (" + g.arrow_ids[a] + ", " + g.arrow_ids[b] +
                  ") has no composite",
              {a, b});
        } else if (c >= na) {
          add("compose-domain", "composite out of range", {a, b});
        } else if (g.tgt[c] != g.tgt[a] || g.src[c] != g.src[b]) {
          add("compose-range",
              "composite " + g.arrow_ids[c] + " of (" + g.arrow_ids[a] + ", " +
                  g.arrow_ids[b] + ") has wrong source or target",
              {a, b, c});
        }
      } else if (c >= 0) {
        add("compose-domain",
            "non-composable pair (" + g.arrow_ids[a] + ", " + g.arrow_ids[b] +
                ") declared composable",
            {a, b});
      }
    }
  }

  // Unit arrows: r(u_x) = s(u_x) = x and identity behaviour.
  for (int x = 0; x < nu; ++x) {
    int u = g.unit_arrow[x];
    if (u < 0 || u >= na) {
      add("identity", "unit " + g.unit_ids[x] + " has no unit arrow");
      continue;
    }
    if (g.src[u] != x || g.tgt[u] != x)
      add("identity",
          "unit arrow of " + g.unit_ids[x] + " is not an endomorphism at it",
          {u});
    for (int a = 0; a < na; ++a) {
      if (g.src[a] == x && g.compose_table[a][u] != a)
        add("identity",
            "unit arrow of " + g.unit_ids[x] + " fails as right identity on " +
                g.arrow_ids[a],
            {a, u});
      if (g.tgt[a] == x && g.compose_table[u][a] != a)
        add("identity",
            "unit arrow of " + g.unit_ids[x] + " fails as left identity on " +
                g.arrow_ids[a],
            {u, a});
    }
  }

  // Inverses: involution, gamma inv(gamma) = u_{r(gamma)},
  // inv(gamma) gamma = u_{s(gamma)}.
  for (int a = 0; a < na; ++a) {
    int ai = g.inv[a];
    if (g.inv[ai] != a)
      add("inverse", "inv is not an involution at " + g.arrow_ids[a], {a, ai});
    if (g.src[ai] != g.tgt[a] || g.tgt[ai] != g.src[a])
      add("inverse",
          "inverse of " + g.arrow_ids[a] + " does not swap source and target",
          {a, ai});
    if (g.composable(a, ai) && g.compose_table[a][ai] != g.unit_arrow[g.tgt[a]])
      add("inverse",
          g.arrow_ids[a] + " composed with its inverse is not the unit arrow",
          {a, ai});
    if (g.composable(ai, a) && g.compose_table[ai][a] != g.unit_arrow[g.src[a]])
      add("inverse",
          "inverse of " + g.arrow_ids[a] +
              " composed with it is not the unit arrow",
          {ai, a});
  }

  // Associativity on all composable triples.
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < na; ++b) {
      if (!g.composable(a, b)) continue;
      int ab = g.compose_table[a][b];
      if (ab < 0) continue;
      for (int c = 0; c < na; ++c) {
        if (!g.composable(b, c)) continue;
        int bc = g.compose_table[b][c];
        if (bc < 0) continue;
        if (g.compose_table[ab][c] != g.compose_table[a][bc])
          add("associativity",
              "(" + g.arrow_ids[a] + " " + g.arrow_ids[b] + ") " +
                  g.arrow_ids[c] + " != " + g.arrow_ids[a] + " (" +
                  g.arrow_ids[b] + " " + g.arrow_ids[c] + ")",
              {a, b, c});
      }
    }
  }

  return report;
}

GroupoidPtr subgroupoid(const GroupoidPtr& g, const std::vector<int>& units,
                        const std::vector<int>& arrows) {
  auto sub = std::make_shared<FiniteGroupoid>();
  sub->parent = g;
  std::vector<int> unit_map(g->num_units(), -1);
  std::vector<int> arrow_map(g->num_arrows(), -1);
  for (int x : units) {
    unit_map[x] = sub->num_units();
    sub->unit_ids.push_back(g->unit_ids[x]);
    sub->parent_unit.push_back(x);
  }
  for (int a : arrows) {
    arrow_map[a] = static_cast<int>(sub->arrow_ids.size());
    sub->arrow_ids.push_back(g->arrow_ids[a]);
    sub->parent_arrow.push_back(a);
  }
  for (int a : arrows) {
    if (unit_map[g->src[a]] < 0 || unit_map[g->tgt[a]] < 0)
      throw std::invalid_argument("subgroupoid: arrow endpoint outside units");
    sub->src.push_back(unit_map[g->src[a]]);
    sub->tgt.push_back(unit_map[g->tgt[a]]);
    if (arrow_map[g->inv[a]] < 0)
      throw std::invalid_argument("subgroupoid: not closed under inverse");
    sub->inv.push_back(arrow_map[g->inv[a]]);
  }
  for (int x : units) {
    if (arrow_map[g->unit_arrow[x]] < 0)
      throw std::invalid_argument("subgroupoid: unit arrow missing");
    sub->unit_arrow.push_back(arrow_map[g->unit_arrow[x]]);
  }
  const int na = static_cast<int>(arrows.size());
  sub->compose_table.assign(na, std::vector<int>(na, -1));
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < na; ++j) {
      if (sub->src[i] != sub->tgt[j]) continue;
      int c = g->compose_table[arrows[i]][arrows[j]];
      if (c < 0 || arrow_map[c] < 0)
        throw std::invalid_argument("subgroupoid: not closed under composition");
      sub->compose_table[i][j] = arrow_map[c];
    }
  }
  return sub;
}

GroupoidPtr isotropy(const GroupoidPtr& g, int x) {
  if (x < 0 || x >= g->num_units())
    throw std::invalid_argument("isotropy: unknown unit");
  return subgroupoid(g, {x}, g->isotropy_arrows(x));
}

GroupoidPtr isotropy_bundle(const GroupoidPtr& g) {
  std::vector<int> units(g->num_units());
  for (int x = 0; x < g->num_units(); ++x) units[x] = x;
  std::vector<int> arrows;
  for (int a = 0; a < g->num_arrows(); ++a)
    if (g->src[a] == g->tgt[a]) arrows.push_back(a);
  return subgroupoid(g, units, arrows);
}

ValidationReport validate_cocycle(const FiniteGroupoid& g, const Cocycle& c,
                                  double tol) {
  ValidationReport report;
  if (c.values.size() != static_cast<size_t>(g.num_arrows())) {
    report.violations.push_back(
        {"shape", "cocycle table size does not match arrow count", {}});
    return report;
  }
  for (int x = 0; x < g.num_units(); ++x) {
    int u = g.unit_arrow[x];
    if (!approx_zero(c.values[u], tol))
      report.violations.push_back(
          {"cocycle-unit",
           "c(unit arrow of " + g.unit_ids[x] + ") = " +
               std::to_string(c.values[u]),
           {u}});
  }
  for (int a = 0; a < g.num_arrows(); ++a) {
    if (!approx_equal(c.values[g.inv[a]], -c.values[a], tol))
      report.violations.push_back(
          {"cocycle-inverse",
           "c(inv " + g.arrow_ids[a] + ") != -c(" + g.arrow_ids[a] + ")",
           {a, g.inv[a]}});
    for (int b = 0; b < g.num_arrows(); ++b) {
      if (!g.composable(a, b)) continue;
      int ab = g.compose_table[a][b];
      if (ab < 0) continue;
      if (!approx_equal(c.values[ab], c.values[a] + c.values[b], tol))
        report.violations.push_back(
            {"cocycle-additivity",
             "c(" + g.arrow_ids[ab] + ") != c(" + g.arrow_ids[a] + ") + c(" +
                 g.arrow_ids[b] + ")",
             {a, b, ab}});
    }
  }
  return report;
}

std::vector<int> UnitMeasure::support(double tol) const {
  std::vector<int> out;
  for (int i = 0; i < weights.size(); ++i)
    if (weights(i) > tol) out.push_back(i);
  return out;
}

QuasiInvarianceCheck check_quasi_invariant(const FiniteGroupoid& g,
                                           const UnitMeasure& mu,
                                           const std::vector<double>& delta,
                                           double tol) {
  QuasiInvarianceCheck result;
  for (int a = 0; a < g.num_arrows(); ++a) {
    double lhs = mu.weights(g.tgt[a]);
    double rhs = delta[a] * mu.weights(g.src[a]);
    double residual = std::abs(lhs - rhs) / std::max({1.0, lhs, rhs});
    result.max_residual = std::max(result.max_residual, residual);
    if (residual > tol && result.ok) {
      result.ok = false;
      result.witness_arrow = a;
      result.lhs = lhs;
      result.rhs = rhs;
    }
  }
  return result;
}

std::vector<double> rn_derivative(const Cocycle& c, double beta) {
  std::vector<double> delta(c.values.size());
  for (size_t i = 0; i < c.values.size(); ++i)
    delta[i] = std::exp(-beta * c.values[i]);
  return delta;
}

QuasiInvariantSolution solve_quasi_invariant(const FiniteGroupoid& g,
                                             const Cocycle& c, double beta,
                                             double tol) {
  QuasiInvariantSolution solution;
  auto delta = rn_derivative(c, beta);

  for (const auto& orbit : g.orbits()) {
    OrbitDiagnosis diag;
    diag.units = orbit;

    // Propagate relative weights over a spanning tree of the orbit, then
    // verify every arrow. An inconsistent arrow is a cycle obstruction:
    // some loop has e^{-beta c} != 1, forcing mu = 0 on the orbit.
    std::vector<double> logw(g.num_units(),
                             std::numeric_limits<double>::quiet_NaN());
    logw[orbit.front()] = 0.0;
    std::queue<int> q;
    q.push(orbit.front());
    while (!q.empty()) {
      int y = q.front();
      q.pop();
      for (int a = 0; a < g.num_arrows(); ++a) {
        // mu(tgt) = delta * mu(src): crossing a from src to tgt multiplies
        // the weight by delta[a].
        if (g.src[a] == y && std::isnan(logw[g.tgt[a]])) {
          logw[g.tgt[a]] = logw[y] + std::log(delta[a]);
          q.push(g.tgt[a]);
        }
        if (g.tgt[a] == y && std::isnan(logw[g.src[a]])) {
          logw[g.src[a]] = logw[y] - std::log(delta[a]);
          q.push(g.src[a]);
        }
      }
    }
    for (int a = 0; a < g.num_arrows() && diag.feasible; ++a) {
      if (std::isnan(logw[g.src[a]]) || std::isnan(logw[g.tgt[a]])) continue;
      bool in_orbit = false;
      for (int x : orbit) in_orbit |= (g.src[a] == x);
      if (!in_orbit) continue;
      double lhs = logw[g.tgt[a]];
      double rhs = logw[g.src[a]] + std::log(delta[a]);
      if (std::abs(lhs - rhs) > tol * std::max({1.0, std::abs(lhs), std::abs(rhs)})) {
        diag.feasible = false;
        diag.obstruction_arrow = a;
      }
    }

    if (diag.feasible) {
      UnitMeasure mu;
      mu.weights = RealVector::Zero(g.num_units());
      double logmax = -std::numeric_limits<double>::infinity();
      for (int x : orbit) logmax = std::max(logmax, logw[x]);
      double total = 0;
      for (int x : orbit) {
        mu.weights(x) = std::exp(logw[x] - logmax);
        total += mu.weights(x);
      }
      mu.weights /= total;
      solution.extreme_points.push_back(std::move(mu));
    }
    solution.orbit_diagnoses.push_back(std::move(diag));
  }
  return solution;
}

// --- builders ---

namespace {

GroupoidPtr finalize(std::shared_ptr<FiniteGroupoid> g) { return g; }

}  // namespace

GroupoidPtr pair_groupoid(int n) {
  auto g = std::make_shared<FiniteGroupoid>();
  for (int i = 1; i <= n; ++i) g->unit_ids.push_back("u" + std::to_string(i));
  auto idx = [n](int h, int k) { return (h - 1) * n + (k - 1); };
  for (int h = 1; h <= n; ++h)
    for (int k = 1; k <= n; ++k) {
      g->arrow_ids.push_back("(" + std::to_string(h) + "," +
                             std::to_string(k) + ")");
      g->tgt.push_back(h - 1);
      g->src.push_back(k - 1);
    }
  g->inv.resize(n * n);
  for (int h = 1; h <= n; ++h)
    for (int k = 1; k <= n; ++k) g->inv[idx(h, k)] = idx(k, h);
  for (int i = 1; i <= n; ++i) g->unit_arrow.push_back(idx(i, i));
  g->compose_table.assign(n * n, std::vector<int>(n * n, -1));
  for (int h = 1; h <= n; ++h)
    for (int k = 1; k <= n; ++k)
      for (int l = 1; l <= n; ++l)
        g->compose_table[idx(h, k)][idx(k, l)] = idx(h, l);
  return finalize(g);
}

GroupoidPtr cyclic_group_groupoid(int n) {
  auto g = std::make_shared<FiniteGroupoid>();
  g->unit_ids.push_back("e0");
  for (int i = 0; i < n; ++i) {
    g->arrow_ids.push_back("g" + std::to_string(i));
    g->src.push_back(0);
    g->tgt.push_back(0);
    g->inv.push_back((n - i) % n);
  }
  g->unit_arrow.push_back(0);
  g->compose_table.assign(n, std::vector<int>(n, -1));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g->compose_table[i][j] = (i + j) % n;
  return finalize(g);
}

GroupoidPtr group_bundle_groupoid(const std::vector<int>& orders) {
  auto g = std::make_shared<FiniteGroupoid>();
  std::vector<int> base;
  for (size_t x = 0; x < orders.size(); ++x) {
    g->unit_ids.push_back("u" + std::to_string(x));
    base.push_back(g->num_arrows());
    for (int i = 0; i < orders[x]; ++i) {
      g->arrow_ids.push_back("u" + std::to_string(x) + ":g" +
                             std::to_string(i));
      g->src.push_back(static_cast<int>(x));
      g->tgt.push_back(static_cast<int>(x));
      g->inv.push_back(base[x] + (orders[x] - i) % orders[x]);
    }
    g->unit_arrow.push_back(base[x]);
  }
  int na = g->num_arrows();
  g->compose_table.assign(na, std::vector<int>(na, -1));
  for (size_t x = 0; x < orders.size(); ++x)
    for (int i = 0; i < orders[x]; ++i)
      for (int j = 0; j < orders[x]; ++j)
        g->compose_table[base[x] + i][base[x] + j] =
            base[x] + (i + j) % orders[x];
  return finalize(g);
}

GroupoidPtr product_groupoid(const GroupoidPtr& a, const GroupoidPtr& b) {
  auto g = std::make_shared<FiniteGroupoid>();
  const int bu = b->num_units(), ba = b->num_arrows();
  for (int x = 0; x < a->num_units(); ++x)
    for (int y = 0; y < bu; ++y)
      g->unit_ids.push_back(a->unit_ids[x] + "*" + b->unit_ids[y]);
  auto uidx = [bu](int x, int y) { return x * bu + y; };
  auto aidx = [ba](int p, int q) { return p * ba + q; };
  for (int p = 0; p < a->num_arrows(); ++p)
    for (int q = 0; q < ba; ++q) {
      g->arrow_ids.push_back(a->arrow_ids[p] + "*" + b->arrow_ids[q]);
      g->src.push_back(uidx(a->src[p], b->src[q]));
      g->tgt.push_back(uidx(a->tgt[p], b->tgt[q]));
      g->inv.push_back(aidx(a->inv[p], b->inv[q]));
    }
  for (int x = 0; x < a->num_units(); ++x)
    for (int y = 0; y < bu; ++y)
      g->unit_arrow.push_back(aidx(a->unit_arrow[x], b->unit_arrow[y]));
  int na = g->num_arrows();
  g->compose_table.assign(na, std::vector<int>(na, -1));
  for (int p = 0; p < a->num_arrows(); ++p)
    for (int q = 0; q < ba; ++q)
      for (int r = 0; r < a->num_arrows(); ++r)
        for (int s = 0; s < ba; ++s) {
          if (a->composable(p, r) && b->composable(q, s)) {
            int pr = a->compose_table[p][r];
            int qs = b->compose_table[q][s];
            if (pr >= 0 && qs >= 0)
              g->compose_table[aidx(p, q)][aidx(r, s)] = aidx(pr, qs);
          }
        }
  return finalize(g);
}

GroupoidPtr disjoint_union_groupoid(const GroupoidPtr& a,
                                    const GroupoidPtr& b) {
  auto g = std::make_shared<FiniteGroupoid>();
  g->unit_ids = a->unit_ids;
  for (const auto& id : b->unit_ids) g->unit_ids.push_back("B." + id);
  g->arrow_ids = a->arrow_ids;
  for (const auto& id : b->arrow_ids) g->arrow_ids.push_back("B." + id);
  const int au = a->num_units(), aa = a->num_arrows();
  g->src = a->src;
  g->tgt = a->tgt;
  g->inv = a->inv;
  for (int i = 0; i < b->num_arrows(); ++i) {
    g->src.push_back(b->src[i] + au);
    g->tgt.push_back(b->tgt[i] + au);
    g->inv.push_back(b->inv[i] + aa);
  }
  g->unit_arrow = a->unit_arrow;
  for (int x = 0; x < b->num_units(); ++x)
    g->unit_arrow.push_back(b->unit_arrow[x] + aa);
  int na = g->num_arrows();
  g->compose_table.assign(na, std::vector<int>(na, -1));
  for (int i = 0; i < aa; ++i)
    for (int j = 0; j < aa; ++j)
      g->compose_table[i][j] = a->compose_table[i][j];
  for (int i = 0; i < b->num_arrows(); ++i)
    for (int j = 0; j < b->num_arrows(); ++j) {
      int c = b->compose_table[i][j];
      g->compose_table[i + aa][j + aa] = c < 0 ? -1 : c + aa;
    }
  return finalize(g);
}

}  // namespace fellkms
