// fellkms: batch verification and solving for KMS states on section
// algebras of Fell bundles over finite groupoids.
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 malformed input.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "fellkms/induction.hpp"
#include "fellkms/json_io.hpp"

using namespace fellkms;

namespace {

struct CommonArgs {
  std::string scenario_path;
  std::string out_path;
  double tol = kDefaultTol;
  double beta_override = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> beta_range;  // A B STEPS
};

double effective_tol(const CommonArgs& args) {
  if (const char* env = std::getenv("FELLKMS_TOL")) {
    char* end = nullptr;
    double v = std::strtod(env, &end);
    if (end != env && v > 0) return v;
  }
  return args.tol;
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("input error: cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("input error: ") + path + ": " +
                                e.what());
  }
  return j;
}

void write_report(const CommonArgs& args, const Json& report) {
  if (args.out_path.empty()) return;
  std::ofstream out(args.out_path);
  out << report.dump(2) << "\n";
}

std::vector<double> betas_for(const CommonArgs& args, const Scenario& sc) {
  if (args.beta_range.size() == 3) {
    std::vector<double> out;
    int steps = static_cast<int>(args.beta_range[2]);
    for (int i = 0; i <= steps; ++i)
      out.push_back(args.beta_range[0] +
                    (args.beta_range[1] - args.beta_range[0]) *
                        (steps ? static_cast<double>(i) / steps : 0.0));
    return out;
  }
  if (!std::isnan(args.beta_override)) return {args.beta_override};
  if (sc.beta) return {*sc.beta};
  throw std::invalid_argument(
      "input error: no beta given (scenario \"beta\", --beta or --beta-range)");
}

int cmd_validate(const CommonArgs& args) {
  Json input = load_json(args.scenario_path);
  // Validate the groupoid before anything is built on top of it, so a
  // broken composition or inverse table still yields an orderly report.
  ValidationReport rg = validate_groupoid(*parse_scenario_groupoid(input));
  if (!rg.ok()) {
    Json early;
    early["groupoid"] = validation_to_json(rg);
    early["ok"] = false;
    write_report(args, early);
    std::printf("groupoid : FAIL\n");
    for (const auto& v : rg.violations)
      std::printf("  [%s] %s\n", v.axiom.c_str(), v.detail.c_str());
    return 1;
  }
  Scenario sc = parse_scenario(input);
  Json report;
  report["groupoid"] = validation_to_json(rg);
  ValidationReport rb = validate_bundle(*sc.bundle, effective_tol(args));
  report["bundle"] = validation_to_json(rb);
  bool ok = rg.ok() && rb.ok();
  if (sc.cocycle) {
    ValidationReport rc =
        validate_cocycle(*sc.groupoid, *sc.cocycle, effective_tol(args));
    report["cocycle"] = validation_to_json(rc);
    ok = ok && rc.ok();
  }
  report["ok"] = ok;
  write_report(args, report);

  std::printf("groupoid : %s\n", rg.ok() ? "ok" : "FAIL");
  for (const auto& v : rg.violations)
    std::printf("  [%s] %s\n", v.axiom.c_str(), v.detail.c_str());
  std::printf("bundle   : %s\n", rb.ok() ? "ok" : "FAIL");
  for (const auto& v : rb.violations)
    std::printf("  [%s] %s\n", v.axiom.c_str(), v.detail.c_str());
  if (sc.cocycle)
    std::printf("cocycle  : %s\n",
                report["cocycle"]["ok"].get<bool>() ? "ok" : "FAIL");
  return ok ? 0 : 1;
}

int cmd_check_kms(const CommonArgs& args) {
  double tol = effective_tol(args);
  Scenario sc = parse_scenario(load_json(args.scenario_path));
  if (!sc.state)
    throw std::invalid_argument("input error: check-kms needs a \"state\"");
  if (!sc.cocycle)
    throw std::invalid_argument("input error: check-kms needs a \"cocycle\"");

  if (!sc.state->is_positive(tol)) {
    std::printf("state fails positivity: min Gram eigenvalue %.12g\n",
                sc.state->min_gram_eigenvalue());
    Json report;
    report["ok"] = false;
    report["min_gram_eigenvalue"] = jnum(sc.state->min_gram_eigenvalue());
    write_report(args, report);
    return 1;
  }

  Json report;
  bool all_pass = true;
  Json runs = Json::array();
  for (double beta : betas_for(args, sc)) {
    Json run;
    run["beta"] = jnum(beta);
    KmsCertificate cert =
        is_kms(*sc.state, beta, Dynamics{sc.groupoid, *sc.cocycle}, tol);
    std::printf("beta = %-10.6g kms residual = %-12.6g %s\n", beta,
                cert.kms_residual, cert.pass ? "pass" : "FAIL");
    if (cert.pass) {
      KmsDisintegration dis =
          pair_from_kms(*sc.system, *sc.state, beta, *sc.cocycle, tol);
      run["gns_dimension"] = gns(*sc.state, tol).dim;
      run["measure"] = measure_to_json(dis.mu, *sc.groupoid);
      run["field"] = field_to_json(dis.field, *sc.system);
      run["condition_I_residual"] = jnum(dis.condition_I.max_residual);
      run["condition_II_residual"] = jnum(dis.condition_II.max_residual);
      std::printf("  condition I residual  = %.6g\n",
                  dis.condition_I.max_residual);
      std::printf("  condition II residual = %.6g\n",
                  dis.condition_II.max_residual);
      cert.condition_I_residual = dis.condition_I.max_residual;
      cert.condition_II_residual = dis.condition_II.max_residual;
      cert.pass = cert.pass && dis.condition_I.ok && dis.condition_II.ok;
    } else if (cert.witness.i >= 0) {
      std::printf("  witness basis pair (%d, %d): lhs %.6g%+.6gi rhs %.6g%+.6gi\n",
                  cert.witness.i, cert.witness.j, cert.witness.lhs.real(),
                  cert.witness.lhs.imag(), cert.witness.rhs.real(),
                  cert.witness.rhs.imag());
    }
    run["certificate"] = certificate_to_json(cert);
    all_pass = all_pass && cert.pass;
    runs.push_back(run);
  }
  report["runs"] = runs;
  report["ok"] = all_pass;
  write_report(args, report);
  return all_pass ? 0 : 1;
}

int cmd_solve(const CommonArgs& args) {
  double tol = effective_tol(args);
  Scenario sc = parse_scenario(load_json(args.scenario_path));
  if (!sc.cocycle)
    throw std::invalid_argument("input error: solve needs a \"cocycle\"");

  Json report;
  Json runs = Json::array();
  bool any = false;
  for (double beta : betas_for(args, sc)) {
    Json run;
    run["beta"] = jnum(beta);
    KmsSolveOptions opts;
    opts.tol = tol;
    KmsSolveResult res = solve_kms(*sc.system, *sc.cocycle, beta, opts);
    Json cands = Json::array();
    for (const auto& cand : res.candidates) {
      Json cj;
      cj["measure"] = measure_to_json(cand.mu, *sc.groupoid);
      cj["converged"] = cand.converged;
      if (cand.converged && cand.certificate.pass) {
        cj["state"] = state_to_json(cand.state);
        cj["field"] = field_to_json(cand.field, *sc.system);
        cj["certificate"] = certificate_to_json(cand.certificate);
        any = true;
      }
      if (!cand.diagnosis.empty()) cj["diagnosis"] = cand.diagnosis;
      cands.push_back(cj);
    }
    run["candidates"] = cands;
    run["diagnoses"] = res.diagnoses;
    runs.push_back(run);
    std::printf("beta = %-10.6g candidates = %zu", beta, res.candidates.size());
    for (const auto& d : res.diagnoses) std::printf("  [%s]", d.c_str());
    std::printf("\n");
    for (const auto& cand : res.candidates) {
      std::printf("  measure:");
      for (int x = 0; x < sc.groupoid->num_units(); ++x)
        std::printf(" %s=%.12g", sc.groupoid->unit_ids[x].c_str(),
                    cand.mu.weights(x));
      std::printf("  %s\n", cand.converged && cand.certificate.pass
                                ? "certified"
                                : cand.diagnosis.c_str());
    }
  }
  report["runs"] = runs;
  report["ok"] = any;
  write_report(args, report);
  return any ? 0 : 1;
}

int cmd_roundtrip(const CommonArgs& args) {
  double tol = effective_tol(args);
  Scenario sc = parse_scenario(load_json(args.scenario_path));
  Json report;
  bool ok = true;

  if (sc.measure && sc.field) {
    State integrated = integrate(*sc.system, *sc.measure, *sc.field, tol);
    Disintegration back = disintegrate(*sc.system, integrated, tol);
    double dmu = (back.mu.weights - sc.measure->weights).cwiseAbs().maxCoeff();
    double dfield = 0;
    for (int x : back.mu.support(tol))
      if (sc.field->defined_on(x))
        dfield = std::max(dfield, back.field.at(x).distance(sc.field->at(x)));
    State again = integrate(*sc.system, back.mu, back.field, tol);
    double dstate = again.distance(integrated);
    std::printf("pair -> state -> pair : max measure deviation %.6g, max "
                "field deviation %.6g\n",
                dmu, dfield);
    std::printf("state -> pair -> state: max deviation %.6g\n", dstate);
    report["measure_deviation"] = jnum(dmu);
    report["field_deviation"] = jnum(dfield);
    report["state_deviation"] = jnum(dstate);
    ok = ok && dmu <= tol && dfield <= tol && dstate <= tol;
  } else if (sc.state) {
    Disintegration dis = disintegrate(*sc.system, *sc.state, tol);
    State back = integrate(*sc.system, dis.mu, dis.field, tol);
    double dstate = back.distance(*sc.state);
    std::printf("state -> pair -> state: max deviation %.6g\n", dstate);
    report["measure"] = measure_to_json(dis.mu, *sc.groupoid);
    report["state_deviation"] = jnum(dstate);
    ok = ok && dstate <= tol;
  } else {
    throw std::invalid_argument(
        "input error: roundtrip needs either a \"state\" or a "
        "\"measure\" + \"field\" pair");
  }
  report["ok"] = ok;
  write_report(args, report);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"verification and solving for KMS states on Fell bundle algebras"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", args.scenario_path, "scenario JSON file")
        ->required();
    cmd->add_option("--tol", args.tol, "comparison tolerance");
    cmd->add_option("--out", args.out_path, "write a JSON report here");
    cmd->add_option("--beta", args.beta_override, "inverse temperature");
    cmd->add_option("--beta-range", args.beta_range,
                    "sweep: start end steps")
        ->expected(3);
  };

  auto* validate = app.add_subcommand("validate", "check groupoid, bundle and cocycle axioms");
  add_common(validate);
  auto* check = app.add_subcommand("check-kms", "certify a state against the KMS identity");
  add_common(check);
  auto* solve = app.add_subcommand("solve", "solve for KMS states");
  add_common(solve);
  auto* roundtrip = app.add_subcommand("roundtrip", "integration-disintegration round trips");
  add_common(roundtrip);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(args);
    if (check->parsed()) return cmd_check_kms(args);
    if (solve->parsed()) return cmd_solve(args);
    if (roundtrip->parsed()) return cmd_roundtrip(args);
  } catch (const Json::exception& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    std::fprintf(stderr, "%s\n", msg.c_str());
    // Malformed inputs exit 2; failed mathematical preconditions exit 1.
    return msg.rfind("input error", 0) == 0 ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
