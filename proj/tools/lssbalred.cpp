// lssbalred: command-line front end.
//
// Exit status: 0 success, 1 input error, 2 infeasible / no certificate /
// bound violated. Every run writes one JSON report (stdout unless --out).

#include "lssbalred/lssbalred.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <ctime>
#include <iostream>
#include <optional>

namespace {

using namespace lssbalred;
using io::json;

constexpr const char* kVersion = "0.1.0";

struct RunConfig {
  std::string command;
  std::string model_path;
  std::string out_path;
  std::string csv_path;
  std::string pair_path;
  std::string reduced_path;
  std::string reduced_out;
  std::string grammians = "lmi";
  std::uint64_t seed = 1;
  double margin = -1.0;
  double tol = 1e-4;
  double horizon = -1.0;
  double step = 0.01;
  double mean_dwell = 1.0;
  int trials = 100;
  std::optional<long> order;
  std::optional<double> bound;
  bool minimize_first = false;
  bool force_ties = false;
};

class InfeasibleReport : public std::runtime_error {
 public:
  InfeasibleReport(json report, const std::string& what) : std::runtime_error(what), report_(std::move(report)) {}
  const json& report() const { return report_; }

 private:
  json report_;
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json doubles(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

json model_summary(const LssModel& m) {
  json j;
  j["name"] = m.name;
  j["time_domain"] = to_string(m.time_domain);
  j["n"] = m.n();
  j["m"] = m.m();
  j["p"] = m.p();
  j["modes"] = m.num_modes();
  return j;
}

json header(const RunConfig& cfg, const LssModel& model) {
  json j;
  j["tool"] = "lssbalred";
  j["version"] = kVersion;
  j["command"] = cfg.command;
  j["status"] = "ok";
  j["timestamp"] = utc_timestamp();
  j["model"] = model_summary(model);
  return j;
}

json membership_json(const MembershipReport& r) {
  json j;
  j["set"] = families::to_string(r.kind);
  j["residuals"] = doubles(r.residuals);
  j["worst"] = r.worst;
  j["positive_definite"] = r.positive_definite;
  j["member"] = r.member();
  return j;
}

json pair_json(const GrammianPair& pair) {
  json j;
  j["P"] = io::matrix_to_json(pair.P);
  j["Q"] = io::matrix_to_json(pair.Q);
  j["provenance"] = to_string(pair.provenance);
  j["margin"] = pair.margin;
  j["strict"] = pair.strict;
  j["tightened"] = pair.tightened;
  j["iterations"] = pair.iterations;
  return j;
}

GrammianPair load_pair(const std::string& path, const LssModel& model) {
  json j = io::parse_text(io::read_file(path), path);
  if (j.is_object() && j.contains("pair")) j = j["pair"];
  if (!j.is_object() || !j.contains("P") || !j.contains("Q")) throw InputError(path + ": expected keys P and Q");
  GrammianPair pair;
  pair.P = io::matrix_from_json(j["P"], "P");
  pair.Q = io::matrix_from_json(j["Q"], "Q");
  if (pair.P.rows() != model.n() || pair.P.cols() != model.n() || pair.Q.rows() != model.n() ||
      pair.Q.cols() != model.n())
    throw InputError(path + ": grammian size does not match the model");
  if (!linalg::is_symmetric(pair.P, 1e-10) || !linalg::is_symmetric(pair.Q, 1e-10))
    throw InputError(path + ": grammians must be symmetric");
  pair.provenance = Provenance::kUser;
  const auto cp = check_membership(model, pair.P, SetKind::kControllability);
  const auto cq = check_membership(model, pair.Q, SetKind::kObservability);
  if (!cp.member() || !cq.member()) throw InputError(path + ": supplied matrices are not grammians of the model");
  pair.strict = cp.worst < 0.0 && cq.worst < 0.0;
  return pair;
}

GrammianOptions grammian_options(const RunConfig& cfg) {
  GrammianOptions o;
  o.margin = cfg.margin;
  return o;
}

SimOptions sim_options(const RunConfig& cfg, const LssModel& model) {
  SimOptions o;
  o.trials = cfg.trials;
  o.seed = cfg.seed;
  o.h = cfg.step;
  o.mean_dwell = cfg.mean_dwell;
  if (cfg.horizon > 0) {
    o.horizon = cfg.horizon;
  } else {
    o.horizon = model.discrete() ? 500.0 : 50.0;
  }
  return o;
}

json run_check(const RunConfig& cfg, const LssModel& model) {
  json rep = header(cfg, model);
  const auto cert = check_quadratic_stability(model, StabilityOptions{cfg.margin, {}});
  json qs;
  qs["certified"] = cert.has_value();
  if (cert) {
    qs["margin"] = cert->margin;
    qs["residuals"] = doubles(cert->residuals);
    qs["iterations"] = cert->iterations;
    qs["P"] = io::matrix_to_json(cert->P);
  }
  rep["quadratic_stability"] = qs;
  if (model.discrete()) {
    const auto ss = check_strong_stability(model);
    json sj;
    sj["kronecker_spectral_radius"] = ss.kronecker_spectral_radius;
    sj["stable"] = ss.stable;
    rep["strong_stability"] = sj;
  } else {
    rep["strong_stability"] = nullptr;
  }
  const auto reach = reachable_subspace(model);
  const auto unobs = unobservable_subspace(model);
  json mj;
  mj["reachable_dimension"] = reach.dimension();
  mj["unobservable_dimension"] = unobs.dimension();
  mj["span_reachable"] = reach.dimension() == model.n();
  mj["observable"] = unobs.dimension() == 0;
  mj["minimal"] = reach.dimension() == model.n() && unobs.dimension() == 0;
  rep["minimality"] = mj;
  if (!cert) {
    rep["status"] = "infeasible";
    throw InfeasibleReport(rep, "no quadratic stability certificate found");
  }
  return rep;
}

json run_grammians(const RunConfig& cfg, const LssModel& model) {
  json rep = header(cfg, model);
  const GrammianPair pair = cfg.pair_path.empty()
                                ? compute_grammians(model, parse_grammian_source(cfg.grammians), grammian_options(cfg))
                                : load_pair(cfg.pair_path, model);
  rep["pair"] = pair_json(pair);
  rep["sigmas"] = io::vector_to_json(singular_values(pair));
  json res;
  res["controllability"] = membership_json(check_membership(model, pair.P, SetKind::kControllability));
  res["observability"] = membership_json(check_membership(model, pair.Q, SetKind::kObservability));
  rep["residuals"] = res;
  return rep;
}

json run_reduce(const RunConfig& cfg, const LssModel& model) {
  if (cfg.order.has_value() == cfg.bound.has_value()) throw InputError("reduce needs exactly one of --order or --bound");
  ReduceOptions opts;
  opts.minimize_first = cfg.minimize_first;
  opts.force_ties = cfg.force_ties;
  opts.source = parse_grammian_source(cfg.grammians);
  opts.grammian = grammian_options(cfg);
  if (!cfg.pair_path.empty()) {
    if (cfg.minimize_first) throw InputError("--pair cannot be combined with --minimize-first");
    opts.pair = load_pair(cfg.pair_path, model);
  }
  ReductionTarget target = cfg.order ? ReductionTarget{OrderTarget{static_cast<Index>(*cfg.order)}}
                                     : ReductionTarget{BoundTarget{*cfg.bound}};
  const auto red = reduce(model, target, opts);
  json rep = header(cfg, model);
  json o;
  o["grammians"] = cfg.pair_path.empty() ? cfg.grammians : std::string("user");
  o["minimize_first"] = cfg.minimize_first;
  o["force_ties"] = cfg.force_ties;
  if (cfg.order) o["order"] = *cfg.order;
  if (cfg.bound) o["bound"] = *cfg.bound;
  rep["options"] = o;
  rep["original_order"] = red.original_order;
  rep["balanced_order"] = red.balancing.balanced_model.n();
  rep["retained"] = red.retained;
  rep["sigmas"] = io::vector_to_json(red.sigmas);
  rep["discarded_sigmas"] = io::vector_to_json(red.discarded_sigmas);
  rep["apriori_bound"] = red.apriori_bound;
  rep["grammian_provenance"] = to_string(red.balancing.pair.provenance);
  rep["pair"] = pair_json(red.balancing.pair);
  rep["transform"] = io::matrix_to_json(red.balancing.transform.S);
  rep["transform_condition"] = red.balancing.transform.condition_estimate;
  rep["reduced_model"] = io::model_to_json(red.reduced_model);
  json res;
  res["controllability"] = membership_json(check_membership(red.reduced_model, red.lambda1, SetKind::kControllability));
  res["observability"] = membership_json(check_membership(red.reduced_model, red.lambda1, SetKind::kObservability));
  rep["residuals"] = res;
  rep["reduced_minimal"] = is_minimal(red.reduced_model);
  if (!cfg.reduced_out.empty()) io::save_model(cfg.reduced_out, red.reduced_model);
  return rep;
}

json run_gain(const RunConfig& cfg, const LssModel& model) {
  GainOptions go;
  go.margin = cfg.margin;
  go.tol = cfg.tol;
  json rep = header(cfg, model);
  GainResult res;
  try {
    res = l2_gain_upper_bound(model, go);
  } catch (const InfeasibleError& e) {
    rep["status"] = "infeasible";
    rep["error"] = e.what();
    throw InfeasibleReport(rep, e.what());
  }
  rep["gamma_star"] = res.gamma_star;
  rep["iterations"] = res.iterations;
  rep["tol"] = cfg.tol;
  rep["residuals"] = doubles(res.certificate.residuals);
  rep["certificate"] = io::matrix_to_json(res.certificate.P);
  json trace = json::array();
  for (const auto& [g, ok] : res.trace) {
    json t;
    t["gamma"] = g;
    t["feasible"] = ok;
    trace.push_back(t);
  }
  rep["trace"] = trace;
  return rep;
}

json estimate_json(const GainEstimate& e) {
  json j;
  j["lower_bound"] = e.lower_bound;
  j["best_trial"] = e.best_trial;
  j["trials"] = e.trials;
  j["horizon"] = e.horizon;
  return j;
}

json run_simulate(const RunConfig& cfg, const LssModel& model) {
  const auto so = sim_options(cfg, model);
  json rep = header(cfg, model);
  json s;
  s["seed"] = cfg.seed;
  s["step"] = model.discrete() ? 1.0 : so.h;
  s["horizon"] = so.horizon;
  s["trials"] = so.trials;
  rep["simulation"] = s;
  const auto gain = empirical_gain(model, so);
  const auto hank = empirical_hankel_gain(model, so);
  rep["empirical_gain"] = estimate_json(gain);
  rep["empirical_hankel_gain"] = estimate_json(hank);
  if (!cfg.csv_path.empty()) {
    const int trial = std::max(gain.best_trial, 0);
    const auto ex = random_excitation(model, so, trial, ExcitationKind::kGain);
    io::save_text(cfg.csv_path, trajectory_csv(simulate(model, ex.u, ex.q, so.h)));
    rep["csv"] = cfg.csv_path;
    rep["csv_trial"] = trial;
  }
  return rep;
}

json run_verify_bound(const RunConfig& cfg, const LssModel& model) {
  if (cfg.reduced_path.empty()) throw InputError("verify-bound needs --reduced (reduce report or model file)");
  const json j = io::parse_text(io::read_file(cfg.reduced_path), cfg.reduced_path);
  LssModel reduced;
  std::optional<double> bound = cfg.bound;
  if (j.is_object() && j.contains("reduced_model")) {
    reduced = io::model_from_json(j["reduced_model"]);
    if (!bound && j.contains("apriori_bound") && j["apriori_bound"].is_number()) bound = j["apriori_bound"].get<double>();
  } else {
    reduced = io::model_from_json(j);
  }
  if (!bound) throw InputError("verify-bound needs --bound when the reduced file carries no apriori_bound");
  const auto so = sim_options(cfg, model);
  const auto r = verify_error_bound(model, reduced, *bound, so);
  json rep = header(cfg, model);
  json v;
  v["bound"] = r.bound;
  v["worst_ratio"] = r.worst_ratio;
  v["worst_trial"] = r.worst_trial;
  v["slack"] = r.slack;
  v["quadrature_error"] = r.quadrature_error;
  v["trials"] = r.trials;
  v["horizon"] = so.horizon;
  v["seed"] = cfg.seed;
  v["pass"] = r.pass;
  rep["verification"] = v;
  if (!r.pass) {
    rep["status"] = "infeasible";
    throw InfeasibleReport(rep, "error bound violated on a simulated trajectory");
  }
  return rep;
}

json run_embed(const RunConfig& cfg, const LssModel& model) {
  require_discrete(model, "embed");
  json rep = header(cfg, model);
  const auto e = build_uncertain_embedding(model);
  json u;
  u["state_dimension"] = e.A.rows();
  u["input_dimension"] = e.B.cols();
  if (e.A.rows() <= 30) {
    const auto mr = check_uncertain_minimality_equivalence(model);
    json m;
    m["model_minimal"] = mr.model_minimal();
    m["embedding_reachable_dims"] = mr.embedding_reachable_dims;
    m["embedding_observable_dims"] = mr.embedding_observable_dims;
    m["embedding_minimal"] = mr.embedding_minimal();
    m["agree"] = mr.agree();
    u["minimality"] = m;
  }
  try {
    const auto blocks = beck_block_grammians(model);
    const auto pr = check_beck_grammian_projection(model, blocks);
    json b;
    b["embedded_controllability_residual"] = pr.embedded_ctrl_residual;
    b["embedded_observability_residual"] = pr.embedded_obs_residual;
    b["averaged_controllability_residual"] = pr.averaged_ctrl_residual;
    b["averaged_observability_residual"] = pr.averaged_obs_residual;
    b["pass"] = pr.pass();
    u["block_grammian_projection"] = b;
  } catch (const InfeasibleError& err) {
    u["block_grammian_projection"] = nullptr;
    u["block_grammian_note"] = err.what();
  }
  rep["uncertain_embedding"] = u;
  const auto st = stochastic_embedding(model);
  json s;
  s["p"] = st.p;
  s["mean_square_radius"] = mean_square_radius(st);
  s["mean_square_stable"] = mean_square_radius(st) < 1.0;
  rep["stochastic_embedding"] = s;
  return rep;
}

void emit(const RunConfig& cfg, const json& rep) {
  const std::string text = io::dump(rep);
  if (cfg.out_path.empty()) {
    std::cout << text;
  } else {
    io::save_text(cfg.out_path, text);
  }
}

void validate_config(const RunConfig& cfg) {
  if (cfg.margin != -1.0 && !(cfg.margin > 0.0)) throw InputError("--margin must be positive");
  if (!(cfg.tol > 0.0)) throw InputError("--tol must be positive");
  if (!(cfg.step > 0.0)) throw InputError("--step must be positive");
  if (cfg.trials < 1) throw InputError("--trials must be at least 1");
  if (cfg.horizon != -1.0 && !(cfg.horizon > 0.0)) throw InputError("--horizon must be positive");
  if (cfg.bound && !(*cfg.bound >= 0.0)) throw InputError("--bound must be nonnegative");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balanced truncation of linear switched systems"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", cfg.model_path, "Model JSON file")->required();
    sub->add_option("--out", cfg.out_path, "Report path (default: stdout)");
    sub->add_option("--margin", cfg.margin, "Strictness margin of the LMIs (default: scaled 1e-7)");
    sub->add_option("--seed", cfg.seed, "Random seed");
  };
  auto sim = [&](CLI::App* sub) {
    sub->add_option("--trials", cfg.trials, "Number of random experiments");
    sub->add_option("--horizon", cfg.horizon, "Steps (discrete) or seconds (continuous)");
    sub->add_option("--step", cfg.step, "Integration step (continuous)");
    sub->add_option("--mean-dwell", cfg.mean_dwell, "Mean dwell time of random switching (continuous)");
  };
  const std::vector<std::string> sources{"lmi", "nice", "averaged", "certificate"};

  auto* check = app.add_subcommand("check", "Stability and minimality report");
  common(check);

  auto* gram = app.add_subcommand("grammians", "Compute a grammian pair and singular values");
  common(gram);
  gram->add_option("--grammians", cfg.grammians, "Grammian source")->check(CLI::IsMember(sources));
  gram->add_option("--pair", cfg.pair_path, "Check a user-supplied pair instead");

  auto* red = app.add_subcommand("reduce", "Balanced truncation");
  common(red);
  auto* ord = red->add_option("--order", cfg.order, "Retained order r");
  auto* bnd = red->add_option("--bound", cfg.bound, "Error budget; picks the smallest admissible r");
  ord->excludes(bnd);
  red->add_option("--grammians", cfg.grammians, "Grammian source")->check(CLI::IsMember(sources));
  red->add_option("--pair", cfg.pair_path, "User-supplied grammian pair (JSON with P and Q)");
  red->add_flag("--minimize-first", cfg.minimize_first, "Minimize the realization before reducing");
  red->add_flag("--force-ties", cfg.force_ties, "Truncate inside a cluster of tied singular values");
  red->add_option("--reduced-out", cfg.reduced_out, "Also write the reduced model file");

  auto* gain = app.add_subcommand("gain", "L2 gain upper bound by bisection");
  common(gain);
  gain->add_option("--tol", cfg.tol, "Relative bisection tolerance");

  auto* simc = app.add_subcommand("simulate", "Empirical gain and Hankel gain lower bounds");
  common(simc);
  sim(simc);
  simc->add_option("--csv", cfg.csv_path, "Write the best gain trajectory as CSV");

  auto* ver = app.add_subcommand("verify-bound", "Monte Carlo check of the truncation error bound");
  common(ver);
  sim(ver);
  ver->add_option("--reduced", cfg.reduced_path, "Reduce report or reduced model file")->required();
  ver->add_option("--bound", cfg.bound, "Bound to check (default: the report's apriori_bound)");

  auto* emb = app.add_subcommand("embed", "Uncertain and stochastic embedding diagnostics");
  common(emb);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    cfg.command = app.get_subcommands().front()->get_name();
    validate_config(cfg);
    const LssModel model = io::load_model(cfg.model_path);
    json rep;
    if (cfg.command == "check") rep = run_check(cfg, model);
    else if (cfg.command == "grammians") rep = run_grammians(cfg, model);
    else if (cfg.command == "reduce") rep = run_reduce(cfg, model);
    else if (cfg.command == "gain") rep = run_gain(cfg, model);
    else if (cfg.command == "simulate") rep = run_simulate(cfg, model);
    else if (cfg.command == "verify-bound") rep = run_verify_bound(cfg, model);
    else rep = run_embed(cfg, model);
    emit(cfg, rep);
    return 0;
  } catch (const InfeasibleReport& e) {
    std::cerr << "lssbalred: " << e.what() << '\n';
    try {
      emit(cfg, e.report());
    } catch (const std::exception& w) {
      std::cerr << "lssbalred: " << w.what() << '\n';
    }
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "lssbalred: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "lssbalred: " << e.what() << '\n';
    return 1;
  }
}
