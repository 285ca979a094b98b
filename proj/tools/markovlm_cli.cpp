// markovlm command-line front end. Talks to the library only through the
// C API in markovlm/markovlm.h.

#include <csignal>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "cli_support.hpp"

namespace cli {
namespace {

// Library rejections of a config section become validation errors at that
// section's path.
template <class F>
auto at(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ApiError& e) {
    if (e.status == MLM_ERR_INVALID_ARGUMENT || e.status == MLM_ERR_SIZE_LIMIT)
      throw ValidationError(path + ": " + mlm_last_error());
    throw;
  }
}

std::string read_file(const std::string& path, const std::string& json_path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError(json_path + ": cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ---- chain specs -----------------------------------------------------------

Matrix chain_from_spec(Obj s, const RunContext& ctx) {
  const auto kind = s.get<std::string>("kind");
  const std::string p = s.path();
  Matrix m;
  if (kind == "random") {
    const int d = s.get<int>("d");
    const double p_min = s.get<double>("p_min", 0.0);
    const auto seed = s.get<std::uint64_t>("seed", ctx.seed);
    m = at(p, [&] { return make<Matrix>([&](auto o) { return mlm_random_chain(d, p_min, seed, o); }); });
  } else if (kind == "constrained_walk") {
    const int d = s.get<int>("d");
    m = at(p, [&] { return make<Matrix>([&](auto o) { return mlm_constrained_walk(d, o); }); });
  } else if (kind == "polygonal_walk") {
    const int d = s.get<int>("d");
    m = at(p, [&] { return make<Matrix>([&](auto o) { return mlm_polygonal_walk(d, o); }); });
  } else if (kind == "clique_rim") {
    const int d = s.get<int>("d");
    const double eta = s.get<double>("eta");
    const auto tau = s.list<int>("tau", std::vector<int>(d > 0 ? d / 3 : 0, 0));
    const double eps_rim = s.get<double>("eps_rim", 0.125);
    m = at(p, [&] {
      return make<Matrix>([&](auto o) {
        return mlm_clique_rim(d, eta, tau.data(), tau.size(), eps_rim, o);
      });
    });
  } else if (kind == "dense") {
    const auto rows = s.raw("rows");
    if (!rows.is_array() || rows.empty())
      throw ValidationError(s.at_path("rows") + ": expected a non-empty array of rows");
    const std::size_t n = rows.size();
    std::vector<double> flat;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string rp = s.at_path("rows") + "[" + std::to_string(i) + "]";
      if (!rows[i].is_array() || rows[i].size() != n)
        throw ValidationError(rp + ": expected " + std::to_string(n) + " entries");
      for (std::size_t j = 0; j < n; ++j)
        flat.push_back(Obj::convert<double>(rows[i][j], rp + "[" + std::to_string(j) + "]"));
    }
    m = at(p, [&] { return make<Matrix>([&](auto o) { return mlm_matrix_from_dense(flat.data(), n, o); }); });
  } else if (kind == "file") {
    const auto path = s.get<std::string>("path");
    const auto text = read_file(path, s.at_path("path"));
    m = at(s.at_path("path"),
           [&] { return make<Matrix>([&](auto o) { return mlm_matrix_from_json(text.c_str(), o); }); });
  } else if (kind == "discretized_process") {
    // The chain is the frequentist estimate on a long reference run.
    const auto process = s.get<std::string>("process");
    mlm_process_params params = mlm_process_defaults();
    if (s.has("params")) {
      Obj ps = s.obj("params");
      params.mu = ps.get<double>("mu", params.mu);
      params.sigma = ps.get<double>("sigma", params.sigma);
      params.rho = ps.get<double>("rho", params.rho);
      params.x0 = ps.get<double>("x0", params.x0);
      params.dt = ps.get<double>("dt", params.dt);
      ps.finish();
    }
    const int d = s.get<int>("d");
    const auto n_ref = s.get<std::size_t>("n_reference", 100000);
    const auto seed = s.get<std::uint64_t>("seed", ctx.seed);
    m = at(p, [&] {
      std::vector<double> series(n_ref);
      check(mlm_simulate_process(process.c_str(), &params, n_ref, seed, series.data()));
      std::vector<int> states(n_ref);
      check(mlm_discretize(series.data(), n_ref, d, states.data()));
      return make<Matrix>([&](auto o) {
        return mlm_frequentist_estimate(states.data(), n_ref, d, o, nullptr);
      });
    });
  } else {
    throw ValidationError(s.at_path("kind") + ": unknown chain kind '" + kind + "'");
  }
  s.finish();
  return m;
}

// ---- oracle specs ----------------------------------------------------------

Logits logits_from_spec(Obj s, int T, int K, const RunContext& ctx) {
  const auto kind = s.get<std::string>("kind");
  Logits l;
  if (kind == "random") {
    const double scale = s.get<double>("scale", 1.0);
    const auto seed = s.get<std::uint64_t>("seed", ctx.seed);
    l = at(s.path(), [&] { return make<Logits>([&](auto o) { return mlm_logits_random(T, K, scale, seed, o); }); });
  } else if (kind == "toy") {
    const auto path = s.get<std::string>("checkpoint");
    const auto text = read_file(path, s.at_path("checkpoint"));
    auto toy = at(s.at_path("checkpoint"),
                  [&] { return make<Toy>([&](auto o) { return mlm_toy_from_json(text.c_str(), o); }); });
    l = make<Logits>([&](auto o) { return mlm_toy_logits(toy.get(), o); });
  } else {
    throw ValidationError(s.at_path("kind") + ": unknown logit source '" + kind + "'");
  }
  s.finish();
  return l;
}

Oracle remote_from_spec(Obj& s, int T) {
  const auto endpoint = s.get<std::string>("endpoint");
  std::vector<std::string> alphabet;
  for (int i = 0; i < T; ++i) alphabet.push_back(std::to_string(i));
  alphabet = s.list<std::string>("alphabet", alphabet);
  const auto separator = s.get<std::string>("separator", ",");
  const auto protocol = s.get<std::string>("protocol", "native");
  if (protocol != "native" && protocol != "openai")
    throw ValidationError(s.at_path("protocol") + ": expected 'native' or 'openai'");
  const auto model = s.get<std::string>("model", "");
  std::vector<const char*> syms;
  for (const auto& a : alphabet) syms.push_back(a.c_str());
  mlm_remote_config c{};
  c.endpoint = endpoint.c_str();
  c.alphabet = syms.data();
  c.alphabet_len = syms.size();
  c.separator = separator.c_str();
  c.timeout_ms = s.get<int>("timeout_ms", 5000);
  c.max_in_flight = s.get<int>("max_in_flight", 4);
  c.context_length = s.get<int>("context_length", 4096);
  c.protocol = protocol == "openai" ? MLM_REMOTE_OPENAI : MLM_REMOTE_NATIVE;
  c.model = model.empty() ? nullptr : model.c_str();
  c.top_logprobs = s.get<int>("top_logprobs", 20);
  auto o = at(s.path(), [&] { return make<Oracle>([&](auto out) { return mlm_oracle_remote(&c, out); }); });
  if (mlm_oracle_vocab_size(o.get()) != T)
    throw ValidationError(s.at_path("alphabet") + ": alphabet size must equal " + std::to_string(T));
  return o;
}

Oracle oracle_from_spec(Obj s, int T, int K, const RunContext& ctx) {
  const auto kind = s.get<std::string>("kind");
  Oracle o;
  if (kind == "uniform") {
    o = at(s.path(), [&] { return make<Oracle>([&](auto out) { return mlm_oracle_uniform(T, K, out); }); });
  } else if (kind == "random_logits") {
    const double scale = s.get<double>("scale", 1.0);
    const auto seed = s.get<std::uint64_t>("seed", ctx.seed);
    const double tau = s.get<double>("tau", 1.0);
    o = at(s.path(), [&] {
      auto l = make<Logits>([&](auto out) { return mlm_logits_random(T, K, scale, seed, out); });
      return make<Oracle>([&](auto out) { return mlm_oracle_tempered(l.get(), tau, out); });
    });
  } else if (kind == "chain") {
    auto chain = chain_from_spec(s.obj("chain"), ctx);
    if (mlm_matrix_size(chain.get()) != static_cast<std::size_t>(T))
      throw ValidationError(s.at_path("chain") + ": chain size must equal T");
    o = make<Oracle>([&](auto out) { return mlm_oracle_chain(chain.get(), 1, out); });
  } else if (kind == "toy") {
    const auto path = s.get<std::string>("checkpoint");
    const double tau = s.get<double>("tau", 1.0);
    const auto text = read_file(path, s.at_path("checkpoint"));
    o = at(s.path(), [&] {
      auto toy = make<Toy>([&](auto out) { return mlm_toy_from_json(text.c_str(), out); });
      return make<Oracle>([&](auto out) { return mlm_toy_oracle(toy.get(), tau, out); });
    });
  } else if (kind == "remote") {
    o = remote_from_spec(s, T);
  } else {
    throw ValidationError(s.at_path("kind") + ": unknown oracle kind '" + kind + "'");
  }
  s.finish();
  if (mlm_oracle_vocab_size(o.get()) != T)
    throw ValidationError(s.path() + ": oracle vocabulary size must equal T=" + std::to_string(T));
  return o;
}

// ---- shared helpers --------------------------------------------------------

struct Stationary {
  std::vector<double> pi;
  mlm_stationary_info info{};
};

Stationary stationary_of(const Matrix& m, double tol, std::int64_t max_iter) {
  Stationary s;
  s.pi.resize(mlm_matrix_size(m.get()));
  check(mlm_stationary(m.get(), tol, max_iter, s.pi.data(), s.pi.size(), &s.info));
  return s;
}

std::string sequence_label(int T, int K, std::size_t index) {
  std::vector<int> tok(static_cast<std::size_t>(K));
  std::size_t len = 0;
  check(mlm_state_at(T, K, index, tok.data(), tok.size(), &len));
  std::string out;
  for (std::size_t i = 0; i < len; ++i) {
    if (T > 10 && i) out += ' ';
    out += std::to_string(tok[i]);
  }
  return out;
}

std::string stationary_csv(const Stationary& s, int T, int K, bool labelled) {
  std::string out = "state,sequence,pi\n";
  for (std::size_t i = 0; i < s.pi.size(); ++i)
    out += std::to_string(i) + "," + (labelled ? sequence_label(T, K, i) : std::to_string(i)) +
           "," + fmt(s.pi[i]) + "\n";
  return out;
}

json structure_json(const mlm_structure_report& r) {
  return json::parse(take([&] {
    char* s = nullptr;
    check(mlm_structure_report_json(&r, &s));
    return s;
  }()));
}

json stationary_json(const Stationary& s) {
  return json{{"iterations", s.info.iterations},
              {"residual", s.info.residual},
              {"converged", s.info.converged != 0},
              {"periodic", s.info.periodic != 0},
              {"period", s.info.period}};
}

std::string matrix_json(const Matrix& m) {
  char* s = nullptr;
  check(mlm_matrix_to_json(m.get(), &s));
  return take(s);
}

std::string matrix_csv(const Matrix& m) {
  char* s = nullptr;
  check(mlm_matrix_to_csv(m.get(), &s));
  return take(s);
}

// Matrix files carry the run header next to the matrix fields.
void write_matrix(const RunContext& ctx, const std::string& name, const Matrix& m) {
  ctx.write_json(name, json::parse(matrix_json(m)));
}

// ---- build -----------------------------------------------------------------

struct Built {
  Matrix q;
  mlm_structure_report report{};
};

Built build_chain(Obj& c, const RunContext& ctx, int& T, int& K) {
  T = c.get<int>("T");
  K = c.get<int>("K");
  if (T < 1) throw ValidationError(c.at_path("T") + ": must be >= 1");
  if (K < 1) throw ValidationError(c.at_path("K") + ": must be >= 1");
  std::uint64_t count = 0;
  at(c.path(), [&] { check(mlm_state_count(T, K, &count)); return 0; });
  auto oracle = oracle_from_spec(c.obj("oracle"), T, K, ctx);
  Built b;
  b.q = make<Matrix>([&](auto o) { return mlm_build_qf(oracle.get(), T, K, ctx.jobs, o); });
  check(mlm_validate_structure(b.q.get(), T, K, &b.report));
  return b;
}

void cmd_build(const json& cfg, const RunContext& ctx) {
  Obj c(cfg, "$");
  int T = 0, K = 0;
  auto b = build_chain(c, ctx, T, K);
  const std::size_t n = mlm_matrix_size(b.q.get());
  const bool csv = c.get<bool>("dense_csv", n <= 256);
  const bool block = c.get<bool>("recurrent_block", false);
  c.finish();
  write_matrix(ctx, "qf.json", b.q);
  ctx.write_json("structure.json", structure_json(b.report));
  if (csv) ctx.write_csv("qf.csv", matrix_csv(b.q));
  if (block) {
    auto r = at("$.recurrent_block", [&] {
      return make<Matrix>([&](auto o) { return mlm_recurrent_block(b.q.get(), 0, o); });
    });
    write_matrix(ctx, "recurrent_block.json", r);
  }
  std::cout << "built Q_f: " << n << " states, " << b.report.nonzero_count << " nonzeros, proportion "
            << b.report.proportion_num << "/" << b.report.proportion_den << "\n";
}

// ---- analyze ---------------------------------------------------------------

struct Source {
  Matrix m;
  int T = 0;
  int K = 1;
  bool is_qf = false;
};

Source source_from_spec(Obj s, const RunContext& ctx) {
  Source src;
  if (s.has("kind") && s.raw("kind") == "qf") {
    auto b = build_chain(s, ctx, src.T, src.K);
    src.m = b.q;
    src.is_qf = true;
    s.finish();
    return src;
  }
  src.m = chain_from_spec(std::move(s), ctx);
  src.T = static_cast<int>(mlm_matrix_size(src.m.get()));
  return src;
}

void cmd_analyze(const json& cfg, const RunContext& ctx) {
  Obj c(cfg, "$");
  Source src = source_from_spec(c.obj("matrix"), ctx);
  const int K = c.get<int>("K", src.K);
  if (K < 1) throw ValidationError("$.K: must be >= 1");
  const auto mode = c.get<std::string>("mode", "full");
  if (mode != "full" && mode != "recurrent")
    throw ValidationError("$.mode: expected 'full' or 'recurrent'");
  const auto n_max = c.get<std::int64_t>("n_max", 200);
  if (n_max < K) throw ValidationError("$.n_max: must be >= K");
  const double tol = c.get<double>("tol", 1e-12);
  const auto max_iter = c.get<std::int64_t>("max_iter", 1000000);
  std::vector<double> eps_list{0.25, 0.1, 0.05, 0.01};
  std::vector<double> grid;
  std::int64_t t_cap = 10000;
  if (c.has("mixing")) {
    Obj mx = c.obj("mixing");
    eps_list = mx.list<double>("eps", eps_list);
    grid = mx.list<double>("grid", grid);
    t_cap = mx.get<std::int64_t>("t_cap", t_cap);
    mx.finish();
  }
  for (std::size_t i = 0; i < eps_list.size(); ++i)
    if (!(eps_list[i] > 0 && eps_list[i] < 1))
      throw ValidationError("$.mixing.eps[" + std::to_string(i) + "]: must lie in (0, 1)");
  bool envelopes = false;
  double env_eps = 1e-6;
  std::vector<int> env_K{3, 5, 8};
  std::int64_t env_n = 100;
  if (c.has("envelopes")) {
    Obj e = c.obj("envelopes");
    envelopes = true;
    env_eps = e.get<double>("epsilon", env_eps);
    env_K = e.list<int>("K", env_K);
    env_n = e.get<std::int64_t>("n_max", env_n);
    e.finish();
  }
  c.finish();

  Matrix m = src.m;
  bool labelled = src.is_qf;
  if (mode == "recurrent") {
    if (!src.is_qf) throw ValidationError("$.mode: 'recurrent' needs a qf matrix source");
    m = at("$.matrix", [&] {
      return make<Matrix>([&](auto o) { return mlm_recurrent_block(src.m.get(), 0, o); });
    });
    labelled = false;
  }
  const std::size_t n = mlm_matrix_size(m.get());

  auto st = stationary_of(m, tol, max_iter);
  ctx.write_csv("stationary.csv", stationary_csv(st, src.T, src.K, labelled));

  std::vector<int> class_of(n), recurrent(n);
  std::size_t n_classes = 0, n_rec = 0;
  int period = 0;
  check(mlm_classify(m.get(), class_of.data(), recurrent.data(), n, &n_classes, &n_rec, &period));
  std::string classes = "state,class,recurrent\n";
  for (std::size_t i = 0; i < n; ++i)
    classes += std::to_string(i) + "," + std::to_string(class_of[i]) + "," +
               std::to_string(recurrent[i]) + "\n";
  ctx.write_csv("classes.csv", classes);

  const std::size_t rows = static_cast<std::size_t>(n_max - K + 1);
  std::vector<double> emp(rows), bound(rows);
  double eps = 0.0;
  int vacuous = 0;
  std::size_t violations = 0;
  check(mlm_convergence_profile(m.get(), K, n_max, ctx.jobs, emp.data(), bound.data(), rows, &eps,
                                &vacuous, &violations));
  std::string conv = "n,empirical,bound\n";
  for (std::size_t i = 0; i < rows; ++i)
    conv += std::to_string(K + static_cast<std::int64_t>(i)) + "," + fmt(emp[i]) + "," +
            fmt(bound[i]) + "\n";
  ctx.write_csv("convergence.csv", conv);

  std::string mixing = "epsilon,t_mix\n";
  json mix_json = json::array();
  for (double e : eps_list) {
    std::int64_t t = 0;
    check(mlm_mixing_time(m.get(), st.pi.data(), n, e, t_cap, ctx.jobs, &t));
    mixing += fmt(e) + "," + fmt_steps(t) + "\n";
    mix_json.push_back({{"epsilon", e}, {"t_mix", t < 0 ? json("+inf") : json(t)}});
  }
  ctx.write_csv("mixing.csv", mixing);

  std::vector<double> g = grid;
  if (g.empty())
    for (int i = 0; i < 20; ++i) g.push_back(0.05 * i);
  std::vector<std::int64_t> table(g.size());
  double t_min = 0.0, argmin = 0.0;
  at("$.mixing.grid", [&] {
    check(mlm_t_min(m.get(), st.pi.data(), n, g.data(), g.size(), t_cap, ctx.jobs, &t_min, &argmin,
                    table.data()));
    return 0;
  });
  std::string tmin = "epsilon,t_mix_half,factor,product\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double f = std::pow((2.0 - g[i]) / (1.0 - g[i]), 2.0);
    const double prod = table[i] < 0 ? kInfinity : static_cast<double>(table[i]) * f;
    tmin += fmt(g[i]) + "," + fmt_steps(table[i]) + "," + fmt(f) + "," + fmt(prod) + "\n";
  }
  ctx.write_csv("tmin.csv", tmin);

  if (envelopes) {
    std::string env = "K,n,bound\n";
    for (int k : env_K)
      for (std::int64_t i = k; i <= env_n; ++i)
        env += std::to_string(k) + "," + std::to_string(i) + "," + fmt(mlm_envelope(env_eps, k, i)) +
               "\n";
    ctx.write_csv("envelope.csv", env);
  }

  json summary{{"n_states", n},
               {"mode", mode},
               {"stationary", stationary_json(st)},
               {"classes", n_classes},
               {"recurrent_classes", n_rec},
               {"period", period},
               {"epsilon", eps},
               {"envelope_vacuous", vacuous != 0},
               {"envelope_violations", violations},
               {"mixing", mix_json},
               {"t_min", num_or_inf(t_min)},
               {"t_min_argmin", num_or_inf(argmin)}};
  ctx.write_json("summary.json", summary);
  std::cout << "analyzed " << n << " states: epsilon=" << fmt(eps) << " t_min=" << fmt(t_min)
            << " violations=" << violations << "\n";
}

// ---- sweep-temperature -----------------------------------------------------

void cmd_sweep_temperature(const json& cfg, const RunContext& ctx) {
  Obj c(cfg, "$");
  const int T = c.get<int>("T");
  const int K = c.get<int>("K");
  auto logits = logits_from_spec(c.obj("logits"), T, K, ctx);
  std::vector<double> taus;
  for (int i = 1; i <= 20; ++i) taus.push_back(0.1 * i);
  taus = c.list<double>("taus", taus);
  if (taus.empty()) throw ValidationError("$.taus: must not be empty");
  const double tol = c.get<double>("converge_tol", 1e-6);
  const auto t_cap = c.get<std::int64_t>("t_cap", 100000);
  c.finish();
  std::vector<double> eps(taus.size()), min_entry(taus.size());
  std::vector<std::int64_t> steps(taus.size());
  at("$", [&] {
    check(mlm_temperature_sweep(logits.get(), T, K, taus.data(), taus.size(), tol, t_cap, ctx.jobs,
                                eps.data(), min_entry.data(), steps.data()));
    return 0;
  });
  std::string csv = "tau,epsilon,min_entry,steps\n";
  bool monotone = true;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    csv += fmt(taus[i]) + "," + fmt(eps[i]) + "," + fmt(min_entry[i]) + "," + fmt_steps(steps[i]) + "\n";
    if (i > 0 && taus[i] > taus[i - 1] && eps[i] < eps[i - 1]) monotone = false;
  }
  ctx.write_csv("temperature.csv", csv);
  auto steps_at = [&](double tau) -> std::int64_t {
    for (std::size_t i = 0; i < taus.size(); ++i)
      if (std::abs(taus[i] - tau) < 1e-9) return steps[i];
    return -2;
  };
  auto steps_json = [](std::int64_t s) {
    return s == -2 ? json(nullptr) : s < 0 ? json("+inf") : json(s);
  };
  const auto s1 = steps_at(1.0), s2 = steps_at(2.0);
  json ratio = nullptr;
  if (s1 > 0 && s2 > 0) ratio = static_cast<double>(s1) / static_cast<double>(s2);
  ctx.write_json("summary.json", json{{"rows", taus.size()},
                                      {"epsilon_nondecreasing", monotone},
                                      {"steps_tau1", steps_json(s1)},
                                      {"steps_tau2", steps_json(s2)},
                                      {"steps_ratio_tau1_over_tau2", ratio}});
  std::cout << "swept " << taus.size() << " temperatures, epsilon nondecreasing: "
            << (monotone ? "yes" : "no") << "\n";
}

// ---- generate --------------------------------------------------------------

std::vector<double> start_from(Obj& c, std::size_t d) {
  auto start = c.list<double>("start", {});
  if (!start.empty() && start.size() != d)
    throw ValidationError("$.start: expected " + std::to_string(d) + " entries");
  return start;
}

void cmd_generate(const json& cfg, const RunContext& ctx) {
  Obj c(cfg, "$");
  if (!c.has("chain") && !c.has("process"))
    throw ValidationError("$: expected 'chain' or 'process'");
  if (c.has("chain")) {
    auto q = chain_from_spec(c.obj("chain"), ctx);
    const std::size_t d = mlm_matrix_size(q.get());
    const auto N = c.get<std::size_t>("N", 1000);
    const auto start = start_from(c, d);
    std::vector<int> traj(N);
    at("$", [&] {
      check(mlm_sample_trajectory(q.get(), start.empty() ? nullptr : start.data(), N, ctx.seed,
                                  traj.data()));
      return 0;
    });
    write_matrix(ctx, "chain.json", q);
    std::string csv = "n,state\n";
    for (std::size_t i = 0; i < N; ++i) csv += std::to_string(i) + "," + std::to_string(traj[i]) + "\n";
    ctx.write_csv("trajectory.csv", csv);
    std::cout << "generated " << d << "-state chain and " << N << "-step trajectory\n";
  }
  if (c.has("process")) {
    Obj p = c.obj("process");
    const auto kind = p.get<std::string>("kind");
    mlm_process_params params = mlm_process_defaults();
    if (p.has("params")) {
      Obj ps = p.obj("params");
      params.mu = ps.get<double>("mu", params.mu);
      params.sigma = ps.get<double>("sigma", params.sigma);
      params.rho = ps.get<double>("rho", params.rho);
      params.x0 = ps.get<double>("x0", params.x0);
      params.dt = ps.get<double>("dt", params.dt);
      ps.finish();
    }
    const auto n = p.get<std::size_t>("n", 1000);
    const int d = p.get<int>("d", 10);
    const auto seed = p.get<std::uint64_t>("seed", ctx.seed);
    p.finish();
    std::vector<double> series(n);
    std::vector<int> states(n);
    at("$.process", [&] {
      check(mlm_simulate_process(kind.c_str(), &params, n, seed, series.data()));
      check(mlm_discretize(series.data(), n, d, states.data()));
      return 0;
    });
    std::string csv = "k,value,state\n";
    for (std::size_t i = 0; i < n; ++i)
      csv += std::to_string(i) + "," + fmt(series[i]) + "," + std::to_string(states[i]) + "\n";
    ctx.write_csv("series.csv", csv);
    std::cout << "generated " << n << " samples of " << kind << " discretized to " << d << " states\n";
  }
  c.finish();
}

// ---- estimate --------------------------------------------------------------

void cmd_estimate(const json& cfg, const RunContext& ctx) {
  Obj c(cfg, "$");
  auto q = chain_from_spec(c.obj("chain"), ctx);
  const int d = static_cast<int>(mlm_matrix_size(q.get()));
  Obj p = c.obj("predictor");
  const auto kind = p.get<std::string>("kind");
  mlm_predictor pred{};
  Oracle fixed;
  std::string id = kind;
  if (kind == "frequentist") {
    pred.kind = MLM_PREDICTOR_FREQUENTIST;
  } else if (kind == "ngram") {
    pred.kind = MLM_PREDICTOR_NGRAM;
    pred.order = p.get<int>("order", 1);
    pred.alpha = p.get<double>("alpha", 1.0);
  } else if (kind == "ground_truth") {
    fixed = make<Oracle>([&](auto o) { return mlm_oracle_chain(q.get(), 1, o); });
  } else if (kind == "uniform") {
    fixed = make<Oracle>([&](auto o) { return mlm_oracle_uniform(d, 1, o); });
  } else if (kind == "remote") {
    fixed = remote_from_spec(p, d);
  } else {
    throw ValidationError(p.at_path("kind") + ": unknown predictor kind '" + kind + "'");
  }
  p.finish();
  if (fixed.get()) {
    pred.kind = MLM_PREDICTOR_FIXED;
    pred.oracle = fixed.get();
    pred.id = id.c_str();
  }
  const auto N_list = c.list<std::size_t>("N_list");
  if (N_list.empty()) throw ValidationError("$.N_list: must not be empty");
  const auto reps = c.get<std::size_t>("reps", 20);
  const auto metric_name = c.get<std::string>("metric", "tv");
  if (metric_name != "tv" && metric_name != "kl")
    throw ValidationError("$.metric: expected 'tv' or 'kl'");
  const auto start = start_from(c, static_cast<std::size_t>(d));
  c.finish();

  auto curve = at("$", [&] {
    return make<Curve>([&](auto o) {
      return mlm_risk_curve_run(q.get(), &pred, N_list.data(), N_list.size(), reps, ctx.seed,
                                metric_name == "kl" ? MLM_METRIC_KL : MLM_METRIC_TV,
                                start.empty() ? nullptr : start.data(), ctx.jobs, o);
    });
  });
  char* csv = nullptr;
  check(mlm_risk_curve_csv(curve.get(), &csv));
  ctx.write_csv("risk.csv", take(csv));

  json fit_doc;
  mlm_power_fit fit{};
  const mlm_status fs = mlm_risk_curve_fit(curve.get(), &fit);
  if (fs == MLM_OK) {
    fit_doc["fit"] = {{"slope", fit.slope},
                      {"intercept", fit.intercept},
                      {"stderr", fit.stderr_slope},
                      {"r2", fit.r2},
                      {"n_points", fit.n_points}};
  } else if (fs == MLM_ERR_INVALID_ARGUMENT) {
    fit_doc["fit"] = nullptr;
    fit_doc["fit_error"] = mlm_last_error();
  } else {
    check(fs);
  }
  fit_doc["predictor"] = id;
  fit_doc["metric"] = metric_name;
  ctx.write_json("fit.json", fit_doc);
  std::cout << "estimated " << mlm_risk_curve_rows(curve.get()) << " risk points for " << id;
  if (fs == MLM_OK) std::cout << ", slope " << fmt(fit.slope);
  std::cout << "\n";
}

// ---- bounds ----------------------------------------------------------------

double number_or_inf(Obj& o, const std::string& k, double fallback) {
  if (!o.has(k)) {
    o.get<double>(k, 0.0);
    return fallback;
  }
  const json& v = o.raw(k);
  if (v.is_string() && (v == "+inf" || v == "inf")) return kInfinity;
  return Obj::convert<double>(v, o.at_path(k));
}

void cmd_bounds(const json& cfg, const RunContext& ctx) {
  Obj c(cfg, "$");
  json out;

  {
    const json empty = json::object();
    Obj p = c.has("pretrain") ? c.obj("pretrain") : Obj(empty, "$.pretrain");
    mlm_pretrain_params pp{p.get<double>("T", 32000),     p.get<double>("B_U", 1.0),
                           p.get<double>("tau", 1.0),     p.get<double>("c0", 1e-6),
                           p.get<double>("gamma_norm", 1), p.get<double>("delta", 0.05),
                           p.get<double>("N_train", 1e12)};
    const double t_min = number_or_inf(p, "t_min", 1.0);
    p.finish();
    double bbar = 0, bbar_kl = 0, gap = 0;
    at("$.pretrain", [&] {
      check(mlm_bbar_pretrain(&pp, &bbar));
      check(mlm_bbar_pretrain_kl(&pp, &bbar_kl));
      return 0;
    });
    json g;
    const mlm_status gs = mlm_generalization_gap(bbar, pp.N_train, pp.delta, t_min, &gap);
    if (gs == MLM_OK) g = gap;
    else if (gs == MLM_ERR_UNDEFINED) g = "undefined";
    else at("$.pretrain", [&] { check(gs); return 0; });
    out["pretrain"] = {{"bbar", bbar}, {"bbar_kl", bbar_kl}, {"t_min", num_or_inf(t_min)}, {"gap", g}};
  }
  {
    const json empty = json::object();
    Obj p = c.has("icl") ? c.obj("icl") : Obj(empty, "$.icl");
    mlm_icl_params ip{p.get<double>("d", 3),       p.get<double>("B_U", 1.0),
                      p.get<double>("tau", 1.0),   p.get<double>("p_min", 0.1),
                      p.get<double>("delta", 0.05), p.get<double>("N_icl", 1000), 0.0};
    ip.t_min = number_or_inf(p, "t_min", 4.0);
    p.finish();
    double bbar = 0, gap = 0;
    at("$.icl", [&] { check(mlm_bbar_icl(&ip, &bbar)); return 0; });
    json g;
    const mlm_status gs = mlm_icl_gap(&ip, &gap);
    if (gs == MLM_OK) g = gap;
    else if (gs == MLM_ERR_UNDEFINED) g = "undefined";
    else at("$.icl", [&] { check(gs); return 0; });
    out["icl"] = {{"bbar", bbar}, {"t_min", num_or_inf(ip.t_min)}, {"gap", g}};
  }
  if (c.has("depth")) {
    Obj p = c.obj("depth");
    mlm_depth_params dp{};
    dp.L = p.get<int>("L");
    dp.H = p.get<int>("H");
    dp.r = p.get<int>("r");
    dp.m = p.get<int>("m");
    dp.B_1 = p.get<double>("B_1");
    dp.B_2 = p.get<double>("B_2");
    dp.B_O = p.get<double>("B_O");
    dp.B_V = p.get<double>("B_V");
    dp.B_tok = p.get<double>("B_tok");
    dp.B_U = p.get<double>("B_U");
    dp.T = p.get<double>("T");
    dp.tau = p.get<double>("tau", 1.0);
    dp.c0 = p.get<double>("c0", 1e-6);
    dp.gamma_norm = p.get<double>("gamma_norm", 1.0);
    dp.delta = p.get<double>("delta", 0.05);
    p.finish();
    double b_theta = 0, bbar = 0;
    int warn = 0;
    at("$.depth", [&] { check(mlm_bbar_depth(&dp, &b_theta, &bbar, &warn)); return 0; });
    json w = json::array();
    if (warn) w.push_back("H does not divide r");
    out["depth"] = {{"b_theta", b_theta}, {"bbar", bbar}, {"warnings", w}};
  }
  {
    const json empty = json::object();
    Obj p = c.has("sample_complexity") ? c.obj("sample_complexity") : Obj(empty, "$.sample_complexity");
    const double bbar = p.get<double>("bbar", out["icl"]["bbar"].get<double>());
    const double eps = p.get<double>("epsilon", 0.1);
    const double delta = p.get<double>("delta", 0.05);
    p.finish();
    std::uint64_t n_star = 0;
    double gap = 0;
    at("$.sample_complexity", [&] {
      check(mlm_sample_complexity(bbar, eps, delta, &n_star));
      check(mlm_generalization_gap(bbar, static_cast<double>(n_star), delta, 1.0, &gap));
      return 0;
    });
    out["sample_complexity"] = {{"bbar", bbar},
                                {"epsilon", eps},
                                {"delta", delta},
                                {"N_star", n_star},
                                {"gap_at_N_star", gap},
                                {"round_trip_ok", gap <= std::nextafter(eps / 2.0, kInfinity)}};
  }
  {
    const json empty = json::object();
    Obj p = c.has("predictor") ? c.obj("predictor") : Obj(empty, "$.predictor");
    const double tau = p.get<double>("tau", 1.0);
    const double delta = p.get<double>("delta", 0.05);
    const auto cards = p.get<std::string>("cards", "");
    p.finish();
    std::string text;
    if (!cards.empty()) text = read_file(cards, "$.predictor.cards");
    char* csv = nullptr;
    at("$.predictor", [&] {
      check(mlm_epsilon_predictor_csv(cards.empty() ? nullptr : text.c_str(), tau, delta, &csv));
      return 0;
    });
    ctx.write_csv("predictor.csv", take(csv));
    out["predictor"] = {{"tau", tau}, {"delta", delta}, {"cards", cards.empty() ? "builtin" : cards}};
  }
  {
    const json empty = json::object();
    Obj p = c.has("mcdiarmid") ? c.obj("mcdiarmid") : Obj(empty, "$.mcdiarmid");
    const auto n = p.get<std::size_t>("n", 100);
    const double prob = p.get<double>("p", 0.5);
    const auto n_samples = p.get<std::size_t>("n_samples", 100000);
    std::vector<double> u_grid{0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
    u_grid = p.list<double>("u", u_grid);
    const double t_min = p.get<double>("t_min", 4.0);
    Matrix chain;
    if (p.has("chain")) {
      chain = chain_from_spec(p.obj("chain"), ctx);
    } else {
      const double half[4] = {0.5, 0.5, 0.5, 0.5};
      chain = make<Matrix>([&](auto o) { return mlm_matrix_from_dense(half, 2, o); });
    }
    p.finish();
    std::vector<mlm_mc_row> iid(u_grid.size()), mc(u_grid.size());
    at("$.mcdiarmid", [&] {
      check(mlm_mc_verify_iid_mean(n, prob, n_samples, u_grid.data(), u_grid.size(), ctx.seed, ctx.jobs,
                                   iid.data()));
      check(mlm_mc_verify_chain_mean(chain.get(), n, t_min, n_samples, u_grid.data(), u_grid.size(),
                                     ctx.seed, ctx.jobs, mc.data()));
      return 0;
    });
    std::string csv = "variant,u,empirical,tail,stderr,ok\n";
    bool all_ok = true;
    for (const auto* rows : {&iid, &mc})
      for (const auto& r : *rows) {
        csv += std::string(rows == &iid ? "iid" : "chain") + "," + fmt(r.u) + "," + fmt(r.empirical) +
               "," + fmt(r.tail) + "," + fmt(r.stderr_emp) + "," + (r.ok ? "1" : "0") + "\n";
        all_ok = all_ok && r.ok;
      }
    ctx.write_csv("mcdiarmid.csv", csv);
    out["mcdiarmid"] = {{"n", n}, {"n_samples", n_samples}, {"t_min", t_min}, {"all_ok", all_ok}};
  }
  c.finish();
  ctx.write_json("bounds.json", out);
  std::cout << "bounds written; McDiarmid checks " << (out["mcdiarmid"]["all_ok"].get<bool>() ? "pass" : "FAIL")
            << "\n";
}

// ---- train-toy -------------------------------------------------------------

void cmd_train_toy(const json& cfg, const RunContext& ctx) {
  Obj c(cfg, "$");
  const auto length = c.get<std::size_t>("sequence_length", 40);
  const auto prefix = c.list<int>("prefix", {0, 0, 1});
  const auto dataset = c.get<std::string>("dataset", "sequence");
  if (dataset != "sequence" && dataset != "truth_table")
    throw ValidationError("$.dataset: expected 'sequence' or 'truth_table'");
  mlm_toy_config tc = mlm_toy_defaults();
  tc.seed = ctx.seed;
  if (c.has("model")) {
    Obj m = c.obj("model");
    tc.context_length = m.get<int>("context_length", tc.context_length);
    tc.embedding_dim = m.get<int>("embedding_dim", tc.embedding_dim);
    tc.learning_rate = m.get<double>("learning_rate", tc.learning_rate);
    tc.epochs = m.get<int>("epochs", tc.epochs);
    tc.seed = m.get<std::uint64_t>("seed", tc.seed);
    tc.temperature = m.get<double>("temperature", tc.temperature);
    m.finish();
  }
  const double tau = c.get<double>("tau", 1.0);
  const double tol = c.get<double>("tol", 1e-12);
  c.finish();
  if (static_cast<std::size_t>(tc.context_length) != prefix.size())
    throw ValidationError("$.prefix: length must equal the model context length " +
                          std::to_string(tc.context_length));

  std::vector<int> seq(length);
  at("$", [&] {
    check(mlm_parity_sequence(length, prefix.data(), prefix.size(), seq.data()));
    return 0;
  });
  std::size_t n_examples = 0;
  Toy toy = at("$.model", [&] {
    return make<Toy>([&](auto o) {
      return dataset == "sequence"
                 ? mlm_toy_train_sequence(seq.data(), seq.size(), 2, &tc, o, &n_examples)
                 : mlm_toy_train_parity_table(&tc, o, &n_examples);
    });
  });

  const int T = 2, K = tc.context_length;
  std::set<std::size_t> seen;
  std::string data_csv = "example,context,target\n";
  if (dataset == "sequence") {
    for (std::size_t i = 0; i + static_cast<std::size_t>(K) < seq.size(); ++i) {
      std::size_t idx = 0;
      check(mlm_state_index(T, K, seq.data() + i, static_cast<std::size_t>(K), &idx));
      seen.insert(idx);
      data_csv += std::to_string(i) + "," + sequence_label(T, K, idx) + "," +
                  std::to_string(seq[i + static_cast<std::size_t>(K)]) + "\n";
    }
  } else {
    std::uint64_t count = 0;
    check(mlm_state_count(T, K, &count));
    const std::size_t first = static_cast<std::size_t>(count) - (std::size_t{1} << K);
    for (std::size_t idx = first; idx < count; ++idx) {
      seen.insert(idx);
      std::vector<int> tok(static_cast<std::size_t>(K));
      std::size_t len = 0;
      check(mlm_state_at(T, K, idx, tok.data(), tok.size(), &len));
      int parity = 0;
      for (int b : tok) parity ^= b;
      data_csv += std::to_string(idx - first) + "," + sequence_label(T, K, idx) + "," +
                  std::to_string(parity) + "\n";
    }
  }
  ctx.write_csv("dataset.csv", data_csv);

  char* ckpt = nullptr;
  check(mlm_toy_to_json(toy.get(), &ckpt));
  ctx.write_json("toy_model.json", json::parse(take(ckpt)));
  std::vector<double> losses(static_cast<std::size_t>(tc.epochs));
  std::size_t n_losses = 0;
  check(mlm_toy_losses(toy.get(), losses.data(), losses.size(), &n_losses));
  std::string loss_csv = "epoch,loss\n";
  for (std::size_t i = 0; i < n_losses; ++i)
    loss_csv += std::to_string(i) + "," + fmt(losses[i]) + "\n";
  ctx.write_csv("losses.csv", loss_csv);

  auto oracle = at("$.tau", [&] { return make<Oracle>([&](auto o) { return mlm_toy_oracle(toy.get(), tau, o); }); });
  Matrix q = make<Matrix>([&](auto o) { return mlm_build_qf(oracle.get(), T, K, ctx.jobs, o); });
  mlm_structure_report rep{};
  check(mlm_validate_structure(q.get(), T, K, &rep));
  write_matrix(ctx, "qf.json", q);
  ctx.write_json("structure.json", structure_json(rep));
  auto st = stationary_of(q, tol, 1000000);
  ctx.write_csv("stationary.csv", stationary_csv(st, T, K, true));

  std::uint64_t count = 0;
  check(mlm_state_count(T, K, &count));
  const std::size_t first = static_cast<std::size_t>(count) - (std::size_t{1} << K);
  double seen_mass = 0, unseen_mass = 0;
  json seen_list = json::array(), unseen_list = json::array();
  for (std::size_t idx = first; idx < count; ++idx) {
    if (seen.count(idx)) {
      seen_mass += st.pi[idx];
      seen_list.push_back(sequence_label(T, K, idx));
    } else {
      unseen_mass += st.pi[idx];
      unseen_list.push_back(sequence_label(T, K, idx));
    }
  }
  ctx.write_json("summary.json",
                 json{{"n_states", rep.n_states},
                      {"n_examples", n_examples},
                      {"dataset", dataset},
                      {"final_loss", n_losses ? json(losses[n_losses - 1]) : json(nullptr)},
                      {"structure_ok", rep.block_pattern_ok && rep.support_exact},
                      {"stationary", stationary_json(st)},
                      {"seen_states", seen_list},
                      {"unseen_states", unseen_list},
                      {"stationary_mass_seen", seen_mass},
                      {"stationary_mass_unseen", unseen_mass},
                      {"seen_to_unseen_ratio", unseen_mass > 0 ? json(seen_mass / unseen_mass) : json(nullptr)}});
  std::cout << "trained toy model on " << n_examples << " examples; Q_f has " << rep.n_states
            << " states; stationary mass seen/unseen " << fmt(seen_mass) << "/" << fmt(unseen_mass) << "\n";
}

// ---- mock-serve ------------------------------------------------------------

void cmd_mock_serve(const json& cfg, const RunContext& ctx) {
  Obj c(cfg, "$");
  auto q = chain_from_spec(c.obj("chain"), ctx);
  const auto host = c.get<std::string>("host", "127.0.0.1");
  const int port = c.get<int>("port", 8080);
  const auto alphabet = c.list<std::string>("alphabet", {});
  const auto separator = c.get<std::string>("separator", ",");
  const double sep_mass = c.get<double>("separator_mass", 0.05);
  const int top_k = c.get<int>("top_k", 0);
  c.finish();
  std::vector<const char*> syms;
  for (const auto& a : alphabet) syms.push_back(a.c_str());
  auto server = at("$", [&] {
    return make<MockServer>([&](auto o) {
      return mlm_mock_server_create(q.get(), syms.empty() ? nullptr : syms.data(), syms.size(),
                                    separator.c_str(), sep_mass, top_k, o);
    });
  });

  // Block the stop signals before the server threads exist so only sigwait
  // sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  int bound = 0;
  check(mlm_mock_server_start(server.get(), host.c_str(), port, &bound));
  std::cout << "listening on http://" << host << ":" << bound << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  mlm_mock_server_stop(server.get());
  std::cout << "served " << mlm_mock_server_requests(server.get()) << " requests" << std::endl;
}

int exit_code_for(mlm_status s) {
  switch (s) {
    case MLM_ERR_ORACLE:
    case MLM_ERR_TRANSPORT:
    case MLM_ERR_PROTOCOL:
    case MLM_ERR_NORMALIZATION:
      return 3;
    case MLM_ERR_INTERNAL:
      return 1;
    default:
      return 2;
  }
}

}  // namespace
}  // namespace cli

int main(int argc, char** argv) {
  using namespace cli;
  CLI::App app{"markovlm: Markov-chain analysis of autoregressive next-token models"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  unsigned jobs = 1;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "RNG seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1u, 1024u));

  using Handler = void (*)(const json&, const RunContext&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
      {"build", "Build Q_f from an oracle and validate its structure", cmd_build},
      {"analyze", "Stationary law, classes, convergence and mixing of a chain", cmd_analyze},
      {"sweep-temperature", "Epsilon and convergence speed across a temperature grid", cmd_sweep_temperature},
      {"generate", "Sample a chain trajectory or a discretized process", cmd_generate},
      {"estimate", "In-context risk curves and power-law fit", cmd_estimate},
      {"bounds", "Bound arithmetic, model-card predictor and McDiarmid checks", cmd_bounds},
      {"train-toy", "Train the parity toy model and extract its chain", cmd_train_toy},
      {"mock-serve", "Serve a chain over the oracle HTTP protocol", cmd_mock_serve},
  };
  Handler selected = nullptr;
  std::string selected_name;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&, n = name, f = fn] {
      selected = f;
      selected_name = n;
    });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    json cfg = json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      try {
        cfg = json::parse(f);
      } catch (const json::parse_error& e) {
        throw ValidationError(std::string("$: invalid JSON: ") + e.what());
      }
      if (!cfg.is_object()) throw ValidationError("$: expected an object");
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ValidationError("--out: cannot create '" + out_dir + "': " + ec.message());
    RunContext ctx;
    ctx.out_dir = out_dir;
    ctx.seed = seed;
    ctx.jobs = jobs;
    ctx.command = selected_name;
    ctx.resolved = json{{"command", selected_name}, {"seed", seed}, {"config", cfg}};
    selected(cfg, ctx);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "markovlm: invalid config: " << e.what() << "\n";
    return 2;
  } catch (const ApiError& e) {
    std::cerr << "markovlm: " << e.what() << "\n";
    return exit_code_for(e.status);
  } catch (const std::exception& e) {
    std::cerr << "markovlm: " << e.what() << "\n";
    return 1;
  }
}
