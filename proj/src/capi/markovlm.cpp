#include "markovlm/markovlm.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include "bounds.hpp"
#include "chain_builder.hpp"
#include "estimation.hpp"
#include "generators.hpp"
#include "oracle.hpp"
#include "remote_oracle.hpp"
#include "spectral.hpp"
#include "state_space.hpp"
#include "toy_model.hpp"

using namespace markovlm;

struct mlm_matrix {
  TransitionMatrix m;
};
struct mlm_oracle {
  OracleHandle o;
};
struct mlm_logits {
  std::shared_ptr<const LogitSource> s;
};
struct mlm_toy {
  std::shared_ptr<ToyModel> model;
};
struct mlm_risk_curve {
  RiskCurve c;
};
struct mlm_mock_server {
  std::unique_ptr<MockOracleServer> server;
};

namespace {

thread_local std::string g_last_error;

mlm_status to_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::kInvalidArgument: return MLM_ERR_INVALID_ARGUMENT;
    case ErrorCode::kSizeLimit: return MLM_ERR_SIZE_LIMIT;
    case ErrorCode::kOracle: return MLM_ERR_ORACLE;
    case ErrorCode::kNormalization: return MLM_ERR_NORMALIZATION;
    case ErrorCode::kTraining: return MLM_ERR_TRAINING;
    case ErrorCode::kTransport: return MLM_ERR_TRANSPORT;
    case ErrorCode::kProtocol: return MLM_ERR_PROTOCOL;
    case ErrorCode::kUndefined: return MLM_ERR_UNDEFINED;
    case ErrorCode::kIo: return MLM_ERR_IO;
  }
  return MLM_ERR_INTERNAL;
}

struct BufferError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class F>
mlm_status guard(F&& body) {
  try {
    body();
    return MLM_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const BufferError& e) {
    g_last_error = e.what();
    return MLM_ERR_BUFFER;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MLM_ERR_SIZE_LIMIT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MLM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return MLM_ERR_INTERNAL;
  }
}

template <class T>
void need(const T* p, const char* name) {
  if (p == nullptr)
    fail(ErrorCode::kInvalidArgument, std::string(name) + " must not be NULL");
}

void fits(size_t needed, size_t cap, const char* what) {
  if (cap < needed)
    throw BufferError(std::string(what) + ": buffer holds " + std::to_string(cap) +
                      " entries, " + std::to_string(needed) + " needed");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  need(out, "out");
  *out = dup_string(s);
}

std::vector<double> opt_vector(const double* p, size_t n) {
  return p ? std::vector<double>(p, p + n) : std::vector<double>{};
}

int64_t opt_steps(const std::optional<std::int64_t>& v) { return v ? *v : -1; }

void copy_rows(const McReport& rep, mlm_mc_row* rows) {
  for (size_t i = 0; i < rep.rows.size(); ++i)
    rows[i] = {rep.rows[i].u, rep.rows[i].empirical, rep.rows[i].tail,
               rep.rows[i].stderr_, rep.rows[i].ok ? 1 : 0};
}

}  // namespace

extern "C" {

const char* mlm_version(void) { return "1.0.0"; }
const char* mlm_last_error(void) { return g_last_error.c_str(); }

const char* mlm_status_name(mlm_status s) {
  switch (s) {
    case MLM_OK: return "ok";
    case MLM_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case MLM_ERR_SIZE_LIMIT: return "size_limit";
    case MLM_ERR_ORACLE: return "oracle";
    case MLM_ERR_NORMALIZATION: return "normalization";
    case MLM_ERR_TRAINING: return "training";
    case MLM_ERR_TRANSPORT: return "transport";
    case MLM_ERR_PROTOCOL: return "protocol";
    case MLM_ERR_UNDEFINED: return "undefined";
    case MLM_ERR_IO: return "io";
    case MLM_ERR_BUFFER: return "buffer";
    case MLM_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void mlm_free_string(char* s) { std::free(s); }

/* state space */

mlm_status mlm_state_count(int T, int K, uint64_t* out) {
  return guard([&] {
    need(out, "out");
    *out = state_count({T, K});
  });
}

mlm_status mlm_state_index(int T, int K, const int* tokens, size_t len, size_t* out) {
  return guard([&] {
    need(tokens, "tokens");
    need(out, "out");
    *out = StateSpace({T, K}).index({tokens, len});
  });
}

mlm_status mlm_state_at(int T, int K, size_t index, int* tokens, size_t cap,
                        size_t* len) {
  return guard([&] {
    need(tokens, "tokens");
    need(len, "len");
    const StateSpace space({T, K});
    require(index < space.size(), "state index out of range");
    const auto s = space.state(index);
    fits(s.size(), cap, "mlm_state_at");
    std::copy(s.begin(), s.end(), tokens);
    *len = s.size();
  });
}

mlm_status mlm_is_incompatible(int T, int K, const int* u, size_t ulen,
                               const int* v, size_t vlen, int* out) {
  return guard([&] {
    need(u, "u");
    need(v, "v");
    need(out, "out");
    *out = is_incompatible({u, ulen}, {v, vlen}, {T, K}) ? 1 : 0;
  });
}

/* matrices */

mlm_status mlm_matrix_from_dense(const double* rows, size_t n, mlm_matrix** out) {
  return guard([&] {
    need(rows, "rows");
    need(out, "out");
    require(n > 0, "matrix must be non-empty");
    DenseMatrix d(n);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) d(i, j) = rows[i * n + j];
    auto m = TransitionMatrix::from_dense(d);
    m.check_stochastic(kSumTolerance);
    *out = new mlm_matrix{std::move(m)};
  });
}

mlm_status mlm_matrix_from_json(const char* json, mlm_matrix** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    auto m = TransitionMatrix::from_json(json);
    m.check_stochastic(kSumTolerance);
    *out = new mlm_matrix{std::move(m)};
  });
}

void mlm_matrix_free(mlm_matrix* m) { delete m; }
size_t mlm_matrix_size(const mlm_matrix* m) { return m ? m->m.n() : 0; }
size_t mlm_matrix_nonzeros(const mlm_matrix* m) { return m ? m->m.nonzeros() : 0; }

mlm_status mlm_matrix_dense(const mlm_matrix* m, double* out, size_t cap) {
  return guard([&] {
    need(m, "matrix");
    need(out, "out");
    const size_t n = m->m.n();
    fits(n * n, cap, "mlm_matrix_dense");
    const auto d = m->m.to_dense();
    std::copy(d.data().begin(), d.data().end(), out);
  });
}

mlm_status mlm_matrix_to_json(const mlm_matrix* m, char** out) {
  return guard([&] {
    need(m, "matrix");
    emit(out, m->m.to_json());
  });
}

mlm_status mlm_matrix_to_csv(const mlm_matrix* m, char** out) {
  return guard([&] {
    need(m, "matrix");
    emit(out, m->m.to_dense_csv());
  });
}

mlm_status mlm_matrix_label(const mlm_matrix* m, char** out) {
  return guard([&] {
    need(m, "matrix");
    emit(out, m->m.label());
  });
}

/* generators */

mlm_status mlm_random_chain(int d, double p_min, uint64_t seed, mlm_matrix** out) {
  return guard([&] {
    need(out, "out");
    *out = new mlm_matrix{random_chain(d, p_min, seed)};
  });
}

mlm_status mlm_constrained_walk(int d, mlm_matrix** out) {
  return guard([&] {
    need(out, "out");
    *out = new mlm_matrix{constrained_walk(d)};
  });
}

mlm_status mlm_polygonal_walk(int d, mlm_matrix** out) {
  return guard([&] {
    need(out, "out");
    *out = new mlm_matrix{polygonal_walk(d)};
  });
}

mlm_status mlm_clique_rim(int d, double eta, const int* tau, size_t tau_len,
                          double eps_rim, mlm_matrix** out) {
  return guard([&] {
    need(out, "out");
    if (tau_len) need(tau, "tau");
    std::vector<int> t(tau, tau + tau_len);
    *out = new mlm_matrix{clique_rim(d, eta, t, eps_rim)};
  });
}

mlm_process_params mlm_process_defaults(void) {
  const ProcessParams p;
  return {p.mu, p.sigma, p.rho, p.x0, p.dt};
}

mlm_status mlm_simulate_process(const char* kind, const mlm_process_params* params,
                                size_t n, uint64_t seed, double* out) {
  return guard([&] {
    need(kind, "kind");
    need(out, "out");
    ProcessParams p;
    if (params) p = {params->mu, params->sigma, params->rho, params->x0, params->dt};
    const auto x = simulate_process(parse_process_kind(kind), p, n, seed);
    std::copy(x.begin(), x.end(), out);
  });
}

mlm_status mlm_discretize(const double* series, size_t n, int d, int* out) {
  return guard([&] {
    need(series, "series");
    need(out, "out");
    const auto s = discretize(std::vector<double>(series, series + n), d);
    std::copy(s.begin(), s.end(), out);
  });
}

/* oracles */

mlm_status mlm_oracle_uniform(int T, int K, mlm_oracle** out) {
  return guard([&] {
    need(out, "out");
    *out = new mlm_oracle{std::make_shared<UniformOracle>(T, K)};
  });
}

mlm_status mlm_oracle_chain(const mlm_matrix* q, int context_length, mlm_oracle** out) {
  return guard([&] {
    need(q, "matrix");
    need(out, "out");
    *out = new mlm_oracle{std::make_shared<ChainOracle>(q->m, context_length)};
  });
}

mlm_status mlm_oracle_tempered(const mlm_logits* source, double tau, mlm_oracle** out) {
  return guard([&] {
    need(source, "source");
    need(out, "out");
    *out = new mlm_oracle{std::make_shared<TemperedOracle>(source->s, tau)};
  });
}

mlm_status mlm_oracle_ngram_fit(const int* trajectory, size_t n, int T, int order,
                                double alpha, mlm_oracle** out) {
  return guard([&] {
    if (n) need(trajectory, "trajectory");
    need(out, "out");
    *out = new mlm_oracle{fit_ngram({trajectory, n}, T, order, alpha)};
  });
}

mlm_status mlm_oracle_remote(const mlm_remote_config* config, mlm_oracle** out) {
  return guard([&] {
    need(config, "config");
    need(config->endpoint, "endpoint");
    need(out, "out");
    RemoteOracleConfig c;
    c.endpoint = config->endpoint;
    for (size_t i = 0; i < config->alphabet_len; ++i) {
      need(config->alphabet, "alphabet");
      need(config->alphabet[i], "alphabet symbol");
      c.alphabet.emplace_back(config->alphabet[i]);
    }
    if (config->separator) c.separator = config->separator;
    if (config->timeout_ms > 0) c.timeout_ms = config->timeout_ms;
    if (config->max_in_flight > 0) c.max_in_flight = config->max_in_flight;
    if (config->context_length > 0) c.context_length = config->context_length;
    c.protocol = config->protocol == MLM_REMOTE_OPENAI ? RemoteProtocol::kOpenAi
                                                       : RemoteProtocol::kNative;
    if (config->model) c.model = config->model;
    if (config->top_logprobs > 0) c.top_logprobs = config->top_logprobs;
    *out = new mlm_oracle{std::make_shared<RemoteOracle>(std::move(c))};
  });
}

void mlm_oracle_free(mlm_oracle* o) { delete o; }
int mlm_oracle_vocab_size(const mlm_oracle* o) { return o ? o->o->vocab_size() : 0; }
int mlm_oracle_context_length(const mlm_oracle* o) {
  return o ? o->o->context_length() : 0;
}

mlm_status mlm_oracle_query(const mlm_oracle* o, const int* context, size_t len,
                            double* out, size_t cap) {
  return guard([&] {
    need(o, "oracle");
    need(context, "context");
    need(out, "out");
    fits(static_cast<size_t>(o->o->vocab_size()), cap, "mlm_oracle_query");
    const auto p = o->o->query({context, len});
    std::copy(p.begin(), p.end(), out);
  });
}

mlm_status mlm_logits_random(int T, int K, double scale, uint64_t seed, mlm_logits** out) {
  return guard([&] {
    need(out, "out");
    *out = new mlm_logits{
        std::make_shared<LogitTable>(LogitTable::random({T, K}, scale, seed))};
  });
}

void mlm_logits_free(mlm_logits* l) { delete l; }

/* chain builder */

mlm_status mlm_build_qf(const mlm_oracle* oracle, int T, int K, unsigned jobs,
                        mlm_matrix** out) {
  return guard([&] {
    need(oracle, "oracle");
    need(out, "out");
    *out = new mlm_matrix{build_qf(*oracle->o, {T, K}, jobs)};
  });
}

mlm_status mlm_validate_structure(const mlm_matrix* q, int T, int K,
                                  mlm_structure_report* out) {
  return guard([&] {
    need(q, "matrix");
    need(out, "out");
    const auto r = validate_structure(q->m, {T, K});
    *out = {r.n_states,
            r.nonzero_count,
            r.expected_nonzeros,
            r.nonzero_proportion.num,
            r.nonzero_proportion.den,
            r.row_sum_max_error,
            r.block_pattern_ok ? 1 : 0,
            r.support_exact ? 1 : 0,
            r.nilpotency_index ? *r.nilpotency_index : -1};
  });
}

mlm_status mlm_structure_report_json(const mlm_structure_report* r, char** out) {
  return guard([&] {
    need(r, "report");
    StructureReport s;
    s.n_states = r->n_states;
    s.nonzero_count = r->nonzero_count;
    s.expected_nonzeros = r->expected_nonzeros;
    s.nonzero_proportion = {r->proportion_num, r->proportion_den};
    s.row_sum_max_error = r->row_sum_max_error;
    s.block_pattern_ok = r->block_pattern_ok != 0;
    s.support_exact = r->support_exact != 0;
    if (r->nilpotency_index >= 0) s.nilpotency_index = r->nilpotency_index;
    emit(out, s.to_json());
  });
}

mlm_status mlm_recurrent_block(const mlm_matrix* q, size_t memory_cap, mlm_matrix** out) {
  return guard([&] {
    need(q, "matrix");
    need(out, "out");
    *out = new mlm_matrix{memory_cap ? recurrent_block(q->m, memory_cap)
                                     : recurrent_block(q->m)};
  });
}

/* spectral */

mlm_status mlm_stationary(const mlm_matrix* q, double tol, int64_t max_iter,
                          double* pi, size_t cap, mlm_stationary_info* info) {
  return guard([&] {
    need(q, "matrix");
    need(pi, "pi");
    fits(q->m.n(), cap, "mlm_stationary");
    const auto r = stationary(q->m, tol > 0 ? tol : 1e-12,
                              max_iter > 0 ? max_iter : 1000000);
    std::copy(r.pi.begin(), r.pi.end(), pi);
    if (info)
      *info = {r.iterations, r.residual, r.converged ? 1 : 0, r.periodic ? 1 : 0,
               r.period};
  });
}

mlm_status mlm_classify(const mlm_matrix* q, int* class_of, int* recurrent, size_t cap,
                        size_t* n_classes, size_t* n_recurrent_classes,
                        int* chain_period) {
  return guard([&] {
    need(q, "matrix");
    need(class_of, "class_of");
    fits(q->m.n(), cap, "mlm_classify");
    const auto c = classify_states(q->m);
    for (size_t i = 0; i < q->m.n(); ++i) {
      class_of[i] = c.class_of[i];
      if (recurrent) recurrent[i] = c.recurrent[c.class_of[i]] ? 1 : 0;
    }
    if (n_classes) *n_classes = c.classes.size();
    if (n_recurrent_classes) *n_recurrent_classes = c.recurrent_count();
    if (chain_period) *chain_period = c.chain_period();
  });
}

mlm_status mlm_epsilon(const mlm_matrix* q, int K, unsigned jobs, double* out) {
  return guard([&] {
    need(q, "matrix");
    need(out, "out");
    *out = epsilon_of(q->m, K, jobs);
  });
}

double mlm_envelope(double epsilon, int K, int64_t n) {
  return K >= 1 ? envelope(epsilon, K, n) : std::numeric_limits<double>::quiet_NaN();
}

mlm_status mlm_convergence_profile(const mlm_matrix* q, int K, int64_t n_max,
                                   unsigned jobs, double* empirical, double* bound,
                                   size_t cap, double* epsilon, int* vacuous,
                                   size_t* violations) {
  return guard([&] {
    need(q, "matrix");
    need(empirical, "empirical");
    need(bound, "bound");
    require(K >= 1 && n_max >= K, "convergence profile needs 1 <= K <= n_max");
    fits(static_cast<size_t>(n_max - K + 1), cap, "mlm_convergence_profile");
    const auto p = convergence_profile(q->m, K, n_max, jobs);
    for (size_t i = 0; i < p.points.size(); ++i) {
      empirical[i] = p.points[i].empirical;
      bound[i] = p.points[i].bound;
    }
    if (epsilon) *epsilon = p.epsilon;
    if (vacuous) *vacuous = p.vacuous ? 1 : 0;
    if (violations) *violations = p.violations;
  });
}

mlm_status mlm_mixing_time(const mlm_matrix* q, const double* pi, size_t n, double eps,
                           int64_t t_cap, unsigned jobs, int64_t* out) {
  return guard([&] {
    need(q, "matrix");
    need(pi, "pi");
    need(out, "out");
    *out = opt_steps(mixing_time(q->m, {pi, n}, eps, t_cap, jobs));
  });
}

mlm_status mlm_t_min(const mlm_matrix* q, const double* pi, size_t n,
                     const double* grid, size_t grid_len, int64_t t_cap, unsigned jobs,
                     double* value, double* argmin, int64_t* t_mix_table) {
  return guard([&] {
    need(q, "matrix");
    need(pi, "pi");
    need(value, "value");
    std::vector<double> g = grid ? std::vector<double>(grid, grid + grid_len)
                                 : default_tmin_grid();
    const auto r = t_min(q->m, {pi, n}, g, t_cap, jobs);
    *value = r.value;
    if (argmin)
      *argmin = r.argmin ? *r.argmin : std::numeric_limits<double>::quiet_NaN();
    if (t_mix_table)
      for (size_t i = 0; i < r.table.size(); ++i) t_mix_table[i] = opt_steps(r.table[i].t_mix);
  });
}

mlm_status mlm_temperature_sweep(const mlm_logits* source, int T, int K, const double* taus,
                                 size_t n_taus, double converge_tol, int64_t t_cap,
                                 unsigned jobs, double* epsilon, double* min_entry,
                                 int64_t* steps) {
  return guard([&] {
    need(source, "source");
    need(taus, "taus");
    const auto pts = temperature_sweep(source->s, {T, K}, {taus, n_taus},
                                       converge_tol, t_cap, jobs);
    for (size_t i = 0; i < pts.size(); ++i) {
      if (epsilon) epsilon[i] = pts[i].epsilon;
      if (min_entry) min_entry[i] = pts[i].min_oracle_entry;
      if (steps) steps[i] = opt_steps(pts[i].steps_to_converge);
    }
  });
}

/* estimation */

namespace {

Trajectory make_traj(const int* s, size_t n, size_t d) {
  need(s, "trajectory");
  Trajectory t;
  t.states.assign(s, s + n);
  t.d = static_cast<int>(d);
  return t;
}

}  // namespace

mlm_status mlm_sample_trajectory(const mlm_matrix* q, const double* start, size_t N,
                                 uint64_t seed, int* out) {
  return guard([&] {
    need(q, "matrix");
    need(out, "out");
    const size_t d = q->m.n();
    std::vector<double> s = start ? std::vector<double>(start, start + d)
                                  : std::vector<double>(d, 1.0 / static_cast<double>(d));
    const auto t = sample_trajectory(q->m, s, N, seed);
    std::copy(t.states.begin(), t.states.end(), out);
  });
}

mlm_status mlm_frequentist_estimate(const int* traj, size_t N, int d, mlm_matrix** out,
                                    int* unvisited) {
  return guard([&] {
    need(out, "out");
    const auto est = frequentist_estimate(make_traj(traj, N, static_cast<size_t>(d)), d);
    if (unvisited)
      for (int i = 0; i < d; ++i) unvisited[i] = est.unvisited[i] ? 1 : 0;
    *out = new mlm_matrix{est.q};
  });
}

mlm_status mlm_tv_risk(const mlm_matrix* q_true, const mlm_oracle* predictor,
                       const int* traj, size_t N, unsigned jobs, double* out) {
  return guard([&] {
    need(q_true, "q_true");
    need(predictor, "predictor");
    need(out, "out");
    *out = tv_risk(q_true->m, *predictor->o, make_traj(traj, N, q_true->m.n()), jobs);
  });
}

mlm_status mlm_kl_risk(const mlm_matrix* q_true, const mlm_oracle* predictor,
                       const int* traj, size_t N, unsigned jobs, double* out) {
  return guard([&] {
    need(q_true, "q_true");
    need(predictor, "predictor");
    need(out, "out");
    *out = kl_risk(q_true->m, *predictor->o, make_traj(traj, N, q_true->m.n()), jobs);
  });
}

mlm_status mlm_theoretical_tv_risk(const mlm_matrix* q_true, const mlm_matrix* predictor,
                                   const double* start, size_t N, double* out) {
  return guard([&] {
    need(q_true, "q_true");
    need(predictor, "predictor");
    need(out, "out");
    const size_t d = q_true->m.n();
    std::vector<double> s = start ? std::vector<double>(start, start + d)
                                  : std::vector<double>(d, 1.0 / static_cast<double>(d));
    *out = theoretical_tv_risk(q_true->m, predictor->m, s, N);
  });
}

mlm_status mlm_oracle_divergence(const mlm_oracle* a, const mlm_oracle* b,
                                 const int* trajs, const size_t* lengths, size_t n_trajs,
                                 unsigned jobs, double* out) {
  return guard([&] {
    need(a, "a");
    need(b, "b");
    need(lengths, "lengths");
    need(out, "out");
    std::vector<Trajectory> ts;
    size_t off = 0;
    for (size_t i = 0; i < n_trajs; ++i) {
      ts.push_back(make_traj(trajs + off, lengths[i],
                             static_cast<size_t>(a->o->vocab_size())));
      off += lengths[i];
    }
    *out = oracle_divergence(*a->o, *b->o, ts, jobs);
  });
}

mlm_status mlm_risk_curve_run(const mlm_matrix* q_true, const mlm_predictor* predictor,
                              const size_t* N_list, size_t n_N, size_t reps,
                              uint64_t seed, mlm_metric metric, const double* start,
                              unsigned jobs, mlm_risk_curve** out) {
  return guard([&] {
    need(q_true, "q_true");
    need(predictor, "predictor");
    need(N_list, "N_list");
    need(out, "out");
    const int d = static_cast<int>(q_true->m.n());
    Predictor p;
    switch (predictor->kind) {
      case MLM_PREDICTOR_FIXED:
        need(predictor->oracle, "predictor oracle");
        p = fixed_predictor(predictor->oracle->o,
                            predictor->id ? predictor->id : predictor->oracle->o->kind());
        break;
      case MLM_PREDICTOR_FREQUENTIST:
        p = frequentist_predictor(d);
        break;
      case MLM_PREDICTOR_NGRAM:
        p = ngram_predictor(d, predictor->order, predictor->alpha);
        break;
      default:
        fail(ErrorCode::kInvalidArgument, "unknown predictor kind");
    }
    RiskCurveOptions opt;
    opt.metric = metric == MLM_METRIC_KL ? RiskMetric::kKl : RiskMetric::kTv;
    opt.reps = reps;
    opt.seed = seed;
    opt.start = opt_vector(start, q_true->m.n());
    opt.jobs = jobs;
    *out = new mlm_risk_curve{
        icl_risk_curve(q_true->m, p, std::vector<size_t>(N_list, N_list + n_N), opt)};
  });
}

void mlm_risk_curve_free(mlm_risk_curve* c) { delete c; }
size_t mlm_risk_curve_rows(const mlm_risk_curve* c) { return c ? c->c.rows.size() : 0; }

mlm_status mlm_risk_curve_row(const mlm_risk_curve* c, size_t i, size_t* N, double* mean,
                              double* lo, double* hi, size_t* reps, int* infinite) {
  return guard([&] {
    need(c, "curve");
    require(i < c->c.rows.size(), "risk curve row out of range");
    const auto& r = c->c.rows[i];
    if (N) *N = r.N;
    if (mean) *mean = r.mean;
    if (lo) *lo = r.lo;
    if (hi) *hi = r.hi;
    if (reps) *reps = r.reps;
    if (infinite) *infinite = r.infinite ? 1 : 0;
  });
}

mlm_status mlm_risk_curve_csv(const mlm_risk_curve* c, char** out) {
  return guard([&] {
    need(c, "curve");
    emit(out, c->c.to_csv());
  });
}

namespace {

mlm_power_fit to_c(const PowerLawFit& f) {
  return {f.slope, f.intercept, f.slope_stderr, f.r2, f.n_points};
}

}  // namespace

mlm_status mlm_risk_curve_fit(const mlm_risk_curve* c, mlm_power_fit* out) {
  return guard([&] {
    need(c, "curve");
    need(out, "out");
    *out = to_c(fit_power_law(c->c));
  });
}

mlm_status mlm_fit_power_law(const double* x, const double* y, size_t n,
                             mlm_power_fit* out) {
  return guard([&] {
    need(x, "x");
    need(y, "y");
    need(out, "out");
    *out = to_c(fit_power_law(std::span<const double>(x, n), std::span<const double>(y, n)));
  });
}

mlm_status mlm_power_fit_json(const mlm_power_fit* f, char** out) {
  return guard([&] {
    need(f, "fit");
    PowerLawFit p;
    p.slope = f->slope;
    p.intercept = f->intercept;
    p.slope_stderr = f->stderr_slope;
    p.r2 = f->r2;
    p.n_points = f->n_points;
    emit(out, p.to_json());
  });
}

/* bounds */

namespace {

PretrainBoundParams pretrain_from_c(const mlm_pretrain_params& p) {
  return {p.T, p.B_U, p.tau, p.c0, p.gamma_norm, p.delta, p.N_train};
}

IclBoundParams icl_from_c(const mlm_icl_params& p) {
  return {p.d, p.B_U, p.tau, p.p_min, p.delta, p.N_icl, p.t_min};
}

}  // namespace

mlm_status mlm_bbar_pretrain(const mlm_pretrain_params* p, double* out) {
  return guard([&] {
    need(p, "params");
    need(out, "out");
    *out = bbar_pretrain(pretrain_from_c(*p));
  });
}

mlm_status mlm_bbar_pretrain_kl(const mlm_pretrain_params* p, double* out) {
  return guard([&] {
    need(p, "params");
    need(out, "out");
    *out = bbar_pretrain_kl(pretrain_from_c(*p));
  });
}

mlm_status mlm_generalization_gap(double bbar, double N, double delta, double t_min,
                                  double* out) {
  return guard([&] {
    need(out, "out");
    *out = generalization_gap(bbar, N, delta, t_min);
  });
}

mlm_status mlm_bbar_icl(const mlm_icl_params* p, double* out) {
  return guard([&] {
    need(p, "params");
    need(out, "out");
    *out = bbar_icl(icl_from_c(*p));
  });
}

mlm_status mlm_icl_gap(const mlm_icl_params* p, double* out) {
  return guard([&] {
    need(p, "params");
    need(out, "out");
    *out = icl_gap_term(icl_from_c(*p));
  });
}

mlm_status mlm_bbar_depth(const mlm_depth_params* p, double* b_theta, double* bbar,
                          int* h_warning) {
  return guard([&] {
    need(p, "params");
    DepthBoundParams d;
    d.L = p->L;
    d.H = p->H;
    d.r = p->r;
    d.m = p->m;
    d.B_1 = p->B_1;
    d.B_2 = p->B_2;
    d.B_O = p->B_O;
    d.B_V = p->B_V;
    d.B_tok = p->B_tok;
    d.B_U = p->B_U;
    d.T = p->T;
    d.tau = p->tau;
    d.c0 = p->c0;
    d.gamma_norm = p->gamma_norm;
    d.delta = p->delta;
    const auto r = bbar_depth(d);
    if (b_theta) *b_theta = r.b_theta;
    if (bbar) *bbar = r.bbar;
    if (h_warning) *h_warning = r.warnings.empty() ? 0 : 1;
  });
}

mlm_status mlm_sample_complexity(double bbar, double eps, double delta, uint64_t* out) {
  return guard([&] {
    need(out, "out");
    *out = sample_complexity(bbar, eps, delta);
  });
}

size_t mlm_model_card_count(void) { return builtin_model_cards().size(); }

mlm_status mlm_model_card(size_t i, const char** name, const char** family,
                          double* N_train, double* T, double* r) {
  return guard([&] {
    const auto& cards = builtin_model_cards();
    require(i < cards.size(), "model card index out of range");
    if (name) *name = cards[i].name.c_str();
    if (family) *family = cards[i].family.c_str();
    if (N_train) *N_train = cards[i].N_train;
    if (T) *T = cards[i].T;
    if (r) *r = cards[i].r;
  });
}

mlm_status mlm_epsilon_predictor_csv(const char* cards_csv, double tau, double delta,
                                     char** out) {
  return guard([&] {
    const auto cards = cards_csv ? parse_model_cards(cards_csv) : builtin_model_cards();
    emit(out, predictor_csv(epsilon_predictor(cards, tau, delta)));
  });
}

mlm_status mlm_mcdiarmid_tail(double gamma_norm, const double* c, size_t n, double u,
                              double* out) {
  return guard([&] {
    need(c, "c");
    need(out, "out");
    *out = mcdiarmid_tail(gamma_norm, std::vector<double>(c, c + n), u);
  });
}

mlm_status mlm_mcdiarmid_tail_chain(const double* c, size_t n, double u, double t_min,
                                    double* out) {
  return guard([&] {
    need(c, "c");
    need(out, "out");
    *out = mcdiarmid_tail_chain(std::vector<double>(c, c + n), u, t_min);
  });
}

mlm_status mlm_mc_verify_iid_mean(size_t n, double p, size_t n_samples,
                                  const double* u_grid, size_t n_u, uint64_t seed,
                                  unsigned jobs, mlm_mc_row* rows) {
  return guard([&] {
    need(u_grid, "u_grid");
    need(rows, "rows");
    require(n >= 1, "mc_verify: n must be >= 1");
    require(p >= 0.0 && p <= 1.0, "mc_verify: p must lie in [0, 1]");
    McVerifyConfig cfg;
    cfg.c.assign(n, 1.0 / static_cast<double>(n));
    cfg.u_grid.assign(u_grid, u_grid + n_u);
    cfg.n_samples = n_samples;
    cfg.seed = seed;
    cfg.has_expectation = true;
    cfg.expectation = p;
    cfg.jobs = jobs;
    const uint64_t threshold =
        p >= 1.0 ? ~uint64_t{0} : static_cast<uint64_t>(p * 0x1.0p64);
    const auto rep = mc_verify(
        [&](std::mt19937_64& rng) {
          size_t hits = 0;
          for (size_t i = 0; i < n; ++i) hits += rng() < threshold ? 1 : 0;
          return static_cast<double>(hits) / static_cast<double>(n);
        },
        cfg);
    copy_rows(rep, rows);
  });
}

mlm_status mlm_mc_verify_chain_mean(const mlm_matrix* q, size_t n, double t_min,
                                    size_t n_samples, const double* u_grid, size_t n_u,
                                    uint64_t seed, unsigned jobs, mlm_mc_row* rows) {
  return guard([&] {
    need(q, "matrix");
    need(u_grid, "u_grid");
    need(rows, "rows");
    require(n >= 1, "mc_verify: n must be >= 1");
    const size_t d = q->m.n();
    require(d >= 2, "mc_verify: chain needs at least 2 states");
    const auto st = stationary(q->m);
    double expect = 0.0;
    for (size_t x = 0; x < d; ++x)
      expect += st.pi[x] * static_cast<double>(x) / static_cast<double>(d - 1);
    McVerifyConfig cfg;
    cfg.c.assign(n, 1.0 / static_cast<double>(n));
    cfg.u_grid.assign(u_grid, u_grid + n_u);
    cfg.n_samples = n_samples;
    cfg.seed = seed;
    cfg.t_min = t_min;
    cfg.has_expectation = true;
    cfg.expectation = expect;
    cfg.jobs = jobs;
    const auto& m = q->m;
    const auto rep = mc_verify(
        [&](std::mt19937_64& rng) {
          const auto t = sample_trajectory(m, st.pi, n, rng());
          double s = 0.0;
          for (int x : t.states) s += static_cast<double>(x) / static_cast<double>(d - 1);
          return s / static_cast<double>(n);
        },
        cfg);
    copy_rows(rep, rows);
  });
}

mlm_status mlm_lemma_checks(const double* P, const double* Q, size_t n,
                            mlm_lemma_report* out) {
  return guard([&] {
    need(P, "P");
    need(Q, "Q");
    need(out, "out");
    const auto r = lemma_checks(std::vector<double>(P, P + n), std::vector<double>(Q, Q + n));
    *out = {r.B, r.tv, r.kl, r.hellinger2, r.tv_ok ? 1 : 0, r.kl_ok ? 1 : 0,
            r.hellinger_ok ? 1 : 0};
  });
}

mlm_status mlm_softmax_bound_holds(const double* logits, size_t n, int* out) {
  return guard([&] {
    need(logits, "logits");
    need(out, "out");
    *out = softmax_bound_holds(std::vector<double>(logits, logits + n)) ? 1 : 0;
  });
}

/* toy model */

namespace {

ToyModelConfig toy_from_c(const mlm_toy_config* c) {
  ToyModelConfig t;
  if (c) {
    t.context_length = c->context_length;
    t.embedding_dim = c->embedding_dim;
    t.learning_rate = c->learning_rate;
    t.epochs = c->epochs;
    t.seed = c->seed;
    t.temperature = c->temperature;
  }
  return t;
}

}  // namespace

mlm_toy_config mlm_toy_defaults(void) {
  const ToyModelConfig t;
  return {t.context_length, t.embedding_dim, t.learning_rate, t.epochs, t.seed,
          t.temperature};
}

mlm_status mlm_parity_sequence(size_t length, const int* prefix, size_t prefix_len,
                               int* out) {
  return guard([&] {
    need(prefix, "prefix");
    need(out, "out");
    const auto s = parity_sequence(length, std::vector<int>(prefix, prefix + prefix_len));
    std::copy(s.begin(), s.end(), out);
  });
}

mlm_status mlm_toy_train_sequence(const int* seq, size_t n, int vocab_size,
                                  const mlm_toy_config* cfg, mlm_toy** out,
                                  size_t* n_examples) {
  return guard([&] {
    need(seq, "seq");
    need(out, "out");
    const auto c = toy_from_c(cfg);
    const auto examples = sliding_examples({seq, n}, c.context_length);
    if (n_examples) *n_examples = examples.size();
    auto model = std::make_shared<ToyModel>(vocab_size, c);
    model->train(examples);
    *out = new mlm_toy{std::move(model)};
  });
}

mlm_status mlm_toy_train_parity_table(const mlm_toy_config* cfg, mlm_toy** out,
                                      size_t* n_examples) {
  return guard([&] {
    need(out, "out");
    const auto c = toy_from_c(cfg);
    const auto examples = parity_truth_table(c.context_length);
    if (n_examples) *n_examples = examples.size();
    auto model = std::make_shared<ToyModel>(2, c);
    model->train(examples);
    *out = new mlm_toy{std::move(model)};
  });
}

mlm_status mlm_toy_from_json(const char* json, mlm_toy** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    *out = new mlm_toy{ToyModel::from_json(json)};
  });
}

mlm_status mlm_toy_to_json(const mlm_toy* t, char** out) {
  return guard([&] {
    need(t, "toy");
    emit(out, t->model->to_json());
  });
}

mlm_status mlm_toy_losses(const mlm_toy* t, double* out, size_t cap, size_t* n) {
  return guard([&] {
    need(t, "toy");
    const auto& l = t->model->epoch_losses();
    if (n) *n = l.size();
    if (out) {
      fits(l.size(), cap, "mlm_toy_losses");
      std::copy(l.begin(), l.end(), out);
    }
  });
}

mlm_status mlm_toy_oracle(const mlm_toy* t, double tau, mlm_oracle** out) {
  return guard([&] {
    need(t, "toy");
    need(out, "out");
    *out = new mlm_oracle{std::make_shared<TemperedOracle>(t->model, tau)};
  });
}

mlm_status mlm_toy_logits(const mlm_toy* t, mlm_logits** out) {
  return guard([&] {
    need(t, "toy");
    need(out, "out");
    *out = new mlm_logits{t->model};
  });
}

void mlm_toy_free(mlm_toy* t) { delete t; }

/* mock server */

mlm_status mlm_mock_server_create(const mlm_matrix* model, const char* const* alphabet,
                                  size_t alphabet_len, const char* separator,
                                  double separator_mass, int top_k,
                                  mlm_mock_server** out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    MockServerConfig c;
    if (alphabet)
      for (size_t i = 0; i < alphabet_len; ++i) c.alphabet.emplace_back(alphabet[i]);
    if (separator) c.separator = separator;
    c.separator_mass = separator_mass;
    c.top_k = top_k;
    *out = new mlm_mock_server{std::make_unique<MockOracleServer>(model->m, c)};
  });
}

mlm_status mlm_mock_server_start(mlm_mock_server* s, const char* host, int port,
                                 int* bound_port) {
  return guard([&] {
    need(s, "server");
    const int p = s->server->start(host ? host : "127.0.0.1", port);
    if (bound_port) *bound_port = p;
  });
}

mlm_status mlm_mock_server_run(mlm_mock_server* s, const char* host, int port) {
  return guard([&] {
    need(s, "server");
    s->server->serve_forever(host ? host : "127.0.0.1", port);
  });
}

void mlm_mock_server_stop(mlm_mock_server* s) {
  if (s) s->server->stop();
}

size_t mlm_mock_server_requests(const mlm_mock_server* s) {
  return s ? s->server->requests_served() : 0;
}

void mlm_mock_server_free(mlm_mock_server* s) { delete s; }

}  // extern "C"
