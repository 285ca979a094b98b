/* markovlm C API.
 *
 * Every function that can fail returns an mlm_status; on failure the
 * message is available from mlm_last_error() on the same thread until the
 * next failing call. Handles are opaque and owned by the caller, who
 * releases them with the matching *_free function. Strings returned through
 * char** are heap-allocated and released with mlm_free_string. Output arrays
 * are caller-allocated; sizes are given by the documented counts and every
 * such call takes the capacity so short buffers fail with MLM_ERR_BUFFER.
 */
#ifndef MARKOVLM_H_
#define MARKOVLM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MLM_API __declspec(dllexport)
#else
#define MLM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mlm_status {
  MLM_OK = 0,
  MLM_ERR_INVALID_ARGUMENT = 1,
  MLM_ERR_SIZE_LIMIT = 2,
  MLM_ERR_ORACLE = 3,
  MLM_ERR_NORMALIZATION = 4,
  MLM_ERR_TRAINING = 5,
  MLM_ERR_TRANSPORT = 6,
  MLM_ERR_PROTOCOL = 7,
  MLM_ERR_UNDEFINED = 8,
  MLM_ERR_IO = 9,
  MLM_ERR_BUFFER = 10,
  MLM_ERR_INTERNAL = 11
} mlm_status;

MLM_API const char* mlm_version(void);
MLM_API const char* mlm_last_error(void);
MLM_API const char* mlm_status_name(mlm_status status);
MLM_API void mlm_free_string(char* s);

typedef struct mlm_matrix mlm_matrix;
typedef struct mlm_oracle mlm_oracle;
typedef struct mlm_logits mlm_logits;
typedef struct mlm_toy mlm_toy;
typedef struct mlm_risk_curve mlm_risk_curve;
typedef struct mlm_mock_server mlm_mock_server;

/* ---- state space ------------------------------------------------------ */

/* T (T^K - 1) / (T - 1); MLM_ERR_SIZE_LIMIT when T^K > 2^24. */
MLM_API mlm_status mlm_state_count(int T, int K, uint64_t* out);
MLM_API mlm_status mlm_state_index(int T, int K, const int* tokens, size_t len,
                                   size_t* out);
/* Writes the tokens of state `index` into tokens[0..*len). */
MLM_API mlm_status mlm_state_at(int T, int K, size_t index, int* tokens,
                                size_t cap, size_t* len);
MLM_API mlm_status mlm_is_incompatible(int T, int K, const int* u, size_t ulen,
                                       const int* v, size_t vlen, int* out);

/* ---- matrices ---------------------------------------------------------- */

/* `rows` is n*n row-major. */
MLM_API mlm_status mlm_matrix_from_dense(const double* rows, size_t n,
                                         mlm_matrix** out);
MLM_API mlm_status mlm_matrix_from_json(const char* json, mlm_matrix** out);
MLM_API void mlm_matrix_free(mlm_matrix* m);
MLM_API size_t mlm_matrix_size(const mlm_matrix* m);
MLM_API size_t mlm_matrix_nonzeros(const mlm_matrix* m);
MLM_API mlm_status mlm_matrix_dense(const mlm_matrix* m, double* out,
                                    size_t cap);
MLM_API mlm_status mlm_matrix_to_json(const mlm_matrix* m, char** out);
MLM_API mlm_status mlm_matrix_to_csv(const mlm_matrix* m, char** out);
MLM_API mlm_status mlm_matrix_label(const mlm_matrix* m, char** out);

/* ---- generators -------------------------------------------------------- */

MLM_API mlm_status mlm_random_chain(int d, double p_min, uint64_t seed,
                                    mlm_matrix** out);
MLM_API mlm_status mlm_constrained_walk(int d, mlm_matrix** out);
MLM_API mlm_status mlm_polygonal_walk(int d, mlm_matrix** out);
MLM_API mlm_status mlm_clique_rim(int d, double eta, const int* tau,
                                  size_t tau_len, double eps_rim,
                                  mlm_matrix** out);

typedef struct mlm_process_params {
  double mu;
  double sigma;
  double rho;
  double x0;
  double dt;
} mlm_process_params;

MLM_API mlm_process_params mlm_process_defaults(void);
/* kind: gbm, correlated_gaussian, uncorrelated_gaussian,
 * uncorrelated_uniform, brownian. `out` holds n values. */
MLM_API mlm_status mlm_simulate_process(const char* kind,
                                        const mlm_process_params* params,
                                        size_t n, uint64_t seed, double* out);
MLM_API mlm_status mlm_discretize(const double* series, size_t n, int d,
                                  int* out);

/* ---- oracles ----------------------------------------------------------- */

MLM_API mlm_status mlm_oracle_uniform(int T, int K, mlm_oracle** out);
/* Next-state law of the last token under a d-state chain. */
MLM_API mlm_status mlm_oracle_chain(const mlm_matrix* q, int context_length,
                                    mlm_oracle** out);
MLM_API mlm_status mlm_oracle_tempered(const mlm_logits* source, double tau,
                                       mlm_oracle** out);
MLM_API mlm_status mlm_oracle_ngram_fit(const int* trajectory, size_t n, int T,
                                        int order, double alpha,
                                        mlm_oracle** out);

typedef enum mlm_remote_protocol {
  MLM_REMOTE_NATIVE = 0,
  MLM_REMOTE_OPENAI = 1
} mlm_remote_protocol;

typedef struct mlm_remote_config {
  const char* endpoint;
  const char* const* alphabet;
  size_t alphabet_len;
  const char* separator;   /* NULL: "," */
  int timeout_ms;          /* <= 0: 5000 */
  int max_in_flight;       /* <= 0: 4 */
  int context_length;      /* <= 0: 4096 */
  mlm_remote_protocol protocol;
  const char* model;       /* may be NULL */
  int top_logprobs;        /* <= 0: 20 */
} mlm_remote_config;

MLM_API mlm_status mlm_oracle_remote(const mlm_remote_config* config,
                                     mlm_oracle** out);
MLM_API void mlm_oracle_free(mlm_oracle* o);
MLM_API int mlm_oracle_vocab_size(const mlm_oracle* o);
MLM_API int mlm_oracle_context_length(const mlm_oracle* o);
/* out receives vocab_size probabilities. */
MLM_API mlm_status mlm_oracle_query(const mlm_oracle* o, const int* context,
                                    size_t len, double* out, size_t cap);

MLM_API mlm_status mlm_logits_random(int T, int K, double scale, uint64_t seed,
                                     mlm_logits** out);
MLM_API void mlm_logits_free(mlm_logits* l);

/* ---- chain builder ----------------------------------------------------- */

MLM_API mlm_status mlm_build_qf(const mlm_oracle* oracle, int T, int K,
                                unsigned jobs, mlm_matrix** out);

typedef struct mlm_structure_report {
  size_t n_states;
  size_t nonzero_count;
  size_t expected_nonzeros;
  uint64_t proportion_num;
  uint64_t proportion_den;
  double row_sum_max_error;
  int block_pattern_ok;
  int support_exact;
  int nilpotency_index; /* -1: P_T^K != 0 */
} mlm_structure_report;

MLM_API mlm_status mlm_validate_structure(const mlm_matrix* q, int T, int K,
                                          mlm_structure_report* out);
MLM_API mlm_status mlm_structure_report_json(const mlm_structure_report* r,
                                             char** out);
MLM_API mlm_status mlm_recurrent_block(const mlm_matrix* q, size_t memory_cap,
                                       mlm_matrix** out);

/* ---- spectral analysis ------------------------------------------------- */

typedef struct mlm_stationary_info {
  int64_t iterations;
  double residual;
  int converged;
  int periodic;
  int period;
} mlm_stationary_info;

/* pi receives n entries. */
MLM_API mlm_status mlm_stationary(const mlm_matrix* q, double tol,
                                  int64_t max_iter, double* pi, size_t cap,
                                  mlm_stationary_info* info);
/* class_of and recurrent receive n entries each (recurrent may be NULL). */
MLM_API mlm_status mlm_classify(const mlm_matrix* q, int* class_of,
                                int* recurrent, size_t cap, size_t* n_classes,
                                size_t* n_recurrent_classes, int* chain_period);
MLM_API mlm_status mlm_epsilon(const mlm_matrix* q, int K, unsigned jobs,
                               double* out);
MLM_API double mlm_envelope(double epsilon, int K, int64_t n);
/* empirical and bound receive n_max - K + 1 entries for n = K..n_max. */
MLM_API mlm_status mlm_convergence_profile(const mlm_matrix* q, int K,
                                           int64_t n_max, unsigned jobs,
                                           double* empirical, double* bound,
                                           size_t cap, double* epsilon,
                                           int* vacuous, size_t* violations);
/* -1 stands for +inf. */
MLM_API mlm_status mlm_mixing_time(const mlm_matrix* q, const double* pi,
                                   size_t n, double eps, int64_t t_cap,
                                   unsigned jobs, int64_t* out);
/* t_mix_table receives grid_len entries (t_mix at eps/2, -1 for +inf);
 * value is +inf and argmin NaN when every t_mix is infinite. */
MLM_API mlm_status mlm_t_min(const mlm_matrix* q, const double* pi, size_t n,
                             const double* grid, size_t grid_len,
                             int64_t t_cap, unsigned jobs, double* value,
                             double* argmin, int64_t* t_mix_table);
/* Each output receives n_taus entries; steps is -1 when the cap is hit. */
MLM_API mlm_status mlm_temperature_sweep(const mlm_logits* source, int T, int K,
                                         const double* taus, size_t n_taus,
                                         double converge_tol, int64_t t_cap,
                                         unsigned jobs, double* epsilon,
                                         double* min_entry, int64_t* steps);

/* ---- estimation -------------------------------------------------------- */

/* start may be NULL (uniform). out receives N states. */
MLM_API mlm_status mlm_sample_trajectory(const mlm_matrix* q,
                                         const double* start, size_t N,
                                         uint64_t seed, int* out);
/* unvisited may be NULL; else receives d flags. */
MLM_API mlm_status mlm_frequentist_estimate(const int* traj, size_t N, int d,
                                           mlm_matrix** out, int* unvisited);
MLM_API mlm_status mlm_tv_risk(const mlm_matrix* q_true,
                               const mlm_oracle* predictor, const int* traj,
                               size_t N, unsigned jobs, double* out);
MLM_API mlm_status mlm_kl_risk(const mlm_matrix* q_true,
                               const mlm_oracle* predictor, const int* traj,
                               size_t N, unsigned jobs, double* out);
MLM_API mlm_status mlm_theoretical_tv_risk(const mlm_matrix* q_true,
                                           const mlm_matrix* predictor,
                                           const double* start, size_t N,
                                           double* out);
/* `trajs` concatenates n_trajs trajectories with the given lengths. */
MLM_API mlm_status mlm_oracle_divergence(const mlm_oracle* a,
                                         const mlm_oracle* b, const int* trajs,
                                         const size_t* lengths, size_t n_trajs,
                                         unsigned jobs, double* out);

typedef enum mlm_predictor_kind {
  MLM_PREDICTOR_FIXED = 0,       /* oracle queried as-is */
  MLM_PREDICTOR_FREQUENTIST = 1, /* refit on every trajectory */
  MLM_PREDICTOR_NGRAM = 2        /* refit on every trajectory */
} mlm_predictor_kind;

typedef struct mlm_predictor {
  mlm_predictor_kind kind;
  const mlm_oracle* oracle; /* FIXED */
  const char* id;           /* FIXED; NULL: oracle kind */
  int order;                /* NGRAM */
  double alpha;             /* NGRAM */
} mlm_predictor;

typedef enum mlm_metric { MLM_METRIC_TV = 0, MLM_METRIC_KL = 1 } mlm_metric;

MLM_API mlm_status mlm_risk_curve_run(const mlm_matrix* q_true,
                                      const mlm_predictor* predictor,
                                      const size_t* N_list, size_t n_N,
                                      size_t reps, uint64_t seed,
                                      mlm_metric metric, const double* start,
                                      unsigned jobs, mlm_risk_curve** out);
MLM_API void mlm_risk_curve_free(mlm_risk_curve* c);
MLM_API size_t mlm_risk_curve_rows(const mlm_risk_curve* c);
MLM_API mlm_status mlm_risk_curve_row(const mlm_risk_curve* c, size_t i,
                                      size_t* N, double* mean, double* lo,
                                      double* hi, size_t* reps, int* infinite);
MLM_API mlm_status mlm_risk_curve_csv(const mlm_risk_curve* c, char** out);

typedef struct mlm_power_fit {
  double slope;
  double intercept;
  double stderr_slope;
  double r2;
  size_t n_points;
} mlm_power_fit;

MLM_API mlm_status mlm_risk_curve_fit(const mlm_risk_curve* c,
                                      mlm_power_fit* out);
MLM_API mlm_status mlm_fit_power_law(const double* x, const double* y,
                                     size_t n, mlm_power_fit* out);
MLM_API mlm_status mlm_power_fit_json(const mlm_power_fit* f, char** out);

/* ---- bounds ------------------------------------------------------------ */

typedef struct mlm_pretrain_params {
  double T, B_U, tau, c0, gamma_norm, delta, N_train;
} mlm_pretrain_params;

typedef struct mlm_icl_params {
  double d, B_U, tau, p_min, delta, N_icl, t_min;
} mlm_icl_params;

typedef struct mlm_depth_params {
  int L, H, r, m;
  double B_1, B_2, B_O, B_V, B_tok, B_U;
  double T, tau, c0, gamma_norm, delta;
} mlm_depth_params;

MLM_API mlm_status mlm_bbar_pretrain(const mlm_pretrain_params* p, double* out);
MLM_API mlm_status mlm_bbar_pretrain_kl(const mlm_pretrain_params* p,
                                       double* out);
MLM_API mlm_status mlm_generalization_gap(double bbar, double N, double delta,
                                          double t_min, double* out);
MLM_API mlm_status mlm_bbar_icl(const mlm_icl_params* p, double* out);
/* MLM_ERR_UNDEFINED when t_min is +inf. */
MLM_API mlm_status mlm_icl_gap(const mlm_icl_params* p, double* out);
/* h_warning is set when H does not divide r. */
MLM_API mlm_status mlm_bbar_depth(const mlm_depth_params* p, double* b_theta,
                                  double* bbar, int* h_warning);
MLM_API mlm_status mlm_sample_complexity(double bbar, double eps, double delta,
                                         uint64_t* out);

MLM_API size_t mlm_model_card_count(void);
MLM_API mlm_status mlm_model_card(size_t i, const char** name,
                                  const char** family, double* N_train,
                                  double* T, double* r);
/* cards_csv NULL selects the built-in table. Writes the predictor CSV
 * (name,N_train,T,r,bbar,epsilon). */
MLM_API mlm_status mlm_epsilon_predictor_csv(const char* cards_csv, double tau,
                                             double delta, char** out);

MLM_API mlm_status mlm_mcdiarmid_tail(double gamma_norm, const double* c,
                                      size_t n, double u, double* out);
MLM_API mlm_status mlm_mcdiarmid_tail_chain(const double* c, size_t n,
                                            double u, double t_min,
                                            double* out);

typedef struct mlm_mc_row {
  double u;
  double empirical;
  double tail;
  double stderr_emp;
  int ok;
} mlm_mc_row;

/* Mean of n Bernoulli(p) draws; c_i = 1/n, Gamma = 1. rows receives n_u. */
MLM_API mlm_status mlm_mc_verify_iid_mean(size_t n, double p, size_t n_samples,
                                          const double* u_grid, size_t n_u,
                                          uint64_t seed, unsigned jobs,
                                          mlm_mc_row* rows);
/* Mean of x / (d - 1) over n steps of q started from its stationary law;
 * c_i = 1/n and the chain tail uses t_min. */
MLM_API mlm_status mlm_mc_verify_chain_mean(const mlm_matrix* q, size_t n,
                                            double t_min, size_t n_samples,
                                            const double* u_grid, size_t n_u,
                                            uint64_t seed, unsigned jobs,
                                            mlm_mc_row* rows);

typedef struct mlm_lemma_report {
  double B, tv, kl, hellinger2;
  int tv_ok, kl_ok, hellinger_ok;
} mlm_lemma_report;

MLM_API mlm_status mlm_lemma_checks(const double* P, const double* Q, size_t n,
                                    mlm_lemma_report* out);
MLM_API mlm_status mlm_softmax_bound_holds(const double* logits, size_t n,
                                           int* out);

/* ---- toy model --------------------------------------------------------- */

typedef struct mlm_toy_config {
  int context_length;
  int embedding_dim;
  double learning_rate;
  int epochs;
  uint64_t seed;
  double temperature;
} mlm_toy_config;

MLM_API mlm_toy_config mlm_toy_defaults(void);
/* Bits where each token after `prefix` is the parity of the previous
 * prefix_len tokens. out receives `length` entries. */
MLM_API mlm_status mlm_parity_sequence(size_t length, const int* prefix,
                                       size_t prefix_len, int* out);
/* Trains on the sliding windows of `seq` (window = context_length). */
MLM_API mlm_status mlm_toy_train_sequence(const int* seq, size_t n,
                                          int vocab_size,
                                          const mlm_toy_config* cfg,
                                          mlm_toy** out, size_t* n_examples);
/* Trains on every binary context of length context_length labelled with
 * its parity. */
MLM_API mlm_status mlm_toy_train_parity_table(const mlm_toy_config* cfg,
                                              mlm_toy** out,
                                              size_t* n_examples);
MLM_API mlm_status mlm_toy_from_json(const char* json, mlm_toy** out);
MLM_API mlm_status mlm_toy_to_json(const mlm_toy* t, char** out);
MLM_API mlm_status mlm_toy_losses(const mlm_toy* t, double* out, size_t cap,
                                  size_t* n);
MLM_API mlm_status mlm_toy_oracle(const mlm_toy* t, double tau,
                                  mlm_oracle** out);
MLM_API mlm_status mlm_toy_logits(const mlm_toy* t, mlm_logits** out);
MLM_API void mlm_toy_free(mlm_toy* t);

/* ---- mock oracle server ------------------------------------------------ */

/* alphabet may be NULL (states "0".."d-1"). */
MLM_API mlm_status mlm_mock_server_create(const mlm_matrix* model,
                                          const char* const* alphabet,
                                          size_t alphabet_len,
                                          const char* separator,
                                          double separator_mass, int top_k,
                                          mlm_mock_server** out);
/* Serves on a background thread; port 0 picks a free port. */
MLM_API mlm_status mlm_mock_server_start(mlm_mock_server* s, const char* host,
                                         int port, int* bound_port);
/* Blocks until the server stops. */
MLM_API mlm_status mlm_mock_server_run(mlm_mock_server* s, const char* host,
                                       int port);
MLM_API void mlm_mock_server_stop(mlm_mock_server* s);
MLM_API size_t mlm_mock_server_requests(const mlm_mock_server* s);
MLM_API void mlm_mock_server_free(mlm_mock_server* s);

#ifdef __cplusplus
}
#endif

#endif /* MARKOVLM_H_ */
