#ifndef GENFT_GENFT_H
#define GENFT_GENFT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define GENFT_API __attribute__((visibility("default")))
#else
#define GENFT_API
#endif

typedef enum genft_status {
  GENFT_OK = 0,
  GENFT_ERR_ARGUMENT = 1,   /* null pointer or out-of-range argument */
  GENFT_ERR_DIMENSION = 2,
  GENFT_ERR_CONFIG = 3,
  GENFT_ERR_INFEASIBLE = 4,
  GENFT_ERR_CONTRACT = 5,
  GENFT_ERR_TRAINING = 6,
  GENFT_ERR_IO = 7,
  GENFT_ERR_INTERNAL = 8
} genft_status;

/* Message of the last failing call on this thread; "" if none. */
GENFT_API const char* genft_last_error(void);
GENFT_API const char* genft_status_name(genft_status status);
/* Nonzero for statuses caused by bad input rather than a failed run. */
GENFT_API int genft_status_is_validation(genft_status status);

GENFT_API const char* genft_version(void);

/* Caps matmul worker threads; 0 is rejected. Results do not depend on it. */
GENFT_API genft_status genft_set_threads(uint32_t threads);
GENFT_API uint32_t genft_threads(void);

/* Frees strings returned through char** out-parameters. */
GENFT_API void genft_string_free(char* s);

/* Dense row-major matrices. */
typedef struct genft_matrix genft_matrix;

/* values may be NULL for a zero matrix. */
GENFT_API genft_status genft_matrix_create(size_t rows, size_t cols, const double* values,
                                           genft_matrix** out);
GENFT_API void genft_matrix_free(genft_matrix* m);
GENFT_API size_t genft_matrix_rows(const genft_matrix* m);
GENFT_API size_t genft_matrix_cols(const genft_matrix* m);
GENFT_API const double* genft_matrix_data(const genft_matrix* m);
GENFT_API uint64_t genft_matrix_checksum(const genft_matrix* m);
GENFT_API genft_status genft_matrix_load(const char* path, genft_matrix** out);
GENFT_API genft_status genft_matrix_save(const genft_matrix* m, const char* path);
GENFT_API genft_status genft_matrix_save_csv(const genft_matrix* m, const char* path);

/* Run configuration: flat `key = value` text. */
typedef struct genft_config genft_config;

GENFT_API genft_status genft_config_default(genft_config** out);
GENFT_API genft_status genft_config_parse(const char* text, genft_config** out);
GENFT_API genft_status genft_config_load(const char* path, genft_config** out);
GENFT_API void genft_config_free(genft_config* c);
/* Sets one key, then re-validates; on failure the config is unchanged. */
GENFT_API genft_status genft_config_set(genft_config* c, const char* key, const char* value);
GENFT_API uint64_t genft_config_seed(const genft_config* c);
GENFT_API genft_status genft_config_to_text(const genft_config* c, char** out);

/* Parameter budgets. */
typedef struct genft_budget_spec {
  uint64_t layers;
  uint64_t d_in;
  uint64_t d_out;
  uint64_t types;
  uint64_t r;
  uint64_t a;
  uint64_t b;
  int bias;
} genft_budget_spec;

typedef struct genft_budget_report {
  uint64_t lora_params;
  uint64_t genft_params;
  uint64_t latent_dim;
  uint64_t solved_a;
  int has_solved_a;
  int inequality_holds;
} genft_budget_report;

GENFT_API genft_status genft_count_lora(const genft_budget_spec* spec, uint64_t* out);
GENFT_API genft_status genft_count_genft(const genft_budget_spec* spec, uint64_t* out);
GENFT_API genft_status genft_solve_shared_dim(uint64_t layers, uint64_t r, uint64_t b,
                                              uint64_t* out);
/* With solve != 0, spec->a is replaced by the budget-matched shared dim. */
GENFT_API genft_status genft_budget(const genft_budget_spec* spec, int solve,
                                    genft_budget_report* out);
/* CSV "dim,lora_params,genft_params" for dim in [dim_min, dim_max]. */
GENFT_API genft_status genft_budget_curve_csv(uint64_t layers, uint64_t d, uint64_t types,
                                              uint64_t b, uint64_t dim_min, uint64_t dim_max,
                                              char** csv);

/* Experiments. */
typedef struct genft_train_result {
  double initial_loss;
  double final_loss;
  uint64_t steps;
  int base_unchanged;
} genft_train_result;

/* Writes loss.csv, checkpoint.genft and manifest.json into out_dir.
   config_path is recorded in the manifest and may be NULL. */
GENFT_API genft_status genft_train(const genft_config* c, const char* config_path,
                                   const char* out_dir, int export_base,
                                   genft_train_result* result);
/* CSV "seed,variant,shared_dim,specific_dim,params,initial_loss,final_loss". */
GENFT_API genft_status genft_ablate(const genft_config* c, const uint64_t* seeds, size_t n_seeds,
                                    char** csv);
GENFT_API genft_status genft_grad_check(const genft_config* c, double tolerance, int* passed,
                                        char** report);
/* CSV "method,d,dim,median_seconds" for LoRA(r=n) and GenFT(a=n) at each D. */
GENFT_API genft_status genft_bench(const size_t* dims, size_t n_dims, size_t n, size_t repeats,
                                   uint64_t seed, char** csv);

/* Checkpoints. group may be NULL or "" when the checkpoint has one group. */
typedef struct genft_checkpoint genft_checkpoint;

GENFT_API genft_status genft_checkpoint_load(const char* path, genft_checkpoint** out);
GENFT_API void genft_checkpoint_free(genft_checkpoint* ck);
GENFT_API genft_status genft_checkpoint_save(const genft_checkpoint* ck, const char* path);
GENFT_API size_t genft_checkpoint_group_count(const genft_checkpoint* ck);
/* Newline-separated "name kind layers d_out d_in" lines. */
GENFT_API genft_status genft_checkpoint_describe(const genft_checkpoint* ck, char** out);
GENFT_API genft_status genft_checkpoint_delta(genft_checkpoint* ck, const char* group,
                                             size_t layer, const genft_matrix* w0,
                                             genft_matrix** out);
/* With self_check_inputs > 0, *self_check_error receives the largest
   difference between adapted and merged forwards. */
GENFT_API genft_status genft_checkpoint_merge(genft_checkpoint* ck, const char* group,
                                              size_t layer, const genft_matrix* w0,
                                              size_t self_check_inputs, genft_matrix** merged,
                                              double* self_check_error);
/* Writes W0.csv, delta.csv and merged.csv into out_dir. */
GENFT_API genft_status genft_checkpoint_dump(genft_checkpoint* ck, const char* group,
                                             size_t layer, const genft_matrix* w0,
                                             const char* out_dir);
GENFT_API double genft_merge_tolerance(void);

#ifdef __cplusplus
}
#endif

#endif
