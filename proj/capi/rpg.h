/* C interface to the reparameterized policy-gradient toolkit.
 *
 * All functions return rpg_status; on failure the thread-local message
 * from rpg_last_error() describes what went wrong. Objects returned
 * through out-parameters are owned by the caller and released with the
 * matching _free function.
 */
#ifndef RPG_C_API_H
#define RPG_C_API_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rpg_status {
  RPG_OK = 0,
  RPG_ERR_CONFIG = 1,  /* bad config file, key, or argument */
  RPG_ERR_RUNTIME = 2, /* training divergence or I/O failure */
} rpg_status;

typedef struct rpg_config rpg_config;
typedef struct rpg_run rpg_run;

const char* rpg_last_error(void);
void rpg_string_free(char* s);

/* --- configuration ----------------------------------------------- */

rpg_status rpg_config_default(rpg_config** out);
rpg_status rpg_config_load(const char* path, rpg_config** out);
rpg_status rpg_config_parse(const char* text, rpg_config** out);
rpg_status rpg_config_set(rpg_config* cfg, const char* section,
                          const char* key, const char* value);
/* Applies RPG_<SECTION>_<KEY> environment overrides. */
rpg_status rpg_config_apply_env(rpg_config* cfg);
/* Canonical serialization; free with rpg_string_free. */
char* rpg_config_dump(const rpg_config* cfg);
void rpg_config_free(rpg_config* cfg);

/* --- training ----------------------------------------------------- */

/* Runs the configured trainer. When out_dir is non-NULL, writes
 * run.csv plus checkpoint.bin/checkpoint.manifest into it. */
rpg_status rpg_train(const rpg_config* cfg, const char* out_dir,
                     rpg_run** out);

long rpg_run_row_count(const rpg_run* run);
/* Copies row `index` into out10 in CSV column order:
 * step, env_steps, return_mean, return_std, coverage, reward_term,
 * prior_term, cross_entropy_term, entropy_term, grad_norm. */
rpg_status rpg_run_row(const rpg_run* run, long index, double* out10);
rpg_status rpg_run_write_csv(const rpg_run* run, const char* path);
double rpg_run_final_return(const rpg_run* run);
double rpg_run_final_coverage(const rpg_run* run);
void rpg_run_free(rpg_run* run);

/* --- diagnostics --------------------------------------------------- */

/* Gradient checks against central finite differences. `module` is one
 * of graph|nets|policy|elbo|envs|worldmodel|selftest|all. Writes the
 * report to csv_path when non-NULL; *failures receives the number of
 * failing rows. */
rpg_status rpg_gradcheck(const char* module, int trials, unsigned long seed,
                         const char* csv_path, int* failures);

/* Estimator-vs-oracle bias table on a one-step landscape. */
rpg_status rpg_bias_demo(const char* env_id, long samples, unsigned long seed,
                         const char* csv_path);

/* Maze exploration coverage for policy "rpg" or "baseline". Writes
 * (env_steps, rooms_covered) rows; *rooms receives the final count. */
rpg_status rpg_coverage(const char* policy, long env_steps,
                        unsigned long seed, const char* csv_path, int* rooms);

#ifdef __cplusplus
}
#endif

#endif /* RPG_C_API_H */
