/* augrl - data-augmented actor-critic bench, C interface.
 *
 * All functions that can fail either return NULL or an augrl_status; the
 * message for the most recent failure on a context is available through
 * augrl_last_error(). Objects returned by *_new/*_parse/*_run calls are owned
 * by the caller and released with the matching *_free.
 */
#ifndef AUGRL_H
#define AUGRL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum augrl_status {
    AUGRL_OK = 0,
    AUGRL_VERIFY_FAILED = 1, /* a verification check did not pass */
    AUGRL_CONFIG_ERROR = 2,  /* unknown key, bad value, bad usage */
    AUGRL_IO_ERROR = 3,      /* unreadable/unwritable file, malformed image */
    AUGRL_RUNTIME_ERROR = 4
} augrl_status;

typedef struct augrl_ctx augrl_ctx;
typedef struct augrl_config augrl_config;
typedef struct augrl_report augrl_report;
typedef struct augrl_train_result augrl_train_result;

augrl_ctx* augrl_ctx_new(void);
void augrl_ctx_free(augrl_ctx* ctx);
const char* augrl_last_error(const augrl_ctx* ctx);
augrl_status augrl_last_status(const augrl_ctx* ctx);
const char* augrl_version(void);

/* --- configuration -------------------------------------------------------- */

/* Parses flat `key = value` text (see augrl_config_help for the key list). */
augrl_config* augrl_config_parse(augrl_ctx* ctx, const char* text);
void augrl_config_free(augrl_config* cfg);
augrl_status augrl_config_set(augrl_ctx* ctx, augrl_config* cfg, const char* key,
                              const char* value);
/* Static listing of every key with type, default, and description. */
const char* augrl_config_help(void);

/* --- training -------------------------------------------------------------- */

/* Runs the training loop; writes manifest.txt, config.txt, metrics.csv and
 * checkpoints under out_dir (out_dir may be NULL or empty for no files). */
augrl_train_result* augrl_train_run(augrl_ctx* ctx, const augrl_config* cfg, uint64_t seed,
                                    const char* out_dir);
void augrl_train_result_free(augrl_train_result* res);
double augrl_train_result_best_eval(const augrl_train_result* res);
double augrl_train_result_final_eval(const augrl_train_result* res);
double augrl_train_result_oracle_return(const augrl_train_result* res);
int augrl_train_result_row_count(const augrl_train_result* res);

/* --- verification ----------------------------------------------------------- */

int augrl_verify_suite_count(void);
const char* augrl_verify_suite_name(int index);

/* suite may be any suite name or "all". threads <= 0 uses the hardware count. */
augrl_report* augrl_verify_run(augrl_ctx* ctx, const char* suite, uint64_t seed, int threads);
void augrl_report_free(augrl_report* rep);
int augrl_report_passed(const augrl_report* rep);
const char* augrl_report_text(const augrl_report* rep);
augrl_status augrl_report_write_csv(augrl_ctx* ctx, const augrl_report* rep, const char* path);

/* --- transform preview -------------------------------------------------------- */

/* Applies one parameterized image transformation to an 8-bit P5 image.
 * param_text uses the canonical form, e.g. "shift:dx=2,dy=-1"; transform may
 * name the family when param_text omits the prefix (may be NULL). */
augrl_status augrl_preview(augrl_ctx* ctx, const char* transform, const char* param_text,
                           const char* in_pgm, const char* out_pgm);

#ifdef __cplusplus
}
#endif

#endif /* AUGRL_H */
