#ifndef TOKENLAB_H
#define TOKENLAB_H

/* C interface to the token-level RL lab. All entry points return tl_status;
 * details for the most recent failure on the calling thread come from
 * tl_last_error(). Configs are opaque key=value stores pre-filled with
 * defaults; keys and values are validated on every mutation. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tl_status {
    TL_OK = 0,
    TL_ERR_INVALID_ARGUMENT = 1,
    TL_ERR_CONFIG = 2,
    TL_ERR_IO = 3,
    TL_ERR_NUMERIC = 4,
    TL_ERR_INTERNAL = 5
} tl_status;

const char* tl_version(void);

/* Message for the last failing call on this thread; empty string if none. */
const char* tl_last_error(void);

typedef struct tl_config tl_config;

/* A fresh config carrying every key at its default value. NULL on allocation
 * failure. */
tl_config* tl_config_create(void);
void tl_config_destroy(tl_config* cfg);

/* Merges key=value pairs from a config file over the current contents. */
tl_status tl_config_load(tl_config* cfg, const char* path);

/* Sets one key. Unknown keys and unparseable values are rejected and leave
 * the config unchanged. */
tl_status tl_config_set(tl_config* cfg, const char* key, const char* value);

/* Copies the value of one key into buf (NUL terminated). Fails if the key is
 * absent or buf is too small. */
tl_status tl_config_get(const tl_config* cfg, const char* key, char* buf, size_t buflen);

typedef struct tl_train_summary {
    int steps;
    double baseline_mean_reward;
    double final_mean_reward; /* mean reward over the last <= 10 steps */
} tl_train_summary;

/* Runs the training loop described by cfg. Writes resolved_config.cfg,
 * train_log.csv and checkpoints under out_dir. summary may be NULL. */
tl_status tl_train(const tl_config* cfg, const char* out_dir, tl_train_summary* summary);

/* Loads a checkpoint and writes the per-quartile update report, the four
 * selective-update reports and the two update-direction reports under
 * out_dir. */
tl_status tl_diagnose(const tl_config* cfg, const char* checkpoint_path, const char* out_dir);

/* Certifies the gradient-norm sandwich on randomized nets plus two exact
 * equality constructions. Writes one CSV row per trial to csv_path (pass NULL
 * to skip the file) and stores the number of violated rows in *violations. */
tl_status tl_verify_bounds(int trials, unsigned long long seed, const char* csv_path, int* violations);

/* Repeats the configured run over a variant matrix and writes comparison.csv
 * under out_dir. which: mask_high | lopti_reversed | alpha_sweep | eta_sweep. */
tl_status tl_ablate(const tl_config* cfg, const char* which, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* TOKENLAB_H */
