/* graspforge: gripper design simulation and optimization.
 *
 * C interface to the study runner, single-trial simulator, and report
 * generator. All functions return gf_status; on failure gf_last_error()
 * holds a message for the calling thread. Strings returned through
 * `char**` out-parameters are owned by the caller and released with
 * gf_string_free().
 */
#ifndef GRASPFORGE_H
#define GRASPFORGE_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gf_status {
  GF_OK = 0,
  GF_ERR_CONFIG = 1,      /* bad config/params/names */
  GF_ERR_IO = 2,          /* filesystem failure */
  GF_ERR_INTERRUPTED = 3, /* stopped by gf_request_stop; state is resumable */
  GF_ERR_SIMULATION = 4,  /* simulation diverged */
  GF_ERR_GEOMETRY = 5,    /* design cannot realize the request */
  GF_ERR_INDEX = 6,       /* out-of-order study data */
  GF_ERR_UNKNOWN = 7
} gf_status;

const char* gf_version(void);

/* Message for the most recent failure on this thread; never NULL. */
const char* gf_last_error(void);

void gf_string_free(char* s);

/* Cooperative cancellation for gf_study_run. Safe to call from a signal
 * handler; sticky until gf_clear_stop. */
void gf_request_stop(void);
void gf_clear_stop(void);

/* ---- studies ---------------------------------------------------------- */

typedef struct gf_study gf_study;

/* Parses config JSON and prepares the output directory. Overrides replace
 * config values when >= 0 (or non-NULL for out_dir). With resume == 0 a
 * directory already holding trials is refused. */
gf_status gf_study_open(const char* config_json, const char* out_dir,
                        long long n_iter, long long seed, int parallelism,
                        int resume, gf_study** out);

/* Runs until the configured iteration count, appending one study.jsonl line
 * per trial (flushed immediately) and refreshing best.json and report.csv.
 * Returns GF_ERR_INTERRUPTED when stopped early; the log resumes as-is. */
gf_status gf_study_run(gf_study* s);

/* Number of completed trials currently in the study. */
int gf_study_size(const gf_study* s);

/* Resolved output directory; valid while the handle is open. */
const char* gf_study_out_dir(const gf_study* s);

/* Best trial as JSON (index, score, seed, objects, per_object_h, params). */
gf_status gf_study_best_json(const gf_study* s, char** json_out);

void gf_study_close(gf_study* s);

/* ---- single trials ---------------------------------------------------- */

/* Runs one grasp-and-lift trial. params_json may be NULL (reference design),
 * a parameter object in SI or unit-suffixed form, or a study best.json.
 * object_name must be one of the benchmark catalog names. When render_dir is
 * non-NULL, SVG frames and trace.csv are written there. The trial result JSON
 * is produced for GF_OK and for GF_ERR_SIMULATION (an unstable trial is a
 * reported outcome, not a crash). */
gf_status gf_simulate(const char* params_json, const char* object_name,
                      unsigned long long seed, const char* render_dir,
                      char** result_json_out);

/* Steady squeeze force [N] the fingertips exert on a fixed wall pair of the
 * given width, at the given design (NULL = reference). */
gf_status gf_grasp_force(const char* params_json, double width_m, double* force_out);

/* ---- reports ---------------------------------------------------------- */

/* Rebuilds report.csv from study_dir/study.jsonl; with_grasp_force != 0 also
 * writes grasp_force.csv measured at the best parameters. */
gf_status gf_report(const char* study_dir, int with_grasp_force);

#ifdef __cplusplus
}
#endif

#endif /* GRASPFORGE_H */
