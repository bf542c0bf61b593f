/* AllSpark C API: a stable shared-library surface over the C++ core.
 *
 * Usage pattern: create a session, call operations, read the last error on
 * failure, free returned strings with allspark_string_free, free the session.
 * Every operation takes UTF-8 JSON or filesystem paths and returns a status
 * code; string results are heap-allocated JSON documents.
 */

#ifndef ALLSPARK_H
#define ALLSPARK_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum allspark_status {
  ALLSPARK_OK = 0,
  ALLSPARK_ERR_CONTRACT = 1, /* precondition or validation failure */
  ALLSPARK_ERR_IO = 2        /* filesystem or serialization failure */
} allspark_status;

/* Opaque session handle; holds the last error message. Sessions are not
 * thread-safe; use one per thread. */
typedef struct allspark_session allspark_session;

allspark_status allspark_session_new(allspark_session** out);
void allspark_session_free(allspark_session* session);

/* Message for the most recent failing call on this session ("" if none).
 * The pointer stays valid until the next call on the same session. */
const char* allspark_last_error(const allspark_session* session);

const char* allspark_version(void);

/* Writes a synthetic dataset described by spec_json into out_dir.
 * spec_json: {"modality","task","count","classes","seed",...}. */
allspark_status allspark_generate(allspark_session* session, const char* spec_json, const char* out_dir);

/* Runs a training loop from a run-config JSON document (modality, preset,
 * schedule, freeze overrides, seed, data/output paths). On success
 * *summary_json carries {"initial_loss","final_loss","steps",...}. */
allspark_status allspark_train(allspark_session* session, const char* run_json, char** summary_json);

/* Evaluates a checkpoint over a dataset with eval-mode prompts; writes
 * metrics.json / metrics.csv under out_dir and returns the report. */
allspark_status allspark_eval(allspark_session* session, const char* checkpoint_dir, const char* data_dir,
                              const char* out_dir, const char* prompts_path, char** report_json);

/* Finite-difference gradient verification of one modality pipeline.
 * request_json: {"modality","samples","precision","seed","epsilon",
 * "tolerance","prompts"} (all but modality optional). */
allspark_status allspark_gradcheck(allspark_session* session, const char* request_json, char** report_json);

/* Shape walk of the full pipeline for one sample.
 * request_json: {"modality","preset","seed","prompts"}. */
allspark_status allspark_inspect(allspark_session* session, const char* request_json, char** report_json);

void allspark_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* ALLSPARK_H */
