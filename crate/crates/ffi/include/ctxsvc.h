/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef CTXSVC_H
#define CTXSVC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CtxsvcStatus {
  CTXSVC_STATUS_OK = 0,
  CTXSVC_STATUS_NULL_ARGUMENT = 1,
  CTXSVC_STATUS_INVALID_UTF8 = 2,
  /*
   Malformed catalog, expression, or options, or an unusable binding.
   */
  CTXSVC_STATUS_INVALID_INPUT = 3,
  /*
   A catalog service violates its own specification.
   */
  CTXSVC_STATUS_VALIDATION = 4,
  /*
   Composition, generation, or checking failed.
   */
  CTXSVC_STATUS_PIPELINE = 5,
  /*
   No artifact of that name, or the session has not run yet.
   */
  CTXSVC_STATUS_NOT_FOUND = 6,
  CTXSVC_STATUS_PANIC = 7,
} CtxsvcStatus;

/*
 Opaque session handle.
 */
typedef struct CtxsvcSession CtxsvcSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Creates an empty session and stores it in `*out`.

 # Safety
 `out` must be a valid pointer to writable storage.
 */
enum CtxsvcStatus ctxsvc_session_new(struct CtxsvcSession **out);

/*
 Releases a session. Passing NULL is a no-op.

 # Safety
 `session` must come from [`ctxsvc_session_new`] and not be used again.
 */
void ctxsvc_session_free(struct CtxsvcSession *session);

/*
 Parses catalog source text and adds its services to the session.

 # Safety
 `session` must be a live session and `source` a NUL-terminated string.
 */
enum CtxsvcStatus ctxsvc_session_add_catalog(struct CtxsvcSession *session, const char *source);

/*
 Runs validation, composition, flattening, generation, and checking.
 `options` is a TOML document and may be NULL for defaults. On success
 `*verdict` (if not NULL) receives 0 when every query passes, 5 when
 one fails, and 6 when one is inconclusive.

 # Safety
 `session` must be a live session; `expression` and `options` must be
 NUL-terminated strings or (for `options`) NULL; `verdict` must be NULL
 or writable.
 */
enum CtxsvcStatus ctxsvc_session_run(struct CtxsvcSession *session,
                                     const char *expression,
                                     const char *options,
                                     int32_t *verdict);

/*
 Looks up an artifact of the last run by file name, for example
 `"model.xml"` or `"report.txt"`, and stores a borrowed pointer in `*out`.

 # Safety
 `session` must be a live session, `name` a NUL-terminated string, and
 `out` writable.
 */
enum CtxsvcStatus ctxsvc_session_artifact(struct CtxsvcSession *session,
                                          const char *name,
                                          const char **out);

/*
 Message of the most recent failure, or an empty string.

 # Safety
 `session` must be a live session or NULL.
 */
const char *ctxsvc_session_last_error(const struct CtxsvcSession *session);

/*
 Static name of a status code.
 */
const char *ctxsvc_status_name(enum CtxsvcStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTXSVC_H */
