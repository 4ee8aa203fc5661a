//! C interface to the ctxsvc pipeline.
//!
//! A session owns a catalog and, after a successful run, the generated
//! artifacts. Every function returns a [`CtxsvcStatus`]; on failure the
//! message is available from [`ctxsvc_session_last_error`]. Strings
//! returned by the library stay valid until the next call that mutates
//! the session, or until it is freed.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ctxsvc::model::{parse_catalog, Catalog};
use ctxsvc::pipeline::{load_expr, run_pipeline, verdict_exit_code, PipelineError, RunOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtxsvcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed catalog, expression, or options, or an unusable binding.
    InvalidInput = 3,
    /// A catalog service violates its own specification.
    Validation = 4,
    /// Composition, generation, or checking failed.
    Pipeline = 5,
    /// No artifact of that name, or the session has not run yet.
    NotFound = 6,
    Panic = 7,
}

/// Opaque session handle.
pub struct CtxsvcSession {
    catalog: Catalog,
    artifacts: Vec<(&'static str, CString)>,
    verdict: i32,
    last_error: CString,
}

impl CtxsvcSession {
    fn fail(&mut self, status: CtxsvcStatus, msg: impl Into<String>) -> CtxsvcStatus {
        let msg = msg.into().replace('\0', " ");
        self.last_error = CString::new(msg).expect("nul bytes removed");
        status
    }

    fn pipeline_error(&mut self, e: PipelineError) -> CtxsvcStatus {
        let status = match (&e, e.exit_code()) {
            (PipelineError::Validation(_), _) => CtxsvcStatus::Validation,
            (_, 2) => CtxsvcStatus::InvalidInput,
            _ => CtxsvcStatus::Pipeline,
        };
        self.fail(status, e.to_string())
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, CtxsvcStatus> {
    if p.is_null() {
        return Err(CtxsvcStatus::NullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| CtxsvcStatus::InvalidUtf8)
}

fn guarded(f: impl FnOnce() -> CtxsvcStatus) -> CtxsvcStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(CtxsvcStatus::Panic)
}

/// Creates an empty session and stores it in `*out`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ctxsvc_session_new(out: *mut *mut CtxsvcSession) -> CtxsvcStatus {
    if out.is_null() {
        return CtxsvcStatus::NullArgument;
    }
    let s = Box::new(CtxsvcSession {
        catalog: Catalog::default(),
        artifacts: Vec::new(),
        verdict: 0,
        last_error: CString::default(),
    });
    *out = Box::into_raw(s);
    CtxsvcStatus::Ok
}

/// Releases a session. Passing NULL is a no-op.
///
/// # Safety
/// `session` must come from [`ctxsvc_session_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn ctxsvc_session_free(session: *mut CtxsvcSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Parses catalog source text and adds its services to the session.
///
/// # Safety
/// `session` must be a live session and `source` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ctxsvc_session_add_catalog(
    session: *mut CtxsvcSession,
    source: *const c_char,
) -> CtxsvcStatus {
    let Some(s) = session.as_mut() else {
        return CtxsvcStatus::NullArgument;
    };
    guarded(|| {
        let src = match text(source) {
            Ok(t) => t,
            Err(st) => return s.fail(st, "catalog source is NULL or not UTF-8"),
        };
        let cat = match parse_catalog(src) {
            Ok(c) => c,
            Err(e) => return s.fail(CtxsvcStatus::InvalidInput, format!("catalog: {e}")),
        };
        if let Some(dup) = cat.services.keys().find(|k| s.catalog.services.contains_key(*k)) {
            let msg = format!("service `{dup}` is defined twice");
            return s.fail(CtxsvcStatus::InvalidInput, msg);
        }
        for svc in cat.services.into_values() {
            s.catalog.insert(svc);
        }
        CtxsvcStatus::Ok
    })
}

/// Runs validation, composition, flattening, generation, and checking.
/// `options` is a TOML document and may be NULL for defaults. On success
/// `*verdict` (if not NULL) receives 0 when every query passes, 5 when
/// one fails, and 6 when one is inconclusive.
///
/// # Safety
/// `session` must be a live session; `expression` and `options` must be
/// NUL-terminated strings or (for `options`) NULL; `verdict` must be NULL
/// or writable.
#[no_mangle]
pub unsafe extern "C" fn ctxsvc_session_run(
    session: *mut CtxsvcSession,
    expression: *const c_char,
    options: *const c_char,
    verdict: *mut i32,
) -> CtxsvcStatus {
    let Some(s) = session.as_mut() else {
        return CtxsvcStatus::NullArgument;
    };
    guarded(|| {
        s.artifacts.clear();
        let expr_text = match text(expression) {
            Ok(t) => t,
            Err(st) => return s.fail(st, "expression is NULL or not UTF-8"),
        };
        if expr_text.starts_with('@') {
            return s.fail(CtxsvcStatus::InvalidInput, "expression must be given inline");
        }
        let opts_text = if options.is_null() {
            ""
        } else {
            match text(options) {
                Ok(t) => t,
                Err(st) => return s.fail(st, "options are not UTF-8"),
            }
        };
        let run = || -> Result<_, PipelineError> {
            let expr = load_expr(expr_text, &s.catalog)?;
            let opts = RunOptions::from_toml(opts_text)?.typed_for(&s.catalog)?;
            run_pipeline(&expr, &s.catalog, &opts)
        };
        match run() {
            Ok(a) => {
                s.verdict = verdict_exit_code(&a.results);
                s.artifacts = a
                    .files
                    .into_iter()
                    .map(|(n, t)| (n, CString::new(t.replace('\0', " ")).expect("nul bytes removed")))
                    .collect();
                if !verdict.is_null() {
                    *verdict = s.verdict;
                }
                CtxsvcStatus::Ok
            }
            Err(e) => s.pipeline_error(e),
        }
    })
}

/// Looks up an artifact of the last run by file name, for example
/// `"model.xml"` or `"report.txt"`, and stores a borrowed pointer in `*out`.
///
/// # Safety
/// `session` must be a live session, `name` a NUL-terminated string, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctxsvc_session_artifact(
    session: *mut CtxsvcSession,
    name: *const c_char,
    out: *mut *const c_char,
) -> CtxsvcStatus {
    let Some(s) = session.as_mut() else {
        return CtxsvcStatus::NullArgument;
    };
    if out.is_null() {
        return CtxsvcStatus::NullArgument;
    }
    let name = match text(name) {
        Ok(t) => t,
        Err(st) => return s.fail(st, "artifact name is NULL or not UTF-8"),
    };
    match s.artifacts.iter().find(|(n, _)| *n == name) {
        Some((_, t)) => {
            *out = t.as_ptr();
            CtxsvcStatus::Ok
        }
        None => {
            *out = ptr::null();
            s.fail(CtxsvcStatus::NotFound, format!("no artifact `{name}`"))
        }
    }
}

/// Message of the most recent failure, or an empty string.
///
/// # Safety
/// `session` must be a live session or NULL.
#[no_mangle]
pub unsafe extern "C" fn ctxsvc_session_last_error(session: *const CtxsvcSession) -> *const c_char {
    match session.as_ref() {
        Some(s) => s.last_error.as_ptr(),
        None => c"".as_ptr(),
    }
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn ctxsvc_status_name(status: CtxsvcStatus) -> *const c_char {
    let s: &'static CStr = match status {
        CtxsvcStatus::Ok => c"ok",
        CtxsvcStatus::NullArgument => c"null argument",
        CtxsvcStatus::InvalidUtf8 => c"invalid utf-8",
        CtxsvcStatus::InvalidInput => c"invalid input",
        CtxsvcStatus::Validation => c"validation failed",
        CtxsvcStatus::Pipeline => c"pipeline failed",
        CtxsvcStatus::NotFound => c"not found",
        CtxsvcStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}
