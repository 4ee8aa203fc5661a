use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use ctxsvc_ffi::*;

fn fixture(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name);
    CString::new(std::fs::read_to_string(p).unwrap()).unwrap()
}

fn session() -> *mut CtxsvcSession {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ctxsvc_session_new(&mut s) }, CtxsvcStatus::Ok);
    assert!(!s.is_null());
    s
}

fn last_error(s: *mut CtxsvcSession) -> String {
    unsafe { CStr::from_ptr(ctxsvc_session_last_error(s)) }.to_str().unwrap().to_string()
}

fn artifact(s: *mut CtxsvcSession, name: &str) -> Result<String, CtxsvcStatus> {
    let name = CString::new(name).unwrap();
    let mut out: *const c_char = ptr::null();
    match unsafe { ctxsvc_session_artifact(s, name.as_ptr(), &mut out) } {
        CtxsvcStatus::Ok => Ok(unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string()),
        st => Err(st),
    }
}

#[test]
fn roadside_runs_end_to_end() {
    let s = session();
    unsafe {
        assert_eq!(ctxsvc_session_add_catalog(s, fixture("roadside.svc").as_ptr()), CtxsvcStatus::Ok);
        assert_eq!(artifact(s, "model.xml"), Err(CtxsvcStatus::NotFound));
        let mut verdict = -1;
        let expr = fixture("roadside.expr");
        let st = ctxsvc_session_run(s, expr.as_ptr(), fixture("roadside.toml").as_ptr(), &mut verdict);
        assert_eq!(st, CtxsvcStatus::Ok, "{}", last_error(s));
        assert_eq!(verdict, 0);
    }
    let report = artifact(s, "report.txt").unwrap();
    assert!(report.ends_with("25/25 queries pass\n"));
    assert!(artifact(s, "model.xml").unwrap().starts_with("<?xml"));
    assert_eq!(artifact(s, "flows.txt").unwrap().lines().count(), 1);
    assert_eq!(artifact(s, "nope.txt"), Err(CtxsvcStatus::NotFound));
    assert!(last_error(s).contains("nope.txt"));
    unsafe { ctxsvc_session_free(s) };
}

#[test]
fn errors_map_to_status_codes() {
    let s = session();
    unsafe {
        let bad = CString::new("service X {").unwrap();
        assert_eq!(ctxsvc_session_add_catalog(s, bad.as_ptr()), CtxsvcStatus::InvalidInput);
        assert!(!last_error(s).is_empty());

        let conflict = CString::new(
            std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/conflict.svc"))
                .unwrap(),
        )
        .unwrap();
        assert_eq!(ctxsvc_session_add_catalog(s, conflict.as_ptr()), CtxsvcStatus::Ok);
        assert_eq!(ctxsvc_session_add_catalog(s, conflict.as_ptr()), CtxsvcStatus::InvalidInput);
        let expr = CString::new("Strict").unwrap();
        let st = ctxsvc_session_run(s, expr.as_ptr(), ptr::null(), ptr::null_mut());
        assert_eq!(st, CtxsvcStatus::Validation);
        assert!(last_error(s).contains("legal"));

        let unknown = CString::new("Missing >> Strict").unwrap();
        assert_eq!(
            ctxsvc_session_run(s, unknown.as_ptr(), ptr::null(), ptr::null_mut()),
            CtxsvcStatus::InvalidInput
        );
        assert_eq!(ctxsvc_session_run(s, ptr::null(), ptr::null(), ptr::null_mut()), CtxsvcStatus::NullArgument);
        assert_eq!(
            ctxsvc_session_run(ptr::null_mut(), expr.as_ptr(), ptr::null(), ptr::null_mut()),
            CtxsvcStatus::NullArgument
        );
        let invalid = [0xffu8, 0];
        assert_eq!(
            ctxsvc_session_add_catalog(s, invalid.as_ptr() as *const c_char),
            CtxsvcStatus::InvalidUtf8
        );
        ctxsvc_session_free(s);
        ctxsvc_session_free(ptr::null_mut());
    }
}

#[test]
fn failing_query_sets_verdict() {
    let s = session();
    let opts = fixture("roadside.toml").into_string().unwrap().replace("\"caa\"", "\"aaa\"");
    let opts = CString::new(opts).unwrap();
    unsafe {
        ctxsvc_session_add_catalog(s, fixture("roadside.svc").as_ptr());
        let mut verdict = -1;
        let st = ctxsvc_session_run(s, fixture("roadside.expr").as_ptr(), opts.as_ptr(), &mut verdict);
        assert_eq!(st, CtxsvcStatus::Ok);
        assert_eq!(verdict, 5);
        ctxsvc_session_free(s);
    }
}

#[test]
fn status_names_are_distinct() {
    let all = [
        CtxsvcStatus::Ok,
        CtxsvcStatus::NullArgument,
        CtxsvcStatus::InvalidUtf8,
        CtxsvcStatus::InvalidInput,
        CtxsvcStatus::Validation,
        CtxsvcStatus::Pipeline,
        CtxsvcStatus::NotFound,
        CtxsvcStatus::Panic,
    ];
    let names: std::collections::BTreeSet<&str> = all
        .iter()
        .map(|&st| unsafe { CStr::from_ptr(ctxsvc_status_name(st)) }.to_str().unwrap())
        .collect();
    assert_eq!(names.len(), all.len());
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = which_cc() else { return };
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use_header.c");
    std::fs::write(
        &src,
        "#include \"ctxsvc.h\"\n\
         int main(void) {\n\
           CtxsvcSession *s = 0;\n\
           if (ctxsvc_session_new(&s) != CTXSVC_STATUS_OK) return 1;\n\
           const char *xml = 0;\n\
           (void)ctxsvc_session_artifact(s, \"model.xml\", &xml);\n\
           ctxsvc_session_free(s);\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
}
