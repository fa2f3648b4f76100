use std::ffi::{CStr, CString};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use rastmetrics_ffi::*;

const SRC: &str = "void g() {}\nvoid f(int a) {\n#ifdef CONFIG_A\n  if (a) g();\n#endif\n}\n";

fn tree() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.c"), SRC).unwrap();
    fs::write(dir.path().join("bad.c"), "void h() {\n#if X\n}\n").unwrap();
    dir
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(rm_last_error()) }.to_str().unwrap().to_owned()
}

#[test]
fn analysis_handle_round_trip() {
    let dir = tree();
    let src = c(dir.path().to_str().unwrap());
    let metrics = c("mccabe.code,mccabe.combined,vp.novp");
    let mut opts = rm_options_default();
    opts.metrics = metrics.as_ptr();
    opts.threads = 2;
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(rm_analysis_open(src.as_ptr(), &opts, &mut h), RmStatus::Ok);
        let (mut funcs, mut vars, mut skipped) = (0, 0, 0);
        assert_eq!(rm_analysis_function_count(h, &mut funcs), RmStatus::Ok);
        assert_eq!(rm_analysis_variation_count(h, &mut vars), RmStatus::Ok);
        assert_eq!(rm_analysis_skipped_count(h, &mut skipped), RmStatus::Ok);
        assert_eq!((funcs, vars, skipped), (2, 3, 1));

        let mut key = ptr::null();
        assert_eq!(rm_analysis_function_key(h, 1, &mut key), RmStatus::Ok);
        assert_eq!(CStr::from_ptr(key).to_str().unwrap(), "a.c:f:2");
        let mut ids = Vec::new();
        for i in 0..vars {
            let mut id = ptr::null();
            assert_eq!(rm_analysis_variation_id(h, i, &mut id), RmStatus::Ok);
            ids.push(CStr::from_ptr(id).to_str().unwrap().to_owned());
        }
        let mut row = vec![0.0; vars];
        assert_eq!(rm_analysis_row(h, 1, row.as_mut_ptr(), row.len()), RmStatus::Ok);
        let get = |id: &str| row[ids.iter().position(|x| x == id).unwrap()];
        assert_eq!((get("mccabe.code"), get("mccabe.combined"), get("vp.novp")), (2.0, 3.0, 1.0));

        assert_eq!(rm_analysis_row(h, 1, row.as_mut_ptr(), 1), RmStatus::OutOfRange);
        assert!(last_error().contains("need 3"));
        assert_eq!(rm_analysis_row(h, 9, row.as_mut_ptr(), row.len()), RmStatus::OutOfRange);
        assert_eq!(rm_analysis_variation_id(h, 3, &mut key), RmStatus::OutOfRange);

        let out = dir.path().join("out.csv");
        let out_c = c(out.to_str().unwrap());
        assert_eq!(rm_analysis_write_csv(h, out_c.as_ptr()), RmStatus::Ok);
        assert_eq!(last_error(), "");
        rm_analysis_free(h);
        let csv = fs::read_to_string(out).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }
}

#[test]
fn error_codes() {
    let dir = tree();
    let src = c(dir.path().to_str().unwrap());
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(rm_analysis_open(ptr::null(), ptr::null(), &mut h), RmStatus::NullArgument);
        assert_eq!(rm_analysis_open(src.as_ptr(), ptr::null(), ptr::null_mut()), RmStatus::NullArgument);
        assert_eq!(rm_analysis_function_count(ptr::null(), &mut 0), RmStatus::NullArgument);

        let bad = c("nesting.*.nope");
        let mut opts = rm_options_default();
        opts.metrics = bad.as_ptr();
        assert_eq!(rm_analysis_open(src.as_ptr(), &opts, &mut h), RmStatus::InvalidSelection);
        assert!(!last_error().is_empty());

        let regex = c("(");
        let mut opts = rm_options_default();
        opts.feature_regex = regex.as_ptr();
        assert_eq!(rm_analysis_open(src.as_ptr(), &opts, &mut h), RmStatus::InvalidConfig);

        let missing = c("/nonexistent/tree");
        assert_eq!(rm_analysis_open(missing.as_ptr(), ptr::null(), &mut h), RmStatus::Io);

        let invalid = [0xffu8, 0];
        assert_eq!(rm_analysis_open(invalid.as_ptr().cast(), ptr::null(), &mut h), RmStatus::InvalidUtf8);
        assert!(h.is_null());
        rm_analysis_free(ptr::null_mut());
        rm_string_free(ptr::null_mut());
    }
}

#[test]
fn run_and_dump() {
    let dir = tree();
    let src = c(dir.path().to_str().unwrap());
    let out = dir.path().join("m.csv");
    let out_c = c(out.to_str().unwrap());
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(rm_run(src.as_ptr(), out_c.as_ptr(), ptr::null(), &mut report), RmStatus::Ok);
        let json: serde_json::Value = serde_json::from_str(CStr::from_ptr(report).to_str().unwrap()).unwrap();
        rm_string_free(report);
        assert_eq!(json["functions"], 2);
        assert_eq!(json["files_skipped"].as_array().unwrap().len(), 1);
        assert!(out.exists());

        let (path, text) = (c("x.c"), c(SRC));
        let mut dump = ptr::null_mut();
        assert_eq!(rm_parse_dump(path.as_ptr(), text.as_ptr(), &mut dump), RmStatus::Ok);
        let s = CStr::from_ptr(dump).to_str().unwrap().to_owned();
        rm_string_free(dump);
        assert!(s.starts_with("0 Function"), "{s}");
        assert!(s.contains("pc=CONFIG_A"), "{s}");
        assert!(!CStr::from_ptr(rm_version()).to_bytes().is_empty());
    }
}

fn cc() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok())
}

fn include_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler found, header check skipped");
        return;
    };
    let smoke = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let st = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
        .arg(include_dir())
        .arg(&smoke)
        .status()
        .unwrap();
    assert!(st.success());
    let dir = tempfile::tempdir().unwrap();
    let cpp = dir.path().join("h.cpp");
    fs::write(&cpp, "#include \"rastmetrics.h\"\nint main() { return rm_options_default().threads; }\n").unwrap();
    if let Ok(st) = Command::new("c++").args(["-fsyntax-only", "-I"]).arg(include_dir()).arg(&cpp).status() {
        assert!(st.success());
    }
}

/// Links the C smoke program against the static library and runs it.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler found, link check skipped");
        return;
    };
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().parent().unwrap().join("librastmetrics_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tree();
    let bin = dir.path().join("smoke");
    let st = Command::new(cc)
        .arg("-I")
        .arg(include_dir())
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success());
    let out = dir.path().join("c.csv");
    let run = Command::new(&bin).arg(dir.path()).arg(&out).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("a.c:f:2"), "{stdout}");
    assert!(stdout.contains("variations 94"), "{stdout}");
    assert!(fs::read_to_string(out).unwrap().starts_with("file,"));
}
