use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rastmetrics"))
}

fn tree() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("src")).unwrap();
    fs::write(
        dir.path().join("src/a.c"),
        "int f(void)\n{\n#ifdef CONFIG_X\n  g();\n#endif\n  return 0;\n}\nvoid g(void) {}\n",
    )
    .unwrap();
    fs::write(dir.path().join("src/b.c"), "void h(void) {\n#if CONFIG_Y\n}\n").unwrap();
    fs::write(dir.path().join("src/notes.txt"), "not C").unwrap();
    dir
}

#[test]
fn json_report_and_csv() {
    let dir = tree();
    let out = dir.path().join("m.csv");
    let o = bin()
        .args(["--metrics", "mccabe.vp,loc.loc", "--report", "json", "--compute-threads", "2", "--src"])
        .arg(dir.path().join("src"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["functions"], 2);
    assert_eq!(report["rows_written"], 2);
    assert_eq!(report["files_skipped"][0]["path"], "b.c");
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv, "file,function,start_line,end_line,loc.loc,mccabe.vp\na.c,f,1,7,7,2\na.c,g,8,8,1,1\n");
    assert!(!dir.path().join("m.csv.partial").exists());
}

#[test]
fn text_report_lists_skips() {
    let dir = tree();
    let o = bin()
        .args(["--metrics", "vp.*", "--src"])
        .arg(dir.path().join("src"))
        .arg("--out")
        .arg(dir.path().join("o.csv"))
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("b.c"), "{text}");
}

#[test]
fn fatal_errors_exit_2() {
    let dir = tree();
    let cases: [&[&str]; 4] = [
        &["--metrics", "no.such.metric"],
        &["--features-regex", "("],
        &["--compute-threads", "0"],
        &["--metrics", "loc.loc.sd_vp.sum"],
    ];
    for args in cases {
        let o =
            bin().args(args).arg("--src").arg(dir.path()).arg("--out").arg(dir.path().join("x.csv")).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
    let o = bin().args(["--src", "/nonexistent/dir"]).arg("--out").arg(dir.path().join("y.csv")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn extension_and_feature_list_flags() {
    let dir = tree();
    fs::write(dir.path().join("src/c.cc"), "void k() {}\n").unwrap();
    fs::write(dir.path().join("features.txt"), "# kept\nCONFIG_Y\n").unwrap();
    let out = dir.path().join("e.csv");
    let o = bin()
        .args(["--ext", "cc", "--metrics", "loc.loc", "--report", "json", "--src"])
        .arg(dir.path().join("src"))
        .arg("--feature-list")
        .arg(dir.path().join("features.txt"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out).unwrap(), "file,function,start_line,end_line,loc.loc\nc.cc,k,1,1,1\n");
}

#[test]
fn dump_rast_writes_one_file_per_source() {
    let dir = tree();
    let dumps = dir.path().join("dumps");
    let o = bin()
        .args(["--metrics", "loc.loc", "--src"])
        .arg(dir.path().join("src"))
        .arg("--dump-rast")
        .arg(&dumps)
        .arg("--out")
        .arg(dir.path().join("d.csv"))
        .output()
        .unwrap();
    assert!(o.status.success());
    let a = fs::read_to_string(dumps.join("a.c.rast")).unwrap();
    assert!(a.contains("CppBlock:IFDEF [3-5] cond=CONFIG_X"), "{a}");
    assert!(fs::read_to_string(dumps.join("b.c.rast")).unwrap().starts_with("# skipped:"));
}
