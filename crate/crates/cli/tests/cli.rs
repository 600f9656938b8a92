use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn skewrec(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewrec"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn assert_reproducible(args: &[&str]) -> Vec<(String, Vec<u8>)> {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = skewrec(args, dir);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (fa, fb) = (files(&a), files(&b));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
    for (name, bytes) in &fa {
        assert!(bytes.starts_with(b"# skewrec ") || bytes.starts_with(b"{"), "{name} lacks provenance");
    }
    fa
}

#[test]
fn generic_recurrence_is_reproducible() {
    let fa = assert_reproducible(&[
        "generic-recurrence",
        "--seed",
        "5",
        "--alpha",
        "[2,2,...]",
        "--alpha",
        "gauss:9:40",
        "--horizons",
        "16,64,256,1024",
        "--levels",
        "12",
    ]);
    let names: Vec<_> = fa.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["ck.csv", "divergence.csv", "zeta.csv"]);
}

#[test]
fn defeat_omega_is_reproducible() {
    let fa = assert_reproducible(&[
        "defeat-omega",
        "--eps",
        "0.75",
        "--seed",
        "2",
        "--depth",
        "3",
        "--samples",
        "4",
        "--horizons",
        "16,256,4096",
    ]);
    let forge = &fa.iter().find(|f| f.0 == "forge.json").unwrap().1;
    let forge = String::from_utf8_lossy(forge);
    assert!(forge.contains("provenance"));
}

#[test]
fn iet_recurrence_is_reproducible() {
    let fa = assert_reproducible(&["iet-recurrence", "--seed", "3", "--horizons", "256,1024,4096", "--samples", "4"]);
    let spectrum = String::from_utf8_lossy(&fa.iter().find(|f| f.0 == "spectrum.csv").unwrap().1).into_owned();
    assert!(spectrum.lines().any(|l| l.starts_with("2,0.96242365011920")));
}

#[test]
fn lyapunov_is_reproducible() {
    assert_reproducible(&["lyapunov", "--seed", "1", "--horizons", "16,64,256,1024", "--samples", "4"]);
}

#[test]
fn config_file_and_flags_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"experiment": "lyapunov", "seed": 1, "horizons": [16, 64, 256], "samples": 4}"#).unwrap();
    let from_file = tmp.path().join("file");
    let from_flags = tmp.path().join("flags");
    assert!(skewrec(&["lyapunov", "--config", cfg.to_str().unwrap()], &from_file).status.success());
    let flags = [
        "lyapunov",
        "--seed",
        "1",
        "--horizons",
        "16,64,256",
        "--samples",
        "4",
    ];
    assert!(skewrec(&flags, &from_flags).status.success());
    // The hash covers the experiment name too, so compare data rows only.
    let rows = |dir: &Path| -> String {
        fs::read_to_string(dir.join("lyapunov.csv"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(rows(&from_file), rows(&from_flags));
}

#[test]
fn validation_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");

    let missing_seed = skewrec(&["lyapunov"], &out);
    assert_eq!(missing_seed.status.code(), Some(2));

    let low_eps = skewrec(&["defeat-omega", "--eps", "0.5", "--seed", "1"], &out);
    assert_eq!(low_eps.status.code(), Some(2));

    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, "{\n  \"seed\": 1,\n  \"colour\": 3\n}\n").unwrap();
    let unknown = skewrec(&["generic-recurrence", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("line 3"));

    let bad_loop = skewrec(
        &["iet-recurrence", "--seed", "1", "--loop", r#"{"permutation":[[1,2],[2,1]],"moves":["top"]}"#],
        &out,
    );
    assert_eq!(bad_loop.status.code(), Some(2));

    let bad_alpha = skewrec(&["lyapunov", "--seed", "1", "--alpha", "[2,x]"], &out);
    assert_eq!(bad_alpha.status.code(), Some(2));
    assert!(!out.exists());
}
