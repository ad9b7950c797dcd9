mod common;

use std::fs;

use common::cli::{golden, run, run_case, snapshot, CASES};

#[test]
fn subcommands_match_golden_outputs() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut mismatched = Vec::new();
    for (name, args) in CASES {
        let got = run_case(args);
        assert!(!got.is_empty(), "{name} wrote nothing");
        let dir = golden().join(name);
        if update {
            let _ = fs::remove_dir_all(&dir);
            for (rel, bytes) in &got {
                let p = dir.join(rel);
                fs::create_dir_all(p.parent().unwrap()).unwrap();
                fs::write(p, bytes).unwrap();
            }
            continue;
        }
        if snapshot(&dir) != got {
            mismatched.push(*name);
        }
    }
    assert!(mismatched.is_empty(), "outputs differ from tests/golden for {mismatched:?}; rerun with UPDATE_GOLDEN=1 after review");
}

#[test]
fn subcommands_are_deterministic() {
    for (name, args) in CASES {
        assert_eq!(run_case(args), run_case(args), "{name} is not deterministic");
    }
}

#[test]
fn every_subcommand_has_a_case() {
    for sub in [
        "encode-depth", "decode-depth", "encode-normals", "decode-normals", "encode-seg", "decode-seg", "degrade",
        "eval-depth", "eval-normals", "eval-seg", "unproject", "make-prompts", "make-pairs",
    ] {
        assert!(CASES.iter().any(|(_, a)| a.starts_with(&format!("{sub} "))), "{sub}");
    }
}

fn exit_code(args: &str) -> i32 {
    let dir = tempfile::tempdir().unwrap();
    run(args, dir.path()).status.code().unwrap()
}

#[test]
fn exit_codes() {
    // Format errors.
    assert_eq!(exit_code("decode-depth --input {f}/palette.json --out {o}/x.pfm"), 2);
    assert_eq!(exit_code("encode-depth --input {f}/rgb.png --out {o}/x.png"), 2);
    // Configuration errors.
    assert_eq!(exit_code("degrade --op sharpen --input {f}/rgb.png --out {o}/x.png"), 2);
    assert_eq!(exit_code("encode-depth --lambda 2 --input {f}/depth.png --out {o}/x.png"), 2);
    assert_eq!(exit_code("encode-depth --corner-order 01234567 --input {f}/depth.png --out {o}/x.png"), 2);
    assert_eq!(exit_code("unproject --intrinsics 0,1,1,1 --input {f}/depth.png --out {o}/x.ply"), 2);
    assert_eq!(exit_code("encode-depth --bogus"), 2);
    assert_eq!(exit_code("make-prompts --task semantic"), 2);
    // Run errors.
    assert_eq!(exit_code("eval-depth --manifest {f}/none.json --out {o}/r.json"), 1);
    assert_eq!(exit_code("decode-depth --input {f}/none.png --out {o}/x.pfm"), 1);
    assert_eq!(exit_code("encode-depth --input {f}/depth.png --out {o}/no/such/dir/x.png"), 1);
}

#[test]
fn config_file_is_applied_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"d_max": 5.0, "seed": 2}"#).unwrap();
    let out = run(
        &format!("eval-depth --config {} --manifest {{f}}/manifest.json --out {{o}}/r.json", cfg.display()),
        dir.path(),
    );
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["config_echo"]["d_max"], 5.0);
    let out = run(
        &format!("eval-depth --config {} --d-max 7 --manifest {{f}}/manifest.json --out {{o}}/r.json", cfg.display()),
        dir.path(),
    );
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["config_echo"]["d_max"], 7.0);

    fs::write(&cfg, r#"{"d_maximum": 5.0}"#).unwrap();
    let out = run(&format!("eval-depth --config {} --manifest {{f}}/manifest.json --out {{o}}/r.json", cfg.display()), dir.path());
    assert_eq!(out.status.code(), Some(2));
}
