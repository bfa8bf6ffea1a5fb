//! Transcript tests: each directory under `tests/golden` holds a `cmd` file with one
//! argument per line, run from that directory, and an `expected` transcript.
//! Set `STRATA_BLESS=1` to rewrite the transcripts from the current output.

use std::fs;
use std::path::Path;
use std::process::Command;

fn transcript(dir: &Path) -> String {
    let args: Vec<String> = fs::read_to_string(dir.join("cmd"))
        .expect("cmd file")
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let out = Command::new(env!("CARGO_BIN_EXE_strata")).args(&args).current_dir(dir).output().expect("run strata");
    format!(
        "exit: {}\n--- stdout\n{}--- stderr\n{}",
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

#[test]
fn golden_transcripts() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let bless = std::env::var_os("STRATA_BLESS").is_some();
    let mut dirs: Vec<_> = fs::read_dir(&root).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
    dirs.sort();
    assert!(dirs.len() >= 20);
    let mut mismatches = Vec::new();
    for dir in dirs {
        let got = transcript(&dir);
        let path = dir.join("expected");
        if bless {
            fs::write(&path, &got).unwrap();
            continue;
        }
        let want = fs::read_to_string(&path).unwrap_or_default();
        if got != want {
            mismatches.push(format!("{}:\n--- want\n{want}\n--- got\n{got}", dir.display()));
        }
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

#[test]
fn output_is_deterministic() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/fallibility_schemes");
    assert_eq!(transcript(&dir), transcript(&dir));
}

#[test]
fn usage_errors_exit_with_two() {
    let bin = env!("CARGO_BIN_EXE_strata");
    for args in [&["frobnicate"][..], &["run"], &["run", "a", "b", "c", "--fuel", "0"], &["analyze", "reach", "x", "y"]] {
        let out = Command::new(bin).args(args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let out = Command::new(bin).args(["run", "/nonexistent.sig", "/nonexistent", "/nonexistent"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}
