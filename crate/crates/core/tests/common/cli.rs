//! Scripted invocations of the `emoalign` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const EXCUSE_ME_WORDS: &str = r#"{"segments":[{"words":[
  {"text":"Excuse","start":6.92,"end":7.16},
  {"text":"me","start":7.16,"end":7.23}]}]}"#;
pub const EXCUSE_ME_RTTM: &str = "SPEAKER ses01 1 6.92 0.32 <NA> <NA> Speaker_00 <NA> <NA>\n";
pub const REF_HAPPY: &str = r#"{"utterances":[{"start":0,"end":10,"speaker":"A","emotion":"happy"}]}"#;
pub const HYP_SPLIT: &str = r#"{"utterances":[
  {"start":0,"end":6,"speaker":"A","emotion":"happy","text":"a"},
  {"start":6,"end":10,"speaker":"A","emotion":"sad","text":"b"}]}"#;
pub const HYP_NO_EMOTION: &str = r#"{"utterances":[{"start":0,"end":10,"speaker":"A","text":"a"}]}"#;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emoalign"))
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn emoalign")
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

pub struct Case {
    pub name: &'static str,
    pub args: Vec<String>,
    pub expected: i32,
    /// Substring the primary output (stdout) must contain.
    pub stdout_contains: Option<&'static str>,
}

fn case(name: &'static str, expected: i32, args: &[&str]) -> Case {
    Case {
        name,
        args: args.iter().map(|s| s.to_string()).collect(),
        expected,
        stdout_contains: None,
    }
}

/// Populate `dir` with fixtures and return the invocation matrix.
pub fn matrix(dir: &Path) -> Vec<Case> {
    write(dir, "words.json", EXCUSE_ME_WORDS);
    write(dir, "d.rttm", EXCUSE_ME_RTTM);
    write(dir, "empty.json", "");
    write(dir, "corrupt.json", "{\"segments\": [ {\"words\": [");
    write(dir, "bad.rttm", "SPEAKER ses01 1 six 0.32 <NA> <NA> S <NA> <NA>\n");
    write(dir, "neg.rttm", "SPEAKER ses01 1 1.0 -0.5 <NA> <NA> S <NA> <NA>\n");
    write(dir, "ref.json", REF_HAPPY);
    write(dir, "hyp.json", HYP_SPLIT);
    write(dir, "hyp_noemo.json", HYP_NO_EMOTION);
    write(dir, "bad_config.json", "{ not json");
    write(
        dir,
        "turns.json",
        r#"{"utterances":[{"start":6.92,"end":7.23,"speaker":"Speaker_00","text":"Excuse me"}]}"#,
    );

    let mut cases = vec![
        case("align: good inputs", 0, &["align", "--words", "words.json", "--rttm", "d.rttm", "-o", "out.json"]),
        case("align: empty words file", 0, &["align", "--words", "empty.json", "--rttm", "d.rttm"]),
        case("align: missing words file", 2, &["align", "--words", "nope.json", "--rttm", "d.rttm"]),
        case("align: missing rttm file", 2, &["align", "--words", "words.json", "--rttm", "nope.rttm"]),
        case("align: corrupt words", 3, &["align", "--words", "corrupt.json", "--rttm", "d.rttm"]),
        case("align: corrupt rttm", 3, &["align", "--words", "words.json", "--rttm", "bad.rttm"]),
        case("align: negative duration", 3, &["align", "--words", "words.json", "--rttm", "neg.rttm"]),
        case("align: zero pause", 2, &["align", "--words", "words.json", "--rttm", "d.rttm", "--pause", "0"]),
        case("align: no arguments", 2, &["align"]),
        case("unknown subcommand", 2, &["frobnicate"]),
        case("score: identical streams", 0, &["score", "--reference", "ref.json", "--hypothesis", "ref.json"]),
        case("score: split hypothesis", 0, &["score", "--reference", "ref.json", "--hypothesis", "hyp.json"]),
        case("score: hypothesis lacks emotion", 3, &["score", "--reference", "ref.json", "--hypothesis", "hyp_noemo.json"]),
        case("score: missing reference", 2, &["score", "--reference", "nope.json", "--hypothesis", "hyp.json"]),
        case("score: corrupt reference", 3, &["score", "--reference", "corrupt.json", "--hypothesis", "hyp.json"]),
        case("score: unknown metric", 2, &["score", "--reference", "ref.json", "--hypothesis", "hyp.json", "--metrics", "bleu"]),
        case("inspect: good turns", 0, &["inspect", "turns.json"]),
        case("inspect: corrupt turns", 3, &["inspect", "corrupt.json"]),
        case("inspect: missing turns", 2, &["inspect", "nope.json"]),
        case("config: unreadable", 2, &["--config", "nope.json", "inspect", "turns.json"]),
        case("config: corrupt", 2, &["--config", "bad_config.json", "inspect", "turns.json"]),
        case(
            "fuse-demo: zero learning rate misses target",
            4,
            &["fuse-demo", "--lr", "0", "--steps", "3", "--samples", "40", "--checkpoint", "ck0.json", "-o", "r0.json"],
        ),
        case(
            "fuse-demo: diverging learning rate",
            4,
            &["fuse-demo", "--lr", "1e300", "--steps", "20", "--samples", "16", "--checkpoint", "ck1.json", "-o", "r1.json"],
        ),
        case(
            "fuse-demo: heads not dividing dim",
            2,
            &["fuse-demo", "--heads", "3", "--steps", "1", "--samples", "8", "--checkpoint", "ck2.json", "-o", "r2.json"],
        ),
        case("fuse-demo: missing data dir", 2, &["fuse-demo", "--data-dir", "nope", "--checkpoint", "ck3.json"]),
    ];
    cases[10].stdout_contains = Some("TEER 0.00%");
    cases[11].stdout_contains = Some("TEER 40.00%");
    cases
}

/// Run every case; returns `(name, expected, actual, ok)` rows.
pub fn run_matrix(dir: &Path) -> Vec<(&'static str, i32, i32, bool)> {
    matrix(dir)
        .into_iter()
        .map(|c| {
            let args: Vec<&str> = c.args.iter().map(String::as_str).collect();
            let out = run_in(dir, &args);
            let code = out.status.code().unwrap_or(-1);
            let stdout = String::from_utf8_lossy(&out.stdout);
            let ok = code == c.expected && c.stdout_contains.is_none_or(|s| stdout.contains(s));
            (c.name, c.expected, code, ok)
        })
        .collect()
}
