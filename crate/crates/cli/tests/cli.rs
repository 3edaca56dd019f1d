use std::process::{Command, Output};

fn proofrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proofrec"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_subcommand_prints_usage() {
    let o = proofrec(&["train-everything"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn missing_subcommand_prints_usage() {
    let o = proofrec(&[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn missing_inputs_give_an_actionable_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = proofrec(&["--workdir", dir.path().to_str().unwrap(), "train-tokenizer"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("run `proofrec synth` first"), "{}", stderr(&o));
}

#[test]
fn bad_config_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[synth]\nsteps = 10\n").unwrap();
    let o = proofrec(&["synth", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("synth.steps"), "{}", stderr(&o));
}

#[test]
fn synth_flags_shape_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().to_str().unwrap();
    let o = proofrec(&["--workdir", w, "synth", "--steps", "50", "--lemmas", "6", "--commands", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["steps"], 50);
    assert_eq!(summary["lemmas"], 6);
    let trace = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 50);
}
