use std::path::{Path, PathBuf};
use std::process::Command;

use abset::entanglement::{product_defect, Bipartition};
use abset::linalg::Unitary;
use abset_cli::{dispatch, CommandResult, StateFile};
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> CommandResult {
    dispatch(args.iter().copied())
}

fn json(r: &CommandResult) -> Value {
    serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", r.stdout))
}

fn save(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn constructed_sets_round_trip_through_json() {
    let r = run(&["construct", "thm1", "--d", "6", "--a", "0.8", "--b", "0.6", "--seed", "1"]);
    assert_eq!(r.exit_code, 0, "{}", r.stderr);
    let file: StateFile = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(file.dim, 6);
    assert_eq!(file.states.len(), 6);
    let set = file.to_set().unwrap();
    let again = serde_json::to_value(StateFile::from_set(&set)).unwrap();
    assert_eq!(again, json(&r));
}

#[test]
fn necessary_condition_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ex1 = save(&dir, "ex1.json", &run(&["construct", "ex1", "--x", "0.5"]).stdout);
    let pass = run(&["check", "prop1", "--input", p(&ex1), "--bipartition", "2x2"]);
    assert_eq!(pass.exit_code, 0);
    assert_eq!(json(&pass)["pass"], Value::Bool(true));

    let bell = save(
        &dir,
        "small.json",
        r#"{"dim": 4, "labels": [], "states": [
            [[1,0],[0,0],[0,0],[0,0]],
            [[0,0],[1,0],[0,0],[0,0]],
            [[0.6,0],[0.8,0],[0,0],[0,0]]
        ]}"#,
    );
    let fail = run(&["check", "prop1", "--input", p(&bell), "--bipartition", "2x2"]);
    assert_eq!(fail.exit_code, 1);
    assert_eq!(json(&fail)["pass"], Value::Bool(false));
}

#[test]
fn witness_output_maps_states_to_products() {
    let dir = TempDir::new().unwrap();
    let input = save(
        &dir,
        "set.json",
        r#"{"dim": 4, "labels": [], "states": [
            [[1,0],[0,0],[0,0],[0,0]],
            [[0,0],[1,0],[0,0],[0,0]],
            [[0.6,0],[0.8,0],[0,0],[0,0]],
            [[0,0],[0,0],[0.5,0],[0.5,0.70710678118654757]]
        ]}"#,
    );
    let r = run(&["witness", "prop1", "--input", p(&input), "--bipartition", "2x2", "--index", "4"]);
    assert_eq!(r.exit_code, 0, "{}", r.stderr);
    let v = json(&r);
    let u: Unitary = serde_json::from_value(v["unitary"].clone()).unwrap();
    let set = serde_json::from_str::<StateFile>(&std::fs::read_to_string(&input).unwrap())
        .unwrap()
        .to_set()
        .unwrap();
    let bip = Bipartition::new(2, 2).unwrap();
    for s in set.states() {
        assert!(product_defect(&u.apply(s), bip).unwrap() < 1e-10);
    }
}

#[test]
fn embedding_requires_parts() {
    let dir = TempDir::new().unwrap();
    let states = r#"[[1,0],[0,0],[0,0],[0,0]],
                    [[0,0],[0.6,0],[0.8,0],[0,0]],
                    [[0,0],[0,0],[0,0],[1,0]]"#;
    let bare = save(&dir, "bare.json", &format!(r#"{{"dim": 4, "labels": [], "states": [{states}]}}"#));
    let r = run(&["embed", "prop2", "--input", p(&bare), "--bipartition", "2x2"]);
    assert_eq!(r.exit_code, 2);

    let parted = save(
        &dir,
        "parts.json",
        &format!(r#"{{"dim": 4, "labels": [], "states": [{states}], "parts": [[0, 1], [2]]}}"#),
    );
    let r = run(&["embed", "prop2", "--input", p(&parted), "--bipartition", "2x2"]);
    assert_eq!(r.exit_code, 0, "{}", r.stderr);
    assert!(json(&r)["unitary"].is_array());
}

#[test]
fn polynomial_commands() {
    let r = run(&["poly", "pair", "--p", "2", "--indices", "1,2,3,4", "--roots"]);
    assert_eq!(r.exit_code, 0, "{}", r.stderr);
    assert_eq!(json(&r)["roots"].as_array().unwrap().len(), 7);

    let r = run(&["poly", "general", "--p", "7", "--h", "1,2", "--g", "3,4"]);
    assert_eq!(r.exit_code, 0, "{}", r.stderr);

    let r = run(&["poly", "pair", "--p", "2", "--indices", "1,1,3,4"]);
    assert_eq!(r.exit_code, 2);

    let r = run(&["excluded", "--p", "2"]);
    assert_eq!(r.exit_code, 0);
    assert_eq!(json(&r)["count"], 15);
}

#[test]
fn feng_pipeline() {
    let dir = TempDir::new().unwrap();
    let r = run(&["feng", "gen", "--n", "4", "--partition", "1,3", "--seed", "2"]);
    assert_eq!(r.exit_code, 0, "{}", r.stderr);
    let basis = save(&dir, "basis.json", &r.stdout);
    let r = run(&["feng", "validate", "--input", p(&basis)]);
    assert_eq!(r.exit_code, 0, "{}", r.stdout);

    let states: Vec<Value> = serde_json::from_str::<Value>(&std::fs::read_to_string(&basis).unwrap()).unwrap()["blocks"]
        .as_array()
        .unwrap()
        .to_vec();
    assert_eq!(states.len(), 2);

    let r = run(&["feng", "gen", "--n", "4", "--partition", "1,2"]);
    assert_eq!(r.exit_code, 2);
}

#[test]
fn search_verdicts_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let parted = save(
        &dir,
        "easy.json",
        r#"{"dim": 4, "labels": [], "states": [
            [[0.6,0],[0.8,0],[0,0],[0,0]],
            [[0,0],[0,0],[0,0],[1,0]]
        ]}"#,
    );
    let r = run(&["search", "--input", p(&parted), "--bipartition", "2x2", "--restarts", "4"]);
    assert_eq!(r.exit_code, 0, "{}", r.stderr);
    assert_eq!(json(&r)["verdict"], "ProductMappingFound");

    let thm1 = save(&dir, "thm1.json", &run(&["construct", "thm1", "--d", "4", "--a", "0.8", "--b", "0.6"]).stdout);
    let r = run(&["search", "--input", p(&thm1), "--bipartition", "2x2", "--restarts", "4"]);
    assert_eq!(r.exit_code, 1);
    let v = json(&r);
    assert_eq!(v["verdict"], "NoMappingFound");
    assert!(v["note"].as_str().unwrap().starts_with("evidence"));
}

#[test]
fn bad_input_is_reported() {
    assert_eq!(run(&["construct", "thm1", "--d", "5", "--a", "0.8", "--b", "0.6"]).exit_code, 2);
    assert_eq!(run(&["construct", "ex1", "--x", "1.5"]).exit_code, 2);
    assert_eq!(run(&["check", "prop1", "--input", "/nonexistent.json", "--bipartition", "2x2"]).exit_code, 2);
    assert_eq!(run(&["frobnicate"]).exit_code, 2);
}

#[test]
fn binary_matches_library_dispatch() {
    let out = Command::new(env!("CARGO_BIN_EXE_abset"))
        .args(["feng", "gen", "--n", "3", "--partition", "2,1", "--seed", "5"])
        .output()
        .unwrap();
    let lib = run(&["feng", "gen", "--n", "3", "--partition", "2,1", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(lib.exit_code));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), lib.stdout);

    let out = Command::new(env!("CARGO_BIN_EXE_abset")).args(["table1", "--tol", "-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
