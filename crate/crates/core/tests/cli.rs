use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_realflag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn solve_json(flag: &str) -> Value {
    let o = run(&["solve", flag, "--json", "-"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn lagrangian_flag_has_no_solutions() {
    let v = solve_json("C:4:[4]:-");
    assert_eq!(v["result"]["solutions"].as_array().unwrap().len(), 0);
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn json_report_lists_the_branches() {
    let v = solve_json("A:3:[2,1,1]:-");
    let ids: Vec<&str> = v["result"]["solutions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["rule_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["E1", "E2", "E3", "E4", "E5"]);
    assert_eq!(v["result"]["catalog_check"]["agrees"], true);
    let groups = v["result"]["equivalence_groups"].as_array().unwrap();
    assert!(groups
        .iter()
        .any(|g| g["status"] == "WitnessedEquivalent" && g["members"].as_array().unwrap().len() == 4));
}

#[test]
fn json_is_deterministic_apart_from_timing() {
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("timing_seconds");
        v
    };
    assert_eq!(strip(solve_json("B:4:[4]:-")), strip(solve_json("B:4:[4]:-")));
}

#[test]
fn json_can_be_written_to_a_file() {
    let path = std::env::temp_dir().join(format!("realflag-cli-{}.json", std::process::id()));
    let o = run(&["solve", "B:3:[3]:-", "--json", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("mu-half"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(v["result"]["solutions"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["solve", "A:3:[2,2]"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "X:3:[3]:-"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "A:4:[1,1,1,2]:-"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "B:4:[2,2]:+"]).status.code(), Some(2));
    assert_eq!(run(&["check", "B:4:[1,3]:+"]).status.code(), Some(0));
    // the computed commutant is larger than the declared summand structure
    let o = run(&["check", "B:3:[3]:-"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL commutant-dimension"));
}

#[test]
fn solve_modes_agree() {
    for mode in ["--numeric", "--closed-form", "--both"] {
        let o = run(&["solve", "B:5:[5]:-", mode]);
        assert_eq!(o.status.code(), Some(0), "{mode}");
        let out = stdout(&o);
        assert!(
            out.contains("mu-half") && out.contains("mu-ratio") || mode == "--numeric",
            "{mode}: {out}"
        );
    }
}

#[test]
fn list_shows_canonical_specs() {
    let out = stdout(&run(&["list", "B", "5"]));
    assert!(out
        .lines()
        .any(|l| l.starts_with("B:5:[1,4]:+last") && l.contains("SO(5)xSO(6)/SO(4)xSO(5)")));
    assert!(out.lines().any(|l| l.starts_with("B:5:[5]:-last")));
    assert_eq!(run(&["list", "Q", "5"]).status.code(), Some(2));
}

#[test]
fn table_csv() {
    let path = std::env::temp_dir().join(format!("realflag-table-{}.csv", std::process::id()));
    let o = run(&["table1", "--max-l", "3", "--csv", path.to_str().unwrap()]);
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rows.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "flag",
            "summands",
            "equiv",
            "count",
            "normal_einstein",
            "expected_count",
            "match"
        ]
    );
    let records: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    let so4 = records.iter().find(|r| &r[0] == "A:3:[2,2]:-last").unwrap();
    assert_eq!((&so4[3], &so4[6]), ("1", "MATCH"));
    let a2 = records.iter().find(|r| &r[0] == "A:2:[1,1,1]:-last").unwrap();
    assert_eq!((&a2[4], &a2[6]), ("true", "MISMATCH"));
    // mismatches are reported, not errors
    assert!(stdout(&o).contains("| A:3:[2,2]:-last"));
    assert_eq!(o.status.code(), Some(0));
}
