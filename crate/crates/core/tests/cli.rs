use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const ROAD: &str = "grid_len=1\nsensor_range=6\nsensor_fov_deg=60\n\
................\n\
SSSSSSSSSSSSSSSS\n\
SSSSSSSSSSSSSSSS\n\
................\n";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sensorplace")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn file(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[test]
fn missing_and_malformed_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["optimize", "/no/such/file.scn"]).status.code(), Some(2));
    let bad = file(&dir, "bad.scn", "grid_len=1\nsensor_range=oops\n..S\n");
    let out = run(&["optimize", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let cfg = file(&dir, "bad.cfg", "population_size=many\n");
    let road = file(&dir, "road.scn", ROAD);
    assert_eq!(run(&["optimize", &road, "-c", &cfg]).status.code(), Some(2));
}

#[test]
fn scenario_without_free_cells_exits_3() {
    let dir = TempDir::new().unwrap();
    let s = file(&dir, "s.scn", "grid_len=1\nsensor_range=3\nsensor_fov_deg=40\nSSSS\n####\n");
    assert_eq!(run(&["optimize", &s]).status.code(), Some(3));
}

#[test]
fn optimize_render_evaluate_round_trip() {
    let dir = TempDir::new().unwrap();
    let road = file(&dir, "road.scn", ROAD);
    let result = dir.path().join("r.json").to_str().unwrap().to_string();
    let svg = dir.path().join("r.svg").to_str().unwrap().to_string();
    ok(&["optimize", &road, "--seed", "5", "-o", &result, "--svg", &svg]);

    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    let genes = doc["genes"].as_array().unwrap().len();
    assert!(genes > 0);
    assert_eq!(doc["c"], json!(1.0));
    assert_eq!(doc["seed"], json!(5));
    let stages: Vec<&str> = doc["stages"].as_array().unwrap().iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["genetic", "local_search", "final_local_search"]);

    let image = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(image.matches(r#"class="wedge""#).count(), genes);

    let rendered = dir.path().join("again.svg").to_str().unwrap().to_string();
    ok(&["render", &road, &result, "-o", &rendered]);
    assert_eq!(std::fs::read_to_string(&rendered).unwrap(), image);

    let ev: Value = serde_json::from_slice(&ok(&["evaluate", &result])).unwrap();
    assert_eq!(ev["matches_stored"], json!(true));
    assert_eq!(ev["fitness"], doc["fitness"]);
}

#[test]
fn render_rejects_genes_off_the_grid() {
    let dir = TempDir::new().unwrap();
    let road = file(&dir, "road.scn", ROAD);
    let mut doc: Value = serde_json::from_slice(&ok(&["optimize", &road])).unwrap();
    doc["genes"][0]["x"] = json!(99);
    let result = file(&dir, "r.json", &doc.to_string());
    let out = run(&["render", &road, &result, "-o", dir.path().join("x.svg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_reports_both_sides() {
    let dir = TempDir::new().unwrap();
    let road = file(&dir, "road.scn", ROAD);
    let doc: Value = serde_json::from_slice(&ok(&["compare", &road, "--masks", "1"])).unwrap();
    for side in ["pipeline", "greedy"] {
        assert_eq!(doc[side]["c"], json!(1.0));
        assert!(doc[side]["n_sens"].as_u64().unwrap() > 0);
    }
    let (a, b) = (doc["pipeline"]["c_eff"].as_f64().unwrap(), doc["greedy"]["c_eff"].as_f64().unwrap());
    assert!((doc["c_eff_gain"].as_f64().unwrap() - (a / b - 1.0)).abs() < 1e-12);
}

fn strip(range: u32) -> Value {
    json!({
        "id": format!("road{range}"),
        "kind": "straight_segment",
        "scenario": format!("grid_len=1\nsensor_range={range}\nsensor_fov_deg=40\n....\nSSSS\n....\n"),
        "solution": [],
    })
}

#[test]
fn mismatched_sensors_exit_4() {
    let dir = TempDir::new().unwrap();
    let lib = file(&dir, "lib.json", &json!({ "fragments": [strip(5), strip(6)] }).to_string());
    let layout = json!({
        "placements": [
            { "fragment": "road5", "offset": [0, 0] },
            { "fragment": "road6", "offset": [4, 0] },
        ],
        "connections": [
            { "a": { "placement": 0, "port": "E0" }, "b": { "placement": 1, "port": "W0" } },
        ],
    });
    let layout = file(&dir, "layout.json", &layout.to_string());
    assert_eq!(run(&["stitch", &layout, &lib]).status.code(), Some(4));
}

#[test]
fn single_fragment_stitch_returns_the_fragment_solution() {
    let dir = TempDir::new().unwrap();
    let library = fixture("city/library.json");
    let lib: Value = serde_json::from_str(&std::fs::read_to_string(&library).unwrap()).unwrap();
    let junction = lib["fragments"].as_array().unwrap().iter().find(|f| f["id"] == "junction").unwrap();
    let width = junction["scenario"]
        .as_str()
        .unwrap()
        .lines()
        .find(|l| !l.contains('='))
        .unwrap()
        .len() as u64;
    let cells = |genes: &Value| -> BTreeSet<(u64, u64)> {
        genes
            .as_array()
            .unwrap()
            .iter()
            .map(|g| (g["x"].as_u64().unwrap(), g["y"].as_u64().unwrap()))
            .collect()
    };
    let own = cells(&junction["solution"]);
    let mirrored: BTreeSet<(u64, u64)> = own.iter().map(|&(x, y)| (width - 1 - x, y)).collect();

    let layout = file(
        &dir,
        "one.json",
        &json!({ "placements": [{ "fragment": "junction", "offset": [0, 0] }] }).to_string(),
    );
    let out: Value = serde_json::from_slice(&ok(&["stitch", &layout, library.to_str().unwrap(), "--trials", "3"])).unwrap();
    let got = cells(&out["genes"]);
    assert!(got == own || got == mirrored, "{got:?}");
    let stages = out["stages"].as_array().unwrap();
    assert!(stages[1]["fitness"].as_f64().unwrap() >= stages[0]["fitness"].as_f64().unwrap());
}
