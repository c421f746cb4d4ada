use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn psaem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psaem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

/// Scalar model with a linear state feature and a known identity
/// measurement; `extra` is appended verbatim.
fn linear_config(dir: &Path, iterations: usize, a0: f64, extra: &str) -> PathBuf {
    let text = format!(
        "n_x = 1\nparticles = 5\niterations = {iterations}\nseed = 4\ninit_mean = [1.0]\n\
         [[basis_x]]\nkind = \"linear\"\n{extra}\n\
         [state]\ncoefficients = [[{a0:?}]]\nnoise = [[0.3]]\n\
         [measurement]\nlearn = false\nlearn_noise = false\ncoefficients = [[1.0]]\nnoise = [[0.1]]\n"
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn linear_data(dir: &Path, t: usize) -> PathBuf {
    let data = dir.join("data.csv");
    let out = psaem(&["generate", "--system", "linear", "--T", &t.to_string(), "--seed", "3", "--out", p(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

#[test]
fn generate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let out = psaem(&["generate", "--system", "example1", "--T", "50", "--seed", seed, "--out", p(&path)]);
        assert!(out.status.success());
        fs::read(path).unwrap()
    };
    let a = run("a.csv", "9");
    assert_eq!(a, run("b.csv", "9"));
    assert_ne!(a, run("c.csv", "10"));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 51);
}

#[test]
fn noise_free_linear_generation_is_geometric() {
    let dir = tempfile::tempdir().unwrap();
    let (data, states) = (dir.path().join("d.csv"), dir.path().join("x.csv"));
    let out = psaem(&[
        "generate", "--system", "linear", "--T", "4", "--a", "0.5", "--q", "0", "--r", "0", "--x1", "1",
        "--out", p(&data), "--states", p(&states),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(states).unwrap(), "x1\n1.0\n0.5\n0.25\n0.125\n");
    assert_eq!(fs::read_to_string(data).unwrap(), "y1\n1.0\n0.5\n0.25\n0.125\n");
}

#[test]
fn identify_writes_all_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = linear_data(dir.path(), 200);
    let config = linear_config(dir.path(), 30, 0.5, "");
    let run = |name: &str| {
        let model = dir.path().join(name);
        let out = psaem(&["--json", "identify", "--config", p(&config), "--data", p(&data), "--out-model", p(&model)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
        let doc = json_of(&out);
        assert_eq!(doc["status"], "ok");
        assert_eq!(doc["iterations"], 30);
        assert_eq!(doc["files"].as_array().unwrap().len(), 3);
        fs::read(model).unwrap()
    };
    let first = run("m1.json");
    assert_eq!(first, run("m2.json"));
    assert!(dir.path().join("m1.trace.jsonl").exists());
    let diagnostics = fs::read_to_string(dir.path().join("m1.diagnostics.jsonl")).unwrap();
    assert_eq!(diagnostics.lines().count(), 30);
}

#[test]
fn zero_iterations_returns_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = linear_data(dir.path(), 50);
    let config = linear_config(dir.path(), 0, 0.7, "");
    let model = dir.path().join("m.json");
    let out = psaem(&["identify", "--config", p(&config), "--data", p(&data), "--out-model", p(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&fs::read_to_string(model).unwrap()).unwrap();
    assert_eq!(doc["Gamma_f"], serde_json::json!([[0.7]]));
    assert_eq!(doc["Gamma_g"], serde_json::json!([[1.0]]));
    assert_eq!(doc["Q"], serde_json::json!([[0.3]]));
    assert_eq!(doc["R"], serde_json::json!([[0.1]]));
}

#[test]
fn output_dir_in_config_is_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    linear_data(dir.path(), 50);
    let config = linear_config(dir.path(), 2, 0.5, "");
    let mut text = fs::read_to_string(&config).unwrap();
    text = format!("output_dir = \"results\"\ndataset = \"data.csv\"\n{text}");
    fs::write(&config, text).unwrap();
    let out = psaem(&["identify", "--config", p(&config)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        listing(&dir.path().join("results")),
        ["model.diagnostics.jsonl", "model.json", "model.trace.jsonl"]
    );
}

#[test]
fn malformed_data_exits_3_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "y1\n0.5\nnot-a-number\n").unwrap();
    let config = linear_config(dir.path(), 5, 0.5, "");
    let model = dir.path().join("out").join("m.json");
    let out = psaem(&["--json", "identify", "--config", p(&config), "--data", p(&data), "--out-model", p(&model)]);
    assert_eq!(out.status.code(), Some(3));
    let doc = json_of(&out);
    assert_eq!(doc["status"], "error");
    assert_eq!(doc["exit_code"], 3);
    assert_eq!(doc["error"]["kind"], "parse");
    assert_eq!(doc["error"]["line"], 3);
    assert!(!dir.path().join("out").exists());
    assert_eq!(listing(dir.path()), ["bad.csv", "run.toml"]);
}

#[test]
fn malformed_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = linear_data(dir.path(), 20);
    let config = dir.path().join("run.toml");
    fs::write(&config, "n_x = 1\niterations = \"many\"\n").unwrap();
    let out = psaem(&["identify", "--config", p(&config), "--data", p(&data), "--out-model", p(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn rank_deficiency_exits_5_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = linear_data(dir.path(), 100);
    // two identical constant features make the normal equations singular
    let extra = "[[basis_x]]\nkind = \"constant\"\n[[basis_x]]\nkind = \"constant\"\n";
    let config = linear_config(dir.path(), 5, 0.5, extra);
    let text = fs::read_to_string(&config)
        .unwrap()
        .replace("coefficients = [[0.5]]", "coefficients = [[0.5, 0.0, 0.0]]")
        .replace("coefficients = [[1.0]]", "coefficients = [[1.0, 0.0, 0.0]]");
    fs::write(&config, text).unwrap();
    let model = dir.path().join("m.json");
    let out = psaem(&["--json", "identify", "--config", p(&config), "--data", p(&data), "--out-model", p(&model)]);
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = json_of(&out);
    assert_eq!(doc["error"]["kind"], "rank_deficient");
    assert_eq!(doc["error"]["equation"], "state");
    assert_eq!(listing(dir.path()), ["data.csv", "run.toml"]);
}

/// A model file with `x' = a·x`, `y = x` and no noise.
fn unstable_model(dir: &Path, a: f64) -> PathBuf {
    let data = linear_data(dir, 10);
    let config = linear_config(dir, 0, a, "");
    let model = dir.join(format!("a{a}.json"));
    let out = psaem(&["identify", "--config", p(&config), "--data", p(&data), "--out-model", p(&model)]);
    assert!(out.status.success());
    model
}

#[test]
fn divergent_simulation_exits_4_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = unstable_model(dir.path(), 1e10);
    let before = listing(dir.path());
    let out_path = dir.path().join("sim.csv");
    let out = psaem(&["--json", "simulate", "--model", p(&model), "--T", "100", "--x1", "1", "--out", p(&out_path)]);
    assert_eq!(out.status.code(), Some(4));
    let doc = json_of(&out);
    assert_eq!(doc["error"]["kind"], "divergence");
    assert!(doc["error"]["time"].as_u64().unwrap() < 100);
    assert_eq!(listing(dir.path()), before);
}

#[test]
fn compare_ranks_diverged_models_last() {
    let dir = tempfile::tempdir().unwrap();
    let good = unstable_model(dir.path(), 0.9);
    let bad = unstable_model(dir.path(), 1e40);
    let data = dir.path().join("data.csv");
    let out = psaem(&["--json", "compare", "--models", p(&bad), p(&good), "--data", p(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = json_of(&out);
    let models = doc["models"].as_array().unwrap();
    assert_eq!(models[0]["model"], p(&good));
    assert!(models[1]["failure"].as_str().unwrap().contains("divergence"));
}

#[test]
fn evaluate_reports_grid_rmse_against_itself_as_zero() {
    let dir = tempfile::tempdir().unwrap();
    let model = unstable_model(dir.path(), 0.9);
    let data = dir.path().join("data.csv");
    let grid = dir.path().join("grid.csv");
    let out = psaem(&[
        "--json", "evaluate", "--model", p(&model), "--data", p(&data), "--truth-model", p(&model),
        "--interval=-1,1", "--grid-points", "5", "--export-grid", p(&grid),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = json_of(&out);
    assert_eq!(doc["grid_rmse"]["value"], 0.0);
    assert!(doc["prediction_rmse"].as_f64().unwrap().is_finite());
    let text = fs::read_to_string(grid).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().nth(1).unwrap().starts_with("-1.0,-0.9"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = linear_data(dir.path(), 10);
    assert_eq!(psaem(&["generate", "--system", "bogus", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(psaem(&["generate", "--system", "example1", "--out", p(&data)]).status.code(), Some(2));
    let clash = psaem(&["generate", "--system", "linear", "--T", "5", "--out", p(&data), "--states", p(&data)]);
    assert_eq!(clash.status.code(), Some(2));
    // the output would overwrite the input
    let model = unstable_model(dir.path(), 0.5);
    let out = psaem(&["simulate", "--model", p(&model), "--T", "5", "--out", p(&model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("overwrite"));
}

#[test]
fn missing_input_file_exits_3_naming_it() {
    let out = psaem(&["--json", "simulate", "--model", "/nonexistent/m.json", "--T", "5", "--out", "/nonexistent/o.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let doc = json_of(&out);
    assert_eq!(doc["error"]["kind"], "io");
    assert!(doc["error"]["message"].as_str().unwrap().contains("/nonexistent/m.json"));
}

#[test]
fn invalid_model_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let model = unstable_model(dir.path(), 0.5);
    let text = fs::read_to_string(&model).unwrap();
    let mut doc: Value = serde_json::from_str(&text).unwrap();
    doc["Q"] = serde_json::json!([[-1.0]]);
    fs::write(&model, doc.to_string()).unwrap();
    let out = psaem(&["--json", "simulate", "--model", p(&model), "--T", "5", "--out", p(&dir.path().join("s.csv"))]);
    assert_eq!(out.status.code(), Some(3));
    let doc = json_of(&out);
    assert_eq!(doc["error"]["kind"], "format");
    assert!(doc["error"]["message"].as_str().unwrap().contains("Q positive definite"));
}
