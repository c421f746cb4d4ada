//! Dataset, configuration and model files from end to end.

use std::fs;

use psaem_core::io::{load_dataset, load_model, save_dataset, save_model, RunConfig};
use psaem_core::psaem_identify;
use psaem_core::systems::generate_example1;

#[test]
fn config_run_and_model_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generate_example1(200, 8);
    save_dataset(&data, &dir.path().join("train.csv")).unwrap();
    let config_path = dir.path().join("run.toml");
    fs::write(
        &config_path,
        r#"
dataset = "train.csv"
n_x = 1
iterations = 20
seed = 6
trace_period = 5

[[basis_x]]
kind = "fourier"
m = 4

[[basis_x]]
kind = "linear"

[prior]
scheme = "frequency_squared"
lambda = 0.1

[state]
mask = [[true, true, true, true, false]]
coefficients = [[0.0, 0.0, 0.0, 0.0, 0.0]]

[measurement]
learn = false
coefficients = [[0.0, 0.0, 0.0, 0.0, 1.0]]
noise = [[0.5]]
learn_noise = false
"#,
    )
    .unwrap();

    let (config, warnings) = RunConfig::load_with_warnings(&config_path).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    let loaded = load_dataset(config.dataset.as_ref().unwrap()).unwrap();
    assert_eq!(loaded, data);

    let run = config.build(&loaded).unwrap();
    // half-width defaults to 1.5 max|y|
    let l = run.init_model.basis_x.blocks[0].spec.half_width;
    assert_eq!(l, 1.5 * data.max_abs_output());

    let result = psaem_identify(&loaded, &run).unwrap();
    assert_eq!(result.records.len(), 20);
    assert_eq!(result.trace.len(), 4);
    assert_eq!(result.model.gamma_f[(0, 4)], 0.0);
    assert_eq!(result.model.gamma_g[(0, 4)], 1.0);
    assert_eq!(result.model.r[(0, 0)], 0.5);

    let model_path = dir.path().join("model.json");
    save_model(&result.model, &model_path).unwrap();
    assert_eq!(load_model(&model_path).unwrap(), result.model);
}
