//! Dataset, model, configuration and result files.
//!
//! * datasets: CSV with a header naming `u1..u{n_u}` and `y1..y{n_y}`;
//! * models: JSON document tagged `"format": "psaem-model/1"`, matrices as
//!   arrays of rows, numbers written in shortest round-trip form;
//! * run configuration: TOML;
//! * traces and diagnostics: JSON lines, one record per line;
//! * function grids: CSV with header `x,f`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisBlock, BasisKind, BasisSet, BasisSpec, Composition, PriorSpec};
use crate::em::{GammaSchedule, IterationRecord, PsaemConfig, TraceEntry};
use crate::error::{Error, Result};
use crate::model::{Dataset, EquationStructure, ModelParams, StructureSpec};
use crate::smc::Resampling;

pub const MODEL_FORMAT: &str = "psaem-model/1";

/// Multiplier applied to the largest observed magnitude when a Fourier
/// half-width is not configured.
pub const DEFAULT_HALF_WIDTH_FACTOR: f64 = 1.5;

// ---------------------------------------------------------------- datasets

/// Names the file in an I/O error, keeping its kind.
fn at_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(File::open(path).map_err(|e| at_path(path, e))?)
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Format("empty dataset file".into()));
    }
    // column index in file -> (is_input, 0-based channel)
    let mut columns = Vec::with_capacity(headers.len());
    for name in headers.iter() {
        let parsed = parse_column_name(name).ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("unexpected column name {name:?}; expected u<k> or y<k>"),
        })?;
        columns.push(parsed);
    }
    let n_u = channel_count(&columns, true)?;
    let n_y = channel_count(&columns, false)?;
    if n_y == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "dataset has no output (y) columns".into(),
        });
    }

    let mut u = Vec::new();
    let mut y = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut urow = vec![0.0; n_u];
        let mut yrow = vec![0.0; n_y];
        for (cell, &(is_input, ch)) in record.iter().zip(&columns) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("non-numeric cell {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite value {cell:?}"),
                });
            }
            if is_input {
                urow[ch] = v;
            } else {
                yrow[ch] = v;
            }
        }
        u.extend(urow);
        y.extend(yrow);
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Format("dataset has a header but no samples".into()));
    }
    Dataset::new(
        DMatrix::from_row_slice(rows, n_u, &u),
        DMatrix::from_row_slice(rows, n_y, &y),
    )
}

fn parse_column_name(name: &str) -> Option<(bool, usize)> {
    let (is_input, rest) = match name.as_bytes().first()? {
        b'u' => (true, &name[1..]),
        b'y' => (false, &name[1..]),
        _ => return None,
    };
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) || rest.starts_with('0') {
        return None;
    }
    Some((is_input, rest.parse::<usize>().ok()? - 1))
}

fn channel_count(columns: &[(bool, usize)], inputs: bool) -> Result<usize> {
    let mut seen: Vec<usize> = columns.iter().filter(|c| c.0 == inputs).map(|c| c.1).collect();
    seen.sort_unstable();
    let letter = if inputs { 'u' } else { 'y' };
    for (k, &ch) in seen.iter().enumerate() {
        if ch != k {
            return Err(Error::Parse {
                line: 1,
                msg: format!("{letter} columns must be numbered 1..n without gaps or repeats"),
            });
        }
    }
    Ok(seen.len())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            msg: format!("ragged row: expected {expected_len} fields, found {len}"),
        },
        csv::ErrorKind::Io(_) => Error::Io(std::io::Error::other(e.to_string())),
        _ => Error::Parse {
            line,
            msg: e.to_string(),
        },
    }
}

pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let names: Vec<String> = (1..=data.n_u())
        .map(|k| format!("u{k}"))
        .chain((1..=data.n_y()).map(|k| format!("y{k}")))
        .collect();
    writeln!(w, "{}", names.join(","))?;
    for t in 0..data.len() {
        let cells: Vec<String> = data
            .u
            .row(t)
            .iter()
            .chain(data.y.row(t).iter())
            .map(|v| format!("{v:?}"))
            .collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a `T × n_x` state sequence as CSV with header `x1..x{n_x}`.
pub fn write_states<W: Write>(states: &DMatrix<f64>, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let names: Vec<String> = (1..=states.ncols()).map(|k| format!("x{k}")).collect();
    writeln!(w, "{}", names.join(","))?;
    for row in states.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    write_dataset(data, File::create(path).map_err(|e| at_path(path, e))?)
}

// ------------------------------------------------------------------ models

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    n_x: usize,
    #[serde(default)]
    n_u: usize,
    n_y: usize,
    basis_x: BasisSet,
    #[serde(default)]
    basis_u: BasisSet,
    #[serde(rename = "Gamma_f")]
    gamma_f: Vec<Vec<f64>>,
    #[serde(rename = "Gamma_g")]
    gamma_g: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    init_mean: Vec<f64>,
    init_cov: Vec<Vec<f64>>,
}

const MODEL_KEYS: &[&str] = &[
    "format", "n_x", "n_u", "n_y", "basis_x", "basis_u", "Gamma_f", "Gamma_g", "Q", "R", "init_mean",
    "init_cov",
];

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(name: &'static str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::Dimension {
            what: name,
            expected: nrows,
            got: rows.len(),
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::Dimension {
            what: name,
            expected: ncols,
            got: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

pub fn model_to_json(model: &ModelParams) -> Result<String> {
    let doc = ModelDoc {
        format: MODEL_FORMAT.to_string(),
        n_x: model.n_x,
        n_u: model.n_u,
        n_y: model.n_y,
        basis_x: model.basis_x.clone(),
        basis_u: model.basis_u.clone(),
        gamma_f: rows_of(&model.gamma_f),
        gamma_g: rows_of(&model.gamma_g),
        q: rows_of(&model.q),
        r: rows_of(&model.r),
        init_mean: model.init_mean.iter().copied().collect(),
        init_cov: rows_of(&model.init_cov),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))
}

/// Parses a model document, returning it with warnings for unknown fields.
pub fn model_from_json(text: &str) -> Result<(ModelParams, Vec<String>)> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Format("model file must hold a JSON object".into()))?;
    match obj.get("format").and_then(|f| f.as_str()) {
        Some(MODEL_FORMAT) => {}
        Some(other) => {
            return Err(Error::Format(format!(
                "unsupported model format {other:?}; expected {MODEL_FORMAT:?}"
            )))
        }
        None => return Err(Error::Format("model file lacks a format tag".into())),
    }
    let warnings: Vec<String> = obj
        .keys()
        .filter(|k| !MODEL_KEYS.contains(&k.as_str()))
        .map(|k| format!("ignoring unknown model field {k:?}"))
        .collect();
    let doc: ModelDoc =
        serde_json::from_value(value).map_err(|e| Error::Format(format!("model file: {e}")))?;
    let q = doc.basis_x.feature_count() + doc.basis_u.feature_count();
    let model = ModelParams {
        n_x: doc.n_x,
        n_u: doc.n_u,
        n_y: doc.n_y,
        gamma_f: matrix_from_rows("Gamma_f", &doc.gamma_f, doc.n_x, q)?,
        gamma_g: matrix_from_rows("Gamma_g", &doc.gamma_g, doc.n_y, q)?,
        q: matrix_from_rows("Q", &doc.q, doc.n_x, doc.n_x)?,
        r: matrix_from_rows("R", &doc.r, doc.n_y, doc.n_y)?,
        init_mean: DVector::from_vec(doc.init_mean),
        init_cov: matrix_from_rows("init_cov", &doc.init_cov, doc.n_x, doc.n_x)?,
        basis_x: doc.basis_x,
        basis_u: doc.basis_u,
    };
    // a model that violates an invariant is a malformed file
    model.validate().map_err(|e| match e {
        Error::Invariant(_) | Error::Dimension { .. } | Error::InvalidArgument(_) => {
            Error::Format(format!("model file: {e}"))
        }
        other => other,
    })?;
    Ok((model, warnings))
}

pub fn save_model(model: &ModelParams, path: &Path) -> Result<()> {
    let mut text = model_to_json(model)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Loads and validates a model; unknown fields are logged and ignored.
pub fn load_model(path: &Path) -> Result<ModelParams> {
    let (model, warnings) = load_model_with_warnings(path)?;
    for w in warnings {
        warn!("{}: {w}", path.display());
    }
    Ok(model)
}

/// [`load_model`], returning the unknown-field warnings instead of logging.
pub fn load_model_with_warnings(path: &Path) -> Result<(ModelParams, Vec<String>)> {
    model_from_json(&std::fs::read_to_string(path).map_err(|e| at_path(path, e))?)
}

// ----------------------------------------------------------- run config

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub kind: Option<BasisKind>,
    pub m: Option<usize>,
    pub half_width: Option<f64>,
    pub dims: Option<usize>,
    pub composition: Option<Composition>,
    pub inputs: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationConfig {
    /// Learn the coefficients (subject to `mask`); false fixes them all.
    #[serde(default = "yes")]
    pub learn: bool,
    #[serde(default = "yes")]
    pub learn_noise: bool,
    /// Initial values, which are also the values of fixed entries.
    pub coefficients: Option<Vec<Vec<f64>>>,
    /// Per-entry learn flags.
    pub mask: Option<Vec<Vec<bool>>>,
    /// Initial (or fixed) noise covariance.
    pub noise: Option<Vec<Vec<f64>>>,
}

impl Default for EquationConfig {
    fn default() -> Self {
        EquationConfig {
            learn: true,
            learn_noise: true,
            coefficients: None,
            mask: None,
            noise: None,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_particles() -> usize {
    5
}

/// Identification run settings, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub n_x: usize,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trace_period: usize,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub resampling: Resampling,
    pub basis_x: Vec<BlockConfig>,
    #[serde(default)]
    pub basis_u: Vec<BlockConfig>,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub gamma: GammaSchedule,
    #[serde(default)]
    pub state: EquationConfig,
    #[serde(default)]
    pub measurement: EquationConfig,
    pub init_mean: Option<Vec<f64>>,
    pub init_cov: Option<Vec<Vec<f64>>>,
}

const CONFIG_KEYS: &[&str] = &[
    "dataset", "n_x", "particles", "iterations", "seed", "trace_period", "output_dir", "resampling",
    "basis_x", "basis_u", "prior", "gamma", "state", "measurement", "init_mean", "init_cov",
];
const BLOCK_KEYS: &[&str] = &["kind", "m", "half_width", "dims", "composition", "inputs"];
const PRIOR_KEYS: &[&str] = &["scheme", "lambda"];
const GAMMA_KEYS: &[&str] = &["exponent", "burn_in"];
const EQUATION_KEYS: &[&str] = &["learn", "learn_noise", "coefficients", "mask", "noise"];

fn unknown_keys(table: &toml::Table, known: &[&str], prefix: &str, out: &mut Vec<String>) {
    for key in table.keys() {
        if !known.contains(&key.as_str()) {
            out.push(format!("ignoring unknown config key {prefix}{key}"));
        }
    }
}

impl RunConfig {
    /// Parses TOML text, returning warnings for unknown keys.
    pub fn from_toml_str(text: &str) -> Result<(RunConfig, Vec<String>)> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_error(&e, text))?;
        let mut warnings = Vec::new();
        unknown_keys(&table, CONFIG_KEYS, "", &mut warnings);
        for section in ["basis_x", "basis_u"] {
            if let Some(toml::Value::Array(blocks)) = table.get(section) {
                for (i, b) in blocks.iter().enumerate() {
                    if let toml::Value::Table(t) = b {
                        unknown_keys(t, BLOCK_KEYS, &format!("{section}[{i}]."), &mut warnings);
                    }
                }
            }
        }
        for (section, keys) in [
            ("prior", PRIOR_KEYS),
            ("gamma", GAMMA_KEYS),
            ("state", EQUATION_KEYS),
            ("measurement", EQUATION_KEYS),
        ] {
            if let Some(toml::Value::Table(t)) = table.get(section) {
                unknown_keys(t, keys, &format!("{section}."), &mut warnings);
            }
        }
        let config: RunConfig = toml::from_str(text).map_err(|e| config_error(&e, text))?;
        Ok((config, warnings))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Loads a config file. Relative `dataset` and `output_dir` paths are
    /// resolved against the file's directory; the dataset must exist.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let (config, warnings) = RunConfig::load_with_warnings(path)?;
        for w in warnings {
            warn!("{}: {w}", path.display());
        }
        Ok(config)
    }

    /// [`RunConfig::load`], returning unknown-key warnings instead of logging.
    pub fn load_with_warnings(path: &Path) -> Result<(RunConfig, Vec<String>)> {
        let text = std::fs::read_to_string(path).map_err(|e| at_path(path, e))?;
        let (mut config, warnings) = RunConfig::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(dir) = &config.output_dir {
            if dir.is_relative() {
                config.output_dir = Some(base.join(dir));
            }
        }
        if let Some(ds) = &config.dataset {
            let resolved = if ds.is_relative() {
                base.join(ds)
            } else {
                ds.clone()
            };
            if !resolved.exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("dataset {} does not exist", resolved.display()),
                )));
            }
            config.dataset = Some(resolved);
        }
        Ok((config, warnings))
    }

    /// Builds the identification settings for `data`.
    pub fn build(&self, data: &Dataset) -> Result<PsaemConfig> {
        if self.n_x == 0 {
            return Err(Error::InvalidArgument("n_x must be at least 1".into()));
        }
        if self.particles == 0 {
            return Err(Error::InvalidArgument("particles must be at least 1".into()));
        }
        let y_scale = data.max_abs_output();
        let u_scale = data.u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let basis_x = build_basis(&self.basis_x, self.n_x, y_scale, "basis_x")?;
        let basis_u = build_basis(&self.basis_u, data.n_u(), u_scale, "basis_u")?;
        let mut model = ModelParams::initial_guess(self.n_x, basis_x, basis_u, data);
        let q = model.regressor_len();

        let state = apply_equation(&self.state, &mut model.gamma_f, &mut model.q, q, "state")?;
        let measurement = apply_equation(&self.measurement, &mut model.gamma_g, &mut model.r, q, "measurement")?;
        if let Some(mean) = &self.init_mean {
            if mean.len() != self.n_x {
                return Err(Error::Dimension {
                    what: "init_mean",
                    expected: self.n_x,
                    got: mean.len(),
                });
            }
            model.init_mean = DVector::from_vec(mean.clone());
        }
        if let Some(cov) = &self.init_cov {
            model.init_cov = matrix_from_rows("init_cov", cov, self.n_x, self.n_x)?;
        }
        model.validate()?;
        let config = PsaemConfig {
            particles: self.particles,
            iterations: self.iterations,
            gamma: self.gamma,
            prior: self.prior,
            structure: StructureSpec { state, measurement },
            seed: self.seed,
            init_model: model,
            trace_period: self.trace_period,
            resampling: self.resampling,
            init_trajectory: None,
        };
        config.validate()?;
        Ok(config)
    }
}

fn config_error(e: &toml::de::Error, text: &str) -> Error {
    let line = e
        .span()
        .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    Error::Parse {
        line,
        msg: e.message().to_string(),
    }
}

fn build_basis(blocks: &[BlockConfig], input_dim: usize, scale: f64, section: &str) -> Result<BasisSet> {
    let mut set = BasisSet::empty();
    for (i, b) in blocks.iter().enumerate() {
        let kind = b
            .kind
            .ok_or_else(|| Error::InvalidArgument(format!("{section}[{i}] lacks a kind")))?;
        let dims = b
            .dims
            .or_else(|| b.inputs.as_ref().map(Vec::len))
            .unwrap_or(input_dim);
        let spec = match kind {
            BasisKind::Linear => BasisSpec::linear(dims),
            BasisKind::Constant => BasisSpec::constant(),
            BasisKind::Fourier => {
                let m = b
                    .m
                    .ok_or_else(|| Error::InvalidArgument(format!("{section}[{i}] needs m")))?;
                let half_width = b.half_width.unwrap_or_else(|| {
                    let l = DEFAULT_HALF_WIDTH_FACTOR * scale;
                    if l > 0.0 {
                        l
                    } else {
                        1.0
                    }
                });
                BasisSpec::fourier_nd(m, half_width, dims, b.composition.unwrap_or_default())
            }
        };
        if let Some(m) = b.m {
            if m != spec.m {
                return Err(Error::InvalidArgument(format!(
                    "{section}[{i}]: m = {m} conflicts with a {kind:?} block of {dims} dims"
                )));
            }
        }
        set.blocks.push(BasisBlock {
            spec,
            inputs: b.inputs.clone(),
        });
    }
    set.validate(input_dim)?;
    Ok(set)
}

fn apply_equation(
    cfg: &EquationConfig,
    gamma: &mut DMatrix<f64>,
    noise: &mut DMatrix<f64>,
    q: usize,
    name: &'static str,
) -> Result<EquationStructure> {
    let p = gamma.nrows();
    if let Some(rows) = &cfg.coefficients {
        *gamma = matrix_from_rows(if name == "state" { "state.coefficients" } else { "measurement.coefficients" }, rows, p, q)?;
    }
    if let Some(rows) = &cfg.noise {
        *noise = matrix_from_rows(if name == "state" { "state.noise" } else { "measurement.noise" }, rows, p, p)?;
    }
    let mask = match (&cfg.mask, cfg.learn) {
        (_, false) => DMatrix::from_element(p, q, false),
        (None, true) => DMatrix::from_element(p, q, true),
        (Some(rows), true) => {
            if rows.len() != p || rows.iter().any(|r| r.len() != q) {
                return Err(Error::Dimension {
                    what: "structure mask",
                    expected: p * q,
                    got: rows.iter().map(Vec::len).sum(),
                });
            }
            DMatrix::from_fn(p, q, |r, c| rows[r][c])
        }
    };
    Ok(EquationStructure::masked(gamma, &mask, cfg.learn_noise))
}

// ------------------------------------------------------ traces and grids

#[derive(Serialize)]
struct TraceRecord {
    k: usize,
    #[serde(rename = "Gamma_f")]
    gamma_f: Vec<Vec<f64>>,
    #[serde(rename = "Gamma_g")]
    gamma_g: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
}

pub fn write_trace<W: Write>(trace: &[TraceEntry], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for entry in trace {
        let rec = TraceRecord {
            k: entry.k,
            gamma_f: rows_of(&entry.model.gamma_f),
            gamma_g: rows_of(&entry.model.gamma_g),
            q: rows_of(&entry.model.q),
            r: rows_of(&entry.model.r),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics<W: Write>(records: &[IterationRecord], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_diagnostics<R: Read>(reader: R) -> Result<Vec<IterationRecord>> {
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// `(x, f_x(x)[dimension])` along state coordinate `dimension`, all other
/// coordinates held at zero.
pub fn function_grid(model: &ModelParams, dimension: usize, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if dimension >= model.n_x {
        return Err(Error::Dimension {
            what: "grid dimension",
            expected: model.n_x,
            got: dimension,
        });
    }
    let mut x = vec![0.0; model.n_x];
    grid.iter()
        .map(|&g| {
            if !g.is_finite() || !model.basis_x.in_domain(dimension, g) {
                return Err(Error::InvalidArgument(format!("grid point {g} lies outside the basis domain")));
            }
            x[dimension] = g;
            Ok((g, model.state_fn_x(&x)?[dimension]))
        })
        .collect()
}

pub fn export_function_grid(model: &ModelParams, dimension: usize, grid: &[f64], path: &Path) -> Result<()> {
    let points = function_grid(model, dimension, grid)?;
    write_function_grid(&points, File::create(path).map_err(|e| at_path(path, e))?)
}

pub fn write_function_grid<W: Write>(points: &[(f64, f64)], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "x,f")?;
    for (x, f) in points {
        writeln!(w, "{x:?},{f:?}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_function_grid(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("non-numeric cell {s:?}"),
            })
        };
        out.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    Ok(out)
}

/// Summary of the fields of a JSON object, by key (used for reports).
pub fn to_json_map<T: Serialize>(value: &T) -> BTreeMap<String, serde_json::Value> {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::Object(m)) => m.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}
