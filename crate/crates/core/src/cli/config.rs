//! Run configuration (TOML). Unknown keys are rejected and every error
//! carries the key path.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::domain::grid::Face;
use crate::error::{Error, Result};
use crate::forward::solver::TimeScheme;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub equation: EquationBlock,
    pub grid: GridBlock,
    pub source: Option<SourceBlock>,
    #[serde(default)]
    pub forward: ForwardBlock,
    #[serde(default)]
    pub reduction: ReductionBlock,
    pub carleman: Option<CarlemanBlock>,
    pub inverse: Option<InverseBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

/// `a` is either one expression (isotropic `a I`) or a 2x2 array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorSpec {
    Scalar(String),
    Matrix([[String; 2]; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationBlock {
    pub rho1: f64,
    pub rho2: f64,
    pub a: Option<TensorSpec>,
    pub b: Option<Vec<String>>,
    pub c: Option<String>,
    /// Optional lower bound `m` in the ellipticity check.
    pub ellipticity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dim: usize,
    pub extents: Vec<[f64; 2]>,
    pub n_cells: Vec<usize>,
    pub gamma: Vec<Face>,
    pub t_final: f64,
    pub n_steps: usize,
    pub t0_index: usize,
    /// Defaults to `T / 8`.
    pub delta: Option<f64>,
}

/// Either `f` and `r` (separated source `f(x) R(x, t)`) or `g(x, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceBlock {
    pub f: Option<String>,
    pub r: Option<String>,
    pub g: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardBlock {
    #[serde(default)]
    pub scheme: TimeScheme,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Exact solution; enables the convergence table.
    pub exact: Option<String>,
    /// Number of successive halvings of `h` and `dt`.
    #[serde(default)]
    pub refinements: usize,
}

impl Default for ForwardBlock {
    fn default() -> Self {
        Self {
            scheme: TimeScheme::default(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            exact: None,
            refinements: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionBlock {
    /// Defaults to `T / 32`.
    pub t_cut: Option<f64>,
    #[serde(default = "default_layers")]
    pub boundary_layers: usize,
    #[serde(default)]
    pub refinements: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanBlock {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Extra values of `lambda` to sweep; defaults to `[lambda]`.
    pub lambdas: Option<Vec<f64>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub omega_lo: Vec<f64>,
    pub omega_hi: Vec<f64>,
    #[serde(default = "default_extension")]
    pub extension: f64,
    #[serde(default = "default_s_sweep")]
    pub s_sweep: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Value(f64),
    Keyword(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Tikhonov,
    Landweber,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseBlock {
    pub basis_size: usize,
    /// Box carrying the basis; defaults to the middle half of the domain.
    pub omega_lo: Option<Vec<f64>>,
    pub omega_hi: Option<Vec<f64>>,
    /// Optional observation sub-domain; defaults to the whole domain.
    pub observe_lo: Option<Vec<f64>>,
    pub observe_hi: Option<Vec<f64>>,
    /// A positive number or `"auto"` (discrepancy principle).
    #[serde(default = "default_alpha")]
    pub alpha: AlphaSpec,
    /// Relative H⁴ size of the noise added to the data by `invert`.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub method: MethodName,
    #[serde(default = "default_landweber_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_noise_levels")]
    pub noise_levels: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "M", alias = "prior_m", default = "default_prior")]
    pub prior_m: f64,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_true")]
    pub mitigate_inverse_crime: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

fn default_tol() -> f64 {
    1e-12
}
fn default_max_iter() -> usize {
    5000
}
fn default_layers() -> usize {
    2
}
fn default_lambda() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    0.5
}
fn default_extension() -> f64 {
    2.4
}
fn default_s_sweep() -> Vec<f64> {
    vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_alpha() -> AlphaSpec {
    AlphaSpec::Keyword("auto".into())
}
fn default_landweber_iter() -> usize {
    10_000
}
fn default_tau() -> f64 {
    crate::inverse::DEFAULT_TAU
}
fn default_noise_levels() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
}
fn default_trials() -> usize {
    8
}
fn default_prior() -> f64 {
    1e3
}
fn default_r_min() -> f64 {
    1e-3
}
fn default_true() -> bool {
    true
}
fn default_directory() -> PathBuf {
    PathBuf::from("output")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            path: String::new(),
            message: e.message().to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config {
                path: if path == "." { String::new() } else { path },
                message: e.into_inner().message().to_string(),
            }
        })
    }
}

pub fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}
