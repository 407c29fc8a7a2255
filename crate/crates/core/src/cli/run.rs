//! Subcommand pipelines. A run validates the whole configuration, then
//! computes, then writes every artifact at once, so a failed run leaves no
//! partial output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::info;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::carleman::{
    build_level_sets, build_weight, check_combined_carleman, check_elliptic_carleman, check_parabolic_carleman,
    random_space_time_field, random_spatial_field, CarlemanConfig, CarlemanGeometry, RatioReport,
};
use crate::domain::elliptic::{EllipticCoefficients, EllipticOperator};
use crate::domain::field::{Field, Snapshot};
use crate::domain::grid::{NodeMask, SpatialGrid, TimeGrid};
use crate::domain::io::{snapshot_to_csv, snapshot_to_json, write_text};
use crate::domain::norms::sobolev_norm_values;
use crate::error::{Error, Result};
use crate::forward::equation::{EquationCoefficients, SourceSpec};
use crate::forward::solver::{solve_forward_with, SolveOptions};
use crate::inverse::{
    error_h2, h4, r_min_on_region, reconstruct, stability_experiment, synthetic_data, white_noise, AlphaChoice,
    ExperimentOptions, ForwardModel, HatBasis, Method, ObservationMap, SpaceFn,
};
use crate::reduction::{check_reduced_equation, compute_f, compute_g, ResidualOptions};

use super::config::{config_error, AlphaSpec, Format, InverseBlock, MethodName, RunConfig, TensorSpec};
use super::expr::{Expr, Var};

/// Environment variable overriding the output directory of the config.
pub const OUTPUT_DIR_ENV: &str = "HALFDIFF_OUTPUT_DIR";
const MAX_REFINEMENTS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Forward,
    ReduceCheck,
    CarlemanCheck,
    Invert,
    StabilityExperiment,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::ReduceCheck => "reduce-check",
            Command::CarlemanCheck => "carleman-check",
            Command::Invert => "invert",
            Command::StabilityExperiment => "stability-experiment",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Validation,
    Compute,
}

#[derive(Debug)]
pub struct RunFailure {
    pub stage: Stage,
    pub error: Error,
}

impl RunFailure {
    /// 1 for rejected input, 2 for failures during the computation.
    pub fn exit_code(&self) -> u8 {
        match self.stage {
            Stage::Validation => 1,
            Stage::Compute => 2,
        }
    }
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.stage {
            Stage::Validation => write!(f, "validation failed: {}", self.error),
            Stage::Compute => write!(f, "computation failed: {}", self.error),
        }
    }
}

trait At<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, RunFailure>;
}

impl<T> At<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, RunFailure> {
        self.map_err(|error| RunFailure { stage, error })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub package: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config_path: String,
    pub config_sha256: String,
    pub output_directory: String,
    pub wall_time_s: f64,
    pub files: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub directory: PathBuf,
    pub files: Vec<PathBuf>,
    pub manifest: Manifest,
}

struct Artifact {
    name: String,
    content: String,
}

impl Artifact {
    fn new(name: impl Into<String>, content: String) -> Self {
        Self {
            name: name.into(),
            content,
        }
    }

    fn json<T: Serialize>(name: &str, value: &T) -> Result<Self> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        Ok(Self::new(name, text + "\n"))
    }

    fn format(&self) -> Option<Format> {
        if self.name.ends_with(".csv") {
            Some(Format::Csv)
        } else if self.name.ends_with(".json") {
            Some(Format::Json)
        } else {
            None
        }
    }
}

enum Source {
    Separated { f: Arc<Expr>, r: Arc<Expr> },
    General { g: Arc<Expr> },
}

/// Validated equation, grids and closed-form data.
struct Problem {
    grid: SpatialGrid,
    times: TimeGrid,
    coeffs: EquationCoefficients,
    a: [[Arc<Expr>; 2]; 2],
    b: [Arc<Expr>; 2],
    c: Arc<Expr>,
    ellipticity: Option<f64>,
    source: Option<Source>,
    time_vars: Vec<Var>,
}

fn parse(src: &str, vars: &[Var], path: &str) -> Result<Arc<Expr>> {
    Expr::parse(src, vars)
        .map(Arc::new)
        .map_err(|e| config_error(path, e.to_string()))
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

fn point(v: &[f64], dim: usize, path: &str) -> Result<[f64; 2]> {
    if v.len() != dim {
        return Err(config_error(path, format!("expected {dim} coordinate(s), got {}", v.len())));
    }
    Ok([v[0], if dim == 2 { v[1] } else { 0.0 }])
}

impl Problem {
    fn build(cfg: &RunConfig) -> Result<Self> {
        let g = &cfg.grid;
        if !(g.dim == 1 || g.dim == 2) {
            return Err(config_error("grid.dim", format!("must be 1 or 2, got {}", g.dim)));
        }
        if g.extents.len() != g.dim {
            return Err(config_error("grid.extents", format!("expected {} interval(s), got {}", g.dim, g.extents.len())));
        }
        if g.n_cells.len() != g.dim {
            return Err(config_error("grid.n_cells", format!("expected {} count(s), got {}", g.dim, g.n_cells.len())));
        }
        let extents: Vec<(f64, f64)> = g.extents.iter().map(|e| (e[0], e[1])).collect();
        let grid = SpatialGrid::new(&extents, &g.n_cells, &g.gamma)?;
        let times = TimeGrid::new(g.t_final, g.n_steps, g.t0_index, g.delta.unwrap_or(g.t_final / 8.0))?;
        let coeffs = EquationCoefficients::new(cfg.equation.rho1, cfg.equation.rho2)?;

        let space_vars: Vec<Var> = if g.dim == 1 { vec![Var::X] } else { vec![Var::X, Var::Y] };
        let mut time_vars = space_vars.clone();
        time_vars.push(Var::T);
        let sv = &space_vars;
        let eq = &cfg.equation;
        let a = match &eq.a {
            None => {
                let one = parse("1", sv, "equation.a")?;
                let zero = parse("0", sv, "equation.a")?;
                [[one.clone(), zero.clone()], [zero, one]]
            }
            Some(TensorSpec::Scalar(s)) => {
                let v = parse(s, sv, "equation.a")?;
                let zero = parse("0", sv, "equation.a")?;
                [[v.clone(), zero.clone()], [zero, v]]
            }
            Some(TensorSpec::Matrix(m)) => {
                let p = |i: usize, j: usize| parse(&m[i][j], sv, &format!("equation.a[{i}][{j}]"));
                [[p(0, 0)?, p(0, 1)?], [p(1, 0)?, p(1, 1)?]]
            }
        };
        let b = match &eq.b {
            None => [parse("0", sv, "equation.b")?, parse("0", sv, "equation.b")?],
            Some(v) => {
                if v.len() != g.dim {
                    return Err(config_error("equation.b", format!("expected {} component(s), got {}", g.dim, v.len())));
                }
                let second = if g.dim == 2 { v[1].as_str() } else { "0" };
                [parse(&v[0], sv, "equation.b[0]")?, parse(second, sv, "equation.b[1]")?]
            }
        };
        let c = parse(eq.c.as_deref().unwrap_or("0"), sv, "equation.c")?;
        let source = match &cfg.source {
            None => None,
            Some(s) => Some(match (&s.f, &s.r, &s.g) {
                (Some(f), Some(r), None) => Source::Separated {
                    f: parse(f, sv, "source.f")?,
                    r: parse(r, &time_vars, "source.r")?,
                },
                (None, None, Some(g)) => Source::General {
                    g: parse(g, &time_vars, "source.g")?,
                },
                (_, _, Some(_)) => return Err(config_error("source", "set either g or both f and r, not both forms")),
                _ => return Err(config_error("source", "a separated source needs both f and r")),
            }),
        };
        let p = Self {
            grid,
            times,
            coeffs,
            a,
            b,
            c,
            ellipticity: eq.ellipticity,
            source,
            time_vars,
        };
        p.operator(&p.grid)?;
        if p.source.is_some() {
            p.source_on(&p.grid, &p.times)?;
        }
        Ok(p)
    }

    fn coefficients(&self, grid: &SpatialGrid) -> Result<EllipticCoefficients> {
        let a = &self.a;
        let co = EllipticCoefficients::from_fns(
            grid,
            |x| {
                [
                    [a[0][0].eval(x, 0.0), a[0][1].eval(x, 0.0)],
                    [a[1][0].eval(x, 0.0), a[1][1].eval(x, 0.0)],
                ]
            },
            |x| [self.b[0].eval(x, 0.0), self.b[1].eval(x, 0.0)],
            |x| self.c.eval(x, 0.0),
        );
        let flat: Vec<f64> = co
            .a
            .iter()
            .flat_map(|m| m.iter().flatten().copied())
            .chain(co.b.iter().flatten().copied())
            .chain(co.c.iter().copied())
            .collect();
        check_finite(&flat, "coefficients of L")?;
        Ok(co)
    }

    fn operator(&self, grid: &SpatialGrid) -> Result<EllipticOperator> {
        EllipticOperator::assemble(grid, self.coefficients(grid)?, self.ellipticity)
    }

    fn source_on(&self, grid: &SpatialGrid, tg: &TimeGrid) -> Result<SourceSpec> {
        match self.source.as_ref().ok_or_else(|| config_error("source", "a [source] block is required"))? {
            Source::Separated { f, r } => {
                let fs = Snapshot::from_fn(grid, |x| f.eval(x, 0.0));
                let rf = Field::from_fn(grid, tg, |x, t| r.eval(x, t));
                check_finite(fs.values(), "source f")?;
                check_finite(rf.values(), "source R")?;
                SourceSpec::separated(fs, rf)
            }
            Source::General { g } => {
                let gf = Field::from_fn(grid, tg, |x, t| g.eval(x, t));
                check_finite(gf.values(), "source g")?;
                Ok(SourceSpec::general(gf))
            }
        }
    }

    fn separated(&self, what: &str) -> Result<(Arc<Expr>, Arc<Expr>)> {
        match &self.source {
            Some(Source::Separated { f, r }) => Ok((f.clone(), r.clone())),
            _ => Err(config_error("source", format!("{what} needs a separated source (f and r)"))),
        }
    }

    fn model(&self, r: Arc<Expr>) -> ForwardModel {
        let a = self.a.clone();
        let b = self.b.clone();
        let c = self.c.clone();
        ForwardModel {
            coeffs: self.coeffs,
            a: Arc::new(move |x| {
                [
                    [a[0][0].eval(x, 0.0), a[0][1].eval(x, 0.0)],
                    [a[1][0].eval(x, 0.0), a[1][1].eval(x, 0.0)],
                ]
            }),
            b: Arc::new(move |x| [b[0].eval(x, 0.0), b[1].eval(x, 0.0)]),
            c: Arc::new(move |x| c.eval(x, 0.0)),
            r: Arc::new(move |x, t| r.eval(x, t)),
        }
    }
}

struct ForwardPlan {
    opts: SolveOptions,
    exact: Option<Arc<Expr>>,
    refinements: usize,
}

struct ReducePlan {
    opts: ResidualOptions,
    refinements: usize,
}

struct CarlemanPlan {
    geometry: CarlemanGeometry,
    counts: [[usize; 3]; 3],
    lambdas: Vec<f64>,
    s_sweep: Vec<f64>,
    seeds: Vec<u64>,
}

struct InversePlan {
    model: ForwardModel,
    f_true: SpaceFn,
    basis: HatBasis,
    observe: Option<NodeMask>,
    block: InverseBlock,
    method: Method,
}

enum Plan {
    Forward(ForwardPlan),
    Reduce(ReducePlan),
    Carleman(Box<CarlemanPlan>),
    Invert(Box<InversePlan>),
    Stability(Box<InversePlan>),
}

fn check_refinements(n: usize, path: &str) -> Result<()> {
    if n > MAX_REFINEMENTS {
        return Err(config_error(path, format!("at most {MAX_REFINEMENTS} refinements, got {n}")));
    }
    Ok(())
}

fn plan_forward(cfg: &RunConfig, p: &Problem) -> Result<ForwardPlan> {
    let fw = &cfg.forward;
    if p.source.is_none() {
        return Err(config_error("source", "forward needs a [source] block"));
    }
    if !(fw.tol > 0.0 && fw.tol < 1.0) {
        return Err(config_error("forward.tol", format!("must lie in (0, 1), got {}", fw.tol)));
    }
    check_refinements(fw.refinements, "forward.refinements")?;
    let exact = match &fw.exact {
        Some(s) => Some(parse(s, &p.time_vars, "forward.exact")?),
        None if fw.refinements > 0 => {
            return Err(config_error("forward.refinements", "a convergence study needs forward.exact"));
        }
        None => None,
    };
    Ok(ForwardPlan {
        opts: SolveOptions {
            scheme: fw.scheme,
            tol: fw.tol,
            max_iter: fw.max_iter,
        },
        exact,
        refinements: fw.refinements,
    })
}

fn plan_reduce(cfg: &RunConfig, p: &Problem) -> Result<ReducePlan> {
    if p.source.is_none() {
        return Err(config_error("source", "reduce-check needs a [source] block"));
    }
    let red = &cfg.reduction;
    let t_final = p.times.t_final();
    let t_cut = red.t_cut.unwrap_or(t_final / 32.0);
    if !(t_cut > 0.0 && t_cut < t_final) {
        return Err(config_error("reduction.t_cut", format!("must lie in (0, T), got {t_cut}")));
    }
    check_refinements(red.refinements, "reduction.refinements")?;
    Ok(ReducePlan {
        opts: ResidualOptions {
            t_cut,
            boundary_layers: red.boundary_layers,
        },
        refinements: red.refinements,
    })
}

fn plan_carleman(cfg: &RunConfig, p: &Problem) -> Result<CarlemanPlan> {
    let block = cfg
        .carleman
        .as_ref()
        .ok_or_else(|| config_error("carleman", "carleman-check needs a [carleman] block"))?;
    let dim = p.grid.dim();
    let lo = point(&block.omega_lo, dim, "carleman.omega_lo")?;
    let hi = point(&block.omega_hi, dim, "carleman.omega_hi")?;
    let geometry = build_weight(
        &p.grid,
        &p.times,
        &CarlemanConfig {
            lambda: block.lambda,
            epsilon: block.epsilon,
            omega_lo: lo,
            omega_hi: hi,
            extension: block.extension,
        },
    )?;
    let counts = build_level_sets(&geometry)?.counts();
    let lambdas = block.lambdas.clone().unwrap_or_else(|| vec![block.lambda]);
    if lambdas.is_empty() {
        return Err(config_error("carleman.lambdas", "must not be empty"));
    }
    for l in &lambdas {
        geometry.with_lambda(*l)?;
    }
    if block.s_sweep.is_empty() || block.s_sweep.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(config_error("carleman.s_sweep", "must be a non-empty list of positive values"));
    }
    if block.seeds.is_empty() {
        return Err(config_error("carleman.seeds", "must not be empty"));
    }
    Ok(CarlemanPlan {
        geometry,
        counts,
        lambdas,
        s_sweep: block.s_sweep.clone(),
        seeds: block.seeds.clone(),
    })
}

fn plan_inverse(cfg: &RunConfig, p: &Problem, what: &str) -> Result<InversePlan> {
    let block = cfg
        .inverse
        .clone()
        .ok_or_else(|| config_error("inverse", format!("{what} needs an [inverse] block")))?;
    let (f, r) = p.separated(what)?;
    let grid = &p.grid;
    let dim = grid.dim();
    let middle = |a: usize, q: f64| grid.lo(a) + q * (grid.hi(a) - grid.lo(a));
    let default_lo = [middle(0, 0.25), if dim == 2 { middle(1, 0.25) } else { 0.0 }];
    let default_hi = [middle(0, 0.75), if dim == 2 { middle(1, 0.75) } else { 0.0 }];
    let lo = match &block.omega_lo {
        Some(v) => point(v, dim, "inverse.omega_lo")?,
        None => default_lo,
    };
    let hi = match &block.omega_hi {
        Some(v) => point(v, dim, "inverse.omega_hi")?,
        None => default_hi,
    };
    let basis = HatBasis::over_box(grid, lo, hi, block.basis_size)
        .map_err(|e| config_error("inverse.basis_size", e.to_string()))?;
    let observe = match (&block.observe_lo, &block.observe_hi) {
        (None, None) => None,
        (Some(a), Some(b)) => {
            let m = grid.box_mask(point(a, dim, "inverse.observe_lo")?, point(b, dim, "inverse.observe_hi")?);
            if !m.and(&grid.interior_mask()).nodes().any(|_| true) {
                return Err(config_error("inverse.observe_lo", "the observation box contains no interior node"));
            }
            Some(m)
        }
        _ => return Err(config_error("inverse.observe_lo", "set both observe_lo and observe_hi or neither")),
    };
    if !(block.r_min > 0.0) {
        return Err(config_error("inverse.r_min", format!("must be positive, got {}", block.r_min)));
    }
    let model = p.model(r);
    let min_abs = r_min_on_region(&model, grid, &p.times, &basis);
    if !(min_abs >= block.r_min) {
        return Err(Error::SourceHypothesis {
            min_abs,
            r_min: block.r_min,
        });
    }
    if !(block.noise >= 0.0 && block.noise.is_finite()) {
        return Err(config_error("inverse.noise", format!("must be nonnegative, got {}", block.noise)));
    }
    if !(block.tau >= 1.0) {
        return Err(config_error("inverse.tau", format!("must be >= 1, got {}", block.tau)));
    }
    let method = match (block.method, &block.alpha) {
        (MethodName::Landweber, _) => Method::Landweber {
            max_iter: block.max_iter,
            noise: None,
            tau: block.tau,
        },
        (MethodName::Tikhonov, AlphaSpec::Value(a)) => {
            if !(*a > 0.0) {
                return Err(Error::NonPositiveAlpha(*a));
            }
            Method::Tikhonov(AlphaChoice::Fixed(*a))
        }
        (MethodName::Tikhonov, AlphaSpec::Keyword(k)) if k == "auto" => Method::Tikhonov(AlphaChoice::Morozov {
            noise: 0.0,
            tau: block.tau,
        }),
        (_, AlphaSpec::Keyword(k)) => {
            return Err(config_error("inverse.alpha", format!("expected a positive number or \"auto\", got \"{k}\"")));
        }
    };
    if what == "invert" && matches!(method, Method::Tikhonov(AlphaChoice::Morozov { .. })) && block.noise == 0.0 {
        return Err(config_error("inverse.alpha", "\"auto\" needs a positive inverse.noise"));
    }
    let fe = f.clone();
    let f_true: SpaceFn = Arc::new(move |x| fe.eval(x, 0.0));
    let fs = Snapshot::from_fn(grid, |x| f_true(x));
    check_finite(fs.values(), "source f")?;
    let f_h2 = sobolev_norm_values(grid, fs.values(), 2, &grid.full_mask())?;
    if !(f_h2 <= block.prior_m) {
        return Err(config_error("inverse.M", format!("|f|_H2 = {f_h2:e} exceeds the prior bound M = {:e}", block.prior_m)));
    }
    if what == "stability-experiment" {
        let levels = &block.noise_levels;
        if levels.len() < 3 {
            return Err(Error::FitRefused(format!("at least 3 noise levels are needed, got {}", levels.len())));
        }
        if levels.iter().any(|l| !(l.is_finite() && *l > 0.0)) || levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config_error("inverse.noise_levels", "must be positive and strictly decreasing"));
        }
        if block.trials == 0 {
            return Err(config_error("inverse.trials", "must be positive"));
        }
    }
    Ok(InversePlan {
        model,
        f_true,
        basis,
        observe,
        block,
        method,
    })
}

fn plan(cmd: Command, cfg: &RunConfig, p: &Problem) -> Result<Plan> {
    Ok(match cmd {
        Command::Forward => Plan::Forward(plan_forward(cfg, p)?),
        Command::ReduceCheck => Plan::Reduce(plan_reduce(cfg, p)?),
        Command::CarlemanCheck => Plan::Carleman(Box::new(plan_carleman(cfg, p)?)),
        Command::Invert => Plan::Invert(Box::new(plan_inverse(cfg, p, "invert")?)),
        Command::StabilityExperiment => Plan::Stability(Box::new(plan_inverse(cfg, p, "stability-experiment")?)),
    })
}

fn run_forward(p: &Problem, fp: &ForwardPlan) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    let mut table = String::from("n_cells,n_steps,h,dt,max_error,rate\n");
    let mut prev: Option<f64> = None;
    for j in 0..=fp.refinements {
        let factor = 1usize << j;
        let grid = p.grid.refined(factor);
        let tg = p.times.refined(factor);
        let lop = p.operator(&grid)?;
        let src = p.source_on(&grid, &tg)?;
        let rep = solve_forward_with(&p.coeffs, &lop, &src, &tg, &fp.opts)?;
        if j == 0 {
            let snap = rep.solution.snapshot(tg.t0_index());
            out.push(Artifact::new("snapshot_t0.csv", snapshot_to_csv(&snap)));
            out.push(Artifact::new("snapshot_t0.json", snapshot_to_json(&snap)));
            out.push(Artifact::json(
                "forward_summary.json",
                &json!({
                    "t0": tg.t0(),
                    "max_step_residual": rep.max_residual,
                    "max_iterations": rep.iterations.iter().max().copied().unwrap_or(0),
                    "gamma_flux_max": rep.gamma_flux_max,
                    "max_abs_u": rep.solution.max_abs(),
                }),
            )?);
        }
        if let Some(exact) = &fp.exact {
            let u = &rep.solution;
            let mut err: f64 = 0.0;
            for n in 0..u.n_levels() {
                let t = tg.t(n);
                for (i, v) in u.level(n).iter().enumerate() {
                    err = err.max((v - exact.eval(grid.coords(i), t)).abs());
                }
            }
            let rate = prev.map(|e| (e / err).log2()).unwrap_or(f64::NAN);
            writeln!(
                table,
                "{},{},{:e},{:e},{:e},{:e}",
                grid.n_cells(0),
                tg.n_steps(),
                grid.spacing(0),
                tg.dt(),
                err,
                rate
            )
            .unwrap();
            info!("forward level {j}: max error {err:e}");
            prev = Some(err);
        }
    }
    if fp.exact.is_some() {
        out.push(Artifact::new("convergence.csv", table));
    }
    Ok(out)
}

fn run_reduce(p: &Problem, rp: &ReducePlan) -> Result<Vec<Artifact>> {
    let mut table = String::from("n_cells,n_steps,t_cut,residual_max,residual_l2,f_g_discrepancy\n");
    let mut last = None;
    for j in 0..=rp.refinements {
        let factor = 1usize << j;
        let grid = p.grid.refined(factor);
        let tg = p.times.refined(factor);
        let lop = p.operator(&grid)?;
        let src = p.source_on(&grid, &tg)?;
        let u = solve_forward_with(&p.coeffs, &lop, &src, &tg, &SolveOptions::default())?.solution;
        let (reduced, discrepancy) = match &src {
            SourceSpec::Separated { f, r } => {
                let big_f = compute_f(&p.coeffs, &lop, f, r)?;
                let big_g = compute_g(&p.coeffs, &lop, &Field::separated(f, r)?)?;
                let scale = big_g.regular.max_abs().max(f64::MIN_POSITIVE);
                let diff = big_f.regular.lin_comb(1.0, -1.0, &big_g.regular)?.max_abs();
                (big_f, diff / scale)
            }
            SourceSpec::General { g } => (compute_g(&p.coeffs, &lop, g)?, f64::NAN),
        };
        let res = check_reduced_equation(&u, &reduced, &p.coeffs, &lop, &rp.opts)?;
        writeln!(
            table,
            "{},{},{:e},{:e},{:e},{:e}",
            grid.n_cells(0),
            tg.n_steps(),
            rp.opts.t_cut,
            res.max,
            res.l2,
            discrepancy
        )
        .unwrap();
        last = Some((res, tg));
    }
    let (res, tg) = last.expect("at least one level");
    Ok(vec![
        Artifact::new("reduction.csv", table),
        Artifact::new("residual_t0.csv", snapshot_to_csv(&res.residual.snapshot(tg.t0_index()))),
    ])
}

#[derive(Serialize)]
struct ReportSummary {
    kind: &'static str,
    lambda: f64,
    seed: u64,
    s_star: Option<f64>,
    tail_constant: Option<f64>,
    tail_bounded: bool,
    violation_candidate: bool,
}

fn run_carleman(p: &Problem, cp: &CarlemanPlan) -> Result<Vec<Artifact>> {
    let lop = p.operator(&p.grid)?;
    let kinds = ["parabolic", "elliptic", "combined"];
    let mut tables: Vec<String> = Vec::new();
    let mut summaries = Vec::new();
    for &lambda in &cp.lambdas {
        let geom = cp.geometry.with_lambda(lambda)?;
        for &seed in &cp.seeds {
            let v = random_space_time_field(&geom, seed)?;
            let f = random_spatial_field(&geom, seed)?;
            let reports: [RatioReport; 3] = [
                check_parabolic_carleman(&v, &geom, &lop, &p.coeffs, &cp.s_sweep)?,
                check_elliptic_carleman(&f, &geom, &lop, &cp.s_sweep)?,
                check_combined_carleman(&v, &geom, &lop, &p.coeffs, &cp.s_sweep)?,
            ];
            for (k, rep) in reports.iter().enumerate() {
                let csv = rep.to_csv();
                let mut lines = csv.lines();
                let header = lines.next().unwrap_or_default();
                if tables.len() <= k {
                    tables.push(format!("seed,{header}\n"));
                }
                for line in lines {
                    writeln!(tables[k], "{seed},{line}").unwrap();
                }
                summaries.push(ReportSummary {
                    kind: kinds[k],
                    lambda,
                    seed,
                    s_star: rep.s_star,
                    tail_constant: rep.tail_constant,
                    tail_bounded: rep.tail_bounded(),
                    violation_candidate: rep.violation_candidate,
                });
            }
        }
    }
    let g = &cp.geometry;
    let invariants: Vec<_> = g
        .invariants()
        .into_iter()
        .map(|c| json!({"name": c.name, "ok": c.ok, "detail": c.detail}))
        .collect();
    let mut out: Vec<Artifact> = tables
        .into_iter()
        .enumerate()
        .map(|(k, t)| Artifact::new(format!("carleman_{}.csv", kinds[k]), t))
        .collect();
    out.push(Artifact::json(
        "carleman_summary.json",
        &json!({
            "beta": g.beta(),
            "mu": g.mu(),
            "epsilon": g.epsilon(),
            "epsilon0": g.epsilon0(),
            "t0": g.t0(),
            "delta": g.delta(),
            "d_norm": g.d_norm(),
            "invariants": invariants,
            "level_set_counts": {"q": cp.counts[0], "q_minus": cp.counts[1], "omega": cp.counts[2]},
            "reports": summaries,
        }),
    )?);
    Ok(out)
}

fn assemble(p: &Problem, ip: &InversePlan) -> Result<ObservationMap> {
    let map = ObservationMap::assemble_unchecked(&ip.model, &p.grid, &p.times, ip.basis.clone())?;
    match &ip.observe {
        Some(m) => map.restrict_rows(m),
        None => Ok(map),
    }
}

/// Largest one-sided second difference normal to the boundary, for each
/// boundary node of `u`.
fn boundary_second_derivative(u: &Snapshot) -> f64 {
    let g = u.grid();
    let v = u.values();
    let mut worst: f64 = 0.0;
    for node in 0..g.n_nodes() {
        let idx = g.multi_index(node);
        for a in 0..g.dim() {
            let n = g.n_cells(a);
            let step: isize = if idx[a] == 0 {
                1
            } else if idx[a] == n {
                -1
            } else {
                continue;
            };
            let at = |k: isize| {
                let mut m = idx;
                m[a] = (idx[a] as isize + k * step) as usize;
                v[g.index(m[0], m[1])]
            };
            let h = g.spacing(a);
            worst = worst.max(((at(0) - 2.0 * at(1) + at(2)) / (h * h)).abs());
        }
    }
    worst
}

fn run_invert(p: &Problem, ip: &InversePlan) -> Result<Vec<Artifact>> {
    let map = assemble(p, ip)?;
    let b = &ip.block;
    let clean = synthetic_data(&map, &ip.f_true, b.mitigate_inverse_crime)?;
    let (data, noise_norm) = if b.noise > 0.0 {
        let noise = white_noise(&map, b.noise * h4(&map, clean.values())?, b.seed, 0)?;
        let norm = crate::inverse::data_norm(&map, &noise)?;
        (clean.lin_comb(1.0, 1.0, &noise)?, norm)
    } else {
        (clean, 0.0)
    };
    let method = match &ip.method {
        Method::Tikhonov(AlphaChoice::Morozov { tau, .. }) => Method::Tikhonov(AlphaChoice::Morozov {
            noise: noise_norm,
            tau: *tau,
        }),
        Method::Landweber { max_iter, tau, .. } => Method::Landweber {
            max_iter: *max_iter,
            noise: (noise_norm > 0.0).then_some(noise_norm),
            tau: *tau,
        },
        m => m.clone(),
    };
    let rec = reconstruct(&map, &data, &method)?;
    let grid = map.grid();
    let region = map.basis.region(grid);
    let f_grid = Snapshot::from_fn(grid, |x| (ip.f_true)(x));
    let f_norm = sobolev_norm_values(grid, f_grid.values(), 2, &region)?;
    let err = error_h2(&map, &region, &rec.f_hat, &f_grid)?;
    let rel = if f_norm > 0.0 { err / f_norm } else { err };
    let boundary = boundary_second_derivative(&data);
    info!("second normal difference of the data on the boundary: {boundary:e} (diagnostic only)");
    Ok(vec![
        Artifact::new("f_hat.csv", snapshot_to_csv(&rec.f_hat)),
        Artifact::new("f_hat.json", snapshot_to_json(&rec.f_hat)),
        Artifact::new("data.csv", snapshot_to_csv(&data)),
        Artifact::json(
            "reconstruction.json",
            &json!({
                "method": method,
                "alpha": rec.alpha,
                "alpha_abs": rec.alpha_abs,
                "misfit": rec.misfit,
                "seminorm": rec.seminorm,
                "status": rec.status,
                "normal_residual": rec.normal_residual,
                "iterations": rec.iterations,
                "coefficients": rec.coefficients,
                "error_h2_omega": err,
                "relative_error_h2_omega": rel,
                "noise_norm": noise_norm,
                "condition_number": map.condition_number(),
                "basis_size": map.basis.len(),
                "observed_rows": map.rows.len(),
                "mitigated": b.mitigate_inverse_crime,
                "boundary_second_derivative_max": boundary,
            }),
        )?,
    ])
}

fn run_stability(p: &Problem, ip: &InversePlan) -> Result<Vec<Artifact>> {
    let map = assemble(p, ip)?;
    let b = &ip.block;
    let opts = ExperimentOptions {
        noise_levels: b.noise_levels.clone(),
        trials: b.trials,
        seed: b.seed,
        prior_m: b.prior_m,
        mitigate_inverse_crime: b.mitigate_inverse_crime,
        tau: b.tau,
    };
    let report = stability_experiment(&map, &ip.f_true, &opts)?;
    info!(
        "kappa_hat = {:.4}, R^2 = {:.4}, C_hat = {:e}",
        report.kappa_hat, report.r_squared, report.c_hat
    );
    Ok(vec![
        Artifact::new("stability_report.csv", report.to_csv()),
        Artifact::json("stability_report.json", &report)?,
    ])
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn output_directory(cfg: &RunConfig, cli: Option<&Path>) -> Result<PathBuf> {
    let dir = match (cli, std::env::var_os(OUTPUT_DIR_ENV)) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) if !d.is_empty() => PathBuf::from(d),
        _ => cfg.output.directory.clone(),
    };
    if dir.exists() && !dir.is_dir() {
        return Err(config_error("output.directory", format!("{} exists and is not a directory", dir.display())));
    }
    if cfg.output.formats.is_empty() {
        return Err(config_error("output.formats", "must not be empty"));
    }
    Ok(dir)
}

/// Reads, validates and runs `config_path` for `cmd`. `output_dir` takes
/// precedence over the environment and the config.
pub fn run(cmd: Command, config_path: &Path, output_dir: Option<&Path>) -> std::result::Result<RunOutcome, RunFailure> {
    let start = Instant::now();
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| config_error("", format!("cannot read {}: {e}", config_path.display())))
        .at(Stage::Validation)?;
    let cfg = RunConfig::from_toml(&text).at(Stage::Validation)?;
    let problem = Problem::build(&cfg).at(Stage::Validation)?;
    let plan = plan(cmd, &cfg, &problem).at(Stage::Validation)?;
    let dir = output_directory(&cfg, output_dir).at(Stage::Validation)?;
    info!("{}: configuration valid, writing to {}", cmd.name(), dir.display());

    let artifacts = match &plan {
        Plan::Forward(fp) => run_forward(&problem, fp),
        Plan::Reduce(rp) => run_reduce(&problem, rp),
        Plan::Carleman(cp) => run_carleman(&problem, cp),
        Plan::Invert(ip) => run_invert(&problem, ip),
        Plan::Stability(ip) => run_stability(&problem, ip),
    }
    .at(Stage::Compute)?;

    let mut files = Vec::new();
    for a in artifacts.iter().filter(|a| a.format().is_none_or(|f| cfg.output.formats.contains(&f))) {
        let path = dir.join(&a.name);
        write_text(&path, &a.content).at(Stage::Compute)?;
        files.push(path);
    }
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cmd.name(),
        config_path: config_path.display().to_string(),
        config_sha256: sha256_hex(text.as_bytes()),
        output_directory: dir.display().to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        files: files
            .iter()
            .map(|f| f.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
    };
    let mpath = dir.join("manifest.json");
    write_text(&mpath, &(serde_json::to_string_pretty(&manifest).expect("plain data") + "\n")).at(Stage::Compute)?;
    files.push(mpath);
    Ok(RunOutcome {
        directory: dir,
        files,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_difference_of_a_parabola() {
        let g = SpatialGrid::interval(0.0, 1.0, 8, crate::domain::grid::Face::XHi).unwrap();
        let s = Snapshot::from_fn(&g, |x| x[0] * (1.0 - x[0]));
        assert!((boundary_second_derivative(&s) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn digest_is_hex() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
