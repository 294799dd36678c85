//! Experiment drivers behind the command-line front end: the ratio-bound
//! table, the manufactured-solution convergence study and coarsening
//! simulations with energy/volume diagnostics.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{self, RatioBounds};
use crate::error::{Error, Result};
use crate::mesh::TimeMesh;
use crate::solver::{
    adaptive_next_step, manufactured_solution, AdaptiveParams, Forcing, ModelParams, Scheme, Solver, StepRecord,
};
use crate::spectral::{self, Field2D, Grid2D};

/// Relative slack for the modified-energy monotonicity check.
pub const ENERGY_RTOL: f64 = 1e-10;
/// Tolerance for volume drift in unforced runs.
pub const VOLUME_TOL: f64 = 1e-10;
/// Stored increment history above which a warning is logged.
const HISTORY_WARN_BYTES: usize = 4 << 30;

// ---------------------------------------------------------------------------
// bounds table

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsRow {
    pub alpha: f64,
    pub r_star: f64,
    pub gamma_max: f64,
    pub three_minus_alpha: f64,
}

/// Parses `start:stop:count` into `count` equispaced points (inclusive).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("expected start:stop:count, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match n {
        0 => Err(bad()),
        1 => Ok(vec![a]),
        // rounded to 12 decimals so that grid points print as written
        _ => Ok((0..n)
            .map(|i| ((a + (b - a) * i as f64 / (n - 1) as f64) * 1e12).round() / 1e12)
            .collect()),
    }
}

pub fn bounds_table(alphas: &[f64]) -> Result<Vec<BoundsRow>> {
    alphas
        .iter()
        .map(|&alpha| {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
            }
            Ok(BoundsRow {
                alpha,
                r_star: bounds::r_star(alpha)?,
                gamma_max: bounds::gamma_max(alpha)?,
                three_minus_alpha: 3.0 - alpha,
            })
        })
        .collect()
}

pub fn write_bounds_csv<W: Write>(rows: &[BoundsRow], mut out: W) -> Result<()> {
    writeln!(out, "alpha,r_star,gamma_max,three_minus_alpha")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.alpha, r.r_star, r.gamma_max, r.three_minus_alpha)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    #[default]
    Fbdf2,
    Bdf2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ForcingName {
    #[default]
    None,
    Manufactured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: f64,
    pub kappa: f64,
    pub eps: f64,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default)]
    pub forcing: ForcingName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "Mx")]
    pub mx: usize,
    #[serde(rename = "My")]
    pub my: usize,
    #[serde(rename = "Lx", default = "two_pi")]
    pub lx: f64,
    #[serde(rename = "Ly", default = "two_pi")]
    pub ly: f64,
}

fn two_pi() -> f64 {
    2.0 * std::f64::consts::PI
}

impl GridSection {
    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.mx, self.my, self.lx, self.ly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshMode {
    Uniform,
    Graded,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub mode: MeshMode,
    /// Final time.
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Uniform step (uniform mode; alternative to `N`).
    pub tau: Option<f64>,
    /// Number of steps (uniform and graded modes).
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Grading exponent (graded mode and the adaptive prefix).
    pub gamma: Option<f64>,
    /// End of the graded prefix (adaptive mode).
    #[serde(rename = "T0")]
    pub t0: Option<f64>,
    /// Steps in the graded prefix (adaptive mode).
    #[serde(rename = "N0")]
    pub n0: Option<usize>,
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    pub eta_user: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iters")]
    pub fp_max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fixed iteration stabilisation; omitted means automatic.
    pub stabilization: Option<f64>,
}

fn default_fp_tol() -> f64 {
    1e-12
}

fn default_fp_max_iters() -> usize {
    500
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            fp_tol: default_fp_tol(),
            fp_max_iters: default_fp_max_iters(),
            seed: 0,
            stabilization: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    #[default]
    Random,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub kind: InitialKind,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_amplitude() -> f64 {
    1e-3
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: InitialKind::Random,
            amplitude: default_amplitude(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_ledger")]
    pub ledger_csv: String,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_snapshot_dir")]
    pub snapshot_dir: String,
}

fn default_ledger() -> String {
    "ledger.csv".into()
}

fn default_snapshot_dir() -> String {
    "snapshots".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            ledger_csv: default_ledger(),
            snapshot_times: Vec::new(),
            snapshot_dir: default_snapshot_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    pub gammas: Vec<f64>,
    /// Refinement levels `m = 1..=levels`, `N = n_base 2^(m-1)`.
    pub levels: usize,
    #[serde(default = "default_n_base")]
    pub n_base: usize,
}

fn default_n_base() -> usize {
    20
}

/// Whole configuration file. `mesh` drives `simulate`, `converge` drives
/// the convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub mesh: Option<MeshSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
    pub converge: Option<ConvergeSection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.params()?;
        cfg.grid.grid()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let p = ModelParams {
            alpha: self.model.alpha,
            kappa: self.model.kappa,
            eps: self.model.eps,
            fp_tol: self.solver.fp_tol,
            fp_max_iters: self.solver.fp_max_iters,
            stabilization: self.solver.stabilization,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn scheme(&self) -> Scheme {
        match self.model.scheme {
            SchemeName::Fbdf2 => Scheme::Fbdf2,
            SchemeName::Bdf2 => Scheme::Bdf2,
        }
    }

    fn mesh_section(&self) -> Result<&MeshSection> {
        self.mesh
            .as_ref()
            .ok_or_else(|| Error::Config("missing [mesh] section".into()))
    }
}

fn need<T: Copy>(v: Option<T>, key: &str, mode: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("mesh mode {mode} requires `{key}`")))
}

/// How the time levels of a run are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum StepPlan {
    Fixed(TimeMesh),
    Adaptive {
        prefix: TimeMesh,
        t_end: f64,
        params: AdaptiveParams,
    },
}

impl StepPlan {
    pub fn from_section(m: &MeshSection) -> Result<Self> {
        match m.mode {
            MeshMode::Uniform => {
                let n = match (m.n, m.tau) {
                    (Some(n), _) => n,
                    (None, Some(tau)) if tau > 0.0 => (m.t_end / tau).round().max(1.0) as usize,
                    _ => return Err(Error::Config("mesh mode uniform requires `N` or `tau`".into())),
                };
                Ok(Self::Fixed(TimeMesh::uniform(m.t_end, n)?))
            }
            MeshMode::Graded => Ok(Self::Fixed(TimeMesh::graded(
                m.t_end,
                need(m.n, "N", "graded")?,
                need(m.gamma, "gamma", "graded")?,
            )?)),
            MeshMode::Adaptive => {
                let params = AdaptiveParams {
                    tau_min: need(m.tau_min, "tau_min", "adaptive")?,
                    tau_max: need(m.tau_max, "tau_max", "adaptive")?,
                    eta: need(m.eta_user, "eta_user", "adaptive")?,
                };
                if !(params.tau_min > 0.0 && params.tau_min <= params.tau_max && params.eta >= 0.0) {
                    return Err(Error::Config("adaptive mode needs 0 < tau_min <= tau_max and eta_user >= 0".into()));
                }
                let t0 = need(m.t0, "T0", "adaptive")?;
                if !(t0 < m.t_end) {
                    return Err(Error::Config(format!("T0 = {t0} must be below T = {}", m.t_end)));
                }
                Ok(Self::Adaptive {
                    prefix: TimeMesh::graded(t0, need(m.n0, "N0", "adaptive")?, need(m.gamma, "gamma", "adaptive")?)?,
                    t_end: m.t_end,
                    params,
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// simulation

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLawSummary {
    /// Levels `n >= 2` whose a posteriori step bound held and whose
    /// modified energies at `n - 1` and `n` are both known.
    pub checked: usize,
    pub violations: usize,
    /// Levels where the step bound failed (law not asserted).
    pub bound_failed: usize,
    /// Largest `(E_a[n] - E_a[n-1]) / |E_a[n-1]|` over checked levels.
    pub worst_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub steps: usize,
    pub t_end: f64,
    pub min_tau: f64,
    pub max_tau: f64,
    pub volume_drift: f64,
    pub energy_law: EnergyLawSummary,
    pub ratio_violations: usize,
    /// Adaptive steps where the ratio clamp changed the proposed step.
    pub clamp_active_steps: usize,
    pub solvability_violations: usize,
    pub max_fp_iters: usize,
    pub max_residual: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
}

pub struct SimulationRun {
    pub solver: Solver,
    pub summary: SimulationSummary,
    /// `(requested time, field)` at the first level reaching each requested time.
    pub snapshots: Vec<(f64, Field2D)>,
}

pub fn initial_field(cfg: &RunConfig) -> Result<Field2D> {
    let grid = cfg.grid.grid()?;
    Ok(match cfg.initial.kind {
        InitialKind::Zero => Field2D::zeros(grid),
        InitialKind::Random => Solver::random_initial(grid, cfg.initial.amplitude, cfg.solver.seed),
    })
}

/// Runs the configured simulation in memory.
pub fn run_simulation(cfg: &RunConfig) -> Result<SimulationRun> {
    let params = cfg.params()?;
    let plan = StepPlan::from_section(cfg.mesh_section()?)?;
    let forcing = match cfg.model.forcing {
        ForcingName::None => Forcing::None,
        ForcingName::Manufactured => Forcing::Manufactured,
    };
    let mut solver = Solver::new(params, cfg.scheme(), initial_field(cfg)?, forcing)?;
    let mut snap_times: Vec<f64> = cfg.output.snapshot_times.clone();
    snap_times.sort_by(f64::total_cmp);
    let mut snapshots = Vec::new();
    let mut clamp_active = 0;
    let bytes_per_level = 16 * solver.spectral().grid().spectrum_len();
    let mut warned = false;

    let mut after_step = |solver: &Solver, snapshots: &mut Vec<(f64, Field2D)>| {
        while let Some(&ts) = snap_times.first() {
            if solver.t() < ts * (1.0 - 1e-12) {
                break;
            }
            snapshots.push((ts, solver.phi().clone()));
            snap_times.remove(0);
        }
        if !warned && solver.n() * bytes_per_level > HISTORY_WARN_BYTES {
            log::warn!("increment history exceeds 4 GiB at level {}", solver.n());
            warned = true;
        }
        if solver.n() % 500 == 0 {
            log::info!("level {} t = {:.4} tau = {:.3e}", solver.n(), solver.t(), solver.mesh().last_step());
        }
    };

    match &plan {
        StepPlan::Fixed(mesh) => {
            for &tau in mesh.steps() {
                solver.step(tau)?;
                after_step(&solver, &mut snapshots);
            }
        }
        StepPlan::Adaptive { prefix, t_end, params: ap } => {
            for &tau in prefix.steps() {
                solver.step(tau)?;
                after_step(&solver, &mut snapshots);
            }
            let alpha = if solver.scheme() == Scheme::Bdf2 { 1.0 } else { params.alpha };
            while solver.t() < t_end * (1.0 - 1e-12) {
                let tau_n = solver.mesh().last_step();
                let next = adaptive_next_step(solver.dphi_l2_sq(), tau_n, alpha, ap)?;
                let unclamped = ap.tau_min.max(ap.tau_max / (1.0 + ap.eta * solver.dphi_l2_sq()).sqrt());
                if next != unclamped {
                    clamp_active += 1;
                }
                solver.step(next)?;
                after_step(&solver, &mut snapshots);
            }
        }
    }
    let summary = summarize(&solver, clamp_active)?;
    Ok(SimulationRun {
        solver,
        summary,
        snapshots,
    })
}

/// Modified-energy law: `E_a[n] <= E_a[n-1]` at every `n >= 2` whose step
/// bound held.
pub fn energy_law(solver: &Solver) -> EnergyLawSummary {
    let ledger = solver.ledger();
    let mut s = EnergyLawSummary {
        checked: 0,
        violations: 0,
        bound_failed: 0,
        worst_increase: f64::NEG_INFINITY,
    };
    for rec in solver.records().iter().filter(|r| r.n >= 2) {
        match rec.energy_ok {
            Some(true) => {}
            Some(false) => {
                s.bound_failed += 1;
                continue;
            }
            None => continue,
        }
        let (Some(cur), Some(prev)) = (ledger[rec.n].e_alpha, ledger[rec.n - 1].e_alpha) else {
            continue;
        };
        s.checked += 1;
        let inc = (cur - prev) / prev.abs().max(f64::MIN_POSITIVE);
        s.worst_increase = s.worst_increase.max(inc);
        if inc > ENERGY_RTOL {
            s.violations += 1;
        }
    }
    s
}

fn summarize(solver: &Solver, clamp_active_steps: usize) -> Result<SimulationSummary> {
    let ledger = solver.ledger();
    let v0 = ledger[0].volume;
    let records: &[StepRecord] = solver.records();
    let order = if solver.scheme() == Scheme::Bdf2 {
        1.0
    } else {
        solver.params().alpha
    };
    let window = RatioBounds {
        lower: bounds::R_STAR_LOWER,
        upper: bounds::r_star(order)?,
        alpha: order,
    };
    let mesh = solver.mesh();
    Ok(SimulationSummary {
        steps: solver.n(),
        t_end: solver.t(),
        min_tau: mesh.steps().iter().copied().fold(f64::INFINITY, f64::min),
        max_tau: mesh.max_step(),
        volume_drift: ledger.iter().map(|e| (e.volume - v0).abs()).fold(0.0, f64::max),
        energy_law: energy_law(solver),
        ratio_violations: bounds::validate_ratios(mesh, &window).len(),
        clamp_active_steps,
        solvability_violations: records.iter().filter(|r| !r.solvability_ok).count(),
        max_fp_iters: records.iter().map(|r| r.fp_iters).max().unwrap_or(0),
        max_residual: records.iter().map(|r| r.residual).fold(0.0, f64::max),
        energy_initial: ledger[0].e,
        energy_final: ledger.last().map_or(ledger[0].e, |e| e.e),
    })
}

pub fn write_steps_csv<W: Write>(records: &[StepRecord], mut out: W) -> Result<()> {
    writeln!(
        out,
        "n,t,tau,ratio,fp_iters,fp_update,residual,stabilization,solvability_bound,solvability_ok,energy_bound,energy_ok"
    )?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{:e},{:e},{},{},{},{},{}",
            r.n,
            r.t,
            r.tau,
            r.ratio,
            r.fp_iters,
            r.fp_update,
            r.residual,
            r.stabilization,
            r.solvability_bound,
            r.solvability_ok,
            opt(r.energy_bound),
            r.energy_ok.map_or(String::new(), |b| b.to_string()),
        )?;
    }
    Ok(())
}

/// Runs a simulation and writes the ledger, per-step records, mesh,
/// snapshots and a JSON summary under `outdir`.
pub fn simulate(cfg: &RunConfig, outdir: &Path) -> Result<SimulationSummary> {
    fs::create_dir_all(outdir)?;
    let run = run_simulation(cfg)?;
    let ledger_path = outdir.join(&cfg.output.ledger_csv);
    spectral::write_ledger_csv(run.solver.ledger(), BufWriter::new(File::create(ledger_path)?))?;
    write_steps_csv(run.solver.records(), BufWriter::new(File::create(outdir.join("steps.csv"))?))?;
    run.solver
        .mesh()
        .write_csv(BufWriter::new(File::create(outdir.join("mesh.csv"))?))?;
    if !run.snapshots.is_empty() {
        let dir: PathBuf = outdir.join(&cfg.output.snapshot_dir);
        fs::create_dir_all(&dir)?;
        let eff_t = |ts: f64| {
            // actual level time of the snapshot
            let levels = run.solver.mesh().levels();
            levels.iter().copied().find(|&t| t >= ts * (1.0 - 1e-12)).unwrap_or(ts)
        };
        for (ts, field) in &run.snapshots {
            spectral::write_snapshot(&dir, &format!("phi_t{ts}"), field, eff_t(*ts), cfg.model.alpha)?;
        }
    }
    serde_json::to_writer_pretty(File::create(outdir.join("summary.json"))?, &run.summary)?;
    Ok(run.summary)
}

// ---------------------------------------------------------------------------
// convergence study

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub tau_max: f64,
    pub error: f64,
    /// `log2(e(N) / e(2N))`, absent on the finest level.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSeries {
    pub alpha: f64,
    pub gamma: f64,
    pub expected_order: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceSeries {
    /// Order observed between the two finest levels.
    pub fn finest_order(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.order)
    }
}

/// Final-time discrete `L^2` error of the manufactured problem on the
/// graded mesh `t_k = T (k/N)^gamma`.
pub fn manufactured_error(params: &ModelParams, grid: Grid2D, t_end: f64, n: usize, gamma: f64) -> Result<(f64, f64)> {
    let mesh = TimeMesh::graded(t_end, n, gamma)?;
    let mut solver = Solver::new(*params, Scheme::Fbdf2, Field2D::zeros(grid), Forcing::Manufactured)?;
    for &tau in mesh.steps() {
        solver.step(tau)?;
    }
    let exact = manufactured_solution(&grid, params.alpha, t_end)?;
    let diff: Vec<f64> = exact.values.iter().zip(&solver.phi().values).map(|(a, b)| a - b).collect();
    Ok((Field2D::from_values(grid, diff)?.l2_norm(), mesh.max_step()))
}

pub fn convergence_series(params: &ModelParams, grid: Grid2D, t_end: f64, gamma: f64, ns: &[usize]) -> Result<ConvergenceSeries> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let (error, tau_max) = manufactured_error(params, grid, t_end, n, gamma)?;
        log::info!("alpha={} gamma={gamma} N={n}: e={error:e}", params.alpha);
        rows.push(ConvergenceRow {
            n,
            tau_max,
            error,
            order: None,
        });
    }
    for i in 0..rows.len().saturating_sub(1) {
        let ratio = rows[i + 1].n as f64 / rows[i].n as f64;
        rows[i].order = Some((rows[i].error / rows[i + 1].error).ln() / ratio.ln());
    }
    Ok(ConvergenceSeries {
        alpha: params.alpha,
        gamma,
        expected_order: gamma.min(3.0 - params.alpha),
        rows,
    })
}

/// `N = n_base 2^(m-1)` for `m = 1..=levels`.
pub fn refinement_levels(n_base: usize, levels: usize) -> Vec<usize> {
    (0..levels).map(|m| n_base << m).collect()
}

pub fn converge(cfg: &RunConfig) -> Result<Vec<ConvergenceSeries>> {
    let conv = cfg
        .converge
        .as_ref()
        .ok_or_else(|| Error::Config("missing [converge] section".into()))?;
    let params = cfg.params()?;
    let t_end = cfg.mesh.as_ref().map_or(1.0, |m| m.t_end);
    let ns = refinement_levels(conv.n_base, conv.levels);
    conv.gammas
        .iter()
        .map(|&g| convergence_series(&params, cfg.grid.grid()?, t_end, g, &ns))
        .collect()
}

pub fn write_convergence_csv<W: Write>(series: &[ConvergenceSeries], mut out: W) -> Result<()> {
    writeln!(out, "alpha,gamma,N,tau_max,error,order,expected_order")?;
    for s in series {
        for r in &s.rows {
            writeln!(
                out,
                "{},{},{},{},{:e},{},{}",
                s.alpha,
                s.gamma,
                r.n,
                r.tau_max,
                r.error,
                r.order.map_or(String::new(), |o| o.to_string()),
                s.expected_order
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
        [model]
        alpha = 0.5
        kappa = 0.01
        eps = 0.05

        [grid]
        Mx = 16
        My = 16

        [mesh]
        mode = "adaptive"
        T0 = 0.01
        N0 = 10
        gamma = 2.0
        T = 2.0
        tau_min = 1e-3
        tau_max = 0.1
        eta_user = 1e3

        [solver]
        seed = 7

        [output]
        snapshot_times = [1.0, 0.5]
    "#;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.01:0.99:99").unwrap();
        assert_eq!(g.len(), 99);
        assert!((g[1] - 0.02).abs() < 1e-15 && (g[98] - 0.99).abs() < 1e-15);
        assert!(parse_grid("0.1:0.2").is_err());
        assert!(parse_grid("a:0.2:3").is_err());
    }

    #[test]
    fn bounds_rows() {
        let rows = bounds_table(&parse_grid("0.01:0.99:99").unwrap()).unwrap();
        assert!(rows.iter().all(|r| r.r_star >= 4.659 && r.gamma_max > r.three_minus_alpha));
        assert!((rows[98].r_star - 4.864).abs() < 2e-2);
        assert!(bounds_table(&[1.5]).is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = RunConfig::from_toml(SMALL).unwrap();
        assert_eq!(cfg.solver.fp_max_iters, 500);
        assert!(RunConfig::from_toml(&SMALL.replace("Mx = 16", "Mx = 15")).is_err());
        assert!(RunConfig::from_toml(&SMALL.replace("alpha = 0.5", "alpha = 1.5")).is_err());
        assert!(RunConfig::from_toml(&SMALL.replace("seed = 7", "sede = 7")).is_err());
        let mut bad = cfg.clone();
        bad.mesh.as_mut().unwrap().tau_min = None;
        assert!(StepPlan::from_section(bad.mesh.as_ref().unwrap()).is_err());
    }

    #[test]
    fn small_adaptive_run_is_structure_preserving_and_deterministic() {
        let cfg = RunConfig::from_toml(SMALL).unwrap();
        let a = run_simulation(&cfg).unwrap();
        let s = &a.summary;
        assert!(s.t_end >= 2.0);
        assert!(s.volume_drift <= VOLUME_TOL);
        assert_eq!(s.ratio_violations, 0);
        assert_eq!(s.energy_law.violations, 0, "{s:?}");
        assert!(s.energy_law.checked > 0);
        assert_eq!(a.snapshots.len(), 2);
        assert_eq!(a.snapshots[0].0, 0.5);
        let b = run_simulation(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a.summary).unwrap(), serde_json::to_string(&b.summary).unwrap());
    }

    #[test]
    fn simulate_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_toml(&SMALL.replace("T = 2.0", "T = 0.3")).unwrap();
        let cfg = RunConfig {
            output: OutputSection {
                snapshot_times: vec![0.2],
                ..OutputSection::default()
            },
            ..cfg
        };
        simulate(&cfg, dir.path()).unwrap();
        for f in ["ledger.csv", "steps.csv", "mesh.csv", "summary.json", "snapshots/phi_t0.2.bin", "snapshots/phi_t0.2.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let ledger = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
        assert!(ledger.starts_with("t,E,E_alpha,tau,volume"));
        let (field, meta) = spectral::read_snapshot(&dir.path().join("snapshots"), "phi_t0.2").unwrap();
        assert_eq!(field.values.len(), 256);
        assert!(meta.t >= 0.2);
    }

    #[test]
    fn uniform_plan_from_tau() {
        let m = MeshSection {
            mode: MeshMode::Uniform,
            t_end: 1.0,
            tau: Some(5e-3),
            n: None,
            gamma: None,
            t0: None,
            n0: None,
            tau_min: None,
            tau_max: None,
            eta_user: None,
        };
        match StepPlan::from_section(&m).unwrap() {
            StepPlan::Fixed(mesh) => assert_eq!(mesh.num_steps(), 200),
            _ => panic!("expected fixed plan"),
        }
    }

    #[test]
    fn coarse_convergence_decreases() {
        let params = ModelParams::new(0.5, 1.0, 0.5).unwrap();
        let s = convergence_series(&params, Grid2D::square(16).unwrap(), 1.0, 2.0, &[10, 20, 40]).unwrap();
        assert!(s.rows.windows(2).all(|w| w[1].error < w[0].error));
        assert!(s.finest_order().unwrap() > 1.0);
    }
}
