//! Implicit variable-step FBDF2 stepper for the time-fractional
//! Cahn-Hilliard equation
//!
//! ```text
//! (D^a phi)^n = kappa Lap mu^n - g(t_n),   mu^n = f(phi^n) - eps^2 Lap phi^n,   f(p) = p^3 - p
//! ```
//!
//! on a doubly periodic rectangle, plus a BDF2 reference stepper for the
//! classical (`a = 1`) equation.
//!
//! Each level is solved by a fixed-point iteration in which the stiff linear
//! terms are implicit and the nonlinearity is lagged:
//!
//! ```text
//! (B_0 + kappa eps^2 |k|^4 + kappa S |k|^2) phi^{m+1}
//!     = B_0 phi^{n-1} - L^{n-1} - kappa |k|^2 (f(phi^m) - S phi^m) - g
//! ```
//!
//! The stabilisation `S >= 0` only shapes the iteration; it cancels at the
//! fixed point, so the converged level solves the unmodified scheme.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds;
use crate::dgs;
use crate::error::{Error, Result};
use crate::kernels::{gamma, omega, KernelRow};
use crate::mesh::TimeMesh;
use crate::spectral::{EnergyLedgerEntry, Field2D, Grid2D, Spectral, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub kappa: f64,
    pub eps: f64,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    /// Iteration stabilisation `S`; `None` picks `max(0, 1.5 max|phi|^2 - 1)`
    /// per level, centring `f' - S` on the range of `f'`.
    pub stabilization: Option<f64>,
}

impl ModelParams {
    pub fn new(alpha: f64, kappa: f64, eps: f64) -> Result<Self> {
        let p = Self {
            alpha,
            kappa,
            eps,
            fp_tol: 1e-12,
            fp_max_iters: 500,
            stabilization: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.kappa > 0.0 && self.eps > 0.0) {
            return Err(Error::Domain("kappa and eps must be positive".into()));
        }
        if !(self.fp_tol > 0.0) || self.fp_max_iters == 0 {
            return Err(Error::Domain("fixed-point tolerance and iteration cap must be positive".into()));
        }
        if let Some(s) = self.stabilization {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Domain(format!("stabilization must be >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Time discretisation used by a [`Solver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    /// Variable-step FBDF2 for the fractional equation.
    Fbdf2,
    /// Variable-step BDF2 for the classical equation (backward Euler at n = 1).
    Bdf2,
}

/// Optional source term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Forcing {
    None,
    /// Source for the exact solution `w_{1+a}(t) sin x sin y`.
    Manufactured,
}

/// `[4 eps^2 (2 - a + 2 r) / (kappa (1 + r) Gamma(3 - a))]^(1/a)`: levels
/// with `tau_n` below it are uniquely solvable.
pub fn solvability_max_step(alpha: f64, kappa: f64, eps: f64, r_n: f64) -> f64 {
    (4.0 * eps * eps * (2.0 - alpha + 2.0 * r_n) / (kappa * (1.0 + r_n) * gamma(3.0 - alpha))).powf(1.0 / alpha)
}

/// `[4 eps^2 g(r_n, r_{n+1}, a) / (kappa Gamma(3 - a))]^(1/a)`; `None` when
/// `g <= 0`, i.e. outside the ratio window.
pub fn energy_step_bound(alpha: f64, kappa: f64, eps: f64, r_n: f64, r_next: f64) -> Option<f64> {
    let g = dgs::g_func(r_n, r_next, alpha);
    (g > 0.0).then(|| (4.0 * eps * eps * g / (kappa * gamma(3.0 - alpha))).powf(1.0 / alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveParams {
    pub tau_min: f64,
    pub tau_max: f64,
    pub eta: f64,
}

/// Safety factor keeping clamped ratios strictly inside `[R_*, r*(a))`
/// after the ratio is recomputed from the stored steps.
const CLAMP_SAFETY: f64 = 1e-9;

/// Next step from `Pi = sqrt(1 + eta |d_tau phi^n|^2)`: `tau_ada =
/// max(tau_min, tau_max / Pi)`, then clamped so that the new ratio lies in
/// `[R_*, r*(a))`.
pub fn adaptive_next_step(dphi_sq: f64, tau_n: f64, alpha: f64, ap: &AdaptiveParams) -> Result<f64> {
    let pi = (1.0 + ap.eta * dphi_sq).sqrt();
    let tau_ada = ap.tau_min.max(ap.tau_max / pi);
    let lower = bounds::R_STAR_LOWER * (1.0 + CLAMP_SAFETY) * tau_n;
    let upper = bounds::r_star(alpha)? * (1.0 - CLAMP_SAFETY) * tau_n;
    Ok(tau_ada.max(lower).min(upper))
}

/// Per-level diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub tau: f64,
    pub ratio: f64,
    pub fp_iters: usize,
    /// Max-norm of the last fixed-point update.
    pub fp_update: f64,
    /// Max-norm of the scheme residual scaled by the diagonal of the
    /// iteration, i.e. the size of the next fixed-point update.
    pub residual: f64,
    pub stabilization: f64,
    pub solvability_bound: f64,
    pub solvability_ok: bool,
    /// Energy step bound at this level, known once `tau_{n+1}` is chosen.
    pub energy_bound: Option<f64>,
    pub energy_ok: Option<bool>,
}

/// Exact solution of the manufactured problem at time `t`.
pub fn manufactured_solution(grid: &Grid2D, alpha: f64, t: f64) -> Result<Field2D> {
    let c = if t > 0.0 { omega(1.0 + alpha, t)? } else { 0.0 };
    Ok(grid.sample(|x, y| c * x.sin() * y.sin()))
}

struct ManufacturedData {
    s_hat: Spectrum,
    s3_hat: Spectrum,
}

/// State of a run: mesh, current field, increment history, ledger and
/// per-step records.
pub struct Solver {
    params: ModelParams,
    scheme: Scheme,
    forcing: Forcing,
    spectral: Spectral,
    mesh: TimeMesh,
    phi: Field2D,
    phi_hat: Spectrum,
    /// Increments `phi^k - phi^{k-1}`, `k = 1..n`, as spectra.
    increments: Vec<Spectrum>,
    row: Option<KernelRow>,
    ledger: Vec<EnergyLedgerEntry>,
    records: Vec<StepRecord>,
    manufactured: Option<ManufacturedData>,
}

impl Solver {
    pub fn new(params: ModelParams, scheme: Scheme, phi0: Field2D, forcing: Forcing) -> Result<Self> {
        params.validate()?;
        let spectral = Spectral::new(phi0.grid);
        let phi_hat = spectral.forward(&phi0.values);
        let manufactured = match forcing {
            Forcing::None => None,
            Forcing::Manufactured => {
                let s = phi0.grid.sample(|x, y| x.sin() * y.sin());
                let s3: Vec<f64> = s.values.iter().map(|v| v * v * v).collect();
                Some(ManufacturedData {
                    s_hat: spectral.forward(&s.values),
                    s3_hat: spectral.forward(&s3),
                })
            }
        };
        let e0 = spectral.energy_from_parts(&phi0.values, &phi_hat, params.eps);
        let ledger = vec![EnergyLedgerEntry {
            n: 0,
            t: 0.0,
            e: e0,
            e_alpha: Some(e0),
            tau: 0.0,
            volume: phi0.mean(),
        }];
        Ok(Self {
            params,
            scheme,
            forcing,
            spectral,
            mesh: TimeMesh::from_steps(&[])?,
            phi: phi0,
            phi_hat,
            increments: Vec::new(),
            row: None,
            ledger,
            records: Vec::new(),
            manufactured,
        })
    }

    /// Uniform random initial data in `[-amp, amp]` from a seeded generator.
    pub fn random_initial(grid: Grid2D, amp: f64, seed: u64) -> Field2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field2D {
            grid,
            values: (0..grid.len()).map(|_| rng.gen_range(-amp..=amp)).collect(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn forcing(&self) -> Forcing {
        self.forcing
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn n(&self) -> usize {
        self.increments.len()
    }

    pub fn t(&self) -> f64 {
        self.mesh.t_end()
    }

    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    pub fn phi(&self) -> &Field2D {
        &self.phi
    }

    /// Spectra of the increments `phi^k - phi^{k-1}`, `k = 1..=n`.
    pub fn increments(&self) -> &[Spectrum] {
        &self.increments
    }

    pub fn ledger(&self) -> &[EnergyLedgerEntry] {
        &self.ledger
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    /// Order entering the step-size bounds: `a` for FBDF2, 1 for BDF2.
    fn bound_order(&self) -> f64 {
        match self.scheme {
            Scheme::Fbdf2 => self.params.alpha,
            Scheme::Bdf2 => 1.0,
        }
    }

    /// `|d_tau phi^n|^2 = |phi^n - phi^{n-1}|^2 / tau_n^2` in `L^2`.
    pub fn dphi_l2_sq(&self) -> f64 {
        match self.increments.last() {
            Some(w) => self.spectral.l2_sq_spec(w) / self.mesh.last_step().powi(2),
            None => 0.0,
        }
    }

    /// `L^{n-1} = sum_{k=1}^{n-1} B^{(n)}_{n-k} (phi^k - phi^{k-1})`.
    pub fn history_term(&self, row: &KernelRow) -> Result<Spectrum> {
        let n = row.n;
        if self.increments.len() + 1 < n {
            return Err(Error::Missing(format!(
                "history term at level {n} needs {} increments, have {}",
                n - 1,
                self.increments.len()
            )));
        }
        let mut acc = vec![Complex64::default(); self.spectral.grid().spectrum_len()];
        for (k, w) in self.increments[..n - 1].iter().enumerate() {
            let c = row.b[n - 1 - k];
            for (a, v) in acc.iter_mut().zip(w) {
                *a += c * v;
            }
        }
        Ok(acc)
    }

    fn forcing_hat(&self, t: f64) -> Result<Option<Spectrum>> {
        let Some(m) = &self.manufactured else {
            return Ok(None);
        };
        let (kappa, eps, alpha) = (self.params.kappa, self.params.eps, self.params.alpha);
        let c = omega(1.0 + alpha, t)?;
        // mu(c s) = c^3 s^3 + (2 eps^2 - 1) c s;  g = kappa Lap mu - s
        let k2 = self.spectral.k2();
        let g = m
            .s_hat
            .iter()
            .zip(&m.s3_hat)
            .zip(k2)
            .map(|((s, s3), &k2)| -kappa * k2 * (c * c * c * s3 + (2.0 * eps * eps - 1.0) * c * s) - s)
            .collect();
        Ok(Some(g))
    }

    /// Advances one level with step `tau`.
    pub fn step(&mut self, tau: f64) -> Result<&StepRecord> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Mesh(format!("step must be positive, got {tau}")));
        }
        self.mesh.push_step(tau);
        let n = self.mesh.num_steps();
        self.settle_previous_level();

        let ratio = self.mesh.ratio(n);
        let (b0, hist) = match self.scheme {
            Scheme::Fbdf2 => {
                let row = KernelRow::build(&self.mesh, n, self.params.alpha)?;
                let hist = self.history_term(&row)?;
                let b0 = row.b[0];
                self.row = Some(row);
                (b0, hist)
            }
            Scheme::Bdf2 => {
                let b0 = (1.0 + 2.0 * ratio) / ((1.0 + ratio) * tau);
                let c = -ratio * ratio / ((1.0 + ratio) * tau);
                let hist = match self.increments.last() {
                    Some(w) if n >= 2 => w.iter().map(|v| c * v).collect(),
                    _ => vec![Complex64::default(); self.spectral.grid().spectrum_len()],
                };
                (b0, hist)
            }
        };

        let t = self.mesh.t_end();
        let g_hat = self.forcing_hat(t)?;
        let (kappa, eps) = (self.params.kappa, self.params.eps);
        let stab = self.params.stabilization.unwrap_or_else(|| {
            let m = self.phi.max_abs();
            (1.5 * m * m - 1.0).max(0.0)
        });

        let k2 = self.spectral.k2().to_vec();
        let diag: Vec<f64> = k2
            .iter()
            .map(|&q| b0 + kappa * eps * eps * q * q + kappa * stab * q)
            .collect();
        let mut rhs0: Spectrum = self
            .phi_hat
            .iter()
            .zip(&hist)
            .map(|(p, h)| b0 * p - h)
            .collect();
        if let Some(g) = &g_hat {
            for (r, gv) in rhs0.iter_mut().zip(g) {
                *r -= gv;
            }
        }

        let iterate = |phi: &[f64]| -> (Spectrum, Vec<f64>) {
            let nl: Vec<f64> = phi.iter().map(|p| p * p * p - p - stab * p).collect();
            let nl_hat = self.spectral.forward(&nl);
            let new_hat: Spectrum = rhs0
                .iter()
                .zip(&nl_hat)
                .zip(k2.iter().zip(&diag))
                .map(|((r, f), (&q, &d))| (r - kappa * q * f) / d)
                .collect();
            let new = self.spectral.inverse(&new_hat);
            (new_hat, new)
        };

        let mut cur = self.phi.values.clone();
        let mut cur_hat = self.phi_hat.clone();
        let mut update = f64::INFINITY;
        let mut iters = 0;
        while iters < self.params.fp_max_iters {
            let (new_hat, new) = iterate(&cur);
            update = max_diff(&new, &cur);
            cur = new;
            cur_hat = new_hat;
            iters += 1;
            if update <= self.params.fp_tol {
                break;
            }
            if !update.is_finite() {
                break;
            }
        }
        if !(update <= self.params.fp_tol) {
            // roll back the mesh so the state stays consistent
            self.mesh = self.mesh.truncated(n - 1);
            return Err(Error::FixedPoint {
                level: n,
                iters,
                update,
            });
        }
        let (_, probe) = iterate(&cur);
        let residual = max_diff(&probe, &cur);

        let inc: Spectrum = cur_hat.iter().zip(&self.phi_hat).map(|(a, b)| a - b).collect();
        self.increments.push(inc);
        self.phi.values = cur;
        self.phi_hat = cur_hat;

        let order = self.bound_order();
        let solv = solvability_max_step(order, kappa, eps, ratio);
        self.records.push(StepRecord {
            n,
            t,
            tau,
            ratio,
            fp_iters: iters,
            fp_update: update,
            residual,
            stabilization: stab,
            solvability_bound: solv,
            solvability_ok: tau <= solv,
            energy_bound: None,
            energy_ok: None,
        });
        let e = self.spectral.energy_from_parts(&self.phi.values, &self.phi_hat, eps);
        self.ledger.push(EnergyLedgerEntry {
            n,
            t,
            e,
            e_alpha: None,
            tau,
            volume: self.phi_hat[0].re / self.spectral.grid().len() as f64,
        });
        Ok(self.records.last().expect("record just pushed"))
    }

    /// Fills in the quantities of level `n - 1` that need `r_n`, once the
    /// step `tau_n` has been appended to the mesh.
    fn settle_previous_level(&mut self) {
        let n = self.mesh.num_steps();
        if n < 2 {
            return;
        }
        let prev = n - 1;
        let r_next = self.mesh.ratio(n);
        if let Some(e_alpha) = self.modified_energy_at(prev, r_next) {
            self.ledger[prev].e_alpha = Some(e_alpha);
        }
        if prev >= 2 {
            let (kappa, eps) = (self.params.kappa, self.params.eps);
            let bound = energy_step_bound(self.bound_order(), kappa, eps, self.mesh.ratio(prev), r_next);
            let rec = &mut self.records[prev - 1];
            rec.energy_bound = bound;
            rec.energy_ok = Some(bound.is_some_and(|b| rec.tau <= b));
        }
    }

    /// Modified energy of the latest level `n`, given `r_{n+1}`.
    fn modified_energy_at(&self, n: usize, r_next: f64) -> Option<f64> {
        if n != self.increments.len() {
            return None;
        }
        let e = self.ledger[n].e;
        let kappa = self.params.kappa;
        let tau_n = self.mesh.tau(n);
        match self.scheme {
            Scheme::Fbdf2 => {
                let row = self.row.as_ref()?;
                let sq = self.partial_sum_hm1_squares();
                let y = dgs::y_from_partial_squares(&row.aux, &sq).ok()?;
                let local = dgs::g_local_coeff(self.params.alpha, tau_n, r_next) * sq[n - 1];
                Some(e + (local + 0.5 * y) / kappa)
            }
            Scheme::Bdf2 => {
                let w = self.increments.last()?;
                let dphi = self.spectral.hminus1_sq_spec(w) / (tau_n * tau_n);
                let tau_next = r_next * tau_n;
                Some(e + r_next.sqrt() * tau_next / (2.0 * kappa * (1.0 + r_next)) * dphi)
            }
        }
    }

    /// `|phi^n - phi^j|_{-1}^2` for `j = 0..n-1`.
    fn partial_sum_hm1_squares(&self) -> Vec<f64> {
        let n = self.increments.len();
        let mut acc = vec![Complex64::default(); self.spectral.grid().spectrum_len()];
        let mut sq = vec![0.0; n];
        for j in (0..n).rev() {
            for (a, v) in acc.iter_mut().zip(&self.increments[j]) {
                *a += v;
            }
            sq[j] = self.spectral.hminus1_sq_spec(&acc);
        }
        sq
    }

    /// Modified energy of the current level for a hypothetical next ratio;
    /// used at the end of a run, where no further step is taken.
    pub fn modified_energy_with_next_ratio(&self, r_next: f64) -> Option<f64> {
        self.modified_energy_at(self.n(), r_next)
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
