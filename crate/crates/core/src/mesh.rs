//! Nonuniform time meshes `0 = t_0 < t_1 < ... < t_N`.
//!
//! Steps and ratios use the one-based convention of the scheme:
//! `tau(k) = t_k - t_{k-1}` for `k >= 1`, `ratio(1) = 0` and
//! `ratio(k) = tau(k) / tau(k-1)` for `k >= 2`.

use std::io::{BufRead, Write};

use crate::bounds;
use crate::error::{Error, Result};

/// Steps are stored as given; levels are their prefix sums. Distances
/// `t_n - t_k` used by the kernels are formed from the steps so that meshes
/// with long runs of shrinking steps keep full relative accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    steps: Vec<f64>,
    levels: Vec<f64>,
}

impl TimeMesh {
    /// Builds a mesh from explicit time levels. The first level must be 0.
    pub fn from_levels(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Mesh("mesh needs at least the level t_0".into()));
        }
        if levels[0] != 0.0 {
            return Err(Error::Mesh(format!("t_0 must be 0, got {}", levels[0])));
        }
        for (k, w) in levels.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Mesh(format!(
                    "levels not strictly increasing at k={}: {} -> {}",
                    k + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        let steps = levels.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { steps, levels })
    }

    /// Builds a mesh from step sizes `tau_1, ..., tau_N`.
    pub fn from_steps(steps: &[f64]) -> Result<Self> {
        let mut mesh = Self {
            steps: Vec::with_capacity(steps.len()),
            levels: vec![0.0],
        };
        for &tau in steps {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::Mesh(format!("nonpositive or non-finite step {tau}")));
            }
            mesh.push_step(tau);
        }
        Ok(mesh)
    }

    /// Builds a mesh from a first step and the ratios `r_2, ..., r_N`.
    pub fn from_ratios(tau1: f64, ratios: &[f64]) -> Result<Self> {
        let mut steps = Vec::with_capacity(ratios.len() + 1);
        steps.push(tau1);
        let mut tau = tau1;
        for &r in ratios {
            tau *= r;
            steps.push(tau);
        }
        Self::from_steps(&steps)
    }

    pub fn uniform(t_end: f64, n: usize) -> Result<Self> {
        if n == 0 || !(t_end > 0.0) {
            return Err(Error::Mesh(format!("uniform mesh needs N >= 1 and T > 0 (N={n}, T={t_end})")));
        }
        let levels = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
        Self::from_levels(levels)
    }

    /// Graded mesh `t_k = T0 (k/N0)^gamma`.
    pub fn graded(t0: f64, n0: usize, gamma: f64) -> Result<Self> {
        if n0 < 2 {
            return Err(Error::Mesh(format!("graded mesh needs N0 >= 2, got {n0}")));
        }
        if !(gamma >= 1.0) {
            return Err(Error::Mesh(format!("grading exponent must be >= 1, got {gamma}")));
        }
        if !(t0 > 0.0) {
            return Err(Error::Mesh(format!("graded mesh needs T0 > 0, got {t0}")));
        }
        let levels = (0..=n0)
            .map(|k| {
                if k == n0 {
                    t0
                } else {
                    t0 * (k as f64 / n0 as f64).powf(gamma)
                }
            })
            .collect();
        Self::from_levels(levels)
    }

    /// Graded prefix on `[0, T0]` followed by a uniform tail of step `tau`
    /// up to `t_end`. The first tail step is clamped so that the junction
    /// ratio lies in `[R_*, r*(alpha))`; the tail then relaxes geometrically
    /// towards `tau` within the same window.
    pub fn graded_then_uniform(
        t0: f64,
        n0: usize,
        gamma: f64,
        t_end: f64,
        tau: f64,
        alpha: f64,
    ) -> Result<Self> {
        let mut mesh = Self::graded(t0, n0, gamma)?;
        if !(tau > 0.0) || !(t_end > t0) {
            return Err(Error::Mesh(format!("invalid tail: tau={tau}, T={t_end}, T0={t0}")));
        }
        let upper = bounds::r_star(alpha)? * (1.0 - 1e-9);
        let lower = bounds::R_STAR_LOWER;
        while mesh.t_end() < t_end * (1.0 - 1e-12) {
            let last = mesh.last_step();
            let next = tau.clamp(lower * last, upper * last);
            mesh.push_step(next);
        }
        Ok(mesh)
    }

    /// Appends one level `t_N + tau`.
    pub fn push_step(&mut self, tau: f64) {
        assert!(tau > 0.0 && tau.is_finite(), "step must be positive and finite, got {tau}");
        let t = self.t_end() + tau;
        self.steps.push(tau);
        self.levels.push(t);
    }

    /// Number of steps `N`.
    pub fn num_steps(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn t(&self, k: usize) -> f64 {
        self.levels[k]
    }

    pub fn t_end(&self) -> f64 {
        *self.levels.last().expect("mesh is never empty")
    }

    /// `tau_k = t_k - t_{k-1}` for `k >= 1`.
    pub fn tau(&self, k: usize) -> f64 {
        assert!(k >= 1 && k <= self.steps.len(), "step index {k} out of range");
        self.steps[k - 1]
    }

    pub fn last_step(&self) -> f64 {
        self.tau(self.num_steps())
    }

    /// `r_1 = 0`, `r_k = tau_k / tau_{k-1}` for `k >= 2`.
    pub fn ratio(&self, k: usize) -> f64 {
        if k <= 1 {
            0.0
        } else {
            self.tau(k) / self.tau(k - 1)
        }
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn max_step(&self) -> f64 {
        self.steps.iter().copied().fold(0.0, f64::max)
    }

    /// Distances `d[k] = t_n - t_k` for `k = 0..=n`, accumulated from the
    /// steps.
    pub fn distances_from(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n + 1];
        for k in (0..n).rev() {
            d[k] = d[k + 1] + self.steps[k];
        }
        d
    }

    /// Mesh restricted to the levels `t_0..=t_n`.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.num_steps());
        Self {
            steps: self.steps[..n].to_vec(),
            levels: self.levels[..=n].to_vec(),
        }
    }

    /// Writes the mesh as CSV with columns `k,t_k,tau_k,r_k`. The row for
    /// `k = 0` has empty step and ratio cells.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,t_k,tau_k,r_k")?;
        writeln!(out, "0,{:.17e},,", self.levels[0])?;
        for k in 1..=self.num_steps() {
            writeln!(out, "{},{:.17e},{:.17e},{:.17e}", k, self.t(k), self.tau(k), self.ratio(k))?;
        }
        Ok(())
    }

    /// Reads a mesh written by [`TimeMesh::write_csv`]. Steps are taken
    /// from the `tau_k` column when present, otherwise from level
    /// differences.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut levels = Vec::new();
        let mut steps = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if lineno == 0 || line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() < 2 {
                return Err(Error::Mesh(format!("line {}: expected at least 2 columns", lineno + 1)));
            }
            let k: usize = cols[0]
                .trim()
                .parse()
                .map_err(|e| Error::Mesh(format!("line {}: bad index: {e}", lineno + 1)))?;
            if k != levels.len() {
                return Err(Error::Mesh(format!("line {}: expected k={}, got {k}", lineno + 1, levels.len())));
            }
            let t: f64 = cols[1]
                .trim()
                .parse()
                .map_err(|e| Error::Mesh(format!("line {}: bad t_k: {e}", lineno + 1)))?;
            levels.push(t);
            if k >= 1 {
                if let Some(tau) = cols.get(2).map(|c| c.trim()).filter(|c| !c.is_empty()) {
                    let tau: f64 = tau
                        .parse()
                        .map_err(|e| Error::Mesh(format!("line {}: bad tau_k: {e}", lineno + 1)))?;
                    steps.push(tau);
                }
            }
        }
        let by_levels = Self::from_levels(levels)?;
        if steps.len() == by_levels.num_steps() {
            let mesh = Self::from_steps(&steps)?;
            for k in 0..=mesh.num_steps() {
                let (a, b) = (mesh.t(k), by_levels.t(k));
                if (a - b).abs() > 1e-12 * b.abs().max(1.0) {
                    return Err(Error::Mesh(format!("t_{k} inconsistent with steps: {b} vs {a}")));
                }
            }
            Ok(mesh)
        } else {
            Ok(by_levels)
        }
    }
}
