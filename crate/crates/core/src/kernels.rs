//! FBDF2 convolution kernels on a nonuniform mesh.
//!
//! For a level `n` the Caputo derivative is approximated by
//! `sum_{k=1}^n B^{(n)}_{n-k} (v^k - v^{k-1})`. The row `B^{(n)}` is
//! assembled from the positive coefficients
//!
//! ```text
//! a^{(n)}_{n-k}   = (1/tau_k) int_{t_{k-1}}^{t_k} w_{1-a}(t_n - s) ds
//! eta^{(n)}_{n-k} = (2/tau_k) int_{t_{k-1}}^{t_k} ((s - t_{k-1/2})/tau_k) w_{1-a}(t_n - s) ds
//! ```
//!
//! with `w_b(t) = t^{b-1} / Gamma(b)`. Both integrals are evaluated in
//! closed form through `w_{2-a}` and `w_{3-a}`. For history intervals that
//! are short compared with their distance to `t_n` the closed forms cancel
//! catastrophically, and a Taylor expansion in `tau_k / (t_n - t_k)` is used
//! instead.
//!
//! Rows are indexed by lag `j = n - k`, so `row.a[j] = a^{(n)}_j`.

use std::io::Write;

use serde::Serialize;

use crate::bounds;
use crate::error::{Error, Result};
use crate::mesh::TimeMesh;

/// Switch-over point from the closed form to the series in `h / x`.
const SERIES_RATIO: f64 = 0.5;
const SERIES_MAX_TERMS: usize = 200;

/// `Gamma(x)` for the positive arguments used here.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// `w_beta(t) = t^(beta-1) / Gamma(beta)`.
pub fn omega(beta: f64, t: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("omega needs beta > 0, got {beta}")));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("omega needs t > 0, got {t}")));
    }
    Ok(t.powf(beta - 1.0) / gamma(beta))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("fractional order must lie in (0, 1), got {alpha}")))
    }
}

/// Gamma constants shared by every coefficient of a given order.
#[derive(Debug, Clone, Copy)]
struct Order {
    alpha: f64,
    g1: f64,
    g2: f64,
    g3: f64,
}

impl Order {
    fn new(alpha: f64) -> Self {
        Self {
            alpha,
            g1: gamma(1.0 - alpha),
            g2: gamma(2.0 - alpha),
            g3: gamma(3.0 - alpha),
        }
    }

    fn w1(&self, t: f64) -> f64 {
        t.powf(-self.alpha) / self.g1
    }

    fn w2(&self, t: f64) -> f64 {
        t.powf(1.0 - self.alpha) / self.g2
    }

    fn w3(&self, t: f64) -> f64 {
        t.powf(2.0 - self.alpha) / self.g3
    }

    /// `a` for the interval of length `h` whose right end lies `x >= 0`
    /// before `t_n`.
    fn a(&self, x: f64, h: f64) -> f64 {
        if x == 0.0 {
            return self.w2(h) / h;
        }
        // w2(x+h) - w2(x) = w2(x) * expm1((1-a) ln(1 + h/x))
        let rho = h / x;
        self.w2(x) * ((1.0 - self.alpha) * rho.ln_1p()).exp_m1() / h
    }

    fn eta(&self, x: f64, h: f64) -> f64 {
        let al = self.alpha;
        if x == 0.0 {
            return al * h.powf(-al) / self.g3;
        }
        let rho = h / x;
        if rho < SERIES_RATIO {
            // -(x^-a / G(3-a)) sum_{j>=3} (j-2)/j! (2-a)_j rho^{j-2}
            let beta = 2.0 - al;
            let mut fall = beta * (beta - 1.0);
            let mut fact = 2.0;
            let mut pow = 1.0;
            let mut sum = 0.0;
            for j in 3..SERIES_MAX_TERMS {
                let jf = j as f64;
                fall *= beta - jf + 1.0;
                fact *= jf;
                pow *= rho;
                let term = (jf - 2.0) / fact * fall * pow;
                sum += term;
                if term.abs() <= 1e-17 * sum.abs() {
                    break;
                }
            }
            -x.powf(-al) / self.g3 * sum
        } else {
            let y = x + h;
            2.0 / (h * h) * (self.w3(y) - self.w3(x) - 0.5 * h * (self.w2(y) + self.w2(x)))
        }
    }

    /// `I = a - w_{1-a}(x + h)`.
    fn bridge_i(&self, x: f64, h: f64) -> f64 {
        let al = self.alpha;
        let y = x + h;
        let rho = h / y;
        if rho < SERIES_RATIO {
            // -(y^-a / G(2-a)) sum_{j>=2} (-1)^j (1-a)_j rho^{j-1} / j!
            let beta = 1.0 - al;
            let mut fall = beta;
            let mut fact = 1.0;
            let mut pow = 1.0;
            let mut sign = -1.0;
            let mut sum = 0.0;
            for j in 2..SERIES_MAX_TERMS {
                let jf = j as f64;
                fall *= beta - jf + 1.0;
                fact *= jf;
                pow *= rho;
                sign = -sign;
                let term = sign * fall * pow / fact;
                sum += term;
                if term.abs() <= 1e-17 * sum.abs() {
                    break;
                }
            }
            -y.powf(-al) / self.g2 * sum
        } else {
            self.a(x, h) - self.w1(y)
        }
    }

    /// `J = w_{1-a}(x) - a`, only for `x > 0`.
    fn bridge_j(&self, x: f64, h: f64) -> f64 {
        let al = self.alpha;
        let rho = h / x;
        if rho < SERIES_RATIO {
            // -(x^-a / G(2-a)) sum_{j>=2} (1-a)_j rho^{j-1} / j!
            let beta = 1.0 - al;
            let mut fall = beta;
            let mut fact = 1.0;
            let mut pow = 1.0;
            let mut sum = 0.0;
            for j in 2..SERIES_MAX_TERMS {
                let jf = j as f64;
                fall *= beta - jf + 1.0;
                fact *= jf;
                pow *= rho;
                let term = fall * pow / fact;
                sum += term;
                if term.abs() <= 1e-17 * sum.abs() {
                    break;
                }
            }
            -x.powf(-al) / self.g2 * sum
        } else {
            self.w1(x) - self.a(x, h)
        }
    }
}

fn check_indices(mesh: &TimeMesh, n: usize, k: usize) -> Result<()> {
    if n == 0 || n > mesh.num_steps() {
        return Err(Error::Index(format!("level n={n} outside 1..={}", mesh.num_steps())));
    }
    if k == 0 || k > n {
        return Err(Error::Index(format!("interval k={k} outside 1..={n}")));
    }
    Ok(())
}

/// `a^{(n)}_{n-k}` for `1 <= k <= n`.
pub fn coeff_a(mesh: &TimeMesh, alpha: f64, n: usize, k: usize) -> Result<f64> {
    check_alpha(alpha)?;
    check_indices(mesh, n, k)?;
    let d = mesh.distances_from(n);
    Ok(Order::new(alpha).a(d[k], mesh.tau(k)))
}

/// `eta^{(n)}_{n-k}` for `1 <= k <= n`.
pub fn coeff_eta(mesh: &TimeMesh, alpha: f64, n: usize, k: usize) -> Result<f64> {
    check_alpha(alpha)?;
    check_indices(mesh, n, k)?;
    let d = mesh.distances_from(n);
    Ok(Order::new(alpha).eta(d[k], mesh.tau(k)))
}

/// The bridging integrals at one `(n, k)`.
///
/// `I^{(n)}_{n-k} = int (t - t_k)/tau_k w_{-a}(t_n - t) dt` is defined for
/// `1 <= k <= n`; `J^{(n)}_{n-k} = int (t_{k-1} - t)/tau_k w_{-a}(t_n - t) dt`
/// only for `k <= n - 1`, so `j` is `None` at `k = n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BridgingPair {
    pub i: f64,
    pub j: Option<f64>,
}

pub fn bridging_integrals(mesh: &TimeMesh, alpha: f64, n: usize, k: usize) -> Result<BridgingPair> {
    check_alpha(alpha)?;
    check_indices(mesh, n, k)?;
    let ord = Order::new(alpha);
    let d = mesh.distances_from(n);
    let h = mesh.tau(k);
    let i = ord.bridge_i(d[k], h);
    let j = (k < n).then(|| ord.bridge_j(d[k], h));
    Ok(BridgingPair { i, j })
}

/// One row of FBDF2 coefficients at level `n`, indexed by lag `j = n - k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRow {
    pub n: usize,
    pub alpha: f64,
    pub a: Vec<f64>,
    pub eta: Vec<f64>,
    /// Compact FBDF2 row `B^{(n)}`.
    pub b: Vec<f64>,
    /// Nonlocal (L1-type) kernels `a_hat^{(n)}` of the local-nonlocal split.
    pub a_hat: Vec<f64>,
    /// Auxiliary kernels: `A_0 = 2 a_hat_0`, `A_j = a_hat_j` for `j >= 1`.
    pub aux: Vec<f64>,
    /// Local BDF2-type part: coefficients of `grad v^n` and `grad v^{n-1}`.
    /// Zero at `n = 1`.
    pub local: [f64; 2],
}

impl KernelRow {
    pub fn build(mesh: &TimeMesh, n: usize, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if n == 0 || n > mesh.num_steps() {
            return Err(Error::Index(format!("level n={n} outside 1..={}", mesh.num_steps())));
        }
        let ord = Order::new(alpha);
        let d = mesh.distances_from(n);
        let mut a = vec![0.0; n];
        let mut eta = vec![0.0; n];
        for k in 1..=n {
            let h = mesh.tau(k);
            a[n - k] = ord.a(d[k], h);
            eta[n - k] = ord.eta(d[k], h);
        }

        if n == 1 {
            return Ok(Self {
                n,
                alpha,
                b: a.clone(),
                a_hat: a.clone(),
                aux: vec![2.0 * a[0]],
                a,
                eta,
                local: [0.0, 0.0],
            });
        }

        let r = |k: usize| mesh.ratio(k);
        let rn = r(n);

        // Compact row, grouped exactly as the defining formula.
        let mut b = a.clone();
        b[0] += rn * eta[0] / (1.0 + rn);
        b[1] -= rn * rn * eta[0] / (1.0 + rn);
        for k in 1..n {
            let j = n - k;
            let rk1 = r(k + 1);
            let c = eta[j] / (rk1 * (1.0 + rk1));
            b[j - 1] += c;
            b[j] -= c * rk1;
        }

        // Local-nonlocal split.
        let local = [
            a[0] / (2.0 - alpha) + rn * eta[0] / (1.0 + rn),
            -rn * rn * eta[0] / (1.0 + rn),
        ];
        let mut a_hat = vec![0.0; n];
        a_hat[0] = (1.0 - alpha) / (2.0 - alpha) * a[0] + eta[1] / (rn * (1.0 + rn));
        for k in 2..n {
            let j = n - k;
            let (rk, rk1) = (r(k), r(k + 1));
            a_hat[j] = a[j] - eta[j] / (1.0 + rk1) + eta[j + 1] / (rk * (1.0 + rk));
        }
        a_hat[n - 1] = a[n - 1] - eta[n - 1] / (1.0 + r(2));

        let mut aux = a_hat.clone();
        aux[0] *= 2.0;

        Ok(Self {
            n,
            alpha,
            a,
            eta,
            b,
            a_hat,
            aux,
            local,
        })
    }

    /// `B^{(n)}_{n-k}` for `1 <= k <= n`.
    pub fn b_at(&self, k: usize) -> f64 {
        self.b[self.n - k]
    }

    /// Largest deviation between the compact row and the recombined
    /// local + nonlocal split, relative to `max |B|`.
    pub fn splitting_residual(&self) -> f64 {
        let scale = self.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for j in 0..self.n {
            let local = if j < 2 { self.local[j] } else { 0.0 };
            worst = worst.max((self.b[j] - local - self.a_hat[j]).abs());
        }
        worst / scale
    }

    /// `sum_{k=1}^n B^{(n)}_{n-k} w_k` for increments `w_1..w_n`.
    pub fn apply(&self, increments: &[f64]) -> Result<f64> {
        if increments.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: increments.len(),
            });
        }
        Ok(increments
            .iter()
            .enumerate()
            .map(|(i, w)| self.b[self.n - 1 - i] * w)
            .sum())
    }

    /// `sum_{k=1}^{n-1} B^{(n)}_{n-k} w_k`, the part known before level `n`
    /// is solved.
    pub fn history(&self, increments: &[f64]) -> Result<f64> {
        if increments.len() + 1 != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n - 1,
                got: increments.len(),
            });
        }
        Ok(increments
            .iter()
            .enumerate()
            .map(|(i, w)| self.b[self.n - 1 - i] * w)
            .sum())
    }
}

/// Discrete Caputo derivative at level `n` of the values `v^0..=v^n`.
pub fn apply_caputo(mesh: &TimeMesh, alpha: f64, values: &[f64], n: usize) -> Result<f64> {
    if values.len() < n + 1 {
        return Err(Error::LengthMismatch {
            expected: n + 1,
            got: values.len(),
        });
    }
    let row = KernelRow::build(mesh, n, alpha)?;
    let inc: Vec<f64> = values[..=n].windows(2).map(|w| w[1] - w[0]).collect();
    row.apply(&inc)
}

/// Applies a row to field-valued increments `w_1..w_n`, each a slice of
/// equal length.
pub fn apply_caputo_field(row: &KernelRow, increments: &[&[f64]]) -> Result<Vec<f64>> {
    if increments.len() != row.n {
        return Err(Error::LengthMismatch {
            expected: row.n,
            got: increments.len(),
        });
    }
    let len = increments[0].len();
    let mut out = vec![0.0; len];
    for (i, inc) in increments.iter().enumerate() {
        if inc.len() != len {
            return Err(Error::LengthMismatch { expected: len, got: inc.len() });
        }
        let c = row.b[row.n - 1 - i];
        for (o, v) in out.iter_mut().zip(inc.iter()) {
            *o += c * v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyVerdict {
    pub holds: bool,
    pub checked: usize,
    pub violations: usize,
    /// Smallest `margin / scale` seen; positive when the strict inequality holds.
    pub worst_margin: f64,
    /// `(n, k)` of the worst margin.
    pub worst_at: Option<(usize, usize)>,
}

impl PropertyVerdict {
    fn new() -> Self {
        Self {
            holds: true,
            checked: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            worst_at: None,
        }
    }

    fn record(&mut self, n: usize, k: usize, margin: f64, scale: f64) {
        self.checked += 1;
        let rel = if scale > 0.0 { margin / scale } else { margin };
        if rel < self.worst_margin {
            self.worst_margin = rel;
            self.worst_at = Some((n, k));
        }
        if rel <= -KERNEL_CHECK_RTOL {
            self.violations += 1;
            self.holds = false;
        }
    }
}

/// Relative roundoff allowance for the kernel inequalities. Far-history
/// differences of differences can be many orders of magnitude below the
/// kernels themselves, so the margin is compared against the magnitude of
/// the kernels entering it.
pub const KERNEL_CHECK_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelPropertyReport {
    pub alpha: f64,
    pub up_to_n: usize,
    /// Ratios `r_k < R_*` (the lower-bound hypothesis).
    pub hypothesis_violations: Vec<bounds::RatioViolation>,
    /// `A^{(n)}_{n-k-1} > A^{(n)}_{n-k} > 0`.
    pub row_decrease: PropertyVerdict,
    /// `A^{(n-1)}_{n-1-k} > A^{(n)}_{n-k}`.
    pub column_decrease: PropertyVerdict,
    /// `A^{(n-1)}_{n-2-k} - A^{(n-1)}_{n-1-k} > A^{(n)}_{n-k-1} - A^{(n)}_{n-k}`.
    pub convexity: PropertyVerdict,
}

impl KernelPropertyReport {
    pub fn all_hold(&self) -> bool {
        self.row_decrease.holds && self.column_decrease.holds && self.convexity.holds
    }
}

/// Evaluates the monotonicity and convexity properties of the auxiliary
/// kernels for `2 <= n <= up_to_n`. Ratio hypothesis violations are
/// reported but do not stop the evaluation.
pub fn check_kernel_properties(mesh: &TimeMesh, alpha: f64, up_to_n: usize) -> Result<KernelPropertyReport> {
    check_alpha(alpha)?;
    let up_to_n = up_to_n.min(mesh.num_steps());
    let hypothesis_violations = (2..=up_to_n)
        .filter_map(|k| {
            let ratio = mesh.ratio(k);
            (ratio < bounds::R_STAR_LOWER).then_some(bounds::RatioViolation { k, ratio })
        })
        .collect();

    let mut row_decrease = PropertyVerdict::new();
    let mut column_decrease = PropertyVerdict::new();
    let mut convexity = PropertyVerdict::new();

    let mut prev = if up_to_n >= 1 {
        Some(KernelRow::build(mesh, 1, alpha)?)
    } else {
        None
    };
    for n in 2..=up_to_n {
        let row = KernelRow::build(mesh, n, alpha)?;
        let big = &row.aux;
        let old = &prev.as_ref().expect("row n-1 exists").aux;
        for k in 1..n {
            let (j_lo, j_hi) = (n - k - 1, n - k);
            // (a)
            let scale = big[j_lo].abs().max(big[j_hi].abs());
            row_decrease.record(n, k, (big[j_lo] - big[j_hi]).min(big[j_hi]), scale);
            // (b)
            let prev_val = old[n - 1 - k];
            column_decrease.record(n, k, prev_val - big[j_hi], prev_val.abs().max(big[j_hi].abs()));
            // (c)
            if k <= n - 2 {
                let lhs = old[n - 2 - k] - old[n - 1 - k];
                let rhs = big[j_lo] - big[j_hi];
                let scale = old[n - 2 - k]
                    .abs()
                    .max(old[n - 1 - k].abs())
                    .max(big[j_lo].abs())
                    .max(big[j_hi].abs());
                convexity.record(n, k, lhs - rhs, scale);
            }
        }
        prev = Some(row);
    }

    Ok(KernelPropertyReport {
        alpha,
        up_to_n,
        hypothesis_violations,
        row_decrease,
        column_decrease,
        convexity,
    })
}

/// Debug dump of kernel rows `1..=n_max` as CSV with columns
/// `n,k,a,eta,B,a_hat,A`.
pub fn write_kernel_csv<W: Write>(mesh: &TimeMesh, alpha: f64, n_max: usize, mut out: W) -> Result<()> {
    writeln!(out, "n,k,a,eta,B,a_hat,A")?;
    for n in 1..=n_max.min(mesh.num_steps()) {
        let row = KernelRow::build(mesh, n, alpha)?;
        for k in 1..=n {
            let j = n - k;
            writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                n, k, row.a[j], row.eta[j], row.b[j], row.a_hat[j], row.aux[j]
            )?;
        }
    }
    Ok(())
}
