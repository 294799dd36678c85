//! Discrete gradient structure (DGS) of the FBDF2 formula.
//!
//! For increments `w_k = v^k - v^{k-1}` the FBDF2 operator satisfies
//!
//! ```text
//! w_n (D^a v)^n >= G[w_n] - G[w_{n-1}] + g(r_n, r_{n+1}, a) / (2 Gamma(3-a) tau_n^a) w_n^2
//! ```
//!
//! whenever `R_* <= r_k < r*(a)`. This module provides the bound functions,
//! the quadratic functionals `Y` and `G`, and numerical checks of both the
//! nonlocal part and the full inequality.

use serde::Serialize;

use crate::bounds;
use crate::error::{Error, Result};
use crate::kernels::{gamma, KernelRow};
use crate::mesh::TimeMesh;

/// `g(x, y, a) = (2 + 2(1+a)x - a x^(2-a/2)) / (1+x) - a y^(2-a/2) / (1+y)`.
pub fn g_func(x: f64, y: f64, alpha: f64) -> f64 {
    let p = 2.0 - alpha / 2.0;
    (2.0 + 2.0 * (1.0 + alpha) * x - alpha * x.powf(p)) / (1.0 + x) - alpha * y.powf(p) / (1.0 + y)
}

/// `g5(z, a) = a/(2-a) [(z+1)^(2-a) - z^(2-a)] - a (z+1)^(1-a) + a(1-a)(z+1)/(2-a)`.
pub fn g5(z: f64, alpha: f64) -> f64 {
    let c = alpha / (2.0 - alpha);
    c * ((z + 1.0).powf(2.0 - alpha) - z.powf(2.0 - alpha)) - alpha * (z + 1.0).powf(1.0 - alpha)
        + c * (1.0 - alpha) * (z + 1.0)
}

/// Suffix sums `S_j = sum_{l=j+1}^n w_l` for `j = 0..n-1`.
pub fn suffix_sums(w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    let mut acc = 0.0;
    for j in (0..w.len()).rev() {
        acc += w[j];
        out[j] = acc;
    }
    out
}

/// `Y` evaluated from the squared partial sums `sq[j] = |S_j|^2`,
/// `S_j = sum_{l=j+1}^n w_l`, with lag-indexed kernels `kern[m] = a^{(n)}_m`:
///
/// `sum_{j=1}^{n-1} (kern[n-j-1] - kern[n-j]) sq[j] + kern[n-1] sq[0]`.
///
/// Scalar and field-valued histories share this form; only the notion of
/// square differs.
pub fn y_from_partial_squares(kern: &[f64], sq: &[f64]) -> Result<f64> {
    let n = kern.len();
    if sq.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: sq.len() });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut y = kern[n - 1] * sq[0];
    for j in 1..n {
        y += (kern[n - j - 1] - kern[n - j]) * sq[j];
    }
    Ok(y)
}

/// The functional `Y[w_n]` for a scalar history `w_1..w_n`.
pub fn y_functional(kern: &[f64], w: &[f64]) -> Result<f64> {
    if w.len() != kern.len() {
        return Err(Error::LengthMismatch {
            expected: kern.len(),
            got: w.len(),
        });
    }
    let sq: Vec<f64> = suffix_sums(w).iter().map(|s| s * s).collect();
    y_from_partial_squares(kern, &sq)
}

/// Coefficient of `w_n^2` in the local part of `G`:
/// `a r^(2-a/2) / (2 (1+r) tau_n^a Gamma(3-a))` with `r = r_{n+1}`.
pub fn g_local_coeff(alpha: f64, tau_n: f64, r_next: f64) -> f64 {
    alpha * r_next.powf(2.0 - alpha / 2.0) / (2.0 * (1.0 + r_next) * tau_n.powf(alpha) * gamma(3.0 - alpha))
}

/// `G[w_n]` from a prebuilt row at level `n = w.len()`.
pub fn g_functional_with_row(row: &KernelRow, tau_n: f64, r_next: f64, w: &[f64]) -> Result<f64> {
    let n = row.n;
    if w.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: w.len() });
    }
    let first = g_local_coeff(row.alpha, tau_n, r_next) * w[n - 1] * w[n - 1];
    Ok(first + 0.5 * y_functional(&row.aux, w)?)
}

/// `G[w_n]` for the history `w_1..w_n` on `mesh`. The functional involves
/// the next ratio `r_{n+1}`; pass it explicitly or let it be read from the
/// mesh when level `n + 1` exists.
pub fn g_functional(mesh: &TimeMesh, alpha: f64, w: &[f64], r_next: Option<f64>) -> Result<f64> {
    let n = w.len();
    if n == 0 {
        return Ok(0.0);
    }
    let r_next = match r_next {
        Some(r) => r,
        None if mesh.num_steps() > n => mesh.ratio(n + 1),
        None => return Err(Error::Missing(format!("G at level {n} needs the ratio r_{}", n + 1))),
    };
    let row = KernelRow::build(mesh, n, alpha)?;
    g_functional_with_row(&row, mesh.tau(n), r_next, w)
}

/// Outcome of one DGS inequality check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DgsReport {
    pub n: usize,
    /// `w_n (D^a v)^n`.
    pub lhs: f64,
    /// `G[w_n] - G[w_{n-1}] + g w_n^2 / (2 Gamma(3-a) tau_n^a)`.
    pub rhs: f64,
    pub margin: f64,
    /// Sum of magnitudes of all terms; roundoff is judged against it.
    pub scale: f64,
    /// `R_* <= r_k < r*(a)` for `2 <= k <= n + 1`.
    pub ratio_ok: bool,
    /// Margin of the local (BDF2-type) part on its own.
    pub local_margin: f64,
    /// Margin of the nonlocal (L1-type) part on its own.
    pub nonlocal_margin: f64,
}

impl DgsReport {
    /// Whether the inequality holds up to `rtol * scale`.
    pub fn holds(&self, rtol: f64) -> bool {
        self.margin >= -rtol * self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlocalReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub scale: f64,
}

fn increments(v: &[f64], n: usize) -> Result<Vec<f64>> {
    if v.len() < n + 1 {
        return Err(Error::LengthMismatch {
            expected: n + 1,
            got: v.len(),
        });
    }
    Ok(v[..=n].windows(2).map(|p| p[1] - p[0]).collect())
}

fn nonlocal_from_rows(row: &KernelRow, prev: Option<&KernelRow>, w: &[f64]) -> Result<NonlocalReport> {
    let n = row.n;
    let lhs: f64 = w[n - 1] * (0..n).map(|i| row.a_hat[n - 1 - i] * w[i]).sum::<f64>();
    let y_now = y_functional(&row.aux, &w[..n])?;
    let y_prev = match prev {
        Some(p) => y_functional(&p.aux, &w[..n - 1])?,
        None => 0.0,
    };
    let rhs = 0.5 * (y_now - y_prev);
    Ok(NonlocalReport {
        lhs,
        rhs,
        margin: lhs - rhs,
        scale: lhs.abs() + 0.5 * (y_now.abs() + y_prev.abs()),
    })
}

/// Nonlocal DGS: `w_n sum_k a_hat_{n-k} w_k >= Y_A[w_n]/2 - Y_A[w_{n-1}]/2`
/// for increments `w_1..w_n` (`n = w.len() >= 1`).
pub fn dgs_nonlocal_check(mesh: &TimeMesh, alpha: f64, w: &[f64]) -> Result<NonlocalReport> {
    let n = w.len();
    if n == 0 {
        return Err(Error::Index("nonlocal check needs n >= 1".into()));
    }
    let row = KernelRow::build(mesh, n, alpha)?;
    let prev = if n >= 2 {
        Some(KernelRow::build(mesh, n - 1, alpha)?)
    } else {
        None
    };
    nonlocal_from_rows(&row, prev.as_ref(), w)
}

/// Full DGS check at level `n >= 2` for the values `v^0..=v^n`. The mesh
/// must contain level `n + 1`, because `G[w_n]` involves `r_{n+1}`. Ratio
/// violations are reported in `ratio_ok`; the check is still computed.
pub fn dgs_full_check(mesh: &TimeMesh, alpha: f64, v: &[f64], n: usize) -> Result<DgsReport> {
    let w = increments(v, n)?;
    let row = KernelRow::build(mesh, n, alpha)?;
    let prev = if n >= 2 {
        KernelRow::build(mesh, n - 1, alpha)?
    } else {
        return Err(Error::Index("the full DGS check needs n >= 2".into()));
    };
    dgs_full_check_rows(mesh, &row, &prev, &w)
}

/// Same as [`dgs_full_check`] with prebuilt rows at `n` and `n - 1` and
/// the increments `w_1..w_n`.
pub fn dgs_full_check_rows(mesh: &TimeMesh, row: &KernelRow, prev: &KernelRow, w: &[f64]) -> Result<DgsReport> {
    let n = row.n;
    let alpha = row.alpha;
    if n < 2 || prev.n + 1 != n {
        return Err(Error::Index(format!("rows at n={} and n-1={} do not fit", n, prev.n)));
    }
    if w.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: w.len() });
    }
    if mesh.num_steps() <= n {
        return Err(Error::Missing(format!("G at level {n} needs the ratio r_{}", n + 1)));
    }
    let (r_n, r_next) = (mesh.ratio(n), mesh.ratio(n + 1));
    let tau_n = mesh.tau(n);

    let lhs = w[n - 1] * row.apply(w)?;
    let g_now = g_functional_with_row(row, tau_n, r_next, w)?;
    let g_prev = g_functional_with_row(prev, mesh.tau(n - 1), r_n, &w[..n - 1])?;
    let g3 = gamma(3.0 - alpha);
    let diss = g_func(r_n, r_next, alpha) / (2.0 * g3 * tau_n.powf(alpha)) * w[n - 1] * w[n - 1];
    let rhs = g_now - g_prev + diss;

    // local part on its own
    let wn = w[n - 1];
    let local_lhs = wn * (row.local[0] * wn + row.local[1] * w[n - 2]);
    let local_rhs = g_local_coeff(alpha, tau_n, r_next) * wn * wn
        - g_local_coeff(alpha, mesh.tau(n - 1), r_n) * w[n - 2] * w[n - 2]
        + diss;
    let nonlocal = nonlocal_from_rows(row, Some(prev), w)?;

    let window = bounds::RatioBounds::new(alpha)?;
    let ratio_ok = (2..=n + 1).all(|k| window.admits(mesh.ratio(k)));

    Ok(DgsReport {
        n,
        lhs,
        rhs,
        margin: lhs - rhs,
        scale: lhs.abs() + g_now.abs() + g_prev.abs() + diss.abs(),
        ratio_ok,
        local_margin: local_lhs - local_rhs,
        nonlocal_margin: nonlocal.margin,
    })
}
