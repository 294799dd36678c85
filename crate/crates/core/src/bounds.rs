//! Step-ratio bounds for the FBDF2 discrete gradient structure.
//!
//! Ratios must satisfy `R_* <= r_k < r*(alpha)` for `k >= 2`, where
//! `R_* ~ 0.4753` is the positive root of `z^2 (1 + z) = 1/3` and
//! `r*(alpha)` is the root of
//! `g1(r, alpha) = 1/alpha + (1 + 1/alpha) r - r^(2 - alpha/2)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::TimeMesh;

/// Lower ratio bound `R_*` rounded to double precision.
pub const R_STAR_LOWER: f64 = 0.475_329_585_787_207_1;

/// Uniform lower bound of `r*(alpha)` over `alpha in (0, 1)`.
pub const R_STAR_UPPER_FLOOR: f64 = 4.660;

/// Closed cube-root expression for `R_*`.
#[allow(non_snake_case)]
pub fn R_star() -> f64 {
    let s5 = 5f64.sqrt();
    ((189.0 - 81.0 * s5) / 2.0).cbrt() / 9.0 + ((7.0 + 3.0 * s5) / 2.0).cbrt() / 3.0 - 1.0 / 3.0
}

/// `g4(z) = 3 - 1 / (z^2 (1 + z))`; `R_*` is its unique positive root.
pub fn g4(z: f64) -> f64 {
    3.0 - 1.0 / (z * z * (1.0 + z))
}

/// `g1(z, alpha) = 1/alpha + (1 + 1/alpha) z - z^(2 - alpha/2)`.
pub fn g1(z: f64, alpha: f64) -> f64 {
    1.0 / alpha + (1.0 + 1.0 / alpha) * z - z.powf(2.0 - alpha / 2.0)
}

fn g1_dz(z: f64, alpha: f64) -> f64 {
    1.0 + 1.0 / alpha - (2.0 - alpha / 2.0) * z.powf(1.0 - alpha / 2.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("fractional order must lie in (0, 1], got {alpha}")))
    }
}

/// Upper ratio bound `r*(alpha)`: the unique root of `g1(., alpha)` beyond
/// its maximiser. `alpha = 1` is accepted and gives the BDF2 bound ~4.864.
pub fn r_star(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    // g1(1) = 2/alpha > 0 and g1 -> -inf; g1 is concave, so the root on
    // [1, hi] is unique.
    let mut lo = 1.0;
    let mut hi = 1.0e6 / alpha;
    if g1(hi, alpha) >= 0.0 {
        return Err(Error::NoConvergence(format!("no sign change of g1 on [1, {hi}] for alpha={alpha}")));
    }
    let mut z = 5.0f64.clamp(lo, hi);
    for _ in 0..400 {
        let val = g1(z, alpha);
        if val.abs() <= 1e-13 * (1.0 / alpha + z) {
            return Ok(z);
        }
        if val > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let d = g1_dz(z, alpha);
        let newton = z - val / d;
        z = if d < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence(format!("r_star(alpha={alpha})")))
}

/// Largest grading exponent for which the graded mesh keeps `r_2 = 2^gamma - 1`
/// below `r*(alpha)`.
pub fn gamma_max(alpha: f64) -> Result<f64> {
    Ok((1.0 + r_star(alpha)?).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioBounds {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
}

impl RatioBounds {
    /// The admissible window `[R_*, r*(alpha))`.
    pub fn new(alpha: f64) -> Result<Self> {
        Ok(Self {
            lower: R_STAR_LOWER,
            upper: r_star(alpha)?,
            alpha,
        })
    }

    /// Same window with the upper end additionally capped.
    pub fn with_cap(alpha: f64, cap: f64) -> Result<Self> {
        let mut b = Self::new(alpha)?;
        b.upper = b.upper.min(cap);
        if !(b.lower < b.upper) {
            return Err(Error::Domain(format!("empty ratio window [{}, {})", b.lower, b.upper)));
        }
        Ok(b)
    }

    pub fn admits(&self, r: f64) -> bool {
        r >= self.lower && r < self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioViolation {
    pub k: usize,
    pub ratio: f64,
}

/// Every `k >= 2` with `r_k` outside `[lower, upper)`.
pub fn validate_ratios(mesh: &TimeMesh, bounds: &RatioBounds) -> Vec<RatioViolation> {
    (2..=mesh.num_steps())
        .filter_map(|k| {
            let ratio = mesh.ratio(k);
            (!bounds.admits(ratio)).then_some(RatioViolation { k, ratio })
        })
        .collect()
}

/// Summary of a graded mesh against the ratio window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradingReport {
    pub gamma: f64,
    pub max_ratio: f64,
    pub r_star: f64,
    pub gamma_max: f64,
    pub admissible: bool,
}

/// The largest graded-mesh ratio is `r_2 = 2^gamma - 1`.
pub fn grading_report(gamma: f64, alpha: f64) -> Result<GradingReport> {
    let rs = r_star(alpha)?;
    let max_ratio = 2f64.powf(gamma) - 1.0;
    Ok(GradingReport {
        gamma,
        max_ratio,
        r_star: rs,
        gamma_max: (1.0 + rs).log2(),
        admissible: max_ratio < rs,
    })
}
