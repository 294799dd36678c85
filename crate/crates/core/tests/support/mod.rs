//! Independent oracles shared by the integration tests: adaptive
//! Gauss-Kronrod quadrature of the defining kernel integrals and random
//! mesh generators.
#![allow(dead_code)]

use rand::Rng;
use statrs::function::gamma::gamma;
use tfch::TimeMesh;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// 15-point Kronrod estimate and its difference to the embedded 7-point
/// Gauss rule on `[a, b]`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, (k - g).abs() * h)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
    let (k, err) = whole;
    if err <= tol || depth == 0 {
        return k;
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m);
    let right = gk15(f, m, b);
    adapt(f, a, m, left, 0.5 * tol, depth - 1) + adapt(f, m, b, right, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss-Kronrod quadrature with a relative tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let first = gk15(&f, a, b);
    // an absolute-value pass fixes the scale for sign-changing integrands
    let scale = gk15(&|x: f64| f(x).abs(), a, b).0.max(f64::MIN_POSITIVE);
    adapt(&f, a, b, first, rel_tol * scale, 40)
}

/// `int_0^h f(u) du` for an `f` behaving like `u^(-alpha)` at the origin,
/// computed after the substitution `u = v^(1/(1-alpha))` removes the
/// singularity.
pub fn integrate_weak_singular<F: Fn(f64) -> f64>(f: F, h: f64, alpha: f64, rel_tol: f64) -> f64 {
    let p = 1.0 / (1.0 - alpha);
    let top = h.powf(1.0 - alpha);
    integrate(
        |v: f64| {
            if v <= 0.0 {
                // limit of f(u) u^alpha / (1 - alpha)
                let u = f64::MIN_POSITIVE.powf(0.5);
                return f(u) * u.powf(alpha) * p;
            }
            let u = v.powf(p);
            f(u) * v.powf(alpha * p) * p
        },
        0.0,
        top,
        rel_tol,
    )
}

pub struct Oracle {
    pub alpha: f64,
    g1: f64,
}

const TOL: f64 = 1e-15;

impl Oracle {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            g1: gamma(1.0 - alpha),
        }
    }

    /// `w_{1-a}(u)`.
    pub fn w1(&self, u: f64) -> f64 {
        u.powf(-self.alpha) / self.g1
    }

    /// `w_{-a}(u) = -a u^(-1-a) / Gamma(1-a)`.
    pub fn wm(&self, u: f64) -> f64 {
        -self.alpha * u.powf(-1.0 - self.alpha) / self.g1
    }

    /// All integrals are written in the distance `u = t_n - s`; the
    /// interval `[t_{k-1}, t_k]` maps to `u = x + sigma`, `sigma in [0, h]`.
    /// The integrand receives `(u, sigma)` so that factors vanishing at the
    /// ends are formed without cancellation, and the interval length stays
    /// exact even when `x >> h`.
    fn over<F: Fn(f64, f64) -> f64>(&self, f: F, x: f64, h: f64) -> f64 {
        if x == 0.0 {
            integrate_weak_singular(|s| f(s, s), h, self.alpha, TOL)
        } else {
            integrate(|s| f(x + s, s), 0.0, h, TOL)
        }
    }

    /// `(1/tau_k) int w_{1-a}(t_n - s) ds`.
    pub fn a(&self, x: f64, h: f64) -> f64 {
        self.over(|u, _| self.w1(u), x, h) / h
    }

    /// Defining form `(2/tau_k) int ((s - t_{k-1/2})/tau_k) w_{1-a}(t_n - s) ds`.
    /// Sign-changing integrand: only well conditioned when `h / x` is not small.
    pub fn eta_defining(&self, x: f64, h: f64) -> f64 {
        2.0 / (h * h) * self.over(|u, s| (0.5 * h - s) * self.w1(u), x, h)
    }

    /// Integration-by-parts form
    /// `-(1/tau_k^2) int (s - t_{k-1})(t_k - s) w_{-a}(t_n - s) ds`, with a
    /// single-signed integrand.
    pub fn eta(&self, x: f64, h: f64) -> f64 {
        if x == 0.0 {
            // (h - u) u w_{-a}(u) ~ u^(-a): fold the u factor in
            let f = |u: f64, _| (h - u) * self.alpha * u.powf(-self.alpha) / self.g1;
            return self.over(f, 0.0, h) / (h * h);
        }
        -self.over(|u, s| (h - s) * s * self.wm(u), x, h) / (h * h)
    }

    /// `int (t - t_k)/tau_k w_{-a}(t_n - t) dt`.
    pub fn i(&self, x: f64, h: f64) -> f64 {
        if x == 0.0 {
            let f = |u: f64, _| self.alpha * u.powf(-self.alpha) / self.g1;
            return self.over(f, 0.0, h) / h;
        }
        -self.over(|u, s| s * self.wm(u), x, h) / h
    }

    /// `int (t_{k-1} - t)/tau_k w_{-a}(t_n - t) dt`, `x > 0`.
    pub fn j(&self, x: f64, h: f64) -> f64 {
        -self.over(|u, s| (h - s) * self.wm(u), x, h) / h
    }
}

/// Mesh with `n` steps, first step in `[1e-3, 1)` and ratios drawn from
/// `[lo, hi)`.
pub fn random_mesh<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> TimeMesh {
    let ratios: Vec<f64> = (1..n).map(|_| rng.gen_range(lo..hi)).collect();
    TimeMesh::from_ratios(rng.gen_range(1e-3..1.0), &ratios).expect("valid random mesh")
}

// --- telescoping identity oracle ------------------------------------------

/// `Y` written directly from the partial sums `u_k = w_1 + .. + w_k`:
/// `sum_{j=1}^{n-1} (k_{n-j-1} - k_{n-j}) (u_n - u_j)^2 + k_{n-1} u_n^2`.
pub fn y_direct(kern: &[f64], w: &[f64]) -> f64 {
    let n = w.len();
    if n == 0 {
        return 0.0;
    }
    let mut u = vec![0.0; n + 1];
    for k in 1..=n {
        u[k] = u[k - 1] + w[k - 1];
    }
    let mut y = kern[n - 1] * u[n] * u[n];
    for j in 1..n {
        y += (kern[n - j - 1] - kern[n - j]) * (u[n] - u[j]).powi(2);
    }
    y
}

/// Remainder `Y_R` for rows `now = a^{(n)}` and `prev = a^{(n-1)}` (lag-indexed).
pub fn y_remainder(now: &[f64], prev: &[f64], w: &[f64]) -> f64 {
    let n = w.len();
    let suffix = |j: usize| -> f64 { w[j..n - 1].iter().sum() };
    let mut y = (prev[n - 2] - now[n - 1]) * suffix(0).powi(2);
    for j in 1..=n.saturating_sub(2) {
        y += (prev[n - 2 - j] - prev[n - 1 - j] - now[n - j - 1] + now[n - j]) * suffix(j).powi(2);
    }
    y
}

/// Checks `2 w_n sum_j chi_{n-j} w_j = Y[n] - Y[n-1] + sigma chi_0 w_n^2 + Y_R`
/// with the auxiliary kernels `(2 - sigma) chi_0, chi_1, ...`; returns the
/// residual relative to the sum of absolute terms.
pub fn telescoping_residual(chi_now: &[f64], chi_prev: &[f64], sigma: f64, w: &[f64]) -> f64 {
    let n = w.len();
    let aux = |chi: &[f64]| -> Vec<f64> {
        let mut a = chi.to_vec();
        a[0] *= 2.0 - sigma;
        a
    };
    let (a_now, a_prev) = (aux(chi_now), aux(chi_prev));
    let lhs = 2.0 * w[n - 1] * (0..n).map(|j| chi_now[n - 1 - j] * w[j]).sum::<f64>();
    let y_now = y_direct(&a_now, w);
    let y_prev = y_direct(&a_prev, &w[..n - 1]);
    let local = sigma * chi_now[0] * w[n - 1] * w[n - 1];
    let rem = y_remainder(&a_now, &a_prev, w);
    let scale = lhs.abs() + y_now.abs() + y_prev.abs() + local.abs() + rem.abs();
    (lhs - (y_now - y_prev + local + rem)).abs() / scale
}

/// Relative difference with a guard for zero references.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}
