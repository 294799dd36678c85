//! Randomized numerical certification of the kernel properties, the
//! bridging identities and the discrete gradient structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{self, RatioBounds};
use crate::dgs;
use crate::error::Result;
use crate::kernels::{self, gamma, KernelRow};
use crate::mesh::TimeMesh;

/// Relative tolerance for the DGS inequality margin.
pub const DGS_RTOL: f64 = 1e-11;
/// Relative tolerance for the bridging identities.
pub const IDENTITY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Random meshes per suite.
    pub trials: usize,
    /// Largest level `n` exercised.
    pub max_n: usize,
    pub alphas: Vec<f64>,
    /// Append one mesh whose ratio exceeds `r*(alpha)` to every suite.
    pub inject_bad_mesh: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            trials: 1000,
            max_n: 40,
            alphas: vec![0.2, 0.5, 0.8],
            inject_bad_mesh: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    /// Inequalities or identities evaluated.
    pub cases: usize,
    pub violations: usize,
    /// Smallest `margin / scale` (inequalities) or negated largest relative
    /// residual (identities).
    pub worst_margin: f64,
    /// Meshes outside the ratio window; their inequality checks are skipped.
    pub flagged_meshes: usize,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            cases: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            flagged_meshes: 0,
        }
    }

    fn record(&mut self, rel_margin: f64, tol: f64) {
        self.cases += 1;
        self.worst_margin = self.worst_margin.min(rel_margin);
        if rel_margin < -tol || rel_margin.is_nan() {
            self.violations += 1;
            self.passed = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub all_passed: bool,
    pub suites: Vec<SuiteReport>,
}

/// Random admissible mesh with `n` steps for `alpha`: ratios in
/// `[R_*, min(4.5, r*(alpha) - 0.01)]`. Every fifth mesh alternates between
/// the two ends of the window.
pub fn random_admissible_mesh(rng: &mut ChaCha8Rng, n: usize, alpha: f64, extreme: bool) -> Result<TimeMesh> {
    // nudged inward so ratios recomputed from the stored steps stay inside
    let lo = bounds::R_STAR_LOWER * (1.0 + 1e-12);
    let hi = 4.5f64.min(bounds::r_star(alpha)? - 0.01);
    let ratios: Vec<f64> = (1..n)
        .map(|i| {
            if extreme {
                if (i + rng.gen_range(0..2)) % 2 == 0 {
                    lo
                } else {
                    hi
                }
            } else {
                rng.gen_range(lo..=hi)
            }
        })
        .collect();
    TimeMesh::from_ratios(rng.gen_range(1e-3..1.0), &ratios)
}

fn bad_mesh(n: usize, alpha: f64) -> Result<TimeMesh> {
    let mut ratios = vec![1.0; n.max(3) - 1];
    ratios[1] = bounds::r_star(alpha)? + 0.5;
    TimeMesh::from_ratios(0.01, &ratios)
}

fn meshes(cfg: &VerifyConfig, rng: &mut ChaCha8Rng, extra: usize) -> Result<Vec<(f64, TimeMesh)>> {
    let mut out = Vec::with_capacity(cfg.trials + 1);
    for t in 0..cfg.trials {
        let alpha = cfg.alphas[t % cfg.alphas.len()];
        let n = rng.gen_range(2..=cfg.max_n) + extra;
        out.push((alpha, random_admissible_mesh(rng, n, alpha, t % 5 == 4)?));
    }
    if cfg.inject_bad_mesh {
        let alpha = cfg.alphas[0];
        out.push((alpha, bad_mesh(cfg.max_n.min(12) + extra, alpha)?));
    }
    Ok(out)
}

/// Monotonicity and convexity of the auxiliary kernels.
pub fn kernel_property_suite(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rep = SuiteReport::new("kernel_properties");
    for (alpha, mesh) in meshes(cfg, &mut rng, 0)? {
        if !bounds::validate_ratios(&mesh, &RatioBounds::new(alpha)?).is_empty() {
            rep.flagged_meshes += 1;
            continue;
        }
        let k = kernels::check_kernel_properties(&mesh, alpha, mesh.num_steps())?;
        for v in [&k.row_decrease, &k.column_decrease, &k.convexity] {
            rep.cases += v.checked;
            rep.violations += v.violations;
            if v.checked > 0 {
                rep.worst_margin = rep.worst_margin.min(v.worst_margin);
            }
            rep.passed &= v.holds;
        }
    }
    Ok(rep)
}

/// `a_{n-k-1} - a_{n-k} = I_{n-k-1} + J_{n-k}`,
/// `2(1-a)/(2-a) a_0 - a_1 = a/(2-a) w_{1-a}(tau_n) + J_1`,
/// and the bounds `I > eta`, `J > 3 eta`.
pub fn bridging_suite(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut rep = SuiteReport::new("bridging_identities");
    for (alpha, mesh) in meshes(cfg, &mut rng, 0)? {
        let n = mesh.num_steps();
        let row = KernelRow::build(&mesh, n, alpha)?;
        let pairs: Vec<kernels::BridgingPair> = (1..=n)
            .map(|k| kernels::bridging_integrals(&mesh, alpha, n, k))
            .collect::<Result<_>>()?;
        for k in 1..n {
            let lhs = row.a[n - k - 1] - row.a[n - k];
            let (i, j) = (pairs[k].i, pairs[k - 1].j.expect("k < n"));
            let scale = row.a[n - k - 1].max(i + j);
            rep.record(-((lhs - i - j).abs() / scale), IDENTITY_RTOL);
        }
        let j1 = pairs[n - 2].j.expect("n >= 2");
        let w1 = mesh.tau(n).powf(-alpha) / gamma(1.0 - alpha);
        let lhs = 2.0 * (1.0 - alpha) / (2.0 - alpha) * row.a[0] - row.a[1];
        let rhs = alpha / (2.0 - alpha) * w1 + j1;
        rep.record(-((lhs - rhs).abs() / row.a[0]), IDENTITY_RTOL);
        // far from t_n the strict gaps shrink like tau_k/(t_n - t_k) and
        // fall below roundoff, hence the same relative slack
        for k in 1..=n {
            let eta = row.eta[n - k];
            rep.record((pairs[k - 1].i - eta) / pairs[k - 1].i, IDENTITY_RTOL);
            if let Some(j) = pairs[k - 1].j {
                rep.record((j - 3.0 * eta) / j, IDENTITY_RTOL);
            }
        }
    }
    Ok(rep)
}

/// The full DGS inequality and its nonlocal part on random sequences.
pub fn dgs_suite(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut rep = SuiteReport::new("dgs_inequality");
    for (alpha, mesh) in meshes(cfg, &mut rng, 1)? {
        // level n uses r_{n+1}, so the mesh carries one extra step
        let n = mesh.num_steps() - 1;
        let window = RatioBounds::new(alpha)?;
        if !bounds::validate_ratios(&mesh, &window).is_empty() {
            rep.flagged_meshes += 1;
            continue;
        }
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let row = KernelRow::build(&mesh, n, alpha)?;
        let prev = KernelRow::build(&mesh, n - 1, alpha)?;
        let d = dgs::dgs_full_check_rows(&mesh, &row, &prev, &w)?;
        rep.record(d.margin / d.scale, DGS_RTOL);
        rep.record(d.local_margin / d.scale, DGS_RTOL);
        rep.record(d.nonlocal_margin / d.scale, DGS_RTOL);
    }
    Ok(rep)
}

pub fn run(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let suites = vec![kernel_property_suite(cfg)?, bridging_suite(cfg)?, dgs_suite(cfg)?];
    Ok(VerifyReport {
        config: cfg.clone(),
        all_passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyConfig {
        VerifyConfig {
            trials: 60,
            max_n: 20,
            ..VerifyConfig::default()
        }
    }

    #[test]
    fn small_run_passes() {
        let rep = run(&small()).unwrap();
        assert!(rep.all_passed, "{rep:#?}");
        for s in &rep.suites {
            assert!(s.cases > 0);
            assert_eq!(s.flagged_meshes, 0);
        }
    }

    #[test]
    fn bad_mesh_is_flagged() {
        let cfg = VerifyConfig {
            inject_bad_mesh: true,
            ..small()
        };
        let rep = run(&cfg).unwrap();
        assert_eq!(rep.suites[0].flagged_meshes, 1);
        assert_eq!(rep.suites[2].flagged_meshes, 1);
        assert!(rep.all_passed);
    }

    #[test]
    fn deterministic() {
        let a = serde_json::to_string(&run(&small()).unwrap()).unwrap();
        let b = serde_json::to_string(&run(&small()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn admissible_meshes_stay_in_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &alpha in &[0.2, 0.8] {
            for extreme in [false, true] {
                let m = random_admissible_mesh(&mut rng, 30, alpha, extreme).unwrap();
                assert!(bounds::validate_ratios(&m, &RatioBounds::new(alpha).unwrap()).is_empty());
            }
        }
    }
}
