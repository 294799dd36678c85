mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{integrate, integrate_weak_singular, random_mesh, rel_err, Oracle};
use tfch::kernels::{bridging_integrals, coeff_a, coeff_eta, gamma, KernelRow};
use tfch::{omega, TimeMesh};

#[test]
fn quadrature_self_check() {
    let v = integrate(|x| x.powi(5) - 3.0 * x, 0.0, 2.0, 1e-15);
    assert!(rel_err(v, 64.0 / 6.0 - 6.0) < 1e-14);
    let v = integrate(|x| x.exp(), -1.0, 1.0, 1e-15);
    assert!(rel_err(v, 1f64.exp() - (-1f64).exp()) < 1e-14);
    // int_0^1 u^(-0.7) du = 1 / 0.3
    let v = integrate_weak_singular(|u: f64| u.powf(-0.7), 1.0, 0.7, 1e-15);
    assert!(rel_err(v, 1.0 / 0.3) < 1e-13, "{v}");
}

#[test]
fn omega_semigroup_by_quadrature() {
    // (w_{1-a} * w_a)(t) = w_1(t) = 1
    for &alpha in &[0.2, 0.5, 0.8] {
        let t = 1.7;
        // split at t/2 so each end carries one weak singularity
        // s is the distance from 0, u the distance from t
        let f = |s: f64, u: f64| omega(1.0 - alpha, u).unwrap() * omega(alpha, s).unwrap();
        let left = integrate_weak_singular(|s| f(s, t - s), t / 2.0, 1.0 - alpha, 1e-15);
        let right = integrate_weak_singular(|u| f(t - u, u), t / 2.0, alpha, 1e-15);
        assert!(rel_err(left + right, 1.0) < 1e-12, "alpha={alpha}: {}", left + right);
    }
}

#[test]
fn closed_forms_match_quadrature_on_random_meshes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for &alpha in &[0.1, 0.5, 0.9] {
        let oracle = Oracle::new(alpha);
        for trial in 0..100 {
            let n = 2 + trial % 29;
            let mesh = random_mesh(&mut rng, n, 0.2, 5.0);
            let d = mesh.distances_from(n);
            for k in 1..=n {
                let (x, h) = (d[k], mesh.tau(k));
                let checks = [
                    ("a", coeff_a(&mesh, alpha, n, k).unwrap(), oracle.a(x, h)),
                    ("eta", coeff_eta(&mesh, alpha, n, k).unwrap(), oracle.eta(x, h)),
                    ("I", bridging_integrals(&mesh, alpha, n, k).unwrap().i, oracle.i(x, h)),
                ];
                for (name, got, want) in checks {
                    let e = rel_err(got, want);
                    worst = worst.max(e);
                    assert!(e <= 1e-11, "{name} alpha={alpha} n={n} k={k}: {got} vs {want}");
                }
                if k < n {
                    let got = bridging_integrals(&mesh, alpha, n, k).unwrap().j.unwrap();
                    let e = rel_err(got, oracle.j(x, h));
                    worst = worst.max(e);
                    assert!(e <= 1e-11, "J alpha={alpha} n={n} k={k}");
                }
            }
        }
    }
    assert!(worst <= 1e-11);
}

#[test]
fn eta_defining_form_where_well_conditioned() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for &alpha in &[0.1, 0.5, 0.9] {
        let oracle = Oracle::new(alpha);
        for _ in 0..20 {
            let mesh = random_mesh(&mut rng, 10, 0.5, 4.0);
            let d = mesh.distances_from(10);
            for k in 1..=10 {
                let (x, h) = (d[k], mesh.tau(k));
                if x > 0.0 && h / x < 0.2 {
                    continue;
                }
                let got = coeff_eta(&mesh, alpha, 10, k).unwrap();
                assert!(rel_err(got, oracle.eta_defining(x, h)) <= 1e-10, "alpha={alpha} k={k}");
            }
        }
    }
}

#[test]
fn first_interval_closed_forms() {
    for &alpha in &[0.1, 0.5, 0.9] {
        let mesh = TimeMesh::uniform(0.3, 1).unwrap();
        let tau: f64 = 0.3;
        let a0 = tau.powf(-alpha) / gamma(2.0 - alpha);
        let eta0 = alpha * tau.powf(-alpha) / gamma(3.0 - alpha);
        let i0 = alpha * tau.powf(-alpha) / gamma(2.0 - alpha);
        assert!(rel_err(coeff_a(&mesh, alpha, 1, 1).unwrap(), a0) < 1e-14);
        assert!(rel_err(coeff_eta(&mesh, alpha, 1, 1).unwrap(), eta0) < 1e-14);
        assert!(rel_err(bridging_integrals(&mesh, alpha, 1, 1).unwrap().i, i0) < 1e-14);
    }
}

#[test]
fn caputo_of_power_matches_quadrature() {
    // FBDF2 applied to a smooth non-polynomial function converges to the
    // Caputo derivative computed by quadrature.
    let alpha = 0.6;
    let t = 1.0;
    let v = |s: f64| (2.0 * s).sin();
    let dv = |s: f64| 2.0 * (2.0 * s).cos();
    let exact = integrate_weak_singular(|u| omega(1.0 - alpha, u).unwrap() * dv(t - u), t, alpha, 1e-15);
    let mut errs = Vec::new();
    for &n in &[40usize, 80, 160] {
        let mesh = TimeMesh::uniform(t, n).unwrap();
        let vals: Vec<f64> = mesh.levels().iter().map(|&s| v(s)).collect();
        let approx = tfch::kernels::apply_caputo(&mesh, alpha, &vals, n).unwrap();
        errs.push((approx - exact).abs());
    }
    // smooth data: first-step local error dominates with order 3 - alpha
    let order = (errs[1] / errs[2]).log2();
    assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
    assert!(order > 1.9, "order {order}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_positive_and_split_consistent(
        tau1 in 1e-3f64..1.0,
        ratios in prop::collection::vec(0.4753f64..4.5, 1..25),
        alpha in 0.05f64..0.95,
    ) {
        let mesh = TimeMesh::from_ratios(tau1, &ratios).unwrap();
        let n = mesh.num_steps();
        let row = KernelRow::build(&mesh, n, alpha).unwrap();
        for j in 0..n {
            prop_assert!(row.a[j] > 0.0);
            prop_assert!(row.eta[j] > 0.0);
            prop_assert!(row.a_hat[j] > 0.0);
        }
        for j in 1..n {
            prop_assert!(row.a[j - 1] > row.a[j]);
        }
        prop_assert!(row.splitting_residual() <= 1e-12);
    }

    #[test]
    fn exact_for_quadratics(
        tau1 in 1e-2f64..1.0,
        ratios in prop::collection::vec(0.5f64..4.0, 1..15),
        alpha in 0.05f64..0.95,
        c in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let mesh = TimeMesh::from_ratios(tau1, &ratios).unwrap();
        let n = mesh.num_steps();
        let vals: Vec<f64> = mesh.levels().iter().map(|t| c[0] + c[1] * t + c[2] * t * t).collect();
        let t = mesh.t_end();
        let exact = c[1] * omega(2.0 - alpha, t).unwrap() + 2.0 * c[2] * omega(3.0 - alpha, t).unwrap();
        let approx = tfch::kernels::apply_caputo(&mesh, alpha, &vals, n).unwrap();
        let scale = c[1].abs() * omega(2.0 - alpha, t).unwrap() + 2.0 * c[2].abs() * omega(3.0 - alpha, t).unwrap();
        prop_assume!(n >= 2);
        prop_assert!((approx - exact).abs() <= 1e-10 * scale.max(1e-3), "{} vs {}", approx, exact);
    }
}

