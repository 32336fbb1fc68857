//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to stderr.

// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::io::Write;

use chebspec_core::basis::nodes;
use chebspec_core::diagnostics::{
    convergence_study, fit_decay_base, hamiltonian_drift, long_run_study, spectral_decay, StudyOptions,
};
use chebspec_core::problems::{kepler, linear_test};
use chebspec_core::solver::{ButcherPath, Integrator, SolverConfig};
use chebspec_core::tableau::{
    build_spectral_factor, cosine_matrix, integral_matrix, min_eig_realpart, stability_function, symmetry_certificate,
    ButcherTableau,
};
use chebspec_core::transform::{TransformMode, TransformPlan};
use nalgebra::{Complex, DMatrix};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn verdict(id: u32, name: &str, failures: &[String]) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[acceptance] {status} {id}. {name}");
    for f in failures {
        let _ = writeln!(err, "[acceptance]      {f}");
    }
    assert!(failures.is_empty(), "criterion {id} ({name}) failed: {failures:?}");
}

fn note(line: String) {
    let _ = writeln!(std::io::stderr().lock(), "[acceptance]      {line}");
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.abs().max()
}

#[test]
fn c1_kepler_convergence_table() {
    const PUBLISHED: [[f64; 4]; 6] = [
        [2.98e0, 2.24e0, 7.36e-3, 7.33e-3],
        [1.66e0, 9.45e-1, 6.15e-4, 4.46e-4],
        [5.23e-1, 2.53e-1, 4.03e-5, 2.78e-5],
        [1.34e-1, 6.34e-2, 2.55e-6, 1.73e-6],
        [3.35e-2, 1.58e-2, 1.60e-7, 1.08e-7],
        [8.38e-3, 3.96e-3, 1.00e-8, 6.77e-9],
    ];
    let n_list = [50, 100, 200, 400, 800, 1600];
    let report = convergence_study(&kepler(), &[1, 2, 3, 4], &n_list, &StudyOptions::default()).unwrap();
    let mut failures = Vec::new();
    for s in 1..=4usize {
        let err = report.column(&format!("err_s{s}")).unwrap();
        let rate = report.column(&format!("rate_s{s}")).unwrap();
        for (row, &n) in n_list.iter().enumerate() {
            let want = PUBLISHED[row][s - 1];
            let ratio = err[row] / want;
            if !(0.5..=2.0).contains(&ratio) {
                failures.push(format!("s={s} n={n}: err {:.3e} vs {want:.2e}", err[row]));
            }
        }
        let order = (2 * s.div_ceil(2)) as f64;
        let finest = rate[n_list.len() - 1];
        if (finest - order).abs() > 0.2 {
            failures.push(format!("s={s}: finest rate {finest:.3} vs {order}"));
        }
        note(format!(
            "s={s}: err(n=1600) {:.3e}, finest rate {finest:.3}",
            err[n_list.len() - 1]
        ));
    }
    verdict(1, "Kepler one-period errors and rates, s = 1..4", &failures);
}

#[test]
fn c2_long_run_spectral() {
    let report = long_run_study(&kepler(), 50, 6, 10, &StudyOptions::default()).unwrap();
    let mut failures = Vec::new();
    if let Some(e) = report.meta("error") {
        failures.push(format!("solver error: {e}"));
    }
    let err = report.column("err").unwrap();
    if err.len() != 10 {
        failures.push(format!("{} periods completed", err.len()));
    }
    for (p, e) in err.iter().enumerate() {
        if !(*e <= 1e-11) {
            failures.push(format!("period {}: err {e:.3e}", p + 1));
        }
    }
    note(format!(
        "max period-end error {:.3e}",
        err.iter().fold(0.0f64, |a, &b| a.max(b))
    ));
    verdict(2, "CCM(50), h = 2pi/6, 10 periods, errors <= 1e-11", &failures);
}

#[test]
fn c3_coefficient_decay() {
    let ns = [5.0, 10.0, 15.0, 20.0];
    let h_list: Vec<f64> = ns.iter().map(|n| 2.0 * PI / n).collect();
    let report = spectral_decay(&kepler(), 30, &h_list, &StudyOptions::default()).unwrap();
    let mut failures = Vec::new();
    let mut rho = Vec::new();
    for (i, n) in ns.iter().enumerate() {
        let g = report.column(&format!("gamma_h{i}")).unwrap();
        let floor = 100.0 * f64::EPSILON * g[0];
        // Coefficients alternate in size, so compare consecutive pair maxima.
        let pairs: Vec<f64> = g.chunks(2).map(|c| c.iter().fold(0.0f64, |a, &b| a.max(b))).collect();
        for w in pairs.windows(2) {
            if w[0] > floor && w[1] >= w[0] {
                failures.push(format!(
                    "h=2pi/{n}: pair maxima {:.2e} -> {:.2e} not decreasing",
                    w[0], w[1]
                ));
            }
        }
        match fit_decay_base(&g) {
            Some(fit) => rho.push(fit.rho),
            None => {
                failures.push(format!("h=2pi/{n}: decay fit skipped"));
                rho.push(f64::NAN);
            }
        }
        note(format!(
            "h=2pi/{n}: rho_hat {:.3}, trailing |gamma|/|gamma_0| {:.2e}",
            rho[i],
            g[29] / g[0]
        ));
    }
    let ratio = rho[3] / rho[1];
    if !(1.5..=3.0).contains(&ratio) {
        failures.push(format!("rho ratio 2pi/20 : 2pi/10 = {ratio:.3}"));
    }
    note(format!("rho ratio 2pi/20 : 2pi/10 = {ratio:.3}"));
    // Roundoff is reached at h = pi/10.
    let g = report.column("gamma_h3").unwrap();
    let tail = g[25..].iter().fold(0.0f64, |a, &b| a.max(b)) / g[0];
    if !(tail < 1e-12) {
        failures.push(format!("h=pi/10: trailing coefficients at {tail:.2e} relative"));
    }
    let used = fit_decay_base(&g).map(|f| f.used).unwrap_or(30);
    if used >= 30 {
        failures.push("h=pi/10: no stagnated coefficients".into());
    }
    verdict(3, "CCM(30) first-step coefficient decay and stagnation", &failures);
}

#[test]
fn c4_hamiltonian_drift() {
    let p = kepler();
    let opts = StudyOptions::default();
    let mut failures = Vec::new();

    let spectral = hamiltonian_drift(&p, 30, 0.1, 1e3, &opts).unwrap();
    let max30 = spectral.meta_f64("max_drift").unwrap();
    if !(max30 <= 1e-9) {
        failures.push(format!("CCM(30) max drift {max30:.3e}"));
    }

    let low = hamiltonian_drift(&p, 3, 0.1, 1e3, &opts).unwrap();
    let drift = low.column("drift").unwrap();
    let decile = drift.len() / 10;
    let maxima: Vec<f64> = drift
        .chunks(decile)
        .take(10)
        .map(|c| c.iter().fold(0.0f64, |a, &b| a.max(b)))
        .collect();
    if !(maxima[9] <= 2.0 * maxima[0]) {
        failures.push(format!(
            "CCM(3) last-decile max {:.3e} vs first {:.3e}",
            maxima[9], maxima[0]
        ));
    }
    if maxima.windows(2).all(|w| w[1] > w[0]) {
        failures.push("CCM(3) decile maxima grow monotonically".into());
    }
    note(format!(
        "CCM(30) max drift {max30:.3e}; CCM(3) decile maxima {:.3e}..{:.3e}",
        maxima[0], maxima[9]
    ));
    verdict(4, "Kepler h = 0.1 on [0, 1e3]: Hamiltonian drift", &failures);
}

#[test]
fn c5_tableau_algebra() {
    let mut failures = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            failures.push(msg);
        }
    };
    for s in 1..=64usize {
        let t = ButcherTableau::ccm(s).unwrap();
        let sum: f64 = t.b.iter().sum();
        check(
            (sum - 1.0).abs() <= 1e-14,
            format!("s={s}: sum b - 1 = {:e}", sum - 1.0),
        );
        let floor = 1.0 / (s * s) as f64;
        check(t.b.iter().all(|&b| b >= floor), format!("s={s}: weight below 1/s^2"));
        check(
            t.row_sum_defect() <= 1e-13,
            format!("s={s}: row sums {:e}", t.row_sum_defect()),
        );
        let d = symmetry_certificate(&t).unwrap();
        check(
            d.max_defect_a <= 1e-12 && d.max_defect_b <= 1e-12,
            format!("s={s}: symmetry defects {:e} {:e}", d.max_defect_a, d.max_defect_b),
        );

        let n = nodes(s).unwrap();
        let p = cosine_matrix(&n, s);
        let x = build_spectral_factor(s, false).unwrap().to_dense();
        let gram = p.transpose() * &p / s as f64;
        check(
            max_abs(&(gram - DMatrix::identity(s, s))) <= 1e-12,
            format!("s={s}: orthonormality"),
        );
        let integ = integral_matrix(&n, s);
        check(
            max_abs(&(&integ - &p * &x)) <= 1e-12,
            format!("s={s}: integral factorization"),
        );
        let a1 = &integ * p.transpose() / s as f64;
        let a2 = &p * &x * p.transpose() / s as f64;
        let a3 = &p * &x * p.clone().try_inverse().unwrap();
        let spread = max_abs(&(&a1 - &a2))
            .max(max_abs(&(&a2 - &a3)))
            .max(max_abs(&(&t.a - &a2)));
        check(spread <= 1e-11, format!("s={s}: forms of A differ by {spread:e}"));
    }
    for (s, k) in [(2, 4), (3, 6), (5, 8)] {
        let n = nodes(k).unwrap();
        let x = build_spectral_factor(s, true).unwrap().to_dense();
        let d = max_abs(&(integral_matrix(&n, s) - cosine_matrix(&n, s + 1) * x));
        check(d <= 1e-12, format!("(s,k)=({s},{k}): generalized factorization {d:e}"));
    }
    verdict(5, "tableau algebra for s <= 64", &failures);
}

#[test]
fn c6_stability() {
    let mut failures = Vec::new();
    let mut smallest = (f64::INFINITY, 0);
    for s in 1..=500 {
        match min_eig_realpart(s) {
            Ok(m) if m > 0.0 => {
                if m < smallest.0 {
                    smallest = (m, s);
                }
            }
            Ok(m) => failures.push(format!("s={s}: min Re eig {m:e}")),
            Err(e) => failures.push(format!("s={s}: {e}")),
        }
    }
    note(format!(
        "smallest min Re eig over s <= 500: {:.3e} at s={}",
        smallest.0, smallest.1
    ));

    let mut rng = StdRng::seed_from_u64(2024);
    for s in [2, 3, 4, 8, 16] {
        let t = ButcherTableau::ccm(s).unwrap();
        for i in 0..50 {
            let y = 10f64.powf(-2.0 + 5.0 * i as f64 / 49.0);
            let r = stability_function(&t, Complex::new(0.0, y)).unwrap().norm();
            if (r - 1.0).abs() > 1e-10 {
                failures.push(format!("s={s}: |R({y}i)| = {r}"));
            }
        }
        for _ in 0..100 {
            let radius = 10f64.powf(rng.random_range(-3.0..2.0));
            let phi = rng.random_range(PI / 2.0..1.5 * PI);
            let z = Complex::from_polar(radius, phi);
            if z.re >= 0.0 {
                continue;
            }
            let r = stability_function(&t, z).unwrap().norm();
            if !(r < 1.0) {
                failures.push(format!("s={s}: |R({z})| = {r}"));
            }
        }
    }
    verdict(6, "spectral factor eigenvalues and A-stability", &failures);
}

#[test]
fn c7_fast_path_equivalence() {
    let mut failures = Vec::new();
    let mut rng = StdRng::seed_from_u64(77);
    for s in [3, 16, 100, 256, 1000] {
        let t = ButcherTableau::ccm(s).unwrap();
        let w = DMatrix::from_fn(s, 4, |_, _| rng.random_range(-1.0..1.0));
        let want = &t.a * &w;
        let got = TransformPlan::new(s, TransformMode::Fast)
            .unwrap()
            .apply_butcher(&t.x, &w)
            .unwrap();
        let rel = max_abs(&(got - &want)) / max_abs(&want);
        if !(rel <= 1e-12) {
            failures.push(format!("apply s={s}: relative discrepancy {rel:e}"));
        }
    }

    let p = kepler();
    for s in [2, 8, 31] {
        let cfg = SolverConfig::new(s, 0.1);
        let fast = Integrator::new(cfg.clone()).unwrap().step(&p, &p.y0).unwrap();
        let dense = Integrator::new(cfg.with_path(ButcherPath::Dense))
            .unwrap()
            .step(&p, &p.y0)
            .unwrap();
        let d = max_diff(&fast.y1, &dense.y1);
        if !(d <= 1e-12) {
            failures.push(format!("step s={s}: paths differ by {d:e}"));
        }
    }

    let time = |s: usize| {
        let x = build_spectral_factor(s, false).unwrap();
        let w = DMatrix::from_fn(s, 4, |i, j| ((i * 7 + j) as f64).sin());
        let mut plan = TransformPlan::new(s, TransformMode::Fast).unwrap();
        (0..7)
            .map(|_| {
                let start = std::time::Instant::now();
                for _ in 0..200 {
                    std::hint::black_box(plan.apply_butcher(&x, &w).unwrap());
                }
                start.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (t256, t512) = (time(256), time(512));
    note(format!("apply time ratio 512 : 256 = {:.2}", t512 / t256));
    if !(t512 < 3.0 * t256) {
        failures.push(format!("doubling s scaled time by {:.2}", t512 / t256));
    }
    verdict(7, "fast transform path matches the dense tableau", &failures);
}

#[test]
fn c8_linear_bridge() {
    let mut failures = Vec::new();
    let lambdas = [
        Complex::new(-1.0, 0.0),
        Complex::new(-10.0, 0.0),
        Complex::new(0.0, 1.0),
        Complex::new(0.0, 2.0),
    ];
    for lambda in lambdas {
        let p = linear_test(lambda);
        for s in [1, 2, 3, 4, 8, 16] {
            for h in [0.01, 0.1] {
                let mut it = Integrator::new(SolverConfig::new(s, h)).unwrap();
                let r = stability_function(it.tableau(), lambda * h).unwrap();
                let y1 = it.step(&p, &p.y0).unwrap().y1;
                let want = if p.dim == 1 {
                    vec![r.re * p.y0[0]]
                } else {
                    let z = r * Complex::new(p.y0[0], p.y0[1]);
                    vec![z.re, z.im]
                };
                let d = max_diff(&y1, &want);
                if !(d <= 1e-12) {
                    failures.push(format!("lambda={lambda} s={s} h={h}: {d:e}"));
                }
            }
        }
    }
    verdict(8, "one linear step equals R(h lambda) y0", &failures);
}

#[test]
fn c9_symmetric_round_trip() {
    let p = kepler();
    let flip = |y: &[f64]| vec![y[0], y[1], -y[2], -y[3]];
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (s, h) in [
        (1, 2.0 * PI / 400.0),
        (3, 2.0 * PI / 100.0),
        (8, 0.1),
        (30, 2.0 * PI / 10.0),
        (50, 2.0 * PI / 6.0),
    ] {
        let cfg = SolverConfig::new(s, h);
        let tol = cfg.fp_tol;
        let mut it = Integrator::new(cfg).unwrap();
        let mut start = p.y0.clone();
        for _ in 0..3 {
            let y1 = it.step(&p, &start).unwrap().y1;
            let back = flip(&it.step(&p, &flip(&y1)).unwrap().y1);
            let d = max_diff(&back, &start);
            worst = worst.max(d / tol);
            if !(d <= 10.0 * tol) {
                failures.push(format!("s={s} h={h:.4}: round trip error {d:e}"));
            }
            start = y1;
        }
    }
    note(format!("worst round trip error {worst:.2} x fp_tol"));
    verdict(9, "forward/backward Kepler step round trip", &failures);
}
