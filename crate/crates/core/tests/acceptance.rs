//! Acceptance suite: one test per engine-level acceptance criterion, each
//! printing a PASS line with its runtime and asserting the stated tolerance.

use std::sync::Arc;
use std::time::Instant;

use reiterhom_core::cell::{solve_cell_y_with, solve_cell_z, tabulate_flux, HEvaluator};
use reiterhom_core::coeff::{builtin_problem, catalog_names, validate};
use reiterhom_core::config::ProblemConfig;
use reiterhom_core::fields::{holder_pairing, luxemburg_norm, CellFactor, MultiscaleField, XFactor};
use reiterhom_core::meanvalue::{ergodic_average, mean, sigma_test, AlgebraRep, CoreFn};
use reiterhom_core::mesh::{Field, Mesh};
use reiterhom_core::nfunc::{dyadic_grid, NFunction};
use reiterhom_core::solver::{solve, EllipticProblem, FluxSource};
use reiterhom_core::study::run_convergence_study;
use reiterhom_core::trig::TrigPoly;

const TAU: f64 = std::f64::consts::TAU;

fn finish(name: &str, start: Instant, limit_s: f64) {
    let elapsed = start.elapsed().as_secs_f64();
    println!("[PASS] {name} ({elapsed:.2} s, limit {limit_s} s)");
    assert!(
        elapsed < limit_s,
        "{name}: runtime {elapsed:.2} s over the {limit_s} s limit"
    );
}

/// Independent quadrature oracle: Richardson-extrapolated trapezoid sums.
fn oracle_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let trap = |k: usize| -> f64 {
        let h = (b - a) / k as f64;
        let mut s = 0.5 * (f(a) + f(b));
        for i in 1..k {
            s += f(a + i as f64 * h);
        }
        s * h
    };
    let coarse = trap(n);
    let fine = trap(2 * n);
    fine + (fine - coarse) / 3.0
}

#[test]
fn criterion_1_nfunction_suite() {
    let start = Instant::now();
    let grid = dyadic_grid(1e-3_f64, 1e3, 200);
    let suite: [NFunction<f64>; 3] = [
        NFunction::power(2.0),
        NFunction::power(3.0),
        NFunction::power_log(1.0),
    ];
    for nf in &suite {
        let conj = nf.complementary();
        for &t in &grid {
            let phi = nf.density(t).unwrap();
            let f = nf.evaluate(t).unwrap();
            assert!(t * phi / f >= 1.0 - 1e-10, "{nf:?} lower chain at t={t}");
            let young = conj.evaluate(phi).unwrap();
            let tphi = t * phi;
            let rel = 1.0 + 1e-10;
            assert!(young <= tphi * rel + 1e-300, "{nf:?} young at t={t}");
            assert!(
                tphi <= nf.evaluate(2.0 * t).unwrap() * rel,
                "{nf:?} doubling at t={t}"
            );
        }
    }
    // complementary pairing t^p/p <-> t^q/q through the numeric transform
    for p in [2.0_f64, 3.0] {
        let q = p / (p - 1.0);
        let numeric = NFunction::Conjugate(Box::new(NFunction::power(p)));
        let closed = NFunction::power(p).complementary();
        for i in 1..=50 {
            let t = 0.2 * i as f64;
            let expect = t.powf(q) / q;
            assert!(
                (numeric.evaluate(t).unwrap() - expect).abs() <= 1e-8 * (1.0 + expect),
                "numeric pairing p={p} t={t}"
            );
            assert!(
                (closed.evaluate(t).unwrap() - expect).abs() <= 1e-8 * (1.0 + expect),
                "closed pairing p={p} t={t}"
            );
        }
    }
    finish("criterion 1: N-function suite", start, 1.0);
}

#[test]
fn criterion_2_luxemburg_holder_suite() {
    use rand::{Rng, SeedableRng};
    let start = Instant::now();
    let mesh = Mesh::<f64>::interval(0.0, 1.0, 4096).unwrap();
    let t_squared = NFunction::power_with_coeff(2.0, 1.0);

    // constant field: norm = c
    for c in [0.3_f64, 1.0, 7.5] {
        let u = Field::constant(mesh.clone(), c);
        let n = luxemburg_norm(&u, &t_squared).unwrap();
        assert!((n - c).abs() <= 1e-6, "constant {c}: {n}");
    }
    // u(x) = x with F = t^2: norm = 1/sqrt(3)
    let u = Field::from_fn(mesh.clone(), |x| x[0]);
    let n = luxemburg_norm(&u, &t_squared).unwrap();
    assert!((n - 1.0 / 3.0_f64.sqrt()).abs() <= 1e-6, "{n}");

    // generalized Holder on 100 random trials
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let small = Mesh::<f64>::interval(0.0, 1.0, 256).unwrap();
    let phi = NFunction::power(2.0);
    for trial in 0..100 {
        let u = Field::scalar(
            small.clone(),
            (0..small.node_count())
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect(),
        )
        .unwrap();
        let v = Field::scalar(
            small.clone(),
            (0..small.node_count())
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect(),
        )
        .unwrap();
        let (lhs, bound) = holder_pairing(&u, &v, &phi).unwrap();
        assert!(lhs <= bound * (1.0 + 1e-10), "trial {trial}: {lhs} > {bound}");
    }
    finish("criterion 2: Luxemburg/Holder suite", start, 5.0);
}

#[test]
fn criterion_3_mean_value_ergodicity_suite() {
    let start = Instant::now();
    // periodic: sin^2(2 pi y) -> 1/2
    let s2 = AlgebraRep::periodic_trig(TrigPoly::line(0.5, &[(2.0 * TAU, -0.5)], &[])).unwrap();
    assert!((mean(&s2) - 0.5).abs() <= 1e-4);
    // almost periodic: cos(y) + cos(sqrt2 y) + 0.3 -> 0.3
    let ap = AlgebraRep::almost_periodic(TrigPoly::line(
        0.3,
        &[(1.0, 1.0), (2.0_f64.sqrt(), 1.0)],
        &[],
    ));
    assert!((mean(&ap) - 0.3).abs() <= 1e-4);
    // convergence at infinity: 1.5 + exp(-|z|^2) -> 1.5
    let bi = AlgebraRep::<f64>::b_infinity(1, 1.5, CoreFn::Gaussian { amp: 1.0 }, 6.0).unwrap();
    assert!((mean(&bi) - 1.5).abs() <= 1e-4);

    // ergodic ball averages of cos(y) + cos(sqrt2 y) at a fixed center:
    // strictly decreasing magnitude over r in {10, 40, 160} plus the C/r
    // envelope (amplitudes sum to 2)
    let u = AlgebraRep::almost_periodic(TrigPoly::line(
        0.0,
        &[(1.0, 1.0), (2.0_f64.sqrt(), 1.0)],
        &[],
    ));
    let center = [1.0, 0.0];
    let mut prev = f64::INFINITY;
    for r in [10.0_f64, 40.0, 160.0] {
        let avg = ergodic_average(&u, r, center).unwrap();
        let c: f64 = center[0];
        let oracle = c.cos() * r.sin() / r
            + (2.0_f64.sqrt() * c).cos() * (2.0_f64.sqrt() * r).sin() / (2.0_f64.sqrt() * r);
        assert!((avg - oracle).abs() <= 1e-4, "r={r}: {avg} vs {oracle}");
        assert!(avg.abs() <= 2.0 / r, "envelope at r={r}");
        assert!(avg.abs() < prev, "decrease at r={r}: {} !< {prev}", avg.abs());
        prev = avg.abs();
    }
    finish("criterion 3: mean-value/ergodicity suite", start, 10.0);
}

#[test]
fn criterion_4_sigma_convergence_suite() {
    let start = Instant::now();
    let sin_y = CellFactor::Trig(TrigPoly::line(0.0, &[], &[(TAU, 1.0)]));
    let u0 = MultiscaleField::separable(1, XFactor::One, sin_y.clone(), CellFactor::One);
    let f = MultiscaleField::separable(1, XFactor::One, sin_y, CellFactor::One);
    let eps_list = [0.25, 0.125, 0.0625, 0.03125, 1.0 / 64.0];
    // the carrier mesh must resolve the finest scale: n >= 4/eps^2 = 16384
    let mesh = Mesh::<f64>::interval(0.0, 1.0, 16384).unwrap();
    let rep = sigma_test(&u0, &f, &mesh, &eps_list).unwrap();
    assert!((rep.rhs - 0.5).abs() <= 1e-12);
    for (i, &lhs) in rep.lhs.iter().enumerate() {
        assert!((lhs - 0.5).abs() < 0.05, "eps {}: lhs {lhs}", eps_list[i]);
    }
    let first = rep.gap[0];
    let last = *rep.gap.last().unwrap();
    assert!(first > 0.0);
    assert!(
        2.0 * last <= first,
        "gap failed to halve: {first} -> {last}"
    );
    assert!(rep.trend_ok());
    finish("criterion 4: sigma-convergence suite", start, 30.0);
}

#[test]
fn criterion_5_double_harmonic_mean_oracle() {
    let start = Instant::now();
    // independent oracle: integral of 1/(2 + sin 2 pi t) over a period
    let inv_mean = oracle_integral(|t| 1.0 / (2.0 + (TAU * t).sin()), 0.0, 1.0, 1 << 15);
    let analytic = 1.0 / 3.0_f64.sqrt();
    assert!(
        (inv_mean - analytic).abs() <= 1e-10,
        "quadrature oracle: {inv_mean} vs {analytic}"
    );

    let coeff = builtin_problem::<f64>("lin1d", None).unwrap();
    let mesh = Mesh::<f64>::unit_cell(1, 256).unwrap();
    let heval = HEvaluator::new(&coeff, &mesh);
    for xi in [1.0_f64, -0.5, 2.0] {
        let q = solve_cell_y_with(&heval, 0.0, [xi, 0.0], &mesh)
            .unwrap()
            .flux_sample[0];
        assert!((q / xi - 3.0).abs() <= 1e-5, "xi={xi}: q/xi = {}", q / xi);
    }
    // the intermediate-scale flux matches the single harmonic mean as well
    let sol = solve_cell_z(&coeff, [0.25, 0.0], 0.0, [1.0, 0.0], &mesh).unwrap();
    assert!((sol.flux_sample[0] - 3.0 / inv_mean).abs() <= 1e-6);
    finish("criterion 5: double harmonic-mean oracle", start, 10.0);
}

#[test]
fn criterion_6_macro_solve_oracle() {
    let start = Instant::now();
    let coeff = builtin_problem::<f64>("lin1d", None).unwrap();
    let cell = Mesh::<f64>::unit_cell(1, 256).unwrap();
    let xi: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64).collect();
    let table = Arc::new(tabulate_flux(&coeff, &[0.0], &[xi], &cell, &cell).unwrap());
    let mesh = Mesh::<f64>::interval(0.0, 1.0, 1024).unwrap();
    let problem = EllipticProblem {
        mesh: mesh.clone(),
        flux_source: FluxSource::Effective { table },
        rhs: Field::constant(mesh.clone(), 1.0),
    };
    let rep = solve(&problem, 1e-10).unwrap();
    let mut max_err = 0.0_f64;
    for i in 0..mesh.node_count() {
        let x = mesh.node_coord(i)[0];
        max_err = max_err.max((rep.solution.values[i] - x * (1.0 - x) / 6.0).abs());
    }
    assert!(max_err <= 1e-4, "max nodal error {max_err}");
    finish("criterion 6: macro solve oracle", start, 5.0);
}

#[test]
fn criterion_7_end_to_end_convergence() {
    let start = Instant::now();
    let cfg = ProblemConfig::parse(
        r#"
nfunction = { kind = "power", p = 2.0 }

[coefficient]
name = "lin1d"

[domain]
dim = 1
n = 1024
cell_n = 256

[solver]
tol = 1e-10
eps_list = [0.25, 0.125, 0.0625, 0.03125]
seed = 42
samples = 10000
rhs = "one"
"#,
    )
    .unwrap();
    // the study meshes satisfy the direct resolution rule with margin
    for &eps in &cfg.solver.eps_list {
        let n = cfg.fine_cells(eps);
        assert!(1.0 / n as f64 <= eps * eps / 4.0, "spacing rule at eps={eps}");
    }
    let out = run_convergence_study::<f64>(&cfg).unwrap();
    let rows = &out.table.rows;
    assert_eq!(rows.len(), 4);
    for w in rows.windows(2) {
        assert!(
            w[1].u_err < w[0].u_err,
            "u_err not strictly decreasing: {} -> {}",
            w[0].u_err,
            w[1].u_err
        );
    }
    assert!(
        rows[3].u_err <= 0.25 * rows[0].u_err,
        "final u_err {} vs first {}",
        rows[3].u_err,
        rows[0].u_err
    );
    for r in rows {
        assert!(
            r.grad_corr_err < r.grad_naive_err,
            "eps {}: corrected {} !< naive {}",
            r.eps,
            r.grad_corr_err,
            r.grad_naive_err
        );
    }
    assert!(out.violations.is_empty(), "{:?}", out.violations);
    finish("criterion 7: end-to-end convergence", start, 600.0);
}

#[test]
fn criterion_8_hypothesis_validator() {
    let start = Instant::now();
    for name in catalog_names() {
        let coeff = builtin_problem::<f64>(name, None).unwrap();
        let report = validate(&coeff, 10_000, 42).unwrap();
        assert!(report.all_pass(), "{name} failed:\n{}", report.text_block());
        for e in &report.entries {
            assert!(e.margin > 0.0, "{name}/{}: margin {}", e.name, e.margin);
        }
    }
    // the planted counterexample a = -lambda fails monotonicity with a witness
    let neg = builtin_problem::<f64>("neg1d", None).unwrap();
    let report = validate(&neg, 10_000, 42).unwrap();
    let h4 = report.entry("H4_monotone").unwrap();
    assert!(!h4.pass && h4.margin < 0.0);
    assert!(h4.witness.is_some());
    finish("criterion 8: hypothesis validator", start, 5.0);
}

#[test]
fn criterion_9_effective_flux_monotonicity() {
    use rand::{Rng, SeedableRng};
    let start = Instant::now();

    // 1-D layered medium
    let lin = builtin_problem::<f64>("lin1d", None).unwrap();
    let mesh1 = Mesh::<f64>::unit_cell(1, 64).unwrap();
    let heval1 = HEvaluator::new(&lin, &mesh1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let x1: f64 = rng.gen_range(-2.0..2.0);
        let mut x2: f64 = rng.gen_range(-2.0..2.0);
        if (x1 - x2).abs() < 1e-3 {
            x2 += 0.7;
        }
        let q1 = solve_cell_y_with(&heval1, 0.0, [x1, 0.0], &mesh1)
            .unwrap()
            .flux_sample[0];
        let q2 = solve_cell_y_with(&heval1, 0.0, [x2, 0.0], &mesh1)
            .unwrap()
            .flux_sample[0];
        assert!((q1 - q2) * (x1 - x2) > 0.0, "lin1d pair ({x1}, {x2})");
    }

    // 2-D p-Laplacian medium at cell resolution n = 64
    let plap = builtin_problem::<f64>("plap2d", Some(3.0)).unwrap();
    let mesh2 = Mesh::<f64>::unit_cell(2, 64).unwrap();
    let heval2 = HEvaluator::new(&plap, &mesh2);
    let q2d = |xi: [f64; 2]| -> [f64; 2] {
        solve_cell_y_with(&heval2, 0.0, xi, &mesh2)
            .unwrap()
            .flux_sample
    };
    for trial in 0..100 {
        let a: [f64; 2] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let mut b: [f64; 2] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let dist2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        if dist2 < 1e-2 {
            b[0] += 1.0;
        }
        let qa = q2d(a);
        let qb = q2d(b);
        let prod = (qa[0] - qb[0]) * (a[0] - b[0]) + (qa[1] - qb[1]) * (a[1] - b[1]);
        assert!(prod > 0.0, "plap2d trial {trial}: pair {a:?} {b:?} prod {prod}");
    }
    finish("criterion 9: effective flux monotonicity", start, 120.0);
}
