use std::collections::BTreeMap;

use pulled_fronts::dispersion::{solve_spreading_speed, spatial_eigenvalues, SymbolPencil};
use pulled_fronts::front::{solve_front, FrontOptions, FrontProfile, TailFit};
use pulled_fronts::linalg::{eigenvalues, to_complex, Banded, C64};
use pulled_fronts::normal_form::extract_pencil;
use pulled_fronts::spectral::{
    build_weighted_operator, check_zero_mode, scan_point_spectrum, verify_point_spectrum, Closure,
    ScanOptions, WeightSpec, WeightedOperator,
};
use pulled_fronts::systems::{builtin, SystemSpec};

fn sys(name: &str, kv: &[(&str, f64)]) -> SystemSpec {
    let p: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin(name, &p).unwrap()
}

fn front(s: &SystemSpec, x_l: f64, x_r: f64, h: f64) -> FrontProfile {
    let sp = solve_spreading_speed(s, (0.05, 10.0)).unwrap();
    let pen = extract_pencil(s, &sp).unwrap();
    let opts = FrontOptions { x_l, x_r, h, mismatch_tol: 1e-4, ..FrontOptions::default() };
    solve_front(s, &sp, &pen, &opts).unwrap()
}

fn default_front(s: &SystemSpec) -> FrontProfile {
    let sp = solve_spreading_speed(s, (0.05, 10.0)).unwrap();
    let pen = extract_pencil(s, &sp).unwrap();
    let opts = FrontOptions::for_system(s, &sp).unwrap();
    solve_front(s, &sp, &pen, &opts).unwrap()
}

fn weighted(s: &SystemSpec, f: &FrontProfile) -> WeightedOperator {
    let w = WeightSpec::exponential(f.eta_star).unwrap();
    build_weighted_operator(s, f, &w, Closure::Dirichlet).unwrap()
}

/// Zero profile of the scalar KPP equation on `[x_l, x_r]`.
fn zero_profile(x_l: f64, x_r: f64, h: f64) -> FrontProfile {
    let m = ((x_r - x_l) / h).round() as usize + 1;
    FrontProfile {
        n: 1,
        x: (0..m).map(|i| x_l + i as f64 * h).collect(),
        h,
        values: vec![vec![0.0]; m],
        weighted: vec![vec![0.0]; m],
        c_star: 2.0,
        eta_star: 1.0,
        a: 0.0,
        u0: vec![1.0],
        u1: vec![1.0],
        origin: 0.0,
        weight_width: 1.0,
        wake: vec![0.0],
        origin_shift: vec![0.0],
        residual_norm: 0.0,
        weighted_residual: 0.0,
        boundary_mismatch: (0.0, 0.0),
        newton_iterations: 0,
        tail_fit: TailFit { window: (0.0, 0.0), b: 1.0, a: 0.0, eta_extra: None, remainder: 0.0 },
    }
}

#[test]
fn constant_coefficient_operator_has_sine_spectrum() {
    // on x ≥ 1 the weighted linearization of u'' + 2u' + u about 0 is ∂²
    let (x_l, x_r, h) = (2.0, 22.0, 0.02);
    let f = zero_profile(x_l, x_r, h);
    let op = weighted(&sys("kpp", &[]), &f);
    let rep = scan_point_spectrum(&op, &ScanOptions { delta0: 1.0, ..ScanOptions::default() });
    let len = x_r - x_l;
    let mut found: Vec<f64> = rep.eigenvalues.iter().map(|e| e.re).collect();
    found.sort_by(|a, b| b.total_cmp(a));
    assert!(found.len() >= 5);
    for (j, lam) in found.iter().take(5).enumerate() {
        let exact = -((j + 1) as f64 * std::f64::consts::PI / len).powi(2);
        assert!((lam - exact).abs() < 1e-4, "mode {j}: {lam} vs {exact}");
    }
    assert!(rep.eigenvalues.iter().all(|e| e.im.abs() < 1e-8 && e.residual < 1e-6));
}

#[test]
fn kpp_has_no_unstable_point_spectrum() {
    let s = sys("kpp", &[]);
    let f = default_front(&s);
    let rep = verify_point_spectrum(&s, &f, &ScanOptions::default()).unwrap();
    assert!(rep.pass, "{:?}", rep.leading_point());
    assert!(rep.eigenvalues.iter().all(|e| !e.point || e.re < -1e-4));
    assert!(rep.eigenvalues.iter().all(|e| e.residual < 1e-6));
    assert!(rep.eigenvalues.iter().all(|e| e.re < 1e-8), "approximants stay in the left half plane");
    assert!(rep.zero_mode.as_ref().unwrap().pass);
    assert!(rep.essential_plus.max_re.abs() < 1e-12);
}

#[test]
fn parametric_gl_resonance_is_not_unstable() {
    let s = sys("parametric_gl", &[("beta", 0.5)]);
    let f = default_front(&s);
    let rep = verify_point_spectrum(&s, &f, &ScanOptions::default()).unwrap();
    assert!(rep.pass);
    // the v-block top of the essential spectrum at +∞ is −2β
    let op = weighted(&s, &f);
    let v_top = op.limit_plus.symbol_eigenvalues(0.0).iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    assert!((v_top + 1.0).abs() < 1e-12, "{v_top}");
}

#[test]
fn parametric_gl_v_block_top_is_minus_two_beta() {
    let s = sys("parametric_gl", &[("beta", 1.0)]);
    let f = default_front(&s);
    let op = weighted(&s, &f);
    let tops: Vec<f64> = op.limit_plus.symbol_eigenvalues(0.0).iter().map(|z| z.re).collect();
    assert!(tops.iter().any(|t| (t + 2.0).abs() < 1e-12), "{tops:?}");
}

fn gaussian(op: &WeightedOperator, comp: usize) -> Vec<f64> {
    let n = op.n;
    let mut g = vec![0.0; op.dim()];
    for (i, x) in op.x.iter().enumerate() {
        g[i * n + comp] = (-x * x / 2.0).exp();
    }
    let nrm = (g.iter().map(|v| v * v).sum::<f64>() * op.h).sqrt();
    g.iter().map(|v| v / nrm).collect()
}

#[test]
fn rank_one_perturbation_creates_a_detected_eigenvalue() {
    let s = sys("kpp", &[]);
    let f = front(&s, -30.0, 20.0, 0.2);
    let mut op = weighted(&s, &f);
    let g = gaussian(&op, 0);
    op.add_rank_one(1.5, g);
    let rep = scan_point_spectrum(&op, &ScanOptions::default());
    assert!(!rep.pass);
    let lead = rep.leading_point().expect("a localized eigenvalue");
    assert!(lead.localization > 0.9);
    // direct dense eigenvalue computation of the same matrix
    let dense = eigenvalues(&to_complex(&op.to_dense()));
    let top = dense.iter().max_by(|a, b| a.re.total_cmp(&b.re)).unwrap();
    assert!(top.re > 0.0);
    assert!((C64::new(lead.re, lead.im) - top).norm() < 1e-6, "{lead:?} vs {top}");
}

#[test]
fn localized_eigenvalues_do_not_depend_on_the_domain() {
    let s = sys("kpp", &[]);
    let lead = |x_l: f64, x_r: f64| {
        let f = front(&s, x_l, x_r, 0.1);
        let mut op = weighted(&s, &f);
        let g = gaussian(&op, 0);
        op.add_rank_one(1.5, g);
        let rep = scan_point_spectrum(&op, &ScanOptions::default());
        rep.leading_point().unwrap().re
    };
    let (a, b) = (lead(-30.0, 20.0), lead(-60.0, 40.0));
    assert!((a - b).abs() < 1e-3, "{a} vs {b}");
}

#[test]
fn limit_symbol_matches_spatial_eigenvalues() {
    for name in ["kpp", "lotka_volterra", "parametric_gl"] {
        let s = sys(name, &[]);
        let f = default_front(&s);
        let op = weighted(&s, &f);
        let pencil = SymbolPencil::from_spec(&s.centered());
        for i in 0..10 {
            let k = 0.3 * i as f64 + 0.1;
            for lam in op.limit_plus.symbol_eigenvalues(k) {
                let nus = spatial_eigenvalues(&pencil, lam, f.c_star).unwrap();
                let target = C64::new(-f.eta_star, k);
                let d = nus.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-8, "{name}: k {k}, λ {lam}, distance {d}");
            }
        }
    }
}

/// Test vector `v = (e^{−(x−1/2)²}, e^{−(x+0.3)²/2}/2)` with its first two
/// derivatives.
fn test_vector(x: f64) -> [[f64; 2]; 3] {
    let a = x - 0.5;
    let g1 = (-a * a).exp();
    let b = x + 0.3;
    let g2 = 0.5 * (-b * b / 2.0).exp();
    [
        [g1, g2],
        [-2.0 * a * g1, -b * g2],
        [(4.0 * a * a - 2.0) * g1, (b * b - 1.0) * g2],
    ]
}

/// `ω A(ω⁻¹ v)` at `x` from the quotient rule with the exact derivatives of
/// `ω` and `v`.
fn conjugated(s: &SystemSpec, f: &FrontProfile, w: &WeightSpec, x: f64) -> Vec<f64> {
    let cs = s.centered();
    let [v, v1, v2] = test_vector(x);
    let (om, om1, om2) = w.omega_derivs(x);
    let u: Vec<f64> = (0..2).map(|k| v[k] / om).collect();
    let u1: Vec<f64> = (0..2).map(|k| (v1[k] * om - v[k] * om1) / (om * om)).collect();
    let u2: Vec<f64> = (0..2)
        .map(|k| {
            v2[k] / om - 2.0 * v1[k] * om1 / (om * om) - v[k] * om2 / (om * om)
                + 2.0 * v[k] * om1 * om1 / (om * om * om)
        })
        .collect();
    let j = cs.jf(&f.eval(x));
    (0..2)
        .map(|r| {
            let mut a = f.c_star * u1[r];
            for k in 0..2 {
                a += cs.d[(r, k)] * u2[k] + j[(r, k)] * u[k];
            }
            a * om
        })
        .collect()
}

#[test]
fn discrete_and_analytic_conjugation_agree() {
    let s = sys("lotka_volterra", &[]);
    let mut errs = Vec::new();
    for h in [0.1, 0.05] {
        let f = front(&s, -30.0, 30.0, h);
        let w = WeightSpec::exponential(f.eta_star).unwrap();
        let op = build_weighted_operator(&s, &f, &w, Closure::Dirichlet).unwrap();
        let vals: Vec<f64> = op.x.iter().flat_map(|&x| test_vector(x)[0]).collect();
        let lv = op.apply_real(&vals);
        let mut err: f64 = 0.0;
        for (i, &x) in op.x.iter().enumerate() {
            if x.abs() > 8.0 {
                continue;
            }
            let exact = conjugated(&s, &f, &w, x);
            for k in 0..2 {
                err = err.max((lv[i * 2 + k] - exact[k]).abs());
            }
        }
        errs.push(err);
    }
    assert!(errs[0] < 0.1 * 0.1, "{errs:?}");
    assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
}

#[test]
fn transcritical_has_no_bounded_zero_mode() {
    let s = sys("transcritical", &[]);
    let f = default_front(&s);
    let w = WeightSpec::exponential(f.eta_star).unwrap();
    let op = build_weighted_operator(&s, &f, &w, Closure::Bounded).unwrap();
    let zm = check_zero_mode(&op);
    assert!(zm.pass, "{zm:?}");
}

#[test]
fn appended_zero_block_is_flagged() {
    let s = sys("kpp", &[]);
    let f = default_front(&s);
    let w = WeightSpec::exponential(f.eta_star).unwrap();
    let mut op = build_weighted_operator(&s, &f, &w, Closure::Bounded).unwrap();
    assert!(check_zero_mode(&op).pass);
    let dim = op.dim();
    let mut band = Banded::zeros(dim + 1, op.band.kl, op.band.ku);
    for i in 0..dim {
        for j in i.saturating_sub(op.band.kl)..(i + op.band.ku + 1).min(dim) {
            band.set(i, j, op.band.get(i, j));
        }
    }
    op.band = band;
    op.x.push(op.x.last().unwrap() + op.h);
    let zm = check_zero_mode(&op);
    assert!(!zm.pass && zm.sigma_min == 0.0, "{zm:?}");
}

#[test]
fn too_short_domain_is_rejected() {
    let s = sys("kpp", &[]);
    let sp = solve_spreading_speed(&s, (0.05, 10.0)).unwrap();
    let pen = extract_pencil(&s, &sp).unwrap();
    let opts = FrontOptions { x_l: -4.0, x_r: 4.0, mismatch_tol: 1.0, ..FrontOptions::default() };
    let f = solve_front(&s, &sp, &pen, &opts).unwrap();
    let w = WeightSpec::exponential(f.eta_star).unwrap();
    assert!(build_weighted_operator(&s, &f, &w, Closure::Dirichlet).is_err());
}
