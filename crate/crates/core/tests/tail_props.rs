use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use pulled_fronts::dispersion::{solve_spreading_speed, SymbolPencil};
use pulled_fronts::front::{solve_front, FrontOptions, FrontProfile};
use pulled_fronts::normal_form::{build_normal_form, extract_pencil, pencil_from_symbol, Case, NormalForm};
use pulled_fronts::spectral::WeightSpec;
use pulled_fronts::systems::{builtin, EquilibriumConfig, Role, SystemConfig, SystemSpec};
use pulled_fronts::tail::*;

fn sys(name: &str, kv: &[(&str, f64)]) -> SystemSpec {
    let p: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin(name, &p).unwrap()
}

struct Pipeline {
    spec: SystemSpec,
    nf: NormalForm,
    front: FrontProfile,
    profiles: SelfSimilarProfiles,
}

fn pipeline(name: &str, kv: &[(&str, f64)]) -> Pipeline {
    let spec = sys(name, kv);
    let sp = solve_spreading_speed(&spec, (0.05, 10.0)).unwrap();
    let pen = extract_pencil(&spec, &sp).unwrap();
    let nf = build_normal_form(&pen).unwrap();
    let front = solve_front(&spec, &sp, &pen, &FrontOptions::for_system(&spec, &sp).unwrap()).unwrap();
    let profiles = solve_profiles(&nf, front.eta_star, &ProfileOptions::default()).unwrap();
    Pipeline { spec, nf, front, profiles }
}

fn three_component_independent() -> NormalForm {
    let sym = SymbolPencil {
        n: 3,
        a_const: DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -2.0]),
        a_nu: DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.3, 1.0, 0.0, 0.2, 0.4, 0.1, 0.0]),
        a_nu2: DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0, 1.0])),
    };
    let p = pencil_from_symbol(&sym, 0.0, 0.0, None).unwrap();
    assert_eq!(p.case, Case::Independent);
    build_normal_form(&p).unwrap()
}

/// Chebyshev points and differentiation matrix on `[−1, 1]`.
fn cheb(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let x: Vec<f64> = (0..=n)
        .map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect();
    let c = |i: usize| if i == 0 || i == n { 2.0 } else { 1.0 } * if i % 2 == 0 { 1.0 } else { -1.0 };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (x, d)
}

#[test]
fn leading_profile_is_in_the_kernel_of_l_delta() {
    for name in ["kpp", "parametric_gl", "lotka_volterra"] {
        let p = pipeline(name, &[]);
        let Profile::Analytic(g) = &p.profiles.psi_i0 else {
            panic!("closed form expected")
        };
        let (d1, d2) = (g.deriv(), g.deriv().deriv());
        let worst = p
            .profiles
            .grid()
            .iter()
            .map(|&x| (d2.eval(x)[0] + 0.5 * x * d1.eval(x)[0] + g.eval(x)[0]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "{name}: {worst:e}");
        let beta = p.profiles.beta0;
        for &x in &[0.3, 1.0, 2.5] {
            assert!((g.eval(x)[0] - beta * x * (-x * x / 4.0f64).exp()).abs() < 1e-14);
        }
    }
}

#[test]
fn kpp_first_correction_matches_collocation() {
    let p = pipeline("kpp", &[]);
    assert_eq!(p.profiles.psi_h0.dim(), 0);
    let n = 140;
    let (x, d) = cheb(n);
    let l = 12.0;
    let xi: Vec<f64> = x.iter().map(|v| 0.5 * l * (v + 1.0)).collect();
    let dxi = &d * (2.0 / l);
    let dd = &dxi * &dxi;
    let mut a = &dd + DMatrix::from_diagonal(&DVector::from_iterator(n + 1, xi.iter().map(|v| 0.5 * v))) * &dxi;
    for i in 0..=n {
        a[(i, i)] += 1.5;
    }
    // substituting s^{1/2}ψ0 + ψ1 into v_t = v_yy − 3/(2η_* s)(v_y − η_* v) gives
    // (L_Δ + ½)ψ1 = +(3/(2η_*))ψ0' for the scalar equation with D = 1
    let eta = p.front.eta_star;
    let mut rhs = DVector::from_iterator(
        n + 1,
        xi.iter()
            .map(|&s| (1.5 / eta) * (1.0 - s * s / 2.0) * (-s * s / 4.0f64).exp()),
    );
    for i in [0, n] {
        a.row_mut(i).fill(0.0);
        a[(i, i)] = 1.0;
        rhs[i] = 0.0;
    }
    let sol = a.lu().solve(&rhs).unwrap();
    let worst = (0..=n)
        .map(|i| (p.profiles.psi_i1.value(xi[i])[0] - sol[i]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-7, "{worst:e}");
}

#[test]
fn hidden_diffusion_leading_profiles() {
    let s = sys("hidden_diffusion", &[]);
    let p = pencil_from_symbol(&SymbolPencil::from_spec(&s), 0.0, 0.0, None).unwrap();
    let nf = build_normal_form(&p).unwrap();
    let prof = solve_profiles(&nf, 1.0, &ProfileOptions::default()).unwrap();
    assert_eq!(prof.case, Case::Independent);
    assert_eq!(prof.psi_h0.dim(), 0);
    assert!((prof.d_eff - 1.0).abs() < 1e-14);
    let ii0 = prof.psi_ii0.as_ref().unwrap();
    for &x in &[0.0, 0.4, 1.3, 3.7] {
        let want = prof.beta0 * (1.0 - x * x / 2.0) * (-x * x / 4.0f64).exp();
        assert!((ii0.value(x)[0] - want).abs() < 1e-14);
    }
}

#[test]
fn profiles_vanish_at_the_origin_and_have_gaussian_envelopes() {
    let cases = [
        pipeline("kpp", &[]).profiles,
        pipeline("parametric_gl", &[("beta", 1.0)]).profiles,
        pipeline("lotka_volterra", &[]).profiles,
        solve_profiles(&three_component_independent(), 0.8, &ProfileOptions::default()).unwrap(),
    ];
    for prof in &cases {
        for (name, p) in prof.named() {
            if !matches!(name, "psi_i0" | "psi_i1" | "psi_h0") {
                // algebraically determined profiles carry no boundary condition
                continue;
            }
            let v = p.value(0.0);
            assert!(v.iter().all(|x| x.abs() < 1e-10), "{name}: {v:?}");
        }
        for (name, c) in prof.envelope_constants() {
            assert!(c.is_finite() && c < 1e3, "{name}: {c}");
        }
    }
}

/// Independent pointwise transcription of the right-hand sides of the
/// independent case at a generic `τ`, with explicit derivatives of `ψ^I_0`.
fn transcribed_rhs(nf: &NormalForm, eta: f64, xi: f64, tau: f64) -> (f64, f64, Vec<f64>, Vec<f64>) {
    let d = nf.d_eff;
    let beta = d.sqrt();
    let g = (-xi * xi / 4.0).exp();
    let p0 = beta * xi * g;
    let p1 = beta * (1.0 - xi * xi / 2.0) * g;
    let p2 = beta * (xi.powi(3) / 4.0 - 1.5 * xi) * g;
    let p3 = beta * (-xi.powi(4) / 8.0 + 1.5 * xi * xi - 1.5) * g;
    let eh = (0.5 * tau).exp();
    let sc = |name: &str| {
        let m = if name.starts_with('s') { nf.s_block(name) } else { nf.block(name) };
        if m.is_empty() { 0.0 } else { m[(0, 0)] }
    };
    let mat = |name: &str| if name.starts_with('s') { nf.s_block(name) } else { nf.block(name) };
    let rd = d.powf(-0.5);
    // ψ^I = e^{τ/2}ψ0 so ∂_τψ^I = ½ψ^I; ψ^II = ψ^II_0 = D^{-1/2}ψ0'
    let (psi_i, dt_i, dxi_i, dxx_i, dxxx_i) = (eh * p0, 0.5 * eh * p0, eh * p1, eh * p2, eh * p3);
    let (ii, dii, ddii) = (rd * p1, rd * p2, rd * p3);
    // ψ^h = e^{−τ/2}ψ^h_0 with b33 ψ^h_0 = e^{−τ/2} F̃^h_0
    let nh = nf.b0.nrows() - 2;
    let col = |name: &str| {
        let m = mat(name);
        if m.shape() == (nh, 1) { DVector::from_column_slice(m.as_slice()) } else { DVector::zeros(nh) }
    };
    let fh0 = |pi: f64, pit: f64, pix: f64, pixx: f64, iix: f64| -> DVector<f64> {
        col("b31_10") * -(pit - 0.5 * xi * pix) - col("b31_02") * (pixx / d) - col("s31") * (1.5 * pi)
            - col("b32_01") * (eh * rd * iix)
    };
    let b33 = mat("b33_00").try_inverse().unwrap();
    let h0 = &b33 * fh0(psi_i, dt_i, dxi_i, dxx_i, dii) * (1.0 / eh);
    // ξ-derivative of F̃^h_0: ∂_ξ(ξ ψ') = ψ' + ξψ''
    let dfh0 = col("b31_10") * -(0.5 * dxi_i - 0.5 * (dxi_i + xi * dxx_i)) - col("b31_02") * (dxxx_i / d)
        - col("s31") * (1.5 * dxi_i)
        - col("b32_01") * (eh * rd * ddii);
    let dh0 = &b33 * dfh0 * (1.0 / eh);
    let dpsi_h = &dh0 / eh;
    let row13 = mat("b13_01");
    let row13 = if row13.shape() == (1, nh) { row13 } else { DMatrix::zeros(1, nh) };
    let f_i1 = -(1.5 / eta) / eh * rd * dxi_i
        + 1.5 * sc("s12") * ii
        + sc("b12_10") * (0.0 - 0.5 * xi * dii)
        + sc("b12_02") / d * ddii
        + eh * rd * (row13 * &dpsi_h)[(0, 0)];
    let f_ii1 = -sc("b21_10") * (dt_i - 0.5 * xi * dxi_i) - sc("b21_02") / d * dxx_i - 1.5 * sc("s21") * psi_i
        - eh * sc("b22_01") * rd * dii;
    let df_ii1 = -sc("b21_10") * (0.5 * dxi_i - 0.5 * (dxi_i + xi * dxx_i)) - sc("b21_02") / d * dxxx_i
        - 1.5 * sc("s21") * dxi_i
        - eh * sc("b22_01") * rd * ddii;
    let g_i1 = -sc("b12_01") * rd / eh * df_ii1 - f_i1;
    let f_h1 = col("s31") * (1.5 / eta / eh * rd * dxi_i)
        - (col("b32_10") * (0.0 - 0.5 * xi * dii) + col("b32_02") * (ddii / d) + col("s32") * (1.5 * ii))
        - mat("b33_01") * &dpsi_h * (eh * rd);
    (g_i1, f_ii1 / eh, f_h1.iter().copied().collect(), h0.iter().copied().collect())
}

#[test]
fn duplicate_transcription_guard() {
    let nf = three_component_independent();
    let eta = 0.8;
    let prof = solve_profiles(&nf, eta, &ProfileOptions::default()).unwrap();
    let rhs = &prof.rhs;
    for (xi, tau) in [(0.37, 0.7), (1.9, 2.3), (3.1, -0.4)] {
        let (g_i1, g_ii1, g_h1, h0) = transcribed_rhs(&nf, eta, xi, tau);
        for (a, b) in prof.psi_h0.value(xi).iter().zip(&h0) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let scale = 1.0f64.max(g_i1.abs());
        assert!((rhs.g_i1.eval(xi)[0] - g_i1).abs() < 1e-12 * scale, "{xi}");
        assert!((rhs.g_ii1.as_ref().unwrap().eval(xi)[0] - g_ii1).abs() < 1e-12);
        let lib = rhs.g_h1.eval(xi);
        for (a, b) in lib.iter().zip(&g_h1) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn odd_sector_spectrum_has_kernel_and_gap() {
    let s = odd_sector_spectrum(12.0, 0.01, -4.5, 0.5).unwrap();
    assert!(s.nearest_zero.abs() < 1e-3, "{s:?}");
    assert!(s.gap_at_minus_half > 0.1, "{s:?}");
    for (k, l) in s.eigenvalues.iter().take(4).enumerate() {
        assert!((l + k as f64).abs() < 5e-3, "{k}: {l}");
    }
}

#[test]
fn bvp_is_retried_only_when_needed() {
    let p = pipeline("kpp", &[]);
    assert!(!p.profiles.retried);
    assert!((p.profiles.xi_max - 12.0).abs() < 1e-12);
    let nf = p.nf.clone();
    assert!(solve_profiles(&nf, 1.0, &ProfileOptions { xi_max: 9.0, h: 0.01 }).is_err());
    assert!(solve_profiles(&nf, 1.0, &ProfileOptions { xi_max: 12.0, h: 0.5 }).is_err());
}

#[test]
fn vapp_equals_weighted_front_left_of_the_strip() {
    let p = pipeline("parametric_gl", &[("beta", 1.0)]);
    let v = assemble_vapp(&p.front, &p.profiles, &p.nf, 100.0, 0.05).unwrap();
    let w = WeightSpec::exponential(p.front.eta_star).unwrap();
    for t in [0.0, 100.0, 700.0] {
        let m = v.strip_start(t);
        for i in 0..60 {
            let y = -10.0 + i as f64 * (m + 10.0) / 59.0;
            let q = p.front.eval(p.front.origin + y);
            let got = v.eval(y, t);
            for k in 0..q.len() {
                assert!((got.v[k] - w.omega(y) * q[k]).abs() < 1e-12 * (1.0 + got.v[k].abs()));
            }
        }
        // beyond the strip v_app is the tail
        for y in [m + 1.0, m + 3.0, 20.0] {
            let a = v.eval(y, t);
            let b = v.eval_plus(y, t);
            assert_eq!(a.v, b.v);
        }
    }
}

#[test]
fn vapp_derivatives_match_finite_differences_across_the_strip() {
    let p = pipeline("parametric_gl", &[("beta", 1.0)]);
    let v = assemble_vapp(&p.front, &p.profiles, &p.nf, 100.0, 0.05).unwrap();
    let t = 50.0;
    let m = v.strip_start(t);
    let (hy, ht) = (1e-4, 1e-3);
    for z in [0.1, 0.35, 0.5, 0.77, 0.95] {
        let y = m + z;
        let c = v.eval(y, t);
        let (l, r) = (v.eval(y - hy, t), v.eval(y + hy, t));
        let (e, f) = (v.eval(y, t - ht), v.eval(y, t + ht));
        let fd_y = (r.v[0] - l.v[0]) / (2.0 * hy);
        let fd_yy = (r.v[0] - 2.0 * c.v[0] + l.v[0]) / (hy * hy);
        let fd_t = (f.v[0] - e.v[0]) / (2.0 * ht);
        assert!((c.v_y[0] - fd_y).abs() < 1e-5, "{z}: {} {fd_y}", c.v_y[0]);
        assert!((c.v_yy[0] - fd_yy).abs() < 1e-3, "{z}: {} {fd_yy}", c.v_yy[0]);
        assert!((c.v_t[0] - fd_t).abs() < 1e-6, "{z}: {} {fd_t}", c.v_t[0]);
    }
}

#[test]
fn residual_left_of_the_strip_is_the_speed_correction() {
    let p = pipeline("parametric_gl", &[("beta", 1.0)]);
    let t_shift = 100.0;
    let v = assemble_vapp(&p.front, &p.profiles, &p.nf, t_shift, 0.05).unwrap();
    let w = WeightSpec::exponential(p.front.eta_star).unwrap();
    let (dq, _) = p.front.derivatives();
    for t in [0.0, 300.0] {
        let s = t + t_shift;
        let prof = residual_profile(&v, &p.spec, t).unwrap();
        let mut checked = 0;
        for (y, r) in prof {
            if y > v.strip_start(t) {
                break;
            }
            let i = ((p.front.origin + y - p.front.x[0]) / p.front.h).round() as usize;
            for k in 0..r.len() {
                let want = w.omega(y) * 1.5 / (p.front.eta_star * s) * dq[i][k];
                assert!((r[k] - want).abs() < 1e-8, "y={y}: {} vs {want}", r[k]);
            }
            checked += 1;
        }
        assert!(checked > 100);
    }
}

#[test]
fn residual_vanishes_on_an_exact_linear_solution() {
    let cfg = SystemConfig {
        name: "linear".into(),
        n: 1,
        d: vec![1.0],
        reactions: vec!["u1".into()],
        params: BTreeMap::new(),
        equilibria: vec![EquilibriumConfig { point: vec![0.0], role: Role::UnstableOrigin }],
        advection: None,
        symbol_only: false,
    };
    let spec = SystemSpec::from_config(&cfg).unwrap();
    let (c, eta, t_shift, k) = (2.0, 1.0, 50.0, -0.4);
    let op = ResidualOperator::new(&spec, c, eta, t_shift).unwrap();
    let w = WeightSpec::exponential(eta).unwrap();
    for t in [0.0, 1.5, 7.0] {
        let s = t + t_shift;
        let g = ((k * k + c * k + 1.0) * t).exp() * s.powf(-1.5 * k / eta);
        let gt = g * (k * k + c * k + 1.0 - 1.5 * k / (eta * s));
        for i in 0..41 {
            let y = -6.0 + 0.3 * i as f64;
            let u = (k * y).exp();
            let (om, om1, om2) = w.omega_derivs(y);
            let pt = FieldPoint {
                v: vec![om * u * g],
                v_y: vec![(om1 + om * k) * u * g],
                v_yy: vec![(om2 + 2.0 * om1 * k + om * k * k) * u * g],
                v_t: vec![om * u * gt],
            };
            let r = op.apply(y, t, &pt);
            assert!(r[0].abs() < 1e-12 * (1.0 + pt.v_yy[0].abs()), "{y} {t}: {}", r[0]);
        }
    }
}

#[test]
fn literal_matching_rejects_kpp_at_t_100() {
    let p = pipeline("kpp", &[]);
    let err = assemble_vapp(&p.front, &p.profiles, &p.nf, 100.0, 0.05).unwrap_err();
    assert!(err.to_string().contains("T_min"), "{err}");
    let shift = choose_front_shift(&p.front, &p.profiles, &p.nf, 100.0, 0.05, SHIFT_TARGET).unwrap();
    assert!(shift > 0.0);
    let v = assemble_vapp_translated(&p.front, &p.profiles, &p.nf, 100.0, 0.05, shift).unwrap();
    assert!(v.initial_mismatch <= SHIFT_TARGET);
    assert!((v.y0 - (1.0 + p.front.a + shift)).abs() < 1e-6);
    assert!((v.beta0 - (-p.front.eta_star * shift).exp()).abs() < 1e-12);
}

fn log_slope(ts: &[f64], vals: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let mx = ts.iter().map(|t| t.ln()).sum::<f64>() / n;
    let my = vals.iter().map(|v| v.ln()).sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(vals).map(|(t, v)| (t.ln() - mx) * (v.ln() - my)).sum();
    let sxx: f64 = ts.iter().map(|t| (t.ln() - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn matching_error_decays() {
    let t_shift = 100.0;
    let mu = 0.05;
    for (name, kv) in [("parametric_gl", vec![("beta", 1.0)]), ("kpp", vec![])] {
        let p = pipeline(name, &kv);
        let shift = choose_front_shift(&p.front, &p.profiles, &p.nf, t_shift, mu, SHIFT_TARGET).unwrap();
        let v = assemble_vapp_translated(&p.front, &p.profiles, &p.nf, t_shift, mu, shift).unwrap();
        let ts = [0.0, t_shift, 3.0 * t_shift];
        let (vals, ders): (Vec<f64>, Vec<f64>) = ts.iter().map(|&t| v.matching_error(t)).unzip();
        let s: Vec<f64> = ts.iter().map(|t| t + t_shift).collect();
        let (a, b) = (log_slope(&s, &vals), log_slope(&s, &ders));
        assert!(a <= mu - 0.5 + 0.1, "{name}: value slope {a} {vals:?}");
        assert!(b <= mu - 0.5 + 0.1, "{name}: derivative slope {b} {ders:?}");
    }
}

#[test]
fn far_field_follows_the_gaussian_envelope() {
    let p = pipeline("parametric_gl", &[("beta", 1.0)]);
    let v = assemble_vapp(&p.front, &p.profiles, &p.nf, 100.0, 0.05).unwrap();
    let mut errs = Vec::new();
    for t in [0.0, 900.0, 9900.0] {
        let s: f64 = t + 100.0;
        let y = s.sqrt();
        let xi = v.xi(y, t);
        let lead = s.sqrt() * v.beta0 * xi * (-xi * xi / 4.0).exp() * p.front.u0[0];
        errs.push((v.eval(y, t).v[0] / lead - 1.0).abs());
    }
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[2] < 0.05, "{errs:?}");
}

#[test]
fn residual_decays_at_the_predicted_rate() {
    let t_shift = 100.0;
    let mu = 0.05;
    let ts: Vec<f64> = [0.0, 1.0, 3.0, 7.0, 15.0].iter().map(|k| k * t_shift).collect();
    for (name, kv) in [("kpp", vec![]), ("parametric_gl", vec![("beta", 1.0)])] {
        let p = pipeline(name, &kv);
        let shift = choose_front_shift(&p.front, &p.profiles, &p.nf, t_shift, mu, SHIFT_TARGET).unwrap();
        let v = assemble_vapp_translated(&p.front, &p.profiles, &p.nf, t_shift, mu, shift).unwrap();
        let r = residual(&v, &p.spec, &ts).unwrap();
        assert!(r.fitted_exponent <= -(0.5 - 4.0 * mu) + 0.1, "{name}: {r:?}");
        assert!(r.monotone, "{name}");
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), ts.len() + 1);
        assert!(csv.starts_with("t,weighted_sup,fitted_exponent"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gauss_poly_operations_are_pointwise(
        a in proptest::collection::vec(-2.0..2.0f64, 1..6),
        s in -3.0..3.0f64,
        x in -5.0..5.0f64,
    ) {
        let p = GaussPoly { dim: 1, coeffs: a.iter().map(|v| vec![*v]).collect() };
        let q = GaussPoly::first_hermite(1.0);
        let lhs = p.scale(s).add(&q.times_xi()).eval(x)[0];
        let rhs = s * p.eval(x)[0] + x * q.eval(x)[0];
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        let h = 1e-5;
        let fd = (p.eval(x + h)[0] - p.eval(x - h)[0]) / (2.0 * h);
        prop_assert!((p.deriv().eval(x)[0] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
    }

    #[test]
    fn cutoff_is_monotone_between_one_and_zero(z1 in -0.5..1.5f64, z2 in -0.5..1.5f64) {
        let (a, b) = (cutoff(z1.min(z2)).0, cutoff(z1.max(z2)).0);
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b <= a);
    }

    #[test]
    fn profiles_are_odd_extended(x in 0.0..11.0f64) {
        let nf = three_component_independent();
        let prof = solve_profiles(&nf, 0.8, &ProfileOptions { xi_max: 12.0, h: 0.05 }).unwrap();
        for (_, p) in prof.named() {
            let (a, b) = (p.eval(x), p.eval(-x));
            for k in 0..a[0].len() {
                prop_assert!((a[0][k] + b[0][k]).abs() < 1e-12);
                prop_assert!((a[1][k] - b[1][k]).abs() < 1e-12);
            }
        }
    }
}
