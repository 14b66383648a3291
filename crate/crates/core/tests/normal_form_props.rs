use std::collections::BTreeMap;

use nalgebra::DMatrix;
use proptest::prelude::*;
use pulled_fronts::dispersion::{solve_spreading_speed, SymbolPencil};
use pulled_fronts::linalg::{eigenvalues, to_complex};
use pulled_fronts::normal_form::{
    build_normal_form, extract_pencil, pencil_from_symbol, Case, PencilData,
};
use pulled_fronts::systems::{builtin, BUILTIN_NAMES};

fn pencil(name: &str) -> PencilData {
    let s = builtin(name, &BTreeMap::new()).unwrap();
    if s.symbol_only {
        return pencil_from_symbol(&SymbolPencil::from_spec(&s), 0.0, 0.0, None).unwrap();
    }
    let sp = solve_spreading_speed(&s, (0.05, 10.0)).unwrap();
    extract_pencil(&s, &sp).unwrap()
}

/// Curvature `λ''(0)/2` of the branch of eigenvalues of `A⁰ + νA⁰¹ + ν²A⁰²`
/// through the origin, by Richardson-extrapolated central differences.
fn curvature_oracle(p: &PencilData) -> f64 {
    let branch = |nu: f64| {
        let m = &p.a0 + &p.a01 * nu + &p.a02 * (nu * nu);
        eigenvalues(&to_complex(&m))
            .into_iter()
            .min_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap()
            .re
    };
    let second = |h: f64| (branch(h) + branch(-h) - 2.0 * branch(0.0)) / (2.0 * h * h);
    let (a, b) = (second(0.02), second(0.01));
    (4.0 * b - a) / 3.0
}

#[test]
fn effective_diffusivity_matches_dispersion_curvature() {
    for name in BUILTIN_NAMES {
        let p = pencil(name);
        let nf = build_normal_form(&p).unwrap();
        let oracle = curvature_oracle(&p);
        assert!(
            (nf.d_eff - oracle).abs() < 1e-6,
            "{name}: {} vs {oracle}",
            nf.d_eff
        );
    }
}

#[test]
fn sparsity_pattern_holds_for_every_builtin() {
    for name in BUILTIN_NAMES {
        let nf = build_normal_form(&pencil(name)).unwrap();
        assert!(
            nf.max_sparsity_deviation() < 1e-10,
            "{name}: {:?}",
            nf.sparsity_deviations()
        );
    }
}

fn rotation(angles: &[f64]) -> DMatrix<f64> {
    let n = 2;
    let (c, s) = (angles[0].cos(), angles[0].sin());
    let r = DMatrix::from_row_slice(n, n, &[c, -s, s, c]);
    if angles[1] > 0.0 {
        r
    } else {
        // compose with a reflection
        &r * DMatrix::from_row_slice(n, n, &[1.0, 0.0, 0.0, -1.0])
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_trip_at_random_points(
        name_idx in 0usize..8,
        pts in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 50),
    ) {
        let p = pencil(BUILTIN_NAMES[name_idx]);
        let nf = build_normal_form(&p).unwrap();
        let si = nf.s.clone().try_inverse().unwrap();
        let qi = nf.q.clone().try_inverse().unwrap();
        for (l, v) in pts {
            let a = p.eval(l, v);
            let back = &si * nf.eval(l, v) * &qi;
            prop_assert!((back - &a).norm() <= 1e-9 * a.norm().max(1.0));
        }
    }

    #[test]
    fn case_tag_is_invariant_under_orthogonal_change_of_components(
        name_idx in 1usize..8, angle in 0.0..6.283f64, flip in -1.0..1.0f64,
    ) {
        let name = BUILTIN_NAMES[name_idx];
        let s = builtin(name, &BTreeMap::new()).unwrap();
        prop_assume!(s.n == 2);
        let base = pencil(name);
        let sym = SymbolPencil::from_spec(&s);
        let r = rotation(&[angle, flip]);
        let rot = SymbolPencil {
            n: 2,
            a_const: &r * &sym.a_const * r.transpose(),
            a_nu: &r * &sym.a_nu * r.transpose(),
            a_nu2: &r * &sym.a_nu2 * r.transpose(),
        };
        let p = pencil_from_symbol(&rot, base.c_star, base.eta_star, None).unwrap();
        prop_assert_eq!(p.case, base.case);
        let nf = build_normal_form(&p).unwrap();
        let nf0 = build_normal_form(&base).unwrap();
        prop_assert!((nf.d_eff - nf0.d_eff).abs() < 1e-9);
    }
}

#[test]
fn example_cases() {
    assert_eq!(pencil("parametric_gl").case, Case::Colinear);
    assert_eq!(pencil("hidden_diffusion").case, Case::Independent);
    assert_eq!(pencil("kpp").case, Case::Colinear);
}
