//! Self-similar diffusive tail in the leading edge, the matched approximate
//! solution `v_app = χ v⁻ + (1 − χ) v⁺` and the weighted decay of its
//! residual.
//!
//! Profiles live on `ξ ∈ [0, ξ_max]` with `ξ = (y + y0)/√(D_eff (t + T))`.
//! Profiles built from `ψ^I_0 = β0 ξ e^{−ξ²/4}` by differentiation and
//! algebra are kept in closed form as polynomials times `e^{−ξ²/4}`; the
//! boundary value problem for `ψ^I_1` and everything derived from it is
//! tabulated on a uniform grid.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::front::{nodal_derivatives, stencil, FrontProfile};
use crate::linalg::Banded;
use crate::normal_form::{Case, NormalForm};
use crate::spectral::WeightSpec;
use crate::systems::SystemSpec;

/// Grid options for the self-similar profiles.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfileOptions {
    pub xi_max: f64,
    pub h: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions { xi_max: 12.0, h: 0.01 }
    }
}

/// Vector-valued `p(ξ) e^{−ξ²/4}` with `p` a polynomial; `coeffs[k]` is the
/// coefficient of `ξᵏ`.
#[derive(Clone, Debug, Serialize)]
pub struct GaussPoly {
    pub dim: usize,
    pub coeffs: Vec<Vec<f64>>,
}

impl GaussPoly {
    pub fn zero(dim: usize) -> GaussPoly {
        GaussPoly { dim, coeffs: Vec::new() }
    }

    /// Scalar `ξ e^{−ξ²/4}` times `beta`.
    pub fn first_hermite(beta: f64) -> GaussPoly {
        GaussPoly { dim: 1, coeffs: vec![vec![0.0], vec![beta]] }
    }

    fn coeff(&self, k: usize) -> DVector<f64> {
        self.coeffs
            .get(k)
            .map(|c| DVector::from_column_slice(c))
            .unwrap_or_else(|| DVector::zeros(self.dim))
    }

    /// `d/dξ`, using `(p e^{−ξ²/4})' = (p' − ξp/2) e^{−ξ²/4}`.
    pub fn deriv(&self) -> GaussPoly {
        let len = self.coeffs.len() + 1;
        let coeffs = (0..len)
            .map(|k| {
                let mut c = self.coeff(k + 1) * (k + 1) as f64;
                if k >= 1 {
                    c -= self.coeff(k - 1) * 0.5;
                }
                c.iter().copied().collect()
            })
            .collect();
        GaussPoly { dim: self.dim, coeffs }
    }

    pub fn times_xi(&self) -> GaussPoly {
        let mut coeffs = vec![vec![0.0; self.dim]];
        coeffs.extend(self.coeffs.iter().cloned());
        GaussPoly { dim: self.dim, coeffs }
    }

    pub fn scale(&self, s: f64) -> GaussPoly {
        GaussPoly {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.iter().map(|v| v * s).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &GaussPoly) -> GaussPoly {
        assert_eq!(self.dim, other.dim);
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|k| (self.coeff(k) + other.coeff(k)).iter().copied().collect())
            .collect();
        GaussPoly { dim: self.dim, coeffs }
    }

    /// `M p` for a matrix with `dim` columns.
    pub fn left_mul(&self, m: &DMatrix<f64>) -> GaussPoly {
        assert_eq!(m.ncols(), self.dim);
        GaussPoly {
            dim: m.nrows(),
            coeffs: (0..self.coeffs.len())
                .map(|k| (m * self.coeff(k)).iter().copied().collect())
                .collect(),
        }
    }

    pub fn eval(&self, xi: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for c in self.coeffs.iter().rev() {
            for (o, v) in out.iter_mut().zip(c) {
                *o = *o * xi + v;
            }
        }
        let g = (-0.25 * xi * xi).exp();
        out.iter_mut().for_each(|o| *o *= g);
        out
    }
}

/// Grid function with nodal first and second derivatives, evaluated by
/// quintic Hermite interpolation.
#[derive(Clone, Debug, Serialize)]
pub struct GridProfile {
    pub h: f64,
    pub values: Vec<Vec<f64>>,
    pub d1: Vec<Vec<f64>>,
    pub d2: Vec<Vec<f64>>,
}

/// Quintic Hermite basis on `[0, 1]`, coefficients in powers of `t`, in the
/// order `f0, f0', f0'', f1, f1', f1''`.
const HERMITE5: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
    [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
    [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
    [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
];

fn poly_with_derivs(c: &[f64; 6], t: f64) -> [f64; 3] {
    let (mut v, mut d, mut s) = (0.0, 0.0, 0.0);
    for k in (0..6).rev() {
        v = v * t + c[k];
        if k >= 1 {
            d = d * t + k as f64 * c[k];
        }
        if k >= 2 {
            s = s * t + (k * (k - 1)) as f64 * c[k];
        }
    }
    [v, d, s]
}

impl GridProfile {
    fn from_values(values: Vec<Vec<f64>>, h: f64) -> GridProfile {
        let (d1, d2) = if values.first().is_some_and(|v| !v.is_empty()) {
            nodal_derivatives(&values, h)
        } else {
            (vec![Vec::new(); values.len()], vec![Vec::new(); values.len()])
        };
        GridProfile { h, values, d1, d2 }
    }

    fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Value, first and second derivative at `xi ∈ [0, ξ_max]`; zero beyond.
    fn eval(&self, xi: f64) -> [Vec<f64>; 3] {
        let dim = self.dim();
        let m = self.values.len();
        let xmax = (m - 1) as f64 * self.h;
        if xi > xmax || dim == 0 {
            return [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
        }
        let j = ((xi / self.h).floor() as usize).min(m - 2);
        let t = (xi - j as f64 * self.h) / self.h;
        let b: Vec<[f64; 3]> = HERMITE5.iter().map(|c| poly_with_derivs(c, t)).collect();
        let h = self.h;
        let mut out = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
        for k in 0..dim {
            let f = [
                self.values[j][k],
                h * self.d1[j][k],
                h * h * self.d2[j][k],
                self.values[j + 1][k],
                h * self.d1[j + 1][k],
                h * h * self.d2[j + 1][k],
            ];
            for (order, o) in out.iter_mut().enumerate() {
                let scale = h.powi(order as i32);
                o[k] = (0..6).map(|i| b[i][order] * f[i]).sum::<f64>() / scale;
            }
        }
        out
    }
}

/// A profile either in closed form or tabulated.
#[derive(Clone, Debug, Serialize)]
pub enum Profile {
    Analytic(GaussPoly),
    Grid(GridProfile),
}

impl Profile {
    pub fn dim(&self) -> usize {
        match self {
            Profile::Analytic(g) => g.dim,
            Profile::Grid(g) => g.dim(),
        }
    }

    /// Value, first and second derivative; odd extension to `ξ < 0`.
    pub fn eval(&self, xi: f64) -> [Vec<f64>; 3] {
        if xi < 0.0 {
            let [v, d, s] = self.eval(-xi);
            return [
                v.iter().map(|x| -x).collect(),
                d,
                s.iter().map(|x| -x).collect(),
            ];
        }
        match self {
            Profile::Analytic(g) => [g.eval(xi), g.deriv().eval(xi), g.deriv().deriv().eval(xi)],
            Profile::Grid(g) => g.eval(xi),
        }
    }

    pub fn value(&self, xi: f64) -> Vec<f64> {
        match self {
            Profile::Analytic(g) if xi >= 0.0 => g.eval(xi),
            _ => self.eval(xi)[0].clone(),
        }
    }
}

/// τ-independent right-hand sides assembled from the normal-form tables.
#[derive(Clone, Debug, Serialize)]
pub struct RightHandSides {
    /// Forcing of `(L_Δ + ½)ψ^I_1`.
    pub g_i1: GaussPoly,
    /// Independent case: `e^{−τ/2}` times the leading part of the first
    /// `II`-correction, so that `ψ^II_1 = D_eff^{−1/2} ∂_ξψ^I_1 + g_ii1`.
    pub g_ii1: Option<GaussPoly>,
    /// Forcing of `ψ^h_0` before inverting the h-block.
    pub g_h0: GaussPoly,
    /// Part of the forcing of `ψ^h_1` that does not involve `ψ^I_1`.
    pub g_h1: GaussPoly,
}

/// Self-similar profiles of the diffusive tail.
#[derive(Clone, Debug, Serialize)]
pub struct SelfSimilarProfiles {
    pub case: Case,
    pub xi_max: f64,
    pub h: f64,
    pub beta0: f64,
    pub d_eff: f64,
    pub eta_star: f64,
    pub psi_i0: Profile,
    pub psi_i1: Profile,
    pub psi_ii0: Option<Profile>,
    pub psi_ii1: Option<Profile>,
    pub psi_ii2: Option<Profile>,
    pub psi_h0: Profile,
    pub psi_h1: Profile,
    pub rhs: RightHandSides,
    /// True when the boundary value problem was retried on a longer interval.
    pub retried: bool,
}

/// Scalar coefficient blocks of the normal form used by the tail equations.
struct Tables {
    nf: NormalForm,
}

impl Tables {
    fn m(&self, name: &str) -> DMatrix<f64> {
        if name.starts_with('s') {
            self.nf.s_block(name)
        } else {
            self.nf.block(name)
        }
    }

    /// Block with the given shape, zero when the normal form has no such block.
    fn shaped(&self, name: &str, rows: usize, cols: usize) -> DMatrix<f64> {
        let m = self.m(name);
        if m.nrows() == rows && m.ncols() == cols {
            m
        } else {
            DMatrix::zeros(rows, cols)
        }
    }

    fn scalar(&self, name: &str) -> f64 {
        let m = self.m(name);
        if m.is_empty() {
            0.0
        } else {
            m[(0, 0)]
        }
    }
}

/// Solves `ψ'' + ½ξψ' + (1 + shift)ψ = g` on a uniform grid with
/// `ψ(0) = ψ(ξ_max) = 0`, using fourth-order stencils.
pub fn solve_dirichlet_bvp(g: &[f64], h: f64, shift: f64) -> Result<Vec<f64>> {
    let m = g.len();
    if m < 8 {
        return Err(Error::InvalidInput("profile grid too coarse".into()));
    }
    let mut a = Banded::<f64>::zeros(m, 4, 4);
    let mut rhs = vec![0.0; m];
    a.set(0, 0, 1.0);
    a.set(m - 1, m - 1, 1.0);
    for i in 1..m - 1 {
        let xi = i as f64 * h;
        let (s, w1, w2) = stencil(i, m);
        for (j, w) in w2.iter().enumerate() {
            a.add(i, s + j, w / (12.0 * h * h));
        }
        for (j, w) in w1.iter().enumerate() {
            a.add(i, s + j, 0.5 * xi * w / (12.0 * h));
        }
        a.add(i, i, 1.0 + shift);
        rhs[i] = g[i];
    }
    a.factor().map_err(|p| Error::NonConvergence {
        stage: "self-similar profiles".into(),
        detail: format!("boundary value matrix singular at row {}", p.0),
    })?;
    a.solve_in_place(&mut rhs);
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence {
            stage: "self-similar profiles".into(),
            detail: "non-finite boundary value solution".into(),
        });
    }
    Ok(rhs)
}

fn tabulate(p: &GaussPoly, xi: &[f64]) -> Vec<Vec<f64>> {
    xi.iter().map(|&x| p.eval(x)).collect()
}

/// `M v` applied row-wise to a tabulated profile.
fn apply_rows(m: &DMatrix<f64>, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| (m * DVector::from_column_slice(r)).iter().copied().collect())
        .collect()
}

fn add_rows(a: &mut [Vec<f64>], b: &[Vec<f64>], s: f64) {
    for (x, y) in a.iter_mut().zip(b) {
        for (u, v) in x.iter_mut().zip(y) {
            *u += s * v;
        }
    }
}

fn scaled_rows(rows: &[Vec<f64>], xi: &[f64], f: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
    rows.iter()
        .zip(xi)
        .map(|(r, &x)| r.iter().map(|v| v * f(x)).collect())
        .collect()
}

/// `(b_ξ ξ∂_ξ − b_2 D⁻¹ ∂_ξ² − (3/2) s) ψ` for a scalar tabulated `ψ` with
/// column coefficients, where `b_ξ` enters with the factor ½.
fn column_operator(
    half_xi: &DMatrix<f64>,
    second: &DMatrix<f64>,
    s: &DMatrix<f64>,
    d_eff: f64,
    xi: &[f64],
    psi: (&[f64], &[f64], &[f64]),
) -> Vec<Vec<f64>> {
    let rows = s.nrows();
    (0..xi.len())
        .map(|i| {
            (0..rows)
                .map(|r| {
                    0.5 * half_xi[(r, 0)] * xi[i] * psi.1[i] - second[(r, 0)] / d_eff * psi.2[i]
                        - 1.5 * s[(r, 0)] * psi.0[i]
                })
                .collect()
        })
        .collect()
}

/// Builds the tail profiles from the normal form.
pub fn solve_profiles(
    nf: &NormalForm,
    eta_star: f64,
    opts: &ProfileOptions,
) -> Result<SelfSimilarProfiles> {
    if !(opts.xi_max >= 10.0) {
        return Err(Error::InvalidInput(format!(
            "xi_max must be at least 10, got {}",
            opts.xi_max
        )));
    }
    if !(opts.h > 0.0 && opts.h <= 0.1) {
        return Err(Error::InvalidInput(format!(
            "profile spacing must lie in (0, 0.1], got {}",
            opts.h
        )));
    }
    if !(eta_star > 0.0) {
        return Err(Error::InvalidInput("eta_star must be positive".into()));
    }
    let tabs = Tables { nf: nf.clone() };
    let d = nf.d_eff;
    let beta0 = d.sqrt();
    let rd = 1.0 / d.sqrt();
    let k3 = 3.0 / (2.0 * eta_star);
    let n = nf.b0.nrows();
    let psi0 = GaussPoly::first_hermite(beta0);
    let p1 = psi0.deriv();
    let p2 = p1.deriv();

    // closed-form parts
    let (rhs, psi_ii0, nh) = match nf.case {
        Case::Colinear => {
            let nh = n - 1;
            let b21_10 = tabs.shaped("b21_10", nh, 1);
            let b21_02 = tabs.shaped("b21_02", nh, 1);
            let s21 = tabs.shaped("s21", nh, 1);
            let b22_01 = tabs.shaped("b22_01", nh, nh);
            let b12_01 = tabs.shaped("b12_01", 1, nh);
            // (−½ b21¹⁰ (1 − ξ∂) − b21⁰² D⁻¹ ∂² − (3/2) s21) ψ0
            let g_h0 = psi0
                .left_mul(&(b21_10.clone() * -0.5 - &s21 * 1.5))
                .add(&p1.times_xi().left_mul(&(b21_10 * 0.5)))
                .add(&p2.left_mul(&(b21_02 * (-1.0 / d))));
            let h00 = invert_block(&tabs, "b22_00", nh)?;
            let psi_h0 = g_h0.left_mul(&h00);
            let dh0 = psi_h0.deriv();
            let g_i1 = dh0
                .left_mul(&(b12_01 * -rd))
                .add(&p1.scale(k3 * rd));
            let g_h1 = dh0
                .left_mul(&(b22_01 * -rd))
                .add(&p1.left_mul(&(s21 * (k3 * rd))));
            (
                RightHandSides { g_i1, g_ii1: None, g_h0, g_h1 },
                None,
                nh,
            )
        }
        Case::Independent => {
            let nh = n - 2;
            let psi_ii0 = p1.scale(rd);
            let dii0 = psi_ii0.deriv();
            let b31_10 = tabs.shaped("b31_10", nh, 1);
            let b31_02 = tabs.shaped("b31_02", nh, 1);
            let s31 = tabs.shaped("s31", nh, 1);
            let b32_01 = tabs.shaped("b32_01", nh, 1);
            let b32_10 = tabs.shaped("b32_10", nh, 1);
            let b32_02 = tabs.shaped("b32_02", nh, 1);
            let s32 = tabs.shaped("s32", nh, 1);
            let b33_01 = tabs.shaped("b33_01", nh, nh);
            let b13_01 = tabs.shaped("b13_01", 1, nh);
            let g_h0 = psi0
                .left_mul(&(b31_10.clone() * -0.5 - &s31 * 1.5))
                .add(&p1.times_xi().left_mul(&(b31_10 * 0.5)))
                .add(&p2.left_mul(&(b31_02 * (-1.0 / d))))
                .add(&dii0.left_mul(&(b32_01 * -rd)));
            let h33 = invert_block(&tabs, "b33_00", nh)?;
            let psi_h0 = g_h0.left_mul(&h33);
            let dh0 = psi_h0.deriv();
            // leading II-correction divided by e^{τ/2}
            let b21_10 = tabs.scalar("b21_10");
            let b21_02 = tabs.scalar("b21_02");
            let s21 = tabs.scalar("s21");
            let b22_01 = tabs.scalar("b22_01");
            let g_ii1 = psi0
                .scale(-0.5 * b21_10 - 1.5 * s21)
                .add(&p1.times_xi().scale(0.5 * b21_10))
                .add(&p2.scale(-b21_02 / d))
                .add(&dii0.scale(-b22_01 * rd));
            let s12 = tabs.scalar("s12");
            let b12_10 = tabs.scalar("b12_10");
            let b12_02 = tabs.scalar("b12_02");
            let b12_01 = tabs.scalar("b12_01");
            let f_i1 = p1
                .scale(-k3 * rd)
                .add(&psi_ii0.scale(1.5 * s12))
                .add(&dii0.times_xi().scale(-0.5 * b12_10))
                .add(&dii0.deriv().scale(b12_02 / d))
                .add(&dh0.left_mul(&(b13_01 * rd)));
            let g_i1 = g_ii1.deriv().scale(-b12_01 * rd).add(&f_i1.scale(-1.0));
            let g_h1 = p1
                .left_mul(&(s31 * (k3 * rd)))
                .add(&dii0.times_xi().left_mul(&(b32_10 * 0.5)))
                .add(&dii0.deriv().left_mul(&(b32_02 * (-1.0 / d))))
                .add(&psi_ii0.left_mul(&(s32 * -1.5)))
                .add(&dh0.left_mul(&(b33_01 * -rd)));
            (
                RightHandSides { g_i1, g_ii1: Some(g_ii1), g_h0, g_h1 },
                Some(psi_ii0),
                nh,
            )
        }
    };

    // ψ^I_1 from the boundary value problem, retried once on a longer interval
    let mut xi_max = opts.xi_max;
    let mut retried = false;
    let (xi, psi1) = loop {
        let m = (xi_max / opts.h).round() as usize + 1;
        let xi: Vec<f64> = (0..m).map(|i| i as f64 * opts.h).collect();
        let g: Vec<f64> = xi.iter().map(|&x| rhs.g_i1.eval(x)[0]).collect();
        match solve_dirichlet_bvp(&g, opts.h, 0.5) {
            Ok(v) => break (xi, v),
            Err(e) if retried => return Err(e),
            Err(_) => {
                retried = true;
                xi_max *= 1.5;
            }
        }
    };
    let h = opts.h;
    let col: Vec<Vec<f64>> = psi1.iter().map(|v| vec![*v]).collect();
    let (d1, _) = nodal_derivatives(&col, h);
    let psi1_d1: Vec<f64> = d1.iter().map(|v| v[0]).collect();
    // second derivative from the equation itself
    let psi1_d2: Vec<f64> = (0..xi.len())
        .map(|i| rhs.g_i1.eval(xi[i])[0] - 0.5 * xi[i] * psi1_d1[i] - 1.5 * psi1[i])
        .collect();
    let psi_i1 = Profile::Grid(GridProfile {
        h,
        values: col,
        d1: psi1_d1.iter().map(|v| vec![*v]).collect(),
        d2: psi1_d2.iter().map(|v| vec![*v]).collect(),
    });
    let psi = (&psi1[..], &psi1_d1[..], &psi1_d2[..]);

    let (psi_ii1, psi_ii2, psi_h1) = match nf.case {
        Case::Colinear => {
            let b21_10 = tabs.shaped("b21_10", nh, 1);
            let b21_02 = tabs.shaped("b21_02", nh, 1);
            let s21 = tabs.shaped("s21", nh, 1);
            let mut g = column_operator(&b21_10, &b21_02, &s21, d, &xi, psi);
            add_rows(&mut g, &tabulate(&rhs.g_h1, &xi), 1.0);
            let h00 = invert_block(&tabs, "b22_00", nh)?;
            let h1 = apply_rows(&h00, &g);
            (None, None, Profile::Grid(GridProfile::from_values(h1, h)))
        }
        Case::Independent => {
            let g_ii1 = rhs.g_ii1.as_ref().expect("independent case");
            // ψ^II_1 = D^{−1/2} ψ1' + g_ii1 and its derivative
            let ii1: Vec<Vec<f64>> = (0..xi.len())
                .map(|i| vec![rd * psi1_d1[i] + g_ii1.eval(xi[i])[0]])
                .collect();
            let dg = g_ii1.deriv();
            let ii1_d1: Vec<f64> = (0..xi.len())
                .map(|i| rd * psi1_d2[i] + dg.eval(xi[i])[0])
                .collect();
            let ii1_grid = GridProfile::from_values(ii1, h);

            // ψ^h_1
            let b31_10 = tabs.shaped("b31_10", nh, 1);
            let b31_02 = tabs.shaped("b31_02", nh, 1);
            let s31 = tabs.shaped("s31", nh, 1);
            let b32_01 = tabs.shaped("b32_01", nh, 1);
            let mut gh = column_operator(&b31_10, &b31_02, &s31, d, &xi, psi);
            add_rows(&mut gh, &tabulate(&rhs.g_h1, &xi), 1.0);
            let ii1_col: Vec<Vec<f64>> = ii1_d1.iter().map(|v| vec![*v]).collect();
            add_rows(&mut gh, &apply_rows(&(b32_01 * -rd), &ii1_col), 1.0);
            let h33 = invert_block(&tabs, "b33_00", nh)?;
            let h1 = apply_rows(&h33, &gh);

            // ψ^II_2
            let one = |name: &str| tabs.shaped(name, 1, 1);
            let mut ii2 = column_operator(&one("b21_10"), &one("b21_02"), &one("s21"), d, &xi, psi);
            let b22_01 = tabs.scalar("b22_01");
            add_rows(&mut ii2, &scaled_rows(&ii1_col, &xi, |_| -b22_01 * rd), 1.0);
            let s21 = tabs.scalar("s21");
            let b22_10 = tabs.scalar("b22_10");
            let b22_02 = tabs.scalar("b22_02");
            let s22 = tabs.scalar("s22");
            let psi_ii0 = psi_ii0.as_ref().expect("independent case");
            let dii0 = psi_ii0.deriv();
            let b23_01 = tabs.shaped("b23_01", 1, nh);
            let closed = p1
                .scale(k3 * s21 * rd)
                .add(&dii0.times_xi().scale(0.5 * b22_10))
                .add(&dii0.deriv().scale(-b22_02 / d))
                .add(&psi_ii0.scale(-1.5 * s22))
                .add(&rhs.g_h0.left_mul(&h33).deriv().left_mul(&(b23_01 * -rd)));
            add_rows(&mut ii2, &tabulate(&closed, &xi), 1.0);
            (
                Some(Profile::Grid(ii1_grid)),
                Some(Profile::Grid(GridProfile::from_values(ii2, h))),
                Profile::Grid(GridProfile::from_values(h1, h)),
            )
        }
    };

    let psi_h0 = match nf.case {
        Case::Colinear => rhs.g_h0.left_mul(&invert_block(&tabs, "b22_00", nh)?),
        Case::Independent => rhs.g_h0.left_mul(&invert_block(&tabs, "b33_00", nh)?),
    };
    Ok(SelfSimilarProfiles {
        case: nf.case,
        xi_max,
        h,
        beta0,
        d_eff: d,
        eta_star,
        psi_i0: Profile::Analytic(psi0),
        psi_i1,
        psi_ii0: psi_ii0.map(Profile::Analytic),
        psi_ii1,
        psi_ii2,
        psi_h0: Profile::Analytic(psi_h0),
        psi_h1,
        rhs,
        retried,
    })
}

fn invert_block(tabs: &Tables, name: &str, nh: usize) -> Result<DMatrix<f64>> {
    if nh == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    tabs.shaped(name, nh, nh)
        .try_inverse()
        .ok_or_else(|| Error::Hypothesis {
            which: "pencil".into(),
            detail: format!("block {name} is singular"),
        })
}

impl SelfSimilarProfiles {
    /// Grid nodes `ξ_j = j h` on `[0, ξ_max]`.
    pub fn grid(&self) -> Vec<f64> {
        let m = (self.xi_max / self.h).round() as usize + 1;
        (0..m).map(|i| i as f64 * self.h).collect()
    }

    /// All profiles with their names.
    pub fn named(&self) -> Vec<(&'static str, &Profile)> {
        let mut out = vec![("psi_i0", &self.psi_i0), ("psi_i1", &self.psi_i1)];
        if let Some(p) = &self.psi_ii0 {
            out.push(("psi_ii0", p));
        }
        if let Some(p) = &self.psi_ii1 {
            out.push(("psi_ii1", p));
        }
        if let Some(p) = &self.psi_ii2 {
            out.push(("psi_ii2", p));
        }
        if self.psi_h0.dim() > 0 {
            out.push(("psi_h0", &self.psi_h0));
            out.push(("psi_h1", &self.psi_h1));
        }
        out
    }

    /// Smallest `C` with `|ψ(ξ)| ≤ C e^{−ξ²/8}` on the grid, per profile.
    pub fn envelope_constants(&self) -> Vec<(&'static str, f64)> {
        let grid = self.grid();
        self.named()
            .into_iter()
            .map(|(name, p)| {
                let c = grid
                    .iter()
                    .map(|&x| {
                        let v = p.value(x);
                        v.iter().fold(0.0f64, |m, a| m.max(a.abs())) * (x * x / 8.0).exp()
                    })
                    .fold(0.0f64, f64::max);
                (name, c)
            })
            .collect()
    }

    /// Components `Φ⁺` of the tail in normal-form coordinates at
    /// `ξ` and `s = t + T`, with their `y`-, `yy`- and `t`-derivatives.
    fn phi_plus(&self, xi: f64, s: f64) -> [DVector<f64>; 4] {
        let n = 1 + self.psi_ii0.as_ref().map_or(0, |_| 1) + self.psi_h0.dim();
        let mut out = [
            DVector::zeros(n),
            DVector::zeros(n),
            DVector::zeros(n),
            DVector::zeros(n),
        ];
        let dys = (self.d_eff * s).sqrt();
        let mut add = |offset: usize, power: f64, p: &Profile| {
            let [v, d1, d2] = p.eval(xi);
            let sp = s.powf(power);
            for k in 0..v.len() {
                out[0][offset + k] += sp * v[k];
                out[1][offset + k] += sp * d1[k] / dys;
                out[2][offset + k] += sp * d2[k] / (dys * dys);
                out[3][offset + k] += power * sp / s * v[k] - sp * d1[k] * xi / (2.0 * s);
            }
        };
        add(0, 0.5, &self.psi_i0);
        add(0, 0.0, &self.psi_i1);
        let mut off = 1;
        if let (Some(a), Some(b), Some(c)) = (&self.psi_ii0, &self.psi_ii1, &self.psi_ii2) {
            add(1, 0.0, a);
            add(1, -0.5, b);
            add(1, -1.0, c);
            off = 2;
        }
        if self.psi_h0.dim() > 0 {
            add(off, -0.5, &self.psi_h0);
            add(off, -1.0, &self.psi_h1);
        }
        out
    }
}

/// Eigenvalues of the second-order discretization of
/// `L_Δ = ∂_ξ² + ½ξ∂_ξ + 1` on `(0, ξ_max)` with Dirichlet conditions at
/// both ends.
#[derive(Clone, Debug, Serialize)]
pub struct OddSectorSpectrum {
    pub xi_max: f64,
    pub h: f64,
    /// Eigenvalues in `[lower, upper]`, decreasing.
    pub eigenvalues: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    /// Eigenvalue of smallest modulus.
    pub nearest_zero: f64,
    /// Distance from `−½` to the nearest eigenvalue.
    pub gap_at_minus_half: f64,
}

/// Computes the eigenvalues of the discretized `L_Δ` in `[lower, upper]` by
/// Sturm-sequence bisection on the symmetrized tridiagonal matrix.
pub fn odd_sector_spectrum(xi_max: f64, h: f64, lower: f64, upper: f64) -> Result<OddSectorSpectrum> {
    let m = (xi_max / h).round() as usize - 1;
    if m < 3 || !(upper > lower) {
        return Err(Error::InvalidInput("invalid grid or interval for the odd-sector spectrum".into()));
    }
    let diag = vec![1.0 - 2.0 / (h * h); m];
    // product of the off-diagonal pair coupling nodes i and i+1
    let off2: Vec<f64> = (0..m - 1)
        .map(|i| {
            let up = 1.0 / (h * h) + (i + 1) as f64 * h / (4.0 * h);
            let down = 1.0 / (h * h) - (i + 2) as f64 * h / (4.0 * h);
            up * down
        })
        .collect();
    if off2.iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidInput("grid too coarse for a symmetrizable discretization".into()));
    }
    let below = |sigma: f64| -> usize {
        let mut count = 0;
        let mut d = diag[0] - sigma;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..m {
            let prev = if d == 0.0 { f64::MIN_POSITIVE } else { d };
            d = diag[i] - sigma - off2[i - 1] / prev;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (c_lo, c_hi) = (below(lower), below(upper));
    let mut eigenvalues = Vec::new();
    for k in c_lo..c_hi {
        let (mut a, mut b) = (lower, upper);
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if below(mid) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        eigenvalues.push(0.5 * (a + b));
    }
    eigenvalues.reverse();
    let nearest_zero = eigenvalues
        .iter()
        .copied()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(f64::NAN);
    let gap_at_minus_half = eigenvalues
        .iter()
        .map(|l| (l + 0.5).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(OddSectorSpectrum {
        xi_max,
        h,
        eigenvalues,
        lower,
        upper,
        nearest_zero,
        gap_at_minus_half,
    })
}

/// Largest relative matching mismatch accepted at `t = 0`.
pub const MATCHING_FLOOR: f64 = 0.5;

/// `χ0(z)`: one for `z ≤ 0`, zero for `z ≥ 1`, quintic smoothstep between;
/// returns the value and two derivatives.
pub fn cutoff(z: f64) -> (f64, f64, f64) {
    if z <= 0.0 {
        (1.0, 0.0, 0.0)
    } else if z >= 1.0 {
        (0.0, 0.0, 0.0)
    } else {
        let z2 = z * z;
        (
            1.0 - z2 * z * (10.0 - 15.0 * z + 6.0 * z2),
            -30.0 * z2 * (1.0 - z) * (1.0 - z),
            -60.0 * z * (1.0 - z) * (1.0 - 2.0 * z),
        )
    }
}

/// Value and derivatives of `v_app` (or of one of its pieces) at a point.
#[derive(Clone, Debug, Serialize)]
pub struct FieldPoint {
    pub v: Vec<f64>,
    pub v_y: Vec<f64>,
    pub v_yy: Vec<f64>,
    pub v_t: Vec<f64>,
}

impl FieldPoint {
    fn zeros(n: usize) -> FieldPoint {
        FieldPoint {
            v: vec![0.0; n],
            v_y: vec![0.0; n],
            v_yy: vec![0.0; n],
            v_t: vec![0.0; n],
        }
    }
}

/// The matched approximate solution.
#[derive(Clone, Debug, Serialize)]
pub struct ApproxSolution {
    pub case: Case,
    /// Time offset `T`.
    pub t_shift: f64,
    pub mu: f64,
    pub r: f64,
    pub y0: f64,
    pub beta0: f64,
    /// Translation `L` of the critical front, `v⁻(y) = ω(y) q_*(y + L)`.
    pub front_shift: f64,
    pub d_eff: f64,
    pub c_star: f64,
    pub eta_star: f64,
    /// Relative mismatch `|v⁻ − v⁺| / max(1, |v⁻|)` at `y = T^μ`, `t = 0`.
    pub initial_mismatch: f64,
    #[serde(skip)]
    pub front: FrontProfile,
    #[serde(skip)]
    pub profiles: SelfSimilarProfiles,
    #[serde(skip)]
    q: DMatrix<f64>,
    #[serde(skip)]
    weight: WeightSpec,
    #[serde(skip)]
    front_d1: Vec<Vec<f64>>,
    #[serde(skip)]
    front_d2: Vec<Vec<f64>>,
}

/// Assembles `v_app` with `β0 = √D_eff` and `y0 = κ + a`, where `u1 = κ u0`
/// in the co-linear case and `κ = 0` in the independent case.
pub fn assemble_vapp(
    front: &FrontProfile,
    profiles: &SelfSimilarProfiles,
    nf: &NormalForm,
    t_shift: f64,
    mu: f64,
) -> Result<ApproxSolution> {
    assemble_vapp_translated(front, profiles, nf, t_shift, mu, 0.0)
}

/// As [`assemble_vapp`] but glued to the translate `q_*(· + L)` of the front.
/// Its leading edge is `e^{−η_* L}(u0 (y + L + a) + u1) e^{−η_* y}`, so the
/// tail uses `β0 = e^{−η_* L} √D_eff` and `y0 = κ + a + L`.
pub fn assemble_vapp_translated(
    front: &FrontProfile,
    profiles: &SelfSimilarProfiles,
    nf: &NormalForm,
    t_shift: f64,
    mu: f64,
    front_shift: f64,
) -> Result<ApproxSolution> {
    if !front_shift.is_finite() {
        return Err(Error::InvalidInput("front shift must be finite".into()));
    }
    if !(mu > 0.0 && mu < 0.125) {
        return Err(Error::InvalidInput(format!("mu must lie in (0, 1/8), got {mu}")));
    }
    if !(t_shift > 0.0 && t_shift.is_finite()) {
        return Err(Error::InvalidInput("T must be positive".into()));
    }
    if profiles.case != nf.case || front.n != nf.q.nrows() {
        return Err(Error::InvalidInput(
            "front, profiles and normal form describe different systems".into(),
        ));
    }
    let u0 = DVector::from_column_slice(&front.u0);
    let u1 = DVector::from_column_slice(&front.u1);
    let q0 = nf.q.column(0).into_owned();
    if (&q0 - &u0).amax() > 1e-9 * u0.amax().max(1.0) {
        return Err(Error::InvalidInput(
            "front and normal form use different kernel vectors".into(),
        ));
    }
    let kappa = match nf.case {
        Case::Colinear => u1.dot(&u0) / u0.norm_squared(),
        Case::Independent => 0.0,
    };
    let (d1, d2) = front.derivatives();
    let mut out = ApproxSolution {
        case: nf.case,
        t_shift,
        mu,
        r: 2.0 + mu,
        y0: kappa + front.a + front_shift,
        beta0: profiles.beta0 * (-front.eta_star * front_shift).exp(),
        front_shift,
        d_eff: profiles.d_eff,
        c_star: front.c_star,
        eta_star: front.eta_star,
        initial_mismatch: 0.0,
        front: front.clone(),
        profiles: profiles.clone(),
        q: nf.q.clone(),
        weight: WeightSpec::exponential(front.eta_star)?,
        front_d1: d1,
        front_d2: d2,
    };
    let y = t_shift.powf(mu);
    let minus = out.eval_minus(y);
    let plus = out.eval_plus(y, 0.0);
    let scale = minus.v.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mismatch = minus
        .v
        .iter()
        .zip(&plus.v)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    out.initial_mismatch = mismatch / scale;
    if !(out.initial_mismatch <= MATCHING_FLOOR) {
        return Err(Error::InvalidInput(format!(
            "T = {t_shift} is below T_min: relative matching mismatch {:.3e} at y = T^mu exceeds {MATCHING_FLOOR} (y0 = {:.4})",
            out.initial_mismatch, out.y0
        )));
    }
    Ok(out)
}

/// Target relative mismatch used by [`choose_front_shift`].
pub const SHIFT_TARGET: f64 = 0.05;

/// Smallest translation `L ∈ {0, ½, 1, …} ≤ 20` whose initial relative
/// matching mismatch is at most `target`.
pub fn choose_front_shift(
    front: &FrontProfile,
    profiles: &SelfSimilarProfiles,
    nf: &NormalForm,
    t_shift: f64,
    mu: f64,
    target: f64,
) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for k in 0..=40 {
        let shift = 0.5 * k as f64;
        if let Ok(v) = assemble_vapp_translated(front, profiles, nf, t_shift, mu, shift) {
            if v.initial_mismatch <= target {
                return Ok(shift);
            }
            if best.is_none_or(|b| v.initial_mismatch < b.1) {
                best = Some((shift, v.initial_mismatch));
            }
        }
    }
    Err(Error::NonConvergence {
        stage: "tail matching".into(),
        detail: format!(
            "no front translation up to 20 reaches mismatch {target:e}; best {best:?}"
        ),
    })
}

fn lagrange6(x0: f64, h: f64, table: &[Vec<f64>], x: f64) -> Vec<f64> {
    let m = table.len();
    let t = (x - x0) / h;
    let i0 = (t.floor() as isize - 2).clamp(0, m as isize - 6) as usize;
    let n = table[0].len();
    let mut out = vec![0.0; n];
    for j in 0..6 {
        let mut l = 1.0;
        for k in 0..6 {
            if k != j {
                l *= (t - (i0 + k) as f64) / (j as f64 - k as f64);
            }
        }
        for (o, v) in out.iter_mut().zip(&table[i0 + j]) {
            *o += l * v;
        }
    }
    out
}

impl ApproxSolution {
    /// `(q, q', q'')` of the critical front at `y` (relative to its origin).
    fn front_at(&self, y: f64) -> [Vec<f64>; 3] {
        let f = &self.front;
        let x = f.origin + y;
        let n = f.n;
        let m = f.x.len();
        if x < f.x[0] {
            return [f.wake.clone(), vec![0.0; n], vec![0.0; n]];
        }
        if x > f.x[m - 1] {
            let e = (-f.eta_star * y).exp();
            let eta = f.eta_star;
            let lin: Vec<f64> = (0..n).map(|k| f.u0[k] * (y + f.a) + f.u1[k]).collect();
            return [
                lin.iter().map(|l| l * e).collect(),
                (0..n).map(|k| (f.u0[k] - eta * lin[k]) * e).collect(),
                (0..n)
                    .map(|k| (-2.0 * eta * f.u0[k] + eta * eta * lin[k]) * e)
                    .collect(),
            ];
        }
        let t = (x - f.x[0]) / f.h;
        if (t - t.round()).abs() < 1e-9 {
            let i = t.round() as usize;
            return [f.values[i].clone(), self.front_d1[i].clone(), self.front_d2[i].clone()];
        }
        [
            f.eval(x),
            lagrange6(f.x[0], f.h, &self.front_d1, x),
            lagrange6(f.x[0], f.h, &self.front_d2, x),
        ]
    }

    /// `v⁻ = ω q_*(· + L)` and its derivatives.
    pub fn eval_minus(&self, y: f64) -> FieldPoint {
        let [q, dq, ddq] = self.front_at(y + self.front_shift);
        let (w, w1, w2) = self.weight.omega_derivs(y);
        let n = q.len();
        FieldPoint {
            v: (0..n).map(|k| w * q[k]).collect(),
            v_y: (0..n).map(|k| w1 * q[k] + w * dq[k]).collect(),
            v_yy: (0..n)
                .map(|k| w2 * q[k] + 2.0 * w1 * dq[k] + w * ddq[k])
                .collect(),
            v_t: vec![0.0; n],
        }
    }

    /// `ξ(y, t)`.
    pub fn xi(&self, y: f64, t: f64) -> f64 {
        (y + self.y0) / (self.d_eff * (t + self.t_shift)).sqrt()
    }

    /// `v⁺ = Q Φ⁺` and its derivatives.
    pub fn eval_plus(&self, y: f64, t: f64) -> FieldPoint {
        let s = t + self.t_shift;
        let [v, vy, vyy, vt] = self.profiles.phi_plus(self.xi(y, t), s);
        let amp = self.beta0 / self.profiles.beta0;
        let c = |x: DVector<f64>| -> Vec<f64> { (&self.q * x * amp).iter().copied().collect() };
        FieldPoint {
            v: c(v),
            v_y: c(vy),
            v_yy: c(vyy),
            v_t: c(vt),
        }
    }

    /// Left end of the gluing strip, `(t + T)^μ`.
    pub fn strip_start(&self, t: f64) -> f64 {
        (t + self.t_shift).powf(self.mu)
    }

    /// `v_app = χ v⁻ + (1 − χ) v⁺` and its derivatives.
    pub fn eval(&self, y: f64, t: f64) -> FieldPoint {
        let s = t + self.t_shift;
        let start = self.strip_start(t);
        let (chi, chi_y, chi_yy) = cutoff(y - start);
        let chi_t = -chi_y * self.mu * start / s;
        if chi == 1.0 && chi_y == 0.0 {
            return self.eval_minus(y);
        }
        let plus = self.eval_plus(y, t);
        if chi == 0.0 && chi_y == 0.0 {
            return plus;
        }
        let minus = self.eval_minus(y);
        let n = plus.v.len();
        let mut out = FieldPoint::zeros(n);
        for k in 0..n {
            let dv = minus.v[k] - plus.v[k];
            let dvy = minus.v_y[k] - plus.v_y[k];
            out.v[k] = chi * minus.v[k] + (1.0 - chi) * plus.v[k];
            out.v_y[k] = chi * minus.v_y[k] + (1.0 - chi) * plus.v_y[k] + chi_y * dv;
            out.v_yy[k] = chi * minus.v_yy[k]
                + (1.0 - chi) * plus.v_yy[k]
                + 2.0 * chi_y * dvy
                + chi_yy * dv;
            out.v_t[k] = (1.0 - chi) * plus.v_t[k] + chi_t * dv;
        }
        out
    }

    /// Value and derivative mismatch `|v⁻ − v⁺|`, `|∂_y v⁻ − ∂_y v⁺|` at
    /// `y = (t + T)^μ` (max-norm over components).
    pub fn matching_error(&self, t: f64) -> (f64, f64) {
        let y = self.strip_start(t);
        let a = self.eval_minus(y);
        let b = self.eval_plus(y, t);
        let diff = |u: &[f64], v: &[f64]| u.iter().zip(v).fold(0.0f64, |m, (x, z)| m.max((x - z).abs()));
        (diff(&a.v, &b.v), diff(&a.v_y, &b.v_y))
    }

    /// Metadata for reports.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "case": self.case,
            "T": self.t_shift,
            "mu": self.mu,
            "r": self.r,
            "y0": self.y0,
            "beta0": self.beta0,
            "front_shift": self.front_shift,
            "d_eff": self.d_eff,
            "c_star": self.c_star,
            "eta_star": self.eta_star,
            "initial_mismatch": self.initial_mismatch,
        })
    }
}

/// `F_res[v] = v_t − Dω∂_y²(ω⁻¹v) − (c_* I + G − 3/(2η_*(t+T)))ω∂_y(ω⁻¹v) − ω f(ω⁻¹v)`
/// for the system centered at its unstable state.
#[derive(Clone, Debug)]
pub struct ResidualOperator {
    spec: SystemSpec,
    d: DMatrix<f64>,
    adv: DMatrix<f64>,
    j0: DMatrix<f64>,
    c_star: f64,
    eta_star: f64,
    t_shift: f64,
    weight: WeightSpec,
}

const GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_9),
    (0.330_009_478_207_571_9, 0.326_072_577_431_273_1),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_1),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_9),
];

impl ResidualOperator {
    pub fn new(spec: &SystemSpec, c_star: f64, eta_star: f64, t_shift: f64) -> Result<ResidualOperator> {
        let cs = spec.centered();
        Ok(ResidualOperator {
            d: cs.d.clone(),
            adv: cs.advection_matrix(),
            j0: cs.linearization(),
            spec: cs,
            c_star,
            eta_star,
            t_shift,
            weight: WeightSpec::exponential(eta_star)?,
        })
    }

    /// `f(u) − f'(0)u`, by quadrature of the Jacobian for small `u`.
    fn nonlinear(&self, u: &DVector<f64>) -> DVector<f64> {
        if u.amax() >= 1e-2 {
            return self.spec.f(u.as_slice()) - &self.j0 * u;
        }
        let mut out = DVector::zeros(u.len());
        for (s, w) in GAUSS4 {
            let us: Vec<f64> = u.iter().map(|v| v * s).collect();
            out += (self.spec.jf(&us) - &self.j0) * u * w;
        }
        out
    }

    /// Residual at `(y, t)` for a field given by value and derivatives.
    pub fn apply(&self, y: f64, t: f64, p: &FieldPoint) -> Vec<f64> {
        let s = t + self.t_shift;
        let (eta, deta) = self.weight.rate(y);
        let v = DVector::from_column_slice(&p.v);
        let vy = DVector::from_column_slice(&p.v_y);
        let vyy = DVector::from_column_slice(&p.v_yy);
        let vt = DVector::from_column_slice(&p.v_t);
        let c1 = &vy - &v * eta;
        let c2 = &vyy - &vy * (2.0 * eta) + &v * (eta * eta - deta);
        let speed = self.c_star - 3.0 / (2.0 * self.eta_star * s);
        let u = &v * (-self.weight.log_omega(y)).exp();
        let nl = self.nonlinear(&u) * self.weight.log_omega(y).exp();
        let r = vt - &self.d * c2 - (&self.adv * &c1 + c1 * speed) - &self.j0 * v - nl;
        r.iter().copied().collect()
    }
}

/// One time sample of the residual.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualSample {
    pub t: f64,
    /// `sup_y ρ_{0,r}(y) |F_res[v_app](y, t)|`.
    pub weighted_sup: f64,
    /// Location of the supremum.
    pub argmax: f64,
}

/// Residual decay report.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub samples: Vec<ResidualSample>,
    /// Least-squares slope of `log ‖F_res‖` against `log(t + T)`.
    pub fitted_exponent: f64,
    /// True when the weighted residual does not increase between samples.
    pub monotone: bool,
    pub metadata: serde_json::Value,
}

impl ResidualReport {
    /// CSV with columns `t, weighted_sup, fitted_exponent`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,weighted_sup,fitted_exponent\n");
        for smp in &self.samples {
            let _ = writeln!(s, "{},{:.12e},{:.6}", smp.t, smp.weighted_sup, self.fitted_exponent);
        }
        s
    }
}

/// Spacing of the residual grid beyond the front grid.
pub const TAIL_SPACING: f64 = 0.05;

/// Weighted residual profile at time `t`: `(y, F_res)` on the front nodes up to
/// the end of the gluing strip, then on a uniform grid through the tail.
pub fn residual_profile(vapp: &ApproxSolution, spec: &SystemSpec, t: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    let op = ResidualOperator::new(spec, vapp.c_star, vapp.eta_star, vapp.t_shift)?;
    let end = vapp.strip_start(t) + 1.0;
    let f = &vapp.front;
    // the first node carries a boundary condition, not the profile equation
    let mut ys: Vec<f64> = f
        .x
        .iter()
        .skip(1)
        .map(|x| x - f.origin - vapp.front_shift)
        .take_while(|y| *y <= end)
        .collect();
    let last = ys.last().copied().unwrap_or(f.x[0] - f.origin - vapp.front_shift);
    let s = t + vapp.t_shift;
    let y_max = vapp.profiles.xi_max * (vapp.d_eff * s).sqrt() - vapp.y0;
    let mut y = last + TAIL_SPACING;
    while y <= y_max {
        ys.push(y);
        y += TAIL_SPACING;
    }
    Ok(ys.into_iter().map(|y| (y, op.apply(y, t, &vapp.eval(y, t)))).collect())
}

/// Evaluates the weighted residual at each sample time and fits its decay.
pub fn residual(vapp: &ApproxSolution, spec: &SystemSpec, t_samples: &[f64]) -> Result<ResidualReport> {
    if t_samples.is_empty() {
        return Err(Error::InvalidInput("no time samples".into()));
    }
    let rho = WeightSpec::new(0.0, 0.0, vapp.r)?;
    let mut samples = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let prof = residual_profile(vapp, spec, t)?;
        let (mut best, mut arg) = (0.0f64, f64::NAN);
        for (y, r) in prof {
            let w = rho.rho(y) * r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if w > best || arg.is_nan() {
                best = w;
                arg = y;
            }
        }
        samples.push(ResidualSample { t, weighted_sup: best, argmax: arg });
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| ((s.t + vapp.t_shift).ln(), s.weighted_sup.ln()))
        .collect();
    let fitted_exponent = if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    let monotone = samples
        .windows(2)
        .all(|w| w[1].weighted_sup <= w[0].weighted_sup);
    Ok(ResidualReport {
        samples,
        fitted_exponent,
        monotone,
        metadata: vapp.metadata(),
    })
}
