//! Matrix-pencil form of the marginal double root and the diffusive normal
//! forms `B(λ, ν) = S A(λ, ν) Q` for the co-linear and the linearly
//! independent case.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dispersion::{SpreadingSpeedResult, SymbolPencil};
use crate::error::{Error, Result};
use crate::linalg::{self, ser};
use crate::systems::SystemSpec;

/// Relative threshold below which `u1` is treated as co-linear with `u0`.
pub const COLINEAR_TOL: f64 = 1e-8;
/// Relative gap required between the two smallest singular values of `A⁰`.
pub const KERNEL_GAP_TOL: f64 = 1e-6;
/// Largest admissible condition number of `S` and `Q`.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Colinear,
    Independent,
}

/// Coefficients of `A(λ, ν) = A⁰ + A¹⁰λ + A⁰¹ν + A⁰²ν²` with the kernel,
/// Jordan and cokernel vectors.
#[derive(Clone, Debug, Serialize)]
pub struct PencilData {
    pub n: usize,
    pub c_star: f64,
    pub eta_star: f64,
    #[serde(serialize_with = "ser::mat")]
    pub a0: DMatrix<f64>,
    #[serde(serialize_with = "ser::mat")]
    pub a10: DMatrix<f64>,
    #[serde(serialize_with = "ser::mat")]
    pub a01: DMatrix<f64>,
    #[serde(serialize_with = "ser::mat")]
    pub a02: DMatrix<f64>,
    #[serde(serialize_with = "ser::vec")]
    pub u0: DVector<f64>,
    #[serde(serialize_with = "ser::vec")]
    pub u1: DVector<f64>,
    #[serde(serialize_with = "ser::vec")]
    pub e_ad: DVector<f64>,
    pub case: Case,
    /// Singular values of `A⁰` in increasing order.
    pub singular_values: Vec<f64>,
    /// `⟨−u0, e_ad⟩⟨A⁰²u0 + A⁰¹u1, e_ad⟩`, negative for a simple double root.
    pub sign_product: f64,
    /// `‖A⁰u1 + A⁰¹u0‖`.
    pub chain_residual: f64,
    /// Distance of the least-squares `u1` from `span(u0)`.
    pub colinear_distance: f64,
}

impl PencilData {
    /// `A(λ, ν)` for real arguments.
    pub fn eval(&self, lam: f64, nu: f64) -> DMatrix<f64> {
        &self.a0 + &self.a10 * lam + &self.a01 * nu + &self.a02 * (nu * nu)
    }

    fn scale(&self) -> f64 {
        [&self.a0, &self.a01, &self.a02]
            .iter()
            .map(|m| m.norm())
            .fold(1.0, f64::max)
    }
}

/// Builds the pencil of a system at its linear spreading speed.
pub fn extract_pencil(spec: &SystemSpec, speed: &SpreadingSpeedResult) -> Result<PencilData> {
    let sym = SymbolPencil::from_spec(spec);
    let centered = spec.centered();
    let orient = centered.wake_state().map(|w| DVector::from_column_slice(w));
    pencil_from_symbol(&sym, speed.c_star, speed.eta_star, orient.as_ref())
}

/// Builds the pencil of `A(λ, ν) = M(λ, ν − η, c)`.
///
/// `u0` has unit length; its sign makes `⟨u0, orient⟩ > 0` when an
/// orientation vector is given, and its largest entry positive otherwise.
pub fn pencil_from_symbol(
    sym: &SymbolPencil,
    c: f64,
    eta: f64,
    orient: Option<&DVector<f64>>,
) -> Result<PencilData> {
    let n = sym.n;
    let (a0, a01, a02) = sym.shifted(eta, c);
    let a10 = -DMatrix::<f64>::identity(n, n);
    let scale = [&a0, &a01, &a02]
        .iter()
        .map(|m| m.norm())
        .fold(1.0, f64::max);

    let (mut u0, mut e_ad, sv) = linalg::smallest_singular(&a0);
    if sv[0] > 1e-8 * scale {
        return Err(Error::Hypothesis {
            which: "pencil".into(),
            detail: format!("A0 has no kernel: smallest singular value {:.3e}", sv[0]),
        });
    }
    if n > 1 && sv[1] <= KERNEL_GAP_TOL * scale {
        return Err(Error::Hypothesis {
            which: "pencil".into(),
            detail: format!(
                "kernel of A0 is not one-dimensional: singular values {:.3e}, {:.3e}",
                sv[0], sv[1]
            ),
        });
    }
    let sign = match orient {
        Some(w) if u0.dot(w).abs() > 1e-12 * w.norm() => u0.dot(w).signum(),
        _ => {
            let imax = u0.iamax();
            u0[imax].signum()
        }
    };
    u0 *= sign;
    if e_ad.dot(&u0) < 0.0 {
        e_ad = -e_ad;
    }

    // Minimum-norm least squares solution of A⁰u1 = −A⁰¹u0; the pseudo
    // inverse discards the kernel direction, so u1 ⟂ u0.
    let rhs = -(&a01 * &u0);
    let svd = a0.clone().svd(true, true);
    let mut u1 = svd
        .solve(&rhs, 1e-10 * scale)
        .map_err(|e| Error::InvalidInput(format!("least squares for u1: {e}")))?;
    let chain_residual = (&a0 * &u1 - &rhs).norm();
    if chain_residual > 1e-8 * scale {
        return Err(Error::Hypothesis {
            which: "pencil".into(),
            detail: format!("Jordan chain absent: least squares residual {chain_residual:.3e}"),
        });
    }
    let perp = &u1 - &u0 * u0.dot(&u1);
    let colinear_distance = perp.norm();
    let case = if colinear_distance < COLINEAR_TOL {
        u1 = u0.clone();
        Case::Colinear
    } else {
        Case::Independent
    };
    let chain_residual = (&a0 * &u1 + &a01 * &u0).norm();
    let sign_product = -u0.dot(&e_ad) * (&a02 * &u0 + &a01 * &u1).dot(&e_ad);
    if sign_product >= 0.0 {
        return Err(Error::Hypothesis {
            which: "pencil".into(),
            detail: format!("sign condition violated: product = {sign_product:.6e}"),
        });
    }
    Ok(PencilData {
        n,
        c_star: c,
        eta_star: eta,
        a0,
        a10,
        a01,
        a02,
        u0,
        u1,
        e_ad,
        case,
        singular_values: sv,
        sign_product,
        chain_residual,
        colinear_distance,
    })
}

/// `S`, `Q`, the coefficient matrices of `B = SAQ` and the named blocks.
#[derive(Clone, Debug, Serialize)]
pub struct NormalForm {
    pub case: Case,
    #[serde(serialize_with = "ser::mat")]
    pub s: DMatrix<f64>,
    #[serde(serialize_with = "ser::mat")]
    pub q: DMatrix<f64>,
    /// `B⁰, B¹⁰, B⁰¹, B⁰²` identified from samples of `B`.
    #[serde(serialize_with = "ser::mat")]
    pub b0: DMatrix<f64>,
    #[serde(serialize_with = "ser::mat")]
    pub b10: DMatrix<f64>,
    #[serde(serialize_with = "ser::mat")]
    pub b01: DMatrix<f64>,
    #[serde(serialize_with = "ser::mat")]
    pub b02: DMatrix<f64>,
    /// Largest identified coefficient of a monomial outside
    /// `{1, λ, ν, ν²}`; zero up to rounding.
    pub spurious_coefficient: f64,
    /// Named blocks such as `b11_02` or `b22_00`.
    #[serde(serialize_with = "ser::mat_map")]
    pub b: BTreeMap<String, DMatrix<f64>>,
    /// Named blocks of `SQ`.
    #[serde(serialize_with = "ser::mat_map")]
    pub s_table: BTreeMap<String, DMatrix<f64>>,
    pub d_eff: f64,
    pub cond_s: f64,
    pub cond_q: f64,
}

impl NormalForm {
    /// A named scalar coefficient (the `(0, 0)` entry of its block).
    pub fn coeff(&self, name: &str) -> f64 {
        self.b
            .get(name)
            .map(|m| if m.is_empty() { 0.0 } else { m[(0, 0)] })
            .unwrap_or(0.0)
    }

    /// A named block, empty when absent.
    pub fn block(&self, name: &str) -> DMatrix<f64> {
        self.b
            .get(name)
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(0, 0))
    }

    /// A named block of `SQ`, empty when absent.
    pub fn s_block(&self, name: &str) -> DMatrix<f64> {
        self.s_table
            .get(name)
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(0, 0))
    }

    /// `B(λ, ν)` from the identified coefficients.
    pub fn eval(&self, lam: f64, nu: f64) -> DMatrix<f64> {
        &self.b0 + &self.b10 * lam + &self.b01 * nu + &self.b02 * (nu * nu)
    }

    /// Coefficients that must vanish (or equal a fixed value) in this case,
    /// with their deviation from the required value.
    pub fn sparsity_deviations(&self) -> Vec<(String, f64)> {
        let n = self.b0.nrows();
        let mut out = Vec::new();
        let mut need = |name: String, got: f64, want: f64| out.push((name, (got - want).abs()));
        need("b11_00".into(), self.b0[(0, 0)], 0.0);
        need("b11_01".into(), self.b01[(0, 0)], 0.0);
        need("b11_10".into(), self.b10[(0, 0)], -1.0);
        match self.case {
            Case::Colinear => {
                for i in 1..n {
                    need(format!("b21_00[{i}]"), self.b0[(i, 0)], 0.0);
                    need(format!("b21_01[{i}]"), self.b01[(i, 0)], 0.0);
                    need(format!("b12_00[{i}]"), self.b0[(0, i)], 0.0);
                }
            }
            Case::Independent => {
                need("b12_00".into(), self.b0[(0, 1)], 0.0);
                need("b21_00".into(), self.b0[(1, 0)], 0.0);
                need("b21_01".into(), self.b01[(1, 0)], -1.0);
                need("b22_00".into(), self.b0[(1, 1)], 1.0);
                for j in 2..n {
                    need(format!("b13_00[{j}]"), self.b0[(0, j)], 0.0);
                    need(format!("b23_00[{j}]"), self.b0[(1, j)], 0.0);
                    need(format!("b31_00[{j}]"), self.b0[(j, 0)], 0.0);
                    need(format!("b31_01[{j}]"), self.b01[(j, 0)], 0.0);
                    need(format!("b32_00[{j}]"), self.b0[(j, 1)], 0.0);
                }
            }
        }
        out.push(("higher_monomials".into(), self.spurious_coefficient));
        out
    }

    /// Largest deviation from the required sparsity pattern.
    pub fn max_sparsity_deviation(&self) -> f64 {
        self.sparsity_deviations()
            .iter()
            .map(|(_, d)| *d)
            .fold(0.0, f64::max)
    }
}

/// Index ranges of the block structure of each case.
fn blocks(case: Case, n: usize) -> Vec<std::ops::Range<usize>> {
    match case {
        Case::Colinear => vec![0..1, 1..n],
        Case::Independent => vec![0..1, 1..2, 2..n],
    }
}

fn sub(m: &DMatrix<f64>, r: &std::ops::Range<usize>, c: &std::ops::Range<usize>) -> DMatrix<f64> {
    m.view((r.start, c.start), (r.len(), c.len())).into_owned()
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.max() / sv.min()
}

/// Inverse of the Vandermonde matrix on `nodes` (rows map samples to
/// monomial coefficients).
fn vandermonde_inverse(nodes: &[f64]) -> DMatrix<f64> {
    let k = nodes.len();
    let v = DMatrix::from_fn(k, k, |i, j| nodes[i].powi(j as i32));
    v.try_inverse().expect("distinct nodes")
}

/// Identifies the coefficients `C_jk` of `B(λ, ν) = Σ C_jk λʲ νᵏ` from samples
/// on the tensor stencil `λ ∈ {−1, 0, 1}`, `ν ∈ {−2, −1, 0, 1, 2}`.
fn identify(bfun: impl Fn(f64, f64) -> DMatrix<f64>, n: usize) -> Vec<Vec<DMatrix<f64>>> {
    let ln = [-1.0, 0.0, 1.0];
    let nn = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let vl = vandermonde_inverse(&ln);
    let vn = vandermonde_inverse(&nn);
    let samples: Vec<Vec<DMatrix<f64>>> = ln
        .iter()
        .map(|&l| nn.iter().map(|&v| bfun(l, v)).collect())
        .collect();
    let mut coeffs = vec![vec![DMatrix::<f64>::zeros(n, n); nn.len()]; ln.len()];
    for (j, row) in coeffs.iter_mut().enumerate() {
        for (k, cjk) in row.iter_mut().enumerate() {
            for (p, srow) in samples.iter().enumerate() {
                for (q, smat) in srow.iter().enumerate() {
                    *cjk += smat * (vl[(j, p)] * vn[(k, q)]);
                }
            }
        }
    }
    coeffs
}

/// Constructs `S`, `Q` and the coefficient tables.
pub fn build_normal_form(p: &PencilData) -> Result<NormalForm> {
    let n = p.n;
    let c = 1.0 / p.u0.dot(&p.e_ad);
    let col = |v: &DVector<f64>| DMatrix::from_column_slice(n, 1, v.as_slice());
    let (s, q) = match p.case {
        Case::Colinear => {
            let qc = linalg::orthonormal_complement(&col(&p.u0));
            let sc = linalg::orthonormal_complement(&col(&p.e_ad));
            let mut q = DMatrix::<f64>::zeros(n, n);
            q.set_column(0, &p.u0);
            q.view_mut((0, 1), (n, n - 1)).copy_from(&qc);
            let mut s = DMatrix::<f64>::zeros(n, n);
            s.set_row(0, &(p.e_ad.transpose() * c));
            s.view_mut((1, 0), (n - 1, n)).copy_from(&sc.transpose());
            (s, q)
        }
        Case::Independent => {
            let w = &p.a0 * &p.u1;
            let wn2 = w.norm_squared();
            let s2 = &w / wn2;
            let mut q = DMatrix::<f64>::zeros(n, n);
            q.set_column(0, &p.u0);
            q.set_column(1, &p.u1);
            let mut s = DMatrix::<f64>::zeros(n, n);
            s.set_row(0, &(p.e_ad.transpose() * c));
            s.set_row(1, &s2.transpose());
            if n > 2 {
                let e = p.a0.transpose() * &w;
                let mut span_q = DMatrix::<f64>::zeros(n, 2);
                span_q.set_column(0, &e);
                span_q.set_column(1, &p.u0);
                q.view_mut((0, 2), (n, n - 2))
                    .copy_from(&linalg::orthonormal_complement(&span_q));
                let mut span_s = DMatrix::<f64>::zeros(n, 2);
                span_s.set_column(0, &p.e_ad);
                span_s.set_column(1, &w);
                s.view_mut((2, 0), (n - 2, n))
                    .copy_from(&linalg::orthonormal_complement(&span_s).transpose());
            }
            (s, q)
        }
    };
    let cond_s = condition(&s);
    let cond_q = condition(&q);
    if !(cond_s <= MAX_CONDITION && cond_q <= MAX_CONDITION) {
        return Err(Error::NonConvergence {
            stage: "normal form".into(),
            detail: format!(
                "ill-conditioned transformation: cond(S) = {cond_s:.3e}, cond(Q) = {cond_q:.3e}"
            ),
        });
    }

    let coeffs = identify(|l, v| &s * p.eval(l, v) * &q, n);
    let mut spurious: f64 = 0.0;
    for (j, row) in coeffs.iter().enumerate() {
        for (k, m) in row.iter().enumerate() {
            if !matches!((j, k), (0, 0) | (1, 0) | (0, 1) | (0, 2)) {
                spurious = spurious.max(m.amax());
            }
        }
    }
    let (b0, b10, b01, b02) = (
        coeffs[0][0].clone(),
        coeffs[1][0].clone(),
        coeffs[0][1].clone(),
        coeffs[0][2].clone(),
    );

    let idx = blocks(p.case, n);
    let sq = &s * &q;
    let mut b = BTreeMap::new();
    let mut s_table = BTreeMap::new();
    let orders = [("00", &b0), ("10", &b10), ("01", &b01), ("02", &b02)];
    for (i, ri) in idx.iter().enumerate() {
        for (j, rj) in idx.iter().enumerate() {
            if ri.is_empty() || rj.is_empty() {
                continue;
            }
            for (tag, m) in orders {
                b.insert(format!("b{}{}_{}", i + 1, j + 1, tag), sub(m, ri, rj));
            }
            s_table.insert(format!("s{}{}", i + 1, j + 1), sub(&sq, ri, rj));
        }
    }

    let d_eff = match p.case {
        Case::Colinear => b02[(0, 0)],
        Case::Independent => b02[(0, 0)] + b01[(0, 1)],
    };
    if d_eff <= 0.0 {
        return Err(Error::Hypothesis {
            which: "pencil".into(),
            detail: format!("effective diffusivity {d_eff:.6e} is not positive"),
        });
    }
    let lead = match p.case {
        Case::Colinear => idx[1].clone(),
        Case::Independent => idx[2].clone(),
    };
    if !lead.is_empty() {
        let h00 = sub(&b0, &lead, &lead);
        let sv = h00.clone().svd(false, false).singular_values;
        if sv.min() <= 1e-10 * p.scale() {
            return Err(Error::Hypothesis {
                which: "pencil".into(),
                detail: "the h-block of B0 is singular".into(),
            });
        }
    }
    Ok(NormalForm {
        case: p.case,
        s,
        q,
        b0,
        b10,
        b01,
        b02,
        spurious_coefficient: spurious,
        b,
        s_table,
        d_eff,
        cond_s,
        cond_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::solve_spreading_speed;
    use crate::systems::builtin;

    fn sys(name: &str, kv: &[(&str, f64)]) -> SystemSpec {
        let p: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        builtin(name, &p).unwrap()
    }

    fn nf_of(name: &str, kv: &[(&str, f64)]) -> (PencilData, NormalForm) {
        let s = sys(name, kv);
        let sp = solve_spreading_speed(&s, (0.05, 10.0)).unwrap();
        let p = extract_pencil(&s, &sp).unwrap();
        let nf = build_normal_form(&p).unwrap();
        (p, nf)
    }

    #[test]
    fn kpp_scalar_normal_form() {
        let (p, nf) = nf_of("kpp", &[]);
        assert_eq!(p.case, Case::Colinear);
        assert!((p.u0[0] - 1.0).abs() < 1e-14 && (p.u1[0] - 1.0).abs() < 1e-14);
        assert!((nf.s[(0, 0)] - 1.0).abs() < 1e-14 && (nf.q[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((nf.d_eff - 1.0).abs() < 1e-12);
        assert!(nf.max_sparsity_deviation() < 1e-10);
    }

    #[test]
    fn parametric_gl_is_colinear() {
        let (p, nf) = nf_of("parametric_gl", &[("beta", 1.0)]);
        assert_eq!(p.case, Case::Colinear);
        assert!((p.u0[0] - 1.0).abs() < 1e-12 && p.u0[1].abs() < 1e-12);
        // u-block of A is ν² − λ.
        assert!(p.a0[(0, 0)].abs() < 1e-12 && p.a01[(0, 0)].abs() < 1e-12);
        assert!((nf.coeff("b11_02") - 1.0).abs() < 1e-12);
        assert!((nf.d_eff - 1.0).abs() < 1e-12);
        assert!(nf.max_sparsity_deviation() < 1e-10);
    }

    #[test]
    fn hidden_diffusion_is_independent() {
        let s = sys("hidden_diffusion", &[]);
        let sym = SymbolPencil::from_spec(&s);
        let p = pencil_from_symbol(&sym, 0.0, 0.0, None).unwrap();
        assert_eq!(p.case, Case::Independent);
        assert!((&p.u0 - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-14);
        assert!((&p.u1 - DVector::from_vec(vec![0.0, 1.0])).norm() < 1e-14);
        let nf = build_normal_form(&p).unwrap();
        assert!(nf.coeff("b11_02").abs() < 1e-14);
        assert!((nf.coeff("b12_01") - 1.0).abs() < 1e-14);
        assert!((nf.d_eff - 1.0).abs() < 1e-14);
        assert!(nf.max_sparsity_deviation() < 1e-10);
    }

    #[test]
    fn round_trip_recovers_the_symbol() {
        let (p, nf) = nf_of("lotka_volterra", &[("sigma", 0.6)]);
        let si = nf.s.clone().try_inverse().unwrap();
        let qi = nf.q.clone().try_inverse().unwrap();
        for (l, v) in [(0.3, -0.7), (-1.1, 0.4), (2.0, 1.5)] {
            let a = p.eval(l, v);
            let back = &si * nf.eval(l, v) * &qi;
            assert!((back - &a).norm() < 1e-9 * a.norm());
        }
    }

    #[test]
    fn three_component_independent_pencil() {
        // A(λ, ν) with A⁰ = diag(0, −1, −2), A⁰¹ couples the first two and
        // the third component, A⁰² = diag(0.5, 1, 1).
        let sym = SymbolPencil {
            n: 3,
            a_const: DMatrix::from_row_slice(
                3,
                3,
                &[0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -2.0],
            ),
            a_nu: DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.3, 1.0, 0.0, 0.2, 0.4, 0.1, 0.0]),
            a_nu2: DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0, 1.0])),
        };
        let p = pencil_from_symbol(&sym, 0.0, 0.0, None).unwrap();
        assert_eq!(p.case, Case::Independent);
        let nf = build_normal_form(&p).unwrap();
        assert!(
            nf.max_sparsity_deviation() < 1e-10,
            "{:?}",
            nf.sparsity_deviations()
        );
        assert!((nf.d_eff - 1.56).abs() < 1e-12);
        assert_eq!(nf.block("b33_00").shape(), (1, 1));
    }
}
