//! Critical traveling front `D q'' + c_* q' + f(q) = 0` connecting the wake
//! state to the unstable state, its weak-decay asymptotics and the spectral
//! stability of the wake.
//!
//! The profile is computed for `p = e^{φ} q` with a smooth rate
//! `φ' = η_* σ((x − x0)/ℓ)`, so that `p` grows only linearly in the leading
//! edge. The right boundary condition places `(p, p')` on the affine
//! subspace `(u0 (x − x0) + u1 + a u0, u0) + E^s`, which fixes `b = 1`
//! together with the translation; `a` is an unknown of the Newton system.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dispersion::SpreadingSpeedResult;
use crate::error::{no_conv, Error, Result};
use crate::linalg::{self, Banded, Bordered, C64};
use crate::normal_form::PencilData;
use crate::systems::SystemSpec;

/// Discretization and solver settings.
#[derive(Clone, Debug, Serialize)]
pub struct FrontOptions {
    pub x_l: f64,
    pub x_r: f64,
    pub h: f64,
    /// Center `x0` of the weight and of the tail ansatz.
    pub origin: f64,
    /// Width `ℓ` of the transition of the weight rate.
    pub weight_width: f64,
    /// Newton tolerance on the max-norm of the weighted residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest accepted `‖q(x_L) − u_-‖` and `‖q(x_R)‖`.
    pub mismatch_tol: f64,
}

impl Default for FrontOptions {
    fn default() -> Self {
        FrontOptions {
            x_l: -40.0,
            x_r: 40.0,
            h: 0.05,
            origin: 0.0,
            weight_width: 1.0,
            tol: 1e-10,
            max_iter: 100,
            mismatch_tol: 1e-6,
        }
    }
}

impl FrontOptions {
    /// Default settings on a domain long enough for the slowest decay rates
    /// into the wake (`e^{ν x}`) and into the unstable state (`x e^{−η x}`).
    pub fn for_system(spec: &SystemSpec, speed: &SpreadingSpeedResult) -> Result<FrontOptions> {
        let (x_l, x_r) = suggest_domain(spec, speed)?;
        Ok(FrontOptions {
            x_l,
            x_r,
            ..FrontOptions::default()
        })
    }
}

/// Domain `[x_L, x_R]` with `e^{ν_min x_L}` and `x_R e^{−η_* x_R}` well
/// below the mismatch tolerance, and at least `[−40, 40]`.
pub fn suggest_domain(spec: &SystemSpec, speed: &SpreadingSpeedResult) -> Result<(f64, f64)> {
    let cs = spec.centered();
    let n = cs.n;
    let wake = cs
        .wake_state()
        .ok_or_else(|| Error::InvalidInput("no wake state registered".into()))?;
    let ml = first_order(
        &cs.d,
        &(DMatrix::identity(n, n) * speed.c_star),
        &cs.jf(wake),
    )?;
    let rate = linalg::eigenvalues(&linalg::to_complex(&ml))
        .iter()
        .filter(|z| z.re > 1e-9)
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    let x_l = if rate.is_finite() {
        -(40f64).max(25.0 / rate)
    } else {
        -40.0
    };
    let x_r = (40f64).max(25.0 / speed.eta_star);
    Ok((x_l.round(), x_r.round()))
}

/// Least squares fit of `p ≈ b (u0 z + u1) + a u0` on a window.
#[derive(Clone, Debug, Serialize)]
pub struct TailFit {
    pub window: (f64, f64),
    pub b: f64,
    pub a: f64,
    /// Extra decay rate of the remainder; `None` when it is at rounding level.
    pub eta_extra: Option<f64>,
    pub remainder: f64,
}

/// Discretized critical front in coordinates centered at the unstable state.
#[derive(Clone, Debug, Serialize)]
pub struct FrontProfile {
    pub n: usize,
    pub x: Vec<f64>,
    pub h: f64,
    /// `q(x_i)` relative to the unstable state.
    pub values: Vec<Vec<f64>>,
    /// `p(x_i) = e^{φ(x_i)} q(x_i)`.
    pub weighted: Vec<Vec<f64>>,
    pub c_star: f64,
    pub eta_star: f64,
    pub a: f64,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub origin: f64,
    pub weight_width: f64,
    /// Wake state relative to the unstable state.
    pub wake: Vec<f64>,
    /// Unstable state in the original coordinates.
    pub origin_shift: Vec<f64>,
    /// Max-norm of `D q'' + c q' + f(q)` on interior nodes.
    pub residual_norm: f64,
    /// Max-norm of the same residual multiplied by `e^{φ}`.
    pub weighted_residual: f64,
    /// `(‖q(x_L) − u_-‖, ‖q(x_R)‖)`.
    pub boundary_mismatch: (f64, f64),
    pub newton_iterations: usize,
    pub tail_fit: TailFit,
}

/// Smooth rate `φ` with `φ' = η σ(z/ℓ)`, `z = x − x0`.
#[derive(Clone, Copy, Debug)]
pub struct SmoothWeight {
    pub eta: f64,
    pub origin: f64,
    pub width: f64,
}

impl SmoothWeight {
    /// `(φ, φ', φ'')`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let z = (x - self.origin) / self.width;
        let softplus = if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
        let sig = if z > 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            z.exp() / (1.0 + z.exp())
        };
        (
            self.eta * self.width * softplus,
            self.eta * sig,
            self.eta * sig * (1.0 - sig) / self.width,
        )
    }
}

const D1_C: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D2_C: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D1_L1: [f64; 6] = [-3.0, -10.0, 18.0, -6.0, 1.0, 0.0];
const D2_L1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
const D1_R1: [f64; 6] = [0.0, -1.0, 6.0, -18.0, 10.0, 3.0];
const D2_R1: [f64; 6] = [1.0, -6.0, 14.0, -4.0, -15.0, 10.0];
const D1_L0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_R0: [f64; 5] = [3.0, -16.0, 36.0, -48.0, 25.0];

/// Fourth-order stencils `(first node, d1 weights, d2 weights)` at node `i`
/// of an `m`-node grid, unscaled by `h`.
pub(crate) fn stencil(i: usize, m: usize) -> (usize, &'static [f64], &'static [f64]) {
    if i == 0 {
        (0, &D1_L0, &D2_L1[..0])
    } else if i == 1 {
        (0, &D1_L1, &D2_L1)
    } else if i + 2 == m {
        (m - 6, &D1_R1, &D2_R1)
    } else if i + 1 == m {
        (m - 5, &D1_R0, &D2_R1[..0])
    } else {
        (i - 2, &D1_C, &D2_C)
    }
}

/// Nodal first and second derivatives of a grid function with the same
/// fourth-order stencils as the solver (second derivative at the end nodes
/// from the adjacent off-center stencil shifted by one node).
pub(crate) fn nodal_derivatives(vals: &[Vec<f64>], h: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = vals.len();
    let n = vals[0].len();
    let mut d1 = vec![vec![0.0; n]; m];
    let mut d2 = vec![vec![0.0; n]; m];
    const D2_E0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
    for i in 0..m {
        let (s, w1, w2) = stencil(i, m);
        let w2: &[f64] = if i == 0 {
            &D2_E0
        } else if i + 1 == m {
            &D2_E0
        } else {
            w2
        };
        for k in 0..n {
            d1[i][k] = w1
                .iter()
                .enumerate()
                .map(|(j, w)| w * vals[s + j][k])
                .sum::<f64>()
                / (12.0 * h);
            d2[i][k] = if i == 0 {
                w2.iter()
                    .enumerate()
                    .map(|(j, w)| w * vals[j][k])
                    .sum::<f64>()
                    / (12.0 * h * h)
            } else if i + 1 == m {
                w2.iter()
                    .enumerate()
                    .map(|(j, w)| w * vals[m - 1 - j][k])
                    .sum::<f64>()
                    / (12.0 * h * h)
            } else {
                w2.iter()
                    .enumerate()
                    .map(|(j, w)| w * vals[s + j][k])
                    .sum::<f64>()
                    / (12.0 * h * h)
            };
        }
    }
    (d1, d2)
}

/// Real orthonormal basis of the generalized invariant subspace of `m` for
/// eigenvalues selected by `pick`, computed as the range of the product of
/// `m − ν` over the eigenvalues that are not selected.
pub(crate) fn invariant_basis(m: &DMatrix<f64>, pick: impl Fn(C64) -> bool) -> DMatrix<f64> {
    let dim = m.nrows();
    let cm = linalg::to_complex(m);
    let vals = linalg::eigenvalues(&cm);
    let count = vals.iter().filter(|v| pick(**v)).count();
    if count == 0 {
        return DMatrix::zeros(dim, 0);
    }
    let scale = m.norm().max(1.0);
    let mut prod = DMatrix::<C64>::identity(dim, dim);
    for v in vals.iter().filter(|v| !pick(**v)) {
        prod = (&cm - DMatrix::<C64>::identity(dim, dim) * *v) * prod / C64::new(scale, 0.0);
    }
    let re = prod.map(|z| z.re);
    let svd = re.svd(true, false);
    let u = svd.u.expect("u requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let keep: Vec<DVector<f64>> = order
        .into_iter()
        .take(count)
        .map(|i| u.column(i).into_owned())
        .collect();
    DMatrix::from_columns(&keep)
}

/// First-order matrix of `D w'' + B w' + K w = 0`.
fn first_order(d: &DMatrix<f64>, b: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = d.nrows();
    let dinv = d
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("front solver needs invertible D".into()))?;
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    m.view_mut((0, n), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    m.view_mut((n, 0), (n, n)).copy_from(&(-(&dinv * k)));
    m.view_mut((n, n), (n, n)).copy_from(&(-(&dinv * b)));
    Ok(m)
}

/// Rows annihilating the invariant subspace selected by `pick`.
fn annihilator(m: &DMatrix<f64>, pick: impl Fn(C64) -> bool) -> DMatrix<f64> {
    linalg::orthonormal_complement(&invariant_basis(m, pick)).transpose()
}

const GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_9, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// `f(q)` for a system centered at a zero of `f`. Near the origin it is
/// evaluated as `Jf(0) q + ∫₀¹ (Jf(sq) − Jf(0)) q ds` so that the absolute
/// error scales with `|q|`, which keeps `e^{φ} f(e^{−φ} p)` accurate in the
/// leading edge.
pub(crate) fn reaction_centered(spec: &SystemSpec, q: &[f64]) -> DVector<f64> {
    if q.iter().any(|v| v.abs() >= 1e-2) {
        return spec.f(q);
    }
    let qv = DVector::from_column_slice(q);
    let j0 = spec.jf(&vec![0.0; q.len()]);
    let mut out = &j0 * &qv;
    for (s, w) in GAUSS4 {
        let qs: Vec<f64> = q.iter().map(|v| v * s).collect();
        out += (spec.jf(&qs) - &j0) * &qv * w;
    }
    out
}

struct Problem<'a> {
    spec: &'a SystemSpec,
    n: usize,
    m: usize,
    h: f64,
    c: f64,
    x: Vec<f64>,
    w: SmoothWeight,
    u0: DVector<f64>,
    u1: DVector<f64>,
    wake: DVector<f64>,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.n * self.m
    }

    fn node(&self, p: &[f64], i: usize) -> DVector<f64> {
        DVector::from_column_slice(&p[i * self.n..(i + 1) * self.n])
    }

    fn deriv(&self, p: &[f64], i: usize) -> DVector<f64> {
        let (s, w1, _) = stencil(i, self.m);
        let mut v = DVector::zeros(self.n);
        for (j, wj) in w1.iter().enumerate() {
            v += self.node(p, s + j) * *wj;
        }
        v / (12.0 * self.h)
    }

    /// Interior residual at node `i` in the weighted variable.
    fn interior(&self, p: &[f64], i: usize) -> DVector<f64> {
        let (s, w1, w2) = stencil(i, self.m);
        let d = &self.spec.d;
        let (phi, dphi, ddphi) = self.w.eval(self.x[i]);
        let mut p1 = DVector::zeros(self.n);
        let mut p2 = DVector::zeros(self.n);
        for j in 0..w1.len() {
            let v = self.node(p, s + j);
            p1 += &v * w1[j];
            p2 += &v * w2[j];
        }
        p1 /= 12.0 * self.h;
        p2 /= 12.0 * self.h * self.h;
        let pi = self.node(p, i);
        let q: Vec<f64> = pi.iter().map(|v| v * (-phi).exp()).collect();
        let fq = reaction_centered(self.spec, &q) * phi.exp();
        d * p2 + &p1 * self.c - d * &p1 * (2.0 * dphi) + d * &pi * (dphi * dphi - ddphi)
            - &pi * (self.c * dphi)
            + fq
    }

    fn left_bc(&self, p: &[f64]) -> DVector<f64> {
        let (phi, dphi, _) = self.w.eval(self.x[0]);
        let e = (-phi).exp();
        let p0 = self.node(p, 0);
        let q = &p0 * e - &self.wake;
        let dq = (self.deriv(p, 0) - &p0 * dphi) * e;
        let mut y = DVector::zeros(2 * self.n);
        y.rows_mut(0, self.n).copy_from(&q);
        y.rows_mut(self.n, self.n).copy_from(&dq);
        &self.left * y
    }

    fn right_bc(&self, p: &[f64], a: f64) -> DVector<f64> {
        let i = self.m - 1;
        let z = self.x[i] - self.w.origin;
        let target = &self.u0 * (z + a) + &self.u1;
        let mut y = DVector::zeros(2 * self.n);
        y.rows_mut(0, self.n).copy_from(&(self.node(p, i) - target));
        y.rows_mut(self.n, self.n)
            .copy_from(&(self.deriv(p, i) - &self.u0));
        &self.right * y
    }

    fn residual(&self, p: &[f64], a: f64) -> (Vec<f64>, f64) {
        let n = self.n;
        let mut r = vec![0.0; self.dim()];
        r[..n].copy_from_slice(self.left_bc(p).as_slice());
        for i in 1..self.m - 1 {
            r[i * n..(i + 1) * n].copy_from_slice(self.interior(p, i).as_slice());
        }
        let rb = self.right_bc(p, a);
        r[(self.m - 1) * n..].copy_from_slice(&rb.as_slice()[..n]);
        (r, rb[n])
    }

    fn jacobian(&self, p: &[f64]) -> Bordered<f64> {
        let n = self.n;
        let m = self.m;
        let h = self.h;
        let d = &self.spec.d;
        let mut a = Banded::zeros(self.dim(), 6 * n, 6 * n);
        // left boundary rows
        {
            let (phi, dphi, _) = self.w.eval(self.x[0]);
            let e = (-phi).exp();
            let (s, w1, _) = stencil(0, m);
            for r in 0..n {
                for (j, wj) in w1.iter().enumerate() {
                    for k in 0..n {
                        let mut v = self.left[(r, n + k)] * wj / (12.0 * h) * e;
                        if s + j == 0 {
                            v += self.left[(r, k)] * e - self.left[(r, n + k)] * dphi * e;
                        }
                        a.add(r, (s + j) * n + k, v);
                    }
                }
            }
        }
        for i in 1..m - 1 {
            let (s, w1, w2) = stencil(i, m);
            let (phi, dphi, ddphi) = self.w.eval(self.x[i]);
            let q: Vec<f64> = self.node(p, i).iter().map(|v| v * (-phi).exp()).collect();
            let jf = self.spec.jf(&q);
            for r in 0..n {
                let row = i * n + r;
                for j in 0..w1.len() {
                    let col0 = (s + j) * n;
                    let c1 = w1[j] / (12.0 * h);
                    let c2 = w2[j] / (12.0 * h * h);
                    for k in 0..n {
                        let delta = if r == k { 1.0 } else { 0.0 };
                        let v = d[(r, k)] * c2 + (self.c * delta - 2.0 * dphi * d[(r, k)]) * c1;
                        a.add(row, col0 + k, v);
                    }
                }
                for k in 0..n {
                    let delta = if r == k { 1.0 } else { 0.0 };
                    let v = d[(r, k)] * (dphi * dphi - ddphi) - self.c * dphi * delta + jf[(r, k)];
                    a.add(row, i * n + k, v);
                }
            }
        }
        // right boundary rows: first n in the band, the last one in the border
        let i = m - 1;
        let (s, w1, _) = stencil(i, m);
        let mut right_rows = vec![vec![0.0; self.dim()]; n + 1];
        for (r, rr) in right_rows.iter_mut().enumerate() {
            for (j, wj) in w1.iter().enumerate() {
                for k in 0..n {
                    let mut v = self.right[(r, n + k)] * wj / (12.0 * h);
                    if s + j == i {
                        v += self.right[(r, k)];
                    }
                    rr[(s + j) * n + k] += v;
                }
            }
        }
        for r in 0..n {
            for (col, v) in right_rows[r].iter().enumerate() {
                if *v != 0.0 {
                    a.add(i * n + r, col, *v);
                }
            }
        }
        let mut bm = Bordered::new(a, 1);
        let da: Vec<f64> = (0..=n)
            .map(|r| -(0..n).map(|k| self.right[(r, k)] * self.u0[k]).sum::<f64>())
            .collect();
        for r in 0..n {
            bm.b[0][i * n + r] = da[r];
        }
        bm.c[0] = right_rows[n].clone();
        bm.e[0][0] = da[n];
        bm
    }
}

fn smoothstep(z: f64) -> f64 {
    0.5 * (1.0 + z.tanh())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves for the critical front on `[x_L, x_R]`.
pub fn solve_front(
    spec: &SystemSpec,
    speed: &SpreadingSpeedResult,
    pencil: &PencilData,
    opts: &FrontOptions,
) -> Result<FrontProfile> {
    if spec.symbol_only {
        return Err(Error::InvalidInput(format!(
            "system '{}' is restricted to symbol-level analyses",
            spec.name
        )));
    }
    let cs = spec.centered();
    let n = cs.n;
    let wake = DVector::from_column_slice(
        cs.wake_state()
            .ok_or_else(|| Error::InvalidInput("no wake state registered".into()))?,
    );
    if !(opts.h > 0.0 && opts.x_r > opts.x_l) {
        return Err(Error::InvalidInput(
            "front domain or spacing invalid".into(),
        ));
    }
    let m = ((opts.x_r - opts.x_l) / opts.h).round() as usize + 1;
    if m < 12 {
        return Err(Error::InvalidInput(
            "front grid needs at least 12 nodes".into(),
        ));
    }
    let h = (opts.x_r - opts.x_l) / (m - 1) as f64;
    let x: Vec<f64> = (0..m).map(|i| opts.x_l + i as f64 * h).collect();
    let c = speed.c_star;
    let eta = speed.eta_star;

    let jm = cs.jf(wake.as_slice());
    let cid = DMatrix::<f64>::identity(n, n) * c;
    let ml = first_order(&cs.d, &cid, &jm)?;
    let scale_l = ml.norm();
    let left = annihilator(&ml, |z| z.re > 1e-6 * scale_l);
    let mr = first_order(&pencil.a02, &pencil.a01, &pencil.a0)?;
    let scale_r = mr.norm();
    let mut right = annihilator(&mr, |z| z.re < -1e-6 * scale_r);
    if right.nrows() == n + 1 {
        // rotate so that only the last row (kept in the border) involves `a`
        let da = right.columns(0, n) * &pencil.u0;
        let dn = da.norm();
        if dn > 0.0 {
            let mut rot = linalg::orthonormal_complement(&DMatrix::from_columns(&[da.clone()]));
            rot = DMatrix::from_fn(
                n + 1,
                n + 1,
                |r, c| if c < n { rot[(r, c)] } else { da[r] / dn },
            );
            right = rot.transpose() * right;
        }
    }
    if left.nrows() != n || right.nrows() != n + 1 {
        return Err(Error::Hypothesis {
            which: "2".into(),
            detail: format!(
                "asymptotic boundary conditions have {} + {} rows, expected {} + {}",
                left.nrows(),
                right.nrows(),
                n,
                n + 1
            ),
        });
    }
    let prob = Problem {
        spec: &cs,
        n,
        m,
        h,
        c,
        x: x.clone(),
        w: SmoothWeight {
            eta,
            origin: opts.origin,
            width: opts.weight_width,
        },
        u0: pencil.u0.clone(),
        u1: pencil.u1.clone(),
        wake: wake.clone(),
        left,
        right,
    };

    let mut last_err = String::new();
    for &(zc, a0) in &[
        (0.0, 0.0),
        (2.0, 0.0),
        (-2.0, 0.0),
        (4.0, -2.0),
        (-4.0, 2.0),
    ] {
        match newton(&prob, zc, a0, opts) {
            Ok((p, a, iters, wres)) => {
                return finish(&prob, &cs, p, a, iters, wres, speed, opts);
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(no_conv(
        "front",
        format!("Newton failed from all initial guesses: {last_err}"),
    ))
}

fn newton(
    prob: &Problem,
    zc: f64,
    a0: f64,
    opts: &FrontOptions,
) -> Result<(Vec<f64>, f64, usize, f64)> {
    let n = prob.n;
    let m = prob.m;
    let mut p = vec![0.0; n * m];
    for i in 0..m {
        let z = prob.x[i] - prob.w.origin;
        let (phi, _, _) = prob.w.eval(prob.x[i]);
        let chi = smoothstep(z - zc);
        let tail = &prob.u0 * (z + 1.0 + a0) + &prob.u1 - &prob.u0;
        for k in 0..n {
            let lead = if phi < 600.0 {
                (1.0 - chi) * phi.exp() * prob.wake[k]
            } else {
                0.0
            };
            p[i * n + k] = lead + chi * tail[k];
        }
    }
    let mut a = a0;
    let norm = |r: &(Vec<f64>, f64)| max_abs(&r.0).max(r.1.abs());
    let mut res = prob.residual(&p, a);
    let mut rn = norm(&res);
    for iter in 0..opts.max_iter {
        if !rn.is_finite() {
            return Err(no_conv("front", "residual is not finite"));
        }
        if rn < opts.tol {
            return Ok((p, a, iter, rn));
        }
        let mut jac = prob.jacobian(&p);
        jac.factor()
            .map_err(|e| no_conv("front", format!("singular Jacobian at pivot {}", e.0)))?;
        let (dp, da) = jac
            .solve(&res.0, &[res.1])
            .map_err(|e| no_conv("front", format!("singular Schur complement {}", e.0)))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = p.iter().zip(&dp).map(|(x, d)| x - t * d).collect();
            let ta = a - t * da[0];
            let tr = prob.residual(&trial, ta);
            let tn = norm(&tr);
            if tn.is_finite() && (tn < (1.0 - 1e-4 * t) * rn || (t == 1.0 && tn < 1e3 * opts.tol)) {
                p = trial;
                a = ta;
                res = tr;
                rn = tn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if rn < 1e3 * opts.tol {
                return Ok((p, a, iter, rn));
            }
            return Err(no_conv(
                "front",
                format!("line search stalled at residual {rn:.3e}"),
            ));
        }
    }
    if rn < opts.tol {
        Ok((p, a, opts.max_iter, rn))
    } else {
        Err(no_conv(
            "front",
            format!(
                "no convergence in {} Newton steps (residual {rn:.3e})",
                opts.max_iter
            ),
        ))
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prob: &Problem,
    cs: &SystemSpec,
    p: Vec<f64>,
    a: f64,
    iters: usize,
    wres: f64,
    speed: &SpreadingSpeedResult,
    opts: &FrontOptions,
) -> Result<FrontProfile> {
    let n = prob.n;
    let m = prob.m;
    let weighted: Vec<Vec<f64>> = (0..m).map(|i| p[i * n..(i + 1) * n].to_vec()).collect();
    let values: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let (phi, _, _) = prob.w.eval(prob.x[i]);
            weighted[i].iter().map(|v| v * (-phi).exp()).collect()
        })
        .collect();
    let mut qres: f64 = 0.0;
    for i in 1..m - 1 {
        let (phi, _, _) = prob.w.eval(prob.x[i]);
        let r = prob.interior(&p, i);
        qres = qres.max(r.amax() * (-phi).exp());
    }
    let left_mis = values[0]
        .iter()
        .zip(prob.wake.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let right_mis = max_abs(&values[m - 1]);
    if left_mis > opts.mismatch_tol || right_mis > opts.mismatch_tol {
        let (sl, sr) = suggest_domain(cs, speed).unwrap_or((2.0 * prob.x[0], 2.0 * prob.x[m - 1]));
        return Err(no_conv(
            "front",
            format!(
                "boundary mismatch ({left_mis:.2e}, {right_mis:.2e}) exceeds {:.1e}; enlarge the domain, e.g. to [{}, {}]",
                opts.mismatch_tol,
                sl.min(2.0 * prob.x[0]),
                sr.max(2.0 * prob.x[m - 1])
            ),
        ));
    }
    let mut front = FrontProfile {
        n,
        x: prob.x.clone(),
        h: prob.h,
        values,
        weighted,
        c_star: speed.c_star,
        eta_star: speed.eta_star,
        a,
        u0: prob.u0.iter().copied().collect(),
        u1: prob.u1.iter().copied().collect(),
        origin: opts.origin,
        weight_width: opts.weight_width,
        wake: prob.wake.iter().copied().collect(),
        origin_shift: cs.origin_shift.clone(),
        residual_norm: qres,
        weighted_residual: wres,
        boundary_mismatch: (left_mis, right_mis),
        newton_iterations: iters,
        tail_fit: TailFit {
            window: (0.0, 0.0),
            b: 0.0,
            a: 0.0,
            eta_extra: None,
            remainder: 0.0,
        },
    };
    front.tail_fit = fit_tail(&front, None);
    if front.tail_fit.b.abs() < 1e-6 {
        return Err(Error::Hypothesis {
            which: "2".into(),
            detail: format!(
                "fitted linear-growth coefficient b = {:.2e}; the front may be pushed",
                front.tail_fit.b
            ),
        });
    }
    Ok(front)
}

/// Fits `e^{η_*(x − x0)} q(x) ≈ b (u0 (x − x0) + u1) + a u0` on a window;
/// the default window is `[x_R − W, x_R − W/2]` with
/// `W = min(20/η_*, (x_R − x_L)/4)`.
pub fn fit_tail(front: &FrontProfile, window: Option<(f64, f64)>) -> TailFit {
    let x_l = front.x[0];
    let x_r = *front.x.last().unwrap();
    let win = window.unwrap_or_else(|| {
        let w = (20.0 / front.eta_star).min((x_r - x_l) / 4.0);
        (x_r - w, x_r - w / 2.0)
    });
    let idx: Vec<usize> = (0..front.x.len())
        .filter(|&i| front.x[i] >= win.0 && front.x[i] <= win.1)
        .collect();
    let n = front.n;
    let u0 = &front.u0;
    let u1 = &front.u1;
    let rows = idx.len() * n;
    let mut mat = DMatrix::<f64>::zeros(rows, 2);
    let mut rhs = DVector::<f64>::zeros(rows);
    let scaled = |i: usize| -> Vec<f64> {
        let z = front.x[i] - front.origin;
        front.values[i]
            .iter()
            .map(|v| v * (front.eta_star * z).exp())
            .collect()
    };
    for (r, &i) in idx.iter().enumerate() {
        let z = front.x[i] - front.origin;
        let pv = scaled(i);
        for k in 0..n {
            mat[(r * n + k, 0)] = u0[k] * z + u1[k];
            mat[(r * n + k, 1)] = u0[k];
            rhs[r * n + k] = pv[k];
        }
    }
    let sol = mat
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .unwrap_or_else(|_| DVector::zeros(2));
    let (b, a) = (sol[0], sol[1]);
    // remainder decay in the original variable
    let pts: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| {
            let z = front.x[i] - front.origin;
            let pv = scaled(i);
            let r = (0..n)
                .map(|k| (pv[k] - b * (u0[k] * z + u1[k]) - a * u0[k]).abs())
                .fold(0.0, f64::max);
            (front.x[i], r)
        })
        .collect();
    let remainder = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let scale = pts
        .iter()
        .map(|&(x, _)| (x - front.origin).abs() + 1.0)
        .fold(1.0, f64::max);
    let good: Vec<(f64, f64)> = pts
        .iter()
        .filter(|p| p.1 > 1e-11 * scale)
        .map(|&(x, r)| (x, r.ln()))
        .collect();
    let eta_extra = if good.len() >= pts.len() / 2 && good.len() >= 3 {
        let k = good.len() as f64;
        let sx: f64 = good.iter().map(|p| p.0).sum();
        let sy: f64 = good.iter().map(|p| p.1).sum();
        let sxx: f64 = good.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = good.iter().map(|p| p.0 * p.1).sum();
        Some(-(k * sxy - sx * sy) / (k * sxx - sx * sx))
    } else {
        None
    };
    TailFit {
        window: win,
        b,
        a,
        eta_extra,
        remainder,
    }
}

impl FrontProfile {
    /// `(q', q'')` at every node, consistent with the solver's stencils.
    pub fn derivatives(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (p1, p2) = nodal_derivatives(&self.weighted, self.h);
        let w = SmoothWeight {
            eta: self.eta_star,
            origin: self.origin,
            width: self.weight_width,
        };
        let mut d1 = Vec::with_capacity(self.x.len());
        let mut d2 = Vec::with_capacity(self.x.len());
        for (i, &xi) in self.x.iter().enumerate() {
            let (phi, dphi, ddphi) = w.eval(xi);
            let e = (-phi).exp();
            let p = &self.weighted[i];
            d1.push((0..self.n).map(|k| e * (p1[i][k] - dphi * p[k])).collect());
            d2.push(
                (0..self.n)
                    .map(|k| e * (p2[i][k] - 2.0 * dphi * p1[i][k] + (dphi * dphi - ddphi) * p[k]))
                    .collect(),
            );
        }
        (d1, d2)
    }

    /// `q(x)` by local quintic interpolation of the weighted profile;
    /// the wake state to the left of the grid and the tail ansatz to the right.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let m = self.x.len();
        let w = SmoothWeight {
            eta: self.eta_star,
            origin: self.origin,
            width: self.weight_width,
        };
        if x < self.x[0] {
            return self.wake.clone();
        }
        if x > self.x[m - 1] {
            let z = x - self.origin;
            return (0..self.n)
                .map(|k| (self.u0[k] * (z + self.a) + self.u1[k]) * (-self.eta_star * z).exp())
                .collect();
        }
        let t = (x - self.x[0]) / self.h;
        let i0 = (t.floor() as isize - 2).clamp(0, m as isize - 6) as usize;
        let mut out = vec![0.0; self.n];
        for j in 0..6 {
            let mut l = 1.0;
            for k in 0..6 {
                if k != j {
                    l *= (x - self.x[i0 + k]) / (self.x[i0 + j] - self.x[i0 + k]);
                }
            }
            for (o, v) in out.iter_mut().zip(&self.weighted[i0 + j]) {
                *o += l * v;
            }
        }
        let (phi, _, _) = w.eval(x);
        out.iter().map(|v| v * (-phi).exp()).collect()
    }

    /// Values in the original coordinates of the system.
    pub fn natural_values(&self) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&self.origin_shift)
                    .map(|(a, b)| a + b)
                    .collect()
            })
            .collect()
    }

    /// CSV with columns `x, q1, …, qn` in the original coordinates.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x");
        for k in 1..=self.n {
            let _ = write!(s, ",q{k}");
        }
        s.push('\n');
        for (x, v) in self.x.iter().zip(self.natural_values()) {
            let _ = write!(s, "{x:.17e}");
            for c in v {
                let _ = write!(s, ",{c:.17e}");
            }
            s.push('\n');
        }
        s
    }

    /// Metadata without the profile arrays.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "domain": [self.x[0], self.x[self.x.len() - 1]],
            "h": self.h,
            "c_star": self.c_star,
            "eta_star": self.eta_star,
            "a": self.a,
            "u0": self.u0,
            "u1": self.u1,
            "origin": self.origin,
            "residual_norm": self.residual_norm,
            "weighted_residual": self.weighted_residual,
            "boundary_mismatch": [self.boundary_mismatch.0, self.boundary_mismatch.1],
            "newton_iterations": self.newton_iterations,
            "tail_fit": self.tail_fit,
        })
    }
}

/// Spectral stability of a homogeneous state in the frame moving with `c`.
#[derive(Clone, Debug, Serialize)]
pub struct StateStability {
    pub stable: bool,
    /// `−max Re σ` over the sampled `k`.
    pub margin: f64,
    /// `k` attaining the maximum real part.
    pub witness_k: f64,
    pub k_max: f64,
    pub samples: usize,
}

/// Default margin required of the wake spectrum.
pub const DELTA_WAKE: f64 = 1e-6;

/// Checks `max Re σ(−D k² + i c k + Jf(u)) < −δ` on a symmetric `k`-grid.
pub fn check_state_stability(
    spec: &SystemSpec,
    state: &[f64],
    c: f64,
    delta: f64,
) -> StateStability {
    let n = spec.n;
    let j = spec.jf(state);
    let dmin = spec.min_diffusion_eigenvalue().max(1e-12);
    let k_max = 10.0 * (j.norm() / dmin).max(1.0).sqrt();
    let half = 1000;
    let mut ks: Vec<f64> = (-half..=half)
        .map(|i| k_max * i as f64 / half as f64)
        .collect();
    for e in 0..=40 {
        let k = 10f64.powf(-4.0 + 0.1 * e as f64);
        ks.push(k);
        ks.push(-k);
    }
    let mut worst = (f64::NEG_INFINITY, 0.0);
    for &k in &ks {
        let m = DMatrix::from_fn(n, n, |r, s| {
            let delta_rs = if r == s { 1.0 } else { 0.0 };
            C64::new(-spec.d[(r, s)] * k * k + j[(r, s)], c * k * delta_rs)
        });
        let top = linalg::eigenvalues(&m)
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if top > worst.0 {
            worst = (top, k);
        }
    }
    StateStability {
        stable: worst.0 < -delta,
        margin: -worst.0,
        witness_k: worst.1,
        k_max,
        samples: ks.len(),
    }
}

/// Stability of the wake state at the linear spreading speed.
pub fn check_wake_stability(
    spec: &SystemSpec,
    speed: &SpreadingSpeedResult,
) -> Result<StateStability> {
    let wake = spec
        .wake_state()
        .ok_or_else(|| Error::InvalidInput("no wake state registered".into()))?;
    Ok(check_state_stability(spec, wake, speed.c_star, DELTA_WAKE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::solve_spreading_speed;
    use crate::normal_form::extract_pencil;
    use crate::systems::builtin;
    use std::collections::BTreeMap;

    fn sys(name: &str, kv: &[(&str, f64)]) -> SystemSpec {
        let p: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        builtin(name, &p).unwrap()
    }

    fn front_of(s: &SystemSpec, opts: &FrontOptions) -> FrontProfile {
        let sp = solve_spreading_speed(s, (0.05, 10.0)).unwrap();
        let pen = extract_pencil(s, &sp).unwrap();
        solve_front(s, &sp, &pen, opts).unwrap()
    }

    #[test]
    fn smooth_weight_limits() {
        let w = SmoothWeight {
            eta: 1.5,
            origin: 0.0,
            width: 1.0,
        };
        let (phi, dphi, _) = w.eval(50.0);
        assert!((phi - 75.0).abs() < 1e-12 && (dphi - 1.5).abs() < 1e-15);
        let (phi, dphi, _) = w.eval(-50.0);
        assert!(phi < 1e-20 && dphi < 1e-20);
    }

    #[test]
    fn stencils_are_exact_on_quartics() {
        let h = 0.1;
        let vals: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64 * h).powi(4)]).collect();
        let (d1, d2) = nodal_derivatives(&vals, h);
        for i in 0..12 {
            let x = i as f64 * h;
            assert!((d1[i][0] - 4.0 * x.powi(3)).abs() < 1e-10, "d1 at {i}");
            assert!((d2[i][0] - 12.0 * x * x).abs() < 1e-8, "d2 at {i}");
        }
    }

    #[test]
    fn kpp_front() {
        let f = front_of(&sys("kpp", &[]), &FrontOptions::default());
        assert!(f.residual_norm < 1e-8, "{}", f.residual_norm);
        assert!(f.boundary_mismatch.0 < 1e-6 && f.boundary_mismatch.1 < 1e-6);
        assert!(f.a.is_finite());
        for w in f.values.windows(2) {
            assert!(w[1][0] <= w[0][0] + 1e-12);
        }
        assert!((f.tail_fit.b - 1.0).abs() < 1e-6 && (f.tail_fit.a - f.a).abs() < 1e-5);
    }

    #[test]
    fn parametric_gl_front_stays_real() {
        let f = front_of(
            &sys("parametric_gl", &[("beta", 1.0)]),
            &FrontOptions::default(),
        );
        assert!(f.residual_norm < 1e-8);
        assert!((f.values[0][0] - 2f64.sqrt()).abs() < 1e-6);
        assert!(f.values.iter().all(|v| v[1].abs() < 1e-12));
    }

    #[test]
    fn transcritical_theta_zero_has_no_v_component() {
        let f = front_of(
            &sys("transcritical", &[("theta", 0.0)]),
            &FrontOptions::default(),
        );
        assert!(f.residual_norm < 1e-8);
        assert!(f.values.iter().all(|v| v[1].abs() < 1e-12));
    }

    #[test]
    fn wake_stability_examples() {
        let s = sys("lotka_volterra", &[]);
        let sp = solve_spreading_speed(&s, (0.05, 10.0)).unwrap();
        assert!(check_wake_stability(&s, &sp).unwrap().stable);
        let origin = check_state_stability(&s, s.unstable_state().unwrap(), sp.c_star, DELTA_WAKE);
        assert!(!origin.stable && origin.witness_k == 0.0);
    }
}
