//! Point spectrum and zero modes of the linearization about the critical
//! front in the exponentially weighted frame `L g = ω A(ω⁻¹ g)`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::front::{stencil, FrontProfile};
use crate::linalg::{self, Banded, C64};
use crate::systems::SystemSpec;

/// Quintic polynomial on `[−1, 1]` matching value, first and second
/// derivative at both ends; coefficients in powers of `x`.
fn quintic_blend(left: [f64; 3], right: [f64; 3]) -> [f64; 6] {
    let row = |x: f64, d: usize| -> Vec<f64> {
        (0..6)
            .map(|k| match d {
                0 => x.powi(k as i32),
                1 if k >= 1 => k as f64 * x.powi(k as i32 - 1),
                2 if k >= 2 => (k * (k - 1)) as f64 * x.powi(k as i32 - 2),
                _ => 0.0,
            })
            .collect()
    };
    let mut m = DMatrix::<f64>::zeros(6, 6);
    let mut rhs = DVector::<f64>::zeros(6);
    for d in 0..3 {
        m.row_mut(d).copy_from_slice(&row(-1.0, d));
        rhs[d] = left[d];
        m.row_mut(3 + d).copy_from_slice(&row(1.0, d));
        rhs[3 + d] = right[d];
    }
    let c = m.lu().solve(&rhs).expect("Hermite interpolation is unisolvent");
    [c[0], c[1], c[2], c[3], c[4], c[5]]
}

fn poly3(c: &[f64; 6], x: f64) -> (f64, f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    let mut s = 0.0;
    for k in (0..6).rev() {
        v = v * x + c[k];
        if k >= 1 {
            d = d * x + k as f64 * c[k];
        }
        if k >= 2 {
            s = s * x + (k * (k - 1)) as f64 * c[k];
        }
    }
    (v, d, s)
}

/// Smooth exponential weight `ω` and algebraic weight `ρ`.
#[derive(Clone, Debug, Serialize)]
pub struct WeightSpec {
    pub eta: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    omega_blend: [f64; 6],
    rho_blend: [f64; 6],
}

impl WeightSpec {
    /// `ω = 1` for `x ≤ −1`, `ω = e^{ηx}` for `x ≥ 1`; `ρ = |x|^{r−}` for
    /// `x ≤ −1`, `ρ = x^{r+}` for `x ≥ 1`.
    pub fn new(eta: f64, r_minus: f64, r_plus: f64) -> Result<WeightSpec> {
        if !(eta.is_finite() && r_minus.is_finite() && r_plus.is_finite()) {
            return Err(Error::InvalidInput("weight parameters must be finite".into()));
        }
        let e = eta.exp();
        let omega_blend = quintic_blend([1.0, 0.0, 0.0], [e, eta * e, eta * eta * e]);
        let rho_blend = quintic_blend(
            [1.0, -r_minus, r_minus * (r_minus - 1.0)],
            [1.0, r_plus, r_plus * (r_plus - 1.0)],
        );
        let w = WeightSpec { eta, r_minus, r_plus, omega_blend, rho_blend };
        for i in 0..=200 {
            let x = -1.0 + i as f64 / 100.0;
            if w.omega(x) <= 0.0 || w.rho(x) <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight blend is not positive at x = {x} for eta = {eta}, r = ({r_minus}, {r_plus})"
                )));
            }
        }
        Ok(w)
    }

    /// Exponential weight only.
    pub fn exponential(eta: f64) -> Result<WeightSpec> {
        WeightSpec::new(eta, 0.0, 0.0)
    }

    pub fn omega(&self, x: f64) -> f64 {
        self.omega_derivs(x).0
    }

    /// `(ω, ω', ω'')`.
    pub fn omega_derivs(&self, x: f64) -> (f64, f64, f64) {
        if x <= -1.0 {
            (1.0, 0.0, 0.0)
        } else if x >= 1.0 {
            let e = (self.eta * x).exp();
            (e, self.eta * e, self.eta * self.eta * e)
        } else {
            poly3(&self.omega_blend, x)
        }
    }

    /// `log ω`, finite for all `x`.
    pub fn log_omega(&self, x: f64) -> f64 {
        if x >= 1.0 {
            self.eta * x
        } else {
            self.omega(x).ln()
        }
    }

    /// Logarithmic derivative `ω'/ω` and its derivative.
    pub fn rate(&self, x: f64) -> (f64, f64) {
        if x <= -1.0 {
            (0.0, 0.0)
        } else if x >= 1.0 {
            (self.eta, 0.0)
        } else {
            let (v, d, s) = poly3(&self.omega_blend, x);
            let r = d / v;
            (r, s / v - r * r)
        }
    }

    pub fn rho(&self, x: f64) -> f64 {
        if x <= -1.0 {
            (-x).powf(self.r_minus)
        } else if x >= 1.0 {
            x.powf(self.r_plus)
        } else {
            poly3(&self.rho_blend, x).0
        }
    }
}

/// Boundary closure of the discretized operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Closure {
    /// Zero values at both ends.
    Dirichlet,
    /// Zero value at the left end, zero derivative at the right end.
    Bounded,
}

/// Constant-coefficient operator `D ∂² + B ∂ + K`.
#[derive(Clone, Debug, Serialize)]
pub struct LimitOperator {
    #[serde(serialize_with = "linalg::ser::mat")]
    pub d: DMatrix<f64>,
    #[serde(serialize_with = "linalg::ser::mat")]
    pub b: DMatrix<f64>,
    #[serde(serialize_with = "linalg::ser::mat")]
    pub k: DMatrix<f64>,
}

impl LimitOperator {
    /// Eigenvalues of the symbol `−k² D + ik B + K`.
    pub fn symbol_eigenvalues(&self, k: f64) -> Vec<C64> {
        let n = self.d.nrows();
        let m = DMatrix::from_fn(n, n, |r, s| {
            C64::new(-k * k * self.d[(r, s)] + self.k[(r, s)], k * self.b[(r, s)])
        });
        linalg::eigenvalues(&m)
    }
}

/// Discretized weighted linearization.
#[derive(Clone, Debug)]
pub struct WeightedOperator {
    pub n: usize,
    /// Grid nodes carrying unknowns.
    pub x: Vec<f64>,
    pub h: f64,
    pub band: Banded<f64>,
    /// Terms `s g ⟨g, ·⟩` with the discrete inner product `h Σ`.
    pub low_rank: Vec<(f64, Vec<f64>)>,
    pub closure: Closure,
    pub limit_minus: LimitOperator,
    pub limit_plus: LimitOperator,
}

/// Largest tolerated gap between the end-point coefficients and their limits.
pub const DOMAIN_TOL: f64 = 1e-4;

/// Assembles `L_h = D D₂ + (c I − 2 D η(x)) D₁ + f'(q) + D η² − D η' − c η`
/// on the front grid, with `η = ω'/ω` of `w`.
pub fn build_weighted_operator(
    spec: &SystemSpec,
    front: &FrontProfile,
    w: &WeightSpec,
    closure: Closure,
) -> Result<WeightedOperator> {
    let cs = spec.centered();
    let n = cs.n;
    if front.n != n {
        return Err(Error::InvalidInput("front and system dimensions differ".into()));
    }
    let m = front.x.len();
    let h = front.h;
    let c = front.c_star;
    let d = &cs.d;
    let j_minus = cs.jf(&front.wake);
    let j_plus = cs.jf(&vec![0.0; n]);
    let ends = [
        (cs.jf(&front.values[0]) - &j_minus).amax(),
        (cs.jf(&front.values[m - 1]) - &j_plus).amax(),
    ];
    if ends[0] > DOMAIN_TOL || ends[1] > DOMAIN_TOL {
        return Err(Error::InvalidInput(format!(
            "domain too short: coefficient gaps at the ends are ({:.2e}, {:.2e})",
            ends[0], ends[1]
        )));
    }
    let first = 1;
    let last = match closure {
        Closure::Dirichlet => m - 2,
        Closure::Bounded => m - 1,
    };
    let nodes = last - first + 1;
    let dim = nodes * n;
    let mut band = Banded::zeros(dim, 6 * n, 6 * n);
    let col = |node: usize, k: usize| -> Option<usize> {
        (node >= first && node <= last).then(|| (node - first) * n + k)
    };
    for i in first..=last {
        if i == m - 1 {
            // zero derivative at the right end
            let (s, w1, _) = stencil(i, m);
            for r in 0..n {
                for (j, wj) in w1.iter().enumerate() {
                    if let Some(cc) = col(s + j, r) {
                        band.add((i - first) * n + r, cc, wj / (12.0 * h));
                    }
                }
            }
            continue;
        }
        let (s, w1, w2) = stencil(i, m);
        let (eta, deta) = w.rate(front.x[i]);
        let jq = cs.jf(&front.values[i]);
        for r in 0..n {
            let row = (i - first) * n + r;
            for j in 0..w1.len() {
                for k in 0..n {
                    let delta = if r == k { 1.0 } else { 0.0 };
                    let v = d[(r, k)] * w2[j] / (12.0 * h * h)
                        + (c * delta - 2.0 * eta * d[(r, k)]) * w1[j] / (12.0 * h);
                    if let Some(cc) = col(s + j, k) {
                        band.add(row, cc, v);
                    }
                }
            }
            for k in 0..n {
                let delta = if r == k { 1.0 } else { 0.0 };
                let v = jq[(r, k)] + d[(r, k)] * (eta * eta - deta) - c * eta * delta;
                band.add(row, (i - first) * n + k, v);
            }
        }
    }
    let ident = DMatrix::<f64>::identity(n, n);
    let eta = w.eta;
    Ok(WeightedOperator {
        n,
        x: front.x[first..=last].to_vec(),
        h,
        band,
        low_rank: Vec::new(),
        closure,
        limit_minus: LimitOperator { d: d.clone(), b: &ident * c, k: j_minus },
        limit_plus: LimitOperator {
            d: d.clone(),
            b: &ident * c - d * (2.0 * eta),
            k: j_plus + d * (eta * eta) - &ident * (c * eta),
        },
    })
}

impl WeightedOperator {
    pub fn dim(&self) -> usize {
        self.band.n
    }

    /// Adds `s g ⟨g, ·⟩` with `g` given at the unknown nodes.
    pub fn add_rank_one(&mut self, s: f64, g: Vec<f64>) {
        assert_eq!(g.len(), self.dim());
        self.low_rank.push((s, g));
    }

    fn low_rank_apply(&self, x: &[C64], y: &mut [C64]) {
        for (s, g) in &self.low_rank {
            let ip: C64 = g.iter().zip(x).map(|(a, b)| *b * *a).sum::<C64>() * self.h;
            for (yi, gi) in y.iter_mut().zip(g) {
                *yi += ip * (*s * *gi);
            }
        }
    }

    /// `L_h x` for a complex vector.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let re: Vec<f64> = x.iter().map(|z| z.re).collect();
        let im: Vec<f64> = x.iter().map(|z| z.im).collect();
        let a = self.band.matvec(&re);
        let b = self.band.matvec(&im);
        let mut y: Vec<C64> = a.iter().zip(&b).map(|(r, i)| C64::new(*r, *i)).collect();
        self.low_rank_apply(x, &mut y);
        y
    }

    /// `L_h x` for a real vector.
    pub fn apply_real(&self, x: &[f64]) -> Vec<f64> {
        let xc: Vec<C64> = x.iter().map(|v| C64::new(*v, 0.0)).collect();
        self.apply(&xc).iter().map(|z| z.re).collect()
    }

    /// Dense copy, for small grids.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in i.saturating_sub(self.band.kl)..(i + self.band.ku + 1).min(dim) {
                m[(i, j)] = self.band.get(i, j);
            }
        }
        for (s, g) in &self.low_rank {
            for i in 0..dim {
                for j in 0..dim {
                    m[(i, j)] += s * g[i] * g[j] * self.h;
                }
            }
        }
        m
    }

    fn shifted(&self, sigma: C64) -> Banded<C64> {
        let dim = self.dim();
        let mut b = Banded::zeros(dim, self.band.kl, self.band.ku);
        for i in 0..dim {
            for j in i.saturating_sub(self.band.kl)..(i + self.band.ku + 1).min(dim) {
                let mut v = C64::new(self.band.get(i, j), 0.0);
                if i == j {
                    v -= sigma;
                }
                if v != C64::new(0.0, 0.0) {
                    b.set(i, j, v);
                }
            }
        }
        b
    }

    /// Factorization of `L_h − σ` including the low-rank terms.
    fn factor(&self, sigma: C64) -> Option<ShiftedSolver> {
        let mut lu = self.shifted(sigma);
        lu.factor().ok()?;
        ShiftedSolver::new(lu, &self.low_rank, self.h)
    }
}

/// Woodbury solver for `A + Σ s g gᵀ h` with `A` factorized.
struct ShiftedSolver {
    lu: Banded<C64>,
    g: Vec<Vec<C64>>,
    ainv_u: Vec<Vec<C64>>,
    ainvt_u: Vec<Vec<C64>>,
    cap: DMatrix<C64>,
    cap_t: DMatrix<C64>,
}

impl ShiftedSolver {
    fn new(lu: Banded<C64>, low_rank: &[(f64, Vec<f64>)], h: f64) -> Option<ShiftedSolver> {
        let k = low_rank.len();
        let g: Vec<Vec<C64>> = low_rank
            .iter()
            .map(|(_, g)| g.iter().map(|v| C64::new(*v, 0.0)).collect())
            .collect();
        let u: Vec<Vec<C64>> = low_rank
            .iter()
            .map(|(s, g)| g.iter().map(|v| C64::new(s * h * v, 0.0)).collect())
            .collect();
        let solve_all = |t: bool| -> Vec<Vec<C64>> {
            u.iter()
                .map(|col| {
                    let mut x = col.clone();
                    if t {
                        lu.solve_t_in_place(&mut x);
                    } else {
                        lu.solve_in_place(&mut x);
                    }
                    x
                })
                .collect()
        };
        let ainv_u = solve_all(false);
        let ainvt_u = solve_all(true);
        let build = |z: &[Vec<C64>]| -> Option<DMatrix<C64>> {
            let mut cap = DMatrix::<C64>::identity(k, k);
            for r in 0..k {
                for s in 0..k {
                    cap[(r, s)] += g[r].iter().zip(&z[s]).map(|(a, b)| a * b).sum::<C64>();
                }
            }
            cap.try_inverse()
        };
        let cap = build(&ainv_u)?;
        let cap_t = build(&ainvt_u)?;
        Some(ShiftedSolver { lu, g, ainv_u, ainvt_u, cap, cap_t })
    }

    fn solve(&self, x: &mut [C64], transpose: bool) {
        if transpose {
            self.lu.solve_t_in_place(x);
        } else {
            self.lu.solve_in_place(x);
        }
        let k = self.g.len();
        if k == 0 {
            return;
        }
        let (z, cap) = if transpose { (&self.ainvt_u, &self.cap_t) } else { (&self.ainv_u, &self.cap) };
        let proj = DVector::from_iterator(k, self.g.iter().map(|g| g.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<C64>()));
        let coef = cap * proj;
        for (s, zs) in z.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(zs) {
                *xi -= coef[s] * zi;
            }
        }
    }
}

/// One computed eigenvalue.
#[derive(Clone, Debug, Serialize)]
pub struct Eigen {
    pub re: f64,
    pub im: f64,
    /// `‖(L_h − λ)v‖ / ‖v‖`.
    pub residual: f64,
    /// Fraction of `‖v‖²` inside the middle half of the domain.
    pub localization: f64,
    /// Classified as point spectrum.
    pub point: bool,
    #[serde(skip)]
    pub vector: Vec<C64>,
}

/// Sampled essential-spectrum boundary `λ(k)` of one limit operator.
#[derive(Clone, Debug, Serialize)]
pub struct EssentialCurve {
    pub k: Vec<f64>,
    /// `λ(k)` as `(re, im)` pairs, one list per `k`.
    pub lambda: Vec<Vec<(f64, f64)>>,
    /// Largest real part over the samples.
    pub max_re: f64,
}

/// Result of the point-spectrum scan.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Eigen>,
    pub essential_minus: EssentialCurve,
    pub essential_plus: EssentialCurve,
    pub delta0: f64,
    pub localization_threshold: f64,
    pub tolerance: f64,
    pub shifts: Vec<(f64, f64)>,
    /// Shifts that had to be perturbed because the factorization failed.
    pub perturbed_shifts: usize,
    pub pass: bool,
    pub zero_mode: Option<ZeroModeReport>,
}

impl SpectrumReport {
    /// CSV with columns `re, im, residual, localization, point`.
    pub fn eigenvalues_csv(&self) -> String {
        let mut s = String::from("re,im,residual,localization,point\n");
        for e in &self.eigenvalues {
            let _ = writeln!(s, "{:.17e},{:.17e},{:.3e},{:.6},{}", e.re, e.im, e.residual, e.localization, e.point);
        }
        s
    }

    /// Rightmost classified point eigenvalue, if any.
    pub fn leading_point(&self) -> Option<&Eigen> {
        self.eigenvalues.iter().filter(|e| e.point).max_by(|a, b| a.re.total_cmp(&b.re))
    }
}

/// Scan settings.
#[derive(Clone, Debug, Serialize)]
pub struct ScanOptions {
    pub delta0: f64,
    pub localization_threshold: f64,
    pub tolerance: f64,
    pub max_eigenvalues: usize,
    pub krylov_dim: usize,
    /// Imaginary parts of the shifts (mirrored by conjugation).
    pub shift_imag: Vec<f64>,
    /// Largest number of shifts processed concurrently; 0 runs all at once.
    pub jobs: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            delta0: 0.2,
            localization_threshold: 0.9,
            tolerance: 1e-4,
            max_eigenvalues: 30,
            krylov_dim: 60,
            shift_imag: vec![0.0, 0.5, 1.0, 2.0],
            jobs: 0,
        }
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn ritz_residual(op: &WeightedOperator, lam: C64, v: &[C64]) -> f64 {
    let lv = op.apply(v);
    let r: Vec<C64> = lv.iter().zip(v).map(|(a, b)| a - lam * b).collect();
    norm(&r) / norm(v)
}

/// Rayleigh-quotient refinement with inverse iteration.
fn refine(op: &WeightedOperator, mut lam: C64, mut v: Vec<C64>) -> (C64, Vec<C64>, f64) {
    let mut res = ritz_residual(op, lam, &v);
    for _ in 0..6 {
        if res < 1e-9 {
            break;
        }
        let sigma = lam + C64::new(1e-10 * (1.0 + lam.norm()), 0.0);
        let Some(solver) = op.factor(sigma) else { break };
        let mut y = v.clone();
        solver.solve(&mut y, false);
        let ny = norm(&y);
        if !ny.is_finite() || ny == 0.0 {
            break;
        }
        y.iter_mut().for_each(|z| *z /= ny);
        let ly = op.apply(&y);
        let new_lam = dot(&y, &ly);
        let new_res = ritz_residual(op, new_lam, &y);
        if new_res < res {
            lam = new_lam;
            v = y;
            res = new_res;
        } else {
            break;
        }
    }
    (lam, v, res)
}

/// Shift-invert Arnoldi around `sigma`; returns refined eigenpairs with
/// residual below `1e-6`, or `None` when `L_h − σ` is singular.
fn arnoldi(op: &WeightedOperator, sigma: C64, kdim: usize) -> Option<Vec<(C64, Vec<C64>, f64)>> {
    let solver = op.factor(sigma)?;
    let dim = op.dim();
    let kdim = kdim.min(dim);
    let mut v: Vec<Vec<C64>> = Vec::with_capacity(kdim + 1);
    let start: Vec<C64> = (0..dim)
        .map(|i| C64::new((0.37 * i as f64 + 0.1).sin() + 0.5, (0.61 * i as f64).cos() * 0.1))
        .collect();
    let ns = norm(&start);
    v.push(start.iter().map(|z| z / ns).collect());
    let mut hm = DMatrix::<C64>::zeros(kdim + 1, kdim);
    let mut steps = kdim;
    for j in 0..kdim {
        let mut w = v[j].clone();
        solver.solve(&mut w, false);
        for _ in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let c = dot(vi, &w);
                hm[(i, j)] += c;
                w.iter_mut().zip(vi).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nw = norm(&w);
        hm[(j + 1, j)] = C64::new(nw, 0.0);
        if nw < 1e-14 || !nw.is_finite() {
            steps = j + 1;
            break;
        }
        v.push(w.iter().map(|z| z / nw).collect());
    }
    let hsq = hm.view((0, 0), (steps, steps)).into_owned();
    let (theta, s) = linalg::eigen(&hsq);
    let mut out = Vec::new();
    for (k, th) in theta.iter().enumerate() {
        if th.norm() < 1e-12 {
            continue;
        }
        let lam = sigma + C64::new(1.0, 0.0) / th;
        let mut y = vec![C64::new(0.0, 0.0); dim];
        for i in 0..steps {
            let c = s[(i, k)];
            y.iter_mut().zip(&v[i]).for_each(|(a, b)| *a += c * b);
        }
        let ny = norm(&y);
        y.iter_mut().for_each(|z| *z /= ny);
        let res = ritz_residual(op, lam, &y);
        let (lam, y, res) = if res < 1e-6 {
            (lam, y, res)
        } else if res < 1e-2 * (1.0 + lam.norm()) {
            refine(op, lam, y)
        } else {
            continue;
        };
        if res < 1e-6 {
            out.push((lam, y, res));
        }
    }
    Some(out)
}

fn localization(op: &WeightedOperator, v: &[C64]) -> f64 {
    let x0 = op.x[0];
    let x1 = *op.x.last().unwrap();
    let (a, b) = (x0 + 0.25 * (x1 - x0), x1 - 0.25 * (x1 - x0));
    let mut inner = 0.0;
    let mut total = 0.0;
    for (i, xi) in op.x.iter().enumerate() {
        let m: f64 = (0..op.n).map(|k| v[i * op.n + k].norm_sqr()).sum();
        total += m;
        if *xi >= a && *xi <= b {
            inner += m;
        }
    }
    inner / total
}

/// Samples the essential-spectrum boundary of a limit operator.
pub fn essential_curve(limit: &LimitOperator, k_max: f64, samples: usize) -> EssentialCurve {
    let k: Vec<f64> = (0..samples).map(|i| k_max * i as f64 / (samples - 1) as f64).collect();
    let lambda: Vec<Vec<(f64, f64)>> = k
        .iter()
        .map(|&kk| limit.symbol_eigenvalues(kk).iter().map(|z| (z.re, z.im)).collect())
        .collect();
    let max_re = lambda.iter().flatten().map(|z| z.0).fold(f64::NEG_INFINITY, f64::max);
    EssentialCurve { k, lambda, max_re }
}

/// Rightmost eigenvalues of `L_h` in `Re λ ≥ −δ₀` by shift-invert Arnoldi at
/// shifts on `Re λ = 0` and `Re λ = −δ₀/2`, classified by localization.
pub fn scan_point_spectrum(op: &WeightedOperator, opts: &ScanOptions) -> SpectrumReport {
    let mut shifts = Vec::new();
    for re in [0.0, -0.5 * opts.delta0] {
        for &im in &opts.shift_imag {
            shifts.push(C64::new(re, im));
        }
    }
    let chunk = if opts.jobs == 0 { shifts.len().max(1) } else { opts.jobs };
    let mut results: Vec<(C64, bool, Vec<(C64, Vec<C64>, f64)>)> = Vec::new();
    for group in shifts.chunks(chunk) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = group
                .iter()
                .map(|&s| {
                    scope.spawn(move || {
                        let mut sigma = s;
                        for attempt in 0..5 {
                            if let Some(found) = arnoldi(op, sigma, opts.krylov_dim) {
                                return (sigma, attempt > 0, found);
                            }
                            sigma += C64::new(1e-3 * (attempt + 1) as f64, 1e-3);
                        }
                        (sigma, true, Vec::new())
                    })
                })
                .collect();
            for h in handles {
                results.push(h.join().expect("shift worker panicked"));
            }
        });
    }
    let mut all: Vec<(C64, Vec<C64>, f64)> = Vec::new();
    let mut perturbed = 0;
    let mut used = Vec::new();
    for (sigma, moved, found) in results {
        used.push((sigma.re, sigma.im));
        if moved {
            perturbed += 1;
        }
        for (lam, v, res) in found {
            let mut cands = vec![(lam, v.clone())];
            if lam.im.abs() > 1e-8 {
                cands.push((lam.conj(), v.iter().map(|z| z.conj()).collect()));
            }
            for (l, vv) in cands {
                if l.re < -opts.delta0 {
                    continue;
                }
                if let Some(e) = all.iter_mut().find(|e| (e.0 - l).norm() < 1e-6 * (1.0 + l.norm())) {
                    if res < e.2 {
                        *e = (l, vv, res);
                    }
                } else {
                    all.push((l, vv, res));
                }
            }
        }
    }
    all.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(a.0.im.total_cmp(&b.0.im)));
    all.truncate(opts.max_eigenvalues);
    let eigenvalues: Vec<Eigen> = all
        .into_iter()
        .map(|(l, v, res)| {
            let loc = localization(op, &v);
            Eigen {
                re: l.re,
                im: l.im,
                residual: res,
                localization: loc,
                point: loc > opts.localization_threshold,
                vector: v,
            }
        })
        .collect();
    let pass = !eigenvalues.iter().any(|e| e.point && e.re >= -opts.tolerance);
    let scale = (op.limit_plus.k.norm() + op.limit_minus.k.norm()) / op.limit_plus.d.norm().max(1e-12);
    let k_max = 10.0 * scale.max(1.0).sqrt();
    SpectrumReport {
        eigenvalues,
        essential_minus: essential_curve(&op.limit_minus, k_max, 201),
        essential_plus: essential_curve(&op.limit_plus, k_max, 201),
        delta0: opts.delta0,
        localization_threshold: opts.localization_threshold,
        tolerance: opts.tolerance,
        shifts: used,
        perturbed_shifts: perturbed,
        pass,
        zero_mode: None,
    }
}

/// Smallest singular value of `L_h` under the bounded closure.
#[derive(Clone, Debug, Serialize)]
pub struct ZeroModeReport {
    pub sigma_min: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// `τ_zero(h) = 10 h⁴ max(1, ‖D‖, ‖B₋‖, ‖B₊‖)`: the fourth-order truncation
/// error of the stencils on unit-size data, scaled by the differential part
/// of the operator.
pub fn zero_mode_threshold(op: &WeightedOperator) -> f64 {
    let coeff = op
        .limit_plus
        .d
        .norm()
        .max(op.limit_plus.b.norm())
        .max(op.limit_minus.b.norm())
        .max(1.0);
    10.0 * op.h.powi(4) * coeff
}

/// Estimates `σ_min(L_h)` by inverse iteration on `L_hᵀ L_h` and compares it
/// with [`zero_mode_threshold`].
pub fn check_zero_mode(op: &WeightedOperator) -> ZeroModeReport {
    let threshold = zero_mode_threshold(op);
    let sigma_min = smallest_singular_value(op);
    ZeroModeReport { sigma_min, threshold, pass: sigma_min > threshold }
}

fn smallest_singular_value(op: &WeightedOperator) -> f64 {
    let Some(solver) = op.factor(C64::new(0.0, 0.0)) else { return 0.0 };
    let dim = op.dim();
    let mut x: Vec<C64> = (0..dim).map(|i| C64::new(1.0 + 0.1 * (0.7 * i as f64).sin(), 0.0)).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|z| *z /= nx);
    let mut est = 0.0;
    for _ in 0..500 {
        let mut y = x.clone();
        solver.solve(&mut y, false);
        solver.solve(&mut y, true);
        let ny = norm(&y);
        if !ny.is_finite() {
            return 0.0;
        }
        let new = 1.0 / ny.sqrt();
        y.iter_mut().for_each(|z| *z /= ny);
        x = y;
        if (new - est).abs() < 1e-10 * new {
            est = new;
            break;
        }
        est = new;
    }
    est
}

/// Verdict of the spectral hypothesis: scan plus zero-mode check.
pub fn verify_point_spectrum(
    spec: &SystemSpec,
    front: &FrontProfile,
    opts: &ScanOptions,
) -> Result<SpectrumReport> {
    let w = WeightSpec::exponential(front.eta_star)?;
    let op = build_weighted_operator(spec, front, &w, Closure::Dirichlet)?;
    let mut report = scan_point_spectrum(&op, opts);
    let bounded = build_weighted_operator(spec, front, &w, Closure::Bounded)?;
    let zm = check_zero_mode(&bounded);
    report.pass = report.pass && zm.pass;
    report.zero_mode = Some(zm);
    Ok(report)
}
