//! Dispersion relation `d_c(λ, ν) = det M(λ, ν, c)` with
//! `M = D ν² + (cI + G) ν + f'(0) − λI`: spatial eigenvalues, pinched double
//! roots, the linear spreading speed and far-field expansions.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{no_conv, Error, Result};
use crate::linalg::{self, C64};
use crate::systems::SystemSpec;

/// Coefficient matrices of the symbol.
#[derive(Clone, Debug)]
pub struct SymbolPencil {
    pub n: usize,
    /// `f'(0)`
    pub a_const: DMatrix<f64>,
    /// Advection part of the `ν` coefficient; the speed adds `cI`.
    pub a_nu: DMatrix<f64>,
    /// `D`
    pub a_nu2: DMatrix<f64>,
}

/// Taylor coefficients `coeffs[j][k]` of `d_c` about `(λ0, ν0)`:
/// `d_c(λ0 + a, ν0 + b) = Σ coeffs[j][k] aʲ bᵏ`.
#[derive(Clone, Debug)]
pub struct Taylor {
    pub lam0: C64,
    pub nu0: C64,
    pub coeffs: Vec<Vec<C64>>,
}

impl Taylor {
    pub fn coeff(&self, j: usize, k: usize) -> C64 {
        self.coeffs
            .get(j)
            .and_then(|row| row.get(k))
            .copied()
            .unwrap_or(C64::new(0.0, 0.0))
    }

    /// Evaluates the polynomial at `(λ, ν)`.
    pub fn eval(&self, lam: C64, nu: C64) -> C64 {
        let a = lam - self.lam0;
        let b = nu - self.nu0;
        let mut s = C64::new(0.0, 0.0);
        let mut aj = C64::new(1.0, 0.0);
        for row in &self.coeffs {
            let mut bk = C64::new(1.0, 0.0);
            for c in row {
                s += c * aj * bk;
                bk *= b;
            }
            aj *= a;
        }
        s
    }
}

impl SymbolPencil {
    pub fn from_spec(spec: &SystemSpec) -> SymbolPencil {
        let centered = spec.centered();
        SymbolPencil {
            n: spec.n,
            a_const: centered.linearization(),
            a_nu: centered.advection_matrix(),
            a_nu2: centered.d.clone(),
        }
    }

    /// `M(λ, ν, c)`.
    pub fn matrix(&self, lam: C64, nu: C64, c: f64) -> DMatrix<C64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            nu * nu * self.a_nu2[(i, j)]
                + nu * (self.a_nu[(i, j)] + c * delta)
                + self.a_const[(i, j)]
                - lam * delta
        })
    }

    /// `d_c(λ, ν)` by LU.
    pub fn det(&self, lam: C64, nu: C64, c: f64) -> C64 {
        linalg::det(&self.matrix(lam, nu, c))
    }

    /// Shifted coefficients `(A⁰, A⁰¹, A⁰²)` of `A(λ, ν) = M(λ, ν − η, c)`;
    /// the `λ` coefficient is `−I`.
    pub fn shifted(&self, eta: f64, c: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.n;
        let id = DMatrix::<f64>::identity(n, n);
        let b = &self.a_nu + &id * c;
        let a0 = &self.a_nu2 * (eta * eta) - &b * eta + &self.a_const;
        let a01 = &b - &self.a_nu2 * (2.0 * eta);
        (a0, a01, self.a_nu2.clone())
    }

    /// Exact Taylor coefficients of the polynomial `d_c` about `(λ0, ν0)`
    /// from a discrete Fourier transform over a torus of radius `r`.
    pub fn taylor(&self, lam0: C64, nu0: C64, c: f64, r: f64) -> Taylor {
        let nl = self.n + 1;
        let nn = 2 * self.n + 1;
        let mut vals = vec![vec![C64::new(0.0, 0.0); nn]; nl];
        for (p, row) in vals.iter_mut().enumerate() {
            let zl = C64::from_polar(r, 2.0 * std::f64::consts::PI * p as f64 / nl as f64);
            for (q, v) in row.iter_mut().enumerate() {
                let zn = C64::from_polar(r, 2.0 * std::f64::consts::PI * q as f64 / nn as f64);
                *v = self.det(lam0 + zl, nu0 + zn, c);
            }
        }
        let mut coeffs = vec![vec![C64::new(0.0, 0.0); nn]; nl];
        for (j, crow) in coeffs.iter_mut().enumerate() {
            for (k, cv) in crow.iter_mut().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for (p, row) in vals.iter().enumerate() {
                    for (q, v) in row.iter().enumerate() {
                        let ang = -2.0
                            * std::f64::consts::PI
                            * ((j * p) as f64 / nl as f64 + (k * q) as f64 / nn as f64);
                        s += v * C64::from_polar(1.0, ang);
                    }
                }
                *cv = s / ((nl * nn) as f64 * r.powi((j + k) as i32));
            }
        }
        Taylor { lam0, nu0, coeffs }
    }

    fn diffusion_invertible(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let svd = self.a_nu2.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        smax > 0.0 && smin > 1e-12 * smax
    }
}

fn sort_roots(v: &mut [C64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// All roots `ν` of `d_c(λ, ν) = 0`, sorted by real part.
///
/// Uses the `2n × 2n` companion linearization when `D` is invertible and the
/// scalar polynomial in `ν` otherwise.
pub fn spatial_eigenvalues(p: &SymbolPencil, lam: C64, c: f64) -> Result<Vec<C64>> {
    let n = p.n;
    let mut roots = if p.diffusion_invertible() {
        let dinv = p
            .a_nu2
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("singular diffusion matrix".into()))?;
        let dinv = linalg::to_complex(&dinv);
        let id = DMatrix::<C64>::identity(n, n);
        let b = linalg::to_complex(&p.a_nu) + &id * C64::new(c, 0.0);
        let k0 = linalg::to_complex(&p.a_const) - &id * lam;
        let mut comp = DMatrix::<C64>::zeros(2 * n, 2 * n);
        comp.view_mut((0, n), (n, n)).copy_from(&id);
        comp.view_mut((n, 0), (n, n)).copy_from(&(-(&dinv * k0)));
        comp.view_mut((n, n), (n, n)).copy_from(&(-(&dinv * b)));
        linalg::eigenvalues(&comp)
    } else {
        let t = p.taylor(lam, C64::new(0.0, 0.0), c, 1.0);
        let coeffs: Vec<C64> = (0..=2 * n).map(|k| t.coeff(0, k)).collect();
        let roots = linalg::poly_roots(&coeffs);
        if roots.is_empty() {
            return Err(Error::InvalidInput(
                "dispersion relation has no finite spatial roots".into(),
            ));
        }
        roots
    };
    sort_roots(&mut roots);
    Ok(roots)
}

/// Homotopy record of the pinching test.
#[derive(Clone, Debug, Serialize)]
pub struct PinchTrace {
    /// Direction `Λ` of the homotopy `λ(s) = λ_dr + sΛ`.
    pub direction: C64,
    pub s_max: f64,
    /// `(s, ν_a(s), ν_b(s))` for the two tracked colliding roots.
    pub samples: Vec<(f64, C64, C64)>,
    pub bisections: usize,
}

/// A double root `d_c = ∂_ν d_c = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct DoubleRoot {
    pub c: f64,
    pub lambda: C64,
    pub nu: C64,
    pub d10: C64,
    pub d02: C64,
    pub residual_d: f64,
    pub residual_dnu: f64,
    pub pinched: bool,
    pub simple: bool,
    pub trace: Option<PinchTrace>,
}

/// Iteration cap of the double-root Newton solve.
pub const NEWTON_MAX_ITER: usize = 50;

/// Newton iteration on `{d_c, ∂_ν d_c}` from `seed = (λ, ν)`.
pub fn find_double_root(p: &SymbolPencil, c: f64, seed: (C64, C64)) -> Result<DoubleRoot> {
    let (mut lam, mut nu) = seed;
    let mut converged = false;
    let mut t = p.taylor(lam, nu, c, 1.0);
    let scale = t
        .coeffs
        .iter()
        .flatten()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    for _ in 0..NEWTON_MAX_ITER {
        let f0 = t.coeff(0, 0);
        let f1 = t.coeff(0, 1);
        let res = f0.norm().max(f1.norm());
        let j11 = t.coeff(1, 0);
        let j12 = f1;
        let j21 = t.coeff(1, 1);
        let j22 = t.coeff(0, 2) * 2.0;
        let det = j11 * j22 - j12 * j21;
        if det.norm() == 0.0 {
            break;
        }
        let dl = (f0 * j22 - j12 * f1) / det;
        let dn = (j11 * f1 - j21 * f0) / det;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let tl = lam - dl * step;
            let tn = nu - dn * step;
            let tt = p.taylor(tl, tn, c, 1.0);
            let r = tt.coeff(0, 0).norm().max(tt.coeff(0, 1).norm());
            if r < res || r < 1e-15 * scale {
                lam = tl;
                nu = tn;
                t = tt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        let small_step = (dl.norm() + dn.norm()) * step <= 1e-14 * (1.0 + lam.norm() + nu.norm());
        if !accepted || small_step {
            converged = res < 1e-9 || small_step;
            break;
        }
        let r = t.coeff(0, 0).norm().max(t.coeff(0, 1).norm());
        if r < 1e-15 * scale {
            converged = true;
            break;
        }
    }
    let residual_d = t.coeff(0, 0).norm();
    let residual_dnu = t.coeff(0, 1).norm();
    if !converged && (residual_d > 1e-9 || residual_dnu > 1e-9) {
        return Err(no_conv(
            "find_double_root",
            format!(
                "Newton from seed ({}, {}) ended at residuals {residual_d:e}, {residual_dnu:e}",
                seed.0, seed.1
            ),
        ));
    }
    let d10 = t.coeff(1, 0);
    let d02 = t.coeff(0, 2);
    let simple = d10.norm() > 1e-8 && d02.norm() > 1e-8;
    let mut root = DoubleRoot {
        c,
        lambda: lam,
        nu,
        d10,
        d02,
        residual_d,
        residual_dnu,
        pinched: false,
        simple,
        trace: None,
    };
    if simple {
        if let Ok((pinched, trace)) = verify_pinching(p, &root) {
            root.pinched = pinched;
            root.trace = Some(trace);
        }
    }
    Ok(root)
}

fn split_is_clean(roots: &[C64], gap: f64) -> bool {
    let neg = roots.iter().filter(|z| z.re < -gap).count();
    let pos = roots.iter().filter(|z| z.re > gap).count();
    neg + pos == roots.len() && neg == pos
}

/// Greedy nearest-neighbour matching; `None` when any match is ambiguous.
fn match_roots(old: &[C64], new: &[C64]) -> Option<Vec<usize>> {
    if old.len() != new.len() {
        return None;
    }
    let mut used = vec![false; new.len()];
    let mut out = Vec::with_capacity(old.len());
    for z in old {
        let mut dists: Vec<(f64, usize)> = new
            .iter()
            .enumerate()
            .map(|(i, w)| ((w - z).norm(), i))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (d1, i1) = dists[0];
        if used[i1] {
            return None;
        }
        if dists.len() > 1 && d1 > 0.3 * dists[1].0 {
            return None;
        }
        used[i1] = true;
        out.push(i1);
    }
    Some(out)
}

/// Homotopy pinching test.
///
/// Follows all spatial roots along `λ(s) = λ_dr + sΛ` from `s = S_max`,
/// where they split evenly into stable and unstable groups, down towards
/// `s = 0`, and reports whether the two roots that collide at `ν_dr` came
/// from opposite groups.
pub fn verify_pinching(p: &SymbolPencil, root: &DoubleRoot) -> Result<(bool, PinchTrace)> {
    let mut last_err = None;
    for dir in [
        C64::new(1.0, 0.0),
        C64::from_polar(1.0, 0.1),
        C64::from_polar(1.0, -0.1),
    ] {
        match pinch_along(p, root, dir) {
            Ok(r) => return Ok(r),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

fn pinch_along(p: &SymbolPencil, root: &DoubleRoot, dir: C64) -> Result<(bool, PinchTrace)> {
    let c = root.c;
    let roots_at = |s: f64| spatial_eigenvalues(p, root.lambda + dir * s, c);
    let mut s_max = 1.0;
    let mut start = roots_at(s_max)?;
    let mut tries = 0;
    loop {
        let gap = 1e-6 * (1.0 + start.iter().map(|z| z.norm()).fold(0.0, f64::max));
        if split_is_clean(&start, gap) {
            break;
        }
        tries += 1;
        if tries > 40 {
            return Err(no_conv("verify_pinching", "roots never split evenly"));
        }
        s_max *= 2.0;
        start = roots_at(s_max)?;
    }
    let scale = 1.0 + root.nu.norm();
    let d_ratio = (root.d10 / root.d02).norm().sqrt().max(1e-3);
    let s_min = (1e-5 * scale / d_ratio).powi(2).min(1e-3 * s_max);
    let mut current = start.clone();
    let mut s = s_max;
    let mut bisections = 0;
    while s > s_min {
        let mut factor = 0.5;
        let mut halvings = 0;
        loop {
            let s_next = (s * factor).max(s_min);
            let next = roots_at(s_next)?;
            if let Some(m) = match_roots(&current, &next) {
                current = m.iter().map(|&i| next[i]).collect();
                s = s_next;
                break;
            }
            halvings += 1;
            bisections += 1;
            if halvings > 20 {
                return Err(no_conv(
                    "verify_pinching",
                    format!("root tracking ambiguous at s = {s}"),
                ));
            }
            factor = 1.0 - (1.0 - factor) * 0.5;
        }
    }
    let mut order: Vec<usize> = (0..current.len()).collect();
    order.sort_by(|&a, &b| {
        (current[a] - root.nu)
            .norm()
            .total_cmp(&(current[b] - root.nu).norm())
    });
    if order.len() < 2 {
        return Err(no_conv("verify_pinching", "fewer than two spatial roots"));
    }
    let (ia, ib) = (order[0], order[1]);
    let pinched = (start[ia].re < 0.0) != (start[ib].re < 0.0);
    let samples = vec![(s_max, start[ia], start[ib]), (s, current[ia], current[ib])];
    Ok((
        pinched,
        PinchTrace {
            direction: dir,
            s_max,
            samples,
            bisections,
        },
    ))
}

/// Outcome of a sampled hypothesis check with its worst witness.
#[derive(Clone, Debug, Serialize)]
pub struct HypCheck {
    pub ok: bool,
    /// Worst sample `(Re λ, Im λ, k)`.
    pub witness: (f64, f64, f64),
    pub detail: String,
}

/// The `k`-grid used by the sampling checks.
#[derive(Clone, Debug, Serialize)]
pub struct KGrid {
    pub k_max: f64,
    pub uniform_points: usize,
    pub log_points: usize,
}

/// Linear spreading speed, decay rate and Hypothesis 1 verdicts.
#[derive(Clone, Debug, Serialize)]
pub struct SpreadingSpeedResult {
    pub c_star: f64,
    pub eta_star: f64,
    pub root: DoubleRoot,
    pub hyp1_ii: HypCheck,
    pub hyp1_iii: HypCheck,
    pub grid: KGrid,
}

impl SpreadingSpeedResult {
    /// All three parts of Hypothesis 1.
    pub fn hyp1_ok(&self) -> bool {
        self.root.simple
            && self.root.pinched
            && (self.root.d10 * self.root.d02).re < 0.0
            && self.hyp1_ii.ok
            && self.hyp1_iii.ok
    }
}

fn top_real_eig(p: &SymbolPencil, nu: f64) -> f64 {
    let m = &p.a_nu2 * (nu * nu) + &p.a_nu * nu + &p.a_const;
    linalg::eigenvalues(&linalg::to_complex(&m))
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn envelope_seed(p: &SymbolPencil) -> Result<(f64, f64)> {
    let scale = p.a_const.amax().max(1e-12);
    let dmin = p
        .a_nu2
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, x| m.min(x.abs()))
        .max(1e-12);
    let eta_max = 20.0 * (1.0 + (scale / dmin).sqrt());
    let speed = |eta: f64| top_real_eig(p, -eta) / eta;
    let m = 400;
    let mut best = (f64::INFINITY, 0.0);
    let mut any_unstable = false;
    for i in 0..=m {
        let eta = eta_max * 10f64.powf(-5.0 * (1.0 - i as f64 / m as f64));
        let mu = top_real_eig(p, -eta);
        if mu > 0.0 {
            any_unstable = true;
            let c = mu / eta;
            if c < best.0 {
                best = (c, eta);
            }
        }
    }
    if !any_unstable || top_real_eig(p, 0.0) <= 0.0 {
        return Err(Error::Hypothesis {
            which: "1".into(),
            detail: "f'(0) has no unstable spectrum, nothing invades".into(),
        });
    }
    let (mut a, mut b) = (best.1 / 1.1, best.1 * 1.1);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if speed(x1) < speed(x2) {
            b = x2;
        } else {
            a = x1;
        }
        if (b - a) < 1e-13 * b {
            break;
        }
    }
    let eta = 0.5 * (a + b);
    Ok((speed(eta), eta))
}

/// Checks Hypothesis 1 (ii) and (iii) on a `k`-grid.
pub fn check_hyp1_grid(p: &SymbolPencil, c: f64, nu_star: f64) -> (HypCheck, HypCheck, KGrid) {
    let dmin = p
        .a_nu2
        .clone()
        .complex_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |m, z| m.min(z.re));
    let ratio = if dmin > 0.0 {
        p.a_const.norm() / dmin
    } else {
        p.a_const.norm()
    };
    let k_max = 10.0 * ratio.max(1.0).sqrt();
    let nu_pts = 2001;
    let log_pts = 41;
    let half = (nu_pts - 1) as i64 / 2;
    let mut ks: Vec<f64> = (-half..=half)
        .map(|i| k_max * i as f64 / half as f64)
        .collect();
    for i in 0..log_pts {
        let k = 10f64.powf(-4.0 + 4.0 * i as f64 / (log_pts - 1) as f64);
        ks.push(k);
        ks.push(-k);
    }
    let eigs_at = |k: f64| -> Vec<C64> {
        let nu = C64::new(nu_star, k);
        let n = p.n;
        let id = DMatrix::<C64>::identity(n, n);
        let m = linalg::to_complex(&p.a_nu2) * (nu * nu)
            + (linalg::to_complex(&p.a_nu) + &id * C64::new(c, 0.0)) * nu
            + linalg::to_complex(&p.a_const);
        linalg::eigenvalues(&m)
    };
    let mut worst_iii = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut worst_ii = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut ii_ok = true;
    for &k in &ks {
        let eig = eigs_at(k);
        let tol = 1e-12 * (1.0 + k * k);
        for z in &eig {
            if z.re > worst_iii.0 {
                worst_iii = (z.re, z.im, k);
            }
        }
        if k == 0.0 {
            let near: Vec<&C64> = eig.iter().filter(|z| z.norm() < 1e-7).collect();
            let others = eig
                .iter()
                .filter(|z| z.norm() >= 1e-7)
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max);
            if near.len() != 1 || others > -tol {
                ii_ok = false;
                worst_ii = (others, 0.0, 0.0);
            }
        } else {
            let top = eig.iter().fold((f64::NEG_INFINITY, 0.0), |m, z| {
                if z.re > m.0 {
                    (z.re, z.im)
                } else {
                    m
                }
            });
            let rel = top.0 / (1.0 + k * k);
            if rel > worst_ii.0 / (1.0 + worst_ii.2 * worst_ii.2) || worst_ii.0 == f64::NEG_INFINITY
            {
                worst_ii = (top.0, top.1, k);
            }
            if top.0 >= -tol {
                ii_ok = false;
            }
        }
    }
    let iii_ok = worst_iii.0 <= 1e-8;
    (
        HypCheck {
            ok: ii_ok,
            witness: worst_ii,
            detail: if ii_ok {
                "no critical spectrum besides the double root on the sampled grid".into()
            } else {
                format!(
                    "critical spectrum at k = {} (Re λ = {:e}, Im λ = {})",
                    worst_ii.2, worst_ii.0, worst_ii.1
                )
            },
        },
        HypCheck {
            ok: iii_ok,
            witness: worst_iii,
            detail: if iii_ok {
                "no unstable spectrum on the sampled grid".into()
            } else {
                format!(
                    "unstable root λ = {}{:+}i at k = {}",
                    worst_iii.0, worst_iii.1, worst_iii.2
                )
            },
        },
        KGrid {
            k_max,
            uniform_points: nu_pts,
            log_points: 2 * log_pts,
        },
    )
}

/// Solves for the linear spreading speed inside `bracket`.
pub fn solve_spreading_speed(
    spec: &SystemSpec,
    bracket: (f64, f64),
) -> Result<SpreadingSpeedResult> {
    if spec.symbol_only {
        return Err(Error::InvalidInput(format!(
            "system '{}' is restricted to symbol-level analysis",
            spec.name
        )));
    }
    let p = SymbolPencil::from_spec(spec);
    let (c_seed, eta_seed) = envelope_seed(&p)?;
    let re = |r: &DoubleRoot| r.lambda.re;
    let mut r0 = find_double_root(&p, c_seed, (C64::new(0.0, 0.0), C64::new(-eta_seed, 0.0)))?;
    let mut c0 = c_seed;
    if re(&r0).abs() > 1e-12 {
        let mut c1 = c_seed * (1.0 + 1e-4);
        let mut r1 = find_double_root(&p, c1, (r0.lambda, r0.nu))?;
        let mut bracketed: Option<(f64, f64, f64, f64)> = None;
        for _ in 0..60 {
            let (g0, g1) = (re(&r0), re(&r1));
            if g0 * g1 < 0.0 {
                bracketed = Some((c0, g0, c1, g1));
            }
            let mut c2 = c1 - g1 * (c1 - c0) / (g1 - g0);
            if let Some((a, _, b, _)) = bracketed {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                if !(c2 > lo && c2 < hi) {
                    c2 = 0.5 * (lo + hi);
                }
            }
            let t = (c2 - c1) / (c1 - c0);
            let seed = (
                r1.lambda + (r1.lambda - r0.lambda) * t,
                r1.nu + (r1.nu - r0.nu) * t,
            );
            let r2 = find_double_root(&p, c2, seed)
                .or_else(|_| find_double_root(&p, c2, (r1.lambda, r1.nu)))?;
            c0 = c1;
            r0 = r1;
            c1 = c2;
            r1 = r2;
            if re(&r1).abs() < 1e-12 || (c1 - c0).abs() < 1e-15 * c1.abs() {
                break;
            }
        }
        c0 = c1;
        r0 = r1;
    }
    let root = r0;
    let c_star = c0;
    if root.lambda.re.abs() > 1e-10 {
        return Err(no_conv(
            "solve_spreading_speed",
            format!("Re λ_dr = {:e} at c = {c_star}", root.lambda.re),
        ));
    }
    if root.lambda.im.abs() > 1e-6 {
        return Err(Error::Hypothesis {
            which: "1".into(),
            detail: format!(
                "oscillatory double root (Im λ_dr = {}); only steady fronts are supported",
                root.lambda.im
            ),
        });
    }
    if !(c_star > bracket.0 && c_star < bracket.1) {
        return Err(Error::InvalidInput(format!(
            "no sign change of Re λ_dr in bracket [{}, {}] (marginal speed {c_star})",
            bracket.0, bracket.1
        )));
    }
    let eta_star = -root.nu.re;
    let (ii, iii, grid) = check_hyp1_grid(&p, c_star, -eta_star);
    Ok(SpreadingSpeedResult {
        c_star,
        eta_star,
        root,
        hyp1_ii: ii,
        hyp1_iii: iii,
        grid,
    })
}

/// Far-field spatial-eigenvalue expansion and sharpness report.
#[derive(Clone, Debug, Serialize)]
pub struct FarFieldReport {
    pub gammas: Vec<f64>,
    /// `(ν⁺(γ), ν⁻(γ))` per sample.
    pub small_roots: Vec<(C64, C64)>,
    pub slope_extrapolated: f64,
    pub slope_predicted: f64,
    /// `‖Π₁ P_pole Λ₁‖` (Frobenius) after extrapolation.
    pub pole_norm: f64,
    pub pole_nonzero: bool,
}

/// First-order matrix of `D u'' + A⁰¹ u' + A⁰ u = γ² u`.
fn far_field_matrix(p: &SymbolPencil, eta: f64, c: f64, gamma: f64) -> Result<DMatrix<f64>> {
    let n = p.n;
    let (a0, a01, a02) = p.shifted(eta, c);
    let dinv = a02
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("far-field expansion needs invertible D".into()))?;
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    m.view_mut((0, n), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    let k = DMatrix::<f64>::identity(n, n) * (gamma * gamma) - a0;
    m.view_mut((n, 0), (n, n)).copy_from(&(&dinv * k));
    m.view_mut((n, n), (n, n)).copy_from(&(-(&dinv * a01)));
    Ok(m)
}

fn spectral_projection(m: &DMatrix<C64>, target: C64) -> DMatrix<C64> {
    let (vals, vecs) = linalg::eigen(m);
    let (lvals, lvecs) = linalg::eigen(&m.transpose());
    let i = (0..vals.len())
        .min_by(|&a, &b| {
            (vals[a] - target)
                .norm()
                .total_cmp(&(vals[b] - target).norm())
        })
        .unwrap();
    let j = (0..lvals.len())
        .min_by(|&a, &b| {
            (lvals[a] - target)
                .norm()
                .total_cmp(&(lvals[b] - target).norm())
        })
        .unwrap();
    let v = vecs.column(i).into_owned();
    let w = lvecs.column(j).into_owned();
    let denom = (w.transpose() * &v)[(0, 0)];
    (&v * w.transpose()) / denom
}

/// Expansion `ν±(γ) = ±√(−d10/d02) γ + O(γ²)` and the pole of the center
/// projections, from samples `gammas` (each halving the previous).
pub fn far_field_expansion(
    p: &SymbolPencil,
    speed: &SpreadingSpeedResult,
    gammas: &[f64],
) -> Result<FarFieldReport> {
    if gammas.iter().any(|g| *g == 0.0) {
        return Err(Error::InvalidInput(
            "gamma = 0 is excluded: the center projections have a pole there".into(),
        ));
    }
    if gammas.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two gamma samples".into(),
        ));
    }
    let n = p.n;
    let (c, eta) = (speed.c_star, speed.eta_star);
    let mut slopes = Vec::new();
    let mut poles: Vec<DMatrix<C64>> = Vec::new();
    let mut small = Vec::new();
    for &g in gammas {
        let m = linalg::to_complex(&far_field_matrix(p, eta, c, g)?);
        let mut eig = linalg::eigenvalues(&m);
        eig.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        if eig.len() > 2 && eig[2].norm() < 10.0 * eig[1].norm() {
            return Err(Error::InvalidInput(format!(
                "gamma = {g} too large to separate the two small spatial eigenvalues"
            )));
        }
        let (mut np, mut nm) = (eig[0], eig[1]);
        if np.re < nm.re {
            std::mem::swap(&mut np, &mut nm);
        }
        small.push((np, nm));
        slopes.push(((np - nm) / (2.0 * g)).re);
        let pcu = spectral_projection(&m, np);
        let pcs = spectral_projection(&m, nm);
        poles.push((pcu - pcs) * C64::new(g / 2.0, 0.0));
    }
    let ratios: Vec<f64> = gammas.windows(2).map(|w| w[0] / w[1]).collect();
    let richardson = |vals: Vec<f64>| -> f64 {
        let mut v = vals;
        let mut level = 1;
        while v.len() > 1 {
            let next: Vec<f64> = v
                .windows(2)
                .zip(&ratios)
                .map(|(w, r)| {
                    let f = r.powi(2 * level);
                    (f * w[1] - w[0]) / (f - 1.0)
                })
                .collect();
            v = next;
            level += 1;
        }
        v[0]
    };
    let slope_extrapolated = richardson(slopes);
    let block = |pm: &DMatrix<C64>| -> DMatrix<C64> { pm.view((0, n), (n, n)).into_owned() };
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let re = richardson(poles.iter().map(|pm| block(pm)[(i, j)].re).collect());
            let im = richardson(poles.iter().map(|pm| block(pm)[(i, j)].im).collect());
            entries.push(re * re + im * im);
        }
    }
    let pole_norm = entries.iter().sum::<f64>().sqrt();
    let ratio = -(speed.root.d10 / speed.root.d02);
    Ok(FarFieldReport {
        gammas: gammas.to_vec(),
        small_roots: small,
        slope_extrapolated,
        slope_predicted: ratio.sqrt().re,
        pole_norm,
        pole_nonzero: pole_norm > 1e-6,
    })
}

/// Residuals `|d_c(λ_dr + ρh², ν_dr + h) − (d10 ρh² + d02 h²)|` and the
/// fitted log-log slope; `None` when every residual sits at rounding level.
pub fn expansion_order(
    p: &SymbolPencil,
    root: &DoubleRoot,
    hs: &[f64],
    rho: f64,
) -> (Vec<f64>, Option<f64>) {
    let t = p.taylor(root.lambda, root.nu, root.c, 1.0);
    let scale = t
        .coeffs
        .iter()
        .flatten()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let res: Vec<f64> = hs
        .iter()
        .map(|&h| {
            let lam = root.lambda + rho * h * h;
            let nu = root.nu + h;
            (p.det(lam, nu, root.c) - (root.d10 * rho * h * h + root.d02 * h * h)).norm()
        })
        .collect();
    let floor = 1e-13 * scale.max(1.0);
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(&res)
        .filter(|(_, r)| **r > 100.0 * floor)
        .map(|(h, r)| (h.ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return (res, None);
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (res, Some((m * sxy - sx * sy) / (m * sxx - sx * sx)))
}
