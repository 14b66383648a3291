//! Direct simulation of `u_t = D u_xx + f(u)` from steep initial data, front
//! tracking and comparison with the critical front.
//!
//! Time stepping is the second-order IMEX backward differentiation scheme:
//! diffusion and the constant part of the frame advection are implicit, the
//! reaction and the time-dependent drift `−3/(2η_*(t+T)) ∂_y` are explicit.
//! The first step is IMEX Euler.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::front::FrontProfile;
use crate::linalg::Banded;
use crate::spectral::WeightSpec;
use crate::systems::SystemSpec;

/// Initial data.
#[derive(Clone, Debug, Serialize)]
pub enum InitialData {
    /// `u_-` for `x < x0`, the unstable state otherwise.
    Step { x0: f64 },
    /// The critical front placed with its normalization origin at `x0`,
    /// replaced by the unstable state for `x > x0 + cut`.
    CutoffFront {
        #[serde(skip)]
        front: Box<FrontProfile>,
        x0: f64,
        cut: f64,
    },
    /// `u_-` for `x < x0`, `u_+ + (u_- − u_+) e^{−steepness (x − x0)}` beyond.
    Exponential { x0: f64, steepness: f64 },
    /// Node values in natural coordinates, one `n`-vector per grid node.
    Samples(Vec<Vec<f64>>),
}

/// Reference frame of the simulation.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub enum Frame {
    Lab,
    /// `y = x − σ̃(t)` with `σ̃(t) = c_* t − (3/(2η_*)) log((t+T)/T)`.
    Comoving { c_star: f64, eta_star: f64, t_shift: f64 },
}

impl Frame {
    /// Lab position of the frame origin at time `t`.
    pub fn offset(&self, t: f64) -> f64 {
        match *self {
            Frame::Lab => 0.0,
            Frame::Comoving { c_star, eta_star, t_shift } => {
                c_star * t - 1.5 / eta_star * ((t + t_shift) / t_shift).ln()
            }
        }
    }
}

/// Simulation parameters.
#[derive(Clone, Debug, Serialize)]
pub struct SimConfig {
    pub x_l: f64,
    pub x_r: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    pub initial: InitialData,
    /// Crossing level as a fraction of the jump from `u_+` to `u_-` in the
    /// first component.
    pub h_track: f64,
    pub frame: Frame,
    /// Time between stored snapshots.
    pub snapshot_every: f64,
    /// Fit window starts at `fit_start · t_end`.
    pub fit_start: f64,
    /// Monotonicity of the front position is checked after this time.
    pub t_burn: f64,
}

impl SimConfig {
    pub fn new(x_l: f64, x_r: f64, dx: f64, dt: f64, t_end: f64) -> SimConfig {
        SimConfig {
            x_l,
            x_r,
            dx,
            dt,
            t_end,
            initial: InitialData::Step { x0: 0.0 },
            h_track: 0.5,
            frame: Frame::Lab,
            snapshot_every: 1.0,
            fit_start: 0.25,
            t_burn: 10.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.x_r > self.x_l) || !(self.dx > 0.0) || !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return bad(format!(
                "need x_l < x_r and positive dx, dt, t_end (got {:?}, {}, {}, {})",
                (self.x_l, self.x_r),
                self.dx,
                self.dt,
                self.t_end
            ));
        }
        if !(self.h_track > 0.0 && self.h_track < 1.0) {
            return bad(format!("h_track must lie in (0, 1), got {}", self.h_track));
        }
        if !(self.snapshot_every > 0.0) {
            return bad("snapshot spacing must be positive".into());
        }
        if !(self.fit_start > 0.0 && self.fit_start < 1.0) {
            return bad("fit window start must be a fraction in (0, 1)".into());
        }
        Ok(())
    }

    /// Number of grid nodes including both boundary nodes.
    pub fn nodes(&self) -> usize {
        ((self.x_r - self.x_l) / self.dx).round() as usize + 1
    }
}

/// Strided snapshots of a simulation.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub n: usize,
    /// Grid in the simulation frame.
    pub x: Vec<f64>,
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
    pub frame: Frame,
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    /// `dt · max eig D / dx²`; the implicit scheme has no restriction on it.
    pub diffusion_number: f64,
    pub times: Vec<f64>,
    /// Node-major values: `snapshots[k][i * n + j]` is component `j` at node `i`.
    #[serde(skip)]
    pub snapshots: Vec<Vec<f64>>,
    /// Supremum norm at each snapshot.
    pub sup_norm: Vec<f64>,
}

impl Trajectory {
    /// Component `j` of snapshot `k` at node `i`.
    pub fn value(&self, k: usize, i: usize, j: usize) -> f64 {
        self.snapshots[k][i * self.n + j]
    }

    /// Snapshot `k` as `n`-vectors per node.
    pub fn nodes(&self, k: usize) -> Vec<Vec<f64>> {
        self.snapshots[k].chunks(self.n).map(|c| c.to_vec()).collect()
    }

    /// Value at lab position `x` of snapshot `k`, by 4-point Lagrange
    /// interpolation; `None` outside the grid.
    pub fn interpolate(&self, k: usize, x_lab: f64) -> Option<Vec<f64>> {
        let y = x_lab - self.frame.offset(self.times[k]);
        let m = self.x.len();
        let t = (y - self.x[0]) / self.dx;
        if t < 0.0 || t > (m - 1) as f64 {
            return None;
        }
        let i0 = (t.floor() as isize - 1).clamp(0, m as isize - 4) as usize;
        let mut out = vec![0.0; self.n];
        for a in 0..4 {
            let mut l = 1.0;
            for b in 0..4 {
                if a != b {
                    l *= (t - (i0 + b) as f64) / (a as f64 - b as f64);
                }
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += l * self.value(k, i0 + a, j);
            }
        }
        Some(out)
    }

    /// Columnar CSV `t, x, u1, …, un`, keeping every `snapshot_stride`-th
    /// stored snapshot and every `stride`-th node.
    pub fn to_csv(&self, stride: usize, snapshot_stride: usize) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("t,x");
        for j in 0..self.n {
            let _ = write!(s, ",u{}", j + 1);
        }
        s.push('\n');
        for (k, t) in self.times.iter().enumerate().step_by(snapshot_stride.max(1)) {
            for i in (0..self.x.len()).step_by(stride.max(1)) {
                let _ = write!(s, "{t},{}", self.x[i]);
                for j in 0..self.n {
                    let _ = write!(s, ",{:e}", self.value(k, i, j));
                }
                s.push('\n');
            }
        }
        s
    }
}

fn initial_values(spec: &SystemSpec, cfg: &SimConfig, x: &[f64], um: &[f64], up: &[f64]) -> Result<Vec<f64>> {
    let n = spec.n;
    let m = x.len();
    let mut u = vec![0.0; m * n];
    match &cfg.initial {
        InitialData::Step { x0 } => {
            for (i, &xi) in x.iter().enumerate() {
                let src = if xi < *x0 { um } else { up };
                u[i * n..(i + 1) * n].copy_from_slice(src);
            }
        }
        InitialData::Exponential { x0, steepness } => {
            for (i, &xi) in x.iter().enumerate() {
                let w = if xi < *x0 { 1.0 } else { (-steepness * (xi - x0)).exp() };
                for j in 0..n {
                    u[i * n + j] = up[j] + w * (um[j] - up[j]);
                }
            }
        }
        InitialData::CutoffFront { front, x0, cut } => {
            if front.n != n {
                return Err(Error::InvalidInput("front and system sizes differ".into()));
            }
            let shift = &front.origin_shift;
            for (i, &xi) in x.iter().enumerate() {
                let z = xi - x0;
                if z > *cut {
                    u[i * n..(i + 1) * n].copy_from_slice(up);
                    continue;
                }
                let q = front.eval(front.origin + z);
                for j in 0..n {
                    u[i * n + j] = q[j] + shift.get(j).copied().unwrap_or(0.0);
                }
            }
        }
        InitialData::Samples(rows) => {
            if rows.len() != m || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidInput(format!(
                    "custom initial data needs {m} rows of {n} values"
                )));
            }
            for (i, r) in rows.iter().enumerate() {
                u[i * n..(i + 1) * n].copy_from_slice(r);
            }
        }
    }
    Ok(u)
}

/// Block-banded matrix `a I − (D δ² + c δ)` on the interior nodes.
fn implicit_matrix(d: &DMatrix<f64>, c: f64, a: f64, interior: usize, dx: f64) -> Result<Banded<f64>> {
    let n = d.nrows();
    let band = 2 * n - 1;
    let mut mat = Banded::<f64>::zeros(interior * n, band, band);
    let (h2, h1) = (1.0 / (dx * dx), 1.0 / (2.0 * dx));
    for i in 0..interior {
        for j in 0..n {
            let row = i * n + j;
            mat.add(row, row, a);
            for k in 0..n {
                let djk = d[(j, k)];
                let ck = if j == k { c } else { 0.0 };
                mat.add(row, i * n + k, 2.0 * djk * h2);
                if i > 0 {
                    mat.add(row, (i - 1) * n + k, -djk * h2 + ck * h1);
                }
                if i + 1 < interior {
                    mat.add(row, (i + 1) * n + k, -djk * h2 - ck * h1);
                }
            }
        }
    }
    mat.factor().map_err(|p| Error::NonConvergence {
        stage: "integrate".into(),
        detail: format!("implicit diffusion matrix singular at row {}", p.0),
    })?;
    Ok(mat)
}

/// Integrates the system and stores snapshots every `cfg.snapshot_every`.
pub fn integrate(spec: &SystemSpec, cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if spec.symbol_only {
        return Err(Error::InvalidInput(format!(
            "system '{}' is symbol-only and cannot be simulated",
            spec.name
        )));
    }
    if spec.advection.is_some() {
        return Err(Error::InvalidInput("systems with advection are not simulated".into()));
    }
    let n = spec.n;
    let up = spec
        .unstable_state()
        .ok_or_else(|| Error::InvalidInput("system has no unstable state".into()))?
        .to_vec();
    let um = spec.wake_state().map(|w| w.to_vec()).unwrap_or_else(|| up.clone());
    let m = cfg.nodes();
    let x: Vec<f64> = (0..m).map(|i| cfg.x_l + i as f64 * cfg.dx).collect();
    let mut u = initial_values(spec, cfg, &x, &um, &up)?;
    // Dirichlet data
    u[..n].copy_from_slice(&um);
    u[(m - 1) * n..].copy_from_slice(&up);

    let (c_frame, drift): (f64, Box<dyn Fn(f64) -> f64>) = match cfg.frame {
        Frame::Lab => (0.0, Box::new(|_| 0.0)),
        Frame::Comoving { c_star, eta_star, t_shift } => {
            if !(t_shift > 0.0 && eta_star > 0.0) {
                return Err(Error::InvalidInput("comoving frame needs T > 0 and eta > 0".into()));
            }
            (c_star, Box::new(move |t: f64| -1.5 / (eta_star * (t + t_shift))))
        }
    };
    let interior = m - 2;
    let dt = cfg.dt;
    let euler = implicit_matrix(&spec.d, c_frame, 1.0 / dt, interior, cfg.dx)?;
    let bdf2 = implicit_matrix(&spec.d, c_frame, 1.5 / dt, interior, cfg.dx)?;
    // boundary contributions of the implicit operator
    let (h2, h1) = (1.0 / (cfg.dx * cfg.dx), 1.0 / (2.0 * cfg.dx));
    let bl: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|k| spec.d[(j, k)] * um[k] * h2).sum::<f64>() - c_frame * h1 * um[j])
        .collect();
    let br: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|k| spec.d[(j, k)] * up[k] * h2).sum::<f64>() + c_frame * h1 * up[j])
        .collect();

    let explicit = |u: &[f64], t: f64, out: &mut [f64], stack: &mut Vec<f64>| {
        let beta = drift(t);
        for i in 1..m - 1 {
            spec.f_into_with(&u[i * n..(i + 1) * n], &mut out[(i - 1) * n..i * n], stack);
            if beta != 0.0 {
                for j in 0..n {
                    out[(i - 1) * n + j] += beta * (u[(i + 1) * n + j] - u[(i - 1) * n + j]) * h1;
                }
            }
        }
    };

    let limit = 10.0 * (1.0 + um.iter().chain(&up).fold(0.0f64, |a, v| a.max(v.abs())));
    let steps = (cfg.t_end / dt).round() as usize;
    let snap_stride = ((cfg.snapshot_every / dt).round() as usize).max(1);
    let dmax = crate::linalg::eigenvalues(&crate::linalg::to_complex(&spec.d))
        .iter()
        .fold(0.0f64, |a, l| a.max(l.re));
    let mut traj = Trajectory {
        n,
        x: x.clone(),
        dx: cfg.dx,
        dt,
        steps,
        frame: cfg.frame,
        u_minus: um.clone(),
        u_plus: up.clone(),
        diffusion_number: dt * dmax / (cfg.dx * cfg.dx),
        times: vec![0.0],
        snapshots: vec![u.clone()],
        sup_norm: vec![u.iter().fold(0.0f64, |a, v| a.max(v.abs()))],
    };
    let len = interior * n;
    let mut f_prev = vec![0.0; len];
    let mut f_cur = vec![0.0; len];
    let mut u_prev = u.clone();
    let mut rhs = vec![0.0; len];
    let mut stack = Vec::new();
    explicit(&u, 0.0, &mut f_cur, &mut stack);
    for step in 1..=steps {
        if step == 1 {
            for r in 0..len {
                rhs[r] = u[n + r] / dt + f_cur[r];
            }
        } else {
            for r in 0..len {
                rhs[r] = (2.0 * u[n + r] - 0.5 * u_prev[n + r]) / dt + 2.0 * f_cur[r] - f_prev[r];
            }
        }
        for j in 0..n {
            rhs[j] += bl[j];
            rhs[len - n + j] += br[j];
        }
        if step == 1 {
            euler.solve_in_place(&mut rhs);
        } else {
            bdf2.solve_in_place(&mut rhs);
        }
        std::mem::swap(&mut u_prev, &mut u);
        u.copy_from_slice(&u_prev);
        u[n..n + len].copy_from_slice(&rhs);
        let t = step as f64 * dt;
        let sup = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(sup <= limit) {
            return Err(Error::NonConvergence {
                stage: "integrate".into(),
                detail: format!("blow-up at t = {t}: sup norm {sup:e} exceeds {limit}"),
            });
        }
        std::mem::swap(&mut f_prev, &mut f_cur);
        explicit(&u, t, &mut f_cur, &mut stack);
        if step % snap_stride == 0 || step == steps {
            traj.times.push(t);
            traj.snapshots.push(u.clone());
            traj.sup_norm.push(sup);
        }
    }
    Ok(traj)
}

/// Least-squares fit of `X(t) = c t − κ log t + x∞`.
#[derive(Clone, Debug, Serialize)]
pub struct PositionFit {
    pub c: f64,
    pub kappa: f64,
    pub x_inf: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Parameter covariance in the order `(c, κ, x∞)`.
    pub covariance: [[f64; 3]; 3],
    /// Change of `(c, κ, x∞)` when a `t^{-1/2}` term is added to the model;
    /// an estimate of the error from truncating the asymptotic expansion.
    pub truncation: [f64; 3],
    pub samples: usize,
}

impl PositionFit {
    pub fn position(&self, t: f64) -> f64 {
        self.c * t - self.kappa * t.ln() + self.x_inf
    }

    /// One-standard-deviation statistical error bars of `(c, κ, x∞)`.
    pub fn errors(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    /// Statistical and truncation errors combined in quadrature.
    pub fn total_errors(&self) -> [f64; 3] {
        let e = self.errors();
        [0, 1, 2].map(|i| e[i].hypot(self.truncation[i]))
    }
}

/// Fits `X(t) = c t − κ log t + x∞` to positive times.
pub fn fit_position(times: &[f64], positions: &[f64]) -> Result<PositionFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(positions)
        .filter(|(t, x)| **t > 0.0 && x.is_finite())
        .map(|(t, x)| (*t, *x))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InvalidInput("at least four positive times are needed for the fit".into()));
    }
    let a = DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => pts[i].0,
        1 => -pts[i].0.ln(),
        _ => 1.0,
    });
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let mut truncation = [0.0; 3];
    if pts.len() >= 8 {
        let a4 = DMatrix::from_fn(pts.len(), 4, |i, j| if j < 3 { a[(i, j)] } else { pts[i].0.powf(-0.5) });
        if let Some(inv4) = (a4.transpose() * &a4).try_inverse() {
            let p4 = inv4 * (a4.transpose() * &b);
            let p3 = (a.transpose() * &a)
                .try_inverse()
                .map(|inv| inv * (a.transpose() * &b));
            if let Some(p3) = p3 {
                truncation = [0, 1, 2].map(|i| (p4[i] - p3[i]).abs());
            }
        }
    }
    let ata = a.transpose() * &a;
    let inv = ata
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("degenerate time samples for the position fit".into()))?;
    let p = &inv * (a.transpose() * &b);
    let r = &a * &p - &b;
    let ssr = r.norm_squared();
    let dof = (pts.len() - 3).max(1) as f64;
    let s2 = ssr / dof;
    let mut covariance = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            covariance[i][j] = s2 * inv[(i, j)];
        }
    }
    Ok(PositionFit {
        c: p[0],
        kappa: p[1],
        x_inf: p[2],
        residual: (ssr / pts.len() as f64).sqrt(),
        covariance,
        truncation,
        samples: pts.len(),
    })
}

/// Front positions and the fitted asymptotics.
#[derive(Clone, Debug, Serialize)]
pub struct FrontTrack {
    pub times: Vec<f64>,
    /// Lab-frame positions of the rightmost threshold crossing.
    pub positions: Vec<f64>,
    pub level: f64,
    pub window: (f64, f64),
    pub fit: PositionFit,
    /// False when the fit residual exceeds `dx / 2`.
    pub reliable: bool,
    /// Positions do not decrease after the burn-in time.
    pub monotone_after_burn: bool,
    /// `κ_fit > 0.8`: the fitted delay has the sign and size of a pulled front.
    pub pulled_consistent: bool,
    pub warnings: Vec<String>,
}

impl FrontTrack {
    /// CSV `t, X, X − c_* t, y` for delay plots, where `y` is the position in
    /// the simulation frame.
    pub fn delay_csv(&self, c_star: f64, frame: &Frame) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("t,X,X_minus_cstar_t,y\n");
        for (t, x) in self.times.iter().zip(&self.positions) {
            let _ = writeln!(s, "{t},{x},{},{}", x - c_star * t, x - frame.offset(*t));
        }
        s
    }
}

/// Smallest fitted delay coefficient accepted as a pulled-front delay.
pub const PULLED_KAPPA_MIN: f64 = 0.8;

/// Rightmost crossing of `level` by component 0 of snapshot `k`, in the
/// simulation frame.
fn crossing(traj: &Trajectory, k: usize, level: f64) -> Option<f64> {
    let side = |v: f64| (v - level) * (traj.u_minus[0] - level) > 0.0;
    let m = traj.x.len();
    for i in (0..m - 1).rev() {
        let (a, b) = (traj.value(k, i, 0), traj.value(k, i + 1, 0));
        if side(a) && !side(b) {
            let s = (level - a) / (b - a);
            return Some(traj.x[i] + s * traj.dx);
        }
    }
    None
}

/// Tracks the front and fits its position over `[fit_start · t_end, t_end]`.
pub fn track_front(traj: &Trajectory, cfg: &SimConfig) -> Result<FrontTrack> {
    let level = traj.u_plus[0] + cfg.h_track * (traj.u_minus[0] - traj.u_plus[0]);
    if (traj.u_minus[0] - traj.u_plus[0]).abs() < 1e-12 {
        return Err(Error::InvalidInput("first component does not change across the front".into()));
    }
    let mut times = Vec::new();
    let mut positions = Vec::new();
    let mut warnings = Vec::new();
    for k in 0..traj.times.len() {
        match crossing(traj, k, level) {
            Some(y) => {
                let t = traj.times[k];
                if y > traj.x[traj.x.len() - 1] - 1e-9 {
                    warnings.push(format!("front reached the right boundary at t = {t}"));
                    break;
                }
                times.push(t);
                positions.push(y + traj.frame.offset(t));
            }
            None if k == 0 => continue,
            None => {
                warnings.push(format!(
                    "no crossing at t = {}; track truncated",
                    traj.times[k]
                ));
                break;
            }
        }
    }
    let t_end = *traj.times.last().unwrap();
    let window = (cfg.fit_start * t_end, t_end);
    let (wt, wx): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&positions)
        .filter(|(t, _)| **t >= window.0 && **t > 0.0)
        .map(|(t, x)| (*t, *x))
        .unzip();
    if wt.len() < 50 {
        return Err(Error::InvalidInput(format!(
            "fit window [{}, {}] holds {} samples, at least 50 are needed",
            window.0,
            window.1,
            wt.len()
        )));
    }
    let fit = fit_position(&wt, &wx)?;
    let reliable = fit.residual <= 0.5 * traj.dx;
    if !reliable {
        warnings.push(format!(
            "fit residual {:.3e} exceeds dx/2; fit flagged unreliable",
            fit.residual
        ));
    }
    let pulled_consistent = fit.kappa > PULLED_KAPPA_MIN;
    if !pulled_consistent {
        warnings.push(format!(
            "fitted kappa {:.3} is inconsistent with a pulled front",
            fit.kappa
        ));
    }
    let monotone_after_burn = times
        .iter()
        .zip(&positions)
        .filter(|(t, _)| **t > cfg.t_burn)
        .map(|(_, x)| *x)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-9);
    Ok(FrontTrack {
        times,
        positions,
        level,
        window,
        fit,
        reliable,
        monotone_after_burn,
        pulled_consistent,
        warnings,
    })
}

/// Weighted distance between the solution and the critical front.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub times: Vec<f64>,
    /// `d(t) = sup_x |ρ_{0,−1}(x) ω(x) [u(x + σ_fit(t), t) − q_*(x)]|` over the
    /// front grid.
    pub distances: Vec<f64>,
    /// Snapshots whose shifted grid left the simulation domain.
    pub skipped: Vec<f64>,
    /// Front coordinate of the crossing of `q_*` at the tracking level.
    pub front_crossing: f64,
    /// Front coordinates over which the supremum is taken.
    pub extent: (f64, f64),
    pub epsilon: f64,
    /// Earliest time from which `d` stays below `epsilon`.
    pub t_star: Option<f64>,
    pub decreasing: bool,
    pub final_distance: f64,
    pub pass: bool,
}

/// Default tolerance of the convergence verdict.
pub const CONVERGENCE_EPS: f64 = 0.1;

/// Compares each snapshot in the fit window with the critical front shifted
/// to the fitted position, in the weight `ρ_{0,−1} ω` (with `ω` from `w`).
pub fn compare_to_front(
    traj: &Trajectory,
    front: &FrontProfile,
    track: &FrontTrack,
    w: &WeightSpec,
    epsilon: f64,
) -> Result<ConvergenceReport> {
    compare_to_front_within(traj, front, track, w, epsilon, None)
}

/// As [`compare_to_front`], with the supremum restricted to front
/// coordinates `z ∈ [z_lo, z_hi]` when a window is given.
pub fn compare_to_front_within(
    traj: &Trajectory,
    front: &FrontProfile,
    track: &FrontTrack,
    w: &WeightSpec,
    epsilon: f64,
    window: Option<(f64, f64)>,
) -> Result<ConvergenceReport> {
    if front.n != traj.n {
        return Err(Error::InvalidInput("front and trajectory sizes differ".into()));
    }
    let rho = WeightSpec::new(0.0, 0.0, -1.0)?;
    // the front is stored relative to the unstable state
    let shift = &front.origin_shift;
    let natural = |z: f64| -> Vec<f64> {
        let q = front.eval(front.origin + z);
        q.iter()
            .enumerate()
            .map(|(j, v)| v + shift.get(j).copied().unwrap_or(0.0))
            .collect()
    };
    // crossing of the front at the tracking level, in front coordinates
    let z_min = front.x[0] - front.origin;
    let z_max = front.x[front.x.len() - 1] - front.origin;
    let above = |z: f64| (natural(z)[0] - track.level) * (traj.u_minus[0] - track.level) > 0.0;
    let (mut lo, mut hi) = (z_min, z_max);
    if !above(lo) || above(hi) {
        return Err(Error::InvalidInput("front does not cross the tracking level".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let zc = 0.5 * (lo + hi);
    let (w_lo, w_hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let zs: Vec<f64> = front
        .x
        .iter()
        .map(|x| x - front.origin)
        .filter(|z| *z >= w_lo && *z <= w_hi)
        .collect();
    if zs.is_empty() {
        return Err(Error::InvalidInput("comparison window misses the front grid".into()));
    }
    let qs: Vec<Vec<f64>> = zs.iter().map(|&z| natural(z)).collect();
    let mut times = Vec::new();
    let mut distances = Vec::new();
    let mut skipped = Vec::new();
    for (k, &t) in traj.times.iter().enumerate() {
        if t < track.window.0 || t <= 0.0 {
            continue;
        }
        let sigma = track.fit.position(t);
        let mut d = 0.0f64;
        let mut ok = true;
        for (z, q) in zs.iter().zip(&qs) {
            let Some(u) = traj.interpolate(k, sigma + z - zc) else {
                ok = false;
                break;
            };
            let wgt = rho.rho(*z) * w.omega(*z);
            for j in 0..traj.n {
                d = d.max((wgt * (u[j] - q[j])).abs());
            }
        }
        if ok {
            times.push(t);
            distances.push(d);
        } else {
            skipped.push(t);
        }
    }
    if distances.is_empty() {
        return Err(Error::InvalidInput("no snapshot could be compared with the front".into()));
    }
    let final_distance = *distances.last().unwrap();
    let t_star = (0..distances.len())
        .find(|&i| distances[i..].iter().all(|d| *d < epsilon))
        .map(|i| times[i]);
    let decreasing = is_decreasing(&distances);
    Ok(ConvergenceReport {
        times,
        distances,
        skipped,
        front_crossing: zc,
        extent: (zs[0], zs[zs.len() - 1]),
        epsilon,
        t_star,
        decreasing,
        final_distance,
        pass: t_star.is_some(),
    })
}

/// Decrease across the window: the least-squares slope against time is
/// negative and the last value is below the first.
pub fn is_decreasing(values: &[f64]) -> bool {
    if values.len() < 2 {
        return false;
    }
    let n = values.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = values.iter().sum::<f64>() / n;
    let slope: f64 = values
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 - mx) * (v - my))
        .sum();
    slope < 0.0 && values[values.len() - 1] < values[0]
}

/// Fits at several tracking levels.
#[derive(Clone, Debug, Serialize)]
pub struct LevelSensitivity {
    pub levels: Vec<f64>,
    pub fits: Vec<PositionFit>,
    /// Largest pairwise differences of `c` and `κ` across the levels.
    pub c_spread: f64,
    pub kappa_spread: f64,
    /// Largest total error bars of `c` and `κ` across the levels.
    pub c_error: f64,
    pub kappa_error: f64,
    /// Both spreads are within the error bars.
    pub within_error_bars: bool,
}

/// Default tracking levels of [`level_sensitivity`].
pub const SENSITIVITY_LEVELS: [f64; 3] = [0.25, 0.5, 0.75];

/// Refits the front position at each tracking level.
pub fn level_sensitivity(traj: &Trajectory, cfg: &SimConfig, levels: &[f64]) -> Result<LevelSensitivity> {
    let mut fits = Vec::new();
    for &h in levels {
        let mut c = cfg.clone();
        c.h_track = h;
        c.validate()?;
        fits.push(track_front(traj, &c)?.fit);
    }
    let spread = |f: &dyn Fn(&PositionFit) -> f64| {
        let (lo, hi) = fits.iter().map(f).fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
        hi - lo
    };
    let c_spread = spread(&|p| p.c);
    let kappa_spread = spread(&|p| p.kappa);
    let c_error = fits.iter().map(|p| p.total_errors()[0]).fold(0.0, f64::max);
    let kappa_error = fits.iter().map(|p| p.total_errors()[1]).fold(0.0, f64::max);
    Ok(LevelSensitivity {
        levels: levels.to_vec(),
        c_spread,
        kappa_spread,
        c_error,
        kappa_error,
        within_error_bars: c_spread <= c_error && kappa_spread <= kappa_error,
        fits,
    })
}

/// Requires the front, started at `x_start` and moving with `c_star`, to stay
/// at least `50/η_*` away from `X_R` at `t_end`.
pub fn check_domain(cfg: &SimConfig, x_start: f64, c_star: f64, eta_star: f64) -> Result<()> {
    let end = match cfg.frame {
        Frame::Lab => x_start + c_star * cfg.t_end,
        Frame::Comoving { .. } => x_start,
    };
    let need = 50.0 / eta_star;
    if cfg.x_r - end < need {
        return Err(Error::InvalidInput(format!(
            "front would reach x = {end:.1} at t = {}, within {need:.1} of X_R = {}; enlarge the domain",
            cfg.t_end, cfg.x_r
        )));
    }
    Ok(())
}

impl InitialData {
    /// Lab position where the data switch to the unstable state.
    pub fn start(&self) -> f64 {
        match self {
            InitialData::Step { x0 } | InitialData::Exponential { x0, .. } => *x0,
            InitialData::CutoffFront { x0, .. } => *x0,
            InitialData::Samples(_) => 0.0,
        }
    }
}
