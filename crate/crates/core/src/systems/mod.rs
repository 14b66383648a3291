//! Reaction-diffusion systems `u_t = D u_xx + G u_x + f(u)`: the registry of
//! example families and ingestion of user systems from JSON.
//!
//! `G` is an optional advection matrix used only by the symbol-level
//! `hidden_diffusion` example; every parabolic system has `G = 0`.

pub mod builtin;
pub mod expr;

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use expr::{Expr, Program};

pub use builtin::{builtin, BUILTIN_NAMES};

/// Role of a registered equilibrium.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "unstable-origin")]
    UnstableOrigin,
    #[serde(rename = "wake-state")]
    WakeState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumConfig {
    pub point: Vec<f64>,
    pub role: Role,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// On-disk description of a system, in the coordinates the user wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub name: String,
    pub n: usize,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    pub reactions: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub equilibria: Vec<EquilibriumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advection: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub symbol_only: bool,
}

/// A validated system. Immutable after construction.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub name: String,
    pub n: usize,
    pub d: DMatrix<f64>,
    pub advection: Option<DMatrix<f64>>,
    pub params: BTreeMap<String, f64>,
    pub equilibria: Vec<EquilibriumConfig>,
    /// Restricts the system to symbol-level analyses (singular `D`).
    pub symbol_only: bool,
    /// Admissibility warnings collected at construction.
    pub warnings: Vec<String>,
    /// Translation applied by [`SystemSpec::centered`], zero otherwise.
    pub origin_shift: Vec<f64>,
    config: SystemConfig,
    reactions: Vec<Expr>,
    jacobian: Vec<Expr>,
    f_prog: Vec<Program>,
    j_prog: Vec<Program>,
    pvals: Vec<f64>,
}

const EQUILIBRIUM_TOL: f64 = 1e-10;
const JACOBIAN_TOL: f64 = 1e-6;

fn locate(source: Option<&str>, index: usize, expr_src: &str, column: usize) -> String {
    if let Some(text) = source {
        if let Ok(quoted) = serde_json::to_string(expr_src) {
            if let Some(pos) = text.find(&quoted) {
                let before = &text[..pos];
                let line = before.matches('\n').count() + 1;
                let line_start = before.rfind('\n').map(|p| p + 1).unwrap_or(0);
                let col = text[line_start..pos].chars().count() + 1 + column;
                return format!("line {line}, column {col} (reactions[{index}])");
            }
        }
    }
    format!("reactions[{index}], column {column}")
}

impl SystemSpec {
    /// Validates a configuration and builds the system.
    pub fn from_config(cfg: &SystemConfig) -> Result<SystemSpec> {
        Self::from_config_with_source(cfg, None)
    }

    fn from_config_with_source(cfg: &SystemConfig, source: Option<&str>) -> Result<SystemSpec> {
        let n = cfg.n;
        if n == 0 {
            return Err(Error::InvalidSystem(
                "component count must be positive".into(),
            ));
        }
        if cfg.d.len() != n * n {
            return Err(Error::InvalidSystem(format!(
                "D has {} entries, expected {}",
                cfg.d.len(),
                n * n
            )));
        }
        if cfg.reactions.len() != n {
            return Err(Error::InvalidSystem(format!(
                "{} reaction expressions for {} components",
                cfg.reactions.len(),
                n
            )));
        }
        let d = DMatrix::from_row_slice(n, n, &cfg.d);
        let advection = match &cfg.advection {
            Some(g) if g.len() != n * n => {
                return Err(Error::InvalidSystem(
                    "advection matrix has wrong size".into(),
                ))
            }
            Some(g) => Some(DMatrix::from_row_slice(n, n, g)),
            None => None,
        };
        if !cfg.symbol_only {
            for ev in d.complex_eigenvalues().iter() {
                if ev.re <= 0.0 {
                    return Err(Error::InvalidSystem(format!(
                        "diffusion matrix has eigenvalue {} with non-positive real part",
                        fmt_complex(ev.re, ev.im)
                    )));
                }
            }
        }
        let names: Vec<String> = cfg.params.keys().cloned().collect();
        let pvals: Vec<f64> = cfg.params.values().copied().collect();
        let mut reactions = Vec::with_capacity(n);
        for (i, src) in cfg.reactions.iter().enumerate() {
            let e = expr::parse(src, n, &names).map_err(|err| Error::Parse {
                location: locate(source, i, src, err.column),
                message: err.message,
            })?;
            reactions.push(e);
        }
        for e in &cfg.equilibria {
            if e.point.len() != n {
                return Err(Error::InvalidSystem(
                    "equilibrium has wrong dimension".into(),
                ));
            }
        }
        let spec = Self::assemble(cfg.clone(), d, advection, reactions, pvals, vec![0.0; n]);
        spec.check_invariants()?;
        Ok(spec)
    }

    fn assemble(
        config: SystemConfig,
        d: DMatrix<f64>,
        advection: Option<DMatrix<f64>>,
        reactions: Vec<Expr>,
        pvals: Vec<f64>,
        origin_shift: Vec<f64>,
    ) -> SystemSpec {
        let n = config.n;
        let mut jacobian = Vec::with_capacity(n * n);
        for r in &reactions {
            for j in 0..n {
                jacobian.push(r.diff(j));
            }
        }
        let f_prog = reactions.iter().map(|e| e.compile(&pvals)).collect();
        let j_prog = jacobian.iter().map(|e| e.compile(&pvals)).collect();
        let equilibria = config
            .equilibria
            .iter()
            .map(|e| EquilibriumConfig {
                point: e
                    .point
                    .iter()
                    .zip(&origin_shift)
                    .map(|(p, s)| p - s)
                    .collect(),
                role: e.role,
            })
            .collect();
        SystemSpec {
            name: config.name.clone(),
            n,
            d,
            advection,
            params: config.params.clone(),
            equilibria,
            symbol_only: config.symbol_only,
            warnings: Vec::new(),
            origin_shift,
            config,
            reactions,
            jacobian,
            f_prog,
            j_prog,
            pvals,
        }
    }

    fn check_invariants(&self) -> Result<()> {
        for e in &self.equilibria {
            let r = self.f(&e.point);
            let scale = 1.0 + e.point.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if r.amax() > EQUILIBRIUM_TOL * scale {
                return Err(Error::InvalidSystem(format!(
                    "f does not vanish at equilibrium {:?} (residual {:e})",
                    e.point,
                    r.amax()
                )));
            }
        }
        let mismatch = self.jacobian_mismatch(10, 0x5eed);
        if mismatch > JACOBIAN_TOL {
            return Err(Error::InvalidSystem(format!(
                "symbolic Jacobian disagrees with finite differences (relative {mismatch:e})"
            )));
        }
        Ok(())
    }

    /// Largest relative mismatch between the symbolic Jacobian and a central
    /// finite-difference Jacobian over `samples` random points of the unit ball.
    pub fn jacobian_mismatch(&self, samples: usize, seed: u64) -> f64 {
        let n = self.n;
        let mut rng = StdRng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let radius: f64 = rng.gen_range(0.0..1.0f64).powf(1.0 / n as f64);
            if norm > 0.0 {
                u.iter_mut().for_each(|x| *x *= radius / norm);
            }
            let j = self.jf(&u);
            let h = 1e-5;
            for k in 0..n {
                let mut up = u.clone();
                let mut um = u.clone();
                up[k] += h;
                um[k] -= h;
                let col = (self.f(&up) - self.f(&um)) / (2.0 * h);
                for i in 0..n {
                    let err = (col[i] - j[(i, k)]).abs() / (1.0 + j[(i, k)].abs());
                    worst = worst.max(err);
                }
            }
        }
        worst
    }

    /// Reaction term `f(u)`.
    pub fn f(&self, u: &[f64]) -> DVector<f64> {
        let mut out = vec![0.0; self.n];
        self.f_into(u, &mut out);
        DVector::from_vec(out)
    }

    /// Reaction term written into `out`.
    pub fn f_into(&self, u: &[f64], out: &mut [f64]) {
        let mut stack = Vec::new();
        self.f_into_with(u, out, &mut stack);
    }

    /// Reaction term written into `out`, reusing an evaluation stack.
    pub fn f_into_with(&self, u: &[f64], out: &mut [f64], stack: &mut Vec<f64>) {
        for (o, p) in out.iter_mut().zip(&self.f_prog) {
            *o = p.eval_with(u, stack);
        }
    }

    /// Jacobian `Jf(u)`.
    pub fn jf(&self, u: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let mut stack = Vec::new();
        DMatrix::from_fn(n, n, |i, j| self.j_prog[i * n + j].eval_with(u, &mut stack))
    }

    /// Symbolic Jacobian entry `∂f_i/∂u_j`.
    pub fn jacobian_expr(&self, i: usize, j: usize) -> &Expr {
        &self.jacobian[i * self.n + j]
    }

    /// Reaction expression trees.
    pub fn reaction_exprs(&self) -> &[Expr] {
        &self.reactions
    }

    /// Parameter values in the order used by the expression trees.
    pub fn param_values(&self) -> &[f64] {
        &self.pvals
    }

    /// Linearization at the origin, `f'(0)`.
    pub fn linearization(&self) -> DMatrix<f64> {
        self.jf(&vec![0.0; self.n])
    }

    /// Advection matrix, zero when absent.
    pub fn advection_matrix(&self) -> DMatrix<f64> {
        self.advection
            .clone()
            .unwrap_or_else(|| DMatrix::zeros(self.n, self.n))
    }

    fn tagged(&self, role: Role) -> Option<&[f64]> {
        self.equilibria
            .iter()
            .find(|e| e.role == role)
            .map(|e| e.point.as_slice())
    }

    /// The unstable state being invaded.
    pub fn unstable_state(&self) -> Option<&[f64]> {
        self.tagged(Role::UnstableOrigin)
    }

    /// The stable state selected behind the front.
    pub fn wake_state(&self) -> Option<&[f64]> {
        self.tagged(Role::WakeState)
    }

    /// Copy of the system translated so that the unstable state sits at the origin.
    pub fn centered(&self) -> SystemSpec {
        let shift: Vec<f64> = match self.unstable_state() {
            Some(p) if p.iter().any(|x| *x != 0.0) => p.to_vec(),
            _ => return self.clone(),
        };
        let total: Vec<f64> = shift
            .iter()
            .zip(&self.origin_shift)
            .map(|(a, b)| a + b)
            .collect();
        let reactions: Vec<Expr> = self.reactions.iter().map(|e| e.shifted(&shift)).collect();
        let mut spec = Self::assemble(
            self.config.clone(),
            self.d.clone(),
            self.advection.clone(),
            reactions,
            self.pvals.clone(),
            total,
        );
        spec.warnings = self.warnings.clone();
        spec
    }

    /// Configuration in the user's original coordinates.
    pub fn to_config(&self) -> SystemConfig {
        self.config.clone()
    }

    /// Serializes the original configuration as JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.config).expect("config serializes")
    }

    /// Parses a JSON configuration string.
    pub fn from_json_str(text: &str) -> Result<SystemSpec> {
        let cfg: SystemConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        Self::from_config_with_source(&cfg, Some(text))
    }

    /// Smallest real part among the eigenvalues of `D`.
    pub fn min_diffusion_eigenvalue(&self) -> f64 {
        self.d
            .complex_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, z| m.min(z.re))
    }
}

fn fmt_complex(re: f64, im: f64) -> String {
    if im == 0.0 {
        format!("{re}")
    } else {
        format!("{re}{:+}i", im)
    }
}

/// Reads a system configuration file.
pub fn load_system(path: &Path) -> Result<SystemSpec> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    SystemSpec::from_json_str(&text)
}
