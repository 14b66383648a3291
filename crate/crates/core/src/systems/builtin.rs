//! Registry of example systems, written in their natural coordinates.
//!
//! Families near a bifurcation take `theta` (distance from onset), `d`
//! (diffusivity of the slaved component), `k` (its damping) and `scaled`
//! (1 for the rescaled variables in which the speed is 2 resp. 2√2, 0 for
//! the original variables).

use std::collections::BTreeMap;

use super::{EquilibriumConfig, Role, SystemConfig, SystemSpec};
use crate::error::{Error, Result};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 8] = [
    "kpp",
    "transcritical",
    "pitchfork",
    "saddlenode",
    "parametric_gl",
    "lotka_volterra",
    "tumor",
    "hidden_diffusion",
];

fn defaults(name: &str) -> Option<&'static [(&'static str, f64)]> {
    Some(match name {
        "kpp" => &[],
        "transcritical" | "pitchfork" | "saddlenode" => {
            &[("theta", 0.04), ("d", 1.0), ("k", 1.0), ("scaled", 1.0)]
        }
        "parametric_gl" => &[("beta", 1.0)],
        "lotka_volterra" => &[("a1", 0.5), ("a2", 2.0), ("r", 1.0), ("sigma", 1.0)],
        "tumor" => &[("eps", 0.1), ("alpha", 2.0), ("d", 1.0)],
        "hidden_diffusion" => &[],
        _ => return None,
    })
}

fn range(msg: impl Into<String>) -> Error {
    Error::ParameterRange(msg.into())
}

fn eq(point: Vec<f64>, role: Role) -> EquilibriumConfig {
    EquilibriumConfig { point, role }
}

fn diag2(a: f64, b: f64) -> Vec<f64> {
    vec![a, 0.0, 0.0, b]
}

/// Builds the named example system, overriding default parameters with `params`.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<SystemSpec> {
    let defs = defaults(name).ok_or_else(|| Error::UnknownSystem(name.to_string()))?;
    let mut p: BTreeMap<String, f64> = defs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in params {
        if !p.contains_key(k) {
            return Err(Error::InvalidInput(format!(
                "unknown parameter '{k}' for system '{name}'"
            )));
        }
        if !v.is_finite() {
            return Err(range(format!("{k} must be finite")));
        }
        p.insert(k.clone(), *v);
    }
    let get = |k: &str| p[k];
    let mut warnings = Vec::new();
    let cfg = match name {
        "kpp" => SystemConfig {
            name: name.into(),
            n: 1,
            d: vec![1.0],
            reactions: vec!["u1 - u1^2".into()],
            params: p.clone(),
            equilibria: vec![
                eq(vec![0.0], Role::UnstableOrigin),
                eq(vec![1.0], Role::WakeState),
            ],
            advection: None,
            symbol_only: false,
        },
        "transcritical" | "pitchfork" | "saddlenode" => {
            let (theta, d, k, scaled) = (get("theta"), get("d"), get("k"), get("scaled"));
            if d <= 0.0 || k <= 0.0 {
                return Err(range("d and k must be positive"));
            }
            if scaled != 0.0 && scaled != 1.0 {
                return Err(range("scaled must be 0 or 1"));
            }
            let scaled = scaled == 1.0;
            if theta < 0.0 || (theta == 0.0 && !scaled) {
                return Err(range(if scaled {
                    "theta must be nonnegative"
                } else {
                    "theta must be positive for the unscaled system"
                }));
            }
            if theta > 0.1 {
                warnings.push(format!(
                    "theta = {theta} lies outside the small-theta regime near onset"
                ));
            }
            bifurcation_family(name, theta, k, scaled, p.clone(), d)
        }
        "parametric_gl" => {
            let beta = get("beta");
            if beta <= 0.0 {
                return Err(range("beta must be positive"));
            }
            SystemConfig {
                name: name.into(),
                n: 2,
                d: diag2(1.0, 1.0),
                reactions: vec![
                    "(1 + beta)*u1 - u1*(u1^2 + u2^2)".into(),
                    "(1 - beta)*u2 - u2*(u1^2 + u2^2)".into(),
                ],
                params: p.clone(),
                equilibria: vec![
                    eq(vec![0.0, 0.0], Role::UnstableOrigin),
                    eq(vec![(1.0 + beta).sqrt(), 0.0], Role::WakeState),
                ],
                advection: None,
                symbol_only: false,
            }
        }
        "lotka_volterra" => {
            let (a1, a2, r, sigma) = (get("a1"), get("a2"), get("r"), get("sigma"));
            if !(0.0 < a1 && a1 < 1.0 && 1.0 < a2) {
                return Err(range(format!(
                    "lotka_volterra requires 0 < a1 < 1 < a2 (got a1 = {a1}, a2 = {a2})"
                )));
            }
            if r <= 0.0 || sigma <= 0.0 {
                return Err(range("r and sigma must be positive"));
            }
            if !lv_pulled(a1, a2, r, sigma) {
                warnings.push(
                    "parameters violate the pulled-regime condition (a1 a2 - M) r <= M (2 - sigma)(1 - a1)"
                        .into(),
                );
            }
            SystemConfig {
                name: name.into(),
                n: 2,
                d: diag2(1.0, sigma),
                reactions: vec!["u1*(1 - u1 - a1*u2)".into(), "r*u2*(1 - a2*u1 - u2)".into()],
                params: p.clone(),
                equilibria: vec![
                    eq(vec![0.0, 1.0], Role::UnstableOrigin),
                    eq(vec![1.0, 0.0], Role::WakeState),
                ],
                advection: None,
                symbol_only: false,
            }
        }
        "tumor" => {
            let (eps, alpha, d) = (get("eps"), get("alpha"), get("d"));
            if !(0.0 < eps && eps < 1.0) || alpha <= 0.0 || d <= 0.0 {
                return Err(range("tumor requires 0 < eps < 1, alpha > 0, d > 0"));
            }
            if alpha <= 1.0 {
                warnings
                    .push("alpha <= 1 makes tumor cells grow at the origin on their own".into());
            }
            SystemConfig {
                name: name.into(),
                n: 2,
                d: diag2(d, d),
                reactions: vec![
                    "(1 - u1 - u2)*u1".into(),
                    "((1 - eps)*(1 - u1 - u2)*u1 + (1 - u1 - u2)*u2 - alpha*u2)/eps".into(),
                ],
                params: p.clone(),
                equilibria: vec![
                    eq(vec![0.0, 0.0], Role::UnstableOrigin),
                    eq(vec![1.0, 0.0], Role::WakeState),
                ],
                advection: None,
                symbol_only: false,
            }
        }
        "hidden_diffusion" => SystemConfig {
            name: name.into(),
            n: 2,
            d: vec![0.0; 4],
            reactions: vec!["0".into(), "-u2".into()],
            params: p.clone(),
            equilibria: vec![eq(vec![0.0, 0.0], Role::UnstableOrigin)],
            advection: Some(vec![0.0, 1.0, 1.0, 0.0]),
            symbol_only: true,
        },
        _ => unreachable!(),
    };
    let mut spec = SystemSpec::from_config(&cfg)?;
    spec.warnings = warnings;
    Ok(spec)
}

/// Pulled-regime condition for the competitive Lotka-Volterra family.
pub fn lv_pulled(a1: f64, a2: f64, r: f64, sigma: f64) -> bool {
    let m = f64::max(1.0, 2.0 * (1.0 - a1));
    (a1 * a2 - m) * r <= m * (2.0 - sigma) * (1.0 - a1)
}

fn bifurcation_family(
    name: &str,
    theta: f64,
    k: f64,
    scaled: bool,
    params: BTreeMap<String, f64>,
    d: f64,
) -> SystemConfig {
    let reduced = scaled && theta == 0.0;
    let (reactions, unstable, wake): (Vec<&str>, Vec<f64>, Vec<f64>) = match name {
        "transcritical" => {
            let big_u = 2.0 / (1.0 + (1.0 + 4.0 * theta / k).sqrt());
            if reduced {
                (
                    vec!["u1 - u1^2 - u1*u2", "-k*u2"],
                    vec![0.0, 0.0],
                    vec![1.0, 0.0],
                )
            } else if scaled {
                (
                    vec!["u1 - u1^2 - u1*u2", "-(k/theta)*u2 + u1^2"],
                    vec![0.0, 0.0],
                    vec![big_u, theta * big_u * big_u / k],
                )
            } else {
                let u = theta * big_u;
                (
                    vec!["theta*u1 - u1^2 - u1*u2", "-k*u2 + u1^2"],
                    vec![0.0, 0.0],
                    vec![u, u * u / k],
                )
            }
        }
        "pitchfork" => {
            let big_u2 = 2.0 / (1.0 + (1.0 + 4.0 * theta / (k * k)).sqrt());
            let big_u = big_u2.sqrt();
            if reduced {
                (
                    vec!["u1 - u1^3 - u1*u2^2", "-k*u2"],
                    vec![0.0, 0.0],
                    vec![1.0, 0.0],
                )
            } else if scaled {
                (
                    vec!["u1 - u1^3 - u1*u2^2", "-(k/theta)*u2 + u1^2/sqrt(theta)"],
                    vec![0.0, 0.0],
                    vec![big_u, theta.sqrt() * big_u2 / k],
                )
            } else {
                (
                    vec!["theta*u1 - u1^3 - u1*u2^2", "-k*u2 + u1^2"],
                    vec![0.0, 0.0],
                    vec![theta.sqrt() * big_u, theta * big_u2 / k],
                )
            }
        }
        _ => {
            if reduced {
                (
                    vec!["1 - u1^2 - u1*u2", "-k*u2"],
                    vec![-1.0, 0.0],
                    vec![1.0, 0.0],
                )
            } else if scaled {
                (
                    vec![
                        "1 - u1^2 - u1*u2",
                        "-(k/sqrt(theta))*u2 + sqrt(theta)*(u1 - 1)*(u1 + 1)^2",
                    ],
                    vec![-1.0, 0.0],
                    vec![1.0, 0.0],
                )
            } else {
                let s = theta.sqrt();
                (
                    vec![
                        "theta - u1^2 - u1*u2",
                        "-k*u2 + (u1 - sqrt(theta))*(u1 + sqrt(theta))^2",
                    ],
                    vec![-s, 0.0],
                    vec![s, 0.0],
                )
            }
        }
    };
    SystemConfig {
        name: name.into(),
        n: 2,
        d: diag2(1.0, d),
        reactions: reactions.into_iter().map(String::from).collect(),
        params,
        equilibria: vec![
            eq(unstable, Role::UnstableOrigin),
            eq(wake, Role::WakeState),
        ],
        advection: None,
        symbol_only: false,
    }
}
