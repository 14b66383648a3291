//! Numeric settings shared by all subcommands, merged from built-in defaults,
//! an optional JSON config file and command-line flags (in increasing
//! priority).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Reference frame requested for a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Lab,
    Comoving,
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Speed bracket of the spreading-speed search.
    pub bracket: (f64, f64),
    /// Front or simulation domain; module defaults when absent.
    pub domain: Option<(f64, f64)>,
    /// Front grid spacing or simulation spacing; module defaults when absent.
    pub dx: Option<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub mu: f64,
    #[serde(rename = "T")]
    pub t_shift: f64,
    pub frame: FrameKind,
    /// Worker cap for the spectral scan; 0 means one worker per shift.
    pub jobs: usize,
    pub snapshot_every: f64,
    pub h_track: f64,
    pub epsilon: f64,
    pub xi_max: f64,
    pub profile_h: f64,
}

/// Speed bracket used when none is given.
pub const DEFAULT_BRACKET: (f64, f64) = (0.05, 10.0);
/// Simulation domain in the lab frame when none is given.
pub const DEFAULT_SIM_DOMAIN: (f64, f64) = (-100.0, 600.0);
/// Simulation domain in the comoving frame when none is given.
pub const DEFAULT_COMOVING_DOMAIN: (f64, f64) = (-150.0, 150.0);
/// Simulation spacing when none is given.
pub const DEFAULT_SIM_DX: f64 = 0.1;

impl Default for Settings {
    fn default() -> Self {
        Settings {
            bracket: DEFAULT_BRACKET,
            domain: None,
            dx: None,
            dt: 0.01,
            t_end: 200.0,
            mu: 0.05,
            t_shift: 100.0,
            frame: FrameKind::Lab,
            jobs: 0,
            snapshot_every: 1.0,
            h_track: 0.5,
            epsilon: pulled_fronts::simulator::CONVERGENCE_EPS,
            xi_max: 12.0,
            profile_h: 0.01,
        }
    }
}

/// Flag values; `None` leaves the config-file or default value in place.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// Speed bracket `a,b` for the spreading-speed search.
    #[arg(long, value_parser = parse_pair)]
    pub bracket: Option<(f64, f64)>,
    /// Domain `a,b` of the front grid or of the simulation.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub domain: Option<(f64, f64)>,
    /// Grid spacing.
    #[arg(long)]
    pub dx: Option<f64>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final simulation time.
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Gluing exponent of the approximate solution.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Time shift T of the comoving frame and of the approximate solution.
    #[arg(long = "T")]
    pub t_shift: Option<f64>,
    /// Simulation frame.
    #[arg(long, value_enum)]
    pub frame: Option<FrameKind>,
    /// Worker cap for the spectral scan.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Time between stored snapshots.
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<f64>,
    /// Tracking level as a fraction of the jump of component 1.
    #[arg(long = "h-track")]
    pub h_track: Option<f64>,
    /// Tolerance of the convergence verdict.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Truncation of the self-similar variable.
    #[arg(long = "xi-max")]
    pub xi_max: Option<f64>,
    /// Grid spacing of the self-similar profiles.
    #[arg(long = "profile-h")]
    pub profile_h: Option<f64>,
}

/// Parses `a,b` into a pair of numbers.
pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got '{s}'"));
    }
    let a = parts[0].parse::<f64>().map_err(|e| format!("'{}': {e}", parts[0]))?;
    let b = parts[1].parse::<f64>().map_err(|e| format!("'{}': {e}", parts[1]))?;
    Ok((a, b))
}

impl Settings {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(config: Option<&Path>, flags: &Overrides) -> Result<Settings, CliError> {
        let mut s = match config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                serde_json::from_str::<Settings>(&text)
                    .map_err(|e| CliError::Usage(format!("config file {}: {e}", p.display())))?
            }
            None => Settings::default(),
        };
        let f = flags.clone();
        if let Some(v) = f.bracket {
            s.bracket = v;
        }
        if f.domain.is_some() {
            s.domain = f.domain;
        }
        if f.dx.is_some() {
            s.dx = f.dx;
        }
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { s.$field = v; } )* };
        }
        take!(dt, t_end, mu, t_shift, frame, jobs, snapshot_every, h_track, epsilon, xi_max, profile_h);
        Ok(s)
    }
}

/// Parses repeated `--param k=v,k=v` values.
pub fn parse_params(items: &[String]) -> Result<std::collections::BTreeMap<String, f64>, CliError> {
    let mut out = std::collections::BTreeMap::new();
    for item in items.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("parameter '{item}' is not of the form key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|e| CliError::Usage(format!("parameter '{item}': {e}")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}
