//! Command-line front end of the pulled-fronts pipeline.
//!
//! Every subcommand writes JSON reports and CSV plot data into `--out` along
//! with a [`manifest::RunManifest`]; `--replay manifest.json` reruns it and
//! checks that the outputs are byte-identical.

pub mod manifest;
pub mod settings;
pub mod verify;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use pulled_fronts::dispersion::{self, solve_spreading_speed, SymbolPencil};
use pulled_fronts::front::{self, solve_front, FrontOptions};
use pulled_fronts::normal_form::{self, build_normal_form, extract_pencil, pencil_from_symbol};
use pulled_fronts::simulator::{self, Frame, InitialData, SimConfig};
use pulled_fronts::spectral::{self, verify_point_spectrum, ScanOptions, WeightSpec};
use pulled_fronts::systems::{builtin, SystemConfig, SystemSpec};
use pulled_fronts::tail::{self, ProfileOptions};
use pulled_fronts::Error;

use manifest::{RunManifest, MANIFEST_FILE};
use settings::{FrameKind, Overrides, Settings};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    /// Bad arguments, parameters or system definitions.
    pub const USAGE: i32 = 1;
    pub const HYPOTHESIS: i32 = 2;
    pub const NON_CONVERGENCE: i32 = 3;
    pub const IO: i32 = 4;
}

/// Failure of a CLI run.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Core(Error),
    ReplayMismatch(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::ReplayMismatch(_) => exit::USAGE,
            CliError::Io(_) => exit::IO,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::ReplayMismatch(files) => write!(f, "replay differs in: {}", files.join(", ")),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(m) => CliError::Io(m),
            other => CliError::Core(other),
        }
    }
}

/// Exit code of a library error.
pub fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::Hypothesis { .. } => exit::HYPOTHESIS,
        Error::NonConvergence { .. } => exit::NON_CONVERGENCE,
        Error::Io(_) => exit::IO,
        _ => exit::USAGE,
    }
}

#[derive(Parser, Debug)]
#[command(name = "pulled-fronts", version, about = "Pulled invasion fronts: spreading speeds, normal forms, critical fronts, spectra, tails and simulation")]
pub struct Cli {
    /// Rerun the run recorded in a manifest and compare its outputs.
    #[arg(long, value_name = "MANIFEST")]
    pub replay: Option<PathBuf>,
    /// Output directory for `--replay` (defaults to the recorded one).
    #[arg(long = "replay-out", value_name = "DIR", requires = "replay")]
    pub replay_out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Built-in system name or path to a JSON system definition.
    #[arg(long)]
    pub system: String,
    /// Parameter overrides `key=value[,key=value...]`.
    #[arg(long = "param")]
    pub params: Vec<String>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// JSON file with settings; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Linear spreading speed and Hypothesis 1.
    #[command(after_help = help_analyze())]
    Analyze(Common),
    /// Pencil data and the diffusive normal form.
    #[command(name = "normal-form", after_help = help_normal_form())]
    NormalForm(Common),
    /// Critical front profile.
    #[command(after_help = help_front())]
    Front(Common),
    /// Weighted point spectrum of the front (Hypothesis 4).
    #[command(after_help = help_spectrum())]
    Spectrum(Common),
    /// Self-similar profiles, approximate solution and residual decay.
    #[command(after_help = help_tail())]
    Tail(Common),
    /// Direct simulation, front tracking and comparison with the front.
    #[command(after_help = help_simulate())]
    Simulate(Common),
    /// Hypotheses 1 to 4 in order.
    #[command(after_help = help_verify())]
    Verify(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Analyze(c) => ("analyze", c),
            Command::NormalForm(c) => ("normal-form", c),
            Command::Front(c) => ("front", c),
            Command::Spectrum(c) => ("spectrum", c),
            Command::Tail(c) => ("tail", c),
            Command::Simulate(c) => ("simulate", c),
            Command::Verify(c) => ("verify", c),
        }
    }
}

fn help_analyze() -> String {
    format!(
        "Tolerance defaults:\n  bracket = {:?}\n  double-root Newton: at most {} iterations\n  Hypothesis 1(ii)/(iii) k-grid: K = 10*max(1, |f'(0)|/min eig D)^(1/2), 2001 uniform points plus a log cluster near k = 0\n",
        settings::DEFAULT_BRACKET,
        dispersion::NEWTON_MAX_ITER
    )
}

fn help_normal_form() -> String {
    format!(
        "Tolerance defaults:\n  co-linearity threshold = {:e}\n  kernel gap tolerance = {:e}\n  largest condition number of S, Q = {:e}\n  coefficient stencil: 3 lambda points x 5 nu points\n",
        normal_form::COLINEAR_TOL,
        normal_form::KERNEL_GAP_TOL,
        normal_form::MAX_CONDITION
    )
}

fn help_front() -> String {
    let f = FrontOptions::default();
    format!(
        "Tolerance defaults:\n  Newton tolerance = {:e}, at most {} iterations\n  boundary mismatch tolerance = {:e}\n  grid spacing h = {}\n  weight transition width = {}\n  domain: x_L = -max(40, 25/nu_min), x_R = max(40, 25/eta*)\n  tail-fit window [x_R - W, x_R - W/2], W = min(20/eta*, (x_R - x_L)/4)\n  wake stability margin = {:e}\n",
        f.tol,
        f.max_iter,
        f.mismatch_tol,
        f.h,
        f.weight_width,
        front::DELTA_WAKE
    )
}

fn help_spectrum() -> String {
    let s = ScanOptions::default();
    format!(
        "{}Tolerance defaults:\n  scan depth delta0 = {}\n  localization threshold = {}\n  eigenpair residual tolerance = {:e}\n  Krylov dimension = {}\n  shift imaginary parts = {:?}\n  end-point coefficient tolerance = {:e}\n  zero-mode threshold = 10*h^4*max(1, |D|, |B-|, |B+|)\n",
        help_front(),
        s.delta0,
        s.localization_threshold,
        s.tolerance,
        s.krylov_dim,
        s.shift_imag,
        spectral::DOMAIN_TOL
    )
}

fn help_tail() -> String {
    let p = ProfileOptions::default();
    format!(
        "{}Tolerance defaults:\n  xi_max = {}\n  profile grid h = {}\n  matching floor (T_min check) = {}\n  front-shift target mismatch = {}\n  residual grid spacing beyond the front = {}\n  mu = 0.05, T = 100, residual samples at t = 0, T, 3T, 7T, 15T\n",
        help_front(),
        p.xi_max,
        p.h,
        tail::MATCHING_FLOOR,
        tail::SHIFT_TARGET,
        tail::TAIL_SPACING
    )
}

fn help_simulate() -> String {
    let c = SimConfig::new(0.0, 1.0, 0.1, 0.01, 1.0);
    let d = Settings::default();
    format!(
        "Tolerance defaults:\n  domain = {:?} (lab), {:?} (comoving), dx = {}, dt = {}, t_end = {}\n  h_track = {}, sensitivity levels = {:?}\n  fit window starts at {} * t_end, at least 50 samples\n  monotonicity checked after t = {}\n  fit flagged unreliable above 0.5*dx residual\n  blow-up threshold = 10*(1 + |u_-|)\n  convergence epsilon = {}\n  pulled delay requires kappa > {}\n  front must stay 50/eta* away from X_R\n",
        settings::DEFAULT_SIM_DOMAIN,
        settings::DEFAULT_COMOVING_DOMAIN,
        settings::DEFAULT_SIM_DX,
        d.dt,
        d.t_end,
        c.h_track,
        simulator::SENSITIVITY_LEVELS,
        c.fit_start,
        c.t_burn,
        simulator::CONVERGENCE_EPS,
        simulator::PULLED_KAPPA_MIN
    )
}

fn help_verify() -> String {
    format!("{}{}{}", help_analyze(), help_normal_form(), help_spectrum())
}

/// Files and console lines produced by one subcommand.
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub lines: Vec<String>,
    pub exit: i32,
}

fn json<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

/// Loads a built-in system or a JSON definition, applying parameter overrides.
pub fn resolve_system(system: &str, params: &BTreeMap<String, f64>) -> Result<SystemSpec, CliError> {
    let path = Path::new(system);
    if system.ends_with(".json") || path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: SystemConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("system file {}: {e}", path.display())))?;
        for (k, v) in params {
            cfg.params.insert(k.clone(), *v);
        }
        Ok(SystemSpec::from_config(&cfg)?)
    } else {
        Ok(builtin(system, params)?)
    }
}

fn pencil_for(spec: &SystemSpec, s: &Settings) -> Result<(Option<dispersion::SpreadingSpeedResult>, normal_form::PencilData), CliError> {
    if spec.symbol_only {
        let p = pencil_from_symbol(&SymbolPencil::from_spec(spec), 0.0, 0.0, None)?;
        return Ok((None, p));
    }
    let sp = solve_spreading_speed(spec, s.bracket)?;
    let p = extract_pencil(spec, &sp)?;
    Ok((Some(sp), p))
}

fn front_for(spec: &SystemSpec, s: &Settings) -> Result<(dispersion::SpreadingSpeedResult, normal_form::PencilData, front::FrontProfile), CliError> {
    let sp = solve_spreading_speed(spec, s.bracket)?;
    let pen = extract_pencil(spec, &sp)?;
    let mut opts = FrontOptions::for_system(spec, &sp)?;
    if let Some((a, b)) = s.domain {
        opts.x_l = a;
        opts.x_r = b;
    }
    if let Some(h) = s.dx {
        opts.h = h;
    }
    let f = solve_front(spec, &sp, &pen, &opts)?;
    Ok((sp, pen, f))
}

fn cmd_analyze(spec: &SystemSpec, s: &Settings) -> Result<Outcome, CliError> {
    let sp = match solve_spreading_speed(spec, s.bracket) {
        Ok(sp) => sp,
        Err(Error::Hypothesis { which, detail }) => {
            return Ok(Outcome {
                files: vec![("speed.json".into(), json(&serde_json::json!({ "hypothesis": which, "fail": detail })))],
                lines: vec![format!("Hypothesis {which}: FAIL  {detail}")],
                exit: exit::HYPOTHESIS,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let round = |x: f64| (x * 1e12).round() / 1e12;
    let ok = sp.hyp1_ok();
    let mut lines = vec![
        format!("c_star={:?}", round(sp.c_star)),
        format!("eta_star={:?}", round(sp.eta_star)),
    ];
    lines.push(format!(
        "Hypothesis 1: {}  d10*d02={:.3e} pinched={} (ii) witness Re={:.3e} at k={:.4} (iii) witness Re={:.3e} at k={:.4}",
        if ok { "PASS" } else { "FAIL" },
        (sp.root.d10 * sp.root.d02).re,
        sp.root.pinched,
        sp.hyp1_ii.witness.0,
        sp.hyp1_ii.witness.2,
        sp.hyp1_iii.witness.0,
        sp.hyp1_iii.witness.2
    ));
    Ok(Outcome {
        files: vec![("speed.json".into(), json(&sp))],
        lines,
        exit: if ok { exit::PASS } else { exit::HYPOTHESIS },
    })
}

fn cmd_normal_form(spec: &SystemSpec, s: &Settings) -> Result<Outcome, CliError> {
    let (sp, pen) = pencil_for(spec, s)?;
    let nf = build_normal_form(&pen)?;
    let report = serde_json::json!({
        "speed": sp.as_ref().map(|v| (v.c_star, v.eta_star)),
        "pencil": pen,
        "normal_form": nf,
        "sparsity_deviations": nf.sparsity_deviations(),
    });
    Ok(Outcome {
        files: vec![("normal_form.json".into(), json(&report))],
        lines: vec![
            format!("case={:?}", nf.case),
            format!("D_eff={:.12}", nf.d_eff),
            format!("max sparsity deviation={:.3e}", nf.max_sparsity_deviation()),
        ],
        exit: exit::PASS,
    })
}

fn cmd_front(spec: &SystemSpec, s: &Settings) -> Result<Outcome, CliError> {
    let (_, _, f) = front_for(spec, s)?;
    Ok(Outcome {
        files: vec![
            ("front.json".into(), json(&f.metadata())),
            ("front.csv".into(), f.to_csv().into_bytes()),
        ],
        lines: vec![
            format!("c_star={:.12} eta_star={:.12}", f.c_star, f.eta_star),
            format!("a={:.10} residual={:.3e} newton iterations={}", f.a, f.residual_norm, f.newton_iterations),
        ],
        exit: exit::PASS,
    })
}

fn cmd_spectrum(spec: &SystemSpec, s: &Settings) -> Result<Outcome, CliError> {
    let (_, _, f) = front_for(spec, s)?;
    let rep = verify_point_spectrum(spec, &f, &ScanOptions { jobs: s.jobs, ..ScanOptions::default() })?;
    let mut lines = vec![format!("Hypothesis 4: {}", if rep.pass { "PASS" } else { "FAIL" })];
    if let Some(e) = rep.leading_point() {
        lines.push(format!("leading point eigenvalue {:.6e}{:+.6e}i", e.re, e.im));
    }
    if let Some(z) = &rep.zero_mode {
        lines.push(format!("sigma_min={:.3e} threshold={:.3e}", z.sigma_min, z.threshold));
    }
    Ok(Outcome {
        files: vec![
            ("spectrum.json".into(), json(&rep)),
            ("eigenvalues.csv".into(), rep.eigenvalues_csv().into_bytes()),
        ],
        lines,
        exit: if rep.pass { exit::PASS } else { exit::HYPOTHESIS },
    })
}

fn profiles_csv(p: &tail::SelfSimilarProfiles) -> String {
    let named = p.named();
    let mut s = String::from("xi");
    for (name, prof) in &named {
        for k in 0..prof.dim() {
            let _ = write!(s, ",{name}_{}", k + 1);
        }
    }
    s.push('\n');
    for xi in p.grid().into_iter().step_by(10) {
        let _ = write!(s, "{xi}");
        for (_, prof) in &named {
            for v in prof.value(xi) {
                let _ = write!(s, ",{v:.12e}");
            }
        }
        s.push('\n');
    }
    s
}

fn cmd_tail(spec: &SystemSpec, s: &Settings) -> Result<Outcome, CliError> {
    let (_, pen, f) = front_for(spec, s)?;
    let nf = build_normal_form(&pen)?;
    let profiles = tail::solve_profiles(&nf, f.eta_star, &ProfileOptions { xi_max: s.xi_max, h: s.profile_h })?;
    let mut lines = Vec::new();
    let vapp = match tail::assemble_vapp(&f, &profiles, &nf, s.t_shift, s.mu) {
        Ok(v) => v,
        Err(Error::InvalidInput(m)) if m.contains("T_min") => {
            let shift = tail::choose_front_shift(&f, &profiles, &nf, s.t_shift, s.mu, tail::SHIFT_TARGET)?;
            lines.push(format!("literal matching rejected ({m}); gluing to the front translated by L = {shift}"));
            tail::assemble_vapp_translated(&f, &profiles, &nf, s.t_shift, s.mu, shift)?
        }
        Err(e) => return Err(e.into()),
    };
    let t = s.t_shift;
    let rep = tail::residual(&vapp, spec, &[0.0, t, 3.0 * t, 7.0 * t, 15.0 * t])?;
    let target = -(0.5 - 4.0 * s.mu) + 0.1;
    lines.push(format!(
        "fitted residual exponent={:.4} (bound {:.4}) monotone={}",
        rep.fitted_exponent, target, rep.monotone
    ));
    Ok(Outcome {
        files: vec![
            ("tail.json".into(), json(&serde_json::json!({ "approximate_solution": vapp.metadata(), "residual": rep }))),
            ("residual.csv".into(), rep.to_csv().into_bytes()),
            ("profiles.csv".into(), profiles_csv(&profiles).into_bytes()),
        ],
        lines,
        exit: exit::PASS,
    })
}

fn cmd_simulate(spec: &SystemSpec, s: &Settings) -> Result<Outcome, CliError> {
    let sp = solve_spreading_speed(spec, s.bracket)?;
    let (frame, dom) = match s.frame {
        FrameKind::Lab => (Frame::Lab, settings::DEFAULT_SIM_DOMAIN),
        FrameKind::Comoving => (
            Frame::Comoving { c_star: sp.c_star, eta_star: sp.eta_star, t_shift: s.t_shift },
            settings::DEFAULT_COMOVING_DOMAIN,
        ),
    };
    let (x_l, x_r) = s.domain.unwrap_or(dom);
    let mut cfg = SimConfig::new(x_l, x_r, s.dx.unwrap_or(settings::DEFAULT_SIM_DX), s.dt, s.t_end);
    cfg.frame = frame;
    cfg.snapshot_every = s.snapshot_every;
    cfg.h_track = s.h_track;
    cfg.initial = InitialData::Step { x0: 0.0 };
    simulator::check_domain(&cfg, cfg.initial.start(), sp.c_star, sp.eta_star)?;
    let traj = simulator::integrate(spec, &cfg)?;
    let track = simulator::track_front(&traj, &cfg)?;
    let sens = simulator::level_sensitivity(&traj, &cfg, &simulator::SENSITIVITY_LEVELS)?;
    let err = track.fit.total_errors();
    let mut lines = vec![
        format!("c_fit={:.6} +- {:.2e} (c_star={:.6})", track.fit.c, err[0], sp.c_star),
        format!("kappa_fit={:.4} +- {:.2e} (3/(2 eta*)={:.4})", track.fit.kappa, err[1], 1.5 / sp.eta_star),
        format!("x_inf_fit={:.4} residual={:.2e} reliable={}", track.fit.x_inf, track.fit.residual, track.reliable),
    ];
    lines.extend(track.warnings.iter().map(|w| format!("warning: {w}")));
    let mut files = vec![
        ("track.json".into(), json(&track)),
        ("sensitivity.json".into(), json(&sens)),
        ("positions.csv".into(), track.delay_csv(sp.c_star, &cfg.frame).into_bytes()),
        ("snapshots.csv".into(), traj.to_csv(5, 10).into_bytes()),
    ];
    if !spec.symbol_only {
        let pen = extract_pencil(spec, &sp)?;
        let f = solve_front(spec, &sp, &pen, &FrontOptions::for_system(spec, &sp)?)?;
        let w = WeightSpec::exponential(f.eta_star)?;
        let conv = simulator::compare_to_front(&traj, &f, &track, &w, s.epsilon)?;
        lines.push(format!(
            "weighted distance: final {:.4e}, decreasing={}, t_star={:?} (epsilon {})",
            conv.final_distance, conv.decreasing, conv.t_star, conv.epsilon
        ));
        files.push(("convergence.json".into(), json(&conv)));
    }
    Ok(Outcome { files, lines, exit: exit::PASS })
}

fn cmd_verify(spec: &SystemSpec, s: &Settings) -> Result<Outcome, CliError> {
    let board = verify::verify(spec, s)?;
    let mut lines = board.lines();
    let code = match board.first_failure {
        None => exit::PASS,
        Some(k) => {
            lines.push(format!("first failure: Hypothesis {k}"));
            exit::HYPOTHESIS
        }
    };
    Ok(Outcome { files: vec![("scoreboard.json".into(), json(&board))], lines, exit: code })
}

/// Runs a subcommand on a resolved system and settings.
pub fn execute(name: &str, spec: &SystemSpec, s: &Settings) -> Result<Outcome, CliError> {
    match name {
        "analyze" => cmd_analyze(spec, s),
        "normal-form" => cmd_normal_form(spec, s),
        "front" => cmd_front(spec, s),
        "spectrum" => cmd_spectrum(spec, s),
        "tail" => cmd_tail(spec, s),
        "simulate" => cmd_simulate(spec, s),
        "verify" => cmd_verify(spec, s),
        other => Err(CliError::Usage(format!("unknown subcommand '{other}'"))),
    }
}

/// Executes, writes outputs and the manifest; returns the manifest and exit code.
pub fn run_and_record(
    name: &str,
    system_ref: &str,
    spec: &SystemSpec,
    s: &Settings,
    out: &Path,
    print: bool,
) -> Result<(RunManifest, i32), CliError> {
    let outcome = execute(name, spec, s)?;
    let outputs = manifest::write_outputs(out, &outcome.files)?;
    let system_json = spec.to_json();
    let m = RunManifest {
        subcommand: name.into(),
        system_ref: system_ref.into(),
        system_hash: manifest::sha256_hex(system_json.as_bytes()),
        system: serde_json::from_str(&system_json).expect("system config is JSON"),
        settings: s.clone(),
        seeds: BTreeMap::new(),
        versions: manifest::versions(),
        out_dir: out.display().to_string(),
        outputs,
    };
    m.write(out)?;
    if print {
        for l in &outcome.lines {
            println!("{l}");
        }
        println!("wrote {} files and {} to {}", m.outputs.len(), MANIFEST_FILE, out.display());
    }
    Ok((m, outcome.exit))
}

/// Reruns a manifest into `out` (or its recorded directory) and compares
/// output hashes.
pub fn replay(path: &Path, out: Option<&Path>, print: bool) -> Result<i32, CliError> {
    let old = RunManifest::read(path)?;
    let cfg: SystemConfig = serde_json::from_value(old.system.clone())
        .map_err(|e| CliError::Usage(format!("manifest system: {e}")))?;
    let spec = SystemSpec::from_config(&cfg)?;
    let hash = manifest::sha256_hex(spec.to_json().as_bytes());
    if hash != old.system_hash {
        return Err(CliError::Usage(format!(
            "system hash {hash} does not match the recorded {}",
            old.system_hash
        )));
    }
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&old.out_dir));
    let (new, code) = run_and_record(&old.subcommand, &old.system_ref, &spec, &old.settings, &dir, print)?;
    let differing: Vec<String> = old
        .outputs
        .iter()
        .filter(|o| !new.outputs.contains(o))
        .map(|o| o.path.clone())
        .collect();
    if !differing.is_empty() {
        return Err(CliError::ReplayMismatch(differing));
    }
    if print {
        println!("replay: {} outputs identical", new.outputs.len());
    }
    Ok(code)
}

fn run_parsed(cli: Cli) -> Result<i32, CliError> {
    if let Some(path) = &cli.replay {
        return replay(path, cli.replay_out.as_deref(), true);
    }
    let Some(cmd) = cli.command else {
        return Err(CliError::Usage("a subcommand or --replay is required (see --help)".into()));
    };
    let (name, common) = cmd.parts();
    let params = settings::parse_params(&common.params)?;
    let spec = resolve_system(&common.system, &params)?;
    let s = Settings::resolve(common.config.as_deref(), &common.overrides)?;
    for w in &spec.warnings {
        eprintln!("warning: {w}");
    }
    let (_, code) = run_and_record(name, &common.system, &spec, &s, &common.out, true)?;
    Ok(code)
}

/// Parses arguments, runs, prints errors and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::PASS };
        }
    };
    match run_parsed(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
