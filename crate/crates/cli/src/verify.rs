//! Hypothesis scoreboard: runs the four hypothesis checks in order.

use serde::Serialize;

use pulled_fronts::dispersion::{solve_spreading_speed, SpreadingSpeedResult};
use pulled_fronts::front::{check_wake_stability, solve_front, FrontOptions, FrontProfile};
use pulled_fronts::normal_form::{build_normal_form, extract_pencil};
use pulled_fronts::spectral::{verify_point_spectrum, ScanOptions};
use pulled_fronts::systems::SystemSpec;
use pulled_fronts::Error;

use crate::settings::Settings;

/// Verdict of one hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// Not run because an earlier hypothesis failed.
    Skip,
}

/// One line of the scoreboard.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisEntry {
    pub number: u8,
    pub name: String,
    pub verdict: Verdict,
    pub witness: String,
}

/// Result of running all hypothesis checks on one system.
#[derive(Clone, Debug, Serialize)]
pub struct Scoreboard {
    pub system: String,
    pub entries: Vec<HypothesisEntry>,
    pub first_failure: Option<u8>,
}

impl Scoreboard {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.verdict == Verdict::Pass)
    }

    /// One `Hypothesis k (name): VERDICT  witness` line per entry.
    pub fn lines(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| {
                let v = match e.verdict {
                    Verdict::Pass => "PASS",
                    Verdict::Fail => "FAIL",
                    Verdict::Skip => "SKIP",
                };
                format!("Hypothesis {} ({}): {v}  {}", e.number, e.name, e.witness)
            })
            .collect()
    }
}

const NAMES: [&str; 4] = [
    "pinched double root",
    "critical front",
    "wake stability",
    "point spectrum",
];

fn entry(k: u8, verdict: Verdict, witness: String) -> HypothesisEntry {
    HypothesisEntry { number: k, name: NAMES[k as usize - 1].into(), verdict, witness }
}

fn speed_witness(sp: &SpreadingSpeedResult) -> String {
    let r = &sp.root;
    format!(
        "c*={:.12} eta*={:.12} |d|={:.1e} |d_nu|={:.1e} d10*d02={:.3e} simple={} pinched={} (ii) max Re={:.3e} at k={:.3} (iii) max Re={:.3e} at k={:.3}",
        sp.c_star,
        sp.eta_star,
        r.residual_d,
        r.residual_dnu,
        (r.d10 * r.d02).re,
        r.simple,
        r.pinched,
        sp.hyp1_ii.witness.0,
        sp.hyp1_ii.witness.2,
        sp.hyp1_iii.witness.0,
        sp.hyp1_iii.witness.2,
    )
}

fn front_witness(f: &FrontProfile) -> String {
    format!(
        "a={:.8} residual={:.2e} weighted residual={:.2e} boundary mismatch=({:.1e}, {:.1e}) tail fit b={:.6}",
        f.a, f.residual_norm, f.weighted_residual, f.boundary_mismatch.0, f.boundary_mismatch.1, f.tail_fit.b
    )
}

/// Hypotheses failing with `Error::Hypothesis` become FAIL entries; any other
/// error aborts the scoreboard and is returned with its stage.
pub fn verify(spec: &SystemSpec, settings: &Settings) -> Result<Scoreboard, Error> {
    let mut entries = Vec::new();
    let finish = |mut entries: Vec<HypothesisEntry>, from: u8| {
        for k in from..=4 {
            entries.push(entry(k, Verdict::Skip, "earlier hypothesis failed".into()));
        }
        let first_failure = entries.iter().find(|e| e.verdict == Verdict::Fail).map(|e| e.number);
        Scoreboard { system: spec.name.clone(), entries, first_failure }
    };

    let sp = match solve_spreading_speed(spec, settings.bracket) {
        Ok(sp) => sp,
        Err(Error::Hypothesis { detail, .. }) => {
            entries.push(entry(1, Verdict::Fail, detail));
            return Ok(finish(entries, 2));
        }
        Err(e) => return Err(e),
    };
    let ok1 = sp.hyp1_ok();
    let mut w1 = speed_witness(&sp);
    let pencil = extract_pencil(spec, &sp).and_then(|p| build_normal_form(&p).map(|nf| (p, nf)));
    let pencil_ok = match &pencil {
        Ok((p, nf)) => {
            w1.push_str(&format!(" case={:?} D_eff={:.12}", p.case, nf.d_eff));
            true
        }
        Err(Error::Hypothesis { detail, .. }) => {
            w1.push_str(&format!(" pencil form: {detail}"));
            false
        }
        Err(e) => return Err(e.clone()),
    };
    entries.push(entry(1, if ok1 && pencil_ok { Verdict::Pass } else { Verdict::Fail }, w1));
    if !(ok1 && pencil_ok) {
        return Ok(finish(entries, 2));
    }
    let (pen, _) = pencil.unwrap();

    let mut opts = FrontOptions::for_system(spec, &sp)?;
    if let Some((a, b)) = settings.domain {
        opts.x_l = a;
        opts.x_r = b;
    }
    if let Some(h) = settings.dx {
        opts.h = h;
    }
    let front = match solve_front(spec, &sp, &pen, &opts) {
        Ok(f) => f,
        Err(Error::Hypothesis { detail, .. }) => {
            entries.push(entry(2, Verdict::Fail, detail));
            return Ok(finish(entries, 3));
        }
        Err(e) => return Err(e),
    };
    entries.push(entry(2, Verdict::Pass, front_witness(&front)));

    match check_wake_stability(spec, &sp) {
        Ok(st) => {
            let w = format!("margin={:.6e} at k={:.4} (k_max={:.2}, {} samples)", st.margin, st.witness_k, st.k_max, st.samples);
            entries.push(entry(3, if st.stable { Verdict::Pass } else { Verdict::Fail }, w));
            if !st.stable {
                return Ok(finish(entries, 4));
            }
        }
        Err(Error::InvalidInput(m)) => {
            entries.push(entry(3, Verdict::Fail, m));
            return Ok(finish(entries, 4));
        }
        Err(e) => return Err(e),
    }

    let scan = ScanOptions { jobs: settings.jobs, ..ScanOptions::default() };
    let rep = verify_point_spectrum(spec, &front, &scan)?;
    let lead = rep
        .leading_point()
        .map(|e| format!("leading point eigenvalue {:.6e}{:+.6e}i", e.re, e.im))
        .unwrap_or_else(|| "no point eigenvalue with Re > -delta0".into());
    let zm = rep
        .zero_mode
        .as_ref()
        .map(|z| format!(" sigma_min={:.3e} (threshold {:.3e})", z.sigma_min, z.threshold))
        .unwrap_or_default();
    entries.push(entry(4, if rep.pass { Verdict::Pass } else { Verdict::Fail }, format!("{lead}{zm}")));
    Ok(finish(entries, 5))
}
