//! Pole and residue tables for the FPU figures.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use acsm_core::formats::Provenance;
use acsm_core::fpu_model::{build_chain, FpuParams};
use acsm_core::gibbs::GibbsStream;
use acsm_core::moments::{estimate_moments, MomentSequence, DEFAULT_BLOCKS};
use acsm_core::reference::{calibrate_b, sech_moments};
use acsm_core::stats::linear_fit;
use acsm_core::stieltjes::{approximant_ladder, SpectralApproximant};
use serde::{Deserialize, Serialize};

use crate::commands::pole_ladder;
use crate::config::{digest_of, provenance, ObservableSpec};
use crate::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig5" => Ok(Figure::Fig5),
            _ => Err(CliError::Config(format!("unknown figure id {s:?}; expected fig1..fig5"))),
        }
    }
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(CliError::Config(format!("unknown scale {s:?}; expected desk or paper"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub scale: Scale,
    pub n_particles: usize,
    pub alpha: f64,
    pub beta: f64,
    pub temperatures: Vec<f64>,
    pub n_samples: usize,
    /// Highest moment index estimated.
    pub moment_order: usize,
    pub max_order: usize,
    pub blocks: usize,
    pub seed: u64,
    pub precision_bits: usize,
}

impl ScaleSpec {
    pub fn new(scale: Scale, seed: u64, precision_bits: usize) -> Self {
        let (temperatures, n_samples) = match scale {
            Scale::Desk => (vec![1e-5, 1e-4, 1e-3, 1e-2], 100_000),
            // half decades from 1e-6 to 1
            Scale::Paper => ((0..=12).map(|i| 10f64.powf(-6.0 + 0.5 * i as f64)).collect(), 1_000_000),
        };
        Self {
            scale,
            n_particles: 40,
            alpha: 0.25,
            beta: 0.25,
            temperatures,
            n_samples,
            moment_order: 8,
            max_order: 4,
            blocks: DEFAULT_BLOCKS,
            seed,
            precision_bits,
        }
    }

    pub fn params(&self, temperature: f64) -> CliResult<FpuParams> {
        Ok(FpuParams::new(self.n_particles, self.alpha, self.beta, temperature)?)
    }

    pub fn provenance(&self) -> Provenance {
        provenance(digest_of(self))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LadderRun {
    pub temperature: f64,
    pub moments: MomentSequence,
    pub ladder: Vec<SpectralApproximant>,
    /// Determinant gate message when the ladder stopped early.
    pub gate: Option<String>,
}

/// Largest jackknife error of the dominant frequency, relative to it, for an
/// order to count as statistically supported.
pub const STABLE_REL_STDERR: f64 = 0.1;

fn dominant_of(a: &SpectralApproximant) -> (f64, f64) {
    let i = a.dominant_index();
    (a.atoms[i].omega, a.normalized_residues()[i])
}

impl LadderRun {
    pub fn top(&self) -> Option<&SpectralApproximant> {
        self.ladder.last()
    }

    /// Highest order whose dominant pole every jackknife replica reproduces
    /// within `STABLE_REL_STDERR`. Exact moments make every order stable.
    pub fn stable(&self) -> Option<&SpectralApproximant> {
        if self.moments.jackknife.is_empty() {
            return self.top();
        }
        self.ladder.iter().rev().find(|a| {
            let at = &a.atoms[a.dominant_index()];
            at.omega_stderr.is_some_and(|s| s <= STABLE_REL_STDERR * at.omega)
        })
    }

    /// `(omega, normalized residue)` of the dominant atom at the stable order.
    pub fn dominant(&self) -> Option<(f64, f64)> {
        self.stable().map(dominant_of)
    }

    pub fn dominant_at_top(&self) -> Option<(f64, f64)> {
        self.top().map(dominant_of)
    }
}

pub fn ladder_run(spec: &ScaleSpec, temperature: f64, observable: &ObservableSpec) -> CliResult<LadderRun> {
    let params = spec.params(temperature)?;
    let model = build_chain(params)?;
    let stream = GibbsStream::new(params, spec.seed, spec.n_samples)?;
    let (obs, _) = observable.build(&model, &stream)?;
    let mut moments = estimate_moments(&model, &stream, &obs, spec.moment_order, spec.blocks)?;
    moments.seed = Some(spec.seed);
    let order = spec.max_order.min(moments.c.len() / 2);
    let (ladder, gate) = pole_ladder(&moments, order, spec.precision_bits);
    Ok(LadderRun {
        temperature,
        moments,
        ladder,
        gate: gate.map(|e| e.to_string()),
    })
}

pub fn ladder_runs(spec: &ScaleSpec, observable: &ObservableSpec) -> CliResult<Vec<LadderRun>> {
    spec.temperatures.iter().map(|&t| ladder_run(spec, t, observable)).collect()
}

fn slope_of(points: Vec<(f64, f64)>) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .into_iter()
        .map(|(t, w)| (t.ln(), (1.0 / w).ln()))
        .unzip();
    (x.len() >= 2).then(|| linear_fit(&x, &y).1)
}

/// Slope of `ln(1/omega_dominant)` against `ln T` at the stable orders.
pub fn dominant_slope(runs: &[LadderRun]) -> Option<f64> {
    slope_of(runs.iter().filter_map(|r| r.dominant().map(|d| (r.temperature, d.0))).collect())
}

/// Same slope taken at the top valid order of every run.
pub fn top_order_slope(runs: &[LadderRun]) -> Option<f64> {
    slope_of(runs.iter().filter_map(|r| r.dominant_at_top().map(|d| (r.temperature, d.0))).collect())
}

pub fn pole_table(runs: &[LadderRun], prov: &Provenance) -> String {
    let mut s = format!("# config_digest={}\n# code_version={}\n", prov.config_digest, prov.code_version);
    s.push_str("T,order,k,omega,one_over_omega,rho,rho_normalized,omega_stderr,rho_stderr\n");
    for r in runs {
        for a in &r.ladder {
            let norm = a.normalized_residues();
            for (k, at) in a.atoms.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{:e},{},{},{:e},{:e},{:e},{:e},{},{}",
                    r.temperature,
                    a.order,
                    k + 1,
                    at.omega,
                    1.0 / at.omega,
                    at.rho,
                    norm[k],
                    at.omega_stderr.map_or(String::new(), |v| format!("{v:e}")),
                    at.rho_stderr.map_or(String::new(), |v| format!("{v:e}")),
                );
            }
        }
    }
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapRow {
    pub order: usize,
    pub observable_gap: f64,
    pub sech_gap: f64,
    /// `observable_gap / sech_gap`.
    pub ratio: f64,
    /// Same comparison on `ln(omega_2 / omega_1)`.
    pub log_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OverlayRun {
    pub temperature: f64,
    pub sech_b: f64,
    pub observable: Vec<SpectralApproximant>,
    pub sech: Vec<SpectralApproximant>,
    pub gaps: Vec<GapRow>,
    pub gate: Option<String>,
}

fn first_gap(a: &SpectralApproximant) -> Option<(f64, f64)> {
    (a.atoms.len() >= 2).then(|| {
        let (w1, w2) = (a.atoms[0].omega, a.atoms[1].omega);
        (w2 - w1, (w2 / w1).ln())
    })
}

/// Poles of the observable against those of `c_0 sech(b t)`, with `b`
/// matched to the order-1 pole, at the given orders.
pub fn sech_overlay(run: &LadderRun, orders: &[usize], bits: usize) -> CliResult<OverlayRun> {
    let b = calibrate_b(&run.moments)?;
    let top = orders.iter().copied().max().unwrap_or(1);
    let sech = sech_moments(b, 2 * top)?.to_sequence().scaled(run.moments.c[0].sqrt());
    let (sech_ladder, sech_gate) = approximant_ladder(&sech, top, bits);
    if let Some(e) = sech_gate {
        return Err(e.into());
    }
    let pick = |l: &[SpectralApproximant]| -> Vec<SpectralApproximant> {
        l.iter().filter(|a| orders.contains(&a.order)).cloned().collect()
    };
    let observable = pick(&run.ladder);
    let sech = pick(&sech_ladder);
    let gaps = observable
        .iter()
        .filter_map(|a| {
            let s = sech.iter().find(|s| s.order == a.order)?;
            let (g, lg) = first_gap(a)?;
            let (sg, slg) = first_gap(s)?;
            Some(GapRow {
                order: a.order,
                observable_gap: g,
                sech_gap: sg,
                ratio: g / sg,
                log_ratio: lg / slg,
            })
        })
        .collect();
    Ok(OverlayRun {
        temperature: run.temperature,
        sech_b: b,
        observable,
        sech,
        gaps,
        gate: run.gate.clone(),
    })
}

pub fn overlay_table(o: &OverlayRun, observable: &str, prov: &Provenance) -> String {
    let mut s = format!("# config_digest={}\n# code_version={}\n", prov.config_digest, prov.code_version);
    let _ = writeln!(s, "# T={:e} sech_b={:e}", o.temperature, o.sech_b);
    s.push_str("source,order,k,omega,rho_normalized\n");
    for (name, ladder) in [(observable, &o.observable), ("sech", &o.sech)] {
        for a in ladder {
            for (k, (at, r)) in a.atoms.iter().zip(a.normalized_residues()).enumerate() {
                let _ = writeln!(s, "{name},{},{},{:e},{:e}", a.order, k + 1, at.omega, r);
            }
        }
    }
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FigureSummary {
    pub figure: Figure,
    pub spec: ScaleSpec,
    pub observable: String,
    /// Fitted `d ln(1/omega_dominant) / d ln T` at the stable orders.
    pub dominant_slope: Option<f64>,
    pub top_order_slope: Option<f64>,
    /// `(T, stable order, omega_dominant, normalized dominant residue)`.
    pub dominant: Vec<(f64, usize, f64, f64)>,
    pub max_valid_order: Vec<(f64, usize)>,
    pub gaps: Vec<GapRow>,
    pub gates: Vec<String>,
    pub provenance: Provenance,
}

fn summarize(figure: Figure, spec: &ScaleSpec, obs: &str, runs: &[LadderRun], prov: &Provenance) -> FigureSummary {
    FigureSummary {
        figure,
        spec: spec.clone(),
        observable: obs.to_string(),
        dominant_slope: dominant_slope(runs),
        top_order_slope: top_order_slope(runs),
        dominant: runs
            .iter()
            .filter_map(|r| {
                let a = r.stable()?;
                let (w, f) = dominant_of(a);
                Some((r.temperature, a.order, w, f))
            })
            .collect(),
        max_valid_order: runs.iter().map(|r| (r.temperature, r.ladder.len())).collect(),
        gaps: Vec::new(),
        gates: runs
            .iter()
            .filter_map(|r| r.gate.as_ref().map(|g| format!("T={:e}: {g}", r.temperature)))
            .collect(),
        provenance: prov.clone(),
    }
}

/// Runs the experiment behind `figure`, writes `<fig>.csv` and `<fig>.json`
/// into `out`, and returns the summary.
pub fn reproduce(figure: Figure, spec: &ScaleSpec, out: &Path) -> CliResult<FigureSummary> {
    std::fs::create_dir_all(out)?;
    let prov = provenance(digest_of(&(figure, spec)));
    let (table, summary) = match figure {
        Figure::Fig1 | Figure::Fig2 | Figure::Fig3 | Figure::Fig4 => {
            let (obs, name) = match figure {
                Figure::Fig1 | Figure::Fig2 => (ObservableSpec::Etilde, "etilde"),
                _ => (ObservableSpec::Ktilde, "ktilde"),
            };
            let runs = ladder_runs(spec, &obs)?;
            (pole_table(&runs, &prov), summarize(figure, spec, name, &runs, &prov))
        }
        Figure::Fig5 => {
            let t = spec.temperatures.iter().copied().fold(f64::INFINITY, f64::min);
            let run = ladder_run(spec, t, &ObservableSpec::Etilde)?;
            let overlay = sech_overlay(&run, &[3, 4], spec.precision_bits)?;
            let mut summary = summarize(figure, spec, "etilde", std::slice::from_ref(&run), &prov);
            summary.gaps = overlay.gaps.clone();
            (overlay_table(&overlay, "etilde", &prov), summary)
        }
    };
    std::fs::write(out.join(format!("{}.csv", figure.name())), table)?;
    std::fs::write(
        out.join(format!("{}.json", figure.name())),
        serde_json::to_string_pretty(&summary).map_err(acsm_core::Error::from)?,
    )?;
    Ok(summary)
}

pub fn summary_text(s: &FigureSummary) -> String {
    let mut out = format!("{} ({:?} scale, observable {})\n", s.figure.name(), s.spec.scale, s.observable);
    for (t, order, w, f) in &s.dominant {
        let _ = writeln!(
            out,
            "T = {t:.1e}, order {order}: dominant omega = {w:.6e} (1/omega = {:.4e}), residue fraction = {f:.6}",
            1.0 / w
        );
    }
    if let Some(slope) = s.dominant_slope {
        let _ = writeln!(out, "log-log slope of 1/omega vs T (stable orders): {slope:.4}");
    }
    if let Some(slope) = s.top_order_slope {
        let _ = writeln!(out, "log-log slope of 1/omega vs T (top valid order): {slope:.4}");
    }
    for g in &s.gaps {
        let _ = writeln!(
            out,
            "order {}: gap {:.4e} vs sech {:.4e}, ratio {:.3e}, log-gap ratio {:.3}",
            g.order, g.observable_gap, g.sech_gap, g.ratio, g.log_ratio
        );
    }
    for g in &s.gates {
        let _ = writeln!(out, "{g}");
    }
    out.trim_end().to_string()
}
