//! One function per subcommand. Each writes its artifacts into `out` and
//! returns a short human-readable summary.

use std::path::{Path, PathBuf};

use acsm_core::criteria::{criteria_report, CriteriaOptions, CriteriaReport};
use acsm_core::dynamics::{
    aligned_grid, default_dt, empirical_autocorrelation, truncation_bounds_check, CorrelationOptions,
    IntegrateOptions, TruncationReport,
};
use acsm_core::formats::{
    correlation_csv, parse_moment_file, parse_pole_csv, pole_csv, read_sample_file, sample_header_len,
    write_moment_file, write_sample_file, MomentFile, Provenance, SampleHeader,
};
use acsm_core::fpu_model::{build_chain, hamiltonian, kinetic_energy};
use acsm_core::gibbs::{mean_with_stderr, GibbsStream, PointSource, GENERATOR_ID};
use acsm_core::moments::{estimate_moments, MomentSequence};
use acsm_core::stieltjes::{
    approximant_ladder, attach_jackknife_errors, isolation_diagnostic, IsolationReport, SpectralApproximant,
};
use acsm_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::{provenance, RunConfig};
use crate::{CliError, CliResult};

pub const SAMPLE_FILE: &str = "samples.acsm";
pub const MOMENT_FILE: &str = "moments.json";
pub const POLE_FILE: &str = "poles.csv";
pub const ISOLATION_FILE: &str = "isolation.json";
pub const CRITERIA_FILE: &str = "criteria.json";
pub const CORRELATION_FILE: &str = "correlation.csv";
pub const BOUNDS_FILE: &str = "bounds.json";

fn ensure_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(value).map_err(Error::from)?)?;
    Ok(())
}

pub fn cmd_sample(cfg: &RunConfig, out: &Path) -> CliResult<(PathBuf, String)> {
    ensure_dir(out)?;
    let stream = GibbsStream::new(cfg.model, cfg.seed, cfg.n_samples)?;
    let header = SampleHeader {
        params: cfg.model,
        seed: cfg.seed,
        n_samples: cfg.n_samples,
        generator_id: GENERATOR_ID.to_string(),
        provenance: cfg.provenance(),
    };
    let path = out.join(SAMPLE_FILE);
    write_sample_file(&path, &header, &stream)?;
    let model = build_chain(cfg.model)?;
    let n = cfg.model.n_particles as f64;
    let (h, h_err) = mean_with_stderr(&stream, |x| hamiltonian(&model, x) / n);
    let (k, k_err) = mean_with_stderr(&stream, |x| kinetic_energy(x) / n);
    let bytes = sample_header_len(&header)? + 16 * cfg.model.n_particles * cfg.n_samples;
    let summary = format!(
        "wrote {} ({} points, {} bytes)\nmean H/N = {:.6e} +- {:.1e}\nmean K/N = {:.6e} +- {:.1e} (T/2 = {:.6e})",
        path.display(),
        cfg.n_samples,
        bytes,
        h,
        h_err,
        k,
        k_err,
        cfg.model.temperature / 2.0
    );
    Ok((path, summary))
}

/// Moments from a sample file, or from the virtual stream the config describes.
pub fn estimate_config_moments(cfg: &RunConfig, samples: Option<&Path>) -> CliResult<MomentSequence> {
    let model = build_chain(cfg.model)?;
    let mut m = match samples {
        Some(path) => {
            let (header, set) = read_sample_file(path)?;
            if header.params != cfg.model {
                return Err(CliError::Config(format!(
                    "sample file {} was drawn with {:?}, config asks for {:?}",
                    path.display(),
                    header.params,
                    cfg.model
                )));
            }
            let (obs, _) = cfg.observable.build(&model, &set)?;
            estimate_moments(&model, &set, &obs, cfg.max_order, cfg.jackknife_blocks)?
        }
        None => {
            let stream = GibbsStream::new(cfg.model, cfg.seed, cfg.n_samples)?;
            let (obs, _) = cfg.observable.build(&model, &stream)?;
            estimate_moments(&model, &stream, &obs, cfg.max_order, cfg.jackknife_blocks)?
        }
    };
    m.seed = Some(cfg.seed);
    Ok(m)
}

pub fn cmd_moments(cfg: &RunConfig, samples: Option<&Path>, out: &Path) -> CliResult<(PathBuf, String)> {
    ensure_dir(out)?;
    let m = estimate_config_moments(cfg, samples)?;
    let path = out.join(MOMENT_FILE);
    write_moment_file(&path, &MomentFile::new(m.clone(), cfg.provenance()))?;
    let mut summary = format!("wrote {} ({} samples)\n", path.display(), m.n_samples);
    for (n, (c, s)) in m.c.iter().zip(&m.stderr).enumerate() {
        summary.push_str(&format!("c_{n} = {c:.9e} +- {s:.2e}\n"));
    }
    Ok((path, summary.trim_end().to_string()))
}

pub fn read_moments(path: &Path) -> CliResult<MomentFile> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_moment_file(&text)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoleRun {
    pub requested_order: usize,
    pub max_valid_order: usize,
    /// Set when the determinant gate stopped the ladder.
    pub gate: Option<String>,
    pub failing_order: Option<usize>,
    pub isolation: Option<IsolationReport>,
    pub provenance: Provenance,
}

/// Builds the approximant ladder, attaching jackknife errors when replicas exist.
pub fn pole_ladder(
    m: &MomentSequence,
    max_order: usize,
    bits: usize,
) -> (Vec<SpectralApproximant>, Option<Error>) {
    let (mut ladder, gate) = approximant_ladder(m, max_order, bits);
    let replicas = m.jackknife_sequences();
    for a in &mut ladder {
        attach_jackknife_errors(a, &replicas, bits);
    }
    (ladder, gate)
}

/// Writes the pole table and isolation report. On a determinant failure the
/// valid orders are still written before the gate error is returned.
pub fn cmd_poles(moments: &Path, order: Option<usize>, bits: usize, out: &Path) -> CliResult<(PoleRun, String)> {
    ensure_dir(out)?;
    let file = read_moments(moments)?;
    let m = &file.moments;
    let available = m.c.len() / 2;
    let max_order = order.unwrap_or(available);
    if max_order == 0 {
        return Err(CliError::Config("order must be at least 1".into()));
    }
    if max_order > available {
        return Err(Error::Insufficient(format!(
            "order {max_order} needs c_0..c_{}, file holds c_0..c_{}",
            2 * max_order - 1,
            m.max_n()
        ))
        .into());
    }
    let (ladder, gate) = pole_ladder(m, max_order, bits);
    std::fs::write(out.join(POLE_FILE), pole_csv(&ladder, &file.provenance))?;
    let failing_order = match &gate {
        Some(Error::NegativeDeterminant { failing_order, .. }) => Some(*failing_order),
        Some(_) => Some(ladder.len() + 1),
        None => None,
    };
    let run = PoleRun {
        requested_order: max_order,
        max_valid_order: ladder.len(),
        gate: gate.as_ref().map(|e| e.to_string()),
        failing_order,
        isolation: (!ladder.is_empty()).then(|| isolation_diagnostic(&ladder)),
        provenance: file.provenance.clone(),
    };
    write_json(&out.join(ISOLATION_FILE), &run)?;
    let mut summary = String::new();
    for a in &ladder {
        let norm = a.normalized_residues();
        for (k, at) in a.atoms.iter().enumerate() {
            summary.push_str(&format!(
                "order {} k {}: omega = {:.9e}, 1/omega = {:.6e}, rho/sum = {:.6e}\n",
                a.order,
                k + 1,
                at.omega,
                1.0 / at.omega,
                norm[k]
            ));
        }
    }
    if let Some(iso) = &run.isolation {
        summary.push_str(&format!("isolation verdict: {}\n", iso.verdict));
    }
    match gate {
        Some(e) => {
            eprint!("{summary}");
            eprintln!(
                "first failing order {}; maximal valid order {}",
                run.failing_order.unwrap_or(0),
                run.max_valid_order
            );
            Err(e.into())
        }
        None => Ok((run, summary.trim_end().to_string())),
    }
}

/// `c_n = sum rho_k u_k^n` for `n < 2 * order`.
pub fn moments_of_approximant(a: &SpectralApproximant) -> MomentSequence {
    let c = (0..2 * a.atoms.len())
        .map(|n| a.atoms.iter().map(|x| x.rho * x.u.powi(n as i32)).sum())
        .collect();
    MomentSequence::exact(&a.observable, c)
}

pub fn cmd_criteria(
    moments: Option<&Path>,
    poles: Option<&Path>,
    bits: usize,
    out: &Path,
) -> CliResult<(CriteriaReport, String)> {
    ensure_dir(out)?;
    let opts = CriteriaOptions::default();
    let (m, top, prov) = match (moments, poles) {
        (Some(path), _) => {
            let file = read_moments(path)?;
            let (ladder, _) = approximant_ladder(&file.moments, file.moments.c.len() / 2, bits);
            (file.moments, ladder.last().cloned(), file.provenance)
        }
        (None, Some(path)) => {
            let ladder = parse_pole_csv(&std::fs::read_to_string(path)?)?;
            let top = ladder
                .last()
                .cloned()
                .ok_or_else(|| Error::Format("pole file holds no approximant".into()))?;
            (moments_of_approximant(&top), Some(top), Provenance::default())
        }
        (None, None) => return Err(CliError::Config("criteria needs --moments or --poles".into())),
    };
    let report = criteria_report(&m, top.as_ref(), &opts)?;
    #[derive(Serialize)]
    struct Output<'a> {
        provenance: &'a Provenance,
        report: &'a CriteriaReport,
    }
    write_json(&out.join(CRITERIA_FILE), &Output { provenance: &prov, report: &report })?;
    let mut summary = format!("signature: {:?}\n", report.signature).to_lowercase();
    if let Some(ak) = &report.akhiezer_krein {
        summary.push_str(&format!("akhiezer-krein: {}\n", ak.verdict));
    }
    if let Some(h) = &report.hausdorff {
        summary.push_str(&format!("hausdorff level 0: {}\n", h.levels[0].verdict));
    }
    summary.push_str(&format!("root test: {}\n", report.root_test.verdict));
    if let Some(a) = &report.apriori {
        summary.push_str(&format!("a-priori polynomials: {}", a.verdict));
    }
    Ok((report, summary.trim_end().to_string()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub provenance: Provenance,
    pub dt: f64,
    pub n_samples: usize,
    pub truncation: TruncationReport,
    pub all_hold: bool,
}

pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> CliResult<(VerifyOutput, String)> {
    ensure_dir(out)?;
    let v = cfg.verify.clone().unwrap_or_default();
    let top = v.orders.iter().copied().max().unwrap_or(0);
    if top > cfg.max_order {
        return Err(CliError::Config(format!(
            "truncation order {top} exceeds max_order {}",
            cfg.max_order
        )));
    }
    let model = build_chain(cfg.model)?;
    let stream = GibbsStream::new(cfg.model, cfg.seed, cfg.n_samples)?;
    let (obs, _) = cfg.observable.build(&model, &stream)?;
    let m = estimate_moments(&model, &stream, &obs, cfg.max_order, cfg.jackknife_blocks)?;
    // disjoint initial conditions for the ensemble
    let ens = GibbsStream::new(cfg.model, cfg.seed, cfg.n_samples + v.n_samples)?.window(cfg.n_samples, v.n_samples);
    let dt = v.dt.unwrap_or_else(|| default_dt(&model));
    let t_grid = v.t_grid.clone().unwrap_or_else(|| aligned_grid(v.t_max, dt, v.stride));
    let opts = CorrelationOptions {
        dt: Some(dt),
        blocks: cfg.jackknife_blocks.min(ens.len()),
        integrate: IntegrateOptions {
            scheme: v.scheme,
            drift_bound: v.drift_bound,
            stride: 1,
        },
    };
    let emp = empirical_autocorrelation(&model, &ens, &obs, &t_grid, &opts)?;
    let report = truncation_bounds_check(&emp, &m, &v.orders)?;
    let prov = cfg.provenance();
    let sums: Vec<Vec<f64>> = report.rows.iter().map(|r| r.partial_sums.clone()).collect();
    std::fs::write(
        out.join(CORRELATION_FILE),
        correlation_csv(&emp.times, &emp.values, &emp.stderr, &v.orders, &sums, &prov),
    )?;
    let all_hold = report.rows.iter().all(|r| r.holds.iter().all(|&h| h));
    let output = VerifyOutput {
        provenance: prov,
        dt,
        n_samples: ens.len(),
        truncation: report,
        all_hold,
    };
    write_json(&out.join(BOUNDS_FILE), &output)?;
    let summary = format!(
        "dt = {dt:.4e}, {} grid points, bracket holds on [0, {:.4e}]\ntruncation bounds: {}",
        output.truncation.rows.len(),
        output.truncation.t_star,
        if all_hold { "hold" } else { "violated" }
    );
    Ok((output, summary))
}

/// Provenance for outputs that are not driven by a config file.
pub fn adhoc_provenance<T: Serialize>(value: &T) -> Provenance {
    provenance(crate::config::digest_of(value))
}
