//! Direct verification layer: symplectic integration of the chain,
//! ensemble autocorrelations over Gibbs initial conditions, the
//! alternating truncation bounds and the correlated-variables bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpu_model::{bonds_from_positions, hamiltonian, ChainModel, PhasePoint};
use crate::gibbs::PointSource;
use crate::lie::flow::Observable;
use crate::lie::jet::Compensated;
use crate::moments::{MomentSequence, DEFAULT_BLOCKS};
use crate::reference::series_partial_sums;
use crate::stats::{jackknife_stderr, REDUCE_BLOCK};

pub const DEFAULT_DRIFT_BOUND: f64 = 1e-6;
/// Default step as a fraction of the shortest harmonic period scale `1 / omega_max`.
pub const DEFAULT_DT_FACTOR: f64 = 0.05;
/// Stability limit on `|dt| omega_max`.
pub const MAX_DT_FACTOR: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Velocity Verlet, second order.
    Verlet,
    /// Fourth-order triple-jump composition of Verlet.
    #[default]
    Yoshida4,
}

impl Scheme {
    pub fn order(self) -> i32 {
        match self {
            Scheme::Verlet => 2,
            Scheme::Yoshida4 => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub scheme: Scheme,
    pub drift_bound: f64,
    /// Record the observable every `stride` steps.
    pub stride: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::default(),
            drift_bound: DEFAULT_DRIFT_BOUND,
            stride: 1,
        }
    }
}

pub fn default_dt(model: &ChainModel) -> f64 {
    DEFAULT_DT_FACTOR / model.max_frequency()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial: PhasePoint,
    pub last: PhasePoint,
    pub dt: f64,
    pub n_steps: usize,
    pub stride: usize,
    /// Observable at steps `0, stride, 2 stride, ...`.
    pub samples: Vec<f64>,
    /// Largest relative energy deviation at the recorded steps.
    pub drift: f64,
    pub drift_bound: f64,
}

struct Stepper<'a> {
    model: &'a ChainModel,
    force: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a ChainModel) -> Self {
        Self {
            model,
            force: vec![0.0; model.n()],
        }
    }

    fn verlet(&mut self, x: &mut PhasePoint, h: f64) {
        self.model.forces(&x.bonds, &mut self.force);
        for (p, f) in x.p.iter_mut().zip(&self.force) {
            *p += 0.5 * h * f;
        }
        for (q, p) in x.q.iter_mut().zip(&x.p) {
            *q += h * p;
        }
        x.bonds = bonds_from_positions(&x.q);
        self.model.forces(&x.bonds, &mut self.force);
        for (p, f) in x.p.iter_mut().zip(&self.force) {
            *p += 0.5 * h * f;
        }
    }

    fn step(&mut self, x: &mut PhasePoint, dt: f64, scheme: Scheme) {
        match scheme {
            Scheme::Verlet => self.verlet(x, dt),
            Scheme::Yoshida4 => {
                let c = 2f64.cbrt();
                let w1 = 1.0 / (2.0 - c);
                let w0 = -c * w1;
                self.verlet(x, w1 * dt);
                self.verlet(x, w0 * dt);
                self.verlet(x, w1 * dt);
            }
        }
    }
}

fn check_step(model: &ChainModel, dt: f64) -> Result<()> {
    let r = dt.abs() * model.max_frequency();
    if !(dt != 0.0 && dt.is_finite()) || r >= MAX_DT_FACTOR {
        return Err(Error::StepTooLarge(format!(
            "|dt| omega_max = {r:.3} must lie in (0, {MAX_DT_FACTOR})"
        )));
    }
    Ok(())
}

/// Integrates `n_steps` of size `dt` (negative runs backward in time).
pub fn integrate(
    model: &ChainModel,
    x: &PhasePoint,
    dt: f64,
    n_steps: usize,
    observable: Option<&Observable>,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    check_step(model, dt)?;
    let stride = opts.stride.max(1);
    let h0 = hamiltonian(model, x);
    let scale = if h0.abs() > 0.0 { h0.abs() } else { 1.0 };
    let mut stepper = Stepper::new(model);
    let mut cur = x.clone();
    let mut samples = Vec::with_capacity(n_steps / stride + 1);
    let mut drift: f64 = 0.0;
    let mut record = |cur: &PhasePoint, drift: &mut f64| {
        if let Some(o) = observable {
            samples.push(o.value(model, cur));
        }
        *drift = drift.max((hamiltonian(model, cur) - h0).abs() / scale);
    };
    record(&cur, &mut drift);
    for s in 1..=n_steps {
        stepper.step(&mut cur, dt, opts.scheme);
        if s % stride == 0 || s == n_steps {
            record(&cur, &mut drift);
        }
    }
    if !(drift <= opts.drift_bound) {
        let shrink = (opts.drift_bound / drift).powf(1.0 / opts.scheme.order() as f64);
        return Err(Error::EnergyDrift {
            drift,
            bound: opts.drift_bound,
            suggested_dt: 0.5 * dt.abs() * shrink.min(1.0),
        });
    }
    Ok(Trajectory {
        initial: x.clone(),
        last: cur,
        dt,
        n_steps,
        stride,
        samples,
        drift,
        drift_bound: opts.drift_bound,
    })
}

/// Step indices of `t_grid` on a grid of spacing `dt`.
pub fn grid_steps(t_grid: &[f64], dt: f64) -> Result<Vec<usize>> {
    t_grid
        .iter()
        .map(|&t| {
            let k = t / dt;
            let r = k.round();
            if t < 0.0 || (k - r).abs() > 1e-9 * r.max(1.0) {
                Err(Error::GridMisaligned { t, dt })
            } else {
                Ok(r as usize)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationOptions {
    pub dt: Option<f64>,
    pub blocks: usize,
    pub integrate: IntegrateOptions,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self {
            dt: None,
            blocks: DEFAULT_BLOCKS,
            integrate: IntegrateOptions::default(),
        }
    }
}

/// Per-block sums over initial conditions for a set of observables.
#[derive(Clone, Debug)]
struct EnsembleSums {
    n: f64,
    /// `sum f_i(x)`
    s0: Vec<f64>,
    /// `sum f_i(x) f_j(x)`, row-major
    s00: Vec<f64>,
    /// `sum f_i(Phi^t x) f_i(x)` per time
    st: Vec<Vec<f64>>,
    /// `sum (f_i(Phi^t x) - f_i(x))^2` per time
    sd: Vec<Vec<f64>>,
}

impl EnsembleSums {
    fn zeros(k: usize, nt: usize) -> Self {
        Self {
            n: 0.0,
            s0: vec![0.0; k],
            s00: vec![0.0; k * k],
            st: vec![vec![0.0; nt]; k],
            sd: vec![vec![0.0; nt]; k],
        }
    }

    fn combine(parts: &[EnsembleSums], sign: &[f64]) -> Self {
        let k = parts[0].s0.len();
        let nt = parts[0].st[0].len();
        let fold = |get: &dyn Fn(&EnsembleSums) -> f64| {
            let mut c = Compensated::default();
            for (p, s) in parts.iter().zip(sign) {
                c.add(s * get(p));
            }
            c.value()
        };
        let mut out = Self::zeros(k, nt);
        out.n = fold(&|p| p.n);
        for i in 0..k {
            out.s0[i] = fold(&|p| p.s0[i]);
            for j in 0..k {
                out.s00[i * k + j] = fold(&|p| p.s00[i * k + j]);
            }
            for t in 0..nt {
                out.st[i][t] = fold(&|p| p.st[i][t]);
                out.sd[i][t] = fold(&|p| p.sd[i][t]);
            }
        }
        out
    }

    fn mean(&self, i: usize) -> f64 {
        self.s0[i] / self.n
    }

    fn cov0(&self, i: usize, j: usize) -> f64 {
        let k = self.s0.len();
        self.s00[i * k + j] / self.n - self.mean(i) * self.mean(j)
    }

    fn autocorr(&self, i: usize, t: usize) -> f64 {
        self.st[i][t] / self.n - self.mean(i).powi(2)
    }

    fn half_sq_increment(&self, i: usize, t: usize) -> f64 {
        0.5 * self.sd[i][t] / self.n
    }
}

/// Totals and leave-one-block-out sums.
struct Ensemble {
    total: EnsembleSums,
    replicas: Vec<EnsembleSums>,
}

impl Ensemble {
    fn jackknife<F: Fn(&EnsembleSums) -> f64>(&self, f: F) -> (f64, f64) {
        let reps: Vec<f64> = self.replicas.iter().map(&f).collect();
        (f(&self.total), jackknife_stderr(&reps))
    }
}

fn ensemble<S: PointSource + ?Sized>(
    model: &ChainModel,
    sample: &S,
    observables: &[&Observable],
    steps: &[usize],
    dt: f64,
    opts: &CorrelationOptions,
) -> Result<Ensemble> {
    for o in observables {
        o.check(model)?;
    }
    check_step(model, dt)?;
    let n = sample.len();
    let blocks = opts.blocks;
    if blocks < 2 || n < blocks {
        return Err(Error::Insufficient(format!(
            "{n} initial conditions cannot fill {blocks} jackknife blocks"
        )));
    }
    let k = observables.len();
    let nt = steps.len();
    let max_step = steps.iter().copied().max().unwrap_or(0);
    let per_block: Vec<EnsembleSums> = (0..blocks)
        .map(|b| {
            let start = b * n / blocks;
            let end = (b + 1) * n / blocks;
            let chunks: Vec<Result<EnsembleSums>> = (start..end)
                .step_by(REDUCE_BLOCK)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|c0| {
                    let mut acc = EnsembleSums::zeros(k, nt);
                    for idx in c0..(c0 + REDUCE_BLOCK).min(end) {
                        let x = sample.point(idx);
                        let f0: Vec<f64> = observables.iter().map(|o| o.value(model, &x)).collect();
                        let series = time_series(model, &x, observables, steps, max_step, dt, &opts.integrate)?;
                        acc.n += 1.0;
                        for i in 0..k {
                            acc.s0[i] += f0[i];
                            for j in 0..k {
                                acc.s00[i * k + j] += f0[i] * f0[j];
                            }
                            for t in 0..nt {
                                let ft = series[i][t];
                                acc.st[i][t] += ft * f0[i];
                                acc.sd[i][t] += (ft - f0[i]).powi(2);
                            }
                        }
                    }
                    Ok(acc)
                })
                .collect();
            let chunks = chunks.into_iter().collect::<Result<Vec<_>>>()?;
            let ones = vec![1.0; chunks.len()];
            Ok(EnsembleSums::combine(&chunks, &ones))
        })
        .collect::<Result<Vec<_>>>()?;
    let ones = vec![1.0; blocks];
    let total = EnsembleSums::combine(&per_block, &ones);
    let replicas = per_block
        .iter()
        .map(|b| EnsembleSums::combine(&[total.clone(), b.clone()], &[1.0, -1.0]))
        .collect();
    Ok(Ensemble { total, replicas })
}

/// Observable values at the requested steps along one trajectory.
fn time_series(
    model: &ChainModel,
    x: &PhasePoint,
    observables: &[&Observable],
    steps: &[usize],
    max_step: usize,
    dt: f64,
    opts: &IntegrateOptions,
) -> Result<Vec<Vec<f64>>> {
    let h0 = hamiltonian(model, x);
    let scale = if h0.abs() > 0.0 { h0.abs() } else { 1.0 };
    let mut by_step = vec![Vec::new(); max_step + 1];
    let mut wanted = vec![false; max_step + 1];
    for &s in steps {
        wanted[s] = true;
    }
    let mut stepper = Stepper::new(model);
    let mut cur = x.clone();
    let mut drift: f64 = 0.0;
    for s in 0..=max_step {
        if s > 0 {
            stepper.step(&mut cur, dt, opts.scheme);
        }
        if wanted[s] {
            by_step[s] = observables.iter().map(|o| o.value(model, &cur)).collect();
            drift = drift.max((hamiltonian(model, &cur) - h0).abs() / scale);
        }
    }
    drift = drift.max((hamiltonian(model, &cur) - h0).abs() / scale);
    if !(drift <= opts.drift_bound) {
        let shrink = (opts.drift_bound / drift).powf(1.0 / opts.scheme.order() as f64);
        return Err(Error::EnergyDrift {
            drift,
            bound: opts.drift_bound,
            suggested_dt: 0.5 * dt.abs() * shrink.min(1.0),
        });
    }
    Ok((0..observables.len())
        .map(|i| steps.iter().map(|&s| by_step[s][i]).collect())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCorrelation {
    pub observable: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `mean (f_t - f)^2 / 2` and its error, for the identity
    /// `C(0) - C(t) = mean (f_t - f)^2 / 2` under an invariant measure.
    pub half_sq_increment: Vec<f64>,
    pub half_sq_increment_stderr: Vec<f64>,
    pub n_samples: usize,
    pub dt: f64,
}

pub fn empirical_autocorrelation<S: PointSource + ?Sized>(
    model: &ChainModel,
    sample: &S,
    observable: &Observable,
    t_grid: &[f64],
    opts: &CorrelationOptions,
) -> Result<EmpiricalCorrelation> {
    let dt = opts.dt.unwrap_or_else(|| default_dt(model));
    let steps = grid_steps(t_grid, dt)?;
    let ens = ensemble(model, sample, &[observable], &steps, dt, opts)?;
    let (values, stderr) = (0..steps.len()).map(|t| ens.jackknife(|s| s.autocorr(0, t))).unzip();
    let (half_sq_increment, half_sq_increment_stderr) = (0..steps.len())
        .map(|t| ens.jackknife(|s| s.half_sq_increment(0, t)))
        .unzip();
    Ok(EmpiricalCorrelation {
        observable: observable.name().to_string(),
        times: t_grid.to_vec(),
        values,
        stderr,
        half_sq_increment,
        half_sq_increment_stderr,
        n_samples: sample.len(),
        dt,
    })
}

/// Times `0, dt * stride, ...` up to `t_max` that sit exactly on the step grid.
pub fn aligned_grid(t_max: f64, dt: f64, stride: usize) -> Vec<f64> {
    let last = (t_max / (dt * stride as f64)).floor() as usize;
    (0..=last).map(|i| (i * stride) as f64 * dt).collect()
}

/// Even truncations bound the correlation from above, odd ones from below
/// (alternating remainder), each within `sigma` standard errors.
pub fn bracket_holds(n: usize, partial_sum: f64, c: f64, sigma: f64) -> bool {
    if n.is_multiple_of(2) {
        partial_sum >= c - sigma
    } else {
        partial_sum <= c + sigma
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub t: f64,
    pub c: f64,
    pub stderr: f64,
    /// `S_n(t)` for each requested order.
    pub partial_sums: Vec<f64>,
    /// Standard error of `S_n(t)` from the moment errors.
    pub partial_sum_stderr: Vec<f64>,
    pub holds: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub orders: Vec<usize>,
    pub rows: Vec<TruncationRow>,
    /// End of the initial stretch of the grid where every order brackets.
    pub t_star: f64,
    pub sigmas: f64,
}

pub fn truncation_bounds_check(
    emp: &EmpiricalCorrelation,
    m: &MomentSequence,
    orders: &[usize],
) -> Result<TruncationReport> {
    truncation_bounds_check_with(emp, m, orders, 3.0)
}

pub fn truncation_bounds_check_with(
    emp: &EmpiricalCorrelation,
    m: &MomentSequence,
    orders: &[usize],
    sigmas: f64,
) -> Result<TruncationReport> {
    let top = orders.iter().copied().max().unwrap_or(0);
    if m.c.len() <= top {
        return Err(Error::Insufficient(format!(
            "truncation order {top} needs c_0..c_{top}, have {} moments",
            m.c.len()
        )));
    }
    let mut rows = Vec::with_capacity(emp.times.len());
    let mut t_star = 0.0;
    let mut intact = true;
    for (i, &t) in emp.times.iter().enumerate() {
        let sums = series_partial_sums(&m.c[..=top], t);
        let errs = partial_sum_stderr(&m.stderr[..=top], t);
        let c = emp.values[i];
        let mut holds = Vec::with_capacity(orders.len());
        let mut ps = Vec::with_capacity(orders.len());
        let mut pe = Vec::with_capacity(orders.len());
        for &n in orders {
            let sigma = sigmas * (emp.stderr[i].powi(2) + errs[n].powi(2)).sqrt();
            holds.push(bracket_holds(n, sums[n], c, sigma));
            ps.push(sums[n]);
            pe.push(errs[n]);
        }
        if intact && holds.iter().all(|&h| h) {
            t_star = t;
        } else {
            intact = false;
        }
        rows.push(TruncationRow {
            t,
            c,
            stderr: emp.stderr[i],
            partial_sums: ps,
            partial_sum_stderr: pe,
            holds,
        });
    }
    Ok(TruncationReport {
        orders: orders.to_vec(),
        rows,
        t_star,
        sigmas,
    })
}

fn partial_sum_stderr(stderr: &[f64], t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(stderr.len());
    let mut scale = 1.0;
    let mut var = 0.0;
    for (k, s) in stderr.iter().enumerate() {
        if k > 0 {
            scale *= t * t / ((2 * k - 1) * 2 * k) as f64;
        }
        var += (s * scale).powi(2);
        out.push(var.sqrt());
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedRow {
    pub t: f64,
    pub c_g: f64,
    pub c_f_scaled: f64,
    pub difference: f64,
    pub stderr: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedReport {
    pub correlation: f64,
    pub epsilon: f64,
    /// `sign(corr) sigma_g / sigma_f`, the multiple of `f` compared with `g`.
    pub scale: f64,
    pub variance_g: f64,
    /// `(eps^2 + 2 eps) sigma_g^2`.
    pub bound: f64,
    pub rows: Vec<CorrelatedRow>,
    /// `|corr| <= 1/2`: the bound is not informative and was not checked.
    pub skipped: bool,
    pub holds: bool,
}

pub fn correlated_variables_check<S: PointSource + ?Sized>(
    model: &ChainModel,
    sample: &S,
    f: &Observable,
    g: &Observable,
    t_grid: &[f64],
    opts: &CorrelationOptions,
) -> Result<CorrelatedReport> {
    let dt = opts.dt.unwrap_or_else(|| default_dt(model));
    let steps = grid_steps(t_grid, dt)?;
    let ens = ensemble(model, sample, &[f, g], &steps, dt, opts)?;
    let corr_of = |s: &EnsembleSums| s.cov0(0, 1) / (s.cov0(0, 0) * s.cov0(1, 1)).sqrt();
    let correlation = corr_of(&ens.total);
    let var_g = ens.total.cov0(1, 1);
    let scale_of = |s: &EnsembleSums| corr_of(s).signum() * (s.cov0(1, 1) / s.cov0(0, 0)).sqrt();
    let scale = scale_of(&ens.total);
    let epsilon = (2.0 * (1.0 - correlation.abs())).max(0.0).sqrt();
    let bound = (epsilon * epsilon + 2.0 * epsilon) * var_g;
    let skipped = !(correlation.abs() > 0.5);
    let rows: Vec<CorrelatedRow> = steps
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let diff = |s: &EnsembleSums| s.autocorr(1, i) - scale_of(s).powi(2) * s.autocorr(0, i);
            let (d, se) = ens.jackknife(diff);
            CorrelatedRow {
                t: t_grid[i],
                c_g: ens.total.autocorr(1, i),
                c_f_scaled: scale * scale * ens.total.autocorr(0, i),
                difference: d,
                stderr: se,
                holds: d.abs() <= bound + 4.0 * se,
            }
        })
        .collect();
    let holds = skipped || rows.iter().all(|r| r.holds);
    Ok(CorrelatedReport {
        correlation,
        epsilon,
        scale,
        variance_g: var_g,
        bound,
        rows,
        skipped,
        holds,
    })
}
