//! Monte-Carlo estimates of `c_n = Var(f^(n))` with jackknife errors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpu_model::{ChainModel, FpuParams, PhasePoint};
use crate::gibbs::PointSource;
use crate::lie::flow::{observable_jet_from, trajectory_jet, Observable};
use crate::lie::jet::Compensated;
use crate::lie::DEFAULT_ORDER_CAP;
use crate::stats::{jackknife_stderr, Moments2, REDUCE_BLOCK};

pub const DEFAULT_BLOCKS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSequence {
    pub observable: String,
    #[serde(default)]
    pub params: Option<FpuParams>,
    pub n_samples: usize,
    pub c: Vec<f64>,
    pub stderr: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Leave-one-block-out replicas of `c`.
    #[serde(default)]
    pub jackknife: Vec<Vec<f64>>,
}

impl MomentSequence {
    /// Moments known exactly (zero error bars), e.g. analytic fixtures.
    pub fn exact(observable: &str, c: Vec<f64>) -> Self {
        let stderr = vec![0.0; c.len()];
        Self {
            observable: observable.to_string(),
            params: None,
            n_samples: 0,
            c,
            stderr,
            seed: None,
            jackknife: Vec::new(),
        }
    }

    pub fn max_n(&self) -> usize {
        self.c.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.is_empty() {
            return Err(Error::Format("moment sequence is empty".into()));
        }
        if self.stderr.len() != self.c.len() {
            return Err(Error::Format(format!(
                "{} moments but {} standard errors",
                self.c.len(),
                self.stderr.len()
            )));
        }
        if let Some((n, v)) = self.c.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::Format(format!("c_{n} = {v} is not a finite nonnegative number")));
        }
        if self.stderr.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Format("standard errors must be finite and nonnegative".into()));
        }
        if self.jackknife.iter().any(|r| r.len() != self.c.len()) {
            return Err(Error::Format("jackknife replica length mismatch".into()));
        }
        Ok(())
    }

    /// Multiplies the observable by `s`: every moment scales by `s^2`.
    pub fn scaled(&self, s: f64) -> Self {
        let s2 = s * s;
        let mut out = self.clone();
        out.c.iter_mut().for_each(|v| *v *= s2);
        out.stderr.iter_mut().for_each(|v| *v *= s2);
        for r in &mut out.jackknife {
            r.iter_mut().for_each(|v| *v *= s2);
        }
        out
    }

    pub fn truncated(&self, max_n: usize) -> Self {
        let k = (max_n + 1).min(self.c.len());
        let mut out = self.clone();
        out.c.truncate(k);
        out.stderr.truncate(k);
        for r in &mut out.jackknife {
            r.truncate(k);
        }
        out
    }

    pub fn jackknife_sequences(&self) -> Vec<MomentSequence> {
        self.jackknife
            .iter()
            .map(|r| MomentSequence {
                c: r.clone(),
                jackknife: Vec::new(),
                ..self.clone()
            })
            .collect()
    }
}

/// Derivatives `f^(0..=max_n)` of an observable at one phase point.
pub fn lie_derivatives(
    model: &ChainModel,
    x: &PhasePoint,
    observable: &Observable,
    max_n: usize,
) -> Vec<f64> {
    let tj = trajectory_jet(model, x, max_n);
    observable_jet_from(model, x, &tj, observable).derivatives()
}

fn check_request(model: &ChainModel, observable: &Observable, max_n: usize, cap: usize) -> Result<()> {
    if max_n > cap {
        return Err(Error::OrderCap {
            requested: max_n,
            cap,
        });
    }
    observable.check(model)
}

/// Per-block power sums of the shifted derivatives.
fn block_sums<S: PointSource + ?Sized>(
    model: &ChainModel,
    sample: &S,
    observable: &Observable,
    max_n: usize,
    blocks: usize,
    shift: &[f64],
) -> Vec<Vec<Moments2>> {
    let n = sample.len();
    let width = max_n + 1;
    (0..blocks)
        .map(|b| {
            let start = b * n / blocks;
            let end = (b + 1) * n / blocks;
            let chunks: Vec<Vec<(f64, f64)>> = (start..end)
                .step_by(REDUCE_BLOCK)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|c0| {
                    let mut acc = vec![(Compensated::default(), Compensated::default()); width];
                    for i in c0..(c0 + REDUCE_BLOCK).min(end) {
                        let d = lie_derivatives(model, &sample.point(i), observable, max_n);
                        for k in 0..width {
                            let v = d[k] - shift[k];
                            acc[k].0.add(v);
                            acc[k].1.add(v * v);
                        }
                    }
                    acc.iter().map(|(a, b)| (a.value(), b.value())).collect()
                })
                .collect();
            (0..width)
                .map(|k| {
                    let mut s1 = Compensated::default();
                    let mut s2 = Compensated::default();
                    for ch in &chunks {
                        s1.add(ch[k].0);
                        s2.add(ch[k].1);
                    }
                    Moments2 {
                        n: (end - start) as f64,
                        s1: s1.value(),
                        s2: s2.value(),
                    }
                })
                .collect()
        })
        .collect()
}

/// Estimates `c_0..c_max_n` with `blocks` contiguous jackknife blocks.
pub fn estimate_moments<S: PointSource + ?Sized>(
    model: &ChainModel,
    sample: &S,
    observable: &Observable,
    max_n: usize,
    blocks: usize,
) -> Result<MomentSequence> {
    estimate_moments_capped(model, sample, observable, max_n, blocks, DEFAULT_ORDER_CAP)
}

pub fn estimate_moments_capped<S: PointSource + ?Sized>(
    model: &ChainModel,
    sample: &S,
    observable: &Observable,
    max_n: usize,
    blocks: usize,
    cap: usize,
) -> Result<MomentSequence> {
    check_request(model, observable, max_n, cap)?;
    if blocks < 2 {
        return Err(Error::InvalidParams(format!("need at least 2 jackknife blocks, got {blocks}")));
    }
    let n = sample.len();
    if n < blocks {
        return Err(Error::Insufficient(format!(
            "{n} points cannot fill {blocks} jackknife blocks"
        )));
    }
    let shift = lie_derivatives(model, &sample.point(0), observable, max_n);
    let per_block = block_sums(model, sample, observable, max_n, blocks, &shift);
    let width = max_n + 1;
    let total: Vec<Moments2> = (0..width)
        .map(|k| {
            let mut s1 = Compensated::default();
            let mut s2 = Compensated::default();
            for b in &per_block {
                s1.add(b[k].s1);
                s2.add(b[k].s2);
            }
            Moments2 {
                n: n as f64,
                s1: s1.value(),
                s2: s2.value(),
            }
        })
        .collect();
    let c: Vec<f64> = total.iter().map(|m| m.variance()).collect();
    let jackknife: Vec<Vec<f64>> = per_block
        .iter()
        .map(|b| (0..width).map(|k| total[k].minus(&b[k]).variance()).collect())
        .collect();
    let stderr = (0..width)
        .map(|k| {
            let reps: Vec<f64> = jackknife.iter().map(|r| r[k]).collect();
            jackknife_stderr(&reps)
        })
        .collect();
    Ok(MomentSequence {
        observable: observable.name().to_string(),
        params: Some(model.params),
        n_samples: n,
        c,
        stderr,
        seed: None,
        jackknife,
    })
}

/// Leave-one-block-out moment sequences.
pub fn jackknife_moments<S: PointSource + ?Sized>(
    model: &ChainModel,
    sample: &S,
    observable: &Observable,
    max_n: usize,
    blocks: usize,
) -> Result<Vec<MomentSequence>> {
    Ok(estimate_moments(model, sample, observable, max_n, blocks)?.jackknife_sequences())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessEstimate {
    /// `D_n = (c_n / (2n)!)^(1/n)` for `n = 1..`.
    pub d_values: Vec<f64>,
    pub sup_estimate: f64,
}

pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn uniqueness_bound(m: &MomentSequence) -> UniquenessEstimate {
    let d_values: Vec<f64> = (1..m.c.len())
        .map(|n| {
            if m.c[n] == 0.0 {
                0.0
            } else {
                ((m.c[n].ln() - ln_factorial(2 * n)) / n as f64).exp()
            }
        })
        .collect();
    let sup_estimate = d_values.iter().copied().fold(0.0, f64::max);
    UniquenessEstimate {
        d_values,
        sup_estimate,
    }
}
