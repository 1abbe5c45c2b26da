//! Independent draws from the Gibbs measure `exp(-H/T)`.
//!
//! With one end free the bond variables and momenta factorize, so a phase
//! point is `N` Gaussian momenta plus `N` independent bonds drawn from the
//! one-dimensional density `exp(-V(b)/T)`, which is sampled by a tabulated
//! inverse CDF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpu_model::{self, ChainModel, FpuParams, PhasePoint, ProjectionCoeffs};
use crate::stats::{block_reduce, Moments2, GL_NODES, GL_WEIGHTS};

pub const GENERATOR_ID: &str = "chacha20-stream-v1";

const CELLS: usize = 8192;
/// `ln(1e300)`: the support stops where the density drops below 1e-300 of its peak.
const LOG_CUTOFF: f64 = 690.7755278982137;

/// Inverse-CDF sampler for one bond, working in the scaled variable `x = b / sqrt(T)`.
#[derive(Clone, Debug)]
pub struct BondSampler {
    pub temperature: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Scaled cubic and quartic coefficients: `U(x) = x^2/2 + a x^3/3 + c x^4/4`.
    a: f64,
    c: f64,
    u_min: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    h: f64,
    /// Mass strictly left of node `i` (length `CELLS + 1`), unnormalized.
    lower: Vec<f64>,
    /// Mass strictly right of node `i`, unnormalized.
    upper: Vec<f64>,
    total: f64,
    /// Bound on the probability mass cut off beyond the tabulated support.
    pub tail_mass_bound: f64,
}

impl BondSampler {
    pub fn new(params: &FpuParams) -> Result<Self> {
        params.validate()?;
        let t = params.temperature;
        let a = params.alpha * t.sqrt();
        let c = params.beta * t;
        let u = |x: f64| x * x * (0.5 + x * (a / 3.0 + x * c / 4.0));
        let du = |x: f64| x * (1.0 + x * (a + x * c));

        // Stationary points besides 0 solve 1 + a x + c x^2 = 0.
        let mut u_min = 0.0f64;
        if c > 0.0 {
            let disc = a * a - 4.0 * c;
            if disc >= 0.0 {
                for s in [-1.0, 1.0] {
                    let x = (-a + s * disc.sqrt()) / (2.0 * c);
                    u_min = u_min.min(u(x));
                }
            }
        }
        let excess = |x: f64| u(x) - u_min;
        let edge = |dir: f64| -> f64 {
            let mut hi = dir;
            while excess(hi) < LOG_CUTOFF {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if excess(mid) < LOG_CUTOFF {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        let x_lo = edge(-1.0);
        let x_hi = edge(1.0);
        let h = (x_hi - x_lo) / CELLS as f64;
        let density = |x: f64| (-excess(x)).exp();
        let cell_mass = |x0: f64, x1: f64| -> f64 {
            let (mid, half) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
            GL_NODES
                .iter()
                .zip(GL_WEIGHTS)
                .map(|(&z, w)| w * density(mid + half * z))
                .sum::<f64>()
                * half
        };
        let masses: Vec<f64> = (0..CELLS)
            .map(|i| cell_mass(x_lo + i as f64 * h, x_lo + (i + 1) as f64 * h))
            .collect();
        let mut lower = vec![0.0; CELLS + 1];
        for i in 0..CELLS {
            lower[i + 1] = lower[i] + masses[i];
        }
        let mut upper = vec![0.0; CELLS + 1];
        for i in (0..CELLS).rev() {
            upper[i] = upper[i + 1] + masses[i];
        }
        let total = lower[CELLS];
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidParams("bond density is not normalizable".into()));
        }
        let tail = density(x_lo) / du(x_lo).abs() + density(x_hi) / du(x_hi).abs();
        Ok(Self {
            temperature: t,
            alpha: params.alpha,
            beta: params.beta,
            a,
            c,
            u_min,
            x_lo,
            x_hi,
            h,
            lower,
            upper,
            total,
            tail_mass_bound: tail / total,
        })
    }

    #[inline]
    fn density(&self, x: f64) -> f64 {
        let u = x * x * (0.5 + x * (self.a / 3.0 + x * self.c / 4.0));
        (-(u - self.u_min)).exp()
    }

    fn partial_mass(&self, x0: f64, x1: f64) -> f64 {
        let (mid, half) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(&z, w)| w * self.density(mid + half * z))
            .sum::<f64>()
            * half
    }

    /// Normalized CDF of the scaled bond variable.
    pub fn cdf_scaled(&self, x: f64) -> f64 {
        if x <= self.x_lo {
            return 0.0;
        }
        if x >= self.x_hi {
            return 1.0;
        }
        let i = (((x - self.x_lo) / self.h) as usize).min(CELLS - 1);
        let x0 = self.x_lo + i as f64 * self.h;
        (self.lower[i] + self.partial_mass(x0, x)) / self.total
    }

    /// CDF of the bond variable `b`.
    pub fn cdf(&self, b: f64) -> f64 {
        self.cdf_scaled(b / self.temperature.sqrt())
    }

    /// Mean and variance of `b` by quadrature over the tabulated support.
    pub fn quadrature_moments(&self) -> (f64, f64) {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for i in 0..CELLS {
            let x0 = self.x_lo + i as f64 * self.h;
            let mid = x0 + 0.5 * self.h;
            for (&z, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let x = mid + 0.5 * self.h * z;
                let d = w * self.density(x) * 0.5 * self.h;
                m1 += d * x;
                m2 += d * x * x;
            }
        }
        let st = self.temperature.sqrt();
        let mean = m1 / self.total;
        (mean * st, (m2 / self.total - mean * mean) * self.temperature)
    }

    /// Maps a uniform variate in `[0, 1)` to a bond value.
    pub fn quantile(&self, u: f64) -> f64 {
        let x = if u < 0.5 {
            self.invert_lower(u * self.total)
        } else {
            self.invert_upper((1.0 - u) * self.total)
        };
        x * self.temperature.sqrt()
    }

    fn invert_lower(&self, target: f64) -> f64 {
        let i = self.lower.partition_point(|&v| v <= target).clamp(1, CELLS) - 1;
        self.solve_in_cell(i, target - self.lower[i])
    }

    fn invert_upper(&self, target: f64) -> f64 {
        // upper is decreasing; find the cell whose right-tail range contains target
        let j = self.upper.partition_point(|&v| v > target).clamp(1, CELLS) - 1;
        let cell_mass = self.upper[j] - self.upper[j + 1];
        let inside = (self.upper[j] - target).clamp(0.0, cell_mass);
        self.solve_in_cell(j, inside)
    }

    /// Solves `mass(x_i, x) = m` for `x` in cell `i`.
    fn solve_in_cell(&self, i: usize, m: f64) -> f64 {
        let x0 = self.x_lo + i as f64 * self.h;
        let x1 = x0 + self.h;
        let cell = self.partial_mass(x0, x1);
        let m = m.clamp(0.0, cell);
        let (d0, d1) = (self.density(x0), self.density(x1));
        // Cubic Hermite model of the in-cell CDF for the starting guess.
        let model = |s: f64| {
            let s2 = s * s;
            let s3 = s2 * s;
            (-2.0 * s3 + 3.0 * s2) * cell + (s3 - 2.0 * s2 + s) * self.h * d0 + (s3 - s2) * self.h * d1
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if model(mid) < m {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = x0 + 0.5 * (lo + hi) * self.h;
        for _ in 0..3 {
            let f = self.partial_mass(x0, x) - m;
            let d = self.density(x);
            if d <= 0.0 {
                break;
            }
            let step = f / d;
            x = (x - step).clamp(x0, x1);
            if step.abs() <= 1e-15 * self.h {
                break;
            }
        }
        x
    }
}

/// Anything that can hand out phase points by index.
pub trait PointSource: Sync {
    fn len(&self) -> usize;
    fn point(&self, i: usize) -> PhasePoint;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Deterministic virtual sample: point `i` depends only on `(seed, i)`.
#[derive(Clone, Debug)]
pub struct GibbsStream {
    pub params: FpuParams,
    pub sampler: BondSampler,
    pub seed: u64,
    pub n_samples: usize,
    pub offset: usize,
}

impl GibbsStream {
    pub fn new(params: FpuParams, seed: u64, n_samples: usize) -> Result<Self> {
        Ok(Self {
            params,
            sampler: BondSampler::new(&params)?,
            seed,
            n_samples,
            offset: 0,
        })
    }

    /// The stream restricted to indices `offset..offset + n`.
    pub fn window(&self, offset: usize, n: usize) -> Self {
        Self {
            offset: self.offset + offset,
            n_samples: n,
            ..self.clone()
        }
    }

    pub fn materialize(&self) -> SampleSet {
        let points: Vec<PhasePoint> = (0..self.n_samples)
            .into_par_iter()
            .map(|i| self.point(i))
            .collect();
        SampleSet {
            points,
            seed: self.seed,
            params: self.params,
            generator_id: GENERATOR_ID.to_string(),
        }
    }
}

impl PointSource for GibbsStream {
    fn len(&self) -> usize {
        self.n_samples
    }

    fn point(&self, i: usize) -> PhasePoint {
        sample_state(&self.params, &self.sampler, self.seed, (self.offset + i) as u64)
    }
}

/// Draws phase point number `index` of the stream seeded with `seed`.
pub fn sample_state(params: &FpuParams, sampler: &BondSampler, seed: u64, index: u64) -> PhasePoint {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = params.n_particles;
    let st = params.temperature.sqrt();
    let p: Vec<f64> = (0..n)
        .map(|_| st * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let bonds: Vec<f64> = (0..n).map(|_| sampler.quantile(rng.gen::<f64>())).collect();
    PhasePoint::from_bonds(bonds, p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub points: Vec<PhasePoint>,
    pub seed: u64,
    pub params: FpuParams,
    pub generator_id: String,
}

impl PointSource for SampleSet {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn point(&self, i: usize) -> PhasePoint {
        self.points[i].clone()
    }
}

pub fn generate(params: FpuParams, seed: u64, n_samples: usize) -> Result<SampleSet> {
    Ok(GibbsStream::new(params, seed, n_samples)?.materialize())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProjectionDiagnostics {
    pub coeffs: ProjectionCoeffs,
    pub var_h: f64,
    pub mean_h: f64,
}

/// Least-squares coefficients of `E` and `K` on `H` (two passes: means, then covariances).
pub fn estimate_projection<S: PointSource + ?Sized>(
    model: &ChainModel,
    sample: &S,
) -> Result<ProjectionCoeffs> {
    let n = sample.len();
    if n <= 100 {
        return Err(Error::Insufficient(format!(
            "projection needs more than 100 points, got {n}"
        )));
    }
    let eval = |i: usize| {
        let x = sample.point(i);
        [
            fpu_model::observable_e(model, &x),
            fpu_model::observable_k(model, &x),
            fpu_model::hamiltonian(model, &x),
        ]
    };
    let means = block_reduce(n, |i| {
        let v = eval(i);
        [v[0], v[1], v[2], 0.0, 0.0, 0.0]
    });
    let nf = n as f64;
    let (me, mk, mh) = (means[0] / nf, means[1] / nf, means[2] / nf);
    let second = block_reduce(n, |i| {
        let v = eval(i);
        let (de, dk, dh) = (v[0] - me, v[1] - mk, v[2] - mh);
        [de * dh, dk * dh, dh * dh, 0.0, 0.0, 0.0]
    });
    let var_h = second[2] / nf;
    let scale = mh.abs().max(1e-300);
    if !(var_h > 1e-28 * scale * scale) {
        return Err(Error::DegenerateSample(
            "energy has zero variance over the sample".into(),
        ));
    }
    Ok(ProjectionCoeffs {
        lambda_e: second[0] / second[2],
        lambda_k: second[1] / second[2],
        sample_size: n,
    })
}

/// Sample mean and standard error of a scalar functional.
pub fn mean_with_stderr<S, F>(sample: &S, f: F) -> (f64, f64)
where
    S: PointSource + ?Sized,
    F: Fn(&PhasePoint) -> f64 + Sync,
{
    let n = sample.len();
    let mut acc = Moments2::default();
    let shift = f(&sample.point(0));
    let sums = block_reduce(n, |i| {
        let v = f(&sample.point(i)) - shift;
        [v, v * v, 0.0, 0.0, 0.0, 0.0]
    });
    acc.n = n as f64;
    acc.s1 = sums[0];
    acc.s2 = sums[1];
    let (mean, var) = (acc.mean(), acc.variance());
    (mean + shift, (var / (n as f64 - 1.0).max(1.0)).sqrt())
}
