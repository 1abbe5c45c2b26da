//! Deterministic reductions and small statistics helpers.

use rayon::prelude::*;

use crate::lie::jet::Compensated;

/// Gauss-Legendre rule with 8 nodes on `[-1, 1]`.
pub const GL_NODES: [f64; 8] = [
    -0.9602898564975362,
    -0.7966664774136267,
    -0.525532409916329,
    -0.18343464249564978,
    0.18343464249564978,
    0.525532409916329,
    0.7966664774136267,
    0.9602898564975362,
];
pub const GL_WEIGHTS: [f64; 8] = [
    0.10122853629037669,
    0.22238103445337434,
    0.31370664587788705,
    0.36268378337836177,
    0.36268378337836177,
    0.31370664587788705,
    0.22238103445337434,
    0.10122853629037669,
];

/// Composite 8-point Gauss-Legendre rule over `panels` equal panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = Compensated::default();
    for i in 0..panels {
        let mid = a + (i as f64 + 0.5) * h;
        for (z, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            acc.add(w * f(mid + 0.5 * h * z));
        }
    }
    0.5 * h * acc.value()
}

/// Block length of the fixed reduction tree; results do not depend on the
/// number of worker threads.
pub const REDUCE_BLOCK: usize = 512;

/// Sums `f(i)` over `0..n` componentwise with compensated block sums.
pub fn block_reduce<const K: usize, F>(n: usize, f: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync,
{
    let blocks: Vec<[f64; K]> = (0..n.div_ceil(REDUCE_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = [Compensated::default(); K];
            for i in b * REDUCE_BLOCK..((b + 1) * REDUCE_BLOCK).min(n) {
                let v = f(i);
                for k in 0..K {
                    acc[k].add(v[k]);
                }
            }
            acc.map(|c| c.value())
        })
        .collect();
    let mut acc = [Compensated::default(); K];
    for b in &blocks {
        for k in 0..K {
            acc[k].add(b[k]);
        }
    }
    acc.map(|c| c.value())
}

/// Power sums of a shifted scalar.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments2 {
    pub n: f64,
    pub s1: f64,
    pub s2: f64,
}

impl Moments2 {
    pub fn mean(&self) -> f64 {
        self.s1 / self.n
    }

    /// Biased (1/n) variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.s2 / self.n - m * m).max(0.0)
    }

    pub fn minus(&self, o: &Self) -> Self {
        Self {
            n: self.n - o.n,
            s1: self.s1 - o.s1,
            s2: self.s2 - o.s2,
        }
    }
}

/// Jackknife standard error from leave-one-out replicas.
pub fn jackknife_stderr(replicas: &[f64]) -> f64 {
    let b = replicas.len() as f64;
    if replicas.len() < 2 {
        return f64::NAN;
    }
    let mean = replicas.iter().sum::<f64>() / b;
    let ss: f64 = replicas.iter().map(|r| (r - mean).powi(2)).sum();
    ((b - 1.0) / b * ss).sqrt()
}

/// Ordinary least squares `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Two-sided one-sample Kolmogorov–Smirnov test; returns `(D, p-value)`
/// using the asymptotic Kolmogorov distribution with Stephens' correction.
pub fn ks_test<F: Fn(f64) -> f64>(data: &mut [f64], cdf: F) -> (f64, f64) {
    data.sort_by(f64::total_cmp);
    let n = data.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in data.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let en = n.sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let mut p = 0.0;
    for j in 1..200 {
        let term = 2.0 * if j % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_is_exact_on_integers() {
        let s = block_reduce(10_000, |i| [i as f64, 1.0]);
        assert_eq!(s, [49_995_000.0, 10_000.0]);
    }

    #[test]
    fn ks_uniform_grid_passes() {
        let mut v: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let (d, p) = ks_test(&mut v, |x| x);
        assert!(d < 1e-3 && p > 0.99);
        let mut w: Vec<f64> = (0..1000).map(|i| (i as f64 / 1000.0).powi(2)).collect();
        assert!(ks_test(&mut w, |x| x).1 < 1e-6);
    }
}
