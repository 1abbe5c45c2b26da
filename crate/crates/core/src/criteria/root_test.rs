//! Root test on `r_n = c_n^(1/n)`: a bounded sequence means an entire
//! autocorrelation of exponential type.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::moments::{ln_factorial, MomentSequence};
use crate::stats::linear_fit;

/// Fitted `b` in `ln r_n = a + b ln n + c/n` below this counts as bounded.
pub const ROOT_GROWTH_EXPONENT: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootTestReport {
    /// `r_n` for `n = 1..`.
    pub r_n: Vec<f64>,
    /// `r_n` is non-increasing over the upper half of the available orders.
    pub tail_non_increasing: bool,
    /// Fitted `b` of `ln r_n = a + b ln n + c/n` (needs four orders).
    pub growth_exponent: Option<f64>,
    /// `D` of `c_n ~ K D^n (2n)!`.
    pub fitted_d: Option<f64>,
    pub threshold: Option<f64>,
    pub bounded: bool,
    pub verdict: String,
}

fn fit_growth(r: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = r
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| ((i + 1) as f64, v.ln()))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let a = DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => pts[i].0.ln(),
        _ => 1.0 / pts[i].0,
    });
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let sol = a.svd(true, true).solve(&y, 1e-14).ok()?;
    Some(sol[1])
}

fn fit_d(c: &[f64]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = (1..c.len())
        .filter(|&n| c[n] > 0.0)
        .map(|n| (n as f64, c[n].ln() - ln_factorial(2 * n)))
        .unzip();
    (xs.len() >= 2).then(|| linear_fit(&xs, &ys).1.exp())
}

pub fn root_test(m: &MomentSequence, threshold: Option<f64>) -> RootTestReport {
    let r_n: Vec<f64> = (1..m.c.len())
        .map(|n| if m.c[n] > 0.0 { m.c[n].powf(1.0 / n as f64) } else { 0.0 })
        .collect();
    let tail = &r_n[r_n.len() / 2..];
    let tail_non_increasing = tail.windows(2).all(|w| w[1] <= w[0]);
    let growth_exponent = fit_growth(&r_n);
    let fitted_d = fit_d(&m.c);
    let under = threshold.is_none_or(|t| r_n.last().is_none_or(|&r| r <= t));
    let trivially = r_n.iter().all(|&r| r == 0.0);
    let slow = growth_exponent.is_some_and(|b| b < ROOT_GROWTH_EXPONENT);
    let bounded = trivially || (under && (tail_non_increasing || slow));
    let k = m.max_n();
    let verdict = if trivially {
        "bounded (all higher moments vanish)".to_string()
    } else if bounded {
        format!("bounded indication at order {k}")
    } else {
        format!("unbounded indication at order {k}")
    };
    RootTestReport {
        r_n,
        tail_non_increasing,
        growth_exponent,
        fitted_d,
        threshold,
        bounded,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_is_bounded() {
        let (t, w) = (0.7, 1.3f64);
        let c: Vec<f64> = (0..12).map(|n| t * w.powi(2 * n - 2)).collect();
        let r = root_test(&MomentSequence::exact("q", c), None);
        for (i, v) in r.r_n.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!((v - (t * w.powf(2.0 * n - 2.0)).powf(1.0 / n)).abs() < 1e-12);
        }
        assert!(r.bounded);
        assert!(r.growth_exponent.unwrap().abs() < 1e-6);
    }

    #[test]
    fn sech_is_unbounded() {
        let c = vec![1.0, 1.0, 5.0, 61.0, 1385.0, 50521.0, 2702765.0, 199360981.0, 19391512145.0];
        let r = root_test(&MomentSequence::exact("sech", c), None);
        assert!(!r.bounded);
        assert!(r.growth_exponent.unwrap() > 1.5);
        let d = r.fitted_d.unwrap();
        assert!((d - 4.0 / std::f64::consts::PI.powi(2)).abs() < 0.05, "{d}");
    }

    #[test]
    fn conserved_is_trivially_bounded() {
        let r = root_test(&MomentSequence::exact("H", vec![2.0, 0.0, 0.0, 0.0]), None);
        assert!(r.bounded);
    }

    #[test]
    fn threshold_applies() {
        let c: Vec<f64> = (0..8).map(|n| 9f64.powi(n)).collect();
        assert!(root_test(&MomentSequence::exact("a", c.clone()), Some(10.0)).bounded);
        assert!(!root_test(&MomentSequence::exact("a", c), Some(5.0)).bounded);
    }
}
