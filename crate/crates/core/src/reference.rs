//! Comparison function `g(t) = sech(b t)`: Euler-number moments,
//! calibration of `b`, and its exact spectral density
//! `(1/b) sech(pi omega / (2b))` on `omega >= 0`.

use std::f64::consts::PI;

use dashu::base::UnsignedAbs;
use dashu::integer::IBig;
use dashu::rational::RBig;
use serde::{Deserialize, Serialize};

use crate::criteria::hausdorff::{hausdorff_from_lambda0, HausdorffReport};
use crate::error::{Error, Result};
use crate::moments::MomentSequence;
use crate::precision::{binomial, rational, rational_to_f64, Interval};
use crate::stats::gauss_legendre;
use crate::stieltjes::{correlation_reconstruction, SpectralApproximant};

/// Largest `n` with `E_{2n}` cached.
pub const EULER_MAX_N: usize = 20;

/// `E_0, E_2, ..., E_{2 n_max}` from `sum_j binom(2n, 2j) E_{2j} = 0`.
pub fn euler_numbers(n_max: usize) -> Vec<IBig> {
    let mut e: Vec<IBig> = vec![IBig::ONE];
    for n in 1..=n_max {
        let s: IBig = (0..n)
            .map(|j| binomial(2 * n as u64, 2 * j as u64) * &e[j])
            .sum();
        e.push(-s);
    }
    e
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SechMoments {
    pub b: f64,
    /// `c_n = |E_{2n}| b^{2n}`, correctly rounded.
    pub c: Vec<f64>,
    #[serde(skip)]
    pub euler: Vec<IBig>,
}

impl SechMoments {
    pub fn to_sequence(&self) -> MomentSequence {
        MomentSequence::exact(&format!("sech(b={})", self.b), self.c.clone())
    }
}

pub fn sech_moments(b: f64, n_max: usize) -> Result<SechMoments> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParams(format!("b must be positive, got {b}")));
    }
    if n_max > EULER_MAX_N {
        return Err(Error::InvalidParams(format!(
            "sech moments are tabulated to n = {EULER_MAX_N}, requested {n_max}"
        )));
    }
    let euler = euler_numbers(n_max);
    let b2 = rational(b) * rational(b);
    let mut pow = rational(1.0);
    let mut c = Vec::with_capacity(n_max + 1);
    for e in &euler {
        c.push(rational_to_f64(&(RBig::from(e.unsigned_abs()) * &pow)));
        pow *= &b2;
    }
    Ok(SechMoments { b, c, euler })
}

/// `b` whose order-1 pole matches that of `m`: `b = sqrt(c_1 / c_0)`.
pub fn calibrate_b(m: &MomentSequence) -> Result<f64> {
    if m.c.len() < 2 {
        return Err(Error::Insufficient("calibration needs c_0 and c_1".into()));
    }
    if m.c[0] <= 0.0 || m.c[1] <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "calibration needs c_0, c_1 > 0, got {} and {}",
            m.c[0], m.c[1]
        )));
    }
    Ok((m.c[1] / m.c[0]).sqrt())
}

/// `sum_{k<=n} (-1)^k c_k t^{2k} / (2k)!` for `n = 0..c.len()-1`.
pub fn series_partial_sums(c: &[f64], t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.len());
    let mut term_scale = 1.0; // t^{2k} / (2k)!
    let mut acc = 0.0;
    for (k, ck) in c.iter().enumerate() {
        if k > 0 {
            term_scale *= t * t / ((2 * k - 1) * 2 * k) as f64;
        }
        acc += if k % 2 == 0 { ck * term_scale } else { -ck * term_scale };
        out.push(acc);
    }
    out
}

/// Spectral density of `sech(b t)` on `omega >= 0`.
pub fn sech_density(b: f64, omega: f64) -> f64 {
    1.0 / (b * (PI * omega / (2.0 * b)).cosh())
}

const PANELS: usize = 4000;

/// `int_0^inf g(w(omega)) density(omega) d omega` with `omega = tan(theta)`.
fn integrate_in_w<F: Fn(f64, f64) -> f64>(b: f64, g: F) -> f64 {
    gauss_legendre(
        |theta| {
            let (s, c) = theta.sin_cos();
            if c <= 0.0 {
                return 0.0;
            }
            // w = sin^2, 1 - w = cos^2, d omega = d theta / cos^2
            let d = sech_density(b, s / c);
            if d == 0.0 {
                return 0.0;
            }
            g(s, c) * d / (c * c)
        },
        0.0,
        PI / 2.0,
        PANELS,
    )
}

/// `lambda^0_{p,m} = binom(p,m) int w^{m+1/2} (1-w)^{p-m} dPsi` on the exact
/// sech measure. The integrand is positive, so no cancellation occurs.
pub fn sech_lambda0(b: f64, p_max: usize) -> Vec<Vec<f64>> {
    (0..=p_max)
        .map(|p| {
            (0..=p)
                .map(|m| {
                    let bin = rational_to_f64(&binomial(p as u64, m as u64).into());
                    bin * integrate_in_w(b, |s, c| s.powi(2 * m as i32 + 1) * c.powi(2 * (p - m) as i32))
                })
                .collect()
        })
        .collect()
}

/// Relative accuracy assigned to the quadrature values.
pub const SECH_QUADRATURE_REL: f64 = 1e-12;

/// Hausdorff report for the exact sech measure.
pub fn sech_hausdorff(b: f64, p_max: usize, k_max: usize) -> HausdorffReport {
    let bits = 256;
    let l0 = sech_lambda0(b, p_max);
    let table: Vec<Vec<Interval>> = l0
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| Interval::with_radius(v, SECH_QUADRATURE_REL * v.abs(), bits))
                .collect()
        })
        .collect();
    let mu = (0..=p_max)
        .map(|k| integrate_in_w(b, |s, _| s.powi(2 * k as i32)))
        .collect();
    let mu_tilde = (0..=p_max)
        .map(|k| integrate_in_w(b, |s, _| s.powi(2 * k as i32 + 1)))
        .collect();
    HausdorffReport {
        mu,
        mu_tilde,
        p_max,
        levels: hausdorff_from_lambda0(table, k_max),
    }
}

/// Largest `|sech(b t) - C_approx(t)|` over `points` equally spaced `t` in `[0, t_max]`.
pub fn reconstruction_error(a: &SpectralApproximant, b: f64, t_max: f64, points: usize) -> f64 {
    (0..=points)
        .map(|i| {
            let t = t_max * i as f64 / points as f64;
            (correlation_reconstruction(a, t) - 1.0 / (b * t).cosh()).abs()
        })
        .fold(0.0, f64::max)
}
