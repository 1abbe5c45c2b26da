//! Exact sign certification of the Hankel determinants `det Δ_n`, `det Δ̃_n`.
//!
//! Moments arrive as `f64` values; each is a dyadic rational, so the
//! determinants are evaluated exactly and their signs are never in doubt.

use dashu::rational::RBig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentSequence;
use crate::precision::{det_rational, ln_abs_rational, rational, sign_of};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetSign {
    Positive,
    Zero,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetValue {
    pub sign: DetSign,
    /// `ln|det|`, `-inf` for an exact zero.
    pub ln_abs: f64,
}

impl DetValue {
    fn from_rational(r: &RBig) -> Self {
        let sign = match sign_of(r) {
            std::cmp::Ordering::Greater => DetSign::Positive,
            std::cmp::Ordering::Equal => DetSign::Zero,
            std::cmp::Ordering::Less => DetSign::Negative,
        };
        Self {
            sign,
            ln_abs: ln_abs_rational(r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HankelReport {
    pub det_delta: Vec<DetValue>,
    pub det_delta_tilde: Vec<DetValue>,
    /// Least `n` with a negative `Δ_n` or `Δ̃_n`.
    pub first_negative_order: Option<usize>,
    /// Least `n` with a vanishing `Δ_n` or `Δ̃_n`.
    pub first_zero_order: Option<usize>,
    /// Arithmetic used; `0` stands for exact rationals.
    pub precision_bits: usize,
}

impl HankelReport {
    /// Largest quadrature order whose determinants are all strictly positive:
    /// order `k` needs `Δ_j`, `Δ̃_j > 0` for `j < k`.
    pub fn max_positive_order(&self) -> usize {
        let k = self.det_delta.len().min(self.det_delta_tilde.len());
        (0..k)
            .find(|&j| {
                self.det_delta[j].sign != DetSign::Positive
                    || self.det_delta_tilde[j].sign != DetSign::Positive
            })
            .unwrap_or(k)
    }
}

fn hankel_det(c: &[RBig], n: usize, shift: usize) -> RBig {
    let m = (0..=n)
        .map(|i| (0..=n).map(|j| c[i + j + shift].clone()).collect())
        .collect();
    det_rational(m)
}

/// Determinants up to the largest `n` with `c_{2n+1}` available.
pub fn hankel_check(m: &MomentSequence) -> Result<HankelReport> {
    m.validate()?;
    if m.c.len() < 2 {
        return Err(Error::Insufficient("Hankel check needs c_0 and c_1".into()));
    }
    let n_max = (m.c.len() - 2) / 2;
    hankel_check_to(m, n_max)
}

pub fn hankel_check_to(m: &MomentSequence, n_max: usize) -> Result<HankelReport> {
    if m.c.len() < 2 * n_max + 2 {
        return Err(Error::Insufficient(format!(
            "order {n_max} needs c_0..c_{}, have {} moments",
            2 * n_max + 1,
            m.c.len()
        )));
    }
    let c: Vec<RBig> = m.c.iter().map(|&v| rational(v)).collect();
    let mut det_delta = Vec::new();
    let mut det_delta_tilde = Vec::new();
    let mut first_negative_order = None;
    let mut first_zero_order = None;
    for n in 0..=n_max {
        let d = DetValue::from_rational(&hankel_det(&c, n, 0));
        let dt = DetValue::from_rational(&hankel_det(&c, n, 1));
        for v in [d, dt] {
            if v.sign == DetSign::Negative && first_negative_order.is_none() {
                first_negative_order = Some(n);
            }
            if v.sign == DetSign::Zero && first_zero_order.is_none() {
                first_zero_order = Some(n);
            }
        }
        det_delta.push(d);
        det_delta_tilde.push(dt);
    }
    Ok(HankelReport {
        det_delta,
        det_delta_tilde,
        first_negative_order,
        first_zero_order,
        precision_bits: 0,
    })
}
