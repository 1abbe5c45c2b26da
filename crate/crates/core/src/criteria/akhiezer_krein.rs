//! Bounded-density test through the sequence `t_k(L)`.
//!
//! `t_k(L) = det(M_k) / ((k+1)! L^{k+1})` where `M_k` is the
//! `(k+1) x (k+1)` lower-Hessenberg matrix with entries
//! `M[i][j] = (i-j+1) c'_{i-j}` for `j <= i`, `M[i][i+1] = -(i+1) L`,
//! and `c'_{2n} = c_n`, `c'_{2n+1} = 0`. A bounded density exists iff
//! `[t_{i+j}]` is non-negative definite for some `L > 0`.

use dashu::rational::RBig;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentSequence;
use crate::precision::{det_rational, factorial, rational, rational_int, rational_to_f64, sign_of};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsdStatus {
    /// All leading minors positive: positive definite at this size.
    Holds,
    /// A leading minor is negative: not non-negative definite.
    Fails,
    /// A leading minor vanishes exactly; definiteness is not decided by minors.
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AkhiezerKreinReport {
    pub l: f64,
    pub t_values: Vec<f64>,
    /// Smallest eigenvalue of `[t_{i+j}]_{i,j<s}` for `s = 1..`.
    pub min_eigenvalue_by_order: Vec<f64>,
    /// Exact status of the leading minor of size `s = 1..`.
    pub minor_status: Vec<PsdStatus>,
    /// First matrix size at which non-negative definiteness fails.
    pub failing_size: Option<usize>,
    pub verdict: String,
}

fn symmetric_moments(c: &[f64], len: usize) -> Vec<RBig> {
    (0..len)
        .map(|i| if i % 2 == 0 { rational(c[i / 2]) } else { RBig::ZERO })
        .collect()
}

/// Exact `t_0(L)..t_{k_max}(L)`.
pub fn t_sequence_exact(m: &MomentSequence, l: f64, k_max: usize) -> Result<Vec<RBig>> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParams(format!("L must be positive, got {l}")));
    }
    let needed = k_max / 2 + 1;
    if m.c.len() < needed {
        return Err(Error::Insufficient(format!(
            "t_{k_max} needs c_0..c_{}, have {} moments",
            needed - 1,
            m.c.len()
        )));
    }
    let cp = symmetric_moments(&m.c, k_max + 1);
    let lr = rational(l);
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let size = k + 1;
        let mut mat = vec![vec![RBig::ZERO; size]; size];
        for i in 0..size {
            for j in 0..=i {
                mat[i][j] = rational_int((i - j + 1) as i64) * &cp[i - j];
            }
            if i + 1 < size {
                mat[i][i + 1] = -(rational_int((i + 1) as i64) * &lr);
            }
        }
        let det = det_rational(mat);
        let mut scale = RBig::from(dashu::integer::IBig::from(factorial(size as u64)));
        for _ in 0..size {
            scale *= &lr;
        }
        out.push(det / scale);
    }
    Ok(out)
}

pub fn akhiezer_krein(m: &MomentSequence, l: f64, k_max: usize) -> Result<AkhiezerKreinReport> {
    m.validate()?;
    let t = t_sequence_exact(m, l, k_max)?;
    let sizes = k_max / 2 + 1;
    let mut minor_status = Vec::with_capacity(sizes);
    let mut min_eigenvalue_by_order = Vec::with_capacity(sizes);
    let tf: Vec<f64> = t.iter().map(rational_to_f64).collect();
    let mut decided = None;
    for s in 1..=sizes {
        let mat: Vec<Vec<RBig>> = (0..s)
            .map(|i| (0..s).map(|j| t[i + j].clone()).collect())
            .collect();
        let status = match sign_of(&det_rational(mat)) {
            std::cmp::Ordering::Greater => PsdStatus::Holds,
            std::cmp::Ordering::Less => PsdStatus::Fails,
            std::cmp::Ordering::Equal => PsdStatus::Indeterminate,
        };
        if decided.is_none() && status != PsdStatus::Holds {
            decided = Some((s, status));
        }
        minor_status.push(status);
        let fm = DMatrix::from_fn(s, s, |i, j| tf[i + j]);
        let ev = SymmetricEigen::new(fm).eigenvalues;
        min_eigenvalue_by_order.push(ev.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let (failing_size, verdict) = match decided {
        None => (None, format!("non-negative definite through size {sizes}")),
        Some((s, PsdStatus::Fails)) => (Some(s), format!("fails at size {s}")),
        Some((s, _)) => (None, format!("indeterminate at size {s}")),
    };
    Ok(AkhiezerKreinReport {
        l,
        t_values: tf,
        min_eigenvalue_by_order,
        minor_status,
        failing_size,
        verdict,
    })
}

/// Default scan `L = 2^j c_1 / c_0`, `j = -6..=6`.
pub fn default_l_grid(m: &MomentSequence) -> Vec<f64> {
    let base = if m.c.len() > 1 && m.c[0] > 0.0 && m.c[1] > 0.0 {
        m.c[1] / m.c[0]
    } else {
        1.0
    };
    (-6..=6).map(|j| base * 2f64.powi(j)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AkhiezerKreinScan {
    pub k_max: usize,
    pub reports: Vec<AkhiezerKreinReport>,
    /// Some `L` keeps `[t_{i+j}]` non-negative definite through `k_max`.
    pub holds_for_some_l: bool,
    pub verdict: String,
}

pub fn akhiezer_krein_scan(m: &MomentSequence, grid: &[f64], k_max: usize) -> Result<AkhiezerKreinScan> {
    let reports = grid
        .iter()
        .map(|&l| akhiezer_krein(m, l, k_max))
        .collect::<Result<Vec<_>>>()?;
    let holds = reports.iter().any(|r| r.minor_status.iter().all(|s| *s == PsdStatus::Holds));
    let all_fail = reports.iter().all(|r| r.failing_size.is_some());
    let verdict = if holds {
        format!("bounded-density indication at order {k_max}")
    } else if all_fail {
        format!("no bounded density indicated at order {k_max}")
    } else {
        format!("inconclusive at order {k_max}")
    };
    Ok(AkhiezerKreinScan {
        k_max,
        reports,
        holds_for_some_l: holds,
        verdict,
    })
}
