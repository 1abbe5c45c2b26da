//! Hausdorff derivative criterion on `[0, 1]`.
//!
//! The spectral measure in `u = omega^2` is mapped to `w = u / (1 + u)`.
//! `mu_k` are the moments of that measure, `mu~_k` those of
//! `sqrt(w) dPsi(w)`, and `(p+1) |lambda^k_{p,m}|` stays bounded in `p`
//! iff `sqrt(w) Psi'(w)` has a bounded derivative of order `k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{binomial, rational_int, Interval};
use crate::stats::linear_fit;
use crate::stieltjes::SpectralApproximant;

/// Working precision for the alternating sums.
pub const HAUSDORFF_BITS: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HausdorffLevel {
    pub k: usize,
    /// `max_m (p+1) |lambda^k_{p,m}|` indexed by `p` (zero where the range of `m` is empty).
    pub sup_by_p: Vec<f64>,
    /// Largest value over `p <= p_max`.
    pub lambda_sup: f64,
    /// Slope of `ln sup` against `ln(p+1)` over the upper half of `p`.
    pub trend_slope: f64,
    /// An enclosure wider than its value was met at some `p`.
    pub indeterminate: bool,
    pub verdict: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HausdorffReport {
    pub mu: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub p_max: usize,
    pub levels: Vec<HausdorffLevel>,
}

/// Slopes below this read as bounded, above `GROWTH_SLOPE` as growing.
pub const BOUNDED_SLOPE: f64 = 0.15;
pub const GROWTH_SLOPE: f64 = 0.3;

fn w_interval(u: f64, bits: usize) -> Interval {
    let u = Interval::from_f64(u, bits);
    u.div(&u.add(&Interval::from_int(1, bits)))
}

fn check_atoms(a: &SpectralApproximant) -> Result<()> {
    if a.atoms.is_empty() {
        return Err(Error::InvalidParams("approximant has no atoms".into()));
    }
    for at in &a.atoms {
        assert!(at.u.is_finite() && at.u >= 0.0, "atom with u = {} maps outside [0, 1)", at.u);
    }
    Ok(())
}

/// Enclosures of `mu_0..mu_{k_max}` and `mu~_0..mu~_{k_max}` for an atomic measure.
pub fn hausdorff_moment_enclosures(
    a: &SpectralApproximant,
    k_max: usize,
    bits: usize,
) -> Result<(Vec<Interval>, Vec<Interval>)> {
    check_atoms(a)?;
    let zero = Interval::from_int(0, bits);
    let mut mu = vec![zero.clone(); k_max + 1];
    let mut mu_tilde = vec![zero; k_max + 1];
    for at in &a.atoms {
        let w = w_interval(at.u, bits);
        let rho = Interval::from_f64(at.rho, bits);
        let mut pw = rho.clone();
        let mut pt = rho.mul(&w.sqrt());
        for k in 0..=k_max {
            mu[k] = mu[k].add(&pw);
            mu_tilde[k] = mu_tilde[k].add(&pt);
            pw = pw.mul(&w);
            pt = pt.mul(&w);
        }
    }
    Ok((mu, mu_tilde))
}

/// `mu_k = sum rho_i w_i^k` and `mu~_k = sum rho_i w_i^(k+1/2)`.
pub fn hausdorff_moments(a: &SpectralApproximant, k_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mu, mt) = hausdorff_moment_enclosures(a, k_max, 128)?;
    Ok((
        mu.iter().map(Interval::mid_f64).collect(),
        mt.iter().map(Interval::mid_f64).collect(),
    ))
}

#[derive(Clone, Debug)]
pub struct SeriesValue {
    pub value: Interval,
    pub terms: usize,
    pub last_term: f64,
    pub converged: bool,
}

/// `mu~_k` from `mu_0..` through the binomial expansion of `w^(k+1/2)`
/// around `w = 1/2`. Summation stops once five consecutive terms fall
/// below `tol` relative to the partial sum.
pub fn mu_tilde_binomial_series(mu: &[Interval], k: usize, tol: f64) -> SeriesValue {
    let bits = mu.first().map_or(HAUSDORFF_BITS, Interval::bits);
    let one = Interval::from_int(1, bits);
    let two = Interval::from_int(2, bits);
    let half = one.div(&two);
    // 2^(-k-1/2)
    let mut base = one.div(&two.sqrt());
    for _ in 0..k {
        base = base.mul(&half);
    }
    let exponent = Interval::from_int(2 * k as i64 + 1, bits).mul(&half);
    let mut coef = one.clone(); // binom(k + 1/2, n)
    let mut sum = Interval::from_int(0, bits);
    let mut small = 0;
    let mut last_term = f64::INFINITY;
    for n in 0..mu.len() {
        if n > 0 {
            let num = exponent.sub(&Interval::from_int(n as i64 - 1, bits));
            coef = coef.mul(&num).div(&Interval::from_int(n as i64, bits));
        }
        // sum_l binom(n,l) (-1)^(n-l) 2^l mu_l = int (2w - 1)^n
        let mut inner = Interval::from_int(0, bits);
        let mut p2 = one.clone();
        for (l, m) in mu.iter().enumerate().take(n + 1) {
            let mut c = binomial(n as u64, l as u64);
            if (n - l) % 2 == 1 {
                c = -c;
            }
            inner = inner.add(&Interval::from_ibig(c, bits).mul(&p2).mul(m));
            p2 = p2.mul(&two);
        }
        let term = coef.mul(&inner).mul(&base);
        sum = sum.add(&term);
        last_term = term.abs_upper_f64();
        if last_term <= tol * sum.abs_lower_f64() {
            small += 1;
            if small >= 5 {
                return SeriesValue {
                    value: sum,
                    terms: n + 1,
                    last_term,
                    converged: true,
                };
            }
        } else {
            small = 0;
        }
    }
    SeriesValue {
        value: sum,
        terms: mu.len(),
        last_term,
        converged: false,
    }
}

/// `lambda^0_{p,m} = binom(p,m) sum_k (-1)^k binom(p-m,k) mu~_{m+k}`
/// for `0 <= m <= p <= p_max`.
pub fn lambda0_table(mu_tilde: &[Interval], p_max: usize) -> Result<Vec<Vec<Interval>>> {
    if mu_tilde.len() < p_max + 1 {
        return Err(Error::Insufficient(format!(
            "lambda up to p = {p_max} needs mu~_0..mu~_{p_max}, have {}",
            mu_tilde.len()
        )));
    }
    let bits = mu_tilde[0].bits();
    Ok((0..=p_max)
        .map(|p| {
            (0..=p)
                .map(|m| {
                    let mut s = Interval::from_int(0, bits);
                    for k in 0..=(p - m) {
                        let mut c = binomial((p - m) as u64, k as u64);
                        if k % 2 == 1 {
                            c = -c;
                        }
                        s = s.add(&Interval::from_ibig(c, bits).mul(&mu_tilde[m + k]));
                    }
                    Interval::from_ibig(binomial(p as u64, m as u64), bits).mul(&s)
                })
                .collect()
        })
        .collect())
}

/// `lambda^k_{p,m} = (p+1)(lambda^{k-1}_{p,m} - lambda^{k-1}_{p,m-1})`,
/// defined for `k <= m <= p-k`. Entries outside that range are `None`.
pub fn lambda_levels(lambda0: Vec<Vec<Interval>>, k_max: usize) -> Vec<Vec<Vec<Option<Interval>>>> {
    let mut levels: Vec<Vec<Vec<Option<Interval>>>> =
        vec![lambda0.into_iter().map(|row| row.into_iter().map(Some).collect()).collect()];
    for k in 1..=k_max {
        let prev = &levels[k - 1];
        let next: Vec<Vec<Option<Interval>>> = prev
            .iter()
            .enumerate()
            .map(|(p, row)| {
                let bits = row.iter().flatten().next().map_or(HAUSDORFF_BITS, Interval::bits);
                let factor = Interval::from_int(p as i64 + 1, bits);
                (0..=p)
                    .map(|m| {
                        if m < k || m + k > p {
                            return None;
                        }
                        match (&row[m], &row[m - 1]) {
                            (Some(a), Some(b)) => Some(factor.mul(&a.sub(b))),
                            _ => None,
                        }
                    })
                    .collect()
            })
            .collect();
        levels.push(next);
    }
    levels
}

fn level_report(k: usize, table: &[Vec<Option<Interval>>]) -> HausdorffLevel {
    let p_max = table.len() - 1;
    let mut sup_by_p = vec![0.0; p_max + 1];
    let mut indeterminate = false;
    for (p, row) in table.iter().enumerate() {
        let mut best: Option<&Interval> = None;
        for v in row.iter().flatten() {
            if best.is_none_or(|b| v.abs_upper_f64() > b.abs_upper_f64()) {
                best = Some(v);
            }
        }
        if let Some(b) = best {
            sup_by_p[p] = (p as f64 + 1.0) * b.mid_f64().abs();
            if b.width_f64() > b.abs_upper_f64() && b.abs_upper_f64() > 0.0 {
                indeterminate = true;
            }
        }
    }
    let lambda_sup = sup_by_p.iter().copied().fold(0.0, f64::max);
    let lo = (p_max / 2).max(2 * k + 1);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (lo..=p_max)
        .filter(|&p| sup_by_p[p] > 0.0)
        .map(|p| (((p + 1) as f64).ln(), sup_by_p[p].ln()))
        .unzip();
    let trend_slope = if xs.len() >= 2 { linear_fit(&xs, &ys).1 } else { 0.0 };
    let verdict = if indeterminate {
        format!("indeterminate at p <= {p_max}")
    } else if trend_slope < BOUNDED_SLOPE {
        format!("bounded indication at p <= {p_max}")
    } else if trend_slope > GROWTH_SLOPE {
        format!("growth indication at p <= {p_max}")
    } else {
        format!("inconclusive at p <= {p_max}")
    };
    HausdorffLevel {
        k,
        sup_by_p,
        lambda_sup,
        trend_slope,
        indeterminate,
        verdict,
    }
}

/// Sup tables, trends and verdicts for levels `0..k_max` from a `lambda^0` table.
pub fn hausdorff_from_lambda0(lambda0: Vec<Vec<Interval>>, k_max: usize) -> Vec<HausdorffLevel> {
    let levels = lambda_levels(lambda0, k_max.saturating_sub(1));
    levels.iter().enumerate().map(|(k, t)| level_report(k, t)).collect()
}

pub fn hausdorff_lambda(mu_tilde: &[Interval], p_max: usize, k_max: usize) -> Result<HausdorffReport> {
    let l0 = lambda0_table(mu_tilde, p_max)?;
    Ok(HausdorffReport {
        mu: Vec::new(),
        mu_tilde: mu_tilde.iter().map(Interval::mid_f64).collect(),
        p_max,
        levels: hausdorff_from_lambda0(l0, k_max),
    })
}

/// Full Hausdorff report for an atomic approximant.
pub fn hausdorff_for_approximant(a: &SpectralApproximant, p_max: usize, k_max: usize) -> Result<HausdorffReport> {
    let (mu, mt) = hausdorff_moment_enclosures(a, p_max, HAUSDORFF_BITS)?;
    let mut r = hausdorff_lambda(&mt, p_max, k_max)?;
    r.mu = mu.iter().map(Interval::mid_f64).collect();
    Ok(r)
}

/// `mu~_k = 1/(k+1)`: a uniform `psi_0` on `[0, 1]`.
pub fn uniform_mu_tilde(k_max: usize, bits: usize) -> Vec<Interval> {
    (0..=k_max)
        .map(|k| Interval::from_rational(&(rational_int(1) / rational_int(k as i64 + 1)), bits))
        .collect()
}
