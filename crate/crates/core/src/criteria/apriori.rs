//! Positivity of `P_n^l` and `Q_n^l` on `y >= 0`, a necessary condition
//! satisfied by moments of any positive spectral measure.
//!
//! With `a_k^l = c_{k+l} / (2k)!`:
//! `P_n^l(y) = 2 a_0^l + sum_{k=1}^{2n} (-1)^k a_k^l y^k` and
//! `Q_n^l(y) = sum_{k=0}^{2n} (-1)^k a_{k+1}^l y^k`.
//! Minima are located by exact Sturm isolation of the derivative's roots.

use std::cmp::Ordering;

use dashu::base::Abs;
use dashu::integer::IBig;
use dashu::rational::RBig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentSequence;
use crate::precision::{factorial, rational, rational_int, rational_to_f64, sign_of};

/// Stationary points are bracketed to this relative width.
const ISOLATION_BITS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyMinimum {
    pub min: f64,
    pub argmin: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriEntry {
    pub n: usize,
    pub l: usize,
    pub p: PolyMinimum,
    pub q: PolyMinimum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub entries: Vec<AprioriEntry>,
    pub all_pass: bool,
    pub verdict: String,
}

type Poly = Vec<RBig>;

fn trim(p: &mut Poly) {
    while p.last().is_some_and(|c| *c == RBig::ZERO) {
        p.pop();
    }
}

fn eval(p: &[RBig], x: &RBig) -> RBig {
    p.iter().rev().fold(RBig::ZERO, |acc, c| acc * x + c)
}

fn derivative(p: &[RBig]) -> Poly {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| rational_int(k as i64) * c)
        .collect()
}

fn remainder(a: &[RBig], b: &[RBig]) -> Poly {
    let mut r: Poly = a.to_vec();
    trim(&mut r);
    let db = b.len() - 1;
    let lead = b[db].clone();
    while r.len() > db && !r.is_empty() {
        let shift = r.len() - 1 - db;
        let q = r.last().unwrap().clone() / &lead;
        for (i, c) in b.iter().enumerate() {
            r[shift + i] -= &q * c;
        }
        r.pop();
        trim(&mut r);
    }
    r
}

fn sturm_chain(p: &[RBig]) -> Vec<Poly> {
    let mut chain = vec![p.to_vec(), derivative(p)];
    trim(chain.last_mut().unwrap());
    while chain.last().is_some_and(|q| q.len() > 1) {
        let n = chain.len();
        let r: Poly = remainder(&chain[n - 2], &chain[n - 1]).into_iter().map(|c| -c).collect();
        if r.is_empty() {
            break;
        }
        chain.push(r);
    }
    chain
}

fn sign_changes(chain: &[Poly], x: &RBig) -> usize {
    let signs: Vec<Ordering> = chain
        .iter()
        .map(|p| sign_of(&eval(p, x)))
        .filter(|s| *s != Ordering::Equal)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Brackets `[lo, hi]` around every root of `d` in `(0, bound]`.
fn isolate_roots(d: &[RBig], bound: &RBig) -> Vec<(RBig, RBig)> {
    let chain = sturm_chain(d);
    let width_stop = bound.clone() / RBig::from(IBig::ONE << ISOLATION_BITS);
    let mut out = Vec::new();
    let mut stack = vec![(RBig::ZERO, bound.clone())];
    while let Some((lo, hi)) = stack.pop() {
        let count = sign_changes(&chain, &lo).saturating_sub(sign_changes(&chain, &hi));
        if count == 0 {
            continue;
        }
        if &hi - &lo <= width_stop {
            out.push((lo, hi));
            continue;
        }
        let mut mid = (&lo + &hi) / rational_int(2);
        if eval(d, &mid) == RBig::ZERO {
            out.push((mid.clone(), mid.clone()));
            // step off the exact root before splitting
            mid += (&hi - &lo) / rational_int(1 << 20);
        }
        stack.push((lo, mid.clone()));
        stack.push((mid, hi));
    }
    out
}

/// Certified-bracket global minimum of `p` on `y >= 0`; `-inf` if unbounded.
fn minimum(p: &[RBig]) -> (f64, f64) {
    let mut p = p.to_vec();
    trim(&mut p);
    if p.len() <= 1 {
        return (p.first().map_or(0.0, rational_to_f64), 0.0);
    }
    if sign_of(p.last().unwrap()) == Ordering::Less {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let mut d = derivative(&p);
    trim(&mut d);
    let lead = d.last().unwrap().clone();
    let cauchy = d[..d.len() - 1]
        .iter()
        .map(|c| (c.clone() / &lead).abs())
        .fold(RBig::ZERO, |a, b| if b > a { b } else { a })
        + rational_int(1);
    let mut best = (eval(&p, &RBig::ZERO), RBig::ZERO);
    for (lo, hi) in isolate_roots(&d, &cauchy) {
        for x in [lo.clone(), (&lo + &hi) / rational_int(2), hi] {
            let v = eval(&p, &x);
            if v < best.0 {
                best = (v, x);
            }
        }
    }
    (rational_to_f64(&best.0), rational_to_f64(&best.1))
}

fn fact_rational(n: usize) -> RBig {
    RBig::from(IBig::from(factorial(n as u64)))
}

/// `(coefficients, coefficient standard errors)` of `P_n^l`.
fn p_poly(m: &MomentSequence, n: usize, l: usize) -> (Poly, Vec<f64>) {
    let mut coef = Vec::with_capacity(2 * n + 1);
    let mut err = Vec::with_capacity(2 * n + 1);
    for k in 0..=2 * n {
        let a = rational(m.c[k + l]) / fact_rational(2 * k);
        let s = m.stderr[k + l] / rational_to_f64(&fact_rational(2 * k));
        let (c, e) = if k == 0 {
            (rational_int(2) * a, 2.0 * s)
        } else if k % 2 == 1 {
            (-a, s)
        } else {
            (a, s)
        };
        coef.push(c);
        err.push(e);
    }
    (coef, err)
}

fn q_poly(m: &MomentSequence, n: usize, l: usize) -> (Poly, Vec<f64>) {
    let mut coef = Vec::with_capacity(2 * n + 1);
    let mut err = Vec::with_capacity(2 * n + 1);
    for k in 0..=2 * n {
        let a = rational(m.c[k + 1 + l]) / fact_rational(2 * k + 2);
        coef.push(if k % 2 == 1 { -a } else { a });
        err.push(m.stderr[k + 1 + l] / rational_to_f64(&fact_rational(2 * k + 2)));
    }
    (coef, err)
}

/// Three standard errors propagated to the value at `y`, plus a relative
/// rounding floor on the sum of absolute terms.
fn tolerance(coef: &[RBig], err: &[f64], y: f64) -> f64 {
    if !y.is_finite() {
        return 0.0;
    }
    let mut var = 0.0;
    let mut abs = 0.0;
    let mut yk = 1.0;
    for (c, e) in coef.iter().zip(err) {
        var += (e * yk).powi(2);
        abs += (rational_to_f64(c) * yk).abs();
        yk *= y;
    }
    3.0 * var.sqrt() + 1e-12 * abs
}

fn check(coef: Poly, err: Vec<f64>) -> PolyMinimum {
    let (min, argmin) = minimum(&coef);
    let tol = tolerance(&coef, &err, argmin);
    PolyMinimum {
        min,
        argmin,
        tol,
        pass: min >= -tol,
    }
}

/// Coefficients of `P_n^l` (ascending powers of `y`) as `f64`.
pub fn p_coefficients(m: &MomentSequence, n: usize, l: usize) -> Vec<f64> {
    p_poly(m, n, l).0.iter().map(rational_to_f64).collect()
}

pub fn q_coefficients(m: &MomentSequence, n: usize, l: usize) -> Vec<f64> {
    q_poly(m, n, l).0.iter().map(rational_to_f64).collect()
}

pub fn apriori_polynomials(m: &MomentSequence, n_max: usize, l_max: usize) -> Result<AprioriReport> {
    m.validate()?;
    let needed = 2 * n_max + l_max + 2;
    if m.c.len() < needed {
        return Err(Error::Insufficient(format!(
            "P/Q up to n = {n_max}, l = {l_max} need c_0..c_{}, have {} moments",
            needed - 1,
            m.c.len()
        )));
    }
    let mut entries = Vec::new();
    for n in 0..=n_max {
        for l in 0..=l_max {
            let (pc, pe) = p_poly(m, n, l);
            let (qc, qe) = q_poly(m, n, l);
            entries.push(AprioriEntry {
                n,
                l,
                p: check(pc, pe),
                q: check(qc, qe),
            });
        }
    }
    let failures: Vec<String> = entries
        .iter()
        .flat_map(|e| {
            let mut v = Vec::new();
            if !e.p.pass {
                v.push(format!("P_{}^{}", e.n, e.l));
            }
            if !e.q.pass {
                v.push(format!("Q_{}^{}", e.n, e.l));
            }
            v
        })
        .collect();
    let all_pass = failures.is_empty();
    let verdict = if all_pass {
        format!("all non-negative for n <= {n_max}, l <= {l_max}")
    } else {
        format!("negative: {}", failures.join(", "))
    };
    Ok(AprioriReport {
        entries,
        all_pass,
        verdict,
    })
}
