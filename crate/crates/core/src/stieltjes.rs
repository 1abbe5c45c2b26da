//! Gaussian quadrature of the Stieltjes problem: from `c_0..c_{2n-1}` to the
//! `n` atoms `(omega_k, rho_k)` of the rational approximant
//! `F_{2n}(s) = s * sum_k rho_k / (s^2 + omega_k^2)`.
//!
//! Moments are rescaled to `c_m / (c_0 lambda^m)` with `lambda = c_1 / c_0`,
//! turned into recurrence coefficients by the Chebyshev algorithm at
//! multiple precision, and the nodes are the eigenvalues of the Jacobi
//! matrix (Sturm bisection, then Newton on the orthogonal polynomial).

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel::{hankel_check_to, DetSign};
use crate::moments::MomentSequence;
use crate::precision::{
    rational, real, real_abs, real_from_rational, real_int, real_is_negative, real_pow2, real_is_positive,
    real_sqrt, real_to_f64, Real, DEFAULT_PRECISION_BITS, MAX_PRECISION_BITS,
};
use crate::stats::jackknife_stderr;

/// Relative moment residual demanded at working precision.
pub const INTERNAL_RESIDUAL_TOL: f64 = 1e-20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub omega: f64,
    /// `omega^2`, kept separately to avoid a second rounding.
    pub u: f64,
    pub rho: f64,
    #[serde(default)]
    pub omega_stderr: Option<f64>,
    #[serde(default)]
    pub rho_stderr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralApproximant {
    /// Requested order.
    pub order: usize,
    /// Sorted by `omega` ascending. Fewer than `order` atoms means the
    /// moments describe a measure with that many points.
    pub atoms: Vec<Atom>,
    /// `|sum rho_k u_k^m - c_m| / c_m` from the rounded atoms, `m < 2 * atoms.len()`.
    pub moment_residuals: Vec<f64>,
    /// Same quantity from the working-precision atoms.
    pub internal_residual: f64,
    pub precision_bits: usize,
    /// Jacobi recurrence coefficients in the variable `u = omega^2`.
    pub recurrence_alpha: Vec<f64>,
    pub recurrence_beta: Vec<f64>,
    /// Stieltjes continued-fraction coefficients `zeta_1, zeta_2, ...` in `u`.
    pub stieltjes_zeta: Vec<f64>,
    pub c0: f64,
    pub observable: String,
}

impl SpectralApproximant {
    /// Approximant given directly by its atoms `(omega, rho)`.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Self {
        let mut atoms: Vec<Atom> = atoms
            .iter()
            .map(|&(omega, rho)| Atom {
                omega,
                u: omega * omega,
                rho,
                omega_stderr: None,
                rho_stderr: None,
            })
            .collect();
        atoms.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let c0 = atoms.iter().map(|a| a.rho).sum();
        Self {
            order: atoms.len(),
            atoms,
            moment_residuals: Vec::new(),
            internal_residual: 0.0,
            precision_bits: 0,
            recurrence_alpha: Vec::new(),
            recurrence_beta: Vec::new(),
            stieltjes_zeta: Vec::new(),
            c0,
            observable: String::new(),
        }
    }

    pub fn total_residue(&self) -> f64 {
        self.atoms.iter().map(|a| a.rho).sum()
    }

    /// Residues normalized to unit sum.
    pub fn normalized_residues(&self) -> Vec<f64> {
        let s = self.total_residue();
        self.atoms.iter().map(|a| a.rho / s).collect()
    }

    pub fn dominant_index(&self) -> usize {
        self.atoms
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.rho.total_cmp(&b.1.rho))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

struct Recurrence {
    alpha: Vec<Real>,
    beta: Vec<Real>,
}

/// Chebyshev algorithm: moments `m_0..m_{2n-1}` to `alpha_0..alpha_{n-1}`,
/// `beta_0..beta_{n-1}` (with `beta_0 = m_0`).
fn chebyshev(m: &[Real], n: usize, bits: usize) -> std::result::Result<Recurrence, usize> {
    let zero = real_int(0, bits);
    let len = 2 * n;
    let mut prev: Vec<Real> = vec![zero.clone(); len];
    let mut cur: Vec<Real> = m[..len].to_vec();
    let mut alpha = vec![&m[1] / &m[0]];
    let mut beta = vec![m[0].clone()];
    for k in 1..n {
        let mut next = vec![zero.clone(); len];
        for l in k..len - k {
            next[l] = &cur[l + 1] - &alpha[k - 1] * &cur[l] - &beta[k - 1] * &prev[l];
        }
        if !real_is_positive(&next[k]) {
            return Err(k);
        }
        alpha.push(&next[k + 1] / &next[k] - &cur[k] / &cur[k - 1]);
        beta.push(&next[k] / &cur[k - 1]);
        prev = cur;
        cur = next;
    }
    Ok(Recurrence { alpha, beta })
}

/// Number of Jacobi eigenvalues below `x`.
fn sturm_count(rec: &Recurrence, x: &Real, tiny: &Real) -> usize {
    let mut count = 0;
    let mut q = &rec.alpha[0] - x;
    for k in 0..rec.alpha.len() {
        if k > 0 {
            q = &rec.alpha[k] - x - &rec.beta[k] / &q;
        }
        if real_abs(&q) < *tiny {
            q = tiny.clone();
        }
        if real_is_negative(&q) {
            count += 1;
        }
    }
    count
}

/// `pi_n(x)` and `pi_n'(x)` for the monic orthogonal polynomials.
fn monic_eval(rec: &Recurrence, x: &Real, bits: usize) -> (Real, Real) {
    let mut p_prev = real_int(0, bits);
    let mut p = real_int(1, bits);
    let mut d_prev = real_int(0, bits);
    let mut d = real_int(0, bits);
    for k in 0..rec.alpha.len() {
        let shift = x - &rec.alpha[k];
        let b = if k == 0 { real_int(0, bits) } else { rec.beta[k].clone() };
        let p_next = &shift * &p - &b * &p_prev;
        let d_next = &p + &shift * &d - &b * &d_prev;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

fn jacobi_eigenvalues(rec: &Recurrence, bits: usize) -> Vec<Real> {
    let n = rec.alpha.len();
    let two = real_int(2, bits);
    // Gershgorin bounds.
    let mut lo = real_int(0, bits);
    let mut hi = real_int(0, bits);
    for k in 0..n {
        let mut r = real_int(0, bits);
        if k > 0 {
            r += real_sqrt(&rec.beta[k]);
        }
        if k + 1 < n {
            r += real_sqrt(&rec.beta[k + 1]);
        }
        let a = &rec.alpha[k] - &r;
        let b = &rec.alpha[k] + &r;
        if k == 0 || a < lo {
            lo = a;
        }
        if k == 0 || b > hi {
            hi = b;
        }
    }
    let span = &hi - &lo;
    let pad = &span / real_int(1 << 20, bits) + real(1e-300, bits);
    lo -= &pad;
    hi += &pad;
    let tiny = &(&span + real(1e-300, bits)) * &real_pow2(-(bits as isize) - 20, bits);
    let eps_rel = real_pow2(-(bits as isize) + 6, bits);
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        // Bracket eigenvalue j (0-based from below) to about 50 bits.
        let (mut a, mut b) = (lo.clone(), hi.clone());
        for _ in 0..200 {
            let mid = (&a + &b) / &two;
            let mid_abs = real_to_f64(&real_abs(&mid));
            if sturm_count(rec, &mid, &tiny) > j {
                b = mid;
            } else {
                a = mid;
            }
            let width = &b - &a;
            if real_to_f64(&width) <= 1e-15 * mid_abs.max(1e-300) {
                break;
            }
        }
        // Safeguarded Newton to full precision.
        let mut x = (&a + &b) / &two;
        for _ in 0..2 * bits.ilog2() as usize + 8 {
            let (p, d) = monic_eval(rec, &x, bits);
            if !real_is_positive(&real_abs(&d)) {
                break;
            }
            let step = &p / &d;
            let cand = &x - &step;
            let converged = real_abs(&step) <= &eps_rel * &real_abs(&x);
            // a converged step can round onto a bracket end; only reject strict exits
            x = if cand < a || cand > b { (&a + &b) / &two } else { cand };
            if converged {
                break;
            }
            let (pa, _) = monic_eval(rec, &a, bits);
            let (px, _) = monic_eval(rec, &x, bits);
            if real_is_negative(&pa) == real_is_negative(&px) {
                a = x.clone();
            } else {
                b = x.clone();
            }
        }
        out.push(x);
    }
    out
}

/// Christoffel numbers `1 / sum_k pi_k(x)^2 / (beta_0 ... beta_k)`.
fn christoffel(rec: &Recurrence, x: &Real, bits: usize) -> Real {
    let mut sum = real_int(0, bits);
    let mut norm = rec.beta[0].clone();
    let mut p_prev = real_int(0, bits);
    let mut p = real_int(1, bits);
    for k in 0..rec.alpha.len() {
        if k > 0 {
            norm = &norm * &rec.beta[k];
        }
        sum += &p * &p / &norm;
        let b = if k == 0 { real_int(0, bits) } else { rec.beta[k].clone() };
        let p_next = (x - &rec.alpha[k]) * &p - &b * &p_prev;
        p_prev = p;
        p = p_next;
    }
    real_int(1, bits) / sum
}

struct Attempt {
    nodes: Vec<Real>,
    weights: Vec<Real>,
    rec: Recurrence,
    residual: f64,
}

fn attempt(scaled: &[Real], n: usize, bits: usize) -> std::result::Result<Attempt, usize> {
    let rec = chebyshev(scaled, n, bits)?;
    let nodes = jacobi_eigenvalues(&rec, bits);
    let weights: Vec<Real> = nodes.iter().map(|x| christoffel(&rec, x, bits)).collect();
    let mut residual: f64 = 0.0;
    for (m, target) in scaled.iter().enumerate().take(2 * n) {
        let mut s = real_int(0, bits);
        for (x, w) in nodes.iter().zip(&weights) {
            let mut pw = w.clone();
            for _ in 0..m {
                pw = &pw * x;
            }
            s += pw;
        }
        let rel = real_to_f64(&real_abs(&(&s - target))) / real_to_f64(target);
        residual = residual.max(rel);
    }
    Ok(Attempt {
        nodes,
        weights,
        rec,
        residual,
    })
}

/// Precision from the `ACSM_PRECISION_BITS` environment variable, if set.
pub fn precision_from_env() -> Option<usize> {
    std::env::var("ACSM_PRECISION_BITS").ok()?.trim().parse().ok()
}

/// Order-`n` quadrature from `c_0..c_{2n-1}`.
pub fn quadrature_from_moments(
    m: &MomentSequence,
    order: usize,
    precision_bits: usize,
) -> Result<SpectralApproximant> {
    m.validate()?;
    if order == 0 {
        return Err(Error::InvalidParams("quadrature order must be at least 1".into()));
    }
    if m.c.len() < 2 * order {
        return Err(Error::Insufficient(format!(
            "order {order} needs c_0..c_{}, have {} moments",
            2 * order - 1,
            m.c.len()
        )));
    }
    if m.c[0] <= 0.0 || m.c[1] <= 0.0 {
        return Err(Error::Insufficient(
            "c_0 and c_1 must be positive: the observable has no oscillating part".into(),
        ));
    }
    // Exact gate on the determinants the order relies on.
    let padded = {
        let mut p = m.truncated(2 * order - 1);
        p.c.push(0.0);
        p.stderr.push(0.0);
        p.jackknife.clear();
        p
    };
    let gate = hankel_check_to(&padded, order - 1)?;
    let mut n = order;
    for j in 0..order {
        let d = gate.det_delta[j].sign;
        let dt = gate.det_delta_tilde[j].sign;
        if d == DetSign::Negative || dt == DetSign::Negative {
            return Err(Error::NegativeDeterminant {
                failing_order: j + 1,
                max_order: gate.max_positive_order(),
            });
        }
        if d == DetSign::Zero {
            n = j;
            break;
        }
        if dt == DetSign::Zero {
            return Err(Error::Insufficient(format!(
                "Δ̃_{j} vanishes: the measure has an atom at zero frequency"
            )));
        }
    }

    let mut bits = precision_bits.max(64);
    loop {
        let c_exact: Vec<_> = m.c[..2 * n].iter().map(|&v| rational(v)).collect();
        let c0 = real_from_rational(&c_exact[0], bits);
        let lambda = real_from_rational(&c_exact[1], bits) / &c0;
        let mut scaled = Vec::with_capacity(2 * n);
        let mut lam_pow = real_int(1, bits);
        for ce in &c_exact {
            scaled.push(real_from_rational(ce, bits) / (&c0 * &lam_pow));
            lam_pow = &lam_pow * &lambda;
        }
        match attempt(&scaled, n, bits) {
            Ok(at) if at.residual <= INTERNAL_RESIDUAL_TOL => {
                return Ok(assemble(m, order, at, &c0, &lambda, bits));
            }
            Ok(at) if bits >= MAX_PRECISION_BITS => {
                return Err(Error::Residual {
                    residual: at.residual,
                    precision_bits: bits,
                });
            }
            Err(_) if bits >= MAX_PRECISION_BITS => {
                return Err(Error::IndeterminateSign {
                    precision_bits: bits,
                });
            }
            _ => bits *= 2,
        }
    }
}

fn assemble(
    m: &MomentSequence,
    order: usize,
    at: Attempt,
    c0: &Real,
    lambda: &Real,
    bits: usize,
) -> SpectralApproximant {
    let lam = real_to_f64(lambda);
    let mut atoms: Vec<Atom> = at
        .nodes
        .iter()
        .zip(&at.weights)
        .map(|(x, w)| {
            let u = x * lambda;
            Atom {
                omega: real_to_f64(&real_sqrt(&u)),
                u: real_to_f64(&u),
                rho: real_to_f64(&(w * c0)),
                omega_stderr: None,
                rho_stderr: None,
            }
        })
        .collect();
    atoms.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    let moment_residuals = (0..2 * atoms.len())
        .map(|k| {
            let mut s = real_int(0, bits);
            for a in &atoms {
                let u = real(a.u, bits);
                let mut t = real(a.rho, bits);
                for _ in 0..k {
                    t = &t * &u;
                }
                s += t;
            }
            let target = real(m.c[k], bits);
            real_to_f64(&real_abs(&(&s - &target))) / m.c[k]
        })
        .collect();
    let recurrence_alpha: Vec<f64> = at.rec.alpha.iter().map(|a| real_to_f64(a) * lam).collect();
    let recurrence_beta: Vec<f64> = at
        .rec
        .beta
        .iter()
        .enumerate()
        .map(|(k, b)| {
            if k == 0 {
                real_to_f64(b) * real_to_f64(c0)
            } else {
                real_to_f64(b) * lam * lam
            }
        })
        .collect();
    // alpha_0 = z_1, alpha_k = z_{2k} + z_{2k+1}, beta_k = z_{2k-1} z_{2k}.
    let mut zeta: Vec<Real> = vec![at.rec.alpha[0].clone()];
    for k in 1..at.rec.alpha.len() {
        let z_even = &at.rec.beta[k] / &zeta[2 * k - 2];
        let z_odd = &at.rec.alpha[k] - &z_even;
        zeta.push(z_even);
        zeta.push(z_odd);
    }
    SpectralApproximant {
        order,
        atoms,
        moment_residuals,
        internal_residual: at.residual,
        precision_bits: bits,
        recurrence_alpha,
        recurrence_beta,
        stieltjes_zeta: zeta.iter().map(|z| real_to_f64(z) * lam).collect(),
        c0: real_to_f64(c0),
        observable: m.observable.clone(),
    }
}

/// Approximants of orders `1..=max_order`, stopping at the determinant gate.
///
/// Returns the approximants that could be built plus the gate error, if any.
pub fn approximant_ladder(
    m: &MomentSequence,
    max_order: usize,
    precision_bits: usize,
) -> (Vec<SpectralApproximant>, Option<Error>) {
    let mut out = Vec::new();
    for order in 1..=max_order {
        match quadrature_from_moments(m, order, precision_bits) {
            Ok(a) => {
                let exhausted = a.atoms.len() < order;
                out.push(a);
                if exhausted {
                    break;
                }
            }
            Err(e) => return (out, Some(e)),
        }
    }
    (out, None)
}

/// Attaches jackknife error bars to the atoms, pairing atoms by index.
pub fn attach_jackknife_errors(
    a: &mut SpectralApproximant,
    replicas: &[MomentSequence],
    precision_bits: usize,
) {
    if replicas.len() < 2 {
        return;
    }
    let runs: Vec<SpectralApproximant> = replicas
        .iter()
        .filter_map(|r| quadrature_from_moments(r, a.order, precision_bits).ok())
        .filter(|r| r.atoms.len() == a.atoms.len())
        .collect();
    if runs.len() != replicas.len() {
        return;
    }
    for (k, atom) in a.atoms.iter_mut().enumerate() {
        let om: Vec<f64> = runs.iter().map(|r| r.atoms[k].omega).collect();
        let rh: Vec<f64> = runs.iter().map(|r| r.atoms[k].rho).collect();
        atom.omega_stderr = Some(jackknife_stderr(&om));
        atom.rho_stderr = Some(jackknife_stderr(&rh));
    }
}

pub fn default_precision() -> usize {
    precision_from_env().unwrap_or(DEFAULT_PRECISION_BITS)
}

/// `F_{2n}(s) = s * sum_k rho_k / (s^2 + omega_k^2)`.
pub fn laplace_approximant(a: &SpectralApproximant, s: Complex<f64>) -> Result<Complex<f64>> {
    let s2 = s * s;
    let mut acc = Complex::new(0.0, 0.0);
    for atom in &a.atoms {
        let den = s2 + atom.u;
        if den.norm() <= 1e-14 * (s2.norm() + atom.u) {
            return Err(Error::AtPole(format!("{s}")));
        }
        acc += atom.rho / den;
    }
    Ok(s * acc)
}

/// `sum_k rho_k cos(omega_k t)`.
pub fn correlation_reconstruction(a: &SpectralApproximant, t: f64) -> f64 {
    a.atoms.iter().map(|x| x.rho * (x.omega * t).cos()).sum()
}

/// Whether the nodes of `lower` strictly interlace those of `higher` (order + 1).
pub fn interlaces(lower: &SpectralApproximant, higher: &SpectralApproximant) -> bool {
    let (l, h) = (&lower.atoms, &higher.atoms);
    if h.len() != l.len() + 1 {
        return false;
    }
    (0..l.len()).all(|i| h[i].u < l[i].u && l[i].u < h[i + 1].u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderTable {
    pub order: usize,
    pub omega: Vec<f64>,
    pub rho_normalized: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationReport {
    pub tables: Vec<OrderTable>,
    /// Smallest `|omega_i - omega_j|` at the top order.
    pub min_gap: Option<f64>,
    pub dominant_residue_fraction: Vec<f64>,
    /// Relative change of the dominant `(omega, rho)` between consecutive orders.
    pub residue_stability: Vec<f64>,
    /// `ln(omega_neighbour / omega_dominant)` per order, where a neighbour exists.
    pub log_gap: Vec<Option<f64>>,
    pub verdict: String,
}

pub const ISOLATION_STABILITY: f64 = 0.1;
pub const ISOLATION_FRACTION: f64 = 0.99;

/// Heuristic reading of pole behaviour across orders.
///
/// `isolation-indication`: the dominant atom moves by less than 10% between
/// the last two orders and carries more than 99% of the residue.
/// `dense-indication`: over at least three orders with two or more atoms the
/// dominant fraction strictly decreases and the log-gap to the nearest
/// neighbour strictly shrinks.
pub fn isolation_diagnostic(ladder: &[SpectralApproximant]) -> IsolationReport {
    let tables: Vec<OrderTable> = ladder
        .iter()
        .map(|a| OrderTable {
            order: a.order,
            omega: a.atoms.iter().map(|x| x.omega).collect(),
            rho_normalized: a.normalized_residues(),
        })
        .collect();
    let dominant: Vec<(f64, f64, f64)> = ladder
        .iter()
        .map(|a| {
            let i = a.dominant_index();
            (a.atoms[i].omega, a.atoms[i].rho, a.normalized_residues()[i])
        })
        .collect();
    let dominant_residue_fraction: Vec<f64> = dominant.iter().map(|d| d.2).collect();
    let residue_stability: Vec<f64> = dominant
        .windows(2)
        .map(|w| {
            let dw = ((w[1].0 - w[0].0) / w[0].0).abs();
            let dr = ((w[1].1 - w[0].1) / w[0].1).abs();
            dw.max(dr)
        })
        .collect();
    let log_gap: Vec<Option<f64>> = ladder
        .iter()
        .map(|a| {
            let i = a.dominant_index();
            let w = a.atoms[i].omega;
            a.atoms
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, x)| (x.omega / w).ln().abs())
                .min_by(f64::total_cmp)
        })
        .collect();
    let min_gap = ladder.last().and_then(|a| {
        a.atoms
            .windows(2)
            .map(|w| w[1].omega - w[0].omega)
            .min_by(f64::total_cmp)
    });

    let isolated = match (residue_stability.last(), dominant_residue_fraction.last()) {
        (Some(&s), Some(&f)) => s < ISOLATION_STABILITY && f > ISOLATION_FRACTION,
        (None, Some(&f)) => ladder.len() == 1 && ladder[0].atoms.len() == 1 && f == 1.0,
        _ => false,
    };
    let multi: Vec<(f64, f64)> = dominant_residue_fraction
        .iter()
        .zip(&log_gap)
        .filter_map(|(&f, g)| g.map(|g| (f, g)))
        .collect();
    let dense = multi.len() >= 3
        && multi.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
    let verdict = if isolated {
        "isolation-indication"
    } else if dense {
        "dense-indication"
    } else {
        "inconclusive"
    };
    IsolationReport {
        tables,
        min_gap,
        dominant_residue_fraction,
        residue_stability,
        log_gap,
        verdict: verdict.to_string(),
    }
}
