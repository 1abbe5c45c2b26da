use serde::{Deserialize, Serialize};

use super::jet::{cauchy, Compensated, Jet};
use crate::error::{Error, Result};
use crate::fpu_model::{self, ChainModel, PhasePoint, ProjectionCoeffs};

/// Taylor coefficients of the exact flow through a phase point.
///
/// Coefficient `m` of coordinate `i` lives at `i * (order + 1) + m`.
#[derive(Clone, Debug)]
pub struct TrajectoryJet {
    pub order: usize,
    pub n: usize,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// Full force `F = -dH/dq`.
    pub force: Vec<f64>,
    /// Force minus its linear part.
    pub force_nl: Vec<f64>,
    pub bonds: Vec<f64>,
    bonds2: Vec<f64>,
}

impl TrajectoryJet {
    #[inline]
    fn at(&self, i: usize) -> std::ops::Range<usize> {
        i * (self.order + 1)..(i + 1) * (self.order + 1)
    }

    pub fn q_coeffs(&self, i: usize) -> &[f64] {
        &self.q[self.at(i)]
    }

    pub fn p_coeffs(&self, i: usize) -> &[f64] {
        &self.p[self.at(i)]
    }

    pub fn q_jet(&self, i: usize) -> Jet {
        Jet::from_coeffs(self.q_coeffs(i).to_vec())
    }

    pub fn p_jet(&self, i: usize) -> Jet {
        Jet::from_coeffs(self.p_coeffs(i).to_vec())
    }

    pub fn force_coeffs(&self, i: usize) -> &[f64] {
        &self.force[self.at(i)]
    }

    /// State at time `t` from the truncated series.
    pub fn eval(&self, t: f64) -> PhasePoint {
        let ev = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &v| acc * t + v);
        let q = (0..self.n).map(|i| ev(self.q_coeffs(i))).collect();
        let p = (0..self.n).map(|i| ev(self.p_coeffs(i))).collect();
        PhasePoint::from_qp(q, p)
    }
}

pub fn trajectory_jet(model: &ChainModel, x: &PhasePoint, order: usize) -> TrajectoryJet {
    let n = model.n();
    assert_eq!(x.len(), n, "phase point size does not match the chain");
    let w = order + 1;
    let (alpha, beta) = (model.params.alpha, model.params.beta);
    let nonlinear = alpha != 0.0 || beta != 0.0;
    let mut tj = TrajectoryJet {
        order,
        n,
        q: vec![0.0; n * w],
        p: vec![0.0; n * w],
        force: vec![0.0; n * w],
        force_nl: vec![0.0; n * w],
        bonds: vec![0.0; n * w],
        bonds2: vec![0.0; n * w],
    };
    for i in 0..n {
        tj.q[i * w] = x.q[i];
        tj.p[i * w] = x.p[i];
    }
    let mut vp = vec![0.0; n];
    let mut wp = vec![0.0; n];
    for m in 0..=order {
        for j in 0..n {
            let left = if j == 0 { 0.0 } else { tj.q[(j - 1) * w + m] };
            let b = left - tj.q[j * w + m];
            tj.bonds[j * w + m] = b;
            if nonlinear {
                let bj = &tj.bonds[j * w..(j + 1) * w];
                let b2 = cauchy(bj, bj, m);
                tj.bonds2[j * w + m] = b2;
                let b3 = cauchy(&tj.bonds2[j * w..(j + 1) * w], bj, m);
                wp[j] = alpha * b2 + beta * b3;
            } else {
                wp[j] = 0.0;
            }
            vp[j] = b + wp[j];
        }
        for i in 0..n {
            let (vr, wr) = if i + 1 < n { (vp[i + 1], wp[i + 1]) } else { (0.0, 0.0) };
            tj.force[i * w + m] = vp[i] - vr;
            tj.force_nl[i * w + m] = wp[i] - wr;
        }
        if m < order {
            let inv = 1.0 / (m + 1) as f64;
            for i in 0..n {
                tj.q[i * w + m + 1] = tj.p[i * w + m] * inv;
                tj.p[i * w + m + 1] = tj.force[i * w + m] * inv;
            }
        }
    }
    tj
}

/// Phase-space coordinate used in polynomial observables (0-based particle index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Var {
    Q(usize),
    P(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub factors: Vec<(Var, u32)>,
}

/// Polynomial in `(q, p)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn var(v: Var) -> Self {
        Self {
            terms: vec![Monomial {
                coef: 1.0,
                factors: vec![(v, 1)],
            }],
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms
            .iter()
            .flat_map(|t| t.factors.iter())
            .map(|(v, _)| match v {
                Var::Q(i) | Var::P(i) => *i,
            })
            .max()
    }

    pub fn eval(&self, x: &PhasePoint) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.factors.iter().fold(t.coef, |acc, &(v, e)| {
                    let val = match v {
                        Var::Q(i) => x.q[i],
                        Var::P(i) => x.p[i],
                    };
                    acc * val.powi(e as i32)
                })
            })
            .sum()
    }

    fn jet(&self, tj: &TrajectoryJet) -> Jet {
        let mut out = Jet::zeros(tj.order);
        for t in &self.terms {
            let mut acc = Jet::constant(t.coef, tj.order);
            for &(v, e) in &t.factors {
                let base = match v {
                    Var::Q(i) => tj.q_jet(i),
                    Var::P(i) => tj.p_jet(i),
                };
                acc = acc.mul(&base.powi(e));
            }
            out = &out + &acc;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// Low-mode energy per particle.
    E,
    Etilde(ProjectionCoeffs),
    /// Kinetic energy of the first half of the chain.
    K,
    Ktilde(ProjectionCoeffs),
    H,
    Poly(Polynomial),
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::E => "E",
            Observable::Etilde(_) => "Etilde",
            Observable::K => "K",
            Observable::Ktilde(_) => "Ktilde",
            Observable::H => "H",
            Observable::Poly(_) => "polynomial",
        }
    }

    pub fn check(&self, model: &ChainModel) -> Result<()> {
        if let Observable::Poly(poly) = self {
            if poly.terms.is_empty() {
                return Err(Error::UnsupportedObservable("empty polynomial".into()));
            }
            if let Some(i) = poly.max_index() {
                if i >= model.n() {
                    return Err(Error::UnsupportedObservable(format!(
                        "coordinate index {i} outside a chain of {} particles",
                        model.n()
                    )));
                }
            }
            if poly.terms.iter().any(|t| !t.coef.is_finite()) {
                return Err(Error::UnsupportedObservable("non-finite coefficient".into()));
            }
        }
        Ok(())
    }

    pub fn value(&self, model: &ChainModel, x: &PhasePoint) -> f64 {
        match self {
            Observable::E => fpu_model::observable_e(model, x),
            Observable::Etilde(pr) => fpu_model::observable_etilde(model, x, pr),
            Observable::K => fpu_model::observable_k(model, x),
            Observable::Ktilde(pr) => fpu_model::observable_ktilde(model, x, pr),
            Observable::H => fpu_model::hamiltonian(model, x),
            Observable::Poly(poly) => poly.eval(x),
        }
    }
}

/// Flux form of the low-mode energy jet: each mode energy obeys
/// `dE_k/dt = P_k G_k`, with `G` the nonlinear part of the force, so the
/// large harmonic contributions never enter and cancel.
fn e_jet(model: &ChainModel, tj: &TrajectoryJet) -> Jet {
    let w = tj.order + 1;
    let n = tj.n;
    let mut out = Jet::zeros(tj.order);
    if tj.order == 0 {
        return out;
    }
    let mut pk = vec![0.0; w];
    let mut gk = vec![0.0; w];
    let mut flux = vec![Compensated::default(); tj.order];
    for k in 0..model.low_mode_count {
        let v = model.mode_vectors.column(k);
        pk.iter_mut().for_each(|c| *c = 0.0);
        gk.iter_mut().for_each(|c| *c = 0.0);
        for i in 0..n {
            let vi = v[i];
            for m in 0..w {
                pk[m] += vi * tj.p[i * w + m];
                gk[m] += vi * tj.force_nl[i * w + m];
            }
        }
        for (m, f) in flux.iter_mut().enumerate() {
            f.add(cauchy(&pk, &gk, m));
        }
    }
    let inv_n = 1.0 / n as f64;
    for m in 1..=tj.order {
        out.c[m] = flux[m - 1].value() * inv_n / m as f64;
    }
    out
}

/// `dK/dt = sum_{j < N/2} p_j F_j`.
fn k_jet(model: &ChainModel, tj: &TrajectoryJet) -> Jet {
    let w = tj.order + 1;
    let mut out = Jet::zeros(tj.order);
    for m in 1..=tj.order {
        let mut acc = Compensated::default();
        for j in 0..model.half_count() {
            acc.add(cauchy(
                &tj.p[j * w..(j + 1) * w],
                &tj.force[j * w..(j + 1) * w],
                m - 1,
            ));
        }
        out.c[m] = acc.value() / m as f64;
    }
    out
}

/// Energy jet computed term by term (not assuming conservation).
fn h_jet(model: &ChainModel, tj: &TrajectoryJet) -> Jet {
    let w = tj.order + 1;
    let (alpha, beta) = (model.params.alpha, model.params.beta);
    let mut out = Jet::zeros(tj.order);
    for m in 0..=tj.order {
        let mut acc = Compensated::default();
        for i in 0..tj.n {
            let p = &tj.p[i * w..(i + 1) * w];
            let b = &tj.bonds[i * w..(i + 1) * w];
            acc.add(0.5 * cauchy(p, p, m));
            acc.add(0.5 * cauchy(b, b, m));
            if alpha != 0.0 || beta != 0.0 {
                let b2 = &tj.bonds2[i * w..(i + 1) * w];
                acc.add(alpha / 3.0 * cauchy(b2, b, m));
                acc.add(beta / 4.0 * cauchy(b2, b2, m));
            }
        }
        out.c[m] = acc.value();
    }
    out
}

/// Jet of an observable along the flow; `m! * c[m]` is its `m`-th Lie derivative.
///
/// The projected observables reuse the jets of `E` and `K` for `m >= 1`:
/// the energy is a constant of motion, so subtracting a multiple of it only
/// shifts the constant term.
pub fn observable_jet(
    model: &ChainModel,
    x: &PhasePoint,
    observable: &Observable,
    order: usize,
) -> Result<Jet> {
    observable.check(model)?;
    let tj = trajectory_jet(model, x, order);
    Ok(observable_jet_from(model, x, &tj, observable))
}

pub fn observable_jet_from(
    model: &ChainModel,
    x: &PhasePoint,
    tj: &TrajectoryJet,
    observable: &Observable,
) -> Jet {
    let mut jet = match observable {
        Observable::E | Observable::Etilde(_) => e_jet(model, tj),
        Observable::K | Observable::Ktilde(_) => k_jet(model, tj),
        Observable::H => return h_jet(model, tj),
        Observable::Poly(poly) => return poly.jet(tj),
    };
    jet.c[0] = observable.value(model, x);
    jet
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpu_model::{build_chain, FpuParams};

    fn chain(n: usize, a: f64, b: f64) -> ChainModel {
        build_chain(FpuParams::new(n, a, b, 1.0).unwrap()).unwrap()
    }

    fn state(n: usize, scale: f64) -> PhasePoint {
        let q = (0..n).map(|i| scale * ((i as f64 * 1.7).sin() + 0.3)).collect();
        let p = (0..n).map(|i| scale * (i as f64 * 0.9 + 0.5).cos()).collect();
        PhasePoint::from_qp(q, p)
    }

    #[test]
    fn harmonic_oscillator_is_cosine() {
        let m = chain(1, 0.0, 0.0);
        let tj = trajectory_jet(&m, &PhasePoint::from_qp(vec![1.0], vec![0.0]), 8);
        let expect = [1.0, 0.0, -0.5, 0.0, 1.0 / 24.0, 0.0, -1.0 / 720.0, 0.0, 1.0 / 40320.0];
        for (a, b) in tj.q_coeffs(0).iter().zip(expect) {
            assert!((a - b).abs() < 1e-16);
        }
    }

    #[test]
    fn first_order_is_the_vector_field() {
        let m = chain(5, 0.25, 0.25);
        let x = state(5, 0.8);
        let tj = trajectory_jet(&m, &x, 3);
        let mut f = vec![0.0; 5];
        m.forces(&x.bonds, &mut f);
        for i in 0..5 {
            assert_eq!(tj.q_coeffs(i)[1], x.p[i]);
            assert!((tj.p_coeffs(i)[1] - f[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn energy_jet_is_constant() {
        let m = chain(8, 0.25, 0.25);
        let x = state(8, 0.6);
        let jet = observable_jet(&m, &x, &Observable::H, 12).unwrap();
        let h = jet.c[0];
        assert!((h - fpu_model::hamiltonian(&m, &x)).abs() < 1e-14 * h);
        for c in &jet.c[1..] {
            assert!(c.abs() < 1e-12 * h, "{c}");
        }
    }

    #[test]
    fn harmonic_low_mode_energy_is_conserved() {
        let m = chain(6, 0.0, 0.0);
        let proj = ProjectionCoeffs {
            lambda_e: 0.5,
            lambda_k: 0.0,
            sample_size: 2,
        };
        let jet = observable_jet(&m, &state(6, 1.0), &Observable::Etilde(proj), 10).unwrap();
        assert!(jet.c[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn flux_form_matches_direct_products() {
        let m = chain(6, 0.25, 0.25);
        let x = state(6, 0.5);
        let order = 10;
        let tj = trajectory_jet(&m, &x, order);
        let mut direct = Jet::zeros(order);
        for k in 0..m.low_mode_count {
            let v = m.mode_vectors.column(k);
            let mut qk = Jet::zeros(order);
            let mut pk = Jet::zeros(order);
            for i in 0..6 {
                qk = &qk + &tj.q_jet(i).scale(v[i]);
                pk = &pk + &tj.p_jet(i).scale(v[i]);
            }
            let w2 = m.mode_frequencies[k].powi(2);
            let ek = &pk.mul(&pk).scale(0.5) + &qk.mul(&qk).scale(0.5 * w2);
            direct = &direct + &ek.scale(1.0 / 6.0);
        }
        let flux = observable_jet(&m, &x, &Observable::E, order).unwrap();
        for (a, b) in flux.c.iter().zip(&direct.c) {
            assert!((a - b).abs() < 1e-12 * direct.c[0], "{a} vs {b}");
        }
        let kin = observable_jet(&m, &x, &Observable::K, order).unwrap();
        let mut poly = Polynomial::default();
        for j in 0..3 {
            poly.terms.push(Monomial {
                coef: 0.5,
                factors: vec![(Var::P(j), 2)],
            });
        }
        let kd = observable_jet(&m, &x, &Observable::Poly(poly), order).unwrap();
        for (a, b) in kin.c.iter().zip(&kd.c) {
            assert!((a - b).abs() < 1e-13 * kd.c[0].max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn position_derivatives_of_oscillator() {
        // f = q_0 on the single harmonic oscillator: f^(2k) = (-1)^k q, f^(2k+1) = (-1)^k p.
        let m = chain(1, 0.0, 0.0);
        let x = PhasePoint::from_qp(vec![0.7], vec![-0.2]);
        let jet = observable_jet(&m, &x, &Observable::Poly(Polynomial::var(Var::Q(0))), 9).unwrap();
        let d = jet.derivatives();
        for (n, dn) in d.iter().enumerate() {
            let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let base = if n % 2 == 0 { 0.7 } else { -0.2 };
            assert!((dn - sign * base).abs() < 1e-14);
        }
    }

    #[test]
    fn bad_polynomial_rejected() {
        let m = chain(2, 0.0, 0.0);
        let err = observable_jet(
            &m,
            &PhasePoint::zero(2),
            &Observable::Poly(Polynomial::var(Var::P(5))),
            3,
        );
        assert!(matches!(err, Err(Error::UnsupportedObservable(_))));
    }
}
