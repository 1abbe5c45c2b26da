use std::ops::{Add, Sub};

/// Truncated Taylor series `sum_m c[m] t^m`, `m = 0..=order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub c: Vec<f64>,
}

/// Neumaier-compensated sum.
#[derive(Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `m`-th coefficient of the Cauchy product of two coefficient slices.
#[inline]
pub(crate) fn cauchy(a: &[f64], b: &[f64], m: usize) -> f64 {
    let mut acc = Compensated::default();
    for i in 0..=m {
        acc.add(a[i] * b[m - i]);
    }
    acc.value()
}

impl Jet {
    pub fn zeros(order: usize) -> Self {
        Self {
            c: vec![0.0; order + 1],
        }
    }

    pub fn constant(v: f64, order: usize) -> Self {
        let mut j = Self::zeros(order);
        j.c[0] = v;
        j
    }

    /// The jet of `x0 + t`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut j = Self::constant(x0, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn from_coeffs(c: Vec<f64>) -> Self {
        assert!(!c.is_empty());
        Self { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let m = self.order().min(o.order());
        Self {
            c: (0..=m).map(|k| cauchy(&self.c, &o.c, k)).collect(),
        }
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut acc = Self::constant(1.0, self.order());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Value of the `m`-th derivative at `t = 0`, i.e. `m! c[m]`.
    pub fn derivative(&self, m: usize) -> f64 {
        let fact: f64 = (1..=m).map(|i| i as f64).product();
        self.c[m] * fact
    }

    pub fn derivatives(&self) -> Vec<f64> {
        let mut fact = 1.0;
        self.c
            .iter()
            .enumerate()
            .map(|(m, &v)| {
                if m > 0 {
                    fact *= m as f64;
                }
                v * fact
            })
            .collect()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &v| acc * t + v)
    }

    /// Jet of `f(g(t))` given `f_derivs[k] = f^(k)(g(0))`.
    pub fn compose(&self, f_derivs: &[f64]) -> Self {
        let order = self.order();
        let mut shifted = self.clone();
        shifted.c[0] = 0.0;
        let mut out = Self::zeros(order);
        let mut power = Self::constant(1.0, order);
        let mut fact = 1.0;
        for (k, &fk) in f_derivs.iter().enumerate().take(order + 1) {
            if k > 0 {
                power = power.mul(&shifted);
                fact *= k as f64;
            }
            for (o, p) in out.c.iter_mut().zip(&power.c) {
                *o += fk / fact * p;
            }
        }
        out
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_square_series() {
        // e^{t^2} = 1 + t^2 + t^4/2 + t^6/6
        let g = Jet::variable(0.0, 6).powi(2);
        let h = g.compose(&[1.0; 7]);
        let expect = [1.0, 0.0, 1.0, 0.0, 0.5, 0.0, 1.0 / 6.0];
        for (a, b) in h.c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((h.derivative(4) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn product_truncates() {
        let a = Jet::from_coeffs(vec![1.0, 2.0, 3.0]);
        let b = Jet::from_coeffs(vec![4.0, 5.0, 6.0]);
        assert_eq!(a.mul(&b).c, vec![4.0, 13.0, 28.0]);
        assert_eq!((&a + &b).c, vec![5.0, 7.0, 9.0]);
        assert_eq!(a.eval(2.0), 1.0 + 4.0 + 12.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = Compensated::default();
        for x in [1e16, 1.0, -1e16, 1.0] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }
}
