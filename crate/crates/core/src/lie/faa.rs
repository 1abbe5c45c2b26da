//! Enumeration of `K_{n,s} = { k in N_0^n : k_1 + 2 k_2 + ... + n k_n = s }`
//! in inverse lexicographic order (right to left), and the Faà di Bruno
//! formula built on it.

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FaaTuple {
    /// `k[j - 1]` holds `k_j`.
    pub k: Vec<usize>,
    pub s: usize,
}

impl FaaTuple {
    pub fn n(&self) -> usize {
        self.k.len()
    }

    pub fn weight(&self) -> usize {
        self.k.iter().enumerate().map(|(j, &kj)| (j + 1) * kj).sum()
    }
}

fn fill_first(k: &mut [usize], s: usize) {
    let mut rest = s;
    for j in (1..=k.len()).rev() {
        k[j - 1] = rest / j;
        rest -= j * k[j - 1];
    }
}

pub fn faa_first_tuple(n: usize, s: usize) -> FaaTuple {
    assert!(n >= 1, "tuples need n >= 1");
    let mut k = vec![0; n];
    fill_first(&mut k, s);
    FaaTuple { k, s }
}

/// Successor of `t`, or `None` once `t = (s, 0, ..., 0)`.
pub fn faa_next_tuple(t: &FaaTuple) -> Option<FaaTuple> {
    let m = (2..=t.n()).find(|&m| t.k[m - 1] != 0)?;
    let mut k = t.k.clone();
    k[m - 1] -= 1;
    let prefix_weight = k[0] + m;
    fill_first(&mut k[..m - 1], prefix_weight);
    Some(FaaTuple { k, s: t.s })
}

/// Iterator over `K_{n,s}` in enumeration order.
pub struct FaaTuples {
    next: Option<FaaTuple>,
}

impl FaaTuples {
    pub fn new(n: usize, s: usize) -> Self {
        Self {
            next: Some(faa_first_tuple(n, s)),
        }
    }
}

impl Iterator for FaaTuples {
    type Item = FaaTuple;

    fn next(&mut self) -> Option<FaaTuple> {
        let cur = self.next.take()?;
        self.next = faa_next_tuple(&cur);
        Some(cur)
    }
}

/// `n`-th derivative of `f(g(x))`.
///
/// `f_derivs[k] = f^(k)(g(x))` for `k = 0..=n`; `g_derivs[j - 1] = g^(j)(x)`
/// for `j = 1..=n`.
pub fn faa_di_bruno(f_derivs: &[f64], g_derivs: &[f64], n: usize) -> f64 {
    assert!(n >= 1);
    assert!(f_derivs.len() > n && g_derivs.len() >= n);
    let fact = |m: usize| (1..=m).map(|i| i as f64).product::<f64>();
    let n_fact = fact(n);
    let mut sum = 0.0;
    for t in FaaTuples::new(n, n) {
        let mut term = n_fact * f_derivs[t.k.iter().sum::<usize>()];
        for (j, &kj) in t.k.iter().enumerate() {
            if kj == 0 {
                continue;
            }
            term /= fact(kj);
            term *= (g_derivs[j] / fact(j + 1)).powi(kj as i32);
        }
        sum += term;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cmp::Ordering;

    /// The recursive right-to-left ordering on `K_{n,s}`.
    fn recursive_cmp(a: &[usize], b: &[usize]) -> Ordering {
        let n = a.len();
        if n == 1 {
            return Ordering::Equal;
        }
        match b[n - 1].cmp(&a[n - 1]) {
            Ordering::Equal => recursive_cmp(&a[..n - 1], &b[..n - 1]),
            o => o,
        }
    }

    fn partitions_at_most(s: usize, n: usize) -> usize {
        let mut ways = vec![0usize; s + 1];
        ways[0] = 1;
        for part in 1..=n {
            for v in part..=s {
                ways[v] += ways[v - part];
            }
        }
        ways[s]
    }

    #[test]
    fn listing_for_three_five() {
        let got: Vec<Vec<usize>> = FaaTuples::new(3, 5).map(|t| t.k).collect();
        assert_eq!(
            got,
            vec![vec![0, 1, 1], vec![2, 0, 1], vec![1, 2, 0], vec![3, 1, 0], vec![5, 0, 0]]
        );
    }

    #[test]
    fn first_tuples() {
        assert_eq!(faa_first_tuple(1, 7).k, vec![7]);
        assert_eq!(faa_first_tuple(4, 0).k, vec![0, 0, 0, 0]);
        assert_eq!(faa_next_tuple(&faa_first_tuple(4, 0)), None);
        assert_eq!(faa_next_tuple(&faa_first_tuple(1, 3)), None);
    }

    #[test]
    fn counts_and_order() {
        for n in 1..=12 {
            for s in 0..=12 {
                let all: Vec<FaaTuple> = FaaTuples::new(n, s).collect();
                assert_eq!(all.len(), partitions_at_most(s, n), "n={n} s={s}");
                assert!(all.iter().all(|t| t.weight() == s));
                for w in all.windows(2) {
                    assert_eq!(recursive_cmp(&w[0].k, &w[1].k), Ordering::Less);
                }
                let mut last = vec![0; n];
                last[0] = s;
                assert_eq!(all.last().unwrap().k, last);
            }
        }
    }

    #[test]
    fn chain_rule_and_known_values() {
        // n = 1 is the chain rule.
        assert_eq!(faa_di_bruno(&[9.0, 3.0], &[5.0], 1), 15.0);
        // exp(x^2) at x = 0: g' = 0, g'' = 2, others vanish.
        let f = [1.0; 5];
        let g = [0.0, 2.0, 0.0, 0.0];
        assert!((faa_di_bruno(&f, &g, 4) - 12.0).abs() < 1e-12);
    }
}
