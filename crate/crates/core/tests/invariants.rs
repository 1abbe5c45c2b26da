use acsm_core::fpu_model::{build_chain, FpuParams};
use acsm_core::gibbs::GibbsStream;
use acsm_core::hankel::{hankel_check, DetSign};
use acsm_core::lie::{faa_di_bruno, Jet, Observable, Polynomial, Var};
use acsm_core::moments::{estimate_moments, MomentSequence};
use acsm_core::reference::series_partial_sums;
use acsm_core::stieltjes::{approximant_ladder, correlation_reconstruction, interlaces, quadrature_from_moments};
use proptest::prelude::*;

fn atoms_strategy(k: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.2f64..3.0, 0.05f64..1.0), k).prop_filter("separated", |a| {
        let mut w: Vec<f64> = a.iter().map(|x| x.0).collect();
        w.sort_by(f64::total_cmp);
        w.windows(2).all(|p| p[1] - p[0] > 0.1)
    })
}

fn moments_of(atoms: &[(f64, f64)], len: usize) -> MomentSequence {
    let c = (0..len)
        .map(|n| atoms.iter().map(|&(w, r)| r * (w * w).powi(n as i32)).sum())
        .collect();
    MomentSequence::exact("atoms", c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadrature_recovers_random_atoms(atoms in atoms_strategy(3)) {
        let m = moments_of(&atoms, 6);
        let a = quadrature_from_moments(&m, 3, 512).unwrap();
        let mut want = atoms.clone();
        want.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (at, (w, r)) in a.atoms.iter().zip(want) {
            prop_assert!((at.omega - w).abs() < 1e-9 * w);
            prop_assert!((at.rho - r).abs() < 1e-8 * r);
        }
    }

    #[test]
    fn hankel_positive_and_ladder_interlaces(atoms in atoms_strategy(4)) {
        let m = moments_of(&atoms, 8);
        let h = hankel_check(&m).unwrap();
        prop_assert!(h.det_delta.iter().chain(&h.det_delta_tilde).all(|d| d.sign == DetSign::Positive));
        let (ladder, gate) = approximant_ladder(&m, 4, 512);
        prop_assert!(gate.is_none());
        for w in ladder.windows(2) {
            prop_assert!(interlaces(&w[0], &w[1]));
        }
    }

    #[test]
    fn partial_sums_bracket_atomic_correlation(atoms in atoms_strategy(3), t in 0.0f64..4.0) {
        let m = moments_of(&atoms, 12);
        let exact: f64 = atoms.iter().map(|&(w, r)| r * (w * t).cos()).sum();
        let sums = series_partial_sums(&m.c, t);
        for (n, s) in sums.iter().enumerate() {
            let slack = 1e-9 * s.abs().max(1.0);
            if n % 2 == 0 {
                prop_assert!(*s >= exact - slack, "S_{} = {} < {}", n, s, exact);
            } else {
                prop_assert!(*s <= exact + slack, "S_{} = {} > {}", n, s, exact);
            }
        }
        let a = quadrature_from_moments(&m, 3, 512).unwrap();
        prop_assert!((correlation_reconstruction(&a, t) - exact).abs() < 1e-8);
    }

    #[test]
    fn faa_di_bruno_matches_jet_composition(coeffs in prop::collection::vec(-1.0f64..1.0, 7)) {
        // f = exp, so f^(k)(g) = exp(g)
        let g = Jet::from_coeffs(coeffs.clone());
        let f_derivs = vec![coeffs[0].exp(); 7];
        let composed = g.compose(&f_derivs).derivatives();
        let g_derivs: Vec<f64> = g.derivatives()[1..].to_vec();
        for n in 1..=6 {
            let v = faa_di_bruno(&f_derivs, &g_derivs, n);
            prop_assert!((v - composed[n]).abs() < 1e-9 * v.abs().max(1.0), "n={}: {} vs {}", n, v, composed[n]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn moments_scale_quadratically(s in 0.1f64..10.0, seed in 0u64..1000) {
        let params = FpuParams::new(4, 0.25, 0.25, 0.1).unwrap();
        let model = build_chain(params).unwrap();
        let stream = GibbsStream::new(params, seed, 400).unwrap();
        let base = Polynomial::var(Var::P(1));
        let mut scaled = base.clone();
        scaled.terms[0].coef = s;
        let a = estimate_moments(&model, &stream, &Observable::Poly(base), 4, 10).unwrap();
        let b = estimate_moments(&model, &stream, &Observable::Poly(scaled), 4, 10).unwrap();
        for n in 0..=4 {
            prop_assert!((b.c[n] - s * s * a.c[n]).abs() < 1e-10 * b.c[n]);
        }
    }
}
