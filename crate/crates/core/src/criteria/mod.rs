//! Moment-level regularity diagnostics. Every verdict is a finite-order
//! indication, never a proof about the full sequence.

pub mod akhiezer_krein;
pub mod apriori;
pub mod hausdorff;
pub mod root_test;

pub use akhiezer_krein::{akhiezer_krein, akhiezer_krein_scan, default_l_grid, AkhiezerKreinReport, AkhiezerKreinScan};
pub use apriori::{apriori_polynomials, AprioriReport};
pub use hausdorff::{hausdorff_for_approximant, hausdorff_lambda, hausdorff_moments, HausdorffReport};
pub use root_test::{root_test, RootTestReport};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::moments::MomentSequence;
use crate::stieltjes::SpectralApproximant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signature {
    /// No bounded density, growing Hausdorff sums, bounded root test.
    Atomic,
    /// Bounded density indicated and unbounded root test.
    Smooth,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaOptions {
    pub ak_order: usize,
    pub p_max: usize,
    pub hausdorff_levels: usize,
    pub apriori_n: usize,
    pub apriori_l: usize,
    pub root_threshold: Option<f64>,
}

impl Default for CriteriaOptions {
    fn default() -> Self {
        Self {
            ak_order: 16,
            p_max: 40,
            hausdorff_levels: 2,
            apriori_n: 2,
            apriori_l: 1,
            root_threshold: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub akhiezer_krein: Option<AkhiezerKreinScan>,
    /// Evaluated on the atomic approximant; describes the approximant.
    pub hausdorff: Option<HausdorffReport>,
    pub root_test: RootTestReport,
    pub apriori: Option<AprioriReport>,
    pub signature: Signature,
    /// Why a criterion was skipped.
    pub notes: Vec<String>,
}

pub fn classify(ak: Option<&AkhiezerKreinScan>, hausdorff_growth: Option<bool>, root_bounded: bool) -> Signature {
    match ak {
        Some(a) if !a.holds_for_some_l && hausdorff_growth != Some(false) && root_bounded => Signature::Atomic,
        Some(a) if a.holds_for_some_l && !root_bounded => Signature::Smooth,
        _ => Signature::Mixed,
    }
}

/// Runs every criterion the inputs allow, shrinking orders to the available moments.
pub fn criteria_report(
    m: &MomentSequence,
    approximant: Option<&SpectralApproximant>,
    opts: &CriteriaOptions,
) -> Result<CriteriaReport> {
    m.validate()?;
    let mut notes = Vec::new();
    let ak_order = opts.ak_order.min(2 * m.max_n());
    let akhiezer_krein = if ak_order >= 2 {
        Some(akhiezer_krein_scan(m, &default_l_grid(m), ak_order)?)
    } else {
        notes.push("Akhiezer-Krein skipped: fewer than two moments".into());
        None
    };
    let hausdorff = match approximant {
        Some(a) if !a.atoms.is_empty() => Some(hausdorff_for_approximant(a, opts.p_max, opts.hausdorff_levels)?),
        _ => {
            notes.push("Hausdorff skipped: no approximant".into());
            None
        }
    };
    let root = root_test(m, opts.root_threshold);
    let n_fit = opts.apriori_n.min(m.c.len().saturating_sub(opts.apriori_l + 2) / 2);
    let apriori = if m.c.len() >= opts.apriori_l + 2 {
        Some(apriori_polynomials(m, n_fit, opts.apriori_l)?)
    } else {
        notes.push("a-priori polynomials skipped: too few moments".into());
        None
    };
    let growth = hausdorff
        .as_ref()
        .map(|h| h.levels[0].trend_slope > hausdorff::GROWTH_SLOPE);
    let signature = classify(akhiezer_krein.as_ref(), growth, root.bounded);
    Ok(CriteriaReport {
        akhiezer_krein,
        hausdorff,
        root_test: root,
        apriori,
        signature,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_signature() {
        let m = MomentSequence::exact("atom", (0..9).map(|n| 2.25f64.powi(n)).collect());
        let a = SpectralApproximant::from_atoms(&[(1.5, 1.0)]);
        let r = criteria_report(&m, Some(&a), &CriteriaOptions::default()).unwrap();
        assert_eq!(r.signature, Signature::Atomic);
    }

    #[test]
    fn sech_moment_signature() {
        let c = vec![1.0, 1.0, 5.0, 61.0, 1385.0, 50521.0, 2702765.0, 199360981.0, 19391512145.0];
        let r = criteria_report(&MomentSequence::exact("sech", c), None, &CriteriaOptions::default()).unwrap();
        assert_eq!(r.signature, Signature::Smooth);
        assert!(r.apriori.unwrap().all_pass);
    }
}
