//! Support-recovery rates and the CAVI-vs-MCMC distance.

use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Coordinate-wise counts of `s_hat` against the truth `s_star` over `p` coordinates.
pub fn confusion(s_hat: &Configuration, s_star: &Configuration, p: usize) -> ConfusionCounts {
    debug_assert!(s_hat.check_bounds(p).is_ok() && s_star.check_bounds(p).is_ok());
    let tp = s_hat.indices().iter().filter(|&&j| s_star.contains(j)).count();
    let fp = s_hat.len() - tp;
    let fn_ = s_star.len() - tp;
    ConfusionCounts {
        tp,
        fp,
        fn_,
        tn: p - tp - fp - fn_,
    }
}

/// `TP / (TP + FN)`; `None` when the truth is empty.
pub fn tpr(c: &ConfusionCounts) -> Option<f64> {
    let den = c.tp + c.fn_;
    (den > 0).then(|| c.tp as f64 / den as f64)
}

/// `FP / (TP + FP)`, 0 when nothing was selected.
pub fn fdr(c: &ConfusionCounts) -> f64 {
    let den = c.tp + c.fp;
    if den == 0 {
        0.0
    } else {
        c.fp as f64 / den as f64
    }
}

/// `TN / (TN + FP)`; `None` when every coordinate is a true signal.
pub fn tnr(c: &ConfusionCounts) -> Option<f64> {
    let den = c.tn + c.fp;
    (den > 0).then(|| c.tn as f64 / den as f64)
}

/// Matthews correlation, 0 when any marginal is empty.
pub fn mcc(c: &ConfusionCounts) -> f64 {
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den.sqrt()
    }
}

/// The four rates together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tpr: Option<f64>,
    pub fdr: f64,
    pub tnr: Option<f64>,
    pub mcc: f64,
}

impl From<&ConfusionCounts> for Rates {
    fn from(c: &ConfusionCounts) -> Self {
        Rates {
            tpr: tpr(c),
            fdr: fdr(c),
            tnr: tnr(c),
            mcc: mcc(c),
        }
    }
}

/// `sqrt(mean_r ‖π_r − φ_r‖² / p)` over R runs of length p.
pub fn d_distance(phi_runs: &[Vec<f64>], pi_runs: &[Vec<f64>]) -> Result<f64> {
    if phi_runs.is_empty() || phi_runs.len() != pi_runs.len() {
        return Err(Error::DimensionMismatch(format!(
            "run counts {} and {} must be equal and positive",
            phi_runs.len(),
            pi_runs.len()
        )));
    }
    let p = phi_runs[0].len();
    if p == 0 {
        return Err(Error::DimensionMismatch("runs have no coordinates".into()));
    }
    let mut total = 0.0;
    for (r, (a, b)) in phi_runs.iter().zip(pi_runs).enumerate() {
        if a.len() != p || b.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "run {r}: lengths {} and {}, expected {p}",
                a.len(),
                b.len()
            )));
        }
        total += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    Ok((total / phi_runs.len() as f64 / p as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(v: &[usize]) -> Configuration {
        Configuration::new(v.to_vec()).unwrap()
    }

    fn counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> ConfusionCounts {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    #[test]
    fn confusion_examples() {
        let s = cfg(&[0, 1, 2, 3]);
        assert_eq!(confusion(&s, &s, 200), counts(4, 0, 0, 196));
        assert_eq!(confusion(&Configuration::empty(), &cfg(&[0]), 50), counts(0, 0, 1, 49));
        assert_eq!(confusion(&cfg(&[0, 1, 4]), &cfg(&[0, 1, 2]), 10), counts(2, 1, 1, 6));
    }

    #[test]
    fn perfect_rates() {
        let r = Rates::from(&counts(4, 0, 0, 196));
        assert_eq!(r.tpr, Some(1.0));
        assert_eq!(r.fdr, 0.0);
        assert_eq!(r.tnr, Some(1.0));
        assert_eq!(r.mcc, 1.0);
    }

    #[test]
    fn mcc_golden() {
        assert!((mcc(&counts(3, 1, 1, 195)) - 0.7448979591836735).abs() < 1e-15);
    }

    #[test]
    fn conventions() {
        let c = counts(0, 0, 1, 199);
        assert_eq!(fdr(&c), 0.0);
        assert_eq!(mcc(&c), 0.0);
        assert_eq!(tpr(&c), Some(0.0));
        assert_eq!(tpr(&counts(0, 2, 0, 8)), None);
        assert_eq!(tnr(&counts(3, 0, 0, 0)), None);
    }

    #[test]
    fn d_distance_cases() {
        let a = vec![vec![0.1, 0.2], vec![0.3, 0.4]];
        assert_eq!(d_distance(&a, &a).unwrap(), 0.0);

        let shifted: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| v + 0.25).collect()).collect();
        assert!((d_distance(&a, &shifted).unwrap() - 0.25).abs() < 1e-12);

        let b = vec![vec![0.2, 0.2], vec![0.0, 0.8]];
        assert!((d_distance(&a, &b).unwrap() - 0.25495097567963924).abs() < 1e-15);

        assert!(d_distance(&a, &b[..1]).is_err());
        assert!(d_distance(&[], &[]).is_err());
        assert!(d_distance(&a, &[vec![0.0, 0.0], vec![0.0]]).is_err());
    }

    fn config_pair(p: usize) -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
        (prop::collection::vec(any::<bool>(), p), prop::collection::vec(any::<bool>(), p))
    }

    proptest! {
        #[test]
        fn rates_are_bounded_and_relabeling_invariant((a, b) in (1usize..40).prop_flat_map(config_pair), seed in any::<u64>()) {
            let p = a.len();
            let c = confusion(&Configuration::from_indicator(&a), &Configuration::from_indicator(&b), p);
            prop_assert_eq!(c.total(), p);
            let r = Rates::from(&c);
            for v in [r.tpr, Some(r.fdr), r.tnr].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((-1.0..=1.0).contains(&r.mcc));

            // a joint permutation of coordinates
            let mut perm: Vec<usize> = (0..p).collect();
            perm.sort_by_key(|&i| (i as u64).wrapping_mul(seed | 1).rotate_left(17));
            let pa: Vec<bool> = perm.iter().map(|&i| a[i]).collect();
            let pb: Vec<bool> = perm.iter().map(|&i| b[i]).collect();
            let c2 = confusion(&Configuration::from_indicator(&pa), &Configuration::from_indicator(&pb), p);
            prop_assert_eq!(c, c2);
        }

        #[test]
        fn d_distance_is_a_scaled_norm(
            rows in 1usize..5,
            p in 1usize..6,
            vals in prop::collection::vec(0.0f64..1.0, 3 * 5 * 6),
        ) {
            let take = |k: usize| -> Vec<Vec<f64>> {
                (0..rows).map(|r| (0..p).map(|j| vals[k * 30 + r * 6 + j]).collect()).collect()
            };
            let (x, y, z) = (take(0), take(1), take(2));
            let dxy = d_distance(&x, &y).unwrap();
            prop_assert_eq!(dxy, d_distance(&y, &x).unwrap());
            prop_assert!(dxy <= d_distance(&x, &z).unwrap() + d_distance(&z, &y).unwrap() + 1e-12);
            prop_assert!(dxy >= 0.0);
        }
    }
}
