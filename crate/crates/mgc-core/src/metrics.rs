//! Evaluation quantities: joint accuracy, hamming loss in both framings,
//! per-class precision/recall/F1, confusion matrices and mask IoU.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::grid::Grid;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction/truth length mismatch: {preds} vs {truth}")]
    LengthMismatch { preds: usize, truth: usize },
    #[error("empty input")]
    Empty,
    #[error("joint class index {0} out of range [0, 8)")]
    JointOutOfRange(usize),
}

/// Presence vector `(whistle, beluga click, porpoise click)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelVector {
    pub whistle: bool,
    pub beluga: bool,
    pub porpoise: bool,
}

impl LabelVector {
    pub const EMPTY: LabelVector = LabelVector {
        whistle: false,
        beluga: false,
        porpoise: false,
    };

    pub fn new(whistle: bool, beluga: bool, porpoise: bool) -> Self {
        Self {
            whistle,
            beluga,
            porpoise,
        }
    }

    pub fn components(self) -> [bool; 3] {
        [self.whistle, self.beluga, self.porpoise]
    }

    pub fn from_components(c: [bool; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }

    /// 0/1 triple in manifest column order.
    pub fn as_bits(self) -> [u8; 3] {
        [self.whistle as u8, self.beluga as u8, self.porpoise as u8]
    }
}

/// Index of one of the `2³ = 8` joint presence combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointClass(usize);

impl JointClass {
    pub fn new(index: usize) -> Result<Self, MetricsError> {
        if index >= 8 {
            return Err(MetricsError::JointOutOfRange(index));
        }
        Ok(Self(index))
    }

    pub fn index(self) -> usize {
        self.0
    }
}

/// Frozen encoding: `index = 4·whistle + 2·beluga + porpoise` (whistle is the
/// most significant bit).
pub fn label_to_joint(y: LabelVector) -> JointClass {
    JointClass(4 * y.whistle as usize + 2 * y.beluga as usize + y.porpoise as usize)
}

/// Exact inverse of [`label_to_joint`].
pub fn joint_to_label(c: JointClass) -> LabelVector {
    LabelVector {
        whistle: c.0 & 4 != 0,
        beluga: c.0 & 2 != 0,
        porpoise: c.0 & 1 != 0,
    }
}

fn check_lengths(preds: &[LabelVector], truth: &[LabelVector]) -> Result<(), MetricsError> {
    if preds.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            truth: truth.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Fraction of samples whose entire label vector is predicted exactly.
pub fn joint_accuracy(preds: &[LabelVector], truth: &[LabelVector]) -> Result<f64, MetricsError> {
    check_lengths(preds, truth)?;
    let hits = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// The two hamming-loss framings are not comparable across training methods,
/// so the mode is always explicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HammingMode {
    /// Mean fraction of mismatched components per sample (out of 3).
    Multilabel,
    /// Mean indicator of joint-class mismatch per sample.
    Multiclass,
}

pub fn hamming_loss(
    preds: &[LabelVector],
    truth: &[LabelVector],
    mode: HammingMode,
) -> Result<f64, MetricsError> {
    check_lengths(preds, truth)?;
    // integer totals first, one division at the end, so the result is exactly
    // invariant under sample permutation
    let mut total: u64 = 0;
    for (p, t) in preds.iter().zip(truth) {
        let mismatches = p
            .components()
            .iter()
            .zip(t.components().iter())
            .filter(|(a, b)| a != b)
            .count() as u64;
        total += match mode {
            HammingMode::Multilabel => mismatches,
            HammingMode::Multiclass => (mismatches > 0) as u64,
        };
    }
    let denom = match mode {
        HammingMode::Multilabel => 3 * preds.len() as u64,
        HammingMode::Multiclass => preds.len() as u64,
    };
    Ok(total as f64 / denom as f64)
}

/// Binary precision/recall/F1 for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class precision/recall/F1 plus the macro-F1.
///
/// Zero-division convention: a rate with an empty denominator is 0, and the
/// class still participates in the macro average.
pub fn per_class_prf(
    preds: &[LabelVector],
    truth: &[LabelVector],
) -> Result<([Prf; 3], f64), MetricsError> {
    check_lengths(preds, truth)?;
    let mut out = [Prf {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    }; 3];
    let mut macro_f1 = 0.0;
    for k in 0..3 {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (p, t) in preds.iter().zip(truth) {
            let pv = p.components()[k];
            let tv = t.components()[k];
            match (pv, tv) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        out[k] = Prf {
            precision,
            recall,
            f1,
        };
        macro_f1 += f1;
    }
    Ok((out, macro_f1 / 3.0))
}

/// 8×8 joint-class confusion counts, `counts[truth][pred]`.
pub fn confusion_matrix_8(
    preds: &[LabelVector],
    truth: &[LabelVector],
) -> Result<[[u64; 8]; 8], MetricsError> {
    check_lengths(preds, truth)?;
    let mut counts = [[0u64; 8]; 8];
    for (p, t) in preds.iter().zip(truth) {
        counts[label_to_joint(*t).index()][label_to_joint(*p).index()] += 1;
    }
    Ok(counts)
}

/// Intersection-over-union of two binary masks. Both empty → 1 by convention.
pub fn iou(a: &Grid<u8>, b: &Grid<u8>) -> f64 {
    assert!(a.same_dims(b), "IoU on mismatched mask dims");
    let mut inter = 0u64;
    let mut union = 0u64;
    for (&x, &y) in a.data().iter().zip(b.data().iter()) {
        let (x, y) = (x != 0, y != 0);
        inter += (x && y) as u64;
        union += (x || y) as u64;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Everything the evaluation harness reports for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub joint_accuracy: f64,
    pub hamming_multilabel: f64,
    pub hamming_multiclass: f64,
    pub per_class: [Prf; 3],
    pub macro_f1: f64,
    pub confusion: [[u64; 8]; 8],
    pub n_samples: usize,
}

pub const CLASS_NAMES: [&str; 3] = ["whistle", "beluga_click", "porpoise_click"];

/// Names a joint class by its member classes (`"none"` when empty).
pub fn joint_class_name(c: JointClass) -> String {
    let y = joint_to_label(c);
    let mut parts: Vec<&str> = Vec::new();
    if y.whistle {
        parts.push("whistle");
    }
    if y.beluga {
        parts.push("beluga");
    }
    if y.porpoise {
        parts.push("porpoise");
    }
    if parts.is_empty() {
        String::from("none")
    } else {
        parts.join("+")
    }
}

impl MetricsReport {
    pub fn compute(preds: &[LabelVector], truth: &[LabelVector]) -> Result<Self, MetricsError> {
        let (per_class, macro_f1) = per_class_prf(preds, truth)?;
        Ok(Self {
            joint_accuracy: joint_accuracy(preds, truth)?,
            hamming_multilabel: hamming_loss(preds, truth, HammingMode::Multilabel)?,
            hamming_multiclass: hamming_loss(preds, truth, HammingMode::Multiclass)?,
            per_class,
            macro_f1,
            confusion: confusion_matrix_8(preds, truth)?,
            n_samples: preds.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lv(w: u8, b: u8, p: u8) -> LabelVector {
        LabelVector::new(w != 0, b != 0, p != 0)
    }

    fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<LabelVector> {
        (0..n)
            .map(|_| lv(rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0..2)))
            .collect()
    }

    #[test]
    fn joint_encoding_examples() {
        assert_eq!(label_to_joint(lv(0, 0, 0)).index(), 0);
        assert_eq!(label_to_joint(lv(1, 0, 1)).index(), 5);
        assert_eq!(label_to_joint(lv(1, 1, 1)).index(), 7);
    }

    #[test]
    fn joint_encoding_is_a_bijection() {
        for i in 0..8 {
            let c = JointClass::new(i).unwrap();
            assert_eq!(label_to_joint(joint_to_label(c)).index(), i);
        }
        assert!(JointClass::new(8).is_err());
    }

    #[test]
    fn joint_accuracy_definition() {
        let truth = vec![lv(1, 0, 0), lv(0, 1, 0), lv(0, 0, 1), lv(1, 1, 1)];
        let preds = vec![lv(1, 0, 0), lv(1, 1, 0), lv(0, 1, 1), lv(1, 1, 0)];
        assert_eq!(joint_accuracy(&preds, &truth).unwrap(), 0.25);
        assert_eq!(joint_accuracy(&truth, &truth).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch_and_empty_are_errors() {
        let a = vec![lv(1, 0, 0)];
        assert!(matches!(
            joint_accuracy(&a, &[]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert_eq!(joint_accuracy(&[], &[]).unwrap_err(), MetricsError::Empty);
    }

    #[test]
    fn hamming_modes_differ_as_defined() {
        let truth = vec![lv(1, 0, 0)];
        let preds = vec![lv(1, 1, 0)];
        assert!(
            (hamming_loss(&preds, &truth, HammingMode::Multilabel).unwrap() - 1.0 / 3.0).abs()
                < 1e-15
        );
        assert_eq!(
            hamming_loss(&preds, &truth, HammingMode::Multiclass).unwrap(),
            1.0
        );
        assert_eq!(hamming_loss(&truth, &truth, HammingMode::Multilabel).unwrap(), 0.0);
        assert_eq!(hamming_loss(&truth, &truth, HammingMode::Multiclass).unwrap(), 0.0);
    }

    #[test]
    fn joint_accuracy_matches_bruteforce_oracle_on_random_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let n = rng.gen_range(1..100);
            let preds = random_labels(&mut rng, n);
            let truth = random_labels(&mut rng, n);
            // independent oracle: per-sample comparison loop
            let mut hits = 0usize;
            for i in 0..n {
                if preds[i].whistle == truth[i].whistle
                    && preds[i].beluga == truth[i].beluga
                    && preds[i].porpoise == truth[i].porpoise
                {
                    hits += 1;
                }
            }
            assert_eq!(
                joint_accuracy(&preds, &truth).unwrap(),
                hits as f64 / n as f64
            );
        }
    }

    #[test]
    fn prf_matches_contingency_oracle_on_random_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..80);
            let preds = random_labels(&mut rng, n);
            let truth = random_labels(&mut rng, n);
            let (prf, macro_f1) = per_class_prf(&preds, &truth).unwrap();
            let mut oracle_macro = 0.0;
            for k in 0..3 {
                let mut tp = 0.0;
                let mut fp = 0.0;
                let mut fn_ = 0.0;
                for i in 0..n {
                    let p = preds[i].components()[k];
                    let t = truth[i].components()[k];
                    if p && t {
                        tp += 1.0;
                    }
                    if p && !t {
                        fp += 1.0;
                    }
                    if !p && t {
                        fn_ += 1.0;
                    }
                }
                let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
                let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
                let f1 = if prec + rec > 0.0 {
                    2.0 * prec * rec / (prec + rec)
                } else {
                    0.0
                };
                assert_eq!(prf[k].precision, prec);
                assert_eq!(prf[k].recall, rec);
                assert_eq!(prf[k].f1, f1);
                oracle_macro += f1;
            }
            assert_eq!(macro_f1, oracle_macro / 3.0);
        }
    }

    #[test]
    fn absent_and_never_predicted_class_scores_zero_by_convention() {
        let truth = vec![lv(1, 0, 0), lv(1, 0, 0)];
        let preds = vec![lv(1, 0, 0), lv(1, 0, 0)];
        let (prf, macro_f1) = per_class_prf(&preds, &truth).unwrap();
        assert_eq!(prf[0].f1, 1.0);
        assert_eq!(
            prf[1],
            Prf {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0
            }
        );
        assert_eq!(
            prf[2],
            Prf {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0
            }
        );
        assert!((macro_f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn confusion_matrix_counts_and_row_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 500;
        let preds = random_labels(&mut rng, n);
        let truth = random_labels(&mut rng, n);
        let m = confusion_matrix_8(&preds, &truth).unwrap();
        let total: u64 = m.iter().flatten().sum();
        assert_eq!(total as usize, n);
        for t in 0..8 {
            let row_sum: u64 = m[t].iter().sum();
            let true_count = truth
                .iter()
                .filter(|y| label_to_joint(**y).index() == t)
                .count() as u64;
            assert_eq!(row_sum, true_count);
        }
    }

    #[test]
    fn diagonal_confusion_iff_perfect_joint_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = random_labels(&mut rng, 64);
        let m = confusion_matrix_8(&truth, &truth).unwrap();
        for t in 0..8 {
            for p in 0..8 {
                if t != p {
                    assert_eq!(m[t][p], 0);
                }
            }
        }
        assert_eq!(joint_accuracy(&truth, &truth).unwrap(), 1.0);
    }

    #[test]
    fn iou_conventions() {
        let m = Grid::from_vec(2, 2, vec![1u8, 0, 0, 1]);
        assert_eq!(iou(&m, &m), 1.0);
        let a = Grid::from_vec(2, 2, vec![1u8, 0, 0, 0]);
        let b = Grid::from_vec(2, 2, vec![0u8, 1, 0, 0]);
        assert_eq!(iou(&a, &b), 0.0);
        let e = Grid::from_vec(2, 2, vec![0u8; 4]);
        assert_eq!(iou(&e, &e), 1.0);
        assert_eq!(iou(&a, &e), 0.0);
    }

    #[test]
    fn joint_class_names_are_stable() {
        assert_eq!(joint_class_name(JointClass::new(0).unwrap()), "none");
        assert_eq!(joint_class_name(JointClass::new(5).unwrap()), "whistle+porpoise");
        assert_eq!(
            joint_class_name(JointClass::new(7).unwrap()),
            "whistle+beluga+porpoise"
        );
    }

    proptest! {
        #[test]
        fn metrics_are_invariant_under_sample_permutation(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..60usize);
            let preds = random_labels(&mut rng, n);
            let truth = random_labels(&mut rng, n);
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            let preds_p: Vec<_> = order.iter().map(|&i| preds[i]).collect();
            let truth_p: Vec<_> = order.iter().map(|&i| truth[i]).collect();
            let a = MetricsReport::compute(&preds, &truth).unwrap();
            let b = MetricsReport::compute(&preds_p, &truth_p).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn subset_accuracy_bound_and_hamming_identity(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..60usize);
            let preds = random_labels(&mut rng, n);
            let truth = random_labels(&mut rng, n);
            let ja = joint_accuracy(&preds, &truth).unwrap();
            for k in 0..3 {
                let comp_acc = preds
                    .iter()
                    .zip(truth.iter())
                    .filter(|(p, t)| p.components()[k] == t.components()[k])
                    .count() as f64
                    / n as f64;
                prop_assert!(ja <= comp_acc + 1e-15);
            }
            let hm = hamming_loss(&preds, &truth, HammingMode::Multiclass).unwrap();
            prop_assert!((ja - (1.0 - hm)).abs() < 1e-12);
            let hl = hamming_loss(&preds, &truth, HammingMode::Multilabel).unwrap();
            prop_assert!(hl <= hm + 1e-15);
        }
    }
}
