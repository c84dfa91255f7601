//! Binary and multi-label classification metrics.

use std::fmt::Write as _;
use serde::Serialize;

/// Area under the ROC curve via the rank-sum statistic, ties sharing the
/// average rank. `None` when either class is absent.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let pos = pos as f64;
    Some((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg as f64))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub base_rate: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    /// Over all (item, label) pairs.
    pub accuracy: f64,
    pub macro_auc: f64,
    pub micro_auc: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub per_label: Vec<LabelMetrics>,
}

/// Multi-label report at a fixed decision `threshold`.
///
/// `scores[i][l]` and `labels[i][l]` index item `i`, label `l`. Labels with
/// no positive (or no negative) gold items have no AUC and are left out of
/// the macro averages; they still count toward the micro figures.
pub fn classification_report(scores: &[Vec<f64>], labels: &[Vec<bool>], names: &[String], threshold: f64) -> ClassificationReport {
    let n_labels = names.len();
    let mut micro = Confusion::default();
    let mut per_label = Vec::with_capacity(n_labels);
    for (l, name) in names.iter().enumerate() {
        let s: Vec<f64> = scores.iter().map(|r| r[l]).collect();
        let g: Vec<bool> = labels.iter().map(|r| r[l]).collect();
        let mut c = Confusion::default();
        for (&v, &y) in s.iter().zip(&g) {
            c.add(v >= threshold, y);
            micro.add(v >= threshold, y);
        }
        let support = g.iter().filter(|&&y| y).count();
        per_label.push(LabelMetrics {
            name: name.clone(),
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            auc: roc_auc(&s, &g),
            base_rate: ratio(support, g.len()),
            support,
        });
    }
    let flat_s: Vec<f64> = scores.iter().flatten().copied().collect();
    let flat_g: Vec<bool> = labels.iter().flatten().copied().collect();
    let defined: Vec<&LabelMetrics> = per_label.iter().filter(|m| m.auc.is_some()).collect();
    let mean = |f: &dyn Fn(&LabelMetrics) -> f64| {
        if defined.is_empty() {
            0.0
        } else {
            defined.iter().map(|m| f(m)).sum::<f64>() / defined.len() as f64
        }
    };
    ClassificationReport {
        accuracy: micro.accuracy(),
        macro_auc: mean(&|m| m.auc.unwrap_or(0.0)),
        micro_auc: roc_auc(&flat_s, &flat_g).unwrap_or(0.5),
        macro_f1: mean(&|m| m.f1),
        micro_f1: micro.f1(),
        per_label,
    }
}

impl ClassificationReport {
    pub fn summary_tsv(&self) -> String {
        format!(
            "accuracy\tmacro_auc\tmicro_auc\tmacro_f1\tmicro_f1\n{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
            self.accuracy, self.macro_auc, self.micro_auc, self.macro_f1, self.micro_f1
        )
    }

    pub fn per_label_tsv(&self) -> String {
        let mut out = String::from("label\tprecision\trecall\tf1\tauc\tbase_rate\tsupport\n");
        for m in &self.per_label {
            let auc = m.auc.map(|a| format!("{a:.4}")).unwrap_or_else(|| "NA".into());
            let _ = writeln!(
                out,
                "{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{:.4}\t{}",
                m.name, m.precision, m.recall, m.f1, auc, m.base_rate, m.support
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fraction of (positive, negative) pairs ranked correctly, ties half.
    fn auc_by_pairs(s: &[f64], y: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] && !y[j] {
                    den += 1.0;
                    num += if s[i] > s[j] {
                        1.0
                    } else if s[i] == s[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn constant_scores_give_half() {
        assert_eq!(roc_auc(&[0.3; 4], &[true, false, true, false]), Some(0.5));
    }

    #[test]
    fn single_class_has_no_auc() {
        assert_eq!(roc_auc(&[0.1, 0.2], &[false, false]), None);
    }

    #[test]
    fn hand_fixture() {
        // six items, two labels
        let scores = vec![
            vec![0.9, 0.1],
            vec![0.8, 0.6],
            vec![0.4, 0.7],
            vec![0.6, 0.2],
            vec![0.2, 0.4],
            vec![0.1, 0.3],
        ];
        let labels = vec![
            vec![true, false],
            vec![true, true],
            vec![false, true],
            vec![false, false],
            vec![true, false],
            vec![false, false],
        ];
        let names = vec!["a".to_string(), "b".to_string()];
        let r = classification_report(&scores, &labels, &names, 0.5);
        // label a: pos {0.9,0.8,0.2}, neg {0.4,0.6,0.1}: 7 of 9 pairs ordered
        assert!((r.per_label[0].auc.unwrap() - 7.0 / 9.0).abs() < 1e-12);
        // label a at 0.5: predicted {0,1,3}; tp=2 fp=1 fn=1
        assert!((r.per_label[0].precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_label[0].recall - 2.0 / 3.0).abs() < 1e-12);
        // label b: pos {0.6,0.7}, neg {0.1,0.2,0.4,0.3}: all 8 ordered
        assert_eq!(r.per_label[1].auc, Some(1.0));
        // label b at 0.5: predicted {1,2} = gold
        assert_eq!(r.per_label[1].f1, 1.0);
        // micro: tp 4, fp 1, fn 1, tn 6 over 12 pairs
        assert!((r.micro_f1 - 8.0 / 10.0).abs() < 1e-12);
        assert!((r.accuracy - 10.0 / 12.0).abs() < 1e-12);
        assert!((r.macro_f1 - (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-12);
        let flat_s: Vec<f64> = scores.iter().flatten().copied().collect();
        let flat_y: Vec<bool> = labels.iter().flatten().copied().collect();
        assert!((r.micro_auc - auc_by_pairs(&flat_s, &flat_y)).abs() < 1e-12);
    }

    #[test]
    fn perfect_scores() {
        let scores = vec![vec![1.0], vec![0.0], vec![1.0]];
        let labels = vec![vec![true], vec![false], vec![true]];
        let r = classification_report(&scores, &labels, &["x".into()], 0.5);
        assert_eq!((r.accuracy, r.micro_auc, r.macro_auc, r.micro_f1, r.macro_f1), (1.0, 1.0, 1.0, 1.0, 1.0));
    }

    proptest::proptest! {
        #[test]
        fn rank_auc_matches_pair_count(v in proptest::collection::vec((0u8..5, proptest::bool::ANY), 2..30)) {
            let s: Vec<f64> = v.iter().map(|(x, _)| *x as f64).collect();
            let y: Vec<bool> = v.iter().map(|(_, b)| *b).collect();
            if let Some(a) = roc_auc(&s, &y) {
                proptest::prop_assert!((a - auc_by_pairs(&s, &y)).abs() < 1e-12);
            }
        }
    }
}
