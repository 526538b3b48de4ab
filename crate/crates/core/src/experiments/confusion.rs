use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-normalized actual (rows) vs predicted (columns) tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<u64>>,
    pub values: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn class_counts(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Diagonal weighted by class frequency.
    pub fn weighted_accuracy(&self, class_counts: &[u64]) -> f64 {
        let total: u64 = class_counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        (0..self.n_classes)
            .map(|c| self.values[c][c] * class_counts[c] as f64)
            .sum::<f64>()
            / total as f64
    }

    pub fn write_csv<W: Write>(&self, labels: &[String], mut out: W) -> std::io::Result<()> {
        let name = |i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
        write!(out, "actual\\predicted")?;
        for c in 0..self.n_classes {
            write!(out, ",{}", name(c))?;
        }
        writeln!(out)?;
        for (r, row) in self.values.iter().enumerate() {
            write!(out, "{}", name(r))?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }
}

pub fn confusion_matrix(predictions: &[usize], labels: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= n_classes || l >= n_classes {
            return Err(Error::Index {
                index: p.max(l),
                len: n_classes,
            });
        }
        counts[l][p] += 1;
    }
    let values = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            row.iter()
                .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                .collect()
        })
        .collect();
    Ok(ConfusionMatrix {
        n_classes,
        counts,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn soil_row_pattern() {
        // 100 "Soil Hgs inhomogeneous" items (class 9): 72 right, 28 called "Soil-1" (class 8)
        let labels = vec![9usize; 100];
        let preds: Vec<usize> = (0..100).map(|i| if i < 72 { 9 } else { 8 }).collect();
        let cm = confusion_matrix(&preds, &labels, 12).unwrap();
        assert_eq!(cm.values[9][9], 0.72);
        assert_eq!(cm.values[9][8], 0.28);
        assert!(cm.values[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn perfect_predictions_identity() {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let cm = confusion_matrix(&labels, &labels, 4).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(cm.values[r][c], if r == c { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn random_pairs_match_tally() {
        let mut rng = seeded(50);
        let preds: Vec<usize> = (0..50).map(|_| rng.random_range(0..5)).collect();
        let labels: Vec<usize> = (0..50).map(|_| rng.random_range(0..5)).collect();
        let cm = confusion_matrix(&preds, &labels, 5).unwrap();
        for r in 0..5 {
            let row_total = labels.iter().filter(|&&l| l == r).count();
            for c in 0..5 {
                let n = preds.iter().zip(&labels).filter(|(&p, &l)| l == r && p == c).count();
                assert_eq!(cm.counts[r][c], n as u64);
                let expect = if row_total == 0 { 0.0 } else { n as f64 / row_total as f64 };
                assert_eq!(cm.values[r][c], expect);
            }
            let sum: f64 = cm.values[r].iter().sum();
            assert!(row_total == 0 || (sum - 1.0).abs() < 1e-9);
        }
        let acc = preds.iter().zip(&labels).filter(|(p, l)| p == l).count() as f64 / 50.0;
        assert!((cm.weighted_accuracy(&cm.class_counts()) - acc).abs() < 1e-9);
    }

    #[test]
    fn length_mismatch_and_range() {
        assert!(confusion_matrix(&[0, 1], &[0], 2).is_err());
        assert!(confusion_matrix(&[2], &[0], 2).is_err());
    }
}
