//! External clustering scores against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Labeling;

/// Counts of items per (true class, predicted cluster).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    counts: Vec<Vec<usize>>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
    total: usize,
}

impl ContingencyTable {
    pub fn new(truth: &Labeling, pred: &Labeling) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                actual: pred.len(),
            });
        }
        let mut counts = vec![vec![0; pred.k()]; truth.k()];
        for (&t, &p) in truth.labels().iter().zip(pred.labels()) {
            counts[t][p] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..pred.k()).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            total: truth.len(),
        })
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[usize] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[usize] {
        &self.col_sums
    }

    pub fn total(&self) -> usize {
        self.total
    }

    fn entropy(marginal: &[usize], total: usize) -> f64 {
        let n = total as f64;
        marginal
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    }

    /// Entropy of the true classes, in nats.
    pub fn truth_entropy(&self) -> f64 {
        Self::entropy(&self.row_sums, self.total)
    }

    /// Entropy of the predicted clusters, in nats.
    pub fn pred_entropy(&self) -> f64 {
        Self::entropy(&self.col_sums, self.total)
    }

    /// `I(T; P)` in nats.
    pub fn mutual_information(&self) -> f64 {
        let n = self.total as f64;
        let mut mi = 0.0;
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                if c > 0 {
                    let c = c as f64;
                    mi += c / n * (n * c / (self.row_sums[t] as f64 * self.col_sums[p] as f64)).ln();
                }
            }
        }
        mi.max(0.0)
    }
}

fn pairs(n: usize) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}

/// Fraction of item pairs on which both labelings agree (together or apart).
pub fn rand_index(truth: &Labeling, pred: &Labeling) -> Result<f64> {
    let table = ContingencyTable::new(truth, pred)?;
    if table.total() < 2 {
        return Err(Error::invalid("rand index needs at least 2 items"));
    }
    let together_both: u128 = table.counts().iter().flatten().map(|&c| pairs(c)).sum();
    let together_truth: u128 = table.row_sums().iter().map(|&c| pairs(c)).sum();
    let together_pred: u128 = table.col_sums().iter().map(|&c| pairs(c)).sum();
    let all = pairs(table.total());
    let agree = all + 2 * together_both - together_truth - together_pred;
    Ok(agree as f64 / all as f64)
}

/// Mutual information in nats; when `normalized`, divided by
/// `sqrt(H(T) H(P))`. Two constant labelings score 1 normalized; one
/// constant labeling against a varying one scores 0.
pub fn mutual_information(truth: &Labeling, pred: &Labeling, normalized: bool) -> Result<f64> {
    let table = ContingencyTable::new(truth, pred)?;
    let mi = table.mutual_information();
    if !normalized {
        return Ok(mi);
    }
    let (ht, hp) = (table.truth_entropy(), table.pred_entropy());
    Ok(match (ht > 0.0, hp > 0.0) {
        (false, false) => 1.0,
        (true, true) => (mi / (ht * hp).sqrt()).min(1.0),
        _ => 0.0,
    })
}

/// Homogeneity and completeness, each 1 when the conditioning side has zero
/// entropy.
pub fn homogeneity_completeness(truth: &Labeling, pred: &Labeling) -> Result<(f64, f64)> {
    let table = ContingencyTable::new(truth, pred)?;
    let mi = table.mutual_information();
    let (ht, hp) = (table.truth_entropy(), table.pred_entropy());
    // H(T|P) = H(T) - I, so 1 - H(T|P)/H(T) = I/H(T).
    let h = if ht > 0.0 { (mi / ht).min(1.0) } else { 1.0 };
    let c = if hp > 0.0 { (mi / hp).min(1.0) } else { 1.0 };
    Ok((h, c))
}

/// Harmonic mean of homogeneity and completeness.
pub fn v_measure(truth: &Labeling, pred: &Labeling) -> Result<f64> {
    let (h, c) = homogeneity_completeness(truth, pred)?;
    Ok(if h + c > 0.0 { 2.0 * h * c / (h + c) } else { 0.0 })
}

/// RI, normalized MI and V-measure in one row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub ri: f64,
    pub mi: f64,
    pub vm: f64,
}

impl Scores {
    pub fn compute(truth: &Labeling, pred: &Labeling) -> Result<Self> {
        Ok(Self {
            ri: rand_index(truth, pred)?,
            mi: mutual_information(truth, pred, true)?,
            vm: v_measure(truth, pred)?,
        })
    }

    pub fn min(&self) -> f64 {
        self.ri.min(self.mi).min(self.vm)
    }
}

const EXHAUSTIVE_LIMIT: usize = 8;

fn permutations(n: usize, mut visit: impl FnMut(&[usize])) {
    // Heap-free lexicographic enumeration.
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        visit(&perm);
        let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return;
        };
        let j = (i..n).rev().find(|&j| perm[j] > perm[i - 1]).expect("successor exists");
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
}

/// Renames predicted clusters after the true classes they overlap most.
///
/// Up to 8 clusters the total overlap is maximized over all one-to-one
/// matchings (lexicographically smallest true ids on ties); beyond that
/// clusters are matched greedily by largest overlap. Unmatched clusters get
/// fresh ids after the true ones. For display only: metrics are computed on
/// the raw labels.
pub fn align_labels_for_display(truth: &Labeling, pred: &Labeling) -> Result<Labeling> {
    let table = ContingencyTable::new(truth, pred)?;
    let (rt, rp) = (truth.k(), pred.k());
    let n = rt.max(rp);
    let overlap = |t: usize, p: usize| if t < rt && p < rp { table.counts()[t][p] } else { 0 };
    let mut mapping: Vec<usize>;
    if n <= EXHAUSTIVE_LIMIT {
        let mut best_total = None;
        mapping = (0..n).collect();
        permutations(n, |perm| {
            let total: usize = (0..n).map(|p| overlap(perm[p], p)).sum();
            if best_total.is_none_or(|b| total > b) {
                best_total = Some(total);
                mapping.copy_from_slice(perm);
            }
        });
    } else {
        let mut cells: Vec<(usize, usize, usize)> = (0..rt)
            .flat_map(|t| (0..rp).map(move |p| (t, p)))
            .map(|(t, p)| (overlap(t, p), t, p))
            .collect();
        cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        mapping = vec![usize::MAX; rp];
        let mut used = vec![false; n];
        for (_, t, p) in cells {
            if mapping[p] == usize::MAX && !used[t] {
                mapping[p] = t;
                used[t] = true;
            }
        }
        let mut fresh = (0..n).filter(|&t| !used[t]);
        for m in mapping.iter_mut().filter(|m| **m == usize::MAX) {
            *m = fresh.next().expect("enough ids");
        }
    }
    let labels = pred.labels().iter().map(|&p| mapping[p]).collect();
    Labeling::new(labels, n)
}
