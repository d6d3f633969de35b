//! Binary decision tree storage and exact split search shared by both ensembles.

use super::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TreeNode {
    Leaf(f64),
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted tree; leaves hold a class-1 fraction (forest) or a margin
/// increment (boosting).
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<TreeNode>,
}

impl Tree {
    #[cfg(test)]
    pub(crate) fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf(value)],
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf(v) => return v,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf(_) => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf(_))).count()
    }
}

pub(crate) struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Exhaustive threshold scan over `features` for the samples in `idx`.
///
/// Every sample carries an additive 2-vector statistic. `score(left, right,
/// n_left, n_right)` returns `None` for an inadmissible split; the highest
/// score wins and ties keep the earliest candidate.
pub(crate) fn best_split(
    x: &FeatureMatrix,
    idx: &[usize],
    stats: &[[f64; 2]],
    features: &[usize],
    score: impl Fn([f64; 2], [f64; 2], usize, usize) -> Option<f64>,
) -> Option<Split> {
    let total = idx.iter().fold([0.0, 0.0], |acc, &i| [acc[0] + stats[i][0], acc[1] + stats[i][1]]);
    let mut best: Option<(usize, f64, f64)> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let mut left = [0.0, 0.0];
        for pos in 0..order.len() - 1 {
            let s = stats[order[pos]];
            left = [left[0] + s[0], left[1] + s[1]];
            let (lo, hi) = (x.get(order[pos], f), x.get(order[pos + 1], f));
            if lo == hi {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let Some(sc) = score(left, right, pos + 1, order.len() - pos - 1) else {
                continue;
            };
            if best.is_none_or(|(_, _, b)| sc > b) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some((f, threshold, sc));
            }
        }
    }
    best.map(|(feature, threshold, _)| {
        let (left, right) = idx.iter().partition(|&&i| x.get(i, feature) <= threshold);
        Split {
            feature,
            threshold,
            left,
            right,
        }
    })
}
