use serde::{Deserialize, Serialize};

use super::tree::{best_split, Tree, TreeNode};
use super::{ClassifyError, FeatureMatrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub l2_lambda: f64,
    pub gamma_min_gain: f64,
    /// The exact-greedy learner is deterministic; the seed is recorded for provenance.
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 4,
            l2_lambda: 1.0,
            gamma_min_gain: 0.0,
            seed: 0,
        }
    }
}

impl BoostConfig {
    fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 || self.max_depth == 0 {
            return Err(ClassifyError::InvalidConfig("boosting counts must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(ClassifyError::InvalidConfig(format!("learning rate {} not in (0, 1]", self.learning_rate)));
        }
        if !(self.l2_lambda >= 0.0) || !(self.gamma_min_gain >= 0.0) {
            return Err(ClassifyError::InvalidConfig("regularization must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Booster {
    base_margin: f64,
    trees: Vec<Tree>,
    cols: usize,
    /// Mean logistic loss on the training set after each round.
    pub train_loss: Vec<f64>,
}

fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

fn logistic_loss(margins: &[f64], y: &[u8]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(y)
        .map(|(&m, &l)| {
            // log(1 + e^m) - y m, computed stably
            let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            softplus - l as f64 * m
        })
        .sum();
    total / margins.len() as f64
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    gh: &'a [[f64; 2]],
    cfg: &'a BoostConfig,
    features: Vec<usize>,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let (g, h) = idx.iter().fold((0.0, 0.0), |(g, h), &i| (g + self.gh[i][0], h + self.gh[i][1]));
        let lambda = self.cfg.l2_lambda;
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf(-g / (h + lambda) * self.cfg.learning_rate));
        if depth >= self.cfg.max_depth || idx.len() < 2 {
            return at;
        }
        let parent = g * g / (h + lambda);
        let gamma = self.cfg.gamma_min_gain;
        let score = |l: [f64; 2], r: [f64; 2], _: usize, _: usize| {
            let gain = 0.5 * (l[0] * l[0] / (l[1] + lambda) + r[0] * r[0] / (r[1] + lambda) - parent) - gamma;
            (gain > 0.0).then_some(gain)
        };
        let Some(split) = best_split(self.x, idx, self.gh, &self.features, score) else {
            return at;
        };
        let left = self.grow(&split.left, depth + 1);
        let right = self.grow(&split.right, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

/// Additive second-order trees on the logistic loss.
pub fn fit_boost(x: &FeatureMatrix, cfg: &BoostConfig) -> Result<Booster> {
    cfg.validate()?;
    x.check_both_classes()?;
    let y = x.labels();
    let [n0, n1] = x.class_counts();
    let base_margin = (n1 as f64 / n0 as f64).ln();
    let mut margins = vec![base_margin; x.rows()];
    let idx: Vec<usize> = (0..x.rows()).collect();
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    let mut train_loss = Vec::with_capacity(cfg.n_rounds);
    for _ in 0..cfg.n_rounds {
        let gh: Vec<[f64; 2]> = margins
            .iter()
            .zip(y)
            .map(|(&m, &l)| {
                let p = sigmoid(m);
                [p - l as f64, p * (1.0 - p)]
            })
            .collect();
        let mut grower = Grower {
            x,
            gh: &gh,
            cfg,
            features: (0..x.cols()).collect(),
            nodes: Vec::new(),
        };
        grower.grow(&idx, 0);
        let tree = Tree { nodes: grower.nodes };
        for (i, m) in margins.iter_mut().enumerate() {
            *m += tree.predict_row(x.row(i));
        }
        trees.push(tree);
        train_loss.push(logistic_loss(&margins, y));
    }
    Ok(Booster {
        base_margin,
        trees,
        cols: x.cols(),
        train_loss,
    })
}

impl Booster {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    /// Labels at probability threshold 0.5 (exactly 0.5 → class 0) and class-1 probabilities.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<(Vec<u8>, Vec<f64>)> {
        x.check_cols(self.cols)?;
        let probs: Vec<f64> = (0..x.rows()).map(|i| sigmoid(self.margin(x.row(i)))).collect();
        Ok((probs.iter().map(|&p| u8::from(p > 0.5)).collect(), probs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_non_increasing() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let labels = (0..40).map(|i| u8::from((i as f64 * 0.37).sin() + 0.3 * (i as f64 * 0.11).cos() > 0.1)).collect();
        let x = FeatureMatrix::from_rows(&rows, labels).unwrap();
        let b = fit_boost(&x, &BoostConfig::default()).unwrap();
        let base = logistic_loss(&vec![b.base_margin; 40], x.labels());
        let mut prev = base;
        for &l in &b.train_loss {
            assert!(l <= prev + 1e-12, "{l} > {prev}");
            prev = l;
        }
        assert!(prev < 0.5 * base);
    }

    #[test]
    fn two_point_recall() {
        let x = FeatureMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], vec![0, 1]).unwrap();
        let b = fit_boost(&x, &BoostConfig::default()).unwrap();
        assert_eq!(b.predict(&x).unwrap().0, vec![0, 1]);
    }

    #[test]
    fn invalid_learning_rate() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]], vec![0, 1]).unwrap();
        let cfg = BoostConfig { learning_rate: 1.5, ..Default::default() };
        assert!(matches!(fit_boost(&x, &cfg), Err(ClassifyError::InvalidConfig(_))));
    }
}
