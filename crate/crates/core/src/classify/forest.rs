use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{best_split, Tree, TreeNode};
use super::{ClassifyError, FeatureMatrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    /// `None` means `ceil(sqrt(cols))`.
    pub features_per_split: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: Some(8),
            features_per_split: None,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_leaf == 0 || self.features_per_split == Some(0) || self.max_depth == Some(0) {
            return Err(ClassifyError::InvalidConfig("forest counts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    cols: usize,
}

fn gini(n: f64, ones: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = ones / n;
    2.0 * p * (1.0 - p)
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    stats: Vec<[f64; 2]>,
    cfg: &'a ForestConfig,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let n = idx.len() as f64;
        let ones: f64 = idx.iter().map(|&i| self.stats[i][1]).sum();
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf(ones / n));
        let pure = ones == 0.0 || ones == n;
        if pure || self.cfg.max_depth.is_some_and(|d| depth >= d) || idx.len() < 2 * self.cfg.min_leaf {
            return at;
        }
        let cols = self.x.cols();
        let chosen = sample(&mut self.rng, cols, self.mtry).into_vec();
        let min_leaf = self.cfg.min_leaf;
        let score = |l: [f64; 2], r: [f64; 2], nl: usize, nr: usize| {
            (nl >= min_leaf && nr >= min_leaf).then(|| -(l[0] * gini(l[0], l[1]) + r[0] * gini(r[0], r[1])))
        };
        let mut split = best_split(self.x, idx, &self.stats, &chosen, score);
        if split.is_none() && self.mtry < cols {
            // every sampled feature is constant here; fall back to the rest
            let rest: Vec<usize> = (0..cols).filter(|f| !chosen.contains(f)).collect();
            split = best_split(self.x, idx, &self.stats, &rest, score);
        }
        let Some(split) = split else { return at };
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

/// Bagged Gini trees with random feature subsets per split.
pub fn fit_forest(x: &FeatureMatrix, cfg: &ForestConfig) -> Result<Forest> {
    cfg.validate()?;
    x.check_both_classes()?;
    let cols = x.cols();
    let mtry = cfg
        .features_per_split
        .unwrap_or_else(|| (cols as f64).sqrt().ceil() as usize)
        .min(cols);
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for t in 0..cfg.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(t as u64);
        let idx: Vec<usize> = if cfg.bootstrap {
            (0..x.rows()).map(|_| rng.random_range(0..x.rows())).collect()
        } else {
            (0..x.rows()).collect()
        };
        let mut grower = Grower {
            x,
            stats: x.labels().iter().map(|&l| [1.0, l as f64]).collect(),
            cfg,
            mtry,
            rng,
            nodes: Vec::new(),
        };
        grower.grow(&idx, 0);
        trees.push(Tree { nodes: grower.nodes });
    }
    Ok(Forest { trees, cols })
}

impl Forest {
    #[cfg(test)]
    pub(crate) fn from_trees(trees: Vec<Tree>, cols: usize) -> Self {
        Self { trees, cols }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Majority vote (ties go to class 0) and the class-1 vote share.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<(Vec<u8>, Vec<f64>)> {
        x.check_cols(self.cols)?;
        let mut labels = Vec::with_capacity(x.rows());
        let mut scores = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let votes = self.trees.iter().filter(|t| t.predict_row(x.row(i)) > 0.5).count();
            labels.push(u8::from(2 * votes > self.trees.len()));
            scores.push(votes as f64 / self.trees.len() as f64);
        }
        Ok((labels, scores))
    }
}
