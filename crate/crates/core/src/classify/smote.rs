use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ClassifyError, FeatureMatrix, Result};

pub const DEFAULT_K_NEIGHBORS: usize = 5;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Oversamples the minority class up to the majority count.
///
/// Each synthetic row is `x + u·(x_nn − x)` for a uniformly drawn minority
/// row `x`, one of its `k` nearest minority neighbours `x_nn` and
/// `u ~ U(0, 1)`. Originals keep their positions; synthetics are appended.
pub fn smote(x: &FeatureMatrix, k: usize, seed: u64) -> Result<FeatureMatrix> {
    if k == 0 {
        return Err(ClassifyError::InvalidConfig("k must be at least 1".into()));
    }
    let counts = x.class_counts();
    if counts[0] == counts[1] {
        return Ok(x.clone());
    }
    let minority = if counts[1] < counts[0] { 1u8 } else { 0u8 };
    let members: Vec<usize> = (0..x.rows()).filter(|&i| x.labels()[i] == minority).collect();
    if members.len() < 2 {
        return Err(ClassifyError::SingletonMinority);
    }
    let k = k.min(members.len() - 1);
    let neighbours: Vec<Vec<usize>> = members
        .iter()
        .map(|&i| {
            let mut others: Vec<(f64, usize)> = members
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (sq_dist(x.row(i), x.row(j)), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let needed = counts[1 - minority as usize] - members.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = x.values().to_vec();
    let mut labels = x.labels().to_vec();
    for _ in 0..needed {
        let m = rng.random_range(0..members.len());
        let nn = neighbours[m][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let base = x.row(members[m]);
        values.extend(base.iter().zip(x.row(nn)).map(|(a, b)| a + u * (b - a)));
        labels.push(minority);
    }
    FeatureMatrix::new(values, x.cols(), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn imbalanced(n_major: usize, n_minor: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_major + n_minor {
            let shift = if i < n_major { 0.0 } else { 2.0 };
            rows.push((0..4).map(|_| nd.sample(&mut rng) + shift).collect());
            labels.push(u8::from(i >= n_major));
        }
        FeatureMatrix::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn balances_93_9() {
        let x = imbalanced(93, 9, 1);
        let y = smote(&x, 5, 7).unwrap();
        assert_eq!(y.class_counts(), [93, 93]);
        for i in 0..x.rows() {
            assert_eq!(x.row(i), y.row(i));
            assert_eq!(x.labels()[i], y.labels()[i]);
        }
    }

    #[test]
    fn balanced_is_unchanged() {
        let x = imbalanced(5, 5, 2);
        assert_eq!(smote(&x, 5, 0).unwrap(), x);
    }

    #[test]
    fn singleton_minority() {
        let x = imbalanced(5, 1, 3);
        assert_eq!(smote(&x, 5, 0), Err(ClassifyError::SingletonMinority));
    }

    #[test]
    fn synthetics_lie_on_minority_segments() {
        let x = imbalanced(40, 6, 4);
        let y = smote(&x, 3, 11).unwrap();
        let minority: Vec<&[f64]> = (0..x.rows()).filter(|&i| x.labels()[i] == 1).map(|i| x.row(i)).collect();
        for s in x.rows()..y.rows() {
            let p = y.row(s);
            let on_segment = minority.iter().any(|a| {
                minority.iter().any(|b| {
                    let d: Vec<f64> = b.iter().zip(*a).map(|(b, a)| b - a).collect();
                    let dd: f64 = d.iter().map(|v| v * v).sum();
                    if dd == 0.0 {
                        return false;
                    }
                    let t: f64 = p.iter().zip(*a).zip(&d).map(|((p, a), d)| (p - a) * d).sum::<f64>() / dd;
                    let resid: f64 = p.iter().zip(*a).zip(&d).map(|((p, a), d)| (p - a - t * d).powi(2)).sum();
                    (-1e-12..=1.0 + 1e-12).contains(&t) && resid < 1e-18
                })
            });
            assert!(on_segment, "synthetic row {s} is off every minority segment");
        }
    }

    #[test]
    fn k_is_clamped() {
        let x = imbalanced(10, 2, 5);
        let y = smote(&x, 5, 1).unwrap();
        assert_eq!(y.class_counts(), [10, 10]);
    }
}
