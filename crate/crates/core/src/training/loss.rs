use super::{Result, TrainError};
use crate::autodiff::Tensor;
use crate::metrics::EPS_DIV;

/// `mean(|pred − gt| / max(gt, 1e-8))`; the reference is treated as constant.
pub fn mrae_loss(pred: &Tensor, gt: &Tensor) -> Result<Tensor> {
    if pred.shape() != gt.shape() {
        return Err(TrainError::ShapeMismatch(format!("prediction {:?} vs reference {:?}", pred.shape(), gt.shape())));
    }
    let n = gt.numel() as f64;
    let weights: Vec<f64> = gt.data().iter().map(|&g| 1.0 / (g.max(EPS_DIV) * n)).collect();
    let w = Tensor::new(weights, gt.shape())?;
    Ok(pred.sub(&gt.detach())?.abs().mul(&w)?.sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_for_exact() {
        let g = Tensor::new(vec![0.5, 0.2], &[2]).unwrap();
        assert_eq!(mrae_loss(&g, &g).unwrap().item(), 0.0);
    }

    #[test]
    fn ten_percent() {
        let g = Tensor::new(vec![1.0, 2.0, 4.0], &[3]).unwrap();
        let p = Tensor::new(vec![1.1, 2.2, 4.4], &[3]).unwrap();
        let oracle: f64 = [(1.1, 1.0), (2.2, 2.0), (4.4, 4.0)].iter().map(|(p, g): &(f64, f64)| (p - g).abs() / g).sum::<f64>() / 3.0;
        assert!((mrae_loss(&p, &g).unwrap().item() - oracle).abs() < 1e-12);
        assert!((oracle - 0.1).abs() < 1e-12);
    }

    #[test]
    fn gradcheck() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g: Vec<f64> = (0..12).map(|_| rng.random_range(0.2..1.0)).collect();
            // keep predictions away from the |·| kink
            let p: Vec<f64> = g.iter().map(|v| v + if rng.random::<bool>() { 0.1 } else { -0.1 }).collect();
            let gt = Tensor::new(g, &[3, 2, 2]).unwrap();
            let pred = Tensor::leaf(p, &[3, 2, 2]).unwrap();
            let f = |t: &[Tensor]| mrae_loss(&t[0], &gt);
            assert!(grad_check(f, &[pred]).unwrap() < 1e-3);
        }
    }

    #[test]
    fn shape_mismatch() {
        let a = Tensor::zeros(&[2]);
        let b = Tensor::zeros(&[3]);
        assert!(matches!(mrae_loss(&a, &b), Err(TrainError::ShapeMismatch(_))));
    }
}
