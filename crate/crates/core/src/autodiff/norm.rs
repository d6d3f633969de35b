//! Per-axis normalizations.

use super::{AutodiffError, Result, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// `(outer, dim, inner)` so that element `(o, d, i)` sits at `(o*dim + d)*inner + i`.
fn lanes(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(AutodiffError::InvalidAxis {
            axis,
            shape: shape.to_vec(),
        });
    }
    Ok((
        shape[..axis].iter().product(),
        shape[axis],
        shape[axis + 1..].iter().product(),
    ))
}

/// Calls `f(lane_values_indices)` for each lane along the axis.
fn for_each_lane(outer: usize, dim: usize, inner: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; dim];
    for o in 0..outer {
        for i in 0..inner {
            for (d, slot) in idx.iter_mut().enumerate() {
                *slot = (o * dim + d) * inner + i;
            }
            f(&idx);
        }
    }
}

impl Tensor {
    /// Normalizes each lane along `axis` to zero mean and unit (biased)
    /// variance, then applies `gamma * x + beta` with both of shape `[dim]`.
    pub fn layer_norm(&self, axis: usize, gamma: &Tensor, beta: &Tensor) -> Result<Tensor> {
        let (outer, dim, inner) = lanes(self.shape(), axis)?;
        for p in [gamma, beta] {
            if p.shape() != [dim] {
                return Err(AutodiffError::ShapeMismatch {
                    op: "layer_norm",
                    lhs: vec![dim],
                    rhs: p.shape().to_vec(),
                });
            }
        }
        let x = self.data();
        let (gm, bt) = (gamma.data(), beta.data());
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = Vec::with_capacity(outer * inner);
        let mut out = vec![0.0; x.len()];
        for_each_lane(outer, dim, inner, |idx| {
            let mean = idx.iter().map(|&j| x[j]).sum::<f64>() / dim as f64;
            let var = idx.iter().map(|&j| (x[j] - mean).powi(2)).sum::<f64>() / dim as f64;
            let r = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(r);
            for (d, &j) in idx.iter().enumerate() {
                xhat[j] = (x[j] - mean) * r;
                out[j] = xhat[j] * gm[d] + bt[d];
            }
        });
        let gamma_c = gamma.clone();
        Ok(Tensor::from_op(
            "layer_norm",
            out,
            self.shape().to_vec(),
            vec![self.clone(), gamma.clone(), beta.clone()],
            move |g, _, needs| {
                let gm = gamma_c.data();
                let mut gx = needs[0].then(|| vec![0.0; g.len()]);
                let mut gg = vec![0.0; dim];
                let mut gb = vec![0.0; dim];
                let mut lane = 0;
                let mut dxhat = vec![0.0; dim];
                for_each_lane(outer, dim, inner, |idx| {
                    for (d, &j) in idx.iter().enumerate() {
                        gg[d] += g[j] * xhat[j];
                        gb[d] += g[j];
                        dxhat[d] = g[j] * gm[d];
                    }
                    if let Some(gx) = gx.as_mut() {
                        let m1 = dxhat.iter().sum::<f64>() / dim as f64;
                        let m2 = idx.iter().zip(&dxhat).map(|(&j, &v)| v * xhat[j]).sum::<f64>() / dim as f64;
                        let r = inv_std[lane];
                        for (d, &j) in idx.iter().enumerate() {
                            gx[j] = r * (dxhat[d] - m1 - xhat[j] * m2);
                        }
                    }
                    lane += 1;
                });
                vec![gx, needs[1].then_some(gg), needs[2].then_some(gb)]
            },
        ))
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        let (outer, dim, inner) = lanes(self.shape(), axis)?;
        let x = self.data();
        let mut out = vec![0.0; x.len()];
        for_each_lane(outer, dim, inner, |idx| {
            let max = idx.iter().map(|&j| x[j]).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for &j in idx {
                out[j] = (x[j] - max).exp();
                z += out[j];
            }
            for &j in idx {
                out[j] /= z;
            }
        });
        Ok(Tensor::from_op("softmax", out, self.shape().to_vec(), vec![self.clone()], move |g, y, _| {
            let mut gx = vec![0.0; g.len()];
            for_each_lane(outer, dim, inner, |idx| {
                let dot: f64 = idx.iter().map(|&j| g[j] * y[j]).sum();
                for &j in idx {
                    gx[j] = y[j] * (g[j] - dot);
                }
            });
            vec![Some(gx)]
        }))
    }

    /// Divides each lane along `axis` by `max(||lane||_2, eps)`.
    pub fn l2_normalize(&self, axis: usize, eps: f64) -> Result<Tensor> {
        let (outer, dim, inner) = lanes(self.shape(), axis)?;
        let x = self.data();
        let mut out = vec![0.0; x.len()];
        let mut norms = Vec::with_capacity(outer * inner);
        for_each_lane(outer, dim, inner, |idx| {
            let n = idx.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt();
            norms.push(n);
            let d = n.max(eps);
            for &j in idx {
                out[j] = x[j] / d;
            }
        });
        Ok(Tensor::from_op("l2_normalize", out, self.shape().to_vec(), vec![self.clone()], move |g, y, _| {
            let mut gx = vec![0.0; g.len()];
            let mut lane = 0;
            for_each_lane(outer, dim, inner, |idx| {
                let n = norms[lane];
                lane += 1;
                if n > eps {
                    let dot: f64 = idx.iter().map(|&j| g[j] * y[j]).sum();
                    for &j in idx {
                        gx[j] = (g[j] - y[j] * dot) / n;
                    }
                } else {
                    for &j in idx {
                        gx[j] = g[j] / eps;
                    }
                }
            });
            vec![Some(gx)]
        }))
    }
}
