//! Spatial ops on single `C × H × W` feature maps.

use super::{AutodiffError, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Default for Conv2dSpec {
    fn default() -> Self {
        Self {
            stride: 1,
            padding: 0,
            groups: 1,
        }
    }
}

impl Conv2dSpec {
    /// Stride 1 with "same" padding for an odd kernel.
    pub fn same(kernel: usize) -> Self {
        Self {
            stride: 1,
            padding: kernel / 2,
            groups: 1,
        }
    }

    pub fn depthwise(kernel: usize, channels: usize) -> Self {
        Self {
            groups: channels,
            ..Self::same(kernel)
        }
    }
}

#[derive(Clone, Copy)]
struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    cin_per_group: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    pad: usize,
    cout_per_group: usize,
}

impl Geometry {
    /// Output columns `ox` for kernel column `kx` whose input column is in range.
    #[inline]
    fn col_range(&self, kx: usize) -> (usize, usize) {
        let (s, p) = (self.stride, self.pad);
        // ix = ox*s + kx - p must lie in [0, w)
        let lo = if kx >= p { 0 } else { (p - kx).div_ceil(s) };
        let hi = if self.w + p > kx {
            ((self.w - 1 + p - kx) / s + 1).min(self.wo)
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    #[inline]
    fn input_row(&self, oy: usize, ky: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
        (iy >= 0 && (iy as usize) < self.h).then_some(iy as usize)
    }
}

fn conv_forward(x: &[f64], w: &[f64], bias: Option<&[f64]>, g: Geometry) -> Vec<f64> {
    let plane = g.ho * g.wo;
    let mut out = vec![0.0; g.c_out * plane];
    for co in 0..g.c_out {
        let grp = co / g.cout_per_group;
        let o = &mut out[co * plane..(co + 1) * plane];
        if let Some(b) = bias {
            o.fill(b[co]);
        }
        for cl in 0..g.cin_per_group {
            let ci = grp * g.cin_per_group + cl;
            let xin = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
            for ky in 0..g.kh {
                for kx in 0..g.kw {
                    let wv = w[((co * g.cin_per_group + cl) * g.kh + ky) * g.kw + kx];
                    let (lo, hi) = g.col_range(kx);
                    for oy in 0..g.ho {
                        let Some(iy) = g.input_row(oy, ky) else { continue };
                        let orow = &mut o[oy * g.wo..(oy + 1) * g.wo];
                        let irow = &xin[iy * g.w..(iy + 1) * g.w];
                        if g.stride == 1 {
                            let off = kx as isize - g.pad as isize;
                            let src = &irow[(lo as isize + off) as usize..(hi as isize + off) as usize];
                            for (ov, &iv) in orow[lo..hi].iter_mut().zip(src) {
                                *ov += wv * iv;
                            }
                        } else {
                            for (ox, ov) in orow.iter_mut().enumerate().take(hi).skip(lo) {
                                *ov += wv * irow[ox * g.stride + kx - g.pad];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_grad_input(go: &[f64], w: &[f64], g: Geometry) -> Vec<f64> {
    let plane = g.ho * g.wo;
    let mut gi = vec![0.0; g.c_in * g.h * g.w];
    for co in 0..g.c_out {
        let grp = co / g.cout_per_group;
        let gop = &go[co * plane..(co + 1) * plane];
        for cl in 0..g.cin_per_group {
            let ci = grp * g.cin_per_group + cl;
            let gin = &mut gi[ci * g.h * g.w..(ci + 1) * g.h * g.w];
            for ky in 0..g.kh {
                for kx in 0..g.kw {
                    let wv = w[((co * g.cin_per_group + cl) * g.kh + ky) * g.kw + kx];
                    let (lo, hi) = g.col_range(kx);
                    for oy in 0..g.ho {
                        let Some(iy) = g.input_row(oy, ky) else { continue };
                        let grow = &gop[oy * g.wo..(oy + 1) * g.wo];
                        let irow = &mut gin[iy * g.w..(iy + 1) * g.w];
                        if g.stride == 1 {
                            let off = kx as isize - g.pad as isize;
                            let dst = &mut irow[(lo as isize + off) as usize..(hi as isize + off) as usize];
                            for (iv, &gv) in dst.iter_mut().zip(&grow[lo..hi]) {
                                *iv += wv * gv;
                            }
                        } else {
                            for ox in lo..hi {
                                irow[ox * g.stride + kx - g.pad] += wv * grow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
    gi
}

fn conv_grad_weight(go: &[f64], x: &[f64], g: Geometry) -> Vec<f64> {
    let plane = g.ho * g.wo;
    let mut gw = vec![0.0; g.c_out * g.cin_per_group * g.kh * g.kw];
    for co in 0..g.c_out {
        let grp = co / g.cout_per_group;
        let gop = &go[co * plane..(co + 1) * plane];
        for cl in 0..g.cin_per_group {
            let ci = grp * g.cin_per_group + cl;
            let xin = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
            for ky in 0..g.kh {
                for kx in 0..g.kw {
                    let (lo, hi) = g.col_range(kx);
                    let mut acc = 0.0;
                    for oy in 0..g.ho {
                        let Some(iy) = g.input_row(oy, ky) else { continue };
                        let grow = &gop[oy * g.wo..(oy + 1) * g.wo];
                        let irow = &xin[iy * g.w..(iy + 1) * g.w];
                        if g.stride == 1 {
                            let off = kx as isize - g.pad as isize;
                            let src = &irow[(lo as isize + off) as usize..(hi as isize + off) as usize];
                            acc += grow[lo..hi].iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                        } else {
                            for ox in lo..hi {
                                acc += grow[ox] * irow[ox * g.stride + kx - g.pad];
                            }
                        }
                    }
                    gw[((co * g.cin_per_group + cl) * g.kh + ky) * g.kw + kx] = acc;
                }
            }
        }
    }
    gw
}

impl Tensor {
    /// 2-D cross-correlation (no kernel flip) with zero padding.
    ///
    /// `self` is `[C_in, H, W]`, `weight` is `[C_out, C_in / groups, kh, kw]`
    /// and `bias`, when given, is `[C_out]`.
    pub fn conv2d(&self, weight: &Tensor, bias: Option<&Tensor>, spec: Conv2dSpec) -> Result<Tensor> {
        let mismatch = || AutodiffError::ShapeMismatch {
            op: "conv2d",
            lhs: self.shape().to_vec(),
            rhs: weight.shape().to_vec(),
        };
        let (c_in, h, w) = match *self.shape() {
            [c, h, w] => (c, h, w),
            _ => return Err(mismatch()),
        };
        let (c_out, cin_per_group, kh, kw) = match *weight.shape() {
            [a, b, c, d] => (a, b, c, d),
            _ => return Err(mismatch()),
        };
        let groups = spec.groups.max(1);
        if c_in % groups != 0 || c_out % groups != 0 {
            return Err(AutodiffError::IndivisibleDims {
                op: "conv2d",
                dims: vec![c_in, c_out],
                factor: groups,
            });
        }
        if cin_per_group != c_in / groups {
            return Err(mismatch());
        }
        if let Some(b) = bias {
            if b.shape() != [c_out] {
                return Err(AutodiffError::ShapeMismatch {
                    op: "conv2d bias",
                    lhs: vec![c_out],
                    rhs: b.shape().to_vec(),
                });
            }
        }
        let stride = spec.stride.max(1);
        let (span_h, span_w) = (h + 2 * spec.padding, w + 2 * spec.padding);
        if span_h < kh || span_w < kw || (span_h - kh) % stride != 0 || (span_w - kw) % stride != 0 {
            return Err(AutodiffError::NonIntegralOutput {
                op: "conv2d",
                detail: format!("input {h}x{w}, kernel {kh}x{kw}, stride {stride}, padding {}", spec.padding),
            });
        }
        let geo = Geometry {
            c_in,
            h,
            w,
            c_out,
            cin_per_group,
            kh,
            kw,
            ho: (span_h - kh) / stride + 1,
            wo: (span_w - kw) / stride + 1,
            stride,
            pad: spec.padding,
            cout_per_group: c_out / groups,
        };
        let data = conv_forward(self.data(), weight.data(), bias.map(|b| b.data()), geo);
        let (x, wt) = (self.clone(), weight.clone());
        let mut parents = vec![self.clone(), weight.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        let plane = geo.ho * geo.wo;
        Ok(Tensor::from_op(
            "conv2d",
            data,
            vec![c_out, geo.ho, geo.wo],
            parents,
            move |g, _, needs| {
                let mut grads = vec![
                    needs[0].then(|| conv_grad_input(g, wt.data(), geo)),
                    needs[1].then(|| conv_grad_weight(g, x.data(), geo)),
                ];
                if needs.len() == 3 {
                    grads.push(needs[2].then(|| g.chunks_exact(plane).map(|p| p.iter().sum()).collect()));
                }
                grads
            },
        ))
    }

    /// `[C·r², H, W] -> [C, rH, rW]` with `out[c][h·r+i][w·r+j] = in[c·r²+i·r+j][h][w]`.
    pub fn pixel_shuffle(&self, r: usize) -> Result<Tensor> {
        let (cr2, h, w) = match *self.shape() {
            [c, h, w] => (c, h, w),
            _ => {
                return Err(AutodiffError::ShapeMismatch {
                    op: "pixel_shuffle",
                    lhs: self.shape().to_vec(),
                    rhs: vec![],
                })
            }
        };
        if r == 0 || cr2 % (r * r) != 0 {
            return Err(AutodiffError::IndivisibleDims {
                op: "pixel_shuffle",
                dims: vec![cr2],
                factor: r * r,
            });
        }
        let c = cr2 / (r * r);
        let map = shuffle_map(c, h, w, r);
        let mut data = vec![0.0; self.numel()];
        for (src, &dst) in map.iter().enumerate() {
            data[dst] = self.data()[src];
        }
        Ok(Tensor::from_op("pixel_shuffle", data, vec![c, h * r, w * r], vec![self.clone()], move |g, _, _| {
            vec![Some(map.iter().map(|&dst| g[dst]).collect())]
        }))
    }

    /// Inverse of [`Tensor::pixel_shuffle`]: `[C, rH, rW] -> [C·r², H, W]`.
    pub fn pixel_unshuffle(&self, r: usize) -> Result<Tensor> {
        let (c, hr, wr) = match *self.shape() {
            [c, h, w] => (c, h, w),
            _ => {
                return Err(AutodiffError::ShapeMismatch {
                    op: "pixel_unshuffle",
                    lhs: self.shape().to_vec(),
                    rhs: vec![],
                })
            }
        };
        if r == 0 || hr % r != 0 || wr % r != 0 {
            return Err(AutodiffError::IndivisibleDims {
                op: "pixel_unshuffle",
                dims: vec![hr, wr],
                factor: r,
            });
        }
        let (h, w) = (hr / r, wr / r);
        // map[src in unshuffled layout] = index in the spatial layout
        let map = shuffle_map(c, h, w, r);
        let data: Vec<f64> = map.iter().map(|&s| self.data()[s]).collect();
        let n = self.numel();
        Ok(Tensor::from_op("pixel_unshuffle", data, vec![c * r * r, h, w], vec![self.clone()], move |g, _, _| {
            let mut out = vec![0.0; n];
            for (src, &dst) in map.iter().enumerate() {
                out[dst] = g[src];
            }
            vec![Some(out)]
        }))
    }

    /// Spatial window `[C, h0..h0+h, w0..w0+w]`.
    pub fn crop(&self, h0: usize, w0: usize, h: usize, w: usize) -> Result<Tensor> {
        let (c, hh, ww) = match *self.shape() {
            [c, a, b] if h0 + h <= a && w0 + w <= b => (c, a, b),
            _ => {
                return Err(AutodiffError::ShapeMismatch {
                    op: "crop",
                    lhs: self.shape().to_vec(),
                    rhs: vec![h0 + h, w0 + w],
                })
            }
        };
        let mut data = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            for y in h0..h0 + h {
                let base = (ch * hh + y) * ww + w0;
                data.extend_from_slice(&self.data()[base..base + w]);
            }
        }
        Ok(Tensor::from_op("crop", data, vec![c, h, w], vec![self.clone()], move |g, _, _| {
            let mut out = vec![0.0; c * hh * ww];
            for ch in 0..c {
                for y in 0..h {
                    let base = (ch * hh + y + h0) * ww + w0;
                    out[base..base + w].copy_from_slice(&g[(ch * h + y) * w..(ch * h + y + 1) * w]);
                }
            }
            vec![Some(out)]
        }))
    }
}

/// Mirror index for position `i` on an axis of length `n` (edge not repeated).
fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let j = i % period;
    if j < n { j } else { period - j }
}

impl Tensor {
    /// Extends a `[C, H, W]` map by `bottom` rows and `right` columns of mirrored values.
    pub fn pad_reflect(&self, bottom: usize, right: usize) -> Result<Tensor> {
        let (c, h, w) = match *self.shape() {
            [c, h, w] if h > 0 && w > 0 => (c, h, w),
            _ => {
                return Err(AutodiffError::ShapeMismatch {
                    op: "pad_reflect",
                    lhs: self.shape().to_vec(),
                    rhs: vec![],
                })
            }
        };
        let (ho, wo) = (h + bottom, w + right);
        let mut map = Vec::with_capacity(c * ho * wo);
        for ch in 0..c {
            for y in 0..ho {
                for x in 0..wo {
                    map.push((ch * h + reflect(y, h)) * w + reflect(x, w));
                }
            }
        }
        let data = map.iter().map(|&j| self.data()[j]).collect();
        let n = self.numel();
        Ok(Tensor::from_op("pad_reflect", data, vec![c, ho, wo], vec![self.clone()], move |g, _, _| {
            let mut out = vec![0.0; n];
            for (gv, &j) in g.iter().zip(&map) {
                out[j] += gv;
            }
            vec![Some(out)]
        }))
    }
}

/// For each element of the `[C·r², H, W]` layout, its index in `[C, rH, rW]`.
fn shuffle_map(c: usize, h: usize, w: usize, r: usize) -> Vec<usize> {
    let (ho, wo) = (h * r, w * r);
    let mut map = Vec::with_capacity(c * r * r * h * w);
    for ch in 0..c {
        for i in 0..r {
            for j in 0..r {
                for y in 0..h {
                    for x in 0..w {
                        map.push((ch * ho + y * r + i) * wo + x * r + j);
                    }
                }
            }
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Direct nested-loop cross-correlation oracle.
    #[allow(clippy::too_many_arguments)]
    fn conv_oracle(
        x: &[f64], (c_in, h, w): (usize, usize, usize),
        k: &[f64], (c_out, kh, kw): (usize, usize, usize),
        b: Option<&[f64]>, s: usize, p: usize, groups: usize,
    ) -> Vec<f64> {
        let ho = (h + 2 * p - kh) / s + 1;
        let wo = (w + 2 * p - kw) / s + 1;
        let cpg = c_in / groups;
        let opg = c_out / groups;
        let mut out = vec![0.0; c_out * ho * wo];
        for co in 0..c_out {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = b.map_or(0.0, |b| b[co]);
                    for cl in 0..cpg {
                        let ci = (co / opg) * cpg + cl;
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * s + ky) as isize - p as isize;
                                let ix = (ox * s + kx) as isize - p as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += k[((co * cpg + cl) * kh + ky) * kw + kx]
                                    * x[(ci * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    out[(co * ho + oy) * wo + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn ones_kernel_example() {
        let x = Tensor::new(vec![1.0; 9], &[1, 3, 3]).unwrap();
        let k = Tensor::new(vec![1.0; 4], &[1, 1, 2, 2]).unwrap();
        let y = x.conv2d(&k, None, Conv2dSpec::default()).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert_eq!(y.data(), &[4.0; 4]);
    }

    #[test]
    fn identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::new(rand_vec(&mut rng, 2 * 4 * 5), &[2, 4, 5]).unwrap();
        let k = Tensor::new(vec![1.0, 0.0, 0.0, 1.0], &[2, 2, 1, 1]).unwrap();
        assert_eq!(x.conv2d(&k, None, Conv2dSpec::default()).unwrap().data(), x.data());
    }

    #[test]
    fn non_integral_and_group_errors() {
        let x = Tensor::zeros(&[2, 4, 4]);
        let k = Tensor::zeros(&[1, 2, 3, 3]);
        let spec = Conv2dSpec { stride: 2, padding: 0, groups: 1 };
        assert!(matches!(x.conv2d(&k, None, spec), Err(AutodiffError::NonIntegralOutput { .. })));
        let k3 = Tensor::zeros(&[3, 1, 1, 1]);
        let spec = Conv2dSpec { stride: 1, padding: 0, groups: 2 };
        assert!(matches!(x.conv2d(&k3, None, spec), Err(AutodiffError::IndivisibleDims { .. })));
    }

    #[test]
    fn conv_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let configs = [
            (4, 6, 7, 6, 3, 3, 1, 1, 1),
            (4, 6, 7, 4, 3, 3, 1, 1, 4),
            (2, 7, 7, 3, 3, 3, 2, 1, 1),
            (3, 5, 6, 2, 1, 1, 1, 0, 1),
            (2, 6, 7, 4, 2, 3, 2, 2, 2),
        ];
        for (c_in, h, w, c_out, kh, kw, s, p, g) in configs {
            let x = rand_vec(&mut rng, c_in * h * w);
            let k = rand_vec(&mut rng, c_out * (c_in / g) * kh * kw);
            let b = rand_vec(&mut rng, c_out);
            let xt = Tensor::new(x.clone(), &[c_in, h, w]).unwrap();
            let kt = Tensor::new(k.clone(), &[c_out, c_in / g, kh, kw]).unwrap();
            let bt = Tensor::new(b.clone(), &[c_out]).unwrap();
            let spec = Conv2dSpec { stride: s, padding: p, groups: g };
            let y = xt.conv2d(&kt, Some(&bt), spec).unwrap();
            let expected = conv_oracle(&x, (c_in, h, w), &k, (c_out, kh, kw), Some(&b), s, p, g);
            assert_eq!(y.numel(), expected.len());
            for (a, e) in y.data().iter().zip(&expected) {
                assert!((a - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn conv_gradcheck() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
            let (c_in, c_out, g) = if seed % 2 == 0 { (2, 3, 1) } else { (4, 4, 2) };
            let stride = if seed % 3 == 0 { 2 } else { 1 };
            let (h, w) = if stride == 2 { (7, 5) } else { (5, 6) };
            let x = Tensor::leaf(rand_vec(&mut rng, c_in * h * w), &[c_in, h, w]).unwrap();
            let k = Tensor::leaf(rand_vec(&mut rng, c_out * (c_in / g) * 9), &[c_out, c_in / g, 3, 3]).unwrap();
            let b = Tensor::leaf(rand_vec(&mut rng, c_out), &[c_out]).unwrap();
            let readout = rand_vec(&mut rng, 4096);
            let spec = Conv2dSpec { stride, padding: 1, groups: g };
            let f = move |t: &[Tensor]| -> Result<Tensor> {
                let y = t[0].conv2d(&t[1], Some(&t[2]), spec)?;
                let r = Tensor::new(readout[..y.numel()].to_vec(), y.shape())?;
                Ok(y.mul(&r)?.sum())
            };
            let err = grad_check(&f, &[x, k, b]).unwrap();
            assert!(err < 1e-3, "seed {seed}: {err}");
        }
    }

    #[test]
    fn conv_relu_mean_gradcheck() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let x = Tensor::leaf(rand_vec(&mut rng, 2 * 5 * 5), &[2, 5, 5]).unwrap();
            let k = Tensor::leaf(rand_vec(&mut rng, 3 * 2 * 9), &[3, 2, 3, 3]).unwrap();
            let f = |t: &[Tensor]| -> Result<Tensor> { Ok(t[0].conv2d(&t[1], None, Conv2dSpec::same(3))?.relu().mean()) };
            let err = grad_check(&f, &[x, k]).unwrap();
            assert!(err < 1e-3, "seed {seed}: {err}");
        }
    }

    #[test]
    fn shuffle_examples() {
        let t = Tensor::new(vec![1.0, 2.0, 3.0, 4.0], &[4, 1, 1]).unwrap();
        let s = t.pixel_shuffle(2).unwrap();
        assert_eq!(s.shape(), &[1, 2, 2]);
        assert_eq!(s.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            Tensor::zeros(&[3, 2, 2]).pixel_shuffle(2),
            Err(AutodiffError::IndivisibleDims { .. })
        ));
        assert!(matches!(
            Tensor::zeros(&[1, 3, 4]).pixel_unshuffle(2),
            Err(AutodiffError::IndivisibleDims { .. })
        ));
    }

    #[test]
    fn shuffle_index_formula() {
        let (c, h, w, r) = (2, 3, 2, 3);
        let vals: Vec<f64> = (0..c * r * r * h * w).map(|i| i as f64).collect();
        let t = Tensor::new(vals.clone(), &[c * r * r, h, w]).unwrap();
        let s = t.pixel_shuffle(r).unwrap();
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    for i in 0..r {
                        for j in 0..r {
                            let out = s.data()[(ch * h * r + y * r + i) * w * r + x * r + j];
                            let inp = vals[((ch * r * r + i * r + j) * h + y) * w + x];
                            assert_eq!(out, inp);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn shuffle_unshuffle_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::new(rand_vec(&mut rng, 3 * 8 * 6), &[3, 8, 6]).unwrap();
        let round = x.pixel_unshuffle(2).unwrap().pixel_shuffle(2).unwrap();
        assert_eq!(round.data(), x.data());
        let y = Tensor::new(rand_vec(&mut rng, 12 * 2 * 3), &[12, 2, 3]).unwrap();
        assert_eq!(y.pixel_shuffle(2).unwrap().pixel_unshuffle(2).unwrap().data(), y.data());
    }

    #[test]
    fn shuffle_and_crop_gradcheck() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let x = Tensor::leaf(rand_vec(&mut rng, 8 * 2 * 3), &[8, 2, 3]).unwrap();
            let readout = rand_vec(&mut rng, 64);
            let f = move |t: &[Tensor]| -> Result<Tensor> {
                let y = t[0].pixel_shuffle(2)?.crop(1, 0, 3, 5)?.pixel_unshuffle(1)?;
                let z = t[0].pixel_shuffle(2)?.pixel_unshuffle(2)?;
                let r = Tensor::new(readout[..y.numel()].to_vec(), y.shape())?;
                let rz = Tensor::new(readout[..z.numel()].to_vec(), z.shape())?;
                y.mul(&r)?.sum().add(&z.mul(&z)?.mul(&rz)?.sum())
            };
            let err = grad_check(&f, &[x]).unwrap();
            assert!(err < 1e-3, "seed {seed}: {err}");
        }
    }

    #[test]
    fn reflect_padding() {
        let t = Tensor::new(vec![1.0, 2.0, 3.0], &[1, 1, 3]).unwrap();
        assert_eq!(t.pad_reflect(0, 3).unwrap().data(), &[1.0, 2.0, 3.0, 2.0, 1.0, 2.0]);
        let col = Tensor::new(vec![4.0, 5.0], &[1, 2, 1]).unwrap();
        assert_eq!(col.pad_reflect(1, 1).unwrap().data(), &[4.0, 4.0, 5.0, 5.0, 4.0, 4.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = Tensor::leaf(rand_vec(&mut rng, 2 * 3 * 4), &[2, 3, 4]).unwrap();
        let readout = rand_vec(&mut rng, 2 * 5 * 7);
        let f = move |t: &[Tensor]| -> Result<Tensor> {
            let y = t[0].pad_reflect(2, 3)?;
            y.mul(&Tensor::new(readout.clone(), y.shape())?).map(|z| z.sum())
        };
        assert!(grad_check(&f, &[x]).unwrap() < 1e-3);
    }
}
