use super::{numel, AutodiffError, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnaryOp {
    Relu,
    /// tanh approximation
    Gelu,
    Sigmoid,
    Abs,
    Neg,
    Scale(f64),
    AddScalar(f64),
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Sum of `g` over the broadcast (scalar) operand.
fn reduce_to(g: Vec<f64>, len: usize) -> Vec<f64> {
    if len == g.len() {
        g
    } else {
        vec![g.iter().sum()]
    }
}

impl Tensor {
    pub fn binary(&self, op: BinaryOp, rhs: &Tensor) -> Result<Tensor> {
        let (a, b) = (self.data(), rhs.data());
        let shape = if self.shape() == rhs.shape() || rhs.numel() == 1 {
            self.shape().to_vec()
        } else if self.numel() == 1 {
            rhs.shape().to_vec()
        } else {
            return Err(AutodiffError::ShapeMismatch {
                op: "binary",
                lhs: self.shape().to_vec(),
                rhs: rhs.shape().to_vec(),
            });
        };
        let n = numel(&shape);
        let ai = |i: usize| if a.len() == 1 { a[0] } else { a[i] };
        let bi = |i: usize| if b.len() == 1 { b[0] } else { b[i] };
        let f: fn(f64, f64) -> f64 = match op {
            BinaryOp::Add => |x, y| x + y,
            BinaryOp::Sub => |x, y| x - y,
            BinaryOp::Mul => |x, y| x * y,
            BinaryOp::Div => |x, y| x / y,
        };
        let data: Vec<f64> = if a.len() == n && b.len() == n {
            a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
        } else {
            (0..n).map(|i| f(ai(i), bi(i))).collect()
        };
        let (lhs, rhs_t) = (self.clone(), rhs.clone());
        let name = match op {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        };
        Ok(Tensor::from_op(name, data, shape, vec![self.clone(), rhs.clone()], move |g, _out, needs| {
            let (a, b) = (lhs.data(), rhs_t.data());
            let ai = |i: usize| if a.len() == 1 { a[0] } else { a[i] };
            let bi = |i: usize| if b.len() == 1 { b[0] } else { b[i] };
            let (ga, gb): (Option<Vec<f64>>, Option<Vec<f64>>) = match op {
                BinaryOp::Add => (needs[0].then(|| g.to_vec()), needs[1].then(|| g.to_vec())),
                BinaryOp::Sub => (needs[0].then(|| g.to_vec()), needs[1].then(|| g.iter().map(|v| -v).collect())),
                BinaryOp::Mul => (
                    needs[0].then(|| g.iter().enumerate().map(|(i, gv)| gv * bi(i)).collect()),
                    needs[1].then(|| g.iter().enumerate().map(|(i, gv)| gv * ai(i)).collect()),
                ),
                BinaryOp::Div => (
                    needs[0].then(|| g.iter().enumerate().map(|(i, gv)| gv / bi(i)).collect()),
                    needs[1].then(|| {
                        g.iter()
                            .enumerate()
                            .map(|(i, gv)| -gv * ai(i) / (bi(i) * bi(i)))
                            .collect()
                    }),
                ),
            };
            vec![ga.map(|v| reduce_to(v, a.len())), gb.map(|v| reduce_to(v, b.len()))]
        }))
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary(BinaryOp::Add, rhs)
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary(BinaryOp::Sub, rhs)
    }

    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary(BinaryOp::Mul, rhs)
    }

    pub fn div(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary(BinaryOp::Div, rhs)
    }

    pub fn unary(&self, op: UnaryOp) -> Tensor {
        let f = |x: f64| -> f64 {
            match op {
                UnaryOp::Relu => x.max(0.0),
                UnaryOp::Gelu => gelu(x),
                UnaryOp::Sigmoid => 1.0 / (1.0 + (-x).exp()),
                UnaryOp::Abs => x.abs(),
                UnaryOp::Neg => -x,
                UnaryOp::Scale(c) => c * x,
                UnaryOp::AddScalar(c) => x + c,
            }
        };
        let data = self.data().iter().map(|&x| f(x)).collect();
        let input = self.clone();
        let name = match op {
            UnaryOp::Relu => "relu",
            UnaryOp::Gelu => "gelu",
            UnaryOp::Sigmoid => "sigmoid",
            UnaryOp::Abs => "abs",
            UnaryOp::Neg => "neg",
            UnaryOp::Scale(_) => "scale",
            UnaryOp::AddScalar(_) => "add_scalar",
        };
        Tensor::from_op(name, data, self.shape().to_vec(), vec![self.clone()], move |g, out, _| {
            let x = input.data();
            let dx: Vec<f64> = match op {
                UnaryOp::Relu => g.iter().zip(x).map(|(g, &x)| if x > 0.0 { *g } else { 0.0 }).collect(),
                UnaryOp::Gelu => g.iter().zip(x).map(|(g, &x)| g * gelu_grad(x)).collect(),
                UnaryOp::Sigmoid => g.iter().zip(out).map(|(g, &s)| g * s * (1.0 - s)).collect(),
                UnaryOp::Abs => g
                    .iter()
                    .zip(x)
                    .map(|(g, &x)| if x > 0.0 { *g } else if x < 0.0 { -g } else { 0.0 })
                    .collect(),
                UnaryOp::Neg => g.iter().map(|g| -g).collect(),
                UnaryOp::Scale(c) => g.iter().map(|g| c * g).collect(),
                UnaryOp::AddScalar(_) => g.to_vec(),
            };
            vec![Some(dx)]
        })
    }

    pub fn relu(&self) -> Tensor {
        self.unary(UnaryOp::Relu)
    }

    pub fn gelu(&self) -> Tensor {
        self.unary(UnaryOp::Gelu)
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(UnaryOp::Sigmoid)
    }

    pub fn abs(&self) -> Tensor {
        self.unary(UnaryOp::Abs)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.unary(UnaryOp::Scale(c))
    }

    pub fn sum(&self) -> Tensor {
        let s: f64 = self.data().iter().sum();
        let n = self.numel();
        Tensor::from_op("sum", vec![s], vec![], vec![self.clone()], move |g, _, _| vec![Some(vec![g[0]; n])])
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel();
        let s: f64 = self.data().iter().sum::<f64>() / n as f64;
        Tensor::from_op("mean", vec![s], vec![], vec![self.clone()], move |g, _, _| {
            vec![Some(vec![g[0] / n as f64; n])]
        })
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() {
            return Err(AutodiffError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Tensor::from_op("reshape", self.to_vec(), shape.to_vec(), vec![self.clone()], |g, _, _| {
            vec![Some(g.to_vec())]
        }))
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        match (self.shape(), rhs.shape()) {
            (&[m, k], &[k2, n]) if k == k2 => {
                let lhs3 = self.reshape(&[1, m, k])?;
                let rhs3 = rhs.reshape(&[1, k, n])?;
                lhs3.bmm(&rhs3)?.reshape(&[m, n])
            }
            _ => Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape().to_vec(),
                rhs: rhs.shape().to_vec(),
            }),
        }
    }

    /// Batched `[b, m, k] x [b, k, n] -> [b, m, n]`.
    pub fn bmm(&self, rhs: &Tensor) -> Result<Tensor> {
        let (b, m, k, n) = match (self.shape(), rhs.shape()) {
            (&[b, m, k], &[b2, k2, n]) if b == b2 && k == k2 => (b, m, k, n),
            _ => {
                return Err(AutodiffError::ShapeMismatch {
                    op: "bmm",
                    lhs: self.shape().to_vec(),
                    rhs: rhs.shape().to_vec(),
                })
            }
        };
        let data = bmm_raw(self.data(), rhs.data(), b, m, k, n);
        let (lhs, rhs_t) = (self.clone(), rhs.clone());
        Ok(Tensor::from_op("bmm", data, vec![b, m, n], vec![self.clone(), rhs.clone()], move |g, _, needs| {
            // dA = dC . B^T ; dB = A^T . dC
            let ga = needs[0].then(|| {
                let bt = transpose_raw(rhs_t.data(), b, k, n);
                bmm_raw(g, &bt, b, m, n, k)
            });
            let gb = needs[1].then(|| {
                let at = transpose_raw(lhs.data(), b, m, k);
                bmm_raw(&at, g, b, k, m, n)
            });
            vec![ga, gb]
        }))
    }

    /// Swaps the last two axes.
    pub fn transpose(&self) -> Result<Tensor> {
        let s = self.shape();
        if s.len() < 2 {
            return Err(AutodiffError::InvalidAxis {
                axis: 1,
                shape: s.to_vec(),
            });
        }
        let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
        let batch = self.numel() / (r * c);
        let mut shape = s.to_vec();
        let len = shape.len();
        shape.swap(len - 2, len - 1);
        let data = transpose_raw(self.data(), batch, r, c);
        Ok(Tensor::from_op("transpose", data, shape, vec![self.clone()], move |g, _, _| {
            vec![Some(transpose_raw(g, batch, c, r))]
        }))
    }

    /// Numpy-style expansion of size-1 (or missing leading) axes.
    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Tensor> {
        let src = self.shape();
        let err = || AutodiffError::ShapeMismatch {
            op: "broadcast_to",
            lhs: src.to_vec(),
            rhs: shape.to_vec(),
        };
        if src.len() > shape.len() {
            return Err(err());
        }
        let pad = shape.len() - src.len();
        let mut padded = vec![1usize; pad];
        padded.extend_from_slice(src);
        if padded.iter().zip(shape).any(|(&s, &t)| s != t && s != 1) {
            return Err(err());
        }
        let n = numel(shape);
        let src_strides = strides(&padded);
        let dst_strides = strides(shape);
        let map: Vec<usize> = (0..n)
            .map(|i| {
                let mut rem = i;
                let mut off = 0;
                for d in 0..shape.len() {
                    let idx = rem / dst_strides[d];
                    rem %= dst_strides[d];
                    if padded[d] != 1 {
                        off += idx * src_strides[d];
                    }
                }
                off
            })
            .collect();
        let data = map.iter().map(|&j| self.data()[j]).collect();
        let src_len = self.numel();
        Ok(Tensor::from_op("broadcast_to", data, shape.to_vec(), vec![self.clone()], move |g, _, _| {
            let mut out = vec![0.0; src_len];
            for (gv, &j) in g.iter().zip(&map) {
                out[j] += gv;
            }
            vec![Some(out)]
        }))
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

fn bmm_raw(a: &[f64], b: &[f64], batch: usize, m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; batch * m * n];
    for bi in 0..batch {
        let a = &a[bi * m * k..(bi + 1) * m * k];
        let b = &b[bi * k * n..(bi + 1) * k * n];
        let o = &mut out[bi * m * n..(bi + 1) * m * n];
        for i in 0..m {
            let row = &mut o[i * n..(i + 1) * n];
            for p in 0..k {
                let av = a[i * k + p];
                if av == 0.0 {
                    continue;
                }
                for (r, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                    *r += av * bv;
                }
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], batch: usize, r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for bi in 0..batch {
        let base = bi * r * c;
        for i in 0..r {
            for j in 0..c {
                out[base + j * r + i] = a[base + i * c + j];
            }
        }
    }
    out
}
