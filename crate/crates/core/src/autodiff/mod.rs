//! Minimal dense-tensor engine with reverse-mode differentiation.
//!
//! A [`Tensor`] is an immutable, reference-counted node. Operations on
//! tensors that require gradients record a backward closure and their
//! parents; [`Tensor::backward`] walks the resulting DAG in reverse
//! topological order and accumulates `d(loss)/d(node)` into every node that
//! requires a gradient.
//!
//! Values and gradients are `f64`. Model parameters are kept on the `f32`
//! grid by the owning model (see `models`), so checkpoints stay bit-exact.
//! Only scalar broadcasting is implicit; everything else (reshape,
//! transpose, broadcast_to) is an explicit op.

mod conv;
mod gradcheck;
mod norm;
mod ops;

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

pub use conv::Conv2dSpec;
pub use gradcheck::{grad_check, grad_check_with, DEFAULT_EPS};
pub use ops::{BinaryOp, UnaryOp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: output size is not integral ({detail})")]
    NonIntegralOutput { op: &'static str, detail: String },
    #[error("{op}: dimensions {dims:?} not divisible by {factor}")]
    IndivisibleDims {
        op: &'static str,
        dims: Vec<usize>,
        factor: usize,
    },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("invalid axis {axis} for shape {shape:?}")]
    InvalidAxis { axis: usize, shape: Vec<usize> },
    #[error("data length {len} does not match shape {shape:?}")]
    BadData { len: usize, shape: Vec<usize> },
}

pub type Result<T> = std::result::Result<T, AutodiffError>;

/// Receives the output gradient, the output values and a mask of which
/// parents need a gradient; returns one optional gradient per parent.
type BackwardFn = Box<dyn Fn(&[f64], &[f64], &[bool]) -> Vec<Option<Vec<f64>>>>;

struct GradFn {
    op: &'static str,
    parents: Vec<Tensor>,
    backward: BackwardFn,
}

struct Node {
    id: usize,
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad_fn: Option<GradFn>,
    grad: RefCell<Option<Vec<f64>>>,
}

#[derive(Clone)]
pub struct Tensor(Rc<Node>);

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    fn build(data: Vec<f64>, shape: Vec<usize>, requires_grad: bool, grad_fn: Option<GradFn>) -> Tensor {
        debug_assert_eq!(data.len(), numel(&shape));
        Tensor(Rc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad,
            grad_fn,
            grad: RefCell::new(None),
        }))
    }

    /// A constant (no gradient).
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        if data.len() != numel(shape) {
            return Err(AutodiffError::BadData {
                len: data.len(),
                shape: shape.to_vec(),
            });
        }
        Ok(Self::build(data, shape.to_vec(), false, None))
    }

    /// A leaf that collects gradients.
    pub fn leaf(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        let t = Self::new(data, shape)?;
        Ok(Self::build(t.0.data.clone(), shape.to_vec(), true, None))
    }

    pub fn from_f32(data: &[f32], shape: &[usize]) -> Result<Tensor> {
        Self::new(data.iter().map(|&v| v as f64).collect(), shape)
    }

    pub fn scalar(v: f64) -> Tensor {
        Self::build(vec![v], vec![], false, None)
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Self::build(vec![0.0; numel(shape)], shape.to_vec(), false, None)
    }

    /// Records an op result. Parents that need no gradient are still kept so
    /// the closure can index them, but the node only joins the graph when
    /// at least one parent requires a gradient.
    pub(crate) fn from_op(
        op: &'static str,
        data: Vec<f64>,
        shape: Vec<usize>,
        parents: Vec<Tensor>,
        backward: impl Fn(&[f64], &[f64], &[bool]) -> Vec<Option<Vec<f64>>> + 'static,
    ) -> Tensor {
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let grad_fn = requires_grad.then(|| GradFn {
            op,
            parents,
            backward: Box::new(backward),
        });
        Self::build(data, shape, requires_grad, grad_fn)
    }

    pub fn id(&self) -> usize {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// Name of the producing op, `None` for leaves and constants.
    pub fn op_name(&self) -> Option<&'static str> {
        self.0.grad_fn.as_ref().map(|g| g.op)
    }

    pub fn item(&self) -> f64 {
        self.0.data[0]
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Tensor {
        Self::build(self.0.data.clone(), self.0.shape.clone(), false, None)
    }

    pub fn all_finite(&self) -> bool {
        self.0.data.iter().all(|v| v.is_finite())
    }

    /// Reverse-mode sweep from a scalar loss.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(AutodiffError::NonScalarLoss(self.shape().to_vec()));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.topo_order();
        let mut grads: HashMap<usize, Vec<f64>> = HashMap::new();
        grads.insert(self.id(), vec![1.0]);
        for node in order.iter().rev() {
            let Some(g) = grads.remove(&node.id()) else {
                continue;
            };
            if let Some(gf) = &node.0.grad_fn {
                let needs: Vec<bool> = gf.parents.iter().map(Tensor::requires_grad).collect();
                let parent_grads = (gf.backward)(&g, &node.0.data, &needs);
                for ((parent, pg), need) in gf.parents.iter().zip(parent_grads).zip(&needs) {
                    if let (true, Some(pg)) = (*need, pg) {
                        debug_assert_eq!(pg.len(), parent.numel(), "grad size for {}", gf.op);
                        match grads.get_mut(&parent.id()) {
                            Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a += b),
                            None => {
                                grads.insert(parent.id(), pg);
                            }
                        }
                    }
                }
            }
            let mut slot = node.0.grad.borrow_mut();
            match slot.as_mut() {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                None => *slot = Some(g),
            }
        }
        Ok(())
    }

    /// Post-order DFS over grad-requiring nodes; parents precede children.
    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut visited = std::collections::HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !visited.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(gf) = &t.0.grad_fn {
                for p in &gf.parents {
                    if p.requires_grad() && !visited.contains(&p.id()) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }
        order
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("op", &self.op_name())
            .finish()
    }
}
