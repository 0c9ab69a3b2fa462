use super::kernels::{col2im, gemm, im2col, ConvGeom, Layout};
use super::{Result, Scalar, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise single-input primitives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UnaryOp {
    Sin,
    /// Subgradient at zero is zero.
    Relu,
    Sigmoid,
    Square,
    Ln,
    Scale(f64),
    AddScalar(f64),
    /// Gradient passes where `lo <= x <= hi`, zero elsewhere.
    Clamp(f64, f64),
}

/// Pointwise two-input primitives over equal shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        }
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    AddRowBias(Var, Var),
    AddChannelBias(Var, Var),
    Conv2d {
        x: Var,
        k: Var,
        geom: ConvGeom,
        cols: Vec<T>,
    },
    Unary(Var, UnaryOp),
    Binary(Var, Var, BinaryOp),
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    ConcatChannels(Var, Var),
    Upsample2x(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Append-only record of primitive applications.
///
/// Nodes are stored in creation order, so every input of node `k` lives at
/// an index below `k`; [`Tape::backward`] walks them once in reverse.
#[derive(Debug)]
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by one backward sweep, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T = f32> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Accumulated gradient of the loss w.r.t. `v`, or `None` when `v` does
    /// not require a gradient (or the loss does not depend on it).
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }

    /// Variables holding a gradient, in tape order.
    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.grads
            .iter()
            .enumerate()
            .filter(|(_, g)| g.is_some())
            .map(|(i, _)| Var(i))
    }
}

fn lit<T: Scalar>(v: f64) -> T {
    T::of_f64(v)
}

fn sigmoid<T: Scalar>(x: T) -> T {
    // Split on sign so exp never overflows.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(TensorError::UnknownVar(v.0))
        }
    }

    /// Records an input tensor.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.node(v).value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|&v| self.node(v).requires_grad)
    }

    /// `[m×k] · [k×n] → [m×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![T::zero(); m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            Layout::Normal,
            self.value(b).data(),
            Layout::Normal,
            T::zero(),
            &mut out,
        );
        let value = Tensor::new(vec![m, n], out)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// Adds a length-`n` bias to every row of an `[m×n]` matrix.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        self.check(x)?;
        self.check(bias)?;
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sx.len() != 2 || self.value(bias).numel() != sx[1] {
            return Err(TensorError::ShapeMismatch {
                op: "add_row_bias",
                left: sx.to_vec(),
                right: sb.to_vec(),
            });
        }
        let n = sx[1];
        let b = self.value(bias).data();
        let mut value = self.value(x).clone();
        for row in value.data_mut().chunks_mut(n) {
            for (v, &bv) in row.iter_mut().zip(b) {
                *v += bv;
            }
        }
        let rg = self.any_grad(&[x, bias]);
        Ok(self.push(value, Op::AddRowBias(x, bias), rg))
    }

    /// Adds a per-channel bias to a `[C×H×W]` tensor.
    pub fn add_channel_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        self.check(x)?;
        self.check(bias)?;
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sx.len() != 3 || self.value(bias).numel() != sx[0] {
            return Err(TensorError::ShapeMismatch {
                op: "add_channel_bias",
                left: sx.to_vec(),
                right: sb.to_vec(),
            });
        }
        let plane = sx[1] * sx[2];
        let b = self.value(bias).data().to_vec();
        let mut value = self.value(x).clone();
        for (chan, bv) in value.data_mut().chunks_mut(plane).zip(b) {
            chan.iter_mut().for_each(|v| *v += bv);
        }
        let rg = self.any_grad(&[x, bias]);
        Ok(self.push(value, Op::AddChannelBias(x, bias), rg))
    }

    /// 2-D cross-correlation of `x: [C_in×H×W]` with `k: [C_out×C_in×kh×kw]`.
    ///
    /// Output extents follow `floor((H + 2·padding − kh) / stride) + 1`.
    pub fn conv2d(&mut self, x: Var, k: Var, stride: usize, padding: usize) -> Result<Var> {
        self.check(x)?;
        self.check(k)?;
        let (sx, sk) = (self.shape(x).to_vec(), self.shape(k).to_vec());
        let mismatch = || TensorError::ShapeMismatch {
            op: "conv2d",
            left: sx.clone(),
            right: sk.clone(),
        };
        if sx.len() != 3 || sk.len() != 4 || sk[1] != sx[0] {
            return Err(mismatch());
        }
        if stride == 0 || sk[2] % 2 == 0 || sk[3] % 2 == 0 {
            return Err(TensorError::InvalidShape {
                op: "conv2d",
                reason: format!("kernel extents must be odd and stride positive (kernel {sk:?}, stride {stride})"),
            });
        }
        let (h, w) = (sx[1] + 2 * padding, sx[2] + 2 * padding);
        if h < sk[2] || w < sk[3] {
            return Err(TensorError::InvalidShape {
                op: "conv2d",
                reason: format!("padded input {h}x{w} smaller than kernel {}x{}", sk[2], sk[3]),
            });
        }
        let geom = ConvGeom {
            c_in: sx[0],
            h: sx[1],
            w: sx[2],
            c_out: sk[0],
            kh: sk[2],
            kw: sk[3],
            stride,
            padding,
            h_out: (h - sk[2]) / stride + 1,
            w_out: (w - sk[3]) / stride + 1,
        };
        let cols = im2col(self.value(x).data(), &geom);
        let mut out = vec![T::zero(); geom.c_out * geom.out_len()];
        gemm(
            geom.c_out,
            geom.patch_len(),
            geom.out_len(),
            self.value(k).data(),
            Layout::Normal,
            &cols,
            Layout::Normal,
            T::zero(),
            &mut out,
        );
        let value = Tensor::new(vec![geom.c_out, geom.h_out, geom.w_out], out)?;
        let rg = self.any_grad(&[x, k]);
        // The patch matrix is only needed for the kernel gradient.
        let cols = if self.requires_grad(k) { cols } else { Vec::new() };
        Ok(self.push(value, Op::Conv2d { x, k, geom, cols }, rg))
    }

    pub fn unary(&mut self, x: Var, op: UnaryOp) -> Var {
        let f: Box<dyn Fn(T) -> T> = match op {
            UnaryOp::Sin => Box::new(|v: T| v.sin()),
            UnaryOp::Relu => Box::new(|v: T| if v > T::zero() { v } else { T::zero() }),
            UnaryOp::Sigmoid => Box::new(sigmoid),
            UnaryOp::Square => Box::new(|v: T| v * v),
            UnaryOp::Ln => Box::new(|v: T| v.ln()),
            UnaryOp::Scale(c) => {
                let c = lit::<T>(c);
                Box::new(move |v: T| v * c)
            }
            UnaryOp::AddScalar(c) => {
                let c = lit::<T>(c);
                Box::new(move |v: T| v + c)
            }
            UnaryOp::Clamp(lo, hi) => {
                let (lo, hi) = (lit::<T>(lo), lit::<T>(hi));
                Box::new(move |v: T| v.max(lo).min(hi))
            }
        };
        let value = self.value(x).map(f);
        let rg = self.requires_grad(x);
        self.push(value, Op::Unary(x, op), rg)
    }

    pub fn binary(&mut self, a: Var, b: Var, op: BinaryOp) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::ShapeMismatch {
                op: op.name(),
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        let (va, vb) = (self.value(a), self.value(b));
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => x / y,
            })
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Binary(a, b, op), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryOp::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryOp::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryOp::Mul)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryOp::Div)
    }

    pub fn sin(&mut self, x: Var) -> Var {
        self.unary(x, UnaryOp::Sin)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, UnaryOp::Relu)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, UnaryOp::Sigmoid)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, UnaryOp::Square)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(x, UnaryOp::Ln)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, UnaryOp::Scale(c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, UnaryOp::AddScalar(c))
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(x, UnaryOp::Clamp(lo, hi))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        let rg = self.requires_grad(x);
        self.push(value, Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let value = Tensor::scalar(v.sum() / lit(v.numel() as f64));
        let rg = self.requires_grad(x);
        self.push(value, Op::Mean(x), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        self.check(x)?;
        let value = self.value(x).clone().reshaped(shape)?;
        let rg = self.requires_grad(x);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Stacks `[C1×H×W]` and `[C2×H×W]` into `[(C1+C2)×H×W]`.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 3 || sb.len() != 3 || sa[1..] != sb[1..] {
            return Err(TensorError::ShapeMismatch {
                op: "concat_channels",
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        let shape = vec![sa[0] + sb[0], sa[1], sa[2]];
        let mut data = self.value(a).data().to_vec();
        data.extend_from_slice(self.value(b).data());
        let value = Tensor::new(shape, data)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::ConcatChannels(a, b), rg))
    }

    /// Nearest-neighbour 2× upsampling of a `[C×H×W]` tensor.
    pub fn upsample2x(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(TensorError::InvalidShape {
                op: "upsample2x",
                reason: format!("expected C×H×W, got {s:?}"),
            });
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let src = self.value(x).data();
        let mut out = vec![T::zero(); c * 4 * h * w];
        for ch in 0..c {
            for y in 0..2 * h {
                for xx in 0..2 * w {
                    out[(ch * 2 * h + y) * 2 * w + xx] = src[(ch * h + y / 2) * w + xx / 2];
                }
            }
        }
        let value = Tensor::new(vec![c, 2 * h, 2 * w], out)?;
        let rg = self.requires_grad(x);
        Ok(self.push(value, Op::Upsample2x(x), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        self.check(loss)?;
        if !self.value(loss).is_scalar() {
            return Err(TensorError::NotScalar(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = Vec::new();
        grads.resize_with(self.nodes.len(), || None);
        if self.requires_grad(loss) {
            grads[loss.0] = Some(Tensor::full(self.shape(loss), T::one()));
        }

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads)?;
            // Intermediate gradients are not exposed.
        }
        // Only leaves keep their gradient.
        for (node, slot) in self.nodes.iter().zip(grads.iter_mut()) {
            if !matches!(node.op, Op::Leaf) || !node.requires_grad {
                *slot = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.node(v).requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => {
                for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += *b;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }

    fn accumulate_with(
        &self,
        grads: &mut [Option<Tensor<T>>],
        v: Var,
        f: impl FnOnce() -> Result<Tensor<T>>,
    ) -> Result<()> {
        if self.node(v).requires_grad {
            let g = f()?;
            self.accumulate(grads, v, g);
        }
        Ok(())
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (va.shape()[0], va.shape()[1], vb.shape()[1]);
                self.accumulate_with(grads, *a, || {
                    let mut out = vec![T::zero(); m * k];
                    gemm(m, n, k, g.data(), Layout::Normal, vb.data(), Layout::Transposed, T::zero(), &mut out);
                    Tensor::new(vec![m, k], out)
                })?;
                self.accumulate_with(grads, *b, || {
                    let mut out = vec![T::zero(); k * n];
                    gemm(k, m, n, va.data(), Layout::Transposed, g.data(), Layout::Normal, T::zero(), &mut out);
                    Tensor::new(vec![k, n], out)
                })?;
            }
            Op::AddRowBias(x, bias) => {
                self.accumulate(grads, *x, g.clone());
                self.accumulate_with(grads, *bias, || {
                    let n = g.shape()[1];
                    let mut out = vec![T::zero(); n];
                    for row in g.data().chunks(n) {
                        for (o, &v) in out.iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    Tensor::new(self.shape(*bias).to_vec(), out)
                })?;
            }
            Op::AddChannelBias(x, bias) => {
                self.accumulate(grads, *x, g.clone());
                self.accumulate_with(grads, *bias, || {
                    let s = g.shape();
                    let out = g
                        .data()
                        .chunks(s[1] * s[2])
                        .map(|c| c.iter().fold(T::zero(), |acc, &v| acc + v))
                        .collect();
                    Tensor::new(self.shape(*bias).to_vec(), out)
                })?;
            }
            Op::Conv2d { x, k, geom, cols } => {
                let kv = self.value(*k);
                self.accumulate_with(grads, *x, || {
                    let mut dcols = vec![T::zero(); geom.patch_len() * geom.out_len()];
                    gemm(
                        geom.patch_len(),
                        geom.c_out,
                        geom.out_len(),
                        kv.data(),
                        Layout::Transposed,
                        g.data(),
                        Layout::Normal,
                        T::zero(),
                        &mut dcols,
                    );
                    Tensor::new(vec![geom.c_in, geom.h, geom.w], col2im(&dcols, geom))
                })?;
                self.accumulate_with(grads, *k, || {
                    let mut dk = vec![T::zero(); geom.c_out * geom.patch_len()];
                    gemm(
                        geom.c_out,
                        geom.out_len(),
                        geom.patch_len(),
                        g.data(),
                        Layout::Normal,
                        cols,
                        Layout::Transposed,
                        T::zero(),
                        &mut dk,
                    );
                    Tensor::new(kv.shape().to_vec(), dk)
                })?;
            }
            Op::Unary(x, op) => {
                let xv = self.value(*x);
                let y = &node.value;
                let data = g
                    .data()
                    .iter()
                    .zip(xv.data())
                    .zip(y.data())
                    .map(|((&gv, &xi), &yi)| {
                        let d = match *op {
                            UnaryOp::Sin => xi.cos(),
                            UnaryOp::Relu => {
                                if xi > T::zero() {
                                    T::one()
                                } else {
                                    T::zero()
                                }
                            }
                            UnaryOp::Sigmoid => yi * (T::one() - yi),
                            UnaryOp::Square => lit::<T>(2.0) * xi,
                            UnaryOp::Ln => T::one() / xi,
                            UnaryOp::Scale(c) => lit(c),
                            UnaryOp::AddScalar(_) => T::one(),
                            UnaryOp::Clamp(lo, hi) => {
                                if xi >= lit(lo) && xi <= lit(hi) {
                                    T::one()
                                } else {
                                    T::zero()
                                }
                            }
                        };
                        gv * d
                    })
                    .collect();
                self.accumulate(grads, *x, Tensor::new(xv.shape().to_vec(), data)?);
            }
            Op::Binary(a, b, op) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let shape = va.shape().to_vec();
                let zip3 = |f: &dyn Fn(T, T, T) -> T| -> Result<Tensor<T>> {
                    let data = g
                        .data()
                        .iter()
                        .zip(va.data())
                        .zip(vb.data())
                        .map(|((&gv, &x), &y)| f(gv, x, y))
                        .collect();
                    Tensor::new(shape.clone(), data)
                };
                match op {
                    BinaryOp::Add => {
                        self.accumulate(grads, *a, g.clone());
                        self.accumulate(grads, *b, g.clone());
                    }
                    BinaryOp::Sub => {
                        self.accumulate(grads, *a, g.clone());
                        self.accumulate_with(grads, *b, || Ok(g.map(|v| -v)))?;
                    }
                    BinaryOp::Mul => {
                        self.accumulate_with(grads, *a, || zip3(&|gv, _, y| gv * y))?;
                        self.accumulate_with(grads, *b, || zip3(&|gv, x, _| gv * x))?;
                    }
                    BinaryOp::Div => {
                        self.accumulate_with(grads, *a, || zip3(&|gv, _, y| gv / y))?;
                        self.accumulate_with(grads, *b, || zip3(&|gv, x, y| -gv * x / (y * y)))?;
                    }
                }
            }
            Op::Sum(x) => {
                let gv = g.item();
                self.accumulate_with(grads, *x, || Ok(Tensor::full(self.shape(*x), gv)))?;
            }
            Op::Mean(x) => {
                let n = self.value(*x).numel();
                let gv = g.item() / lit(n as f64);
                self.accumulate_with(grads, *x, || Ok(Tensor::full(self.shape(*x), gv)))?;
            }
            Op::Reshape(x) => {
                self.accumulate_with(grads, *x, || g.clone().reshaped(self.shape(*x).to_vec()))?;
            }
            Op::ConcatChannels(a, b) => {
                let split = self.value(*a).numel();
                self.accumulate_with(grads, *a, || {
                    Tensor::new(self.shape(*a).to_vec(), g.data()[..split].to_vec())
                })?;
                self.accumulate_with(grads, *b, || {
                    Tensor::new(self.shape(*b).to_vec(), g.data()[split..].to_vec())
                })?;
            }
            Op::Upsample2x(x) => {
                self.accumulate_with(grads, *x, || {
                    let s = self.shape(*x);
                    let (c, h, w) = (s[0], s[1], s[2]);
                    let mut out = vec![T::zero(); c * h * w];
                    let gd = g.data();
                    for ch in 0..c {
                        for y in 0..2 * h {
                            for xx in 0..2 * w {
                                out[(ch * h + y / 2) * w + xx / 2] += gd[(ch * 2 * h + y) * 2 * w + xx];
                            }
                        }
                    }
                    Tensor::new(s.to_vec(), out)
                })?;
            }
        }
        Ok(())
    }
}
