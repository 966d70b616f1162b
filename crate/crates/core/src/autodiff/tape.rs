use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use rustfft::num_complex::Complex64;

use super::fft::{filter_real_rows, unitary_rows};
use super::tensor::{Kind, Tensor};
use crate::error::{Error, Result};

/// Probability floor applied before the logarithm in [`Tape::cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// A named trainable tensor with its gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros_like(&value);
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad = Tensor::zeros_like(&self.value);
    }

    /// Overwrites `grad` with this parameter's entry in `grads`, or zeros if
    /// the parameter was not reachable from the loss.
    pub fn load_grad(&mut self, grads: &Grads) {
        match grads.get(&self.name) {
            Some(g) => self.grad = g.clone(),
            None => self.zero_grad(),
        }
    }
}

/// Gradients produced by one backward pass, keyed by parameter name.
#[derive(Clone, Debug, Default)]
pub struct Grads {
    by_name: BTreeMap<String, Tensor>,
}

impl Grads {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.by_name.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.by_name.keys().map(String::as_str)
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(String),
    Affine { x: Var, w: Var, b: Var },
    Relu(Var),
    Clip { x: Var, eps: f64 },
    Softmax(Var),
    CrossEntropy { y: Var, target: Tensor },
    Sin(Var),
    ToComplex(Var),
    RealPart(Var),
    Dft(Var),
    Idft(Var),
    ComplexMul { x: Var, h: Tensor },
    RealFilter { x: Var, mask: Vec<f64> },
    AbsSquare(Var),
    AddNoise(Var),
    Gather { table: Var, indices: Vec<usize> },
    ZeroPad { x: Var, cols: usize },
    Slice { x: Var, start: usize },
    Sum(Var),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf | Op::Param(_) => vec![],
            Op::Affine { x, w, b } => vec![*x, *w, *b],
            Op::Relu(x)
            | Op::Clip { x, .. }
            | Op::Softmax(x)
            | Op::CrossEntropy { y: x, .. }
            | Op::Sin(x)
            | Op::ToComplex(x)
            | Op::RealPart(x)
            | Op::Dft(x)
            | Op::Idft(x)
            | Op::ComplexMul { x, .. }
            | Op::RealFilter { x, .. }
            | Op::AbsSquare(x)
            | Op::AddNoise(x)
            | Op::Gather { table: x, .. }
            | Op::ZeroPad { x, .. }
            | Op::Slice { x, .. }
            | Op::Sum(x) => vec![*x],
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    /// Whether any parameter lies upstream; backward skips the rest.
    needs_grad: bool,
}

/// Define-by-run record of a forward pass.
///
/// Build a fresh tape for every forward pass; nodes are append-only and
/// reference earlier nodes only, so the graph is acyclic by construction.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        let needs_grad =
            matches!(op, Op::Param(_)) || op.inputs().iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn param(&mut self, p: &Parameter) -> Var {
        self.push(Op::Param(p.name.clone()), p.value.clone())
    }

    /// `x·W + b` applied to each row of `x` (`[.., N_in]` → `[.., N_out]`).
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        for (t, name) in [(xv, "input"), (wv, "weight"), (bv, "bias")] {
            t.expect_kind(Kind::Real, &format!("affine {name}"))?;
        }
        if wv.shape().len() != 2 {
            return Err(Error::Shape(format!(
                "affine weight must be 2-D, got {:?}",
                wv.shape()
            )));
        }
        let (n_in, n_out) = (wv.shape()[0], wv.shape()[1]);
        if xv.cols() != n_in || bv.len() != n_out {
            return Err(Error::Shape(format!(
                "affine: input {:?}, weight {:?}, bias {:?} do not conform",
                xv.shape(),
                wv.shape(),
                bv.shape()
            )));
        }
        let rows = xv.rows();
        let mut out = vec![0.0; rows * n_out];
        for r in 0..rows {
            out[r * n_out..(r + 1) * n_out].copy_from_slice(bv.re());
        }
        gemm(
            rows,
            n_in,
            n_out,
            (xv.re(), n_in, 1),
            (wv.re(), n_out, 1),
            &mut out,
            1.0,
        );
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = n_out;
        let value = Tensor::real(&shape, out)?;
        Ok(self.push(Op::Affine { x, w, b }, value))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.map_real(x, "relu", |v| v.max(0.0))?;
        Ok(self.push(Op::Relu(x), value))
    }

    /// Two-sided clipping `relu(x - eps) - relu(x - π/4 + eps)`.
    pub fn clipping(&mut self, x: Var, eps: f64) -> Result<Var> {
        if !(0.0..FRAC_PI_4 / 2.0).contains(&eps) {
            return Err(Error::Config(format!(
                "clipping eps must lie in [0, π/8), got {eps}"
            )));
        }
        let value = self.map_real(x, "clipping", |v| clip(v, eps))?;
        Ok(self.push(Op::Clip { x, eps }, value))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_kind(Kind::Real, "softmax")?;
        let cols = xv.cols();
        let mut out = xv.re().to_vec();
        for row in out.chunks_mut(cols) {
            softmax_in_place(row);
        }
        let value = Tensor::real(xv.shape(), out)?;
        Ok(self.push(Op::Softmax(x), value))
    }

    /// Mean over rows of `-Σ_i target_i · ln(max(y_i, PROB_FLOOR))`.
    pub fn cross_entropy(&mut self, target: &Tensor, y: Var) -> Result<Var> {
        let yv = self.value(y);
        yv.expect_kind(Kind::Real, "cross_entropy")?;
        target.expect_kind(Kind::Real, "cross_entropy target")?;
        if target.shape() != yv.shape() {
            return Err(Error::Shape(format!(
                "cross_entropy: target {:?} vs prediction {:?}",
                target.shape(),
                yv.shape()
            )));
        }
        let rows = yv.rows() as f64;
        let loss: f64 = target
            .re()
            .iter()
            .zip(yv.re())
            .filter(|(t, _)| **t != 0.0)
            .map(|(t, p)| -t * p.max(PROB_FLOOR).ln())
            .sum::<f64>()
            / rows;
        Ok(self.push(
            Op::CrossEntropy {
                y,
                target: target.clone(),
            },
            Tensor::scalar(loss),
        ))
    }

    pub fn sin(&mut self, x: Var) -> Result<Var> {
        let value = self.map_real(x, "sin", f64::sin)?;
        Ok(self.push(Op::Sin(x), value))
    }

    pub fn to_complex(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_kind(Kind::Real, "to_complex")?;
        let data = xv.re().iter().map(|&r| Complex64::new(r, 0.0)).collect();
        let value = Tensor::complex(xv.shape(), data)?;
        Ok(self.push(Op::ToComplex(x), value))
    }

    pub fn real_part(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_kind(Kind::Complex, "real_part")?;
        let data = xv.cx().iter().map(|c| c.re).collect();
        let value = Tensor::real(xv.shape(), data)?;
        Ok(self.push(Op::RealPart(x), value))
    }

    /// Unitary DFT along the last dimension.
    pub fn dft(&mut self, x: Var) -> Result<Var> {
        let value = self.transform(x, false)?;
        Ok(self.push(Op::Dft(x), value))
    }

    /// Unitary inverse DFT along the last dimension.
    pub fn idft(&mut self, x: Var) -> Result<Var> {
        let value = self.transform(x, true)?;
        Ok(self.push(Op::Idft(x), value))
    }

    /// Elementwise product with a constant complex `h`, either one row
    /// broadcast to every row of `x` or a tensor of the same shape as `x`.
    pub fn complex_mul(&mut self, x: Var, h: Tensor) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_kind(Kind::Complex, "complex_mul")?;
        h.expect_kind(Kind::Complex, "complex_mul multiplier")?;
        let cols = xv.cols();
        if !(h.len() == cols || h.shape() == xv.shape()) {
            return Err(Error::Shape(format!(
                "complex_mul: multiplier {:?} does not fit input {:?}",
                h.shape(),
                xv.shape()
            )));
        }
        let mut out = xv.cx().to_vec();
        mul_rows(&mut out, h.cx(), cols, false);
        let value = Tensor::complex(xv.shape(), out)?;
        Ok(self.push(Op::ComplexMul { x, h }, value))
    }

    /// Zero-phase filter of each real row: `idft(H · dft(x))` for a real
    /// frequency response `H` that is even in frequency, given on the
    /// `cols / 2 + 1` non-negative bins.
    pub fn real_filter(&mut self, x: Var, mask: Vec<f64>) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_kind(Kind::Real, "real_filter")?;
        let cols = xv.cols();
        if mask.len() != cols / 2 + 1 {
            return Err(Error::Shape(format!(
                "real_filter: {} mask bins for rows of {cols} samples",
                mask.len()
            )));
        }
        let mut out = xv.re().to_vec();
        filter_real_rows(&mut out, cols, &mask);
        let value = Tensor::real(xv.shape(), out)?;
        Ok(self.push(Op::RealFilter { x, mask }, value))
    }

    /// Elementwise `|x|²` of a complex tensor.
    pub fn abs_square(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_kind(Kind::Complex, "abs_square")?;
        let data = xv.cx().iter().map(|c| c.norm_sqr()).collect();
        let value = Tensor::real(xv.shape(), data)?;
        Ok(self.push(Op::AbsSquare(x), value))
    }

    /// Adds a noise realization sampled outside the graph.
    pub fn add_noise(&mut self, x: Var, noise: &Tensor) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape() != noise.shape() || xv.kind() != noise.kind() {
            return Err(Error::Shape(format!(
                "add_noise: noise {:?} does not match signal {:?}",
                noise.shape(),
                xv.shape()
            )));
        }
        let mut value = xv.clone();
        value.accumulate(noise);
        Ok(self.push(Op::AddNoise(x), value))
    }

    /// Concatenates rows of a `[K, C]` table: `indices` is read in groups of
    /// `group` and each group becomes one output row of `group·C` values.
    pub fn gather(&mut self, table: Var, indices: &[usize], group: usize) -> Result<Var> {
        let tv = self.value(table);
        tv.expect_kind(Kind::Real, "gather")?;
        if tv.shape().len() != 2 {
            return Err(Error::Shape("gather table must be 2-D".into()));
        }
        let (k, c) = (tv.shape()[0], tv.shape()[1]);
        if group == 0 || !indices.len().is_multiple_of(group) {
            return Err(Error::Shape(format!(
                "gather: {} indices not divisible into groups of {group}",
                indices.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= k) {
            return Err(Error::Shape(format!(
                "gather index {bad} >= table rows {k}"
            )));
        }
        let mut out = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            out.extend_from_slice(tv.row(i));
        }
        let value = Tensor::real(&[indices.len() / group, group * c], out)?;
        Ok(self.push(
            Op::Gather {
                table,
                indices: indices.to_vec(),
            },
            value,
        ))
    }

    /// Appends zeros to every row until it has `cols` columns.
    pub fn zero_pad(&mut self, x: Var, cols: usize) -> Result<Var> {
        let xv = self.value(x);
        let old = xv.cols();
        if cols < old {
            return Err(Error::Shape(format!("zero_pad: {cols} < {old} columns")));
        }
        let rows = xv.rows();
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = cols;
        let value = match xv.kind() {
            Kind::Real => {
                let mut out = vec![0.0; rows * cols];
                for (dst, src) in out.chunks_mut(cols).zip(xv.re().chunks(old)) {
                    dst[..old].copy_from_slice(src);
                }
                Tensor::real(&shape, out)?
            }
            Kind::Complex => {
                let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
                for (dst, src) in out.chunks_mut(cols).zip(xv.cx().chunks(old)) {
                    dst[..old].copy_from_slice(src);
                }
                Tensor::complex(&shape, out)?
            }
        };
        Ok(self.push(Op::ZeroPad { x, cols: old }, value))
    }

    /// Keeps columns `start..start + len` of every row.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        let cols = xv.cols();
        if start + len > cols || len == 0 {
            return Err(Error::Shape(format!(
                "slice_cols {start}..{} out of {cols} columns",
                start + len
            )));
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let value = match xv.kind() {
            Kind::Real => {
                let out = xv
                    .re()
                    .chunks(cols)
                    .flat_map(|r| r[start..start + len].iter().copied())
                    .collect();
                Tensor::real(&shape, out)?
            }
            Kind::Complex => {
                let out = xv
                    .cx()
                    .chunks(cols)
                    .flat_map(|r| r[start..start + len].iter().copied())
                    .collect();
                Tensor::complex(&shape, out)?
            }
        };
        Ok(self.push(Op::Slice { x, start }, value))
    }

    /// Sum of all elements of a real tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        xv.expect_kind(Kind::Real, "sum")?;
        let s = xv.re().iter().sum();
        Ok(self.push(Op::Sum(x), Tensor::scalar(s)))
    }

    /// Piecewise-linear region of every ReLU and clipping input: 0 below
    /// the first kink, 1 between, 2 above. Two parameter points with equal
    /// patterns lie on the same smooth piece of the graph.
    pub fn kink_pattern(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match node.op {
                Op::Relu(x) => out.extend(self.value(x).re().iter().map(|&v| (v > 0.0) as u8)),
                Op::Clip { x, eps } => out.extend(
                    self.value(x)
                        .re()
                        .iter()
                        .map(|&v| (v > eps) as u8 + (v > FRAC_PI_4 - eps) as u8),
                ),
                _ => {}
            }
        }
        out
    }

    fn map_real(&self, x: Var, op: &str, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        let xv = self.value(x);
        xv.expect_kind(Kind::Real, op)?;
        Tensor::real(xv.shape(), xv.re().iter().map(|&v| f(v)).collect())
    }

    fn transform(&self, x: Var, inverse: bool) -> Result<Tensor> {
        let xv = self.value(x);
        xv.expect_kind(Kind::Complex, if inverse { "idft" } else { "dft" })?;
        let mut out = xv.cx().to_vec();
        unitary_rows(&mut out, xv.cols(), inverse);
        Tensor::complex(xv.shape(), out)
    }

    /// Reverse pass from a scalar `loss`.
    ///
    /// Returns fresh gradients for every parameter the loss depends on.
    /// Each call starts from zero, so repeated calls on the same tape give
    /// identical results rather than accumulating.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        let lv = self.value(loss);
        if lv.len() != 1 || lv.kind() != Kind::Real {
            return Err(Error::Usage(format!(
                "backward needs a real scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::real(lv.shape(), vec![1.0])?);
        let mut out = Grads::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let nodes = &self.nodes;
            let mut send = |to: Var, t: Tensor| {
                if !nodes[to.0].needs_grad {
                    return;
                }
                match &mut grads[to.0] {
                    Some(acc) => acc.accumulate(&t),
                    slot @ None => *slot = Some(t),
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(name) => match out.by_name.get_mut(name) {
                    Some(acc) => acc.accumulate(&g),
                    None => {
                        out.by_name.insert(name.clone(), g);
                    }
                },
                Op::Affine { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (n_in, n_out) = (wv.shape()[0], wv.shape()[1]);
                    let rows = xv.rows();
                    let gy = g.re();
                    let mut gx = vec![0.0; rows * n_in];
                    gemm(
                        rows,
                        n_out,
                        n_in,
                        (gy, n_out, 1),
                        (wv.re(), 1, n_out),
                        &mut gx,
                        0.0,
                    );
                    let mut gw = vec![0.0; n_in * n_out];
                    gemm(
                        n_in,
                        rows,
                        n_out,
                        (xv.re(), 1, n_in),
                        (gy, n_out, 1),
                        &mut gw,
                        0.0,
                    );
                    let mut gb = vec![0.0; n_out];
                    for row in gy.chunks(n_out) {
                        gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                    let bshape = self.value(*b).shape().to_vec();
                    send(*x, Tensor::real(xv.shape(), gx)?);
                    send(*w, Tensor::real(wv.shape(), gw)?);
                    send(*b, Tensor::real(&bshape, gb)?);
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let d = zip_real(&g, xv, |g, x| if x > 0.0 { g } else { 0.0 });
                    send(*x, d);
                }
                Op::Clip { x, eps } => {
                    let (lo, hi) = (*eps, FRAC_PI_4 - eps);
                    let xv = self.value(*x);
                    let d = zip_real(&g, xv, |g, x| {
                        let slope = (x > lo) as i32 - (x > hi) as i32;
                        g * slope as f64
                    });
                    send(*x, d);
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let cols = y.cols();
                    let mut gx = vec![0.0; y.len()];
                    for ((gx, gy), y) in gx
                        .chunks_mut(cols)
                        .zip(g.re().chunks(cols))
                        .zip(y.re().chunks(cols))
                    {
                        let dot: f64 = gy.iter().zip(y).map(|(a, b)| a * b).sum();
                        for i in 0..cols {
                            gx[i] = y[i] * (gy[i] - dot);
                        }
                    }
                    send(*x, Tensor::real(y.shape(), gx)?);
                }
                Op::CrossEntropy { y, target } => {
                    let yv = self.value(*y);
                    let scale = g.item() / yv.rows() as f64;
                    let gy = target
                        .re()
                        .iter()
                        .zip(yv.re())
                        .map(|(&t, &p)| {
                            if t == 0.0 {
                                0.0
                            } else {
                                // the floor is passed through, not differentiated
                                -scale * t / p.max(PROB_FLOOR)
                            }
                        })
                        .collect();
                    send(*y, Tensor::real(yv.shape(), gy)?);
                }
                Op::Sin(x) => {
                    let d = zip_real(&g, self.value(*x), |g, x| g * x.cos());
                    send(*x, d);
                }
                Op::ToComplex(x) => {
                    let d = g.cx().iter().map(|c| c.re).collect();
                    send(*x, Tensor::real(g.shape(), d)?);
                }
                Op::RealPart(x) => {
                    let d = g.re().iter().map(|&r| Complex64::new(r, 0.0)).collect();
                    send(*x, Tensor::complex(g.shape(), d)?);
                }
                Op::Dft(x) | Op::Idft(x) => {
                    // The adjoint of a unitary transform is its inverse.
                    let inverse = matches!(node.op, Op::Dft(_));
                    let mut d = g.into_complex();
                    unitary_rows(&mut d, node.value.cols(), inverse);
                    send(*x, Tensor::complex(node.value.shape(), d)?);
                }
                Op::ComplexMul { x, h } => {
                    let shape = g.shape().to_vec();
                    let cols = g.cols();
                    let mut d = g.into_complex();
                    mul_rows(&mut d, h.cx(), cols, true);
                    send(*x, Tensor::complex(&shape, d)?);
                }
                Op::RealFilter { x, mask } => {
                    let shape = g.shape().to_vec();
                    let cols = g.cols();
                    let mut d = g.into_real();
                    filter_real_rows(&mut d, cols, mask);
                    send(*x, Tensor::real(&shape, d)?);
                }
                Op::AbsSquare(x) => {
                    let xv = self.value(*x);
                    let d = xv
                        .cx()
                        .iter()
                        .zip(g.re())
                        .map(|(z, &g)| z * (2.0 * g))
                        .collect();
                    send(*x, Tensor::complex(xv.shape(), d)?);
                }
                Op::AddNoise(x) => send(*x, g),
                Op::Gather { table, indices } => {
                    let tv = self.value(*table);
                    let c = tv.cols();
                    let mut d = vec![0.0; tv.len()];
                    for (&i, gi) in indices.iter().zip(g.re().chunks(c)) {
                        d[i * c..(i + 1) * c]
                            .iter_mut()
                            .zip(gi)
                            .for_each(|(a, b)| *a += b);
                    }
                    send(*table, Tensor::real(tv.shape(), d)?);
                }
                Op::ZeroPad { x, cols } => {
                    let cols = *cols;
                    let xv = self.value(*x);
                    let padded = g.cols();
                    let d = match g.kind() {
                        Kind::Real => Tensor::real(
                            xv.shape(),
                            g.re()
                                .chunks(padded)
                                .flat_map(|r| r[..cols].iter().copied())
                                .collect(),
                        )?,
                        Kind::Complex => Tensor::complex(
                            xv.shape(),
                            g.cx()
                                .chunks(padded)
                                .flat_map(|r| r[..cols].iter().copied())
                                .collect(),
                        )?,
                    };
                    send(*x, d);
                }
                Op::Slice { x, start } => {
                    let xv = self.value(*x);
                    let (full, len) = (xv.cols(), g.cols());
                    let mut d = Tensor::zeros_like(xv);
                    match g.kind() {
                        Kind::Real => {
                            for (dst, src) in d.re_mut().chunks_mut(full).zip(g.re().chunks(len)) {
                                dst[*start..start + len].copy_from_slice(src);
                            }
                        }
                        Kind::Complex => {
                            for (dst, src) in d.cx_mut().chunks_mut(full).zip(g.cx().chunks(len)) {
                                dst[*start..start + len].copy_from_slice(src);
                            }
                        }
                    }
                    send(*x, d);
                }
                Op::Sum(x) => {
                    let xv = self.value(*x);
                    let d = Tensor::real(xv.shape(), vec![g.item(); xv.len()])?;
                    send(*x, d);
                }
            }
        }
        Ok(out)
    }
}

fn clip(v: f64, eps: f64) -> f64 {
    (v - eps).max(0.0) - (v - FRAC_PI_4 + eps).max(0.0)
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

fn zip_real(g: &Tensor, x: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let d = g.re().iter().zip(x.re()).map(|(&g, &x)| f(g, x)).collect();
    Tensor::real(x.shape(), d).expect("same shape")
}

/// `data[r] *= h` (or `conj(h)`), with `h` either one row or a full block.
fn mul_rows(data: &mut [Complex64], h: &[Complex64], cols: usize, conj: bool) {
    for (r, row) in data.chunks_mut(cols).enumerate() {
        let hr = if h.len() == cols {
            h
        } else {
            &h[r * cols..(r + 1) * cols]
        };
        if conj {
            row.iter_mut().zip(hr).for_each(|(x, h)| *x *= h.conj());
        } else {
            row.iter_mut().zip(hr).for_each(|(x, h)| *x *= h);
        }
    }
}

/// `c = a·b + beta·c` for an `m×k` by `k×n` product, operands given as
/// `(slice, row_stride, col_stride)`.
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: (&[f64], usize, usize),
    b: (&[f64], usize, usize),
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.0.len() >= m * k && b.0.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every access made by dgemm for these
    // dimensions and strides, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1 as isize,
            a.2 as isize,
            b.0.as_ptr(),
            b.1 as isize,
            b.2 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
