//! Append-only computation tape with reverse-mode differentiation.
//!
//! Every builder method runs its forward kernel eagerly, records the
//! operation, and allocates a zero gradient slot of the output's shape.
//! Input ids always reference earlier nodes, so the node list is
//! topologically ordered by construction and [`Graph::backward`] is a
//! single reverse sweep.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    /// 3x3 kernel, stride 1, zero padding 1: spatial size is preserved.
    Conv2d { input: NodeId, weight: NodeId, bias: NodeId },
    /// Floor semantics; `argmax` holds the flat input index feeding each
    /// output element (first occurrence on ties).
    MaxPool2d { input: NodeId, argmax: Vec<usize> },
    Linear { input: NodeId, weight: NodeId, bias: NodeId },
    Relu { input: NodeId },
    /// Rows over the last axis, max-shifted before exponentiation.
    Softmax { input: NodeId },
    CrossEntropyLogits { logits: NodeId, target: usize },
    BceLogits { logit: NodeId, target: f64 },
    /// (m,k) x (k,n) -> (m,n)
    Matmul { a: NodeId, b: NodeId },
    /// (m,k) x (n,k)^T -> (m,n)
    MatmulNt { a: NodeId, b: NodeId },
    Scale { input: NodeId, factor: f64 },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Sum { input: NodeId },
    Reshape { input: NodeId },
    /// Two equal-length vectors stacked into a 2-row matrix.
    ConcatRows { a: NodeId, b: NodeId },
    /// One element of a vector as a scalar node.
    Pick { input: NodeId, index: usize },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// The tape. Grad slots live in a parallel vector so backward can borrow
/// an output gradient and input gradients disjointly.
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Tensor>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), grads: Vec::new() }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.grads.push(Tensor::zeros(value.shape()));
        self.nodes.push(Node { op, value });
        id
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn conv2d(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let (c_in, h, wd) = x.dims3("conv2d input")?;
        let (c_out, w_cin, kh, kw) = w.dims4("conv2d weight")?;
        if kh != 3 || kw != 3 {
            return Err(Error::Shape(format!("conv2d kernel must be 3x3, got {kh}x{kw}")));
        }
        if w_cin != c_in {
            return Err(Error::Shape(format!(
                "conv2d: input has {c_in} channels but weight expects {w_cin}"
            )));
        }
        if b.dims1("conv2d bias")? != c_out {
            return Err(Error::Shape(format!(
                "conv2d: bias length {} does not match {c_out} filters",
                b.numel()
            )));
        }
        let out = conv2d_forward(x.data(), w.data(), b.data(), c_in, c_out, h, wd);
        let value = Tensor::from_vec(&[c_out, h, wd], out)?;
        Ok(self.push(Op::Conv2d { input, weight, bias }, value))
    }

    pub fn maxpool2d(&mut self, input: NodeId, window: (usize, usize)) -> Result<NodeId> {
        let x = self.value(input);
        let (c, h, w) = x.dims3("maxpool2d input")?;
        let (ph, pw) = window;
        if ph == 0 || pw == 0 || ph > h || pw > w {
            return Err(Error::Shape(format!(
                "maxpool2d: window {ph}x{pw} does not fit input {h}x{w}"
            )));
        }
        let (h2, w2) = (h / ph, w / pw);
        let xd = x.data();
        let mut out = vec![0.0; c * h2 * w2];
        let mut argmax = vec![0usize; c * h2 * w2];
        for ci in 0..c {
            let plane = ci * h * w;
            for y2 in 0..h2 {
                for x2 in 0..w2 {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for dy in 0..ph {
                        let row = plane + (y2 * ph + dy) * w + x2 * pw;
                        for dx in 0..pw {
                            let v = xd[row + dx];
                            if v > best {
                                best = v;
                                best_idx = row + dx;
                            }
                        }
                    }
                    let o = (ci * h2 + y2) * w2 + x2;
                    out[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
        let value = Tensor::from_vec(&[c, h2, w2], out)?;
        Ok(self.push(Op::MaxPool2d { input, argmax }, value))
    }

    pub fn linear(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let n = x.dims1("linear input")?;
        let (m, w_n) = w.dims2("linear weight")?;
        if w_n != n {
            return Err(Error::Shape(format!(
                "linear: input length {n} does not match weight columns {w_n}"
            )));
        }
        if b.dims1("linear bias")? != m {
            return Err(Error::Shape(format!(
                "linear: bias length {} does not match {m} rows",
                b.numel()
            )));
        }
        let xd = x.data();
        let wd = w.data();
        let out: Vec<f64> = (0..m)
            .map(|i| {
                let row = &wd[i * n..(i + 1) * n];
                b.data()[i] + dot(row, xd)
            })
            .collect();
        let value = Tensor::from_vec(&[m], out)?;
        Ok(self.push(Op::Linear { input, weight, bias }, value))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let value = Tensor::from_vec(
            self.value(input).shape().to_vec().as_slice(),
            self.value(input).data().iter().map(|&v| v.max(0.0)).collect(),
        )
        .expect("same shape");
        self.push(Op::Relu { input }, value)
    }

    pub fn softmax(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let cols = x.shape().last().copied().unwrap_or(1).max(1);
        let mut out = x.data().to_vec();
        for row in out.chunks_mut(cols) {
            softmax_row(row);
        }
        let value = Tensor::from_vec(x.shape().to_vec().as_slice(), out).expect("same shape");
        self.push(Op::Softmax { input }, value)
    }

    /// -log softmax(logits)[target], computed from the shifted
    /// log-sum-exp so large logits cannot overflow.
    pub fn cross_entropy_logits(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let x = self.value(logits);
        let k = x.dims1("cross_entropy_logits")?;
        if target >= k {
            return Err(Error::Index(format!(
                "cross_entropy_logits: target {target} out of range for {k} classes"
            )));
        }
        let d = x.data();
        let m = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + d.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        let value = Tensor::scalar(lse - d[target]);
        Ok(self.push(Op::CrossEntropyLogits { logits, target }, value))
    }

    /// Binary cross-entropy on the sigmoid of a scalar logit.
    pub fn bce_logits(&mut self, logit: NodeId, target: bool) -> Result<NodeId> {
        let x = self.value(logit);
        if !x.is_scalar() {
            return Err(Error::Shape(format!(
                "bce_logits: expected scalar logit, got shape {:?}",
                x.shape()
            )));
        }
        let l = x.item();
        let t = if target { 1.0 } else { 0.0 };
        // max(l,0) - l*t + ln(1 + exp(-|l|)) is exact and never overflows.
        let loss = l.max(0.0) - l * t + (-l.abs()).exp().ln_1p();
        Ok(self.push(Op::BceLogits { logit, target: t }, Tensor::scalar(loss)))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.value(a).dims2("matmul lhs")?;
        let (bk, n) = self.value(b).dims2("matmul rhs")?;
        if k != bk {
            return Err(Error::Shape(format!("matmul: inner dims {k} vs {bk}")));
        }
        let ad = self.value(a).data();
        let bd = self.value(b).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &av) in ad[i * k..(i + 1) * k].iter().enumerate() {
                axpy(av, &bd[p * n..(p + 1) * n], orow);
            }
        }
        let value = Tensor::from_vec(&[m, n], out)?;
        Ok(self.push(Op::Matmul { a, b }, value))
    }

    /// a (m,k) times b^T where b is (n,k): rows of the output are dot
    /// products of rows, which is how the attention projections X W^T and
    /// scores Q K^T are laid out.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.value(a).dims2("matmul_nt lhs")?;
        let (n, bk) = self.value(b).dims2("matmul_nt rhs")?;
        if k != bk {
            return Err(Error::Shape(format!("matmul_nt: inner dims {k} vs {bk}")));
        }
        let ad = self.value(a).data();
        let bd = self.value(b).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &ad[i * k..(i + 1) * k];
            for j in 0..n {
                out[i * n + j] = dot(arow, &bd[j * k..(j + 1) * k]);
            }
        }
        let value = Tensor::from_vec(&[m, n], out)?;
        Ok(self.push(Op::MatmulNt { a, b }, value))
    }

    pub fn scale(&mut self, input: NodeId, factor: f64) -> NodeId {
        let x = self.value(input);
        let value =
            Tensor::from_vec(x.shape().to_vec().as_slice(), x.data().iter().map(|v| v * factor).collect())
                .expect("same shape");
        self.push(Op::Scale { input, factor }, value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Shape(format!(
                "add: shapes {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let out = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::from_vec(av.shape().to_vec().as_slice(), out)?;
        Ok(self.push(Op::Add { a, b }, value))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Shape(format!(
                "mul: shapes {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let out = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::from_vec(av.shape().to_vec().as_slice(), out)?;
        Ok(self.push(Op::Mul { a, b }, value))
    }

    pub fn sum(&mut self, input: NodeId) -> NodeId {
        let total = self.value(input).data().iter().sum();
        self.push(Op::Sum { input }, Tensor::scalar(total))
    }

    pub fn reshape(&mut self, input: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(input).reshaped(shape)?;
        Ok(self.push(Op::Reshape { input }, value))
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let n = self.value(a).dims1("concat_rows lhs")?;
        let bn = self.value(b).dims1("concat_rows rhs")?;
        if n != bn {
            return Err(Error::Shape(format!("concat_rows: lengths {n} vs {bn}")));
        }
        let mut out = Vec::with_capacity(2 * n);
        out.extend_from_slice(self.value(a).data());
        out.extend_from_slice(self.value(b).data());
        let value = Tensor::from_vec(&[2, n], out)?;
        Ok(self.push(Op::ConcatRows { a, b }, value))
    }

    pub fn pick(&mut self, input: NodeId, index: usize) -> Result<NodeId> {
        let x = self.value(input);
        if index >= x.numel() {
            return Err(Error::Index(format!(
                "pick: index {index} out of range for {} elements",
                x.numel()
            )));
        }
        let value = Tensor::scalar(x.data()[index]);
        Ok(self.push(Op::Pick { input, index }, value))
    }

    /// Reverse accumulation from a scalar loss. Gradients of every node
    /// reachable from the loss are populated; call once per graph.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward: loss must be scalar, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        self.grads[loss.0].data_mut()[0] = 1.0;
        for i in (0..=loss.0).rev() {
            let (before, at) = self.grads.split_at_mut(i);
            let gout = &at[0];
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Conv2d { input, weight, bias } => {
                    let x = &self.nodes[input.0].value;
                    let w = &self.nodes[weight.0].value;
                    let (c_in, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                    let c_out = w.shape()[0];
                    conv2d_backward_bias(gout.data(), before[bias.0].data_mut(), c_out, h, wd);
                    conv2d_backward_weight(
                        gout.data(),
                        x.data(),
                        before[weight.0].data_mut(),
                        c_in,
                        c_out,
                        h,
                        wd,
                    );
                    conv2d_backward_input(
                        gout.data(),
                        w.data(),
                        before[input.0].data_mut(),
                        c_in,
                        c_out,
                        h,
                        wd,
                    );
                }
                Op::MaxPool2d { input, argmax } => {
                    let gi = before[input.0].data_mut();
                    for (o, &src) in argmax.iter().enumerate() {
                        gi[src] += gout.data()[o];
                    }
                }
                Op::Linear { input, weight, bias } => {
                    let x = &self.nodes[input.0].value;
                    let w = &self.nodes[weight.0].value;
                    let n = x.numel();
                    let m = gout.numel();
                    let g = gout.data();
                    {
                        let gb = before[bias.0].data_mut();
                        for (gb_i, g_i) in gb.iter_mut().zip(g) {
                            *gb_i += g_i;
                        }
                    }
                    {
                        let gw = before[weight.0].data_mut();
                        for i in 0..m {
                            axpy(g[i], x.data(), &mut gw[i * n..(i + 1) * n]);
                        }
                    }
                    {
                        let gx = before[input.0].data_mut();
                        for i in 0..m {
                            axpy(g[i], &w.data()[i * n..(i + 1) * n], gx);
                        }
                    }
                }
                Op::Relu { input } => {
                    let x = &self.nodes[input.0].value;
                    let gi = before[input.0].data_mut();
                    for ((gi_k, &x_k), &g_k) in gi.iter_mut().zip(x.data()).zip(gout.data()) {
                        if x_k > 0.0 {
                            *gi_k += g_k;
                        }
                    }
                }
                Op::Softmax { input } => {
                    let y = &self.nodes[i].value;
                    let cols = y.shape().last().copied().unwrap_or(1).max(1);
                    let gi = before[input.0].data_mut();
                    for ((gi_row, y_row), g_row) in gi
                        .chunks_mut(cols)
                        .zip(y.data().chunks(cols))
                        .zip(gout.data().chunks(cols))
                    {
                        let inner = dot(g_row, y_row);
                        for ((gi_k, &y_k), &g_k) in gi_row.iter_mut().zip(y_row).zip(g_row) {
                            *gi_k += y_k * (g_k - inner);
                        }
                    }
                }
                Op::CrossEntropyLogits { logits, target } => {
                    let x = &self.nodes[logits.0].value;
                    let g = gout.item();
                    let mut probs = x.data().to_vec();
                    softmax_row(&mut probs);
                    let gi = before[logits.0].data_mut();
                    for (k, (gi_k, p_k)) in gi.iter_mut().zip(probs).enumerate() {
                        let delta = if k == *target { 1.0 } else { 0.0 };
                        *gi_k += g * (p_k - delta);
                    }
                }
                Op::BceLogits { logit, target } => {
                    let l = self.nodes[logit.0].value.item();
                    let g = gout.item();
                    before[logit.0].data_mut()[0] += g * (sigmoid(l) - target);
                }
                Op::Matmul { a, b } => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let (m, k) = (av.shape()[0], av.shape()[1]);
                    let n = bv.shape()[1];
                    let g = gout.data();
                    {
                        // ga[i,p] += dot(g_row_i, b_row_p)
                        let ga = before[a.0].data_mut();
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                ga[i * k + p] += dot(grow, &bv.data()[p * n..(p + 1) * n]);
                            }
                        }
                    }
                    {
                        // gb[p,:] += a[i,p] * g[i,:]
                        let gb = before[b.0].data_mut();
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                axpy(av.data()[i * k + p], grow, &mut gb[p * n..(p + 1) * n]);
                            }
                        }
                    }
                }
                Op::MatmulNt { a, b } => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let (m, k) = (av.shape()[0], av.shape()[1]);
                    let n = bv.shape()[0];
                    let g = gout.data();
                    {
                        // ga[i,:] += g[i,j] * b[j,:]
                        let ga = before[a.0].data_mut();
                        for i in 0..m {
                            for j in 0..n {
                                axpy(g[i * n + j], &bv.data()[j * k..(j + 1) * k], &mut ga[i * k..(i + 1) * k]);
                            }
                        }
                    }
                    {
                        // gb[j,:] += g[i,j] * a[i,:]
                        let gb = before[b.0].data_mut();
                        for i in 0..m {
                            for j in 0..n {
                                axpy(g[i * n + j], &av.data()[i * k..(i + 1) * k], &mut gb[j * k..(j + 1) * k]);
                            }
                        }
                    }
                }
                Op::Scale { input, factor } => {
                    let gi = before[input.0].data_mut();
                    axpy(*factor, gout.data(), gi);
                }
                Op::Add { a, b } => {
                    axpy(1.0, gout.data(), before[a.0].data_mut());
                    axpy(1.0, gout.data(), before[b.0].data_mut());
                }
                Op::Mul { a, b } => {
                    let (a, b) = (*a, *b);
                    {
                        let bv = self.nodes[b.0].value.data();
                        let ga = before[a.0].data_mut();
                        for ((ga_k, &g_k), &b_k) in ga.iter_mut().zip(gout.data()).zip(bv) {
                            *ga_k += g_k * b_k;
                        }
                    }
                    {
                        let av = self.nodes[a.0].value.data();
                        let gb = before[b.0].data_mut();
                        for ((gb_k, &g_k), &a_k) in gb.iter_mut().zip(gout.data()).zip(av) {
                            *gb_k += g_k * a_k;
                        }
                    }
                }
                Op::Sum { input } => {
                    let g = gout.item();
                    for gi_k in before[input.0].data_mut() {
                        *gi_k += g;
                    }
                }
                Op::Reshape { input } => {
                    axpy(1.0, gout.data(), before[input.0].data_mut());
                }
                Op::ConcatRows { a, b } => {
                    let n = self.nodes[a.0].value.numel();
                    axpy(1.0, &gout.data()[..n], before[a.0].data_mut());
                    axpy(1.0, &gout.data()[n..], before[b.0].data_mut());
                }
                Op::Pick { input, index } => {
                    before[input.0].data_mut()[*index] += gout.item();
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (y_k, &x_k) in y.iter_mut().zip(x) {
        *y_k += alpha * x_k;
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_row(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// The in-bounds output range for a kernel tap offset by `off`, given
/// `len` output positions; padding 1 means offsets are -1, 0, +1.
#[inline]
fn tap_range(off: isize, len: usize) -> (usize, usize) {
    let lo = (-off).max(0) as usize;
    let hi = ((len as isize - off).min(len as isize)).max(0) as usize;
    (lo, hi)
}

fn conv2d_forward(
    x: &[f64],
    w: &[f64],
    b: &[f64],
    c_in: usize,
    c_out: usize,
    h: usize,
    wd: usize,
) -> Vec<f64> {
    let plane = h * wd;
    let mut out = vec![0.0; c_out * plane];
    for co in 0..c_out {
        let ob = co * plane;
        for ci in 0..c_in {
            let ib = ci * plane;
            let wb = (co * c_in + ci) * 9;
            for dy in 0..3usize {
                let oy = dy as isize - 1;
                let (y0, y1) = tap_range(oy, h);
                for dx in 0..3usize {
                    let ox = dx as isize - 1;
                    let (x0, x1) = tap_range(ox, wd);
                    if x0 >= x1 {
                        continue;
                    }
                    let wv = w[wb + dy * 3 + dx];
                    for y in y0..y1 {
                        let iy = (y as isize + oy) as usize;
                        let irow = (ib + iy * wd) as isize + ox;
                        let src = &x[(irow as usize + x0)..(irow as usize + x1)];
                        let dst = &mut out[(ob + y * wd + x0)..(ob + y * wd + x1)];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
        let bias = b[co];
        for v in &mut out[ob..ob + plane] {
            *v += bias;
        }
    }
    out
}

fn conv2d_backward_bias(gout: &[f64], gb: &mut [f64], c_out: usize, h: usize, wd: usize) {
    let plane = h * wd;
    for co in 0..c_out {
        gb[co] += gout[co * plane..(co + 1) * plane].iter().sum::<f64>();
    }
}

fn conv2d_backward_weight(
    gout: &[f64],
    x: &[f64],
    gw: &mut [f64],
    c_in: usize,
    c_out: usize,
    h: usize,
    wd: usize,
) {
    let plane = h * wd;
    for co in 0..c_out {
        let ob = co * plane;
        for ci in 0..c_in {
            let ib = ci * plane;
            let wb = (co * c_in + ci) * 9;
            for dy in 0..3usize {
                let oy = dy as isize - 1;
                let (y0, y1) = tap_range(oy, h);
                for dx in 0..3usize {
                    let ox = dx as isize - 1;
                    let (x0, x1) = tap_range(ox, wd);
                    if x0 >= x1 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let iy = (y as isize + oy) as usize;
                        let irow = (ib + iy * wd) as isize + ox;
                        let src = &x[(irow as usize + x0)..(irow as usize + x1)];
                        let g = &gout[(ob + y * wd + x0)..(ob + y * wd + x1)];
                        acc += dot(g, src);
                    }
                    gw[wb + dy * 3 + dx] += acc;
                }
            }
        }
    }
}

fn conv2d_backward_input(
    gout: &[f64],
    w: &[f64],
    gx: &mut [f64],
    c_in: usize,
    c_out: usize,
    h: usize,
    wd: usize,
) {
    let plane = h * wd;
    for co in 0..c_out {
        let ob = co * plane;
        for ci in 0..c_in {
            let ib = ci * plane;
            let wb = (co * c_in + ci) * 9;
            for dy in 0..3usize {
                let oy = dy as isize - 1;
                let (y0, y1) = tap_range(oy, h);
                for dx in 0..3usize {
                    let ox = dx as isize - 1;
                    let (x0, x1) = tap_range(ox, wd);
                    if x0 >= x1 {
                        continue;
                    }
                    let wv = w[wb + dy * 3 + dx];
                    for y in y0..y1 {
                        let iy = (y as isize + oy) as usize;
                        let irow = (ib + iy * wd) as isize + ox;
                        let dst = &mut gx[(irow as usize + x0)..(irow as usize + x1)];
                        let g = &gout[(ob + y * wd + x0)..(ob + y * wd + x1)];
                        for (d, &g_k) in dst.iter_mut().zip(g) {
                            *d += wv * g_k;
                        }
                    }
                }
            }
        }
    }
}
