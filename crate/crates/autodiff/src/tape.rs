//! The recording tape: forward ops and reverse accumulation.

use crate::error::AdError;
use crate::tensor::Tensor;
use crate::Result;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d {
        x: NodeId,
        w: NodeId,
        stride: usize,
        pad: usize,
    },
    BiasAdd {
        x: NodeId,
        b: NodeId,
    },
    LeakyRelu {
        x: NodeId,
        alpha: f32,
    },
    Relu {
        x: NodeId,
    },
    Sigmoid {
        x: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Sub {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    MulScalar {
        x: NodeId,
        s: f32,
    },
    Square {
        x: NodeId,
    },
    Abs {
        x: NodeId,
    },
    PowAbs {
        x: NodeId,
        p: f32,
    },
    Ln {
        x: NodeId,
    },
    ClampMin {
        x: NodeId,
        lo: f32,
    },
    Mean {
        x: NodeId,
    },
    Sum {
        x: NodeId,
    },
    PixelShuffle {
        x: NodeId,
        r: usize,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`NodeId`].
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.slots[id.0].as_ref()
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.slots[id.0].take()
    }
}

/// A single forward pass. Create, record ops, call [`Tape::backward`], drop.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input: no gradient will be tracked through it.
    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Leaf, false)
    }

    /// Trainable input: gradients accumulate here.
    pub fn param(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push_checked(&mut self, value: Tensor, op: Op, op_name: &'static str) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(AdError::NonFinite { op: op_name });
        }
        let needs_grad = op_inputs(&op).iter().any(|id| self.nodes[id.0].needs_grad);
        Ok(self.push(value, op, needs_grad))
    }

    // ---- forward ops -----------------------------------------------------

    /// Strided cross-correlation, NCHW activations, OIHW weights, symmetric
    /// zero padding.
    pub fn conv2d(&mut self, x: NodeId, w: NodeId, stride: usize, pad: usize) -> Result<NodeId> {
        if stride == 0 {
            return Err(AdError::parameter("conv2d", "stride must be positive"));
        }
        let (n, cx, h, wd) = self.value(x).dims4("conv2d")?;
        let (o, cw, kh, kw) = self.value(w).dims4("conv2d")?;
        if cx != cw {
            return Err(AdError::shape(
                "conv2d",
                format!("input has {cx} channels, weight expects {cw}"),
            ));
        }
        if h + 2 * pad < kh || wd + 2 * pad < kw {
            return Err(AdError::shape(
                "conv2d",
                format!("kernel {kh}x{kw} larger than padded input {h}x{wd}+{pad}"),
            ));
        }
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (wd + 2 * pad - kw) / stride + 1;

        let k = cx * kh * kw;
        let l = oh * ow;
        let mut col = vec![0.0f32; k * l];
        let mut out = Tensor::zeros(&[n, o, oh, ow]);
        let wmat = self.value(w).data();
        for b in 0..n {
            let xplane = &self.value(x).data()[b * cx * h * wd..(b + 1) * cx * h * wd];
            im2col(xplane, cx, h, wd, kh, kw, stride, pad, oh, ow, &mut col);
            let dst = &mut out.data_mut()[b * o * l..(b + 1) * o * l];
            unsafe {
                matrixmultiply::sgemm(
                    o,
                    k,
                    l,
                    1.0,
                    wmat.as_ptr(),
                    k as isize,
                    1,
                    col.as_ptr(),
                    l as isize,
                    1,
                    0.0,
                    dst.as_mut_ptr(),
                    l as isize,
                    1,
                );
            }
        }
        self.push_checked(out, Op::Conv2d { x, w, stride, pad }, "conv2d")
    }

    /// Adds a per-channel bias vector to an NCHW tensor.
    pub fn bias_add(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, c, h, w) = self.value(x).dims4("bias_add")?;
        if self.value(b).shape() != [c] {
            return Err(AdError::shape(
                "bias_add",
                format!(
                    "bias shape {:?} does not match {c} channels",
                    self.value(b).shape()
                ),
            ));
        }
        let mut out = self.value(x).clone();
        let bias = self.value(b).data().to_vec();
        let hw = h * w;
        for bn in 0..n {
            for (ch, bv) in bias.iter().enumerate() {
                let base = (bn * c + ch) * hw;
                for v in &mut out.data_mut()[base..base + hw] {
                    *v += bv;
                }
            }
        }
        self.push_checked(out, Op::BiasAdd { x, b }, "bias_add")
    }

    pub fn leaky_relu(&mut self, x: NodeId, alpha: f32) -> Result<NodeId> {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            if *v < 0.0 {
                *v *= alpha;
            }
        }
        self.push_checked(out, Op::LeakyRelu { x, alpha }, "leaky_relu")
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.push_checked(out, Op::Relu { x }, "relu")
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v = stable_sigmoid(*v);
        }
        self.push_checked(out, Op::Sigmoid { x }, "sigmoid")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.elementwise_pair(a, b, "add", |x, y| x + y)?;
        self.push_checked(out, Op::Add { a, b }, "add")
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.elementwise_pair(a, b, "sub", |x, y| x - y)?;
        self.push_checked(out, Op::Sub { a, b }, "sub")
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.elementwise_pair(a, b, "mul", |x, y| x * y)?;
        self.push_checked(out, Op::Mul { a, b }, "mul")
    }

    pub fn mul_scalar(&mut self, x: NodeId, s: f32) -> Result<NodeId> {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v *= s;
        }
        self.push_checked(out, Op::MulScalar { x, s }, "mul_scalar")
    }

    pub fn square(&mut self, x: NodeId) -> Result<NodeId> {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v *= *v;
        }
        self.push_checked(out, Op::Square { x }, "square")
    }

    pub fn abs(&mut self, x: NodeId) -> Result<NodeId> {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v = v.abs();
        }
        self.push_checked(out, Op::Abs { x }, "abs")
    }

    /// `|x|^p`. Gradient at exactly zero is defined as zero.
    pub fn pow_abs(&mut self, x: NodeId, p: f32) -> Result<NodeId> {
        if p <= 0.0 {
            return Err(AdError::parameter("pow_abs", "exponent must be positive"));
        }
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v = v.abs().powf(p);
        }
        self.push_checked(out, Op::PowAbs { x, p }, "pow_abs")
    }

    /// Natural log. The caller is responsible for clamping away from zero
    /// (see [`Tape::clamp_min`]); log of a non-positive value is a hard
    /// non-finite error.
    pub fn ln(&mut self, x: NodeId) -> Result<NodeId> {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v = v.ln();
        }
        self.push_checked(out, Op::Ln { x }, "ln")
    }

    /// `max(x, lo)` elementwise; gradient passes only where `x > lo`.
    pub fn clamp_min(&mut self, x: NodeId, lo: f32) -> Result<NodeId> {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            if *v < lo {
                *v = lo;
            }
        }
        self.push_checked(out, Op::ClampMin { x, lo }, "clamp_min")
    }

    /// Mean over all elements; f64 accumulation, scalar output.
    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        let m = v.data().iter().map(|&a| a as f64).sum::<f64>() / v.numel() as f64;
        self.push_checked(Tensor::scalar(m as f32), Op::Mean { x }, "mean")
    }

    /// Sum over all elements; f64 accumulation, scalar output.
    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.value(x).data().iter().map(|&a| a as f64).sum::<f64>();
        self.push_checked(Tensor::scalar(s as f32), Op::Sum { x }, "sum")
    }

    /// Rearranges `(N, C*r^2, H, W)` into `(N, C, H*r, W*r)`.
    pub fn pixel_shuffle(&mut self, x: NodeId, r: usize) -> Result<NodeId> {
        if r == 0 {
            return Err(AdError::parameter("pixel_shuffle", "factor must be positive"));
        }
        let (n, c, h, w) = self.value(x).dims4("pixel_shuffle")?;
        if c % (r * r) != 0 {
            return Err(AdError::shape(
                "pixel_shuffle",
                format!("{c} channels not divisible by {}", r * r),
            ));
        }
        let oc = c / (r * r);
        let mut out = Tensor::zeros(&[n, oc, h * r, w * r]);
        let src = self.value(x).data();
        {
            let dst = out.data_mut();
            for bn in 0..n {
                for co in 0..oc {
                    for y in 0..h * r {
                        for xq in 0..w * r {
                            let ci = co * r * r + (y % r) * r + (xq % r);
                            let sv = src[((bn * c + ci) * h + y / r) * w + xq / r];
                            dst[((bn * oc + co) * (h * r) + y) * (w * r) + xq] = sv;
                        }
                    }
                }
            }
        }
        self.push_checked(out, Op::PixelShuffle { x, r }, "pixel_shuffle")
    }

    fn elementwise_pair(
        &self,
        a: NodeId,
        b: NodeId,
        op: &'static str,
        f: impl Fn(f32, f32) -> f32,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(AdError::shape(
                op,
                format!("{:?} vs {:?} (no broadcasting)", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    // ---- backward --------------------------------------------------------

    /// Reverse accumulation from a scalar loss. Returns gradients for every
    /// node that (transitively) involves a [`Tape::param`] leaf.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).numel() != 1 {
            return Err(AdError::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        let mut slots: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        slots[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(gout) = slots[idx].take() else {
                continue;
            };
            self.step_backward(idx, &gout, &mut slots)?;
            slots[idx] = Some(gout);
        }

        // Gradients, like forward values, must stay finite.
        for (i, s) in slots.iter().enumerate() {
            if let Some(g) = s {
                if !g.is_finite() {
                    return Err(AdError::NonFinite {
                        op: op_name(&self.nodes[i].op),
                    });
                }
            }
        }
        Ok(Gradients { slots })
    }

    fn step_backward(
        &self,
        idx: usize,
        gout: &Tensor,
        slots: &mut [Option<Tensor>],
    ) -> Result<()> {
        let node = &self.nodes[idx];
        match node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, stride, pad } => {
                self.conv2d_backward(x, w, stride, pad, &node.value, gout, slots)?;
            }
            Op::BiasAdd { x, b } => {
                if self.needs(x) {
                    accumulate(slots, x, gout.clone());
                }
                if self.needs(b) {
                    let (n, c, h, wd) = self.value(x).dims4("bias_add")?;
                    let mut db = Tensor::zeros(&[c]);
                    let hw = h * wd;
                    for bn in 0..n {
                        for ch in 0..c {
                            let base = (bn * c + ch) * hw;
                            let s: f64 = gout.data()[base..base + hw]
                                .iter()
                                .map(|&v| v as f64)
                                .sum();
                            db.data_mut()[ch] += s as f32;
                        }
                    }
                    accumulate(slots, b, db);
                }
            }
            Op::LeakyRelu { x, alpha } => {
                if self.needs(x) {
                    let mut g = gout.clone();
                    for (gv, &xv) in g.data_mut().iter_mut().zip(self.value(x).data()) {
                        if xv < 0.0 {
                            *gv *= alpha;
                        }
                    }
                    accumulate(slots, x, g);
                }
            }
            Op::Relu { x } => {
                if self.needs(x) {
                    let mut g = gout.clone();
                    for (gv, &xv) in g.data_mut().iter_mut().zip(self.value(x).data()) {
                        if xv <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    accumulate(slots, x, g);
                }
            }
            Op::Sigmoid { x } => {
                if self.needs(x) {
                    let mut g = gout.clone();
                    for (gv, &sv) in g.data_mut().iter_mut().zip(node.value.data()) {
                        *gv *= sv * (1.0 - sv);
                    }
                    accumulate(slots, x, g);
                }
            }
            Op::Add { a, b } => {
                if self.needs(a) {
                    accumulate(slots, a, gout.clone());
                }
                if self.needs(b) {
                    accumulate(slots, b, gout.clone());
                }
            }
            Op::Sub { a, b } => {
                if self.needs(a) {
                    accumulate(slots, a, gout.clone());
                }
                if self.needs(b) {
                    let mut g = gout.clone();
                    for v in g.data_mut() {
                        *v = -*v;
                    }
                    accumulate(slots, b, g);
                }
            }
            Op::Mul { a, b } => {
                if self.needs(a) {
                    let mut g = gout.clone();
                    for (gv, &bv) in g.data_mut().iter_mut().zip(self.value(b).data()) {
                        *gv *= bv;
                    }
                    accumulate(slots, a, g);
                }
                if self.needs(b) {
                    let mut g = gout.clone();
                    for (gv, &av) in g.data_mut().iter_mut().zip(self.value(a).data()) {
                        *gv *= av;
                    }
                    accumulate(slots, b, g);
                }
            }
            Op::MulScalar { x, s } => {
                if self.needs(x) {
                    let mut g = gout.clone();
                    for v in g.data_mut() {
                        *v *= s;
                    }
                    accumulate(slots, x, g);
                }
            }
            Op::Square { x } => {
                if self.needs(x) {
                    let mut g = gout.clone();
                    for (gv, &xv) in g.data_mut().iter_mut().zip(self.value(x).data()) {
                        *gv *= 2.0 * xv;
                    }
                    accumulate(slots, x, g);
                }
            }
            Op::Abs { x } => {
                if self.needs(x) {
                    let mut g = gout.clone();
                    for (gv, &xv) in g.data_mut().iter_mut().zip(self.value(x).data()) {
                        // Subgradient 0 at the kink.
                        *gv *= if xv > 0.0 {
                            1.0
                        } else if xv < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                    }
                    accumulate(slots, x, g);
                }
            }
            Op::PowAbs { x, p } => {
                if self.needs(x) {
                    let mut g = gout.clone();
                    for (gv, &xv) in g.data_mut().iter_mut().zip(self.value(x).data()) {
                        let a = xv.abs();
                        if a < 1e-12 {
                            *gv = 0.0;
                        } else {
                            *gv *= p * a.powf(p - 1.0) * xv.signum();
                        }
                    }
                    accumulate(slots, x, g);
                }
            }
            Op::Ln { x } => {
                if self.needs(x) {
                    let mut g = gout.clone();
                    for (gv, &xv) in g.data_mut().iter_mut().zip(self.value(x).data()) {
                        *gv /= xv;
                    }
                    accumulate(slots, x, g);
                }
            }
            Op::ClampMin { x, lo } => {
                if self.needs(x) {
                    let mut g = gout.clone();
                    for (gv, &xv) in g.data_mut().iter_mut().zip(self.value(x).data()) {
                        if xv <= lo {
                            *gv = 0.0;
                        }
                    }
                    accumulate(slots, x, g);
                }
            }
            Op::Mean { x } => {
                if self.needs(x) {
                    let n = self.value(x).numel();
                    let gv = gout.data()[0] / n as f32;
                    accumulate(slots, x, Tensor::filled(self.value(x).shape(), gv));
                }
            }
            Op::Sum { x } => {
                if self.needs(x) {
                    let gv = gout.data()[0];
                    accumulate(slots, x, Tensor::filled(self.value(x).shape(), gv));
                }
            }
            Op::PixelShuffle { x, r } => {
                if self.needs(x) {
                    let (n, c, h, w) = self.value(x).dims4("pixel_shuffle")?;
                    let oc = c / (r * r);
                    let mut g = Tensor::zeros(self.value(x).shape());
                    {
                        let dst = g.data_mut();
                        for bn in 0..n {
                            for co in 0..oc {
                                for y in 0..h * r {
                                    for xq in 0..w * r {
                                        let ci = co * r * r + (y % r) * r + (xq % r);
                                        dst[((bn * c + ci) * h + y / r) * w + xq / r] += gout
                                            .data()
                                            [((bn * oc + co) * (h * r) + y) * (w * r) + xq];
                                    }
                                }
                            }
                        }
                    }
                    accumulate(slots, x, g);
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn conv2d_backward(
        &self,
        x: NodeId,
        w: NodeId,
        stride: usize,
        pad: usize,
        _out: &Tensor,
        gout: &Tensor,
        slots: &mut [Option<Tensor>],
    ) -> Result<()> {
        let (n, c, h, wd) = self.value(x).dims4("conv2d")?;
        let (o, _, kh, kw) = self.value(w).dims4("conv2d")?;
        let (_, _, oh, ow) = gout.dims4("conv2d")?;
        let k = c * kh * kw;
        let l = oh * ow;

        let need_x = self.needs(x);
        let need_w = self.needs(w);
        let mut col = vec![0.0f32; k * l];
        let mut dw = if need_w {
            Some(Tensor::zeros(self.value(w).shape()))
        } else {
            None
        };
        let mut dx = if need_x {
            Some(Tensor::zeros(self.value(x).shape()))
        } else {
            None
        };
        let mut dcol = vec![0.0f32; k * l];

        for b in 0..n {
            let gplane = &gout.data()[b * o * l..(b + 1) * o * l];
            if need_w {
                let xplane = &self.value(x).data()[b * c * h * wd..(b + 1) * c * h * wd];
                im2col(xplane, c, h, wd, kh, kw, stride, pad, oh, ow, &mut col);
                // dW += gout . col^T
                unsafe {
                    matrixmultiply::sgemm(
                        o,
                        l,
                        k,
                        1.0,
                        gplane.as_ptr(),
                        l as isize,
                        1,
                        col.as_ptr(),
                        1,
                        l as isize,
                        1.0,
                        dw.as_mut().unwrap().data_mut().as_mut_ptr(),
                        k as isize,
                        1,
                    );
                }
            }
            if need_x {
                // dcol = W^T . gout, then scatter back.
                unsafe {
                    matrixmultiply::sgemm(
                        k,
                        o,
                        l,
                        1.0,
                        self.value(w).data().as_ptr(),
                        1,
                        k as isize,
                        gplane.as_ptr(),
                        l as isize,
                        1,
                        0.0,
                        dcol.as_mut_ptr(),
                        l as isize,
                        1,
                    );
                }
                let dxplane =
                    &mut dx.as_mut().unwrap().data_mut()[b * c * h * wd..(b + 1) * c * h * wd];
                col2im_add(&dcol, c, h, wd, kh, kw, stride, pad, oh, ow, dxplane);
            }
        }
        if let Some(dw) = dw {
            accumulate(slots, w, dw);
        }
        if let Some(dx) = dx {
            accumulate(slots, x, dx);
        }
        Ok(())
    }

    #[inline]
    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }
}

fn op_inputs(op: &Op) -> Vec<NodeId> {
    match *op {
        Op::Leaf => vec![],
        Op::Conv2d { x, w, .. } => vec![x, w],
        Op::BiasAdd { x, b } => vec![x, b],
        Op::Add { a, b } | Op::Sub { a, b } | Op::Mul { a, b } => vec![a, b],
        Op::LeakyRelu { x, .. }
        | Op::Relu { x }
        | Op::Sigmoid { x }
        | Op::MulScalar { x, .. }
        | Op::Square { x }
        | Op::Abs { x }
        | Op::PowAbs { x, .. }
        | Op::Ln { x }
        | Op::ClampMin { x, .. }
        | Op::Mean { x }
        | Op::Sum { x }
        | Op::PixelShuffle { x, .. } => vec![x],
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Conv2d { .. } => "conv2d",
        Op::BiasAdd { .. } => "bias_add",
        Op::LeakyRelu { .. } => "leaky_relu",
        Op::Relu { .. } => "relu",
        Op::Sigmoid { .. } => "sigmoid",
        Op::Add { .. } => "add",
        Op::Sub { .. } => "sub",
        Op::Mul { .. } => "mul",
        Op::MulScalar { .. } => "mul_scalar",
        Op::Square { .. } => "square",
        Op::Abs { .. } => "abs",
        Op::PowAbs { .. } => "pow_abs",
        Op::Ln { .. } => "ln",
        Op::ClampMin { .. } => "clamp_min",
        Op::Mean { .. } => "mean",
        Op::Sum { .. } => "sum",
        Op::PixelShuffle { .. } => "pixel_shuffle",
    }
}

fn accumulate(slots: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
    match &mut slots[id.0] {
        Some(existing) => {
            for (e, d) in existing.data_mut().iter_mut().zip(delta.data()) {
                *e += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

/// Unfolds one image into a `(c*kh*kw) x (oh*ow)` column matrix.
#[allow(clippy::too_many_arguments)]
fn im2col(
    x: &[f32],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    col: &mut [f32],
) {
    let l = oh * ow;
    for ch in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((ch * kh + ky) * kw + kx) * l;
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let dst = &mut col[row + oy * ow..row + (oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src_row = &x[(ch * h + iy as usize) * w..(ch * h + iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *d = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Transpose of [`im2col`]: scatter-adds columns back onto the image grid.
#[allow(clippy::too_many_arguments)]
fn col2im_add(
    col: &[f32],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    x: &mut [f32],
) {
    let l = oh * ow;
    for ch in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((ch * kh + ky) * kw + kx) * l;
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        x[(ch * h + iy as usize) * w + ix as usize] += col[row + oy * ow + ox];
                    }
                }
            }
        }
    }
}

#[inline]
fn stable_sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t4(n: usize, c: usize, h: usize, w: usize, vals: &[f32]) -> Tensor {
        Tensor::new(vec![n, c, h, w], vals.to_vec()).unwrap()
    }

    #[test]
    fn conv2d_known_answer() {
        // 1x1x3x3 input, 1x1x2x2... kernels must be odd? No: autodiff conv2d
        // allows any kernel; use a 3x3 with stride 1 pad 1 and check center.
        let mut tape = Tape::new();
        let x = tape.constant(t4(1, 1, 3, 3, &[1., 2., 3., 4., 5., 6., 7., 8., 9.]));
        let w = tape.param(t4(1, 1, 3, 3, &[0., 0., 0., 0., 1., 0., 0., 0., 0.]));
        let y = tape.conv2d(x, w, 1, 1).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 3, 3]);
        assert_eq!(tape.value(y).data(), tape.value(x).data());
    }

    #[test]
    fn conv2d_stride_two_picks_even_positions() {
        let mut tape = Tape::new();
        let x = tape.constant(t4(1, 1, 4, 4, &(0..16).map(|v| v as f32).collect::<Vec<_>>()));
        let w = tape.param(t4(1, 1, 1, 1, &[1.0]));
        let y = tape.conv2d(x, w, 2, 0).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 2, 2]);
        assert_eq!(tape.value(y).data(), &[0.0, 2.0, 8.0, 10.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 2]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        assert!(tape.add(a, b).is_err());
        let x = tape.constant(Tensor::zeros(&[1, 2, 4, 4]));
        let w = tape.constant(Tensor::zeros(&[1, 3, 3, 3]));
        assert!(tape.conv2d(x, w, 1, 1).is_err());
    }

    #[test]
    fn non_finite_forward_is_a_hard_error() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(vec![2], vec![0.0, -1.0]).unwrap());
        match tape.ln(x) {
            Err(AdError::NonFinite { op }) => assert_eq!(op, "ln"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn pixel_shuffle_rearranges_exactly() {
        // (1, 4, 1, 2) with r=2 -> (1, 1, 2, 4).
        let mut tape = Tape::new();
        let x = tape.param(t4(1, 4, 1, 2, &[0., 1., 2., 3., 4., 5., 6., 7.]));
        let y = tape.pixel_shuffle(x, 2).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 2, 4]);
        // out[y][x] = in[(y%2)*2 + x%2][x/2]
        assert_eq!(tape.value(y).data(), &[0., 2., 1., 3., 4., 6., 5., 7.]);
    }

    #[test]
    fn pixel_shuffle_round_trip_gradient_is_identity() {
        let mut tape = Tape::new();
        let vals: Vec<f32> = (0..16).map(|v| v as f32 * 0.1).collect();
        let x = tape.param(t4(1, 4, 2, 2, &vals));
        let y = tape.pixel_shuffle(x, 2).unwrap();
        let s = tape.sum(y).unwrap();
        let grads = tape.backward(s).unwrap();
        // d(sum)/dx == 1 everywhere: the permutation is a bijection.
        for &g in grads.get(x).unwrap().data() {
            assert_eq!(g, 1.0);
        }
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(&[2, 2]));
        let y = tape.square(x).unwrap();
        assert!(tape.backward(y).is_err());
    }

    #[test]
    fn chain_rule_through_mean_square() {
        // d/dx mean((x)^2) = 2x/n.
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(vec![4], vec![1.0, -2.0, 3.0, 0.5]).unwrap());
        let sq = tape.square(x).unwrap();
        let loss = tape.mean(sq).unwrap();
        let grads = tape.backward(loss).unwrap();
        let g = grads.get(x).unwrap();
        for (gv, xv) in g.data().iter().zip([1.0f32, -2.0, 3.0, 0.5]) {
            assert!((gv - 2.0 * xv / 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constants_receive_no_gradients() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::filled(&[3], 2.0));
        let c = tape.constant(Tensor::filled(&[3], 5.0));
        let y = tape.mul(x, c).unwrap();
        let loss = tape.sum(y).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(c).is_none());
        for &g in grads.get(x).unwrap().data() {
            assert!((g - 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_accumulates_when_a_node_fans_out() {
        // loss = sum(x*x_const + x) -> dx = const + 1.
        let mut tape = Tape::new();
        let x = tape.param(Tensor::filled(&[2], 3.0));
        let c = tape.constant(Tensor::filled(&[2], 4.0));
        let xc = tape.mul(x, c).unwrap();
        let both = tape.add(xc, x).unwrap();
        let loss = tape.sum(both).unwrap();
        let grads = tape.backward(loss).unwrap();
        for &g in grads.get(x).unwrap().data() {
            assert!((g - 5.0).abs() < 1e-6);
        }
    }
}
