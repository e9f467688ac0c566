//! ReLU networks with hand-written reverse mode.
//!
//! Nodes are rows everywhere: a batch is an `n × d` matrix and a dense layer
//! computes `X W + 1 bᵀ` with `W` of shape `d_in × d_out`. The message-passing
//! layer computes `ρ(Z θ0 + S Z θ1 + 1 bᵀ)` and is followed by a linear readout.

use std::io::{BufRead, Write};

use faer::{Mat, MatRef};
use rand::Rng;

use crate::error::{Error, Result};
use crate::limit::{LimitFunction, LimitOperator};

#[inline]
pub fn relu(t: f64) -> f64 {
    if t > 0.0 {
        t
    } else {
        0.0
    }
}

/// Subgradient of ReLU, 0 at the kink.
#[inline]
fn relu_grad(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn relu_inplace(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] = relu(m[(i, j)]);
        }
    }
}

fn add_bias(m: &mut Mat<f64>, bias: &[f64]) {
    for (j, &b) in bias.iter().enumerate() {
        for i in 0..m.nrows() {
            m[(i, j)] += b;
        }
    }
}

fn column_sums(m: MatRef<'_, f64>) -> Vec<f64> {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)]).sum()).collect()
}

fn mask_by_preactivation(grad: &mut Mat<f64>, pre: &Mat<f64>) {
    for j in 0..grad.ncols() {
        for i in 0..grad.nrows() {
            grad[(i, j)] *= relu_grad(pre[(i, j)]);
        }
    }
}

fn check_cols(x: MatRef<'_, f64>, expected: usize, what: &str) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::Shape(format!(
            "{what}: expected {expected} columns, got {}",
            x.ncols()
        )));
    }
    Ok(())
}

/// Uniform Xavier/Glorot initialization.
fn xavier<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-a..=a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Mat<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(weight: Mat<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.ncols() != bias.len() {
            return Err(Error::Shape(format!(
                "weight has {} outputs, bias has {}",
                weight.ncols(),
                bias.len()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Self { weight: Mat::zeros(d_in, d_out), bias: vec![0.0; d_out] }
    }

    pub fn xavier<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        Self { weight: xavier(d_in, d_out, rng), bias: vec![0.0; d_out] }
    }

    pub fn d_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.ncols()
    }

    fn apply(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        let mut y = x * self.weight.as_ref();
        add_bias(&mut y, &self.bias);
        y
    }

    fn params_len(&self) -> usize {
        self.weight.nrows() * self.weight.ncols() + self.bias.len()
    }

    fn push_params(&self, out: &mut Vec<f64>) {
        for i in 0..self.weight.nrows() {
            for j in 0..self.weight.ncols() {
                out.push(self.weight[(i, j)]);
            }
        }
        out.extend_from_slice(&self.bias);
    }

    fn pull_params(&mut self, src: &mut std::slice::Iter<'_, f64>) {
        for i in 0..self.weight.nrows() {
            for j in 0..self.weight.ncols() {
                self.weight[(i, j)] = *src.next().expect("length checked");
            }
        }
        for b in &mut self.bias {
            *b = *src.next().expect("length checked");
        }
    }

    fn axpy(&mut self, alpha: f64, other: &Dense) {
        for i in 0..self.weight.nrows() {
            for j in 0..self.weight.ncols() {
                self.weight[(i, j)] += alpha * other.weight[(i, j)];
            }
        }
        for (b, g) in self.bias.iter_mut().zip(&other.bias) {
            *b += alpha * g;
        }
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.d_in(), self.d_out())
    }
}

/// A ReLU MLP: ReLU after every layer but the last.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
}

/// Intermediate values saved by the forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Mat<f64>>,
    pre: Vec<Mat<f64>>,
}

fn min_abs(ms: &[Mat<f64>]) -> f64 {
    ms.iter()
        .flat_map(|m| (0..m.ncols()).flat_map(move |j| (0..m.nrows()).map(move |i| m[(i, j)].abs())))
        .fold(f64::INFINITY, f64::min)
}

impl MlpCache {
    /// Smallest hidden preactivation magnitude, the distance to the nearest ReLU kink.
    pub fn kink_margin(&self) -> f64 {
        min_abs(&self.pre[..self.pre.len().saturating_sub(1)])
    }
}

impl MlpParams {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("MLP needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].d_out() != pair[1].d_in() {
                return Err(Error::Shape(format!(
                    "layer widths {} -> {} do not chain",
                    pair[0].d_out(),
                    pair[1].d_in()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn xavier<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "need input and output widths");
        let layers = widths.windows(2).map(|w| Dense::xavier(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "need input and output widths");
        Self { layers: widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect() }
    }

    /// Single linear layer `x ↦ x W + b`.
    pub fn linear(weight: Mat<f64>, bias: Vec<f64>) -> Result<Self> {
        Self::new(vec![Dense::new(weight, bias)?])
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].d_in()];
        w.extend(self.layers.iter().map(Dense::d_out));
        w
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].d_in()
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().expect("nonempty").d_out()
    }

    pub fn forward(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_cols(x, self.d_in(), "mlp input")?;
        let last = self.layers.len() - 1;
        let mut h = self.layers[0].apply(x);
        if last > 0 {
            relu_inplace(&mut h);
        }
        for (l, layer) in self.layers.iter().enumerate().skip(1) {
            h = layer.apply(h.as_ref());
            if l < last {
                relu_inplace(&mut h);
            }
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: MatRef<'_, f64>) -> Result<(Mat<f64>, MlpCache)> {
        check_cols(x, self.d_in(), "mlp input")?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(h.as_ref());
            inputs.push(h);
            h = z.clone();
            if l < last {
                relu_inplace(&mut h);
            }
            pre.push(z);
        }
        Ok((h, MlpCache { inputs, pre }))
    }

    /// Reverse pass: parameter gradients (same shapes as `self`) and the input gradient.
    pub fn backward(
        &self,
        cache: &MlpCache,
        upstream: MatRef<'_, f64>,
    ) -> Result<(MlpParams, Mat<f64>)> {
        let last = self.layers.len() - 1;
        let rows = cache.inputs[0].nrows();
        if upstream.nrows() != rows || upstream.ncols() != self.d_out() {
            return Err(Error::Shape(format!(
                "upstream is {}x{}, expected {rows}x{}",
                upstream.nrows(),
                upstream.ncols(),
                self.d_out()
            )));
        }
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut g = upstream.to_owned();
        for l in (0..=last).rev() {
            if l < last {
                mask_by_preactivation(&mut g, &cache.pre[l]);
            }
            let weight = cache.inputs[l].transpose() * g.as_ref();
            let bias = column_sums(g.as_ref());
            g = g.as_ref() * self.layers[l].weight.transpose();
            grads.push(Dense { weight, bias });
        }
        grads.reverse();
        Ok((MlpParams { layers: grads }, g))
    }

    /// Scalar evaluation for `1 → 1` networks.
    pub fn eval_scalar(&self, t: f64) -> f64 {
        debug_assert!(self.d_in() == 1 && self.d_out() == 1);
        let mut h = vec![t];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.clone();
            for (i, &hi) in h.iter().enumerate() {
                for (j, zj) in z.iter_mut().enumerate() {
                    *zj += hi * layer.weight[(i, j)];
                }
            }
            if l < last {
                z.iter_mut().for_each(|v| *v = relu(*v));
            }
            h = z;
        }
        h[0]
    }

    /// Row-vector evaluation.
    pub fn eval_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Mat::from_fn(1, x.len(), |_, j| x[j]);
        let y = self.forward(m.as_ref())?;
        Ok((0..y.ncols()).map(|j| y[(0, j)]).collect())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::params_len).sum()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        self.layers.iter().for_each(|l| l.push_params(&mut v));
        v
    }

    pub fn set_from_slice(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                v.len()
            )));
        }
        let mut it = v.iter();
        self.layers.iter_mut().for_each(|l| l.pull_params(&mut it));
        Ok(())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &MlpParams) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.axpy(alpha, b);
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self { layers: self.layers.iter().map(Dense::zeros_like).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write_dense_list(out, "mlp", &self.layers)
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let tensors = read_tensors(input)?;
        Self::new(dense_from_tensors(&tensors, "mlp")?)
    }
}

/// One message-passing layer `ρ(Z θ0 + S Z θ1 + 1 bᵀ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnLayer {
    pub theta0: Mat<f64>,
    pub theta1: Mat<f64>,
    pub bias: Vec<f64>,
}

impl GnnLayer {
    pub fn d_in(&self) -> usize {
        self.theta0.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.theta0.ncols()
    }

    fn zeros(d_in: usize, d_out: usize) -> Self {
        Self { theta0: Mat::zeros(d_in, d_out), theta1: Mat::zeros(d_in, d_out), bias: vec![0.0; d_out] }
    }

    fn as_dense_pair(&self) -> [Dense; 2] {
        [
            Dense { weight: self.theta0.clone(), bias: self.bias.clone() },
            Dense { weight: self.theta1.clone(), bias: Vec::new() },
        ]
    }
}

/// Message-passing layers followed by a linear readout.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnParams {
    pub layers: Vec<GnnLayer>,
    pub readout: Dense,
}

#[derive(Debug, Clone)]
pub struct GnnCache {
    inputs: Vec<Mat<f64>>,
    shifted: Vec<Mat<f64>>,
    pre: Vec<Mat<f64>>,
    last: Mat<f64>,
}

impl GnnCache {
    pub fn kink_margin(&self) -> f64 {
        min_abs(&self.pre)
    }
}

impl GnnParams {
    pub fn new(layers: Vec<GnnLayer>, readout: Dense) -> Result<Self> {
        for l in &layers {
            if l.theta1.nrows() != l.d_in() || l.theta1.ncols() != l.d_out() || l.bias.len() != l.d_out() {
                return Err(Error::Shape("theta0, theta1 and bias disagree".into()));
            }
        }
        let mut width = layers.first().map(GnnLayer::d_in).unwrap_or(readout.d_in());
        for l in &layers {
            if l.d_in() != width {
                return Err(Error::Shape(format!("layer expects {} inputs, got {width}", l.d_in())));
            }
            width = l.d_out();
        }
        if readout.d_in() != width {
            return Err(Error::Shape(format!("readout expects {} inputs, got {width}", readout.d_in())));
        }
        Ok(Self { layers, readout })
    }

    /// `widths = [d_0, hidden..., d_out]`; every hidden width gets a message-passing layer.
    pub fn xavier<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "need input and output widths");
        let k = widths.len() - 1;
        let layers = (0..k - 1)
            .map(|l| GnnLayer {
                theta0: xavier(widths[l], widths[l + 1], rng),
                theta1: xavier(widths[l], widths[l + 1], rng),
                bias: vec![0.0; widths[l + 1]],
            })
            .collect();
        let readout = Dense::xavier(widths[k - 1], widths[k], rng);
        Self { layers, readout }
    }

    /// Xavier weights with biases also drawn uniformly in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(widths: &[usize], bias_scale: f64, rng: &mut R) -> Self {
        let mut p = Self::xavier(widths, rng);
        for l in &mut p.layers {
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-bias_scale..=bias_scale));
        }
        p.readout.bias.iter_mut().for_each(|b| *b = rng.random_range(-bias_scale..=bias_scale));
        p
    }

    pub fn d_in(&self) -> usize {
        self.layers.first().map(GnnLayer::d_in).unwrap_or(self.readout.d_in())
    }

    pub fn d_out(&self) -> usize {
        self.readout.d_out()
    }

    pub fn num_params(&self) -> usize {
        self.to_vec().len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in &self.layers {
            for d in l.as_dense_pair() {
                d.push_params(&mut v);
            }
        }
        self.readout.push_params(&mut v);
        v
    }

    pub fn set_from_slice(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                v.len()
            )));
        }
        let mut it = v.iter();
        for l in &mut self.layers {
            let [mut d0, mut d1] = l.as_dense_pair();
            d0.pull_params(&mut it);
            d1.pull_params(&mut it);
            l.theta0 = d0.weight;
            l.bias = d0.bias;
            l.theta1 = d1.weight;
        }
        self.readout.pull_params(&mut it);
        Ok(())
    }

    pub fn axpy(&mut self, alpha: f64, other: &GnnParams) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for i in 0..a.theta0.nrows() {
                for j in 0..a.theta0.ncols() {
                    a.theta0[(i, j)] += alpha * b.theta0[(i, j)];
                    a.theta1[(i, j)] += alpha * b.theta1[(i, j)];
                }
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += alpha * y;
            }
        }
        self.readout.axpy(alpha, &other.readout);
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| GnnLayer::zeros(l.d_in(), l.d_out())).collect(),
            readout: self.readout.zeros_like(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# gnn tensors={}", 3 * self.layers.len() + 2)?;
        for (l, layer) in self.layers.iter().enumerate() {
            write_tensor(out, l, "theta0", layer.theta0.as_ref())?;
            write_tensor(out, l, "theta1", layer.theta1.as_ref())?;
            write_tensor(out, l, "bias", bias_row(&layer.bias).as_ref())?;
        }
        let l = self.layers.len();
        write_tensor(out, l, "weight", self.readout.weight.as_ref())?;
        write_tensor(out, l, "bias", bias_row(&self.readout.bias).as_ref())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let tensors = read_tensors(input)?;
        if tensors.len() < 2 || (tensors.len() - 2) % 3 != 0 {
            return Err(Error::Parse("gnn dump must hold layer triples plus a readout".into()));
        }
        let (body, tail) = tensors.split_at(tensors.len() - 2);
        let mut layers = Vec::new();
        for t in body.chunks(3) {
            layers.push(GnnLayer {
                theta0: t[0].expect("theta0")?.matrix(),
                theta1: t[1].expect("theta1")?.matrix(),
                bias: t[2].expect("bias")?.data.clone(),
            });
        }
        let readout = Dense::new(tail[0].expect("weight")?.matrix(), tail[1].expect("bias")?.data.clone())?;
        Self::new(layers, readout)
    }
}

fn check_shift(s: MatRef<'_, f64>, z: MatRef<'_, f64>) -> Result<()> {
    if s.nrows() != s.ncols() || s.nrows() != z.nrows() {
        return Err(Error::Shape(format!(
            "shift is {}x{}, features have {} rows",
            s.nrows(),
            s.ncols(),
            z.nrows()
        )));
    }
    Ok(())
}

pub fn mpnn_forward(s: MatRef<'_, f64>, z0: MatRef<'_, f64>, theta: &GnnParams) -> Result<Mat<f64>> {
    Ok(mpnn_forward_cached(s, z0, theta)?.0)
}

pub fn mpnn_forward_cached(
    s: MatRef<'_, f64>,
    z0: MatRef<'_, f64>,
    theta: &GnnParams,
) -> Result<(Mat<f64>, GnnCache)> {
    check_shift(s, z0)?;
    check_cols(z0, theta.d_in(), "gnn input")?;
    let mut inputs = Vec::with_capacity(theta.layers.len());
    let mut shifted = Vec::with_capacity(theta.layers.len());
    let mut pre = Vec::with_capacity(theta.layers.len());
    let mut z = z0.to_owned();
    for layer in &theta.layers {
        let sz = s * z.as_ref();
        let mut h = z.as_ref() * layer.theta0.as_ref() + sz.as_ref() * layer.theta1.as_ref();
        add_bias(&mut h, &layer.bias);
        let mut next = h.clone();
        relu_inplace(&mut next);
        inputs.push(z);
        shifted.push(sz);
        pre.push(h);
        z = next;
    }
    let out = theta.readout.apply(z.as_ref());
    Ok((out, GnnCache { inputs, shifted, pre, last: z }))
}

/// Gradients of `<upstream, mpnn(S, Z0)>` with respect to the parameters and `Z0`.
pub fn mpnn_backward(
    s: MatRef<'_, f64>,
    theta: &GnnParams,
    cache: &GnnCache,
    upstream: MatRef<'_, f64>,
) -> Result<(GnnParams, Mat<f64>)> {
    if upstream.nrows() != cache.last.nrows() || upstream.ncols() != theta.d_out() {
        return Err(Error::Shape("upstream does not match the network output".into()));
    }
    let readout = Dense {
        weight: cache.last.transpose() * upstream,
        bias: column_sums(upstream),
    };
    let mut g = upstream * theta.readout.weight.transpose();
    let mut layers = Vec::with_capacity(theta.layers.len());
    for l in (0..theta.layers.len()).rev() {
        let layer = &theta.layers[l];
        mask_by_preactivation(&mut g, &cache.pre[l]);
        let theta0 = cache.inputs[l].transpose() * g.as_ref();
        let theta1 = cache.shifted[l].transpose() * g.as_ref();
        let bias = column_sums(g.as_ref());
        let back_direct = g.as_ref() * layer.theta0.transpose();
        let back_shift = s.transpose() * (g.as_ref() * layer.theta1.transpose());
        g = back_direct + back_shift;
        layers.push(GnnLayer { theta0, theta1, bias });
    }
    layers.reverse();
    Ok((GnnParams { layers, readout }, g))
}

/// The continuous counterpart of [`mpnn_forward`], applied to a limit function.
pub fn cgnn_eval(op: &LimitOperator, f0: &LimitFunction, theta: &GnnParams) -> Result<LimitFunction> {
    if f0.dim() != theta.d_in() {
        return Err(Error::Shape(format!(
            "input function has dimension {}, network expects {}",
            f0.dim(),
            theta.d_in()
        )));
    }
    let mut f = f0.clone();
    for layer in &theta.layers {
        let sf = op.apply(&f)?;
        let theta0 = layer.theta0.clone();
        let theta1 = layer.theta1.clone();
        let bias = layer.bias.clone();
        f = LimitFunction::combine(&f, &sf, move |a, b| {
            (0..theta0.ncols())
                .map(|j| {
                    let mut v = bias[j];
                    for (i, &ai) in a.iter().enumerate() {
                        v += ai * theta0[(i, j)];
                    }
                    for (i, &bi) in b.iter().enumerate() {
                        v += bi * theta1[(i, j)];
                    }
                    relu(v)
                })
                .collect()
        })?;
    }
    let readout = theta.readout.clone();
    Ok(f.map(move |a| {
        (0..readout.d_out())
            .map(|j| {
                let mut v = readout.bias[j];
                for (i, &ai) in a.iter().enumerate() {
                    v += ai * readout.weight[(i, j)];
                }
                v
            })
            .collect()
    }))
}

/// `(Q f)(u) = f(u) + f(-u)` for a `1 → p` network, one row per entry of `u`.
pub fn signnet_symmetrize(p: &MlpParams, u: &[f64]) -> Result<Mat<f64>> {
    if p.d_in() != 1 {
        return Err(Error::Shape(format!("SignNet branch must take 1 input, takes {}", p.d_in())));
    }
    let plus = Mat::from_fn(u.len(), 1, |i, _| u[i]);
    let minus = Mat::from_fn(u.len(), 1, |i, _| -u[i]);
    Ok(p.forward(plus.as_ref())? + p.forward(minus.as_ref())?)
}

/// Mean of the network output over the rows of `rows`.
pub fn deepset_aggregate(p: &MlpParams, rows: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if rows.nrows() == 0 {
        return Err(Error::Shape("empty set".into()));
    }
    let out = p.forward(rows)?;
    let n = out.nrows() as f64;
    Ok(column_sums(out.as_ref()).into_iter().map(|s| s / n).collect())
}

/// Exact ReLU network for `t ↦ clamp(t, -k, k) = ρ(t + k) - ρ(t - k) - k`.
pub fn clamp_mlp(k: f64) -> Result<MlpParams> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("clamp bound {k} must be > 0")));
    }
    MlpParams::new(vec![
        Dense::new(Mat::from_fn(1, 2, |_, _| 1.0), vec![k, -k])?,
        Dense::new(Mat::from_fn(2, 1, |i, _| if i == 0 { 1.0 } else { -1.0 }), vec![-k])?,
    ])
}

fn write_tensor<W: Write>(out: &mut W, layer: usize, name: &str, m: MatRef<'_, f64>) -> Result<()> {
    writeln!(out, "# layer={layer} name={name} shape={}x{}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn bias_row(b: &[f64]) -> Mat<f64> {
    Mat::from_fn(1, b.len(), |_, j| b[j])
}

fn write_dense_list<W: Write>(out: &mut W, kind: &str, layers: &[Dense]) -> Result<()> {
    writeln!(out, "# {kind} tensors={}", 2 * layers.len())?;
    for (l, d) in layers.iter().enumerate() {
        write_tensor(out, l, "weight", d.weight.as_ref())?;
        write_tensor(out, l, "bias", bias_row(&d.bias).as_ref())?;
    }
    Ok(())
}

struct Tensor {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    fn matrix(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j])
    }

    fn expect(&self, name: &str) -> Result<&Self> {
        if self.name != name {
            return Err(Error::Parse(format!("expected tensor '{name}', found '{}'", self.name)));
        }
        Ok(self)
    }
}

fn read_tensors<R: BufRead>(input: R) -> Result<Vec<Tensor>> {
    let mut tensors: Vec<Tensor> = Vec::new();
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let field = |key: &str| header.split_whitespace().find_map(|t| t.strip_prefix(key));
            if let Some(shape) = field("shape=") {
                let (r, c) = shape
                    .split_once('x')
                    .ok_or_else(|| Error::Parse(format!("bad shape {shape}")))?;
                let parse = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(e.to_string()));
                let name = field("name=").unwrap_or("").to_string();
                tensors.push(Tensor { name, rows: parse(r)?, cols: parse(c)?, data: Vec::new() });
            }
            continue;
        }
        let t = tensors.last_mut().ok_or_else(|| Error::Parse("data before header".into()))?;
        for v in line.split(',').filter(|s| !s.is_empty()) {
            t.data.push(v.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?);
        }
    }
    for t in &tensors {
        if t.data.len() != t.rows * t.cols {
            return Err(Error::Parse(format!(
                "tensor {}x{} has {} values",
                t.rows,
                t.cols,
                t.data.len()
            )));
        }
    }
    Ok(tensors)
}

fn dense_from_tensors(tensors: &[Tensor], kind: &str) -> Result<Vec<Dense>> {
    if tensors.len() % 2 != 0 {
        return Err(Error::Parse(format!("{kind} dump has an unpaired tensor")));
    }
    tensors
        .chunks(2)
        .map(|pair| {
            let weight = pair[0].expect("weight")?.matrix();
            Dense::new(weight, pair[1].expect("bias")?.data.clone())
        })
        .collect()
}
