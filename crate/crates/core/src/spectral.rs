//! Dense symmetric eigensolver wrapper, matrix metrics, spectral filters and
//! the eigenvector perturbation check.

use std::io::Write;

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::kernel::Latent;
use crate::limit::LimitFunction;
use crate::nn::{relu, Dense, MlpParams};
use crate::rng;

/// Eigenvalues in decreasing order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct MatrixEigenSystem {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl MatrixEigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.vectors.nrows()).map(|k| self.vectors[(k, i)]).collect()
    }

    /// `U h(Λ) Uᵀ`, skipping eigenvalues where `h` vanishes.
    pub fn filtered(&self, h: impl Fn(f64) -> f64) -> Mat<f64> {
        let n = self.vectors.nrows();
        let kept: Vec<(usize, f64)> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &l)| (i, h(l)))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        if kept.is_empty() {
            return Mat::zeros(n, n);
        }
        let u = Mat::from_fn(n, kept.len(), |r, c| self.vectors[(r, kept[c].0)]);
        let scaled = Mat::from_fn(n, kept.len(), |r, c| u[(r, c)] * kept[c].1);
        scaled.as_ref() * u.transpose()
    }
}

pub fn check_finite(s: MatRef<'_, f64>) -> Result<()> {
    for j in 0..s.ncols() {
        for i in 0..s.nrows() {
            if !s[(i, j)].is_finite() {
                return Err(Error::NonFinite);
            }
        }
    }
    Ok(())
}

fn check_square(s: MatRef<'_, f64>) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", s.nrows(), s.ncols())));
    }
    Ok(())
}

fn symmetrized(s: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(s.nrows(), s.ncols(), |i, j| 0.5 * (s[(i, j)] + s[(j, i)]))
}

/// Full symmetric eigendecomposition, eigenvalues decreasing.
pub fn sym_eig(s: MatRef<'_, f64>) -> Result<MatrixEigenSystem> {
    check_square(s)?;
    check_finite(s)?;
    let n = s.nrows();
    if n == 0 {
        return Ok(MatrixEigenSystem { values: Vec::new(), vectors: Mat::zeros(0, 0) });
    }
    let sym = symmetrized(s);
    let evd = sym.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenFailure)?;
    let vals = evd.S().column_vector();
    let u = evd.U();
    // faer returns ascending order
    let values: Vec<f64> = (0..n).rev().map(|i| vals[i]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| u[(r, n - 1 - c)]);
    Ok(MatrixEigenSystem { values, vectors })
}

/// Eigenvalues only, decreasing.
pub fn sym_eigenvalues(s: MatRef<'_, f64>) -> Result<Vec<f64>> {
    check_square(s)?;
    check_finite(s)?;
    if s.nrows() == 0 {
        return Ok(Vec::new());
    }
    let sym = symmetrized(s);
    let mut v = sym.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::EigenFailure)?;
    v.reverse();
    Ok(v)
}

/// Operator norm of a symmetric matrix.
pub fn op_norm(s: MatRef<'_, f64>) -> Result<f64> {
    let v = sym_eigenvalues(s)?;
    Ok(v.iter().fold(0.0, |m, x| m.max(x.abs())))
}

/// Largest singular value of an arbitrary matrix.
pub fn spectral_norm(m: MatRef<'_, f64>) -> Result<f64> {
    check_finite(m)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let sv = m.singular_values().map_err(|_| Error::EigenFailure)?;
    Ok(sv.iter().fold(0.0, |a, &b| a.max(b)))
}

/// Operator norm of a symmetric matrix by power iteration, with a full
/// eigenvalue fallback when the iteration stalls.
pub fn op_norm_estimate(s: MatRef<'_, f64>) -> Result<f64> {
    check_square(s)?;
    check_finite(s)?;
    let n = s.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut v = Mat::from_fn(n, 1, |i, _| 1.0 + (i % 7) as f64 / 7.0);
    let norm = v.norm_l2();
    v = v * faer::Scale(1.0 / norm);
    let mut est = 0.0;
    for _ in 0..2000 {
        let w = s * s * v.as_ref();
        let wn = w.norm_l2();
        if wn == 0.0 {
            return op_norm(s);
        }
        let next = wn.sqrt();
        v = w * faer::Scale(1.0 / wn);
        if (next - est).abs() <= 1e-12 * next {
            return Ok(next);
        }
        est = next;
    }
    op_norm(s)
}

pub fn frobenius(m: MatRef<'_, f64>) -> f64 {
    m.norm_l2()
}

/// `n^{-1/2} ‖Z‖_F`.
pub fn mse_norm(z: MatRef<'_, f64>) -> f64 {
    if z.nrows() == 0 {
        return 0.0;
    }
    z.norm_l2() / (z.nrows() as f64).sqrt()
}

/// `min_s mse_norm(s √n u - target)` for a unit vector `u` and a sampled limit.
pub fn alignment_error(u: &[f64], target: &[f64]) -> Result<f64> {
    if u.len() != target.len() {
        return Err(Error::Shape(format!("vector of length {} vs {}", u.len(), target.len())));
    }
    let n = u.len();
    if n == 0 {
        return Ok(0.0);
    }
    let root = (n as f64).sqrt();
    let (mut plus, mut minus) = (0.0, 0.0);
    for (a, b) in u.iter().zip(target) {
        plus += (root * a - b).powi(2);
        minus += (-root * a - b).powi(2);
    }
    Ok((plus.min(minus) / n as f64).sqrt())
}

/// Alignment of a sampled eigenvector with column `col` of a limit eigenfunction.
pub fn eigvec_alignment_error(
    u: &[f64],
    limit: &LimitFunction,
    col: usize,
    latents: &[Latent],
) -> Result<f64> {
    if u.len() != latents.len() {
        return Err(Error::Shape(format!("{} entries for {} latents", u.len(), latents.len())));
    }
    if col >= limit.dim() {
        return Err(Error::Shape(format!("column {col} of a {}-dimensional function", limit.dim())));
    }
    let sampled = limit.sample(latents)?;
    let target: Vec<f64> = (0..latents.len()).map(|i| sampled[(i, col)]).collect();
    alignment_error(u, &target)
}

/// Center `λ̄` and half-width `τ` of the ideal ReLU filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReluFilterParams {
    pub center: f64,
    pub half_width: f64,
}

impl ReluFilterParams {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !(center - half_width > 0.0) || !center.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need 0 < tau < center, got center {center}, tau {half_width}"
            )));
        }
        Ok(Self { center, half_width })
    }

    /// Filter separating magnitudes `kept` (passed) from `dropped` (zeroed):
    /// `λ̄ = (|kept| + |dropped|) / 2`, `τ = ||kept| - |dropped|| / 4`.
    pub fn from_gap(kept: f64, dropped: f64) -> Result<Self> {
        let (a, b) = (kept.abs(), dropped.abs());
        Self::new(0.5 * (a + b), 0.25 * (a - b).abs())
    }

    fn slope(&self) -> f64 {
        (self.center + self.half_width) / (2.0 * self.half_width)
    }

    /// Six-term ReLU closed form.
    pub fn eval(&self, l: f64) -> f64 {
        let (c, t, a) = (self.center, self.half_width, self.slope());
        a * (relu(l - c + t) - relu(l - c - t)) + relu(l - c - t)
            - a * (relu(-l - c + t) - relu(-l - c - t))
            - relu(-l - c - t)
    }

    /// One-hidden-layer network with four units computing [`Self::eval`].
    pub fn mlp(&self) -> MlpParams {
        let (c, t, a) = (self.center, self.half_width, self.slope());
        let w1 = Mat::from_fn(1, 4, |_, j| if j < 2 { 1.0 } else { -1.0 });
        let b1 = vec![-c + t, -c - t, -c + t, -c - t];
        let out = [a, 1.0 - a, -a, a - 1.0];
        let w2 = Mat::from_fn(4, 1, |i, _| out[i]);
        MlpParams::new(vec![
            Dense::new(w1, b1).expect("shapes fixed"),
            Dense::new(w2, vec![0.0]).expect("shapes fixed"),
        ])
        .expect("shapes chain")
    }
}

/// A scalar function applied to eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralFilter {
    Identity,
    Zero,
    Ideal(ReluFilterParams),
    Mlp(MlpParams),
}

impl SpectralFilter {
    pub fn eval(&self, l: f64) -> f64 {
        match self {
            SpectralFilter::Identity => l,
            SpectralFilter::Zero => 0.0,
            SpectralFilter::Ideal(p) => p.eval(l),
            SpectralFilter::Mlp(m) => m.eval_scalar(l),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SpectralFilter::Identity => "identity".into(),
            SpectralFilter::Zero => "zero".into(),
            SpectralFilter::Ideal(p) => format!("ideal(center={:e},tau={:e})", p.center, p.half_width),
            SpectralFilter::Mlp(m) => format!("mlp({} params)", m.num_params()),
        }
    }
}

/// `U h(Λ) Uᵀ`.
pub fn apply_spectral_filter(s: MatRef<'_, f64>, h: impl Fn(f64) -> f64) -> Result<Mat<f64>> {
    Ok(sym_eig(s)?.filtered(h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    /// Log-spaced `budget × budget` grid over `(λ̄, τ/λ̄)` plus the identity and zero filters.
    GridIdeal,
    /// Gradient descent on a `1 → 16 → 1` network for `budget` iterations.
    GradientMlp { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FilterFit {
    pub filter: SpectralFilter,
    /// `‖U h(Λ) Uᵀ - W‖_F`, recomputed from the filtered matrix.
    pub error: f64,
    pub trace: Vec<TraceRow>,
}

impl FilterFit {
    pub fn write_trace_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "iteration,objective,params")?;
        for row in &self.trace {
            let p: Vec<String> = row.params.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{},{:e},{}", row.iteration, row.objective, p.join(";"))?;
        }
        Ok(())
    }
}

pub const GRADIENT_HIDDEN: usize = 16;
pub const GRADIENT_STEP: f64 = 1e-2;
pub const GRID_SIZE: usize = 32;
pub const GRADIENT_ITERATIONS: usize = 2000;

/// Objective `‖U diag(μ) Uᵀ - W‖²_F = Σ (μ_i - d_i)² + c` with `d_i = u_iᵀ W u_i`.
struct FilterObjective {
    values: Vec<f64>,
    diag: Vec<f64>,
    constant: f64,
}

impl FilterObjective {
    fn new(eig: &MatrixEigenSystem, w: MatRef<'_, f64>) -> Self {
        let wu = w * eig.vectors.as_ref();
        let n = eig.dim();
        let diag: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|k| eig.vectors[(k, i)] * wu[(k, i)]).sum())
            .collect();
        let w_sq = w.squared_norm_l2();
        let constant = w_sq - diag.iter().map(|d| d * d).sum::<f64>();
        Self { values: eig.values.clone(), diag, constant }
    }

    fn eval(&self, h: impl Fn(f64) -> f64) -> f64 {
        let s: f64 = self.values.iter().zip(&self.diag).map(|(&l, &d)| (h(l) - d).powi(2)).sum();
        (s + self.constant).max(0.0)
    }
}

/// Chooses a spectral filter minimizing `‖U h(Λ) Uᵀ - W‖_F`.
pub fn fit_filter(
    s: MatRef<'_, f64>,
    w: MatRef<'_, f64>,
    method: FitMethod,
    budget: usize,
) -> Result<FilterFit> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    if s.nrows() != w.nrows() || s.ncols() != w.ncols() {
        return Err(Error::Shape("S and W differ in shape".into()));
    }
    check_finite(w)?;
    fit_filter_eig(&sym_eig(s)?, w, method, budget)
}

/// [`fit_filter`] against a precomputed eigendecomposition of `S`.
pub fn fit_filter_eig(
    eig: &MatrixEigenSystem,
    w: MatRef<'_, f64>,
    method: FitMethod,
    budget: usize,
) -> Result<FilterFit> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    if eig.dim() != w.nrows() || eig.dim() != w.ncols() {
        return Err(Error::Shape("S and W differ in shape".into()));
    }
    let obj = FilterObjective::new(eig, w);
    let (filter, trace) = match method {
        FitMethod::GridIdeal => fit_grid(eig, &obj, budget),
        FitMethod::GradientMlp { seed } => fit_gradient(&obj, budget, seed)?,
    };
    let filtered = eig.filtered(|l| filter.eval(l));
    let error = (&filtered - w).norm_l2();
    Ok(FilterFit { filter, error, trace })
}

fn logspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp()).collect()
}

fn fit_grid(eig: &MatrixEigenSystem, obj: &FilterObjective, k: usize) -> (SpectralFilter, Vec<TraceRow>) {
    // candidates must beat the incumbent by more than the objective's rounding error
    let tol = 1e-12 * (obj.constant.abs() + obj.diag.iter().map(|d| d * d).sum::<f64>());
    let mut trace = Vec::new();
    let mut best = (SpectralFilter::Identity, obj.eval(|l| l));
    trace.push(TraceRow { iteration: 0, objective: best.1, params: vec![] });
    let zero = obj.eval(|_| 0.0);
    trace.push(TraceRow { iteration: 1, objective: zero, params: vec![] });
    if zero < best.1 - tol {
        best = (SpectralFilter::Zero, zero);
    }
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale > 0.0 {
        let centers = logspace(scale * 1e-3, scale, k);
        let ratios = logspace(1e-2, 0.99, k);
        for &c in &centers {
            for &r in &ratios {
                let Ok(p) = ReluFilterParams::new(c, r * c) else { continue };
                let v = obj.eval(|l| p.eval(l));
                trace.push(TraceRow { iteration: trace.len(), objective: v, params: vec![c, r * c] });
                if v < best.1 - tol {
                    best = (SpectralFilter::Ideal(p), v);
                }
            }
        }
    }
    (best.0, trace)
}

fn fit_gradient(obj: &FilterObjective, iterations: usize, seed: u64) -> Result<(SpectralFilter, Vec<TraceRow>)> {
    let mut r = rng::from_seed(seed);
    let mut params = MlpParams::xavier(&[1, GRADIENT_HIDDEN, 1], &mut r);
    let n = obj.values.len();
    let x = Mat::from_fn(n, 1, |i, _| obj.values[i]);
    let evaluate = |p: &MlpParams| -> Result<(f64, Mat<f64>, crate::nn::MlpCache)> {
        let (mu, cache) = p.forward_cached(x.as_ref())?;
        let mut s = obj.constant;
        for i in 0..n {
            s += (mu[(i, 0)] - obj.diag[i]).powi(2);
        }
        Ok((s.max(0.0), mu, cache))
    };
    let (mut current, mut mu, mut cache) = evaluate(&params)?;
    let mut best = (params.clone(), current);
    let mut step = GRADIENT_STEP;
    let mut trace = vec![TraceRow { iteration: 0, objective: current, params: params.to_vec() }];
    for it in 1..=iterations {
        let upstream = Mat::from_fn(n, 1, |i, _| 2.0 * (mu[(i, 0)] - obj.diag[i]));
        let (grad, _) = params.backward(&cache, upstream.as_ref())?;
        let mut candidate = params.clone();
        candidate.axpy(-step, &grad);
        let (value, mu_c, cache_c) = evaluate(&candidate)?;
        if value.is_finite() && value <= current {
            params = candidate;
            current = value;
            mu = mu_c;
            cache = cache_c;
            if current < best.1 {
                best = (params.clone(), current);
            }
        } else {
            step *= 0.5;
        }
        trace.push(TraceRow { iteration: it, objective: current, params: params.to_vec() });
    }
    Ok((SpectralFilter::Mlp(best.0), trace))
}

/// Outcome of the simplified Davis–Kahan inequality for one eigenvector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DavisKahan {
    /// `min_s ‖s u_p - ũ_p‖`.
    pub lhs: f64,
    /// `‖S - S̃‖_op / δ`.
    pub bound: f64,
    pub gap: f64,
    pub slack: f64,
    pub holds: bool,
    /// The gap of `S` at `p` is below `1e-8`; the inequality says nothing.
    pub inconclusive: bool,
}

pub const MIN_GAP: f64 = 1e-8;

/// Checks `min_s ‖s u_p - ũ_p‖ ≤ ‖S - S̃‖_op / δ` with `δ` the eigengap of `S` at index `p`.
pub fn davis_kahan_check(s: MatRef<'_, f64>, s_tilde: MatRef<'_, f64>, p: usize) -> Result<DavisKahan> {
    if s.nrows() != s_tilde.nrows() || s.ncols() != s_tilde.ncols() {
        return Err(Error::Shape("S and S̃ differ in shape".into()));
    }
    let a = sym_eig(s)?;
    let b = sym_eig(s_tilde)?;
    let n = a.dim();
    if p >= n {
        return Err(Error::InvalidArgument(format!("index {p} out of range for dimension {n}")));
    }
    let mut gap = f64::INFINITY;
    if p > 0 {
        gap = gap.min(a.values[p - 1] - a.values[p]);
    }
    if p + 1 < n {
        gap = gap.min(a.values[p] - a.values[p + 1]);
    }
    let (u, v) = (a.vector(p), b.vector(p));
    let plus: f64 = u.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum();
    let minus: f64 = u.iter().zip(&v).map(|(x, y)| (x + y).powi(2)).sum();
    let lhs = plus.min(minus).sqrt();
    let diff = s.to_owned() - s_tilde;
    let bound = op_norm(diff.as_ref())? / gap;
    let inconclusive = !(gap > MIN_GAP);
    let slack = bound - lhs;
    Ok(DavisKahan { lhs, bound, gap, slack, holds: inconclusive || slack >= 0.0, inconclusive })
}

/// `max_i |λ_i(S) - λ_i(S̃)|` and `‖S - S̃‖_op`.
pub fn eigenvalue_shift(s: MatRef<'_, f64>, s_tilde: MatRef<'_, f64>) -> Result<(f64, f64)> {
    let a = sym_eigenvalues(s)?;
    let b = sym_eigenvalues(s_tilde)?;
    let shift = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let diff = s.to_owned() - s_tilde;
    Ok((shift, op_norm(diff.as_ref())?))
}
