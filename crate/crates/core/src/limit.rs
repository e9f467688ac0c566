//! The continuous shift operator `𝐒f = ∫ w_S(·, x) f(x) dP(x)`.
//!
//! For block models every function is a `K × q` table and all operations are
//! exact. For continuous models a function is stored by its values on the
//! quadrature grid together with an evaluator valid at any latent point, so
//! limits can be sampled at the latents of a random graph.

use std::io::Write;
use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::kernel::{KernelModel, Latent, ShiftKernel, ShiftKind};
use crate::spectral;

/// Eigenvalues below this magnitude count as zero.
pub const ZERO_EIGENVALUE: f64 = 1e-10;
/// Eigenvalues closer than this are reported as a multiplicity.
pub const TIE_TOLERANCE: f64 = 1e-9;

pub type PointEval = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A function from the latent space to `R^q`.
#[derive(Clone)]
pub enum LimitFunction {
    /// One row per community.
    Exact(Mat<f64>),
    /// Values on the quadrature nodes plus an evaluator for arbitrary points.
    Grid { values: Mat<f64>, eval: PointEval },
}

impl std::fmt::Debug for LimitFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LimitFunction::Exact(m) => f.debug_tuple("Exact").field(m).finish(),
            LimitFunction::Grid { values, .. } => {
                f.debug_struct("Grid").field("values", values).finish_non_exhaustive()
            }
        }
    }
}

impl LimitFunction {
    /// Tabulates `f` on the model's support points.
    pub fn from_fn(
        model: &KernelModel,
        q: usize,
        f: impl Fn(Latent) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        let disc = model.discretization();
        let mut values = Mat::zeros(disc.len(), q);
        for (i, &x) in disc.points.iter().enumerate() {
            let v = f(x);
            assert_eq!(v.len(), q, "function returned the wrong dimension");
            for (j, vj) in v.into_iter().enumerate() {
                values[(i, j)] = vj;
            }
        }
        if model.is_sbm() {
            LimitFunction::Exact(values)
        } else {
            LimitFunction::Grid { values, eval: Arc::new(move |t| f(Latent::Point(t))) }
        }
    }

    pub fn constant(model: &KernelModel, value: Vec<f64>) -> Self {
        let q = value.len();
        Self::from_fn(model, q, move |_| value.clone())
    }

    pub fn zeros(model: &KernelModel, q: usize) -> Self {
        Self::constant(model, vec![0.0; q])
    }

    pub fn dim(&self) -> usize {
        self.values().ncols()
    }

    /// Values on the support points (communities or quadrature nodes).
    pub fn values(&self) -> &Mat<f64> {
        match self {
            LimitFunction::Exact(m) => m,
            LimitFunction::Grid { values, .. } => values,
        }
    }

    pub fn eval(&self, x: Latent) -> Result<Vec<f64>> {
        match (self, x) {
            (LimitFunction::Exact(m), Latent::Community(k)) => {
                if k >= m.nrows() {
                    return Err(Error::Domain(x.to_string()));
                }
                Ok((0..m.ncols()).map(|j| m[(k, j)]).collect())
            }
            (LimitFunction::Grid { eval, .. }, Latent::Point(t)) => Ok(eval(t)),
            _ => Err(Error::Representation(format!("cannot evaluate at {x}"))),
        }
    }

    /// Sampling operator: row `i` is `f(x_i)`.
    pub fn sample(&self, latents: &[Latent]) -> Result<Mat<f64>> {
        let q = self.dim();
        let mut out = Mat::zeros(latents.len(), q);
        for (i, &x) in latents.iter().enumerate() {
            let v = self.eval(x)?;
            for (j, vj) in v.into_iter().enumerate() {
                out[(i, j)] = vj;
            }
        }
        Ok(out)
    }

    /// Pointwise transformation of the output vector.
    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        let f = Arc::new(f);
        let values = map_rows(self.values(), |row| f(row));
        match self {
            LimitFunction::Exact(_) => LimitFunction::Exact(values),
            LimitFunction::Grid { eval, .. } => {
                let inner = eval.clone();
                LimitFunction::Grid { values, eval: Arc::new(move |t| f(&inner(t))) }
            }
        }
    }

    /// Pointwise `x ↦ f(a(x), b(x))`.
    pub fn combine(
        a: &Self,
        b: &Self,
        f: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if a.values().nrows() != b.values().nrows() {
            return Err(Error::Representation("functions live on different supports".into()));
        }
        let f = Arc::new(f);
        let (va, vb) = (a.values(), b.values());
        let rows: Vec<Vec<f64>> = (0..va.nrows())
            .map(|i| {
                let ra: Vec<f64> = (0..va.ncols()).map(|j| va[(i, j)]).collect();
                let rb: Vec<f64> = (0..vb.ncols()).map(|j| vb[(i, j)]).collect();
                f(&ra, &rb)
            })
            .collect();
        let values = rows_to_mat(&rows);
        match (a, b) {
            (LimitFunction::Exact(_), LimitFunction::Exact(_)) => Ok(LimitFunction::Exact(values)),
            (LimitFunction::Grid { eval: ea, .. }, LimitFunction::Grid { eval: eb, .. }) => {
                let (ea, eb) = (ea.clone(), eb.clone());
                Ok(LimitFunction::Grid { values, eval: Arc::new(move |t| f(&ea(t), &eb(t))) })
            }
            _ => Err(Error::Representation("cannot combine exact and grid functions".into())),
        }
    }

    /// Keeps the listed output coordinates.
    pub fn select(&self, cols: &[usize]) -> Self {
        let cols = cols.to_vec();
        self.map(move |row| cols.iter().map(|&j| row[j]).collect())
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, LimitFunction::Exact(_))
    }
}

fn map_rows(m: &Mat<f64>, f: impl Fn(&[f64]) -> Vec<f64>) -> Mat<f64> {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| {
            let row: Vec<f64> = (0..m.ncols()).map(|j| m[(i, j)]).collect();
            f(&row)
        })
        .collect();
    if rows.is_empty() {
        return Mat::zeros(0, 0);
    }
    rows_to_mat(&rows)
}

fn rows_to_mat(rows: &[Vec<f64>]) -> Mat<f64> {
    let q = rows.first().map_or(0, Vec::len);
    Mat::from_fn(rows.len(), q, |i, j| rows[i][j])
}

/// Eigenpairs of the limit operator, L²(P)-orthonormal.
#[derive(Debug, Clone)]
pub struct LimitEigenSystem {
    pub values: Vec<f64>,
    /// Column `i` is the `i`-th eigenfunction.
    pub functions: LimitFunction,
    /// A requested pair has a zero eigenvalue.
    pub truncated: bool,
    /// Two of the first `q + 1` eigenvalues coincide within the tie tolerance.
    pub multiplicity: bool,
}

impl LimitEigenSystem {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let v = self.functions.values();
        let header: Vec<String> = (0..v.nrows()).map(|k| format!("v{k}")).collect();
        writeln!(out, "index,eigenvalue,{}", header.join(","))?;
        for (i, lambda) in self.values.iter().enumerate() {
            let row: Vec<String> = (0..v.nrows()).map(|k| format!("{:e}", v[(k, i)])).collect();
            writeln!(out, "{i},{lambda:e},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// The shift kernel together with its discretized operator `N diag(ω)`.
#[derive(Debug, Clone)]
pub struct LimitOperator {
    kernel: Arc<ShiftKernel>,
    /// `w_S(y_i, y_j) ω_j` on the support points.
    weighted: Mat<f64>,
}

impl LimitOperator {
    pub fn new(model: &KernelModel, kind: ShiftKind) -> Result<Self> {
        let kernel = ShiftKernel::new(model, kind)?;
        let weights = kernel.discretization().weights.clone();
        let mut weighted = kernel.node_matrix();
        for (j, &w) in weights.iter().enumerate() {
            for i in 0..weighted.nrows() {
                weighted[(i, j)] *= w;
            }
        }
        Ok(Self { kernel: Arc::new(kernel), weighted })
    }

    pub fn shared_kernel(&self) -> Arc<ShiftKernel> {
        self.kernel.clone()
    }

    pub fn kernel(&self) -> &ShiftKernel {
        &self.kernel
    }

    pub fn model(&self) -> &KernelModel {
        self.kernel.model()
    }

    pub fn kind(&self) -> ShiftKind {
        self.kernel.kind()
    }

    fn weights(&self) -> &[f64] {
        &self.kernel.discretization().weights
    }

    fn check(&self, f: &LimitFunction) -> Result<()> {
        let expected = self.kernel.discretization().len();
        if f.is_exact() != self.model().is_sbm() || f.values().nrows() != expected {
            return Err(Error::Representation(format!(
                "function with {} support values does not match this model",
                f.values().nrows()
            )));
        }
        Ok(())
    }

    /// `𝐒f`.
    pub fn apply(&self, f: &LimitFunction) -> Result<LimitFunction> {
        self.check(f)?;
        let values = self.weighted.as_ref() * f.values().as_ref();
        match f {
            LimitFunction::Exact(_) => Ok(LimitFunction::Exact(values)),
            LimitFunction::Grid { values: g, .. } => {
                let kernel = self.kernel.clone();
                let weighted_g = weight_rows(g, self.weights());
                Ok(LimitFunction::Grid {
                    values,
                    eval: Arc::new(move |t| {
                        let row = kernel.row(Latent::Point(t)).unwrap_or_default();
                        row_times(&row, &weighted_g)
                    }),
                })
            }
        }
    }

    /// `‖f‖_{L²(P)}`.
    pub fn l2_norm(&self, f: &LimitFunction) -> Result<f64> {
        self.check(f)?;
        let v = f.values();
        let mut acc = 0.0;
        for (i, &w) in self.weights().iter().enumerate() {
            for j in 0..v.ncols() {
                acc += w * v[(i, j)] * v[(i, j)];
            }
        }
        Ok(acc.sqrt())
    }

    /// `⟨f_i, g_j⟩_{L²(P)}` for all output coordinates.
    pub fn inner_products(&self, f: &LimitFunction, g: &LimitFunction) -> Result<Mat<f64>> {
        self.check(f)?;
        self.check(g)?;
        let wf = weight_rows(f.values(), self.weights());
        Ok(wf.transpose() * g.values().as_ref())
    }

    /// First `q` eigenpairs: nonzero eigenvalues in decreasing order, then zeros.
    pub fn eigenpairs(&self, q: usize) -> Result<LimitEigenSystem> {
        let weights = self.weights().to_vec();
        let m = weights.len();
        if q == 0 || q > m {
            return Err(Error::InvalidArgument(format!("q = {q} outside 1..={m}")));
        }
        let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let node = self.kernel.node_matrix();
        let sym = Mat::from_fn(m, m, |i, j| sqrt_w[i] * node[(i, j)] * sqrt_w[j]);
        let eig = spectral::sym_eig(sym.as_ref())?;

        // nonzero eigenvalues keep their descending order; zeros move to the end
        let mut order: Vec<usize> = (0..m).filter(|&i| eig.values[i].abs() > ZERO_EIGENVALUE).collect();
        order.extend((0..m).filter(|&i| eig.values[i].abs() <= ZERO_EIGENVALUE));

        let values: Vec<f64> = order.iter().take(q).map(|&i| eig.values[i]).collect();
        let truncated = values.iter().any(|v| v.abs() <= ZERO_EIGENVALUE);
        let lookahead: Vec<f64> = order.iter().take(q + 1).map(|&i| eig.values[i]).collect();
        let multiplicity = lookahead.windows(2).any(|w| (w[0] - w[1]).abs() < TIE_TOLERANCE);

        // back to function values; support points without mass are filled by extension
        let mut grid = Mat::zeros(m, q);
        for (c, &i) in order.iter().take(q).enumerate() {
            let lambda = eig.values[i];
            for k in 0..m {
                if weights[k] > 0.0 {
                    grid[(k, c)] = eig.vectors[(k, i)] / sqrt_w[k];
                }
            }
            for k in (0..m).filter(|&k| weights[k] <= 0.0) {
                if lambda.abs() > ZERO_EIGENVALUE {
                    let s: f64 = (0..m).map(|l| self.weighted[(k, l)] * grid[(l, c)]).sum();
                    grid[(k, c)] = s / lambda;
                }
            }
            canonicalize_sign(&mut grid, c);
        }

        let functions = if self.model().is_sbm() {
            LimitFunction::Exact(grid)
        } else {
            let kernel = self.kernel.clone();
            let nodes: Vec<f64> = self
                .kernel
                .discretization()
                .points
                .iter()
                .map(|p| match p {
                    Latent::Point(t) => *t,
                    Latent::Community(_) => unreachable!("continuous support"),
                })
                .collect();
            let weighted_grid = weight_rows(&grid, &weights);
            let grid_copy = grid.clone();
            let lambdas = values.clone();
            LimitFunction::Grid {
                values: grid,
                eval: Arc::new(move |t| {
                    let row = kernel.row(Latent::Point(t)).unwrap_or_default();
                    let ext = row_times(&row, &weighted_grid);
                    ext.iter()
                        .enumerate()
                        .map(|(c, &e)| {
                            if lambdas[c].abs() > ZERO_EIGENVALUE {
                                e / lambdas[c]
                            } else {
                                interpolate(&nodes, &grid_copy, c, t)
                            }
                        })
                        .collect()
                }),
            }
        };
        Ok(LimitEigenSystem { values, functions, truncated, multiplicity })
    }

    /// Powers of the operator applied to `δ_x`, evaluated at `z`:
    /// `[𝐒δ_x(z), …, 𝐒^q δ_x(z)]` with `𝐒δ_x = w_S(·, x)`.
    pub fn s_delta_powers(&self, x: Latent, z: Latent, q: usize) -> Result<Vec<f64>> {
        if q == 0 {
            return Err(Error::InvalidArgument("q must be at least 1".into()));
        }
        let mut g: Vec<f64> = self.kernel.row(x)?;
        let row_z = self.kernel.row(z)?;
        let weights = self.weights();
        let mut out = vec![self.kernel.eval(z, x)?];
        for _ in 1..q {
            // 𝐒^{k+1} δ_x(z) = Σ_j ω_j w_S(z, y_j) 𝐒^k δ_x(y_j)
            out.push(row_z.iter().zip(weights).zip(&g).map(|((r, w), v)| r * w * v).sum());
            g = (0..g.len())
                .map(|i| (0..g.len()).map(|j| self.weighted[(i, j)] * g[j]).sum())
                .collect();
        }
        Ok(out)
    }

    /// Support-point tables `M_k[i, j] = 𝐒^k δ_{y_j}(y_i)` for `k = 1..=q`.
    pub fn kernel_power_tables(&self, q: usize) -> Vec<Mat<f64>> {
        let mut tables = vec![self.kernel.node_matrix()];
        for _ in 1..q {
            let next = self.weighted.as_ref() * tables.last().expect("nonempty").as_ref();
            tables.push(next);
        }
        tables
    }

    /// `Σ_i |λ_i|` over the discretized spectrum.
    pub fn trace_norm(&self) -> Result<f64> {
        let m = self.weights().len();
        let sqrt_w: Vec<f64> = self.weights().iter().map(|w| w.sqrt()).collect();
        let node = self.kernel.node_matrix();
        let sym = Mat::from_fn(m, m, |i, j| sqrt_w[i] * node[(i, j)] * sqrt_w[j]);
        Ok(spectral::sym_eigenvalues(sym.as_ref())?.iter().map(|v| v.abs()).sum())
    }
}

fn canonicalize_sign(m: &mut Mat<f64>, col: usize) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for i in 0..m.nrows() {
        let v = m[(i, col)];
        if v.abs() > best + 1e-12 {
            best = v.abs();
            sign = v.signum();
        }
    }
    if sign < 0.0 {
        for i in 0..m.nrows() {
            m[(i, col)] = -m[(i, col)];
        }
    }
}

fn weight_rows(m: &Mat<f64>, w: &[f64]) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| w[i] * m[(i, j)])
}

fn row_times(row: &[f64], m: &Mat<f64>) -> Vec<f64> {
    (0..m.ncols()).map(|j| row.iter().enumerate().map(|(i, r)| r * m[(i, j)]).sum()).collect()
}

fn interpolate(nodes: &[f64], grid: &Mat<f64>, col: usize, t: f64) -> f64 {
    let k = nodes.partition_point(|&y| y < t);
    if k == 0 {
        return grid[(0, col)];
    }
    if k >= nodes.len() {
        return grid[(nodes.len() - 1, col)];
    }
    let (a, b) = (nodes[k - 1], nodes[k]);
    let s = (t - a) / (b - a);
    (1.0 - s) * grid[(k - 1, col)] + s * grid[(k, col)]
}

pub fn apply_limit_operator(model: &KernelModel, kind: ShiftKind, f: &LimitFunction) -> Result<LimitFunction> {
    LimitOperator::new(model, kind)?.apply(f)
}

pub fn limit_eigenpairs(model: &KernelModel, kind: ShiftKind, q: usize) -> Result<LimitEigenSystem> {
    LimitOperator::new(model, kind)?.eigenpairs(q)
}

pub fn s_delta_powers(
    model: &KernelModel,
    kind: ShiftKind,
    x: Latent,
    z: Latent,
    q: usize,
) -> Result<Vec<f64>> {
    LimitOperator::new(model, kind)?.s_delta_powers(x, z, q)
}

pub fn l2_norm(f: &LimitFunction, model: &KernelModel) -> Result<f64> {
    LimitOperator::new(model, ShiftKind::NormalizedAdjacency)?.l2_norm(f)
}
