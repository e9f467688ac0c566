//! Latent-position random graphs, their shift matrices, Gram matrices and
//! noisy node features.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use faer::{Mat, MatRef};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::{KernelModel, Latent, ShiftKernel, ShiftKind};
use crate::rng;
use crate::spectral;

/// An undirected simple graph with latent positions.
#[derive(Debug, Clone)]
pub struct Graph {
    pub latents: Vec<Latent>,
    /// Symmetric 0/1 matrix with zero diagonal.
    pub adjacency: Mat<f64>,
    pub alpha: f64,
    pub features: Option<Mat<f64>>,
}

impl Graph {
    pub fn n(&self) -> usize {
        self.latents.len()
    }

    pub fn degrees(&self) -> Vec<f64> {
        let a = &self.adjacency;
        (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).sum()).collect()
    }

    pub fn edge_count(&self) -> usize {
        (self.degrees().iter().sum::<f64>() / 2.0).round() as usize
    }

    pub fn zero_degree_count(&self) -> usize {
        self.degrees().iter().filter(|&&d| d == 0.0).count()
    }

    /// Relabels nodes: node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.n();
        let inv = inverse_permutation(perm, n)?;
        let latents = (0..n).map(|i| self.latents[inv[i]]).collect();
        let adjacency = Mat::from_fn(n, n, |i, j| self.adjacency[(inv[i], inv[j])]);
        let features = self
            .features
            .as_ref()
            .map(|z| Mat::from_fn(n, z.ncols(), |i, j| z[(inv[i], j)]));
        Ok(Graph { latents, adjacency, alpha: self.alpha, features })
    }

    /// Writes `i j` per undirected edge (`i < j`) and one latent per line.
    pub fn write_files(&self, edges: &Path, latents: &Path) -> Result<()> {
        let mut e = BufWriter::new(File::create(edges)?);
        writeln!(e, "# nodes={} alpha={}", self.n(), self.alpha)?;
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                if self.adjacency[(i, j)] != 0.0 {
                    writeln!(e, "{i} {j}")?;
                }
            }
        }
        e.flush()?;
        let mut l = BufWriter::new(File::create(latents)?);
        for x in &self.latents {
            match x {
                Latent::Community(k) => writeln!(l, "{k}")?,
                Latent::Point(t) => writeln!(l, "{t:?}")?,
            }
        }
        l.flush()?;
        Ok(())
    }

    /// Reads files produced by [`Graph::write_files`]; the model decides how latents parse.
    pub fn read_files(model: &KernelModel, edges: &Path, latents: &Path) -> Result<Graph> {
        let mut xs = Vec::new();
        for line in BufReader::new(File::open(latents)?).lines() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let x = if model.is_sbm() {
                Latent::Community(t.parse().map_err(|e| Error::Parse(format!("{t}: {e}")))?)
            } else {
                Latent::Point(t.parse().map_err(|e| Error::Parse(format!("{t}: {e}")))?)
            };
            model.validate(x)?;
            xs.push(x);
        }
        let n = xs.len();
        let mut alpha = 1.0;
        let mut adjacency = Mat::zeros(n, n);
        for line in BufReader::new(File::open(edges)?).lines() {
            let line = line?;
            let t = line.trim();
            if let Some(header) = t.strip_prefix('#') {
                for tok in header.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("alpha=") {
                        alpha = v.parse().map_err(|e| Error::Parse(format!("{v}: {e}")))?;
                    }
                    if let Some(v) = tok.strip_prefix("nodes=") {
                        let declared: usize = v.parse().map_err(|e| Error::Parse(format!("{v}: {e}")))?;
                        if declared != n {
                            return Err(Error::Parse(format!("{declared} nodes declared, {n} latents")));
                        }
                    }
                }
                continue;
            }
            if t.is_empty() {
                continue;
            }
            let mut it = t.split_whitespace();
            let mut node = || -> Result<usize> {
                let tok = it.next().ok_or_else(|| Error::Parse(format!("bad edge line '{t}'")))?;
                let v: usize = tok.parse().map_err(|e| Error::Parse(format!("{tok}: {e}")))?;
                if v >= n {
                    return Err(Error::Parse(format!("node {v} out of range")));
                }
                Ok(v)
            };
            let (i, j) = (node()?, node()?);
            if i == j {
                return Err(Error::Parse(format!("self-loop at {i}")));
            }
            adjacency[(i, j)] = 1.0;
            adjacency[(j, i)] = 1.0;
        }
        Ok(Graph { latents: xs, adjacency, alpha, features: None })
    }
}

fn inverse_permutation(perm: &[usize], n: usize) -> Result<Vec<usize>> {
    if perm.len() != n {
        return Err(Error::InvalidArgument(format!("permutation of length {} for {n} nodes", perm.len())));
    }
    let mut inv = vec![usize::MAX; n];
    for (i, &p) in perm.iter().enumerate() {
        if p >= n || inv[p] != usize::MAX {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
        inv[p] = i;
    }
    Ok(inv)
}

/// Samples `n` latents i.i.d. from `P` and edges `a_ij ~ Bernoulli(α w(x_i, x_j))` for `i < j`.
pub fn sample_graph_with<R: Rng + ?Sized>(model: &KernelModel, n: usize, alpha: f64, rng: &mut R) -> Result<Graph> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha {alpha} must be positive")));
    }
    let top = alpha * model.kernel_max();
    if top > 1.0 {
        return Err(Error::InvalidProbability(top));
    }
    if alpha > 1.0 {
        return Err(Error::InvalidArgument(format!("alpha {alpha} exceeds 1")));
    }
    let latents: Vec<Latent> = (0..n).map(|_| model.sample_latent(rng)).collect();
    let mut adjacency = Mat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let p = alpha * model.eval_unchecked(latents[i], latents[j]);
            let u: f64 = rng.random();
            if u < p {
                adjacency[(i, j)] = 1.0;
                adjacency[(j, i)] = 1.0;
            }
        }
    }
    Ok(Graph { latents, adjacency, alpha, features: None })
}

pub fn sample_graph(model: &KernelModel, n: usize, alpha: f64, seed: u64) -> Result<Graph> {
    sample_graph_with(model, n, alpha, &mut rng::from_seed(seed))
}

/// `A / (n α)` or `D^{-1/2} A D^{-1/2}`; isolated nodes get zero rows and columns.
pub fn shift_matrix(g: &Graph, kind: ShiftKind) -> Mat<f64> {
    let n = g.n();
    let a = &g.adjacency;
    match kind {
        ShiftKind::NormalizedAdjacency => {
            let scale = 1.0 / (n as f64 * g.alpha);
            Mat::from_fn(n, n, |i, j| a[(i, j)] * scale)
        }
        ShiftKind::NormalizedLaplacian => {
            let inv_sqrt: Vec<f64> = g
                .degrees()
                .iter()
                .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
                .collect();
            Mat::from_fn(n, n, |i, j| a[(i, j)] * (inv_sqrt[i] * inv_sqrt[j]))
        }
    }
}

/// `W_ij = w_S(x_i, x_j) / n`, diagonal included.
pub fn gram_matrix(model: &KernelModel, latents: &[Latent], kind: ShiftKind) -> Result<Mat<f64>> {
    let n = latents.len();
    for &x in latents {
        model.validate(x)?;
    }
    let scale = 1.0 / n as f64;
    let inv_sqrt = match kind {
        ShiftKind::NormalizedAdjacency => vec![1.0; n],
        ShiftKind::NormalizedLaplacian => {
            let sk = ShiftKernel::new(model, kind)?;
            sk.degrees(latents)?
                .into_iter()
                .map(|d| {
                    if d > 0.0 {
                        Ok(1.0 / d.sqrt())
                    } else {
                        Err(Error::DegenerateModel("zero degree under the normalized Laplacian".into()))
                    }
                })
                .collect::<Result<Vec<f64>>>()?
        }
    };
    Ok(Mat::from_fn(n, n, |i, j| {
        model.eval_unchecked(latents[i], latents[j]) * (inv_sqrt[i] * inv_sqrt[j]) * scale
    }))
}

/// Covariance of the additive feature noise.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    covariance: Mat<f64>,
    factor: Mat<f64>,
}

impl NoiseSpec {
    pub fn new(covariance: Mat<f64>) -> Result<Self> {
        let p = covariance.nrows();
        if covariance.ncols() != p {
            return Err(Error::Shape("covariance must be square".into()));
        }
        spectral::check_finite(covariance.as_ref())?;
        for i in 0..p {
            for j in 0..p {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("covariance not symmetric".into()));
                }
            }
        }
        let eig = spectral::sym_eig(covariance.as_ref())?;
        let scale = eig.values.first().map_or(0.0, |v| v.abs()).max(1.0);
        if eig.values.iter().any(|&v| v < -1e-12 * scale) {
            return Err(Error::InvalidArgument("covariance not positive semidefinite".into()));
        }
        // symmetric square root
        let factor = eig.filtered(|l| l.max(0.0).sqrt());
        Ok(Self { covariance, factor })
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        let p = variances.len();
        Self::new(Mat::from_fn(p, p, |i, j| if i == j { variances[i] } else { 0.0 }))
    }

    pub fn isotropic(p: usize, variance: f64) -> Result<Self> {
        Self::diagonal(&vec![variance; p])
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> MatRef<'_, f64> {
        self.covariance.as_ref()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.covariance[(i, i)]).sum()
    }
}

/// Row `i` is `f0(x_i) + ν_i` with `ν_i` i.i.d. centered Gaussian of the given covariance.
pub fn noisy_features_with<R: Rng + ?Sized>(
    f0: impl Fn(Latent) -> Vec<f64>,
    latents: &[Latent],
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<Mat<f64>> {
    let p = noise.dim();
    let n = latents.len();
    let mut z = Mat::zeros(n, p);
    let mut xi = vec![0.0; p];
    for (i, &x) in latents.iter().enumerate() {
        let base = f0(x);
        if base.len() != p {
            return Err(Error::Shape(format!("f0 has dimension {}, noise {p}", base.len())));
        }
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for j in 0..p {
            let mut v = base[j];
            for (k, &e) in xi.iter().enumerate() {
                v += noise.factor[(j, k)] * e;
            }
            z[(i, j)] = v;
        }
    }
    Ok(z)
}

pub fn noisy_features(
    f0: impl Fn(Latent) -> Vec<f64>,
    latents: &[Latent],
    noise: &NoiseSpec,
    seed: u64,
) -> Result<Mat<f64>> {
    noisy_features_with(f0, latents, noise, &mut rng::from_seed(seed))
}
