//! Latent spaces, connectivity kernels and the shift kernel `w_S`.
//!
//! Two families are supported. A stochastic block model has a finite latent
//! space of `K` communities (indexed from 0) with connection matrix `C` and
//! community distribution `P`. A continuous model lives on an interval with the
//! uniform distribution and a smooth symmetric kernel; integrals against `P`
//! are computed with a fixed Gauss–Legendre rule.

use std::fmt;

use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

/// Minimum admissible degree when the normalized Laplacian is used.
pub const MIN_DEGREE: f64 = 1e-6;

pub const DEFAULT_BANDWIDTH: f64 = 0.5;
pub const DEFAULT_QUADRATURE_NODES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    /// `S = A / (n alpha_n)`, limit kernel `w`.
    NormalizedAdjacency,
    /// `S = D^{-1/2} A D^{-1/2}`, limit kernel `w / sqrt(d d)`.
    NormalizedLaplacian,
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShiftKind::NormalizedAdjacency => f.write_str("adjacency"),
            ShiftKind::NormalizedLaplacian => f.write_str("laplacian"),
        }
    }
}

/// A point of the latent space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Latent {
    Community(usize),
    Point(f64),
}

impl fmt::Display for Latent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Latent::Community(k) => write!(f, "community {k}"),
            Latent::Point(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelProfile {
    /// `exp(-(x - y)^2 / (2 sigma^2))`
    Gaussian { bandwidth: f64 },
    Constant { value: f64 },
}

impl KernelProfile {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            KernelProfile::Gaussian { bandwidth } => {
                let d = x - y;
                (-(d * d) / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelProfile::Constant { value } => value,
        }
    }

    fn max(&self) -> f64 {
        match *self {
            KernelProfile::Gaussian { .. } => 1.0,
            KernelProfile::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SbmKernel {
    c: Mat<f64>,
    p: Vec<f64>,
}

impl SbmKernel {
    pub fn communities(&self) -> usize {
        self.p.len()
    }

    pub fn connection(&self) -> &Mat<f64> {
        &self.c
    }

    pub fn proportions(&self) -> &[f64] {
        &self.p
    }
}

#[derive(Debug, Clone)]
pub struct ContinuousKernel {
    lo: f64,
    hi: f64,
    profile: KernelProfile,
    quadrature: Quadrature,
}

impl ContinuousKernel {
    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn profile(&self) -> &KernelProfile {
        &self.profile
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }
}

/// Support points and probability weights that represent `P` exactly (SBM) or
/// through quadrature (continuous).
#[derive(Debug, Clone)]
pub struct Discretization {
    pub points: Vec<Latent>,
    pub weights: Vec<f64>,
}

impl Discretization {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A latent space with distribution `P` and connectivity kernel `w`.
#[derive(Debug, Clone)]
pub enum KernelModel {
    Sbm(SbmKernel),
    Continuous(ContinuousKernel),
}

impl KernelModel {
    pub fn sbm(c: Vec<Vec<f64>>, p: Vec<f64>) -> Result<Self> {
        let k = p.len();
        if k == 0 {
            return Err(Error::InvalidModel("SBM needs at least one community".into()));
        }
        if c.len() != k || c.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidModel(format!("C must be {k}x{k}")));
        }
        for (a, row) in c.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidModel(format!("C[{a}][{b}] = {v} not in [0, 1]")));
                }
                if v != c[b][a] {
                    return Err(Error::InvalidModel(format!("C not symmetric at ({a}, {b})")));
                }
            }
        }
        if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidModel("P must be nonnegative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("P sums to {total}, expected 1")));
        }
        let c = Mat::from_fn(k, k, |a, b| c[a][b]);
        Ok(KernelModel::Sbm(SbmKernel { c, p }))
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::continuous(
            -1.0,
            1.0,
            KernelProfile::Gaussian { bandwidth },
            DEFAULT_QUADRATURE_NODES,
        )
    }

    pub fn continuous(lo: f64, hi: f64, profile: KernelProfile, nodes: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidModel(format!("bad interval [{lo}, {hi}]")));
        }
        if nodes == 0 {
            return Err(Error::InvalidModel("quadrature needs at least one node".into()));
        }
        match profile {
            KernelProfile::Gaussian { bandwidth } if !(bandwidth > 0.0) => {
                return Err(Error::InvalidModel(format!("bandwidth {bandwidth} must be > 0")));
            }
            KernelProfile::Constant { value } if !(0.0..=1.0).contains(&value) => {
                return Err(Error::InvalidModel(format!("constant kernel {value} not in [0, 1]")));
            }
            _ => {}
        }
        Ok(KernelModel::Continuous(ContinuousKernel {
            lo,
            hi,
            profile,
            quadrature: Quadrature::uniform(lo, hi, nodes),
        }))
    }

    /// Same model with a different number of quadrature nodes. No-op for SBMs.
    pub fn with_quadrature_nodes(&self, nodes: usize) -> Result<Self> {
        match self {
            KernelModel::Sbm(_) => Ok(self.clone()),
            KernelModel::Continuous(k) => Self::continuous(k.lo, k.hi, k.profile.clone(), nodes),
        }
    }

    pub fn is_sbm(&self) -> bool {
        matches!(self, KernelModel::Sbm(_))
    }

    pub fn validate(&self, x: Latent) -> Result<()> {
        match (self, x) {
            (KernelModel::Sbm(s), Latent::Community(k)) if k < s.communities() => Ok(()),
            (KernelModel::Continuous(c), Latent::Point(t)) if t >= c.lo && t <= c.hi => Ok(()),
            _ => Err(Error::Domain(x.to_string())),
        }
    }

    pub fn eval(&self, x: Latent, y: Latent) -> Result<f64> {
        self.validate(x)?;
        self.validate(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: Latent, y: Latent) -> f64 {
        match (self, x, y) {
            (KernelModel::Sbm(s), Latent::Community(a), Latent::Community(b)) => s.c[(a, b)],
            (KernelModel::Continuous(c), Latent::Point(a), Latent::Point(b)) => {
                c.profile.eval(a, b)
            }
            _ => unreachable!("latent kind checked by caller"),
        }
    }

    pub fn kernel_max(&self) -> f64 {
        match self {
            KernelModel::Sbm(s) => {
                let k = s.communities();
                (0..k)
                    .flat_map(|a| (0..k).map(move |b| (a, b)))
                    .map(|(a, b)| s.c[(a, b)])
                    .fold(0.0, f64::max)
            }
            KernelModel::Continuous(c) => c.profile.max(),
        }
    }

    pub fn discretization(&self) -> Discretization {
        match self {
            KernelModel::Sbm(s) => Discretization {
                points: (0..s.communities()).map(Latent::Community).collect(),
                weights: s.p.clone(),
            },
            KernelModel::Continuous(c) => Discretization {
                points: c.quadrature.nodes.iter().copied().map(Latent::Point).collect(),
                weights: c.quadrature.weights.clone(),
            },
        }
    }

    /// `d(x) = ∫ w(x, y) dP(y)`; exact `(C P)_x` for SBMs.
    pub fn degree(&self, x: Latent) -> Result<f64> {
        self.validate(x)?;
        Ok(self.degree_unchecked(x))
    }

    pub(crate) fn degree_unchecked(&self, x: Latent) -> f64 {
        match (self, x) {
            (KernelModel::Sbm(s), Latent::Community(a)) => {
                s.p.iter().enumerate().map(|(b, &pb)| s.c[(a, b)] * pb).sum()
            }
            (KernelModel::Continuous(c), Latent::Point(t)) => {
                c.quadrature.integrate(|y| c.profile.eval(t, y))
            }
            _ => unreachable!("latent kind checked by caller"),
        }
    }

    pub fn w_shift(&self, kind: ShiftKind, x: Latent, y: Latent) -> Result<f64> {
        let w = self.eval(x, y)?;
        match kind {
            ShiftKind::NormalizedAdjacency => Ok(w),
            ShiftKind::NormalizedLaplacian => {
                let dx = self.degree_unchecked(x);
                let dy = self.degree_unchecked(y);
                if !(dx > 0.0 && dy > 0.0) {
                    return Err(Error::DegenerateModel(format!(
                        "zero degree at {x} or {y} under the normalized Laplacian"
                    )));
                }
                Ok(w / (dx * dy).sqrt())
            }
        }
    }

    /// Minimum of the degree function over the support points.
    pub fn min_degree(&self) -> f64 {
        self.discretization()
            .points
            .iter()
            .map(|&x| self.degree_unchecked(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> Latent {
        match self {
            KernelModel::Sbm(s) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, &pk) in s.p.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        return Latent::Community(k);
                    }
                }
                // u landed in the rounding slack; pick the last community with mass
                let last = s.p.iter().rposition(|&pk| pk > 0.0).unwrap_or(0);
                Latent::Community(last)
            }
            KernelModel::Continuous(c) => {
                let u: f64 = rng.random();
                Latent::Point(c.lo + (c.hi - c.lo) * u)
            }
        }
    }

    /// Relabel communities: `perm[k]` is the new label of community `k`.
    /// The result satisfies `w'(perm[a], perm[b]) = w(a, b)` and `P'[perm[k]] = P[k]`.
    pub fn permute_communities(&self, perm: &[usize]) -> Result<Self> {
        let KernelModel::Sbm(s) = self else {
            return Err(Error::InvalidArgument("relabeling requires an SBM".into()));
        };
        let k = s.communities();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&j| j >= k || std::mem::replace(&mut seen[j], true)) {
            return Err(Error::InvalidArgument("not a permutation of the communities".into()));
        }
        let mut c = Mat::zeros(k, k);
        let mut p = vec![0.0; k];
        for a in 0..k {
            p[perm[a]] = s.p[a];
            for b in 0..k {
                c[(perm[a], perm[b])] = s.c[(a, b)];
            }
        }
        Ok(KernelModel::Sbm(SbmKernel { c, p }))
    }
}

/// The shift kernel `w_S` with degrees cached on the support points.
#[derive(Debug, Clone)]
pub struct ShiftKernel {
    model: KernelModel,
    kind: ShiftKind,
    disc: Discretization,
    node_degrees: Vec<f64>,
}

impl ShiftKernel {
    /// Fails with a degenerate-model error when the Laplacian is requested and
    /// the degree function drops below [`MIN_DEGREE`] on the support points.
    pub fn new(model: &KernelModel, kind: ShiftKind) -> Result<Self> {
        let disc = model.discretization();
        let node_degrees: Vec<f64> =
            disc.points.iter().map(|&x| model.degree_unchecked(x)).collect();
        if kind == ShiftKind::NormalizedLaplacian {
            let dmin = node_degrees.iter().copied().fold(f64::INFINITY, f64::min);
            if !(dmin >= MIN_DEGREE) {
                return Err(Error::DegenerateModel(format!(
                    "min degree {dmin:e} below {MIN_DEGREE:e}"
                )));
            }
        }
        Ok(Self { model: model.clone(), kind, disc, node_degrees })
    }

    pub fn model(&self) -> &KernelModel {
        &self.model
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn degree_of(&self, x: Latent) -> f64 {
        match x {
            Latent::Community(k) => self.node_degrees[k],
            Latent::Point(_) => self.model.degree_unchecked(x),
        }
    }

    pub fn eval(&self, x: Latent, y: Latent) -> Result<f64> {
        self.model.validate(x)?;
        self.model.validate(y)?;
        let w = self.model.eval_unchecked(x, y);
        Ok(match self.kind {
            ShiftKind::NormalizedAdjacency => w,
            ShiftKind::NormalizedLaplacian => w / (self.degree_of(x) * self.degree_of(y)).sqrt(),
        })
    }

    /// `w_S(y_i, y_j)` over all pairs of support points.
    pub fn node_matrix(&self) -> Mat<f64> {
        let pts = &self.disc.points;
        let m = pts.len();
        Mat::from_fn(m, m, |i, j| {
            let w = self.model.eval_unchecked(pts[i], pts[j]);
            match self.kind {
                ShiftKind::NormalizedAdjacency => w,
                ShiftKind::NormalizedLaplacian => {
                    w / (self.node_degrees[i] * self.node_degrees[j]).sqrt()
                }
            }
        })
    }

    /// `[w_S(x, y_j)]_j` against every support point.
    pub fn row(&self, x: Latent) -> Result<Vec<f64>> {
        self.model.validate(x)?;
        let dx = match self.kind {
            ShiftKind::NormalizedAdjacency => 1.0,
            ShiftKind::NormalizedLaplacian => self.degree_of(x).sqrt(),
        };
        Ok(self
            .disc
            .points
            .iter()
            .zip(&self.node_degrees)
            .map(|(&y, &dy)| {
                let w = self.model.eval_unchecked(x, y);
                match self.kind {
                    ShiftKind::NormalizedAdjacency => w,
                    ShiftKind::NormalizedLaplacian => w / (dx * dy.sqrt()),
                }
            })
            .collect())
    }

    /// Degrees at arbitrary latents, for building Gram matrices in bulk.
    pub fn degrees(&self, xs: &[Latent]) -> Result<Vec<f64>> {
        xs.iter()
            .map(|&x| {
                self.model.validate(x)?;
                Ok(self.degree_of(x))
            })
            .collect()
    }
}

/// Serializable model description, as found under `[model]` in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Sbm {
        c: Vec<Vec<f64>>,
        p: Vec<f64>,
    },
    Gaussian {
        #[serde(default = "default_bandwidth")]
        bandwidth: f64,
        #[serde(default = "default_interval")]
        interval: [f64; 2],
        #[serde(default = "default_nodes")]
        quadrature_nodes: usize,
    },
    Constant {
        value: f64,
        #[serde(default = "default_interval")]
        interval: [f64; 2],
        #[serde(default = "default_nodes")]
        quadrature_nodes: usize,
    },
}

fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH
}

fn default_interval() -> [f64; 2] {
    [-1.0, 1.0]
}

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

impl ModelSpec {
    pub fn build(&self) -> Result<KernelModel> {
        match self {
            ModelSpec::Sbm { c, p } => KernelModel::sbm(c.clone(), p.clone()),
            ModelSpec::Gaussian { bandwidth, interval, quadrature_nodes } => {
                KernelModel::continuous(
                    interval[0],
                    interval[1],
                    KernelProfile::Gaussian { bandwidth: *bandwidth },
                    *quadrature_nodes,
                )
            }
            ModelSpec::Constant { value, interval, quadrature_nodes } => KernelModel::continuous(
                interval[0],
                interval[1],
                KernelProfile::Constant { value: *value },
                *quadrature_nodes,
            ),
        }
    }

    pub fn default_gaussian() -> Self {
        ModelSpec::Gaussian {
            bandwidth: DEFAULT_BANDWIDTH,
            interval: default_interval(),
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        }
    }
}
