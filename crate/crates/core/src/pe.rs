//! Positional encodings and their continuous limits.
//!
//! * SignNet: `[(Q f_i)(√n u_i)]_i` over the leading eigenvectors of `S`.
//! * Distance: `(1/n) Σ_j f(n [S_γ e_j, …, S_γ^q e_j])`, a deep set over columns of powers of a filtered `S`.
//! * Smoothing: `S Z`.

use std::io::Write;
use std::sync::Arc;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::kernel::Latent;
use crate::limit::{LimitEigenSystem, LimitFunction, LimitOperator};
use crate::nn::{signnet_symmetrize, MlpParams};
use crate::spectral::{self, MatrixEigenSystem, SpectralFilter};

/// Leading sampled eigenvalues closer than this trigger a multiplicity warning.
pub const PE_TIE_TOLERANCE: f64 = 1e-9;
/// `‖S_γ‖^q` above this triggers a conditioning warning.
pub const POWER_GROWTH_LIMIT: f64 = 1e6;
pub const MAX_POWERS: usize = 8;
const TARGET_BLOCK: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub enum PeConfig {
    SignNet {
        /// One `1 → p_i` branch per eigenvector.
        branches: Vec<MlpParams>,
        normalize: bool,
    },
    Distance {
        q: usize,
        /// `q → p` network applied to each node/target pair.
        mlp: MlpParams,
        normalize: bool,
        filter: Option<SpectralFilter>,
    },
    Smoothing,
}

impl PeConfig {
    pub fn family(&self) -> &'static str {
        match self {
            PeConfig::SignNet { .. } => "signnet",
            PeConfig::Distance { .. } => "distance",
            PeConfig::Smoothing => "smoothing",
        }
    }

    pub fn q(&self) -> usize {
        match self {
            PeConfig::SignNet { branches, .. } => branches.len(),
            PeConfig::Distance { q, .. } => *q,
            PeConfig::Smoothing => 1,
        }
    }

    pub fn normalize(&self) -> bool {
        match self {
            PeConfig::SignNet { normalize, .. } | PeConfig::Distance { normalize, .. } => *normalize,
            PeConfig::Smoothing => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PeConfig::SignNet { branches, .. } => {
                if branches.is_empty() {
                    return Err(Error::InvalidArgument("SignNet needs at least one branch".into()));
                }
                if let Some(b) = branches.iter().find(|b| b.d_in() != 1) {
                    return Err(Error::Shape(format!("SignNet branch takes {} inputs, expected 1", b.d_in())));
                }
            }
            PeConfig::Distance { q, mlp, .. } => {
                if *q == 0 || *q > MAX_POWERS {
                    return Err(Error::InvalidArgument(format!("q = {q} outside 1..={MAX_POWERS}")));
                }
                if mlp.d_in() != *q {
                    return Err(Error::Shape(format!("distance MLP takes {} inputs, expected {q}", mlp.d_in())));
                }
            }
            PeConfig::Smoothing => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeWarning {
    /// Sampled eigenvalues `index` and `index + 1` nearly coincide.
    Multiplicity { index: usize, gap: f64 },
    /// Powers of the filtered shift may blow up.
    Conditioning { norm: f64, q: usize },
}

#[derive(Debug, Clone)]
pub struct PeOutput {
    pub matrix: Mat<f64>,
    pub warnings: Vec<PeWarning>,
}

fn tie_warnings(values: &[f64], q: usize) -> Vec<PeWarning> {
    values
        .iter()
        .take(q + 1)
        .collect::<Vec<_>>()
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let gap = (w[0] - w[1]).abs();
            (gap < PE_TIE_TOLERANCE).then_some(PeWarning::Multiplicity { index: i, gap })
        })
        .collect()
}

/// SignNet encoding from a precomputed eigendecomposition of `S`.
pub fn signnet_pe_from_eig(eig: &MatrixEigenSystem, branches: &[MlpParams], normalize: bool) -> Result<PeOutput> {
    let n = eig.dim();
    let q = branches.len();
    if q > n {
        return Err(Error::InvalidArgument(format!("q = {q} exceeds n = {n}")));
    }
    let scale = if normalize { (n as f64).sqrt() } else { 1.0 };
    let widths: usize = branches.iter().map(MlpParams::d_out).sum();
    let mut out = Mat::zeros(n, widths);
    let mut col = 0;
    for (i, branch) in branches.iter().enumerate() {
        let u: Vec<f64> = (0..n).map(|k| scale * eig.vectors[(k, i)]).collect();
        let z = signnet_symmetrize(branch, &u)?;
        for j in 0..z.ncols() {
            for k in 0..n {
                out[(k, col + j)] = z[(k, j)];
            }
        }
        col += z.ncols();
    }
    Ok(PeOutput { matrix: out, warnings: tie_warnings(&eig.values, q) })
}

pub fn signnet_pe(s: MatRef<'_, f64>, branches: &[MlpParams], normalize: bool) -> Result<PeOutput> {
    PeConfig::SignNet { branches: branches.to_vec(), normalize }.validate()?;
    signnet_pe_from_eig(&spectral::sym_eig(s)?, branches, normalize)
}

/// Distance encoding. Powers are built against blocks of target columns, so
/// `S^k` is never formed on its own.
pub fn distance_pe(
    s: MatRef<'_, f64>,
    q: usize,
    mlp: &MlpParams,
    normalize: bool,
    filter: Option<&SpectralFilter>,
) -> Result<PeOutput> {
    PeConfig::Distance { q, mlp: mlp.clone(), normalize, filter: filter.cloned() }.validate()?;
    if s.nrows() != s.ncols() {
        return Err(Error::Shape("shift must be square".into()));
    }
    spectral::check_finite(s)?;
    let n = s.nrows();
    let (shift, norm) = match filter {
        Some(h) => {
            let eig = spectral::sym_eig(s)?;
            let norm = eig.values.iter().fold(0.0f64, |m, &l| m.max(h.eval(l).abs()));
            (eig.filtered(|l| h.eval(l)), norm)
        }
        None => (s.to_owned(), spectral::op_norm_estimate(s)?),
    };
    let mut warnings = Vec::new();
    let growth = norm.powi(q as i32);
    if !growth.is_finite() || growth > POWER_GROWTH_LIMIT {
        warnings.push(PeWarning::Conditioning { norm, q });
    }
    let scale = if normalize { n as f64 } else { 1.0 };
    let p = mlp.d_out();
    let mut acc = Mat::<f64>::zeros(n, p);
    let mut start = 0;
    while start < n {
        let width = TARGET_BLOCK.min(n - start);
        let mut power = shift.as_ref().subcols(start, width).to_owned();
        // rows (j, i) for j in block, i in nodes; column k holds (S^{k+1})_{ij}
        let mut stacked = Mat::<f64>::zeros(width * n, q);
        for k in 0..q {
            if k > 0 {
                power = shift.as_ref() * power.as_ref();
            }
            for j in 0..width {
                for i in 0..n {
                    stacked[(j * n + i, k)] = scale * power[(i, j)];
                }
            }
        }
        let out = mlp.forward(stacked.as_ref())?;
        for j in 0..width {
            for i in 0..n {
                for c in 0..p {
                    acc[(i, c)] += out[(j * n + i, c)];
                }
            }
        }
        start += width;
    }
    let inv = 1.0 / n as f64;
    Ok(PeOutput { matrix: Mat::from_fn(n, p, |i, c| acc[(i, c)] * inv), warnings })
}

pub fn smoothing_pe(s: MatRef<'_, f64>, z: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if s.nrows() != s.ncols() || s.ncols() != z.nrows() {
        return Err(Error::Shape(format!(
            "shift {}x{} against features with {} rows",
            s.nrows(),
            s.ncols(),
            z.nrows()
        )));
    }
    Ok(s * z)
}

/// Dispatches on the configured family. `z` is required for smoothing.
pub fn positional_encoding(s: MatRef<'_, f64>, z: Option<MatRef<'_, f64>>, cfg: &PeConfig) -> Result<PeOutput> {
    cfg.validate()?;
    match cfg {
        PeConfig::SignNet { branches, normalize } => signnet_pe(s, branches, *normalize),
        PeConfig::Distance { q, mlp, normalize, filter } => distance_pe(s, *q, mlp, *normalize, filter.as_ref()),
        PeConfig::Smoothing => {
            let z = z.ok_or_else(|| Error::InvalidArgument("smoothing needs node features".into()))?;
            Ok(PeOutput { matrix: smoothing_pe(s, z)?, warnings: Vec::new() })
        }
    }
}

/// `x ↦ [(Q f_i)(u_i(x))]_i` for the limit eigenfunctions.
pub fn limit_signnet_pe(sys: &LimitEigenSystem, branches: &[MlpParams]) -> Result<LimitFunction> {
    if branches.len() > sys.functions.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} branches for {} eigenfunctions",
            branches.len(),
            sys.functions.dim()
        )));
    }
    let branches: Arc<Vec<MlpParams>> = Arc::new(branches.to_vec());
    Ok(sys.functions.map(move |u| {
        let mut out = Vec::new();
        for (i, b) in branches.iter().enumerate() {
            let plus = b.eval_row(&[u[i]]).expect("branch width checked");
            let minus = b.eval_row(&[-u[i]]).expect("branch width checked");
            out.extend(plus.iter().zip(&minus).map(|(a, c)| a + c));
        }
        out
    }))
}

/// `z ↦ ∫ f([𝐒δ_x(z), …, 𝐒^q δ_x(z)]) dP(x)`, the limit of the normalized distance encoding
/// with no filter.
pub fn limit_distance_pe(op: &LimitOperator, q: usize, mlp: &MlpParams) -> Result<LimitFunction> {
    PeConfig::Distance { q, mlp: mlp.clone(), normalize: true, filter: None }.validate()?;
    let tables = op.kernel_power_tables(q);
    let weights = op.kernel().discretization().weights.clone();
    let m = weights.len();
    let p = mlp.d_out();

    let aggregate = |rows: &dyn Fn(usize, usize) -> f64| -> Result<Vec<f64>> {
        let input = Mat::from_fn(m, q, |j, k| rows(j, k));
        let out = mlp.forward(input.as_ref())?;
        Ok((0..p).map(|c| (0..m).map(|j| weights[j] * out[(j, c)]).sum()).collect())
    };

    let mut values = Mat::zeros(m, p);
    for i in 0..m {
        let row = aggregate(&|j, k| tables[k][(i, j)])?;
        for c in 0..p {
            values[(i, c)] = row[c];
        }
    }
    if op.model().is_sbm() {
        return Ok(LimitFunction::Exact(values));
    }

    // at an arbitrary z: r_1 = [w_S(z, y_j)]_j and r_{k+1} = r_1 diag(ω) M_k
    let kernel = op.shared_kernel();
    let tables = Arc::new(tables);
    let mlp = mlp.clone();
    let eval = move |t: f64| -> Vec<f64> {
        let r1 = kernel.row(Latent::Point(t)).unwrap_or_else(|_| vec![0.0; m]);
        let weighted: Vec<f64> = r1.iter().zip(&weights).map(|(a, w)| a * w).collect();
        let mut input = Mat::<f64>::zeros(m, q);
        for j in 0..m {
            input[(j, 0)] = r1[j];
        }
        for k in 1..q {
            let table = &tables[k - 1];
            for j in 0..m {
                input[(j, k)] = (0..m).map(|l| weighted[l] * table[(l, j)]).sum();
            }
        }
        let out = mlp.forward(input.as_ref()).expect("width checked");
        (0..p).map(|c| (0..m).map(|j| weights[j] * out[(j, c)]).sum()).collect()
    };
    Ok(LimitFunction::Grid { values, eval: Arc::new(eval) })
}

/// Writes a PE matrix with a header naming family, q and the normalization flag.
pub fn write_pe_csv<W: Write>(out: &mut W, cfg: &PeConfig, pe: MatRef<'_, f64>) -> Result<()> {
    writeln!(out, "# family={} q={} normalize={}", cfg.family(), cfg.q(), cfg.normalize())?;
    let header: Vec<String> = (0..pe.ncols()).map(|j| format!("pe{j}")).collect();
    writeln!(out, "node,{}", header.join(","))?;
    for i in 0..pe.nrows() {
        let row: Vec<String> = (0..pe.ncols()).map(|j| format!("{:e}", pe[(i, j)])).collect();
        writeln!(out, "{i},{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::{sample_graph, shift_matrix};
    use crate::kernel::{KernelModel, ShiftKind};
    use crate::nn::{clamp_mlp, Dense};
    use crate::rng;
    use rand::Rng;

    fn identity_mlp(q: usize) -> MlpParams {
        MlpParams::linear(Mat::identity(q, q), vec![0.0; q]).unwrap()
    }

    fn constant_mlp(q: usize, c: f64) -> MlpParams {
        let mut m = MlpParams::zeros(&[q, 4, 1]);
        m.layers[1].bias = vec![c];
        m
    }

    fn fixture_shift(n: usize, seed: u64) -> Mat<f64> {
        let g = sample_graph(&fixtures::two_block_sbm(), n, 1.0, seed).unwrap();
        shift_matrix(&g, ShiftKind::NormalizedAdjacency)
    }

    #[test]
    fn odd_branches_give_zero_signnet() {
        let s = fixture_shift(40, 1);
        let odd = MlpParams::linear(Mat::from_fn(1, 3, |_, j| j as f64 - 1.0), vec![0.0; 3]).unwrap();
        let pe = signnet_pe(s.as_ref(), &[odd.clone(), odd], true).unwrap();
        assert_eq!(pe.matrix.ncols(), 6);
        assert_eq!(pe.matrix.norm_max(), 0.0);
    }

    #[test]
    fn signnet_ignores_eigenvector_signs() {
        let s = fixture_shift(60, 2);
        let mut r = rng::from_seed(3);
        let branches = vec![MlpParams::xavier(&[1, 8, 2], &mut r), MlpParams::xavier(&[1, 8, 3], &mut r)];
        let eig = spectral::sym_eig(s.as_ref()).unwrap();
        let mut flipped = eig.clone();
        for k in 0..60 {
            flipped.vectors[(k, 1)] = -flipped.vectors[(k, 1)];
        }
        let a = signnet_pe_from_eig(&eig, &branches, true).unwrap();
        let b = signnet_pe_from_eig(&flipped, &branches, true).unwrap();
        assert!((&a.matrix - &b.matrix).norm_max() <= 1e-15);
    }

    #[test]
    fn signnet_tie_warning() {
        let s = Mat::<f64>::identity(5, 5);
        let pe = signnet_pe(s.as_ref(), &[clamp_mlp(1.0).unwrap()], true).unwrap();
        assert!(matches!(pe.warnings[0], PeWarning::Multiplicity { index: 0, .. }));
    }

    #[test]
    fn distance_identity_q1_gives_row_sums() {
        let s = fixture_shift(300, 4);
        let pe = distance_pe(s.as_ref(), 1, &identity_mlp(1), true, None).unwrap();
        for i in 0..300 {
            let row: f64 = (0..300).map(|j| s[(i, j)]).sum();
            assert!((pe.matrix[(i, 0)] - row).abs() < 1e-13);
        }
        assert!(pe.warnings.is_empty());
    }

    #[test]
    fn distance_constant_mlp_is_constant() {
        let s = fixture_shift(50, 5);
        let pe = distance_pe(s.as_ref(), 3, &constant_mlp(3, 0.7), true, None).unwrap();
        assert!((0..50).all(|i| (pe.matrix[(i, 0)] - 0.7).abs() < 1e-14));
    }

    #[test]
    fn distance_blocks_match_dense_powers() {
        let n = 300;
        let s = fixture_shift(n, 6);
        let mut r = rng::from_seed(7);
        let mlp = MlpParams::xavier(&[2, 5, 2], &mut r);
        let pe = distance_pe(s.as_ref(), 2, &mlp, true, None).unwrap();
        let s2 = s.as_ref() * s.as_ref();
        let mut expected = Mat::<f64>::zeros(n, 2);
        for j in 0..n {
            let input = Mat::from_fn(n, 2, |i, k| n as f64 * if k == 0 { s[(i, j)] } else { s2[(i, j)] });
            let out = mlp.forward(input.as_ref()).unwrap();
            expected += out * faer::Scale(1.0 / n as f64);
        }
        assert!((&pe.matrix - &expected).norm_max() < 1e-12);
    }

    #[test]
    fn conditioning_warning_for_large_shift() {
        let s = Mat::<f64>::identity(4, 4) * faer::Scale(100.0);
        let pe = distance_pe(s.as_ref(), 4, &identity_mlp(4), false, None).unwrap();
        assert!(pe.warnings.iter().any(|w| matches!(w, PeWarning::Conditioning { .. })));
    }

    #[test]
    fn smoothing_examples() {
        let mut r = rng::from_seed(8);
        let s = fixture_shift(20, 9);
        let zero = Mat::<f64>::zeros(20, 3);
        assert_eq!(smoothing_pe(s.as_ref(), zero.as_ref()).unwrap().norm_max(), 0.0);
        let z = Mat::from_fn(20, 3, |_, _| r.random_range(-1.0..1.0));
        let id = Mat::<f64>::identity(20, 20);
        assert_eq!(smoothing_pe(id.as_ref(), z.as_ref()).unwrap(), z);
    }

    #[test]
    fn limit_distance_examples() {
        let m = fixtures::two_block_sbm();
        let op = LimitOperator::new(&m, ShiftKind::NormalizedAdjacency).unwrap();
        let g = limit_distance_pe(&op, 1, &identity_mlp(1)).unwrap();
        assert!((g.values()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.values()[(1, 0)] - 1.0 / 3.0).abs() < 1e-15);
        let c = limit_distance_pe(&op, 2, &constant_mlp(2, -1.5)).unwrap();
        assert!((0..2).all(|a| (c.values()[(a, 0)] + 1.5).abs() < 1e-15));
    }

    #[test]
    fn four_block_zero_rows_see_f_of_zero() {
        let m = fixtures::four_block_sbm();
        let op = LimitOperator::new(&m, ShiftKind::NormalizedAdjacency).unwrap();
        // f(t) = t + 1
        let f = MlpParams::linear(Mat::from_fn(1, 1, |_, _| 1.0), vec![1.0]).unwrap();
        let g = limit_distance_pe(&op, 1, &f).unwrap();
        assert_eq!(g.values()[(2, 0)], 1.0);
        assert_eq!(g.values()[(3, 0)], 1.0);
        // rows 0 and 1 see one entry equal to 1
        assert!((g.values()[(0, 0)] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn smoothed_distance_pe_cannot_separate_empty_communities() {
        let m = fixtures::four_block_sbm();
        let op = LimitOperator::new(&m, ShiftKind::NormalizedAdjacency).unwrap();
        let f = MlpParams::xavier(&[1, 8, 1], &mut rng::from_seed(11));
        let g = limit_distance_pe(&op, 1, &f).unwrap();
        let h = op.apply(&g).unwrap();
        // communities 2 and 3 have zero kernel rows, so any encoding built from 𝐒 agrees on them
        assert_eq!(g.values()[(2, 0)], g.values()[(3, 0)]);
        assert_eq!(h.values()[(2, 0)], 0.0);
        assert_eq!(h.values()[(3, 0)], 0.0);
    }

    fn relu_branch() -> MlpParams {
        MlpParams::new(vec![
            Dense::new(Mat::from_fn(1, 1, |_, _| 1.0), vec![0.0]).unwrap(),
            Dense::new(Mat::from_fn(1, 1, |_, _| 1.0), vec![0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn eigenvector_pe_separates_what_message_passing_cannot() {
        let m = fixtures::two_block_sbm();
        let op = LimitOperator::new(&m, ShiftKind::NormalizedAdjacency).unwrap();
        let ones = LimitFunction::constant(&m, vec![1.0, 1.0]);
        let mut r = rng::from_seed(12);
        let theta = crate::nn::GnnParams::random(&[2, 6, 6, 3], 0.5, &mut r);
        let out = crate::nn::cgnn_eval(&op, &ones, &theta).unwrap();
        for c in 0..3 {
            assert!((out.values()[(0, c)] - out.values()[(1, c)]).abs() < 1e-10);
        }
        let sys = op.eigenpairs(2).unwrap();
        let pe = limit_signnet_pe(&sys, &[relu_branch(), relu_branch()]).unwrap();
        // Q ReLU = |·|, and |u₂| is √2 on community 0 and 1/√2 on community 1
        assert!((pe.values()[(0, 1)] - 2f64.sqrt()).abs() < 1e-10);
        assert!((pe.values()[(1, 1)] - 0.5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn sampled_signnet_pe_is_non_constant_under_relu() {
        let s = fixture_shift(400, 13);
        let pe = signnet_pe(s.as_ref(), &[relu_branch(), relu_branch()], true).unwrap();
        let col: Vec<f64> = (0..400).map(|i| pe.matrix[(i, 1)]).collect();
        let (lo, hi) = col.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi - lo > 0.3);
    }

    #[test]
    fn signnet_scale_depends_on_normalization() {
        let branch = [relu_branch(), relu_branch()];
        let max_abs = |n: usize, normalize: bool| {
            let s = fixture_shift(n, 14 + n as u64);
            signnet_pe(s.as_ref(), &branch, normalize).unwrap().matrix.norm_max()
        };
        let (a, b) = (max_abs(250, true), max_abs(1000, true));
        assert!((0.25..=4.0).contains(&(b / a)), "normalized ratio {}", b / a);
        let (a, b) = (max_abs(250, false), max_abs(1000, false));
        assert!((0.25..=1.0).contains(&(b / a)), "raw ratio {}", b / a);
    }

    #[test]
    fn continuous_limit_distance_extension_matches_grid() {
        let m = fixtures::gaussian().with_quadrature_nodes(64).unwrap();
        let op = LimitOperator::new(&m, ShiftKind::NormalizedAdjacency).unwrap();
        let mut r = rng::from_seed(10);
        let mlp = MlpParams::xavier(&[2, 4, 1], &mut r);
        let g = limit_distance_pe(&op, 2, &mlp).unwrap();
        let nodes = m.discretization().points;
        for k in [0, 20, 63] {
            let v = g.eval(nodes[k]).unwrap()[0];
            assert!((v - g.values()[(k, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn pe_csv_header() {
        let cfg = PeConfig::Smoothing;
        let mut buf = Vec::new();
        write_pe_csv(&mut buf, &cfg, Mat::<f64>::zeros(2, 1).as_ref()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# family=smoothing q=1 normalize=false\nnode,pe0\n"));
    }

    #[test]
    fn bad_configs_rejected() {
        let s = Mat::<f64>::identity(3, 3);
        assert!(distance_pe(s.as_ref(), 2, &identity_mlp(1), true, None).is_err());
        assert!(signnet_pe(s.as_ref(), &[identity_mlp(2)], true).is_err());
        assert!(positional_encoding(s.as_ref(), None, &PeConfig::Smoothing).is_err());
        let _ = KernelModel::gaussian(0.5).unwrap();
        let _ = Dense::zeros(1, 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::seq::SliceRandom;
        use rand::Rng;

        fn permute(s: &Mat<f64>, perm: &[usize]) -> Mat<f64> {
            let n = s.nrows();
            let mut out = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    out[(perm[i], perm[j])] = s[(i, j)];
                }
            }
            out
        }

        fn permute_rows(z: &Mat<f64>, perm: &[usize]) -> Mat<f64> {
            let mut out = Mat::zeros(z.nrows(), z.ncols());
            for i in 0..z.nrows() {
                for j in 0..z.ncols() {
                    out[(perm[i], j)] = z[(i, j)];
                }
            }
            out
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]

            #[test]
            fn all_families_are_equivariant(seed in any::<u64>()) {
                let n = 50;
                let mut r = rng::from_seed(seed);
                let g = sample_graph(&fixtures::gaussian(), n, 1.0, seed).unwrap();
                let s = shift_matrix(&g, ShiftKind::NormalizedLaplacian);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut r);
                let ps = permute(&s, &perm);
                let z = Mat::from_fn(n, 2, |_, _| r.random_range(-1.0..1.0));
                let pz = permute_rows(&z, &perm);
                let configs = vec![
                    PeConfig::SignNet { branches: vec![MlpParams::xavier(&[1, 6, 2], &mut r)], normalize: true },
                    PeConfig::Distance { q: 2, mlp: MlpParams::xavier(&[2, 6, 2], &mut r), normalize: true, filter: None },
                    PeConfig::Smoothing,
                ];
                for cfg in &configs {
                    let a = positional_encoding(s.as_ref(), Some(z.as_ref()), cfg).unwrap();
                    let b = positional_encoding(ps.as_ref(), Some(pz.as_ref()), cfg).unwrap();
                    let expected = permute_rows(&a.matrix, &perm);
                    prop_assert!((&b.matrix - &expected).norm_max() <= 1e-10, "{}", cfg.family());
                }
            }
        }
    }
}
