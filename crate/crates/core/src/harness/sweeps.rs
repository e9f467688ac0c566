//! Convergence sweeps over an increasing schedule of graph sizes.

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::{ConvergenceReport, Flag};
use crate::error::{Error, Result};
use crate::graph::{gram_matrix, noisy_features_with, sample_graph_with, shift_matrix, Graph, NoiseSpec};
use crate::kernel::KernelModel;
use crate::limit::{LimitOperator, ZERO_EIGENVALUE};
use crate::nn::{cgnn_eval, mpnn_forward, GnnParams, MlpParams};
use crate::pe::{distance_pe, limit_distance_pe};
use crate::rng::{self, Purpose};
use crate::spectral::{
    self, davis_kahan_check, fit_filter_eig, FitMethod, MatrixEigenSystem, ReluFilterParams, SpectralFilter,
    GRID_SIZE,
};

/// Sampled eigenvalues closer than this mark a trial as tied.
pub const SAMPLED_TIE_TOLERANCE: f64 = 1e-6;

fn sample_trial(cfg: &ExperimentConfig, model: &KernelModel, n: usize, trial: usize) -> Result<Graph> {
    let mut r = rng::stream(cfg.seed, n as u64, trial as u64, Purpose::Graph);
    sample_graph_with(model, n, cfg.alpha.alpha(n), &mut r)
}

/// Runs `f` for every `(n, trial)` and collects results in schedule order.
fn for_each_trial<T: Send>(
    cfg: &ExperimentConfig,
    f: impl Fn(usize, usize) -> Result<T> + Sync,
) -> Result<Vec<(usize, usize, T)>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &n in &cfg.schedule {
        let batch: Result<Vec<_>> = (0..cfg.trials).into_par_iter().map(|t| f(n, t).map(|v| (n, t, v))).collect();
        out.extend(batch?);
    }
    Ok(out)
}

/// `‖S (Xf) − X(𝐒f)‖_MSE` and `‖S‖_op` per trial.
pub fn run_assumption_sweep(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let model = cfg.build_model()?;
    let op = LimitOperator::new(&model, cfg.shift)?;
    let f = cfg.probe.to_limit(&model)?;
    let sf = op.apply(&f)?;
    let results = for_each_trial(cfg, |n, t| {
        let g = sample_trial(cfg, &model, n, t)?;
        let s = shift_matrix(&g, cfg.shift);
        let xf = f.sample(&g.latents)?;
        let xsf = sf.sample(&g.latents)?;
        let gap = spectral::mse_norm((s.as_ref() * xf.as_ref() - xsf).as_ref());
        Ok((gap, spectral::op_norm_estimate(s.as_ref())?))
    })?;
    let mut report = ConvergenceReport::new("assumption", cfg);
    for (n, t, (gap, norm)) in results {
        report.push(n, t, "shift_gap", gap, Flag::Ok);
        report.push(n, t, "op_norm", norm, Flag::Ok);
    }
    Ok(report)
}

fn sampled_tie(values: &[f64], q: usize) -> bool {
    values.iter().take(q + 1).collect::<Vec<_>>().windows(2).any(|w| (w[0] - w[1]).abs() < SAMPLED_TIE_TOLERANCE)
}

/// Eigenvector alignment and eigenvalue error for the first `q = cfg.pe.q` pairs.
pub fn run_signnet_sweep(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let model = cfg.build_model()?;
    let op = LimitOperator::new(&model, cfg.shift)?;
    let q = cfg.pe.q;
    let sys = op.eigenpairs(q)?;
    let results = for_each_trial(cfg, |n, t| {
        let g = sample_trial(cfg, &model, n, t)?;
        let eig = spectral::sym_eig(shift_matrix(&g, cfg.shift).as_ref())?;
        let sampled = sys.functions.sample(&g.latents)?;
        let mut rows = Vec::with_capacity(q);
        for i in 0..q {
            let target: Vec<f64> = (0..n).map(|k| sampled[(k, i)]).collect();
            let align = spectral::alignment_error(&eig.vector(i), &target)?;
            rows.push((align, (eig.values[i] - sys.values[i]).abs()));
        }
        Ok((sys.multiplicity || sampled_tie(&eig.values, q), rows))
    })?;
    let mut report = ConvergenceReport::new("signnet", cfg);
    if results.iter().all(|(_, _, (tie, _))| *tie) {
        return Err(Error::DegenerateExperiment("every trial has tied eigenvalues".into()));
    }
    for (n, t, (tie, rows)) in results {
        let flag = if tie { Flag::Tie } else { Flag::Ok };
        for (i, (align, err)) in rows.into_iter().enumerate() {
            report.push(n, t, &format!("alignment_{i}"), align, flag);
            report.push(n, t, &format!("eigenvalue_error_{i}"), err, flag);
        }
    }
    Ok(report)
}

/// Ideal ReLU filter keeping the `rank` limit eigenvalues of largest magnitude.
/// For block models `rank` defaults to the number of nonzero eigenvalues.
pub fn ideal_filter_from_limit(op: &LimitOperator, rank: Option<usize>) -> Result<ReluFilterParams> {
    let m = op.kernel().discretization().len();
    let sys = op.eigenpairs(m)?;
    let mut mags: Vec<f64> = sys.values.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let nonzero = mags.iter().filter(|&&v| v > ZERO_EIGENVALUE).count();
    let rank = match (rank, op.model().is_sbm()) {
        (Some(r), _) => r,
        (None, true) => nonzero,
        (None, false) => return Err(Error::Config("continuous models need an explicit filter rank".into())),
    };
    if rank == 0 || rank > nonzero {
        return Err(Error::Config(format!("filter rank {rank} outside 1..={nonzero}")));
    }
    let dropped = if rank < mags.len() { mags[rank] } else { 0.0 };
    ReluFilterParams::from_gap(mags[rank - 1], dropped)
}

fn filter_rank(cfg: &ExperimentConfig, model: &KernelModel) -> Option<usize> {
    cfg.filter_rank.or(if model.is_sbm() { None } else { Some(cfg.pe.q) })
}

/// `[‖S − W‖_F, ‖S_ideal − W‖_F, ‖S_fit − W‖_F, ‖S − W‖_op]` for one graph.
pub fn filter_metrics(
    eig: &MatrixEigenSystem,
    s: faer::MatRef<'_, f64>,
    w: faer::MatRef<'_, f64>,
    ideal: &ReluFilterParams,
) -> Result<[f64; 4]> {
    let diff = s.to_owned() - w;
    let raw = diff.norm_l2();
    let ideal_err = (eig.filtered(|l| ideal.eval(l)) - w).norm_l2();
    let fit = fit_filter_eig(eig, w, FitMethod::GridIdeal, GRID_SIZE)?.error;
    Ok([raw, ideal_err, fit, spectral::op_norm(diff.as_ref())?])
}

pub fn run_filter_sweep(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let model = cfg.build_model()?;
    let op = LimitOperator::new(&model, cfg.shift)?;
    let ideal = ideal_filter_from_limit(&op, filter_rank(cfg, &model))?;
    let results = for_each_trial(cfg, |n, t| {
        let g = sample_trial(cfg, &model, n, t)?;
        let s = shift_matrix(&g, cfg.shift);
        let w = gram_matrix(&model, &g.latents, cfg.shift)?;
        let eig = spectral::sym_eig(s.as_ref())?;
        filter_metrics(&eig, s.as_ref(), w.as_ref(), &ideal)
    })?;
    let mut report = ConvergenceReport::new("filter", cfg);
    report.note(format!("ideal filter center={} half_width={}", ideal.center, ideal.half_width));
    for (n, t, m) in results {
        for (name, v) in ["raw_frobenius", "ideal_frobenius", "fit_frobenius", "raw_op"].iter().zip(m) {
            report.push(n, t, name, v, Flag::Ok);
        }
    }
    Ok(report)
}

/// Fixed distance-encoding network drawn from the master seed.
pub fn distance_mlp(cfg: &ExperimentConfig) -> MlpParams {
    let mut r = rng::stream(cfg.seed, 0, 0, Purpose::Params);
    MlpParams::xavier(&[cfg.pe.q, cfg.pe.hidden, cfg.pe.width], &mut r)
}

/// Normalized distance encoding with the ideal filter against its limit.
pub fn run_distance_sweep(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let model = cfg.build_model()?;
    let op = LimitOperator::new(&model, cfg.shift)?;
    let filter = SpectralFilter::Ideal(ideal_filter_from_limit(&op, filter_rank(cfg, &model))?);
    let mlp = distance_mlp(cfg);
    let limit = limit_distance_pe(&op, cfg.pe.q, &mlp)?;
    let results = for_each_trial(cfg, |n, t| {
        let g = sample_trial(cfg, &model, n, t)?;
        let s = shift_matrix(&g, cfg.shift);
        let pe = distance_pe(s.as_ref(), cfg.pe.q, &mlp, true, Some(&filter))?;
        let target = limit.sample(&g.latents)?;
        let flag = if pe.warnings.is_empty() { Flag::Ok } else { Flag::Inconclusive };
        Ok((spectral::mse_norm((pe.matrix - target).as_ref()), flag))
    })?;
    let mut report = ConvergenceReport::new("distpe", cfg);
    for (n, t, (v, flag)) in results {
        report.push(n, t, "distance_pe_error", v, flag);
    }
    Ok(report)
}

/// Noisy features `Z = Xf⁰ + ν`: noise level and smoothing error.
pub fn run_smoothing_sweep(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let model = cfg.build_model()?;
    let op = LimitOperator::new(&model, cfg.shift)?;
    let f0 = cfg.features.to_limit(&model)?;
    let sf0 = op.apply(&f0)?;
    let noise = NoiseSpec::diagonal(&cfg.noise_variance)?;
    if noise.dim() != f0.dim() {
        return Err(Error::Config(format!("noise has {} dims, features {}", noise.dim(), f0.dim())));
    }
    let results = for_each_trial(cfg, |n, t| {
        let g = sample_trial(cfg, &model, n, t)?;
        let s = shift_matrix(&g, cfg.shift);
        let mut r = rng::stream(cfg.seed, n as u64, t as u64, Purpose::Features);
        let z = noisy_features_with(|x| f0.eval(x).expect("latent in domain"), &g.latents, &noise, &mut r)?;
        let xf = f0.sample(&g.latents)?;
        let noise_sq = spectral::mse_norm((&z - &xf).as_ref()).powi(2);
        let smooth = spectral::mse_norm((s.as_ref() * z.as_ref() - sf0.sample(&g.latents)?).as_ref());
        Ok((noise_sq, smooth))
    })?;
    let mut report = ConvergenceReport::new("smoothing", cfg);
    report.note(format!("noise trace {}", noise.trace()));
    for (n, t, (noise_sq, smooth)) in results {
        report.push(n, t, "feature_noise_sq", noise_sq, Flag::Ok);
        report.push(n, t, "smoothing_error", smooth, Flag::Ok);
    }
    Ok(report)
}

/// Fixed random message-passing networks drawn from the master seed.
pub fn random_gnns(cfg: &ExperimentConfig, d_in: usize) -> Vec<GnnParams> {
    let mut widths = vec![d_in];
    widths.extend(&cfg.gnn.hidden);
    widths.push(1);
    (0..cfg.gnn.draws)
        .map(|k| {
            let mut r = rng::stream(cfg.seed, 0, k as u64, Purpose::Params);
            GnnParams::random(&widths, cfg.gnn.bias_scale, &mut r)
        })
        .collect()
}

/// `‖mpnn(S, Xf⁰) − X cgnn(f⁰)‖_MSE` for each fixed network.
pub fn run_mpnn_sweep(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let model = cfg.build_model()?;
    let op = LimitOperator::new(&model, cfg.shift)?;
    let f0 = cfg.features.to_limit(&model)?;
    let nets = random_gnns(cfg, f0.dim());
    let limits = nets.iter().map(|theta| cgnn_eval(&op, &f0, theta)).collect::<Result<Vec<_>>>()?;
    let results = for_each_trial(cfg, |n, t| {
        let g = sample_trial(cfg, &model, n, t)?;
        let s = shift_matrix(&g, cfg.shift);
        let z0 = f0.sample(&g.latents)?;
        nets.iter()
            .zip(&limits)
            .map(|(theta, limit)| {
                let out = mpnn_forward(s.as_ref(), z0.as_ref(), theta)?;
                Ok(spectral::mse_norm((out - limit.sample(&g.latents)?).as_ref()))
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let mut report = ConvergenceReport::new("mpnn", cfg);
    for (n, t, errs) in results {
        for (k, v) in errs.into_iter().enumerate() {
            report.push(n, t, &format!("mpnn_error_{k}"), v, Flag::Ok);
        }
    }
    Ok(report)
}

/// Random symmetric `S` with spectrum spaced at least `spacing` apart plus a
/// symmetric perturbation of operator norm about `scale · spacing`.
pub fn random_perturbed_pair<R: Rng + ?Sized>(
    n: usize,
    spacing: f64,
    scale: f64,
    rng: &mut R,
) -> Result<(Mat<f64>, Mat<f64>)> {
    let g = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().compute_Q();
    let values: Vec<f64> = (0..n).map(|i| spacing * (i as f64 + rng.random_range(0.0..0.5))).collect();
    let s = Mat::from_fn(n, n, |i, j| (0..n).map(|k| q[(i, k)] * values[k] * q[(j, k)]).sum::<f64>());
    let e = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let e = Mat::from_fn(n, n, |i, j| 0.5 * (e[(i, j)] + e[(j, i)]));
    let norm = spectral::op_norm(e.as_ref())?;
    let s_tilde = Mat::from_fn(n, n, |i, j| s[(i, j)] + scale * spacing * e[(i, j)] / norm);
    let sym = |m: Mat<f64>| Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    Ok((sym(s), sym(s_tilde)))
}

/// Davis–Kahan check on `pairs` random pairs, at a random eigen-index each.
pub fn run_davis_kahan_sweep(seed: u64, pairs: usize, n: usize) -> Result<ConvergenceReport> {
    let cfg = ExperimentConfig { seed, schedule: vec![n], trials: pairs, ..ExperimentConfig::default() };
    let mut report = ConvergenceReport::new("davis_kahan", &cfg);
    for t in 0..pairs {
        let mut r = rng::stream(seed, n as u64, t as u64, Purpose::Perturbation);
        let scale = 10f64.powf(r.random_range(-4.0..-1.0));
        let (s, s_tilde) = random_perturbed_pair(n, 0.1, scale, &mut r)?;
        let p = r.random_range(0..n);
        let dk = davis_kahan_check(s.as_ref(), s_tilde.as_ref(), p)?;
        let flag = if dk.inconclusive { Flag::Inconclusive } else { Flag::Ok };
        report.push(n, t, "slack", dk.slack, flag);
        report.push(n, t, "lhs", dk.lhs, flag);
        report.push(n, t, "bound", dk.bound, flag);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::kernel::{ModelSpec, ShiftKind};

    fn small(cfg: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig { schedule: vec![60, 120], trials: 2, ..cfg }
    }

    #[test]
    fn zero_probe_has_zero_gap() {
        let cfg = small(ExperimentConfig {
            probe: super::super::config::Probe::Constant { value: 0.0 },
            ..Default::default()
        });
        let r = run_assumption_sweep(&cfg).unwrap();
        assert!(r.rows.iter().filter(|x| x.metric == "shift_gap").all(|x| x.value == 0.0));
        assert_eq!(r.rows.len(), 2 * 2 * 2);
    }

    #[test]
    fn constant_kernel_matches_binomial_scale() {
        // w ≡ 1: (S1)_i = deg_i/(nα) with deg_i ~ Bin(n-1, α), so the gap has scale √(α(1-α)n)/(nα)
        let alpha = 0.3;
        let n = 400;
        let cfg = ExperimentConfig {
            model: ModelSpec::Constant { value: 1.0, interval: [-1.0, 1.0], quadrature_nodes: 16 },
            probe: super::super::config::Probe::Constant { value: 1.0 },
            alpha: super::super::config::AlphaRule::Constant { value: alpha },
            schedule: vec![n],
            trials: 4,
            ..Default::default()
        };
        let r = run_assumption_sweep(&cfg).unwrap();
        let oracle = ((n - 1) as f64 * alpha * (1.0 - alpha) + 1.0).sqrt() / (n as f64 * alpha);
        let got = r.median("shift_gap", n).unwrap();
        assert!(got < 3.0 * oracle && got > oracle / 3.0, "{got} vs {oracle}");
    }

    #[test]
    fn signnet_sweep_records_all_pairs() {
        let r = run_signnet_sweep(&small(ExperimentConfig::default())).unwrap();
        assert_eq!(r.metrics(), vec!["alignment_0", "eigenvalue_error_0", "alignment_1", "eigenvalue_error_1"]);
        assert_eq!(r.rows.len(), 2 * 2 * 4);
    }

    #[test]
    fn symmetric_blocks_are_degenerate() {
        let cfg = small(ExperimentConfig {
            model: ModelSpec::Sbm {
                c: vec![vec![0.5, 0.0, 0.0], vec![0.0, 0.5, 0.0], vec![0.0, 0.0, 0.5]],
                p: vec![1.0 / 3.0; 3],
            },
            ..Default::default()
        });
        assert!(matches!(run_signnet_sweep(&cfg), Err(Error::DegenerateExperiment(_))));
    }

    #[test]
    fn ideal_filter_for_fixture_uses_true_gap() {
        let op = LimitOperator::new(&fixtures::two_block_sbm(), ShiftKind::NormalizedAdjacency).unwrap();
        let f = ideal_filter_from_limit(&op, None).unwrap();
        assert!((f.center - 1.0 / 24.0).abs() < 1e-15);
        assert!((f.half_width - 1.0 / 48.0).abs() < 1e-15);
        let gauss = LimitOperator::new(&fixtures::gaussian(), ShiftKind::NormalizedAdjacency).unwrap();
        assert!(ideal_filter_from_limit(&gauss, None).is_err());
        assert!(ideal_filter_from_limit(&gauss, Some(3)).is_ok());
    }

    #[test]
    fn gram_injected_as_shift_gives_zero_errors() {
        let m = fixtures::two_block_sbm();
        let g = crate::graph::sample_graph(&m, 80, 1.0, 3).unwrap();
        let w = gram_matrix(&m, &g.latents, ShiftKind::NormalizedAdjacency).unwrap();
        let eig = spectral::sym_eig(w.as_ref()).unwrap();
        let ideal = ReluFilterParams::from_gap(1.0 / 12.0, 0.0).unwrap();
        let [raw, _, fit, op] = filter_metrics(&eig, w.as_ref(), w.as_ref(), &ideal).unwrap();
        assert_eq!(raw, 0.0);
        assert_eq!(op, 0.0);
        assert!(fit < 1e-12);
    }

    #[test]
    fn other_sweeps_produce_declared_metrics() {
        let cfg = small(ExperimentConfig::default());
        assert_eq!(run_filter_sweep(&cfg).unwrap().metrics().len(), 4);
        assert_eq!(run_distance_sweep(&cfg).unwrap().metrics(), vec!["distance_pe_error"]);
        assert_eq!(run_smoothing_sweep(&cfg).unwrap().metrics().len(), 2);
        assert_eq!(run_mpnn_sweep(&cfg).unwrap().metrics().len(), 3);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let cfg = small(ExperimentConfig { seed: 42, ..Default::default() });
        let a = run_assumption_sweep(&cfg).unwrap();
        let b = run_assumption_sweep(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn davis_kahan_sweep_holds() {
        let r = run_davis_kahan_sweep(1, 10, 12).unwrap();
        assert!(r.values("slack", 12).iter().all(|&s| s >= 0.0));
    }
}
