//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p rglab --test acceptance --release`. Failing criteria are
//! reported but do not abort the run; the process fails only on internal errors.

use std::time::{Duration, Instant};

use faer::Mat;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use rglab::fixtures;
use rglab::graph::{sample_graph, shift_matrix};
use rglab::harness::{
    run_assumption_sweep, run_davis_kahan_sweep, run_fig1_experiment, run_filter_sweep, run_fixture_suite,
    run_mpnn_sweep, run_signnet_sweep, run_smoothing_sweep, ConvergenceReport, ExperimentConfig,
};
use rglab::kernel::{ModelSpec, ShiftKind};
use rglab::nn::{deepset_aggregate, mpnn_backward, mpnn_forward, mpnn_forward_cached, signnet_symmetrize, GnnParams, MlpParams};
use rglab::pe::{distance_pe, signnet_pe, smoothing_pe};
use rglab::rng::from_seed;

type Outcome = (bool, Vec<String>);

struct Gate {
    passed: usize,
    total: usize,
}

impl Gate {
    fn run(&mut self, id: usize, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let (ok, details) = f();
        let secs = start.elapsed().as_secs_f64();
        self.total += 1;
        self.passed += usize::from(ok);
        println!("{} [{id}] {name} ({secs:.1} s)", if ok { "PASS" } else { "FAIL" });
        for d in details {
            println!("    {d}");
        }
    }
}

fn check(ok: bool, text: String) -> (bool, String) {
    (ok, format!("{} {text}", if ok { "ok  " } else { "miss" }))
}

fn collect(checks: Vec<(bool, String)>) -> Outcome {
    (checks.iter().all(|c| c.0), checks.into_iter().map(|c| c.1).collect())
}

fn median_ratio(r: &ConvergenceReport, metric: &str, n: usize, n0: usize) -> Option<(f64, f64, f64)> {
    let (a, b) = (r.median(metric, n)?, r.median(metric, n0)?);
    Some((a / b, a, b))
}

/// `median(n) < factor · median(n0)`.
fn ratio_check(r: &ConvergenceReport, label: &str, metric: &str, n: usize, n0: usize, factor: f64) -> (bool, String) {
    match median_ratio(r, metric, n, n0) {
        Some((q, a, b)) => check(
            q < factor,
            format!("{label} {metric}: median n={n} {a:.4e} / n={n0} {b:.4e} = {q:.4} (< {factor}), flag rate {:.3}", r.flag_rate()),
        ),
        None => check(false, format!("{label} {metric}: no unflagged data at n={n} or n={n0}")),
    }
}

fn sweep<T>(label: &str, r: rglab::error::Result<T>) -> Result<T, (bool, String)> {
    r.map_err(|e| check(false, format!("{label}: {e}")))
}

const SCHEDULE: [usize; 4] = [250, 500, 1000, 2000];

fn base() -> ExperimentConfig {
    ExperimentConfig { schedule: SCHEDULE.to_vec(), trials: 10, ..ExperimentConfig::default() }
}

fn criterion_fixtures() -> Outcome {
    let start = Instant::now();
    let result = run_fixture_suite();
    let elapsed = start.elapsed();
    let mut checks = vec![check(elapsed < Duration::from_secs(1), format!("runtime {:.3} s (< 1 s)", elapsed.as_secs_f64()))];
    match result {
        Ok((_, assertions)) => checks.extend(assertions.iter().map(|a| check(a.passed, format!("{}: {}", a.name, a.detail)))),
        Err(e) => checks.push(check(false, format!("fixture suite: {e}"))),
    }
    collect(checks)
}

fn random_perm(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// `M'[i, j] = M[σ(i), σ(j)]`.
fn conj(m: &Mat<f64>, sigma: &[usize]) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(sigma[i], sigma[j])])
}

fn rows(m: &Mat<f64>, sigma: &[usize]) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(sigma[i], j)])
}

fn max_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    (a - b).norm_max()
}

fn gaussian_mat(r: usize, c: usize, rng: &mut impl Rng) -> Mat<f64> {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn criterion_invariants() -> Outcome {
    let model = fixtures::gaussian();
    let (n, q) = (50, 3);
    let (mut mpnn, mut sign, mut dist, mut smooth, mut sign_inv, mut deepset) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut ties = 0;
    for seed in 0..20u64 {
        let mut rng = from_seed(1000 + seed);
        let g = sample_graph(&model, n, 1.0, seed).expect("sample");
        let s = shift_matrix(&g, ShiftKind::NormalizedAdjacency);
        let sigma = random_perm(n, &mut rng);
        let sp = conj(&s, &sigma);
        let z = gaussian_mat(n, 2, &mut rng);
        let zp = rows(&z, &sigma);

        let theta = GnnParams::xavier(&[2, 8, 8, 1], &mut rng);
        let out = mpnn_forward(s.as_ref(), z.as_ref(), &theta).unwrap();
        let outp = mpnn_forward(sp.as_ref(), zp.as_ref(), &theta).unwrap();
        mpnn = mpnn.max(max_diff(&rows(&out, &sigma), &outp));

        let branches: Vec<MlpParams> = (0..q).map(|_| MlpParams::xavier(&[1, 16, 4], &mut rng)).collect();
        let a = signnet_pe(s.as_ref(), &branches, true).unwrap();
        let b = signnet_pe(sp.as_ref(), &branches, true).unwrap();
        ties += usize::from(!a.warnings.is_empty());
        sign = sign.max(max_diff(&rows(&a.matrix, &sigma), &b.matrix));

        let mlp = MlpParams::xavier(&[q, 16, 4], &mut rng);
        let a = distance_pe(s.as_ref(), q, &mlp, true, None).unwrap();
        let b = distance_pe(sp.as_ref(), q, &mlp, true, None).unwrap();
        dist = dist.max(max_diff(&rows(&a.matrix, &sigma), &b.matrix));

        let a = smoothing_pe(s.as_ref(), z.as_ref()).unwrap();
        let b = smoothing_pe(sp.as_ref(), zp.as_ref()).unwrap();
        smooth = smooth.max(max_diff(&rows(&a, &sigma), &b));

        let u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let a = signnet_symmetrize(&branches[0], &u).unwrap();
        let b = signnet_symmetrize(&branches[0], &neg).unwrap();
        sign_inv = sign_inv.max(max_diff(&a, &b));

        let set = gaussian_mat(n, q, &mut rng);
        let a = deepset_aggregate(&mlp, set.as_ref()).unwrap();
        let b = deepset_aggregate(&mlp, rows(&set, &sigma).as_ref()).unwrap();
        deepset = deepset.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    collect(vec![
        check(mpnn <= 1e-10, format!("mpnn equivariance max deviation {mpnn:e} (<= 1e-10)")),
        check(sign <= 1e-10, format!("signnet pe equivariance {sign:e} (<= 1e-10), {ties} graphs with tie warnings")),
        check(dist <= 1e-10, format!("distance pe equivariance {dist:e} (<= 1e-10)")),
        check(smooth <= 1e-10, format!("smoothing pe equivariance {smooth:e} (<= 1e-10)")),
        check(sign_inv <= 1e-15, format!("signnet sign invariance {sign_inv:e} (<= 1e-15)")),
        check(deepset <= 1e-12, format!("deep-set permutation invariance {deepset:e} (<= 1e-12)")),
    ])
}

const FD_STEP: f64 = 1e-5;
const KINK_MARGIN: f64 = 1e-3;

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn central_fd(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut v = x.to_vec();
    (0..x.len())
        .map(|k| {
            v[k] = x[k] + FD_STEP;
            let up = f(&v);
            v[k] = x[k] - FD_STEP;
            let down = f(&v);
            v[k] = x[k];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn inner(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)] * b[(i, j)]).sum::<f64>()).sum()
}

fn criterion_gradients() -> Outcome {
    let mut rng = from_seed(77);
    let (mut worst_mlp, mut worst_gnn, mut skipped) = (0.0f64, 0.0f64, 0usize);
    let mut done = 0;
    while done < 20 {
        let widths = [rng.random_range(1..4), rng.random_range(2..6), rng.random_range(2..6), rng.random_range(1..3)];
        let rows_n = rng.random_range(3..8);
        let p = MlpParams::xavier(&widths, &mut rng);
        let x = gaussian_mat(rows_n, widths[0], &mut rng);
        let up = gaussian_mat(rows_n, widths[3], &mut rng);
        let (_, cache) = p.forward_cached(x.as_ref()).unwrap();

        let n = rng.random_range(4..9);
        let gw = [rng.random_range(1..3), rng.random_range(2..5), rng.random_range(2..5), 1];
        let theta = GnnParams::xavier(&gw, &mut rng);
        let a = gaussian_mat(n, n, &mut rng);
        let s = Mat::from_fn(n, n, |i, j| 0.25 * (a[(i, j)] + a[(j, i)]));
        let z0 = gaussian_mat(n, gw[0], &mut rng);
        let gup = gaussian_mat(n, 1, &mut rng);
        let (_, gcache) = mpnn_forward_cached(s.as_ref(), z0.as_ref(), &theta).unwrap();

        if cache.kink_margin() < KINK_MARGIN || gcache.kink_margin() < KINK_MARGIN {
            skipped += 1;
            continue;
        }
        done += 1;

        let (grad, _) = p.backward(&cache, up.as_ref()).unwrap();
        let fd = central_fd(&p.to_vec(), |v| {
            let mut q = p.clone();
            q.set_from_slice(v).unwrap();
            inner(&q.forward(x.as_ref()).unwrap(), &up)
        });
        worst_mlp = worst_mlp.max(rel_error(&grad.to_vec(), &fd));

        let (ggrad, _) = mpnn_backward(s.as_ref(), &theta, &gcache, gup.as_ref()).unwrap();
        let fd = central_fd(&theta.to_vec(), |v| {
            let mut t = theta.clone();
            t.set_from_slice(v).unwrap();
            inner(&mpnn_forward(s.as_ref(), z0.as_ref(), &t).unwrap(), &gup)
        });
        worst_gnn = worst_gnn.max(rel_error(&ggrad.to_vec(), &fd));
    }
    collect(vec![
        check(worst_mlp < 1e-4, format!("mlp worst relative error {worst_mlp:e} over 20 configs (< 1e-4)")),
        check(worst_gnn < 1e-4, format!("mpnn worst relative error {worst_gnn:e} over 20 configs (< 1e-4), {skipped} near-kink draws skipped")),
    ])
}

fn criterion_assumption() -> Outcome {
    let mut checks = Vec::new();
    for (label, model) in [("sbm", base().model), ("gaussian", ModelSpec::default_gaussian())] {
        for shift in [ShiftKind::NormalizedAdjacency, ShiftKind::NormalizedLaplacian] {
            let cfg = ExperimentConfig { model: model.clone(), shift, ..base() };
            let label = format!("{label} {shift}");
            match sweep(&label, run_assumption_sweep(&cfg)) {
                Ok(r) => checks.push(ratio_check(&r, &label, "shift_gap", 2000, 250, 0.6)),
                Err(c) => checks.push(c),
            }
        }
    }
    collect(checks)
}

fn criterion_signnet() -> Outcome {
    let cfg = ExperimentConfig { pe: rglab::harness::PeSpec { q: 2, ..Default::default() }, ..base() };
    match sweep("signnet", run_signnet_sweep(&cfg)) {
        Ok(r) => collect(
            (0..2)
                .flat_map(|i| {
                    [
                        ratio_check(&r, "sbm", &format!("alignment_{i}"), 2000, 250, 0.6),
                        ratio_check(&r, "sbm", &format!("eigenvalue_error_{i}"), 2000, 250, 0.5),
                    ]
                })
                .collect(),
        ),
        Err(c) => collect(vec![c]),
    }
}

fn criterion_filter() -> Outcome {
    let r = match sweep("filter", run_filter_sweep(&base())) {
        Ok(r) => r,
        Err(c) => return collect(vec![c]),
    };
    let mut checks = vec![ratio_check(&r, "sbm", "ideal_frobenius", 2000, 250, 0.5)];
    checks.push(match median_ratio(&r, "raw_frobenius", 2000, 250) {
        Some((q, a, b)) => check(
            (0.5..=2.0).contains(&q),
            format!("raw_frobenius median n=2000 {a:.4e} / n=250 {b:.4e} = {q:.4} (in [0.5, 2])"),
        ),
        None => check(false, "raw_frobenius: no data".into()),
    });
    checks.push(match (r.median("fit_frobenius", 1000), r.median("ideal_frobenius", 1000)) {
        (Some(fit), Some(ideal)) => check(
            fit <= 1.2 * ideal,
            format!("fit_frobenius at n=1000 {fit:.4e} vs 1.2 x ideal {:.4e}", 1.2 * ideal),
        ),
        _ => check(false, "fit_frobenius: no data at n=1000".into()),
    });
    collect(checks)
}

fn criterion_smoothing() -> Outcome {
    let cfg = ExperimentConfig { schedule: vec![250, 500, 1000, 2000, 4000], ..base() };
    let r = match sweep("smoothing", run_smoothing_sweep(&cfg)) {
        Ok(r) => r,
        Err(c) => return collect(vec![c]),
    };
    let trace: f64 = cfg.noise_variance.iter().sum();
    let noise = r.median("feature_noise_sq", 4000);
    collect(vec![
        match noise {
            Some(v) => check(
                (v - trace).abs() <= 0.1 * trace,
                format!("feature_noise_sq median at n=4000 {v:.4} vs trace {trace} (within 10%)"),
            ),
            None => check(false, "feature_noise_sq: no data".into()),
        },
        ratio_check(&r, "sbm", "smoothing_error", 2000, 250, 0.6),
    ])
}

fn criterion_mpnn() -> Outcome {
    match sweep("mpnn", run_mpnn_sweep(&base())) {
        Ok(r) => collect((0..3).map(|k| ratio_check(&r, "sbm", &format!("mpnn_error_{k}"), 2000, 250, 0.6)).collect()),
        Err(c) => collect(vec![c]),
    }
}

fn criterion_fig1() -> Outcome {
    let out = match sweep("fig1", run_fig1_experiment(&ExperimentConfig::fig1())) {
        Ok(o) => o,
        Err(c) => return collect(vec![c]),
    };
    let (nt, rt, ntr) = (out.median_mse("test", true), out.median_mse("test", false), out.median_mse("train", true));
    let rtr = out.median_mse("train", false);
    let mut checks = vec![check(
        matches!((nt, rt), (Some(a), Some(b)) if a < b),
        format!("median test mse normalized {nt:?} < raw {rt:?} (raw train {rtr:?})"),
    )];
    checks.push(check(
        matches!((nt, ntr), (Some(a), Some(b)) if a <= 2.0 * b),
        format!("normalized test {nt:?} <= 2 x normalized train {ntr:?}, flag rate {:.3}", out.report.flag_rate()),
    ));
    collect(checks)
}

fn criterion_davis_kahan() -> Outcome {
    match sweep("davis-kahan", run_davis_kahan_sweep(0, 100, 40)) {
        Ok(r) => {
            let slack: Vec<f64> = r.rows.iter().filter(|x| x.metric == "slack").map(|x| x.value).collect();
            let min = slack.iter().copied().fold(f64::INFINITY, f64::min);
            collect(vec![check(
                slack.len() == 100 && min >= 0.0,
                format!("{} pairs, minimum slack {min:.4e} (>= 0)", slack.len()),
            )])
        }
        Err(c) => collect(vec![c]),
    }
}

fn main() {
    let mut gate = Gate { passed: 0, total: 0 };
    gate.run(1, "exact fixtures", criterion_fixtures);
    gate.run(2, "structural invariants", criterion_invariants);
    gate.run(3, "gradient correctness", criterion_gradients);
    gate.run(4, "shift operator concentration", criterion_assumption);
    gate.run(5, "eigenvector and eigenvalue convergence", criterion_signnet);
    gate.run(6, "filtered shift convergence", criterion_filter);
    gate.run(7, "feature smoothing", criterion_smoothing);
    gate.run(8, "message passing convergence", criterion_mpnn);
    gate.run(9, "normalized encodings generalize", criterion_fig1);
    gate.run(10, "eigenvector perturbation bound", criterion_davis_kahan);
    println!("{}/{} criteria passed", gate.passed, gate.total);
}
