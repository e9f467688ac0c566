//! Regression with SignNet encodings on graphs of two sizes, with and without
//! the `√n` eigenvector renormalization.

use faer::{Mat, MatRef};
use rayon::prelude::*;

use super::config::{ExperimentConfig, Optimizer};
use super::report::{median, ConvergenceReport, Flag};
use crate::error::{Error, Result};
use crate::graph::{sample_graph_with, shift_matrix};
use crate::kernel::Latent;
use crate::nn::{mpnn_backward, mpnn_forward_cached, GnnParams, MlpCache, MlpParams};
use crate::rng::{self, Purpose};
use crate::spectral;

/// SignNet branches feeding a message-passing network.
#[derive(Debug, Clone, PartialEq)]
pub struct PeGnn {
    pub branches: Vec<MlpParams>,
    pub gnn: GnnParams,
}

/// One graph prepared for training: shift, scaled eigenvectors and targets.
pub struct GraphTask {
    shift: Mat<f64>,
    /// `(u_b, -u_b)` as `n × 1` columns.
    inputs: Vec<(Mat<f64>, Mat<f64>)>,
    target: Mat<f64>,
}

impl GraphTask {
    pub fn new(shift: Mat<f64>, latents: &[Latent], q: usize, normalize: bool, g: impl Fn(Latent) -> f64) -> Result<Self> {
        let n = shift.nrows();
        if q > n {
            return Err(Error::InvalidArgument(format!("q = {q} exceeds n = {n}")));
        }
        let eig = spectral::sym_eig(shift.as_ref())?;
        let scale = if normalize { (n as f64).sqrt() } else { 1.0 };
        let inputs = (0..q)
            .map(|b| {
                let plus = Mat::from_fn(n, 1, |i, _| scale * eig.vectors[(i, b)]);
                let minus = Mat::from_fn(n, 1, |i, _| -plus[(i, 0)]);
                (plus, minus)
            })
            .collect();
        let target = Mat::from_fn(n, 1, |i, _| g(latents[i]));
        Ok(Self { shift, inputs, target })
    }

    pub fn n(&self) -> usize {
        self.shift.nrows()
    }
}

struct Forward {
    pred: Mat<f64>,
    caches: Vec<(MlpCache, MlpCache)>,
    gnn: crate::nn::GnnCache,
}

impl PeGnn {
    pub fn init(cfg: &ExperimentConfig, seed: u64) -> Self {
        let mut r = rng::stream(cfg.seed, 0, seed, Purpose::Params);
        let branches =
            (0..cfg.pe.q).map(|_| MlpParams::xavier(&[1, cfg.pe.hidden, cfg.pe.width], &mut r)).collect();
        let mut widths = vec![cfg.pe.q * cfg.pe.width];
        widths.extend(&cfg.gnn.hidden);
        widths.push(1);
        Self { branches, gnn: GnnParams::xavier(&widths, &mut r) }
    }

    fn forward(&self, task: &GraphTask) -> Result<Forward> {
        let n = task.n();
        let mut z0 = Mat::<f64>::zeros(n, self.gnn.d_in());
        let mut caches = Vec::with_capacity(self.branches.len());
        let mut col = 0;
        for (branch, (plus, minus)) in self.branches.iter().zip(&task.inputs) {
            let (a, ca) = branch.forward_cached(plus.as_ref())?;
            let (b, cb) = branch.forward_cached(minus.as_ref())?;
            for j in 0..a.ncols() {
                for i in 0..n {
                    z0[(i, col + j)] = a[(i, j)] + b[(i, j)];
                }
            }
            col += a.ncols();
            caches.push((ca, cb));
        }
        let (pred, gnn) = mpnn_forward_cached(task.shift.as_ref(), z0.as_ref(), &self.gnn)?;
        Ok(Forward { pred, caches, gnn })
    }

    pub fn predict(&self, task: &GraphTask) -> Result<Mat<f64>> {
        Ok(self.forward(task)?.pred)
    }

    /// Mean squared node error.
    pub fn mse(&self, task: &GraphTask) -> Result<f64> {
        let pred = self.predict(task)?;
        Ok(spectral::mse_norm((pred - &task.target).as_ref()).powi(2))
    }

    /// Loss and gradient with respect to every parameter, flattened.
    pub fn loss_and_grad(&self, task: &GraphTask) -> Result<(f64, Vec<f64>)> {
        let n = task.n() as f64;
        let fwd = self.forward(task)?;
        let resid = &fwd.pred - &task.target;
        let loss = resid.squared_norm_l2() / n;
        let upstream = resid * faer::Scale(2.0 / n);
        let (g_gnn, dz0) = mpnn_backward(task.shift.as_ref(), &self.gnn, &fwd.gnn, upstream.as_ref())?;
        let mut grad = Vec::with_capacity(self.num_params());
        let mut col = 0;
        for (branch, (ca, cb)) in self.branches.iter().zip(&fwd.caches) {
            let width = branch.d_out();
            let d: MatRef<'_, f64> = dz0.as_ref().subcols(col, width);
            let (mut ga, _) = branch.backward(ca, d)?;
            let (gb, _) = branch.backward(cb, d)?;
            ga.axpy(1.0, &gb);
            grad.extend(ga.to_vec());
            col += width;
        }
        grad.extend(g_gnn.to_vec());
        Ok((loss, grad))
    }

    pub fn num_params(&self) -> usize {
        self.branches.iter().map(MlpParams::num_params).sum::<usize>() + self.gnn.num_params()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.branches.iter().flat_map(MlpParams::to_vec).collect();
        v.extend(self.gnn.to_vec());
        v
    }

    pub fn set_from_slice(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.num_params() {
            return Err(Error::Shape(format!("{} values for {} parameters", v.len(), self.num_params())));
        }
        let mut at = 0;
        for b in &mut self.branches {
            let k = b.num_params();
            b.set_from_slice(&v[at..at + k])?;
            at += k;
        }
        self.gnn.set_from_slice(&v[at..])
    }
}

/// Full-batch training. Returns `None` if the loss stops being finite.
pub fn train(model: &mut PeGnn, task: &GraphTask, steps: usize, lr: f64, opt: Optimizer) -> Result<Option<f64>> {
    let (b1, b2, eps) = (0.9_f64, 0.999_f64, 1e-8);
    let mut theta = model.to_vec();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    for step in 1..=steps {
        let (loss, grad) = model.loss_and_grad(task)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Ok(None);
        }
        match opt {
            Optimizer::Gd => theta.iter_mut().zip(&grad).for_each(|(t, g)| *t -= lr * g),
            Optimizer::Adam => {
                let (c1, c2) = (1.0 - b1.powi(step as i32), 1.0 - b2.powi(step as i32));
                for i in 0..theta.len() {
                    m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                    theta[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        }
        model.set_from_slice(&theta)?;
    }
    let loss = model.mse(task)?;
    Ok(loss.is_finite().then_some(loss))
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub seed: usize,
    pub normalize: bool,
    pub params: PeGnn,
    pub diverged: bool,
}

#[derive(Debug, Clone)]
pub struct Fig1Outcome {
    pub report: ConvergenceReport,
    pub models: Vec<TrainedModel>,
}

impl Fig1Outcome {
    pub fn median_mse(&self, split: &str, normalize: bool) -> Option<f64> {
        let tag = if normalize { "normalized" } else { "raw" };
        let metric = format!("{split}_mse_{tag}");
        let vals: Vec<f64> = self
            .report
            .rows
            .iter()
            .filter(|r| r.metric == metric && r.flag == Flag::Ok)
            .map(|r| r.value)
            .collect();
        median(&vals)
    }
}

/// Trains on a graph of `n_train` nodes and tests on a fresh graph of `n_test` nodes,
/// for each seed and both normalization settings.
pub fn run_fig1_experiment(cfg: &ExperimentConfig) -> Result<Fig1Outcome> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    if model.is_sbm() {
        return Err(Error::Config("the regression experiment needs a continuous model".into()));
    }
    let t = &cfg.train;
    let (n_train, n_test) = (t.n_train, t.n_test());
    let target = t.target;
    let per_seed = (0..t.seeds)
        .into_par_iter()
        .map(|seed| -> Result<Vec<(bool, f64, f64, TrainedModel)>> {
            let graph = |n: usize| {
                let mut r = rng::stream(cfg.seed, n as u64, seed as u64, Purpose::Graph);
                sample_graph_with(&model, n, cfg.alpha.alpha(n), &mut r)
            };
            let (g_train, g_test) = (graph(n_train)?, graph(n_test)?);
            let (s_train, s_test) = (shift_matrix(&g_train, cfg.shift), shift_matrix(&g_test, cfg.shift));
            [true, false]
                .into_iter()
                .map(|normalize| {
                    let tr = GraphTask::new(s_train.clone(), &g_train.latents, cfg.pe.q, normalize, |x| target.eval(x))?;
                    let te = GraphTask::new(s_test.clone(), &g_test.latents, cfg.pe.q, normalize, |x| target.eval(x))?;
                    let mut net = PeGnn::init(cfg, seed as u64);
                    let (train_mse, test_mse, diverged) =
                        match train(&mut net, &tr, t.steps, t.learning_rate, t.optimizer)? {
                            Some(l) => (l, net.mse(&te)?, false),
                            None => (f64::NAN, f64::NAN, true),
                        };
                    let trained = TrainedModel { seed, normalize, params: net, diverged };
                    Ok((normalize, train_mse, test_mse, trained))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = ConvergenceReport::new("fig1", cfg);
    let mut models = Vec::new();
    for (seed, runs) in per_seed.into_iter().enumerate() {
        for (normalize, train_mse, test_mse, trained) in runs {
            let tag = if normalize { "normalized" } else { "raw" };
            let flag = if trained.diverged { Flag::Diverged } else { Flag::Ok };
            report.push(n_train, seed, &format!("train_mse_{tag}"), train_mse, flag);
            report.push(n_test, seed, &format!("test_mse_{tag}"), test_mse, flag);
            models.push(trained);
        }
    }
    Ok(Fig1Outcome { report, models })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::harness::config::{PeSpec, Target, TrainSpec};
    use crate::kernel::ShiftKind;

    fn tiny_cfg() -> ExperimentConfig {
        ExperimentConfig {
            pe: PeSpec { q: 2, hidden: 4, width: 2, normalize: true },
            gnn: crate::harness::config::GnnSpec { hidden: vec![4], ..Default::default() },
            train: TrainSpec { steps: 5, n_train: 30, seeds: 1, ..Default::default() },
            ..ExperimentConfig::fig1()
        }
    }

    fn tiny_task(normalize: bool) -> GraphTask {
        let g = crate::graph::sample_graph(&fixtures::gaussian(), 30, 1.0, 5).unwrap();
        let s = shift_matrix(&g, ShiftKind::NormalizedAdjacency);
        GraphTask::new(s, &g.latents, 2, normalize, |x| Target::CosPi.eval(x)).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = tiny_cfg();
        let task = tiny_task(true);
        let mut net = PeGnn::init(&cfg, 3);
        let (_, grad) = net.loss_and_grad(&task).unwrap();
        let theta = net.to_vec();
        let h = 1e-6;
        let mut checked = 0;
        for k in (0..theta.len()).step_by(7) {
            let mut p = theta.clone();
            p[k] += h;
            net.set_from_slice(&p).unwrap();
            let up = net.loss_and_grad(&task).unwrap().0;
            p[k] -= 2.0 * h;
            net.set_from_slice(&p).unwrap();
            let down = net.loss_and_grad(&task).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-5 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", grad[k]);
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn training_reduces_loss() {
        let cfg = tiny_cfg();
        let task = tiny_task(true);
        let mut net = PeGnn::init(&cfg, 1);
        let before = net.mse(&task).unwrap();
        let after = train(&mut net, &task, 200, 1e-2, Optimizer::Adam).unwrap().unwrap();
        assert!(after < before);
    }

    #[test]
    fn zero_target_is_learned() {
        for normalize in [true, false] {
            let cfg = tiny_cfg();
            let g = crate::graph::sample_graph(&fixtures::gaussian(), 30, 1.0, 5).unwrap();
            let s = shift_matrix(&g, ShiftKind::NormalizedAdjacency);
            let task = GraphTask::new(s, &g.latents, 2, normalize, |x| Target::Zero.eval(x)).unwrap();
            let mut net = PeGnn::init(&cfg, 2);
            let loss = train(&mut net, &task, 3000, 1e-2, Optimizer::Adam).unwrap().unwrap();
            assert!(loss < 1e-3, "{loss}");
        }
    }

    #[test]
    fn experiment_reports_both_settings() {
        let out = run_fig1_experiment(&tiny_cfg()).unwrap();
        assert_eq!(out.report.rows.len(), 4);
        assert_eq!(out.models.len(), 2);
        assert!(out.median_mse("test", true).is_some());
        assert!(run_fig1_experiment(&ExperimentConfig::default()).is_err());
    }
}
