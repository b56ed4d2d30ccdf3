use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::hyper::FnoHyperparams;
use super::model::{loss, normalize_inputs, squared_error, FnoModel, Workspace};
use crate::error::{NsoError, Result};
use crate::fields::SignalEnsemble;
use crate::numerics::RngStream;
use crate::truthsim::TrajectorySet;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Substream indices used by [`fit`].
const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;

/// Outcome of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Sample-weighted mean of the minibatch losses seen during each epoch.
    pub loss_trace: Vec<f64>,
    /// Loss of the final parameters over the whole training set.
    pub final_loss: f64,
    pub steps: usize,
    pub wall_seconds: f64,
    pub seed: u64,
    pub stream: u64,
    pub hp: FnoHyperparams,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

fn targets_of(traj: &TrajectorySet, channels: usize) -> Result<Vec<&SignalEnsemble>> {
    let mut out = vec![&traj.displacement];
    if channels == 2 {
        out.push(traj.latent.as_ref().ok_or_else(|| {
            NsoError::Config("a two-channel model needs latent trajectories".into())
        })?);
    }
    Ok(out)
}

/// Minibatch Adam on the mean squared error. Epoch `e` shuffles rows with
/// `rng.substream(e)`; a trailing partial batch is still used.
///
/// `hp` supplies the optimizer settings and must describe the same
/// architecture as `model`. The model keeps its normalization statistics.
pub fn train(
    model: &mut FnoModel,
    traj: &TrajectorySet,
    hp: &FnoHyperparams,
    rng: &RngStream,
) -> Result<TrainReport> {
    hp.validate()?;
    if !hp.same_architecture(&model.hp) {
        return Err(NsoError::Config(
            "training hyperparameters describe a different architecture".into(),
        ));
    }
    let rows = traj.rows();
    if rows < hp.batch_size {
        return Err(NsoError::Config(format!(
            "{rows} training rows is fewer than the batch size {}",
            hp.batch_size
        )));
    }
    let targets = targets_of(traj, hp.out_channels)?;
    let grid = traj.grid();
    let n = grid.len();
    let basis = model.basis(n)?;
    let started = Instant::now();
    model.hp = hp.clone();

    let mut adam = Adam::new(model.params.len(), hp.learning_rate);
    let mut grad = vec![0.0; model.params.len()];
    let mut ws_full = Workspace::new(hp, hp.batch_size, n);
    let tail = rows % hp.batch_size;
    let mut ws_tail = (tail > 0).then(|| Workspace::new(hp, tail, n));
    let mut order: Vec<usize> = (0..rows).collect();
    let mut loss_trace = Vec::with_capacity(hp.epochs);
    let mut steps = 0;

    for epoch in 0..hp.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng.substream(epoch as u64));
        let mut weighted = 0.0;
        for (batch, idx) in order.chunks(hp.batch_size).enumerate() {
            let ws = if idx.len() == hp.batch_size {
                &mut ws_full
            } else {
                ws_tail.as_mut().expect("tail workspace exists")
            };
            let v: Array2<f64> = traj.voltage.values.select(Axis(0), idx);
            let t_blocks: Vec<Array2<f64>> =
                targets.iter().map(|t| t.values.select(Axis(0), idx)).collect();
            let t_refs: Vec<&Array2<f64>> = t_blocks.iter().collect();
            model.load_inputs(ws, &v, grid)?;
            model.forward_ws(&basis, ws);
            let (batch_loss, dout) = squared_error(ws, &t_refs)?;
            if !batch_loss.is_finite() {
                return Err(NsoError::Training { epoch, batch });
            }
            model.backward_ws(&basis, ws, &dout, &mut grad);
            adam.step(&mut model.params, &grad);
            steps += 1;
            weighted += batch_loss * idx.len() as f64;
        }
        loss_trace.push(weighted / rows as f64);
    }

    let final_loss = loss(model, &traj.voltage, &targets)?;
    if !final_loss.is_finite() {
        return Err(NsoError::Training {
            epoch: hp.epochs,
            batch: 0,
        });
    }
    Ok(TrainReport {
        loss_trace,
        final_loss,
        steps,
        wall_seconds: started.elapsed().as_secs_f64(),
        seed: rng.seed(),
        stream: rng.stream(),
        hp: hp.clone(),
    })
}

/// Normalize, initialize from `rng.substream(0)`, and train with shuffles
/// drawn from `rng.substream(1)`.
pub fn fit(traj: &TrajectorySet, hp: &FnoHyperparams, rng: &RngStream) -> Result<(FnoModel, TrainReport)> {
    let (norm, _) = normalize_inputs(&traj.voltage)?;
    let mut model = FnoModel::init(hp, norm, &rng.substream(INIT_STREAM))?;
    let report = train(&mut model, traj, hp, &rng.substream(SHUFFLE_STREAM))?;
    Ok((model, report))
}
