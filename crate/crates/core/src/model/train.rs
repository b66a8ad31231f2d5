//! Epsilon-MSE training with Adam.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::net::{Network, Tape};
use super::real::Real;
use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;
use crate::tensorio::{gaussian_tensor, RngState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Probability of replacing the class label with the null class.
    pub cond_drop_prob: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
    pub ema_decay: f64,
    /// Not part of the serialized form; experiments derive it from their
    /// root seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1,
            lr: 2e-3,
            batch_size: 4,
            cond_drop_prob: 0.1,
            grad_clip: 1.0,
            ema_decay: 0.98,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::param("train", "epochs and batch_size must be positive"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::param("lr", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.cond_drop_prob) {
            return Err(Error::param("cond_drop_prob", "must lie in [0, 1]"));
        }
        if !(self.grad_clip.is_finite() && self.grad_clip >= 0.0) {
            return Err(Error::param("grad_clip", "must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::param("ema_decay", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub steps: usize,
    /// Mean loss of the first optimizer step, before any update.
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub final_ema_loss: f64,
    /// Not serialized so that reports stay byte-identical across runs.
    #[serde(skip)]
    pub wallclock_secs: f64,
}

#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn update<T: Real>(&mut self, params: &mut [T], grads: &[T]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let g = g.as_f64();
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let upd = self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            *p = T::of(p.as_f64() - upd);
        }
    }
}

/// One training example: noisy input, conditioning vector and target noise.
fn draw_example<T: Real>(
    net: &Network<T>,
    z0: &crate::tensorio::VideoTensor,
    label: Option<usize>,
    s: &NoiseSchedule,
    rng: &mut RngState,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let t = 1 + rng.next_below(s.steps());
    let eps = gaussian_tensor(z0.shape(), rng)?;
    let z_t = s.q_sample(z0, t, &eps)?;
    Ok((net.to_channel_major(&z_t)?, net.cond_vector(t, label)?, net.to_channel_major(&eps)?))
}

pub fn train<T: Real>(net: &mut Network<T>, data: &Dataset, s: &NoiseSchedule, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::param("dataset", "no training videos"));
    }
    if s.steps() > net.config().timesteps {
        return Err(Error::param("schedule", "schedule is longer than the network's timestep range"));
    }
    let started = Instant::now();
    let mut rng = RngState::substream(cfg.seed, "train");
    let mut adam = Adam::new(net.num_params(), cfg.lr);
    let mut grads = vec![T::zero(); net.num_params()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport {
        seed: cfg.seed,
        steps: 0,
        initial_loss: f64::NAN,
        epoch_losses: Vec::with_capacity(cfg.epochs),
        final_ema_loss: f64::NAN,
        wallclock_secs: 0.0,
    };
    let mut ema: Option<f64> = None;
    let mut tape = Tape::default();
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = T::zero());
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let drop = rng.next_uniform() < cfg.cond_drop_prob;
                let label = if drop { None } else { Some(data.labels[i]) };
                let (x, e, target) = draw_example(net, &data.videos[i], label, s, &mut rng)?;
                batch_loss += scale * net.loss_and_grad_with(&x, &e, &target, scale, &mut grads, &mut tape);
            }
            if !batch_loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    step: report.steps,
                    loss: batch_loss,
                });
            }
            if report.steps == 0 {
                report.initial_loss = batch_loss;
            }
            if cfg.grad_clip > 0.0 {
                let norm = grads.iter().map(|g| g.as_f64().powi(2)).sum::<f64>().sqrt();
                if norm > cfg.grad_clip {
                    let k = T::of(cfg.grad_clip / norm);
                    grads.iter_mut().for_each(|g| *g = *g * k);
                }
            }
            adam.update(net.params_mut(), &grads);
            report.steps += 1;
            epoch_sum += batch_loss * batch.len() as f64;
            ema = Some(match ema {
                None => batch_loss,
                Some(m) => cfg.ema_decay * m + (1.0 - cfg.ema_decay) * batch_loss,
            });
        }
        report.epoch_losses.push(epoch_sum / data.len() as f64);
    }
    report.final_ema_loss = ema.unwrap_or(f64::NAN);
    report.wallclock_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Mean epsilon-MSE over `data` with one fixed-seed draw of `(t, eps)` per
/// video and the true class label.
pub fn eval_loss<T: Real>(net: &Network<T>, data: &Dataset, s: &NoiseSchedule, seed: u64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::param("dataset", "no evaluation videos"));
    }
    let mut rng = RngState::substream(seed, "eval");
    let mut total = 0.0;
    for (v, &label) in data.videos.iter().zip(&data.labels) {
        let (x, e, target) = draw_example(net, v, Some(label), s, &mut rng)?;
        total += net.loss(&x, &e, &target);
    }
    Ok(total / data.len() as f64)
}
