use serde::{Deserialize, Serialize};

use super::{EpsModel, Guidance};
use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;
use crate::tensorio::VideoTensor;

/// One deterministic DDIM update from `t` to `t_prev` (`t_prev = 0` lands
/// on the clean estimate):
///
/// ```text
/// x0_hat = (z_t - sqrt(1 - ab_t) * eps) / sqrt(ab_t)
/// z_prev = sqrt(ab_prev) * x0_hat + sqrt(1 - ab_prev) * eps
/// ```
pub fn ddim_step(
    z_t: &VideoTensor,
    t: usize,
    t_prev: usize,
    eps_pred: &VideoTensor,
    s: &NoiseSchedule,
) -> Result<VideoTensor> {
    s.check_t(t)?;
    if t_prev >= t {
        return Err(Error::param("t_prev", format!("need t_prev < t, got {t_prev} >= {t}")));
    }
    eps_pred.ensure_shape(z_t.shape())?;
    let ab = s.alpha_bar(t)?;
    let ab_prev = s.alpha_bar(t_prev)?;
    let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
    let (pa, pn) = (ab_prev.sqrt(), (1.0 - ab_prev).sqrt());
    let data: Vec<f64> = z_t
        .data()
        .iter()
        .zip(eps_pred.data())
        .map(|(&z, &e)| {
            let (z, e) = (f64::from(z), f64::from(e));
            let x0 = (z - sn * e) / sa;
            pa * x0 + pn * e
        })
        .collect();
    VideoTensor::from_f64(z_t.shape(), &data)
}

/// `eps_u + w (eps_c - eps_u)`.
///
/// Only the prediction that is actually needed is evaluated: no class means
/// the unconditional branch alone, `w = 0` returns `eps_u` and `w = 1`
/// returns `eps_c`.
pub fn guided_eps<M: EpsModel + ?Sized>(
    model: &M,
    z_t: &VideoTensor,
    t: usize,
    cond: Option<usize>,
    w: f64,
) -> Result<VideoTensor> {
    let Some(class) = cond else {
        return model.predict_eps(z_t, t, None);
    };
    if w == 0.0 {
        return model.predict_eps(z_t, t, None);
    }
    if w == 1.0 {
        return model.predict_eps(z_t, t, Some(class));
    }
    let eps_u = model.predict_eps(z_t, t, None)?;
    let eps_c = model.predict_eps(z_t, t, Some(class))?;
    eps_c.ensure_shape(eps_u.shape())?;
    let data: Vec<f64> = eps_u
        .data()
        .iter()
        .zip(eps_c.data())
        .map(|(&u, &c)| {
            let u = f64::from(u);
            u + w * (f64::from(c) - u)
        })
        .collect();
    VideoTensor::from_f64(eps_u.shape(), &data)
}

/// Strictly decreasing timesteps visited by one DDIM pass; the final
/// transition goes to `t = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepPlan(Vec<usize>);

impl StepPlan {
    pub fn new(steps: Vec<usize>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::param("plan", "empty step plan"));
        }
        if steps.windows(2).any(|w| w[1] >= w[0]) || *steps.last().unwrap() == 0 {
            return Err(Error::param("plan", format!("not strictly decreasing in 1..: {steps:?}")));
        }
        Ok(StepPlan(steps))
    }

    pub fn steps(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(t, t_prev)` pairs, ending with `(t_last, 0)`.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0
            .iter()
            .enumerate()
            .map(move |(k, &t)| (t, self.0.get(k + 1).copied().unwrap_or(0)))
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// `n` uniformly spaced timesteps starting at `T`: `t_k = round(T - k T / n)`.
pub fn make_step_plan(total: usize, n_steps: usize) -> Result<StepPlan> {
    if n_steps == 0 || n_steps > total {
        return Err(Error::param(
            "ddim_steps",
            format!("need 1 <= steps <= T = {total}, got {n_steps}"),
        ));
    }
    let stride = total as f64 / n_steps as f64;
    let mut steps: Vec<usize> = (0..n_steps)
        .map(|k| round_half_up(total as f64 - k as f64 * stride))
        .collect();
    steps.dedup();
    StepPlan::new(steps)
}

/// Per-iteration DDIM budgets `T_i = round((i + 1) T / N)` for
/// `i = 0..N`, rounded half-up with duplicates collapsed.
pub fn coarse_to_fine_steps(total_steps: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 || total_steps < n {
        return Err(Error::param(
            "iterations",
            format!("coarse-to-fine needs 1 <= N <= steps, got N = {n}, steps = {total_steps}"),
        ));
    }
    let mut out: Vec<usize> = (0..n)
        .map(|i| round_half_up(total_steps as f64 * (i + 1) as f64 / n as f64))
        .collect();
    out.dedup();
    Ok(out)
}

/// Folds [`ddim_step`] over `plan`, using guided predictions at each step.
pub fn ddim_sample<M: EpsModel + ?Sized>(
    model: &M,
    z_start: &VideoTensor,
    plan: &StepPlan,
    guidance: Guidance,
    s: &NoiseSchedule,
) -> Result<VideoTensor> {
    let mut z = z_start.clone();
    for (t, t_prev) in plan.transitions() {
        let eps = guided_eps(model, &z, t, guidance.class, guidance.weight)?;
        z = ddim_step(&z, t, t_prev, &eps, s)?;
    }
    Ok(z)
}
