use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{ModelDims, NoisePredictor};
use super::schedule::NoiseSchedule;
use crate::adam::{Adam, AdamHyper};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    /// Decay of the weight moving average used for sampling; 0 disables it.
    pub ema_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 50,
            learning_rate: 1e-3,
            hidden: 128,
            ema_decay: 0.999,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::Parameter(
                "epochs, batch_size and hidden must all be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Parameter("ema_decay must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// A trained model together with its optimizer state and loss curve.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Weights for sampling: the moving average when enabled, otherwise the
    /// last iterate.
    pub model: NoisePredictor,
    /// Last optimizer iterate.
    pub online: NoisePredictor,
    pub optimizer: Adam,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

fn standard_normal(rng: &mut Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Noise-prediction training: per sample draw `t ~ U{1..T}` and `ε ~ N(0, I)`,
/// regress `ε_θ(sqrt(ᾱ_t)·x0 + sqrt(1-ᾱ_t)·ε, t)` onto `ε`, one Adam step per
/// minibatch.
pub fn train(
    dataset: &[Vec<f64>],
    schedule: &NoiseSchedule,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let dim = match dataset.first() {
        Some(v) => v.len(),
        None => return Err(Error::Parameter("training set is empty".into())),
    };
    if dataset
        .iter()
        .any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite()))
    {
        return Err(Error::Parameter(
            "training vectors must share one dimension and be finite".into(),
        ));
    }
    let dims = ModelDims {
        input: dim,
        hidden: cfg.hidden,
        steps: schedule.steps(),
    };
    let mut model = NoisePredictor::init(dims, derive_seed(cfg.seed, stream::WEIGHT_INIT, 0))?;
    let mut optimizer = Adam::new(
        AdamHyper::with_learning_rate(cfg.learning_rate),
        model.params().len(),
    );
    let mut rng = rng_from_seed(derive_seed(cfg.seed, stream::TRAIN, 0));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut grad = vec![0.0; model.params().len()];
    let mut average = model.params().to_vec();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(Vec<f64>, usize, Vec<f64>)> = chunk
                .iter()
                .map(|&i| {
                    let t = rng.random_range(1..=schedule.steps());
                    let eps = standard_normal(&mut rng, dim);
                    let ab = schedule.alpha_bar(t);
                    let (s, n) = (ab.sqrt(), (1.0 - ab).sqrt());
                    let xt = dataset[i]
                        .iter()
                        .zip(&eps)
                        .map(|(x, e)| s * x + n * e)
                        .collect();
                    (xt, t, eps)
                })
                .collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = model.batch_loss(&batch, Some(&mut grad))?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, loss });
            }
            epoch_loss += loss * chunk.len() as f64;
            optimizer.update(model.params_mut(), &grad);
            if cfg.ema_decay > 0.0 {
                // Warm-up keeps early, untrained weights from dominating.
                let k = optimizer.step as f64;
                let decay = cfg.ema_decay.min((1.0 + k) / (10.0 + k));
                for (a, p) in average.iter_mut().zip(model.params()) {
                    *a = decay * *a + (1.0 - decay) * p;
                }
            }
        }
        let mean = epoch_loss / dataset.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        loss_history.push(mean);
    }

    let online = model;
    let model = if cfg.ema_decay > 0.0 {
        NoisePredictor::from_params(dims, average)?
    } else {
        online.clone()
    };
    Ok(TrainOutput {
        model,
        online,
        optimizer,
        loss_history,
    })
}

/// One reverse step:
/// `x_{t-1} = (x_t - (1-α_t)/sqrt(1-ᾱ_t)·ε_θ(x_t, t)) / sqrt(α_t) + σ_t·z`.
pub fn denoise_step(
    model: &NoisePredictor,
    schedule: &NoiseSchedule,
    x: &[f64],
    t: usize,
    z: &[f64],
) -> Result<Vec<f64>> {
    schedule.check_step(t)?;
    if z.len() != x.len() {
        return Err(Error::Parameter("noise and sample lengths differ".into()));
    }
    let eps = model.predict(x, t)?;
    let coef = (1.0 - schedule.alpha(t)) / (1.0 - schedule.alpha_bar(t)).sqrt();
    let sqrt_alpha = schedule.alpha(t).sqrt();
    let sigma = schedule.sigma(t);
    Ok(x.iter()
        .zip(&eps)
        .zip(z)
        .map(|((x, e), z)| (x - coef * e) / sqrt_alpha + sigma * z)
        .collect())
}

/// Ancestral sampling from `x_T ~ N(0, I)` down to `x_0`. Chain `i` draws all
/// its noise from its own derived seed.
pub fn sample(
    model: &NoisePredictor,
    schedule: &NoiseSchedule,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::Parameter("sample count must be at least 1".into()));
    }
    if model.dims().steps != schedule.steps() {
        return Err(Error::Parameter(format!(
            "model was built for {} steps, schedule has {}",
            model.dims().steps,
            schedule.steps()
        )));
    }
    let dim = model.dims().input;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, stream::SAMPLE_CHAIN, i as u64));
            let mut x = standard_normal(&mut rng, dim);
            for t in (1..=schedule.steps()).rev() {
                let z = if t > 1 {
                    standard_normal(&mut rng, dim)
                } else {
                    vec![0.0; dim]
                };
                x = denoise_step(model, schedule, &x, t, &z)?;
            }
            Ok(x)
        })
        .collect()
}
