use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{forward_diffuse, gaussian_tensor, Adam, DiffusionError, NoiseSchedule, Tensor, TinyUNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate at each milestone epoch.
    pub decay: f64,
    pub milestones: Vec<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global gradient-norm clip.
    pub grad_clip: Option<f64>,
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            decay: 0.1,
            milestones: Vec::new(),
            batch_size: 4,
            epochs: 10,
            seed: 0,
            grad_clip: Some(1.0),
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), DiffusionError> {
        let bad = |m: &str| Err(DiffusionError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must be in (0, 1]");
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return bad("gradient clip must be positive");
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| epoch >= m).count();
        self.learning_rate * self.decay.powi(passed as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean loss per optimizer step.
    pub step_losses: Vec<f64>,
}

/// `epoch,mean_loss` rows.
pub fn loss_curve_csv(report: &TrainReport) -> String {
    let mut s = String::from("epoch,mean_loss\n");
    for (i, l) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(s, "{},{l}", i + 1);
    }
    s
}

pub fn train(
    model: &mut TinyUNet<f32>,
    dataset: &[(Tensor<f32>, Tensor<f32>)],
    schedule: &NoiseSchedule,
    config: &TrainConfig,
) -> Result<TrainReport, DiffusionError> {
    train_with_progress(model, dataset, schedule, config, |_, _| {})
}

/// Like [`train`], calling `progress(epoch, mean_loss)` after each epoch.
///
/// Every batch element draws from its own RNG stream and gradients are
/// summed in element order, so results do not depend on `threads`.
pub fn train_with_progress(
    model: &mut TinyUNet<f32>,
    dataset: &[(Tensor<f32>, Tensor<f32>)],
    schedule: &NoiseSchedule,
    config: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainReport, DiffusionError> {
    config.check()?;
    let Some((x0, _)) = dataset.first() else {
        return Err(DiffusionError::EmptyDataset);
    };
    for (x, c) in dataset {
        x.same_shape(x0)?;
        c.same_shape(x0)?;
    }
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Adam::new(model.num_params());
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(config.epochs),
        step_losses: Vec::new(),
    };
    let mut draw = 0u64;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let lr = config.learning_rate_at(epoch);
        let mut epoch_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let jobs: Vec<(usize, u64)> = batch.iter().map(|&i| (i, next(&mut draw))).collect();
            let results = run_batch(model, dataset, schedule, config, &jobs);
            let mut grads = vec![0f32; model.num_params()];
            let mut loss = 0.0;
            for r in results {
                let (l, g) = r.map_err(|e| DiffusionError::Training {
                    epoch,
                    message: e.to_string(),
                })?;
                loss += l;
                for (a, b) in grads.iter_mut().zip(&g) {
                    *a += *b;
                }
            }
            let n = jobs.len() as f32;
            grads.iter_mut().for_each(|g| *g /= n);
            loss /= jobs.len() as f64;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(DiffusionError::Training {
                    epoch,
                    message: "non-finite loss or gradient".into(),
                });
            }
            if let Some(clip) = config.grad_clip {
                let norm = grads.iter().map(|g| (*g as f64).powi(2)).sum::<f64>().sqrt();
                if norm > clip {
                    let s = (clip / norm) as f32;
                    grads.iter_mut().for_each(|g| *g *= s);
                }
            }
            opt.update(model.params_mut(), &grads, lr);
            report.step_losses.push(loss);
            epoch_sum += loss * jobs.len() as f64;
        }
        let mean = epoch_sum / dataset.len() as f64;
        report.epoch_losses.push(mean);
        progress(epoch, mean);
    }
    Ok(report)
}

fn next(counter: &mut u64) -> u64 {
    *counter += 1;
    *counter
}

type ElementResult = Result<(f64, Vec<f32>), DiffusionError>;

fn run_batch(
    model: &TinyUNet<f32>,
    dataset: &[(Tensor<f32>, Tensor<f32>)],
    schedule: &NoiseSchedule,
    config: &TrainConfig,
    jobs: &[(usize, u64)],
) -> Vec<ElementResult> {
    let element = |&(i, stream): &(usize, u64)| -> ElementResult {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        let (x0, cond) = &dataset[i];
        let t = rng.gen_range(1..=schedule.steps());
        let eps = gaussian_tensor(x0.channels, x0.height, x0.width, &mut rng);
        let x_t = forward_diffuse(x0, t, &eps, schedule)?;
        let mut g = vec![0f32; model.num_params()];
        let l = model.loss_and_grad(&x_t, cond, t, &eps, &mut g)?;
        Ok((l, g))
    };
    let threads = config.threads.clamp(1, jobs.len().max(1));
    if threads == 1 {
        return jobs.iter().map(element).collect();
    }
    let per = jobs.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(per)
            .map(|chunk| s.spawn(move || chunk.iter().map(element).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("training worker panicked"))
            .collect()
    })
}
