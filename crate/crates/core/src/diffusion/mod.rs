//! Conditional DDPM: noise schedule, forward process, noise-prediction loss,
//! ancestral sampling and the denoising-loss OOD score.

mod checkpoint;
mod optim;
mod sampling;
mod schedule;
mod tensor;
mod train;
mod unet;

use rand::Rng;
use rand_distr::StandardNormal;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use optim::Adam;
pub use sampling::{ood_score, sample, sample_image};
pub use schedule::{make_schedule, NoiseSchedule, ScheduleKind, ScheduleSpec};
pub use tensor::{image_to_tensor, tensor_to_image, Scalar, Tensor, TensorError};
pub use train::{loss_curve_csv, train, train_with_progress, TrainConfig, TrainReport};
pub use unet::{timestep_embedding, Cache, TinyUNet, UNetConfig};

#[derive(Debug, thiserror::Error)]
pub enum DiffusionError {
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("step {t} outside 1..={steps}")]
    Step { t: usize, steps: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("input: {0}")]
    Input(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("training diverged in epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },
    #[error("sampling produced non-finite values at step {step}")]
    Sampling { step: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("palette hash {found} does not match checkpoint {expected}")]
    PaletteMismatch { expected: String, found: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("config: {0}")]
    Config(String),
}

/// Noise predictor ε̂(x_t; cond, t).
pub trait Denoiser {
    fn predict(&self, x_t: &Tensor<f32>, cond: &Tensor<f32>, t: usize) -> Result<Tensor<f32>, DiffusionError>;
}

/// Always predicts zero noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl Denoiser for ZeroDenoiser {
    fn predict(&self, x_t: &Tensor<f32>, _cond: &Tensor<f32>, _t: usize) -> Result<Tensor<f32>, DiffusionError> {
        Ok(Tensor::zeros(x_t.channels, x_t.height, x_t.width))
    }
}

/// Stub that has memorized a single clean sample: it returns the exact noise
/// separating `x_t` from `x0`, so sampling reproduces `x0`.
#[derive(Debug, Clone)]
pub struct MemorizingDenoiser {
    pub x0: Tensor<f32>,
    pub schedule: NoiseSchedule,
}

impl Denoiser for MemorizingDenoiser {
    fn predict(&self, x_t: &Tensor<f32>, _cond: &Tensor<f32>, t: usize) -> Result<Tensor<f32>, DiffusionError> {
        self.schedule.check_step(t)?;
        x_t.same_shape(&self.x0)?;
        let ab = self.schedule.alpha_bar(t);
        let (a, k) = (ab.sqrt(), (1.0 - ab).sqrt());
        let data = x_t
            .data
            .iter()
            .zip(&self.x0.data)
            .map(|(&x, &c)| ((x as f64 - a * c as f64) / k) as f32)
            .collect();
        Ok(Tensor::from_vec(x_t.channels, x_t.height, x_t.width, data))
    }
}

pub fn gaussian_tensor<R: Rng + ?Sized>(channels: usize, height: usize, width: usize, rng: &mut R) -> Tensor<f32> {
    let data = (0..channels * height * width)
        .map(|_| rng.sample::<f32, _>(StandardNormal))
        .collect();
    Tensor::from_vec(channels, height, width, data)
}

/// Closed-form `x_t = √ᾱ_t x0 + √(1−ᾱ_t) ε`.
pub fn forward_diffuse(x0: &Tensor<f32>, t: usize, eps: &Tensor<f32>, schedule: &NoiseSchedule) -> Result<Tensor<f32>, DiffusionError> {
    x0.same_shape(eps)?;
    schedule.check_step(t)?;
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt() as f32, (1.0 - ab).sqrt() as f32);
    let data = x0.data.iter().zip(&eps.data).map(|(x, e)| a * x + b * e).collect();
    Ok(Tensor::from_vec(x0.channels, x0.height, x0.width, data))
}

/// Noise-prediction MSE at a given step and noise draw.
pub fn denoising_loss<D: Denoiser + ?Sized>(
    denoiser: &D,
    x0: &Tensor<f32>,
    cond: &Tensor<f32>,
    t: usize,
    eps: &Tensor<f32>,
    schedule: &NoiseSchedule,
) -> Result<f64, DiffusionError> {
    let x_t = forward_diffuse(x0, t, eps, schedule)?;
    let pred = denoiser.predict(&x_t, cond, t)?;
    pred.same_shape(eps)?;
    if !pred.all_finite() {
        return Err(DiffusionError::NonFinite(format!("denoiser output at t={t}")));
    }
    Ok(pred.mse(eps))
}

/// One draw of t ~ U{1..T} and ε ~ N(0, I), then [`denoising_loss`].
pub fn training_loss<D: Denoiser + ?Sized, R: Rng + ?Sized>(
    denoiser: &D,
    x0: &Tensor<f32>,
    cond: &Tensor<f32>,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<f64, DiffusionError> {
    x0.same_shape(cond)?;
    let t = rng.gen_range(1..=schedule.steps());
    let eps = gaussian_tensor(x0.channels, x0.height, x0.width, rng);
    denoising_loss(denoiser, x0, cond, t, &eps, schedule)
}
