use rand::Rng;

use super::{denoising_loss, gaussian_tensor, image_to_tensor, tensor_to_image, Denoiser, DiffusionError, NoiseSchedule, Tensor};
use crate::raster::LayoutImage;

/// Ancestral sampling from x_T ~ N(0, I) with σ_t² = β_t. Returns a tensor
/// in the model range, clamped to [-1, 1].
pub fn sample<D: Denoiser + ?Sized, R: Rng + ?Sized>(
    denoiser: &D,
    cond: &Tensor<f32>,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<Tensor<f32>, DiffusionError> {
    let (c, h, w) = cond.shape();
    let mut x = gaussian_tensor(c, h, w, rng);
    for t in (1..=schedule.steps()).rev() {
        let eps = denoiser.predict(&x, cond, t)?;
        eps.same_shape(&x)?;
        let (alpha, beta, ab) = (schedule.alpha(t), schedule.beta(t), schedule.alpha_bar(t));
        let inv = (1.0 / alpha.sqrt()) as f32;
        let k = (beta / (1.0 - ab).sqrt()) as f32;
        let sigma = beta.sqrt() as f32;
        let z = if t > 1 { Some(gaussian_tensor(c, h, w, rng)) } else { None };
        for (i, v) in x.data.iter_mut().enumerate() {
            let mut nv = inv * (*v - k * eps.data[i]);
            if let Some(z) = &z {
                nv += sigma * z.data[i];
            }
            *v = nv;
        }
        if !x.all_finite() {
            return Err(DiffusionError::Sampling { step: t });
        }
    }
    x.data.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    Ok(x)
}

/// [`sample`] on images: condition and result are in [0, 1]; the result
/// carries the condition's world transform.
pub fn sample_image<D: Denoiser + ?Sized, R: Rng + ?Sized>(
    denoiser: &D,
    cond: &LayoutImage,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<LayoutImage, DiffusionError> {
    let x = sample(denoiser, &image_to_tensor(cond), schedule, rng)?;
    Ok(tensor_to_image(&x, cond.transform))
}

/// Mean noise-prediction error over `iters` draws with t ~ U{t_lo..=t_hi}.
#[allow(clippy::too_many_arguments)]
pub fn ood_score<D: Denoiser + ?Sized, R: Rng + ?Sized>(
    denoiser: &D,
    x0: &Tensor<f32>,
    cond: &Tensor<f32>,
    schedule: &NoiseSchedule,
    rng: &mut R,
    t_lo: usize,
    t_hi: usize,
    iters: usize,
) -> Result<f64, DiffusionError> {
    if !(t_lo >= 1 && t_lo < t_hi && t_hi <= schedule.steps()) {
        return Err(DiffusionError::Input(format!(
            "need 1 <= t_lo < t_hi <= {}, got {t_lo}..{t_hi}",
            schedule.steps()
        )));
    }
    if iters == 0 {
        return Err(DiffusionError::Input("iters must be positive".into()));
    }
    x0.same_shape(cond)?;
    let mut total = 0.0;
    for _ in 0..iters {
        let t = rng.gen_range(t_lo..=t_hi);
        let eps = gaussian_tensor(x0.channels, x0.height, x0.width, rng);
        total += denoising_loss(denoiser, x0, cond, t, &eps, schedule)?;
    }
    Ok(total / iters as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{make_schedule, ScheduleKind, ZeroDenoiser};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_step_closed_form() {
        let s = make_schedule(ScheduleKind::Linear, 1, 0.5, 0.5).unwrap();
        let cond = Tensor::zeros(3, 4, 4);
        let out = sample(&ZeroDenoiser, &cond, &s, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let x1 = gaussian_tensor(3, 4, 4, &mut ChaCha8Rng::seed_from_u64(9));
        for (o, x) in out.data.iter().zip(&x1.data) {
            let want = (x / 0.5f32.sqrt()).clamp(-1.0, 1.0);
            assert!((o - want).abs() < 1e-6);
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let s = make_schedule(ScheduleKind::Linear, 10, 1e-4, 0.02).unwrap();
        let cond = Tensor::zeros(3, 4, 4);
        let a = sample(&ZeroDenoiser, &cond, &s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = sample(&ZeroDenoiser, &cond, &s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ood_score_bounds() {
        let s = make_schedule(ScheduleKind::Linear, 100, 1e-4, 0.02).unwrap();
        let x0 = Tensor::zeros(3, 8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = ood_score(&ZeroDenoiser, &x0, &x0, &s, &mut rng, 90, 100, 100).unwrap();
        assert!((z - 1.0).abs() < 0.05, "{z}");
        assert!(ood_score(&ZeroDenoiser, &x0, &x0, &s, &mut rng, 100, 90, 1).is_err());
        assert!(ood_score(&ZeroDenoiser, &x0, &x0, &s, &mut rng, 90, 101, 1).is_err());

        struct Exact<'a>(&'a NoiseSchedule);
        impl Denoiser for Exact<'_> {
            fn predict(&self, x_t: &Tensor<f32>, _: &Tensor<f32>, t: usize) -> Result<Tensor<f32>, DiffusionError> {
                // x0 is zero, so x_t = √(1-ᾱ) ε
                let k = (1.0 - self.0.alpha_bar(t)).sqrt() as f32;
                Ok(Tensor::from_vec(3, 8, 8, x_t.data.iter().map(|v| v / k).collect()))
            }
        }
        let e = ood_score(&Exact(&s), &x0, &x0, &s, &mut rng, 90, 100, 10).unwrap();
        assert!(e < 1e-10);
    }
}
