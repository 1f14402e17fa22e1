use crate::error::{shape_err, NnError, Result};
use crate::tensor::Tensor;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanLosses {
    /// `-mean log D(real) - mean log(1 - D(fake))`
    pub disc: f64,
    /// Non-saturating generator loss `-mean log D(fake)`.
    pub gen: f64,
}

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn mean_of(t: &Tensor, f: impl Fn(f64) -> f64) -> Result<f64> {
    if t.is_empty() {
        return shape_err("empty discriminator output");
    }
    if t.data().iter().any(|v| v.is_nan()) {
        return Err(NnError::Divergence {
            epoch: 0,
            reason: "NaN discriminator output".into(),
            last_finite: None,
        });
    }
    Ok(t.data().iter().map(|&p| f(clamp(p))).sum::<f64>() / t.len() as f64)
}

pub fn gan_losses(d_real: &Tensor, d_fake: &Tensor) -> Result<GanLosses> {
    let real = mean_of(d_real, |p| -p.ln())?;
    let fake = mean_of(d_fake, |p| -(1.0 - p).ln())?;
    let gen = mean_of(d_fake, |p| -p.ln())?;
    Ok(GanLosses {
        disc: real + fake,
        gen,
    })
}

fn grad_of(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let n = t.len() as f64;
    let mut g = t.clone();
    g.clear_grad();
    for v in g.data_mut() {
        let p = *v;
        *v = if p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP {
            0.0
        } else {
            f(p) / n
        };
    }
    g
}

/// Gradient of the discriminator loss with respect to `d_real` and `d_fake`.
pub fn disc_loss_grads(d_real: &Tensor, d_fake: &Tensor) -> (Tensor, Tensor) {
    (grad_of(d_real, |p| -1.0 / p), grad_of(d_fake, |p| 1.0 / (1.0 - p)))
}

/// Gradient of the non-saturating generator loss with respect to `d_fake`.
pub fn gen_loss_grad(d_fake: &Tensor) -> Tensor {
    grad_of(d_fake, |p| -1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximal_confusion_point() {
        let half = Tensor::filled(&[7, 1], 0.5);
        let l = gan_losses(&half, &half).unwrap();
        assert!((l.disc - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((l.gen - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_discriminator() {
        let real = Tensor::filled(&[4, 1], 1.0);
        let fake = Tensor::filled(&[4, 1], 0.0);
        let l = gan_losses(&real, &fake).unwrap();
        assert!(l.disc < 1e-6);
        assert!(l.gen > 15.0 && l.gen.is_finite());
    }

    #[test]
    fn nan_is_divergence() {
        let ok = Tensor::filled(&[2, 1], 0.5);
        let bad = Tensor::from_vec(&[2, 1], vec![0.5, f64::NAN]).unwrap();
        assert!(matches!(gan_losses(&ok, &bad), Err(NnError::Divergence { .. })));
    }
}
