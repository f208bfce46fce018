//! Adam with global-norm clipping and linear warm-up.

use ndarray::Array2;

use super::params::ParamSet;
use super::tape::Gradients;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub warmup: u64,
    pub clip: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, warmup: 800, clip: 0.5, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    /// Learning rate at 1-based step `step`.
    pub fn rate(&self, step: u64) -> f64 {
        if self.warmup == 0 {
            self.lr
        } else {
            self.lr * (step.min(self.warmup) as f64 / self.warmup as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub grad_norm: f64,
    pub clip_scale: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros: Vec<Array2<f64>> = params.values.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Adam { config, step: 0, m: zeros.clone(), v: zeros }
    }

    /// Clips `grads` to the configured global norm and applies one update.
    /// Nothing changes if any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<StepReport, ModelError> {
        let mut sq = 0.0;
        for (i, g) in grads.params.iter().enumerate() {
            if let Some(g) = g {
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(ModelError::NonFinite { param: params.names[i].clone() });
                }
                sq += g.iter().map(|x| x * x).sum::<f64>();
            }
        }
        let norm = sq.sqrt();
        let scale = if norm > self.config.clip { self.config.clip / norm } else { 1.0 };
        self.step += 1;
        let lr = self.config.rate(self.step);
        let (b1, b2) = (self.config.beta1, self.config.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (i, g) in grads.params.iter().enumerate() {
            let Some(g) = g else { continue };
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = &mut params.values[i];
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                let g = g * scale;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.config.eps);
            });
        }
        Ok(StepReport { grad_norm: norm, clip_scale: scale, lr })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one_param(v: Array2<f64>) -> ParamSet {
        ParamSet { names: vec!["w".into()], values: vec![v] }
    }

    #[test]
    fn warmup_is_linear() {
        let c = AdamConfig::default();
        assert!((c.rate(400) - 0.5e-4).abs() < 1e-18);
        assert_eq!(c.rate(800), 1e-4);
        assert_eq!(c.rate(5000), 1e-4);
    }

    #[test]
    fn clipping_scales_to_the_norm_limit() {
        let mut p = one_param(array![[0.0, 0.0]]);
        let mut opt = Adam::new(AdamConfig::default(), &p);
        let g = Gradients { params: vec![Some(array![[3.0, 4.0]])] };
        let r = opt.step(&mut p, &g).unwrap();
        assert_eq!(r.grad_norm, 5.0);
        assert!((r.clip_scale - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut p = one_param(array![[1.0, -2.0]]);
        let before = p.clone();
        let mut opt = Adam::new(AdamConfig { warmup: 0, ..AdamConfig::default() }, &p);
        opt.step(&mut p, &Gradients { params: vec![Some(array![[0.0, 0.0]])] }).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn non_finite_gradients_abort() {
        let mut p = one_param(array![[1.0]]);
        let mut opt = Adam::new(AdamConfig::default(), &p);
        let err = opt.step(&mut p, &Gradients { params: vec![Some(array![[f64::NAN]])] }).unwrap_err();
        assert!(matches!(err, ModelError::NonFinite { ref param } if param == "w"));
        assert_eq!(opt.step, 0);
    }
}
