//! Dynamic-weight composite loss `L = z·L_p + (1 − z)·L_d`.
//!
//! `L_p` measures how far the implicit ES-NET output sits from the theory map,
//! `L_d` is the springback data error. The weight `z` is the mass of
//! `N(x_s^s, 1)` on the interval between `2·x_s^s − f` and `f`, which is
//! symmetric about `x_s^s` and therefore equals `erf(|f − x_s^s| / √2)`.
//! Inside the plausibility gate (`max |f − x_s^s| ≤ δ`) the weight is zero.

use serde::{Deserialize, Serialize};

use super::net::PeNet;
use crate::error::{Error, Result};
use crate::nn::AdamState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZAggregation {
    #[default]
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompositeLossConfig {
    /// Gate half-width δ in normalized ES-output units.
    pub gate_delta: f64,
    pub aggregation: ZAggregation,
    /// When false the theory term is dropped (`z ≡ 0`).
    pub theory_loss: bool,
    /// Keep SP-NET fixed during fine-tuning.
    pub freeze_sp: bool,
}

impl Default for CompositeLossConfig {
    fn default() -> Self {
        CompositeLossConfig {
            gate_delta: 0.05,
            aggregation: ZAggregation::Mean,
            theory_loss: true,
            freeze_sp: false,
        }
    }
}

impl CompositeLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gate_delta >= 0.0) {
            return Err(Error::Config(format!("gate_delta must be >= 0, got {}", self.gate_delta)));
        }
        Ok(())
    }
}

/// `z` from per-dimension absolute deviations `|f_j − x_j|`.
pub fn dynamic_weight_from_deviation(abs_dev: &[f64], cfg: &CompositeLossConfig) -> f64 {
    if abs_dev.is_empty() || !cfg.theory_loss {
        return 0.0;
    }
    let worst = abs_dev.iter().cloned().fold(0.0, f64::max);
    if worst <= cfg.gate_delta {
        return 0.0;
    }
    let masses = abs_dev.iter().map(|d| libm::erf(d / std::f64::consts::SQRT_2));
    match cfg.aggregation {
        ZAggregation::Mean => masses.sum::<f64>() / abs_dev.len() as f64,
        ZAggregation::Max => masses.fold(0.0, f64::max),
    }
}

pub fn dynamic_weight(x_implicit: &[f64], f_theory: &[f64], cfg: &CompositeLossConfig) -> f64 {
    let dev: Vec<f64> = f_theory.iter().zip(x_implicit).map(|(f, x)| (f - x).abs()).collect();
    dynamic_weight_from_deviation(&dev, cfg)
}

/// One BMT training example in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct PeSample {
    /// `Do, T, Tr` (ES-NET space) then process features (SP-NET space).
    pub input: Vec<f64>,
    /// Theory target in ES-NET output space.
    pub theory: Vec<f64>,
    /// Springback in SP-NET label space.
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeGrad {
    pub lp: f64,
    pub ld: f64,
    pub z: f64,
    pub es_grad: Vec<f64>,
    pub sp_grad: Vec<f64>,
}

/// Batch-mean absolute implicit deviation per output dimension.
pub fn batch_deviation(pe: &PeNet, batch: &[PeSample]) -> Result<Vec<f64>> {
    let mut dev = vec![0.0; 2];
    for s in batch {
        let t = pe.forward(&s.input)?;
        for (j, d) in dev.iter_mut().enumerate() {
            *d += (s.theory[j] - t.implicit[j]).abs();
        }
    }
    let n = batch.len() as f64;
    Ok(dev.into_iter().map(|d| d / n).collect())
}

/// Loss value with a fixed weight `z`; returns `(total, L_p, L_d)`.
pub fn composite_loss(pe: &PeNet, batch: &[PeSample], z: f64) -> Result<(f64, f64, f64)> {
    if batch.is_empty() {
        return Err(Error::Empty("composite loss on an empty batch".into()));
    }
    let (mut lp, mut ld) = (0.0, 0.0);
    for s in batch {
        let t = pe.forward(&s.input)?;
        lp += t.implicit.iter().zip(&s.theory).map(|(x, f)| (x - f).powi(2)).sum::<f64>();
        ld += (t.output - s.label).powi(2);
    }
    let n = batch.len() as f64;
    let (lp, ld) = (lp / (2.0 * n), ld / n);
    Ok((z * lp + (1.0 - z) * ld, lp, ld))
}

/// Gradients of `z·L_p + (1 − z)·L_d` with `z` held constant.
pub fn gradients_at(pe: &PeNet, batch: &[PeSample], z: f64) -> Result<CompositeGrad> {
    if batch.is_empty() {
        return Err(Error::Empty("composite gradient on an empty batch".into()));
    }
    let n = batch.len() as f64;
    let mut es_grad = vec![0.0; pe.es.mlp.num_params()];
    let mut sp_grad = vec![0.0; pe.sp.mlp.num_params()];
    let (mut lp, mut ld) = (0.0, 0.0);
    for s in batch {
        let t = pe.forward(&s.input)?;
        let diff: Vec<f64> = t.implicit.iter().zip(&s.theory).map(|(x, f)| x - f).collect();
        lp += diff.iter().map(|d| d * d).sum::<f64>();
        let err = t.output - s.label;
        ld += err * err;
        let d_implicit: Vec<f64> = diff.iter().map(|d| z * 2.0 * d / (2.0 * n)).collect();
        let d_output = (1.0 - z) * 2.0 * err / n;
        pe.backward_into(&t, d_output, &d_implicit, &mut es_grad, &mut sp_grad)?;
    }
    Ok(CompositeGrad {
        lp: lp / (2.0 * n),
        ld: ld / n,
        z,
        es_grad,
        sp_grad,
    })
}

/// Computes `z` for the batch (stop-gradient), then the composite gradients.
pub fn composite_gradients(pe: &PeNet, batch: &[PeSample], cfg: &CompositeLossConfig) -> Result<CompositeGrad> {
    if batch.is_empty() {
        return Err(Error::Empty("composite step on an empty batch".into()));
    }
    let z = dynamic_weight_from_deviation(&batch_deviation(pe, batch)?, cfg);
    gradients_at(pe, batch, z)
}

/// Optimizer state for both subnets.
#[derive(Debug, Clone, PartialEq)]
pub struct PeOptimizer {
    pub es: AdamState,
    pub sp: AdamState,
}

impl PeOptimizer {
    pub fn new(pe: &PeNet) -> Self {
        PeOptimizer {
            es: AdamState::new(pe.es.mlp.num_params()),
            sp: AdamState::new(pe.sp.mlp.num_params()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub lp: f64,
    pub ld: f64,
    pub z: f64,
}

/// One Adam step on each subnet.
pub fn composite_step(
    pe: &mut PeNet,
    batch: &[PeSample],
    cfg: &CompositeLossConfig,
    opt: &mut PeOptimizer,
    lr: f64,
) -> Result<StepLosses> {
    let g = composite_gradients(pe, batch, cfg)?;
    if !(g.lp.is_finite() && g.ld.is_finite()) {
        return Err(Error::Diverged {
            epoch: 0,
            reason: format!("composite loss became non-finite (L_p={}, L_d={})", g.lp, g.ld),
        });
    }
    opt.es.update(pe.es.mlp.params_mut(), &g.es_grad, lr)?;
    if !cfg.freeze_sp {
        opt.sp.update(pe.sp.mlp.params_mut(), &g.sp_grad, lr)?;
    }
    Ok(StepLosses {
        lp: g.lp,
        ld: g.ld,
        z: g.z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_deviation_gives_zero_weight() {
        let cfg = CompositeLossConfig::default();
        assert_eq!(dynamic_weight(&[0.3, 0.7], &[0.3, 0.7], &cfg), 0.0);
    }

    #[test]
    fn gate_suppresses_small_deviation() {
        let cfg = CompositeLossConfig::default();
        assert_eq!(dynamic_weight(&[0.3, 0.7], &[0.34, 0.66], &cfg), 0.0);
        assert!(dynamic_weight(&[0.3, 0.7], &[0.36, 0.7], &cfg) > 0.0);
    }

    #[test]
    fn unit_deviation_is_one_sigma_mass() {
        let cfg = CompositeLossConfig::default();
        let z = dynamic_weight(&[0.0, 1.0], &[1.0, 0.0], &cfg);
        assert!((z - 0.682_689_492_137_085_9).abs() < 1e-12);
    }

    #[test]
    fn large_deviation_saturates() {
        let cfg = CompositeLossConfig::default();
        assert!(dynamic_weight(&[0.0, 0.0], &[40.0, -40.0], &cfg) > 1.0 - 1e-12);
    }

    #[test]
    fn swapping_interval_endpoints_is_symmetric() {
        // endpoints 2x - f and f swap when f -> 2x - f
        let cfg = CompositeLossConfig::default();
        let x = [0.4, 0.1];
        let f = [0.9, -0.5];
        let mirrored: Vec<f64> = x.iter().zip(&f).map(|(x, f)| 2.0 * x - f).collect();
        assert_eq!(dynamic_weight(&x, &f, &cfg), dynamic_weight(&x, &mirrored, &cfg));
    }

    #[test]
    fn disabled_theory_loss_is_zero() {
        let cfg = CompositeLossConfig {
            theory_loss: false,
            ..CompositeLossConfig::default()
        };
        assert_eq!(dynamic_weight(&[0.0, 0.0], &[5.0, 5.0], &cfg), 0.0);
    }

    #[test]
    fn max_aggregation() {
        let cfg = CompositeLossConfig {
            aggregation: ZAggregation::Max,
            ..CompositeLossConfig::default()
        };
        let z = dynamic_weight(&[0.0, 0.0], &[1.0, 0.1], &cfg);
        assert!((z - libm::erf(1.0 / std::f64::consts::SQRT_2)).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn weight_in_unit_interval_and_monotone(d in 0.0f64..10.0, extra in 0.0f64..5.0, other in 0.0f64..10.0) {
            let cfg = CompositeLossConfig::default();
            let z1 = dynamic_weight_from_deviation(&[d, other], &cfg);
            let z2 = dynamic_weight_from_deviation(&[d + extra, other], &cfg);
            proptest::prop_assert!((0.0..=1.0).contains(&z1));
            proptest::prop_assert!(z2 >= z1);
        }
    }
}
