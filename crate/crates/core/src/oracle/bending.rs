//! Elastic-plastic pure bending of concentric annuli and elastic unloading.
//!
//! Plane sections stay plane and the neutral axis stays on the tube axis
//! (concentric annuli are symmetric), so the fibre strain at height `y` is
//! `κ·y`. The loading moment is integrated on a polar grid; the cell that
//! contains the yield front is split so every piece sees a polynomial
//! integrand, and angular strips are split at the angles where the front
//! enters or leaves a layer.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::section::{annulus_inertia, equivalent_tube_with, BmtShape, RatioConvention, SingleShape};

/// Bilinear (linear hardening) material law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    /// Elastic modulus (MPa).
    pub e: f64,
    /// Yield stress (MPa).
    pub sigma_y: f64,
    /// Tangent modulus beyond yield (MPa).
    pub et: f64,
}

impl MaterialSpec {
    pub fn new(e: f64, sigma_y: f64, et: f64) -> Result<Self> {
        let m = MaterialSpec { e, sigma_y, et };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0 && self.sigma_y > 0.0 && self.et >= 0.0 && self.et < self.e)
            || !self.e.is_finite()
            || !self.sigma_y.is_finite()
        {
            return Err(Error::InvalidMaterial(format!(
                "need E > 0, sigma_y > 0, 0 <= Et < E (E={}, sigma_y={}, Et={})",
                self.e, self.sigma_y, self.et
            )));
        }
        Ok(())
    }

    pub fn yield_strain(&self) -> f64 {
        self.sigma_y / self.e
    }

    pub fn stress(&self, strain: f64) -> f64 {
        let ey = self.yield_strain();
        let a = strain.abs();
        if a <= ey {
            self.e * strain
        } else {
            strain.signum() * (self.sigma_y + self.et * (a - ey))
        }
    }
}

/// One annular layer of a tube cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub material: MaterialSpec,
}

impl Layer {
    pub fn inertia(&self) -> f64 {
        annulus_inertia(self.inner_radius, self.outer_radius)
    }
}

/// Polar grid resolution over the full circle and across each layer wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub radial: usize,
    pub angular: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid {
            radial: 64,
            angular: 256,
        }
    }
}

impl QuadratureGrid {
    pub fn refined(&self) -> Self {
        QuadratureGrid {
            radial: self.radial * 2,
            angular: self.angular * 2,
        }
    }
}

// 3-point Gauss-Legendre on [-1, 1]; exact for the cubic radial integrands.
const GL_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

fn gauss(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

fn check_layers(layers: &[Layer]) -> Result<()> {
    for l in layers {
        l.material.validate()?;
        if !(l.inner_radius >= 0.0 && l.outer_radius > l.inner_radius) || !l.outer_radius.is_finite() {
            return Err(Error::Geometry(format!(
                "layer bounds must satisfy 0 <= inner < outer (inner={}, outer={})",
                l.inner_radius, l.outer_radius
            )));
        }
    }
    let mut sorted: Vec<&Layer> = layers.iter().collect();
    sorted.sort_by(|a, b| a.inner_radius.total_cmp(&b.inner_radius));
    for pair in sorted.windows(2) {
        if pair[0].outer_radius > pair[1].inner_radius + 1e-12 {
            return Err(Error::Geometry(format!(
                "layers overlap: [{}, {}] and [{}, {}]",
                pair[0].inner_radius, pair[0].outer_radius, pair[1].inner_radius, pair[1].outer_radius
            )));
        }
    }
    Ok(())
}

/// Bending moment `M = ∫ σ(κy)·y dA` (N·mm) at curvature `kappa` (1/mm).
pub fn loading_moment(kappa: f64, layers: &[Layer], grid: QuadratureGrid) -> Result<f64> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Geometry(format!("curvature must be finite and >= 0, got {kappa}")));
    }
    if grid.radial == 0 || grid.angular < 4 {
        return Err(Error::Config(format!(
            "quadrature grid too coarse: {} x {}",
            grid.radial, grid.angular
        )));
    }
    check_layers(layers)?;
    if kappa == 0.0 {
        return Ok(0.0);
    }
    // The integrand is even in y and in x: integrate the first quadrant.
    let strips = grid.angular.div_ceil(4);
    let mut total = 0.0;
    for layer in layers {
        total += quadrant_moment(kappa, layer, strips, grid.radial);
    }
    Ok(4.0 * total)
}

fn quadrant_moment(kappa: f64, layer: &Layer, strips: usize, radial: usize) -> f64 {
    let ey = layer.material.yield_strain();
    let (ri, ro) = (layer.inner_radius, layer.outer_radius);

    let mut breaks: Vec<f64> = (0..=strips).map(|i| FRAC_PI_2 * i as f64 / strips as f64).collect();
    for rho in [ri, ro] {
        let s = ey / (kappa * rho);
        if rho > 0.0 && s < 1.0 {
            breaks.push(s.asin());
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let dr = (ro - ri) / radial as f64;
    let mut sum = 0.0;
    for w in breaks.windows(2) {
        sum += gauss(w[0], w[1], |theta| {
            let s = theta.sin();
            let front = if s > 0.0 { ey / (kappa * s) } else { f64::INFINITY };
            let integrand = |r: f64| {
                let y = r * s;
                layer.material.stress(kappa * y) * y * r
            };
            let mut radial_sum = 0.0;
            for j in 0..radial {
                let a = ri + j as f64 * dr;
                let b = if j + 1 == radial { ro } else { a + dr };
                if front > a && front < b {
                    radial_sum += gauss(a, front, integrand) + gauss(front, b, integrand);
                } else {
                    radial_sum += gauss(a, b, integrand);
                }
            }
            radial_sum
        });
    }
    sum
}

/// Elastic bending stiffness `Σ E_k·I_k` (N·mm²).
pub fn elastic_stiffness(layers: &[Layer]) -> f64 {
    layers.iter().map(|l| l.material.e * l.inertia()).sum()
}

/// Bend radius, bend angle and the velocity / friction factors of the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    /// Bending-die radius R_B (mm).
    pub bend_radius: f64,
    /// Bend angle α_B (degrees).
    pub bend_angle: f64,
    /// Pressure-die boost velocity v_B (mm/s).
    pub boost_velocity: f64,
    /// Angular processing velocity ω_B (rad/s).
    pub angular_velocity: f64,
    /// Initial pressure-die location (mm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_die_location: Option<f64>,
    /// Mold gap G (mm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Tube/mold friction coefficient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<f64>,
}

impl ProcessParams {
    pub fn new(bend_radius: f64, bend_angle: f64, boost_velocity: f64, angular_velocity: f64) -> Result<Self> {
        let p = ProcessParams {
            bend_radius,
            bend_angle,
            boost_velocity,
            angular_velocity,
            pressure_die_location: None,
            gap: None,
            friction: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let optional_ok = [self.pressure_die_location, self.gap, self.friction]
            .into_iter()
            .flatten()
            .all(|v| v >= 0.0 && v.is_finite());
        if !(self.bend_radius > 0.0 && self.bend_angle > 0.0) || !optional_ok {
            return Err(Error::Geometry(format!(
                "process needs R_B > 0, alpha_B > 0 and non-negative optional factors: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Mild deterministic modulation of springback by the process velocities:
/// `g = 1 + cv·tanh((vB − v̄)/v̄) + cω·tanh((ωB − ω̄)/ω̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessFactor {
    pub velocity_mid: f64,
    pub angular_velocity_mid: f64,
    pub velocity_coeff: f64,
    pub angular_velocity_coeff: f64,
}

impl ProcessFactor {
    /// `g ≡ 1`.
    pub fn identity() -> Self {
        ProcessFactor {
            velocity_mid: 1.0,
            angular_velocity_mid: 1.0,
            velocity_coeff: 0.0,
            angular_velocity_coeff: 0.0,
        }
    }

    pub fn eval(&self, process: &ProcessParams) -> f64 {
        let dv = (process.boost_velocity - self.velocity_mid) / self.velocity_mid;
        let dw = (process.angular_velocity - self.angular_velocity_mid) / self.angular_velocity_mid;
        1.0 + self.velocity_coeff * dv.tanh() + self.angular_velocity_coeff * dw.tanh()
    }
}

/// Cross-section fed to the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TubeGeometry {
    Single(SingleShape),
    Bmt(BmtShape),
}

/// Springback surrogate: loading at `κ = 1/R_B`, then elastic unloading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringbackModel {
    /// Outer (reference) material; also the material of single-layer tubes.
    pub outer: MaterialSpec,
    pub inner: MaterialSpec,
    pub grid: QuadratureGrid,
    pub process_factor: ProcessFactor,
    #[serde(default)]
    pub ratio: RatioConvention,
}

impl SpringbackModel {
    pub fn layers(&self, geometry: &TubeGeometry) -> Result<Vec<Layer>> {
        match *geometry {
            TubeGeometry::Single(s) => {
                SingleShape::new(s.outer_diameter, s.thickness)?;
                Ok(vec![Layer {
                    inner_radius: s.inner_radius(),
                    outer_radius: s.outer_radius(),
                    material: self.outer,
                }])
            }
            TubeGeometry::Bmt(b) => {
                let (r, t1, t2) = b.layers(self.ratio)?;
                let mut layers = Vec::with_capacity(2);
                if t1 > 0.0 {
                    layers.push(Layer {
                        inner_radius: r,
                        outer_radius: r + t1,
                        material: self.outer,
                    });
                }
                if t2 > 0.0 {
                    layers.push(Layer {
                        inner_radius: r - t2,
                        outer_radius: r,
                        material: self.inner,
                    });
                }
                Ok(layers)
            }
        }
    }

    /// Noise-free springback `Δα_pure · g` (degrees).
    pub fn springback(&self, geometry: &TubeGeometry, process: &ProcessParams) -> Result<f64> {
        process.validate()?;
        let layers = self.layers(geometry)?;
        let kappa = 1.0 / process.bend_radius;
        let moment = loading_moment(kappa, &layers, self.grid)?;
        let pure = process.bend_angle * process.bend_radius * moment / elastic_stiffness(&layers);
        Ok(pure * self.process_factor.eval(process))
    }

    /// Springback of the theory-equivalent single-layer tube made of the
    /// outer material.
    pub fn equivalent_springback(&self, shape: &BmtShape, process: &ProcessParams) -> Result<f64> {
        let lambda2 = self.inner.e / self.outer.e;
        let eq = equivalent_tube_with(shape, lambda2, self.ratio)?;
        self.springback(&TubeGeometry::Single(eq), process)
    }
}

/// Springback with additive Gaussian label noise drawn from `rng_seed`.
pub fn springback_angle(
    model: &SpringbackModel,
    geometry: &TubeGeometry,
    process: &ProcessParams,
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<f64> {
    let clean = model.springback(geometry, process)?;
    if noise_sigma == 0.0 {
        return Ok(clean);
    }
    let z: f64 = crate::seed::rng(rng_seed).sample(StandardNormal);
    Ok(clean + noise_sigma * z)
}
