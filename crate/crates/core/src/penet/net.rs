//! ES-NET, SP-NET and their composition PE-NET.
//!
//! Each subnet carries the normalizers of its own input and output spaces.
//! ES-NET outputs live in the theory-target space (fitted on the
//! pre-exploration design); SP-NET inputs live in the single-tube dataset
//! space. PE-NET bridges the two with a fixed per-dimension affine map, so
//! the composition stays exact and differentiable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::CompositeLossConfig;
use crate::error::{Error, Result};
use crate::nn::{Mlp, Normalizer, Trace};
use crate::oracle::dataset::{BMT_SHAPE, SINGLE_SHAPE};
use crate::section::{equivalent_tube_with, BmtShape, RatioConvention};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

/// Equivalent-section network: BMT shape `(Do, T, Tr)` to single-tube shape
/// `(Do_eq, T_eq)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsNet {
    pub mlp: Mlp,
    pub input_norm: Normalizer,
    pub output_norm: Normalizer,
    /// Modulus ratio used by the theory map.
    pub lambda2: f64,
    #[serde(default)]
    pub ratio: RatioConvention,
    #[serde(default)]
    pub provenance: ModelProvenance,
}

impl EsNet {
    pub fn validate(&self) -> Result<()> {
        if self.mlp.input_dim() != 3 || self.mlp.output_dim() != 2 {
            return Err(Error::Schema(format!(
                "ES-NET must map 3 shape features to 2, got dims {:?}",
                self.mlp.dims()
            )));
        }
        if self.input_norm.dim() != 3 || self.output_norm.dim() != 2 {
            return Err(Error::Schema("ES-NET normalizers must have widths 3 and 2".into()));
        }
        Ok(())
    }

    /// The theory map on raw `(Do, T, Tr)`, giving raw `(Do_eq, T_eq)`.
    pub fn theory(&self, shape: &[f64]) -> Result<[f64; 2]> {
        theory_map(shape, self.lambda2, self.ratio)
    }

    /// Theory target in the normalized output space.
    pub fn theory_normalized(&self, shape: &[f64]) -> Result<Vec<f64>> {
        Ok(self.output_norm.apply(&self.theory(shape)?))
    }

    /// Raw equivalent shape predicted by the network.
    pub fn predict(&self, shape: &[f64]) -> Result<Vec<f64>> {
        let y = self.mlp.forward(&self.input_norm.apply(shape))?;
        Ok(self.output_norm.invert(&y))
    }
}

pub fn theory_map(shape: &[f64], lambda2: f64, ratio: RatioConvention) -> Result<[f64; 2]> {
    if shape.len() != 3 {
        return Err(Error::Shape {
            context: "BMT shape",
            expected: 3,
            got: shape.len(),
        });
    }
    let bmt = BmtShape::new(shape[0], shape[1], shape[2])?;
    let eq = equivalent_tube_with(&bmt, lambda2, ratio)?;
    Ok([eq.outer_diameter, eq.thickness])
}

/// Springback network over single-tube shape and process features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpNet {
    pub mlp: Mlp,
    /// Names are `Do, T` followed by the process features.
    pub input_norm: Normalizer,
    pub label_norm: Normalizer,
    #[serde(default)]
    pub provenance: ModelProvenance,
}

impl SpNet {
    pub fn validate(&self) -> Result<()> {
        let names = &self.input_norm.names;
        if names.len() < 2 || names[0] != SINGLE_SHAPE[0] || names[1] != SINGLE_SHAPE[1] {
            return Err(Error::Schema(format!(
                "SP-NET inputs must start with Do, T; got {names:?}"
            )));
        }
        if self.mlp.input_dim() != names.len() || self.mlp.output_dim() != 1 || self.label_norm.dim() != 1 {
            return Err(Error::Schema(format!(
                "SP-NET dims {:?} do not match {} input features and one label",
                self.mlp.dims(),
                names.len()
            )));
        }
        Ok(())
    }

    pub fn input_schema(&self) -> &[String] {
        &self.input_norm.names
    }

    pub fn process_features(&self) -> &[String] {
        &self.input_norm.names[2..]
    }

    /// Raw springback (degrees) for raw `(Do, T, process...)`.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let y = self.mlp.forward(&self.input_norm.apply(row))?;
        Ok(self.label_norm.invert_one(0, y[0]))
    }
}

/// Forward pass record of the assembled network.
#[derive(Debug, Clone)]
pub struct PeTrace {
    es: Trace,
    sp: Trace,
    /// ES-NET output (normalized ES space), the implicit single-tube shape.
    pub implicit: Vec<f64>,
    /// Normalized springback.
    pub output: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub springback: f64,
    /// Some input lies outside the range the normalizers were fitted on.
    pub out_of_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeNet {
    pub es: EsNet,
    pub sp: SpNet,
    pub loss: CompositeLossConfig,
    #[serde(default)]
    pub provenance: ModelProvenance,
}

impl PeNet {
    pub fn assemble(es: EsNet, sp: SpNet, loss: CompositeLossConfig) -> Result<PeNet> {
        es.validate()?;
        sp.validate()?;
        loss.validate()?;
        Ok(PeNet {
            es,
            sp,
            loss,
            provenance: ModelProvenance::default(),
        })
    }

    /// `Do, T, Tr` followed by the SP-NET process features.
    pub fn input_schema(&self) -> Vec<String> {
        let mut cols: Vec<String> = BMT_SHAPE.iter().map(|s| s.to_string()).collect();
        cols.extend(self.sp.process_features().iter().cloned());
        cols
    }

    /// `x_sp = gain ⊙ x_es + shift` for the two shape dimensions.
    fn bridge(&self, j: usize) -> (f64, f64) {
        let (es, sp) = (&self.es.output_norm, &self.sp.input_norm);
        let gain = es.scale[j] / sp.scale[j];
        let shift = (es.offset[j] - sp.offset[j]) / sp.scale[j];
        (gain, shift)
    }

    /// Raw BMT row (in `input_schema` order) to the normalized network input.
    pub fn normalize_input(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let width = 3 + self.sp.process_features().len();
        if raw.len() != width {
            return Err(Error::Shape {
                context: "PE-NET input",
                expected: width,
                got: raw.len(),
            });
        }
        let mut x = self.es.input_norm.apply(&raw[..3]);
        x.extend(raw[3..].iter().enumerate().map(|(k, &v)| self.sp.input_norm.apply_one(k + 2, v)));
        Ok(x)
    }

    pub fn forward(&self, x: &[f64]) -> Result<PeTrace> {
        let n_process = self.sp.process_features().len();
        if x.len() != 3 + n_process {
            return Err(Error::Shape {
                context: "PE-NET normalized input",
                expected: 3 + n_process,
                got: x.len(),
            });
        }
        let es = self.es.mlp.forward_trace(&x[..3])?;
        let implicit = es.output().to_vec();
        let mut sp_in: Vec<f64> = implicit
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let (gain, shift) = self.bridge(j);
                gain * v + shift
            })
            .collect();
        sp_in.extend_from_slice(&x[3..]);
        let sp = self.sp.mlp.forward_trace(&sp_in)?;
        let output = sp.output()[0];
        Ok(PeTrace {
            es,
            sp,
            implicit,
            output,
        })
    }

    /// Adds gradients of a loss with `∂L/∂y = d_output` and direct
    /// `∂L/∂x_s^s = d_implicit` into the two flat buffers.
    pub fn backward_into(
        &self,
        trace: &PeTrace,
        d_output: f64,
        d_implicit: &[f64],
        es_grad: &mut [f64],
        sp_grad: &mut [f64],
    ) -> Result<()> {
        let sp_in_grad = self.sp.mlp.backward_into(&trace.sp, &[d_output], sp_grad)?;
        let upstream: Vec<f64> = (0..2)
            .map(|j| self.bridge(j).0 * sp_in_grad[j] + d_implicit[j])
            .collect();
        self.es.mlp.backward_into(&trace.es, &upstream, es_grad)?;
        Ok(())
    }

    pub fn predict(&self, raw: &[f64]) -> Result<Prediction> {
        let x = self.normalize_input(raw)?;
        let out_of_range = self.es.input_norm.out_of_range(&x[..3])
            || x[3..]
                .iter()
                .enumerate()
                .any(|(k, &v)| self.sp.input_norm.select(&[k + 2]).out_of_range(&[v]));
        let y = self.forward(&x)?.output;
        Ok(Prediction {
            springback: self.sp.label_norm.invert_one(0, y),
            out_of_range,
        })
    }

    /// Same prediction path with ES-NET replaced by the exact theory map.
    pub fn predict_with_theory(&self, raw: &[f64]) -> Result<f64> {
        let eq = self.es.theory(&raw[..3])?;
        let mut row = eq.to_vec();
        row.extend_from_slice(&raw[3..]);
        self.sp.predict(&row)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    pub fn load(path: &Path) -> Result<PeNet> {
        let pe: PeNet = load_json(path)?;
        pe.es.validate()?;
        pe.sp.validate()?;
        Ok(pe)
    }
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
