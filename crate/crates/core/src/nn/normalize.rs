use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizerMode {
    /// `(x − min) / (max − min)`.
    #[default]
    MinMax,
    /// `(x − mean) / std`.
    Standard,
}

/// Per-feature affine scaling `x ↦ (x − offset) / scale`.
///
/// Values outside the fitted range map outside `[0, 1]`; nothing is clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mode: NormalizerMode,
    pub names: Vec<String>,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[Vec<f64>], names: &[String], mode: NormalizerMode) -> Result<Self> {
        let dim = names.len();
        if rows.is_empty() {
            return Err(Error::Empty("cannot fit a normalizer on zero rows".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Shape {
                context: "normalizer fit",
                expected: dim,
                got: bad.len(),
            });
        }
        let mut offset = Vec::with_capacity(dim);
        let mut scale = Vec::with_capacity(dim);
        for (j, name) in names.iter().enumerate() {
            let col = rows.iter().map(|r| r[j]);
            let (o, s) = match mode {
                NormalizerMode::MinMax => {
                    let lo = col.clone().fold(f64::INFINITY, f64::min);
                    let hi = col.fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi - lo)
                }
                NormalizerMode::Standard => {
                    let n = rows.len() as f64;
                    let mean = col.clone().sum::<f64>() / n;
                    let var = col.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    (mean, var.sqrt())
                }
            };
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::ConstantFeature(name.clone()));
            }
            offset.push(o);
            scale.push(s);
        }
        Ok(Normalizer {
            mode,
            names: names.to_vec(),
            offset,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(v, (o, s))| (v - o) / s)
            .collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(v, (o, s))| v * s + o)
            .collect()
    }

    pub fn apply_one(&self, j: usize, x: f64) -> f64 {
        (x - self.offset[j]) / self.scale[j]
    }

    pub fn invert_one(&self, j: usize, y: f64) -> f64 {
        y * self.scale[j] + self.offset[j]
    }

    /// Sub-normalizer over the listed feature positions.
    pub fn select(&self, indices: &[usize]) -> Normalizer {
        Normalizer {
            mode: self.mode,
            names: indices.iter().map(|&i| self.names[i].clone()).collect(),
            offset: indices.iter().map(|&i| self.offset[i]).collect(),
            scale: indices.iter().map(|&i| self.scale[i]).collect(),
        }
    }

    /// True when the normalized vector leaves the fitted min-max box.
    pub fn out_of_range(&self, normalized: &[f64]) -> bool {
        match self.mode {
            NormalizerMode::MinMax => normalized.iter().any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v)),
            NormalizerMode::Standard => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn min_max_maps_to_unit_interval() {
        let rows = vec![vec![0.0], vec![5.0], vec![10.0]];
        let n = Normalizer::fit(&rows, &names(1), NormalizerMode::MinMax).unwrap();
        let mapped: Vec<f64> = rows.iter().map(|r| n.apply(r)[0]).collect();
        assert_eq!(mapped, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn out_of_range_is_not_clipped() {
        let rows = vec![vec![0.0], vec![10.0]];
        let n = Normalizer::fit(&rows, &names(1), NormalizerMode::MinMax).unwrap();
        assert_eq!(n.apply(&[15.0]), vec![1.5]);
        assert_eq!(n.apply(&[-5.0]), vec![-0.5]);
        assert!(n.out_of_range(&[1.5]));
        assert!(!n.out_of_range(&[0.3]));
    }

    #[test]
    fn constant_column_names_feature() {
        let rows = vec![vec![1.0, 3.0], vec![2.0, 3.0]];
        let cols = vec!["Do".to_string(), "Tr".to_string()];
        match Normalizer::fit(&rows, &cols, NormalizerMode::MinMax) {
            Err(Error::ConstantFeature(name)) => assert_eq!(name, "Tr"),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest::proptest! {
        #[test]
        fn round_trip_identity(
            data in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 2..30),
            probe in proptest::collection::vec(-2e3f64..2e3, 3),
            standard in proptest::bool::ANY,
        ) {
            let mode = if standard { NormalizerMode::Standard } else { NormalizerMode::MinMax };
            if let Ok(n) = Normalizer::fit(&data, &names(3), mode) {
                let back = n.invert(&n.apply(&probe));
                for (a, b) in back.iter().zip(&probe) {
                    proptest::prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
                }
            }
        }
    }
}
