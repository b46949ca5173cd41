//! Labelled springback datasets: generation, CSV serialization and splitting.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bending::{springback_angle, MaterialSpec, ProcessFactor, ProcessParams, QuadratureGrid, SpringbackModel, TubeGeometry};
use super::lhs::lhs_sample;
use crate::error::{Error, Result};
use crate::section::{BmtShape, RatioConvention, SingleShape};
use crate::seed;

pub const LABEL: &str = "springback";
pub const SINGLE_SHAPE: [&str; 2] = ["Do", "T"];
pub const BMT_SHAPE: [&str; 3] = ["Do", "T", "Tr"];
pub const PROCESS: [&str; 4] = ["RB", "alphaB", "vB", "omegaB"];
pub const OPTIONAL_PROCESS: [&str; 3] = ["Lp_die", "gap", "friction"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub springback: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    /// Indices (into the parent dataset) that ended up in the test split.
    #[serde(default)]
    pub test_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Vec<String>,
    pub samples: Vec<Sample>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(schema: Vec<String>, samples: Vec<Sample>) -> Result<Self> {
        let ds = Dataset {
            schema,
            samples,
            provenance: Provenance::default(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.features.len() != self.schema.len() {
                return Err(Error::Schema(format!(
                    "sample {i} has {} features, schema has {}",
                    s.features.len(),
                    self.schema.len()
                )));
            }
            if !s.springback.is_finite() || s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("sample {i} contains a non-finite value")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Schema(format!("missing feature column `{name}` in {:?}", self.schema)))
    }

    /// Feature rows restricted to `columns`, in that order.
    pub fn select(&self, columns: &[String]) -> Result<Vec<Vec<f64>>> {
        let idx = columns
            .iter()
            .map(|c| self.column_index(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .samples
            .iter()
            .map(|s| idx.iter().map(|&i| s.features[i]).collect())
            .collect())
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.springback).collect()
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            provenance: Provenance {
                config_hash: self.provenance.config_hash.clone(),
                seed: self.provenance.seed,
                test_indices: Vec::new(),
            },
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&self.schema.join(","));
        out.push(',');
        out.push_str(LABEL);
        out.push('\n');
        for s in &self.samples {
            for v in &s.features {
                out.push_str(&format_sig9(*v));
                out.push(',');
            }
            out.push_str(&format_sig9(s.springback));
            out.push('\n');
        }
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Reads a dataset CSV. The label column is optional so prediction inputs
    /// can share the format; missing labels read as NaN.
    pub fn read_csv(path: &Path) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::csv(path, e))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::csv(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let label_idx = headers.iter().position(|h| h == LABEL);
        let schema: Vec<String> = headers.iter().filter(|h| *h != LABEL).cloned().collect();
        let mut samples = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::csv(path, e))?;
            let mut features = Vec::with_capacity(schema.len());
            let mut springback = f64::NAN;
            for (i, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Schema(format!("{}: row {}: `{field}` is not a number", path.display(), row + 1))
                })?;
                if Some(i) == label_idx {
                    springback = v;
                } else {
                    features.push(v);
                }
            }
            samples.push(Sample { features, springback });
        }
        let ds = Dataset {
            schema,
            samples,
            provenance: Provenance::default(),
        };
        if label_idx.is_some() {
            ds.validate()?;
        }
        Ok(ds)
    }
}

/// Shortest decimal that round-trips the value rounded to 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    round_sig9(x).to_string()
}

pub fn round_sig9(x: f64) -> f64 {
    format!("{x:.8e}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn pair(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingBounds {
    pub outer_diameter: Range,
    pub thickness: Range,
    pub thickness_ratio: Range,
    pub bend_radius: Range,
    pub bend_angle: Range,
    pub boost_velocity: Range,
    pub angular_velocity: Range,
    pub pressure_die_location: Range,
    pub gap: Range,
    pub friction: Range,
}

impl Default for SamplingBounds {
    fn default() -> Self {
        SamplingBounds {
            outer_diameter: Range::new(12.0, 30.0),
            thickness: Range::new(0.8, 2.5),
            thickness_ratio: Range::new(0.2, 0.8),
            bend_radius: Range::new(40.0, 120.0),
            bend_angle: Range::new(30.0, 120.0),
            boost_velocity: Range::new(5.0, 20.0),
            angular_velocity: Range::new(0.2, 1.0),
            pressure_die_location: Range::new(0.0, 50.0),
            gap: Range::new(0.0, 0.2),
            friction: Range::new(0.05, 0.3),
        }
    }
}

impl SamplingBounds {
    pub fn shape_bounds(&self) -> [Range; 3] {
        [self.outer_diameter, self.thickness, self.thickness_ratio]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcessFactorCoeffs {
    pub velocity: f64,
    pub angular_velocity: f64,
}

impl Default for ProcessFactorCoeffs {
    fn default() -> Self {
        ProcessFactorCoeffs {
            velocity: 0.02,
            angular_velocity: 0.01,
        }
    }
}

/// Dataset generator configuration (JSON-serializable, all fields defaulted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_single: usize,
    pub n_bmt: usize,
    pub bounds: SamplingBounds,
    pub outer_material: MaterialSpec,
    pub inner_material: MaterialSpec,
    pub noise_sigma: f64,
    pub grid: QuadratureGrid,
    pub process_factor: ProcessFactorCoeffs,
    pub include_optional_process: bool,
    pub ratio: RatioConvention,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_single: 600,
            n_bmt: 80,
            bounds: SamplingBounds::default(),
            outer_material: MaterialSpec {
                e: 80_700.0,
                sigma_y: 150.0,
                et: 500.0,
            },
            inner_material: MaterialSpec {
                e: 110_000.0,
                sigma_y: 200.0,
                et: 1000.0,
            },
            noise_sigma: 0.05,
            grid: QuadratureGrid::default(),
            process_factor: ProcessFactorCoeffs::default(),
            include_optional_process: false,
            ratio: RatioConvention::OuterFraction,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_single == 0 || self.n_bmt == 0 {
            return Err(Error::Empty(format!(
                "dataset sizes must be positive (n_single={}, n_bmt={})",
                self.n_single, self.n_bmt
            )));
        }
        self.outer_material.validate()?;
        self.inner_material.validate()?;
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }

    pub fn model(&self) -> SpringbackModel {
        SpringbackModel {
            outer: self.outer_material,
            inner: self.inner_material,
            grid: self.grid,
            process_factor: ProcessFactor {
                velocity_mid: self.bounds.boost_velocity.mid(),
                angular_velocity_mid: self.bounds.angular_velocity.mid(),
                velocity_coeff: self.process_factor.velocity,
                angular_velocity_coeff: self.process_factor.angular_velocity,
            },
            ratio: self.ratio,
        }
    }

    pub fn lambda2(&self) -> f64 {
        self.inner_material.e / self.outer_material.e
    }

    pub fn process_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = PROCESS.iter().map(|s| s.to_string()).collect();
        if self.include_optional_process {
            cols.extend(OPTIONAL_PROCESS.iter().map(|s| s.to_string()));
        }
        cols
    }

    pub fn single_schema(&self) -> Vec<String> {
        let mut cols: Vec<String> = SINGLE_SHAPE.iter().map(|s| s.to_string()).collect();
        cols.extend(self.process_columns());
        cols
    }

    pub fn bmt_schema(&self) -> Vec<String> {
        let mut cols: Vec<String> = BMT_SHAPE.iter().map(|s| s.to_string()).collect();
        cols.extend(self.process_columns());
        cols
    }

    fn process_bounds(&self) -> Vec<(f64, f64)> {
        let b = &self.bounds;
        let mut v = vec![
            b.bend_radius.pair(),
            b.bend_angle.pair(),
            b.boost_velocity.pair(),
            b.angular_velocity.pair(),
        ];
        if self.include_optional_process {
            v.extend([b.pressure_die_location.pair(), b.gap.pair(), b.friction.pair()]);
        }
        v
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Process parameters from the tail of a feature row (after the shape columns).
pub fn process_from_row(row: &[f64], optional: bool) -> ProcessParams {
    let mut p = ProcessParams {
        bend_radius: row[0],
        bend_angle: row[1],
        boost_velocity: row[2],
        angular_velocity: row[3],
        pressure_die_location: None,
        gap: None,
        friction: None,
    };
    if optional {
        p.pressure_die_location = Some(row[4]);
        p.gap = Some(row[5]);
        p.friction = Some(row[6]);
    }
    p
}

pub fn generate_single(config: &GeneratorConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let b = &config.bounds;
    let mut bounds = vec![b.outer_diameter.pair(), b.thickness.pair()];
    bounds.extend(config.process_bounds());
    generate(config, config.single_schema(), &bounds, config.n_single, seed, 0, |row| {
        Ok(TubeGeometry::Single(SingleShape::new(row[0], row[1])?))
    })
}

pub fn generate_bmt(config: &GeneratorConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let b = &config.bounds;
    let mut bounds = vec![b.outer_diameter.pair(), b.thickness.pair(), b.thickness_ratio.pair()];
    bounds.extend(config.process_bounds());
    generate(config, config.bmt_schema(), &bounds, config.n_bmt, seed, 1, |row| {
        Ok(TubeGeometry::Bmt(BmtShape::new(row[0], row[1], row[2])?))
    })
}

fn generate(
    config: &GeneratorConfig,
    schema: Vec<String>,
    bounds: &[(f64, f64)],
    n: usize,
    seed: u64,
    stream: u64,
    geometry: impl Fn(&[f64]) -> Result<TubeGeometry> + Sync,
) -> Result<Dataset> {
    let model = config.model();
    let shape_dims = bounds.len() - config.process_columns().len();
    let points = lhs_sample(n, bounds, seed::derive(seed, 2 * stream))?;
    let noise_base = seed::derive(seed, 2 * stream + 1);
    let samples = points
        .into_par_iter()
        .enumerate()
        .map(|(i, raw)| {
            let features: Vec<f64> = raw.iter().map(|&v| round_sig9(v)).collect();
            let geom = geometry(&features)?;
            let process = process_from_row(&features[shape_dims..], config.include_optional_process);
            let noise_seed = noise_base.wrapping_add(i as u64);
            let label = springback_angle(&model, &geom, &process, config.noise_sigma, noise_seed)?;
            Ok(Sample {
                features,
                springback: round_sig9(label),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = Dataset {
        schema,
        samples,
        provenance: Provenance {
            config_hash: Some(config.hash()),
            seed: Some(seed),
            test_indices: Vec::new(),
        },
    };
    ds.validate()?;
    Ok(ds)
}

/// Dataset1 (single-layer tubes) and Dataset2 (BMT), both labelled by the
/// exact layer-by-layer integration.
pub fn generate_datasets(config: &GeneratorConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    Ok((generate_single(config, seed)?, generate_bmt(config, seed)?))
}

pub fn write_datasets(dir: &Path, single: &Dataset, bmt: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    single.write_csv(&dir.join("dataset1.csv"))?;
    bmt.write_csv(&dir.join("dataset2.csv"))
}

/// Seeded shuffle, then the first `⌈n·train_frac⌉` samples train.
pub fn split_dataset(ds: &Dataset, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Config(format!("train_frac must lie in (0, 1), got {train_frac}")));
    }
    let n = ds.len();
    // tolerance absorbs 0.8 * 600 landing one ulp above 480
    let n_train = (n as f64 * train_frac - 1e-9).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Empty(format!(
            "{n} samples cannot be split at {train_frac} into non-empty train and test sets"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let (train_idx, test_idx) = order.split_at(n_train);
    let train = ds.subset(train_idx);
    let mut test = ds.subset(test_idx);
    test.provenance.test_indices = test_idx.to_vec();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> GeneratorConfig {
        GeneratorConfig {
            n_single: 12,
            n_bmt: 6,
            grid: QuadratureGrid { radial: 8, angular: 32 },
            ..GeneratorConfig::default()
        }
    }

    fn toy(n: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| Sample {
                features: vec![i as f64],
                springback: 2.0 * i as f64,
            })
            .collect();
        Dataset::new(vec!["x".into()], samples).unwrap()
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(12.345678912345), "12.3456789");
        assert_eq!(format_sig9(-0.000123456789123), "-0.000123456789");
        assert_eq!(format_sig9(2.0 / 3.0), "0.666666667");
    }

    #[test]
    fn split_sizes_follow_ceiling() {
        let (tr, te) = split_dataset(&toy(80), 0.8, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (64, 16));
        let (tr, te) = split_dataset(&toy(600), 0.8, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (480, 120));
        let (tr, te) = split_dataset(&toy(7), 0.5, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (4, 3));
    }

    #[test]
    fn split_is_seeded_disjoint_partition() {
        let ds = toy(50);
        let (tr, te) = split_dataset(&ds, 0.8, 9).unwrap();
        let (tr2, te2) = split_dataset(&ds, 0.8, 9).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(te, te2);
        let mut all: Vec<f64> = tr.samples.iter().chain(&te.samples).map(|s| s.features[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..50).map(|i| i as f64).collect::<Vec<_>>());
        for (&idx, s) in te.provenance.test_indices.iter().zip(&te.samples) {
            assert_eq!(ds.samples[idx], *s);
        }
    }

    #[test]
    fn split_rejects_degenerate() {
        assert!(split_dataset(&toy(1), 0.8, 0).is_err());
        assert!(split_dataset(&toy(10), 1.0, 0).is_err());
        assert!(split_dataset(&toy(10), 0.0, 0).is_err());
    }

    #[test]
    fn generated_datasets_have_schema_and_sizes() {
        let cfg = small_config();
        let (d1, d2) = generate_datasets(&cfg, 11).unwrap();
        assert_eq!(d1.len(), 12);
        assert_eq!(d2.len(), 6);
        assert_eq!(d1.schema, ["Do", "T", "RB", "alphaB", "vB", "omegaB"]);
        assert_eq!(d2.schema, ["Do", "T", "Tr", "RB", "alphaB", "vB", "omegaB"]);
        for s in d1.samples.iter().chain(&d2.samples) {
            assert!(s.springback > 0.0 && s.springback < s.features[d1.schema.len() - 3]);
        }
    }

    #[test]
    fn optional_process_columns() {
        let cfg = GeneratorConfig {
            include_optional_process: true,
            ..small_config()
        };
        let (d1, _) = generate_datasets(&cfg, 1).unwrap();
        assert_eq!(d1.schema.len(), 9);
        assert_eq!(&d1.schema[6..], ["Lp_die", "gap", "friction"]);
    }

    #[test]
    fn empty_config_rejected() {
        let cfg = GeneratorConfig {
            n_single: 0,
            ..small_config()
        };
        assert!(matches!(generate_datasets(&cfg, 1), Err(Error::Empty(_))));
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let (d1, d2) = generate_datasets(&cfg, 5).unwrap();
        write_datasets(dir.path(), &d1, &d2).unwrap();
        let bytes1 = std::fs::read(dir.path().join("dataset1.csv")).unwrap();

        let other = tempfile::tempdir().unwrap();
        let (e1, e2) = generate_datasets(&cfg, 5).unwrap();
        write_datasets(other.path(), &e1, &e2).unwrap();
        assert_eq!(bytes1, std::fs::read(other.path().join("dataset1.csv")).unwrap());

        let back = Dataset::read_csv(&dir.path().join("dataset2.csv")).unwrap();
        assert_eq!(back.schema, d2.schema);
        assert_eq!(back.samples, d2.samples);
        let text = String::from_utf8(bytes1).unwrap();
        assert!(text.starts_with("Do,T,RB,alphaB,vB,omegaB,springback\n"));
        assert_eq!(text.lines().count(), 13);
    }
}
