//! The two training stages and the model constructors they share with the
//! ablation harness.

use serde::{Deserialize, Serialize};

use super::loss::{composite_step, CompositeLossConfig, PeOptimizer, PeSample, StepLosses};
use super::net::{theory_map, EsNet, ModelProvenance, PeNet, SpNet};
use crate::error::{Error, Result};
use crate::nn::train::{minibatches, with_epoch};
use crate::nn::{fit, Activation, Mlp, Normalizer, NormalizerMode, TrainConfig};
use crate::oracle::dataset::{split_dataset, Dataset, Range, BMT_SHAPE, SINGLE_SHAPE};
use crate::oracle::lhs_sample;
use crate::section::RatioConvention;
use crate::seed;

pub const HIDDEN_UNITS: usize = 10;

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    Ok(crate::nn::mse(pred, target)?.sqrt())
}

fn names(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// LHS points in `(Do, T, Tr)` labelled by the theory map.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryDesign {
    pub lambda2: f64,
    pub ratio: RatioConvention,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<Vec<f64>>,
    pub holdout_x: Vec<Vec<f64>>,
    pub holdout_y: Vec<Vec<f64>>,
}

impl TheoryDesign {
    pub fn generate(
        domain: &[Range; 3],
        n_theory: usize,
        holdout_frac: f64,
        lambda2: f64,
        ratio: RatioConvention,
        seed: u64,
    ) -> Result<TheoryDesign> {
        if n_theory == 0 {
            return Err(Error::Empty("pre-exploration needs at least one theory point".into()));
        }
        if !(0.0..1.0).contains(&holdout_frac) {
            return Err(Error::Config(format!("holdout_frac must lie in [0, 1), got {holdout_frac}")));
        }
        let bounds: Vec<(f64, f64)> = domain.iter().map(Range::pair).collect();
        let points = lhs_sample(n_theory, &bounds, seed)?;
        let mut labels = Vec::with_capacity(n_theory);
        for p in &points {
            let eq = theory_map(p, lambda2, ratio).map_err(|e| {
                Error::NoPhysicalSolution(format!(
                    "equivalence failed at Do={}, T={}, Tr={}: {e}",
                    p[0], p[1], p[2]
                ))
            })?;
            labels.push(eq.to_vec());
        }
        let n_hold = (n_theory as f64 * holdout_frac).round() as usize;
        let n_train = n_theory - n_hold;
        if n_train == 0 {
            return Err(Error::Empty(format!("{n_theory} theory points leave nothing to train on")));
        }
        // LHS rows are already in random order
        let holdout_x = points[n_train..].to_vec();
        let holdout_y = labels[n_train..].to_vec();
        let mut train_x = points;
        let mut train_y = labels;
        train_x.truncate(n_train);
        train_y.truncate(n_train);
        Ok(TheoryDesign {
            lambda2,
            ratio,
            train_x,
            train_y,
            holdout_x,
            holdout_y,
        })
    }

    /// Randomly initialized ES-NET whose normalizers are fitted on the
    /// training part of the design.
    pub fn untrained_esnet(&self, activation: Activation, seed: u64) -> Result<EsNet> {
        let input_norm = Normalizer::fit(&self.train_x, &names(&BMT_SHAPE), NormalizerMode::MinMax)?;
        let output_norm = Normalizer::fit(&self.train_y, &names(&SINGLE_SHAPE), NormalizerMode::MinMax)?;
        Ok(EsNet {
            mlp: Mlp::new(&[3, HIDDEN_UNITS, 2], activation, seed)?,
            input_norm,
            output_norm,
            lambda2: self.lambda2,
            ratio: self.ratio,
            provenance: ModelProvenance {
                seed: Some(seed),
                config_hash: None,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreExploreReport {
    /// Holdout RMSE over both outputs in normalized units.
    pub rmse_normalized: f64,
    /// Holdout RMSE of `Do_eq` and `T_eq` in millimetres.
    pub rmse_do: f64,
    pub rmse_t: f64,
    pub loss_history: Vec<f64>,
}

/// Regresses ES-NET onto the theory map (`L_p` only).
pub fn pre_explore_esnet(es: &mut EsNet, design: &TheoryDesign, config: &TrainConfig) -> Result<PreExploreReport> {
    let x: Vec<Vec<f64>> = design.train_x.iter().map(|r| es.input_norm.apply(r)).collect();
    let y: Vec<Vec<f64>> = design.train_y.iter().map(|r| es.output_norm.apply(r)).collect();
    let fit_report = fit(&mut es.mlp, &x, &y, config)?;
    let (eval_x, eval_y) = if design.holdout_x.is_empty() {
        (&design.train_x, &design.train_y)
    } else {
        (&design.holdout_x, &design.holdout_y)
    };
    let (mut sq_norm, mut sq_do, mut sq_t) = (0.0, 0.0, 0.0);
    for (xr, yr) in eval_x.iter().zip(eval_y) {
        let pred_n = es.mlp.forward(&es.input_norm.apply(xr))?;
        let target_n = es.output_norm.apply(yr);
        sq_norm += (pred_n[0] - target_n[0]).powi(2) + (pred_n[1] - target_n[1]).powi(2);
        let pred = es.output_norm.invert(&pred_n);
        sq_do += (pred[0] - yr[0]).powi(2);
        sq_t += (pred[1] - yr[1]).powi(2);
    }
    let n = eval_x.len() as f64;
    es.provenance.seed = Some(config.seed);
    Ok(PreExploreReport {
        rmse_normalized: (sq_norm / (2.0 * n)).sqrt(),
        rmse_do: (sq_do / n).sqrt(),
        rmse_t: (sq_t / n).sqrt(),
        loss_history: fit_report.loss_history,
    })
}

/// Randomly initialized SP-NET with normalizers fitted on `train`.
pub fn prepare_spnet(train: &Dataset, activation: Activation, seed: u64) -> Result<SpNet> {
    check_single_schema(train)?;
    let rows: Vec<Vec<f64>> = train.samples.iter().map(|s| s.features.clone()).collect();
    let input_norm = Normalizer::fit(&rows, &train.schema, NormalizerMode::MinMax)?;
    let labels: Vec<Vec<f64>> = train.labels().into_iter().map(|y| vec![y]).collect();
    let label_norm = Normalizer::fit(&labels, &[crate::oracle::dataset::LABEL.to_string()], NormalizerMode::MinMax)?;
    Ok(SpNet {
        mlp: Mlp::new(&[train.schema.len(), HIDDEN_UNITS, 1], activation, seed)?,
        input_norm,
        label_norm,
        provenance: ModelProvenance {
            seed: Some(seed),
            config_hash: train.provenance.config_hash.clone(),
        },
    })
}

fn check_single_schema(ds: &Dataset) -> Result<()> {
    if ds.schema.len() < 3 || ds.schema[0] != SINGLE_SHAPE[0] || ds.schema[1] != SINGLE_SHAPE[1] || ds.schema[2] == "Tr" {
        return Err(Error::Schema(format!(
            "single-tube dataset must be Do, T, process...; got {:?}",
            ds.schema
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    /// Test RMSE in degrees.
    pub test_rmse: f64,
    /// RMSE of predicting the training-label mean for every test sample.
    pub mean_baseline_rmse: f64,
    pub loss_history: Vec<f64>,
}

pub fn sp_rmse(sp: &SpNet, ds: &Dataset) -> Result<f64> {
    let rows = ds.select(sp.input_schema())?;
    let pred = rows.iter().map(|r| sp.predict(r)).collect::<Result<Vec<_>>>()?;
    rmse(&pred, &ds.labels())
}

pub fn pretrain_spnet(sp: &mut SpNet, train: &Dataset, test: &Dataset, config: &TrainConfig) -> Result<PretrainReport> {
    sp.validate()?;
    let rows = train.select(sp.input_schema())?;
    let x: Vec<Vec<f64>> = rows.iter().map(|r| sp.input_norm.apply(r)).collect();
    let y: Vec<Vec<f64>> = train.labels().iter().map(|&v| vec![sp.label_norm.apply_one(0, v)]).collect();
    let fit_report = fit(&mut sp.mlp, &x, &y, config)?;
    let train_labels = train.labels();
    let mean = train_labels.iter().sum::<f64>() / train_labels.len() as f64;
    let test_labels = test.labels();
    Ok(PretrainReport {
        test_rmse: sp_rmse(sp, test)?,
        mean_baseline_rmse: rmse(&vec![mean; test_labels.len()], &test_labels)?,
        loss_history: fit_report.loss_history,
    })
}

/// Splits Dataset1, builds an SP-NET on the train part and pretrains it.
pub fn pretrain_spnet_split(
    dataset1: &Dataset,
    train_frac: f64,
    config: &TrainConfig,
    split_seed: u64,
    init_seed: u64,
) -> Result<(SpNet, PretrainReport)> {
    let (train, test) = split_dataset(dataset1, train_frac, split_seed)?;
    let mut sp = prepare_spnet(&train, Activation::default(), init_seed)?;
    let report = pretrain_spnet(&mut sp, &train, &test, config)?;
    Ok((sp, report))
}

/// Normalized training examples for the composite loss.
pub fn pe_samples(pe: &PeNet, ds: &Dataset) -> Result<Vec<PeSample>> {
    let rows = ds.select(&pe.input_schema())?;
    rows.iter()
        .zip(ds.labels())
        .map(|(r, y)| {
            Ok(PeSample {
                input: pe.normalize_input(r)?,
                theory: pe.es.theory_normalized(&r[..3])?,
                label: pe.sp.label_norm.apply_one(0, y),
            })
        })
        .collect()
}

/// Test RMSE in degrees.
pub fn pe_rmse(pe: &PeNet, ds: &Dataset) -> Result<f64> {
    let rows = ds.select(&pe.input_schema())?;
    let pred = rows
        .iter()
        .map(|r| pe.predict(r).map(|p| p.springback))
        .collect::<Result<Vec<_>>>()?;
    rmse(&pred, &ds.labels())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneReport {
    /// Test RMSE of the assembled network before any stage-2 step.
    pub untuned_rmse: f64,
    pub test_rmse: f64,
    /// Per-epoch means of `L_p`, `L_d` and `z` over the minibatches.
    pub trace: Vec<StepLosses>,
}

/// Stage-2 training of the assembled network with the composite loss.
pub fn finetune(pe: &mut PeNet, train: &Dataset, test: &Dataset, config: &TrainConfig) -> Result<FinetuneReport> {
    config.validate()?;
    let samples = pe_samples(pe, train)?;
    if samples.is_empty() {
        return Err(Error::Empty("fine-tuning set has no samples".into()));
    }
    let untuned_rmse = pe_rmse(pe, test)?;
    let loss = pe.loss;
    let mut opt = PeOptimizer::new(pe);
    let mut rng = seed::rng(config.seed);
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        let batches = minibatches(samples.len(), config.minibatch_size, &mut rng);
        let mut sum = StepLosses { lp: 0.0, ld: 0.0, z: 0.0 };
        for idx in &batches {
            let batch: Vec<PeSample> = idx.iter().map(|&i| samples[i].clone()).collect();
            let step = composite_step(pe, &batch, &loss, &mut opt, lr).map_err(|e| with_epoch(e, epoch))?;
            sum.lp += step.lp;
            sum.ld += step.ld;
            sum.z += step.z;
        }
        if !pe.es.mlp.is_finite() || !pe.sp.mlp.is_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: "network parameters became non-finite".into(),
            });
        }
        let k = batches.len() as f64;
        trace.push(StepLosses {
            lp: sum.lp / k,
            ld: sum.ld / k,
            z: sum.z / k,
        });
    }
    Ok(FinetuneReport {
        untuned_rmse,
        test_rmse: pe_rmse(pe, test)?,
        trace,
    })
}

pub fn finetune_split(
    pe: &mut PeNet,
    dataset2: &Dataset,
    train_frac: f64,
    config: &TrainConfig,
    split_seed: u64,
) -> Result<FinetuneReport> {
    let (train, test) = split_dataset(dataset2, train_frac, split_seed)?;
    finetune(pe, &train, &test, config)
}

/// PE-NET architecture with every normalizer fitted on the BMT training
/// split, as used when no pre-operation is available.
pub fn scratch_penet(train: &Dataset, activation: Activation, es_seed: u64, sp_seed: u64) -> Result<PeNet> {
    if train.schema.len() < 4 || train.schema[..3] != BMT_SHAPE {
        return Err(Error::Schema(format!("BMT dataset must be Do, T, Tr, process...; got {:?}", train.schema)));
    }
    let rows: Vec<Vec<f64>> = train.samples.iter().map(|s| s.features.clone()).collect();
    let full = Normalizer::fit(&rows, &train.schema, NormalizerMode::MinMax)?;
    let shape_idx: Vec<usize> = vec![0, 1];
    let mut sp_idx = shape_idx.clone();
    sp_idx.extend(3..train.schema.len());
    let sp_input = full.select(&sp_idx);
    let labels: Vec<Vec<f64>> = train.labels().into_iter().map(|y| vec![y]).collect();
    let label_norm = Normalizer::fit(&labels, &[crate::oracle::dataset::LABEL.to_string()], NormalizerMode::MinMax)?;
    let es = EsNet {
        mlp: Mlp::new(&[3, HIDDEN_UNITS, 2], activation, es_seed)?,
        input_norm: full.select(&[0, 1, 2]),
        // identity bridge into SP-NET
        output_norm: full.select(&shape_idx),
        lambda2: 1.0,
        ratio: RatioConvention::default(),
        provenance: ModelProvenance {
            seed: Some(es_seed),
            config_hash: None,
        },
    };
    let sp = SpNet {
        mlp: Mlp::new(&[sp_input.dim(), HIDDEN_UNITS, 1], activation, sp_seed)?,
        input_norm: sp_input,
        label_norm,
        provenance: ModelProvenance {
            seed: Some(sp_seed),
            config_hash: None,
        },
    };
    let loss = CompositeLossConfig {
        theory_loss: false,
        ..CompositeLossConfig::default()
    };
    PeNet::assemble(es, sp, loss)
}

/// Plain one-hidden-layer regressor on the BMT features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpNet {
    pub mlp: Mlp,
    pub input_norm: Normalizer,
    pub label_norm: Normalizer,
}

impl BpNet {
    pub fn new(train: &Dataset, activation: Activation, seed: u64) -> Result<BpNet> {
        let rows: Vec<Vec<f64>> = train.samples.iter().map(|s| s.features.clone()).collect();
        let input_norm = Normalizer::fit(&rows, &train.schema, NormalizerMode::MinMax)?;
        let labels: Vec<Vec<f64>> = train.labels().into_iter().map(|y| vec![y]).collect();
        let label_norm = Normalizer::fit(&labels, &[crate::oracle::dataset::LABEL.to_string()], NormalizerMode::MinMax)?;
        Ok(BpNet {
            mlp: Mlp::new(&[train.schema.len(), HIDDEN_UNITS, 1], activation, seed)?,
            input_norm,
            label_norm,
        })
    }

    pub fn train(&mut self, train: &Dataset, config: &TrainConfig) -> Result<()> {
        let rows = train.select(&self.input_norm.names)?;
        let x: Vec<Vec<f64>> = rows.iter().map(|r| self.input_norm.apply(r)).collect();
        let y: Vec<Vec<f64>> = train.labels().iter().map(|&v| vec![self.label_norm.apply_one(0, v)]).collect();
        fit(&mut self.mlp, &x, &y, config)?;
        Ok(())
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let y = self.mlp.forward(&self.input_norm.apply(row))?;
        Ok(self.label_norm.invert_one(0, y[0]))
    }

    pub fn rmse(&self, ds: &Dataset) -> Result<f64> {
        let rows = ds.select(&self.input_norm.names)?;
        let pred = rows.iter().map(|r| self.predict(r)).collect::<Result<Vec<_>>>()?;
        rmse(&pred, &ds.labels())
    }
}
