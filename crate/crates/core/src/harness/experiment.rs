//! Multi-seed experiment runs and the controlled comparisons.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::stats::BoxStats;
use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::oracle::dataset::{process_from_row, split_dataset};
use crate::oracle::{generate_datasets, Dataset, GeneratorConfig};
use crate::penet::{
    finetune, pre_explore_esnet, prepare_spnet, pretrain_spnet, rmse, scratch_penet, BpNet, EsNet, PeNet, SpNet,
    TheoryDesign,
};
use crate::section::BmtShape;
use crate::seed;

/// Label attached to every embedded reference value.
pub const REFERENCE_LABEL: &str = "reference, different data source";

pub const GATE_NOTE: &str =
    "dynamic weight is gated to zero when max_j |f_j - x_j| <= gate_delta (declared interpretation of the gating rule)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub label: String,
    pub n_runs: usize,
    pub sp_net_springback: f64,
    pub es_net_do: f64,
    pub es_net_t: f64,
    pub pe_net_springback: f64,
    pub ablation: BTreeMap<Method, f64>,
    pub theory_baseline: f64,
}

impl Default for ReferenceValues {
    fn default() -> Self {
        ReferenceValues {
            label: REFERENCE_LABEL.to_string(),
            n_runs: 30,
            sp_net_springback: 0.7672,
            es_net_do: 0.7133,
            es_net_t: 0.4916,
            pe_net_springback: 0.3922,
            ablation: BTreeMap::from([
                (Method::PeNet, 0.3922),
                (Method::PeNetWma, 0.6019),
                (Method::PeNetWsp, 23.7527),
                (Method::BlNet, 6.9424),
                (Method::BpNet, 6.3572),
            ]),
            theory_baseline: 1.6164,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedSample {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryBaseline {
    /// Degrees, over every usable sample of Dataset2.
    pub rmse: f64,
    pub n_used: usize,
    pub excluded: Vec<ExcludedSample>,
}

/// Springback of the theory-equivalent single-layer tube against the labels.
pub fn theory_baseline(dataset2: &Dataset, generator: &GeneratorConfig) -> Result<TheoryBaseline> {
    let rows = dataset2.select(&generator.bmt_schema())?;
    let model = generator.model();
    let (mut pred, mut target, mut excluded) = (Vec::new(), Vec::new(), Vec::new());
    for (i, (row, label)) in rows.iter().zip(dataset2.labels()).enumerate() {
        let process = process_from_row(&row[3..], generator.include_optional_process);
        let value = BmtShape::new(row[0], row[1], row[2]).and_then(|s| model.equivalent_springback(&s, &process));
        match value {
            Ok(v) if v.is_finite() => {
                pred.push(v);
                target.push(label);
            }
            Ok(v) => excluded.push(ExcludedSample {
                index: i,
                reason: format!("non-finite springback {v}"),
            }),
            Err(e) => excluded.push(ExcludedSample {
                index: i,
                reason: e.to_string(),
            }),
        }
    }
    if pred.is_empty() {
        return Err(Error::Empty("theory baseline excluded every sample".into()));
    }
    Ok(TheoryBaseline {
        rmse: rmse(&pred, &target)?,
        n_used: pred.len(),
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub rmse: Option<f64>,
    pub error: Option<String>,
    pub diverged: bool,
}

impl MethodOutcome {
    fn from_result(r: Result<f64>) -> MethodOutcome {
        match r {
            Ok(v) if v.is_finite() => MethodOutcome {
                rmse: Some(v),
                error: None,
                diverged: false,
            },
            Ok(v) => MethodOutcome {
                rmse: None,
                error: Some(format!("non-finite test RMSE {v}")),
                diverged: true,
            },
            Err(e) => MethodOutcome {
                rmse: None,
                diverged: matches!(e, Error::Diverged { .. }),
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Metrics {
    pub es_rmse_normalized: f64,
    pub es_rmse_do: f64,
    pub es_rmse_t: f64,
    pub sp_rmse: f64,
    pub sp_mean_baseline_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: usize,
    pub seed: u64,
    pub stage1: Option<Stage1Metrics>,
    /// Test RMSE of the assembled PE-NET before stage 2.
    pub untuned_rmse: Option<f64>,
    pub outcomes: BTreeMap<Method, MethodOutcome>,
    pub errors: Vec<String>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        !self.errors.is_empty() || self.outcomes.values().any(|o| o.rmse.is_none())
    }

    pub fn diverged(&self) -> bool {
        self.outcomes.values().any(|o| o.diverged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRmse {
    pub run_index: usize,
    pub seed: u64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: Vec<RunRmse>,
    pub n_failed: usize,
    pub stats: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Summary {
    pub es_rmse_do: Option<BoxStats>,
    pub es_rmse_t: Option<BoxStats>,
    pub es_rmse_normalized: Option<BoxStats>,
    pub sp_rmse: Option<BoxStats>,
    pub untuned_rmse: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub dataset1_hash: String,
    pub dataset2_hash: String,
    pub config: ExperimentConfig,
    pub methods: Vec<Method>,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<MethodSummary>,
    pub stage1: Stage1Summary,
    pub theory_baseline: TheoryBaseline,
    pub failed_runs: Vec<usize>,
    pub any_diverged: bool,
    pub gate_note: String,
    pub reference: ReferenceValues,
}

impl ExperimentReport {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == m)
    }

    pub fn median(&self, m: Method) -> Option<f64> {
        self.method(m).and_then(|s| s.stats).map(|b| b.median)
    }
}

/// Dataset1 and Dataset2, read from `dataset_dir` or generated from `data_seed`.
pub fn load_or_generate(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    match &cfg.dataset_dir {
        Some(dir) => Ok((
            Dataset::read_csv(&dir.join("dataset1.csv"))?,
            Dataset::read_csv(&dir.join("dataset2.csv"))?,
        )),
        None => generate_datasets(&cfg.generator, cfg.data_seed),
    }
}

/// Seeds derived from one run seed; every method reads the same values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub split1: u64,
    pub split2: u64,
    pub design: u64,
    pub es_init: u64,
    pub es_train: u64,
    pub sp_init: u64,
    pub sp_train: u64,
    pub finetune: u64,
    pub bp_init: u64,
}

impl RunSeeds {
    pub fn new(run_seed: u64) -> RunSeeds {
        let d = |k| seed::derive(run_seed, k);
        RunSeeds {
            split1: d(1),
            split2: d(2),
            design: d(3),
            es_init: d(4),
            es_train: d(5),
            sp_init: d(6),
            sp_train: d(7),
            finetune: d(8),
            bp_init: d(9),
        }
    }
}

struct Stage1 {
    design: TheoryDesign,
    es: EsNet,
    sp: SpNet,
    random_sp: SpNet,
    metrics: Stage1Metrics,
}

fn stage1(cfg: &ExperimentConfig, d1: &Dataset, s: &RunSeeds) -> Result<Stage1> {
    let pe_cfg = &cfg.pre_explore;
    let design = TheoryDesign::generate(
        &cfg.generator.bounds.shape_bounds(),
        pe_cfg.n_theory,
        pe_cfg.holdout_frac,
        cfg.generator.lambda2(),
        cfg.generator.ratio,
        s.design,
    )?;
    let mut es = design.untrained_esnet(cfg.activation, s.es_init)?;
    let es_report = pre_explore_esnet(&mut es, &design, &pe_cfg.train.with_seed(s.es_train))?;

    let (train1, test1) = split_dataset(d1, cfg.train_frac, s.split1)?;
    let random_sp = prepare_spnet(&train1, cfg.activation, s.sp_init)?;
    let mut sp = random_sp.clone();
    let sp_report = pretrain_spnet(&mut sp, &train1, &test1, &cfg.pretrain.with_seed(s.sp_train))?;
    Ok(Stage1 {
        design,
        es,
        sp,
        random_sp,
        metrics: Stage1Metrics {
            es_rmse_normalized: es_report.rmse_normalized,
            es_rmse_do: es_report.rmse_do,
            es_rmse_t: es_report.rmse_t,
            sp_rmse: sp_report.test_rmse,
            sp_mean_baseline_rmse: sp_report.mean_baseline_rmse,
        },
    })
}

fn run_one(cfg: &ExperimentConfig, methods: &[Method], d1: &Dataset, d2: &Dataset, run_index: usize) -> RunRecord {
    let run_seed = cfg.master_seed.wrapping_add(run_index as u64);
    let s = RunSeeds::new(run_seed);
    let mut record = RunRecord {
        run_index,
        seed: run_seed,
        stage1: None,
        untuned_rmse: None,
        outcomes: BTreeMap::new(),
        errors: Vec::new(),
    };
    let (train2, test2) = match split_dataset(d2, cfg.train_frac, s.split2) {
        Ok(v) => v,
        Err(e) => {
            record.errors.push(format!("Dataset2 split: {e}"));
            return record;
        }
    };
    let st1 = stage1(cfg, d1, &s);
    if let Err(e) = &st1 {
        record.errors.push(format!("stage 1: {e}"));
    }
    let ft_cfg: TrainConfig = cfg.finetune.with_seed(s.finetune);

    for &m in methods {
        let result = match (&st1, m) {
            (Err(e), Method::PeNet | Method::PeNetWma | Method::PeNetWsp) => {
                Err(Error::Degenerate(format!("stage 1 failed: {e}")))
            }
            (Ok(st), Method::PeNet) => PeNet::assemble(st.es.clone(), st.sp.clone(), cfg.loss).and_then(|mut pe| {
                let rep = finetune(&mut pe, &train2, &test2, &ft_cfg)?;
                record.untuned_rmse = Some(rep.untuned_rmse);
                Ok(rep.test_rmse)
            }),
            (Ok(st), Method::PeNetWma) => st
                .design
                .untrained_esnet(cfg.activation, s.es_init)
                .and_then(|es| PeNet::assemble(es, st.sp.clone(), cfg.loss))
                .and_then(|mut pe| Ok(finetune(&mut pe, &train2, &test2, &ft_cfg)?.test_rmse)),
            (Ok(st), Method::PeNetWsp) => PeNet::assemble(st.es.clone(), st.random_sp.clone(), cfg.loss)
                .and_then(|mut pe| Ok(finetune(&mut pe, &train2, &test2, &ft_cfg)?.test_rmse)),
            (_, Method::BlNet) => scratch_penet(&train2, cfg.activation, s.es_init, s.sp_init)
                .and_then(|mut pe| Ok(finetune(&mut pe, &train2, &test2, &ft_cfg)?.test_rmse)),
            (_, Method::BpNet) => BpNet::new(&train2, cfg.activation, s.bp_init).and_then(|mut bp| {
                bp.train(&train2, &ft_cfg)?;
                bp.rmse(&test2)
            }),
        };
        record.outcomes.insert(m, MethodOutcome::from_result(result));
    }
    if let Ok(st) = st1 {
        record.stage1 = Some(st.metrics);
    }
    record
}

fn stats_of(values: impl Iterator<Item = f64>) -> Option<BoxStats> {
    BoxStats::from_values(&values.collect::<Vec<_>>())
}

fn summarize(methods: &[Method], runs: &[RunRecord]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&m| {
            let ok: Vec<RunRmse> = runs
                .iter()
                .filter_map(|r| {
                    r.outcomes.get(&m).and_then(|o| o.rmse).map(|rmse| RunRmse {
                        run_index: r.run_index,
                        seed: r.seed,
                        rmse,
                    })
                })
                .collect();
            MethodSummary {
                method: m,
                n_failed: runs.len() - ok.len(),
                stats: stats_of(ok.iter().map(|r| r.rmse)),
                runs: ok,
            }
        })
        .collect()
}

/// Runs the configured methods for every seed and assembles the report.
pub fn run_methods(cfg: &ExperimentConfig, methods: &[Method]) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let (d1, d2) = load_or_generate(cfg)?;
    let baseline = theory_baseline(&d2, &cfg.generator)?;

    let work = |i: usize| run_one(cfg, &methods, &d1, &d2, i);
    let runs: Vec<RunRecord> = if cfg.jobs == 1 {
        (0..cfg.n_runs).map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..cfg.n_runs).into_par_iter().map(work).collect())
    };

    let stage1 = Stage1Summary {
        es_rmse_do: stats_of(runs.iter().filter_map(|r| r.stage1.as_ref().map(|s| s.es_rmse_do))),
        es_rmse_t: stats_of(runs.iter().filter_map(|r| r.stage1.as_ref().map(|s| s.es_rmse_t))),
        es_rmse_normalized: stats_of(runs.iter().filter_map(|r| r.stage1.as_ref().map(|s| s.es_rmse_normalized))),
        sp_rmse: stats_of(runs.iter().filter_map(|r| r.stage1.as_ref().map(|s| s.sp_rmse))),
        untuned_rmse: stats_of(runs.iter().filter_map(|r| r.untuned_rmse)),
    };
    Ok(ExperimentReport {
        config_hash: cfg.hash(),
        dataset1_hash: dataset_hash(&d1),
        dataset2_hash: dataset_hash(&d2),
        config: ExperimentConfig {
            jobs: ExperimentConfig::default().jobs,
            ..cfg.clone()
        },
        summary: summarize(&methods, &runs),
        failed_runs: runs.iter().filter(|r| r.failed()).map(|r| r.run_index).collect(),
        any_diverged: runs.iter().any(RunRecord::diverged),
        methods,
        runs,
        stage1,
        theory_baseline: baseline,
        gate_note: GATE_NOTE.to_string(),
        reference: ReferenceValues::default(),
    })
}

fn dataset_hash(ds: &Dataset) -> String {
    let mut bytes = Vec::new();
    for s in &ds.samples {
        for v in s.features.iter().chain([&s.springback]) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    crate::oracle::dataset::hex_digest(&bytes)
}

/// Two-stage pipeline only (stage-1 fits and PE-NET).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_methods(cfg, &[Method::PeNet])
}

/// Every method in `cfg.methods` on shared splits and seeds.
pub fn run_ablations(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_methods(cfg, &cfg.methods)
}
