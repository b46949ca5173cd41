use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use bmt_springback::harness::{
    emit_report, load_report, run_ablations, summary_table, ExperimentConfig, RunSeeds,
};
use bmt_springback::oracle::{generate_datasets, split_dataset, write_datasets, Dataset};
use bmt_springback::penet::{
    finetune, load_json, pe_rmse, pre_explore_esnet, prepare_spnet, pretrain_spnet, save_json, sp_rmse, EsNet, PeNet,
    SpNet, TheoryDesign,
};
use bmt_springback::section::{equivalent_section, modulus_ratio, BmtShape, LayeredSection, RatioConvention};
use bmt_springback::{Error, Result};

#[derive(Parser)]
#[command(name = "bmt-springback", version, about = "Springback prediction for bi-layer metallic tubes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equivalent single-layer tube of a bi-layer section.
    Equiv {
        #[arg(long = "Do")]
        outer_diameter: f64,
        #[arg(long = "T")]
        thickness: f64,
        #[arg(long = "Tr")]
        thickness_ratio: f64,
        /// Outer-layer (reference) modulus.
        #[arg(long = "E1")]
        e1: f64,
        /// Inner-layer modulus.
        #[arg(long = "E2")]
        e2: f64,
        /// Read Tr as the inner-layer fraction.
        #[arg(long)]
        inner_fraction: bool,
    },
    /// Generate dataset1.csv and dataset2.csv.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `data_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train ES-NET on the theory map.
    PreExplore {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "esnet.json")]
        out: PathBuf,
    },
    /// Pretrain SP-NET on the single-layer dataset.
    Pretrain {
        #[arg(long)]
        dataset1: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "spnet.json")]
        out: PathBuf,
    },
    /// Assemble PE-NET and fine-tune it on the BMT dataset.
    Finetune {
        #[arg(long)]
        dataset2: PathBuf,
        #[arg(long)]
        es: PathBuf,
        #[arg(long)]
        sp: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "penet.json")]
        out: PathBuf,
    },
    /// Predict springback for every row of a CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Multi-seed controlled comparison; writes report files.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// RMSE of a saved PE-NET or SP-NET on a labelled CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Print the summary of an emitted report.
    Report {
        #[arg(long = "in")]
        dir: PathBuf,
    },
}

fn config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Seeds of run 0, so the stage commands reproduce the first harness run.
fn run0(cfg: &ExperimentConfig) -> RunSeeds {
    RunSeeds::new(cfg.master_seed)
}

enum Model {
    Pe(Box<PeNet>),
    Sp(Box<SpNet>),
}

fn load_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(pe) = serde_json::from_str::<PeNet>(&text) {
        pe.es.validate()?;
        pe.sp.validate()?;
        return Ok(Model::Pe(Box::new(pe)));
    }
    let sp: SpNet = serde_json::from_str(&text)?;
    sp.validate()?;
    Ok(Model::Sp(Box::new(sp)))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Equiv {
            outer_diameter,
            thickness,
            thickness_ratio,
            e1,
            e2,
            inner_fraction,
        } => {
            let ratio = if inner_fraction {
                RatioConvention::InnerFraction
            } else {
                RatioConvention::OuterFraction
            };
            let lambda2 = modulus_ratio(e2, e1)?;
            let shape = BmtShape::new(outer_diameter, thickness, thickness_ratio)?;
            let section = LayeredSection::from_shape(&shape, e1, e2, ratio)?;
            let eq = equivalent_section(&section)?;
            let single = eq.shape();
            print_json(&json!({
                "lambda2": lambda2,
                "R": eq.radius,
                "t0": eq.thickness,
                "Do_eq": single.outer_diameter,
                "T_eq": single.thickness,
            }))?;
        }
        Command::GenData { config: c, seed, out } => {
            let cfg = config(&c)?;
            let seed = seed.unwrap_or(cfg.data_seed);
            let (d1, d2) = generate_datasets(&cfg.generator, seed)?;
            write_datasets(&out, &d1, &d2)?;
            eprintln!("wrote {} + {} samples to {}", d1.len(), d2.len(), out.display());
        }
        Command::PreExplore { config: c, out } => {
            let cfg = config(&c)?;
            let s = run0(&cfg);
            let design = TheoryDesign::generate(
                &cfg.generator.bounds.shape_bounds(),
                cfg.pre_explore.n_theory,
                cfg.pre_explore.holdout_frac,
                cfg.generator.lambda2(),
                cfg.generator.ratio,
                s.design,
            )?;
            let mut es = design.untrained_esnet(cfg.activation, s.es_init)?;
            let rep = pre_explore_esnet(&mut es, &design, &cfg.pre_explore.train.with_seed(s.es_train))?;
            es.provenance.config_hash = Some(cfg.hash());
            save_json(&es, &out)?;
            print_json(&json!({
                "rmse_normalized": rep.rmse_normalized,
                "rmse_do": rep.rmse_do,
                "rmse_t": rep.rmse_t,
                "final_loss": rep.loss_history.last(),
            }))?;
        }
        Command::Pretrain { dataset1, config: c, out } => {
            let cfg = config(&c)?;
            let s = run0(&cfg);
            let d1 = Dataset::read_csv(&dataset1)?;
            let (train, test) = split_dataset(&d1, cfg.train_frac, s.split1)?;
            let mut sp = prepare_spnet(&train, cfg.activation, s.sp_init)?;
            let rep = pretrain_spnet(&mut sp, &train, &test, &cfg.pretrain.with_seed(s.sp_train))?;
            sp.provenance.config_hash = Some(cfg.hash());
            save_json(&sp, &out)?;
            print_json(&json!({
                "test_rmse": rep.test_rmse,
                "mean_baseline_rmse": rep.mean_baseline_rmse,
                "final_loss": rep.loss_history.last(),
            }))?;
        }
        Command::Finetune {
            dataset2,
            es,
            sp,
            config: c,
            out,
        } => {
            let cfg = config(&c)?;
            let s = run0(&cfg);
            let es: EsNet = load_json(&es)?;
            let sp: SpNet = load_json(&sp)?;
            let mut pe = PeNet::assemble(es, sp, cfg.loss)?;
            pe.provenance.seed = Some(cfg.master_seed);
            pe.provenance.config_hash = Some(cfg.hash());
            let d2 = Dataset::read_csv(&dataset2)?;
            let (train, test) = split_dataset(&d2, cfg.train_frac, s.split2)?;
            let rep = finetune(&mut pe, &train, &test, &cfg.finetune.with_seed(s.finetune))?;
            pe.save(&out)?;
            print_json(&rep)?;
        }
        Command::Predict { model, input } => {
            let pe = PeNet::load(&model)?;
            let ds = Dataset::read_csv(&input)?;
            let rows = ds.select(&pe.input_schema())?;
            let mut w = csv::Writer::from_writer(std::io::stdout());
            let io = |e: csv::Error| Error::csv("<stdout>", e);
            w.write_record(["springback", "out_of_range"]).map_err(io)?;
            let mut flagged = 0;
            for r in &rows {
                let p = pe.predict(r)?;
                flagged += usize::from(p.out_of_range);
                w.write_record([p.springback.to_string(), p.out_of_range.to_string()]).map_err(io)?;
            }
            w.flush().map_err(|e| Error::io("<stdout>", e))?;
            if flagged > 0 {
                eprintln!("warning: {flagged} rows lie outside the fitted feature range");
            }
        }
        Command::Ablate {
            config: c,
            out,
            runs,
            jobs,
        } => {
            let mut cfg = config(&c)?;
            if let Some(n) = runs {
                cfg.n_runs = n;
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            let report = run_ablations(&cfg)?;
            emit_report(&report, &out)?;
            print!("{}", summary_table(&report));
            if report.any_diverged {
                eprintln!("error: at least one run diverged");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Eval { model, dataset } => {
            let ds = Dataset::read_csv(&dataset)?;
            let rmse = match load_model(&model)? {
                Model::Pe(pe) => pe_rmse(&pe, &ds)?,
                Model::Sp(sp) => sp_rmse(&sp, &ds)?,
            };
            print_json(&json!({ "rmse": rmse, "n": ds.len() }))?;
        }
        Command::Report { dir } => {
            print!("{}", summary_table(&load_report(&dir)?));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
