//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits non-zero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bmt_springback::harness::{emit_report, run_ablations, theory_baseline, ExperimentConfig, Method};
use bmt_springback::nn::{Activation, Mlp};
use bmt_springback::oracle::{
    generate_bmt, lhs_sample, Dataset, GeneratorConfig, MaterialSpec, ProcessFactor, ProcessParams,
    QuadratureGrid, Range, Sample, SpringbackModel, TubeGeometry,
};
use bmt_springback::penet::{
    composite_loss, dynamic_weight, dynamic_weight_from_deviation, gradients_at, prepare_spnet, CompositeLossConfig,
    PeNet, PeSample, TheoryDesign,
};
use bmt_springback::section::{
    annulus_inertia, equivalent_section, BmtShape, LayeredSection, RatioConvention, SingleShape,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_section(rng: &mut ChaCha8Rng, e2: f64) -> LayeredSection {
    let r = rng.random_range(3.0..30.0);
    // wall fractions for which an equivalent tube exists at lambda in [0.5, 2]
    let t1 = rng.random_range(0.02..0.35) * r;
    let t2 = rng.random_range(0.02..0.35) * r;
    LayeredSection::new(r, t1, t2, 1.0, e2).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn equivalence_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s = random_section(&mut rng, 1.0);
        let eq = equivalent_section(&s).unwrap();
        worst = worst
            .max(rel(eq.radius, s.r + (s.t1 - s.t2) / 2.0))
            .max(rel(eq.thickness, s.t1 + s.t2));
    }
    outcome(worst < 1e-9, format!("max relative error {worst:.2e} over 1000 sections"))
}

fn inertia_preservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let quarter_pi = std::f64::consts::FRAC_PI_4;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let lambda = rng.random_range(0.5..2.0);
        let s = random_section(&mut rng, lambda);
        let eq = equivalent_section(&s).unwrap();
        let got = annulus_inertia(eq.radius - eq.thickness / 2.0, eq.radius + eq.thickness / 2.0);
        // I1 + lambda * I2 written out independently
        let (r, t1, t2) = (s.r, s.t1, s.t2);
        let want = quarter_pi * ((r + t1).powi(4) - r.powi(4)) + lambda * quarter_pi * (r.powi(4) - (r - t2).powi(4));
        worst = worst.max(rel(got, want));
    }
    outcome(worst < 1e-9, format!("max relative error {worst:.2e} over 1000 sections"))
}

fn elastic_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let outer = MaterialSpec::new(80_700.0, 150.0, 500.0).unwrap();
    let inner = MaterialSpec::new(110_000.0, 200.0, 1000.0).unwrap();
    let model = SpringbackModel {
        outer,
        inner,
        grid: QuadratureGrid::default(),
        process_factor: ProcessFactor::identity(),
        ratio: RatioConvention::OuterFraction,
    };
    let eps_limit = 0.9 * outer.yield_strain().min(inner.yield_strain());
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let d = rng.random_range(12.0..30.0);
        let t = rng.random_range(0.8..2.5);
        let geom = if i % 2 == 0 {
            TubeGeometry::Single(SingleShape::new(d, t).unwrap())
        } else {
            TubeGeometry::Bmt(BmtShape::new(d, t, rng.random_range(0.2..0.8)).unwrap())
        };
        // max fiber strain ro / RB at or below the limit
        let rb = (d / 2.0) / (eps_limit * rng.random_range(0.05..1.0));
        let alpha = rng.random_range(30.0..120.0);
        let process = ProcessParams::new(rb, alpha, rng.random_range(5.0..20.0), rng.random_range(0.2..1.0)).unwrap();
        let sb = model.springback(&geom, &process).unwrap();
        worst = worst.max((sb / alpha - 1.0).abs());
    }
    outcome(worst < 1e-6, format!("max |dalpha/alphaB - 1| = {worst:.2e} over 100 configurations"))
}

fn fd_rel(fd: f64, an: f64) -> f64 {
    // relative error with a small floor so vanishing components stay meaningful
    (fd - an).abs() / fd.abs().max(an.abs()).max(1e-4)
}

fn mlp_case(rng: &mut ChaCha8Rng, case: u64) -> f64 {
    let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Linear];
    let dims = [rng.random_range(1..5), rng.random_range(2..8), rng.random_range(1..4)];
    let m = Mlp::new(&dims, acts[case as usize % 3], case).unwrap();
    let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
    let target: Vec<f64> = (0..dims[2]).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |m: &Mlp, x: &[f64]| -> f64 {
        m.forward(x).unwrap().iter().zip(&target).map(|(p, t)| 0.5 * (p - t).powi(2)).sum()
    };
    let trace = m.forward_trace(&x).unwrap();
    let upstream: Vec<f64> = trace.output().iter().zip(&target).map(|(p, t)| p - t).collect();
    let (grads, input_grad) = m.backward(&trace, &upstream).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..m.num_params() {
        let mut p = m.clone();
        p.params_mut()[k] += h;
        let up = loss(&p, &x);
        p.params_mut()[k] -= 2.0 * h;
        let down = loss(&p, &x);
        worst = worst.max(fd_rel((up - down) / (2.0 * h), grads[k]));
    }
    for k in 0..x.len() {
        let mut xp = x.clone();
        xp[k] += h;
        let up = loss(&m, &xp);
        xp[k] -= 2.0 * h;
        let down = loss(&m, &xp);
        worst = worst.max(fd_rel((up - down) / (2.0 * h), input_grad[k]));
    }
    worst
}

fn toy_penet(seed: u64) -> PeNet {
    let domain = [Range::new(12.0, 30.0), Range::new(0.8, 2.5), Range::new(0.2, 0.8)];
    let design = TheoryDesign::generate(&domain, 30, 0.0, 1.363, RatioConvention::OuterFraction, seed).unwrap();
    let es = design.untrained_esnet(Activation::Tanh, seed + 1).unwrap();
    let pts = lhs_sample(
        25,
        &[(12.0, 30.0), (0.8, 2.5), (40.0, 120.0), (30.0, 120.0), (5.0, 20.0), (0.2, 1.0)],
        seed + 2,
    )
    .unwrap();
    let samples = pts
        .into_iter()
        .map(|features| Sample {
            springback: 0.02 * features[3],
            features,
        })
        .collect();
    let schema = ["Do", "T", "RB", "alphaB", "vB", "omegaB"].map(String::from).to_vec();
    let d1 = Dataset::new(schema, samples).unwrap();
    let sp = prepare_spnet(&d1, Activation::Tanh, seed + 3).unwrap();
    PeNet::assemble(es, sp, CompositeLossConfig::default()).unwrap()
}

fn penet_case(rng: &mut ChaCha8Rng, case: u64) -> f64 {
    let pe = toy_penet(100 + case);
    let bounds = [(12.0, 30.0), (0.8, 2.5), (0.2, 0.8), (40.0, 120.0), (30.0, 120.0), (5.0, 20.0), (0.2, 1.0)];
    let n = rng.random_range(1..5);
    let batch: Vec<PeSample> = lhs_sample(n, &bounds, case)
        .unwrap()
        .iter()
        .map(|r| PeSample {
            input: pe.normalize_input(r).unwrap(),
            theory: pe.es.theory_normalized(&r[..3]).unwrap(),
            label: rng.random_range(0.0..1.0),
        })
        .collect();
    let z = rng.random_range(0.0..1.0);
    let g = gradients_at(&pe, &batch, z).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..pe.es.mlp.num_params() {
        let mut p = pe.clone();
        p.es.mlp.params_mut()[k] += h;
        let up = composite_loss(&p, &batch, z).unwrap().0;
        p.es.mlp.params_mut()[k] -= 2.0 * h;
        let down = composite_loss(&p, &batch, z).unwrap().0;
        worst = worst.max(fd_rel((up - down) / (2.0 * h), g.es_grad[k]));
    }
    for k in 0..pe.sp.mlp.num_params() {
        let mut p = pe.clone();
        p.sp.mlp.params_mut()[k] += h;
        let up = composite_loss(&p, &batch, z).unwrap().0;
        p.sp.mlp.params_mut()[k] -= 2.0 * h;
        let down = composite_loss(&p, &batch, z).unwrap().0;
        worst = worst.max(fd_rel((up - down) / (2.0 * h), g.sp_grad[k]));
    }
    worst
}

fn gradient_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for case in 0..12 {
        worst = worst.max(mlp_case(&mut rng, case));
        worst = worst.max(penet_case(&mut rng, case));
        cases += 2;
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e} over {cases} cases"))
}

/// Standard-normal mass on `[-a, a]` by composite Simpson on the density.
fn normal_mass(a: f64) -> f64 {
    let n = 20_000;
    let h = 2.0 * a / n as f64;
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(-a) + pdf(a);
    for i in 1..n {
        let x = -a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(x);
    }
    s * h / 3.0
}

fn dynamic_weight_properties() -> Outcome {
    let cfg = CompositeLossConfig::default();
    let mut ok = true;
    let mut notes = Vec::new();
    ok &= dynamic_weight(&[0.3, -0.2], &[0.3, -0.2], &cfg) == 0.0;
    ok &= dynamic_weight(&[0.3, -0.2], &[0.34, -0.24], &cfg) == 0.0;
    for d in [0.5, 1.0, 2.0] {
        let z = dynamic_weight(&[0.1, 0.4], &[0.1 + d, 0.4 - d], &cfg);
        let want = normal_mass(d);
        notes.push(format!("z({d})={z:.10}"));
        ok &= (z - want).abs() < 1e-10;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..2000 {
        let a = rng.random_range(0.0..6.0);
        let b = a + rng.random_range(0.0..2.0);
        let other = rng.random_range(0.0..6.0);
        let za = dynamic_weight_from_deviation(&[a, other], &cfg);
        let zb = dynamic_weight_from_deviation(&[b, other], &cfg);
        ok &= (0.0..=1.0).contains(&za) && zb >= za;
    }
    outcome(ok, notes.join(", "))
}

fn default_ablation_config() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn ablation_ordering() -> Outcome {
    let cfg = default_ablation_config();
    let rep = run_ablations(&cfg).unwrap();
    let med = |m| rep.median(m).unwrap_or(f64::INFINITY);
    let pe = med(Method::PeNet);
    let others = [Method::BlNet, Method::BpNet, Method::PeNetWsp].map(med);
    let tb = rep.theory_baseline.rmse;
    let pass = rep.failed_runs.is_empty() && others.iter().all(|&o| pe < o) && pe < tb;
    outcome(
        pass,
        format!(
            "{} runs; medians PE-NET {pe:.4}, BL-NET {:.4}, BP-NET {:.4}, PE-NET-WSP {:.4}, PE-NET-WMA {:.4}; theory baseline {tb:.4}",
            cfg.n_runs,
            others[0],
            others[1],
            others[2],
            med(Method::PeNetWma)
        ),
    )
}

fn elastic_theory_baseline() -> Outcome {
    let mut g = GeneratorConfig {
        noise_sigma: 0.0,
        ..GeneratorConfig::default()
    };
    // ro / RB below the smaller yield strain for every sample
    g.bounds.bend_radius = Range::new(9_000.0, 12_000.0);
    let eps = (g.bounds.outer_diameter.hi / 2.0) / g.bounds.bend_radius.lo;
    let below_yield = eps < g.outer_material.yield_strain().min(g.inner_material.yield_strain());
    let d2 = generate_bmt(&g, 17).unwrap();
    let tb = theory_baseline(&d2, &g).unwrap();
    outcome(
        below_yield && tb.rmse < 1e-6 && tb.excluded.is_empty(),
        format!("RMSE {:.2e} deg over {} samples", tb.rmse, tb.n_used),
    )
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

fn determinism_and_persistence() -> Outcome {
    let cfg = default_ablation_config();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        emit_report(&run_ablations(&cfg).unwrap(), d.path()).unwrap();
    }
    let files = ["report.json", "rmse_runs.csv", "boxplot.csv"];
    let identical = files
        .iter()
        .all(|f| read(&dirs[0].path().join(f)) == read(&dirs[1].path().join(f)));

    let pe = toy_penet(7);
    let path = dirs[0].path().join("model.json");
    pe.save(&path).unwrap();
    let back = PeNet::load(&path).unwrap();
    let bits = |m: &PeNet| -> Vec<u64> {
        m.es.mlp.params().iter().chain(m.sp.mlp.params()).map(|v| v.to_bits()).collect()
    };
    let raw = [19.0, 1.4, 0.45, 75.0, 80.0, 11.0, 0.6];
    let same_model = back == pe && bits(&back) == bits(&pe);
    let same_pred = back.predict(&raw).unwrap().springback.to_bits() == pe.predict(&raw).unwrap().springback.to_bits();
    outcome(
        identical && same_model && same_pred,
        format!("report files identical: {identical}; model round trip: {same_model}; predictions: {same_pred}"),
    )
}

fn lhs_stratification() -> Outcome {
    let mut ok = true;
    let mut checked = 0;
    for n in [4usize, 80, 600] {
        for dims in 1..=7 {
            let bounds: Vec<(f64, f64)> = (0..dims).map(|j| (-(j as f64) - 1.0, 2.0 * j as f64 + 3.5)).collect();
            let pts = lhs_sample(n, &bounds, (n * 10 + dims) as u64).unwrap();
            for (j, &(lo, hi)) in bounds.iter().enumerate() {
                let mut count = vec![0usize; n];
                for p in &pts {
                    let k = ((p[j] - lo) / (hi - lo) * n as f64).floor();
                    if k < 0.0 || k >= n as f64 {
                        ok = false;
                        continue;
                    }
                    count[k as usize] += 1;
                }
                ok &= count.iter().all(|&c| c == 1);
            }
            checked += 1;
        }
    }
    outcome(ok, format!("{checked} designs, n in {{4, 80, 600}}, 1-7 dimensions"))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Duration, Check); 9] = [
        ("1 equivalence identity at unit modulus ratio", Duration::from_secs(1), equivalence_identity),
        ("2 inertia preservation", Duration::from_secs(1), inertia_preservation),
        ("3 elastic full recovery", Duration::from_secs(10), elastic_recovery),
        ("4 gradient suite", Duration::from_secs(30), gradient_suite),
        ("5 dynamic-weight properties", Duration::from_secs(1), dynamic_weight_properties),
        ("6 ablation ordering", Duration::from_secs(600), ablation_ordering),
        ("7 theory baseline elastic limit", Duration::from_secs(30), elastic_theory_baseline),
        ("8 determinism and persistence", Duration::from_secs(1200), determinism_and_persistence),
        ("9 LHS stratification", Duration::from_secs(1), lhs_stratification),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check);
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= limit, o.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {name}: {detail} [{:.2}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
