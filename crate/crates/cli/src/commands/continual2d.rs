//! Two-branch continual-learning comparison: a generator pretrained on one
//! blob (D1) meets a second blob (D2); plain kernel-discrepancy descent and
//! the witness-seeded variant then race to place 10% of their samples on
//! the new content.

use super::CommonArgs;
use crate::config::{ResolvedConfig, Resolver};
use crate::csvout::Csv;
use crate::errors::CliError;
use crate::manifest::RunDir;
use crate::svg::{range_of, Figure, PALETTE};
use glocad_core::mixtures::GaussianMixture;
use glocad_core::train::{
    continual_scenario, stream_rng, ContinualConfig, ContinualReport, MlpGenerator, Phase,
    PhaseSchedule, TrainConfig, WitnessSeeding, STREAM_INIT,
};
use glocad_core::KernelSpec;

pub const NAME: &str = "continual2d";

struct Settings {
    cc: ContinualConfig,
    seeding: WitnessSeeding,
    fork_iteration: usize,
}

fn blob(mean: &[f64], var: f64) -> Result<GaussianMixture, CliError> {
    if mean.len() != 2 {
        return Err(CliError::config(format!(
            "blob means must have 2 coordinates, got {}",
            mean.len()
        )));
    }
    Ok(GaussianMixture::new(2, vec![1.0], mean.to_vec(), vec![var])?)
}

fn resolve(args: &CommonArgs) -> Result<(Settings, ResolvedConfig), CliError> {
    let mut r = Resolver::from_file(args.config.as_deref())?;
    let seed = r.seed(args.seed)?;
    let mut train = TrainConfig::defaults_2d(seed);
    // [declared-default] the local term gets the larger weight here so the
    // newly seeded witnesses actually steer the generator
    train.lambda = r.lambda("lambda", glocad_core::analytic::Lambda::Finite(5.0))?;
    train.j = r.usize("j", train.j)?;
    train.gamma = r.f64("gamma", train.gamma)?;
    train.batch = r.usize("batch", train.batch)?;
    train.n_g = r.usize("n_g", train.n_g)?;
    train.n_v = r.usize("n_v", train.n_v)?;
    train.grad_threshold = r.f64("grad_threshold", train.grad_threshold)?;
    train.optimizer = r.optimizer("optimizer", train.optimizer)?;
    train.mmd_variant = r.mmd_variant("mmd_variant", train.mmd_variant)?;
    // the scenario reports capture iterations and hit traces, not loss
    // curves, so the per-iteration loss record is thinned right down
    train.record_every = r.usize("record_every", 50)?;

    let fork_iteration = r.usize("fork_iteration", 300)?;
    let phase2_max_iters = r.usize("phase2_max_iters", 2000)?;
    // the trainer's own epoch budget must cover both phases
    train.epoch_iters = 100;
    train.max_epochs = (fork_iteration + phase2_max_iters) / train.epoch_iters + 2;

    // [declared-default] two well-separated tight blobs
    let d1_mean = r.f64_list("d1_mean", &[-1.5, 0.0])?;
    let d2_mean = r.f64_list("d2_mean", &[1.5, 0.0])?;
    let component_var = r.f64("component_var", 0.04)?;

    let seeding = match r.string("seeding", "new-data")?.as_str() {
        "new-data" => WitnessSeeding::ReseedFromNewData,
        "random" => WitnessSeeding::Random,
        other => {
            return Err(CliError::config(format!(
                "seeding must be \"new-data\" or \"random\", got \"{other}\""
            )))
        }
    };

    let cc = ContinualConfig {
        kernel: KernelSpec::gaussian(r.f64("bandwidth_sq", 2.0)?)?,
        d1: blob(&d1_mean, component_var)?,
        d2: blob(&d2_mean, component_var)?,
        phase2_max_iters,
        capture_threshold: r.f64("capture_threshold", 0.1)?,
        eval_samples: r.usize("eval_samples", 512)?,
        eval_radius: r.f64("eval_radius", 0.6)?,
        train,
    };
    Ok((Settings { cc, seeding, fork_iteration }, r.finish()?))
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    if args.resume.is_some() {
        return Err(CliError::config(format!("{NAME} does not support --resume")));
    }
    let (s, resolved) = resolve(args)?;
    let seed = s.cc.train.seed;

    let schedule = PhaseSchedule::new(vec![
        Phase { source: 0, start_iteration: 0, seeding: WitnessSeeding::Random },
        Phase { source: 1, start_iteration: s.fork_iteration, seeding: s.seeding },
    ])?;
    let mut init_rng = stream_rng(seed, STREAM_INIT);
    let gen = MlpGenerator::default_2d(&mut init_rng)?;

    println!(
        "{NAME}: fork at {}, then up to {} iterations per branch",
        s.fork_iteration, s.cc.phase2_max_iters
    );
    let report = continual_scenario(&s.cc, &schedule, gen)?;

    let mut dir = RunDir::create(args.out_dir(NAME))?;
    write_outputs(&mut dir, &report, &s, args.plots)?;
    dir.finish(NAME, seed, resolved, None)?;

    let describe = |c: Option<usize>| match c {
        Some(it) => format!("{it}"),
        None => "never (budget exhausted)".to_string(),
    };
    println!(
        "{NAME}: new content captured at phase-2 iteration {} (witness-seeded) vs {} (plain descent)",
        describe(report.witness_seeded.capture_iteration),
        describe(report.mmd_only.capture_iteration),
    );
    Ok(())
}

fn write_outputs(
    dir: &mut RunDir,
    report: &ContinualReport,
    s: &Settings,
    plots: bool,
) -> Result<(), CliError> {
    let a = &report.mmd_only.hit_trace;
    let b = &report.witness_seeded.hit_trace;
    let mut csv = Csv::new(&["iter", "mmd_only", "witness_seeded"]);
    for k in 0..a.len().max(b.len()) {
        let cell = |t: &[f64]| t.get(k).map(|v| format!("{v}")).unwrap_or_default();
        csv.raw_row(&[format!("{k}"), cell(a), cell(b)]);
    }
    dir.write("hit_trace.csv", &csv.into_bytes())?;

    let ordering_holds = match (
        report.witness_seeded.capture_iteration,
        report.mmd_only.capture_iteration,
    ) {
        (Some(w), Some(m)) => Some(w < m),
        (Some(_), None) => Some(true),
        _ => None,
    };
    let json = serde_json::json!({
        "fork_iteration": report.fork_iteration,
        "capture_threshold": s.cc.capture_threshold,
        "eval_radius": s.cc.eval_radius,
        "eval_samples": s.cc.eval_samples,
        "capture_iteration": {
            "mmd_only": report.mmd_only.capture_iteration,
            "witness_seeded": report.witness_seeded.capture_iteration,
        },
        "witness_seeded_faster": ordering_holds,
    });
    dir.write("report.json", &serde_json::to_vec_pretty(&json)?)?;

    if plots {
        let pts_a: Vec<(f64, f64)> =
            a.iter().enumerate().map(|(k, v)| (k as f64, *v)).collect();
        let pts_b: Vec<(f64, f64)> =
            b.iter().enumerate().map(|(k, v)| (k as f64, *v)).collect();
        let ymax = a.iter().chain(b).fold(s.cc.capture_threshold, |m, &v| m.max(v));
        let mut fig = Figure::new(
            "fraction of samples on the new content",
            "phase-2 iteration",
            "hit fraction",
            range_of(pts_a.iter().chain(&pts_b).map(|p| p.0)),
            (0.0, ymax * 1.1),
        );
        fig.hline(s.cc.capture_threshold, "#888");
        fig.polyline(&pts_a, PALETTE[0], 1.4);
        fig.polyline(&pts_b, PALETTE[1], 1.4);
        fig.legend_entry("plain descent", PALETTE[0]);
        fig.legend_entry("witness-seeded", PALETTE[1]);
        dir.write("hit_trace.svg", fig.render().as_bytes())?;
    }
    Ok(())
}
