//! Integrates the single-Gaussian mean/witness training dynamics and emits
//! m_q(t), v(t).

use super::{config_hash, CommonArgs};
use crate::config::Resolver;
use crate::csvout::Csv;
use crate::errors::CliError;
use crate::manifest::RunDir;
use crate::svg::{range_of, Figure, PALETTE};
use glocad_core::analytic::{dyn_single_gaussian, DynState1G, Lambda};
use glocad_core::odesim::{rk4_integrate, Trajectory, TrajectoryMeta};
use glocad_core::Error;

pub const NAME: &str = "single_gaussian";

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let mut r = Resolver::from_file(args.config.as_deref())?;
    let seed = r.seed(args.seed)?;
    let lambda = r.lambda("lambda", Lambda::Finite(5.0))?;
    let sigma_sq = r.f64("sigma_sq", 2.0)?;
    let v0 = r.f64("v0", 0.4)?;
    // [declared-default] starting model mean: the reference runs only state
    // that the mean converges to 0, not where it starts
    let mq0 = r.f64("mq0", 0.5)?;
    let t_end = r.f64("t_end", 200.0)?;
    let dt = r.f64("dt", 0.01)?;
    let resolved = r.finish()?;

    // validate the dynamics parameters once up front
    DynState1G::new(mq0, v0, lambda, sigma_sq)?;

    let field = move |s: &[f64], rate: &mut [f64]| {
        let (dm, dv) = dyn_single_gaussian(&DynState1G { m_q: s[0], v: s[1], lambda, sigma_sq });
        rate[0] = dm;
        rate[1] = dv;
    };
    let meta = TrajectoryMeta {
        seed,
        config_hash: config_hash(&resolved),
        field_name: NAME.to_string(),
    };

    let mut dir = RunDir::create(args.out_dir(NAME))?;
    let (traj, diverged) = match rk4_integrate(field, &[mq0, v0], dt, t_end, meta) {
        Ok(t) => (t, None),
        Err(Error::Divergence { partial, t, coord, value, limit }) => {
            let msg = format!("at t = {t}: |state[{coord}]| = {value:.3e} exceeds {limit:.1e}");
            (*partial, Some(msg))
        }
        Err(e) => return Err(e.into()),
    };

    write_outputs(&mut dir, &traj, args.plots)?;
    dir.finish(NAME, seed, resolved, None)?;

    if let Some(msg) = diverged {
        eprintln!("{NAME}: diverged {msg}; partial trajectory retained");
        return Err(CliError::Divergence(msg));
    }
    let last = traj.last_state();
    println!(
        "{NAME}: {} steps, final m_q = {:.6e}, final v = {:.6}",
        traj.times.len() - 1,
        last[0],
        last[1]
    );
    Ok(())
}

fn write_outputs(dir: &mut RunDir, traj: &Trajectory, plots: bool) -> Result<(), CliError> {
    let mut csv = Csv::new(&["t", "m_q", "v"]);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        csv.num_row(&[*t, s[0], s[1]]);
    }
    dir.write("trajectory.csv", &csv.into_bytes())?;

    if plots {
        let ys = traj.states.iter().flat_map(|s| s.iter().copied());
        let mut fig = Figure::new(
            "mean and witness point over training time",
            "t",
            "state",
            range_of(traj.times.iter().copied()),
            range_of(ys),
        );
        let mq: Vec<(f64, f64)> =
            traj.times.iter().zip(&traj.states).map(|(t, s)| (*t, s[0])).collect();
        let v: Vec<(f64, f64)> =
            traj.times.iter().zip(&traj.states).map(|(t, s)| (*t, s[1])).collect();
        fig.hline(0.0, "#999");
        fig.polyline(&mq, PALETTE[0], 1.5);
        fig.polyline(&v, PALETTE[1], 1.5);
        fig.legend_entry("m_q", PALETTE[0]);
        fig.legend_entry("v", PALETTE[1]);
        dir.write("trajectory.svg", fig.render().as_bytes())?;
    }
    Ok(())
}
