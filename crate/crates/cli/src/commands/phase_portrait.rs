//! Evaluates the single-Gaussian field on an (m_q, v) lattice for quiver
//! rendering; the m_q = 0 line is the system's continuum of equilibria.

use super::CommonArgs;
use crate::config::Resolver;
use crate::csvout::Csv;
use crate::errors::CliError;
use crate::manifest::RunDir;
use crate::svg::Figure;
use glocad_core::analytic::{dyn_single_gaussian, DynState1G, Lambda};
use glocad_core::odesim::{phase_portrait, GridSpec, PortraitNode};

pub const NAME: &str = "phase_portrait";

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let mut r = Resolver::from_file(args.config.as_deref())?;
    let seed = r.seed(args.seed)?;
    // bandwidth given as σ (the reference settings are σ = 0.1 and σ = 5)
    let sigma = r.f64("sigma", 0.1)?;
    let lambda = r.lambda("lambda", Lambda::Finite(5.0))?;
    let mq_min = r.f64("mq_min", -3.0)?;
    let mq_max = r.f64("mq_max", 3.0)?;
    let v_min = r.f64("v_min", -3.0)?;
    let v_max = r.f64("v_max", 3.0)?;
    let nx = r.usize("nx", 17)?;
    let ny = r.usize("ny", 17)?;
    let resolved = r.finish()?;

    let sigma_sq = sigma * sigma;
    DynState1G::new(0.0, 0.0, lambda, sigma_sq)?;
    let grid = GridSpec::new(mq_min, mq_max, v_min, v_max, nx, ny)?;
    let nodes = phase_portrait(
        |s, rate| {
            let (dm, dv) =
                dyn_single_gaussian(&DynState1G { m_q: s[0], v: s[1], lambda, sigma_sq });
            rate[0] = dm;
            rate[1] = dv;
        },
        &grid,
    );

    let mut dir = RunDir::create(args.out_dir(NAME))?;
    let mut csv = Csv::new(&["m_q", "v", "dmq_dt", "dv_dt"]);
    for n in &nodes {
        csv.num_row(&[n.state[0], n.state[1], n.rate[0], n.rate[1]]);
    }
    dir.write("portrait.csv", &csv.into_bytes())?;

    if args.plots {
        dir.write("portrait.svg", render(&grid, &nodes).as_bytes())?;
    }
    dir.finish(NAME, seed, resolved, None)?;

    let max_rate = nodes
        .iter()
        .map(|n| (n.rate[0] * n.rate[0] + n.rate[1] * n.rate[1]).sqrt())
        .fold(0.0f64, f64::max);
    println!("{NAME}: {} nodes, max |rate| = {max_rate:.4e}", nodes.len());
    Ok(())
}

fn render(grid: &GridSpec, nodes: &[PortraitNode]) -> String {
    let mut fig = Figure::new(
        "training-dynamics phase portrait",
        "m_q",
        "v",
        (grid.x_min, grid.x_max),
        (grid.y_min, grid.y_max),
    );
    fig.vline(0.0, "#b33"); // the equilibrium line m_q = 0
    let max_mag = nodes
        .iter()
        .map(|n| (n.rate[0] * n.rate[0] + n.rate[1] * n.rate[1]).sqrt())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    // arrows scaled so the largest spans ~80% of a grid cell
    let cell_x = (grid.x_max - grid.x_min) / (grid.nx - 1) as f64;
    let cell_y = (grid.y_max - grid.y_min) / (grid.ny - 1) as f64;
    let scale = 0.8 * cell_x.min(cell_y) / max_mag;
    for n in nodes {
        let mag = (n.rate[0] * n.rate[0] + n.rate[1] * n.rate[1]).sqrt();
        // square-root emphasis keeps slow regions visible
        let len = scale * (mag * max_mag).sqrt();
        let dir = if mag > 0.0 {
            (n.rate[0] / mag * len, n.rate[1] / mag * len)
        } else {
            (0.0, 0.0)
        };
        fig.arrow((n.state[0], n.state[1]), dir, "#456");
    }
    fig.render()
}
