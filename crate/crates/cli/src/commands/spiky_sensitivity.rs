//! Sensitivity of the two discrepancies to the spiky component's width:
//! ∂MMD²/∂σ_q is one fixed curve, while ∂UME²/∂σ_q reshapes with the
//! witness location v.

use super::CommonArgs;
use crate::config::Resolver;
use crate::csvout::Csv;
use crate::errors::CliError;
use crate::manifest::RunDir;
use crate::svg::{range_of, Figure, PALETTE};
use glocad_core::analytic::{sens_mmd, sens_ume, SpikySpec};

pub const NAME: &str = "spiky_sensitivity";

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let mut r = Resolver::from_file(args.config.as_deref())?;
    let seed = r.seed(args.seed)?;
    // [declared-default] mixing weight and bandwidth for the sweep
    let w = r.f64("w", 0.5)?;
    let sigma_sq = r.f64("sigma_sq", 1.0)?;
    let v_values = r.f64_list("v_values", &[0.0, 0.5, 1.0, 2.0])?;
    let sigma_q_min = r.f64("sigma_q_min", 0.05)?;
    let sigma_q_max = r.f64("sigma_q_max", 1.5)?;
    let points = r.usize("points", 59)?;
    let resolved = r.finish()?;

    if points < 2 {
        return Err(CliError::config("points must be >= 2"));
    }
    if !(sigma_q_min > 0.0 && sigma_q_min < sigma_q_max) {
        return Err(CliError::config("need 0 < sigma_q_min < sigma_q_max"));
    }

    let mut header: Vec<String> = vec!["sigma_q".into(), "dmmd2_dsigma_q".into()];
    for v in &v_values {
        header.push(format!("dume2_dsigma_q_v{v}"));
    }
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(points);
    for i in 0..points {
        let sigma_q =
            sigma_q_min + (sigma_q_max - sigma_q_min) * i as f64 / (points - 1) as f64;
        let spec = SpikySpec::new(w, sigma_q * sigma_q, sigma_sq)?;
        let mut row = vec![sigma_q, sens_mmd(&spec)];
        for v in &v_values {
            row.push(sens_ume(&spec, *v));
        }
        csv.num_row(&row);
        rows.push(row);
    }

    let mut dir = RunDir::create(args.out_dir(NAME))?;
    dir.write("sensitivity.csv", &csv.into_bytes())?;

    if args.plots {
        let all = rows.iter().flat_map(|r| r[1..].iter().copied());
        let mut fig = Figure::new(
            "width sensitivity of the global and local discrepancies",
            "sigma_q",
            "d/dsigma_q",
            (sigma_q_min, sigma_q_max),
            range_of(all),
        );
        fig.hline(0.0, "#999");
        let mmd_pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
        fig.polyline(&mmd_pts, "#333", 2.0);
        fig.legend_entry("mmd", "#333");
        for (k, v) in v_values.iter().enumerate() {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[2 + k])).collect();
            let color = PALETTE[k % PALETTE.len()];
            fig.polyline(&pts, color, 1.5);
            fig.legend_entry(&format!("ume v={v}"), color);
        }
        dir.write("sensitivity.svg", fig.render().as_bytes())?;
    }
    dir.finish(NAME, seed, resolved, None)?;
    println!("{NAME}: {points} grid points, {} witness locations", v_values.len());
    Ok(())
}
