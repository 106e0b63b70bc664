//! The witness-anchored mode guide: −∇_{m_q} UME² across model-mode
//! locations, one curve per kernel bandwidth.

use super::CommonArgs;
use crate::config::Resolver;
use crate::csvout::Csv;
use crate::errors::CliError;
use crate::manifest::RunDir;
use crate::svg::{range_of, Figure, PALETTE};
use glocad_core::analytic::ume_grad_mq;

pub const NAME: &str = "ume_gradient";

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let mut r = Resolver::from_file(args.config.as_deref())?;
    let seed = r.seed(args.seed)?;
    let m_p = r.f64("m_p", 1.0)?;
    let omega = r.f64("omega", 0.5)?;
    let sigma_sq_values = r.f64_list("sigma_sq_values", &[1.0, 4.0])?;
    let mq_min = r.f64("mq_min", 0.0)?;
    let mq_max = r.f64("mq_max", 2.0)?;
    let points = r.usize("points", 81)?;
    let resolved = r.finish()?;

    if points < 2 {
        return Err(CliError::config("points must be >= 2"));
    }
    if !(mq_min < mq_max) {
        return Err(CliError::config("need mq_min < mq_max"));
    }

    let mut header: Vec<String> = vec!["m_q".into()];
    for s in &sigma_sq_values {
        header.push(format!("neg_grad_sigma_sq_{s}"));
    }
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(points);
    for i in 0..points {
        let m_q = mq_min + (mq_max - mq_min) * i as f64 / (points - 1) as f64;
        let mut row = vec![m_q];
        for s in &sigma_sq_values {
            row.push(ume_grad_mq(m_p, m_q, *s, omega)?);
        }
        csv.num_row(&row);
        rows.push(row);
    }

    let mut dir = RunDir::create(args.out_dir(NAME))?;
    dir.write("gradient_guide.csv", &csv.into_bytes())?;

    if args.plots {
        let all = rows.iter().flat_map(|r| r[1..].iter().copied());
        let mut fig = Figure::new(
            "witness-anchored gradient guide around the true mode",
            "m_q",
            "-grad",
            (mq_min, mq_max),
            range_of(all),
        );
        fig.hline(0.0, "#999");
        fig.vline(m_p, "#999");
        for (k, s) in sigma_sq_values.iter().enumerate() {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1 + k])).collect();
            let color = PALETTE[k % PALETTE.len()];
            fig.polyline(&pts, color, 1.5);
            fig.legend_entry(&format!("sigma_sq={s}"), color);
        }
        dir.write("gradient_guide.svg", fig.render().as_bytes())?;
    }
    dir.finish(NAME, seed, resolved, None)?;
    println!("{NAME}: {points} grid points, {} bandwidths", sigma_sq_values.len());
    Ok(())
}
