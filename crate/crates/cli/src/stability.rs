//! The realizable location-family training system at its exact optimum, as
//! a plain ODE field for local stability analysis.
//!
//! The generator is the location family y = z + θ over a fixed latent pool;
//! the data are the same pool shifted by θ*, so θ = θ* reproduces the data
//! bit for bit and the minimax loss sits at an exact floating-point zero.
//! The state vector stacks [θ (2) | witness coordinates (2J)]; the
//! generator block is indices {0, 1}.

use crate::errors::CliError;
use glocad_core::estimators::{
    grad_mmd2_wrt_y, grad_ume2_wrt_witness, grad_ume2_wrt_y, MmdVariant, WitnessSet,
};
use glocad_core::odesim::{stability_check, StabilityReport};
use glocad_core::train::{sample_standard_normal, stream_rng, STREAM_INIT};
use glocad_core::{KernelSpec, Samples};

pub struct LocationFamilySystem {
    data: Samples,
    pool: Samples,
    kernel: KernelSpec,
    lambda: f64,
    j: usize,
    /// The exact equilibrium: θ* followed by the witness coordinates.
    pub x_star: Vec<f64>,
}

impl LocationFamilySystem {
    pub fn new(n: usize, j: usize, lambda: f64, bandwidth_sq: f64, seed: u64) -> Result<Self, CliError> {
        if n < 2 || j < 1 {
            return Err(CliError::config("location-family system needs n >= 2 and j >= 1"));
        }
        let kernel = KernelSpec::gaussian(bandwidth_sq)?;
        let theta_star = [0.3, -0.2];
        let mut rng = stream_rng(seed, STREAM_INIT);
        let pool = sample_standard_normal(n, 2, &mut rng);
        let witnesses = sample_standard_normal(j, 2, &mut rng);

        // data = pool + θ*, with the same per-coordinate addition the field
        // uses, so the generated set at θ* equals the data bitwise
        let mut data = pool.clone();
        for r in 0..n {
            for c in 0..2 {
                data.row_mut(r)[c] = pool.row(r)[c] + theta_star[c];
            }
        }

        let mut x_star = theta_star.to_vec();
        x_star.extend_from_slice(witnesses.data());
        Ok(LocationFamilySystem { data, pool, kernel, lambda, j, x_star })
    }

    pub fn generator_block(&self) -> Vec<usize> {
        vec![0, 1]
    }

    /// The stacked gradient field: θ̇ = −∇_θ(MMD² + λ·UME²), v̇ = +λ·∇_v UME².
    pub fn field(&self) -> impl FnMut(&[f64], &mut [f64]) + '_ {
        let n = self.pool.n();
        move |s: &[f64], rate: &mut [f64]| {
            let mut y = Samples::zeros(n, 2);
            for r in 0..n {
                for c in 0..2 {
                    y.row_mut(r)[c] = self.pool.row(r)[c] + s[c];
                }
            }
            let v = WitnessSet::new(
                Samples::new(s[2..].to_vec(), 2).expect("witness block is 2J long"),
            )
            .expect("witness set is nonempty");

            let gm = grad_mmd2_wrt_y(&self.data, &y, &self.kernel, MmdVariant::Biased)
                .expect("matched shapes");
            let gu = grad_ume2_wrt_y(&self.data, &y, &v, &self.kernel).expect("matched shapes");
            for c in 0..2 {
                let mut acc = 0.0;
                for r in 0..n {
                    acc += gm.row(r)[c] + self.lambda * gu.row(r)[c];
                }
                rate[c] = -acc;
            }
            let gv = grad_ume2_wrt_witness(&self.data, &y, &v, &self.kernel)
                .expect("matched shapes");
            for (out, g) in rate[2..].iter_mut().zip(gv.data()) {
                *out = self.lambda * g;
            }
        }
    }

    pub fn report(&self) -> Result<StabilityReport, CliError> {
        Ok(stability_check(self.field(), &self.x_star, &self.generator_block())?)
    }

    pub fn state_dim(&self) -> usize {
        2 + 2 * self.j
    }
}
