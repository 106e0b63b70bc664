//! The oracle battery: every closed form is re-derived by adaptive
//! quadrature of its defining integral, every analytic gradient is checked
//! against central finite differences, the large-sample estimators are
//! compared to their population values within bootstrap error bars, and the
//! training dynamics are probed at a constructed equilibrium. The same
//! routines back both the `verify` subcommand (reduced fast mode) and the
//! dense acceptance runs.

use super::CommonArgs;
use crate::config::{ResolvedConfig, Resolver};
use crate::csvout::Csv;
use crate::errors::CliError;
use crate::manifest::RunDir;
use crate::quadrature::{central_diff, gauss_pdf, integrate};
use crate::stability::LocationFamilySystem;
use glocad_core::analytic::{
    dyn_single_gaussian, mean_embedding_gauss, mean_embedding_mixture, mmd2_spiky, sens_mmd,
    sens_ume, ume2_at_mode, ume2_spiky, ume2_two_gaussians, ume_grad_mq, DynState1G, Lambda,
    SpikySpec,
};
use glocad_core::estimators::{
    grad_mmd2_wrt_y, grad_ume2_wrt_witness, grad_ume2_wrt_y, mmd2_biased,
    mmd2_score_bootstrap_se, ume2_hat, ume2_score_bootstrap_se, MmdVariant, WitnessSet,
};
use glocad_core::mixtures::GaussianMixture;
use glocad_core::nn::{grad_check, Activation, MlpParams};
use glocad_core::train::{sample_standard_normal, stream_rng, STREAM_INIT};
use glocad_core::{analytic, KernelSpec, Samples};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const NAME: &str = "verify";

/// How hard each check family works. The fast flavor keeps the whole
/// battery under a minute; the dense one matches the documented instance
/// counts of the acceptance checks.
#[derive(Debug, Clone)]
pub struct BatteryOptions {
    pub seed: u64,
    /// Minimum parameter-grid size per closed-form quadrature check.
    pub quad_points: usize,
    /// Random instances per finite-difference gradient family.
    pub fd_instances: usize,
    /// Per-side sample count of the estimator-consistency check.
    pub estimator_n: usize,
    /// Independent repetitions of the estimator-consistency check.
    pub estimator_seeds: usize,
    /// Dataset size of the location-family equilibrium check.
    pub stability_n: usize,
}

impl BatteryOptions {
    pub fn fast(seed: u64) -> Self {
        BatteryOptions {
            seed,
            quad_points: 20,
            fd_instances: 25,
            estimator_n: 20_000,
            estimator_seeds: 2,
            stability_n: 48,
        }
    }

    pub fn dense(seed: u64) -> Self {
        BatteryOptions {
            seed,
            quad_points: 24,
            fd_instances: 100,
            estimator_n: 100_000,
            estimator_seeds: 5,
            stability_n: 48,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub instances: usize,
    /// The worst observed error statistic (family-specific).
    pub worst: f64,
    /// The bound it must stay below.
    pub bound: f64,
    pub pass: bool,
}

impl CheckOutcome {
    fn judge(name: &'static str, instances: usize, worst: f64, bound: f64) -> Self {
        CheckOutcome { name, instances, worst, bound, pass: worst.is_finite() && worst < bound }
    }
}

/// Relative error with an absolute floor so near-zero reference values do
/// not divide into noise.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

// ───────────────────── closed forms vs quadrature ─────────────────────

const QUAD_TOL: f64 = 1e-11;
const QUAD_BOUND: f64 = 1e-8;

/// k(x, v) for the 1D Gaussian kernel with bandwidth σ².
fn k1(x: f64, v: f64, sigma_sq: f64) -> f64 {
    (-(x - v) * (x - v) / (2.0 * sigma_sq)).exp()
}

pub fn check_gauss_integral(min_points: usize) -> Result<CheckOutcome, CliError> {
    let na = (min_points as f64 / 8.0).sqrt().ceil() as usize;
    let nc = min_points.div_ceil(8 * na).max(na);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &a in &linspace(-1.5, 2.0, na.max(3)) {
        for &c in &linspace(-0.8, 1.2, nc.max(2)) {
            for &b in &[0.5, 1.7] {
                for &d in &[0.9, 2.6] {
                    let closed = analytic::gauss_integral(a, b, c, d)?;
                    let f = |x: f64| {
                        (-(x - a) * (x - a) / b - (x - c) * (x - c) / d).exp()
                            / (2.0 * std::f64::consts::PI).sqrt()
                    };
                    let quad = integrate(f, -14.0, 14.0, QUAD_TOL);
                    worst = worst.max((closed - quad).abs());
                    count += 1;
                }
            }
        }
    }
    Ok(CheckOutcome::judge("quad_gauss_integral", count, worst, QUAD_BOUND))
}

pub fn check_mean_embedding_gauss(min_points: usize) -> Result<CheckOutcome, CliError> {
    let nv = min_points.div_ceil(8).max(3);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &v in &linspace(-2.0, 2.0, nv) {
        for &m_p in &[-0.5, 1.0] {
            for &sp2 in &[0.7, 1.5] {
                for &sigma_sq in &[0.5, 2.0] {
                    let closed = mean_embedding_gauss(v, m_p, sp2, sigma_sq)?;
                    let f = |x: f64| gauss_pdf(x, m_p, sp2) * k1(x, v, sigma_sq);
                    let quad = integrate(f, -16.0, 16.0, QUAD_TOL);
                    worst = worst.max((closed - quad).abs());
                    count += 1;
                }
            }
        }
    }
    Ok(CheckOutcome::judge("quad_mean_embedding_gauss", count, worst, QUAD_BOUND))
}

pub fn check_mean_embedding_mixture(min_points: usize) -> Result<CheckOutcome, CliError> {
    let mix = GaussianMixture::new(1, vec![0.4, 0.6], vec![-1.0, 1.5], vec![0.5, 1.2])?;
    let nv = min_points.div_ceil(2).max(10);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &v in &linspace(-2.5, 2.5, nv) {
        for &sigma_sq in &[0.6, 1.8] {
            let closed = mean_embedding_mixture(v, &mix, sigma_sq)?;
            let f = |x: f64| {
                (0.4 * gauss_pdf(x, -1.0, 0.5) + 0.6 * gauss_pdf(x, 1.5, 1.2))
                    * k1(x, v, sigma_sq)
            };
            let quad = integrate(f, -18.0, 18.0, QUAD_TOL);
            worst = worst.max((closed - quad).abs());
            count += 1;
        }
    }
    Ok(CheckOutcome::judge("quad_mean_embedding_mixture", count, worst, QUAD_BOUND))
}

pub fn check_ume2_two_gaussians(min_points: usize) -> Result<CheckOutcome, CliError> {
    let nv = min_points.div_ceil(8).max(3);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &v in &linspace(-1.5, 1.5, nv) {
        for &(m_p, sp2) in &[(0.0, 1.0), (-0.7, 0.6)] {
            for &(m_q, sq2) in &[(1.0, 1.0), (0.3, 1.8)] {
                for &sigma_sq in &[0.5, 2.0] {
                    let closed = ume2_two_gaussians(v, m_p, sp2, m_q, sq2, sigma_sq)?;
                    let mu_p =
                        integrate(|x| gauss_pdf(x, m_p, sp2) * k1(x, v, sigma_sq), -16.0, 16.0, QUAD_TOL);
                    let mu_q =
                        integrate(|x| gauss_pdf(x, m_q, sq2) * k1(x, v, sigma_sq), -16.0, 16.0, QUAD_TOL);
                    let quad = (mu_p - mu_q) * (mu_p - mu_q);
                    worst = worst.max((closed - quad).abs());
                    count += 1;
                }
            }
        }
    }
    Ok(CheckOutcome::judge("quad_ume2_two_gaussians", count, worst, QUAD_BOUND))
}

/// Density of the spiky model: w·N(0,1) + (1−w)·N(0,σ_q²).
fn spiky_pdf(x: f64, s: &SpikySpec) -> f64 {
    s.w * gauss_pdf(x, 0.0, 1.0) + (1.0 - s.w) * gauss_pdf(x, 0.0, s.sigma_q_sq)
}

pub fn check_ume2_spiky(min_points: usize) -> Result<CheckOutcome, CliError> {
    let nv = min_points.div_ceil(9).max(3);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &v in &linspace(-1.2, 1.2, nv) {
        for &w in &[0.3, 0.5, 0.8] {
            for &sq2 in &[0.25, 0.7, 1.8] {
                let s = SpikySpec::new(w, sq2, 1.0)?;
                let closed = ume2_spiky(&s, v);
                let mu_p = integrate(|x| gauss_pdf(x, 0.0, 1.0) * k1(x, v, s.sigma_sq), -16.0, 16.0, QUAD_TOL);
                let mu_q = integrate(|x| spiky_pdf(x, &s) * k1(x, v, s.sigma_sq), -16.0, 16.0, QUAD_TOL);
                let quad = (mu_p - mu_q) * (mu_p - mu_q);
                worst = worst.max((closed - quad).abs());
                count += 1;
            }
        }
    }
    Ok(CheckOutcome::judge("quad_ume2_spiky", count, worst, QUAD_BOUND))
}

pub fn check_mmd2_spiky(min_points: usize) -> Result<CheckOutcome, CliError> {
    let nw = min_points.div_ceil(4).max(5);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &w in &linspace(0.0, 1.0, nw) {
        for &sq2 in &[0.25, 0.7, 1.8, 3.0] {
            let s = SpikySpec::new(w, sq2, 1.0)?;
            let closed = mmd2_spiky(&s);
            // the defining double expectations, as genuinely nested 2D
            // quadratures of density × density × kernel; the inner pass runs
            // much tighter than the outer so its noise cannot alias into the
            // outer refinement decisions
            let lim = 10.0;
            let (outer_tol, inner_tol) = (1e-10, 3e-12);
            let p = |x: f64| gauss_pdf(x, 0.0, 1.0);
            let q = |x: f64| spiky_pdf(x, &s);
            let expectation = |f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64| {
                integrate(
                    |x| f(x) * integrate(|y| g(y) * k1(x, y, s.sigma_sq), -lim, lim, inner_tol),
                    -lim,
                    lim,
                    outer_tol,
                )
            };
            let e_pp = expectation(&p, &p);
            let e_qq = expectation(&q, &q);
            let e_pq = expectation(&p, &q);
            let quad = e_pp + e_qq - 2.0 * e_pq;
            worst = worst.max((closed - quad).abs());
            count += 1;
        }
    }
    Ok(CheckOutcome::judge("quad_mmd2_spiky", count, worst, QUAD_BOUND))
}

// ───────────────────── gradients vs finite differences ─────────────────────

/// The sensitivity pair is differentiated in σ_q (not σ_q²); its FD step
/// and looser bound follow the documented contract.
pub fn check_sens_spiky(instances: usize, rng: &mut ChaCha8Rng) -> Result<CheckOutcome, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let w = rng.random_range(0.05..0.95);
        let sigma_q = rng.random_range(0.3..1.5);
        let sigma_sq = rng.random_range(0.4..3.0);
        let v = rng.random_range(-2.0..2.0);
        let s = SpikySpec::new(w, sigma_q * sigma_q, sigma_sq)?;
        let h = 1e-6;
        let fd_mmd = central_diff(
            |sq| mmd2_spiky(&SpikySpec::new(w, sq * sq, sigma_sq).expect("valid spec")),
            sigma_q,
            h,
        );
        worst = worst.max(rel_err(sens_mmd(&s), fd_mmd));
        let fd_ume = central_diff(
            |sq| ume2_spiky(&SpikySpec::new(w, sq * sq, sigma_sq).expect("valid spec"), v),
            sigma_q,
            h,
        );
        worst = worst.max(rel_err(sens_ume(&s, v), fd_ume));
    }
    Ok(CheckOutcome::judge("fd_sens_spiky", instances, worst, 1e-4))
}

pub fn check_ume_grad_mq(instances: usize, rng: &mut ChaCha8Rng) -> Result<CheckOutcome, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let m_p = rng.random_range(0.5..1.5);
        let m_q = rng.random_range(-0.5..2.5);
        let sigma_sq = rng.random_range(0.5..4.0);
        let omega = rng.random_range(0.2..0.8);
        let g = ume_grad_mq(m_p, m_q, sigma_sq, omega)?;
        // the curve is the *negative* gradient of the witness-anchored
        // objective, so it must match −d/dm_q of the closed-form value
        let fd = -central_diff(
            |m| ume2_at_mode(m_p, m, sigma_sq, omega).expect("valid params"),
            m_q,
            1e-6,
        );
        worst = worst.max(rel_err(g, fd));
    }
    Ok(CheckOutcome::judge("fd_ume_grad_mq", instances, worst, 1e-5))
}

pub fn check_kernel_grads(instances: usize, rng: &mut ChaCha8Rng) -> Result<CheckOutcome, CliError> {
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let d = 2;
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let k = if i % 2 == 0 {
            KernelSpec::gaussian(rng.random_range(0.5..3.0))?
        } else {
            KernelSpec::imq(rng.random_range(0.5..2.0), rng.random_range(-0.9..-0.1))?
        };
        let g = k.grad_x(&x, &y)?;
        for c in 0..d {
            let fd = central_diff(
                |t| {
                    let mut xp = x.clone();
                    xp[c] = t;
                    k.eval(&xp, &y).expect("kernel evaluates")
                },
                x[c],
                1e-6,
            );
            worst = worst.max(rel_err(g[c], fd));
        }
        if let KernelSpec::Gaussian { bandwidth_sq } = k {
            let gb = k.grad_bandwidth(&x, &y)?;
            let fd = central_diff(
                |b| {
                    KernelSpec::gaussian(b)
                        .and_then(|kk| kk.eval(&x, &y))
                        .expect("kernel evaluates")
                },
                bandwidth_sq,
                1e-6,
            );
            worst = worst.max(rel_err(gb, fd));
        }
    }
    Ok(CheckOutcome::judge("fd_kernel_grads", instances, worst, 1e-5))
}

pub fn check_estimator_grads(
    instances: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CheckOutcome, CliError> {
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let (n, m, j, d) = (6, 5, 3, 2);
        let x = {
            let mut s = sample_standard_normal(n, d, rng);
            for r in 0..n {
                s.row_mut(r)[0] += 0.4;
            }
            s
        };
        let y = sample_standard_normal(m, d, rng);
        let v = WitnessSet::new(sample_standard_normal(j, d, rng))?;
        let k = if i % 2 == 0 {
            KernelSpec::gaussian(rng.random_range(0.5..2.5))?
        } else {
            KernelSpec::imq(rng.random_range(0.5..2.0), rng.random_range(-0.9..-0.1))?
        };
        let variant = if i % 4 < 2 { MmdVariant::Biased } else { MmdVariant::Unbiased };
        let h = 1e-6;

        let gy = grad_mmd2_wrt_y(&x, &y, &k, variant)?;
        for r in 0..m {
            for c in 0..d {
                let fd = central_diff(
                    |t| {
                        let mut yp = y.clone();
                        yp.row_mut(r)[c] = t;
                        glocad_core::estimators::mmd2(&x, &yp, &k, variant)
                            .expect("estimator evaluates")
                    },
                    y.row(r)[c],
                    h,
                );
                worst = worst.max(rel_err(gy.row(r)[c], fd));
            }
        }

        let gu = grad_ume2_wrt_y(&x, &y, &v, &k)?;
        for r in 0..m {
            for c in 0..d {
                let fd = central_diff(
                    |t| {
                        let mut yp = y.clone();
                        yp.row_mut(r)[c] = t;
                        ume2_hat(&x, &yp, &v, &k).expect("estimator evaluates")
                    },
                    y.row(r)[c],
                    h,
                );
                worst = worst.max(rel_err(gu.row(r)[c], fd));
            }
        }

        let gv = grad_ume2_wrt_witness(&x, &y, &v, &k)?;
        for r in 0..j {
            for c in 0..d {
                let fd = central_diff(
                    |t| {
                        let mut vp = v.points().clone();
                        vp.row_mut(r)[c] = t;
                        let vs = WitnessSet::new(vp).expect("valid witness set");
                        ume2_hat(&x, &y, &vs, &k).expect("estimator evaluates")
                    },
                    v.point(r)[c],
                    h,
                );
                worst = worst.max(rel_err(gv.row(r)[c], fd));
            }
        }
    }
    Ok(CheckOutcome::judge("fd_estimator_grads", instances, worst, 1e-5))
}

pub fn check_nn_backward(instances: usize, rng: &mut ChaCha8Rng) -> Result<CheckOutcome, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let p = MlpParams::glorot_init(
            &[3, 8, 5, 2],
            &[Activation::Tanh, Activation::Tanh, Activation::Identity],
            rng,
        )?;
        let z = sample_standard_normal(4, 3, rng);
        let targets = sample_standard_normal(4, 2, rng);
        let loss_of = |net: &MlpParams| -> glocad_core::Result<f64> {
            let (out, _) = net.forward(&z)?;
            let mut acc = 0.0;
            for r in 0..out.n() {
                for c in 0..out.dim() {
                    let diff = out.row(r)[c] - targets.row(r)[c];
                    acc += 0.5 * diff * diff;
                }
            }
            Ok(acc)
        };
        let (out, cache) = p.forward(&z)?;
        let mut og = Samples::zeros(out.n(), out.dim());
        for r in 0..out.n() {
            for c in 0..out.dim() {
                og.row_mut(r)[c] = out.row(r)[c] - targets.row(r)[c];
            }
        }
        let analytic_grad = p.backward(&cache, &og)?;
        worst = worst.max(grad_check(&p, loss_of, &analytic_grad, rng)?);
    }
    Ok(CheckOutcome::judge("fd_nn_backward", instances, worst, 1e-5))
}

// ───────────────────── dynamics, estimators, stability ─────────────────────

/// The matched-mean line must be an exactly zero field, for finite and
/// infinite trade-off weights alike.
pub fn check_equilibrium_line() -> Result<CheckOutcome, CliError> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &lambda in &[Lambda::Finite(5.0), Lambda::Infinite] {
        for &v in &linspace(-3.0, 3.0, 20) {
            let st = DynState1G::new(0.0, v, lambda, 2.0)?;
            let (dm, dv) = dyn_single_gaussian(&st);
            worst = worst.max(dm.abs().max(dv.abs()));
            count += 1;
        }
    }
    Ok(CheckOutcome::judge("dyn_equilibrium_line", count, worst, 1e-12))
}

/// Large-sample MMD²/UME² against their closed-form population values for
/// (N(0,1), N(1,1)), in units of the bootstrap standard error. `worst` is
/// the largest |z| across seeds and both statistics.
pub fn check_estimator_consistency(
    n: usize,
    seeds: usize,
    base_seed: u64,
) -> Result<CheckOutcome, CliError> {
    let k = KernelSpec::gaussian(1.0)?;
    let witness_pos = [-1.0, 0.0, 0.5, 1.0, 2.0];
    let mut vpts = Samples::zeros(witness_pos.len(), 1);
    for (j, &p) in witness_pos.iter().enumerate() {
        vpts.row_mut(j)[0] = p;
    }
    let v = WitnessSet::new(vpts)?;

    let pop_mmd = analytic::mmd2_two_gaussians(0.0, 1.0, 1.0, 1.0, 1.0)?;
    let pop_ume = witness_pos
        .iter()
        .map(|&p| ume2_two_gaussians(p, 0.0, 1.0, 1.0, 1.0, 1.0))
        .sum::<glocad_core::Result<f64>>()?
        / witness_pos.len() as f64;

    let mut worst: f64 = 0.0;
    for s in 0..seeds {
        let mut rng = stream_rng(base_seed.wrapping_add(s as u64), STREAM_INIT);
        let x = sample_standard_normal(n, 1, &mut rng);
        let mut y = sample_standard_normal(n, 1, &mut rng);
        for r in 0..n {
            y.row_mut(r)[0] += 1.0;
        }
        let est_mmd = mmd2_biased(&x, &y, &k)?;
        let se_mmd = mmd2_score_bootstrap_se(&x, &y, &k, 2000.min(n), 200, &mut rng)?;
        worst = worst.max((est_mmd - pop_mmd).abs() / se_mmd);
        let est_ume = ume2_hat(&x, &y, &v, &k)?;
        let se_ume = ume2_score_bootstrap_se(&x, &y, &v, &k, 200, &mut rng)?;
        worst = worst.max((est_ume - pop_ume).abs() / se_ume);
    }
    Ok(CheckOutcome::judge("estimator_consistency", seeds, worst, 3.0))
}

/// Location-family equilibrium: the symmetric generator block must have no
/// positive eigenvalue beyond tolerance, and the field must vanish.
pub fn check_location_stability(n: usize, seed: u64) -> Result<CheckOutcome, CliError> {
    let sys = LocationFamilySystem::new(n, 3, 1.0, 1.0, seed)?;
    let report = sys.report()?;
    let pass_resid = report.equilibrium_residual <= 1e-8;
    let worst = if pass_resid { report.max_gg_eig } else { f64::INFINITY };
    Ok(CheckOutcome::judge("stability_location_family", 1, worst.max(0.0), 1e-6))
}

/// Corrupting the bandwidth sign (or zeroing it) must be rejected outright.
pub fn check_invalid_bandwidth() -> CheckOutcome {
    let all_rejected = KernelSpec::gaussian(-1.0).is_err()
        && KernelSpec::gaussian(0.0).is_err()
        && KernelSpec::gaussian(f64::NAN).is_err()
        && KernelSpec::imq(-0.5, -0.5).is_err()
        && KernelSpec::imq(1.0, 0.5).is_err();
    CheckOutcome {
        name: "invalid_bandwidth_rejected",
        instances: 5,
        worst: if all_rejected { 0.0 } else { f64::INFINITY },
        bound: 1.0,
        pass: all_rejected,
    }
}

pub fn run_battery(o: &BatteryOptions) -> Result<Vec<CheckOutcome>, CliError> {
    let mut rng = stream_rng(o.seed, STREAM_INIT);
    Ok(vec![
        check_gauss_integral(o.quad_points)?,
        check_mean_embedding_gauss(o.quad_points)?,
        check_mean_embedding_mixture(o.quad_points)?,
        check_ume2_two_gaussians(o.quad_points)?,
        check_ume2_spiky(o.quad_points)?,
        check_mmd2_spiky(o.quad_points)?,
        check_sens_spiky(o.fd_instances, &mut rng)?,
        check_ume_grad_mq(o.fd_instances, &mut rng)?,
        check_kernel_grads(o.fd_instances, &mut rng)?,
        check_estimator_grads(o.fd_instances, &mut rng)?,
        check_nn_backward(o.fd_instances, &mut rng)?,
        check_equilibrium_line()?,
        check_estimator_consistency(o.estimator_n, o.estimator_seeds, o.seed)?,
        check_location_stability(o.stability_n, o.seed)?,
        check_invalid_bandwidth(),
    ])
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    if args.resume.is_some() {
        return Err(CliError::config(format!("{NAME} does not support --resume")));
    }
    let mut r = Resolver::from_file(args.config.as_deref())?;
    let seed = r.seed(args.seed)?;
    let fast = r.bool("fast", true)?;
    let mut o = if fast { BatteryOptions::fast(seed) } else { BatteryOptions::dense(seed) };
    o.quad_points = r.usize("quad_points", o.quad_points)?;
    o.fd_instances = r.usize("fd_instances", o.fd_instances)?;
    o.estimator_n = r.usize("estimator_n", o.estimator_n)?;
    o.estimator_seeds = r.usize("estimator_seeds", o.estimator_seeds)?;
    o.stability_n = r.usize("stability_n", o.stability_n)?;
    let resolved: ResolvedConfig = r.finish()?;

    let outcomes = run_battery(&o)?;
    for c in &outcomes {
        println!(
            "check {:<28} {}  (instances {}, worst {:.3e}, bound {:.1e})",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.instances,
            c.worst,
            c.bound
        );
    }
    let all_pass = outcomes.iter().all(|c| c.pass);

    let mut dir = RunDir::create(args.out_dir(NAME))?;
    let mut csv = Csv::new(&["check", "instances", "worst", "bound", "pass"]);
    for c in &outcomes {
        csv.raw_row(&[
            c.name.to_string(),
            format!("{}", c.instances),
            format!("{}", c.worst),
            format!("{}", c.bound),
            format!("{}", c.pass),
        ]);
    }
    dir.write("verify_report.csv", &csv.into_bytes())?;
    let json = serde_json::json!({ "all_pass": all_pass, "checks": outcomes });
    dir.write("verify_report.json", &serde_json::to_vec_pretty(&json)?)?;
    dir.finish(NAME, seed, resolved, None)?;

    if all_pass {
        println!("{NAME}: all {} checks passed", outcomes.len());
        Ok(())
    } else {
        let failed: Vec<&str> =
            outcomes.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        Err(CliError::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}
