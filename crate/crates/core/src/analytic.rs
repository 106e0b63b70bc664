//! Closed-form quantities for Gaussian targets under the Gaussian kernel.
//!
//! Everything here reduces to one lemma about Gaussian integrals:
//!
//! ```text
//!     (1/√(2π)) ∫ exp(−(x−a)²/b − (x−c)²/d) dx
//!         = √(bd / (2(b+d))) · exp(−(a−c)²/(b+d)),      b, d > 0.
//! ```
//!
//! With the Gaussian kernel k(x,y) = exp(−(x−y)²/(2σ²)) the lemma gives the
//! mean embedding of N(m_p, σ_p²),
//!
//! ```text
//!     μ_P(v) = √(σ²/(σ²+σ_p²)) · exp(−(v−m_p)²/(2(σ²+σ_p²))),
//! ```
//!
//! the cross-expectation E_{x∼N(a,s₁), y∼N(c,s₂)} k(x,y) =
//! c(s₁+s₂)·exp(−(a−c)²/(2(σ²+s₁+s₂))), and from those every population
//! MMD² / UME² used by the dynamics, with the shorthand
//!
//! ```text
//!     c(z) := √(σ² / (σ² + z)).
//! ```
//!
//! The *spiky Gaussian* family probes locality: P = w·N(0,1) + (1−w)·N(0,σ_q²)
//! against Q = N(0,1), with closed forms
//!
//! ```text
//!     MMD²       = (1−w)² [ c(2) + c(2σ_q²) − 2c(1+σ_q²) ]
//!     UME²(v)    = (1−w)² [ c(1)·e^{−v²/(2(σ²+1))} − c(σ_q²)·e^{−v²/(2(σ²+σ_q²))} ]²
//! ```
//!
//! and ∂/∂σ_q of both (the sensitivity pair). The derivatives implemented
//! here are obtained by differentiating the closed forms above and are
//! verified against central finite differences; see `sens_mmd`/`sens_ume`.
//!
//! Finally, the module provides the right-hand sides of the two training
//! ODEs: the single-Gaussian system (model mean m_q, one witness v, target
//! N(0,1)) and the two-mean mixture system. The single-Gaussian fields are,
//! with s = σ²+1, A = e^{−v²/s}, E₁ = e^{−(v−m_q)²/s}, E₂ =
//! e^{−(v²+(v−m_q)²)/(2s)}, and coef = 2σ²/s²:
//!
//! ```text
//!     ∇_v UME²      = coef · [ −v·A − (v−m_q)·E₁ + (2v−m_q)·E₂ ]
//!     −∇_{m_q} UME² = −coef · (v−m_q) · (E₁ − E₂)
//!     −∇_{m_q} MMD² = −2c(2) · (m_q/(σ²+2)) · e^{−m_q²/(2(σ²+2))}
//! ```
//!
//! At m_q = 0 each bracket cancels term-for-term in IEEE arithmetic, so the
//! equilibrium line {m_q = 0} evaluates to an exactly zero field.

use crate::error::{Error, Result};
use crate::mixtures::GaussianMixture;

// ───────────────────────── Gaussian integral lemma ─────────────────────────

/// (1/√(2π)) ∫ exp(−(x−a)²/b − (x−c)²/d) dx for b, d > 0.
pub fn gauss_integral(a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    if !(b > 0.0) || !(d > 0.0) {
        return Err(Error::invalid(format!(
            "gauss_integral requires b > 0 and d > 0 (got b={b}, d={d})"
        )));
    }
    let diff = a - c;
    Ok((b * d / (2.0 * (b + d))).sqrt() * (-diff * diff / (b + d)).exp())
}

/// c(z) = √(σ²/(σ²+z)), the recurring amplitude factor.
#[inline]
pub fn c_of(z: f64, sigma_sq: f64) -> f64 {
    (sigma_sq / (sigma_sq + z)).sqrt()
}

// ───────────────────────── mean embeddings ─────────────────────────

/// μ_P(v) for P = N(m_p, σ_p²) under the Gaussian kernel with bandwidth σ².
pub fn mean_embedding_gauss(v: f64, m_p: f64, sigma_p_sq: f64, sigma_sq: f64) -> Result<f64> {
    if !(sigma_p_sq > 0.0) || !(sigma_sq > 0.0) {
        return Err(Error::invalid(format!(
            "variances must be positive (σ_p²={sigma_p_sq}, σ²={sigma_sq})"
        )));
    }
    let s = sigma_sq + sigma_p_sq;
    let d = v - m_p;
    Ok((sigma_sq / s).sqrt() * (-d * d / (2.0 * s)).exp())
}

/// Mean embedding of a 1D mixture: Σ_j w_j μ_{N(m_j,σ_j²)}(v).
pub fn mean_embedding_mixture(v: f64, m: &GaussianMixture, sigma_sq: f64) -> Result<f64> {
    if m.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: m.dim(),
        });
    }
    let mut acc = 0.0;
    for j in 0..m.n_components() {
        acc += m.weights()[j] * mean_embedding_gauss(v, m.mean(j)[0], m.variance(j), sigma_sq)?;
    }
    Ok(acc)
}

/// (μ_P(v) − μ_Q(v))² for two 1D Gaussians.
pub fn ume2_two_gaussians(
    v: f64,
    m_p: f64,
    sigma_p_sq: f64,
    m_q: f64,
    sigma_q_sq: f64,
    sigma_sq: f64,
) -> Result<f64> {
    let diff = mean_embedding_gauss(v, m_p, sigma_p_sq, sigma_sq)?
        - mean_embedding_gauss(v, m_q, sigma_q_sq, sigma_sq)?;
    Ok(diff * diff)
}

/// Squared witness-function value (μ_P(v) − μ_Q(v))² for two 1D mixtures.
pub fn ume2_mixtures(
    v: f64,
    p: &GaussianMixture,
    q: &GaussianMixture,
    sigma_sq: f64,
) -> Result<f64> {
    let diff = mean_embedding_mixture(v, p, sigma_sq)? - mean_embedding_mixture(v, q, sigma_sq)?;
    Ok(diff * diff)
}

// ───────────────────────── population MMD² ─────────────────────────

/// E_{x∼N(a,s₁), y∼N(c,s₂)} k(x,y) = c(s₁+s₂) · exp(−(a−c)²/(2(σ²+s₁+s₂))).
pub fn expected_kernel_two_gaussians(
    a: f64,
    s1: f64,
    c: f64,
    s2: f64,
    sigma_sq: f64,
) -> Result<f64> {
    if !(s1 > 0.0) || !(s2 > 0.0) || !(sigma_sq > 0.0) {
        return Err(Error::invalid("variances must be positive"));
    }
    let t = sigma_sq + s1 + s2;
    let d = a - c;
    Ok((sigma_sq / t).sqrt() * (-d * d / (2.0 * t)).exp())
}

/// Population MMD² between two 1D Gaussians.
pub fn mmd2_two_gaussians(
    m_p: f64,
    sigma_p_sq: f64,
    m_q: f64,
    sigma_q_sq: f64,
    sigma_sq: f64,
) -> Result<f64> {
    let pp = expected_kernel_two_gaussians(m_p, sigma_p_sq, m_p, sigma_p_sq, sigma_sq)?;
    let qq = expected_kernel_two_gaussians(m_q, sigma_q_sq, m_q, sigma_q_sq, sigma_sq)?;
    let pq = expected_kernel_two_gaussians(m_p, sigma_p_sq, m_q, sigma_q_sq, sigma_sq)?;
    Ok(pp + qq - 2.0 * pq)
}

/// Population MMD² between two 1D mixtures, by pairwise cross-expectations.
pub fn mmd2_mixtures(p: &GaussianMixture, q: &GaussianMixture, sigma_sq: f64) -> Result<f64> {
    if p.dim() != 1 || q.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: p.dim().max(q.dim()),
        });
    }
    let cross = |a: &GaussianMixture, b: &GaussianMixture| -> Result<f64> {
        let mut acc = 0.0;
        for i in 0..a.n_components() {
            for j in 0..b.n_components() {
                acc += a.weights()[i]
                    * b.weights()[j]
                    * expected_kernel_two_gaussians(
                        a.mean(i)[0],
                        a.variance(i),
                        b.mean(j)[0],
                        b.variance(j),
                        sigma_sq,
                    )?;
            }
        }
        Ok(acc)
    };
    Ok(cross(p, p)? + cross(q, q)? - 2.0 * cross(p, q)?)
}

// ───────────────────────── spiky Gaussian ─────────────────────────

/// P = w·N(0,1) + (1−w)·N(0,σ_q²) probed against Q = N(0,1), under the
/// Gaussian kernel with bandwidth σ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikySpec {
    pub w: f64,
    pub sigma_q_sq: f64,
    pub sigma_sq: f64,
}

impl SpikySpec {
    pub fn new(w: f64, sigma_q_sq: f64, sigma_sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::invalid(format!("mixing weight w must be in [0,1], got {w}")));
        }
        if !(sigma_q_sq > 0.0) || !(sigma_sq > 0.0) {
            return Err(Error::invalid("spiky variances must be positive"));
        }
        Ok(SpikySpec {
            w,
            sigma_q_sq,
            sigma_sq,
        })
    }
}

/// Population MMD²(P, Q) for the spiky family:
/// (1−w)² [c(2) + c(2σ_q²) − 2c(1+σ_q²)].
pub fn mmd2_spiky(s: &SpikySpec) -> f64 {
    let om = 1.0 - s.w;
    om * om
        * (c_of(2.0, s.sigma_sq) + c_of(2.0 * s.sigma_q_sq, s.sigma_sq)
            - 2.0 * c_of(1.0 + s.sigma_q_sq, s.sigma_sq))
}

/// Population UME²(P, Q; v) for the spiky family:
/// (1−w)² [c(1)e^{−v²/(2(σ²+1))} − c(σ_q²)e^{−v²/(2(σ²+σ_q²))}]².
pub fn ume2_spiky(s: &SpikySpec, v: f64) -> f64 {
    let om = 1.0 - s.w;
    let a = c_of(1.0, s.sigma_sq) * (-v * v / (2.0 * (s.sigma_sq + 1.0))).exp();
    let b = c_of(s.sigma_q_sq, s.sigma_sq) * (-v * v / (2.0 * (s.sigma_sq + s.sigma_q_sq))).exp();
    let diff = a - b;
    om * om * diff * diff
}

/// ∂MMD²/∂σ_q for the spiky family (independent of any witness point):
/// 2σσ_q(1−w)² [ (σ²+1+σ_q²)^{−3/2} − (σ²+2σ_q²)^{−3/2} ].
pub fn sens_mmd(s: &SpikySpec) -> f64 {
    let om = 1.0 - s.w;
    let sigma = s.sigma_sq.sqrt();
    let sigma_q = s.sigma_q_sq.sqrt();
    2.0 * sigma
        * sigma_q
        * om
        * om
        * ((s.sigma_sq + 1.0 + s.sigma_q_sq).powf(-1.5)
            - (s.sigma_sq + 2.0 * s.sigma_q_sq).powf(-1.5))
}

/// ∂UME²(v)/∂σ_q for the spiky family. With u = σ²+σ_q², A and B the two
/// embedding terms of `ume2_spiky`, and dB/dσ_q = B·σ_q·(v²−u)/u²:
/// −2(1−w)²(A−B) · σ_q B (v²−u)/u².
pub fn sens_ume(s: &SpikySpec, v: f64) -> f64 {
    let om = 1.0 - s.w;
    let u = s.sigma_sq + s.sigma_q_sq;
    let sigma_q = s.sigma_q_sq.sqrt();
    let a = c_of(1.0, s.sigma_sq) * (-v * v / (2.0 * (s.sigma_sq + 1.0))).exp();
    let b = c_of(s.sigma_q_sq, s.sigma_sq) * (-v * v / (2.0 * u)).exp();
    -2.0 * om * om * (a - b) * sigma_q * b * (v * v - u) / (u * u)
}

// ───────────────────────── witness-anchored mode guide ─────────────────────────

/// −∇_{m_q} UME² with the witness pinned at the true mode v = m_p, for
/// target/model mixtures sharing a far-away bulk component and differing in
/// one mode of weight ω at m_p (target) vs m_q (model):
///
/// ```text
///     2σ²/(σ²+1)² · ω² · (1−E) · E · (m_p − m_q),
///     E = exp(−(m_p−m_q)²/(2(σ²+1))).
/// ```
///
/// Positive for m_q < m_p (pushes the model mode forward), negative for
/// m_q > m_p (pulls it back), zero at m_q = m_p.
pub fn ume_grad_mq(m_p: f64, m_q: f64, sigma_sq: f64, omega: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::invalid("sigma_sq must be positive"));
    }
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::invalid(format!("omega must be in [0,1], got {omega}")));
    }
    let s = sigma_sq + 1.0;
    let d = m_p - m_q;
    let e = (-d * d / (2.0 * s)).exp();
    Ok(2.0 * sigma_sq / (s * s) * omega * omega * (1.0 - e) * e * d)
}

/// UME² with the witness pinned at v = m_p for the same two-mixture setup:
/// (σ²/(σ²+1)) · ω² · (1−E)². Companion closed form for `ume_grad_mq`,
/// used by its finite-difference checks.
pub fn ume2_at_mode(m_p: f64, m_q: f64, sigma_sq: f64, omega: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::invalid("sigma_sq must be positive"));
    }
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::invalid(format!("omega must be in [0,1], got {omega}")));
    }
    let s = sigma_sq + 1.0;
    let d = m_p - m_q;
    let e = (-d * d / (2.0 * s)).exp();
    let amp = 1.0 - e;
    Ok(sigma_sq / s * omega * omega * amp * amp)
}

// ───────────────────────── training dynamics ─────────────────────────

/// Trade-off weight between the MMD and UME terms. `Infinite` is a mode flag
/// meaning "UME term only", not a numeric value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Finite(f64),
    Infinite,
}

impl Lambda {
    pub fn finite(value: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::invalid(format!(
                "lambda must be finite and >= 0 (got {value}); use Lambda::Infinite for the UME-only mode"
            )));
        }
        Ok(Lambda::Finite(value))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Lambda::Infinite)
    }
}

/// State of the single-Gaussian training system: target P = N(0,1), model
/// Q = N(m_q,1), one witness point v.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynState1G {
    pub m_q: f64,
    pub v: f64,
    pub lambda: Lambda,
    pub sigma_sq: f64,
}

impl DynState1G {
    pub fn new(m_q: f64, v: f64, lambda: Lambda, sigma_sq: f64) -> Result<Self> {
        if !(sigma_sq > 0.0) {
            return Err(Error::invalid("sigma_sq must be positive"));
        }
        Ok(DynState1G {
            m_q,
            v,
            lambda,
            sigma_sq,
        })
    }
}

/// Right-hand side of the single-Gaussian system: returns (dm_q/dt, dv/dt).
///
/// dv/dt = +∇_v UME² (the witness ascends; no λ factor — the printed field),
/// dm_q/dt = −∇_{m_q}[MMD² + λ·UME²], or −∇_{m_q}UME² alone in the
/// UME-only mode. The algebraic arrangement keeps the m_q = 0 line an exact
/// floating-point zero of the field.
pub fn dyn_single_gaussian(state: &DynState1G) -> (f64, f64) {
    let (m_q, v, sigma_sq) = (state.m_q, state.v, state.sigma_sq);
    let s = sigma_sq + 1.0;
    let coef = 2.0 * sigma_sq / (s * s);
    let dm = v - m_q;
    let a = (-(v * v) / s).exp();
    let e1 = (-(dm * dm) / s).exp();
    let e2 = (-(v * v + dm * dm) / (2.0 * s)).exp();

    let dv_dt = coef * (-v * a - dm * e1 + (2.0 * v - m_q) * e2);
    let dmq_ume = -coef * dm * (e1 - e2);

    let dmq_dt = match state.lambda {
        Lambda::Infinite => dmq_ume,
        Lambda::Finite(lambda) => {
            let sp2 = sigma_sq + 2.0;
            let dmq_mmd =
                -2.0 * c_of(2.0, sigma_sq) * (m_q / sp2) * (-m_q * m_q / (2.0 * sp2)).exp();
            dmq_mmd + lambda * dmq_ume
        }
    };
    (dmq_dt, dv_dt)
}

/// Right-hand side of the two-mean mixture system: the model is
/// 0.5·N(m₁,1) + 0.5·N(m₂,1) against a 1D mixture target, with one witness v.
/// Returns (dm₁/dt, dm₂/dt, dv/dt) as the gradient flow of MMD² + λ·UME²
/// (descent in the means, ascent in the witness), computed by
/// Richardson-extrapolated central differences of the closed-form loss.
pub fn dyn_mog1d(
    m1: f64,
    m2: f64,
    v: f64,
    lambda: Lambda,
    sigma_sq: f64,
    target: &GaussianMixture,
) -> Result<(f64, f64, f64)> {
    if target.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: target.dim(),
        });
    }
    if !(sigma_sq > 0.0) {
        return Err(Error::invalid("sigma_sq must be positive"));
    }
    let loss = |m1: f64, m2: f64, v: f64| -> Result<f64> {
        let model = GaussianMixture::new(1, vec![0.5, 0.5], vec![m1, m2], vec![1.0, 1.0])?;
        match lambda {
            Lambda::Infinite => ume2_mixtures(v, target, &model, sigma_sq),
            Lambda::Finite(l) => Ok(mmd2_mixtures(target, &model, sigma_sq)?
                + l * ume2_mixtures(v, target, &model, sigma_sq)?),
        }
    };
    let h = 1e-6;
    let dm1 = -richardson_central(|x| loss(x, m2, v), m1, h)?;
    let dm2 = -richardson_central(|x| loss(m1, x, v), m2, h)?;
    let dv = richardson_central(|x| loss(m1, m2, x), v, h)?;
    Ok((dm1, dm2, dv))
}

/// Richardson-extrapolated central difference:
/// (4·D(h/2) − D(h))/3 with D(h) = (f(x+h) − f(x−h))/(2h).
fn richardson_central<F: FnMut(f64) -> Result<f64>>(mut f: F, x: f64, h: f64) -> Result<f64> {
    let d_h = (f(x + h)? - f(x - h)?) / (2.0 * h);
    let d_h2 = (f(x + 0.5 * h)? - f(x - 0.5 * h)?) / h;
    Ok((4.0 * d_h2 - d_h) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn gauss_integral_examples() {
        close(gauss_integral(0.0, 2.0, 0.0, 2.0).unwrap(), (0.5f64).sqrt(), 1e-12);
        // a = c: exponential factor is exp(0) = 1
        close(gauss_integral(1.7, 0.3, 1.7, 2.5).unwrap(), (0.3 * 2.5 / 5.6f64).sqrt(), 1e-12);
        close(
            gauss_integral(0.0, 1.0, 1.0, 1.0).unwrap(),
            0.5 * (-0.5f64).exp(),
            1e-12,
        );
        assert!(gauss_integral(0.0, -1.0, 0.0, 1.0).is_err());
        assert!(gauss_integral(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn mean_embedding_examples() {
        // v = m_p: exponent zero
        close(mean_embedding_gauss(0.3, 0.3, 1.0, 1.0).unwrap(), (0.5f64).sqrt(), 1e-14);
        close(mean_embedding_gauss(0.0, 0.0, 1.0, 1.0).unwrap(), 0.707107, 1e-6);
        close(
            mean_embedding_gauss(2.0, 0.0, 1.0, 1.0).unwrap(),
            (0.5f64).sqrt() * (-1.0f64).exp(),
            1e-12,
        );
    }

    #[test]
    fn mixture_embedding_linearity() {
        let single = GaussianMixture::single_1d(0.4, 1.3).unwrap();
        close(
            mean_embedding_mixture(0.9, &single, 1.1).unwrap(),
            mean_embedding_gauss(0.9, 0.4, 1.3, 1.1).unwrap(),
            1e-15,
        );
        let two = GaussianMixture::new(1, vec![0.5, 0.5], vec![-1.0, 1.0], vec![1.0, 1.0]).unwrap();
        close(
            mean_embedding_mixture(0.0, &two, 1.0).unwrap(),
            (0.5f64).sqrt() * (-0.25f64).exp(),
            1e-12,
        );
        // 6-decimal reference value from an independent quadrature oracle
        close(mean_embedding_mixture(0.0, &two, 1.0).unwrap(), 0.550695, 1e-6);
    }

    #[test]
    fn ume2_two_gaussians_examples() {
        // P = Q
        close(ume2_two_gaussians(0.7, 0.5, 1.2, 0.5, 1.2, 1.0).unwrap(), 0.0, 1e-18);
        let v = ume2_two_gaussians(0.0, 0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let expect = {
            let d = (0.5f64).sqrt() * (1.0 - (-0.25f64).exp());
            d * d
        };
        close(v, expect, 1e-14);
        // 6-decimal reference value from an independent quadrature oracle
        close(v, 0.024465, 1e-6);
    }

    #[test]
    fn mmd2_consistency_between_routes() {
        // general two-Gaussian route vs the unit-variance shorthand
        for mq in [0.0, 0.3, 1.0, 2.5] {
            for s2 in [0.5, 1.0, 2.0] {
                let general = mmd2_two_gaussians(0.0, 1.0, mq, 1.0, s2).unwrap();
                let c2 = c_of(2.0, s2);
                let shorthand = 2.0 * c2 * (1.0 - (-mq * mq / (2.0 * (s2 + 2.0))).exp());
                close(general, shorthand, 1e-14);
            }
        }
    }

    #[test]
    fn mmd2_mixtures_reduces_to_two_gaussians() {
        let p = GaussianMixture::single_1d(0.0, 1.0).unwrap();
        let q = GaussianMixture::single_1d(1.0, 1.0).unwrap();
        close(
            mmd2_mixtures(&p, &q, 1.0).unwrap(),
            mmd2_two_gaussians(0.0, 1.0, 1.0, 1.0, 1.0).unwrap(),
            1e-15,
        );
    }

    #[test]
    fn spiky_degenerate_cases_vanish() {
        let w1 = SpikySpec::new(1.0, 0.01, 1.0).unwrap();
        assert_eq!(mmd2_spiky(&w1), 0.0);
        assert_eq!(ume2_spiky(&w1, 0.3), 0.0);
        let sq1 = SpikySpec::new(0.4, 1.0, 1.0).unwrap();
        close(mmd2_spiky(&sq1), 0.0, 1e-16);
        close(ume2_spiky(&sq1, 0.7), 0.0, 1e-16);
        // sens_ume vanishes at σ_q² = 1 because the (A − B) factor is zero
        close(sens_ume(&sq1, 0.7), 0.0, 1e-16);
    }

    #[test]
    fn spiky_against_mixture_route() {
        let s = SpikySpec::new(0.9, 0.01, 1.0).unwrap();
        let p = GaussianMixture::new(1, vec![0.9, 0.1], vec![0.0, 0.0], vec![1.0, 0.01]).unwrap();
        let q = GaussianMixture::single_1d(0.0, 1.0).unwrap();
        close(mmd2_spiky(&s), mmd2_mixtures(&p, &q, 1.0).unwrap(), 1e-14);
        assert!(mmd2_spiky(&s) > 0.0);
        for v in [0.0, 0.3, 1.5] {
            close(ume2_spiky(&s, v), ume2_mixtures(v, &p, &q, 1.0).unwrap(), 1e-14);
        }
    }

    #[test]
    fn sens_mmd_ignores_witness_and_matches_fd() {
        let s = SpikySpec::new(0.5, 0.25, 1.0).unwrap();
        // no v parameter exists; value fixed by the spec of the function
        let d = sens_mmd(&s);
        let h = 1e-6;
        let sq = |t: f64| SpikySpec::new(0.5, t * t, 1.0).unwrap();
        let fd = (mmd2_spiky(&sq(0.5 + h)) - mmd2_spiky(&sq(0.5 - h))) / (2.0 * h);
        close(d, fd, 1e-9);
    }

    #[test]
    fn sens_ume_matches_fd() {
        let s = SpikySpec::new(0.5, 0.25, 1.0).unwrap();
        let v = 0.3;
        let d = sens_ume(&s, v);
        let h = 1e-6;
        let sq = |t: f64| SpikySpec::new(0.5, t * t, 1.0).unwrap();
        let fd = (ume2_spiky(&sq(0.5 + h), v) - ume2_spiky(&sq(0.5 - h), v)) / (2.0 * h);
        close(d, fd, 1e-9);
    }

    #[test]
    fn ume_grad_mq_sign_pattern() {
        assert_eq!(ume_grad_mq(1.0, 1.0, 1.0, 0.5).unwrap(), 0.0);
        assert!(ume_grad_mq(1.0, 0.0, 1.0, 0.5).unwrap() > 0.0);
        assert!(ume_grad_mq(1.0, 2.0, 1.0, 0.5).unwrap() < 0.0);
    }

    #[test]
    fn ume_grad_mq_matches_fd_of_companion_form() {
        let h = 1e-6;
        for mq in [0.2, 0.8, 1.4, 1.9] {
            let g = ume_grad_mq(1.0, mq, 1.0, 0.5).unwrap();
            let fd = -(ume2_at_mode(1.0, mq + h, 1.0, 0.5).unwrap()
                - ume2_at_mode(1.0, mq - h, 1.0, 0.5).unwrap())
                / (2.0 * h);
            assert!((g - fd).abs() / fd.abs().max(1e-12) < 1e-6, "mq={mq}: {g} vs {fd}");
        }
    }

    #[test]
    fn ume_grad_mq_odd_around_true_mode() {
        for delta in [0.1, 0.5, 1.0] {
            let plus = ume_grad_mq(1.0, 1.0 + delta, 1.0, 0.5).unwrap();
            let minus = ume_grad_mq(1.0, 1.0 - delta, 1.0, 0.5).unwrap();
            close(plus, -minus, 1e-10);
        }
    }

    #[test]
    fn single_gaussian_field_is_exactly_zero_on_equilibrium_line() {
        for v in [-3.0, -1.2, 0.0, 0.4, 0.9, 2.7] {
            for lambda in [Lambda::Finite(0.0), Lambda::Finite(5.0), Lambda::Infinite] {
                let st = DynState1G::new(0.0, v, lambda, 1.3).unwrap();
                let (dmq, dv) = dyn_single_gaussian(&st);
                assert_eq!(dmq, 0.0, "dm_q at v={v}");
                assert_eq!(dv, 0.0, "dv at v={v}");
            }
        }
    }

    #[test]
    fn single_gaussian_ume_term_vanishes_when_witness_sits_on_model_mean() {
        // v = m_q ≠ 0: the (v−m_q) factor kills the UME part of dm_q/dt;
        // the MMD part still pulls toward zero.
        let st = DynState1G::new(0.8, 0.8, Lambda::Infinite, 1.0).unwrap();
        let (dmq, _) = dyn_single_gaussian(&st);
        assert_eq!(dmq, 0.0);
        let st = DynState1G::new(0.8, 0.8, Lambda::Finite(5.0), 1.0).unwrap();
        let (dmq, _) = dyn_single_gaussian(&st);
        assert!(dmq < 0.0);
    }

    #[test]
    fn single_gaussian_lambda_zero_equals_pure_mmd_gradient() {
        let st = DynState1G::new(1.0, 0.3, Lambda::Finite(0.0), 1.0).unwrap();
        let (dmq, _) = dyn_single_gaussian(&st);
        let h = 1e-6;
        let fd = -(mmd2_two_gaussians(0.0, 1.0, 1.0 + h, 1.0, 1.0).unwrap()
            - mmd2_two_gaussians(0.0, 1.0, 1.0 - h, 1.0, 1.0).unwrap())
            / (2.0 * h);
        close(dmq, fd, 1e-9);
    }

    #[test]
    fn mog1d_equilibrium_and_symmetry() {
        let target =
            GaussianMixture::new(1, vec![0.5, 0.5], vec![-1.5, 1.5], vec![1.0, 1.0]).unwrap();
        // matched model: all rates vanish
        let (d1, d2, dv) =
            dyn_mog1d(-1.5, 1.5, 0.3, Lambda::Finite(5.0), 1.0, &target).unwrap();
        assert!(d1.abs() < 1e-8 && d2.abs() < 1e-8 && dv.abs() < 1e-8);
        // symmetric state: dm1 = −dm2
        let (d1, d2, _) = dyn_mog1d(-0.7, 0.7, 0.0, Lambda::Finite(5.0), 1.0, &target).unwrap();
        assert!((d1 + d2).abs() < 1e-8, "{d1} vs {d2}");
    }

    #[test]
    fn mog1d_lambda_zero_freezes_witness_and_decouples() {
        let target =
            GaussianMixture::new(1, vec![0.5, 0.5], vec![-1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let (d1a, d2a, dv) = dyn_mog1d(-0.4, 1.1, 0.9, Lambda::Finite(0.0), 1.0, &target).unwrap();
        assert_eq!(dv, 0.0);
        // moving the witness changes nothing at λ = 0
        let (d1b, d2b, _) = dyn_mog1d(-0.4, 1.1, -2.3, Lambda::Finite(0.0), 1.0, &target).unwrap();
        assert_eq!(d1a, d1b);
        assert_eq!(d2a, d2b);
    }
}
