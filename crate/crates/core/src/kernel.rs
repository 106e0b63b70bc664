//! Parametric positive-definite kernels.
//!
//! Both supported families are radial: they depend on `x` and `y` only
//! through `r² = ‖x − y‖²`, so evaluation and every derivative route through
//! a single scalar profile `ψ(r²)`:
//!
//! ```text
//!     gaussian:  ψ(r²) = exp(−r² / (2σ²))            σ² > 0
//!     imq:       ψ(r²) = (c² + r²)^b                 c > 0, b < 0
//! ```
//!
//! The bandwidth is stored as σ² (not σ) because every closed form downstream
//! is written in terms of σ². Gradients follow from the chain rule:
//!
//! ```text
//!     ∇_x k(x,y)  = 2 (x − y) ψ′(r²)
//!     ∂k/∂σ²      = exp(−r²/(2σ²)) · r² / (2σ⁴)      (gaussian only)
//! ```

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// Gaussian RBF with bandwidth σ² > 0.
    Gaussian { bandwidth_sq: f64 },
    /// Inverse multiquadric (c² + r²)^b with c > 0, b < 0.
    Imq { c: f64, b: f64 },
}

impl KernelSpec {
    pub fn gaussian(bandwidth_sq: f64) -> Result<Self> {
        if !(bandwidth_sq > 0.0) || !bandwidth_sq.is_finite() {
            return Err(Error::invalid(format!(
                "gaussian bandwidth_sq must be positive and finite, got {bandwidth_sq}"
            )));
        }
        Ok(KernelSpec::Gaussian { bandwidth_sq })
    }

    pub fn imq(c: f64, b: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!("imq c must be positive, got {c}")));
        }
        if !(b < 0.0) || !b.is_finite() {
            return Err(Error::invalid(format!("imq b must be negative, got {b}")));
        }
        Ok(KernelSpec::Imq { c, b })
    }

    /// Radial profile ψ(r²).
    #[inline]
    pub fn psi(&self, r2: f64) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth_sq } => (-r2 / (2.0 * bandwidth_sq)).exp(),
            KernelSpec::Imq { c, b } => (c * c + r2).powf(b),
        }
    }

    /// Profile derivative dψ/d(r²).
    #[inline]
    pub fn dpsi_dr2(&self, r2: f64) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth_sq } => {
                -(-r2 / (2.0 * bandwidth_sq)).exp() / (2.0 * bandwidth_sq)
            }
            KernelSpec::Imq { c, b } => b * (c * c + r2).powf(b - 1.0),
        }
    }

    /// k(x, y) = ψ(‖x − y‖²).
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x, y)?;
        Ok(self.psi(sq_dist(x, y)))
    }

    /// ∇_x k(x, y); antisymmetric in (x, y) for these radial families.
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        check_dims(x, y)?;
        let dpsi = self.dpsi_dr2(sq_dist(x, y));
        Ok(x.iter()
            .zip(y)
            .map(|(xi, yi)| 2.0 * (xi - yi) * dpsi)
            .collect())
    }

    /// Writes ∇_x k(x, y) into `out` without allocating.
    pub fn grad_x_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), y.len());
        debug_assert_eq!(x.len(), out.len());
        let dpsi = self.dpsi_dr2(sq_dist(x, y));
        for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
            *o = 2.0 * (xi - yi) * dpsi;
        }
    }

    /// ∂k/∂σ² for the gaussian family.
    pub fn grad_bandwidth(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x, y)?;
        match *self {
            KernelSpec::Gaussian { bandwidth_sq } => {
                let r2 = sq_dist(x, y);
                Ok((-r2 / (2.0 * bandwidth_sq)).exp() * r2 / (2.0 * bandwidth_sq * bandwidth_sq))
            }
            KernelSpec::Imq { .. } => Err(Error::UnsupportedKernel(
                "bandwidth gradient is defined for the gaussian family only",
            )),
        }
    }

    pub fn bandwidth_sq(&self) -> Option<f64> {
        match *self {
            KernelSpec::Gaussian { bandwidth_sq } => Some(bandwidth_sq),
            KernelSpec::Imq { .. } => None,
        }
    }

    /// Same family with a different bandwidth; error for non-gaussian.
    pub fn with_bandwidth_sq(&self, bandwidth_sq: f64) -> Result<Self> {
        match *self {
            KernelSpec::Gaussian { .. } => KernelSpec::gaussian(bandwidth_sq),
            KernelSpec::Imq { .. } => Err(Error::UnsupportedKernel(
                "bandwidth applies to the gaussian family only",
            )),
        }
    }
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(xi, yi)| {
            let d = xi - yi;
            d * d
        })
        .sum()
}

fn check_dims(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(())
}
