//! Synthetic Gaussian-mixture targets.
//!
//! Mixtures are 1D or 2D with isotropic components:
//!
//! ```text
//!     p(x) = Σ_j w_j · N(x | m_j, σ_j² I),   w_j ≥ 0,  Σ_j w_j = 1
//! ```
//!
//! [`build_ring_mogmm`] constructs the ring-of-rings benchmark: an outer ring
//! of cluster centers around the origin, each carrying its own inner ring of
//! Gaussian components — a mixture of Gaussian mixture models whose modes are
//! well separated and easy to count.

use crate::error::{Error, Result};
use crate::samples::Samples;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    /// Component means, one row per component.
    means: Samples,
    /// Isotropic per-component variances.
    variances: Vec<f64>,
    /// Cumulative weights for categorical sampling.
    cumulative: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(
        dim: usize,
        weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(format!("mixture dim must be 1 or 2, got {dim}")));
        }
        let k = weights.len();
        if k == 0 {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        if variances.len() != k || means.len() != k * dim {
            return Err(Error::invalid(format!(
                "component count mismatch: {k} weights, {} variances, {} mean coords (dim {dim})",
                variances.len(),
                means.len()
            )));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::invalid("mixture weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() >= 1e-12 {
            return Err(Error::invalid(format!(
                "mixture weights must sum to 1 (got {total:.15})"
            )));
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("component variances must be positive"));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("component means must be finite"));
        }
        let mut cumulative = Vec::with_capacity(k);
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        // guard against rounding: the last bin must cover u → 1⁻
        *cumulative.last_mut().expect("nonempty") = 1.0;
        Ok(GaussianMixture {
            dim,
            weights,
            means: Samples::new(means, dim)?,
            variances,
            cumulative,
        })
    }

    /// Single 1D Gaussian N(mean, var).
    pub fn single_1d(mean: f64, var: f64) -> Result<Self> {
        GaussianMixture::new(1, vec![1.0], vec![mean], vec![var])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, j: usize) -> &[f64] {
        self.means.row(j)
    }

    pub fn means(&self) -> &Samples {
        &self.means
    }

    pub fn variance(&self, j: usize) -> f64 {
        self.variances[j]
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Mixture density Σ_j w_j N(x | m_j, σ_j² I).
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut p = 0.0;
        for j in 0..self.n_components() {
            let var = self.variances[j];
            let r2 = crate::kernel::sq_dist(x, self.means.row(j));
            let norm = (2.0 * std::f64::consts::PI * var).powi(self.dim as i32).sqrt();
            p += self.weights[j] * (-r2 / (2.0 * var)).exp() / norm;
        }
        Ok(p)
    }

    /// Draws `n` samples; returns the sample matrix and per-row component
    /// indices. Component chosen categorically, then an isotropic Gaussian
    /// draw around its mean. Deterministic given the generator state.
    pub fn sample_with_components<R: Rng>(&self, n: usize, rng: &mut R) -> (Samples, Vec<usize>) {
        let mut out = Samples::zeros(n, self.dim);
        let mut comps = Vec::with_capacity(n);
        for i in 0..n {
            let u: f64 = rng.random();
            let j = self
                .cumulative
                .iter()
                .position(|c| u < *c)
                .unwrap_or(self.n_components() - 1);
            let sd = self.variances[j].sqrt();
            let mean = self.means.row(j).to_vec();
            let row = out.row_mut(i);
            for (c, m) in row.iter_mut().zip(&mean) {
                let z: f64 = rng.sample(StandardNormal);
                *c = m + sd * z;
            }
            comps.push(j);
        }
        (out, comps)
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Samples {
        self.sample_with_components(n, rng).0
    }
}

/// Layout of the ring-of-rings mixture: `outer_count` cluster centers equally
/// spaced on the circle of radius `outer_radius` around the origin (first at
/// angle 0), each surrounded by `inner_count` components equally spaced on a
/// circle of radius `inner_radius` (first at angle 0 relative to its center).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingMogmmSpec {
    pub outer_count: usize,
    pub inner_count: usize,
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub component_variance: f64,
}

impl Default for RingMogmmSpec {
    fn default() -> Self {
        RingMogmmSpec {
            outer_count: 5,
            inner_count: 3,
            outer_radius: 4.0,
            inner_radius: 1.0,
            component_variance: 0.05 * 0.05,
        }
    }
}

/// Builds the 2D ring-of-rings mixture with uniform component weights.
pub fn build_ring_mogmm(spec: &RingMogmmSpec) -> Result<GaussianMixture> {
    if spec.outer_count < 1 || spec.inner_count < 1 {
        return Err(Error::invalid("ring counts must be >= 1"));
    }
    if !(spec.inner_radius < spec.outer_radius) {
        return Err(Error::invalid(format!(
            "inner radius {} must be smaller than outer radius {}",
            spec.inner_radius, spec.outer_radius
        )));
    }
    if !(spec.outer_radius > 0.0) || !(spec.inner_radius > 0.0) {
        return Err(Error::invalid("ring radii must be positive"));
    }
    let k = spec.outer_count * spec.inner_count;
    let w = 1.0 / k as f64;
    let mut means = Vec::with_capacity(2 * k);
    for o in 0..spec.outer_count {
        let phi = 2.0 * std::f64::consts::PI * o as f64 / spec.outer_count as f64;
        let (cx, cy) = (spec.outer_radius * phi.cos(), spec.outer_radius * phi.sin());
        for i in 0..spec.inner_count {
            let psi = 2.0 * std::f64::consts::PI * i as f64 / spec.inner_count as f64;
            means.push(cx + spec.inner_radius * psi.cos());
            means.push(cy + spec.inner_radius * psi.sin());
        }
    }
    GaussianMixture::new(2, vec![w; k], means, vec![spec.component_variance; k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_normal_density_values() {
        let m = GaussianMixture::single_1d(0.0, 1.0).unwrap();
        let p0 = m.density(&[0.0]).unwrap();
        assert!((p0 - 0.398942).abs() < 1e-6);
        let p1 = m.density(&[1.0]).unwrap();
        assert!((p1 - 0.241971).abs() < 1e-6);
    }

    #[test]
    fn degenerate_two_component_mixture_equals_single() {
        let one = GaussianMixture::single_1d(0.3, 0.8).unwrap();
        let two =
            GaussianMixture::new(1, vec![0.5, 0.5], vec![0.3, 0.3], vec![0.8, 0.8]).unwrap();
        for x in [-2.0, -0.5, 0.0, 0.3, 1.7] {
            let a = one.density(&[x]).unwrap();
            let b = two.density(&[x]).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn invariants_enforced() {
        assert!(GaussianMixture::new(1, vec![0.5, 0.4], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(GaussianMixture::new(1, vec![1.0], vec![0.0], vec![0.0]).is_err());
        assert!(GaussianMixture::new(1, vec![-0.5, 1.5], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(GaussianMixture::new(3, vec![1.0], vec![0.0, 0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn sampling_shape_and_tight_variance() {
        let m = GaussianMixture::single_1d(2.0, 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (s, comps) = m.sample_with_components(100, &mut rng);
        assert_eq!(s.n(), 100);
        assert_eq!(s.dim(), 1);
        assert!(comps.iter().all(|&c| c == 0));
        // 6-sigma bound at sd = 1e-6
        assert!(s.data().iter().all(|x| (x - 2.0).abs() < 1e-5));
    }

    #[test]
    fn sample_mean_matches_clt_bound() {
        let m = GaussianMixture::single_1d(3.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let s = m.sample(n, &mut rng);
        let mean: f64 = s.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 3.0).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn ring_counts_weights_and_centroid() {
        let spec = RingMogmmSpec::default();
        let m = build_ring_mogmm(&spec).unwrap();
        assert_eq!(m.n_components(), 15);
        assert!(m.weights().iter().all(|w| (w - 1.0 / 15.0).abs() < 1e-15));
        let (mut cx, mut cy) = (0.0, 0.0);
        for j in 0..15 {
            cx += m.mean(j)[0];
            cy += m.mean(j)[1];
        }
        assert!(cx.abs() / 15.0 < 1e-12);
        assert!(cy.abs() / 15.0 < 1e-12);
    }

    #[test]
    fn degenerate_ring_lands_on_axis() {
        let spec = RingMogmmSpec {
            outer_count: 1,
            inner_count: 1,
            outer_radius: 4.0,
            inner_radius: 1.0,
            component_variance: 0.01,
        };
        let m = build_ring_mogmm(&spec).unwrap();
        assert_eq!(m.n_components(), 1);
        assert!((m.mean(0)[0] - 5.0).abs() < 1e-12);
        assert!(m.mean(0)[1].abs() < 1e-12);
    }

    #[test]
    fn sampling_respects_weights() {
        let m = GaussianMixture::new(
            1,
            vec![0.2, 0.8],
            vec![-10.0, 10.0],
            vec![0.01, 0.01],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, comps) = m.sample_with_components(10_000, &mut rng);
        let frac1 = comps.iter().filter(|&&c| c == 1).count() as f64 / 10_000.0;
        // 3-sigma binomial bound around 0.8
        assert!((frac1 - 0.8).abs() < 3.0 * (0.8f64 * 0.2 / 10_000.0).sqrt());
    }
}
