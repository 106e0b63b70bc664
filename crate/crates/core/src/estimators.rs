//! Sample-based discrepancy estimators: MMD² (V- and U-statistic forms) and
//! the witness-point statistic UME², with analytic gradients for training.
//!
//! ```text
//!     mmd2_biased   = (1/n²)ΣΣ k(x,x′) + (1/m²)ΣΣ k(y,y′) − (2/nm)ΣΣ k(x,y)
//!     mmd2_unbiased = same with diagonal-excluded U-statistics on the
//!                     within-sample sums (may be negative)
//!     ume2_hat      = (1/J) Σ_j ŵ(v_j)²,
//!     ŵ(t)          = (1/n)Σ_i k(x_i,t) − (1/m)Σ_l k(y_l,t)
//! ```
//!
//! # Determinism contract
//!
//! Every estimator sorts its sample matrices lexicographically before
//! summing and then accumulates in a fixed index-sequential order, so
//! permuting input rows changes nothing — bitwise. The within-sample and
//! cross sums share one decomposition,
//!
//! ```text
//!     within(A)    = Σ_i k(a_i,a_i) + 2·Σ_{i<j} k(a_i,a_j)
//!     cross(X,Y)   = Σ_i k(x_i,y_i) + Σ_{i<j} [k(x_i,y_j) + k(x_j,y_i)]   (n = m)
//! ```
//!
//! whose chains agree term-for-term when X = Y (each bracket is then an exact
//! doubling), which makes `mmd2_biased(X, X) = 0` and `ume2_hat(X, X) = 0`
//! hold exactly in floating point, not merely to a tolerance. Any change to
//! the summation order must preserve this pairing.
//!
//! # Large-sample fast path
//!
//! For the Gaussian kernel in 1 or 2 dimensions, blocks with enough terms
//! switch to an 8-lane vectorized exponential (exp(x) = 2^(x·log₂e) with a
//! round-to-int magic constant, a degree-10 polynomial for the fractional
//! part, and exponent-field assembly; relative error < 1e-12). Lane results
//! are still folded into the accumulator one at a time in index order, so
//! the determinism contract is unaffected. Small blocks and non-Gaussian
//! kernels use the scalar libm path with the identical summation structure.

use crate::error::{Error, Result};
use crate::kernel::{sq_dist, KernelSpec};
use crate::samples::Samples;
use rand::Rng;

/// Witness points V = {v_1, …, v_J} at which the witness function is probed.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSet {
    points: Samples,
}

impl WitnessSet {
    pub fn new(points: Samples) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySamples("witness set"));
        }
        Ok(WitnessSet { points })
    }

    pub fn n(&self) -> usize {
        self.points.n()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        self.points.row(j)
    }

    pub fn points(&self) -> &Samples {
        &self.points
    }

    /// Mutable access for witness-ascent updates.
    pub fn points_mut(&mut self) -> &mut Samples {
        &mut self.points
    }
}

/// Which MMD² estimator a training run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmdVariant {
    Biased,
    Unbiased,
}

// ───────────────────────── public estimators ─────────────────────────

/// Biased V-statistic MMD² estimate; ≥ 0 for positive-definite kernels and
/// exactly 0 when X and Y are the same multiset.
pub fn mmd2_biased(x: &Samples, y: &Samples, k: &KernelSpec) -> Result<f64> {
    check_pair(x, y)?;
    let xs = sorted_copy(x);
    let ys = sorted_copy(y);
    let (dx, cx) = within_parts(&xs, k);
    let (dy, cy) = within_parts(&ys, k);
    let sxx = dx + 2.0 * cx;
    let syy = dy + 2.0 * cy;
    let sxy = if xs.n() == ys.n() {
        cross_sum_square(&xs, &ys, k)
    } else {
        cross_sum_full(&xs, &ys, k)
    };
    let nf = xs.n() as f64;
    let mf = ys.n() as f64;
    let txx = sxx / (nf * nf);
    let tyy = syy / (mf * mf);
    let txy = sxy / (nf * mf);
    Ok(txx + tyy - 2.0 * txy)
}

/// Unbiased U-statistic MMD² estimate (diagonal-excluded within-sample
/// sums); may be negative. Requires n, m ≥ 2.
pub fn mmd2_unbiased(x: &Samples, y: &Samples, k: &KernelSpec) -> Result<f64> {
    check_pair(x, y)?;
    if x.n() < 2 || y.n() < 2 {
        return Err(Error::invalid(format!(
            "unbiased MMD² needs at least 2 samples per side (got n={}, m={})",
            x.n(),
            y.n()
        )));
    }
    let xs = sorted_copy(x);
    let ys = sorted_copy(y);
    let (_, cx) = within_parts(&xs, k);
    let (_, cy) = within_parts(&ys, k);
    let sxy = if xs.n() == ys.n() {
        cross_sum_square(&xs, &ys, k)
    } else {
        cross_sum_full(&xs, &ys, k)
    };
    let nf = xs.n() as f64;
    let mf = ys.n() as f64;
    Ok(2.0 * cx / (nf * (nf - 1.0)) + 2.0 * cy / (mf * (mf - 1.0)) - 2.0 * sxy / (nf * mf))
}

/// Dispatch on the estimator variant.
pub fn mmd2(x: &Samples, y: &Samples, k: &KernelSpec, variant: MmdVariant) -> Result<f64> {
    match variant {
        MmdVariant::Biased => mmd2_biased(x, y, k),
        MmdVariant::Unbiased => mmd2_unbiased(x, y, k),
    }
}

/// UME² statistic over the witness set: (1/J)Σ_j ŵ(v_j)². Exactly 0 when
/// X and Y are the same multiset.
pub fn ume2_hat(x: &Samples, y: &Samples, v: &WitnessSet, k: &KernelSpec) -> Result<f64> {
    check_pair(x, y)?;
    if v.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: v.dim(),
        });
    }
    let xs = sorted_copy(x);
    let ys = sorted_copy(y);
    let nf = xs.n() as f64;
    let mf = ys.n() as f64;
    let mut acc = 0.0;
    for j in 0..v.n() {
        let w = col_sum(&xs, v.point(j), k) / nf - col_sum(&ys, v.point(j), k) / mf;
        acc += w * w;
    }
    Ok(acc / v.n() as f64)
}

/// Empirical witness function ŵ(t) = μ̂_P(t) − μ̂_Q(t) at a single point.
pub fn witness_fn_eval(x: &Samples, y: &Samples, k: &KernelSpec, t: &[f64]) -> Result<f64> {
    let pts = Samples::new(t.to_vec(), t.len())?;
    Ok(witness_fn_eval_batch(x, y, k, &pts)?[0])
}

/// ŵ evaluated at every row of `t` (sorts X and Y once; preferred for many
/// probe points).
pub fn witness_fn_eval_batch(
    x: &Samples,
    y: &Samples,
    k: &KernelSpec,
    t: &Samples,
) -> Result<Vec<f64>> {
    check_pair(x, y)?;
    if t.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: t.dim(),
        });
    }
    let xs = sorted_copy(x);
    let ys = sorted_copy(y);
    let nf = xs.n() as f64;
    let mf = ys.n() as f64;
    Ok((0..t.n())
        .map(|i| col_sum(&xs, t.row(i), k) / nf - col_sum(&ys, t.row(i), k) / mf)
        .collect())
}

// ───────────────────────── analytic gradients ─────────────────────────

/// ∇_{v_j} ume2_hat as a J×d matrix:
/// (2/J)·ŵ(v_j)·[(1/n)Σ_i ∇_v k(x_i,v_j) − (1/m)Σ_l ∇_v k(y_l,v_j)].
pub fn grad_ume2_wrt_witness(
    x: &Samples,
    y: &Samples,
    v: &WitnessSet,
    k: &KernelSpec,
) -> Result<Samples> {
    check_pair(x, y)?;
    if v.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: v.dim(),
        });
    }
    let d = x.dim();
    let nf = x.n() as f64;
    let mf = y.n() as f64;
    let jf = v.n() as f64;
    let mut out = Samples::zeros(v.n(), d);
    let mut g = vec![0.0; d];
    for j in 0..v.n() {
        let vj = v.point(j);
        let w = col_sum_unsorted(x, vj, k) / nf - col_sum_unsorted(y, vj, k) / mf;
        let mut mean_grad = vec![0.0; d];
        for i in 0..x.n() {
            k.grad_x_into(vj, x.row(i), &mut g);
            for c in 0..d {
                mean_grad[c] += g[c] / nf;
            }
        }
        for l in 0..y.n() {
            k.grad_x_into(vj, y.row(l), &mut g);
            for c in 0..d {
                mean_grad[c] -= g[c] / mf;
            }
        }
        let row = out.row_mut(j);
        for c in 0..d {
            row[c] = 2.0 / jf * w * mean_grad[c];
        }
    }
    Ok(out)
}

/// ∇_{y_l} of the chosen MMD² estimator as an m×d matrix. For the biased
/// V-statistic: (2/m²)Σ_j ∇₁k(y_l,y_j) − (2/nm)Σ_i ∇₁k(y_l,x_i); the
/// unbiased form replaces the first coefficient by 2/(m(m−1)) and skips
/// j = l.
pub fn grad_mmd2_wrt_y(
    x: &Samples,
    y: &Samples,
    k: &KernelSpec,
    variant: MmdVariant,
) -> Result<Samples> {
    check_pair(x, y)?;
    if variant == MmdVariant::Unbiased && y.n() < 2 {
        return Err(Error::invalid("unbiased MMD² gradient needs m >= 2"));
    }
    let d = x.dim();
    let nf = x.n() as f64;
    let mf = y.n() as f64;
    let yy_coef = match variant {
        MmdVariant::Biased => 2.0 / (mf * mf),
        MmdVariant::Unbiased => 2.0 / (mf * (mf - 1.0)),
    };
    let mut out = Samples::zeros(y.n(), d);
    let mut g = vec![0.0; d];
    if variant == MmdVariant::Biased && x.n() == y.n() {
        // equal coefficients on both sides: combine each within/cross term
        // pair before it reaches the accumulator, so that X = Y (bitwise)
        // yields an exactly zero gradient
        let coef = 2.0 / (nf * mf);
        let mut gx = vec![0.0; d];
        for l in 0..y.n() {
            let yl = y.row(l);
            let row_out = out.row_mut(l);
            for j in 0..y.n() {
                k.grad_x_into(yl, y.row(j), &mut g);
                k.grad_x_into(yl, x.row(j), &mut gx);
                for c in 0..d {
                    row_out[c] += coef * (g[c] - gx[c]);
                }
            }
        }
        return Ok(out);
    }
    for l in 0..y.n() {
        let yl = y.row(l);
        let row_out = out.row_mut(l);
        for j in 0..y.n() {
            if variant == MmdVariant::Unbiased && j == l {
                continue;
            }
            k.grad_x_into(yl, y.row(j), &mut g);
            for c in 0..d {
                row_out[c] += yy_coef * g[c];
            }
        }
        for i in 0..x.n() {
            k.grad_x_into(yl, x.row(i), &mut g);
            for c in 0..d {
                row_out[c] -= 2.0 / (nf * mf) * g[c];
            }
        }
    }
    Ok(out)
}

/// ∇_{y_l} ume2_hat as an m×d matrix:
/// −(2/(mJ))Σ_j ŵ(v_j)·∇₁k(y_l,v_j).
pub fn grad_ume2_wrt_y(
    x: &Samples,
    y: &Samples,
    v: &WitnessSet,
    k: &KernelSpec,
) -> Result<Samples> {
    check_pair(x, y)?;
    if v.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: v.dim(),
        });
    }
    let d = x.dim();
    let nf = x.n() as f64;
    let mf = y.n() as f64;
    let jf = v.n() as f64;
    let w: Vec<f64> = (0..v.n())
        .map(|j| col_sum_unsorted(x, v.point(j), k) / nf - col_sum_unsorted(y, v.point(j), k) / mf)
        .collect();
    let mut out = Samples::zeros(y.n(), d);
    let mut g = vec![0.0; d];
    for l in 0..y.n() {
        let yl = y.row(l);
        let row_out = out.row_mut(l);
        for j in 0..v.n() {
            k.grad_x_into(yl, v.point(j), &mut g);
            for c in 0..d {
                row_out[c] -= 2.0 / (mf * jf) * w[j] * g[c];
            }
        }
    }
    Ok(out)
}

// ───────────────────────── bootstrap standard errors ─────────────────────────

/// Standard error of `mmd2_biased` by a score bootstrap: the estimator is
/// linearized through its influence scores ±2ŵ(·), the scores are evaluated
/// on a without-replacement subsample of each side (an iid draw from the
/// score distribution), their resampled-mean variance is estimated by a
/// nonparametric bootstrap, and the variance is rescaled from the subsample
/// size to the full sample size. The dropped quadratic remainder is O(1/n).
pub fn mmd2_score_bootstrap_se<R: Rng + ?Sized>(
    x: &Samples,
    y: &Samples,
    k: &KernelSpec,
    subsample: usize,
    resamples: usize,
    rng: &mut R,
) -> Result<f64> {
    check_pair(x, y)?;
    if subsample < 2 || resamples < 2 {
        return Err(Error::invalid("score bootstrap needs subsample >= 2 and resamples >= 2"));
    }
    let mp = subsample.min(x.n());
    let mq = subsample.min(y.n());
    let sub_p = subsample_rows(x, mp, rng);
    let sub_q = subsample_rows(y, mq, rng);
    let wp = witness_fn_eval_batch(x, y, k, &sub_p)?;
    let wq = witness_fn_eval_batch(x, y, k, &sub_q)?;
    let vp = boot_var_of_mean(&wp, resamples, rng);
    let vq = boot_var_of_mean(&wq, resamples, rng);
    let scale_p = mp as f64 / x.n() as f64;
    let scale_q = mq as f64 / y.n() as f64;
    Ok((4.0 * (scale_p * vp + scale_q * vq)).sqrt())
}

/// Standard error of `ume2_hat` by the same score-bootstrap principle. The
/// influence scores s_P(x) = (2/J)Σ_j ŵ(v_j)·k(x,v_j) (and −s_Q on the other
/// side) cost only J kernel values per sample, so they are computed for the
/// full sample and no subsample rescaling is needed.
pub fn ume2_score_bootstrap_se<R: Rng + ?Sized>(
    x: &Samples,
    y: &Samples,
    v: &WitnessSet,
    k: &KernelSpec,
    resamples: usize,
    rng: &mut R,
) -> Result<f64> {
    check_pair(x, y)?;
    if v.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: v.dim(),
        });
    }
    if resamples < 2 {
        return Err(Error::invalid("score bootstrap needs resamples >= 2"));
    }
    let nf = x.n() as f64;
    let mf = y.n() as f64;
    let jf = v.n() as f64;
    let w: Vec<f64> = (0..v.n())
        .map(|j| col_sum_unsorted(x, v.point(j), k) / nf - col_sum_unsorted(y, v.point(j), k) / mf)
        .collect();
    let score = |side: &Samples, i: usize| -> f64 {
        let row = side.row(i);
        let mut s = 0.0;
        for j in 0..v.n() {
            s += w[j] * k.psi(sq_dist(row, v.point(j)));
        }
        2.0 / jf * s
    };
    let sp: Vec<f64> = (0..x.n()).map(|i| score(x, i)).collect();
    let sq: Vec<f64> = (0..y.n()).map(|l| score(y, l)).collect();
    let vp = boot_var_of_mean(&sp, resamples, rng);
    let vq = boot_var_of_mean(&sq, resamples, rng);
    Ok((vp + vq).sqrt())
}

fn subsample_rows<R: Rng + ?Sized>(s: &Samples, amount: usize, rng: &mut R) -> Samples {
    let idx: Vec<usize> = rand::seq::index::sample(rng, s.n(), amount).iter().collect();
    s.gather(&idx)
}

/// Variance of the with-replacement resampled mean of `scores`
/// (sample variance over `resamples` bootstrap means).
fn boot_var_of_mean<R: Rng + ?Sized>(scores: &[f64], resamples: usize, rng: &mut R) -> f64 {
    let n = scores.len();
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += scores[rng.random_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    let grand = means.iter().sum::<f64>() / resamples as f64;
    means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (resamples as f64 - 1.0)
}

// ───────────────────────── summation engine ─────────────────────────

const LANES: usize = 8;
/// Blocks with at least this many kernel terms take the vectorized path.
const FAST_TERM_THRESHOLD: usize = 2048;

fn check_pair(x: &Samples, y: &Samples) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptySamples("X"));
    }
    if y.is_empty() {
        return Err(Error::EmptySamples("Y"));
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    Ok(())
}

fn sorted_copy(s: &Samples) -> Samples {
    s.gather(&s.lex_sorted_indices())
}

/// −1/(2σ²) when the block qualifies for the vectorized Gaussian path.
fn fast_scale(k: &KernelSpec, dim: usize, terms: usize) -> Option<f64> {
    match k {
        KernelSpec::Gaussian { bandwidth_sq } if dim <= 2 && terms >= FAST_TERM_THRESHOLD => {
            Some(-1.0 / (2.0 * bandwidth_sq))
        }
        _ => None,
    }
}

/// (diagonal sum, strict-upper-triangle sum) of the Gram matrix of `a`.
fn within_parts(a: &Samples, k: &KernelSpec) -> (f64, f64) {
    let n = a.n();
    let mut diag = 0.0;
    for _ in 0..n {
        diag += k.psi(0.0);
    }
    let pairs = n * (n - 1) / 2;
    let mut c = 0.0;
    match (fast_scale(k, a.dim(), pairs), a.dim()) {
        (Some(scale), 1) => {
            let b = a.data();
            for i in 0..n {
                row_tail_d1(b[i], b, i + 1, scale, &mut c);
            }
        }
        (Some(scale), _) => {
            let b = a.data();
            for i in 0..n {
                row_tail_d2(b[2 * i], b[2 * i + 1], b, i + 1, scale, &mut c);
            }
        }
        (None, _) => {
            for i in 0..n {
                let ri = a.row(i);
                for j in (i + 1)..n {
                    c += k.psi(sq_dist(ri, a.row(j)));
                }
            }
        }
    }
    (diag, c)
}

/// Full cross sum ΣΣ k(x_i, y_j) for n = m, decomposed as
/// diagonal + Σ_{i<j} [k(x_i,y_j) + k(x_j,y_i)] so that its accumulation
/// chain mirrors `within_parts` when X = Y.
fn cross_sum_square(x: &Samples, y: &Samples, k: &KernelSpec) -> f64 {
    let n = x.n();
    let mut diag = 0.0;
    for i in 0..n {
        diag += k.psi(sq_dist(x.row(i), y.row(i)));
    }
    let pairs = n * (n - 1) / 2;
    let mut c = 0.0;
    match (fast_scale(k, x.dim(), pairs), x.dim()) {
        (Some(scale), 1) => {
            let xd = x.data();
            let yd = y.data();
            for i in 0..n {
                row_pair_d1(xd[i], yd[i], xd, yd, i + 1, scale, &mut c);
            }
        }
        (Some(scale), _) => {
            let xd = x.data();
            let yd = y.data();
            for i in 0..n {
                row_pair_d2(
                    [xd[2 * i], xd[2 * i + 1]],
                    [yd[2 * i], yd[2 * i + 1]],
                    xd,
                    yd,
                    i + 1,
                    scale,
                    &mut c,
                );
            }
        }
        (None, _) => {
            for i in 0..n {
                let xi = x.row(i);
                let yi = y.row(i);
                for j in (i + 1)..n {
                    c += k.psi(sq_dist(xi, y.row(j))) + k.psi(sq_dist(x.row(j), yi));
                }
            }
        }
    }
    diag + c
}

/// Full cross sum ΣΣ k(x_i, y_j) for n ≠ m, row-major.
fn cross_sum_full(x: &Samples, y: &Samples, k: &KernelSpec) -> f64 {
    let terms = x.n() * y.n();
    let mut acc = 0.0;
    match (fast_scale(k, x.dim(), terms), x.dim()) {
        (Some(scale), 1) => {
            let yd = y.data();
            for i in 0..x.n() {
                row_tail_d1(x.data()[i], yd, 0, scale, &mut acc);
            }
        }
        (Some(scale), _) => {
            let xd = x.data();
            let yd = y.data();
            for i in 0..x.n() {
                row_tail_d2(xd[2 * i], xd[2 * i + 1], yd, 0, scale, &mut acc);
            }
        }
        (None, _) => {
            for i in 0..x.n() {
                let xi = x.row(i);
                for j in 0..y.n() {
                    acc += k.psi(sq_dist(xi, y.row(j)));
                }
            }
        }
    }
    acc
}

/// Σ_i k(a_i, t) over all rows of `a`, with the same dispatch rule.
fn col_sum(a: &Samples, t: &[f64], k: &KernelSpec) -> f64 {
    let mut acc = 0.0;
    match (fast_scale(k, a.dim(), a.n()), a.dim()) {
        (Some(scale), 1) => row_tail_d1(t[0], a.data(), 0, scale, &mut acc),
        (Some(scale), _) => row_tail_d2(t[0], t[1], a.data(), 0, scale, &mut acc),
        (None, _) => {
            for i in 0..a.n() {
                acc += k.psi(sq_dist(a.row(i), t));
            }
        }
    }
    acc
}

/// `col_sum` without any pre-sorting requirement (gradient helpers iterate
/// rows in input order so the output rows stay aligned with the input).
fn col_sum_unsorted(a: &Samples, t: &[f64], k: &KernelSpec) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.n() {
        acc += k.psi(sq_dist(a.row(i), t));
    }
    acc
}

// ───────────────────────── vectorized Gaussian path ─────────────────────────

/// exp(2^f) polynomial coefficients: ln2^k / k!.
const EXP2_POLY: [f64; 11] = {
    let mut c = [0.0_f64; 11];
    c[0] = 1.0;
    let mut k = 1;
    while k < 11 {
        c[k] = c[k - 1] * std::f64::consts::LN_2 / k as f64;
        k += 1;
    }
    c
};

/// Eight exponentials at once for arguments ≤ 0. exp(x) = 2^(x·log₂e); the
/// integer part n is extracted with the 1.5·2^52 rounding trick, 2^f on
/// f ∈ [−½, ½] comes from the polynomial above (relative error < 1e-12),
/// and 2^n is assembled directly in the exponent field. Arguments below
/// −1022·ln2 clamp to 2^−1022 ≈ 2.2e-308, which is indistinguishable from
/// the true (subnormal or underflowed) value in any sum this crate forms.
#[inline(always)]
fn exp_lanes(args: &[f64; LANES]) -> [f64; LANES] {
    const MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 × 2^52
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    let mut t = [0.0_f64; LANES];
    for l in 0..LANES {
        t[l] = (args[l] * LOG2E).max(-1022.0);
    }
    let mut anchored = [0.0_f64; LANES];
    let mut f = [0.0_f64; LANES];
    for l in 0..LANES {
        anchored[l] = t[l] + MAGIC;
    }
    for l in 0..LANES {
        f[l] = t[l] - (anchored[l] - MAGIC);
    }
    let mut p = [EXP2_POLY[10]; LANES];
    for k in (0..10).rev() {
        for l in 0..LANES {
            p[l] = p[l].mul_add(f[l], EXP2_POLY[k]);
        }
    }
    let mut out = [0.0_f64; LANES];
    for l in 0..LANES {
        let scale_bits = (anchored[l].to_bits() as i64).wrapping_add(1023).wrapping_shl(52);
        out[l] = p[l] * f64::from_bits(scale_bits as u64);
    }
    out
}

#[inline(always)]
fn flush(acc: &mut f64, group: &[f64; LANES]) {
    for l in 0..LANES {
        *acc += group[l];
    }
}

/// acc += Σ_{j ≥ start} exp(scale·(a0 − b[j])²), one serial add per term.
/// The polynomial work of each lane group overlaps the serial adds of the
/// previous group (one-stage software pipeline).
#[inline(always)]
fn row_tail_d1(a0: f64, b: &[f64], start: usize, scale: f64, acc: &mut f64) {
    let tail = &b[start..];
    let mut chunks = tail.chunks_exact(LANES);
    let mut pending: Option<[f64; LANES]> = None;
    for ch in &mut chunks {
        let ch: &[f64; LANES] = ch.try_into().unwrap();
        let mut args = [0.0_f64; LANES];
        for l in 0..LANES {
            let d = a0 - ch[l];
            args[l] = d * d * scale;
        }
        let ex = exp_lanes(&args);
        if let Some(prev) = pending {
            flush(acc, &prev);
        }
        pending = Some(ex);
    }
    if let Some(prev) = pending {
        flush(acc, &prev);
    }
    for &bv in chunks.remainder() {
        let d = a0 - bv;
        let ex = exp_lanes(&[d * d * scale, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        *acc += ex[0];
    }
}

/// 2-D variant of `row_tail_d1`; `b` is row-major interleaved, `start` is a
/// row index.
#[inline(always)]
fn row_tail_d2(a0: f64, a1: f64, b: &[f64], start: usize, scale: f64, acc: &mut f64) {
    let tail = &b[2 * start..];
    let mut chunks = tail.chunks_exact(2 * LANES);
    let mut pending: Option<[f64; LANES]> = None;
    for ch in &mut chunks {
        let ch: &[f64; 2 * LANES] = ch.try_into().unwrap();
        let mut args = [0.0_f64; LANES];
        for l in 0..LANES {
            let dx = a0 - ch[2 * l];
            let dy = a1 - ch[2 * l + 1];
            args[l] = (dx * dx + dy * dy) * scale;
        }
        let ex = exp_lanes(&args);
        if let Some(prev) = pending {
            flush(acc, &prev);
        }
        pending = Some(ex);
    }
    if let Some(prev) = pending {
        flush(acc, &prev);
    }
    let rem = chunks.remainder();
    for r in 0..rem.len() / 2 {
        let dx = a0 - rem[2 * r];
        let dy = a1 - rem[2 * r + 1];
        let ex = exp_lanes(&[(dx * dx + dy * dy) * scale, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        *acc += ex[0];
    }
}

/// acc += Σ_{j ≥ start} [k(x_i, y_j) + k(x_j, y_i)] with the inner bracket
/// added lane-wise before it joins the serial chain, so each chain step is
/// an exact doubling when X = Y.
#[inline(always)]
fn row_pair_d1(xi: f64, yi: f64, xs: &[f64], ys: &[f64], start: usize, scale: f64, acc: &mut f64) {
    let xt = &xs[start..];
    let yt = &ys[start..];
    let mut xch = xt.chunks_exact(LANES);
    let mut ych = yt.chunks_exact(LANES);
    let mut pending: Option<[f64; LANES]> = None;
    loop {
        let (xc, yc) = match (xch.next(), ych.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => break,
        };
        let xc: &[f64; LANES] = xc.try_into().unwrap();
        let yc: &[f64; LANES] = yc.try_into().unwrap();
        let mut a1 = [0.0_f64; LANES];
        let mut a2 = [0.0_f64; LANES];
        for l in 0..LANES {
            let d1 = xi - yc[l];
            a1[l] = d1 * d1 * scale;
            let d2 = xc[l] - yi;
            a2[l] = d2 * d2 * scale;
        }
        let e1 = exp_lanes(&a1);
        let e2 = exp_lanes(&a2);
        let mut s = [0.0_f64; LANES];
        for l in 0..LANES {
            s[l] = e1[l] + e2[l];
        }
        if let Some(prev) = pending {
            flush(acc, &prev);
        }
        pending = Some(s);
    }
    if let Some(prev) = pending {
        flush(acc, &prev);
    }
    let xr = xch.remainder();
    let yr = ych.remainder();
    for l in 0..xr.len() {
        let d1 = xi - yr[l];
        let e1 = exp_lanes(&[d1 * d1 * scale, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let d2 = xr[l] - yi;
        let e2 = exp_lanes(&[d2 * d2 * scale, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        *acc += e1[0] + e2[0];
    }
}

/// 2-D variant of `row_pair_d1`.
#[inline(always)]
fn row_pair_d2(
    xi: [f64; 2],
    yi: [f64; 2],
    xs: &[f64],
    ys: &[f64],
    start: usize,
    scale: f64,
    acc: &mut f64,
) {
    let xt = &xs[2 * start..];
    let yt = &ys[2 * start..];
    let mut xch = xt.chunks_exact(2 * LANES);
    let mut ych = yt.chunks_exact(2 * LANES);
    let mut pending: Option<[f64; LANES]> = None;
    loop {
        let (xc, yc) = match (xch.next(), ych.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => break,
        };
        let xc: &[f64; 2 * LANES] = xc.try_into().unwrap();
        let yc: &[f64; 2 * LANES] = yc.try_into().unwrap();
        let mut a1 = [0.0_f64; LANES];
        let mut a2 = [0.0_f64; LANES];
        for l in 0..LANES {
            let dx1 = xi[0] - yc[2 * l];
            let dy1 = xi[1] - yc[2 * l + 1];
            a1[l] = (dx1 * dx1 + dy1 * dy1) * scale;
            let dx2 = xc[2 * l] - yi[0];
            let dy2 = xc[2 * l + 1] - yi[1];
            a2[l] = (dx2 * dx2 + dy2 * dy2) * scale;
        }
        let e1 = exp_lanes(&a1);
        let e2 = exp_lanes(&a2);
        let mut s = [0.0_f64; LANES];
        for l in 0..LANES {
            s[l] = e1[l] + e2[l];
        }
        if let Some(prev) = pending {
            flush(acc, &prev);
        }
        pending = Some(s);
    }
    if let Some(prev) = pending {
        flush(acc, &prev);
    }
    let xr = xch.remainder();
    let yr = ych.remainder();
    for l in 0..xr.len() / 2 {
        let dx1 = xi[0] - yr[2 * l];
        let dy1 = xi[1] - yr[2 * l + 1];
        let e1 = exp_lanes(&[(dx1 * dx1 + dy1 * dy1) * scale, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let dx2 = xr[2 * l] - yi[0];
        let dy2 = xr[2 * l + 1] - yi[1];
        let e2 = exp_lanes(&[(dx2 * dx2 + dy2 * dy2) * scale, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        *acc += e1[0] + e2[0];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b} (tol {tol})");
    }

    fn gauss1() -> KernelSpec {
        KernelSpec::gaussian(1.0).unwrap()
    }

    fn random_samples(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> Samples {
        let data: Vec<f64> = (0..n * d).map(|_| (rng.random::<f64>() - 0.5) * spread).collect();
        Samples::new(data, d).unwrap()
    }

    #[test]
    fn mmd2_biased_hand_example() {
        let x = Samples::from_1d(vec![0.0]);
        let y = Samples::from_1d(vec![1.0]);
        let v = mmd2_biased(&x, &y, &gauss1()).unwrap();
        close(v, 2.0 - 2.0 * (-0.5f64).exp(), 1e-14);
        close(v, 0.786939, 1e-6);
    }

    #[test]
    fn mmd2_biased_identical_multisets_exactly_zero() {
        let x = Samples::from_1d(vec![0.3, -1.2, 2.5, 0.3, 7.1]);
        let y = Samples::from_1d(vec![7.1, 0.3, 2.5, -1.2, 0.3]); // same multiset, shuffled
        assert_eq!(mmd2_biased(&x, &y, &gauss1()).unwrap(), 0.0);
        let k = KernelSpec::imq(1.0, -0.5).unwrap();
        assert_eq!(mmd2_biased(&x, &y, &k).unwrap(), 0.0);
    }

    #[test]
    fn mmd2_biased_permutation_invariant_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_samples(&mut rng, 23, 2, 4.0);
        let y = random_samples(&mut rng, 17, 2, 4.0);
        let base = mmd2_biased(&x, &y, &gauss1()).unwrap();
        // reverse the rows of each
        let xr = x.gather(&(0..x.n()).rev().collect::<Vec<_>>());
        let yr = y.gather(&(0..y.n()).rev().collect::<Vec<_>>());
        let perm = mmd2_biased(&xr, &yr, &gauss1()).unwrap();
        assert_eq!(base.to_bits(), perm.to_bits());
    }

    #[test]
    fn mmd2_biased_symmetric_for_equal_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_samples(&mut rng, 19, 1, 3.0);
        let y = random_samples(&mut rng, 19, 1, 3.0);
        let a = mmd2_biased(&x, &y, &gauss1()).unwrap();
        let b = mmd2_biased(&y, &x, &gauss1()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn mmd2_unbiased_hand_example() {
        let x = Samples::from_1d(vec![0.0, 1.0]);
        let y = Samples::from_1d(vec![0.0, 1.0]);
        let v = mmd2_unbiased(&x, &y, &gauss1()).unwrap();
        // 6-term enumeration: e^{−1/2} + e^{−1/2} − (2 + 2e^{−1/2})/2
        close(v, (-0.5f64).exp() - 1.0, 1e-14);
        close(v, -0.393469, 1e-6);
        assert!(v < 0.0);
    }

    #[test]
    fn mmd2_unbiased_coinciding_pairs_exactly_zero() {
        let x = Samples::from_1d(vec![0.7, 0.7]);
        let y = Samples::from_1d(vec![0.7, 0.7]);
        assert_eq!(mmd2_unbiased(&x, &y, &gauss1()).unwrap(), 0.0);
    }

    #[test]
    fn mmd2_unbiased_rejects_singletons() {
        let x = Samples::from_1d(vec![0.0]);
        let y = Samples::from_1d(vec![1.0, 2.0]);
        assert!(mmd2_unbiased(&x, &y, &gauss1()).is_err());
    }

    #[test]
    fn ume2_hand_example() {
        let x = Samples::from_1d(vec![0.0]);
        let y = Samples::from_1d(vec![1.0]);
        let v = WitnessSet::new(Samples::from_1d(vec![0.0])).unwrap();
        let u = ume2_hat(&x, &y, &v, &gauss1()).unwrap();
        let w = 1.0 - (-0.5f64).exp();
        close(u, w * w, 1e-14);
        close(u, 0.154818, 1e-6);
    }

    #[test]
    fn ume2_identical_multisets_exactly_zero() {
        let x = Samples::from_1d(vec![0.1, 4.0, -2.0]);
        let y = Samples::from_1d(vec![4.0, -2.0, 0.1]);
        let v = WitnessSet::new(Samples::from_1d(vec![0.0, 1.0])).unwrap();
        assert_eq!(ume2_hat(&x, &y, &v, &gauss1()).unwrap(), 0.0);
    }

    #[test]
    fn witness_fn_hand_example_and_definitional_identity() {
        let x = Samples::from_1d(vec![0.0]);
        let y = Samples::from_1d(vec![1.0]);
        let w = witness_fn_eval(&x, &y, &gauss1(), &[0.0]).unwrap();
        close(w, 1.0 - (-0.5f64).exp(), 1e-14);
        close(w, 0.393469, 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_samples(&mut rng, 12, 2, 3.0);
        let y = random_samples(&mut rng, 9, 2, 3.0);
        let vpts = random_samples(&mut rng, 5, 2, 3.0);
        let v = WitnessSet::new(vpts.clone()).unwrap();
        let u = ume2_hat(&x, &y, &v, &gauss1()).unwrap();
        let ws = witness_fn_eval_batch(&x, &y, &gauss1(), &vpts).unwrap();
        let manual = ws.iter().map(|w| w * w).sum::<f64>() / 5.0;
        close(u, manual, 1e-14);
    }

    #[test]
    fn witness_grad_antisymmetric_cancellation() {
        let x = Samples::from_1d(vec![0.0]);
        let y = Samples::from_1d(vec![2.0]);
        let v = WitnessSet::new(Samples::from_1d(vec![1.0])).unwrap();
        let g = grad_ume2_wrt_witness(&x, &y, &v, &gauss1()).unwrap();
        assert_eq!(g.row(0)[0], 0.0);
    }

    #[test]
    fn witness_grad_zero_for_identical_samples() {
        let x = Samples::from_1d(vec![0.5, 1.5, -0.5]);
        let v = WitnessSet::new(Samples::from_1d(vec![0.2, 0.9])).unwrap();
        let g = grad_ume2_wrt_witness(&x, &x, &v, &gauss1()).unwrap();
        assert!(g.data().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn witness_grad_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let x = random_samples(&mut rng, 8, 2, 3.0);
            let y = random_samples(&mut rng, 6, 2, 3.0);
            let vpts = random_samples(&mut rng, 3, 2, 3.0);
            let g = grad_ume2_wrt_witness(&x, &y, &WitnessSet::new(vpts.clone()).unwrap(), &gauss1())
                .unwrap();
            let h = 1e-6;
            for j in 0..3 {
                for c in 0..2 {
                    let mut plus = vpts.clone();
                    plus.row_mut(j)[c] += h;
                    let mut minus = vpts.clone();
                    minus.row_mut(j)[c] -= h;
                    let up = ume2_hat(&x, &y, &WitnessSet::new(plus).unwrap(), &gauss1()).unwrap();
                    let dn = ume2_hat(&x, &y, &WitnessSet::new(minus).unwrap(), &gauss1()).unwrap();
                    let fd = (up - dn) / (2.0 * h);
                    let got = g.row(j)[c];
                    assert!(
                        (got - fd).abs() / fd.abs().max(1e-8) < 1e-5,
                        "witness grad ({j},{c}): {got} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn mmd_grad_wrt_y_matches_fd_both_variants() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for variant in [MmdVariant::Biased, MmdVariant::Unbiased] {
            let x = random_samples(&mut rng, 7, 2, 3.0);
            let y = random_samples(&mut rng, 5, 2, 3.0);
            let g = grad_mmd2_wrt_y(&x, &y, &gauss1(), variant).unwrap();
            let h = 1e-6;
            for l in 0..y.n() {
                for c in 0..2 {
                    let mut plus = y.clone();
                    plus.row_mut(l)[c] += h;
                    let mut minus = y.clone();
                    minus.row_mut(l)[c] -= h;
                    let fd = (mmd2(&x, &plus, &gauss1(), variant).unwrap()
                        - mmd2(&x, &minus, &gauss1(), variant).unwrap())
                        / (2.0 * h);
                    let got = g.row(l)[c];
                    assert!(
                        (got - fd).abs() / fd.abs().max(1e-8) < 1e-5,
                        "{variant:?} ({l},{c}): {got} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn ume_grad_wrt_y_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = random_samples(&mut rng, 9, 1, 3.0);
        let y = random_samples(&mut rng, 6, 1, 3.0);
        let vpts = random_samples(&mut rng, 4, 1, 3.0);
        let v = WitnessSet::new(vpts).unwrap();
        let g = grad_ume2_wrt_y(&x, &y, &v, &gauss1()).unwrap();
        let h = 1e-6;
        for l in 0..y.n() {
            let mut plus = y.clone();
            plus.row_mut(l)[0] += h;
            let mut minus = y.clone();
            minus.row_mut(l)[0] -= h;
            let fd = (ume2_hat(&x, &plus, &v, &gauss1()).unwrap()
                - ume2_hat(&x, &minus, &v, &gauss1()).unwrap())
                / (2.0 * h);
            let got = g.row(l)[0];
            assert!((got - fd).abs() / fd.abs().max(1e-8) < 1e-5, "({l}): {got} vs {fd}");
        }
    }

    #[test]
    fn fast_path_agrees_with_naive_reference() {
        // 80 points ⇒ 3160 within-pairs ≥ threshold ⇒ vectorized path taken.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for d in [1usize, 2] {
            let x = random_samples(&mut rng, 80, d, 6.0);
            let y = random_samples(&mut rng, 80, d, 6.0);
            let sigma_sq = 0.7;
            let k = KernelSpec::gaussian(sigma_sq).unwrap();
            let fast = mmd2_biased(&x, &y, &k).unwrap();
            let mut naive = 0.0;
            let nf = 80.0;
            for i in 0..80 {
                for j in 0..80 {
                    naive += (-sq_dist(x.row(i), x.row(j)) / (2.0 * sigma_sq)).exp() / (nf * nf);
                    naive += (-sq_dist(y.row(i), y.row(j)) / (2.0 * sigma_sq)).exp() / (nf * nf);
                    naive -=
                        2.0 * (-sq_dist(x.row(i), y.row(j)) / (2.0 * sigma_sq)).exp() / (nf * nf);
                }
            }
            assert!((fast - naive).abs() / naive.abs() < 1e-10, "d={d}: {fast} vs {naive}");
        }
    }

    #[test]
    fn lane_exp_accuracy_and_clamping() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut worst: f64 = 0.0;
        for _ in 0..4000 {
            let mut args = [0.0_f64; LANES];
            for a in &mut args {
                *a = -rng.random::<f64>() * 700.0;
            }
            let got = exp_lanes(&args);
            for l in 0..LANES {
                let want = args[l].exp();
                worst = worst.max((got[l] - want).abs() / want);
            }
        }
        assert!(worst < 1e-12, "worst relative error {worst:.3e}");
        // exact at zero, harmless far below the underflow threshold
        let edge = exp_lanes(&[0.0, -0.0, -1e6, -750.0, -1.0, -2.0, -0.5, -100.0]);
        assert_eq!(edge[0], 1.0);
        assert_eq!(edge[1], 1.0);
        assert!(edge[2] >= 0.0 && edge[2] < 1e-300);
        assert!(edge[3] >= 0.0 && edge[3] < 1e-300);
        close(edge[4], (-1.0f64).exp(), 1e-12);
    }

    #[test]
    fn score_bootstrap_ses_are_positive_finite_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = random_samples(&mut rng, 400, 1, 2.0);
        let mut y = random_samples(&mut rng, 400, 1, 2.0);
        for i in 0..y.n() {
            y.row_mut(i)[0] += 1.0;
        }
        let k = gauss1();
        let v = WitnessSet::new(Samples::from_1d(vec![0.5])).unwrap();

        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let se1 = mmd2_score_bootstrap_se(&x, &y, &k, 128, 64, &mut r1).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let se2 = mmd2_score_bootstrap_se(&x, &y, &k, 128, 64, &mut r2).unwrap();
        assert!(se1 > 0.0 && se1.is_finite());
        assert_eq!(se1.to_bits(), se2.to_bits());

        let mut r3 = ChaCha8Rng::seed_from_u64(99);
        let se3 = ume2_score_bootstrap_se(&x, &y, &v, &k, 64, &mut r3).unwrap();
        assert!(se3 > 0.0 && se3.is_finite());
    }

    #[test]
    fn dimension_and_empty_validation() {
        let x = Samples::from_1d(vec![0.0]);
        let y2 = Samples::new(vec![0.0, 1.0], 2).unwrap();
        assert!(matches!(
            mmd2_biased(&x, &y2, &gauss1()),
            Err(Error::DimensionMismatch { .. })
        ));
        let empty = Samples::new(Vec::new(), 1).unwrap();
        assert!(matches!(mmd2_biased(&empty, &x, &gauss1()), Err(Error::EmptySamples(_))));
        let v2 = WitnessSet::new(Samples::new(vec![0.0, 0.0], 2).unwrap()).unwrap();
        assert!(ume2_hat(&x, &x, &v2, &gauss1()).is_err());
        assert!(WitnessSet::new(Samples::new(Vec::new(), 1).unwrap()).is_err());
    }
}
