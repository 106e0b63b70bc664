//! Minimal feedforward networks with manual backpropagation — the generator
//! (and, for the autoencoded variant, encoder/decoder) used in training.
//!
//! Parameters live in one flat `Vec<f64>` (per layer: weight matrix
//! row-major `out×in`, then bias), so optimizers and serialization treat a
//! network as a single vector while `forward`/`backward` view it through
//! per-layer offsets. Activations are restricted to tanh and identity.
//!
//! `forward` caches every layer's post-activation output; `backward`
//! consumes that cache to produce the exact reverse-mode gradient of a
//! scalar loss given ∂loss/∂output per sample. A revision counter ties each
//! cache to the parameter state that produced it, so a cache that outlived
//! a parameter update is rejected instead of yielding silently wrong
//! gradients.

use crate::error::{Error, Result};
use crate::samples::Samples;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's *output* value.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerLayout {
    input: usize,
    output: usize,
    w_off: usize,
    b_off: usize,
    activation: Activation,
}

/// A feedforward network: layer dims, activation tags, and the flat
/// parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<LayerLayout>,
    theta: Vec<f64>,
    revision: u64,
}

impl MlpParams {
    /// Zero-initialized network. `dims` = [input, hidden…, output];
    /// `activations` has one tag per layer (`dims.len() − 1` of them).
    pub fn new(dims: &[usize], activations: &[Activation]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid("a network needs at least one layer (two dims)"));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::invalid(format!(
                "expected {} activation tags, got {}",
                dims.len() - 1,
                activations.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        let mut layers = Vec::with_capacity(activations.len());
        let mut off = 0;
        for (l, &act) in activations.iter().enumerate() {
            let (input, output) = (dims[l], dims[l + 1]);
            layers.push(LayerLayout { input, output, w_off: off, b_off: off + input * output, activation: act });
            off += input * output + output;
        }
        Ok(MlpParams { layers, theta: vec![0.0; off], revision: 0 })
    }

    /// Glorot-uniform weights (±√(6/(fan_in+fan_out))), zero biases.
    pub fn glorot_init<R: Rng + ?Sized>(
        dims: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        let mut p = Self::new(dims, activations)?;
        for layer in p.layers.clone() {
            let a = (6.0 / (layer.input + layer.output) as f64).sqrt();
            for w in &mut p.theta[layer.w_off..layer.b_off] {
                *w = a * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        Ok(p)
    }

    /// Single identity layer: W = I, b = 0 — maps input to itself exactly.
    pub fn identity(dim: usize) -> Result<Self> {
        let mut p = Self::new(&[dim, dim], &[Activation::Identity])?;
        for i in 0..dim {
            p.theta[i * dim + i] = 1.0;
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").output
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.layers.iter().map(|l| l.input).collect();
        d.push(self.output_dim());
        d
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    /// Flat read-only parameter view.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Flat mutable parameter view; invalidates outstanding forward caches.
    pub fn theta_mut(&mut self) -> &mut [f64] {
        self.revision += 1;
        &mut self.theta
    }

    /// Batch forward pass; rows of `z` are inputs. Returns outputs and the
    /// activation cache for `backward`.
    pub fn forward(&self, z: &Samples) -> Result<(Samples, ForwardCache)> {
        if z.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: z.dim() });
        }
        let batch = z.n();
        let mut acts: Vec<Samples> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(z.clone());
        for layer in &self.layers {
            let prev = acts.last().expect("activation stack is non-empty");
            let mut next = Samples::zeros(batch, layer.output);
            let w = &self.theta[layer.w_off..layer.b_off];
            let b = &self.theta[layer.b_off..layer.b_off + layer.output];
            for r in 0..batch {
                let input = prev.row(r);
                let out_row = next.row_mut(r);
                for o in 0..layer.output {
                    let w_row = &w[o * layer.input..(o + 1) * layer.input];
                    out_row[o] = layer.activation.apply(b[o] + dot(w_row, input));
                }
            }
            acts.push(next);
        }
        let output = acts.last().expect("activation stack is non-empty").clone();
        Ok((output, ForwardCache { acts, revision: self.revision }))
    }

    /// Reverse-mode gradient of the scalar loss whose per-sample output
    /// gradient is `output_grad` (one row per input row). Returns the
    /// gradient over the flat parameter vector, summed over the batch.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &Samples) -> Result<Vec<f64>> {
        Ok(self.backward_with_input_grad(cache, output_grad)?.0)
    }

    /// Like `backward`, but also returns ∂loss/∂input per sample — needed
    /// when this network sits inside a longer chain (e.g. a loss computed on
    /// encoded points, pulled back through the encoder to its input).
    pub fn backward_with_input_grad(
        &self,
        cache: &ForwardCache,
        output_grad: &Samples,
    ) -> Result<(Vec<f64>, Samples)> {
        if cache.revision != self.revision {
            return Err(Error::invalid(
                "stale forward cache: parameters changed since the forward pass",
            ));
        }
        let batch = cache.acts[0].n();
        if output_grad.n() != batch || output_grad.dim() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: output_grad.dim(),
            });
        }
        let mut grad = vec![0.0; self.theta.len()];
        // upstream = ∂loss/∂(layer output), walked backwards
        let mut upstream = output_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let outputs = &cache.acts[l + 1];
            let inputs = &cache.acts[l];
            let w = &self.theta[layer.w_off..layer.b_off];
            let mut next_upstream = Samples::zeros(batch, layer.input);
            for r in 0..batch {
                let up = upstream.row(r);
                let y = outputs.row(r);
                let x = inputs.row(r);
                let down = next_upstream.row_mut(r);
                for o in 0..layer.output {
                    let delta = up[o] * layer.activation.derivative_from_output(y[o]);
                    let w_row = &w[o * layer.input..(o + 1) * layer.input];
                    let gw_row = &mut grad[layer.w_off + o * layer.input..layer.w_off + (o + 1) * layer.input];
                    for i in 0..layer.input {
                        gw_row[i] += delta * x[i];
                        down[i] += delta * w_row[i];
                    }
                    grad[layer.b_off + o] += delta;
                }
            }
            upstream = next_upstream;
        }
        Ok((grad, upstream))
    }
}

/// Per-layer activations retained by `forward` for the matching `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// acts[0] = input batch, acts[l] = output of layer l.
    acts: Vec<Samples>,
    revision: u64,
}

/// Dot product with eight independent accumulators. A single running sum
/// chains every addition behind the previous one; splitting the sum breaks
/// that dependency so the additions pipeline (and vectorize). The accumulator
/// layout is fixed, so results stay deterministic run to run.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let n = a.len().min(b.len());
    let chunks = n / LANES;
    let mut acc = [0.0f64; LANES];
    for c in 0..chunks {
        let base = c * LANES;
        let aw = &a[base..base + LANES];
        let bw = &b[base..base + LANES];
        for l in 0..LANES {
            acc[l] += aw[l] * bw[l];
        }
    }
    let mut tail = 0.0;
    for i in chunks * LANES..n {
        tail += a[i] * b[i];
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail
}

// ───────────────────────── optimizers ─────────────────────────

/// Plain gradient descent on a flat parameter slice: θ ← θ − lr·g. A
/// non-finite gradient rejects the update and leaves parameters untouched.
pub fn sgd_update(theta: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    if grad.len() != theta.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), got: grad.len() });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { context: "sgd gradient" });
    }
    for (t, g) in theta.iter_mut().zip(grad) {
        *t -= lr * g;
    }
    Ok(())
}

/// `sgd_update` applied to a network's parameter vector.
pub fn sgd_step(p: &mut MlpParams, grad: &[f64], lr: f64) -> Result<()> {
    sgd_update(p.theta_mut(), grad, lr)
}

/// Adam moment state (β₁ = 0.9, β₂ = 0.999, ε = 1e-8 by default).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update on a flat parameter slice. A non-finite
/// gradient rejects the update, leaving parameters and moments untouched.
pub fn adam_update(
    theta: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if grad.len() != theta.len() || state.m.len() != theta.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), got: grad.len() });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { context: "adam gradient" });
    }
    state.step += 1;
    let b1t = 1.0 - state.beta1.powi(state.step as i32);
    let b2t = 1.0 - state.beta2.powi(state.step as i32);
    for i in 0..grad.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        let mhat = state.m[i] / b1t;
        let vhat = state.v[i] / b2t;
        theta[i] -= lr * mhat / (vhat.sqrt() + state.eps);
    }
    Ok(())
}

/// `adam_update` applied to a network's parameter vector.
pub fn adam_step(p: &mut MlpParams, grad: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    adam_update(p.theta_mut(), grad, state, lr)
}

// ───────────────────────── gradient checking ─────────────────────────

/// Compare `analytic_grad` against central finite differences (step 1e-5)
/// of `loss` over every coordinate — or over 200 distinct random
/// coordinates when the network has more than 200 parameters. Returns the
/// maximum relative error.
pub fn grad_check<F, R>(
    p: &MlpParams,
    mut loss: F,
    analytic_grad: &[f64],
    rng: &mut R,
) -> Result<f64>
where
    F: FnMut(&MlpParams) -> Result<f64>,
    R: Rng + ?Sized,
{
    if analytic_grad.len() != p.n_params() {
        return Err(Error::DimensionMismatch { expected: p.n_params(), got: analytic_grad.len() });
    }
    let n = p.n_params();
    let coords: Vec<usize> = if n > 200 {
        rand::seq::index::sample(rng, n, 200).iter().collect()
    } else {
        (0..n).collect()
    };
    let h = 1e-5;
    let mut probe = p.clone();
    let mut worst: f64 = 0.0;
    for &i in &coords {
        let saved = probe.theta()[i];
        probe.theta_mut()[i] = saved + h;
        let up = loss(&probe)?;
        probe.theta_mut()[i] = saved - h;
        let down = loss(&probe)?;
        probe.theta_mut()[i] = saved;
        let fd = (up - down) / (2.0 * h);
        let g = analytic_grad[i];
        let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

// ───────────────────────── checkpoints ─────────────────────────

impl MlpParams {
    /// Flat little-endian f64 dump of the parameter vector.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.theta.len() * 8);
        for t in &self.theta {
            out.extend_from_slice(&t.to_le_bytes());
        }
        out
    }

    /// Plain-text companion describing the architecture, e.g.
    /// `dims 10 64 64 2` / `activations tanh tanh identity` / `params 4930`.
    pub fn shape_manifest(&self) -> String {
        let dims: Vec<String> = self.dims().iter().map(|d| d.to_string()).collect();
        let acts: Vec<&str> = self.layers.iter().map(|l| l.activation.name()).collect();
        format!(
            "dims {}\nactivations {}\nparams {}\n",
            dims.join(" "),
            acts.join(" "),
            self.n_params()
        )
    }

    /// Rebuild a network from `shape_manifest` text plus the flat binary
    /// parameter dump.
    pub fn from_checkpoint(manifest: &str, bytes: &[u8]) -> Result<Self> {
        let mut dims: Option<Vec<usize>> = None;
        let mut acts: Option<Vec<Activation>> = None;
        let mut declared: Option<usize> = None;
        for line in manifest.lines() {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("dims") => {
                    dims = Some(
                        parts
                            .map(|p| {
                                p.parse::<usize>()
                                    .map_err(|_| Error::invalid(format!("bad dim '{p}'")))
                            })
                            .collect::<Result<_>>()?,
                    )
                }
                Some("activations") => {
                    acts = Some(parts.map(Activation::parse).collect::<Result<_>>()?)
                }
                Some("params") => {
                    let p = parts
                        .next()
                        .ok_or_else(|| Error::invalid("manifest 'params' line missing count"))?;
                    declared = Some(
                        p.parse::<usize>()
                            .map_err(|_| Error::invalid(format!("bad param count '{p}'")))?,
                    );
                }
                _ => {}
            }
        }
        let dims = dims.ok_or_else(|| Error::invalid("manifest missing 'dims' line"))?;
        let acts = acts.ok_or_else(|| Error::invalid("manifest missing 'activations' line"))?;
        let mut p = MlpParams::new(&dims, &acts)?;
        if let Some(n) = declared {
            if n != p.n_params() {
                return Err(Error::invalid(format!(
                    "manifest declares {n} parameters but the architecture has {}",
                    p.n_params()
                )));
            }
        }
        if bytes.len() != p.n_params() * 8 {
            return Err(Error::invalid(format!(
                "checkpoint holds {} bytes, architecture needs {}",
                bytes.len(),
                p.n_params() * 8
            )));
        }
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            let arr: [u8; 8] = chunk.try_into().expect("chunks_exact(8) yields 8 bytes");
            p.theta[i] = f64::from_le_bytes(arr);
        }
        if p.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite { context: "checkpoint parameters" });
        }
        Ok(p)
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

    #[test]
    fn zero_net_maps_to_zero() {
        let p = MlpParams::new(&[3, 4, 2], &[Activation::Tanh, Activation::Tanh]).unwrap();
        let z = Samples::new(vec![1.0, -2.0, 0.5], 3).unwrap();
        let (out, _) = p.forward(&z).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_net_is_transparent_bitwise() {
        let p = MlpParams::identity(2).unwrap();
        let z = Samples::new(vec![0.1, -0.2, 3.5, 7.25], 2).unwrap();
        let (out, _) = p.forward(&z).unwrap();
        assert_eq!(out.data(), z.data());
    }

    #[test]
    fn tiny_tanh_net_matches_hand_composition() {
        // 1-2-1: h = tanh(w1·x + b1), y = w2·h + b2 (identity output)
        let mut p = MlpParams::new(&[1, 2, 1], &[Activation::Tanh, Activation::Identity]).unwrap();
        // layer 0: W (2×1) = [0.3, −0.7], b = [0.1, 0.2]
        // layer 1: W (1×2) = [0.5, −0.25], b = [0.05]
        p.theta_mut().copy_from_slice(&[0.3, -0.7, 0.1, 0.2, 0.5, -0.25, 0.05]);
        let x = 0.9;
        let (out, _) = p.forward(&Samples::from_1d(vec![x])).unwrap();
        let h1 = (0.3 * x + 0.1).tanh();
        let h2 = (-0.7 * x + 0.2).tanh();
        let want = 0.5 * h1 - 0.25 * h2 + 0.05;
        close(out.row(0)[0], want, 1e-12);
    }

    /// Mean squared loss ½Σ‖out − target‖² and its output gradient.
    fn sq_loss(out: &Samples, target: &Samples) -> (f64, Samples) {
        let mut grad = Samples::zeros(out.n(), out.dim());
        let mut loss = 0.0;
        for r in 0..out.n() {
            for c in 0..out.dim() {
                let e = out.row(r)[c] - target.row(r)[c];
                loss += 0.5 * e * e;
                grad.row_mut(r)[c] = e;
            }
        }
        (loss, grad)
    }

    #[test]
    fn backward_matches_finite_differences_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = MlpParams::glorot_init(
            &[2, 5, 4, 2],
            &[Activation::Tanh, Activation::Tanh, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let z = {
            let data: Vec<f64> = (0..12).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            Samples::new(data, 2).unwrap()
        };
        let target = {
            let data: Vec<f64> = (0..12).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            Samples::new(data, 2).unwrap()
        };
        let (out, cache) = p.forward(&z).unwrap();
        let (_, ograd) = sq_loss(&out, &target);
        let grad = p.backward(&cache, &ograd).unwrap();
        let worst = grad_check(
            &p,
            |q| {
                let (o, _) = q.forward(&z)?;
                Ok(sq_loss(&o, &target).0)
            },
            &grad,
            &mut rng,
        )
        .unwrap();
        assert!(worst < 1e-5, "worst relative error {worst:.3e}");
    }

    #[test]
    fn zero_output_grad_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = MlpParams::glorot_init(&[2, 3, 2], &[Activation::Tanh, Activation::Identity], &mut rng)
            .unwrap();
        let z = Samples::new(vec![0.5, -0.5, 1.0, 0.25], 2).unwrap();
        let (_, cache) = p.forward(&z).unwrap();
        let grad = p.backward(&cache, &Samples::zeros(2, 2)).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn linear_net_gradient_equals_least_squares_residual_formula() {
        // y = Wx + b, loss = ½Σ_r ‖y_r − t_r‖²:
        //   ∂/∂W = Σ_r (y_r − t_r)·x_rᵀ,   ∂/∂b = Σ_r (y_r − t_r)
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = MlpParams::glorot_init(&[2, 2], &[Activation::Identity], &mut rng).unwrap();
        let z = Samples::new(vec![0.3, 1.0, -0.6, 0.2, 0.9, -1.1], 2).unwrap();
        let t = Samples::new(vec![0.0, 0.5, 0.5, -0.5, 1.0, 0.0], 2).unwrap();
        let (out, cache) = p.forward(&z).unwrap();
        let (_, ograd) = sq_loss(&out, &t);
        let grad = p.backward(&cache, &ograd).unwrap();
        for o in 0..2 {
            for i in 0..2 {
                let want: f64 =
                    (0..3).map(|r| (out.row(r)[o] - t.row(r)[o]) * z.row(r)[i]).sum();
                close(grad[o * 2 + i], want, 1e-12);
            }
            let want_b: f64 = (0..3).map(|r| out.row(r)[o] - t.row(r)[o]).sum();
            close(grad[4 + o], want_b, 1e-12);
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = MlpParams::glorot_init(&[2, 4, 2], &[Activation::Tanh, Activation::Identity], &mut rng)
            .unwrap();
        let z = Samples::new(vec![0.3, -0.8, 1.1, 0.2], 2).unwrap();
        let t = Samples::zeros(2, 2);
        let (out, cache) = p.forward(&z).unwrap();
        let (_, ograd) = sq_loss(&out, &t);
        let (_, ingrad) = p.backward_with_input_grad(&cache, &ograd).unwrap();
        let h = 1e-6;
        for r in 0..2 {
            for c in 0..2 {
                let mut zp = z.clone();
                zp.row_mut(r)[c] += h;
                let up = sq_loss(&p.forward(&zp).unwrap().0, &t).0;
                zp.row_mut(r)[c] -= 2.0 * h;
                let down = sq_loss(&p.forward(&zp).unwrap().0, &t).0;
                let fd = (up - down) / (2.0 * h);
                close(ingrad.row(r)[c], fd, 1e-6);
            }
        }
        // identity net passes gradients straight through
        let id = MlpParams::identity(2).unwrap();
        let (_, c2) = id.forward(&z).unwrap();
        let g = Samples::new(vec![0.5, -1.5, 2.0, 0.25], 2).unwrap();
        let (_, back) = id.backward_with_input_grad(&c2, &g).unwrap();
        assert_eq!(back.data(), g.data());
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p =
            MlpParams::glorot_init(&[1, 2, 1], &[Activation::Tanh, Activation::Identity], &mut rng)
                .unwrap();
        let z = Samples::from_1d(vec![0.4]);
        let (_, cache) = p.forward(&z).unwrap();
        p.theta_mut()[0] += 0.1;
        assert!(p.backward(&cache, &Samples::from_1d(vec![1.0])).is_err());
    }

    #[test]
    fn sgd_arithmetic_and_rejection() {
        let mut p = MlpParams::new(&[1, 1], &[Activation::Identity]).unwrap();
        p.theta_mut()[0] = 1.0;
        sgd_step(&mut p, &[2.0, 0.0], 0.001).unwrap();
        close(p.theta()[0], 0.998, 1e-15);
        let before = p.theta().to_vec();
        assert!(sgd_step(&mut p, &[f64::NAN, 0.0], 0.001).is_err());
        assert_eq!(p.theta(), &before[..]);
        sgd_step(&mut p, &[0.0, 0.0], 0.5).unwrap();
        assert_eq!(p.theta(), &before[..]);
    }

    #[test]
    fn adam_first_step_matches_hand_computation() {
        let mut p = MlpParams::new(&[1, 1], &[Activation::Identity]).unwrap();
        p.theta_mut().copy_from_slice(&[1.0, -2.0]);
        let mut st = AdamState::new(2);
        let g = [0.3, -0.01];
        adam_step(&mut p, &g, &mut st, 0.01).unwrap();
        for i in 0..2 {
            // after bias correction: mhat = g, vhat = g² ⇒ Δθ = −lr·g/(|g|+ε)
            let want = [1.0, -2.0][i] - 0.01 * g[i] / (g[i].abs() + 1e-8);
            close(p.theta()[i], want, 1e-12);
        }
        // zero gradient leaves parameters unchanged even with history
        let before = p.theta().to_vec();
        let mut st0 = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut st0, 0.01).unwrap();
        assert_eq!(p.theta(), &before[..]);
    }

    #[test]
    fn adam_sign_pattern_invariant_under_loss_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = MlpParams::glorot_init(&[2, 3, 1], &[Activation::Tanh, Activation::Identity], &mut rng)
            .unwrap();
        let grad: Vec<f64> =
            (0..base.n_params()).map(|_| (rng.random::<f64>() - 0.5) * 0.4).collect();
        // keep every |g| above the invariance threshold
        let grad: Vec<f64> =
            grad.iter().map(|g| if g.abs() < 1e-3 { 2e-3 * g.signum() } else { *g }).collect();
        let mut steps = Vec::new();
        for c in [1.0, 10.0] {
            let mut p = base.clone();
            let mut st = AdamState::new(p.n_params());
            let scaled: Vec<f64> = grad.iter().map(|g| c * g).collect();
            adam_step(&mut p, &scaled, &mut st, 0.01).unwrap();
            let delta: Vec<f64> =
                p.theta().iter().zip(base.theta()).map(|(a, b)| a - b).collect();
            steps.push(delta);
        }
        for (a, b) in steps[0].iter().zip(&steps[1]) {
            assert_eq!(a.signum(), b.signum(), "sign flipped under loss rescaling");
        }
    }

    #[test]
    fn grad_check_subsamples_large_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = MlpParams::glorot_init(
            &[4, 24, 24, 2],
            &[Activation::Tanh, Activation::Tanh, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        assert!(p.n_params() > 200);
        let z = {
            let data: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.5).collect();
            Samples::new(data, 4).unwrap()
        };
        let t = Samples::zeros(5, 2);
        let (out, cache) = p.forward(&z).unwrap();
        let (_, ograd) = sq_loss(&out, &t);
        let grad = p.backward(&cache, &ograd).unwrap();
        let worst = grad_check(
            &p,
            |q| {
                let (o, _) = q.forward(&z)?;
                Ok(sq_loss(&o, &t).0)
            },
            &grad,
            &mut rng,
        )
        .unwrap();
        assert!(worst < 1e-5, "worst relative error {worst:.3e}");
    }

    #[test]
    fn checkpoint_roundtrip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = MlpParams::glorot_init(
            &[10, 64, 64, 2],
            &[Activation::Tanh, Activation::Tanh, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let restored = MlpParams::from_checkpoint(&p.shape_manifest(), &p.to_bytes()).unwrap();
        assert_eq!(restored.dims(), p.dims());
        assert_eq!(restored.activations(), p.activations());
        assert_eq!(restored.theta(), p.theta());
    }

    #[test]
    fn checkpoint_validation() {
        let p = MlpParams::identity(2).unwrap();
        let bytes = p.to_bytes();
        assert!(MlpParams::from_checkpoint("activations identity\n", &bytes).is_err());
        assert!(MlpParams::from_checkpoint("dims 2 2\nactivations identity\n", &bytes[..8]).is_err());
        assert!(MlpParams::from_checkpoint(
            "dims 2 2\nactivations identity\nparams 7\n",
            &bytes
        )
        .is_err());
        let mut bad = bytes.clone();
        bad[..8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(MlpParams::from_checkpoint(&p.shape_manifest(), &bad).is_err());
    }

    #[test]
    fn construction_validation() {
        assert!(MlpParams::new(&[2], &[]).is_err());
        assert!(MlpParams::new(&[2, 0], &[Activation::Tanh]).is_err());
        assert!(MlpParams::new(&[2, 2], &[]).is_err());
        assert!(Activation::parse("relu").is_err());
    }
}
