//! Batched propagation of value, input gradient and input Hessian through
//! the network, and the matching reverse pass to parameter gradients.
//!
//! Every layer keeps its activations as a `width × (C·n)` row-major matrix
//! whose columns are grouped in channel blocks of `n` points: channel 0 is
//! the value, channels `1..=d` the partial derivatives, and the remaining
//! `d(d+1)/2` channels the upper-triangular second derivatives in row order.
//! The affine part of a layer acts on every channel alike (the bias only
//! touches the value channel), so each layer is one matrix product; the
//! activation mixes channels point-wise by the chain rule:
//!
//! ```text
//! a   = σ(z)
//! a_k = σ'(z) z_k
//! a_kl = σ''(z) z_k z_l + σ'(z) z_kl
//! ```

use crate::autodiff::{DerivativeBundle, KinkSite};
use crate::error::{Error, Result};

use super::{Activation, NetworkParams};

/// How many derivative orders to carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

impl Order {
    pub fn channels(self, d: usize) -> usize {
        match self {
            Order::Value => 1,
            Order::Gradient => 1 + d,
            Order::Hessian => 1 + d + d * (d + 1) / 2,
        }
    }
}

/// Upper-triangular index pairs `(i, j)`, `i ≤ j`, in row order.
pub fn hessian_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect()
}

struct HiddenCache {
    /// Pre-activation channels, `outputs × C·n`.
    z: Vec<f64>,
    /// σ', σ'', σ''' at the value channel, `outputs × n` each.
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

/// Cached forward state for a batch of points.
pub struct BatchForward {
    d: usize,
    n: usize,
    order: Order,
    pairs: Vec<(usize, usize)>,
    /// Input matrix of every layer (`inputs × C·n`).
    layer_inputs: Vec<Vec<f64>>,
    hidden: Vec<Option<HiddenCache>>,
    activations: Vec<Activation>,
    /// Output channels, `C·n`.
    output: Vec<f64>,
}

/// `c = a · b` with explicit strides (row stride, column stride).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c[..m * n].fill(0.0);
        return;
    }
    // SAFETY: slices are sized for the given dimensions and strides by every
    // caller; matrixmultiply reads a/b and writes c inside those bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Propagates `n` points (row-major `n × d` in `points`) through the network.
pub fn forward_batch(params: &NetworkParams, points: &[f64], order: Order) -> Result<BatchForward> {
    let d = params.input_dim();
    if points.is_empty() || !points.len().is_multiple_of(d) {
        return Err(Error::structure(format!(
            "point buffer of length {} is not a non-empty multiple of {d}",
            points.len()
        )));
    }
    let n = points.len() / d;
    let ch = order.channels(d);
    let cn = ch * n;
    let pairs = if order == Order::Hessian {
        hessian_pairs(d)
    } else {
        Vec::new()
    };

    let mut input = vec![0.0; d * cn];
    for (p, x) in points.chunks_exact(d).enumerate() {
        for k in 0..d {
            input[k * cn + p] = x[k];
        }
    }
    if order != Order::Value {
        for k in 0..d {
            input[k * cn + (1 + k) * n..k * cn + (2 + k) * n].fill(1.0);
        }
    }

    let layers = params.num_layers();
    let mut layer_inputs = Vec::with_capacity(layers);
    let mut hidden = Vec::with_capacity(layers);
    let mut activations = Vec::with_capacity(layers);
    let mut current = input;

    for l in 0..layers {
        let layer = params.layer(l);
        let out = layer.outputs;
        let mut z = vec![0.0; out * cn];
        gemm(out, layer.inputs, cn, layer.weights, layer.inputs, 1, &current, cn, 1, &mut z);
        for r in 0..out {
            let b = layer.bias[r];
            for v in &mut z[r * cn..r * cn + n] {
                *v += b;
            }
        }
        layer_inputs.push(std::mem::take(&mut current));
        activations.push(layer.activation);

        if layer.activation == Activation::Identity {
            hidden.push(None);
            current = z;
            continue;
        }

        let mut a = vec![0.0; out * cn];
        let mut d1 = vec![0.0; out * n];
        let mut d2 = vec![0.0; out * n];
        let mut d3 = vec![0.0; out * n];
        for r in 0..out {
            let zr = &z[r * cn..(r + 1) * cn];
            let ar = &mut a[r * cn..(r + 1) * cn];
            let (s1, s2, s3) = (
                &mut d1[r * n..(r + 1) * n],
                &mut d2[r * n..(r + 1) * n],
                &mut d3[r * n..(r + 1) * n],
            );
            for p in 0..n {
                (ar[p], s1[p], s2[p], s3[p]) = layer.activation.eval(zr[p]);
            }
            // Channel by channel, so every loop below runs over contiguous slices.
            for k in 1..=d.min(ch - 1) {
                let (zk, ak) = (&zr[k * n..(k + 1) * n], &mut ar[k * n..(k + 1) * n]);
                for p in 0..n {
                    ak[p] = s1[p] * zk[p];
                }
            }
            for (q, &(i, j)) in pairs.iter().enumerate() {
                let c = 1 + d + q;
                let zi = &zr[(1 + i) * n..(2 + i) * n];
                let zj = &zr[(1 + j) * n..(2 + j) * n];
                let zc = &zr[c * n..(c + 1) * n];
                let ac = &mut ar[c * n..(c + 1) * n];
                for p in 0..n {
                    ac[p] = s2[p] * zi[p] * zj[p] + s1[p] * zc[p];
                }
            }
        }
        hidden.push(Some(HiddenCache { z, d1, d2, d3 }));
        current = a;
    }

    let output = current;
    if let Some(k) = output.iter().position(|v| !v.is_finite()) {
        return Err(Error::eval(format!(
            "network output channel {} at point {} is {}",
            k / n,
            k % n,
            output[k]
        )));
    }

    Ok(BatchForward {
        d,
        n,
        order,
        pairs,
        layer_inputs,
        hidden,
        activations,
        output,
    })
}

impl BatchForward {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn channels(&self) -> usize {
        self.order.channels(self.d)
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn value(&self, p: usize) -> f64 {
        self.output[p]
    }

    /// `∂u/∂x_k` at point `p` (requires at least [`Order::Gradient`]).
    pub fn partial(&self, p: usize, k: usize) -> f64 {
        self.output[(1 + k) * self.n + p]
    }

    /// Second derivative for pair index `q` of [`hessian_pairs`].
    pub fn second(&self, p: usize, q: usize) -> f64 {
        self.output[(1 + self.d + q) * self.n + p]
    }

    /// Full bundle at point `p`; missing orders are left at zero.
    pub fn bundle(&self, p: usize) -> DerivativeBundle {
        let d = self.d;
        let mut b = DerivativeBundle::zeros(d);
        b.value = self.value(p);
        if self.order != Order::Value {
            for k in 0..d {
                b.gradient[k] = self.partial(p, k);
            }
        }
        for (q, &(i, j)) in self.pairs.iter().enumerate() {
            let v = self.second(p, q);
            b.hessian[i * d + j] = v;
            b.hessian[j * d + i] = v;
        }
        b
    }

    /// ReLU units whose pre-activation at point `p` lies within the reach of
    /// a stencil of half-width `h` (needs at least [`Order::Gradient`]).
    pub fn relu_kinks(&self, p: usize, h: f64) -> Vec<KinkSite> {
        let n = self.n;
        let cn = self.channels() * n;
        let mut sites = Vec::new();
        for (l, cache) in self.hidden.iter().enumerate() {
            let (Some(cache), Activation::Relu) = (cache, self.activations[l]) else {
                continue;
            };
            let rows = cache.z.len() / cn;
            for r in 0..rows {
                let z = cache.z[r * cn + p];
                let reach: f64 = (1..self.channels().min(1 + self.d))
                    .map(|k| cache.z[r * cn + k * n + p].abs())
                    .sum();
                if z.abs() <= h * reach {
                    sites.push(KinkSite {
                        location: format!("layer {l} unit {r}"),
                        argument: z,
                    });
                }
            }
        }
        sites
    }

    /// Parameter gradient for an output adjoint laid out like the output
    /// channels (`C·n`, channel-major).
    pub fn backward(&self, params: &NetworkParams, out_adjoint: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let ch = self.channels();
        let cn = ch * n;
        if out_adjoint.len() != cn {
            return Err(Error::structure(format!(
                "output adjoint has length {}, expected {cn}",
                out_adjoint.len()
            )));
        }
        let mut grad = vec![0.0; params.num_params()];
        let mut abar = out_adjoint.to_vec();

        for l in (0..params.num_layers()).rev() {
            let layer = params.layer(l);
            let shape = params.shapes()[l];
            let out = layer.outputs;
            let zbar = match &self.hidden[l] {
                None => abar,
                Some(cache) => self.activation_backward(cache, &abar, out),
            };

            let a_in = &self.layer_inputs[l];
            gemm(
                out,
                cn,
                layer.inputs,
                &zbar,
                cn,
                1,
                a_in,
                1,
                cn,
                &mut grad[shape.offset..shape.bias_offset()],
            );
            for r in 0..out {
                grad[shape.bias_offset() + r] = zbar[r * cn..r * cn + n].iter().sum();
            }

            if l > 0 {
                let mut prev = vec![0.0; layer.inputs * cn];
                gemm(layer.inputs, out, cn, layer.weights, 1, layer.inputs, &zbar, cn, 1, &mut prev);
                abar = prev;
            } else {
                abar = Vec::new();
            }
        }
        Ok(grad)
    }

    fn activation_backward(&self, cache: &HiddenCache, abar: &[f64], rows: usize) -> Vec<f64> {
        let d = self.d;
        let n = self.n;
        let ch = self.channels();
        let cn = ch * n;
        let grad_channels = if self.order == Order::Value { 0 } else { d };
        let mut zbar = vec![0.0; rows * cn];
        for r in 0..rows {
            let z = &cache.z[r * cn..(r + 1) * cn];
            let ab = &abar[r * cn..(r + 1) * cn];
            let zb = &mut zbar[r * cn..(r + 1) * cn];
            let s1 = &cache.d1[r * n..(r + 1) * n];
            let s2 = &cache.d2[r * n..(r + 1) * n];
            let s3 = &cache.d3[r * n..(r + 1) * n];
            let (zb0, zb_rest) = zb.split_at_mut(n);
            for p in 0..n {
                zb0[p] = s1[p] * ab[p];
            }
            for k in 1..=grad_channels {
                let (abk, zk) = (&ab[k * n..(k + 1) * n], &z[k * n..(k + 1) * n]);
                let zbk = &mut zb_rest[(k - 1) * n..k * n];
                for p in 0..n {
                    zbk[p] = s1[p] * abk[p];
                    zb0[p] += s2[p] * abk[p] * zk[p];
                }
            }
            for (q, &(i, j)) in self.pairs.iter().enumerate() {
                let c = 1 + d + q;
                let abq = &ab[c * n..(c + 1) * n];
                let zi = &z[(1 + i) * n..(2 + i) * n];
                let zj = &z[(1 + j) * n..(2 + j) * n];
                let zc = &z[c * n..(c + 1) * n];
                for p in 0..n {
                    zb0[p] += abq[p] * (s3[p] * zi[p] * zj[p] + s2[p] * zc[p]);
                }
                let zbc = &mut zb_rest[(c - 1) * n..c * n];
                for p in 0..n {
                    zbc[p] = s1[p] * abq[p];
                }
                if i == j {
                    let zbi = &mut zb_rest[i * n..(i + 1) * n];
                    for p in 0..n {
                        zbi[p] += 2.0 * s2[p] * abq[p] * zi[p];
                    }
                } else {
                    let zbi = &mut zb_rest[i * n..(i + 1) * n];
                    for p in 0..n {
                        zbi[p] += s2[p] * abq[p] * zj[p];
                    }
                    let zbj = &mut zb_rest[j * n..(j + 1) * n];
                    for p in 0..n {
                        zbj[p] += s2[p] * abq[p] * zi[p];
                    }
                }
            }
        }
        zbar
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{eval_with_input_derivatives, param_gradient, ExprGraph};
    use crate::network::{canonical_spec, forward, init_network, LayerSpec};

    fn small_net(act: Activation, seed: u64, d: usize) -> NetworkParams {
        let spec = [
            LayerSpec::new(5, act),
            LayerSpec::new(4, act),
            LayerSpec::new(1, Activation::Identity),
        ];
        let mut p = init_network(d, &spec, seed).unwrap();
        // non-zero biases so they are exercised too
        let vals: Vec<f64> = p
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &v)| if v == 0.0 { 0.1 * ((i % 7) as f64 - 3.0) } else { v })
            .collect();
        p = p.with_values(vals).unwrap();
        p
    }

    #[test]
    fn pairs_in_row_order() {
        assert_eq!(hessian_pairs(2), vec![(0, 0), (0, 1), (1, 1)]);
        assert_eq!(hessian_pairs(3).len(), 6);
        assert_eq!(hessian_pairs(4).len(), 10);
    }

    #[test]
    fn batch_matches_graph_bundle() {
        for d in 2..=4 {
            let p = small_net(Activation::Tanh, d as u64, d);
            let pts: Vec<f64> = (0..3 * d).map(|i| 0.1 + 0.07 * i as f64).collect();
            let fwd = forward_batch(&p, &pts, Order::Hessian).unwrap();
            for (k, x) in pts.chunks(d).enumerate() {
                let reference = eval_with_input_derivatives(&p, x).unwrap();
                let got = fwd.bundle(k);
                assert!((got.value - reference.value).abs() < 1e-13);
                assert!((got.value - forward(&p, x).unwrap()).abs() < 1e-13);
                for (a, b) in got.gradient.iter().zip(&reference.gradient) {
                    assert!((a - b).abs() < 1e-13);
                }
                for (a, b) in got.hessian.iter().zip(&reference.hessian) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn backward_matches_graph_for_weighted_channels() {
        // loss = Σ_p [c0 u + Σ ck u_k + Σ cq u_q] at each point, arbitrary
        // coefficients: checks every channel's adjoint path.
        let d = 3;
        let p = small_net(Activation::Tanh, 4, d);
        let pts = [0.2, 0.4, 0.9, 0.7, 0.1, 0.3];
        let fwd = forward_batch(&p, &pts, Order::Hessian).unwrap();
        let ch = Order::Hessian.channels(d);
        let n = 2;
        let coef: Vec<f64> = (0..ch * n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let got = fwd.backward(&p, &coef).unwrap();

        let mut g = ExprGraph::new();
        let leaves: Vec<_> = p.as_slice().iter().map(|&v| g.param(v)).collect();
        let mut terms = Vec::new();
        for (k, x) in pts.chunks(d).enumerate() {
            let inputs: Vec<_> = x.iter().map(|&v| g.input(v)).collect();
            let out = p.build_from(&mut g, &inputs, &leaves);
            let so = crate::autodiff::second_order_nodes(&mut g, out, &inputs);
            let mut chans = vec![so.value];
            chans.extend(&so.gradient);
            for &(i, j) in &hessian_pairs(d) {
                chans.push(so.hessian[i * d + j]);
            }
            for (c, &node) in chans.iter().enumerate() {
                let w = g.constant(coef[c * n + k]);
                terms.push(g.mul(w, node));
            }
        }
        let loss = g.sum(&terms);
        let reference = param_gradient(&g, loss, &leaves).unwrap();
        for (a, b) in got.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn value_order_backward_is_plain_backprop() {
        let p = init_network(2, &canonical_spec(Activation::Tanh), 3).unwrap();
        let pts = [0.3, 0.6];
        let fwd = forward_batch(&p, &pts, Order::Value).unwrap();
        let got = fwd.backward(&p, &[1.0]).unwrap();
        let mut g = ExprGraph::new();
        let inputs: Vec<_> = pts.iter().map(|&v| g.input(v)).collect();
        let (out, leaves) = p.build_with_param_leaves(&mut g, &inputs).unwrap();
        let reference = g.gradient_values(out, &leaves);
        for (a, b) in got.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn relu_network_kinks_reported() {
        let layers = vec![
            (LayerSpec::new(1, Activation::Relu), vec![1.0, -1.0], vec![0.0]),
            (LayerSpec::new(1, Activation::Identity), vec![1.0], vec![0.0]),
        ];
        let p = NetworkParams::from_layers(2, &layers).unwrap();
        let fwd = forward_batch(&p, &[0.5, 0.5, 0.9, 0.1], Order::Gradient).unwrap();
        assert_eq!(fwd.relu_kinks(0, 1e-4).len(), 1);
        assert!(fwd.relu_kinks(1, 1e-4).is_empty());
    }

    #[test]
    fn rejects_ragged_points() {
        let p = small_net(Activation::Tanh, 1, 2);
        assert!(forward_batch(&p, &[0.1, 0.2, 0.3], Order::Value).is_err());
        assert!(forward_batch(&p, &[], Order::Value).is_err());
    }
}
