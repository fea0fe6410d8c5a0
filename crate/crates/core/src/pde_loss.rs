//! The minimal surface residual, the area functional, and the Monte Carlo
//! loss terms used for training.
//!
//! The residual is evaluated in expanded form,
//!
//! ```text
//! R = −[ (1 + |∇u|²) Δu − ∇uᵀ H ∇u ] / (1 + |∇u|²)^{3/2} − f,
//! ```
//!
//! which only involves derivatives of `u` at the point itself: no quantity
//! is shared between collocation points.

use crate::autodiff::{DerivativeBundle, ScalarField};
use crate::boundary::SourceTerm;
use crate::error::{Error, Result};
use crate::network::{forward_batch, NetworkParams, Order};
use crate::sampling::{BoxDomain, SampleSet};

/// Residual of the minimal surface operator minus `f` at one point.
pub fn residual(bundle: &DerivativeBundle, f: f64) -> f64 {
    let d = bundle.dim();
    let g = &bundle.gradient;
    let q = 1.0 + g.iter().map(|v| v * v).sum::<f64>();
    let mut trace = 0.0;
    let mut ghg = 0.0;
    for i in 0..d {
        trace += bundle.hess(i, i);
        for j in 0..d {
            ghg += g[i] * bundle.hess(i, j) * g[j];
        }
    }
    -(q * trace - ghg) / (q * q.sqrt()) - f
}

/// Residual together with its derivatives with respect to the gradient
/// entries and the upper-triangular Hessian entries listed in `pairs`.
pub(crate) struct ResidualAdjoint {
    pub value: f64,
    pub d_grad: [f64; 4],
    pub d_hess: [f64; 10],
}

/// `grad` has `d` entries; `hess[q]` is the Hessian entry for `pairs[q]`.
pub(crate) fn residual_adjoint(grad: &[f64], hess: &[f64], pairs: &[(usize, usize)], f: f64) -> ResidualAdjoint {
    let d = grad.len();
    let q = 1.0 + grad.iter().map(|v| v * v).sum::<f64>();
    let mut trace = 0.0;
    let mut hg = [0.0; 4];
    let mut ghg = 0.0;
    for (&(i, j), &h) in pairs.iter().zip(hess) {
        if i == j {
            trace += h;
            hg[i] += h * grad[i];
            ghg += grad[i] * grad[i] * h;
        } else {
            hg[i] += h * grad[j];
            hg[j] += h * grad[i];
            ghg += 2.0 * grad[i] * grad[j] * h;
        }
    }
    let t = q * trace - ghg;
    let s = 1.0 / (q * q.sqrt()); // q^{-3/2}
    let mut out = ResidualAdjoint {
        value: -t * s - f,
        d_grad: [0.0; 4],
        d_hess: [0.0; 10],
    };
    for k in 0..d {
        let dt = 2.0 * grad[k] * trace - 2.0 * hg[k];
        out.d_grad[k] = -(s * dt - 3.0 * t * grad[k] * s / q);
    }
    for (qi, &(i, j)) in pairs.iter().enumerate() {
        let dt = if i == j { q - grad[i] * grad[i] } else { -2.0 * grad[i] * grad[j] };
        out.d_hess[qi] = -s * dt;
    }
    out
}

fn points_of<'a>(points: &'a [f64], d: usize, what: &str) -> Result<std::slice::ChunksExact<'a, f64>> {
    if points.is_empty() || !points.len().is_multiple_of(d) {
        return Err(Error::structure(format!(
            "{what} buffer of length {} is not a non-empty multiple of {d}",
            points.len()
        )));
    }
    Ok(points.chunks_exact(d))
}

/// Residual at every point of a row-major `n × d` buffer.
pub fn residuals<F: ScalarField + ?Sized>(points: &[f64], model: &F, f: SourceTerm) -> Result<Vec<f64>> {
    points_of(points, model.dim(), "interior point")?
        .enumerate()
        .map(|(i, x)| {
            let b = model
                .bundle(x)
                .map_err(|e| Error::eval(format!("derivatives at interior point {i} {x:?}: {e}")))?;
            if !b.is_finite() {
                return Err(Error::eval(format!("non-finite derivatives at interior point {i} {x:?}")));
            }
            Ok(residual(&b, f.value()))
        })
        .collect()
}

/// `(1/N) Σ R(x_i)²`, summed in index order.
pub fn interior_loss<F: ScalarField + ?Sized>(points: &[f64], model: &F, f: SourceTerm) -> Result<f64> {
    let r = residuals(points, model, f)?;
    Ok(r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64)
}

/// `(1/M) Σ (u(x_i) − g_i)²`, summed in index order.
pub fn boundary_loss<F: ScalarField + ?Sized>(points: &[f64], values: &[f64], model: &F) -> Result<f64> {
    let chunks = points_of(points, model.dim(), "boundary point")?;
    if chunks.len() != values.len() {
        return Err(Error::structure(format!(
            "{} boundary points but {} boundary values",
            chunks.len(),
            values.len()
        )));
    }
    let mut sum = 0.0;
    for (x, g) in chunks.zip(values) {
        let e = model.value(x)? - g;
        sum += e * e;
    }
    Ok(sum / values.len() as f64)
}

/// Unweighted loss terms, weights, and the weighted total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub interior: f64,
    pub boundary: f64,
    pub w_pde: f64,
    pub w_bdry: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.interior.is_finite() && self.boundary.is_finite() && self.total.is_finite()
    }
}

/// Checks that the weights are usable: finite, non-negative, not both zero.
pub fn check_weights(w_pde: f64, w_bdry: f64) -> Result<()> {
    for (name, w) in [("w_pde", w_pde), ("w_bdry", w_bdry)] {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::config(format!("{name} = {w} must be finite and non-negative")));
        }
    }
    if w_pde == 0.0 && w_bdry == 0.0 {
        return Err(Error::config("w_pde and w_bdry are both zero"));
    }
    Ok(())
}

/// `total = w_pde · interior + w_bdry · boundary`.
pub fn total_loss(interior: f64, boundary: f64, w_pde: f64, w_bdry: f64) -> Result<LossBreakdown> {
    check_weights(w_pde, w_bdry)?;
    Ok(LossBreakdown {
        interior,
        boundary,
        w_pde,
        w_bdry,
        total: w_pde * interior + w_bdry * boundary,
    })
}

/// Monte Carlo estimate of the area `∫ √(1 + |∇u|²) dx` over the box.
pub fn energy<F: ScalarField + ?Sized>(points: &[f64], model: &F, domain: &BoxDomain) -> Result<f64> {
    let values = energy_integrand(points, model)?;
    Ok(domain.volume() * values.iter().sum::<f64>() / values.len() as f64)
}

/// `√(1 + |∇u|²)` at every point.
pub fn energy_integrand<F: ScalarField + ?Sized>(points: &[f64], model: &F) -> Result<Vec<f64>> {
    points_of(points, model.dim(), "interior point")?
        .map(|x| {
            let b = model.bundle(x)?;
            Ok((1.0 + b.gradient.iter().map(|v| v * v).sum::<f64>()).sqrt())
        })
        .collect()
}

/// The training loss of a network on a sample set, and optionally its
/// gradient with respect to every network parameter.
///
/// Equal (up to summation order inside the matrix products) to combining
/// [`interior_loss`] and [`boundary_loss`] through [`total_loss`], but all
/// points are pushed through the network at once.
pub fn network_loss(
    params: &NetworkParams,
    samples: &SampleSet,
    f: SourceTerm,
    w_pde: f64,
    w_bdry: f64,
    with_gradient: bool,
) -> Result<(LossBreakdown, Option<Vec<f64>>)> {
    check_weights(w_pde, w_bdry)?;
    let d = params.input_dim();
    if samples.dim() != d {
        return Err(Error::structure(format!(
            "samples have dimension {}, network expects {d}",
            samples.dim()
        )));
    }

    let fwd = forward_batch(params, &samples.interior, Order::Hessian)?;
    let n = fwd.len();
    let pairs = fwd.pairs().to_vec();
    let mut interior_sum = 0.0;
    let mut adjoint = with_gradient.then(|| vec![0.0; fwd.channels() * n]);
    let mut grad = [0.0; 4];
    let mut hess = [0.0; 10];
    for p in 0..n {
        for (k, g) in grad[..d].iter_mut().enumerate() {
            *g = fwd.partial(p, k);
        }
        for (qi, h) in hess[..pairs.len()].iter_mut().enumerate() {
            *h = fwd.second(p, qi);
        }
        let r = residual_adjoint(&grad[..d], &hess[..pairs.len()], &pairs, f.value());
        interior_sum += r.value * r.value;
        if let Some(adj) = adjoint.as_mut() {
            let c = 2.0 * w_pde * r.value / n as f64;
            for k in 0..d {
                adj[(1 + k) * n + p] = c * r.d_grad[k];
            }
            for qi in 0..pairs.len() {
                adj[(1 + d + qi) * n + p] = c * r.d_hess[qi];
            }
        }
    }
    let interior = interior_sum / n as f64;

    let bfwd = forward_batch(params, &samples.boundary, Order::Value)?;
    let m = bfwd.len();
    let mut boundary_sum = 0.0;
    let mut badjoint = with_gradient.then(|| vec![0.0; m]);
    for (p, g) in samples.boundary_values.iter().enumerate() {
        let e = bfwd.value(p) - g;
        boundary_sum += e * e;
        if let Some(adj) = badjoint.as_mut() {
            adj[p] = 2.0 * w_bdry * e / m as f64;
        }
    }
    let boundary = boundary_sum / m as f64;
    let breakdown = total_loss(interior, boundary, w_pde, w_bdry)?;

    let gradient = match (adjoint, badjoint) {
        (Some(a), Some(b)) => {
            let mut gi = fwd.backward(params, &a)?;
            let gb = bfwd.backward(params, &b)?;
            for (x, y) in gi.iter_mut().zip(gb) {
                *x += y;
            }
            Some(gi)
        }
        _ => None,
    };
    Ok((breakdown, gradient))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{check_param_gradient, ExprGraph, GraphClosure, GraphFn, OnGraph, Var};
    use crate::boundary::lookup_builtin;
    use crate::network::{init_network, Activation, LayerSpec};
    use crate::sampling::BoundaryMode;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_net(d: usize, seed: u64) -> NetworkParams {
        let spec = [
            LayerSpec::new(6, Activation::Tanh),
            LayerSpec::new(5, Activation::Tanh),
            LayerSpec::new(1, Activation::Identity),
        ];
        let mut p = init_network(d, &spec, seed).unwrap();
        // non-zero biases so the test covers them
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
        for v in p.as_mut_slice() {
            *v += rng.random_range(-0.3..0.3);
        }
        p
    }

    fn bundle(grad: Vec<f64>, hess: Vec<f64>) -> DerivativeBundle {
        DerivativeBundle {
            value: 0.0,
            gradient: grad,
            hessian: hess,
        }
    }

    #[test]
    fn planes_and_paraboloid() {
        let plane = bundle(vec![3.0, 2.0], vec![0.0; 4]);
        assert_eq!(residual(&plane, 0.0), 0.0);
        assert_eq!(residual(&plane, 1.5), -1.5);
        let x2 = bundle(vec![0.0, 0.0], vec![2.0, 0.0, 0.0, 0.0]);
        assert_eq!(residual(&x2, 0.0), -2.0);
    }

    #[test]
    fn scherk_is_a_zero_of_the_residual() {
        let field = lookup_builtin("scherk").unwrap().analytic().unwrap().field();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = [rng.random_range(-1.3..1.3), rng.random_range(-1.3..1.3)];
            let r = residual(&field.bundle(&x).unwrap(), 0.0);
            assert!(r.abs() < 1e-8, "{r} at {x:?}");
        }
    }

    #[test]
    fn loss_examples() {
        let plane = OnGraph(GraphClosure::new(2, |g: &mut ExprGraph, x: &[Var]| {
            let a = g.scale(x[0], 3.0);
            let b = g.scale(x[1], 2.0);
            g.add(a, b)
        }));
        let pts = [0.1, 0.2, 0.7, 0.4, 0.5, 0.9];
        assert_eq!(interior_loss(&pts, &plane, SourceTerm::default()).unwrap(), 0.0);
        let c = SourceTerm::new(0.7).unwrap();
        assert!((interior_loss(&pts, &plane, c).unwrap() - 0.49).abs() < 1e-15);

        let sq = OnGraph(GraphClosure::new(2, |g: &mut ExprGraph, x: &[Var]| g.square(x[0])));
        assert_eq!(interior_loss(&[0.0, 0.0], &sq, SourceTerm::default()).unwrap(), 4.0);

        let zero = OnGraph(GraphClosure::new(2, |g: &mut ExprGraph, _: &[Var]| g.constant(0.0)));
        let b = boundary_loss(&[0.0, 0.0, 1.0, 1.0], &[0.1, -0.3], &zero).unwrap();
        assert!((b - 0.05).abs() < 1e-16);
        let one = OnGraph(GraphClosure::new(2, |g: &mut ExprGraph, _: &[Var]| g.constant(1.0)));
        assert_eq!(boundary_loss(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0], &one).unwrap(), 1.0);
    }

    #[test]
    fn total_loss_examples() {
        let t = total_loss(0.05, 0.04, 1.0, 3.0).unwrap();
        assert!((t.total - 0.17).abs() < 1e-15);
        assert_eq!(total_loss(0.2, 9.0, 1.0, 0.0).unwrap().total, 0.2);
        assert_eq!(total_loss(0.2, 0.5, 1.0, 0.3).unwrap().total, 0.2 + 0.3 * 0.5);
        assert!(matches!(total_loss(1.0, 1.0, 0.0, 0.0), Err(Error::Config(_))));
        assert!(total_loss(1.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn energy_examples() {
        let dom = BoxDomain::unit(2).unwrap();
        let pts = crate::sampling::sample_interior(&dom, 50, 0).unwrap();
        let c = OnGraph(GraphClosure::new(2, |g: &mut ExprGraph, _: &[Var]| g.constant(4.0)));
        assert_eq!(energy(&pts, &c, &dom).unwrap(), 1.0);
        let x1 = OnGraph(GraphClosure::new(2, |_: &mut ExprGraph, x: &[Var]| x[0]));
        assert!((energy(&pts, &x1, &dom).unwrap() - 2f64.sqrt()).abs() < 1e-14);
    }

    /// `−div(∇u/√(1+|∇u|²)) − f` built node by node in the graph.
    fn flux_divergence_residual<F: GraphFn>(model: &F, x: &[f64]) -> f64 {
        let mut g = ExprGraph::new();
        let inputs: Vec<Var> = x.iter().map(|&v| g.input(v)).collect();
        let u = model.build(&mut g, &inputs).unwrap();
        let grad = g.gradient_nodes(u, &inputs);
        let sq: Vec<Var> = grad.iter().map(|&v| g.square(v)).collect();
        let s = g.sum(&sq);
        let one = g.constant(1.0);
        let q = g.add(one, s);
        let root = g.sqrt(q);
        let mut div = g.constant(0.0);
        for (k, &gk) in grad.iter().enumerate() {
            let flux = g.div(gk, root);
            let dflux = g.gradient_nodes(flux, &inputs);
            div = g.add(div, dflux[k]);
        }
        -g.value(div)
    }

    #[test]
    fn expanded_form_matches_flux_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 2..=4 {
            for seed in 0..4 {
                let net = small_net(d, seed);
                for _ in 0..5 {
                    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let a = residual(&net.bundle(&x).unwrap(), 0.0);
                    let b = flux_divergence_residual(&net, &x);
                    assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "d={d}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for d in 2..=4 {
            let pairs = crate::network::hessian_pairs(d);
            for _ in 0..10 {
                let grad: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let hess: Vec<f64> = pairs.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
                let r = residual_adjoint(&grad, &hess, &pairs, 0.3);
                let mut b = bundle(grad.clone(), vec![0.0; d * d]);
                for (&(i, j), &h) in pairs.iter().zip(&hess) {
                    b.hessian[i * d + j] = h;
                    b.hessian[j * d + i] = h;
                }
                assert!((r.value - residual(&b, 0.3)).abs() < 1e-13);
                let h = 1e-6;
                for k in 0..d {
                    let mut p = grad.clone();
                    p[k] += h;
                    let up = residual_adjoint(&p, &hess, &pairs, 0.3).value;
                    p[k] -= 2.0 * h;
                    let dn = residual_adjoint(&p, &hess, &pairs, 0.3).value;
                    assert!((r.d_grad[k] - (up - dn) / (2.0 * h)).abs() < 1e-7);
                }
                for qi in 0..pairs.len() {
                    let mut p = hess.clone();
                    p[qi] += h;
                    let up = residual_adjoint(&grad, &p, &pairs, 0.3).value;
                    p[qi] -= 2.0 * h;
                    let dn = residual_adjoint(&grad, &p, &pairs, 0.3).value;
                    assert!((r.d_hess[qi] - (up - dn) / (2.0 * h)).abs() < 1e-7);
                }
            }
        }
    }

    fn samples(d: usize, name: &str) -> SampleSet {
        let g = lookup_builtin(name).unwrap();
        SampleSet::draw(&BoxDomain::unit(d).unwrap(), &g, BoundaryMode::Wireframe, 40, 5, 2).unwrap()
    }

    #[test]
    fn batched_loss_equals_pointwise_loss() {
        for (d, name) in [(2, "radial_sine_2d"), (3, "trig_sum_3d"), (4, "radial_sine_4d")] {
            let net = small_net(d, 3);
            let s = samples(d, name);
            let f = SourceTerm::new(0.2).unwrap();
            let (fast, _) = network_loss(&net, &s, f, 1.0, 3.0, false).unwrap();
            let i = interior_loss(&s.interior, &net, f).unwrap();
            let b = boundary_loss(&s.boundary, &s.boundary_values, &net).unwrap();
            let slow = total_loss(i, b, 1.0, 3.0).unwrap();
            assert!((fast.interior - slow.interior).abs() < 1e-12 * slow.interior.max(1.0));
            assert!((fast.boundary - slow.boundary).abs() < 1e-12 * slow.boundary.max(1.0));
            assert!((fast.total - slow.total).abs() < 1e-12 * slow.total.max(1.0));
        }
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        for (d, name) in [(2, "radial_sine_2d"), (3, "abs_cos_3d")] {
            let net = small_net(d, 4);
            let s = samples(d, name);
            let f = SourceTerm::default();
            let (_, grad) = network_loss(&net, &s, f, 1.0, 3.0, true).unwrap();
            let grad = grad.unwrap();
            let stat = check_param_gradient(
                |theta| Ok(network_loss(&net.with_values(theta.to_vec())?, &s, f, 1.0, 3.0, false)?.0.total),
                net.as_slice(),
                &grad,
                1e-5,
            )
            .unwrap();
            assert!(stat.relative < 1e-6, "{stat:?}");
        }
    }

    #[test]
    fn residual_uses_only_local_derivatives() {
        let net = small_net(2, 9);
        let mut pts = vec![0.1, 0.2, 0.4, 0.8, 0.9, 0.3];
        let before = residuals(&pts, &net, SourceTerm::default()).unwrap();
        pts[2] += 0.05;
        let after = residuals(&pts, &net, SourceTerm::default()).unwrap();
        assert_eq!(before[0], after[0]);
        assert_eq!(before[2], after[2]);
        assert_ne!(before[1], after[1]);
    }

    proptest! {
        #[test]
        fn constant_shift_leaves_residual_unchanged(
            grad in prop::collection::vec(-5.0f64..5.0, 3),
            hess in prop::collection::vec(-5.0f64..5.0, 6),
            c in -100.0f64..100.0,
            f in -2.0f64..2.0,
        ) {
            let mut h = vec![0.0; 9];
            for (q, &(i, j)) in crate::network::hessian_pairs(3).iter().enumerate() {
                h[i * 3 + j] = hess[q];
                h[j * 3 + i] = hess[q];
            }
            let a = DerivativeBundle { value: 0.0, gradient: grad.clone(), hessian: h.clone() };
            let b = DerivativeBundle { value: c, gradient: grad, hessian: h };
            prop_assert_eq!(residual(&a, f), residual(&b, f));
            prop_assert!(residual(&a, f).is_finite());
        }

        #[test]
        fn affine_residual_is_minus_f(
            grad in prop::collection::vec(-1e3f64..1e3, 2..=4),
            f in -10.0f64..10.0,
        ) {
            let d = grad.len();
            let b = DerivativeBundle { value: 1.0, gradient: grad, hessian: vec![0.0; d * d] };
            prop_assert_eq!(residual(&b, f), -f);
        }

        #[test]
        fn losses_nonnegative(misfits in prop::collection::vec(-10.0f64..10.0, 1..20)) {
            let zero = OnGraph(GraphClosure::new(2, |g: &mut ExprGraph, _: &[Var]| g.constant(0.0)));
            let pts = vec![0.5; 2 * misfits.len()];
            let l = boundary_loss(&pts, &misfits, &zero).unwrap();
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, misfits.iter().all(|&m| m == 0.0));
        }
    }
}
