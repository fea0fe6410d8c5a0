//! Differentiation engine.
//!
//! [`ExprGraph`] is a general scalar graph with nested reverse sweeps; it
//! backs analytic adapters, user expressions and the reference evaluation
//! of small networks. Trained networks use the batched layer-wise
//! propagation in [`crate::network::batch`], which produces the same
//! [`DerivativeBundle`] contract much faster.

mod check;
mod graph;

pub use check::{check_derivatives, check_param_gradient, DerivativeReport, ErrorStat, KinkSite};
pub use graph::{ExprGraph, Op, Var};

use crate::error::{Error, Result};

/// Value, input gradient and input Hessian of a scalar function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeBundle {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `d × d`, symmetric.
    pub hessian: Vec<f64>,
}

impl DerivativeBundle {
    pub fn zeros(d: usize) -> Self {
        DerivativeBundle {
            value: 0.0,
            gradient: vec![0.0; d],
            hessian: vec![0.0; d * d],
        }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.dim() + j]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.gradient.iter().all(|v| v.is_finite())
            && self.hessian.iter().all(|v| v.is_finite())
    }
}

/// A function that can record itself onto an [`ExprGraph`].
pub trait GraphFn {
    fn dim(&self) -> usize;

    /// Appends the computation of `f(inputs)` and returns its node.
    fn build(&self, graph: &mut ExprGraph, inputs: &[Var]) -> Result<Var>;
}

/// Closure adapter for [`GraphFn`].
pub struct GraphClosure<F> {
    dim: usize,
    f: F,
}

impl<F> GraphClosure<F>
where
    F: Fn(&mut ExprGraph, &[Var]) -> Var,
{
    pub fn new(dim: usize, f: F) -> Self {
        GraphClosure { dim, f }
    }
}

impl<F> GraphFn for GraphClosure<F>
where
    F: Fn(&mut ExprGraph, &[Var]) -> Var,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn build(&self, graph: &mut ExprGraph, inputs: &[Var]) -> Result<Var> {
        Ok((self.f)(graph, inputs))
    }
}

/// A twice-differentiable model `u: R^d → R` as seen by the loss terms.
pub trait ScalarField {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn bundle(&self, x: &[f64]) -> Result<DerivativeBundle>;

    /// Non-differentiable sites that a finite-difference stencil of
    /// half-width `h` around `x` would straddle.
    fn kink_sites(&self, _x: &[f64], _h: f64) -> Result<Vec<KinkSite>> {
        Ok(Vec::new())
    }
}

impl<T: ScalarField + ?Sized> ScalarField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (**self).value(x)
    }
    fn bundle(&self, x: &[f64]) -> Result<DerivativeBundle> {
        (**self).bundle(x)
    }
    fn kink_sites(&self, x: &[f64], h: f64) -> Result<Vec<KinkSite>> {
        (**self).kink_sites(x, h)
    }
}

/// Evaluates any [`GraphFn`] through the graph engine.
pub struct OnGraph<F>(pub F);

impl<F: GraphFn> ScalarField for OnGraph<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_len(self.0.dim(), x)?;
        let mut g = ExprGraph::new();
        let inputs: Vec<Var> = x.iter().map(|&v| g.input(v)).collect();
        let out = self.0.build(&mut g, &inputs)?;
        g.check_finite()?;
        Ok(g.value(out))
    }

    fn bundle(&self, x: &[f64]) -> Result<DerivativeBundle> {
        eval_with_input_derivatives(&self.0, x)
    }

    fn kink_sites(&self, x: &[f64], h: f64) -> Result<Vec<KinkSite>> {
        check_len(self.0.dim(), x)?;
        let mut g = ExprGraph::new();
        let inputs: Vec<Var> = x.iter().map(|&v| g.input(v)).collect();
        let out = self.0.build(&mut g, &inputs)?;
        let mut sites = Vec::new();
        for node in g.kink_nodes(out, &inputs) {
            let arg = match g.op(node) {
                Op::Relu(a) | Op::Abs(a) => a,
                _ => continue,
            };
            let z = g.value(arg);
            let reach: f64 = g.gradient_values(arg, &inputs).iter().map(|v| v.abs()).sum();
            if z.abs() <= h * reach {
                sites.push(KinkSite {
                    location: format!("{} node {node}", g.op(node).name()),
                    argument: z,
                });
            }
        }
        Ok(sites)
    }
}

pub(crate) fn check_len<T>(d: usize, x: &[T]) -> Result<()> {
    if x.len() != d {
        return Err(Error::structure(format!(
            "point has {} coordinates, model expects {d}",
            x.len()
        )));
    }
    Ok(())
}

/// Graph nodes for the value, gradient and Hessian of `output` with respect
/// to `inputs`. The Hessian is row-major and exactly symmetric (the upper
/// triangle is computed, the lower mirrors it).
#[derive(Clone, Debug)]
pub struct SecondOrderNodes {
    pub value: Var,
    pub gradient: Vec<Var>,
    pub hessian: Vec<Var>,
}

pub fn second_order_nodes(graph: &mut ExprGraph, output: Var, inputs: &[Var]) -> SecondOrderNodes {
    let d = inputs.len();
    let gradient = graph.gradient_nodes(output, inputs);
    let mut hessian = vec![gradient[0]; d * d];
    for i in 0..d {
        let row = graph.gradient_nodes(gradient[i], &inputs[i..]);
        for (k, j) in (i..d).enumerate() {
            hessian[i * d + j] = row[k];
            hessian[j * d + i] = row[k];
        }
    }
    SecondOrderNodes {
        value: output,
        gradient,
        hessian,
    }
}

impl SecondOrderNodes {
    pub fn to_bundle(&self, graph: &ExprGraph) -> DerivativeBundle {
        DerivativeBundle {
            value: graph.value(self.value),
            gradient: self.gradient.iter().map(|&v| graph.value(v)).collect(),
            hessian: self.hessian.iter().map(|&v| graph.value(v)).collect(),
        }
    }
}

/// Exact value, gradient and Hessian of `f` at `x` via nested reverse sweeps.
pub fn eval_with_input_derivatives<F: GraphFn + ?Sized>(f: &F, x: &[f64]) -> Result<DerivativeBundle> {
    check_len(f.dim(), x)?;
    let mut g = ExprGraph::new();
    let inputs: Vec<Var> = x.iter().map(|&v| g.input(v)).collect();
    let out = f.build(&mut g, &inputs)?;
    let nodes = second_order_nodes(&mut g, out, &inputs);
    g.check_finite()?;
    Ok(nodes.to_bundle(&g))
}

/// Gradient of `loss` with respect to the given parameter leaves.
///
/// The loss may contain input-derivative nodes produced by
/// [`second_order_nodes`]; the sweep differentiates through them.
pub fn param_gradient(graph: &ExprGraph, loss: Var, params: &[Var]) -> Result<Vec<f64>> {
    for &p in params {
        if p.index() >= graph.len() || !matches!(graph.op(p), Op::Param(_)) {
            return Err(Error::structure(format!("{p} is not a parameter of this graph")));
        }
    }
    graph.check_finite()?;
    Ok(graph.gradient_values(loss, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine() -> GraphClosure<impl Fn(&mut ExprGraph, &[Var]) -> Var> {
        GraphClosure::new(2, |g: &mut ExprGraph, x: &[Var]| {
            let a = g.scale(x[0], 3.0);
            let b = g.scale(x[1], 2.0);
            g.add(a, b)
        })
    }

    fn scherk() -> GraphClosure<impl Fn(&mut ExprGraph, &[Var]) -> Var> {
        GraphClosure::new(2, |g: &mut ExprGraph, x: &[Var]| {
            let c2 = g.cos(x[1]);
            let c1 = g.cos(x[0]);
            let q = g.div(c2, c1);
            g.log(q)
        })
    }

    #[test]
    fn affine_bundle() {
        let b = eval_with_input_derivatives(&affine(), &[0.4, 0.7]).unwrap();
        assert!((b.value - 2.6).abs() < 1e-15);
        assert_eq!(b.gradient, vec![3.0, 2.0]);
        assert!(b.hessian.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn monomial_bundle() {
        let f = GraphClosure::new(2, |g: &mut ExprGraph, x: &[Var]| g.mul(x[0], x[0]));
        let b = eval_with_input_derivatives(&f, &[0.0, 0.0]).unwrap();
        assert_eq!(b.value, 0.0);
        assert_eq!(b.gradient, vec![0.0, 0.0]);
        assert_eq!(b.hessian, vec![2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn scherk_gradient_is_tangent() {
        let b = eval_with_input_derivatives(&scherk(), &[0.3, 0.2]).unwrap();
        assert!((b.gradient[0] - 0.3f64.tan()).abs() < 1e-14);
        assert!((b.gradient[1] + 0.2f64.tan()).abs() < 1e-14);
        // u_11 = sec² x1, u_22 = -sec² x2, u_12 = 0
        assert!((b.hess(0, 0) - 1.0 / 0.3f64.cos().powi(2)).abs() < 1e-13);
        assert!((b.hess(1, 1) + 1.0 / 0.2f64.cos().powi(2)).abs() < 1e-13);
        assert_eq!(b.hess(0, 1), 0.0);
    }

    #[test]
    fn log_of_negative_is_eval_error() {
        let f = GraphClosure::new(1, |g: &mut ExprGraph, x: &[Var]| g.log(x[0]));
        let err = eval_with_input_derivatives(&f, &[-1.0]).unwrap_err();
        assert!(matches!(err, Error::Eval(_)));
    }

    #[test]
    fn wrong_length_is_structural() {
        let err = eval_with_input_derivatives(&affine(), &[0.1]).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn param_gradient_rejects_non_parameters() {
        let mut g = ExprGraph::new();
        let x = g.input(1.0);
        let w = g.param(2.0);
        let y = g.mul(x, w);
        assert!(param_gradient(&g, y, &[x]).is_err());
        assert_eq!(param_gradient(&g, y, &[w]).unwrap(), vec![1.0]);
    }

    #[test]
    fn loss_at_minimum_has_zero_gradient() {
        // (w*x - c)^2 with w*x == c
        let mut g = ExprGraph::new();
        let x = g.input(2.0);
        let w = g.param(1.5);
        let u = g.mul(w, x);
        let c = g.constant(3.0);
        let r = g.sub(u, c);
        let loss = g.square(r);
        assert_eq!(param_gradient(&g, loss, &[w]).unwrap(), vec![0.0]);
    }

    #[test]
    fn gradient_through_second_derivatives() {
        // u = w * x^3, u'' = 6 w x, loss = (u'')^2 = 36 w^2 x^2 → dloss/dw = 72 w x^2
        let mut g = ExprGraph::new();
        let x = g.input(0.5);
        let w = g.param(1.3);
        let x3 = g.powc(x, 3.0);
        let u = g.mul(w, x3);
        let nodes = second_order_nodes(&mut g, u, &[x]);
        let loss = g.square(nodes.hessian[0]);
        let grad = param_gradient(&g, loss, &[w]).unwrap();
        assert!((grad[0] - 72.0 * 1.3 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn graph_handles_a_million_nodes() {
        let mut g = ExprGraph::with_capacity(1_200_000);
        let x = g.input(0.1);
        let mut acc = x;
        for _ in 0..600_000 {
            let s = g.sin(acc);
            acc = g.add(s, x);
        }
        assert!(g.len() > 1_000_000);
        let grad = g.gradient_values(acc, &[x]);
        assert!(grad[0].is_finite());
    }
}
