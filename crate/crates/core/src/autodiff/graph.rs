//! Append-only scalar expression graph.
//!
//! Nodes are evaluated eagerly as they are appended, so every [`Var`] carries
//! its value immediately. Operands always precede results, which makes the
//! node list a topological order and lets reverse sweeps walk it backwards.
//!
//! Derivatives come in two flavours:
//!
//! * [`ExprGraph::gradient_nodes`] appends the adjoint computation to the
//!   graph itself, so the returned derivatives are ordinary nodes that can be
//!   differentiated again (this is how second derivatives and the parameter
//!   gradient of a loss built from them are obtained);
//! * [`ExprGraph::gradient_values`] is a plain numeric reverse sweep.

use std::fmt;

use crate::error::{Error, Result};

/// Handle to a node of an [`ExprGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    /// Input coordinate with the given position.
    Input(u32),
    /// Trainable parameter with the given position.
    Param(u32),
    Const,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Sin(Var),
    Cos(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Sqrt(Var),
    Abs(Var),
    Powc(Var, f64),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input(_) => "input",
            Op::Param(_) => "param",
            Op::Const => "const",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(_) => "neg",
            Op::Sin(_) => "sin",
            Op::Cos(_) => "cos",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Sqrt(_) => "sqrt",
            Op::Abs(_) => "abs",
            Op::Powc(..) => "powc",
        }
    }

    fn operands(&self) -> (Option<Var>, Option<Var>) {
        match *self {
            Op::Input(_) | Op::Param(_) | Op::Const => (None, None),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => (Some(a), Some(b)),
            Op::Neg(a)
            | Op::Sin(a)
            | Op::Cos(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Sqrt(a)
            | Op::Abs(a)
            | Op::Powc(a, _) => (Some(a), None),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    value: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ExprGraph {
    nodes: Vec<Node>,
    inputs: Vec<Var>,
    params: Vec<Var>,
    first_nonfinite: Option<Var>,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl ExprGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        ExprGraph {
            nodes: Vec::with_capacity(nodes),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.index()].value
    }

    pub fn op(&self, v: Var) -> Op {
        self.nodes[v.index()].op
    }

    pub fn inputs(&self) -> &[Var] {
        &self.inputs
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }

    /// First node whose value came out NaN or infinite, if any.
    pub fn first_nonfinite(&self) -> Option<Var> {
        self.first_nonfinite
    }

    /// Fails with an error naming the first non-finite node.
    pub fn check_finite(&self) -> Result<()> {
        match self.first_nonfinite {
            None => Ok(()),
            Some(v) => {
                let node = &self.nodes[v.index()];
                let operands = match node.op.operands() {
                    (Some(a), Some(b)) => format!("({}, {})", self.value(a), self.value(b)),
                    (Some(a), None) => format!("({})", self.value(a)),
                    _ => String::new(),
                };
                Err(Error::eval(format!(
                    "node {v} `{}`{operands} evaluated to {}",
                    node.op.name(),
                    node.value
                )))
            }
        }
    }

    fn push(&mut self, op: Op, value: f64) -> Var {
        let idx = u32::try_from(self.nodes.len()).expect("expression graph exceeds u32 nodes");
        let v = Var(idx);
        if !value.is_finite() && self.first_nonfinite.is_none() {
            self.first_nonfinite = Some(v);
        }
        self.nodes.push(Node { op, value });
        v
    }

    pub fn input(&mut self, value: f64) -> Var {
        let pos = self.inputs.len() as u32;
        let v = self.push(Op::Input(pos), value);
        self.inputs.push(v);
        v
    }

    pub fn param(&mut self, value: f64) -> Var {
        let pos = self.params.len() as u32;
        let v = self.push(Op::Param(pos), value);
        self.params.push(v);
        v
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(Op::Const, value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(Op::Sub(a, b), value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.push(Op::Mul(a, b), value)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) / self.value(b);
        self.push(Op::Div(a, b), value)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let value = -self.value(a);
        self.push(Op::Neg(a), value)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let value = self.value(a).sin();
        self.push(Op::Sin(a), value)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let value = self.value(a).cos();
        self.push(Op::Cos(a), value)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).tanh();
        self.push(Op::Tanh(a), value)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).max(0.0);
        self.push(Op::Relu(a), value)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).exp();
        self.push(Op::Exp(a), value)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let x = self.value(a);
        // ln of a negative number is NaN, ln(0) is -inf: both are flagged.
        self.push(Op::Log(a), x.ln())
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.value(a).sqrt();
        self.push(Op::Sqrt(a), value)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).abs();
        self.push(Op::Abs(a), value)
    }

    pub fn powc(&mut self, a: Var, exponent: f64) -> Var {
        let value = self.value(a).powf(exponent);
        self.push(Op::Powc(a, exponent), value)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let k = self.constant(c);
        self.mul(k, a)
    }

    /// Left-to-right sum; an empty slice yields a zero constant.
    pub fn sum(&mut self, terms: &[Var]) -> Var {
        match terms.split_first() {
            None => self.constant(0.0),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &t| self.add(acc, t)),
        }
    }

    fn is_one(&self, v: Var) -> bool {
        let n = &self.nodes[v.index()];
        matches!(n.op, Op::Const) && n.value == 1.0
    }

    /// Product that skips multiplications by an exact-one constant.
    fn mul_adj(&mut self, adj: Var, factor: Var) -> Var {
        if self.is_one(adj) {
            factor
        } else if self.is_one(factor) {
            adj
        } else {
            self.mul(adj, factor)
        }
    }

    /// Marks nodes up to `output` that depend on any of `wrt`.
    fn dependency_mask(&self, output: Var, wrt: &[Var]) -> Vec<bool> {
        let mut mask = vec![false; output.index() + 1];
        for v in wrt {
            if v.index() <= output.index() {
                mask[v.index()] = true;
            }
        }
        for i in 0..=output.index() {
            if mask[i] {
                continue;
            }
            let (a, b) = self.nodes[i].op.operands();
            mask[i] = a.is_some_and(|a| mask[a.index()]) || b.is_some_and(|b| mask[b.index()]);
        }
        mask
    }

    /// Appends nodes computing d(output)/d(w) for each `w` in `wrt`.
    ///
    /// The returned nodes are differentiable themselves. Derivatives of
    /// `relu` and `abs` use the subgradient 0 at the kink, and their
    /// derivative factors are constants (second derivative 0).
    pub fn gradient_nodes(&mut self, output: Var, wrt: &[Var]) -> Vec<Var> {
        let mask = self.dependency_mask(output, wrt);
        let mut adj: Vec<Option<Var>> = vec![None; output.index() + 1];
        if mask[output.index()] {
            adj[output.index()] = Some(self.constant(1.0));
        }

        for i in (0..=output.index()).rev() {
            if !mask[i] {
                continue;
            }
            let Some(ybar) = adj[i] else { continue };
            let y = Var(i as u32);
            let op = self.nodes[i].op;
            let mut contributions: [(Option<Var>, Option<Var>); 2] = [(None, None); 2];
            match op {
                Op::Input(_) | Op::Param(_) | Op::Const => {}
                Op::Add(a, b) => {
                    contributions = [(Some(a), Some(ybar)), (Some(b), Some(ybar))];
                }
                Op::Sub(a, b) => {
                    let nb = if mask[b.index()] {
                        Some(self.neg(ybar))
                    } else {
                        None
                    };
                    contributions = [(Some(a), Some(ybar)), (Some(b), nb)];
                }
                Op::Mul(a, b) => {
                    let da = mask[a.index()].then(|| self.mul_adj(ybar, b));
                    let db = mask[b.index()].then(|| self.mul_adj(ybar, a));
                    contributions = [(Some(a), da), (Some(b), db)];
                }
                Op::Div(a, b) => {
                    let da = mask[a.index()].then(|| self.div(ybar, b));
                    let db = if mask[b.index()] {
                        let t = self.mul_adj(ybar, y);
                        let t = self.div(t, b);
                        Some(self.neg(t))
                    } else {
                        None
                    };
                    contributions = [(Some(a), da), (Some(b), db)];
                }
                Op::Neg(a) => {
                    let d = self.neg(ybar);
                    contributions[0] = (Some(a), Some(d));
                }
                Op::Sin(a) => {
                    let c = self.cos(a);
                    contributions[0] = (Some(a), Some(self.mul_adj(ybar, c)));
                }
                Op::Cos(a) => {
                    let s = self.sin(a);
                    let t = self.mul_adj(ybar, s);
                    contributions[0] = (Some(a), Some(self.neg(t)));
                }
                Op::Tanh(a) => {
                    let one = self.constant(1.0);
                    let yy = self.mul(y, y);
                    let d = self.sub(one, yy);
                    contributions[0] = (Some(a), Some(self.mul_adj(ybar, d)));
                }
                Op::Relu(a) => {
                    if self.value(a) > 0.0 {
                        contributions[0] = (Some(a), Some(ybar));
                    }
                }
                Op::Exp(a) => {
                    contributions[0] = (Some(a), Some(self.mul_adj(ybar, y)));
                }
                Op::Log(a) => {
                    contributions[0] = (Some(a), Some(self.div(ybar, a)));
                }
                Op::Sqrt(a) => {
                    let half = self.scale(ybar, 0.5);
                    contributions[0] = (Some(a), Some(self.div(half, y)));
                }
                Op::Abs(a) => {
                    let x = self.value(a);
                    if x > 0.0 {
                        contributions[0] = (Some(a), Some(ybar));
                    } else if x < 0.0 {
                        contributions[0] = (Some(a), Some(self.neg(ybar)));
                    }
                }
                Op::Powc(a, c) => {
                    let p = self.powc(a, c - 1.0);
                    let p = self.scale(p, c);
                    contributions[0] = (Some(a), Some(self.mul_adj(ybar, p)));
                }
            }
            for (target, contribution) in contributions {
                let (Some(t), Some(c)) = (target, contribution) else {
                    continue;
                };
                if !mask[t.index()] {
                    continue;
                }
                adj[t.index()] = Some(match adj[t.index()] {
                    None => c,
                    Some(prev) => self.add(prev, c),
                });
            }
        }

        wrt.iter()
            .map(|w| {
                adj.get(w.index())
                    .copied()
                    .flatten()
                    .unwrap_or_else(|| self.constant(0.0))
            })
            .collect()
    }

    /// Numeric reverse sweep: d(output)/d(w) for each `w` in `wrt`.
    pub fn gradient_values(&self, output: Var, wrt: &[Var]) -> Vec<f64> {
        let mask = self.dependency_mask(output, wrt);
        let mut adj = vec![0.0f64; output.index() + 1];
        adj[output.index()] = 1.0;
        for i in (0..=output.index()).rev() {
            let ybar = adj[i];
            if !mask[i] || ybar == 0.0 {
                continue;
            }
            let y = self.nodes[i].value;
            match self.nodes[i].op {
                Op::Input(_) | Op::Param(_) | Op::Const => {}
                Op::Add(a, b) => {
                    adj[a.index()] += ybar;
                    adj[b.index()] += ybar;
                }
                Op::Sub(a, b) => {
                    adj[a.index()] += ybar;
                    adj[b.index()] -= ybar;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(a), self.value(b));
                    adj[a.index()] += ybar * vb;
                    adj[b.index()] += ybar * va;
                }
                Op::Div(a, b) => {
                    let vb = self.value(b);
                    adj[a.index()] += ybar / vb;
                    adj[b.index()] -= ybar * y / vb;
                }
                Op::Neg(a) => adj[a.index()] -= ybar,
                Op::Sin(a) => adj[a.index()] += ybar * self.value(a).cos(),
                Op::Cos(a) => adj[a.index()] -= ybar * self.value(a).sin(),
                Op::Tanh(a) => adj[a.index()] += ybar * (1.0 - y * y),
                Op::Relu(a) => {
                    if self.value(a) > 0.0 {
                        adj[a.index()] += ybar;
                    }
                }
                Op::Exp(a) => adj[a.index()] += ybar * y,
                Op::Log(a) => adj[a.index()] += ybar / self.value(a),
                Op::Sqrt(a) => adj[a.index()] += ybar * 0.5 / y,
                Op::Abs(a) => {
                    let x = self.value(a);
                    if x > 0.0 {
                        adj[a.index()] += ybar;
                    } else if x < 0.0 {
                        adj[a.index()] -= ybar;
                    }
                }
                Op::Powc(a, c) => adj[a.index()] += ybar * c * self.value(a).powf(c - 1.0),
            }
        }
        wrt.iter()
            .map(|w| adj.get(w.index()).copied().unwrap_or(0.0))
            .collect()
    }

    /// `relu`/`abs` nodes up to `upto` whose operand depends on `wrt`.
    pub fn kink_nodes(&self, upto: Var, wrt: &[Var]) -> Vec<Var> {
        let mask = self.dependency_mask(upto, wrt);
        (0..=upto.index())
            .filter(|&i| match self.nodes[i].op {
                Op::Relu(a) | Op::Abs(a) => mask[a.index()],
                _ => false,
            })
            .map(|i| Var(i as u32))
            .collect()
    }
}
