//! Dirichlet frame data `g` and the constant source term `f`.

mod expr;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use expr::{BinOp, Expr, Func, SyntaxKind};

use crate::autodiff::{ExprGraph, GraphFn, OnGraph, Var};
use crate::error::{Error, Result};
use crate::sampling::BoxDomain;

/// Named boundary functions shipped with the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Builtin {
    /// `log(cos x2 / cos x1)`, Scherk's first surface.
    Scherk,
    /// `sin(‖5(x − x0)‖)`, `x0 = (0.5, 0.5)`.
    RadialSine2d,
    /// A different formula on each side of the unit square.
    FourSided2d,
    /// `sin(cos(2π Σ|x_i − 0.5|))` on the unit cube.
    AbsCos3d,
    /// `sin 2πx1 + cos 2πx2 + sin 2πx3`.
    TrigSum3d,
    /// `2 sin(10 ‖x − x0‖)`, `x0 = (0.5, 0.5, 0.5, 0.5)`.
    RadialSine4d,
}

impl Builtin {
    pub const ALL: [Builtin; 6] = [
        Builtin::Scherk,
        Builtin::RadialSine2d,
        Builtin::FourSided2d,
        Builtin::AbsCos3d,
        Builtin::TrigSum3d,
        Builtin::RadialSine4d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Scherk => "scherk",
            Builtin::RadialSine2d => "radial_sine_2d",
            Builtin::FourSided2d => "four_sided_2d",
            Builtin::AbsCos3d => "abs_cos_3d",
            Builtin::TrigSum3d => "trig_sum_3d",
            Builtin::RadialSine4d => "radial_sine_4d",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Builtin::Scherk | Builtin::RadialSine2d | Builtin::FourSided2d => 2,
            Builtin::AbsCos3d | Builtin::TrigSum3d => 3,
            Builtin::RadialSine4d => 4,
        }
    }

    /// Box the function is meant to frame.
    pub fn canonical_domain(self) -> BoxDomain {
        match self {
            Builtin::Scherk => BoxDomain::cube(2, -1.5, 1.5).expect("valid box"),
            b => BoxDomain::unit(b.dim()).expect("valid box"),
        }
    }

    /// Equivalent expression text for single-formula builtins.
    pub fn formula(self) -> Option<&'static str> {
        match self {
            Builtin::Scherk => Some("log(cos(x2) / cos(x1))"),
            Builtin::RadialSine2d => Some("sin(norm2(5*(x1 - 0.5), 5*(x2 - 0.5)))"),
            Builtin::FourSided2d => None,
            Builtin::AbsCos3d => Some("sin(cos(2*pi*(abs(x1 - 0.5) + abs(x2 - 0.5) + abs(x3 - 0.5))))"),
            Builtin::TrigSum3d => Some("sin(2*pi*x1) + cos(2*pi*x2) + sin(2*pi*x3)"),
            Builtin::RadialSine4d => Some("2*sin(10*norm2(x1 - 0.5, x2 - 0.5, x3 - 0.5, x4 - 0.5))"),
        }
    }

    fn eval_native(self, x: &[f64]) -> f64 {
        match self {
            Builtin::Scherk => (x[1].cos() / x[0].cos()).ln(),
            Builtin::RadialSine2d => {
                let r = ((5.0 * (x[0] - 0.5)).powi(2) + (5.0 * (x[1] - 0.5)).powi(2)).sqrt();
                r.sin()
            }
            Builtin::FourSided2d => unreachable!("piecewise builtin"),
            Builtin::AbsCos3d => {
                let s: f64 = x[..3].iter().map(|v| (v - 0.5).abs()).sum();
                (2.0 * PI * s).cos().sin()
            }
            Builtin::TrigSum3d => (2.0 * PI * x[0]).sin() + (2.0 * PI * x[1]).cos() + (2.0 * PI * x[2]).sin(),
            Builtin::RadialSine4d => {
                let r = x[..4].iter().map(|v| (v - 0.5).powi(2)).sum::<f64>().sqrt();
                2.0 * (10.0 * r).sin()
            }
        }
    }

    /// The four sides of the unit square. The sums in the side formulas run
    /// over both coordinates, one of which is pinned by the side.
    fn four_sided_pieces() -> Vec<Piece> {
        fn x1_lower(x: &[f64]) -> f64 {
            (2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos()
        }
        fn x1_upper(_: &[f64]) -> f64 {
            1.0
        }
        fn x2_lower(x: &[f64]) -> f64 {
            ((PI * x[0]).cos() + (PI * x[0]).sin()).abs() + ((PI * x[1]).cos() + (PI * x[1]).sin()).abs()
        }
        fn x2_upper(x: &[f64]) -> f64 {
            (2.0 * PI * x[0]).sin() + (2.0 * PI * x[0]).cos()
        }
        vec![
            Piece::native(0, 0.0, x1_lower),
            Piece::native(0, 1.0, x1_upper),
            Piece::native(1, 0.0, x2_lower),
            Piece::native(1, 1.0, x2_upper),
        ]
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Looks a builtin up by name.
pub fn lookup_builtin(name: &str) -> Result<BoundaryFn> {
    Builtin::ALL
        .into_iter()
        .find(|b| b.name() == name)
        .map(BoundaryFn::builtin)
        .ok_or_else(|| {
            let names: Vec<_> = Builtin::ALL.iter().map(|b| b.name()).collect();
            Error::config(format!("unknown boundary `{name}`; valid names: {}", names.join(", ")))
        })
}

#[derive(Clone, Debug)]
enum PieceFormula {
    Native(fn(&[f64]) -> f64),
    Expr(Expr),
}

/// One side of the frame: the hyperplane `x[axis] = at` and its formula.
#[derive(Clone, Debug)]
pub struct Piece {
    pub axis: usize,
    pub at: f64,
    formula: PieceFormula,
}

impl Piece {
    fn native(axis: usize, at: f64, f: fn(&[f64]) -> f64) -> Self {
        Piece {
            axis,
            at,
            formula: PieceFormula::Native(f),
        }
    }

    pub fn label(&self) -> String {
        format!("x{}={}", self.axis + 1, self.at)
    }

    fn contains(&self, x: &[f64]) -> bool {
        (x[self.axis] - self.at).abs() <= 1e-12 * self.at.abs().max(1.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.formula {
            PieceFormula::Native(f) => f(x),
            PieceFormula::Expr(e) => e.eval(x),
        }
    }
}

/// Parses a `"xK=value"` selector key.
fn parse_selector(key: &str, dim: usize) -> Result<(usize, f64)> {
    let bad = || Error::config(format!("piece selector `{key}` is not of the form xK=value"));
    let (lhs, rhs) = key.split_once('=').ok_or_else(bad)?;
    let axis: usize = lhs.trim().strip_prefix('x').ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let at: f64 = rhs.trim().parse().map_err(|_| bad())?;
    if axis == 0 || axis > dim {
        return Err(Error::config(format!("piece selector `{key}` names an axis outside 1..={dim}")));
    }
    Ok((axis - 1, at))
}

#[derive(Clone, Debug)]
enum Kind {
    Builtin(Builtin),
    Expr(Expr),
    Piecewise(Vec<Piece>),
}

/// Dirichlet data `g`.
///
/// Piecewise data assigns a formula to each side `x_k = c`. Where sides meet
/// (edges and corners), the side with the lowest axis index governs.
#[derive(Clone, Debug)]
pub struct BoundaryFn {
    dim: usize,
    kind: Kind,
    label: String,
}

impl BoundaryFn {
    pub fn builtin(b: Builtin) -> Self {
        let kind = match b {
            Builtin::FourSided2d => Kind::Piecewise(Builtin::four_sided_pieces()),
            other => Kind::Builtin(other),
        };
        BoundaryFn {
            dim: b.dim(),
            kind,
            label: b.name().to_string(),
        }
    }

    /// A single formula valid on the whole frame.
    pub fn expression(text: &str, dim: usize) -> Result<Self> {
        let e = Expr::parse(text)?;
        e.bind(dim)?;
        Ok(BoundaryFn {
            dim,
            label: e.to_string(),
            kind: Kind::Expr(e),
        })
    }

    /// Piecewise data from `"xK=c" → expression` entries.
    pub fn piecewise(entries: &BTreeMap<String, String>, dim: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::config("piecewise boundary has no pieces"));
        }
        let mut pieces = Vec::with_capacity(entries.len());
        for (key, text) in entries {
            let (axis, at) = parse_selector(key, dim)?;
            let e = Expr::parse(text)?;
            e.bind(dim)?;
            pieces.push(Piece {
                axis,
                at,
                formula: PieceFormula::Expr(e),
            });
        }
        pieces.sort_by(|a, b| a.axis.cmp(&b.axis).then(a.at.total_cmp(&b.at)));
        for w in pieces.windows(2) {
            if w[0].axis == w[1].axis && w[0].at == w[1].at {
                return Err(Error::config(format!("duplicate piece {}", w[0].label())));
            }
        }
        Ok(BoundaryFn {
            dim,
            label: "piecewise".into(),
            kind: Kind::Piecewise(pieces),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn as_builtin(&self) -> Option<Builtin> {
        match self.kind {
            Kind::Builtin(b) => Some(b),
            Kind::Piecewise(_) if self.label == Builtin::FourSided2d.name() => Some(Builtin::FourSided2d),
            _ => None,
        }
    }

    pub fn pieces(&self) -> Option<&[Piece]> {
        match &self.kind {
            Kind::Piecewise(p) => Some(p),
            _ => None,
        }
    }

    /// Evaluates `g(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::structure(format!(
                "point has {} coordinates, boundary `{}` expects {}",
                x.len(),
                self.label,
                self.dim
            )));
        }
        let v = match &self.kind {
            Kind::Builtin(b) => b.eval_native(x),
            Kind::Expr(e) => e.eval(x),
            Kind::Piecewise(pieces) => match pieces.iter().find(|p| p.contains(x)) {
                Some(p) => p.eval(x),
                None => {
                    return Err(Error::Domain(format!(
                        "point {x:?} lies on no declared piece of `{}`",
                        self.label
                    )))
                }
            },
        };
        if !v.is_finite() {
            return Err(Error::eval(format!("boundary `{}` is {v} at {x:?}", self.label)));
        }
        Ok(v)
    }

    /// Values of every piece containing `x`, labelled. Single-formula data
    /// reports one entry.
    pub fn piece_values(&self, x: &[f64]) -> Result<Vec<(String, f64)>> {
        match &self.kind {
            Kind::Piecewise(pieces) => {
                let mut out = Vec::new();
                for p in pieces.iter().filter(|p| p.contains(x)) {
                    let v = p.eval(x);
                    if !v.is_finite() {
                        return Err(Error::eval(format!("piece {} is {v} at {x:?}", p.label())));
                    }
                    out.push((p.label(), v));
                }
                Ok(out)
            }
            _ => Ok(vec![(self.label.clone(), self.eval(x)?)]),
        }
    }

    /// Checks that `g` is defined on every piece of the frame the sampler
    /// will use. Sides are the faces `x_k = lower_k` / `x_k = upper_k`.
    pub fn check_coverage(&self, domain: &BoxDomain, faces: bool) -> Result<()> {
        if domain.dim() != self.dim {
            return Err(Error::config(format!(
                "boundary `{}` has dimension {}, domain has {}",
                self.label,
                self.dim,
                domain.dim()
            )));
        }
        let Kind::Piecewise(pieces) = &self.kind else {
            return Ok(());
        };
        let has = |axis: usize, at: f64| pieces.iter().any(|p| p.axis == axis && p.at == at);
        for p in pieces {
            if p.at != domain.lower()[p.axis] && p.at != domain.upper()[p.axis] {
                return Err(Error::config(format!(
                    "piece {} is not a side of the domain {domain}",
                    p.label()
                )));
            }
        }
        if faces {
            for axis in 0..self.dim {
                for at in [domain.lower()[axis], domain.upper()[axis]] {
                    if !has(axis, at) {
                        return Err(Error::config(format!("no piece for face x{}={at}", axis + 1)));
                    }
                }
            }
        } else {
            for edge in domain.edges() {
                let covered = edge
                    .fixed
                    .iter()
                    .any(|&(axis, side)| has(axis, domain.extreme(axis, side)));
                if !covered {
                    return Err(Error::config(format!("no piece governs edge {edge}")));
                }
            }
        }
        Ok(())
    }

    /// Differentiable adapter for single-formula data.
    pub fn analytic(&self) -> Option<AnalyticField> {
        let expr = match &self.kind {
            Kind::Builtin(b) => Expr::parse(b.formula()?).expect("builtin formulas parse"),
            Kind::Expr(e) => e.clone(),
            Kind::Piecewise(_) => return None,
        };
        Some(AnalyticField {
            dim: self.dim,
            expr,
        })
    }
}

/// A closed-form function of the coordinates usable as a model.
#[derive(Clone, Debug)]
pub struct AnalyticField {
    dim: usize,
    expr: Expr,
}

impl AnalyticField {
    pub fn new(expr: Expr, dim: usize) -> Result<Self> {
        expr.bind(dim)?;
        Ok(AnalyticField { dim, expr })
    }

    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        Self::new(Expr::parse(text)?, dim)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Wraps the field for use wherever a [`crate::autodiff::ScalarField`] is expected.
    pub fn field(self) -> OnGraph<AnalyticField> {
        OnGraph(self)
    }
}

impl GraphFn for AnalyticField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn build(&self, graph: &mut ExprGraph, inputs: &[Var]) -> Result<Var> {
        crate::autodiff::check_len(self.dim, inputs)?;
        Ok(self.expr.to_graph(graph, inputs))
    }
}

/// Constant right-hand side `f(x) = c`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceTerm(f64);

impl SourceTerm {
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::config(format!("source term {c} is not finite")));
        }
        Ok(SourceTerm(c))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ScalarField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(name: &str, x: &[f64]) -> f64 {
        lookup_builtin(name).unwrap().eval(x).unwrap()
    }

    #[test]
    fn builtin_spot_values() {
        assert_eq!(g("scherk", &[0.0, 0.0]), 0.0);
        assert!((g("scherk", &[1.0, 0.0]) - 0.615_626_470_386_014).abs() < 1e-12);
        assert_eq!(g("radial_sine_2d", &[0.5, 0.5]), 0.0);
        assert_eq!(g("radial_sine_4d", &[0.5; 4]), 0.0);
        assert!((g("trig_sum_3d", &[0.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((g("abs_cos_3d", &[0.5, 0.5, 0.5]) - 1.0f64.sin()).abs() < 1e-15);
        for y in [0.0, 0.3, 0.77, 1.0] {
            assert_eq!(g("four_sided_2d", &[1.0, y]), 1.0);
        }
    }

    #[test]
    fn unknown_name_lists_valid_names() {
        let err = lookup_builtin("catenoid").unwrap_err().to_string();
        for b in Builtin::ALL {
            assert!(err.contains(b.name()), "{err}");
        }
    }

    #[test]
    fn four_sided_sides_and_precedence() {
        let b = lookup_builtin("four_sided_2d").unwrap();
        // x1=0 side: 1 + cos(2πx2)
        assert!((b.eval(&[0.0, 0.25]).unwrap() - 1.0).abs() < 1e-15);
        // x2=0 side: |cos πx1 + sin πx1| + 1
        let v = b.eval(&[0.5, 0.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        // corner (0,1): x1=0 wins over x2=1 → 1 + cos 2π = 2
        assert!((b.eval(&[0.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        // interior point is on no side
        assert!(matches!(b.eval(&[0.5, 0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn scherk_outside_its_cell_is_eval_error() {
        let b = lookup_builtin("scherk").unwrap();
        assert!(matches!(b.eval(&[2.0, 0.0]), Err(Error::Eval(_))));
    }

    #[test]
    fn parsed_formulas_reproduce_builtins() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for b in Builtin::ALL {
            let Some(text) = b.formula() else { continue };
            let native = BoundaryFn::builtin(b);
            let parsed = BoundaryFn::expression(text, b.dim()).unwrap();
            let dom = b.canonical_domain();
            for _ in 0..100 {
                let x: Vec<f64> = (0..b.dim())
                    .map(|k| rng.random_range(dom.lower()[k]..dom.upper()[k]))
                    .collect();
                let (a, c) = (native.eval(&x).unwrap(), parsed.eval(&x).unwrap());
                assert!((a - c).abs() <= 1e-12 * a.abs().max(1.0), "{b}: {a} vs {c}");
            }
        }
    }

    #[test]
    fn scherk_antisymmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = lookup_builtin("scherk").unwrap();
        for _ in 0..200 {
            let (p, q) = (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let (u, v) = (b.eval(&[p, q]).unwrap(), b.eval(&[q, p]).unwrap());
            assert!((u + v).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_builtins_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = lookup_builtin("radial_sine_4d").unwrap();
        for _ in 0..100 {
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-0.5..0.5)).collect();
            let x: Vec<f64> = v.iter().map(|t| 0.5 + t).collect();
            let y: Vec<f64> = [v[2], v[0], v[3], v[1]].iter().map(|t| 0.5 + t).collect();
            assert!((b.eval(&x).unwrap() - b.eval(&y).unwrap()).abs() < 1e-12);
        }
        let b2 = lookup_builtin("radial_sine_2d").unwrap();
        assert!((b2.eval(&[0.2, 0.9]).unwrap() - b2.eval(&[0.9, 0.2]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn builtins_finite_at_corners() {
        for b in Builtin::ALL {
            let dom = b.canonical_domain();
            let g = BoundaryFn::builtin(b);
            for corner in dom.corners() {
                for (_, v) in g.piece_values(&corner).unwrap() {
                    assert!(v.is_finite(), "{b} at {corner:?}");
                }
            }
        }
    }

    #[test]
    fn piecewise_from_config_entries() {
        let mut m = BTreeMap::new();
        m.insert("x2=1".to_string(), "7".to_string());
        m.insert("x1=0".to_string(), "x2".to_string());
        let b = BoundaryFn::piecewise(&m, 2).unwrap();
        assert_eq!(b.eval(&[0.0, 0.4]).unwrap(), 0.4);
        assert_eq!(b.eval(&[0.3, 1.0]).unwrap(), 7.0);
        // x1=0 governs the shared corner
        assert_eq!(b.eval(&[0.0, 1.0]).unwrap(), 1.0);
        let dom = BoxDomain::unit(2).unwrap();
        assert!(b.check_coverage(&dom, true).is_err());

        let mut bad = BTreeMap::new();
        bad.insert("y1=0".to_string(), "1".to_string());
        assert!(BoundaryFn::piecewise(&bad, 2).is_err());
        let mut far = BTreeMap::new();
        far.insert("x3=0".to_string(), "1".to_string());
        assert!(BoundaryFn::piecewise(&far, 2).is_err());
    }

    #[test]
    fn analytic_adapter_differentiates() {
        let f = lookup_builtin("scherk").unwrap().analytic().unwrap().field();
        let b = f.bundle(&[0.3, 0.2]).unwrap();
        assert!((b.gradient[0] - 0.3f64.tan()).abs() < 1e-14);
        assert!((b.gradient[1] + 0.2f64.tan()).abs() < 1e-14);
        assert!(lookup_builtin("four_sided_2d").unwrap().analytic().is_none());
    }

    #[test]
    fn source_term_must_be_finite() {
        assert!(SourceTerm::new(f64::NAN).is_err());
        assert_eq!(SourceTerm::new(2.5).unwrap().value(), 2.5);
        assert_eq!(SourceTerm::default().value(), 0.0);
    }
}
