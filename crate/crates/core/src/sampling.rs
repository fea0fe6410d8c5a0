//! Box domains, interior Monte Carlo points and boundary-frame points.
//!
//! Every sampler is a pure function of its arguments and a seed. Each kind of
//! draw uses its own ChaCha8 stream, so changing the number of interior
//! points never shifts the boundary points.

use std::fmt;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryFn;
use crate::error::{Error, Result};

/// ChaCha stream for interior points.
pub const INTERIOR_STREAM: u64 = 1;
/// ChaCha stream for boundary points.
pub const BOUNDARY_STREAM: u64 = 2;

/// An axis-aligned box `[lower, upper]` in 2 to 4 dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawBox> for BoxDomain {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        BoxDomain::new(raw.lower, raw.upper)
    }
}

impl From<BoxDomain> for RawBox {
    fn from(b: BoxDomain) -> Self {
        RawBox {
            lower: b.lower,
            upper: b.upper,
        }
    }
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::config(format!(
                "domain bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if !(2..=4).contains(&lower.len()) {
            return Err(Error::config(format!("dimension {} is outside 2..=4", lower.len())));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(format!("axis x{} has bounds [{lo}, {hi}]", k + 1)));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    /// `[0, 1]^d`.
    pub fn unit(d: usize) -> Result<Self> {
        Self::cube(d, 0.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn extreme(&self, axis: usize, side: Side) -> f64 {
        match side {
            Side::Lower => self.lower[axis],
            Side::Upper => self.upper[axis],
        }
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).product()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(k, v)| self.lower[k] <= *v && *v <= self.upper[k])
    }

    /// Open-box membership.
    pub fn contains_strictly(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(k, v)| self.lower[k] < *v && *v < self.upper[k])
    }

    /// Whether `other` lies inside this box.
    pub fn encloses(&self, other: &BoxDomain) -> bool {
        self.contains(&other.lower) && self.contains(&other.upper)
    }

    /// The `2^d` vertices, axis 1 varying slowest.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|k| {
                        let upper = mask >> (d - 1 - k) & 1 == 1;
                        if upper { self.upper[k] } else { self.lower[k] }
                    })
                    .collect()
            })
            .collect()
    }

    /// All `d·2^(d−1)` edges, sorted by free axis then by fixed sides.
    pub fn edges(&self) -> Vec<EdgeDescriptor> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d << (d - 1));
        for free_axis in 0..d {
            let fixed_axes: Vec<usize> = (0..d).filter(|&k| k != free_axis).collect();
            for mask in 0..1usize << (d - 1) {
                let fixed = fixed_axes
                    .iter()
                    .enumerate()
                    .map(|(j, &axis)| {
                        let side = if mask >> (d - 2 - j) & 1 == 1 { Side::Upper } else { Side::Lower };
                        (axis, side)
                    })
                    .collect();
                out.push(EdgeDescriptor { free_axis, fixed });
            }
        }
        out
    }
}

impl fmt::Display for BoxDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.dim() {
            if k > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "[{}, {}]", self.lower[k], self.upper[k])?;
        }
        Ok(())
    }
}

/// Which extreme of an axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Lower,
    Upper,
}

/// One edge of the box: a segment along `free_axis` with every other axis
/// pinned to an extreme.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeDescriptor {
    pub free_axis: usize,
    /// `(axis, side)` for the `d − 1` pinned axes, in increasing axis order.
    pub fixed: Vec<(usize, Side)>,
}

impl fmt::Display for EdgeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{} free", self.free_axis + 1)?;
        for (axis, side) in &self.fixed {
            let s = match side {
                Side::Lower => "lower",
                Side::Upper => "upper",
            };
            write!(f, ", x{}={s}", axis + 1)?;
        }
        Ok(())
    }
}

/// Where boundary points are placed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// On the one-dimensional edges of the box.
    #[default]
    Wireframe,
    /// On the `2d` faces of the box.
    Faces,
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wireframe" => Ok(BoundaryMode::Wireframe),
            "faces" => Ok(BoundaryMode::Faces),
            _ => Err(Error::config(format!("unknown boundary mode `{s}` (wireframe, faces)"))),
        }
    }
}

/// A ChaCha8 generator on a fixed stream of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in the open interval `(lo, hi)`.
fn open_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let u: f64 = rng.sample(Open01);
        let v = lo + (hi - lo) * u;
        if lo < v && v < hi {
            return v;
        }
    }
}

/// `n` i.i.d. uniform points in the open box, flattened row-major (`n × d`).
pub fn sample_interior(domain: &BoxDomain, n: usize, seed: u64) -> Result<Vec<f64>> {
    sample_interior_with(domain, n, &mut stream_rng(seed, INTERIOR_STREAM))
}

/// [`sample_interior`] drawing from a caller-owned generator.
pub fn sample_interior_with(domain: &BoxDomain, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::config("interior sample count must be at least 1"));
    }
    let d = domain.dim();
    let mut out = Vec::with_capacity(n * d);
    for _ in 0..n {
        for k in 0..d {
            out.push(open_uniform(rng, domain.lower[k], domain.upper[k]));
        }
    }
    Ok(out)
}

/// Boundary points, flattened row-major, `per_piece` on each edge
/// (wireframe) or each face (faces). Pieces are visited in
/// [`BoxDomain::edges`] order, or face `x1=lower, x1=upper, x2=lower, …`.
pub fn sample_boundary(domain: &BoxDomain, mode: BoundaryMode, per_piece: usize, seed: u64) -> Result<Vec<f64>> {
    sample_boundary_with(domain, mode, per_piece, &mut stream_rng(seed, BOUNDARY_STREAM))
}

/// [`sample_boundary`] drawing from a caller-owned generator.
pub fn sample_boundary_with(
    domain: &BoxDomain,
    mode: BoundaryMode,
    per_piece: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if per_piece == 0 {
        return Err(Error::config("boundary sample count per piece must be at least 1"));
    }
    let d = domain.dim();
    let mut out = Vec::new();
    match mode {
        BoundaryMode::Wireframe => {
            for edge in domain.edges() {
                for _ in 0..per_piece {
                    let mut x = vec![0.0; d];
                    for &(axis, side) in &edge.fixed {
                        x[axis] = domain.extreme(axis, side);
                    }
                    let k = edge.free_axis;
                    x[k] = open_uniform(rng, domain.lower[k], domain.upper[k]);
                    out.extend_from_slice(&x);
                }
            }
        }
        BoundaryMode::Faces => {
            for axis in 0..d {
                for side in [Side::Lower, Side::Upper] {
                    for _ in 0..per_piece {
                        for k in 0..d {
                            out.push(if k == axis {
                                domain.extreme(axis, side)
                            } else {
                                open_uniform(rng, domain.lower[k], domain.upper[k])
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Interior and boundary collocation points for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    dim: usize,
    /// `n × d`, strictly inside the box.
    pub interior: Vec<f64>,
    /// `m × d`, on the frame.
    pub boundary: Vec<f64>,
    /// `g` at each boundary point.
    pub boundary_values: Vec<f64>,
    pub mode: BoundaryMode,
    pub seed: u64,
}

impl SampleSet {
    /// Draws both point sets and evaluates `g` on the boundary ones.
    pub fn draw(
        domain: &BoxDomain,
        g: &BoundaryFn,
        mode: BoundaryMode,
        n_interior: usize,
        per_piece: usize,
        seed: u64,
    ) -> Result<Self> {
        g.check_coverage(domain, mode == BoundaryMode::Faces)?;
        let interior = sample_interior(domain, n_interior, seed)?;
        let boundary = sample_boundary(domain, mode, per_piece, seed)?;
        let boundary_values = boundary.chunks(domain.dim()).map(|x| g.eval(x)).collect::<Result<_>>()?;
        Ok(SampleSet {
            dim: domain.dim(),
            interior,
            boundary,
            boundary_values,
            mode,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len() / self.dim
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len() / self.dim
    }

    pub fn interior_point(&self, i: usize) -> &[f64] {
        &self.interior[i * self.dim..(i + 1) * self.dim]
    }

    pub fn boundary_point(&self, i: usize) -> &[f64] {
        &self.boundary[i * self.dim..(i + 1) * self.dim]
    }
}

/// One vertex of the box and what each piece through it says.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerEntry {
    pub point: Vec<f64>,
    /// `(piece label, value)` for every piece containing the vertex.
    pub values: Vec<(String, f64)>,
    /// Largest pairwise difference between the values.
    pub discrepancy: f64,
}

/// Result of [`check_corner_consistency`].
#[derive(Clone, Debug, PartialEq)]
pub struct CornerReport {
    pub tol: f64,
    pub corners: Vec<CornerEntry>,
}

impl CornerReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &CornerEntry> {
        self.corners.iter().filter(move |c| c.discrepancy > self.tol)
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.corners.iter().map(|c| c.discrepancy).fold(0.0, f64::max)
    }
}

impl fmt::Display for CornerReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.corners {
            let status = if c.discrepancy > self.tol { "MISMATCH" } else { "ok" };
            write!(f, "{:?} {status} discrepancy={:.3e}", c.point, c.discrepancy)?;
            for (label, v) in &c.values {
                write!(f, " [{label}: {v}]")?;
            }
            writeln!(f)?;
        }
        let n = self.mismatches().count();
        write!(f, "{n} of {} corners mismatch (tol {:e})", self.corners.len(), self.tol)
    }
}

/// Evaluates every piece of `g` at every corner of the box and reports
/// disagreements larger than `tol`.
pub fn check_corner_consistency(g: &BoundaryFn, domain: &BoxDomain, tol: f64) -> Result<CornerReport> {
    if g.dim() != domain.dim() {
        return Err(Error::config(format!(
            "boundary has dimension {}, domain has {}",
            g.dim(),
            domain.dim()
        )));
    }
    let mut corners = Vec::new();
    for point in domain.corners() {
        let values = g.piece_values(&point)?;
        if values.is_empty() {
            return Err(Error::Domain(format!("corner {point:?} lies on no declared piece")));
        }
        let hi = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        corners.push(CornerEntry {
            point,
            values,
            discrepancy: hi - lo,
        });
    }
    Ok(CornerReport { tol, corners })
}
