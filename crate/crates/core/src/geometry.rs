//! Rotated space-time coordinates, cones, the directed partial order and
//! piecewise-linear directed paths.
//!
//! Lattice vertices `(a, b)` are identified with space-time points
//! `(x, t) = (b - a, b + a)`. Under this rotation the coordinatewise partial
//! order on the lattice becomes the forward light-cone order: `q` is reachable
//! from `p` iff `|q.x - p.x| <= q.t - p.t`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute slack admitted when testing cone membership, so that points
/// produced by interpolation along slope-one segments still validate.
pub const CONE_EPS: f64 = 1e-9;

/// A point in rotated (space, time) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: f64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }

    /// Coordinates in the unrotated lattice frame: `a = (t - x)/2`, `b = (t + x)/2`.
    pub fn unrotated(&self) -> (f64, f64) {
        ((self.t - self.x) / 2.0, (self.t + self.x) / 2.0)
    }
}

/// Rotate a lattice vertex `(i, j)` into space-time coordinates `(j - i, j + i)`.
pub fn rotate(i: i64, j: i64) -> SpaceTimePoint {
    SpaceTimePoint::new((j - i) as f64, (j + i) as f64)
}

/// Recover the lattice vertex from a rotated point when `x + t` is even.
pub fn unrotate(p: SpaceTimePoint) -> Option<(i64, i64)> {
    let a = (p.t - p.x) / 2.0;
    let b = (p.t + p.x) / 2.0;
    if a.fract() == 0.0 && b.fract() == 0.0 {
        Some((a as i64, b as i64))
    } else {
        None
    }
}

/// True iff `q` lies in the forward cone of `p`, i.e. `|q.x - p.x| <= q.t - p.t`.
pub fn cone_contains(p: SpaceTimePoint, q: SpaceTimePoint) -> bool {
    (q.x - p.x).abs() <= (q.t - p.t) + CONE_EPS
}

/// An ordered pair `(p; q)` with `q` in the forward cone of `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair", into = "RawPair")]
pub struct OrderedPair {
    p: SpaceTimePoint,
    q: SpaceTimePoint,
}

#[derive(Serialize, Deserialize)]
struct RawPair {
    p: SpaceTimePoint,
    q: SpaceTimePoint,
}

impl TryFrom<RawPair> for OrderedPair {
    type Error = Error;
    fn try_from(r: RawPair) -> Result<Self> {
        OrderedPair::new(r.p, r.q)
    }
}

impl From<OrderedPair> for RawPair {
    fn from(u: OrderedPair) -> Self {
        RawPair { p: u.p, q: u.q }
    }
}

impl OrderedPair {
    pub fn new(p: SpaceTimePoint, q: SpaceTimePoint) -> Result<Self> {
        if !(p.x.is_finite() && p.t.is_finite() && q.x.is_finite() && q.t.is_finite()) {
            return Err(Error::Domain("ordered pair with non-finite coordinate".into()));
        }
        if !cone_contains(p, q) {
            return Err(Error::Domain(format!(
                "({}, {}) is not in the forward cone of ({}, {})",
                q.x, q.t, p.x, p.t
            )));
        }
        Ok(Self { p, q })
    }

    /// Convenience constructor from raw coordinates `(x, s; y, t)`.
    pub fn from_coords(x: f64, s: f64, y: f64, t: f64) -> Result<Self> {
        Self::new(SpaceTimePoint::new(x, s), SpaceTimePoint::new(y, t))
    }

    pub fn p(&self) -> SpaceTimePoint {
        self.p
    }

    pub fn q(&self) -> SpaceTimePoint {
        self.q
    }

    /// Time span `t - s`.
    pub fn dt(&self) -> f64 {
        self.q.t - self.p.t
    }

    /// Space increment `y - x`.
    pub fn dx(&self) -> f64 {
        self.q.x - self.p.x
    }

    /// Chord slope `(y - x)/(t - s)`, clamped into `[-1, 1]`.
    ///
    /// Errors when the pair has zero time span.
    pub fn slope(&self) -> Result<f64> {
        let dt = self.dt();
        if dt <= 0.0 {
            return Err(Error::Domain("pair with zero time span has no slope".into()));
        }
        Ok((self.dx() / dt).clamp(-1.0, 1.0))
    }
}

/// The `d^1` norm `max(|x| + |s|, |y| + |t|)` of a pair `(x, s; y, t)`.
pub fn d1_norm(u: OrderedPair) -> f64 {
    let a = u.p().x.abs() + u.p().t.abs();
    let b = u.q().x.abs() + u.q().t.abs();
    a.max(b)
}

/// True iff no point `r` satisfies `p_i <= r <= q_i` for both pairs at once.
///
/// The order interval `[p, q]` is an axis-aligned rectangle in the unrotated
/// frame, so the test reduces to exact rectangle-intersection emptiness. This
/// realizes the four half-plane constraints of each interval without any
/// numerical search.
pub fn disjoint(u1: OrderedPair, u2: OrderedPair) -> bool {
    let (a1p, b1p) = u1.p().unrotated();
    let (a1q, b1q) = u1.q().unrotated();
    let (a2p, b2p) = u2.p().unrotated();
    let (a2q, b2q) = u2.q().unrotated();
    let a_lo = a1p.max(a2p);
    let a_hi = a1q.min(a2q);
    let b_lo = b1p.max(b2p);
    let b_hi = b1q.min(b2q);
    !(a_lo <= a_hi && b_lo <= b_hi)
}

/// A piecewise-linear directed path: knots `(time, space)` with strictly
/// increasing times and unit-Lipschitz space increments.
///
/// Serializes as a JSON array of `[time, space]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DirectedPath {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for DirectedPath {
    type Error = Error;
    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self> {
        DirectedPath::new(knots)
    }
}

impl From<DirectedPath> for Vec<(f64, f64)> {
    fn from(p: DirectedPath) -> Self {
        p.knots
    }
}

impl DirectedPath {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Domain("directed path needs at least one knot".into()));
        }
        for w in knots.windows(2) {
            let (r0, x0) = w[0];
            let (r1, x1) = w[1];
            if !(r1 > r0) {
                return Err(Error::Domain(format!(
                    "knot times must strictly increase ({r0} then {r1})"
                )));
            }
            if (x1 - x0).abs() > (r1 - r0) + CONE_EPS {
                return Err(Error::Domain(format!(
                    "segment ({r0},{x0})->({r1},{x1}) violates the unit Lipschitz bound"
                )));
            }
        }
        if knots.iter().any(|(r, x)| !r.is_finite() || !x.is_finite()) {
            return Err(Error::Domain("non-finite knot".into()));
        }
        Ok(Self { knots })
    }

    /// Straight line between two space-time points.
    pub fn line(p: SpaceTimePoint, q: SpaceTimePoint) -> Result<Self> {
        Self::new(vec![(p.t, p.x), (q.t, q.x)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Domain `[s, t]` of the path.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    pub fn start(&self) -> SpaceTimePoint {
        SpaceTimePoint::new(self.knots[0].1, self.knots[0].0)
    }

    pub fn end(&self) -> SpaceTimePoint {
        let k = self.knots[self.knots.len() - 1];
        SpaceTimePoint::new(k.1, k.0)
    }

    /// Position at time `r` by linear interpolation; errors outside the domain.
    pub fn position(&self, r: f64) -> Result<f64> {
        let (s, t) = self.domain();
        if r < s || r > t {
            return Err(Error::Domain(format!("time {r} outside path domain [{s}, {t}]")));
        }
        // Find the segment containing r.
        let idx = self
            .knots
            .partition_point(|&(ri, _)| ri <= r)
            .saturating_sub(1);
        let (r0, x0) = self.knots[idx];
        if r == r0 || idx + 1 == self.knots.len() {
            return Ok(x0);
        }
        let (r1, x1) = self.knots[idx + 1];
        Ok(x0 + (x1 - x0) * (r - r0) / (r1 - r0))
    }

    /// The space-time point `(position(r), r)`.
    pub fn point_at(&self, r: f64) -> Result<SpaceTimePoint> {
        Ok(SpaceTimePoint::new(self.position(r)?, r))
    }
}
