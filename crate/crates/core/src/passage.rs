//! Passage-time engines: dynamic-programming last passage times and
//! geodesics on the lattice, rescaled passage times, an exact small-lattice
//! tail oracle, Poisson last passage, and the directed-polymer free energy.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::geometry::SpaceTimePoint;
use crate::weights::{log_sum_exp, next_uniform, LatticeWeights, WeightDistribution};
use crate::{Error, Result};

/// Compensated (Kahan) running sum carried along DP cells, so that a
/// backtracked path re-accumulates to the DP value bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn zero() -> Self {
        Self { sum: 0.0, c: 0.0 }
    }

    #[inline]
    pub fn add(mut self, w: f64) -> Self {
        let y = w - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
        self
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// An upright lattice path: consecutive vertices differ by `+e1` or `+e2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePath {
    vertices: Vec<(usize, usize)>,
}

impl LatticePath {
    pub fn new(vertices: Vec<(usize, usize)>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Domain("lattice path needs at least one vertex".into()));
        }
        for w in vertices.windows(2) {
            let (i0, j0) = w[0];
            let (i1, j1) = w[1];
            let step_e1 = i1 == i0 + 1 && j1 == j0;
            let step_e2 = i1 == i0 && j1 == j0 + 1;
            if !(step_e1 || step_e2) {
                return Err(Error::Domain(format!(
                    "({i0},{j0}) -> ({i1},{j1}) is not a unit upright step"
                )));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[(usize, usize)] {
        &self.vertices
    }

    /// Sum of vertex weights along the path, accumulated with the same
    /// compensated adds as the DP sweep.
    pub fn weight(&self, w: &LatticeWeights) -> f64 {
        let mut acc = KahanSum::zero();
        for &(i, j) in &self.vertices {
            acc = acc.add(w.get(i, j));
        }
        acc.value()
    }

    /// Rotated x-coordinate of the path at time `fraction` of its journey,
    /// linearly interpolated between visited anti-diagonals.
    pub fn transversal(&self, fraction: f64) -> Result<f64> {
        if self.vertices.is_empty() {
            return Err(Error::Domain("empty path".into()));
        }
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Domain(format!("fraction {fraction} outside [0, 1]")));
        }
        let rot_x = |(i, j): (usize, usize)| j as f64 - i as f64;
        let steps = self.vertices.len() - 1;
        if steps == 0 {
            return Ok(rot_x(self.vertices[0]));
        }
        // Each step advances rotated time by exactly one.
        let pos = fraction * steps as f64;
        let lo = pos.floor() as usize;
        if lo >= steps {
            return Ok(rot_x(self.vertices[steps]));
        }
        let frac = pos - lo as f64;
        let a = rot_x(self.vertices[lo]);
        let b = rot_x(self.vertices[lo + 1]);
        Ok(a + (b - a) * frac)
    }
}

/// Inner DP sweep over the rectangle `[0, rows) x [0, cols)` in local
/// coordinates. When `bits` is provided, records one predecessor bit per
/// cell: `true` means the optimum came from `(i-1, j)`, which is also the
/// rightmost tie-break (larger rotated x).
fn dp_sweep<F: Fn(usize, usize) -> f64>(
    rows: usize,
    cols: usize,
    weight: F,
    mut bits: Option<&mut Vec<u64>>,
) -> KahanSum {
    let mut prev: Vec<KahanSum> = Vec::new();
    let mut cur: Vec<KahanSum> = vec![KahanSum::zero(); cols];
    if let Some(b) = bits.as_deref_mut() {
        b.clear();
        b.resize((rows * cols).div_ceil(64), 0);
    }
    for i in 0..rows {
        std::mem::swap(&mut prev, &mut cur);
        if cur.len() != cols {
            cur = vec![KahanSum::zero(); cols];
        }
        for j in 0..cols {
            let from_up = if i > 0 { Some(prev[j]) } else { None };
            let from_left = if j > 0 { Some(cur[j - 1]) } else { None };
            let (pred, up_chosen) = match (from_up, from_left) {
                (None, None) => (KahanSum::zero(), false),
                (Some(u), None) => (u, true),
                (None, Some(l)) => (l, false),
                // Ties go to (i-1, j): the rightmost geodesic convention.
                (Some(u), Some(l)) => {
                    if u.value() >= l.value() {
                        (u, true)
                    } else {
                        (l, false)
                    }
                }
            };
            cur[j] = pred.add(weight(i, j));
            if up_chosen {
                if let Some(b) = bits.as_deref_mut() {
                    let idx = i * cols + j;
                    b[idx / 64] |= 1u64 << (idx % 64);
                }
            }
        }
    }
    cur[cols - 1]
}

/// Last passage time between lattice vertices `u <= v` (both endpoints
/// included). Returns 0 when the endpoints are not ordered, matching the
/// extension convention for unordered pairs.
pub fn passage_time(w: &LatticeWeights, u: (usize, usize), v: (usize, usize)) -> f64 {
    if u.0 > v.0 || u.1 > v.1 {
        return 0.0;
    }
    let rows = v.0 - u.0 + 1;
    let cols = v.1 - u.1 + 1;
    dp_sweep(rows, cols, |i, j| w.get(u.0 + i, u.1 + j), None).value()
}

/// Last passage time over a raw row-major `rows x cols` block. Hot-loop
/// variant used by the Monte Carlo harness.
pub fn passage_time_block(values: &[f64], rows: usize, cols: usize) -> f64 {
    debug_assert_eq!(values.len(), rows * cols);
    dp_sweep(rows, cols, |i, j| values[i * cols + j], None).value()
}

fn backtrack_bits(bits: &[u64], rows: usize, cols: usize, u: (usize, usize)) -> Vec<(usize, usize)> {
    let mut path = Vec::with_capacity(rows + cols - 1);
    let (mut i, mut j) = (rows - 1, cols - 1);
    loop {
        path.push((u.0 + i, u.1 + j));
        if i == 0 && j == 0 {
            break;
        }
        let from_up = if i == 0 {
            false
        } else if j == 0 {
            true
        } else {
            let idx = i * cols + j;
            bits[idx / 64] >> (idx % 64) & 1 == 1
        };
        if from_up {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    path.reverse();
    path
}

/// The rightmost geodesic from `u` to `v`: an upright path achieving
/// `passage_time(w, u, v)`, with ties broken toward the predecessor of larger
/// rotated x-coordinate at every backtracking step.
pub fn geodesic(w: &LatticeWeights, u: (usize, usize), v: (usize, usize)) -> Result<LatticePath> {
    if u.0 > v.0 || u.1 > v.1 {
        return Err(Error::Domain(format!("endpoints {u:?}, {v:?} are not ordered")));
    }
    let rows = v.0 - u.0 + 1;
    let cols = v.1 - u.1 + 1;
    let mut bits = Vec::new();
    dp_sweep(rows, cols, |i, j| w.get(u.0 + i, u.1 + j), Some(&mut bits));
    LatticePath::new(backtrack_bits(&bits, rows, cols, u))
}

/// Geodesic over a raw block in local coordinates, returning the path's
/// vertex list without validation overhead.
pub fn geodesic_block(values: &[f64], rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut bits = Vec::new();
    dp_sweep(rows, cols, |i, j| values[i * cols + j], Some(&mut bits));
    backtrack_bits(&bits, rows, cols, (0, 0))
}

/// Rescaled passage time `T(np, nq) / n` with start coordinates ceiled and
/// end coordinates floored in the unrotated frame.
///
/// Unordered rounded corners give 0; corners outside the sampled lattice are
/// a domain error.
pub fn rescaled_passage(
    w: &LatticeWeights,
    n: usize,
    p: SpaceTimePoint,
    q: SpaceTimePoint,
) -> Result<f64> {
    let nf = n as f64;
    let (a1, b1) = SpaceTimePoint::new(p.x * nf, p.t * nf).unrotated();
    let (a2, b2) = SpaceTimePoint::new(q.x * nf, q.t * nf).unrotated();
    let (a1, b1) = (a1.ceil(), b1.ceil());
    let (a2, b2) = (a2.floor(), b2.floor());
    if a1 > a2 || b1 > b2 {
        return Ok(0.0);
    }
    let side = w.n() as f64;
    if a1 < 0.0 || b1 < 0.0 || a2 >= side || b2 >= side {
        return Err(Error::Domain(format!(
            "corners ({a1},{b1})-({a2},{b2}) fall outside the sampled {0}x{0} lattice",
            w.n()
        )));
    }
    let u = (a1 as usize, b1 as usize);
    let v = (a2 as usize, b2 as usize);
    Ok(passage_time(w, u, v) / nf)
}

/// Exact tail probability `P(T >= x)` for the passage time across an
/// `n x n` lattice of i.i.d. finite-support weights, by full enumeration of
/// weight configurations.
pub fn exact_tail(dist: &WeightDistribution, n: usize, x: f64) -> Result<f64> {
    const LIMIT: u128 = 100_000_000;
    let (values, probs) = dist
        .finite_support()
        .ok_or_else(|| Error::Domain("exact_tail needs a finite-support distribution".into()))?;
    let m = values.len() as u128;
    let cells = n * n;
    let cost = m
        .checked_pow(cells as u32)
        .ok_or(Error::Capacity { cost: u128::MAX, limit: LIMIT })?;
    if cost > LIMIT {
        return Err(Error::Capacity { cost, limit: LIMIT });
    }
    let mut digits = vec![0usize; cells];
    let mut weights = vec![values[0]; cells];
    let mut total = 0.0f64;
    loop {
        // P(config) = product of per-cell masses.
        let mut prob = 1.0;
        for &d in &digits {
            prob *= probs[d];
        }
        if prob > 0.0 {
            let t = dp_sweep(n, n, |i, j| weights[i * n + j], None).value();
            if t >= x {
                total += prob;
            }
        }
        // Advance the mixed-radix counter.
        let mut k = 0;
        loop {
            if k == cells {
                return Ok(total.min(1.0));
            }
            digits[k] += 1;
            if digits[k] < values.len() {
                weights[k] = values[digits[k]];
                break;
            }
            digits[k] = 0;
            weights[k] = values[0];
            k += 1;
        }
    }
}

/// A realization of a planar Poisson point process on a rectangle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<(f64, f64)>,
    intensity: f64,
    seed: u64,
    /// Rectangle `(a0, b0, a1, b1)` the process was sampled on.
    rect: (f64, f64, f64, f64),
}

impl PointCloud {
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        for (k, a) in points.iter().enumerate() {
            for b in &points[k + 1..] {
                if a == b {
                    return Err(Error::Domain(format!("duplicate point {a:?}")));
                }
            }
        }
        Ok(Self { points, intensity: 0.0, seed: 0, rect: (0.0, 0.0, 0.0, 0.0) })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn rect(&self) -> (f64, f64, f64, f64) {
        self.rect
    }
}

/// Sample a Poisson cloud of the given intensity on `[a0, a1] x [b0, b1]`.
/// The point count comes from exponential spacings, so the draw is exact and
/// reproducible.
pub fn sample_poisson_cloud(
    intensity: f64,
    rect: (f64, f64, f64, f64),
    seed: u64,
) -> Result<PointCloud> {
    let (a0, b0, a1, b1) = rect;
    if !(intensity > 0.0) || a1 <= a0 || b1 <= b0 {
        return Err(Error::Domain("need positive intensity and a proper rectangle".into()));
    }
    let mean = intensity * (a1 - a0) * (b1 - b0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = 0usize;
    let mut acc = 0.0f64;
    loop {
        acc += -(1.0 - next_uniform(&mut rng)).ln() / mean;
        if acc > 1.0 {
            break;
        }
        count += 1;
    }
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let a = a0 + (a1 - a0) * next_uniform(&mut rng);
        let b = b0 + (b1 - b0) * next_uniform(&mut rng);
        points.push((a, b));
    }
    Ok(PointCloud { points, intensity, seed, rect })
}

/// Maximal number of cloud points on an upright path from `u` to `v`: the
/// longest chain in the coordinatewise order among points of `[u, v]`,
/// computed by patience sorting. Returns 0 when `u <= v` fails.
pub fn poisson_passage(cloud: &PointCloud, u: (f64, f64), v: (f64, f64)) -> usize {
    if u.0 > v.0 || u.1 > v.1 {
        return 0;
    }
    let mut pts: Vec<(f64, f64)> = cloud
        .points
        .iter()
        .copied()
        .filter(|(a, b)| *a >= u.0 && *a <= v.0 && *b >= u.1 && *b <= v.1)
        .collect();
    pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    // Longest non-decreasing subsequence of the b-coordinates.
    let mut tops: Vec<f64> = Vec::new();
    for (_, b) in pts {
        let idx = tops.partition_point(|t| *t <= b);
        if idx == tops.len() {
            tops.push(b);
        } else {
            tops[idx] = b;
        }
    }
    tops.len()
}

/// Scaled log partition function `log Z(u, v)` of the directed polymer with
/// Gibbs path weights `exp(beta * sum of vertex weights)`, computed by a
/// log-sum-exp DP. Errors when `u <= v` fails.
pub fn polymer_log_partition(
    w: &LatticeWeights,
    u: (usize, usize),
    v: (usize, usize),
    beta: f64,
) -> Result<f64> {
    if u.0 > v.0 || u.1 > v.1 {
        return Err(Error::Domain(format!("endpoints {u:?}, {v:?} are not ordered")));
    }
    let rows = v.0 - u.0 + 1;
    let cols = v.1 - u.1 + 1;
    let mut prev: Vec<f64> = Vec::new();
    let mut cur: Vec<f64> = vec![0.0; cols];
    for i in 0..rows {
        std::mem::swap(&mut prev, &mut cur);
        if cur.len() != cols {
            cur = vec![0.0; cols];
        }
        for j in 0..cols {
            let site = beta * w.get(u.0 + i, u.1 + j);
            cur[j] = match (i > 0, j > 0) {
                (false, false) => site,
                (true, false) => prev[j] + site,
                (false, true) => cur[j - 1] + site,
                (true, true) => log_sum_exp([prev[j], cur[j - 1]]) + site,
            };
        }
    }
    Ok(cur[cols - 1])
}

/// Best single-slice splitting of the polymer partition function across the
/// anti-diagonal `i + j = c` (absolute coordinates): returns
/// `(max over m of [log Z(u,m) + log Z(m,v) - beta w(m)], slice size)`.
///
/// Every path crosses the slice exactly once, so
/// `0 <= log Z(u,v) - max_split <= log(slice size)`.
pub fn polymer_max_split(
    w: &LatticeWeights,
    u: (usize, usize),
    v: (usize, usize),
    beta: f64,
    c: usize,
) -> Result<(f64, usize)> {
    if c < u.0 + u.1 || c > v.0 + v.1 {
        return Err(Error::Domain(format!("slice {c} misses the rectangle {u:?}-{v:?}")));
    }
    let mut best = f64::NEG_INFINITY;
    let mut count = 0usize;
    for i in u.0..=v.0 {
        if c < i || c - i < u.1 || c - i > v.1 {
            continue;
        }
        let m = (i, c - i);
        count += 1;
        let val = polymer_log_partition(w, u, m, beta)?
            + polymer_log_partition(w, m, v, beta)?
            - beta * w.get(m.0, m.1);
        best = best.max(val);
    }
    Ok((best, count))
}
