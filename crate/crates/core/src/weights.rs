//! Weight distributions, reproducible lattice sampling, log moment generating
//! functions and the Cramér rate function.
//!
//! All sampling goes through explicit inverse-CDF transforms of a ChaCha8
//! stream, so a `(distribution, n, seed)` triple regenerates bit-identical
//! arrays on any platform and under any thread count.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Supported weight laws. All are supported on the non-negative reals and
/// have a finite log-MGF in a neighborhood of zero.
///
/// `TruncatedGeometric` is the law of `min(G, cap)` for `G ~ geometric(p)`;
/// it exists to make small-lattice configuration spaces finite, at the price
/// of bounded support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightDistribution {
    Exponential { rate: f64 },
    Geometric { p: f64 },
    TruncatedGeometric { p: f64, cap: u32 },
    UserTable { values: Vec<f64>, probs: Vec<f64> },
}

impl WeightDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::Domain(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("geometric p must lie in (0,1), got {p}")));
        }
        Ok(Self::Geometric { p })
    }

    pub fn truncated_geometric(p: f64, cap: u32) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("geometric p must lie in (0,1), got {p}")));
        }
        Ok(Self::TruncatedGeometric { p, cap })
    }

    pub fn user_table(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::Domain("table needs matching non-empty values/probs".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("table values must be finite and non-negative".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain("table probabilities must be non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("table probabilities sum to {total}, not 1")));
        }
        let probs = probs.iter().map(|p| p / total).collect();
        Ok(Self::UserTable { values, probs })
    }

    /// Mean of the distribution.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Geometric { p } => (1.0 - p) / p,
            Self::TruncatedGeometric { p, cap } => {
                // E min(G, cap) = sum_{k=1..cap} P(G >= k).
                let q = 1.0 - p;
                q * (1.0 - q.powi(*cap as i32)) / p
            }
            Self::UserTable { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
        }
    }

    /// Supremum of the MGF's finiteness interval (infinite for bounded laws).
    pub fn mgf_abscissa(&self) -> f64 {
        match self {
            Self::Exponential { rate } => *rate,
            Self::Geometric { p } => -(1.0 - p).ln(),
            Self::TruncatedGeometric { .. } | Self::UserTable { .. } => f64::INFINITY,
        }
    }

    /// Finite support as `(values, probs)` when the law is discrete and
    /// bounded; `None` for exponential/geometric.
    pub fn finite_support(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Self::TruncatedGeometric { p, cap } => {
                let q = 1.0 - p;
                let mut values = Vec::with_capacity(*cap as usize + 1);
                let mut probs = Vec::with_capacity(*cap as usize + 1);
                for k in 0..*cap {
                    values.push(k as f64);
                    probs.push(p * q.powi(k as i32));
                }
                values.push(*cap as f64);
                probs.push(q.powi(*cap as i32));
                Some((values, probs))
            }
            Self::UserTable { values, probs } => Some((values.clone(), probs.clone())),
            _ => None,
        }
    }

    /// log E[exp(theta * w)], exact per kind.
    pub fn log_mgf(&self, theta: f64) -> Result<f64> {
        if theta >= self.mgf_abscissa() {
            return Err(Error::MgfDivergence(theta));
        }
        Ok(match self {
            Self::Exponential { rate } => -(1.0 - theta / rate).ln(),
            Self::Geometric { p } => p.ln() - (1.0 - (1.0 - p) * theta.exp()).ln(),
            Self::TruncatedGeometric { .. } | Self::UserTable { .. } => {
                let (values, probs) = self.finite_support().unwrap();
                log_sum_exp(
                    values
                        .iter()
                        .zip(&probs)
                        .filter(|(_, p)| **p > 0.0)
                        .map(|(v, p)| p.ln() + theta * v),
                )
            }
        })
    }

    /// Essential infimum and supremum of the support.
    fn support_bounds(&self) -> (f64, f64) {
        match self {
            Self::Exponential { .. } | Self::Geometric { .. } => (0.0, f64::INFINITY),
            Self::TruncatedGeometric { cap, .. } => (0.0, *cap as f64),
            Self::UserTable { values, probs } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (v, p) in values.iter().zip(probs) {
                    if *p > 0.0 {
                        lo = lo.min(*v);
                        hi = hi.max(*v);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Probability mass at an exact point (zero for continuous laws).
    fn mass_at(&self, x: f64) -> f64 {
        match self {
            Self::Exponential { .. } => 0.0,
            Self::Geometric { p } => {
                if x >= 0.0 && x.fract() == 0.0 {
                    p * (1.0 - p).powi(x as i32)
                } else {
                    0.0
                }
            }
            _ => {
                let (values, probs) = self.finite_support().unwrap();
                values
                    .iter()
                    .zip(&probs)
                    .filter(|(v, _)| **v == x)
                    .map(|(_, p)| *p)
                    .sum()
            }
        }
    }

    /// Cramér rate `sup_theta { theta x - log_mgf(theta) }` for `x >= 0`.
    pub fn cramer_rate(&self, x: f64) -> Result<f64> {
        Ok(self.cramer(x)?.0)
    }

    /// Cramér rate together with the maximizing tilt parameter.
    pub fn cramer(&self, x: f64) -> Result<(f64, f64)> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("cramer_rate needs x >= 0, got {x}")));
        }
        let (lo, hi) = self.support_bounds();
        if x > hi || x < lo {
            return Ok((f64::INFINITY, f64::INFINITY));
        }
        if x == hi {
            let m = self.mass_at(hi);
            return Ok(if m > 0.0 { (-m.ln(), f64::INFINITY) } else { (f64::INFINITY, f64::INFINITY) });
        }
        if x == lo {
            let m = self.mass_at(lo);
            return Ok(if m > 0.0 { (-m.ln(), f64::NEG_INFINITY) } else { (f64::INFINITY, f64::NEG_INFINITY) });
        }
        let g = |theta: f64| theta * x - self.log_mgf(theta).unwrap_or(f64::INFINITY);

        // Bracket the concave objective. Right end: just below the abscissa,
        // or grow until the objective turns down (bounded support).
        let abscissa = self.mgf_abscissa();
        let right = if abscissa.is_finite() {
            abscissa - abscissa.abs().max(1.0) * 1e-12
        } else {
            let mut r = 1.0;
            while g(2.0 * r) >= g(r) && r < 1e18 {
                r *= 2.0;
            }
            2.0 * r
        };
        let mut left = -1.0;
        while g(2.0 * left) >= g(left) && left > -1e18 {
            left *= 2.0;
        }
        left *= 2.0;
        if left >= right {
            left = right - 1.0;
        }
        let (theta, _) = golden_max(g, left, right, 1e-10);
        // theta = 0 always gives rate 0; never report below it.
        let mut rate = g(theta).max(0.0);
        let mut arg = theta;
        if g(0.0) >= rate {
            rate = g(0.0).max(0.0);
            arg = 0.0;
        }
        Ok((rate, arg))
    }

    /// Exponentially tilted distribution `dP_theta ∝ exp(theta w) dP`.
    pub fn tilted(&self, theta: f64) -> Result<Self> {
        if theta >= self.mgf_abscissa() {
            return Err(Error::MgfDivergence(theta));
        }
        Ok(match self {
            Self::Exponential { rate } => Self::Exponential { rate: rate - theta },
            Self::Geometric { p } => Self::Geometric { p: 1.0 - (1.0 - p) * theta.exp() },
            Self::TruncatedGeometric { .. } | Self::UserTable { .. } => {
                let (values, probs) = self.finite_support().unwrap();
                let log_z = self.log_mgf(theta)?;
                let tilted: Vec<f64> = values
                    .iter()
                    .zip(&probs)
                    .map(|(v, p)| if *p > 0.0 { (p.ln() + theta * v - log_z).exp() } else { 0.0 })
                    .collect();
                Self::user_table(values, tilted)?
            }
        })
    }

    /// Inverse CDF at `u` in `[0, 1)`. This is the single sampling primitive;
    /// every consumer shares it so streams stay reproducible.
    pub fn quantile(&self, u: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&u));
        match self {
            Self::Exponential { rate } => -(1.0 - u).ln() / rate,
            Self::Geometric { p } => ((1.0 - u).ln() / (1.0 - p).ln()).floor(),
            Self::TruncatedGeometric { p, cap } => {
                let g = ((1.0 - u).ln() / (1.0 - p).ln()).floor();
                g.min(*cap as f64)
            }
            Self::UserTable { values, probs } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                values[values.len() - 1]
            }
        }
    }
}

/// Numerically stable `log(sum(exp(terms)))`.
pub fn log_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
/// Returns `(argmax, max)` with the argument located to within `tol`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - (b - a) * INV_PHI;
    let mut d = a + (b - a) * INV_PHI;
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INV_PHI;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INV_PHI;
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}

/// SplitMix64 finalizer, the mixing primitive for substream derivation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-replica substream seed derived from a master seed.
pub fn substream_seed(seed: u64, replica: u64) -> u64 {
    splitmix64(seed ^ splitmix64(replica.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1)))
}

/// A reproducible RNG stream for one replica.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, replica))
}

/// Next uniform in `[0, 1)` from the top 53 bits of the stream.
pub fn next_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// An `n x n` array of sampled weights with its regeneration recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWeights {
    n: usize,
    values: Vec<f64>,
    seed: u64,
    dist: WeightDistribution,
}

impl LatticeWeights {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dist(&self) -> &WeightDistribution {
        &self.dist
    }

    /// Weight at lattice vertex `(i, j)`, row-major in `i`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rebuild from raw values (used by the persistence layer).
    pub fn from_parts(n: usize, values: Vec<f64>, seed: u64, dist: WeightDistribution) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Domain(format!(
                "value buffer has {} entries, expected {}",
                values.len(),
                n * n
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("weights must be finite and non-negative".into()));
        }
        Ok(Self { n, values, seed, dist })
    }

    /// Mutable access for fault-injection tests.
    #[doc(hidden)]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }
}

/// Sample an `n x n` lattice. Deterministic in `(dist, n, seed)`.
pub fn sample(dist: &WeightDistribution, n: usize, seed: u64) -> Result<LatticeWeights> {
    if n == 0 {
        return Err(Error::Domain("lattice size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        values.push(dist.quantile(next_uniform(&mut rng)));
    }
    Ok(LatticeWeights { n, values, seed, dist: dist.clone() })
}

/// Sample a rectangular `rows x cols` block as a flat row-major buffer,
/// reusing `buf`. Same stream layout as [`sample`] restricted to the block.
pub fn sample_block_into(
    dist: &WeightDistribution,
    rows: usize,
    cols: usize,
    seed: u64,
    buf: &mut Vec<f64>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    buf.clear();
    buf.reserve(rows * cols);
    for _ in 0..rows * cols {
        buf.push(dist.quantile(next_uniform(&mut rng)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn exp1() -> WeightDistribution {
        WeightDistribution::exponential(1.0).unwrap()
    }

    fn geom_half() -> WeightDistribution {
        WeightDistribution::geometric(0.5).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample(&exp1(), 2, 42).unwrap();
        let b = sample(&exp1(), 2, 42).unwrap();
        assert_eq!(a.values(), b.values());
        let c = sample(&exp1(), 2, 43).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn geometric_sample_mean_matches_analytic_moment() {
        let w = sample(&geom_half(), 1000, 7).unwrap();
        let mean: f64 = w.values().iter().sum::<f64>() / w.values().len() as f64;
        // Var = (1-p)/p^2 = 2, so SE = sqrt(2/1e6).
        let se = (2.0f64 / 1e6).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} off by more than 3 SE");
    }

    #[test]
    fn degenerate_truncation_gives_zeros() {
        let d = WeightDistribution::truncated_geometric(0.5, 0).unwrap();
        let w = sample(&d, 8, 3).unwrap();
        assert!(w.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn log_mgf_exponential_closed_form() {
        assert_eq!(exp1().log_mgf(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(exp1().log_mgf(0.5).unwrap(), 2.0f64.ln(), epsilon = 1e-12);
        assert!(exp1().log_mgf(1.0).is_err());
        assert!(exp1().log_mgf(1.5).is_err());
    }

    /// Brute-force series oracle for the geometric log-MGF.
    fn geometric_log_mgf_series(p: f64, theta: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = p; // p * (1-p)^k * e^{theta k} at k = 0
        let ratio = (1.0 - p) * theta.exp();
        let mut k = 0;
        while term > 1e-18 && k < 100_000 {
            sum += term;
            term *= ratio;
            k += 1;
        }
        sum.ln()
    }

    #[test]
    fn log_mgf_geometric_matches_series() {
        for theta in [-1.0, -0.2, 0.0, 0.1, 0.3, 0.6] {
            let exact = geom_half().log_mgf(theta).unwrap();
            let series = geometric_log_mgf_series(0.5, theta);
            assert_abs_diff_eq!(exact, series, epsilon = 1e-12);
        }
        assert!(geom_half().log_mgf(2.0f64.ln()).is_err());
    }

    #[test]
    fn log_mgf_truncated_matches_direct_sum() {
        let d = WeightDistribution::truncated_geometric(0.5, 10).unwrap();
        for theta in [-0.5, 0.0, 0.4, 2.0] {
            let (values, probs) = d.finite_support().unwrap();
            let direct: f64 =
                values.iter().zip(&probs).map(|(v, p)| p * (theta * v).exp()).sum();
            assert_abs_diff_eq!(d.log_mgf(theta).unwrap(), direct.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn truncated_support_sums_to_one_and_keeps_geometric_tails() {
        let d = WeightDistribution::truncated_geometric(0.5, 10).unwrap();
        let (values, probs) = d.finite_support().unwrap();
        assert_eq!(values.len(), 11);
        assert_abs_diff_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // P(w >= 2) keeps the untruncated geometric tail (1-p)^2 exactly.
        let tail: f64 = values.iter().zip(&probs).filter(|(v, _)| **v >= 2.0).map(|(_, p)| p).sum();
        assert_abs_diff_eq!(tail, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn cramer_exponential_closed_form() {
        // Rate vanishes at the mean.
        assert!(exp1().cramer_rate(1.0).unwrap().abs() < 1e-9);
        // x - 1 - log(x) at x = 2.
        let expect = 1.0 - 2.0f64.ln();
        assert_abs_diff_eq!(exp1().cramer_rate(2.0).unwrap(), expect, epsilon = 1e-8);
        // 100-point sweep against the closed form.
        for k in 1..=100 {
            let x = 0.2 + 0.05 * k as f64;
            let closed = x - 1.0 - x.ln();
            assert_abs_diff_eq!(exp1().cramer_rate(x).unwrap(), closed, epsilon = 1e-6);
        }
    }

    /// Closed-form Legendre transform of the geometric(p) log-MGF.
    fn geometric_cramer_closed(p: f64, x: f64) -> f64 {
        if x == 0.0 {
            return -p.ln();
        }
        let theta = (x / ((1.0 + x) * (1.0 - p))).ln();
        theta * x - (p.ln() - (1.0 - (1.0 - p) * theta.exp()).ln())
    }

    #[test]
    fn cramer_geometric_closed_form() {
        assert!(geom_half().cramer_rate(1.0).unwrap().abs() < 1e-9);
        for k in 0..=100 {
            let x = 0.05 + 0.06 * k as f64;
            let closed = geometric_cramer_closed(0.5, x);
            assert_abs_diff_eq!(geom_half().cramer_rate(x).unwrap(), closed, epsilon = 1e-6);
        }
        // Mass at the bottom of the support.
        assert_abs_diff_eq!(geom_half().cramer_rate(0.0).unwrap(), 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn cramer_is_convex_zero_at_mean_increasing_above() {
        for dist in [exp1(), geom_half()] {
            let mean = dist.mean();
            assert!(dist.cramer_rate(mean).unwrap() < 1e-8);
            let mut prev = 0.0;
            for k in 0..40 {
                let x = mean + 0.1 * k as f64;
                let r = dist.cramer_rate(x).unwrap();
                assert!(r + 1e-10 >= prev, "rate not nondecreasing above mean");
                prev = r;
            }
            // Convexity on triples.
            for k in 1..30 {
                let x = mean + 0.1 * k as f64;
                let (a, b, c) = (
                    dist.cramer_rate(x - 0.1).unwrap(),
                    dist.cramer_rate(x).unwrap(),
                    dist.cramer_rate(x + 0.1).unwrap(),
                );
                assert!(a + c - 2.0 * b >= -1e-7, "convexity violated at {x}");
            }
        }
    }

    #[test]
    fn cramer_bounded_support_edges() {
        let d = WeightDistribution::truncated_geometric(0.5, 3).unwrap();
        assert_eq!(d.cramer_rate(10.0).unwrap(), f64::INFINITY);
        // At the cap: -ln P(w = 3) = -ln(0.125).
        assert_abs_diff_eq!(d.cramer_rate(3.0).unwrap(), -(0.125f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_mgf_is_convex_in_theta() {
        for dist in [exp1(), geom_half(), WeightDistribution::truncated_geometric(0.3, 6).unwrap()] {
            let h = 0.05;
            let mut theta = -2.0;
            while theta < 0.6 {
                let (a, b, c) = (
                    dist.log_mgf(theta - h).unwrap(),
                    dist.log_mgf(theta).unwrap(),
                    dist.log_mgf(theta + h).unwrap(),
                );
                assert!(a + c - 2.0 * b >= -1e-10);
                theta += 0.1;
            }
        }
    }

    #[test]
    fn tilted_satisfies_mgf_identity() {
        // Lambda_tilted(s) = Lambda(s + theta) - Lambda(theta).
        let theta = 0.3;
        for dist in [exp1(), geom_half(), WeightDistribution::truncated_geometric(0.5, 10).unwrap()] {
            let tilted = dist.tilted(theta).unwrap();
            for s in [-0.4, -0.1, 0.0, 0.2] {
                let lhs = tilted.log_mgf(s).unwrap();
                let rhs = dist.log_mgf(s + theta).unwrap() - dist.log_mgf(theta).unwrap();
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn substreams_are_deterministic_and_distinct() {
        assert_eq!(substream_seed(42, 7), substream_seed(42, 7));
        assert_ne!(substream_seed(42, 7), substream_seed(42, 8));
        assert_ne!(substream_seed(42, 7), substream_seed(43, 7));
    }
}
