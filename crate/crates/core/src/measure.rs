//! Invariant measures: ball mass, quantile radius, cylinder weights and
//! sampling.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::digits::{DigitSource, DigitStream};
use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::system::{Backend, MapKind, MapSystem, Metric, PointRep};

const ONE: u128 = 1 << 64;
const HALF: u128 = 1 << 63;

/// A long orbit used as a Birkhoff surrogate for an invariant measure.
#[derive(Debug)]
pub struct OrbitSample {
    sorted: Vec<f64>,
    burn_in: u64,
}

impl OrbitSample {
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in
    }

    pub fn points(&self) -> &[f64] {
        &self.sorted
    }

    /// Continuous interpolated distribution function through the knots
    /// `(x_(i), (i + 1) / (N + 1))`, pinned to `(0, 0)` and `(1, 1)`.
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let s = &self.sorted;
        let n = s.len() as f64 + 1.0;
        let i = s.partition_point(|&v| v <= x);
        let (x0, f0) = if i == 0 { (0.0, 0.0) } else { (s[i - 1], i as f64 / n) };
        let (x1, f1) = if i == s.len() { (1.0, 1.0) } else { (s[i], (i + 1) as f64 / n) };
        if x1 <= x0 {
            return f1;
        }
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone)]
pub enum MeasureKind {
    Lebesgue,
    /// Product measure on binary digits with `P(digit = 0) = p`.
    Bernoulli { p: f64 },
    EmpiricalOrbit(Arc<OrbitSample>),
}

/// An invariant probability measure paired with the metric of its system.
#[derive(Debug, Clone)]
pub struct MeasureModel {
    kind: MeasureKind,
    metric: Metric,
    stream: bool,
}

impl MeasureModel {
    pub fn lebesgue(system: &MapSystem) -> Result<Self> {
        if system.kind() == MapKind::MannevillePomeau {
            return Err(Error::InvalidParameter(
                "Lebesgue measure is not invariant for the Manneville-Pomeau map".into(),
            ));
        }
        Ok(Self {
            kind: MeasureKind::Lebesgue,
            metric: system.metric(),
            stream: system.backend() == Backend::BitStream,
        })
    }

    /// Bernoulli measure for the doubling map.
    pub fn bernoulli(system: &MapSystem, p: f64) -> Result<Self> {
        if system.kind() != MapKind::Doubling {
            return Err(Error::InvalidParameter(format!(
                "Bernoulli measures are only invariant for the doubling map, not {}",
                system.kind().name()
            )));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("digit mass {p} not in (0, 1)")));
        }
        Ok(Self {
            kind: MeasureKind::Bernoulli { p },
            metric: system.metric(),
            stream: system.backend() == Backend::BitStream,
        })
    }

    /// Empirical measure of a single orbit of length `orbit_len` after
    /// discarding `burn_in` iterates.
    pub fn empirical_orbit(
        system: &MapSystem,
        burn_in: u64,
        orbit_len: usize,
        seeds: &SeedTree,
    ) -> Result<Self> {
        if system.backend() != Backend::Float64 {
            return Err(Error::BackendUnsupported {
                system: system.kind().name(),
                backend: system.backend().name(),
            });
        }
        if orbit_len < 2 {
            return Err(Error::InvalidParameter("orbit length must be at least 2".into()));
        }
        let mut rng = seeds.stream(0);
        // stay away from the neutral fixed point at 0
        let mut x: f64 = rng.gen_range(0.1..0.9);
        for _ in 0..burn_in {
            x = system.apply(x);
        }
        let mut sorted = Vec::with_capacity(orbit_len);
        for _ in 0..orbit_len {
            sorted.push(x);
            x = system.apply(x);
        }
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            kind: MeasureKind::EmpiricalOrbit(Arc::new(OrbitSample { sorted, burn_in })),
            metric: system.metric(),
            stream: false,
        })
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn name(&self) -> String {
        match &self.kind {
            MeasureKind::Lebesgue => "lebesgue".into(),
            MeasureKind::Bernoulli { p } => format!("bernoulli(p={p})"),
            MeasureKind::EmpiricalOrbit(o) => {
                format!("empirical-orbit(len={}, burn_in={})", o.len(), o.burn_in)
            }
        }
    }

    /// Probabilities of binary digits 0 and 1, for measures with product
    /// structure on dyadic cylinders.
    pub fn digit_probs(&self) -> Option<(f64, f64)> {
        match self.kind {
            MeasureKind::Lebesgue => Some((0.5, 0.5)),
            MeasureKind::Bernoulli { p } => Some((p, 1.0 - p)),
            MeasureKind::EmpiricalOrbit(_) => None,
        }
    }

    /// Log-masses of the two digit values.
    pub fn digit_log_weights(&self) -> Option<(f64, f64)> {
        match self.kind {
            MeasureKind::Lebesgue => Some((-std::f64::consts::LN_2, -std::f64::consts::LN_2)),
            MeasureKind::Bernoulli { p } => Some((p.ln(), (1.0 - p).ln())),
            MeasureKind::EmpiricalOrbit(_) => None,
        }
    }

    /// `mu([0, x))`.
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.kind {
            MeasureKind::Lebesgue => x,
            MeasureKind::Bernoulli { p } => bernoulli_cdf(*p, x),
            MeasureKind::EmpiricalOrbit(o) => o.cdf(x),
        }
    }

    /// `mu([a, b))` for `0 <= a <= b <= 1`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if b <= a {
            return 0.0;
        }
        match &self.kind {
            MeasureKind::Lebesgue => b - a,
            MeasureKind::Bernoulli { p } => {
                let fb = bernoulli_cdf(*p, b);
                if fb <= 0.5 {
                    fb - bernoulli_cdf(*p, a)
                } else {
                    bernoulli_upper(*p, a) - bernoulli_upper(*p, b)
                }
            }
            MeasureKind::EmpiricalOrbit(o) => o.cdf(b) - o.cdf(a),
        }
        .max(0.0)
    }

    /// Mass of an arc `[a, b)` of the circle; `a > b` wraps through 0.
    pub fn arc_mass(&self, a: f64, b: f64) -> f64 {
        if a <= b {
            self.interval_mass(a, b)
        } else {
            self.interval_mass(a, 1.0) + self.interval_mass(0.0, b)
        }
    }

    /// `hbar(eta) = mu(B_eta(zeta))`.
    pub fn ball_mass(&self, zeta: f64, eta: f64) -> f64 {
        debug_assert!(eta >= 0.0);
        if eta <= 0.0 {
            return 0.0;
        }
        match (self.metric, &self.kind) {
            (Metric::Circle, MeasureKind::Lebesgue) => (2.0 * eta).min(1.0),
            (Metric::Interval, MeasureKind::Lebesgue) => {
                (zeta + eta).min(1.0) - (zeta - eta).max(0.0)
            }
            (Metric::Interval, _) => self.interval_mass(zeta - eta, zeta + eta),
            (Metric::Circle, _) => {
                if eta >= 0.5 {
                    return 1.0;
                }
                let (lo, hi) = (zeta - eta, zeta + eta);
                if lo < 0.0 {
                    self.interval_mass(0.0, hi) + self.interval_mass(lo + 1.0, 1.0)
                } else if hi > 1.0 {
                    self.interval_mass(lo, 1.0) + self.interval_mass(0.0, hi - 1.0)
                } else {
                    self.interval_mass(lo, hi)
                }
            }
        }
        .min(1.0)
    }

    /// `ell(gamma) = inf { eta > 0 : hbar(eta) >= gamma }`.
    pub fn quantile_radius(&self, zeta: f64, gamma: f64) -> Result<f64> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("mass {gamma} not in (0, 1]")));
        }
        match (self.metric, &self.kind) {
            (Metric::Circle, MeasureKind::Lebesgue) => return Ok(gamma / 2.0),
            (Metric::Interval, MeasureKind::Lebesgue) => {
                let a = zeta.min(1.0 - zeta);
                return Ok(if gamma <= 2.0 * a { gamma / 2.0 } else { gamma - a });
            }
            _ => {}
        }
        let (mut lo, mut hi) = (0.0f64, self.metric.diameter().max(zeta).max(1.0 - zeta));
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.ball_mass(zeta, mid) < gamma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let attained = self.ball_mass(zeta, hi);
        if attained - gamma > 1e-8 {
            return Err(Error::NotAttained {
                target: gamma,
                attained,
            });
        }
        Ok(hi)
    }

    /// `mu([a, b))` with endpoints on the `2^-64` grid (`2^64` is 1).
    pub fn fixed_mass(&self, a: u128, b: u128) -> f64 {
        if b <= a {
            return 0.0;
        }
        match &self.kind {
            MeasureKind::Lebesgue => (b - a) as f64 * 2f64.powi(-64),
            MeasureKind::Bernoulli { p } => {
                let fb = bernoulli_cdf_fixed(*p, b);
                if fb <= 0.5 {
                    fb - bernoulli_cdf_fixed(*p, a)
                } else {
                    bernoulli_upper_fixed(*p, a) - bernoulli_upper_fixed(*p, b)
                }
                .max(0.0)
            }
            MeasureKind::EmpiricalOrbit(o) => {
                o.cdf(crate::digits::fixed_to_f64(b)) - o.cdf(crate::digits::fixed_to_f64(a))
            }
        }
    }

    /// Draws an initial condition distributed according to the measure.
    pub fn sample_stationary(&self, rng: &mut ChaCha8Rng) -> PointRep {
        match &self.kind {
            MeasureKind::EmpiricalOrbit(o) => PointRep::Real(o.sorted[rng.gen_range(0..o.len())]),
            _ => {
                let (p0, _) = self.digit_probs().unwrap();
                if self.stream {
                    PointRep::Digits(DigitStream::iid(fork(rng), p0))
                } else if p0 == 0.5 {
                    PointRep::Real(rng.gen::<f64>())
                } else {
                    PointRep::Real(DigitStream::iid(fork(rng), p0).coordinate().min(1.0 - f64::EPSILON / 2.0))
                }
            }
        }
    }

    /// Draws a point from the measure conditioned on `[a, b)` (fixed-point
    /// endpoints), as a digit stream. Requires a product-structure measure.
    pub fn sample_fixed_in(&self, mut a: u128, mut b: u128, rng: &mut ChaCha8Rng) -> Result<DigitStream> {
        let (p0, p1) = self
            .digit_probs()
            .ok_or_else(|| Error::Unsupported("digit sampling for an empirical measure".into()))?;
        if b <= a || b > ONE {
            return Err(Error::InvalidParameter("empty sampling interval".into()));
        }
        let mut prefix = Vec::new();
        // the measure of a dyadic cell is a scaled copy of the whole, so each
        // digit is chosen from the relative masses of the two halves
        while !(a == 0 && b == ONE) {
            let ml = if a < HALF { p0 * self.fixed_mass(2 * a, 2 * b.min(HALF)) } else { 0.0 };
            let mr = if b > HALF { p1 * self.fixed_mass(2 * a.max(HALF) - ONE, 2 * b - ONE) } else { 0.0 };
            if ml + mr <= 0.0 {
                return Err(Error::ZeroMassCylinder);
            }
            if rng.gen::<f64>() * (ml + mr) < ml {
                prefix.push(false);
                b = 2 * b.min(HALF);
                a *= 2;
            } else {
                prefix.push(true);
                a = 2 * a.max(HALF) - ONE;
                b = 2 * b - ONE;
            }
        }
        Ok(DigitStream::with_prefix(
            &prefix,
            DigitSource::Iid {
                rng: fork(rng),
                zero_prob: p0,
            },
        ))
    }

    /// Draws a real point from the measure conditioned on `[a, b)`.
    pub fn sample_real_in(&self, a: f64, b: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        if b <= a {
            return Err(Error::InvalidParameter("empty sampling interval".into()));
        }
        match &self.kind {
            MeasureKind::EmpiricalOrbit(o) => {
                let i0 = o.sorted.partition_point(|&v| v < a);
                let i1 = o.sorted.partition_point(|&v| v < b);
                if i1 <= i0 {
                    return Err(Error::ZeroMassCylinder);
                }
                Ok(o.sorted[rng.gen_range(i0..i1)])
            }
            MeasureKind::Lebesgue => loop {
                let x = a + (b - a) * rng.gen::<f64>();
                if x < b {
                    return Ok(x);
                }
            },
            MeasureKind::Bernoulli { .. } => {
                let s = self.sample_fixed_in(
                    crate::digits::f64_to_fixed(a),
                    crate::digits::f64_to_fixed(b),
                    rng,
                )?;
                let mut s = s;
                Ok(s.coordinate().clamp(a, b.next_down_or(a)))
            }
        }
    }
}

trait NextDown {
    fn next_down_or(self, floor: f64) -> f64;
}

impl NextDown for f64 {
    fn next_down_or(self, floor: f64) -> f64 {
        let d = f64::from_bits(self.to_bits() - 1);
        d.max(floor)
    }
}

fn fork(rng: &mut ChaCha8Rng) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(rng.gen())
}

/// `mu_p([0, x))` by reading the exact binary digits of `x`.
fn bernoulli_cdf(p: f64, mut x: f64) -> f64 {
    if x >= 1.0 {
        return 1.0;
    }
    let q = 1.0 - p;
    let (mut f, mut mass) = (0.0, 1.0);
    while x > 0.0 && mass > 0.0 {
        x *= 2.0;
        if x >= 1.0 {
            f += mass * p;
            mass *= q;
            x -= 1.0;
        } else {
            mass *= p;
        }
    }
    f
}

/// `mu_p([x, 1))`, computed directly so that it stays accurate near 1.
fn bernoulli_upper(p: f64, mut x: f64) -> f64 {
    if x >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - p;
    let (mut g, mut mass) = (0.0, 1.0);
    while x > 0.0 && mass > 0.0 {
        x *= 2.0;
        if x >= 1.0 {
            mass *= q;
            x -= 1.0;
        } else {
            g += mass * q;
            mass *= p;
        }
    }
    g + mass
}

fn bernoulli_cdf_fixed(p: f64, x: u128) -> f64 {
    if x >= ONE {
        return 1.0;
    }
    let q = 1.0 - p;
    let (mut f, mut mass) = (0.0, 1.0);
    let x = x as u64;
    let tz = if x == 0 { 64 } else { x.trailing_zeros() };
    for i in 0..(64 - tz) {
        if (x >> (63 - i)) & 1 == 1 {
            f += mass * p;
            mass *= q;
        } else {
            mass *= p;
        }
    }
    f
}

fn bernoulli_upper_fixed(p: f64, x: u128) -> f64 {
    if x >= ONE {
        return 0.0;
    }
    let q = 1.0 - p;
    let (mut g, mut mass) = (0.0, 1.0);
    let x = x as u64;
    let tz = if x == 0 { 64 } else { x.trailing_zeros() };
    for i in 0..(64 - tz) {
        if (x >> (63 - i)) & 1 == 1 {
            mass *= q;
        } else {
            g += mass * q;
            mass *= p;
        }
    }
    g + mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digits::f64_to_fixed;
    use approx::assert_abs_diff_eq;

    fn tent() -> MapSystem {
        MapSystem::full_tent(Backend::BitStream).unwrap()
    }

    fn doubling() -> MapSystem {
        MapSystem::doubling(Backend::BitStream).unwrap()
    }

    #[test]
    fn lebesgue_ball_masses() {
        let m = MeasureModel::lebesgue(&tent()).unwrap();
        assert_eq!(m.ball_mass(1.0, 0.25), 0.25);
        let c = MeasureModel::lebesgue(&doubling()).unwrap();
        assert_eq!(c.ball_mass(0.5, 0.1), 0.2);
        assert_eq!(c.ball_mass(0.5, 0.7), 1.0);
    }

    #[test]
    fn bernoulli_ball_at_zero() {
        let m = MeasureModel::bernoulli(&doubling(), 0.3).unwrap();
        assert_abs_diff_eq!(m.cdf(0.25), 0.09, epsilon = 1e-15);
        assert_abs_diff_eq!(m.interval_mass(0.75, 1.0), 0.49, epsilon = 1e-15);
        assert_abs_diff_eq!(m.ball_mass(0.0, 0.25), 0.58, epsilon = 1e-12);
        assert_abs_diff_eq!(m.quantile_radius(0.0, 0.58).unwrap(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn bernoulli_ball_mass_matches_monte_carlo() {
        let mut rng = SeedTree::new(5, "ball").stream(0);
        let n = 1_000_000;
        let mut hits = 0usize;
        for _ in 0..n {
            // 64 iid digits of a Bernoulli point
            let mut w = 0u64;
            for _ in 0..64 {
                w = (w << 1) | (!rng.gen_bool(0.3)) as u64;
            }
            if w < 1 << 62 || w >= 3 << 62 {
                hits += 1;
            }
        }
        let f = hits as f64 / n as f64;
        assert!((f - 0.58).abs() < 3.0 * (0.58 * 0.42 / n as f64).sqrt());
    }

    #[test]
    fn quantile_closed_forms() {
        let m = MeasureModel::lebesgue(&tent()).unwrap();
        assert_eq!(m.quantile_radius(1.0, 0.125).unwrap(), 0.125);
        let c = MeasureModel::lebesgue(&doubling()).unwrap();
        assert_eq!(c.quantile_radius(0.37, 0.2).unwrap(), 0.1);
        assert!(m.quantile_radius(0.5, 0.0).is_err());
    }

    #[test]
    fn half_bernoulli_is_lebesgue() {
        let b = MeasureModel::bernoulli(&doubling(), 0.5).unwrap();
        let l = MeasureModel::lebesgue(&doubling()).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let (z, eta) = (i as f64 / 10.0 + 0.013, j as f64 / 19.0);
                assert!((b.ball_mass(z, eta) - l.ball_mass(z, eta)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn bernoulli_pushforward_invariance() {
        let sys = MapSystem::doubling(Backend::Float64).unwrap();
        let m = MeasureModel::bernoulli(&sys, 0.3).unwrap();
        let mut rng = SeedTree::new(9, "inv").stream(0);
        for _ in 0..100 {
            let (x, y): (f64, f64) = (rng.gen(), rng.gen());
            let (a, b) = (x.min(y), x.max(y));
            let pre: f64 = sys.preimage(a, b).iter().map(|&(s, t)| m.interval_mass(s, t)).sum();
            assert!((pre - m.interval_mass(a, b)).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_and_float_cdf_agree() {
        let m = MeasureModel::bernoulli(&doubling(), 0.3).unwrap();
        for x in [0.0, 0.1, 0.25, 0.5, 0.7, 0.999] {
            let f = f64_to_fixed(x);
            assert!((m.fixed_mass(0, f) - m.cdf(x)).abs() < 1e-12, "{x}");
        }
        assert_eq!(m.fixed_mass(0, ONE), 1.0);
    }

    #[test]
    fn conditional_digits_stay_inside() {
        let m = MeasureModel::bernoulli(&doubling(), 0.3).unwrap();
        let mut rng = SeedTree::new(1, "cond").stream(0);
        let (a, b) = (f64_to_fixed(0.2), f64_to_fixed(0.45));
        let mut left = 0;
        for _ in 0..2000 {
            let mut s = m.sample_fixed_in(a, b, &mut rng).unwrap();
            let w = s.window(1) as u128;
            assert!(w >= a && w < b);
            if w < f64_to_fixed(0.25) {
                left += 1;
            }
        }
        // conditional mass of [0.2, 0.25) within [0.2, 0.45)
        let share = m.interval_mass(0.2, 0.25) / m.interval_mass(0.2, 0.45);
        let f = left as f64 / 2000.0;
        assert!((f - share).abs() < 4.0 * (share * (1.0 - share) / 2000.0).sqrt());
    }

    #[test]
    fn stationary_sampling_moments() {
        let b = MeasureModel::bernoulli(&doubling(), 0.3).unwrap();
        let l = MeasureModel::lebesgue(&MapSystem::golden_rotation()).unwrap();
        let mut rng = SeedTree::new(3, "stat").stream(0);
        let n = 100_000;
        let (mut zeros, mut sum) = (0usize, 0.0);
        for _ in 0..n {
            if let PointRep::Digits(mut s) = b.sample_stationary(&mut rng) {
                zeros += !s.digit(1) as usize;
            }
            sum += l.sample_stationary(&mut rng).coordinate();
        }
        assert!((zeros as f64 / n as f64 - 0.3).abs() < 0.0044);
        assert!((sum / n as f64 - 0.5).abs() < 0.003);
    }

    #[test]
    fn empirical_orbit_is_reproducible_across_seeds() {
        let sys = MapSystem::manneville_pomeau(0.5).unwrap();
        let a = MeasureModel::empirical_orbit(&sys, 10_000, 200_000, &SeedTree::new(1, "mp")).unwrap();
        let b = MeasureModel::empirical_orbit(&sys, 10_000, 200_000, &SeedTree::new(2, "mp")).unwrap();
        let (ma, mb) = (a.ball_mass(0.6, 0.05), b.ball_mass(0.6, 0.05));
        // orbit averages are correlated, so allow a generous band
        let sigma = (ma * (1.0 - ma) / 20_000.0).sqrt();
        assert!((ma - mb).abs() < 3.0 * sigma * 2f64.sqrt(), "{ma} vs {mb}");
        assert!((a.cdf(1.0) - 1.0).abs() < 1e-15 && a.cdf(0.0) == 0.0);
    }

    #[test]
    fn bernoulli_rejected_off_doubling() {
        assert!(MeasureModel::bernoulli(&tent(), 0.3).is_err());
        assert!(MeasureModel::bernoulli(&doubling(), 1.0).is_err());
    }
}
