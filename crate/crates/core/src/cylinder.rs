//! Markov partitions, cylinders `Z_n[zeta]`, and entropy diagnostics.
//!
//! For the tent and doubling maps every cell of the refined partition is a
//! dyadic interval of length `2^-n`, so membership reduces to comparing binary
//! digits of the coordinate. The doubling map uses left-closed cells `[a, b)`;
//! the tent map uses right-closed cells `(a, b]` (the cell at 0 is `[0, 2^-n]`),
//! which amounts to reading dyadic rationals with a tail of ones.
//!
//! Rotation cells are arcs between the points `-k alpha mod 1`, `0 <= k <= n`.

use crate::digits::DigitStream;
use crate::error::{Error, Result};
use crate::measure::{MeasureKind, MeasureModel};
use crate::system::{MapKind, MapSystem, PointRep, Trajectory};

/// Depth returned by [`PartitionContext::max_depth_in`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    Finite(usize),
    /// The point shares every cylinder with the centre up to the maximum depth.
    Overflow,
}

/// An element of the refined partition, with its mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub depth: usize,
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    /// Mass in linear scale; underflows to 0 for very deep cells.
    pub mass: f64,
    pub log_mass: f64,
}

impl Cylinder {
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn is_within(&self, other: &Cylinder) -> bool {
        self.lo >= other.lo && self.hi <= other.hi
    }
}

/// Refined partitions of a map's base partition, up to a maximum depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionContext {
    system: MapSystem,
    max_depth: usize,
}

impl PartitionContext {
    pub fn new(system: MapSystem, max_depth: usize) -> Result<Self> {
        if system.kind() == MapKind::MannevillePomeau {
            return Err(Error::Unsupported(
                "no base partition for the Manneville-Pomeau map".into(),
            ));
        }
        Ok(Self { system, max_depth })
    }

    pub fn system(&self) -> &MapSystem {
        &self.system
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    fn dyadic(&self) -> bool {
        matches!(self.system.kind(), MapKind::FullTent | MapKind::Doubling)
    }

    /// Coordinate digits of a centre, under the cell convention of the map.
    pub fn zeta_digits(&self, zeta: &PointRep) -> DigitStream {
        match zeta {
            PointRep::Digits(s) => s.clone(),
            PointRep::Real(x) if self.system.kind() == MapKind::FullTent => {
                DigitStream::from_f64_nonterminating(*x)
            }
            PointRep::Real(x) => DigitStream::from_f64(*x),
        }
    }

    fn symbol(&self, x: f64) -> u8 {
        match self.system.kind() {
            MapKind::FullTent => (x > 0.5) as u8,
            MapKind::Doubling => (x >= 0.5) as u8,
            _ => (x >= 1.0 - self.system.alpha()) as u8,
        }
    }

    /// Itinerary of `x` through the base partition for `n` steps.
    ///
    /// Tent symbols are `0 = L = [0, 1/2]`, `1 = R = (1/2, 1]`.
    pub fn cylinder_word(&self, x: &PointRep, n: usize) -> Vec<u8> {
        match x {
            PointRep::Real(_) => {
                let mut t = Trajectory::new(&self.system, x.clone()).expect("point in domain");
                (0..n)
                    .map(|_| {
                        let s = self.symbol(t.coordinate());
                        t.step();
                        s
                    })
                    .collect()
            }
            PointRep::Digits(s) => {
                let mut s = s.clone();
                let d: Vec<bool> = s.prefix(n);
                match self.system.kind() {
                    MapKind::FullTent => (0..n)
                        .map(|j| (d[j] ^ (j > 0 && d[j - 1])) as u8)
                        .collect(),
                    _ => d.into_iter().map(u8::from).collect(),
                }
            }
        }
    }

    fn rotation_boundaries(&self, n: usize) -> Vec<f64> {
        let mut b: Vec<f64> = (0..=n as u64)
            .map(|k| {
                let y = self.system.iterate(&PointRep::Real(0.0), k).unwrap().coordinate();
                if y == 0.0 {
                    0.0
                } else {
                    1.0 - y
                }
            })
            .collect();
        b.push(1.0);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    fn masses_of_digits(&self, measure: &MeasureModel, digits: &[bool]) -> Result<(f64, f64)> {
        let (w0, w1) = measure
            .digit_log_weights()
            .ok_or_else(|| Error::Unsupported("cylinder masses need a product measure".into()))?;
        let (p0, p1) = measure.digit_probs().unwrap();
        let ones = digits.iter().filter(|&&b| b).count();
        let zeros = digits.len() - ones;
        let mass = p0.powi(zeros as i32) * p1.powi(ones as i32);
        Ok((mass, weighted_count(zeros, ones, w0, w1)))
    }

    fn dyadic_cell(&self, digits: &[bool], (mass, log_mass): (f64, f64)) -> Cylinder {
        let n = digits.len();
        let lo = digits
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, &b)| if b { acc + 2f64.powi(-(i as i32) - 1) } else { acc });
        let hi = lo + 2f64.powi(-(n as i32));
        let tent = self.system.kind() == MapKind::FullTent;
        Cylinder {
            depth: n,
            lo,
            hi,
            lo_closed: !tent || lo == 0.0,
            hi_closed: tent || n == 0,
            mass,
            log_mass,
        }
    }

    /// The cell `Z_n[zeta]` of the depth-`n` partition and its mass.
    pub fn cylinder_at(&self, measure: &MeasureModel, zeta: &PointRep, n: usize) -> Result<Cylinder> {
        if self.dyadic() {
            let digits = self.zeta_digits(zeta).prefix(n);
            let lm = self.masses_of_digits(measure, &digits)?;
            return Ok(self.dyadic_cell(&digits, lm));
        }
        let z = zeta.coordinate();
        let b = self.rotation_boundaries(n);
        let i = b.partition_point(|&v| v <= z) - 1;
        let (lo, hi) = (b[i], b[i + 1]);
        let mass = measure.interval_mass(lo, hi);
        if mass <= 0.0 {
            return Err(Error::ZeroMassCylinder);
        }
        Ok(Cylinder {
            depth: n,
            lo,
            hi,
            lo_closed: true,
            hi_closed: false,
            mass,
            log_mass: mass.ln(),
        })
    }

    /// All cells of the depth-`n` partition, left to right.
    pub fn cells(&self, measure: &MeasureModel, n: usize) -> Result<Vec<Cylinder>> {
        if self.dyadic() {
            if n > 24 {
                return Err(Error::InvalidParameter(format!("depth {n} too large to enumerate")));
            }
            return (0..1u64 << n)
                .map(|k| {
                    let digits: Vec<bool> = (0..n).map(|i| (k >> (n - 1 - i)) & 1 == 1).collect();
                    let lm = self.masses_of_digits(measure, &digits)?;
                    Ok(self.dyadic_cell(&digits, lm))
                })
                .collect();
        }
        let b = self.rotation_boundaries(n);
        Ok(b.windows(2)
            .map(|w| Cylinder {
                depth: n,
                lo: w[0],
                hi: w[1],
                lo_closed: true,
                hi_closed: false,
                mass: measure.interval_mass(w[0], w[1]),
                log_mass: measure.interval_mass(w[0], w[1]).ln(),
            })
            .collect())
    }

    /// Largest `n <= max_depth` with `x` in `Z_n[zeta]`.
    pub fn max_depth_in(&self, x: &PointRep, zeta: &PointRep) -> Depth {
        let n = if self.dyadic() {
            let mut zd = self.zeta_digits(zeta);
            let words = zd.prefix_words(self.max_depth.max(1));
            let mut t = Trajectory::new(&self.system, PointRep::Digits(self.zeta_digits(x)))
                .expect("dyadic systems accept digit streams");
            t.common_prefix(&words, self.max_depth)
        } else {
            let mut tx = Trajectory::new(&self.system, x.clone()).expect("point in domain");
            let mut tz = Trajectory::new(&self.system, zeta.clone()).expect("centre in domain");
            let mut n = 0;
            while n < self.max_depth && self.symbol(tx.coordinate()) == self.symbol(tz.coordinate()) {
                tx.step();
                tz.step();
                n += 1;
            }
            n
        };
        if n >= self.max_depth {
            Depth::Overflow
        } else {
            Depth::Finite(n)
        }
    }

    /// `-log mu(Z_n[zeta]) / n`.
    pub fn smb_estimate(&self, measure: &MeasureModel, zeta: &PointRep, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        if self.dyadic() {
            let (w0, w1) = measure
                .digit_log_weights()
                .ok_or_else(|| Error::Unsupported("entropy needs a product measure".into()))?;
            if w0 == w1 {
                return Ok(-w0);
            }
            if matches!(measure.kind(), MeasureKind::Bernoulli { p } if *p == 0.0 || *p == 1.0) {
                return Err(Error::ZeroMassCylinder);
            }
        }
        let c = self.cylinder_at(measure, zeta, n)?;
        if c.log_mass == f64::NEG_INFINITY {
            return Err(Error::ZeroMassCylinder);
        }
        Ok(-c.log_mass / n as f64)
    }

    /// `mu(Z_n[zeta]) / exp(S_n phi(zeta) - n P)` for a potential taking the
    /// values `potential[s]` on the base cell with symbol `s`.
    pub fn gibbs_envelope(
        &self,
        measure: &MeasureModel,
        potential: [f64; 2],
        pressure: f64,
        zeta: &PointRep,
        n: usize,
    ) -> Result<f64> {
        let word = if self.dyadic() {
            let digits = self.zeta_digits(zeta);
            self.cylinder_word(&PointRep::Digits(digits), n)
        } else {
            self.cylinder_word(zeta, n)
        };
        let ones = word.iter().filter(|&&s| s == 1).count();
        let birkhoff = weighted_count(n - ones, ones, potential[0], potential[1]);
        let log_mass = self.cylinder_at(measure, zeta, n)?.log_mass;
        Ok((log_mass - (birkhoff - n as f64 * pressure)).exp())
    }
}

/// `c0 * w0 + c1 * w1`, computed as `(c0 + c1) * w0` when the weights agree
/// so that equal-weight sums do not depend on how the count splits.
pub(crate) fn weighted_count(c0: usize, c1: usize, w0: f64, w1: f64) -> f64 {
    if w0 == w1 {
        (c0 + c1) as f64 * w0
    } else {
        c0 as f64 * w0 + c1 as f64 * w1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use crate::system::Backend;
    use approx::assert_abs_diff_eq;

    fn tent_ctx() -> (PartitionContext, MeasureModel) {
        let sys = MapSystem::full_tent(Backend::BitStream).unwrap();
        (PartitionContext::new(sys, 64).unwrap(), MeasureModel::lebesgue(&sys).unwrap())
    }

    fn bern_ctx() -> (PartitionContext, MeasureModel) {
        let sys = MapSystem::doubling(Backend::BitStream).unwrap();
        (PartitionContext::new(sys, 64).unwrap(), MeasureModel::bernoulli(&sys, 0.3).unwrap())
    }

    #[test]
    fn tent_words() {
        let (ctx, _) = tent_ctx();
        assert_eq!(ctx.cylinder_word(&PointRep::Real(0.3), 2), vec![0, 1]);
        assert_eq!(ctx.cylinder_word(&PointRep::Real(1.0), 3), vec![1, 0, 0]);
        let d = ctx.cylinder_word(&PointRep::Digits(DigitStream::from_f64(0.3)), 8);
        assert_eq!(d, ctx.cylinder_word(&PointRep::Real(0.3), 8));
    }

    #[test]
    fn doubling_word_is_digits() {
        let (ctx, _) = bern_ctx();
        let zero = PointRep::Digits(DigitStream::from_f64(0.0));
        assert_eq!(ctx.cylinder_word(&zero, 2), vec![0, 0]);
    }

    #[test]
    fn tent_cylinder_at_one() {
        let (ctx, m) = tent_ctx();
        let c = ctx.cylinder_at(&m, &PointRep::Real(1.0), 3).unwrap();
        assert_eq!((c.lo, c.hi, c.lo_closed, c.hi_closed), (0.875, 1.0, false, true));
        assert_eq!(c.mass(), 0.125);
        let half = ctx.cylinder_at(&m, &PointRep::Real(0.5), 4).unwrap();
        assert_eq!((half.lo, half.hi), (0.4375, 0.5));
        assert!(half.contains(0.5) && !half.contains(0.4375));
    }

    #[test]
    fn bernoulli_and_rotation_cells() {
        let (ctx, m) = bern_ctx();
        let c = ctx.cylinder_at(&m, &PointRep::Real(0.0), 2).unwrap();
        assert_eq!((c.lo, c.hi), (0.0, 0.25));
        assert_abs_diff_eq!(c.mass(), 0.09, epsilon = 1e-15);

        let rot = MapSystem::golden_rotation();
        let rctx = PartitionContext::new(rot, 40).unwrap();
        let lm = MeasureModel::lebesgue(&rot).unwrap();
        let r = rctx.cylinder_at(&lm, &PointRep::Real(0.0), 1).unwrap();
        assert_eq!(r.lo, 0.0);
        assert_abs_diff_eq!(r.hi, 1.0 - rot.alpha(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.mass(), 0.381966, epsilon = 1e-6);
    }

    #[test]
    fn depth_examples() {
        let (ctx, _) = tent_ctx();
        let one = PointRep::Real(1.0);
        assert_eq!(ctx.max_depth_in(&PointRep::Real(0.9), &one), Depth::Finite(3));
        assert_eq!(ctx.max_depth_in(&one, &one), Depth::Overflow);
        assert_eq!(ctx.max_depth_in(&PointRep::Real(0.4), &one), Depth::Finite(0));
    }

    #[test]
    fn smb_and_gibbs() {
        let (ctx, m) = tent_ctx();
        let z = PointRep::Real(std::f64::consts::FRAC_1_SQRT_2);
        for n in [1, 7, 50, 1000] {
            assert_eq!(ctx.smb_estimate(&m, &z, n).unwrap(), std::f64::consts::LN_2);
            let l2 = -std::f64::consts::LN_2;
            assert_eq!(ctx.gibbs_envelope(&m, [l2, l2], 0.0, &z, n).unwrap(), 1.0);
        }

        let (bctx, b) = bern_ctx();
        let zero = PointRep::Digits(DigitStream::from_f64(0.0));
        assert_abs_diff_eq!(bctx.smb_estimate(&b, &zero, 30).unwrap(), -(0.3f64.ln()), epsilon = 1e-12);
        let mut rng = SeedTree::new(11, "zeta").stream(0);
        let typical = b.sample_stationary(&mut rng);
        let h = -(0.3 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
        assert!((bctx.smb_estimate(&b, &typical, 2000).unwrap() - h).abs() < 0.05);
        let pot = [0.3f64.ln(), 0.7f64.ln()];
        for n in [1, 10, 2000] {
            assert_eq!(bctx.gibbs_envelope(&b, pot, 0.0, &typical, n).unwrap(), 1.0);
        }
        let dl = MeasureModel::lebesgue(bctx.system()).unwrap();
        let l2 = -std::f64::consts::LN_2;
        assert_eq!(bctx.gibbs_envelope(&dl, [l2, l2], 0.0, &typical, 333).unwrap(), 1.0);
    }

    #[test]
    fn cell_masses_sum_to_one() {
        let (ctx, m) = bern_ctx();
        for n in [1, 5, 12] {
            let s: f64 = ctx.cells(&m, n).unwrap().iter().map(Cylinder::mass).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        let rot = MapSystem::golden_rotation();
        let rctx = PartitionContext::new(rot, 40).unwrap();
        let lm = MeasureModel::lebesgue(&rot).unwrap();
        let cells = rctx.cells(&lm, 20).unwrap();
        assert_eq!(cells.len(), 21);
        assert!((cells.iter().map(Cylinder::mass).sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mp_has_no_partition() {
        let mp = MapSystem::manneville_pomeau(0.5).unwrap();
        assert!(PartitionContext::new(mp, 10).is_err());
    }
}
