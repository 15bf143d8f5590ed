//! Target sets for hitting times and exceedance events.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cylinder::{Cylinder, PartitionContext};
use crate::digits::{f64_to_fixed, DigitSource, DigitStream};
use crate::error::{Error, Result};
use crate::measure::MeasureModel;
use crate::system::{Backend, MapSystem, Metric, PointRep, Trajectory};

#[derive(Debug, Clone)]
pub enum TargetSpec {
    Whole,
    /// Open ball `B_eta(zeta)` in the system's metric.
    Ball { zeta: f64, eta: f64 },
    /// The cylinder `Z_depth[zeta]`.
    Cylinder { zeta: PointRep, depth: usize },
    /// The interval `[lo, hi)`.
    Interval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone)]
enum Geometry {
    Whole,
    /// Half-open `[lo, hi)` ranges of 64-bit fixed-point coordinates.
    Fixed(Vec<(u128, u128)>),
    /// Leading coordinate digits.
    Prefix { words: Vec<u64>, len: usize, digits: Vec<bool> },
    Real(Vec<Cylinder>),
}

/// A measurable set with positive mass and an exact membership test.
#[derive(Debug, Clone)]
pub struct Target {
    spec: TargetSpec,
    mass: f64,
    geometry: Geometry,
}

fn arcs(metric: Metric, zeta: f64, eta: f64) -> Vec<(f64, f64)> {
    let (lo, hi) = (zeta - eta, zeta + eta);
    match metric {
        Metric::Interval => vec![(lo.max(0.0), hi.min(1.0))],
        Metric::Circle if eta >= 0.5 => vec![(0.0, 1.0)],
        Metric::Circle if lo < 0.0 => vec![(0.0, hi), (lo + 1.0, 1.0)],
        Metric::Circle if hi > 1.0 => vec![(0.0, hi - 1.0), (lo, 1.0)],
        Metric::Circle => vec![(lo, hi)],
    }
}

fn real_arc(lo: f64, hi: f64) -> Cylinder {
    Cylinder {
        depth: 0,
        lo,
        hi,
        lo_closed: true,
        hi_closed: hi >= 1.0,
        mass: hi - lo,
        log_mass: (hi - lo).ln(),
    }
}

impl Target {
    pub fn new(system: &MapSystem, measure: &MeasureModel, spec: TargetSpec) -> Result<Self> {
        let stream = system.backend() == Backend::BitStream;
        let (mass, geometry) = match &spec {
            TargetSpec::Whole => (1.0, Geometry::Whole),
            TargetSpec::Ball { zeta, eta } => {
                if !(*eta > 0.0) {
                    return Err(Error::InvalidParameter(format!("radius {eta} must be positive")));
                }
                let a = arcs(system.metric(), *zeta, *eta);
                let geometry = if stream {
                    Geometry::Fixed(a.iter().map(|&(l, h)| (f64_to_fixed(l), f64_to_fixed(h))).collect())
                } else {
                    Geometry::Real(a.iter().map(|&(l, h)| real_arc(l, h)).collect())
                };
                (measure.ball_mass(*zeta, *eta), geometry)
            }
            TargetSpec::Interval { lo, hi } => {
                if !(0.0 <= *lo && lo < hi && *hi <= 1.0) {
                    return Err(Error::InvalidParameter(format!("bad interval [{lo}, {hi})")));
                }
                let geometry = if stream {
                    Geometry::Fixed(vec![(f64_to_fixed(*lo), f64_to_fixed(*hi))])
                } else {
                    Geometry::Real(vec![real_arc(*lo, *hi)])
                };
                (measure.interval_mass(*lo, *hi), geometry)
            }
            TargetSpec::Cylinder { zeta, depth } => {
                let ctx = PartitionContext::new(*system, *depth)?;
                let cyl = ctx.cylinder_at(measure, zeta, *depth)?;
                let geometry = if stream {
                    let mut d = ctx.zeta_digits(zeta);
                    Geometry::Prefix {
                        words: d.prefix_words(*depth),
                        len: *depth,
                        digits: d.prefix(*depth),
                    }
                } else {
                    Geometry::Real(vec![cyl.clone()])
                };
                (cyl.mass(), geometry)
            }
        };
        if !(mass > 0.0) {
            return Err(Error::ZeroMassCylinder);
        }
        Ok(Self { spec, mass, geometry })
    }

    pub fn spec(&self) -> &TargetSpec {
        &self.spec
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_whole(&self) -> bool {
        matches!(self.geometry, Geometry::Whole)
    }

    /// Whether the trajectory's current point lies in the target.
    #[inline]
    pub fn contains(&self, t: &mut Trajectory) -> bool {
        match &self.geometry {
            Geometry::Whole => true,
            Geometry::Fixed(arcs) => {
                let w = t.coordinate_window() as u128;
                arcs.iter().any(|&(lo, hi)| lo <= w && w < hi)
            }
            Geometry::Prefix { words, len, .. } => t.common_prefix(words, *len) >= *len,
            Geometry::Real(cells) => {
                let x = t.coordinate();
                cells.iter().any(|c| c.contains(x))
            }
        }
    }

    /// Membership test for a fresh 64-digit coordinate (bit-stream targets).
    #[inline]
    pub fn contains_window(&self, w: u64) -> bool {
        match &self.geometry {
            Geometry::Whole => true,
            Geometry::Fixed(arcs) => arcs.iter().any(|&(lo, hi)| lo <= w as u128 && (w as u128) < hi),
            Geometry::Prefix { words, len, .. } if *len <= 64 => {
                *len == 0 || (w ^ words[0]).leading_zeros() as usize >= *len
            }
            Geometry::Prefix { .. } => panic!("prefix longer than one window"),
            Geometry::Real(cells) => {
                let x = crate::digits::fixed_to_f64(w as u128);
                cells.iter().any(|c| c.contains(x))
            }
        }
    }

    /// Draws a point from the measure conditioned on the target.
    pub fn sample_in(&self, measure: &MeasureModel, rng: &mut ChaCha8Rng) -> Result<PointRep> {
        match &self.geometry {
            Geometry::Whole => Ok(measure.sample_stationary(rng)),
            Geometry::Prefix { digits, .. } => {
                let (p0, _) = measure
                    .digit_probs()
                    .ok_or_else(|| Error::Unsupported("cylinder sampling needs a product measure".into()))?;
                let tail = ChaCha8Rng::from_seed_rng(rng);
                Ok(PointRep::Digits(DigitStream::with_prefix(
                    digits,
                    DigitSource::Iid { rng: tail, zero_prob: p0 },
                )))
            }
            Geometry::Fixed(arcs) => {
                let (a, b) = pick(arcs, |&(l, h)| measure.fixed_mass(l, h), rng);
                Ok(PointRep::Digits(measure.sample_fixed_in(a, b, rng)?))
            }
            Geometry::Real(cells) => {
                let c = pick(cells, |c| measure.interval_mass(c.lo, c.hi), rng);
                Ok(PointRep::Real(measure.sample_real_in(c.lo, c.hi, rng)?))
            }
        }
    }
}

fn pick<T: Clone>(items: &[T], mass: impl Fn(&T) -> f64, rng: &mut ChaCha8Rng) -> T {
    if items.len() == 1 {
        return items[0].clone();
    }
    let masses: Vec<f64> = items.iter().map(&mass).collect();
    let mut u = rng.gen::<f64>() * masses.iter().sum::<f64>();
    for (item, m) in items.iter().zip(&masses) {
        if u < *m {
            return item.clone();
        }
        u -= m;
    }
    items[items.len() - 1].clone()
}

trait FromSeedRng {
    fn from_seed_rng(rng: &mut ChaCha8Rng) -> Self;
}

impl FromSeedRng for ChaCha8Rng {
    fn from_seed_rng(rng: &mut ChaCha8Rng) -> Self {
        <ChaCha8Rng as rand::SeedableRng>::from_seed(rng.gen())
    }
}
