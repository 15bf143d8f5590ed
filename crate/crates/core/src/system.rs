//! Interval and circle maps, point representations and orbit iteration.

use std::fmt;

use crate::digits::{fixed_to_f64, DigitStream};
use crate::error::{Error, Result};

/// Golden rotation angle `(sqrt(5) - 1) / 2` as an unevaluated sum `HI + LO`.
pub const GOLDEN_HI: f64 = 0.618_033_988_749_894_9;
pub const GOLDEN_LO: f64 = -5.432_115_203_682_506e-17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    /// `x -> 1 - |2x - 1|` on `[0, 1]`.
    FullTent,
    /// `x -> 2x mod 1` on the circle.
    Doubling,
    /// `x -> x + alpha mod 1` on the circle.
    Rotation,
    /// `x -> x + x^(1+s) mod 1` on `[0, 1)`.
    MannevillePomeau,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::FullTent => "tent",
            MapKind::Doubling => "doubling",
            MapKind::Rotation => "rotation",
            MapKind::MannevillePomeau => "manneville-pomeau",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// `|x - y|`.
    Interval,
    /// `min(|x - y|, 1 - |x - y|)`.
    Circle,
}

impl Metric {
    pub fn dist(self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        match self {
            Metric::Interval => d,
            Metric::Circle => d.min(1.0 - d),
        }
    }

    /// Largest possible distance between two points.
    pub fn diameter(self) -> f64 {
        match self {
            Metric::Interval => 1.0,
            Metric::Circle => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Double-precision coordinates.
    Float64,
    /// Exact binary digit streams (tent and doubling only).
    BitStream,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Float64 => "float64",
            Backend::BitStream => "bitstream",
        }
    }
}

/// A self-map of a one-dimensional compact phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSystem {
    kind: MapKind,
    alpha: (f64, f64),
    s: f64,
    metric: Metric,
    backend: Backend,
}

impl MapSystem {
    fn build(kind: MapKind, backend: Backend) -> Result<Self> {
        let metric = match kind {
            MapKind::FullTent | MapKind::MannevillePomeau => Metric::Interval,
            MapKind::Doubling | MapKind::Rotation => Metric::Circle,
        };
        let sys = Self {
            kind,
            alpha: (GOLDEN_HI, GOLDEN_LO),
            s: 0.5,
            metric,
            backend,
        };
        sys.check_backend()?;
        Ok(sys)
    }

    fn check_backend(&self) -> Result<()> {
        if self.backend == Backend::BitStream
            && matches!(self.kind, MapKind::Rotation | MapKind::MannevillePomeau)
        {
            return Err(Error::BackendUnsupported {
                system: self.kind.name(),
                backend: self.backend.name(),
            });
        }
        Ok(())
    }

    pub fn full_tent(backend: Backend) -> Result<Self> {
        Self::build(MapKind::FullTent, backend)
    }

    pub fn doubling(backend: Backend) -> Result<Self> {
        Self::build(MapKind::Doubling, backend)
    }

    /// Rotation by the golden angle.
    pub fn golden_rotation() -> Self {
        Self::build(MapKind::Rotation, Backend::Float64).unwrap()
    }

    /// Rotation by `alpha` in `(0, 1)`.
    pub fn rotation(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rotation angle {alpha} not in (0, 1)"
            )));
        }
        let mut sys = Self::build(MapKind::Rotation, Backend::Float64)?;
        sys.alpha = if alpha == GOLDEN_HI {
            (GOLDEN_HI, GOLDEN_LO)
        } else {
            (alpha, 0.0)
        };
        Ok(sys)
    }

    /// Manneville-Pomeau map with intermittency exponent `s > 0`.
    pub fn manneville_pomeau(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "intermittency exponent {s} must be positive"
            )));
        }
        let mut sys = Self::build(MapKind::MannevillePomeau, Backend::Float64)?;
        sys.s = s;
        Ok(sys)
    }

    /// Builds a system from its parts, rejecting illegal backends.
    pub fn new(kind: MapKind, backend: Backend) -> Result<Self> {
        Self::build(kind, backend)
    }

    pub fn with_backend(mut self, backend: Backend) -> Result<Self> {
        self.backend = backend;
        self.check_backend()?;
        Ok(self)
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.0 + self.alpha.1
    }

    /// Rotation angle as `(hi, lo)` with `alpha = hi + lo`.
    pub fn alpha_parts(&self) -> (f64, f64) {
        self.alpha
    }

    pub fn intermittency(&self) -> f64 {
        self.s
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.kind, MapKind::Doubling | MapKind::Rotation)
    }

    /// Whether `x` lies in the phase space.
    pub fn contains(&self, x: f64) -> bool {
        match self.kind {
            MapKind::FullTent => (0.0..=1.0).contains(&x),
            _ => (0.0..1.0).contains(&x),
        }
    }

    /// One step of the map in double precision.
    pub fn apply(&self, x: f64) -> f64 {
        match self.kind {
            MapKind::FullTent => {
                if x <= 0.5 {
                    2.0 * x
                } else {
                    2.0 - 2.0 * x
                }
            }
            MapKind::Doubling => {
                let y = 2.0 * x;
                if y >= 1.0 {
                    y - 1.0
                } else {
                    y
                }
            }
            MapKind::Rotation => frac(two_sum(x, self.alpha.0).0 + self.alpha.1),
            MapKind::MannevillePomeau => {
                let y = x + x.powf(1.0 + self.s);
                if y >= 1.0 {
                    y - 1.0
                } else {
                    y
                }
            }
        }
    }

    /// `f^n(x)`.
    pub fn iterate(&self, x: &PointRep, n: u64) -> Result<PointRep> {
        match x {
            PointRep::Real(v) => {
                if !self.contains(*v) {
                    return Err(Error::DomainError(*v));
                }
                if self.kind == MapKind::Rotation {
                    return Ok(PointRep::Real(rotate(*v, self.alpha, n)));
                }
                let mut y = *v;
                for _ in 0..n {
                    y = self.apply(y);
                }
                Ok(PointRep::Real(y))
            }
            PointRep::Digits(s) => {
                self.require_bitstream_kind()?;
                let n = n as usize;
                let complement = if self.kind == MapKind::FullTent && n > 0 {
                    s.clone().digit(n)
                } else {
                    false
                };
                Ok(PointRep::Digits(s.shifted(n, complement)))
            }
        }
    }

    fn require_bitstream_kind(&self) -> Result<()> {
        match self.kind {
            MapKind::FullTent | MapKind::Doubling => Ok(()),
            _ => Err(Error::BackendUnsupported {
                system: self.kind.name(),
                backend: Backend::BitStream.name(),
            }),
        }
    }

    /// Intervals whose union is `f^{-1}([a, b))`, for `0 <= a <= b <= 1`.
    pub fn preimage(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        match self.kind {
            MapKind::FullTent => vec![(a / 2.0, b / 2.0), (1.0 - b / 2.0, 1.0 - a / 2.0)],
            MapKind::Doubling => vec![(a / 2.0, b / 2.0), ((a + 1.0) / 2.0, (b + 1.0) / 2.0)],
            MapKind::Rotation => {
                let lo = frac(a - self.alpha());
                let hi = lo + (b - a);
                if hi <= 1.0 {
                    vec![(lo, hi)]
                } else {
                    vec![(lo, 1.0), (0.0, hi - 1.0)]
                }
            }
            MapKind::MannevillePomeau => {
                // both branches are increasing; invert each by bisection
                let inv = |target: f64, branch: u8| {
                    let (mut lo, mut hi) = (0.0f64, 1.0f64);
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        let y = mid + mid.powf(1.0 + self.s) - branch as f64;
                        if y < target {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    hi
                };
                let c = inv(1.0, 0);
                vec![(inv(a, 0).min(c), inv(b, 0).min(c)), (inv(a, 1).max(c), inv(b, 1).max(c))]
            }
        }
    }

    /// Continued-fraction convergent denominators of the rotation angle,
    /// i.e. Fibonacci numbers for the golden rotation.
    pub fn convergent_denominators(&self, depth: usize) -> Vec<u64> {
        let mut out = Vec::with_capacity(depth);
        let (mut q_prev, mut q) = (0u64, 1u64);
        let mut x = self.alpha();
        for _ in 0..depth {
            if x <= 0.0 {
                break;
            }
            let inv = 1.0 / x;
            let a = inv.floor() as u64;
            x = inv - a as f64;
            let next = a * q + q_prev;
            out.push(next);
            q_prev = q;
            q = next;
        }
        out
    }
}

impl fmt::Display for MapSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MapKind::Rotation => write!(f, "rotation(alpha={})", self.alpha()),
            MapKind::MannevillePomeau => write!(f, "manneville-pomeau(s={})", self.s),
            k => write!(f, "{}[{}]", k.name(), self.backend.name()),
        }
    }
}

/// A point of the phase space.
#[derive(Debug, Clone)]
pub enum PointRep {
    Real(f64),
    Digits(DigitStream),
}

impl PointRep {
    /// Coordinate in double precision.
    pub fn coordinate(&self) -> f64 {
        match self {
            PointRep::Real(x) => *x,
            PointRep::Digits(s) => s.clone().coordinate(),
        }
    }

    /// The point as a digit stream, using the terminating expansion for
    /// dyadic rationals.
    pub fn to_digits(&self) -> DigitStream {
        match self {
            PointRep::Real(x) => DigitStream::from_f64(*x),
            PointRep::Digits(s) => s.clone(),
        }
    }
}

impl From<f64> for PointRep {
    fn from(x: f64) -> Self {
        PointRep::Real(x)
    }
}

pub(crate) fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `frac(x + n * alpha)` with `n * alpha` carried in double-double precision.
fn rotate(x: f64, alpha: (f64, f64), n: u64) -> f64 {
    let nf = n as f64;
    let p = nf * alpha.0;
    let p_err = nf.mul_add(alpha.0, -p);
    let p_int = p.floor();
    let (s, e) = two_sum(x, p - p_int);
    frac(s + (e + p_err + nf * alpha.1))
}

/// Mutable orbit cursor used in the sampling loops.
///
/// For bit streams, `coordinate_window` returns the first 64 binary digits of
/// the current point; comparisons against 64-bit fixed-point endpoints are
/// therefore exact for points whose expansion does not terminate.
#[derive(Debug, Clone)]
pub struct Trajectory {
    state: TrajState,
    time: u64,
}

#[derive(Debug, Clone)]
enum TrajState {
    Stream {
        digits: DigitStream,
        tent: bool,
        pos: usize,
    },
    Real {
        x: f64,
        system: MapSystem,
    },
    Rotation {
        hi: f64,
        lo: f64,
        alpha: (f64, f64),
    },
}

impl Trajectory {
    pub fn new(system: &MapSystem, start: PointRep) -> Result<Self> {
        let state = match start {
            PointRep::Digits(digits) => {
                system.require_bitstream_kind()?;
                TrajState::Stream {
                    digits,
                    tent: system.kind == MapKind::FullTent,
                    pos: 0,
                }
            }
            PointRep::Real(x) => {
                if !system.contains(x) {
                    return Err(Error::DomainError(x));
                }
                if system.kind == MapKind::Rotation {
                    TrajState::Rotation {
                        hi: x,
                        lo: 0.0,
                        alpha: system.alpha,
                    }
                } else {
                    TrajState::Real { x, system: *system }
                }
            }
        };
        Ok(Self { state, time: 0 })
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn is_stream(&self) -> bool {
        matches!(self.state, TrajState::Stream { .. })
    }

    #[inline]
    pub fn step(&mut self) {
        self.time += 1;
        match &mut self.state {
            TrajState::Stream { pos, .. } => *pos += 1,
            TrajState::Real { x, system } => *x = system.apply(*x),
            TrajState::Rotation { hi, lo, alpha } => {
                let (s, e) = two_sum(*hi, alpha.0);
                let l = *lo + e + alpha.1;
                let (mut s, l) = two_sum(s, l);
                if s >= 1.0 {
                    s -= 1.0;
                } else if s < 0.0 {
                    s += 1.0;
                }
                let (s, l) = two_sum(s, l);
                *hi = s;
                *lo = l;
            }
        }
    }

    /// Digits `k..k+63` of the current point (bit streams only).
    #[inline]
    pub fn digits_window(&mut self, k: usize) -> u64 {
        match &mut self.state {
            TrajState::Stream { digits, tent, pos } => {
                let w = digits.window(*pos + k);
                if *tent && digits.digit(*pos) {
                    !w
                } else {
                    w
                }
            }
            _ => panic!("digit windows need the bit-stream backend"),
        }
    }

    /// First 64 binary digits of the current point as a fixed-point fraction.
    #[inline]
    pub fn coordinate_window(&mut self) -> u64 {
        self.digits_window(1)
    }

    pub fn coordinate(&mut self) -> f64 {
        match &mut self.state {
            TrajState::Stream { .. } => fixed_to_f64(self.coordinate_window() as u128),
            TrajState::Real { x, .. } => *x,
            TrajState::Rotation { hi, lo, .. } => {
                let x = *hi + *lo;
                if x >= 1.0 {
                    0.0
                } else if x < 0.0 {
                    frac(x)
                } else {
                    x
                }
            }
        }
    }

    /// Snapshot of the current point.
    pub fn point(&mut self) -> PointRep {
        match &self.state {
            TrajState::Stream { digits, tent, pos } => {
                let complement = *tent && digits.clone().digit(*pos);
                PointRep::Digits(digits.shifted(*pos, complement))
            }
            _ => PointRep::Real(self.coordinate()),
        }
    }

    /// Length of the common prefix of the current point's digits with
    /// `prefix` (as produced by [`DigitStream::prefix_words`]), capped at `cap`.
    #[inline]
    pub fn common_prefix(&mut self, prefix: &[u64], cap: usize) -> usize {
        let mut matched = 0usize;
        for (i, &p) in prefix.iter().enumerate() {
            if matched >= cap {
                break;
            }
            let x = self.digits_window(1 + 64 * i) ^ p;
            let lz = x.leading_zeros() as usize;
            matched += lz;
            if lz < 64 {
                break;
            }
        }
        matched.min(cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_of_one_third() {
        let sys = MapSystem::doubling(Backend::BitStream).unwrap();
        let x = PointRep::Digits(DigitStream::periodic(vec![false, true]));
        let y = sys.iterate(&x, 1).unwrap();
        let mut d = y.to_digits();
        assert_eq!(d.prefix(4), vec![true, false, true, false]);
        assert!((y.coordinate() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tent_float_step() {
        let sys = MapSystem::full_tent(Backend::Float64).unwrap();
        let y = sys.iterate(&PointRep::Real(0.3), 1).unwrap();
        assert_eq!(y.coordinate(), 0.6);
        assert_eq!(sys.iterate(&PointRep::Real(1.0), 2).unwrap().coordinate(), 0.0);
    }

    #[test]
    fn zero_iterations_is_identity() {
        for sys in [
            MapSystem::full_tent(Backend::Float64).unwrap(),
            MapSystem::doubling(Backend::Float64).unwrap(),
            MapSystem::golden_rotation(),
            MapSystem::manneville_pomeau(0.5).unwrap(),
        ] {
            for x in [0.0, 0.123, 0.5, 0.999] {
                assert_eq!(sys.iterate(&PointRep::Real(x), 0).unwrap().coordinate(), x);
            }
        }
        let sys = MapSystem::full_tent(Backend::BitStream).unwrap();
        let p = PointRep::Digits(DigitStream::from_f64(0.7));
        assert_eq!(sys.iterate(&p, 0).unwrap().coordinate(), 0.7);
    }

    #[test]
    fn bitstream_rejected_for_rotation_and_mp() {
        assert!(matches!(
            MapSystem::new(MapKind::Rotation, Backend::BitStream),
            Err(Error::BackendUnsupported { .. })
        ));
        assert!(matches!(
            MapSystem::manneville_pomeau(0.5).unwrap().with_backend(Backend::BitStream),
            Err(Error::BackendUnsupported { .. })
        ));
        let rot = MapSystem::golden_rotation();
        let p = PointRep::Digits(DigitStream::from_f64(0.25));
        assert!(matches!(rot.iterate(&p, 1), Err(Error::BackendUnsupported { .. })));
    }

    #[test]
    fn domain_errors() {
        let sys = MapSystem::doubling(Backend::Float64).unwrap();
        assert_eq!(sys.iterate(&PointRep::Real(1.0), 1), Err(Error::DomainError(1.0)));
        let tent = MapSystem::full_tent(Backend::Float64).unwrap();
        assert!(tent.iterate(&PointRep::Real(1.0), 1).is_ok());
        assert!(tent.iterate(&PointRep::Real(-0.1), 1).is_err());
    }

    #[test]
    fn tent_bitstream_matches_float_on_dyadics() {
        let bit = MapSystem::full_tent(Backend::BitStream).unwrap();
        let flt = MapSystem::full_tent(Backend::Float64).unwrap();
        for x in [0.3, 0.8125, 0.9, 0.1] {
            let mut t = Trajectory::new(&bit, PointRep::Digits(DigitStream::from_f64(x))).unwrap();
            let mut y = x;
            for _ in 0..40 {
                assert_eq!(t.coordinate(), y, "x = {x}");
                t.step();
                y = flt.apply(y);
            }
        }
    }

    #[test]
    fn rotation_orbit_stays_accurate() {
        let sys = MapSystem::golden_rotation();
        let mut t = Trajectory::new(&sys, PointRep::Real(0.1)).unwrap();
        for _ in 0..1_000_000 {
            t.step();
        }
        let direct = sys.iterate(&PointRep::Real(0.1), 1_000_000).unwrap().coordinate();
        assert!((t.coordinate() - direct).abs() < 1e-12);
    }

    #[test]
    fn golden_convergents_are_fibonacci() {
        let q = MapSystem::golden_rotation().convergent_denominators(10);
        assert_eq!(q, vec![1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
    }

    impl PartialEq for PointRep {
        fn eq(&self, other: &Self) -> bool {
            self.coordinate() == other.coordinate()
        }
    }
}
