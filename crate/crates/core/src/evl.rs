//! Block maxima, normalizing sequences and the cylinder sampling scheme.
//!
//! Exceedances are decided geometrically: `{X_j > u}` is the event that the
//! orbit enters a ball or cylinder around the centre. Values of `g` are only
//! computed for reporting.

use rand::RngCore;

use crate::cylinder::PartitionContext;
use crate::digits::{f64_to_fixed, fixed_to_f64};
use crate::error::{Error, Result};
use crate::measure::{MeasureKind, MeasureModel};
use crate::observable::{GType, Mode, Observable};
use crate::rng::{par_samples, SeedTree};
use crate::system::{Backend, MapSystem, Metric, PointRep, Trajectory};
use crate::target::{Target, TargetSpec};

/// Maximum of a block; `+inf` propagates.
pub fn block_max(obs: &[f64]) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::EmptyBlock);
    }
    Ok(obs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    /// Explicit per-type formulas built from `g(1/n)`.
    Proof,
    /// Built from the `1 - 1/n` quantile of `X_0`.
    Quantile,
}

/// `u_n(y) = y / a_n + b_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizingSeq {
    pub gtype: GType,
    pub n: u64,
    pub a_n: f64,
    pub b_n: f64,
    pub construction: Construction,
}

impl NormalizingSeq {
    pub fn proof(gtype: GType, n: u64) -> Self {
        let nf = n as f64;
        let (a_n, b_n) = match gtype {
            GType::G1 => (1.0, gtype.forward(1.0 / nf)),
            GType::G2 { .. } => (1.0 / gtype.forward(1.0 / nf), 0.0),
            GType::G3 { d, .. } => (1.0 / (d - gtype.forward(1.0 / nf)), d),
        };
        Self {
            gtype,
            n,
            a_n,
            b_n,
            construction: Construction::Proof,
        }
    }

    pub fn quantile(obs: &Observable, n: u64) -> Result<Self> {
        let gamma = gamma_n(obs, n)?;
        let gtype = obs.gtype();
        let (a_n, b_n) = match gtype {
            GType::G1 => (1.0, gamma),
            GType::G2 { .. } => (1.0 / gamma, 0.0),
            GType::G3 { d, .. } => (1.0 / (d - gamma), d),
        };
        Ok(Self {
            gtype,
            n,
            a_n,
            b_n,
            construction: Construction::Quantile,
        })
    }

    pub fn threshold(&self, y: f64) -> f64 {
        y / self.a_n + self.b_n
    }

    pub fn normalize(&self, m: f64) -> f64 {
        self.a_n * (m - self.b_n)
    }
}

/// The per-type threshold formulas with `p = 1`, for `y` in the type's support.
pub fn un_proof_formula(gtype: GType, n: u64, y: f64) -> Result<f64> {
    let g_n = gtype.forward(1.0 / n as f64);
    match gtype {
        GType::G1 => Ok(g_n + y),
        GType::G2 { .. } if y > 0.0 => Ok(g_n * y),
        GType::G3 { d, .. } if y < 0.0 => Ok(d - (d - g_n) * (-y)),
        _ => Err(Error::UnsupportedY(y)),
    }
}

/// `mu(X_0 > u)`.
pub fn tail_mass(obs: &Observable, u: f64) -> Result<f64> {
    let g = obs.gtype();
    if u >= g.top() {
        return Ok(0.0);
    }
    if u < g.forward(1.0) {
        return Ok(1.0);
    }
    let v = g.inverse(u)?;
    match obs.mode() {
        Mode::Ball { zeta } => {
            if v <= 0.0 {
                return Ok(0.0);
            }
            let r = obs.measure().quantile_radius(*zeta, v.min(1.0))?;
            Ok(obs.measure().ball_mass(*zeta, r))
        }
        Mode::Cylinder { masses, .. } => {
            // X_0 = g(mu(Z_k)) on Z_k \ Z_{k+1}; X_0 > u iff mu(Z_k) < v
            let k = masses.iter().position(|&m| m < v);
            Ok(k.map_or(0.0, |k| masses[k]))
        }
    }
}

/// `gamma_n = inf { y : mu(X_0 <= y) >= 1 - 1/n }`.
pub fn gamma_n(obs: &Observable, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let g = obs.gtype();
    if n == 1 {
        return Ok(g.forward(1.0));
    }
    let target = 1.0 / n as f64;
    match obs.mode() {
        Mode::Ball { zeta } => {
            let m = obs.measure();
            let v = m.ball_mass(*zeta, m.quantile_radius(*zeta, target)?);
            Ok(g.forward(v))
        }
        Mode::Cylinder { masses, .. } => {
            let k = masses
                .iter()
                .position(|&m| m <= target)
                .ok_or_else(|| Error::DegenerateTail(n as f64 * masses[masses.len() - 1]))?;
            let ratio = n as f64 * masses[k];
            if (ratio - 1.0).abs() > 1e-9 {
                return Err(Error::DegenerateTail(ratio));
            }
            Ok(g.forward(masses[k - 1]))
        }
    }
}

/// Block maxima recorded through the geometry that determines them.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximaSample {
    pub n: u64,
    pub iid: bool,
    pub gtype: GType,
    /// `v` with `M_n = g(v)`.
    pub level: Vec<f64>,
    /// Minimal distance to the centre (ball mode).
    pub min_dist: Option<Vec<f64>>,
    /// Maximal cylinder depth reached (cylinder mode).
    pub max_depth: Option<Vec<usize>>,
    pub overflow: usize,
}

impl MaximaSample {
    pub fn len(&self) -> usize {
        self.level.len()
    }

    pub fn is_empty(&self) -> bool {
        self.level.is_empty()
    }

    pub fn maxima(&self) -> Vec<f64> {
        self.level.iter().map(|&v| self.gtype.forward(v)).collect()
    }

    pub fn normalized(&self, seq: &NormalizingSeq) -> Vec<f64> {
        self.level.iter().map(|&v| seq.normalize(self.gtype.forward(v))).collect()
    }

    /// `P(M_n <= u)`, counting samples whose orbit stayed out of the
    /// exceedance set `{X > u}`.
    pub fn prob_le(&self, obs: &Observable, u: f64) -> Result<f64> {
        let g = obs.gtype();
        if u >= g.top() {
            return Ok(1.0);
        }
        if u < g.forward(1.0) {
            return Ok(0.0);
        }
        let v = g.inverse(u)?;
        let hits = match (obs.mode(), &self.min_dist, &self.max_depth) {
            (Mode::Ball { zeta }, Some(dist), _) => {
                let r = obs.measure().quantile_radius(*zeta, v.min(1.0))?;
                dist.iter().filter(|&&d| d >= r).count()
            }
            (Mode::Cylinder { masses, .. }, _, Some(depth)) => {
                // first depth whose cylinder lies inside {X > u}
                let k = masses.iter().position(|&m| m < v).unwrap_or(masses.len());
                depth.iter().filter(|&&d| d < k).count()
            }
            _ => return Err(Error::Unsupported("sample does not match the observable mode".into())),
        };
        Ok(hits as f64 / self.len() as f64)
    }
}

#[inline]
fn fixed_dist(w: u64, z: u128, circle: bool) -> u128 {
    let w = w as u128;
    let d = w.abs_diff(z);
    if circle {
        d.min((1u128 << 64) - d.min(1u128 << 64))
    } else {
        d
    }
}

/// Law of `M_n = max(X_0, ..., X_{n-1})`, or of the iid maxima when `iid` is
/// set.
pub fn sample_block_maxima(
    system: &MapSystem,
    obs: &Observable,
    n: u64,
    samples: usize,
    seeds: &SeedTree,
    iid: bool,
) -> Result<MaximaSample> {
    if n == 0 || samples == 0 {
        return Err(Error::InvalidParameter("n and samples must be positive".into()));
    }
    let measure = obs.measure();
    let stream = system.backend() == Backend::BitStream;
    let fast_iid = iid && stream && matches!(measure.kind(), MeasureKind::Lebesgue);
    let gtype = obs.gtype();
    match obs.mode() {
        Mode::Ball { zeta } => {
            let zeta = *zeta;
            let circle = measure.metric() == Metric::Circle;
            let z = f64_to_fixed(zeta);
            let dists = par_samples(seeds, samples, |rng| {
                let mut best = f64::INFINITY;
                let mut best_fixed = u128::MAX;
                if fast_iid {
                    for _ in 0..n {
                        best_fixed = best_fixed.min(fixed_dist(rng.next_u64(), z, circle));
                    }
                } else if iid {
                    for _ in 0..n {
                        let mut t = Trajectory::new(system, measure.sample_stationary(rng))?;
                        if stream {
                            best_fixed = best_fixed.min(fixed_dist(t.coordinate_window(), z, circle));
                        } else {
                            best = best.min(measure.metric().dist(t.coordinate(), zeta));
                        }
                    }
                } else {
                    let mut t = Trajectory::new(system, measure.sample_stationary(rng))?;
                    for _ in 0..n {
                        if stream {
                            best_fixed = best_fixed.min(fixed_dist(t.coordinate_window(), z, circle));
                        } else {
                            best = best.min(measure.metric().dist(t.coordinate(), zeta));
                        }
                        t.step();
                    }
                }
                Ok(if stream { fixed_to_f64(best_fixed) } else { best })
            })?;
            let level: Vec<f64> = dists.iter().map(|&d| measure.ball_mass(zeta, d)).collect();
            let overflow = level.iter().filter(|&&v| v == 0.0).count();
            Ok(MaximaSample {
                n,
                iid,
                gtype,
                level,
                min_dist: Some(dists),
                max_depth: None,
                overflow,
            })
        }
        Mode::Cylinder { ctx, zeta, masses } => {
            if !stream {
                return Err(Error::Unsupported(
                    "cylinder block maxima need the bit-stream backend".into(),
                ));
            }
            let cap = ctx.max_depth();
            let words = ctx.zeta_digits(zeta).prefix_words(cap.max(1));
            let depths = par_samples(seeds, samples, |rng| {
                let mut best = 0usize;
                if iid {
                    for _ in 0..n {
                        let mut t = Trajectory::new(system, measure.sample_stationary(rng))?;
                        best = best.max(t.common_prefix(&words, cap));
                    }
                } else {
                    let mut t = Trajectory::new(system, measure.sample_stationary(rng))?;
                    for _ in 0..n {
                        best = best.max(t.common_prefix(&words, cap));
                        t.step();
                    }
                }
                Ok(best)
            })?;
            let overflow = depths.iter().filter(|&&d| d >= cap).count();
            let level = depths
                .iter()
                .map(|&d| if d >= cap { 0.0 } else { masses[d] })
                .collect();
            Ok(MaximaSample {
                n,
                iid,
                gtype,
                level,
                min_dist: None,
                max_depth: Some(depths),
                overflow,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnConvention {
    /// `u_n = g(mu(Z_{n-1}))`, so that `{X_0 > u_n} = Z_n`.
    Proof,
    /// `u_n = g(mu(Z_n))`, whose exceedance set is `Z_{n+1}`.
    Narrative,
}

/// Threshold and time scale for cylinder maxima at depth `n`.
#[derive(Debug, Clone)]
pub struct CylinderSchedule {
    pub zeta: PointRep,
    pub depth: usize,
    pub tau: f64,
    pub u_n: f64,
    pub omega: u64,
    /// `mu(Z_depth[zeta])`, which sets `omega`.
    pub mass: f64,
    /// Depth of the exceedance set `{X_0 > u_n}`.
    pub event_depth: usize,
    /// Mass of the exceedance set.
    pub event_mass: f64,
}

pub fn cylinder_schedule(
    ctx: &PartitionContext,
    measure: &MeasureModel,
    zeta: &PointRep,
    n: usize,
    tau: f64,
    gtype: GType,
    convention: UnConvention,
) -> Result<CylinderSchedule> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must be positive and finite")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    let mass_at = |k: usize| -> Result<f64> {
        let m = ctx.cylinder_at(measure, zeta, k)?.mass();
        if m > 0.0 {
            Ok(m)
        } else {
            Err(Error::ZeroMassCylinder)
        }
    };
    let mass = mass_at(n)?;
    let (u_n, event_depth) = match convention {
        UnConvention::Proof => (gtype.forward(mass_at(n - 1)?), n),
        UnConvention::Narrative => (gtype.forward(mass), n + 1),
    };
    let event_mass = if event_depth == n { mass } else { mass_at(event_depth)? };
    Ok(CylinderSchedule {
        zeta: zeta.clone(),
        depth: n,
        tau,
        u_n,
        omega: (tau / mass).floor() as u64,
        mass,
        event_depth,
        event_mass,
    })
}

/// Estimate of `P(M_omega <= u_n)` for a cylinder schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderMaxima {
    pub omega: u64,
    pub samples: usize,
    /// Samples whose first `omega` observations all stayed below `u_n`.
    pub below: usize,
    pub iid: bool,
}

impl CylinderMaxima {
    pub fn estimate(&self) -> f64 {
        self.below as f64 / self.samples as f64
    }

    pub fn stderr(&self) -> f64 {
        let p = self.estimate();
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }
}

pub fn sample_cylinder_maxima(
    system: &MapSystem,
    measure: &MeasureModel,
    schedule: &CylinderSchedule,
    samples: usize,
    seeds: &SeedTree,
    iid: bool,
) -> Result<CylinderMaxima> {
    let target = Target::new(
        system,
        measure,
        TargetSpec::Cylinder {
            zeta: schedule.zeta.clone(),
            depth: schedule.event_depth,
        },
    )?;
    let omega = schedule.omega;
    let fast_iid = iid
        && system.backend() == Backend::BitStream
        && matches!(measure.kind(), MeasureKind::Lebesgue)
        && schedule.event_depth <= 64;
    let flags = par_samples(seeds, samples, |rng| {
        if fast_iid {
            return Ok((0..omega).all(|_| !target.contains_window(rng.next_u64())));
        }
        if iid {
            for _ in 0..omega {
                let mut t = Trajectory::new(system, measure.sample_stationary(rng))?;
                if target.contains(&mut t) {
                    return Ok(false);
                }
            }
            return Ok(true);
        }
        let mut t = Trajectory::new(system, measure.sample_stationary(rng))?;
        for _ in 0..omega {
            if target.contains(&mut t) {
                return Ok(false);
            }
            t.step();
        }
        Ok(true)
    })?;
    Ok(CylinderMaxima {
        omega,
        samples,
        below: flags.iter().filter(|&&b| b).count(),
        iid,
    })
}
