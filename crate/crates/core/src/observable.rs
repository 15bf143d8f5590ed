//! Observables `phi = g(mu(...))` with a maximum at a centre `zeta`.

use crate::cylinder::{Depth, PartitionContext};
use crate::error::{Error, Result};
use crate::measure::MeasureModel;
use crate::system::{MapSystem, PointRep, Trajectory};

/// Shape of `g` near 0, in its canonical form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GType {
    /// `g(v) = -ln v`.
    G1,
    /// `g(v) = v^(-1/alpha)`.
    G2 { alpha: f64 },
    /// `g(v) = d - v^(1/alpha)`.
    G3 { d: f64, alpha: f64 },
}

impl GType {
    pub fn validate(self) -> Result<Self> {
        match self {
            GType::G2 { alpha } | GType::G3 { alpha, .. } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")))
            }
            GType::G3 { d, .. } if !d.is_finite() => {
                Err(Error::InvalidParameter("D must be finite".into()))
            }
            g => Ok(g),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GType::G1 => "g1",
            GType::G2 { .. } => "g2",
            GType::G3 { .. } => "g3",
        }
    }

    /// `g(v)` for `v` in `[0, 1]`; `g(0)` is `+inf` for G1 and G2.
    pub fn forward(self, v: f64) -> f64 {
        match self {
            GType::G1 => -v.ln(),
            GType::G2 { alpha } => v.powf(-1.0 / alpha),
            GType::G3 { d, alpha } => d - v.powf(1.0 / alpha),
        }
    }

    /// `g^{-1}(u)`; fails below `g(1)`.
    pub fn inverse(self, u: f64) -> Result<f64> {
        if u < self.forward(1.0) {
            return Err(Error::OutOfRange(u));
        }
        Ok(match self {
            GType::G1 => (-u).exp(),
            GType::G2 { alpha } => u.powf(-alpha),
            GType::G3 { d, alpha } => (d - u).max(0.0).powf(alpha),
        })
    }

    /// Limit of `n mu(X_0 > u_n(y))` under the canonical normalization.
    pub fn tau(self, y: f64) -> f64 {
        match self {
            GType::G1 => (-y).exp(),
            GType::G2 { alpha } => {
                if y > 0.0 {
                    y.powf(-alpha)
                } else {
                    f64::INFINITY
                }
            }
            GType::G3 { alpha, .. } => {
                if y <= 0.0 {
                    (-y).powf(alpha)
                } else {
                    0.0
                }
            }
        }
    }

    /// Supremum of the observable.
    pub fn top(self) -> f64 {
        self.forward(0.0)
    }
}

/// How the distance to the centre is turned into a mass.
#[derive(Debug, Clone)]
pub enum Mode {
    Ball { zeta: f64 },
    Cylinder {
        ctx: PartitionContext,
        zeta: PointRep,
        /// `mu(Z_k[zeta])` for `k = 0..=max_depth`.
        masses: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Observable {
    gtype: GType,
    mode: Mode,
    measure: MeasureModel,
}

/// Result of evaluating an observable, with a flag for cylinder overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub overflow: bool,
}

impl Observable {
    pub fn ball(gtype: GType, measure: MeasureModel, zeta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&zeta) {
            return Err(Error::DomainError(zeta));
        }
        Ok(Self {
            gtype: gtype.validate()?,
            mode: Mode::Ball { zeta },
            measure,
        })
    }

    pub fn cylinder(gtype: GType, measure: MeasureModel, ctx: PartitionContext, zeta: PointRep) -> Result<Self> {
        let masses = (0..=ctx.max_depth())
            .map(|k| ctx.cylinder_at(&measure, &zeta, k).map(|c| c.mass))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            gtype: gtype.validate()?,
            mode: Mode::Cylinder { ctx, zeta, masses },
            measure,
        })
    }

    pub fn gtype(&self) -> GType {
        self.gtype
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn measure(&self) -> &MeasureModel {
        &self.measure
    }

    /// The centre as a real number.
    pub fn zeta(&self) -> f64 {
        match &self.mode {
            Mode::Ball { zeta } => *zeta,
            Mode::Cylinder { zeta, .. } => zeta.coordinate(),
        }
    }

    /// `mu(Z_k[zeta])` in cylinder mode.
    pub fn cylinder_mass(&self, k: usize) -> Option<f64> {
        match &self.mode {
            Mode::Cylinder { masses, .. } => masses.get(k).copied(),
            Mode::Ball { .. } => None,
        }
    }

    /// The mass whose image under `g` is `phi(x)`.
    pub fn level_mass(&self, x: &PointRep) -> (f64, bool) {
        match &self.mode {
            Mode::Ball { zeta } => {
                let d = self.measure.metric().dist(x.coordinate(), *zeta);
                (self.measure.ball_mass(*zeta, d), false)
            }
            Mode::Cylinder { ctx, zeta, masses } => match ctx.max_depth_in(x, zeta) {
                Depth::Finite(k) => (masses[k], false),
                Depth::Overflow => (0.0, true),
            },
        }
    }

    pub fn evaluate(&self, x: &PointRep) -> Evaluation {
        let (v, overflow) = self.level_mass(x);
        Evaluation {
            value: self.gtype.forward(v),
            overflow,
        }
    }
}

/// `X_j = phi(f^j x)` for `j = 0..n`.
pub fn orbit_observations(system: &MapSystem, x: &PointRep, obs: &Observable, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one observation".into()));
    }
    let mut t = Trajectory::new(system, x.clone())?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(obs.evaluate(&t.point()).value);
        t.step();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Backend;
    use approx::assert_abs_diff_eq;

    #[test]
    fn forward_and_inverse_examples() {
        assert_abs_diff_eq!(GType::G1.forward((-2f64).exp()), 2.0, epsilon = 1e-15);
        let g2 = GType::G2 { alpha: 2.0 };
        assert_abs_diff_eq!(g2.forward(0.01), 10.0, epsilon = 1e-12);
        let g3 = GType::G3 { d: 1.0, alpha: 1.0 };
        assert_eq!(g3.forward(0.25), 0.75);
        assert_abs_diff_eq!(GType::G1.inverse(2.0).unwrap(), 0.135335, epsilon = 1e-6);
        assert_abs_diff_eq!(g2.inverse(10.0).unwrap(), 0.01, epsilon = 1e-15);
        assert_eq!(g3.inverse(0.75).unwrap(), 0.25);
        assert_eq!(g3.inverse(-1.0), Err(Error::OutOfRange(-1.0)));
    }

    #[test]
    fn tau_examples() {
        assert_eq!(GType::G1.tau(0.0), 1.0);
        assert_eq!(GType::G2 { alpha: 1.0 }.tau(2.0), 0.5);
        assert_eq!(GType::G2 { alpha: 1.0 }.tau(-1.0), f64::INFINITY);
        assert_eq!(GType::G3 { d: 1.0, alpha: 2.0 }.tau(-2.0), 4.0);
        assert_eq!(GType::G3 { d: 1.0, alpha: 2.0 }.tau(0.5), 0.0);
    }

    #[test]
    fn top_values() {
        assert_eq!(GType::G1.top(), f64::INFINITY);
        assert_eq!(GType::G2 { alpha: 3.0 }.top(), f64::INFINITY);
        assert_eq!(GType::G3 { d: 2.5, alpha: 1.0 }.top(), 2.5);
    }

    #[test]
    fn tent_observables_at_one() {
        let sys = MapSystem::full_tent(Backend::BitStream).unwrap();
        let m = MeasureModel::lebesgue(&sys).unwrap();
        let g = GType::G2 { alpha: 1.0 };
        let ball = Observable::ball(g, m.clone(), 1.0).unwrap();
        let x = PointRep::Real(0.9);
        assert_abs_diff_eq!(ball.evaluate(&x).value, 10.0, epsilon = 1e-12);
        assert_eq!(ball.evaluate(&PointRep::Real(1.0)).value, f64::INFINITY);
        let ctx = PartitionContext::new(sys, 40).unwrap();
        let cyl = Observable::cylinder(g, m, ctx, PointRep::Real(1.0)).unwrap();
        assert_eq!(cyl.evaluate(&x).value, 8.0);
        let top = cyl.evaluate(&PointRep::Real(1.0));
        assert!(top.overflow && top.value == f64::INFINITY);
        let obs = orbit_observations(&sys, &x, &ball, 1).unwrap();
        assert_abs_diff_eq!(obs[0], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_observable_orbit() {
        // g3 with D = 0 and alpha huge is not constant; use the top of g3 at the centre
        let sys = MapSystem::doubling(Backend::Float64).unwrap();
        let m = MeasureModel::lebesgue(&sys).unwrap();
        let obs = Observable::ball(GType::G3 { d: 0.0, alpha: 1.0 }, m, 0.0).unwrap();
        let xs = orbit_observations(&sys, &PointRep::Real(0.0), &obs, 3).unwrap();
        assert_eq!(xs, vec![0.0, 0.0, 0.0]);
    }
}
