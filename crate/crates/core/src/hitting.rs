//! First hitting and return times, their laws, and Kac's lemma.

use crate::error::{Error, Result};
use crate::measure::MeasureModel;
use crate::rng::{par_samples, SeedTree};
use crate::system::{MapSystem, PointRep, Trajectory};
use crate::target::Target;

/// Smallest `j` in `[start, t_max]` with `f^j(x)` in the target, where
/// `start` is 1, or 0 when `from_zero` is set. `None` means censored.
pub fn first_hit(
    system: &MapSystem,
    x: PointRep,
    target: &Target,
    t_max: u64,
    from_zero: bool,
) -> Result<Option<u64>> {
    if t_max == 0 {
        return Err(Error::InvalidParameter("cap must be at least 1".into()));
    }
    let mut t = Trajectory::new(system, x)?;
    Ok(hit_from(&mut t, target, t_max, from_zero))
}

#[inline]
fn hit_from(t: &mut Trajectory, target: &Target, t_max: u64, from_zero: bool) -> Option<u64> {
    if from_zero && target.contains(t) {
        return Some(0);
    }
    for j in 1..=t_max {
        t.step();
        if target.contains(t) {
            return Some(j);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitOptions {
    /// The cap is `ceil(cap_factor / mass)`.
    pub cap_factor: f64,
    pub from_zero: bool,
}

impl Default for HitOptions {
    fn default() -> Self {
        Self {
            cap_factor: 50.0,
            from_zero: false,
        }
    }
}

impl HitOptions {
    pub fn cap(&self, mass: f64) -> u64 {
        (self.cap_factor / mass).ceil() as u64
    }
}

/// Raw hitting or return times; censored entries hold `t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingSample {
    pub times: Vec<u64>,
    pub censored: Vec<bool>,
    pub t_max: u64,
    pub mass: f64,
}

impl HittingSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn censored_count(&self) -> usize {
        self.censored.iter().filter(|&&c| c).count()
    }

    /// `P(r mu(A) >= t)`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        if t / self.mass > self.t_max as f64 {
            return Err(Error::CapTooSmall {
                t,
                mass: self.mass,
                cap: self.t_max,
            });
        }
        let n = self
            .times
            .iter()
            .zip(&self.censored)
            .filter(|&(&r, &c)| c || r as f64 * self.mass >= t)
            .count();
        Ok(n as f64 / self.len() as f64)
    }

    pub fn survival_grid(&self, grid: &[f64]) -> Result<Vec<f64>> {
        grid.iter().map(|&t| self.survival(t)).collect()
    }

    /// Uncensored times scaled by the target mass.
    pub fn normalized(&self) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.censored)
            .filter(|&(_, &c)| !c)
            .map(|(&r, _)| r as f64 * self.mass)
            .collect()
    }
}

fn sample_times(
    system: &MapSystem,
    measure: &MeasureModel,
    target: &Target,
    samples: usize,
    opts: HitOptions,
    seeds: &SeedTree,
    conditional: bool,
) -> Result<HittingSample> {
    let t_max = opts.cap(target.mass());
    let hits = par_samples(seeds, samples, |rng| {
        let x = if conditional {
            target.sample_in(measure, rng)?
        } else {
            measure.sample_stationary(rng)
        };
        let mut t = Trajectory::new(system, x)?;
        Ok(hit_from(&mut t, target, t_max, opts.from_zero))
    })?;
    Ok(HittingSample {
        times: hits.iter().map(|h| h.unwrap_or(t_max)).collect(),
        censored: hits.iter().map(Option::is_none).collect(),
        t_max,
        mass: target.mass(),
    })
}

/// Hitting times from stationary starts, with the survival function on a grid.
pub fn hts_law(
    system: &MapSystem,
    measure: &MeasureModel,
    target: &Target,
    t_grid: &[f64],
    samples: usize,
    opts: HitOptions,
    seeds: &SeedTree,
) -> Result<(HittingSample, Vec<f64>)> {
    check_grid(target, t_grid, opts)?;
    let s = sample_times(system, measure, target, samples, opts, seeds, false)?;
    let g = s.survival_grid(t_grid)?;
    Ok((s, g))
}

/// Return times from starts drawn inside the target.
pub fn rts_law(
    system: &MapSystem,
    measure: &MeasureModel,
    target: &Target,
    t_grid: &[f64],
    samples: usize,
    opts: HitOptions,
    seeds: &SeedTree,
) -> Result<(HittingSample, Vec<f64>)> {
    check_grid(target, t_grid, opts)?;
    let s = sample_times(system, measure, target, samples, opts, seeds, true)?;
    let g = s.survival_grid(t_grid)?;
    Ok((s, g))
}

fn check_grid(target: &Target, t_grid: &[f64], opts: HitOptions) -> Result<()> {
    let cap = opts.cap(target.mass());
    for &t in t_grid {
        if t / target.mass() > cap as f64 {
            return Err(Error::CapTooSmall {
                t,
                mass: target.mass(),
                cap,
            });
        }
    }
    Ok(())
}

/// Mean return time compared with `1 / mu(A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KacReport {
    pub mean: f64,
    /// `mean * mu(A)`; 1 under Kac's lemma.
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub uncensored: usize,
    pub censored: usize,
}

impl KacReport {
    pub fn within(&self, rel: f64) -> bool {
        (self.ratio - 1.0).abs() <= rel
    }
}

pub fn kac_check(
    system: &MapSystem,
    measure: &MeasureModel,
    target: &Target,
    samples: usize,
    opts: HitOptions,
    seeds: &SeedTree,
) -> Result<KacReport> {
    let s = sample_times(system, measure, target, samples, opts, seeds, true)?;
    let r: Vec<f64> = s
        .times
        .iter()
        .zip(&s.censored)
        .filter(|&(_, &c)| !c)
        .map(|(&t, _)| t as f64)
        .collect();
    if r.len() < 2 {
        return Err(Error::InsufficientSample(r.len()));
    }
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(KacReport {
        mean,
        ratio: mean * target.mass(),
        ratio_stderr: (var / n).sqrt() * target.mass(),
        uncensored: r.len(),
        censored: s.censored_count(),
    })
}

/// `F(t) = int_0^t (1 - F~(s)) ds` by the trapezoid rule, for a return-time
/// distribution function `F~` sampled on an increasing grid starting at 0.
pub fn hts_from_rts(grid: &[f64], rts_df: &[f64]) -> Result<Vec<f64>> {
    if grid.len() != rts_df.len() || grid.is_empty() {
        return Err(Error::GridMismatch("grid and values differ in length".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch("grid must be increasing".into()));
    }
    if rts_df.iter().any(|&f| !(0.0..=1.0).contains(&f)) || rts_df.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::NonMonotoneInput);
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = grid[0] * (1.0 - rts_df[0]);
    out.push(acc);
    for i in 1..grid.len() {
        acc += 0.5 * (grid[i] - grid[i - 1]) * ((1.0 - rts_df[i]) + (1.0 - rts_df[i - 1]));
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digits::DigitStream;
    use crate::system::Backend;
    use crate::target::TargetSpec;

    #[test]
    fn first_hit_examples() {
        let dbl = MapSystem::doubling(Backend::BitStream).unwrap();
        let m = MeasureModel::lebesgue(&dbl).unwrap();
        let upper = Target::new(&dbl, &m, TargetSpec::Interval { lo: 0.5, hi: 1.0 }).unwrap();
        let third = PointRep::Digits(DigitStream::periodic(vec![false, true]));
        assert_eq!(first_hit(&dbl, third, &upper, 10, false).unwrap(), Some(1));

        let tent = MapSystem::full_tent(Backend::BitStream).unwrap();
        let lm = MeasureModel::lebesgue(&tent).unwrap();
        let z3 = Target::new(&tent, &lm, TargetSpec::Cylinder { zeta: PointRep::Real(1.0), depth: 3 }).unwrap();
        let one = PointRep::Digits(DigitStream::from_f64(1.0));
        assert_eq!(first_hit(&tent, one.clone(), &z3, 1000, false).unwrap(), None);
        assert_eq!(first_hit(&tent, one, &z3, 1000, true).unwrap(), Some(0));
    }

    #[test]
    fn whole_space_returns_at_once() {
        let dbl = MapSystem::doubling(Backend::BitStream).unwrap();
        let m = MeasureModel::lebesgue(&dbl).unwrap();
        let all = Target::new(&dbl, &m, TargetSpec::Whole).unwrap();
        let k = kac_check(&dbl, &m, &all, 100, HitOptions::default(), &SeedTree::new(1, "w")).unwrap();
        assert_eq!(k.ratio, 1.0);
        let (_, g) = hts_law(&dbl, &m, &all, &[0.0, 1.0], 50, HitOptions::default(), &SeedTree::new(1, "w")).unwrap();
        assert_eq!(g, vec![1.0, 1.0]);
    }

    #[test]
    fn kac_on_half_interval() {
        let dbl = MapSystem::doubling(Backend::BitStream).unwrap();
        let m = MeasureModel::lebesgue(&dbl).unwrap();
        let a = Target::new(&dbl, &m, TargetSpec::Interval { lo: 0.0, hi: 0.5 }).unwrap();
        let k = kac_check(&dbl, &m, &a, 10_000, HitOptions::default(), &SeedTree::new(2, "kac")).unwrap();
        assert!((k.mean - 2.0).abs() < 3.0 * k.ratio_stderr * 2.0, "{k:?}");
    }

    #[test]
    fn cap_too_small_is_refused() {
        let dbl = MapSystem::doubling(Backend::BitStream).unwrap();
        let m = MeasureModel::lebesgue(&dbl).unwrap();
        let a = Target::new(&dbl, &m, TargetSpec::Interval { lo: 0.0, hi: 0.25 }).unwrap();
        let opts = HitOptions { cap_factor: 2.0, from_zero: false };
        assert!(matches!(
            hts_law(&dbl, &m, &a, &[3.0], 10, opts, &SeedTree::new(1, "c")),
            Err(Error::CapTooSmall { .. })
        ));
    }

    #[test]
    fn transform_fixed_point_and_edges() {
        let grid: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
        let exp: Vec<f64> = grid.iter().map(|t| 1.0 - (-t).exp()).collect();
        let out = hts_from_rts(&grid, &exp).unwrap();
        for (o, e) in out.iter().zip(&exp) {
            assert!((o - e).abs() < 1e-4);
        }
        assert!(hts_from_rts(&grid, &vec![1.0; grid.len()]).unwrap().iter().all(|&v| v == 0.0));
        let lin = hts_from_rts(&grid, &vec![0.0; grid.len()]).unwrap();
        assert!(lin.iter().zip(&grid).all(|(o, t)| (o - t).abs() < 1e-12));
        let mut bad = exp.clone();
        bad[10] = 0.9;
        assert_eq!(hts_from_rts(&grid, &bad), Err(Error::NonMonotoneInput));
    }
}
