//! Empirical laws, reference distributions and the equivalence checks.

use crate::error::{Error, Result};
use crate::observable::GType;

/// A sorted sample, with censored observations counted above every value.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    values: Vec<f64>,
    censored: usize,
}

impl EmpiricalLaw {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self { values, censored: 0 }
    }

    pub fn with_censored(values: Vec<f64>, censored: usize) -> Self {
        let mut law = Self::new(values);
        law.censored = censored;
        law
    }

    pub fn len(&self) -> usize {
        self.values.len() + self.censored
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn censored(&self) -> usize {
        self.censored
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Right-continuous ECDF.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Sup distance to a reference law.
    pub fn ks_distance(&self, reference: &ReferenceLaw) -> Result<f64> {
        self.check_size()?;
        let n = self.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in self.values.iter().enumerate() {
            let f = reference.cdf(x);
            d = d.max((i as f64 / n - f).abs()).max(((i + 1) as f64 / n - f).abs());
        }
        Ok(d)
    }

    /// Sup distance between two ECDFs.
    pub fn ks_two_sample(&self, other: &EmpiricalLaw) -> Result<f64> {
        self.check_size()?;
        other.check_size()?;
        let mut d: f64 = 0.0;
        for &x in self.values.iter().chain(&other.values) {
            d = d.max((self.ecdf(x) - other.ecdf(x)).abs());
        }
        Ok(d)
    }

    fn check_size(&self) -> Result<()> {
        if self.len() < 10 {
            return Err(Error::InsufficientSample(self.len()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceLaw {
    /// `exp(-exp(-y))`.
    Ev1,
    /// `exp(-y^(-alpha))` for `y > 0`.
    Ev2 { alpha: f64 },
    /// `exp(-(-y)^alpha)` for `y <= 0`.
    Ev3 { alpha: f64 },
    /// `1 - exp(-t)` for `t >= 0`.
    Exponential,
    Uniform,
    /// Linear interpolation through increasing grid points.
    ExplicitGrid { x: Vec<f64>, f: Vec<f64> },
}

impl ReferenceLaw {
    /// The limit law of the normalized maxima for an observable type.
    pub fn for_gtype(g: GType) -> Self {
        match g {
            GType::G1 => ReferenceLaw::Ev1,
            GType::G2 { alpha } => ReferenceLaw::Ev2 { alpha },
            GType::G3 { alpha, .. } => ReferenceLaw::Ev3 { alpha },
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            ReferenceLaw::Ev1 => (-(-y).exp()).exp(),
            ReferenceLaw::Ev2 { alpha } => {
                if y <= 0.0 {
                    0.0
                } else {
                    (-y.powf(-alpha)).exp()
                }
            }
            ReferenceLaw::Ev3 { alpha } => {
                if y > 0.0 {
                    1.0
                } else {
                    (-(-y).powf(*alpha)).exp()
                }
            }
            ReferenceLaw::Exponential => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-y).exp_m1()
                }
            }
            ReferenceLaw::Uniform => y.clamp(0.0, 1.0),
            ReferenceLaw::ExplicitGrid { x, f } => interpolate(x, f, y),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReferenceLaw::Ev1 => "EV1",
            ReferenceLaw::Ev2 { .. } => "EV2",
            ReferenceLaw::Ev3 { .. } => "EV3",
            ReferenceLaw::Exponential => "exponential",
            ReferenceLaw::Uniform => "uniform",
            ReferenceLaw::ExplicitGrid { .. } => "grid",
        }
    }
}

fn interpolate(x: &[f64], f: &[f64], y: f64) -> f64 {
    if y <= x[0] {
        return f[0];
    }
    if y >= x[x.len() - 1] {
        return f[f.len() - 1];
    }
    let i = x.partition_point(|&v| v <= y);
    let t = (y - x[i - 1]) / (x[i] - x[i - 1]);
    f[i - 1] + t * (f[i] - f[i - 1])
}

/// Asymptotic Kolmogorov distribution `P(sqrt(n) D_n <= x)`.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (1.0 - 2.0 * s).clamp(0.0, 1.0)
}

/// Level-`level` critical value of the one-sample KS distance at size `n`.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    let (mut lo, mut hi) = (0.1f64, 5.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < 1.0 - level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi / (n as f64).sqrt()
}

/// Critical value for the two-sample distance with sizes `n` and `m`.
pub fn ks_critical_two_sample(n: usize, m: usize, level: f64) -> f64 {
    ks_critical(1, level) * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// Estimates on a grid with binomial standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl GridEstimate {
    pub fn binomial(grid: Vec<f64>, values: Vec<f64>, samples: usize) -> Self {
        let stderr = values
            .iter()
            .map(|p| (p * (1.0 - p) / samples as f64).sqrt())
            .collect();
        Self { grid, values, stderr }
    }

    /// Linear interpolation of the values and errors at `x` inside the grid.
    pub fn at(&self, x: f64) -> Result<(f64, f64)> {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if !(lo..=hi).contains(&x) {
            return Err(Error::GridMismatch(format!("{x} outside [{lo}, {hi}]")));
        }
        Ok((
            interpolate(&self.grid, &self.values, x),
            interpolate(&self.grid, &self.stderr, x),
        ))
    }
}

/// Pointwise comparison of two estimated laws.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub points: Vec<f64>,
    pub diffs: Vec<f64>,
    /// Combined standard errors of the two sides.
    pub stderr: Vec<f64>,
    pub sup: f64,
}

impl Discrepancy {
    fn from_parts(points: Vec<f64>, diffs: Vec<f64>, stderr: Vec<f64>) -> Self {
        let sup = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        Self { points, diffs, stderr, sup }
    }
}

/// `max_y |H(y) - G(tau(y))|` with `G` the hitting-time survival function.
pub fn check_evl_from_hts(h: &GridEstimate, g: &GridEstimate, gtype: GType) -> Result<Discrepancy> {
    let mut diffs = Vec::with_capacity(h.grid.len());
    let mut errs = Vec::with_capacity(h.grid.len());
    for (i, &y) in h.grid.iter().enumerate() {
        let t = gtype.tau(y);
        let (gv, ge) = if t == f64::INFINITY {
            (0.0, 0.0)
        } else if t == 0.0 {
            (1.0, 0.0)
        } else {
            g.at(t)?
        };
        diffs.push(h.values[i] - gv);
        errs.push((h.stderr[i].powi(2) + ge * ge).sqrt());
    }
    Ok(Discrepancy::from_parts(h.grid.clone(), diffs, errs))
}

/// `max_tau |P(M_omega <= u_n) - G_cyl(tau)|` over a common tau grid.
pub fn check_cylinder_equivalence(maxima: &GridEstimate, hts: &GridEstimate) -> Result<Discrepancy> {
    if maxima.grid != hts.grid {
        return Err(Error::GridMismatch("tau grids differ".into()));
    }
    let diffs = maxima.values.iter().zip(&hts.values).map(|(a, b)| a - b).collect();
    let errs = maxima
        .stderr
        .iter()
        .zip(&hts.stderr)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();
    Ok(Discrepancy::from_parts(maxima.grid.clone(), diffs, errs))
}

/// Distance of grid estimates to `exp(-tau)`.
pub fn distance_to_exponential(est: &GridEstimate) -> f64 {
    est.grid
        .iter()
        .zip(&est.values)
        .fold(0.0f64, |m, (t, v)| m.max((v - (-t).exp()).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use rand::Rng;

    #[test]
    fn ks_examples() {
        let xs: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let law = EmpiricalLaw::new(xs);
        assert!((law.ks_distance(&ReferenceLaw::Uniform).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(law.ks_two_sample(&law).unwrap(), 0.0);
        assert!(matches!(
            EmpiricalLaw::new(vec![1.0]).ks_distance(&ReferenceLaw::Uniform),
            Err(Error::InsufficientSample(1))
        ));
    }

    #[test]
    fn kolmogorov_critical_value() {
        assert!((ks_critical(1, 0.01) - 1.6276).abs() < 1e-3);
        assert!((ks_critical(10_000, 0.01) - 0.0163).abs() < 1e-4);
    }

    #[test]
    fn ks_calibration_on_exponential_draws() {
        let crit = ks_critical(10_000, 0.01);
        let tree = SeedTree::new(77, "ks");
        let passes = (0..100)
            .filter(|&r| {
                let mut rng = tree.stream(r);
                let xs: Vec<f64> = (0..10_000).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                EmpiricalLaw::new(xs).ks_distance(&ReferenceLaw::Exponential).unwrap() < crit
            })
            .count();
        assert!(passes >= 98, "{passes}");
    }

    #[test]
    fn reference_laws_are_distribution_functions() {
        let laws = [
            ReferenceLaw::Ev1,
            ReferenceLaw::Ev2 { alpha: 1.0 },
            ReferenceLaw::Ev3 { alpha: 2.0 },
            ReferenceLaw::Exponential,
        ];
        for law in &laws {
            let mut prev = 0.0;
            for i in 0..1000 {
                let y = -50.0 + 100.0 * i as f64 / 999.0;
                let f = law.cdf(y);
                assert!(f >= prev && (0.0..=1.0).contains(&f));
                prev = f;
            }
            assert!(law.cdf(-1e6) < 1e-12 && law.cdf(1e6) > 1.0 - 1e-6, "{law:?}");
        }
        assert_eq!(ReferenceLaw::Ev2 { alpha: 1.0 }.cdf(0.0), 0.0);
        assert_eq!(ReferenceLaw::Ev3 { alpha: 1.0 }.cdf(0.1), 1.0);
    }

    #[test]
    fn exact_laws_have_no_discrepancy() {
        let t: Vec<f64> = (0..=400).map(|i| i as f64 * 0.025).collect();
        let g = GridEstimate {
            values: t.iter().map(|s| (-s).exp()).collect(),
            stderr: vec![0.0; t.len()],
            grid: t,
        };
        let y: Vec<f64> = (-2..=6).map(|i| i as f64 * 0.5).collect();
        let h = GridEstimate {
            values: y.iter().map(|&v| ReferenceLaw::Ev1.cdf(v)).collect(),
            stderr: vec![0.0; y.len()],
            grid: y,
        };
        let d = check_evl_from_hts(&h, &g, GType::G1).unwrap();
        assert!(d.sup < 1e-4, "{}", d.sup);
        let far = GridEstimate { grid: vec![-3.0], values: vec![0.0], stderr: vec![0.0] };
        assert!(matches!(check_evl_from_hts(&far, &g, GType::G1), Err(Error::GridMismatch(_))));
    }
}
