//! Monte Carlo laws against closed-form or binomial oracles.

use evlhts::cylinder::PartitionContext;
use evlhts::evl::{cylinder_schedule, sample_block_maxima, sample_cylinder_maxima, NormalizingSeq, UnConvention};
use evlhts::hitting::{hts_law, kac_check, HitOptions};
use evlhts::measure::MeasureModel;
use evlhts::observable::{GType, Observable};
use evlhts::rng::SeedTree;
use evlhts::stats::{check_cylinder_equivalence, ks_critical, EmpiricalLaw, GridEstimate, ReferenceLaw};
use evlhts::system::{Backend, MapSystem, PointRep};
use evlhts::target::{Target, TargetSpec};
use rand::Rng;

const GENERIC: f64 = std::f64::consts::FRAC_1_PI;

fn sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn iid_maxima_at_tent_endpoint() {
    let tent = MapSystem::full_tent(Backend::BitStream).unwrap();
    let obs = Observable::ball(GType::G1, MeasureModel::lebesgue(&tent).unwrap(), 1.0).unwrap();
    let n = 1000;
    let s = sample_block_maxima(&tent, &obs, n, 10_000, &SeedTree::new(1, "iid-tent"), true).unwrap();
    let u = NormalizingSeq::proof(GType::G1, n).threshold(0.0);
    let p = s.prob_le(&obs, u).unwrap();
    let e = (-1.0f64).exp();
    assert!((p - e).abs() <= 3.0 * sigma(e, 10_000), "{p}");
}

#[test]
fn iid_cylinder_maxima_match_closed_form() {
    let tent = MapSystem::full_tent(Backend::BitStream).unwrap();
    let m = MeasureModel::lebesgue(&tent).unwrap();
    let ctx = PartitionContext::new(tent, 64).unwrap();
    let s = cylinder_schedule(&ctx, &m, &PointRep::Real(1.0), 12, 1.0, GType::G2 { alpha: 1.0 }, UnConvention::Proof)
        .unwrap();
    let r = sample_cylinder_maxima(&tent, &m, &s, 20_000, &SeedTree::new(2, "iid-cyl"), true).unwrap();
    let exact = (s.omega as f64 * (-s.event_mass).ln_1p()).exp();
    assert!((r.estimate() - exact).abs() <= 3.0 * sigma(exact, 20_000), "{} {exact}", r.estimate());
}

#[test]
fn doubling_ball_hitting_time_is_exponential_at_one() {
    let dbl = MapSystem::doubling(Backend::BitStream).unwrap();
    let m = MeasureModel::lebesgue(&dbl).unwrap();
    let eta = m.quantile_radius(GENERIC, 2f64.powi(-10)).unwrap();
    let a = Target::new(&dbl, &m, TargetSpec::Ball { zeta: GENERIC, eta }).unwrap();
    let (_, g) = hts_law(&dbl, &m, &a, &[1.0], 10_000, HitOptions::default(), &SeedTree::new(3, "g1")).unwrap();
    assert!((g[0] - (-1.0f64).exp()).abs() <= 0.015, "{}", g[0]);
}

#[test]
fn tent_cylinder_hitting_time_at_half() {
    let tent = MapSystem::full_tent(Backend::BitStream).unwrap();
    let m = MeasureModel::lebesgue(&tent).unwrap();
    let a = Target::new(&tent, &m, TargetSpec::Cylinder { zeta: PointRep::Real(1.0), depth: 10 }).unwrap();
    assert_eq!(a.mass(), 2f64.powi(-10));
    let (_, g) = hts_law(&tent, &m, &a, &[0.5], 10_000, HitOptions::default(), &SeedTree::new(4, "g")).unwrap();
    assert!((g[0] - (-0.5f64).exp()).abs() <= 0.02, "{}", g[0]);
}

#[test]
fn kac_mean_on_half_interval() {
    let dbl = MapSystem::doubling(Backend::BitStream).unwrap();
    let m = MeasureModel::lebesgue(&dbl).unwrap();
    let a = Target::new(&dbl, &m, TargetSpec::Interval { lo: 0.0, hi: 0.5 }).unwrap();
    let k = kac_check(&dbl, &m, &a, 10_000, HitOptions::default(), &SeedTree::new(5, "kac")).unwrap();
    assert!((k.mean - 2.0).abs() <= 3.0 * k.ratio_stderr / a.mass(), "{k:?}");
}

#[test]
fn tent_cylinder_maxima_equal_hitting_law() {
    let tent = MapSystem::full_tent(Backend::BitStream).unwrap();
    let m = MeasureModel::lebesgue(&tent).unwrap();
    let ctx = PartitionContext::new(tent, 64).unwrap();
    let zeta = PointRep::Real(1.0);
    let taus = vec![0.5, 1.0, 2.0];
    let mut values = Vec::new();
    for &tau in &taus {
        let s = cylinder_schedule(&ctx, &m, &zeta, 12, tau, GType::G2 { alpha: 1.0 }, UnConvention::Proof).unwrap();
        values.push(sample_cylinder_maxima(&tent, &m, &s, 20_000, &SeedTree::new(6, &format!("m{tau}")), false).unwrap().estimate());
    }
    let a = Target::new(&tent, &m, TargetSpec::Cylinder { zeta, depth: 12 }).unwrap();
    let (_, g) = hts_law(&tent, &m, &a, &taus, 20_000, HitOptions::default(), &SeedTree::new(6, "h")).unwrap();
    let d = check_cylinder_equivalence(
        &GridEstimate::binomial(taus.clone(), values, 20_000),
        &GridEstimate::binomial(taus, g, 20_000),
    )
    .unwrap();
    assert!(d.sup <= 0.025, "{d:?}");
}

#[test]
fn ks_calibration_on_exponential_draws() {
    let crit = ks_critical(10_000, 0.01);
    assert!((crit - 0.0163).abs() < 1e-4, "{crit}");
    let mut below = 0;
    for rep in 0..100 {
        let mut rng = SeedTree::new(7, "ks").stream(rep);
        let draws: Vec<f64> = (0..10_000).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        if EmpiricalLaw::new(draws).ks_distance(&ReferenceLaw::Exponential).unwrap() < crit {
            below += 1;
        }
    }
    assert!(below >= 98, "{below}");
}

#[test]
fn atypical_centre_entropy() {
    let dbl = MapSystem::doubling(Backend::BitStream).unwrap();
    let m = MeasureModel::bernoulli(&dbl, 0.3).unwrap();
    let ctx = PartitionContext::new(dbl, 500).unwrap();
    for n in [1, 10, 500] {
        let h = ctx.smb_estimate(&m, &PointRep::Real(0.0), n).unwrap();
        assert!((h + 0.3f64.ln()).abs() < 1e-12, "{h}");
    }
}
