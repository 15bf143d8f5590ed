//! The named experiments.

use std::collections::BTreeMap;

use evlhts::cylinder::PartitionContext;
use evlhts::evl::{
    cylinder_schedule, sample_block_maxima, sample_cylinder_maxima, Construction, NormalizingSeq, UnConvention,
};
use evlhts::hitting::{hts_from_rts, hts_law, kac_check, rts_law, HitOptions, HittingSample};
use evlhts::measure::{MeasureKind, MeasureModel};
use evlhts::observable::{GType, Observable};
use evlhts::rng::SeedTree;
use evlhts::stats::{
    check_cylinder_equivalence, check_evl_from_hts, ks_critical, Discrepancy, EmpiricalLaw, GridEstimate,
    ReferenceLaw,
};
use evlhts::system::{Backend, MapKind, MapSystem, Metric, PointRep};
use evlhts::target::{Target, TargetSpec};
use evlhts::conditions::{dcond_gamma_estimate, default_gap, dprime_estimate};
use serde_json::json;

use crate::config::{Config, NumOrName};
use crate::error::CliError;
use crate::report::{Check, Comparison, Estimate, Ks, Report};

pub const EXPERIMENTS: [&str; 9] = [
    "evl-balls",
    "evl-cylinders",
    "hts",
    "rts",
    "kac",
    "conditions",
    "smb",
    "equivalence",
    "rotation-subseq",
];

/// Spread of the one-sample KS statistic under the null, times `sqrt(n)`.
const KS_SPREAD: f64 = 0.26;

fn config_err(e: evlhts::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn binomial_se(p: f64, samples: usize) -> f64 {
    (p * (1.0 - p) / samples as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum IidMode {
    Off,
    On,
    Compare,
}

/// Everything an experiment needs, resolved from the configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub system: MapSystem,
    pub measure: MeasureModel,
    pub gtype: GType,
    pub zeta: PointRep,
    pub cylinder_mode: bool,
}

pub fn build_system(cfg: &Config) -> Result<MapSystem, CliError> {
    let c = &cfg.system;
    let kind = match c.kind.as_str() {
        "tent" | "full-tent" => MapKind::FullTent,
        "doubling" => MapKind::Doubling,
        "rotation" => MapKind::Rotation,
        "manneville-pomeau" | "mp" => MapKind::MannevillePomeau,
        other => {
            return Err(CliError::Config(format!(
                "unknown system.kind \"{other}\"; expected tent, doubling, rotation or manneville-pomeau"
            )))
        }
    };
    let backend = match c.backend.as_str() {
        "auto" => match kind {
            MapKind::FullTent | MapKind::Doubling if cfg.measure.kind != "empirical-orbit" => Backend::BitStream,
            _ => Backend::Float64,
        },
        "bitstream" => Backend::BitStream,
        "float64" => Backend::Float64,
        other => return Err(CliError::Config(format!("unknown system.backend \"{other}\""))),
    };
    let sys = match kind {
        MapKind::FullTent => MapSystem::full_tent(backend),
        MapKind::Doubling => MapSystem::doubling(backend),
        MapKind::Rotation => match &c.alpha {
            NumOrName::Name(n) if n == "golden" => MapSystem::golden_rotation().with_backend(backend),
            NumOrName::Num(a) => MapSystem::rotation(*a).and_then(|s| s.with_backend(backend)),
            other => return Err(CliError::Config(format!("system.alpha must be a number or \"golden\", got {other:?}"))),
        },
        MapKind::MannevillePomeau => MapSystem::manneville_pomeau(c.s).and_then(|s| s.with_backend(backend)),
    }
    .map_err(config_err)?;
    Ok(match c.metric.as_str() {
        "auto" => sys,
        "interval" => sys.with_metric(Metric::Interval),
        "circle" => sys.with_metric(Metric::Circle),
        other => return Err(CliError::Config(format!("unknown system.metric \"{other}\""))),
    })
}

pub fn build_measure(cfg: &Config, system: &MapSystem) -> Result<MeasureModel, CliError> {
    let m = &cfg.measure;
    match m.kind.as_str() {
        "lebesgue" => MeasureModel::lebesgue(system),
        "bernoulli" => MeasureModel::bernoulli(system, m.p),
        "empirical-orbit" => MeasureModel::empirical_orbit(
            system,
            m.burn_in,
            m.orbit_len,
            &SeedTree::new(cfg.master_seed, "empirical-orbit"),
        ),
        other => return Err(CliError::Config(format!("unknown measure.kind \"{other}\""))),
    }
    .map_err(config_err)
}

pub fn build_gtype(cfg: &Config) -> Result<GType, CliError> {
    let o = &cfg.observable;
    match o.kind.as_str() {
        "g1" => GType::G1,
        "g2" => GType::G2 { alpha: o.alpha },
        "g3" => GType::G3 { d: o.d, alpha: o.alpha },
        other => return Err(CliError::Config(format!("unknown observable.type \"{other}\""))),
    }
    .validate()
    .map_err(config_err)
}

pub fn setup(cfg: &Config) -> Result<Setup, CliError> {
    let system = build_system(cfg)?;
    let measure = build_measure(cfg, &system)?;
    let gtype = build_gtype(cfg)?;
    let zeta = match &cfg.observable.zeta {
        NumOrName::Num(z) if system.contains(*z) || *z == 1.0 => PointRep::Real(*z),
        NumOrName::Num(z) => return Err(CliError::Config(format!("observable.zeta = {z} is outside the phase space"))),
        NumOrName::Name(n) if n == "typical" => {
            let mut rng = SeedTree::new(cfg.master_seed, "typical-centre").stream(0);
            measure.sample_stationary(&mut rng)
        }
        other => return Err(CliError::Config(format!("observable.zeta must be a number or \"typical\", got {other:?}"))),
    };
    let cylinder_mode = match cfg.observable.mode.as_str() {
        "ball" => false,
        "cylinder" => true,
        other => return Err(CliError::Config(format!("unknown observable.mode \"{other}\""))),
    };
    validate_shared(cfg)?;
    Ok(Setup {
        system,
        measure,
        gtype,
        zeta,
        cylinder_mode,
    })
}

fn validate_shared(cfg: &Config) -> Result<(), CliError> {
    let bad = |m: &str| Err(CliError::Config(m.to_string()));
    if cfg.evl.samples == 0 || cfg.hts.samples == 0 || cfg.conditions.samples == 0 {
        return bad("sample counts must be positive");
    }
    if !(cfg.hts.cap_factor > 0.0) {
        return bad("hts.cap_factor must be positive");
    }
    if cfg.hts.t_grid.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return bad("hts.t_grid must hold finite non-negative times");
    }
    if cfg.evl.tau_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return bad("evl.tau_grid must hold finite positive values");
    }
    if cfg.hts.mass_list.iter().any(|&m| !(m > 0.0 && m <= 1.0)) {
        return bad("hts.mass_list entries must lie in (0, 1]");
    }
    iid_mode(cfg)?;
    construction(cfg)?;
    un_convention(cfg)?;
    cfg.tolerance_or(0.0)?;
    if !["any", "consistent-with-zero", "non-vanishing"].contains(&cfg.conditions.expect.as_str()) {
        return bad("conditions.expect must be any, consistent-with-zero or non-vanishing");
    }
    if !["ball", "cylinder"].contains(&cfg.hts.target.as_str()) {
        return bad("hts.target must be ball or cylinder");
    }
    Ok(())
}

fn iid_mode(cfg: &Config) -> Result<IidMode, CliError> {
    match cfg.evl.iid_mode.as_str() {
        "off" | "false" => Ok(IidMode::Off),
        "on" | "true" => Ok(IidMode::On),
        "compare" => Ok(IidMode::Compare),
        other => Err(CliError::Config(format!("evl.iid_mode must be off, on or compare, got \"{other}\""))),
    }
}

fn construction(cfg: &Config) -> Result<Construction, CliError> {
    match cfg.evl.construction.as_str() {
        "proof" => Ok(Construction::Proof),
        "quantile" => Ok(Construction::Quantile),
        other => Err(CliError::Config(format!("evl.construction must be proof or quantile, got \"{other}\""))),
    }
}

fn un_convention(cfg: &Config) -> Result<UnConvention, CliError> {
    match cfg.evl.un_convention.as_str() {
        "proof" => Ok(UnConvention::Proof),
        "narrative" => Ok(UnConvention::Narrative),
        other => Err(CliError::Config(format!("evl.un_convention must be proof or narrative, got \"{other}\""))),
    }
}

fn default_y_grid(g: GType) -> Vec<f64> {
    match g {
        GType::G1 => vec![-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
        GType::G2 { .. } => vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0],
        GType::G3 { .. } => vec![-4.0, -3.0, -2.0, -1.5, -1.0, -0.75, -0.5, -0.25, -0.1],
    }
}

fn y_grid(cfg: &Config, g: GType) -> Vec<f64> {
    if cfg.evl.y_grid.is_empty() {
        default_y_grid(g)
    } else {
        cfg.evl.y_grid.clone()
    }
}

fn describe_system(s: &MapSystem) -> serde_json::Value {
    let mut v = json!({
        "kind": s.kind().name(),
        "metric": match s.metric() { Metric::Interval => "interval", Metric::Circle => "circle" },
        "backend": s.backend().name(),
    });
    match s.kind() {
        MapKind::Rotation => v["alpha"] = json!(s.alpha()),
        MapKind::MannevillePomeau => v["s"] = json!(s.intermittency()),
        _ => {}
    }
    v
}

fn describe_measure(m: &MeasureModel) -> serde_json::Value {
    match m.kind() {
        MeasureKind::Lebesgue => json!({ "kind": "lebesgue" }),
        MeasureKind::Bernoulli { p } => json!({ "kind": "bernoulli", "p": p }),
        MeasureKind::EmpiricalOrbit(o) => {
            json!({ "kind": "empirical-orbit", "orbit_len": o.len(), "burn_in": o.burn_in() })
        }
    }
}

fn describe_observable(s: &Setup, cfg: &Config) -> serde_json::Value {
    let mut v = json!({
        "type": s.gtype.name(),
        "mode": if s.cylinder_mode { "cylinder" } else { "ball" },
        "zeta": s.zeta.coordinate(),
        "zeta_source": match cfg.observable.zeta { NumOrName::Num(_) => "config", NumOrName::Name(_) => "typical" },
    });
    match s.gtype {
        GType::G1 => {}
        GType::G2 { alpha } => v["alpha"] = json!(alpha),
        GType::G3 { d, alpha } => {
            v["alpha"] = json!(alpha);
            v["D"] = json!(d);
        }
    }
    v
}

struct Run<'a> {
    cfg: &'a Config,
    s: Setup,
    seeds: SeedTree,
    r: Report,
}

/// Resolves the configuration and runs one named experiment. The caller
/// decides the worker pool; results do not depend on it.
pub fn run(experiment: &str, cfg: &Config) -> Result<Report, CliError> {
    if !EXPERIMENTS.contains(&experiment) {
        let hint = EXPERIMENTS
            .iter()
            .min_by_key(|e| strsim::levenshtein(e, experiment))
            .map(|e| format!("; did you mean \"{e}\"?"))
            .unwrap_or_default();
        return Err(CliError::Config(format!("unknown experiment \"{experiment}\"{hint}")));
    }
    let s = setup(cfg)?;
    let r = Report {
        experiment: experiment.into(),
        system: describe_system(&s.system),
        measure: describe_measure(&s.measure),
        observable: describe_observable(&s, cfg),
        grids: BTreeMap::new(),
        estimates: Vec::new(),
        ks: None,
        verdict: String::new(),
        checks: Vec::new(),
        notes: Vec::new(),
        config: cfg.materialized(),
    };
    let mut run = Run {
        cfg,
        s,
        seeds: SeedTree::new(cfg.master_seed, experiment),
        r,
    };
    match experiment {
        "evl-balls" => run.evl_balls()?,
        "evl-cylinders" => run.evl_cylinders()?,
        "hts" => run.hts()?,
        "rts" => run.rts()?,
        "kac" => run.kac()?,
        "conditions" => run.conditions()?,
        "smb" => run.smb()?,
        "equivalence" => run.equivalence()?,
        "rotation-subseq" => run.rotation_subseq()?,
        _ => unreachable!(),
    }
    run.r.finish();
    Ok(run.r)
}

impl Run<'_> {
    fn zeta_f64(&self) -> f64 {
        self.s.zeta.coordinate()
    }

    fn ball_observable(&self) -> Result<Observable, CliError> {
        if self.s.cylinder_mode {
            return Err(CliError::Config("this experiment needs observable.mode = \"ball\"".into()));
        }
        Observable::ball(self.s.gtype, self.s.measure.clone(), self.zeta_f64()).map_err(config_err)
    }

    fn partition(&self) -> Result<PartitionContext, CliError> {
        PartitionContext::new(self.s.system, self.cfg.cylinders.max_depth).map_err(config_err)
    }

    fn hit_options(&self) -> HitOptions {
        HitOptions {
            cap_factor: self.cfg.hts.cap_factor,
            from_zero: self.cfg.hts.hit_from_zero,
        }
    }

    fn reference_exp(&mut self, grid: &[f64]) {
        for &t in grid {
            self.r.estimates.push(Estimate::exact("exp(-t)", t, (-t).exp()));
        }
    }

    fn discrepancy_check(&mut self, name: String, d: &Discrepancy, bound: f64) {
        let i = d
            .diffs
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > d.diffs[best].abs() { i } else { best });
        self.r
            .checks
            .push(Check::new(name, d.sup, Some(d.stderr[i]), Comparison::AtMost, bound));
    }

    fn ball_target(&self, mass: f64) -> Result<Target, CliError> {
        let zeta = self.zeta_f64();
        let eta = self.s.measure.quantile_radius(zeta, mass).map_err(config_err)?;
        Ok(Target::new(&self.s.system, &self.s.measure, TargetSpec::Ball { zeta, eta })?)
    }

    fn targets(&self) -> Result<Vec<(String, Target)>, CliError> {
        let h = &self.cfg.hts;
        let out = if h.target == "ball" {
            h.mass_list
                .iter()
                .map(|&m| Ok((format!("mass={m}"), self.ball_target(m)?)))
                .collect::<Result<Vec<_>, CliError>>()?
        } else {
            h.depth_list
                .iter()
                .map(|&d| {
                    let spec = TargetSpec::Cylinder { zeta: self.s.zeta.clone(), depth: d };
                    Ok((format!("depth={d}"), Target::new(&self.s.system, &self.s.measure, spec).map_err(config_err)?))
                })
                .collect::<Result<Vec<_>, CliError>>()?
        };
        if out.is_empty() {
            return Err(CliError::Config("no targets: set hts.mass_list or hts.depth_list".into()));
        }
        Ok(out)
    }

    fn evl_balls(&mut self) -> Result<(), CliError> {
        let obs = self.ball_observable()?;
        let g = self.s.gtype;
        let ys = y_grid(self.cfg, g);
        let tol = self.cfg.tolerance_or(0.03)?;
        let mode = iid_mode(self.cfg)?;
        let samples = self.cfg.evl.samples;
        let reference = ReferenceLaw::for_gtype(g);
        self.r.grids.insert("y".into(), ys.clone());
        self.r.grids.insert("n".into(), self.cfg.evl.n_list.iter().map(|&n| n as f64).collect());
        for &y in &ys {
            self.r.estimates.push(Estimate::exact(reference.name(), y, reference.cdf(y)));
        }
        for &n in &self.cfg.evl.n_list.clone() {
            let seq = match construction(self.cfg)? {
                Construction::Proof => NormalizingSeq::proof(g, n),
                Construction::Quantile => NormalizingSeq::quantile(&obs, n)?,
            };
            let sample = sample_block_maxima(
                &self.s.system,
                &obs,
                n,
                samples,
                &self.seeds.child(&format!("maxima-{n}")),
                mode == IidMode::On,
            )?;
            let law = EmpiricalLaw::new(sample.normalized(&seq));
            let ks = law.ks_distance(&reference)?;
            let spread = KS_SPREAD / (samples as f64).sqrt();
            self.r
                .checks
                .push(Check::new(format!("ks to {} at n={n}", reference.name()), ks, Some(spread), Comparison::AtMost, tol));
            if self.r.ks.as_ref().map_or(true, |k| ks > k.stat) {
                self.r.ks = Some(Ks { stat: ks, critical_1pct: ks_critical(samples, 0.01), samples });
            }
            if sample.overflow > 0 {
                self.r.notes.push(format!("n={n}: {} maxima hit the resolution limit", sample.overflow));
            }
            let mut probs = Vec::with_capacity(ys.len());
            for &y in &ys {
                let p = sample.prob_le(&obs, seq.threshold(y))?;
                probs.push(p);
                self.r
                    .estimates
                    .push(Estimate::sampled(format!("H n={n}"), y, p, binomial_se(p, samples)));
            }
            if mode == IidMode::Compare {
                let iid = sample_block_maxima(&self.s.system, &obs, n, samples, &self.seeds.child(&format!("iid-{n}")), true)?;
                let mut diffs = Vec::with_capacity(ys.len());
                let mut errs = Vec::with_capacity(ys.len());
                for (&y, &p) in ys.iter().zip(&probs) {
                    let q = iid.prob_le(&obs, seq.threshold(y))?;
                    let se = binomial_se(q, samples);
                    self.r.estimates.push(Estimate::sampled(format!("H iid n={n}"), y, q, se));
                    diffs.push(p - q);
                    errs.push(binomial_se(p, samples).hypot(se));
                }
                let sup = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
                let d = Discrepancy { points: ys.clone(), diffs, stderr: errs, sup };
                self.discrepancy_check(format!("dynamical vs iid at n={n}"), &d, tol);
            }
        }
        Ok(())
    }

    fn evl_cylinders(&mut self) -> Result<(), CliError> {
        let ctx = self.partition()?;
        let tol = self.cfg.tolerance_or(0.02)?;
        let mode = iid_mode(self.cfg)?;
        let conv = un_convention(self.cfg)?;
        let samples = self.cfg.evl.samples;
        let taus = self.cfg.evl.tau_grid.clone();
        self.r.grids.insert("tau".into(), taus.clone());
        self.r.grids.insert("depth".into(), self.cfg.evl.n_list.iter().map(|&n| n as f64).collect());
        self.reference_exp(&taus);
        for &n in &self.cfg.evl.n_list.clone() {
            for &tau in &taus {
                let sched =
                    cylinder_schedule(&ctx, &self.s.measure, &self.s.zeta, n as usize, tau, self.s.gtype, conv)?;
                let label = format!("cyl-{n}-{tau}");
                let m = sample_cylinder_maxima(
                    &self.s.system,
                    &self.s.measure,
                    &sched,
                    samples,
                    &self.seeds.child(&label),
                    mode == IidMode::On,
                )?;
                let (p, se) = (m.estimate(), m.stderr());
                self.r.estimates.push(Estimate::sampled(format!("P(M<=u) depth={n}"), tau, p, se));
                let iid_exact = (sched.omega as f64 * (-sched.event_mass).ln_1p()).exp();
                self.r
                    .estimates
                    .push(Estimate::exact(format!("iid closed form depth={n}"), tau, iid_exact));
                self.r.checks.push(Check::new(
                    format!("|P - exp(-tau)| at depth={n}, tau={tau}"),
                    (p - (-tau).exp()).abs(),
                    Some(se),
                    Comparison::AtMost,
                    tol,
                ));
                if mode == IidMode::Compare {
                    let iid = sample_cylinder_maxima(
                        &self.s.system,
                        &self.s.measure,
                        &sched,
                        samples,
                        &self.seeds.child(&format!("{label}-iid")),
                        true,
                    )?;
                    let q = iid.estimate();
                    self.r
                        .estimates
                        .push(Estimate::sampled(format!("P(iid M<=u) depth={n}"), tau, q, iid.stderr()));
                    self.r.checks.push(Check::new(
                        format!("dynamical vs iid at depth={n}, tau={tau}"),
                        (p - q).abs(),
                        Some(se.hypot(iid.stderr())),
                        Comparison::AtMost,
                        tol,
                    ));
                }
            }
        }
        Ok(())
    }

    fn hts(&mut self) -> Result<(), CliError> {
        let tol = self.cfg.tolerance_or(0.03)?;
        let grid = self.cfg.hts.t_grid.clone();
        let samples = self.cfg.hts.samples;
        self.r.grids.insert("t".into(), grid.clone());
        self.reference_exp(&grid);
        for (label, target) in self.targets()? {
            let (sample, surv) = hts_law(
                &self.s.system,
                &self.s.measure,
                &target,
                &grid,
                samples,
                self.hit_options(),
                &self.seeds.child(&label),
            )?;
            self.record_law(&label, "G", &grid, &surv, &sample, tol)?;
        }
        Ok(())
    }

    /// Records a survival function and checks it against `exp(-t)`.
    fn record_law(
        &mut self,
        label: &str,
        name: &str,
        grid: &[f64],
        surv: &[f64],
        sample: &HittingSample,
        tol: f64,
    ) -> Result<(), CliError> {
        let n = sample.len();
        let mut diffs = Vec::new();
        let mut errs = Vec::new();
        for (&t, &g) in grid.iter().zip(surv) {
            let se = binomial_se(g, n);
            self.r.estimates.push(Estimate::sampled(format!("{name} {label}"), t, g, se));
            diffs.push(g - (-t).exp());
            errs.push(se);
        }
        let censored = sample.censored_count() as f64 / n as f64;
        self.r.estimates.push(Estimate::sampled(
            format!("censored fraction {label}"),
            sample.t_max as f64,
            censored,
            binomial_se(censored, n),
        ));
        let law = EmpiricalLaw::with_censored(sample.normalized(), sample.censored_count());
        let ks = law.ks_distance(&ReferenceLaw::Exponential)?;
        if self.r.ks.as_ref().map_or(true, |k| ks > k.stat) {
            self.r.ks = Some(Ks { stat: ks, critical_1pct: ks_critical(n, 0.01), samples: n });
        }
        let sup = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let d = Discrepancy { points: grid.to_vec(), diffs, stderr: errs, sup };
        self.discrepancy_check(format!("sup |{name} - exp(-t)| for {label}"), &d, tol);
        Ok(())
    }

    fn rts(&mut self) -> Result<(), CliError> {
        let tol = self.cfg.tolerance_or(0.03)?;
        let samples = self.cfg.hts.samples;
        let top = self.cfg.hts.t_grid.iter().copied().fold(0.0f64, f64::max);
        if !(top > 0.0) {
            return Err(CliError::Config("hts.t_grid needs a positive time".into()));
        }
        let steps = (top / 0.01).ceil() as usize;
        let fine: Vec<f64> = (0..=steps).map(|i| top * i as f64 / steps as f64).collect();
        self.r.grids.insert("t".into(), self.cfg.hts.t_grid.clone());
        let opts = self.hit_options();
        for (label, target) in self.targets()? {
            let (rs, _) = rts_law(
                &self.s.system,
                &self.s.measure,
                &target,
                &fine,
                samples,
                opts,
                &self.seeds.child(&format!("rts-{label}")),
            )?;
            let (hs, _) = hts_law(
                &self.s.system,
                &self.s.measure,
                &target,
                &fine,
                samples,
                opts,
                &self.seeds.child(&format!("hts-{label}")),
            )?;
            let rts_law_emp = EmpiricalLaw::with_censored(rs.normalized(), rs.censored_count());
            let hts_law_emp = EmpiricalLaw::with_censored(hs.normalized(), hs.censored_count());
            let rts_df: Vec<f64> = fine.iter().map(|&t| rts_law_emp.ecdf(t)).collect();
            let direct: Vec<f64> = fine.iter().map(|&t| hts_law_emp.ecdf(t)).collect();
            let pushed = hts_from_rts(&fine, &rts_df)?;
            let mut diffs = Vec::with_capacity(fine.len());
            let mut errs = Vec::with_capacity(fine.len());
            for ((&t, &a), &b) in fine.iter().zip(&pushed).zip(&direct) {
                diffs.push(a - b);
                // the integral of the RTS error is at most t times its largest stderr
                errs.push(binomial_se(b, samples).hypot(t * 0.5 / (samples as f64).sqrt()));
            }
            let sup = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            for &t in &self.cfg.hts.t_grid {
                let i = ((t / top) * steps as f64).round() as usize;
                self.r.estimates.push(Estimate::sampled(
                    format!("RTS df {label}"),
                    t,
                    rts_df[i],
                    binomial_se(rts_df[i], samples),
                ));
                self.r.estimates.push(Estimate::sampled(format!("HTS df from RTS {label}"), t, pushed[i], errs[i]));
                self.r.estimates.push(Estimate::sampled(
                    format!("HTS df direct {label}"),
                    t,
                    direct[i],
                    binomial_se(direct[i], samples),
                ));
            }
            let d = Discrepancy { points: fine.clone(), diffs, stderr: errs, sup };
            self.discrepancy_check(format!("sup |transformed RTS - HTS| for {label}"), &d, tol);
        }
        Ok(())
    }

    fn kac(&mut self) -> Result<(), CliError> {
        let tol = self.cfg.tolerance_or(0.03)?;
        for (label, target) in self.targets()? {
            let k = kac_check(
                &self.s.system,
                &self.s.measure,
                &target,
                self.cfg.hts.samples,
                self.hit_options(),
                &self.seeds.child(&label),
            )?;
            self.r.estimates.push(Estimate::exact(format!("target mass {label}"), target.mass(), target.mass()));
            self.r
                .estimates
                .push(Estimate::sampled(format!("mean return time {label}"), target.mass(), k.mean, k.ratio_stderr / target.mass()));
            self.r
                .estimates
                .push(Estimate::sampled(format!("kac ratio {label}"), target.mass(), k.ratio, k.ratio_stderr));
            if k.censored > 0 {
                self.r.notes.push(format!("{label}: {} censored return times excluded", k.censored));
            }
            self.r.checks.push(Check::new(
                format!("|kac ratio - 1| for {label}"),
                (k.ratio - 1.0).abs(),
                Some(k.ratio_stderr),
                Comparison::AtMost,
                tol,
            ));
        }
        Ok(())
    }

    fn condition_event(&self) -> Result<Target, CliError> {
        let c = &self.cfg.conditions;
        if c.n == 0 || !(c.tau > 0.0) || c.tau > c.n as f64 {
            return Err(CliError::Config("conditions need n >= 1 and 0 < tau <= n".into()));
        }
        let mass = c.tau / c.n as f64;
        if !self.s.cylinder_mode {
            return self.ball_target(mass);
        }
        let ctx = self.partition()?;
        for depth in 0..=ctx.max_depth() {
            let cyl = ctx.cylinder_at(&self.s.measure, &self.s.zeta, depth).map_err(config_err)?;
            if cyl.mass() <= mass {
                let spec = TargetSpec::Cylinder { zeta: self.s.zeta.clone(), depth };
                return Target::new(&self.s.system, &self.s.measure, spec).map_err(config_err);
            }
        }
        Err(CliError::Config(format!("no cylinder up to cylinders.max_depth has mass below {mass}")))
    }

    fn conditions(&mut self) -> Result<(), CliError> {
        let c = self.cfg.conditions.clone();
        let event = self.condition_event()?;
        let iid = iid_mode(self.cfg)? == IidMode::On;
        if c.samples < 300 {
            return Err(CliError::Config("conditions.samples must be at least 300".into()));
        }
        self.r.grids.insert("k".into(), c.k_list.iter().map(|&k| k as f64).collect());
        self.r
            .estimates
            .push(Estimate::exact("event mass", c.n as f64, event.mass()));
        for &k in &c.k_list {
            let rep = dprime_estimate(
                &self.s.system,
                &self.s.measure,
                &event,
                c.n,
                k,
                c.samples,
                &self.seeds.child(&format!("dprime-{k}")),
                iid,
            )?;
            let x = k as f64;
            self.r.estimates.push(Estimate::sampled("dprime", x, rep.estimate, rep.stderr));
            self.r.estimates.push(Estimate::exact("dprime iid baseline", x, rep.iid_baseline));
            self.r.estimates.push(Estimate::sampled("dprime excess", x, rep.excess(), rep.stderr));
            self.r.notes.push(format!("k={k}: dprime verdict {}", rep.verdict.name()));
            if c.expect != "any" {
                let matched = if rep.verdict.name() == c.expect { 1.0 } else { 0.0 };
                self.r.checks.push(Check::new(
                    format!("dprime verdict at k={k} is {}", c.expect),
                    matched,
                    None,
                    Comparison::Equals,
                    1.0,
                ));
            }
        }
        let block_len = if c.block_len == 0 { c.n } else { c.block_len };
        let gaps = if c.t_grid.is_empty() { vec![default_gap(c.n, c.tn_exponent)] } else { c.t_grid.clone() };
        self.r.grids.insert("gap".into(), gaps.iter().map(|&g| g as f64).collect());
        for &gap in &gaps {
            let est = dcond_gamma_estimate(
                &self.s.system,
                &self.s.measure,
                &event,
                c.n,
                block_len,
                gap,
                c.samples,
                &self.seeds.child(&format!("gamma-{gap}")),
                iid,
            )?;
            let x = gap as f64;
            self.r.estimates.push(Estimate::sampled("gamma", x, est.gamma, est.stderr));
            self.r.estimates.push(Estimate::sampled("n gamma", x, est.scaled, est.scaled_stderr));
            self.r.notes.push(format!("gap={gap}: mixing verdict {}", est.verdict.name()));
        }
        Ok(())
    }

    fn smb(&mut self) -> Result<(), CliError> {
        let ctx = self.partition()?;
        let tol = self.cfg.tolerance_or(0.05)?;
        let depths = if self.cfg.hts.depth_list.is_empty() {
            vec![self.cfg.cylinders.max_depth]
        } else {
            self.cfg.hts.depth_list.clone()
        };
        self.r.grids.insert("depth".into(), depths.iter().map(|&d| d as f64).collect());
        let dyadic = matches!(self.s.system.kind(), MapKind::FullTent | MapKind::Doubling);
        let entropy = match (self.s.measure.kind(), self.s.system.kind()) {
            (MeasureKind::Lebesgue, MapKind::FullTent | MapKind::Doubling) => Some(std::f64::consts::LN_2),
            (MeasureKind::Bernoulli { p }, _) => Some(-p * p.ln() - (1.0 - p) * (1.0 - p).ln()),
            (MeasureKind::Lebesgue, MapKind::Rotation) => Some(0.0),
            _ => None,
        };
        let weights = self.s.measure.digit_log_weights().filter(|_| dyadic);
        let mut last = None;
        for &d in &depths {
            let est = ctx.smb_estimate(&self.s.measure, &self.s.zeta, d)?;
            let e = match (self.s.measure.kind(), weights) {
                (MeasureKind::Bernoulli { p }, Some(_)) => {
                    let se = (p / (1.0 - p)).ln().abs() * (p * (1.0 - p) / d as f64).sqrt();
                    Estimate::sampled("smb", d as f64, est, se)
                }
                _ => Estimate::exact("smb", d as f64, est),
            };
            last = Some(e.clone());
            self.r.estimates.push(e);
            if let Some((w0, w1)) = weights {
                let ratio = ctx.gibbs_envelope(&self.s.measure, [w0, w1], 0.0, &self.s.zeta, d)?;
                self.r.estimates.push(Estimate::exact("gibbs ratio", d as f64, ratio));
                self.r
                    .checks
                    .push(Check::new(format!("gibbs ratio at depth={d}"), ratio, None, Comparison::Equals, 1.0));
            }
        }
        if let Some(h) = entropy {
            for &d in &depths {
                self.r.estimates.push(Estimate::exact("entropy", d as f64, h));
            }
            let e = last.expect("at least one depth");
            let exact_case = weights.is_some_and(|(w0, w1)| w0 == w1);
            if exact_case {
                self.r.checks.push(Check::new("smb equals entropy", e.value, None, Comparison::Equals, h));
            } else {
                self.r.checks.push(Check::new(
                    format!("|smb - entropy| at depth={}", e.x),
                    (e.value - h).abs(),
                    e.stderr,
                    Comparison::AtMost,
                    tol,
                ));
            }
        } else {
            self.r.notes.push("no closed-form entropy for this system and measure".into());
        }
        Ok(())
    }

    fn equivalence(&mut self) -> Result<(), CliError> {
        let tol = self.cfg.tolerance_or(0.04)?;
        let n = *self
            .cfg
            .evl
            .n_list
            .first()
            .ok_or_else(|| CliError::Config("evl.n_list is empty".into()))?;
        let opts = self.hit_options();
        if self.s.cylinder_mode {
            return self.cylinder_equivalence(n as usize, tol, opts);
        }
        let obs = self.ball_observable()?;
        let g = self.s.gtype;
        let ys = y_grid(self.cfg, g);
        let seq = match construction(self.cfg)? {
            Construction::Proof => NormalizingSeq::proof(g, n),
            Construction::Quantile => NormalizingSeq::quantile(&obs, n)?,
        };
        let samples = self.cfg.evl.samples;
        let maxima = sample_block_maxima(&self.s.system, &obs, n, samples, &self.seeds.child("maxima"), false)?;
        let hv = ys
            .iter()
            .map(|&y| maxima.prob_le(&obs, seq.threshold(y)))
            .collect::<evlhts::Result<Vec<_>>>()?;
        let h = GridEstimate::binomial(ys.clone(), hv, samples);

        let mut ts: Vec<f64> = ys.iter().map(|&y| g.tau(y)).filter(|t| t.is_finite() && *t > 0.0).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        if ts.is_empty() {
            return Err(CliError::Config("evl.y_grid gives no finite positive tau".into()));
        }
        let target = self.ball_target(1.0 / n as f64)?;
        let (hits, gv) = hts_law(
            &self.s.system,
            &self.s.measure,
            &target,
            &ts,
            self.cfg.hts.samples,
            opts,
            &self.seeds.child("hitting"),
        )?;
        let gest = GridEstimate::binomial(ts.clone(), gv, hits.len());
        let d = check_evl_from_hts(&h, &gest, g)?;
        self.r.grids.insert("y".into(), ys.clone());
        self.r.grids.insert("t".into(), ts);
        for (i, &y) in ys.iter().enumerate() {
            self.r.estimates.push(Estimate::sampled("H(y)", y, h.values[i], h.stderr[i]));
            self.r
                .estimates
                .push(Estimate::sampled("G(tau(y))", y, h.values[i] - d.diffs[i], d.stderr[i]));
            self.r.estimates.push(Estimate::sampled("H - G", y, d.diffs[i], d.stderr[i]));
        }
        self.discrepancy_check("sup |H(y) - G(tau(y))|".into(), &d, tol);
        Ok(())
    }

    fn cylinder_equivalence(&mut self, depth: usize, tol: f64, opts: HitOptions) -> Result<(), CliError> {
        let ctx = self.partition()?;
        let conv = un_convention(self.cfg)?;
        let mut taus = self.cfg.evl.tau_grid.clone();
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        let samples = self.cfg.evl.samples;
        let mut values = Vec::with_capacity(taus.len());
        let mut event_depth = depth;
        for &tau in &taus {
            let sched = cylinder_schedule(&ctx, &self.s.measure, &self.s.zeta, depth, tau, self.s.gtype, conv)?;
            event_depth = sched.event_depth;
            let m = sample_cylinder_maxima(
                &self.s.system,
                &self.s.measure,
                &sched,
                samples,
                &self.seeds.child(&format!("maxima-{tau}")),
                false,
            )?;
            values.push(m.estimate());
        }
        let maxima = GridEstimate::binomial(taus.clone(), values, samples);
        let spec = TargetSpec::Cylinder { zeta: self.s.zeta.clone(), depth: event_depth };
        let target = Target::new(&self.s.system, &self.s.measure, spec)?;
        let (hits, gv) = hts_law(
            &self.s.system,
            &self.s.measure,
            &target,
            &taus,
            self.cfg.hts.samples,
            opts,
            &self.seeds.child("hitting"),
        )?;
        let hts = GridEstimate::binomial(taus.clone(), gv, hits.len());
        let d = check_cylinder_equivalence(&maxima, &hts)?;
        self.r.grids.insert("tau".into(), taus.clone());
        for (i, &t) in taus.iter().enumerate() {
            self.r.estimates.push(Estimate::sampled("P(M<=u)", t, maxima.values[i], maxima.stderr[i]));
            self.r.estimates.push(Estimate::sampled("G_cyl", t, hts.values[i], hts.stderr[i]));
        }
        self.discrepancy_check("sup |P(M<=u) - G_cyl(tau)|".into(), &d, tol);
        Ok(())
    }

    fn rotation_subseq(&mut self) -> Result<(), CliError> {
        if self.s.system.kind() != MapKind::Rotation {
            return Err(CliError::Config("rotation-subseq needs system.kind = \"rotation\"".into()));
        }
        let tol = self.cfg.tolerance_or(0.1)?;
        let max_depth = self.cfg.cylinders.max_depth;
        let mut depths: Vec<usize> = if self.cfg.hts.depth_list.is_empty() {
            self.s
                .system
                .convergent_denominators(64)
                .into_iter()
                .map(|q| q as usize)
                .filter(|&q| (5..=max_depth).contains(&q))
                .collect()
        } else {
            self.cfg.hts.depth_list.clone()
        };
        depths.dedup();
        if depths.is_empty() {
            return Err(CliError::Config("no convergent denominators between 5 and cylinders.max_depth".into()));
        }
        let grid = self.cfg.hts.t_grid.clone();
        let samples = self.cfg.hts.samples;
        self.r.grids.insert("t".into(), grid.clone());
        self.r.grids.insert("depth".into(), depths.iter().map(|&d| d as f64).collect());
        self.reference_exp(&grid);
        let mut weakest: Option<Ks> = None;
        for &q in &depths {
            let spec = TargetSpec::Cylinder { zeta: self.s.zeta.clone(), depth: q };
            let target = Target::new(&self.s.system, &self.s.measure, spec)?;
            let (sample, surv) = hts_law(
                &self.s.system,
                &self.s.measure,
                &target,
                &grid,
                samples,
                self.hit_options(),
                &self.seeds.child(&format!("depth-{q}")),
            )?;
            for (&t, &g) in grid.iter().zip(&surv) {
                self.r
                    .estimates
                    .push(Estimate::sampled(format!("G depth={q}"), t, g, binomial_se(g, samples)));
            }
            let law = EmpiricalLaw::with_censored(sample.normalized(), sample.censored_count());
            let ks = law.ks_distance(&ReferenceLaw::Exponential)?;
            let spread = KS_SPREAD / (samples as f64).sqrt();
            self.r.estimates.push(Estimate::sampled("ks to exponential", q as f64, ks, spread));
            self.r.checks.push(Check::new(
                format!("ks to exponential at depth={q}"),
                ks,
                Some(spread),
                Comparison::AtLeast,
                tol,
            ));
            if weakest.as_ref().map_or(true, |k| ks < k.stat) {
                weakest = Some(Ks { stat: ks, critical_1pct: ks_critical(samples, 0.01), samples });
            }
        }
        self.r.ks = weakest;
        Ok(())
    }
}

/// Systems, their legal backends and measures, for `list-systems`.
pub fn list_systems() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        ("tent", "bitstream, float64", "lebesgue, empirical-orbit (float64)"),
        ("doubling", "bitstream, float64", "lebesgue, bernoulli, empirical-orbit (float64)"),
        ("rotation", "float64", "lebesgue, empirical-orbit"),
        ("manneville-pomeau", "float64", "empirical-orbit"),
    ]
}
