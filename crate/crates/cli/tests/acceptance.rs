//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line;
//! the process fails if any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use evlhts::evl::gamma_n;
use evlhts::measure::MeasureModel;
use evlhts::observable::{GType, Observable};
use evlhts::system::{Backend, MapSystem};
use evlhts_cli::{run_with_threads, Config, Report};

fn config(name: &str) -> Config {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"));
    Config::from_path(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(experiment: &str, name: &str) -> Report {
    run_with_threads(experiment, &config(name), 0).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// The checks of a report whose name contains `needle`.
fn checks(r: &Report, needle: &str) -> Vec<(String, f64, f64, bool)> {
    r.checks
        .iter()
        .filter(|c| c.name.contains(needle))
        .map(|c| (c.name.clone(), c.value, c.bound, c.pass))
        .collect()
}

fn summarize(cs: &[(String, f64, f64, bool)]) -> (bool, String) {
    let pass = !cs.is_empty() && cs.iter().all(|c| c.3);
    let detail = cs
        .iter()
        .map(|(n, v, b, _)| format!("{n} = {v:.4} (bound {b})"))
        .collect::<Vec<_>>()
        .join("; ");
    (pass, detail)
}

fn criterion_1() -> (bool, String) {
    summarize(&checks(&run("evl-cylinders", "tent-cylinder-evl"), "exp(-tau)"))
}

fn criterion_2() -> (bool, String) {
    summarize(&checks(&run("evl-cylinders", "tent-midpoint-evl"), "exp(-tau)"))
}

fn criterion_3() -> (bool, String) {
    let mut cs = checks(&run("kac", "kac-tent"), "kac");
    cs.extend(checks(&run("kac", "kac-doubling"), "kac"));
    summarize(&cs)
}

fn criterion_4() -> (bool, String) {
    let mut cs = Vec::new();
    for g in ["g1", "g2", "g3"] {
        cs.extend(checks(&run("evl-balls", &format!("doubling-{g}")), "ks to"));
    }
    summarize(&cs)
}

fn criterion_5() -> (bool, String) {
    summarize(&checks(&run("equivalence", "bernoulli-equivalence"), "sup"))
}

fn criterion_6() -> (bool, String) {
    summarize(&checks(&run("evl-balls", "doubling-g1"), "vs iid"))
}

fn criterion_7() -> (bool, String) {
    let tent = MapSystem::full_tent(Backend::BitStream).unwrap();
    let leb = MeasureModel::lebesgue(&tent).unwrap();
    let zeta = std::f64::consts::FRAC_1_PI;
    let g2 = Observable::ball(GType::G2 { alpha: 1.0 }, leb.clone(), zeta).unwrap();
    let g1 = Observable::ball(GType::G1, leb, zeta).unwrap();
    let mut worst: f64 = 0.0;
    for e in 1..=6 {
        let n = 10u64.pow(e);
        let nf = n as f64;
        worst = worst.max((gamma_n(&g2, n).unwrap() - nf).abs() / nf);
        worst = worst.max((gamma_n(&g1, n).unwrap() - nf.ln()).abs() / nf.ln());
    }
    (worst <= 1e-9, format!("largest relative error {worst:.2e} (bound 1e-9)"))
}

fn criterion_8() -> (bool, String) {
    let tent = run("smb", "smb-tent");
    let bern = run("smb", "smb-bernoulli");
    let tent_exact = tent
        .estimates
        .iter()
        .filter(|e| e.series == "smb")
        .all(|e| e.value == std::f64::consts::LN_2);
    let bern_final = bern
        .estimates
        .iter()
        .filter(|e| e.series == "smb")
        .last()
        .map(|e| e.value)
        .unwrap();
    let near = (bern_final - 0.6109).abs() <= 0.05;
    let gibbs: Vec<f64> = tent
        .estimates
        .iter()
        .chain(&bern.estimates)
        .filter(|e| e.series == "gibbs ratio")
        .map(|e| e.value)
        .collect();
    let gibbs_exact = !gibbs.is_empty() && gibbs.iter().all(|&g| g == 1.0);
    (
        tent_exact && near && gibbs_exact,
        format!(
            "tent exactly ln 2 at all depths: {tent_exact}; bernoulli at depth 2000 = {bern_final:.4} (target 0.6109 +- 0.05); gibbs ratios all 1: {gibbs_exact}"
        ),
    )
}

fn criterion_9() -> (bool, String) {
    let fixed = run("conditions", "dprime-fixed-point");
    let generic = run("conditions", "dprime-generic");
    let est = |r: &Report| r.estimates.iter().find(|e| e.series == "dprime").unwrap().value;
    let (a, b) = (est(&fixed), est(&generic));
    let verdict = checks(&generic, "verdict").iter().all(|c| c.3);
    (
        a >= 10.0 * b && verdict,
        format!("fixed point {a:.4}, generic {b:.4}, ratio {:.2} (bound 10); generic consistent with zero: {verdict}", a / b),
    )
}

fn criterion_10() -> (bool, String) {
    summarize(&checks(&run("rts", "rts-transform"), "transformed"))
}

fn criterion_11() -> (bool, String) {
    summarize(&checks(&run("rotation-subseq", "golden-rotation"), "ks to exponential"))
}

fn criterion_12() -> (bool, String) {
    let cfg = config("kac-tent");
    let one = run_with_threads("kac", &cfg, 1).unwrap();
    let eight = run_with_threads("kac", &cfg, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    one.write(&dir.path().join("t1")).unwrap();
    eight.write(&dir.path().join("t8")).unwrap();
    let read = |d: &str| std::fs::read(dir.path().join(d).join("summary.json")).unwrap();
    let same = read("t1") == read("t8");
    (same, format!("summary.json identical at 1 and 8 threads: {same}"))
}

fn main() {
    let criteria: [(&str, fn() -> (bool, String)); 12] = [
        ("cylinder EVL on the full tent map at 1", criterion_1),
        ("cylinder EVL on the full tent map at 1/2", criterion_2),
        ("Kac's lemma", criterion_3),
        ("classical extreme value types", criterion_4),
        ("non-acip equivalence", criterion_5),
        ("iid reduction", criterion_6),
        ("quantile normalizer closed forms", criterion_7),
        ("Shannon-McMillan-Breiman and Gibbs", criterion_8),
        ("short-return diagnostic", criterion_9),
        ("HTS from RTS transform", criterion_10),
        ("non-exponential rotation", criterion_11),
        ("determinism across thread counts", criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = f();
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} ({name}): {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
