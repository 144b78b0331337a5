//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the run
//! fails if any criterion fails.

use std::f64::consts::LN_2;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gwi_core::checks::{self, CheckOptions};
use gwi_core::gw::FluidConfig;
use gwi_core::gwi::GwiRun;
use gwi_core::limit::DEFAULT_DELTA;
use gwi_core::rng::stream;
use gwi_core::{ImmigrationLaw, LogMagnitude, OffspringFamily};
use rand::Rng;

const SEED: u64 = 20_241_016;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed(budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{} [{:.1}s]", o.detail, took.as_secs_f64());
    if let Some(b) = budget {
        if took > b {
            o.pass = false;
            o.detail = format!("{} over budget {:.0}s", o.detail, b.as_secs_f64());
        }
    }
    o
}

fn limit_marginal(slope: f64, seed: u64) -> Outcome {
    let ks = checks::limit_marginal_ks(slope, 100_000, DEFAULT_DELTA, seed).unwrap();
    outcome(ks <= 0.01, format!("KS = {ks:.5} (threshold 0.01)"))
}

fn c1() -> Outcome {
    timed(Some(Duration::from_secs(10)), || limit_marginal(-LN_2, SEED))
}

fn c2() -> Outcome {
    timed(None, || limit_marginal(0.0, SEED + 1))
}

fn c3() -> Outcome {
    timed(None, || limit_marginal(LN_2, SEED + 2))
}

fn from_report(name: &str, seed: u64) -> Outcome {
    let r = checks::run_check(name, &CheckOptions::new(seed)).unwrap();
    let details: Vec<String> = r.details.iter().map(|(k, v)| format!("{k}={v:.5}")).collect();
    outcome(r.pass, format!("statistic {:.5} (threshold {}) {}", r.statistic, r.threshold, details.join(" ")))
}

fn c4() -> Outcome {
    timed(Some(Duration::from_secs(180)), || from_report("marginal-prelimit-thm1", SEED + 3))
}

fn c5() -> Outcome {
    timed(Some(Duration::from_secs(30)), || from_report("lemma-aux2", SEED + 4))
}

fn c6() -> Outcome {
    timed(None, || from_report("lemma-aux2a", SEED + 5))
}

fn c7() -> Outcome {
    let families = [
        OffspringFamily::poisson(0.9).unwrap(),
        OffspringFamily::geometric(0.9).unwrap(),
        OffspringFamily::binary(0.5).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for f in families {
        // p[k - 1] = P{X(k) >= 1}
        let p = f.survival_probability(1001);
        worst = worst.max((p[1000] / p[999] - f.mean()).abs());
    }
    outcome(worst <= 0.01, format!("max |p_1001/p_1000 - mu| = {worst:.5} (threshold 0.01)"))
}

fn c8() -> Outcome {
    // (law, n, closed form)
    let closed = [
        (ImmigrationLaw::reciprocal(1.0).unwrap(), 100u64, 100.0),
        (ImmigrationLaw::reciprocal(2.5).unwrap(), 1000, 2500.0),
        (ImmigrationLaw::reciprocal(0.2).unwrap(), 1_000_000, 200_000.0),
        (ImmigrationLaw::pareto_log(0.5).unwrap(), 100, 10_000.0),
        (ImmigrationLaw::pareto_log(0.5).unwrap(), 25, 625.0),
        (ImmigrationLaw::pareto_log(0.25).unwrap(), 10, 10_000.0),
        (ImmigrationLaw::pareto_log(0.3).unwrap(), 1000, 1e10),
    ];
    let mut rel: f64 = 0.0;
    for (law, n, want) in closed {
        let b = law.norming_bn(n).unwrap();
        rel = rel.max((b - want).abs() / want);
    }
    let sv = ImmigrationLaw::ParetoLogSv;
    let mut resid: f64 = 0.0;
    for n in [1u64, 10, 1000, 1_000_000] {
        let b = sv.norming_bn(n).unwrap();
        resid = resid.max((n as f64 * sv.tail(b) - 1.0).abs());
    }
    outcome(
        rel <= 1e-12 && resid <= 1e-9,
        format!("closed-form rel error {rel:.2e} (threshold 1e-12), sv residual {resid:.2e} (threshold 1e-9)"),
    )
}

fn c9() -> Outcome {
    timed(None, || from_report("marginal-prelimit-thm2", SEED + 6))
}

fn c10() -> Outcome {
    timed(None, || from_report("fdd", SEED + 7))
}

fn subadditivity() -> (bool, usize) {
    let mut rng = stream(SEED, 99);
    let draw = |rng: &mut gwi_core::rng::Stream| {
        if rng.random::<f64>() < 0.05 {
            LogMagnitude::Zero
        } else {
            LogMagnitude::Positive(rng.random_range(-700.0..=700.0))
        }
    };
    let mut violations = 0;
    for _ in 0..10_000 {
        let (x, y) = (draw(&mut rng), draw(&mut rng));
        let s = x.lse_add(y);
        let ok = x.log_plus() <= s.log_plus() && s.log_plus() <= x.log_plus() + y.log_plus() + 2.0 * LN_2;
        violations += usize::from(!ok);
    }
    (violations == 0, violations)
}

fn coupling() -> (bool, usize) {
    let mut violations = 0;
    for seed in 0..1000u64 {
        let run = GwiRun {
            n: 50,
            horizon: 1.0,
            family: OffspringFamily::binary(0.5).unwrap(),
            law: ImmigrationLaw::reciprocal(1.0).unwrap(),
            config: FluidConfig::default(),
            seed: SEED ^ seed,
        };
        let full = run.simulate_y_path().unwrap();
        let cut = run.truncated_y_path(0.2, 50.0).unwrap();
        violations += usize::from(!cut.iter().zip(&full).all(|(c, f)| c <= f));
    }
    (violations == 0, violations)
}

fn run_cli(args: &[&str], dir: &Path) -> std::process::ExitStatus {
    Command::new(env!("CARGO_BIN_EXE_gwisim")).args(args).current_dir(dir).status().expect("gwisim runs")
}

/// Runs each command twice in fresh directories and compares every output byte.
fn determinism() -> (bool, String) {
    let sim = r#"{"n": 20, "horizon": 1.5, "family": {"family": "binary", "mean": 1.0},
                  "law": {"variant": "reciprocal", "c": 1.0}}"#;
    let lim = r#"{"a": 1.0, "b": 1.0, "slope": -0.6931471805599453, "horizon": 2.0, "delta": 0.01}"#;
    let commands: [(&str, Vec<&str>, &[&str]); 3] = [
        (
            "simulate",
            vec!["simulate", "--config", "cfg.json", "--seed", "7", "--replicates", "4", "--out", "o", "--ci"],
            &["o.csv", "o.json"],
        ),
        (
            "limit-sample",
            vec!["limit-sample", "--config", "cfg.json", "--seed", "7", "--replicates", "3", "--out", "o", "--ci"],
            &["o.csv", "o.json", "o.atoms.json"],
        ),
        ("verify", vec!["verify", "proxy-zn", "--seed", "7", "--replicates", "20", "--out", "o", "--ci"], &["o.json"]),
    ];
    let mut notes = Vec::new();
    let mut all = true;
    for (name, args, files) in commands {
        let outputs: Vec<Vec<Vec<u8>>> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let cfg = if name == "simulate" { sim } else { lim };
                std::fs::write(dir.path().join("cfg.json"), cfg).unwrap();
                let status = run_cli(&args, dir.path());
                assert!(status.success(), "{name} exited with {status}");
                files.iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()).collect()
            })
            .collect();
        let same = outputs[0] == outputs[1];
        all &= same;
        notes.push(format!("{name}={}", if same { "identical" } else { "DIFFERENT" }));
    }
    (all, notes.join(" "))
}

fn c11() -> Outcome {
    timed(None, || {
        let (sub_ok, sub_v) = subadditivity();
        let (cpl_ok, cpl_v) = coupling();
        let (det_ok, det) = determinism();
        outcome(
            sub_ok && cpl_ok && det_ok,
            format!("subadditivity violations {sub_v}/10000, coupling violations {cpl_v}/1000, {det}"),
        )
    })
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 limit marginal, negative slope", c1),
        ("2 limit marginal, zero slope", c2),
        ("3 limit marginal, positive slope", c3),
        ("4 critical prelimit marginal", c4),
        ("5 cohort growth profile", c5),
        ("6 superexponential cohort flatness", c6),
        ("7 survival ratio", c7),
        ("8 norming solver", c8),
        ("9 subcritical prelimit marginal", c9),
        ("10 finite-dimensional laws", c10),
        ("11 property suites", c11),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        println!("criterion {name}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
