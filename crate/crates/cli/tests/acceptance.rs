//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//! Runs the bundled scenarios at their shipped sizes.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rendezvous::experiment::{Outcome, RunOptions, TraceMode};
use rendezvous::report::{report_json, rounds_csv, trials_csv};
use rendezvous::{parse_scenario, run_experiment, Scenario};
use rendezvous_core::adversary::{Adversary, AdversaryPolicy, Generator};
use rendezvous_core::engine::{run, Budgets, EventKind, Line, RobotSpec, RunStatus, Trace};
use rendezvous_core::policies::{gather_lambda_oracle, ApproachGeometry};
use rendezvous_core::rng::{stream, unit_open};
use rendezvous_core::{LambdaPolicy, Rat};

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn load(name: &str) -> Scenario {
    let path = scenario_dir().join(format!("{name}.json"));
    parse_scenario(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn execute(s: &Scenario) -> Outcome {
    run_experiment(s, &RunOptions::default()).unwrap()
}

fn r(s: &str) -> Rat {
    s.parse().unwrap()
}

/// Mean and sample standard deviation.
fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

type Check = Result<String, String>;

type Criterion = (&'static str, fn() -> Check, Option<Duration>);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn simultaneous_midpoint() -> Check {
    let s = load("simultaneous_midpoint");
    let out = execute(&s);
    let n = out.records.len() as f64;
    let p = out.report.stats.gathered as f64 / n;
    let target = 1.0 / 9.0;
    let tol = 3.0 * (target * (8.0 / 9.0) / n).sqrt();
    // Both robots look at t = 1 and the midpoint is reached at t = 3/2.
    let all_first_cycle =
        out.records.iter().filter(|t| t.summary.gathered).all(|t| t.summary.gather_time == Some(r("3/2")));
    ensure(
        (p - target).abs() <= tol && all_first_cycle && n >= 1e5,
        format!("frequency {p:.5} over {n} trials, target {target:.5} ± {tol:.5}, all at t = 3/2: {all_first_cycle}"),
    )
}

fn offset_waits() -> Check {
    let names = [
        "async_gap_02",
        "async_gap_02_zero_waits",
        "async_gap_05_zero_second_wait",
        "async_gap_05_random_waits",
        "async_gap_09_zero_waits",
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for name in names {
        let out = execute(&load(name));
        ok &= out.report.stats.gathered > 0 && out.report.stats.trials >= 100_000;
        parts.push(format!("{name} {}/{}", out.report.stats.gathered, out.report.stats.trials));
    }
    ensure(ok, parts.join(", "))
}

fn ssync_halving() -> Check {
    let mut s = load("ssync_halving");
    s.budgets.max_total_looks = 51;
    let out = run_experiment(&s, &RunOptions { workers: None, traces: TraceMode::All }).unwrap();
    let trace: Trace<Rat> = serde_json::from_str(&out.traces[0].1).unwrap();
    let mut k = 0;
    for e in &trace.events {
        if !matches!(e.kind, EventKind::Look { .. }) {
            continue;
        }
        let d = trace.distance_at(&e.time).unwrap();
        if d != Rat::pow2(-k) || d.is_zero() {
            return Err(format!("distance {d} at activation {k}"));
        }
        k += 1;
    }
    ensure(k == 51 && trace.status != RunStatus::Gathered, format!("exact 2^-k for k = 0..{}", k - 1))
}

/// The slow robot 0 at 0 picks `mover`; robot 1 at 1 is `alpha` times as
/// fast and picks `other`, then 1 from then on. Nobody waits, except that
/// with `pause` robot 1 waits 100 after its first move.
fn oracle_run(alpha: &Rat, mover: LambdaPolicy, other: Rat, pause: bool, looks: u64) -> Trace<Rat> {
    let mut sequence = vec![Rat::one(); looks as usize];
    sequence[0] = other;
    let robots = [
        RobotSpec::new(Rat::zero(), Rat::one(), mover),
        RobotSpec::new(Rat::one(), alpha.clone(), LambdaPolicy::Oracle { sequence }),
    ];
    let eager = Generator::Constant { wait: Rat::zero(), compute: Rat::zero() };
    let second = if pause {
        Generator::Prefix {
            prefix: vec![(Rat::zero(), Rat::zero())],
            then: Box::new(Generator::Constant { wait: Rat::from_int(100), compute: Rat::zero() }),
        }
    } else {
        eager.clone()
    };
    let adv = AdversaryPolicy::ObliviousGenerated { generators: vec![eager, second], seed: 0 };
    run(&mut Line, &robots, &mut Adversary::new(adv, 2).unwrap(), 0, &Budgets::looks(looks)).unwrap()
}

fn oracle_catchup() -> Check {
    use ApproachGeometry::*;
    let cases = [(r("1"), OppositeDirections), (r("2"), OppositeDirections), (r("5/3"), OppositeDirections), (r("3"), SameDirection), (r("5/3"), SameDirection)];
    let mut coincidences = 0;
    let mut draws = 0;
    for (alpha, geom) in &cases {
        let star = gather_lambda_oracle(alpha, *geom).unwrap();
        // Robot 0 retreats in the same-direction case, robot 1 overshoots.
        let (mover, other) = match geom {
            OppositeDirections => (star.clone(), Rat::one()),
            SameDirection => (-star.clone(), &Rat::from_int(2) + &star),
        };
        let trace = oracle_run(alpha, LambdaPolicy::Oracle { sequence: vec![mover.clone()] }, other.clone(), false, 10);
        let meet = star.abs();
        let p0 = trace.runs[0].position_at(&meet).unwrap();
        let p1 = trace.runs[1].position_at(&meet).unwrap();
        if trace.status != RunStatus::Gathered || p0 != p1 || trace.runs[0].decided_at != Some(meet.clone()) {
            return Err(format!("alpha {alpha} {geom:?}: oracle lambda {star} did not meet ({p0} vs {p1})"));
        }
        let mut rng = stream(0xacce, &[draws]);
        for _ in 0..10_000 {
            let lambda = &(&unit_open(&mut rng) * &Rat::from_int(3)) - &Rat::one();
            if lambda == mover {
                continue;
            }
            draws += 1;
            let t = oracle_run(alpha, LambdaPolicy::Deterministic { lambda }, other.clone(), true, 3);
            let end = t.runs[0].segments[0].move_end.clone();
            let met = t.runs[0].position_at(&end).unwrap() == t.runs[1].position_at(&end).unwrap();
            // The look that ends the mover's first cycle.
            let decided = t.runs[0].segments.get(1).is_some_and(|s| s.lambda.is_none());
            if met || decided {
                coincidences += 1;
            }
        }
    }
    ensure(coincidences == 0, format!("5 oracle meetings exact; {coincidences} meetings in {draws} random draws"))
}

fn attempt_success() -> Check {
    let out = execute(&load("tau_triple_attempts"));
    let st = &out.report.stats;
    let rate = st.successful_attempts as f64 / st.completed_attempts as f64;
    let floor = 2.0 / 9.0 - 0.0125;
    ensure(
        st.completed_attempts >= 10_000 && rate >= floor,
        format!("success rate {rate:.4} over {} attempts, floor {floor:.4}", st.completed_attempts),
    )
}

fn looks_per_phase() -> Check {
    let out = execute(&load("tau_triple_attempts"));
    let looks: Vec<f64> = out.records.iter().flat_map(|t| t.summary.phase_looks.iter().map(|&l| l as f64)).collect();
    let (mean, sd) = mean_sd(&looks);
    let limit = 18.0 + 3.0 * sd / (looks.len() as f64).sqrt();
    ensure(
        looks.len() >= 1000 && mean <= limit,
        format!("mean {mean:.3} looks over {} phases, limit {limit:.3}", looks.len()),
    )
}

fn tau_ratios() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for ratio in [4, 64, 1024] {
        let out = execute(&load(&format!("tau_ratio_{ratio}")));
        let bound = out.report.extras.look_bound.unwrap();
        let looks: Vec<f64> = out.records.iter().map(|t| t.summary.total_looks as f64).collect();
        let (mean, sd) = mean_sd(&looks);
        let limit = bound + 3.0 * sd / (looks.len() as f64).sqrt();
        let budget_ok = out.report.scenario.budgets.max_total_looks as f64 <= 10.0 * bound;
        ok &= mean <= limit && out.report.stats.gathered == out.report.stats.trials && budget_ok && looks.len() >= 1000;
        parts.push(format!("δ/τ={ratio}: mean {mean:.2} ≤ {limit:.2}, gathered {}/{}", out.report.stats.gathered, looks.len()));
    }
    ensure(ok, parts.join("; "))
}

fn adaptive_scheduler() -> Check {
    let out = execute(&load("adaptive_scheduler"));
    let st = &out.report.stats;
    let x = &out.report.extras;
    let (checked, violations, zero) =
        (x.straddle_checked.unwrap(), x.straddle_violations.unwrap(), x.zero_distance_looks.unwrap());
    let full_length = out.records.iter().all(|t| t.summary.total_looks == 400);
    ensure(
        st.gathered == 0 && st.trials >= 1000 && violations == 0 && zero == 0 && checked > 0 && full_length,
        format!("gathered {}/{}, {violations} of {checked} looks outside a move, {zero} zero-distance looks", st.gathered, st.trials),
    )
}

fn projection() -> Check {
    let out = execute(&load("plane_projection"));
    let disagreements = out.report.extras.projection_disagreements.unwrap();
    let checked = out.records.iter().filter(|t| t.checks.projection_agrees.is_some()).count();
    ensure(disagreements == 0 && checked >= 100, format!("{disagreements} disagreements in {checked} scenarios"))
}

fn one_free_robot() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for a in [1, 2] {
        let out = execute(&load(&format!("one_free_robot_a{a}")));
        let x = &out.report.extras;
        let st = &out.report.stats;
        ok &= st.gathered > 0 && st.trials >= 100_000 && x.modal_repeat_count == x.predicted_repeat_count && x.predicted_repeat_count.is_some();
        parts.push(format!(
            "α={a}: gathered {}/{}, modal k {:?} predicted {:?}",
            st.gathered,
            st.trials,
            x.modal_repeat_count,
            x.predicted_repeat_count
        ));
    }
    ensure(ok, parts.join("; "))
}

fn multirobot() -> Check {
    let out = execute(&load("multirobot_n8"));
    let x = &out.report.extras;
    let trials = out.report.stats.trials;
    let random_ok = x.single_entity_trials == Some(trials)
        && x.non_collinear_reductions == Some(0)
        && x.farthest_pair_changes == Some(0)
        && x.unresolved_ties == Some(0)
        && trials >= 100;
    let ties = execute(&load("multirobot_ties8"));
    let hist = ties.report.extras.tie_rounds.clone().unwrap();
    let limit = 10 * 3;
    let within: u64 = hist.iter().filter(|(k, _)| **k <= limit).map(|(_, v)| v).sum();
    let fraction = within as f64 / ties.report.stats.trials as f64;
    ensure(
        random_ok && fraction >= 0.99,
        format!(
            "n=8: {}/{trials} single entity, collinear and farthest pair kept in all; ties: {:.3} resolved within {limit} rounds",
            x.single_entity_trials.unwrap_or(0),
            fraction
        ),
    )
}

fn determinism() -> Check {
    let mut names: Vec<String> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in &names {
        let mut s = load(name);
        s.trials = s.trials.min(300);
        let render = |workers| {
            let out = run_experiment(&s, &RunOptions { workers: Some(workers), traces: TraceMode::None }).unwrap();
            (report_json(&out.report).unwrap(), trials_csv(&out).unwrap(), rounds_csv(&out).unwrap())
        };
        if render(1) != render(4) {
            return Err(format!("{name} differs between runs"));
        }
    }
    Ok(format!("{} scenarios byte-identical across runs with 1 and 4 workers", names.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("C1 simultaneous looks gather at the midpoint", simultaneous_midpoint, Some(Duration::from_secs(60))),
        ("C2 offset waits gather with positive probability", offset_waits, None),
        ("C3 alternating activations halve the distance", ssync_halving, None),
        ("C4 oracle lambda meets the moving robot", oracle_catchup, None),
        ("C5 attempt success rate", attempt_success, None),
        ("C6 looks per phase", looks_per_phase, None),
        ("C7 expected looks under tau-bounded delays", tau_ratios, Some(Duration::from_secs(300))),
        ("C8 adaptive scheduler prevents gathering", adaptive_scheduler, None),
        ("C9 plane runs match line runs", projection, None),
        ("C10 one robot without delays", one_free_robot, None),
        ("C11 multi-robot pipeline", multirobot, None),
        ("C12 reports are deterministic", determinism, None),
    ];
    let mut failed = 0;
    for (name, check, time_limit) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let result = match (result, time_limit) {
            (Ok(d), Some(limit)) if elapsed > limit => Err(format!("{d}; took {elapsed:.1?}, limit {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{elapsed:.1?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{elapsed:.1?}]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
