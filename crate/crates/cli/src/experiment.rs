//! Seeded Monte Carlo batches over a scenario.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use rendezvous_core::adversary::{Adversary, AdversaryPolicy};
use rendezvous_core::analysis::{aggregate_summaries, gathering_look_bound, repeat_count_with, round12, summarize, TrialSummary};
use rendezvous_core::engine::{run, EventKind, Line, RobotSpec, Trace};
use rendezvous_core::multirobot::{antipodal_ties, farthest_pairs, gather_with_merging, reduce_to_line, Configuration};
use rendezvous_core::projection::compare_with_line_run;
use rendezvous_core::rng::{derive_seed, stream, SimRng};
use rendezvous_core::{Point2, Rat};
use serde::{Deserialize, Serialize};

use crate::report::{Extras, Report};
use crate::scenario::{Mode, PlaneSpec, Scenario};
use crate::CliError;

/// Which per-trial traces to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    #[default]
    None,
    /// Trials that did not gather.
    Failed,
    All,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub traces: TraceMode,
}

/// Per-trial checks beyond the summary, depending on the mode.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrialChecks {
    /// Looks after the first look instant (adaptive scheduler only).
    pub straddle_checked: u64,
    /// Of those, looks that saw the other robot outside a move.
    pub straddle_violations: u64,
    /// Looks that saw the other robot at the observer's own position.
    pub zero_distance_looks: u64,
    pub projection_agrees: Option<bool>,
    pub multirobot: Option<MultirobotChecks>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultirobotChecks {
    pub tie_rounds: u64,
    pub ties_resolved: bool,
    pub collinear: bool,
    pub farthest_pair_kept: bool,
    pub single_entity: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub summary: TrialSummary,
    pub checks: TrialChecks,
}

/// One entity of one configuration in a multi-robot run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRow {
    pub trial: u64,
    pub round: u64,
    pub entity: u64,
    pub x: Rat,
    pub y: Rat,
    pub multiplicity: u64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub records: Vec<TrialRecord>,
    /// Serialized traces keyed by trial index.
    pub traces: Vec<(u64, String)>,
    pub rounds: Vec<RoundRow>,
}

struct TrialOutput {
    record: TrialRecord,
    trace: Option<String>,
    rounds: Vec<RoundRow>,
}

/// Runs every trial of `scenario`. Trial `i` draws all of its randomness from
/// streams derived from `(master_seed, i)`, so results do not depend on the
/// number of workers.
pub fn run_experiment(scenario: &Scenario, options: &RunOptions) -> Result<Outcome, CliError> {
    scenario.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let outputs: Vec<Result<TrialOutput, CliError>> = pool.install(|| {
        (0..scenario.trials)
            .into_par_iter()
            .map(|trial| {
                run_trial(scenario, trial, options.traces)
                    .map_err(|e| CliError::Runtime(format!("trial {trial}: {e}")))
            })
            .collect()
    });

    let mut records = Vec::with_capacity(outputs.len());
    let mut traces = Vec::new();
    let mut rounds = Vec::new();
    for out in outputs {
        let out = out?;
        if let Some(t) = out.trace {
            traces.push((out.record.trial, t));
        }
        rounds.extend(out.rounds);
        records.push(out.record);
    }
    let summaries: Vec<TrialSummary> = records.iter().map(|r| r.summary.clone()).collect();
    let stats = aggregate_summaries(&summaries).map_err(|e| CliError::Runtime(e.to_string()))?;
    let extras = extras(scenario, &records, &stats.repeat_counts)?;
    let report = Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: scenario.master_seed,
        scenario: scenario.clone(),
        stats,
        extras,
    };
    Ok(Outcome { report, records, traces, rounds })
}

fn run_trial(s: &Scenario, trial: u64, traces: TraceMode) -> Result<TrialOutput, String> {
    match s.mode {
        Mode::Line => line_trial(s, trial, traces),
        Mode::PlaneProjection => plane_trial(s, trial, traces),
        Mode::Multirobot => multirobot_trial(s, trial, traces),
    }
}

fn trial_adversary(s: &Scenario, trial: u64) -> AdversaryPolicy {
    let adv = s.adversary.clone().expect("validated");
    if s.per_trial_adversary_seed {
        adv.with_seed(derive_seed(s.master_seed, &[trial, 1]))
    } else {
        adv
    }
}

fn keep_trace(mode: TraceMode, gathered: bool) -> bool {
    match mode {
        TraceMode::None => false,
        TraceMode::Failed => !gathered,
        TraceMode::All => true,
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn line_trial(s: &Scenario, trial: u64, traces: TraceMode) -> Result<TrialOutput, String> {
    let robots: Vec<RobotSpec<Rat>> = (0..s.robots.len())
        .map(|i| {
            let r = &s.robots[i];
            RobotSpec::new(r.start.clone().expect("validated"), r.speed.clone(), s.policy_of(i).clone())
        })
        .collect();
    let adv = trial_adversary(s, trial);
    let adaptive = !adv.is_oblivious();
    let mut adversary = Adversary::new(adv, robots.len()).map_err(|e| e.to_string())?;
    let trace = run(&mut Line, &robots, &mut adversary, derive_seed(s.master_seed, &[trial, 0]), &s.budgets.budgets())
        .map_err(|e| e.to_string())?;
    let summary = summarize(&trace, &s.analysis.options()).map_err(|e| e.to_string())?;
    let mut checks = TrialChecks::default();
    if adaptive {
        straddle_check(&trace, &mut checks);
    }
    let trace = if keep_trace(traces, summary.gathered) { Some(to_json(&trace)?) } else { None };
    Ok(TrialOutput { record: TrialRecord { trial, summary, checks }, trace, rounds: Vec::new() })
}

/// Counts looks after the first look instant that do not fall strictly
/// inside a move of the other robot.
pub fn straddle_check(trace: &Trace<Rat>, checks: &mut TrialChecks) {
    let mut first = None;
    for e in &trace.events {
        let EventKind::Look { position, observed, .. } = &e.kind else { continue };
        if observed.contains(position) {
            checks.zero_distance_looks += 1;
        }
        let first = first.get_or_insert_with(|| e.time.clone());
        if e.time > *first {
            checks.straddle_checked += 1;
            if !trace.runs[1 - e.robot].is_moving_at(&e.time) {
                checks.straddle_violations += 1;
            }
        }
    }
}

fn random_rational(rng: &mut SimRng, range: i64, max_den: i64) -> Rat {
    let d = rng.random_range(1..=max_den);
    Rat::frac(rng.random_range(-range * d..=range * d), d)
}

/// Two plane points at a rational distance.
pub fn random_plane_pair(spec: &PlaneSpec, rng: &mut SimRng) -> (Point2, Point2) {
    let p1 = Point2::new(
        random_rational(rng, spec.coordinate_range, spec.max_denominator),
        random_rational(rng, spec.coordinate_range, spec.max_denominator),
    );
    let m = rng.random_range(2..=7i64);
    let n = rng.random_range(1..m);
    let c = Rat::from_int(m * m + n * n);
    let mut dx = Rat::from_int(m * m - n * n) / &c;
    let mut dy = Rat::from_int(2 * m * n) / &c;
    if rng.random::<bool>() {
        std::mem::swap(&mut dx, &mut dy);
    }
    if rng.random::<bool>() {
        dx = -dx;
    }
    if rng.random::<bool>() {
        dy = -dy;
    }
    let den = rng.random_range(1..=spec.max_denominator);
    let dist = Rat::frac(rng.random_range(1..=spec.max_distance), den);
    let p2 = &p1 + &Point2::new(dx, dy).scale(&dist);
    (p1, p2)
}

fn plane_trial(s: &Scenario, trial: u64, traces: TraceMode) -> Result<TrialOutput, String> {
    let spec = s.plane.clone().unwrap_or_default();
    let (p1, p2) = random_plane_pair(&spec, &mut stream(s.master_seed, &[trial, 2]));
    let adv = trial_adversary(s, trial);
    let cmp = compare_with_line_run(
        [&p1, &p2],
        [&s.robots[0].speed, &s.robots[1].speed],
        [s.policy_of(0), s.policy_of(1)],
        &adv,
        derive_seed(s.master_seed, &[trial, 0]),
        &s.budgets.budgets(),
    )
    .map_err(|e| e.to_string())?;
    let summary = summarize(&cmp.plane, &s.analysis.options()).map_err(|e| e.to_string())?;
    let checks = TrialChecks { projection_agrees: Some(cmp.agrees()), ..TrialChecks::default() };
    let trace = if keep_trace(traces, summary.gathered) {
        Some(to_json(&serde_json::json!({ "plane": cmp.plane, "line": cmp.line }))?)
    } else {
        None
    };
    Ok(TrialOutput { record: TrialRecord { trial, summary, checks }, trace, rounds: Vec::new() })
}

fn multirobot_trial(s: &Scenario, trial: u64, traces: TraceMode) -> Result<TrialOutput, String> {
    let m = s.multirobot.as_ref().expect("validated");
    let config = match m.tie_pairs {
        Some(k) => antipodal_ties(k),
        None => {
            let mut rng = stream(s.master_seed, &[trial, 2]);
            Configuration::from_points((0..m.robots).map(|_| {
                Point2::new(
                    random_rational(&mut rng, m.coordinate_range, m.max_denominator),
                    random_rational(&mut rng, m.coordinate_range, m.max_denominator),
                )
            }))
        }
    };
    let n = config.total_multiplicity();

    // The reduction on its own stream, checked against the configuration it starts from.
    let reduced = reduce_to_line(&config, m.pipeline.activation, &mut stream(s.master_seed, &[trial, 3]), m.pipeline.max_tie_rounds)
        .map_err(|e| e.to_string())?;
    let before_projection = &reduced.rounds[reduced.tie_rounds as usize];
    let pair_points = |c: &Configuration| {
        farthest_pairs(c)
            .into_iter()
            .map(|(i, j)| (c.entities()[i].0.clone(), c.entities()[j].0.clone()))
            .collect::<Vec<_>>()
    };
    let collinear = !reduced.partial && reduced.config.is_collinear();
    let farthest_pair_kept = !reduced.partial
        && pair_points(before_projection).len() == 1
        && pair_points(&reduced.config) == pair_points(before_projection)
        && reduced.config.max_dist2() == before_projection.max_dist2();

    let outcome = gather_with_merging(&config, &m.pipeline, &mut stream(s.master_seed, &[trial, 4])).map_err(|e| e.to_string())?;
    let single_entity = outcome.config.len() == 1 && outcome.config.total_multiplicity() == n;
    let summary = TrialSummary {
        gathered: single_entity,
        total_looks: outcome.final_looks.unwrap_or(0),
        ..TrialSummary::default()
    };
    let checks = TrialChecks {
        multirobot: Some(MultirobotChecks {
            tie_rounds: outcome.tie_rounds,
            ties_resolved: !reduced.partial,
            collinear,
            farthest_pair_kept,
            single_entity,
        }),
        ..TrialChecks::default()
    };
    let mut rounds = Vec::new();
    for (round, c) in outcome.rounds.iter().enumerate() {
        for (entity, (p, mult)) in c.entities().iter().enumerate() {
            rounds.push(RoundRow {
                trial,
                round: round as u64,
                entity: entity as u64,
                x: p.x.clone(),
                y: p.y.clone(),
                multiplicity: *mult,
            });
        }
    }
    let trace = if keep_trace(traces, single_entity) { Some(to_json(&outcome.rounds)?) } else { None };
    Ok(TrialOutput { record: TrialRecord { trial, summary, checks }, trace, rounds })
}

fn extras(s: &Scenario, records: &[TrialRecord], repeat_counts: &BTreeMap<u64, u64>) -> Result<Extras, CliError> {
    let mut x = Extras::default();
    let runtime = |e: rendezvous_core::SimError| CliError::Runtime(e.to_string());
    if s.mode == Mode::Line && s.robots.len() == 2 {
        let delta = (s.robots[0].start.clone().expect("validated") - s.robots[1].start.clone().expect("validated")).abs();
        if let Some(AdversaryPolicy::TauBounded { tau, .. }) = &s.adversary {
            if delta.is_positive() {
                x.look_bound = Some(round12(gathering_look_bound(&delta, tau).map_err(runtime)?));
            }
        }
        if let Some(p) = &s.analysis.repeat_prediction {
            x.predicted_repeat_count = Some(repeat_count_with(&p.gap, &delta, &p.contraction, &p.speed).map_err(runtime)?);
        }
        if let Some(AdversaryPolicy::Adaptive { .. }) = &s.adversary {
            x.straddle_checked = Some(records.iter().map(|r| r.checks.straddle_checked).sum());
            x.straddle_violations = Some(records.iter().map(|r| r.checks.straddle_violations).sum());
            x.zero_distance_looks = Some(records.iter().map(|r| r.checks.zero_distance_looks).sum());
        }
    }
    if !repeat_counts.is_empty() {
        // Most frequent count, smallest on ties.
        x.modal_repeat_count =
            repeat_counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(k, _)| *k);
    }
    if s.mode == Mode::PlaneProjection {
        x.projection_disagreements =
            Some(records.iter().filter(|r| r.checks.projection_agrees == Some(false)).count() as u64);
    }
    if s.mode == Mode::Multirobot {
        let m: Vec<&MultirobotChecks> = records.iter().filter_map(|r| r.checks.multirobot.as_ref()).collect();
        let count = |f: fn(&MultirobotChecks) -> bool| Some(m.iter().filter(|c| f(c)).count() as u64);
        x.single_entity_trials = count(|c| c.single_entity);
        x.unresolved_ties = count(|c| !c.ties_resolved);
        x.non_collinear_reductions = count(|c| c.ties_resolved && !c.collinear);
        x.farthest_pair_changes = count(|c| c.ties_resolved && !c.farthest_pair_kept);
        let mut hist = BTreeMap::new();
        for c in &m {
            *hist.entry(c.tie_rounds).or_insert(0) += 1;
        }
        x.tie_rounds = Some(hist);
    }
    Ok(x)
}
