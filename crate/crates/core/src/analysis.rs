//! Post-processing of two-robot traces: maximum distance, attempts, phases
//! and Monte Carlo statistics.
//!
//! An attempt pairs the λ-look of the robot that moves later with the other
//! robot's latest look at or before that move; its window runs until both
//! robots have started their next cycles. An attempt is successful when the
//! maximum future distance at the end of the window is at most half of what
//! it was at the start. A phase is a run of attempts ending at the first
//! successful one.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::engine::{Position, Trace};
use crate::error::{Result, SimError};
use crate::rat::Rat;

/// Maximum inter-robot distance over `[t, horizon]`, for every `t`.
///
/// Positions are piecewise linear with kinks only at move starts and ends,
/// and the distance between two such paths is convex between consecutive
/// kinks, so its maximum over any interval sits at a kink or an endpoint.
#[derive(Debug, Clone)]
pub struct DistanceProfile {
    /// Sorted kink times paired with the maximum distance from that kink on.
    suffix: Vec<(Rat, Rat)>,
    horizon: Option<Rat>,
    kink_distances: Vec<Rat>,
}

impl DistanceProfile {
    pub fn new<P: Position>(trace: &Trace<P>) -> Result<Self> {
        let horizon = trace.horizon();
        let mut times: Vec<Rat> = Vec::new();
        times.push(Rat::zero());
        for run in &trace.runs[..2] {
            for s in &run.segments {
                times.push(s.move_start.clone());
                times.push(s.move_end.clone());
            }
        }
        if let Some(h) = &horizon {
            times.push(h.clone());
            times.retain(|t| t <= h);
        }
        times.sort();
        times.dedup();
        let mut dists = Vec::with_capacity(times.len());
        for t in &times {
            dists.push(trace.distance_at(t)?);
        }
        let mut suffix = Vec::with_capacity(times.len());
        let mut best = Rat::zero();
        for (t, d) in times.into_iter().zip(dists.iter()).rev() {
            if *d > best {
                best = d.clone();
            }
            suffix.push((t, best.clone()));
        }
        suffix.reverse();
        Ok(DistanceProfile { suffix, horizon, kink_distances: dists })
    }

    pub fn horizon(&self) -> Option<&Rat> {
        self.horizon.as_ref()
    }

    /// Supremum of the distance over `[t, horizon]`.
    pub fn max_distance_from<P: Position>(&self, trace: &Trace<P>, t: &Rat) -> Result<Rat> {
        let here = trace.distance_at(t)?;
        let i = self.suffix.partition_point(|(bt, _)| bt < t);
        Ok(match self.suffix.get(i) {
            Some((_, m)) if *m > here => m.clone(),
            _ => here,
        })
    }

    /// Distances at the kink times, in time order.
    pub fn kink_distances(&self) -> &[Rat] {
        &self.kink_distances
    }
}

/// Convenience wrapper building a profile for a single query.
pub fn max_distance_from<P: Position>(trace: &Trace<P>, t: &Rat) -> Result<Rat> {
    DistanceProfile::new(trace)?.max_distance_from(trace, t)
}

/// Which instant decides the later-moving robot of an attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MoveRule {
    #[default]
    MoveStart,
    MoveEnd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttemptRecord {
    /// Robot that moved later, and the cycle of its paired look.
    pub later: (usize, u64),
    /// The other robot and the cycle of its latest look at or before the later move.
    pub earlier: (usize, u64),
    /// Looks of both robots inside the window.
    pub looks: u64,
    pub t_begin: Rat,
    pub t_end: Rat,
    pub max_dist_before: Rat,
    pub max_dist_after: Rat,
    pub successful: bool,
}

pub fn classify_success(max_dist_before: &Rat, max_dist_after: &Rat) -> bool {
    max_dist_after + max_dist_after <= *max_dist_before
}

/// Splits a two-robot trace into attempts. Stops at the first attempt that
/// is not complete: it involves a gathering decision, or the trace does not
/// extend two more cycles past it for a robot that is still active.
pub fn segment_attempts<P: Position>(trace: &Trace<P>, rule: MoveRule) -> Result<Vec<AttemptRecord>> {
    if trace.runs.len() != 2 {
        return Err(SimError::InvalidInput("attempt segmentation needs exactly two robots".into()));
    }
    let profile = DistanceProfile::new(trace)?;
    let key = |robot: usize, c: usize| {
        let s = &trace.runs[robot].segments[c];
        match rule {
            MoveRule::MoveStart => &s.move_start,
            MoveRule::MoveEnd => &s.move_end,
        }
    };
    let mut cursor = [0usize, 0usize];
    let mut t_begin = Rat::zero();
    let mut before = profile.max_distance_from(trace, &t_begin)?;
    let mut out = Vec::new();
    loop {
        let usable = |robot: usize, c: usize| {
            trace.runs[robot].segments.get(c).is_some_and(|s| s.lambda.is_some())
        };
        if !usable(0, cursor[0]) || !usable(1, cursor[1]) {
            break;
        }
        let later = if key(1, cursor[1]) > key(0, cursor[0]) { 1 } else { 0 };
        let other = 1 - later;
        let t = key(later, cursor[later]);
        let segs = &trace.runs[other].segments;
        let mut c2 = cursor[other];
        while segs.get(c2 + 1).is_some_and(|s| s.lambda.is_some() && s.look_time <= *t) {
            c2 += 1;
        }
        let cl = cursor[later];
        let complete = |robot: usize, c: usize| {
            let run = &trace.runs[robot];
            run.decided_at.is_some() || run.segments.len() > c + 2
        };
        if !complete(later, cl) || !complete(other, c2) {
            break;
        }
        let t_end = trace.runs[later].segments[cl].move_end.clone().max(segs[c2].move_end.clone());
        if profile.horizon().is_some_and(|h| t_end > *h) {
            break;
        }
        let after = profile.max_distance_from(trace, &t_end)?;
        out.push(AttemptRecord {
            later: (later, cl as u64),
            earlier: (other, c2 as u64),
            looks: 1 + (c2 - cursor[other] + 1) as u64,
            t_begin: t_begin.clone(),
            t_end: t_end.clone(),
            successful: classify_success(&before, &after),
            max_dist_before: before,
            max_dist_after: after.clone(),
        });
        cursor[later] = cl + 1;
        cursor[other] = c2 + 1;
        t_begin = t_end;
        before = after;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseRecord {
    pub attempts: Vec<AttemptRecord>,
    pub total_looks: u64,
    /// The last attempt succeeded.
    pub terminal: bool,
}

/// Greedy split after every successful attempt.
pub fn segment_phases(attempts: &[AttemptRecord]) -> Vec<PhaseRecord> {
    let mut phases = Vec::new();
    let mut current: Vec<AttemptRecord> = Vec::new();
    for a in attempts {
        current.push(a.clone());
        if a.successful {
            phases.push(close_phase(core::mem::take(&mut current), true));
        }
    }
    if !current.is_empty() {
        phases.push(close_phase(current, false));
    }
    phases
}

fn close_phase(attempts: Vec<AttemptRecord>, terminal: bool) -> PhaseRecord {
    let total_looks = attempts.iter().map(|a| a.looks).sum();
    PhaseRecord { attempts, total_looks, terminal }
}

/// What the statistics need from one trial.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialSummary {
    pub gathered: bool,
    pub total_looks: u64,
    pub gather_time: Option<Rat>,
    pub completed_attempts: u64,
    pub successful_attempts: u64,
    /// Look counts of the phases that ended with a successful attempt.
    pub phase_looks: Vec<u64>,
    /// λ-looks of robot 0 at or before robot 1's first actual move.
    pub repeat_count: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnalysisOptions {
    #[cfg_attr(feature = "serde", serde(default))]
    pub attempts: bool,
    #[cfg_attr(feature = "serde", serde(default))]
    pub move_rule: MoveRule,
}

pub fn summarize<P: Position>(trace: &Trace<P>, options: &AnalysisOptions) -> Result<TrialSummary> {
    let mut summary = TrialSummary {
        gathered: trace.gather_time().is_some(),
        total_looks: trace.total_looks() as u64,
        gather_time: trace.gather_time(),
        ..TrialSummary::default()
    };
    if trace.runs.len() == 2 {
        summary.repeat_count = repeat_count(trace);
    }
    if options.attempts {
        let attempts = segment_attempts(trace, options.move_rule)?;
        summary.completed_attempts = attempts.len() as u64;
        summary.successful_attempts = attempts.iter().filter(|a| a.successful).count() as u64;
        summary.phase_looks =
            segment_phases(&attempts).iter().filter(|p| p.terminal).map(|p| p.total_looks).collect();
    }
    Ok(summary)
}

fn repeat_count<P: Position>(trace: &Trace<P>) -> Option<u64> {
    let first_move = trace.runs[1].segments.iter().find(|s| s.origin != s.destination)?;
    let n = trace.runs[0]
        .segments
        .iter()
        .filter(|s| s.lambda.is_some() && s.look_time <= first_move.move_start)
        .count();
    Some(n as u64)
}

/// Aggregate of identically configured trials. Estimates come with 3σ
/// half-widths (binomial for proportions, sample standard error for means).
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StatsReport {
    pub trials: u64,
    pub gathered: u64,
    pub gathered_fraction: Rat,
    pub gathered_fraction_halfwidth: f64,
    pub mean_total_looks: f64,
    pub total_looks_halfwidth: f64,
    pub max_total_looks: u64,
    pub completed_attempts: u64,
    pub successful_attempts: u64,
    pub mean_attempt_success_rate: Option<f64>,
    pub attempt_success_halfwidth: Option<f64>,
    pub completed_phases: u64,
    pub mean_looks_per_phase: Option<f64>,
    pub looks_per_phase_halfwidth: Option<f64>,
    /// Histogram of [`TrialSummary::repeat_count`].
    pub repeat_counts: BTreeMap<u64, u64>,
}

pub fn aggregate<P: Position>(traces: &[Trace<P>], options: &AnalysisOptions) -> Result<StatsReport> {
    let summaries = traces.iter().map(|t| summarize(t, options)).collect::<Result<Vec<_>>>()?;
    aggregate_summaries(&summaries)
}

pub fn aggregate_summaries(summaries: &[TrialSummary]) -> Result<StatsReport> {
    if summaries.is_empty() {
        return Err(SimError::InvalidInput("no trials to aggregate".into()));
    }
    let n = summaries.len() as u64;
    let gathered = summaries.iter().filter(|s| s.gathered).count() as u64;
    let looks: Vec<f64> = summaries.iter().map(|s| s.total_looks as f64).collect();
    let (mean_looks, looks_hw) = mean_and_halfwidth(&looks);
    let completed_attempts: u64 = summaries.iter().map(|s| s.completed_attempts).sum();
    let successful_attempts: u64 = summaries.iter().map(|s| s.successful_attempts).sum();
    let phase_looks: Vec<f64> = summaries.iter().flat_map(|s| s.phase_looks.iter().map(|&l| l as f64)).collect();
    let (success_rate, success_hw) = if completed_attempts > 0 {
        let p = successful_attempts as f64 / completed_attempts as f64;
        (Some(round12(p)), Some(round12(proportion_halfwidth(p, completed_attempts))))
    } else {
        (None, None)
    };
    let (phase_mean, phase_hw) = if phase_looks.is_empty() {
        (None, None)
    } else {
        let (m, h) = mean_and_halfwidth(&phase_looks);
        (Some(m), Some(h))
    };
    let mut repeat_counts = BTreeMap::new();
    for k in summaries.iter().filter_map(|s| s.repeat_count) {
        *repeat_counts.entry(k).or_insert(0) += 1;
    }
    let fraction = Rat::frac(gathered as i64, n as i64);
    Ok(StatsReport {
        trials: n,
        gathered,
        gathered_fraction_halfwidth: round12(proportion_halfwidth(fraction.to_f64(), n)),
        gathered_fraction: fraction,
        mean_total_looks: mean_looks,
        total_looks_halfwidth: looks_hw,
        max_total_looks: summaries.iter().map(|s| s.total_looks).max().unwrap_or(0),
        completed_attempts,
        successful_attempts,
        mean_attempt_success_rate: success_rate,
        attempt_success_halfwidth: success_hw,
        completed_phases: phase_looks.len() as u64,
        mean_looks_per_phase: phase_mean,
        looks_per_phase_halfwidth: phase_hw,
        repeat_counts,
    })
}

fn proportion_halfwidth(p: f64, n: u64) -> f64 {
    3.0 * libm::sqrt(p * (1.0 - p) / n as f64)
}

/// Mean and `3 s / sqrt(n)`, with `s` the sample standard deviation.
fn mean_and_halfwidth(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (round12(mean), 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (round12(mean), round12(3.0 * libm::sqrt(var / n)))
}

/// Rounds to 12 significant decimal digits.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let exp = libm::floor(libm::log10(libm::fabs(x))) as i32;
    let scale = libm::pow(10.0, (11 - exp) as f64);
    if scale.is_finite() && (x * scale).is_finite() {
        libm::round(x * scale) / scale
    } else {
        x
    }
}

/// Expected-look bound for gathering from distance `delta` against a
/// scheduler whose cycles last more than `tau`: `18 (log2(delta / tau) + 1)`,
/// with the logarithm clamped at zero.
pub fn gathering_look_bound(delta: &Rat, tau: &Rat) -> Result<f64> {
    if !delta.is_positive() || !tau.is_positive() {
        return Err(SimError::InvalidInput("distance and tau must be positive".into()));
    }
    let log = (delta / tau).log2_approx().max(0.0);
    Ok(18.0 * (log + 1.0))
}

/// Number of halvings needed before the travelled distance
/// `delta (1 - 2^-k)` exceeds `gap`.
pub fn geometric_repeat_count(gap: &Rat, delta: &Rat) -> Result<u64> {
    repeat_count_with(gap, delta, &Rat::frac(1, 2), &Rat::one())
}

/// Looks a robot with zero wait and zero computation delay, moving at
/// `speed` with contraction factor `contraction = 1 - λ` toward an idle
/// robot at distance `delta`, takes at or before time `gap`: the smallest
/// `k` with `(delta / speed)(1 - contraction^k) > gap`.
pub fn repeat_count_with(gap: &Rat, delta: &Rat, contraction: &Rat, speed: &Rat) -> Result<u64> {
    if !gap.is_positive() || !speed.is_positive() || !(contraction.is_positive() && *contraction < Rat::one()) {
        return Err(SimError::InvalidInput("need gap > 0, speed > 0 and 0 < contraction < 1".into()));
    }
    let reach = delta / speed;
    if *gap >= reach {
        return Err(SimError::InvalidInput("gap must be smaller than the time to cover the distance".into()));
    }
    let mut remaining = Rat::one();
    let mut k = 0;
    loop {
        k += 1;
        remaining *= contraction;
        if &reach * &(Rat::one() - &remaining) > *gap {
            return Ok(k);
        }
    }
}
