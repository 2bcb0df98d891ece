//! Event-driven execution of wait-look-compute-move cycles.
//!
//! Each robot has exactly one pending event at any moment (its next look,
//! move start or move end), so the scheduler loop is a scan for the smallest
//! `(time, kind, robot)` key. Simultaneous events run looks first, then move
//! ends, then move starts; within a kind, lower robot ids go first.
//!
//! A move end is only queued once its move start has been processed, and a
//! look only once the previous move end has, so a zero-length move still
//! produces its start and end in cycle order at the same instant.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Result, SimError};
use crate::geometry::{self, Point2};
use crate::policies::{self, LambdaPolicy, LambdaSampler};
use crate::rat::Rat;
use crate::rng::{stream, uniform_closed, SimRng};

/// Positions the engine can move between.
pub trait Position: Clone + Eq + Ord + fmt::Debug {
    fn distance(&self, other: &Self) -> Result<Rat>;
    /// `self + frac (to - self)`.
    fn lerp(&self, to: &Self, frac: &Rat) -> Self;
}

impl Position for Rat {
    fn distance(&self, other: &Self) -> Result<Rat> {
        Ok((self - other).abs())
    }

    fn lerp(&self, to: &Self, frac: &Rat) -> Self {
        policies::destination(self, to, frac)
    }
}

impl Position for Point2 {
    fn distance(&self, other: &Self) -> Result<Rat> {
        self.dist(other)
    }

    fn lerp(&self, to: &Self, frac: &Rat) -> Self {
        Point2::lerp(self, to, frac)
    }
}

/// Turns a drawn λ and a snapshot into a destination.
pub trait Space {
    type Point: Position;

    fn destination(&mut self, own: &Self::Point, observed: &[Self::Point], lambda: &Rat) -> Result<Self::Point>;
}

/// The real line. A robot applies λ toward the nearest observed robot,
/// preferring the smaller coordinate on ties.
#[derive(Debug, Clone, Copy, Default)]
pub struct Line;

impl Space for Line {
    type Point = Rat;

    fn destination(&mut self, own: &Rat, observed: &[Rat], lambda: &Rat) -> Result<Rat> {
        let target = nearest(own, observed)?;
        Ok(policies::destination(own, target, lambda))
    }
}

/// The plane. The intended destination is `own + λ d`, where `d` points to
/// the nearest observed robot; optionally a random sideways offset is added
/// and, when `project` is set, removed again by orthogonal projection onto
/// the line through the robot and its target.
#[derive(Debug, Clone)]
pub struct Plane {
    lateral: Option<SimRng>,
    project: bool,
}

impl Plane {
    pub fn exact() -> Self {
        Plane { lateral: None, project: false }
    }

    pub fn with_lateral_noise(seed: u64, project: bool) -> Self {
        Plane { lateral: Some(stream(seed, &[LATERAL_STREAM])), project }
    }
}

const LATERAL_STREAM: u64 = 0x1a7e_4a15;

impl Space for Plane {
    type Point = Point2;

    fn destination(&mut self, own: &Point2, observed: &[Point2], lambda: &Rat) -> Result<Point2> {
        let target = nearest(own, observed)?;
        let dir = target - own;
        let mut dest = own + &dir.scale(lambda);
        if let Some(rng) = self.lateral.as_mut() {
            let mu = uniform_closed(rng, &-Rat::one(), &Rat::one());
            dest = &dest + &dir.perp().scale(&mu);
        }
        if self.project {
            dest = geometry::project_onto_line(own, target, &dest)?;
        }
        Ok(dest)
    }
}

fn nearest<'a, P: Position>(own: &P, observed: &'a [P]) -> Result<&'a P> {
    let mut best: Option<(Rat, &P)> = None;
    for p in observed {
        let d = own.distance(p)?;
        // `observed` is sorted, so keeping the first minimum prefers the smaller point.
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, p));
        }
    }
    best.map(|(_, p)| p).ok_or(SimError::InvalidInput("snapshot contains no other robot".into()))
}

/// Static description of one robot.
#[derive(Debug, Clone)]
pub struct RobotSpec<P> {
    pub start: P,
    pub speed: Rat,
    pub policy: LambdaPolicy,
}

impl<P> RobotSpec<P> {
    pub fn new(start: P, speed: Rat, policy: LambdaPolicy) -> Self {
        RobotSpec { start, speed, policy }
    }
}

/// One wait-look-compute-move cycle as it was executed.
///
/// The robot sits at `origin` on `[cycle_start, move_start]` and moves
/// linearly to `destination` on `[move_start, move_end]`. A look that
/// decided gathering has `lambda == None` and an empty move.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleSegment<P> {
    pub cycle: u64,
    pub cycle_start: Rat,
    pub wait: Rat,
    pub look_time: Rat,
    pub compute: Rat,
    pub lambda: Option<Rat>,
    pub move_start: Rat,
    pub move_end: Rat,
    pub origin: P,
    pub destination: P,
}

impl<P: Position> CycleSegment<P> {
    fn position_at(&self, t: &Rat) -> P {
        if *t <= self.move_start {
            self.origin.clone()
        } else if *t >= self.move_end {
            self.destination.clone()
        } else {
            let frac = (t - &self.move_start) / (&self.move_end - &self.move_start);
            self.origin.lerp(&self.destination, &frac)
        }
    }

    /// Strictly inside the move interval.
    pub fn is_moving_at(&self, t: &Rat) -> bool {
        self.move_start < *t && *t < self.move_end
    }
}

/// The executed history of one robot.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RobotRun<P> {
    pub id: usize,
    pub speed: Rat,
    pub start: P,
    pub segments: Vec<CycleSegment<P>>,
    /// Time of the next look once it has been scheduled; `None` after deciding.
    pub next_look: Option<Rat>,
    pub decided_at: Option<Rat>,
}

impl<P: Position> RobotRun<P> {
    fn new(id: usize, spec: &RobotSpec<P>) -> Self {
        RobotRun {
            id,
            speed: spec.speed.clone(),
            start: spec.start.clone(),
            segments: Vec::new(),
            next_look: None,
            decided_at: None,
        }
    }

    /// Last instant at which the position is known; `None` means forever.
    pub fn horizon(&self) -> Option<Rat> {
        if self.decided_at.is_some() {
            None
        } else {
            Some(self.next_look.clone().unwrap_or_default())
        }
    }

    fn knows(&self, t: &Rat) -> bool {
        self.decided_at.is_some() || self.next_look.as_ref().is_some_and(|h| t <= h)
    }

    pub fn look_count(&self) -> usize {
        self.segments.len()
    }

    /// Segment whose look is the latest one at or before `t`.
    pub fn segment_at(&self, t: &Rat) -> Option<&CycleSegment<P>> {
        let i = self.segments.partition_point(|s| s.look_time <= *t);
        i.checked_sub(1).map(|i| &self.segments[i])
    }

    pub fn position_at(&self, t: &Rat) -> Result<P> {
        if !self.knows(t) {
            return Err(SimError::ScheduleUnderrun { robot: self.id, cycle: self.segments.len() as u64 });
        }
        Ok(match self.segment_at(t) {
            Some(seg) => seg.position_at(t),
            None => self.start.clone(),
        })
    }

    pub fn is_moving_at(&self, t: &Rat) -> bool {
        self.segment_at(t).is_some_and(|s| s.is_moving_at(t))
    }

    /// Where the robot stands once its current move completes.
    pub fn resting_position(&self) -> &P {
        self.segments.last().map_or(&self.start, |s| &s.destination)
    }
}

/// What a robot saw at a look: the other robots' exact positions, unlabeled.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Snapshot<P> {
    pub time: Rat,
    pub observer: usize,
    /// Sorted, so the snapshot carries no identities.
    pub observed: Vec<P>,
}

pub fn observe<P: Position>(runs: &[RobotRun<P>], observer: usize, t: &Rat) -> Result<Snapshot<P>> {
    let mut observed = Vec::with_capacity(runs.len().saturating_sub(1));
    for run in runs.iter().filter(|r| r.id != observer) {
        observed.push(run.position_at(t)?);
    }
    observed.sort();
    Ok(Snapshot { time: t.clone(), observer, observed })
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum EventKind<P> {
    /// `lambda` is `None` when the look found another robot at the observer's position.
    Look { position: P, observed: Vec<P>, lambda: Option<Rat>, destination: P },
    MoveStart { from: P, to: P },
    MoveEnd { at: P },
    DecideGathered { at: P },
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Event<P> {
    pub time: Rat,
    pub robot: usize,
    pub cycle: u64,
    pub kind: EventKind<P>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum RunStatus {
    Gathered,
    LookBudgetExhausted,
    TimeBudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Budgets {
    pub max_total_looks: u64,
    /// No events after this time are processed.
    #[cfg_attr(feature = "serde", serde(default))]
    pub max_time: Option<Rat>,
}

impl Budgets {
    pub fn looks(max_total_looks: u64) -> Self {
        Budgets { max_total_looks, max_time: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trace<P> {
    pub events: Vec<Event<P>>,
    pub runs: Vec<RobotRun<P>>,
    pub status: RunStatus,
    /// Time of the last processed event.
    pub end_time: Rat,
}

impl<P: Position> Trace<P> {
    pub fn look_count(&self, robot: usize) -> usize {
        self.runs[robot].look_count()
    }

    pub fn total_looks(&self) -> usize {
        self.runs.iter().map(RobotRun::look_count).sum()
    }

    /// Time of the last gathering decision, when every robot decided.
    pub fn gather_time(&self) -> Option<Rat> {
        if self.status != RunStatus::Gathered {
            return None;
        }
        self.runs.iter().filter_map(|r| r.decided_at.clone()).max()
    }

    /// Distance between robots 0 and 1 at time `t`.
    pub fn distance_at(&self, t: &Rat) -> Result<Rat> {
        self.runs[0].position_at(t)?.distance(&self.runs[1].position_at(t)?)
    }

    /// Earliest horizon over all robots; `None` when every robot has decided.
    pub fn horizon(&self) -> Option<Rat> {
        self.runs.iter().filter_map(RobotRun::horizon).min()
    }
}

/// `γ_k = L_0(k) - L_1(k)`, the signed gap between the robots' k-th looks.
pub fn gap<P: Position>(trace: &Trace<P>, cycle: u64) -> Result<Rat> {
    let look = |robot: usize| {
        trace.runs[robot]
            .segments
            .get(cycle as usize)
            .map(|s| s.look_time.clone())
            .ok_or(SimError::MissingLook { robot, cycle })
    };
    Ok(look(0)? - look(1)?)
}

/// Read-only state handed to the scheduler.
#[derive(Debug, Clone, Copy)]
pub struct View<'a, P> {
    pub now: &'a Rat,
    pub runs: &'a [RobotRun<P>],
}

/// The committed part of a look that the scheduler reacts to.
#[derive(Debug, Clone)]
pub struct LookOutcome<'a, P> {
    pub robot: usize,
    pub cycle: u64,
    pub time: &'a Rat,
    pub origin: &'a P,
    pub destination: &'a P,
    pub lambda: &'a Rat,
    /// Length of the move divided by the robot's speed.
    pub duration: &'a Rat,
}

/// Source of wait times and computation delays.
pub trait Scheduler<P: Position> {
    /// Wait before the first look.
    fn first_wait(&mut self, robot: usize, view: View<'_, P>) -> Result<Rat>;

    /// Called right after a look that drew λ: returns the computation delay
    /// of this cycle and the wait of the next one.
    fn after_look(&mut self, look: &LookOutcome<'_, P>, view: View<'_, P>) -> Result<(Rat, Rat)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Rank {
    Look,
    MoveEnd,
    MoveStart,
}

const POLICY_STREAM: u64 = 0x0090_11c4;

/// Runs the robots until all have decided gathered or a budget is hit.
///
/// Each robot draws λ from its own stream derived from `seed`.
pub fn run<S, A>(
    space: &mut S,
    robots: &[RobotSpec<S::Point>],
    scheduler: &mut A,
    seed: u64,
    budgets: &Budgets,
) -> Result<Trace<S::Point>>
where
    S: Space,
    A: Scheduler<S::Point>,
{
    if robots.len() < 2 {
        return Err(SimError::InvalidInput("at least two robots are required".into()));
    }
    if budgets.max_total_looks == 0 {
        return Err(SimError::InvalidInput("look budget must be positive".into()));
    }
    for spec in robots {
        if !spec.speed.is_positive() {
            return Err(SimError::InvalidInput(alloc::format!("speed must be positive, got {}", spec.speed)));
        }
        spec.policy.validate()?;
    }

    let mut runs: Vec<RobotRun<S::Point>> = robots.iter().enumerate().map(|(i, s)| RobotRun::new(i, s)).collect();
    let mut samplers: Vec<LambdaSampler> = robots.iter().enumerate().map(|(i, s)| s.policy.sampler(i)).collect();
    let mut rngs: Vec<SimRng> = (0..robots.len()).map(|i| stream(seed, &[POLICY_STREAM, i as u64])).collect();
    let mut pending: Vec<Option<(Rat, Rank)>> = Vec::with_capacity(robots.len());
    let zero = Rat::zero();
    for i in 0..robots.len() {
        let w = scheduler.first_wait(i, View { now: &zero, runs: &runs })?;
        check_delay(&w, "wait")?;
        runs[i].next_look = Some(w.clone());
        pending.push(Some((w, Rank::Look)));
    }

    let mut events = Vec::new();
    let mut total_looks = 0u64;
    let mut now = Rat::zero();
    let status = loop {
        let next = pending
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().map(|(t, k)| (t, *k, i)))
            .min_by(|a, b| a.cmp(b))
            .map(|(t, k, i)| (t.clone(), k, i));
        let Some((t, rank, r)) = next else {
            break RunStatus::Gathered;
        };
        if budgets.max_time.as_ref().is_some_and(|m| t > *m) {
            break RunStatus::TimeBudgetExhausted;
        }
        if rank == Rank::Look && total_looks >= budgets.max_total_looks {
            break RunStatus::LookBudgetExhausted;
        }
        now = t;
        let cycle = runs[r].segments.len() as u64;
        match rank {
            Rank::Look => {
                total_looks += 1;
                let origin = runs[r].resting_position().clone();
                let cycle_start = runs[r].segments.last().map_or(Rat::zero(), |s| s.move_end.clone());
                let snapshot = observe(&runs, r, &now)?;
                let wait = &now - &cycle_start;
                if snapshot.observed.contains(&origin) {
                    runs[r].segments.push(CycleSegment {
                        cycle,
                        cycle_start,
                        wait,
                        look_time: now.clone(),
                        compute: Rat::zero(),
                        lambda: None,
                        move_start: now.clone(),
                        move_end: now.clone(),
                        origin: origin.clone(),
                        destination: origin.clone(),
                    });
                    runs[r].next_look = None;
                    runs[r].decided_at = Some(now.clone());
                    pending[r] = None;
                    events.push(Event {
                        time: now.clone(),
                        robot: r,
                        cycle,
                        kind: EventKind::Look {
                            position: origin.clone(),
                            observed: snapshot.observed,
                            lambda: None,
                            destination: origin.clone(),
                        },
                    });
                    events.push(Event { time: now.clone(), robot: r, cycle, kind: EventKind::DecideGathered { at: origin } });
                    continue;
                }
                let lambda = samplers[r].sample(&mut rngs[r])?;
                let destination = space.destination(&origin, &snapshot.observed, &lambda)?;
                let duration = origin.distance(&destination)? / &runs[r].speed;
                let outcome = LookOutcome {
                    robot: r,
                    cycle,
                    time: &now,
                    origin: &origin,
                    destination: &destination,
                    lambda: &lambda,
                    duration: &duration,
                };
                let (compute, next_wait) = scheduler.after_look(&outcome, View { now: &now, runs: &runs })?;
                check_delay(&compute, "computation delay")?;
                check_delay(&next_wait, "wait")?;
                let move_start = &now + &compute;
                let move_end = &move_start + &duration;
                runs[r].next_look = Some(&move_end + &next_wait);
                runs[r].segments.push(CycleSegment {
                    cycle,
                    cycle_start,
                    wait,
                    look_time: now.clone(),
                    compute,
                    lambda: Some(lambda.clone()),
                    move_start: move_start.clone(),
                    move_end,
                    origin: origin.clone(),
                    destination: destination.clone(),
                });
                pending[r] = Some((move_start, Rank::MoveStart));
                events.push(Event {
                    time: now.clone(),
                    robot: r,
                    cycle,
                    kind: EventKind::Look { position: origin, observed: snapshot.observed, lambda: Some(lambda), destination },
                });
            }
            Rank::MoveStart => {
                let seg = runs[r].segments.last().expect("move without a look");
                events.push(Event {
                    time: now.clone(),
                    robot: r,
                    cycle: cycle - 1,
                    kind: EventKind::MoveStart { from: seg.origin.clone(), to: seg.destination.clone() },
                });
                pending[r] = Some((seg.move_end.clone(), Rank::MoveEnd));
            }
            Rank::MoveEnd => {
                let seg = runs[r].segments.last().expect("move without a look");
                events.push(Event {
                    time: now.clone(),
                    robot: r,
                    cycle: cycle - 1,
                    kind: EventKind::MoveEnd { at: seg.destination.clone() },
                });
                let next = runs[r].next_look.clone().expect("undecided robot without a next look");
                pending[r] = Some((next, Rank::Look));
            }
        }
    };
    Ok(Trace { events, runs, status, end_time: now })
}

fn check_delay(d: &Rat, what: &str) -> Result<()> {
    if d.is_negative() {
        return Err(SimError::InvalidSchedule(alloc::format!("negative {what} {d}")));
    }
    Ok(())
}
