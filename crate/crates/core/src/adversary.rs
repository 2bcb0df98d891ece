//! Schedulers choosing wait times `W` and computation delays `C`.
//!
//! Oblivious schedulers are pure functions of `(robot, cycle, seed)` and
//! never see the robots' random choices. The adaptive scheduler sees every
//! λ as soon as it is drawn.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::engine::{LookOutcome, Position, Scheduler, View};
use crate::error::{Result, SimError};
use crate::rat::Rat;
use crate::rng::{stream, uniform_closed};

/// Resolution of the τ-bounded draws: `W + C` and `W` are multiples of `τ / 2^TAU_GRID_BITS`.
pub const TAU_GRID_BITS: u32 = 32;

/// A per-robot source of `(W, C)` pairs indexed by cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum Generator {
    Constant {
        wait: Rat,
        #[cfg_attr(feature = "serde", serde(default))]
        compute: Rat,
    },
    /// A finite list; running past its end is a schedule underrun.
    Explicit { delays: Vec<(Rat, Rat)> },
    /// `W` and `C` independently uniform on closed ranges.
    Uniform { wait: (Rat, Rat), compute: (Rat, Rat) },
    /// `W + C` uniform on `(τ, 2τ]`, the look offset `W` uniform on `[0, W + C]`.
    TauBounded { tau: Rat },
    /// A fixed opening followed by another generator (indexed by absolute cycle).
    Prefix { prefix: Vec<(Rat, Rat)>, then: Box<Generator> },
    /// Alternating single activations in rounds of length `round`: the robot
    /// with parity `p` looks at `(2j + p) round`. Assumes both robots apply
    /// the same deterministic `lambda` with speed `speed` from initial
    /// distance `delta`, so that every move length is known in advance.
    SsyncAlternating { round: Rat, delta: Rat, lambda: Rat, speed: Rat, parity: u64 },
}

/// The scheduler of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum AdversaryPolicy {
    /// Per-robot `(W, C)` lists.
    ObliviousExplicit { delays: Vec<Vec<(Rat, Rat)>> },
    /// One generator per robot, or a single generator shared by all.
    ObliviousGenerated {
        generators: Vec<Generator>,
        #[cfg_attr(feature = "serde", serde(default))]
        seed: u64,
    },
    TauBounded {
        tau: Rat,
        #[cfg_attr(feature = "serde", serde(default))]
        seed: u64,
    },
    /// Waits from one generator per robot (or one shared); computation delay always zero.
    AsyncIc {
        waits: Vec<Generator>,
        #[cfg_attr(feature = "serde", serde(default))]
        seed: u64,
    },
    /// Places every look after the first inside the other robot's move.
    /// Two robots only; `initial_waits` must differ.
    Adaptive { initial_waits: (Rat, Rat) },
}

impl AdversaryPolicy {
    pub fn is_oblivious(&self) -> bool {
        !matches!(self, AdversaryPolicy::Adaptive { .. })
    }

    /// The same policy with a different seed (no-op for unseeded kinds).
    pub fn with_seed(&self, new_seed: u64) -> Self {
        let mut p = self.clone();
        match &mut p {
            AdversaryPolicy::ObliviousGenerated { seed, .. }
            | AdversaryPolicy::TauBounded { seed, .. }
            | AdversaryPolicy::AsyncIc { seed, .. } => *seed = new_seed,
            AdversaryPolicy::ObliviousExplicit { .. } | AdversaryPolicy::Adaptive { .. } => {}
        }
        p
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            AdversaryPolicy::ObliviousGenerated { seed, .. }
            | AdversaryPolicy::TauBounded { seed, .. }
            | AdversaryPolicy::AsyncIc { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn validate(&self, robots: usize) -> Result<()> {
        match self {
            AdversaryPolicy::ObliviousExplicit { delays } => {
                if delays.len() != robots {
                    return Err(invalid(format!("{} delay lists for {robots} robots", delays.len())));
                }
                delays.iter().flatten().try_for_each(check_pair)
            }
            AdversaryPolicy::ObliviousGenerated { generators, .. } | AdversaryPolicy::AsyncIc { waits: generators, .. } => {
                if generators.len() != 1 && generators.len() != robots {
                    return Err(invalid(format!("{} generators for {robots} robots", generators.len())));
                }
                generators.iter().try_for_each(Generator::validate)
            }
            AdversaryPolicy::TauBounded { tau, .. } => check_tau(tau),
            AdversaryPolicy::Adaptive { initial_waits: (a, b) } => {
                if robots != 2 {
                    return Err(invalid(format!("the adaptive scheduler drives two robots, not {robots}")));
                }
                if a.is_negative() || b.is_negative() || a == b {
                    return Err(invalid("initial waits must be non-negative and distinct".into()));
                }
                Ok(())
            }
        }
    }
}

impl Generator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Generator::Constant { wait, compute } => check_pair(&(wait.clone(), compute.clone())),
            Generator::Explicit { delays } => delays.iter().try_for_each(check_pair),
            Generator::Uniform { wait, compute } => {
                for (lo, hi) in [wait, compute] {
                    if lo.is_negative() || lo > hi {
                        return Err(invalid(format!("bad range [{lo}, {hi}]")));
                    }
                }
                Ok(())
            }
            Generator::TauBounded { tau } => check_tau(tau),
            Generator::Prefix { prefix, then } => {
                prefix.iter().try_for_each(check_pair)?;
                then.validate()
            }
            Generator::SsyncAlternating { round, delta, speed, parity, .. } => {
                if !round.is_positive() || !delta.is_positive() || !speed.is_positive() || *parity > 1 {
                    return Err(invalid("alternating schedule needs positive round, delta, speed and parity 0 or 1".into()));
                }
                Ok(())
            }
        }
    }

    /// `(W, C)` of `cycle`, drawing from `rng` if the generator is random.
    pub fn delays<R: Rng + ?Sized>(&self, robot: usize, cycle: u64, rng: &mut R) -> Result<(Rat, Rat)> {
        match self {
            Generator::Constant { wait, compute } => Ok((wait.clone(), compute.clone())),
            Generator::Explicit { delays } => {
                delays.get(cycle as usize).cloned().ok_or(SimError::ScheduleUnderrun { robot, cycle })
            }
            Generator::Uniform { wait, compute } => {
                Ok((uniform_closed(rng, &wait.0, &wait.1), uniform_closed(rng, &compute.0, &compute.1)))
            }
            Generator::TauBounded { tau } => Ok(tau_bounded_pair(tau, rng)),
            Generator::Prefix { prefix, then } => match prefix.get(cycle as usize) {
                Some(d) => Ok(d.clone()),
                None => then.delays(robot, cycle, rng),
            },
            Generator::SsyncAlternating { round, delta, lambda, speed, parity } => {
                let look = |c: u64| round * &Rat::from_int((2 * c + parity) as i64);
                let cycle_start = if cycle == 0 {
                    Rat::zero()
                } else {
                    let a = 2 * (cycle - 1) + parity;
                    let contraction = (&Rat::one() - lambda).abs();
                    let mut len = delta * &lambda.abs();
                    for _ in 0..a {
                        len *= &contraction;
                    }
                    look(cycle - 1) + len / speed
                };
                let wait = look(cycle) - cycle_start;
                if wait.is_negative() {
                    return Err(SimError::InvalidSchedule(format!(
                        "round {round} is shorter than the move of robot {robot} in cycle {}",
                        cycle - 1
                    )));
                }
                Ok((wait, Rat::zero()))
            }
        }
    }
}

/// `W + C = τ (2^G + k) / 2^G` with `k` uniform in `[1, 2^G]`, and
/// `W = τ m / 2^G` with `m` uniform in `[0, 2^G + k]`.
fn tau_bounded_pair<R: Rng + ?Sized>(tau: &Rat, rng: &mut R) -> (Rat, Rat) {
    let grid = 1u64 << TAU_GRID_BITS;
    let k = rng.random_range(1..=grid);
    let m = rng.random_range(0..=grid + k);
    let unit = tau * &Rat::pow2(-(TAU_GRID_BITS as i32));
    let total = &unit * &Rat::from_int((grid + k) as i64);
    let wait = &unit * &Rat::from_int(m as i64);
    let compute = &total - &wait;
    (wait, compute)
}

fn check_pair(d: &(Rat, Rat)) -> Result<()> {
    if d.0.is_negative() || d.1.is_negative() {
        return Err(invalid(format!("negative delay ({}, {})", d.0, d.1)));
    }
    Ok(())
}

fn check_tau(tau: &Rat) -> Result<()> {
    if !tau.is_positive() {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

fn invalid(msg: alloc::string::String) -> SimError {
    SimError::InvalidSchedule(msg)
}

/// `(W, C)` for cycle `cycle` of `robot` under an oblivious policy.
pub fn next_delays_oblivious(policy: &AdversaryPolicy, robot: usize, cycle: u64) -> Result<(Rat, Rat)> {
    match policy {
        AdversaryPolicy::ObliviousExplicit { delays } => delays
            .get(robot)
            .and_then(|l| l.get(cycle as usize))
            .cloned()
            .ok_or(SimError::ScheduleUnderrun { robot, cycle }),
        AdversaryPolicy::ObliviousGenerated { generators, seed } => {
            pick(generators, robot).delays(robot, cycle, &mut stream(*seed, &[robot as u64, cycle]))
        }
        AdversaryPolicy::TauBounded { tau, seed } => Ok(tau_bounded_pair(tau, &mut stream(*seed, &[robot as u64, cycle]))),
        AdversaryPolicy::AsyncIc { waits, seed } => {
            let (w, _) = pick(waits, robot).delays(robot, cycle, &mut stream(*seed, &[robot as u64, cycle]))?;
            Ok((w, Rat::zero()))
        }
        AdversaryPolicy::Adaptive { .. } => {
            Err(SimError::InvalidInput("the adaptive scheduler has no precommitted delays".into()))
        }
    }
}

fn pick(generators: &[Generator], robot: usize) -> &Generator {
    if generators.len() == 1 {
        &generators[0]
    } else {
        &generators[robot]
    }
}

/// Fractions of the feasible interval tried in order; the first is the midpoint.
const CANDIDATES: [(i64, i64); 5] = [(1, 2), (1, 3), (2, 3), (1, 4), (3, 4)];

/// Delays for the look just taken by `look.robot`, chosen so that the other
/// robot's next look falls strictly inside this robot's move, at a point
/// other than the other robot's position. The next wait is half the move
/// duration. A zero-length move gets `(0, 0)`: the robot looks again at once.
pub fn adaptive_decide<P: Position>(view: View<'_, P>, look: &LookOutcome<'_, P>) -> Result<(Rat, Rat)> {
    if look.duration.is_zero() {
        return Ok((Rat::zero(), Rat::zero()));
    }
    let other = &view.runs[1 - look.robot];
    let other_look = other.next_look.as_ref().ok_or(SimError::Infeasible("the other robot has stopped"))?;
    let other_pos = other.resting_position();
    let t = look.time;
    let hi = other_look - t;
    if !hi.is_positive() {
        return Err(SimError::Infeasible("the other robot looks no later than this one"));
    }
    let lo = (&hi - look.duration).max(Rat::zero());
    for (n, d) in CANDIDATES {
        let compute = &lo + &((&hi - &lo) * Rat::frac(n, d));
        // Position of this robot when the other one looks.
        let frac = (&hi - &compute) / look.duration;
        if look.origin.lerp(look.destination, &frac) != *other_pos {
            return Ok((compute, look.duration * &Rat::frac(1, 2)));
        }
    }
    Err(SimError::Infeasible("every candidate delay lands on the other robot"))
}

/// Runtime state of an [`AdversaryPolicy`].
#[derive(Debug, Clone)]
pub struct Adversary {
    policy: AdversaryPolicy,
}

impl Adversary {
    pub fn new(policy: AdversaryPolicy, robots: usize) -> Result<Self> {
        policy.validate(robots)?;
        Ok(Adversary { policy })
    }

    pub fn policy(&self) -> &AdversaryPolicy {
        &self.policy
    }
}

impl<P: Position> Scheduler<P> for Adversary {
    fn first_wait(&mut self, robot: usize, _: View<'_, P>) -> Result<Rat> {
        match &self.policy {
            AdversaryPolicy::Adaptive { initial_waits } => {
                Ok(if robot == 0 { initial_waits.0.clone() } else { initial_waits.1.clone() })
            }
            p => Ok(next_delays_oblivious(p, robot, 0)?.0),
        }
    }

    fn after_look(&mut self, look: &LookOutcome<'_, P>, view: View<'_, P>) -> Result<(Rat, Rat)> {
        match &self.policy {
            AdversaryPolicy::Adaptive { .. } => adaptive_decide(view, look),
            p => {
                let (_, compute) = next_delays_oblivious(p, look.robot, look.cycle)?;
                let (wait, _) = next_delays_oblivious(p, look.robot, look.cycle + 1)?;
                Ok((compute, wait))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, Budgets, EventKind, Line, RobotSpec, RunStatus};
    use crate::policies::LambdaPolicy;
    use alloc::vec;

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    #[test]
    fn explicit_lists() {
        let p = AdversaryPolicy::ObliviousExplicit { delays: vec![vec![(r("1"), r("0")), (r("0"), r("0"))]] };
        assert_eq!(next_delays_oblivious(&p, 0, 0).unwrap(), (r("1"), r("0")));
        assert_eq!(next_delays_oblivious(&p, 0, 2), Err(SimError::ScheduleUnderrun { robot: 0, cycle: 2 }));
    }

    #[test]
    fn tau_bounded_sums_exceed_tau() {
        let tau = r("1");
        let p = AdversaryPolicy::TauBounded { tau: tau.clone(), seed: 3 };
        for i in 0..10_000u64 {
            let (w, c) = next_delays_oblivious(&p, (i % 2) as usize, i / 2).unwrap();
            let s = &w + &c;
            assert!(s > tau && s <= r("2"));
            assert!(!w.is_negative() && !c.is_negative());
        }
    }

    #[test]
    fn async_ic_has_no_compute_delay() {
        let p = AdversaryPolicy::AsyncIc {
            waits: vec![Generator::Uniform { wait: (r("0"), r("3")), compute: (r("1"), r("2")) }],
            seed: 9,
        };
        for c in 0..500 {
            assert!(next_delays_oblivious(&p, 1, c).unwrap().1.is_zero());
        }
    }

    #[test]
    fn prefix_then_generator() {
        let g = Generator::Prefix {
            prefix: vec![(r("2"), r("0"))],
            then: Box::new(Generator::Constant { wait: r("1/3"), compute: r("0") }),
        };
        let mut rng = stream(0, &[]);
        assert_eq!(g.delays(0, 0, &mut rng).unwrap(), (r("2"), r("0")));
        assert_eq!(g.delays(0, 5, &mut rng).unwrap(), (r("1/3"), r("0")));
    }

    #[test]
    fn adaptive_rejects_equal_initial_waits() {
        let p = AdversaryPolicy::Adaptive { initial_waits: (r("1"), r("1")) };
        assert!(p.validate(2).is_err());
        assert!(AdversaryPolicy::Adaptive { initial_waits: (r("2"), r("1")) }.validate(3).is_err());
    }

    fn oracle(values: &[&str]) -> LambdaPolicy {
        LambdaPolicy::Oracle { sequence: values.iter().map(|v| r(v)).collect() }
    }

    #[test]
    fn adaptive_worked_example() {
        // Robot 1 starts at 0 and looks first (t = 1); robot 0 starts at 1 and looks at t = 2.
        let robots = [
            RobotSpec::new(r("1"), r("1"), oracle(&["1", "1/2", "1/2"])),
            RobotSpec::new(r("0"), r("1"), oracle(&["1/2", "1/2", "1/2"])),
        ];
        let mut adv = Adversary::new(AdversaryPolicy::Adaptive { initial_waits: (r("2"), r("1")) }, 2).unwrap();
        let trace = run(&mut Line, &robots, &mut adv, 0, &Budgets::looks(3)).unwrap();
        let s1 = &trace.runs[1].segments[0];
        assert_eq!((s1.compute.clone(), s1.move_start.clone(), s1.move_end.clone()), (r("3/4"), r("7/4"), r("9/4")));
        let s0 = &trace.runs[0].segments[0];
        let EventKind::Look { observed, .. } = &trace.events.iter().find(|e| e.robot == 0).unwrap().kind else {
            panic!()
        };
        assert_eq!(observed, &vec![r("1/4")]);
        assert_eq!(s0.compute, r("1/4"));
        assert_eq!(trace.runs[1].segments[1].wait, r("1/4"));
        assert_eq!(trace.runs[1].segments[1].look_time, r("5/2"));
        assert!(s0.move_start < r("5/2") && r("5/2") < s0.move_end);
    }

    #[test]
    fn adaptive_zero_lambda_relooks_immediately() {
        let robots = [
            RobotSpec::new(r("1"), r("1"), oracle(&["1/2", "1/2"])),
            RobotSpec::new(r("0"), r("1"), oracle(&["0", "0", "1/2", "1/2"])),
        ];
        let mut adv = Adversary::new(AdversaryPolicy::Adaptive { initial_waits: (r("2"), r("1")) }, 2).unwrap();
        let trace = run(&mut Line, &robots, &mut adv, 0, &Budgets::looks(4)).unwrap();
        let looks: Vec<_> = trace.runs[1].segments.iter().map(|s| s.look_time.clone()).collect();
        assert_eq!(looks, vec![r("1"), r("1"), r("1")]);
        assert_eq!(trace.status, RunStatus::LookBudgetExhausted);
    }

    #[test]
    fn ssync_alternation_halves_distance() {
        let gen = |parity| Generator::SsyncAlternating {
            round: r("1"),
            delta: r("1"),
            lambda: r("1/2"),
            speed: r("1"),
            parity,
        };
        let adv = AdversaryPolicy::ObliviousGenerated { generators: vec![gen(0), gen(1)], seed: 0 };
        let half = LambdaPolicy::Deterministic { lambda: r("1/2") };
        let robots = [RobotSpec::new(r("0"), r("1"), half.clone()), RobotSpec::new(r("1"), r("1"), half)];
        let trace = run(&mut Line, &robots, &mut Adversary::new(adv, 2).unwrap(), 0, &Budgets::looks(12)).unwrap();
        for (k, e) in trace.events.iter().filter(|e| matches!(e.kind, EventKind::Look { .. })).enumerate() {
            assert_eq!(e.time, Rat::from_int(k as i64));
            assert_eq!(trace.distance_at(&e.time).unwrap(), Rat::pow2(-(k as i32)));
        }
    }
}
