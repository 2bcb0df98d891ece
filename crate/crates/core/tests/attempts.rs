use rand::Rng;
use rendezvous_core::adversary::{Adversary, AdversaryPolicy};
use rendezvous_core::analysis::{
    classify_success, max_distance_from, segment_attempts, segment_phases, DistanceProfile, MoveRule,
};
use rendezvous_core::engine::{run, Budgets, EventKind, Line, RobotSpec, RunStatus, Trace};
use rendezvous_core::rng::stream;
use rendezvous_core::{LambdaPolicy, Rat};

fn r(s: &str) -> Rat {
    s.parse().unwrap()
}

fn oracle(values: &[&str]) -> LambdaPolicy {
    LambdaPolicy::Oracle { sequence: values.iter().map(|v| r(v)).collect() }
}

fn explicit(delays: &[&[(&str, &str)]]) -> AdversaryPolicy {
    AdversaryPolicy::ObliviousExplicit {
        delays: delays.iter().map(|l| l.iter().map(|(w, c)| (r(w), r(c))).collect()).collect(),
    }
}

fn execute(robots: &[RobotSpec<Rat>], adv: AdversaryPolicy, seed: u64, looks: u64) -> Trace<Rat> {
    run(&mut Line, robots, &mut Adversary::new(adv, robots.len()).unwrap(), seed, &Budgets::looks(looks)).unwrap()
}

/// λ-cycles of one robot rebuilt from the event log: (look, move start, move end).
struct RefCycle {
    look: Rat,
    start: Rat,
    end: Rat,
}

struct Reference {
    cycles: [Vec<RefCycle>; 2],
    looks: [usize; 2],
    decided: [bool; 2],
    /// Per robot: (move start, move end, from, to) in order.
    moves: [Vec<(Rat, Rat, Rat, Rat)>; 2],
    starts: [Rat; 2],
    times: Vec<Rat>,
}

impl Reference {
    fn new(trace: &Trace<Rat>) -> Self {
        let mut cycles: [Vec<RefCycle>; 2] = [Vec::new(), Vec::new()];
        let mut looks = [0; 2];
        let mut decided = [false; 2];
        let mut moves: [Vec<(Rat, Rat, Rat, Rat)>; 2] = [Vec::new(), Vec::new()];
        let mut open: [Option<(Rat, Rat, Rat)>; 2] = [None, None];
        for e in &trace.events {
            let i = e.robot;
            match &e.kind {
                EventKind::Look { lambda, .. } => {
                    looks[i] += 1;
                    if lambda.is_some() {
                        cycles[i].push(RefCycle { look: e.time.clone(), start: Rat::zero(), end: Rat::zero() });
                    }
                }
                EventKind::MoveStart { from, to } => {
                    cycles[i].last_mut().unwrap().start = e.time.clone();
                    open[i] = Some((e.time.clone(), from.clone(), to.clone()));
                }
                EventKind::MoveEnd { .. } => {
                    cycles[i].last_mut().unwrap().end = e.time.clone();
                    let (s, from, to) = open[i].take().unwrap();
                    moves[i].push((s, e.time.clone(), from, to));
                }
                EventKind::DecideGathered { .. } => decided[i] = true,
            }
        }
        let mut times: Vec<Rat> = trace.events.iter().map(|e| e.time.clone()).collect();
        times.dedup();
        let starts = [trace.runs[0].start.clone(), trace.runs[1].start.clone()];
        Reference { cycles, looks, decided, moves, starts, times }
    }

    fn position(&self, robot: usize, t: &Rat) -> Rat {
        let mut pos = self.starts[robot].clone();
        for (s, e, from, to) in &self.moves[robot] {
            if t >= e {
                pos = to.clone();
            } else if t > s {
                pos = from + &((to - from) * ((t - s) / (e - s)));
            }
        }
        pos
    }

    fn max_dist(&self, t: &Rat) -> Rat {
        std::iter::once(t)
            .chain(self.times.iter().filter(|x| *x >= t))
            .map(|x| (self.position(0, x) - self.position(1, x)).abs())
            .max()
            .unwrap()
    }

    /// (later robot, its cycle, other cycle, looks, t_end, successful)
    fn segment(&self, rule: MoveRule) -> Vec<(usize, usize, usize, u64, Rat, bool)> {
        let key = |c: &RefCycle| match rule {
            MoveRule::MoveStart => c.start.clone(),
            MoveRule::MoveEnd => c.end.clone(),
        };
        let mut at = [0usize, 0usize];
        let mut t_begin = Rat::zero();
        let mut out = Vec::new();
        while at[0] < self.cycles[0].len() && at[1] < self.cycles[1].len() {
            let (k0, k1) = (key(&self.cycles[0][at[0]]), key(&self.cycles[1][at[1]]));
            let later = if k0 >= k1 { 0 } else { 1 };
            let other = 1 - later;
            let t = if later == 0 { k0 } else { k1 };
            let c2 = (at[other]..self.cycles[other].len())
                .filter(|&j| self.cycles[other][j].look <= t)
                .max()
                .unwrap();
            let cl = at[later];
            let ok = |robot: usize, c: usize| self.decided[robot] || self.looks[robot] > c + 2;
            if !ok(later, cl) || !ok(other, c2) {
                break;
            }
            let t_end = self.cycles[later][cl].end.clone().max(self.cycles[other][c2].end.clone());
            let before = self.max_dist(&t_begin);
            let after = self.max_dist(&t_end);
            let looks = 1 + (c2 + 1 - at[other]) as u64;
            out.push((later, cl, c2, looks, t_end.clone(), after.clone() + after <= before));
            at[later] = cl + 1;
            at[other] = c2 + 1;
            t_begin = t_end;
        }
        out
    }
}

#[test]
fn segmentation_matches_reference_on_short_traces() {
    let mut compared = 0;
    let mut attempts_seen = 0;
    for seed in 0..20_000u64 {
        let mut rng = stream(seed, &[0xa77]);
        let mut delays = || -> Vec<(Rat, Rat)> {
            (0..12).map(|_| (Rat::frac(rng.random_range(0..6), 4), Rat::frac(rng.random_range(0..6), 4))).collect()
        };
        let adv = AdversaryPolicy::ObliviousExplicit { delays: vec![delays(), delays()] };
        let robots = [
            RobotSpec::new(Rat::zero(), Rat::one(), LambdaPolicy::TauTriple),
            RobotSpec::new(Rat::one(), Rat::one(), LambdaPolicy::TauTriple),
        ];
        let trace = execute(&robots, adv, seed, 10);
        if trace.status != RunStatus::Gathered || trace.runs.iter().any(|run| run.segments.len() > 5) {
            continue;
        }
        compared += 1;
        let reference = Reference::new(&trace);
        for rule in [MoveRule::MoveStart, MoveRule::MoveEnd] {
            let got: Vec<_> = segment_attempts(&trace, rule)
                .unwrap()
                .into_iter()
                .map(|a| (a.later.0, a.later.1 as usize, a.earlier.1 as usize, a.looks, a.t_end, a.successful))
                .collect();
            attempts_seen += got.len();
            assert_eq!(got, reference.segment(rule), "seed {seed} rule {rule:?}");
        }
    }
    assert!(compared >= 300, "only {compared} traces compared");
    assert!(attempts_seen >= 300);
}

#[test]
fn simultaneous_schedule_pairs_both_first_looks() {
    let half = LambdaPolicy::Deterministic { lambda: r("1/4") };
    let robots = [RobotSpec::new(r("0"), r("1"), half.clone()), RobotSpec::new(r("1"), r("1"), half)];
    let adv = explicit(&[&[("1", "0"); 14], &[("1", "0"); 14]]);
    let trace = execute(&robots, adv, 0, 12);
    let attempts = segment_attempts(&trace, MoveRule::MoveStart).unwrap();
    assert_eq!((attempts[0].later.1, attempts[0].earlier.1, attempts[0].looks), (0, 0, 2));
    assert_eq!(attempts[0].t_end, r("5/4"));
}

#[test]
fn repeated_zero_moves_count_every_look() {
    let robots = [
        RobotSpec::new(r("0"), r("1"), oracle(&["1/2", "1/2", "1/2", "1/2", "1/2"])),
        RobotSpec::new(r("1"), r("1"), oracle(&["0", "0", "1/2", "1/2", "1/2", "1/2"])),
    ];
    let adv = explicit(&[&[("2", "0"), ("3", "0"), ("3", "0"), ("3", "0"), ("3", "0")], &[
        ("1", "0"),
        ("0", "0"),
        ("0", "0"),
        ("5", "0"),
        ("5", "0"),
        ("5", "0"),
    ]]);
    let trace = execute(&robots, adv, 0, 9);
    let attempts = segment_attempts(&trace, MoveRule::MoveStart).unwrap();
    let first = &attempts[0];
    assert_eq!(first.later, (0, 0));
    assert_eq!(first.earlier, (1, 2));
    assert_eq!(first.looks, 4);
}

#[test]
fn maximum_distance_examples() {
    let idle = [
        RobotSpec::new(r("0"), r("1"), LambdaPolicy::Deterministic { lambda: r("0") }),
        RobotSpec::new(r("1"), r("1"), LambdaPolicy::Deterministic { lambda: r("0") }),
    ];
    let trace = execute(&idle, explicit(&[&[("1", "0"); 5], &[("1", "0"); 5]]), 0, 6);
    assert_eq!(max_distance_from(&trace, &r("0")).unwrap(), r("1"));

    // Robot 0 overshoots robot 1: the distance passes through 0 and grows to 1/2.
    let crossing = [
        RobotSpec::new(r("0"), r("1"), LambdaPolicy::Deterministic { lambda: r("3") }),
        RobotSpec::new(r("1/4"), r("1"), LambdaPolicy::Deterministic { lambda: r("0") }),
    ];
    let trace = execute(&crossing, explicit(&[&[("0", "0"), ("9", "0")], &[("5", "0"), ("5", "0")]]), 0, 2);
    assert_eq!(trace.distance_at(&r("1/4")).unwrap(), Rat::zero());
    assert_eq!(max_distance_from(&trace, &r("1/4")).unwrap(), r("1/2"));

    let approach = [
        RobotSpec::new(r("0"), r("1"), LambdaPolicy::Deterministic { lambda: r("1") }),
        RobotSpec::new(r("1"), r("1"), LambdaPolicy::Deterministic { lambda: r("0") }),
    ];
    let trace = execute(&approach, explicit(&[&[("0", "0"), ("0", "0")], &[("5", "0"), ("5", "0")]]), 0, 4);
    assert_eq!(max_distance_from(&trace, &r("0")).unwrap(), r("1"));
    assert_eq!(max_distance_from(&trace, &r("1")).unwrap(), r("0"));
}

#[test]
fn maximum_distance_is_nonincreasing_and_bounds_sampled_distances() {
    for seed in 0..200u64 {
        let robots = [
            RobotSpec::new(r("0"), r("1"), LambdaPolicy::ThreeChoice),
            RobotSpec::new(r("3"), r("2"), LambdaPolicy::FiniteMixture {
                choices: vec![(r("2"), r("1/2")), (r("-1"), r("1/2"))],
            }),
        ];
        let adv = AdversaryPolicy::TauBounded { tau: r("1/2"), seed };
        let trace = execute(&robots, adv, seed, 16);
        let profile = DistanceProfile::new(&trace).unwrap();
        let horizon = trace.horizon().unwrap();
        let samples: Vec<Rat> = (0..=64).map(|i| &horizon * &Rat::frac(i, 64)).collect();
        let dists: Vec<Rat> = samples.iter().map(|t| trace.distance_at(t).unwrap()).collect();
        let maxes: Vec<Rat> = samples.iter().map(|t| profile.max_distance_from(&trace, t).unwrap()).collect();
        for i in 0..samples.len() {
            if i > 0 {
                assert!(maxes[i] <= maxes[i - 1]);
            }
            for d in &dists[i..] {
                assert!(*d <= maxes[i]);
            }
            // The maximum is attained at a kink or at the query time itself.
            assert!(profile.kink_distances().contains(&maxes[i]) || maxes[i] == dists[i]);
        }
    }
}

#[test]
fn phases_partition_attempts() {
    for seed in 0..100u64 {
        let robots = [
            RobotSpec::new(r("0"), r("1"), LambdaPolicy::TauTriple),
            RobotSpec::new(r("1"), r("1"), LambdaPolicy::TauTriple),
        ];
        let trace = execute(&robots, AdversaryPolicy::TauBounded { tau: r("1/10"), seed }, seed, 200);
        let attempts = segment_attempts(&trace, MoveRule::MoveStart).unwrap();
        let phases = segment_phases(&attempts);
        assert_eq!(phases.iter().map(|p| p.attempts.len()).sum::<usize>(), attempts.len());
        assert_eq!(phases.iter().map(|p| p.total_looks).sum::<u64>(), attempts.iter().map(|a| a.looks).sum::<u64>());
        for p in &phases {
            let n = p.attempts.len();
            assert!(p.attempts[..n - 1].iter().all(|a| !a.successful));
            assert_eq!(p.terminal, p.attempts[n - 1].successful);
            if p.terminal {
                let first = &p.attempts[0].max_dist_before;
                let last = &p.attempts[n - 1].max_dist_after;
                assert!(classify_success(first, last));
            }
        }
    }
}
