//! Gathering of many robots that merge on contact.
//!
//! The plane configuration is first reduced to a line: ties for the farthest
//! pair are broken by random outward moves, then every other robot moves to
//! its projection onto the line of the unique farthest pair. On the line the
//! two outermost entities repeatedly move onto their inner neighbours until
//! two entities remain, which is the two-robot problem.

use alloc::vec::Vec;

use rand::Rng;

use crate::adversary::{Adversary, AdversaryPolicy};
use crate::engine::{self, Budgets, Line, RobotSpec, RunStatus};
use crate::error::{Result, SimError};
use crate::geometry::{self, collinear, Point2};
use crate::policies::LambdaPolicy;
use crate::rat::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Dimension {
    Line,
    Plane,
}

/// Distinct positions with multiplicities, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Configuration {
    entities: Vec<(Point2, u64)>,
}

impl Configuration {
    /// Merges repeated positions, summing their multiplicities.
    pub fn new(entities: impl IntoIterator<Item = (Point2, u64)>) -> Self {
        let mut v: Vec<(Point2, u64)> = entities.into_iter().filter(|e| e.1 > 0).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Point2, u64)> = Vec::with_capacity(v.len());
        for (p, m) in v {
            match merged.last_mut() {
                Some((q, n)) if *q == p => *n += m,
                _ => merged.push((p, m)),
            }
        }
        Configuration { entities: merged }
    }

    pub fn from_points(points: impl IntoIterator<Item = Point2>) -> Self {
        Configuration::new(points.into_iter().map(|p| (p, 1)))
    }

    pub fn entities(&self) -> &[(Point2, u64)] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.entities.iter().map(|e| e.1).sum()
    }

    pub fn positions(&self) -> impl Iterator<Item = &Point2> {
        self.entities.iter().map(|e| &e.0)
    }

    pub fn dimension(&self) -> Dimension {
        if self.is_collinear() {
            Dimension::Line
        } else {
            Dimension::Plane
        }
    }

    pub fn is_collinear(&self) -> bool {
        collinear(&self.positions().cloned().collect::<Vec<_>>())
    }

    /// Largest squared pairwise distance.
    pub fn max_dist2(&self) -> Rat {
        let mut best = Rat::zero();
        for (i, (a, _)) in self.entities.iter().enumerate() {
            for (b, _) in &self.entities[i + 1..] {
                let d = a.dist2(b);
                if d > best {
                    best = d;
                }
            }
        }
        best
    }
}

/// Every pair `(i, j)`, `i < j`, at the maximum distance, in lexicographic order.
pub fn farthest_pairs(config: &Configuration) -> Vec<(usize, usize)> {
    let e = &config.entities;
    let mut best = Rat::zero();
    let mut pairs = Vec::new();
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            let d = e[i].0.dist2(&e[j].0);
            if d > best {
                best = d;
                pairs.clear();
                pairs.push((i, j));
            } else if d == best {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Which entities the scheduler activates in a tie-breaking round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RoundActivation {
    #[default]
    All,
    /// Each entity independently with probability 1/2.
    RandomSubset,
}

impl RoundActivation {
    pub fn activate<R: Rng + ?Sized>(&self, entities: usize, rng: &mut R) -> Vec<bool> {
        match self {
            RoundActivation::All => alloc::vec![true; entities],
            RoundActivation::RandomSubset => (0..entities).map(|_| rng.random::<bool>()).collect(),
        }
    }
}

/// One tie-breaking round with every entity active.
pub fn tie_break_step<R: Rng + ?Sized>(config: &Configuration, rng: &mut R) -> Configuration {
    tie_break_step_with(config, &alloc::vec![true; config.len()], rng)
}

/// One tie-breaking round: each active entity in a farthest pair draws
/// λ ∈ {0, 1} and moves `λ d / 100` outward along its pair, using the
/// lexicographically smallest pair it belongs to. Draws happen in entity order.
pub fn tie_break_step_with<R: Rng + ?Sized>(config: &Configuration, active: &[bool], rng: &mut R) -> Configuration {
    let pairs = farthest_pairs(config);
    let hundredth = Rat::frac(1, 100);
    let moved = config.entities.iter().enumerate().map(|(i, (p, m))| {
        let pair = pairs.iter().find(|(a, b)| *a == i || *b == i);
        match pair {
            Some(&(a, b)) if active.get(i).copied().unwrap_or(false) => {
                let partner = if a == i { b } else { a };
                if rng.random::<bool>() {
                    let outward = p - &config.entities[partner].0;
                    (p + &outward.scale(&hundredth), *m)
                } else {
                    (p.clone(), *m)
                }
            }
            _ => (p.clone(), *m),
        }
    });
    Configuration::new(moved.collect::<Vec<_>>())
}

#[derive(Debug, Clone)]
pub struct ReduceOutcome {
    pub config: Configuration,
    pub tie_rounds: u64,
    /// The round budget ran out with the tie unresolved; `config` is not collinear.
    pub partial: bool,
    /// Configuration before each round, then the final one.
    pub rounds: Vec<Configuration>,
}

/// Breaks farthest-pair ties, then projects every entity onto the line of
/// the unique farthest pair. Entities outside a tie stay put meanwhile.
pub fn reduce_to_line<R: Rng + ?Sized>(
    config: &Configuration,
    activation: RoundActivation,
    rng: &mut R,
    max_rounds: u64,
) -> Result<ReduceOutcome> {
    if config.len() < 2 {
        return Ok(ReduceOutcome { config: config.clone(), tie_rounds: 0, partial: false, rounds: alloc::vec![config.clone()] });
    }
    let mut current = config.clone();
    let mut rounds = alloc::vec![current.clone()];
    let mut tie_rounds = 0;
    while farthest_pairs(&current).len() > 1 {
        if tie_rounds == max_rounds {
            return Ok(ReduceOutcome { config: current, tie_rounds, partial: true, rounds });
        }
        let active = activation.activate(current.len(), rng);
        current = tie_break_step_with(&current, &active, rng);
        tie_rounds += 1;
        rounds.push(current.clone());
    }
    let (i, j) = farthest_pairs(&current)[0];
    let (a, b) = (current.entities[i].0.clone(), current.entities[j].0.clone());
    let far = current.max_dist2();
    let projected = current
        .entities
        .iter()
        .map(|(p, m)| Ok((geometry::project_onto_line(&a, &b, p)?, *m)))
        .collect::<Result<Vec<_>>>()?;
    let projected = Configuration::new(projected);
    assert!(projected.is_collinear(), "projection left the line");
    assert_eq!(projected.max_dist2(), far, "projection changed the farthest distance");
    assert_eq!(projected.total_multiplicity(), config.total_multiplicity());
    if projected != current {
        rounds.push(projected.clone());
    }
    Ok(ReduceOutcome { config: projected, tie_rounds, partial: false, rounds })
}

/// The two outermost entities of a collinear configuration move onto their
/// nearest inner entity and merge with it. Inner entities stay. No-op for
/// two or fewer entities.
pub fn line_gather_step(config: &Configuration) -> Result<Configuration> {
    if !config.is_collinear() {
        return Err(SimError::InvalidInput("line gathering needs a collinear configuration".into()));
    }
    let e = &config.entities;
    if e.len() <= 2 {
        return Ok(config.clone());
    }
    // Collinear points sorted lexicographically are in order along the line.
    let n = e.len();
    let mut next: Vec<(Point2, u64)> = e[1..n - 1].to_vec();
    next.push((e[1].0.clone(), e[0].1));
    next.push((e[n - 2].0.clone(), e[n - 1].1));
    Ok(Configuration::new(next))
}

/// For three collinear entities `a < b < c` whose outer two travel to `b`:
/// gathering at `b` happens directly iff `b` does not activate strictly
/// between the two arrival times.
pub fn three_point_direct_check(
    positions: [&Rat; 3],
    arrival_a: &Rat,
    arrival_c: &Rat,
    activations_b: &[Rat],
) -> Result<bool> {
    let [a, b, c] = positions;
    if !(a < b && b < c) {
        return Err(SimError::InvalidInput("positions must satisfy a < b < c".into()));
    }
    let (lo, hi) = if arrival_a <= arrival_c { (arrival_a, arrival_c) } else { (arrival_c, arrival_a) };
    Ok(!activations_b.iter().any(|t| lo < t && t < hi))
}

/// Parameters of the final two-entity stage.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineParams {
    /// Maximum tie-breaking rounds.
    pub max_tie_rounds: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub activation: RoundActivation,
    /// Lower bound on `W + C`, relative to the distance of the last two entities.
    pub tau: Rat,
    /// Look budget of the two-entity run.
    pub max_looks: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub config: Configuration,
    pub tie_rounds: u64,
    pub line_steps: u64,
    /// Looks of the two-entity run, if one was needed.
    pub final_looks: Option<u64>,
    pub gathered: bool,
    pub rounds: Vec<Configuration>,
}

/// Reduce to a line, merge from the outside in, and finish the last two
/// entities with the two-robot engine (λ ∈ {1, 1/2, 0}, τ-bounded delays).
/// The two-robot run uses coordinates where the entities sit at 0 and 1.
pub fn gather_with_merging<R: Rng + ?Sized>(
    config: &Configuration,
    params: &PipelineParams,
    rng: &mut R,
) -> Result<PipelineOutcome> {
    let reduced = reduce_to_line(config, params.activation, rng, params.max_tie_rounds)?;
    let mut rounds = reduced.rounds;
    let mut current = reduced.config;
    if reduced.partial {
        return Ok(PipelineOutcome {
            config: current,
            tie_rounds: reduced.tie_rounds,
            line_steps: 0,
            final_looks: None,
            gathered: false,
            rounds,
        });
    }
    let mut line_steps = 0;
    while current.len() > 2 {
        current = line_gather_step(&current)?;
        line_steps += 1;
        rounds.push(current.clone());
    }
    let mut final_looks = None;
    if current.len() == 2 {
        let (a, ma) = current.entities[0].clone();
        let (b, mb) = current.entities[1].clone();
        let robots = [
            RobotSpec::new(Rat::zero(), Rat::one(), LambdaPolicy::TauTriple),
            RobotSpec::new(Rat::one(), Rat::one(), LambdaPolicy::TauTriple),
        ];
        let mut adversary = Adversary::new(AdversaryPolicy::TauBounded { tau: params.tau.clone(), seed: rng.random() }, 2)?;
        let trace = engine::run(&mut Line, &robots, &mut adversary, rng.random(), &Budgets::looks(params.max_looks))?;
        final_looks = Some(trace.total_looks() as u64);
        if trace.status == RunStatus::Gathered {
            let s = trace.runs[0].resting_position();
            current = Configuration::new([(a.lerp(&b, s), ma + mb)]);
            rounds.push(current.clone());
        }
    }
    let gathered = current.len() == 1;
    Ok(PipelineOutcome { config: current, tie_rounds: reduced.tie_rounds, line_steps, final_looks, gathered, rounds })
}

/// `k` antipodal pairs of rational points on the unit circle: `k` tied
/// farthest pairs of length 2.
pub fn antipodal_ties(k: u64) -> Configuration {
    let mut pts = Vec::new();
    for j in 0..k as i64 {
        // Rational parametrisation of the circle at t = j / k, angles in [0, 90) degrees.
        let (n, m) = (j, k as i64);
        let den = Rat::from_int(m * m + n * n);
        let p = Point2::new(Rat::from_int(m * m - n * n) / &den, Rat::from_int(2 * m * n) / &den);
        pts.push(Point2::new(-&p.x, -&p.y));
        pts.push(p);
    }
    Configuration::from_points(pts)
}
