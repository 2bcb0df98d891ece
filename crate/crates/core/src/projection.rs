//! Reduction of planar two-robot runs to the line through the robots.
//!
//! When every destination is projected onto the line through the two
//! robots, the planar run and the run on the real line with the same random
//! streams are the same execution: equal event times and equal distances.

use alloc::vec::Vec;

use crate::adversary::{Adversary, AdversaryPolicy};
use crate::engine::{run, Budgets, Line, Plane, RobotSpec, Trace};
use crate::error::{Result, SimError};
use crate::geometry::{self, Point2};
use crate::policies::LambdaPolicy;
use crate::rat::Rat;

/// One-dimensional coordinates of the orthogonal projections of
/// `destinations` onto the line through `p1` and `p2`, measured from their
/// midpoint with `p1` on the positive side.
///
/// Coordinates are metric, so `|p1 - p2| / 2` must be rational.
pub fn project_scenario_to_line(p1: &Point2, p2: &Point2, destinations: &[Point2]) -> Result<Vec<Rat>> {
    if p1 == p2 {
        return Err(SimError::DegenerateLine);
    }
    let mid = p1.lerp(p2, &Rat::frac(1, 2));
    let half = mid.dist(p1)?;
    destinations
        .iter()
        .map(|d| geometry::projection_parameter(&mid, p1, d).map(|s| s * &half))
        .collect()
}

/// Result of running one scenario both in the plane (with projected
/// destinations) and on the line.
#[derive(Debug, Clone)]
pub struct ProjectionComparison {
    pub plane: Trace<Point2>,
    pub line: Trace<Rat>,
    /// Number of distinct event times compared.
    pub compared_times: usize,
    /// Event times at which the two runs disagree on the distance.
    pub distance_mismatches: Vec<Rat>,
    /// Whether both runs produced the same event times for the same robots.
    pub same_schedule: bool,
    /// Segments whose planar destination does not project onto the line destination.
    pub coordinate_mismatches: usize,
}

impl ProjectionComparison {
    pub fn agrees(&self) -> bool {
        self.distance_mismatches.is_empty() && self.same_schedule && self.coordinate_mismatches == 0
    }
}

/// Runs the planar scenario with random sideways offsets removed by
/// projection, and the line scenario starting at `+h` and `-h` where `2h` is
/// the initial distance, using the same seeds.
pub fn compare_with_line_run(
    starts: [&Point2; 2],
    speeds: [&Rat; 2],
    policies: [&LambdaPolicy; 2],
    adversary: &AdversaryPolicy,
    seed: u64,
    budgets: &Budgets,
) -> Result<ProjectionComparison> {
    let [p1, p2] = starts;
    let coords = project_scenario_to_line(p1, p2, &[p1.clone(), p2.clone()])?;
    let plane_robots: Vec<RobotSpec<Point2>> =
        (0..2).map(|i| RobotSpec::new(starts[i].clone(), speeds[i].clone(), policies[i].clone())).collect();
    let line_robots: Vec<RobotSpec<Rat>> =
        (0..2).map(|i| RobotSpec::new(coords[i].clone(), speeds[i].clone(), policies[i].clone())).collect();
    let plane = run(
        &mut Plane::with_lateral_noise(seed, true),
        &plane_robots,
        &mut Adversary::new(adversary.clone(), 2)?,
        seed,
        budgets,
    )?;
    let line = run(&mut Line, &line_robots, &mut Adversary::new(adversary.clone(), 2)?, seed, budgets)?;

    let key = |t: &Rat, r: usize| (t.clone(), r);
    let plane_events: Vec<_> = plane.events.iter().map(|e| key(&e.time, e.robot)).collect();
    let line_events: Vec<_> = line.events.iter().map(|e| key(&e.time, e.robot)).collect();
    let same_schedule = plane_events == line_events && plane.status == line.status;

    let mut times: Vec<Rat> = plane_events.into_iter().chain(line_events).map(|(t, _)| t).collect();
    times.sort();
    times.dedup();
    let mut distance_mismatches = Vec::new();
    let mut compared_times = 0;
    for t in times {
        let known = |h: Option<Rat>| h.is_none_or(|h| t <= h);
        if !known(plane.horizon()) || !known(line.horizon()) {
            continue;
        }
        compared_times += 1;
        if plane.distance_at(&t)? != line.distance_at(&t)? {
            distance_mismatches.push(t);
        }
    }

    let mut coordinate_mismatches = 0;
    for (pr, lr) in plane.runs.iter().zip(&line.runs) {
        let dests: Vec<Point2> = pr.segments.iter().map(|s| s.destination.clone()).collect();
        let mapped = project_scenario_to_line(p1, p2, &dests)?;
        coordinate_mismatches += mapped
            .iter()
            .zip(&lr.segments)
            .filter(|(c, s)| **c != s.destination)
            .count();
        coordinate_mismatches += pr.segments.len().abs_diff(lr.segments.len());
    }
    Ok(ProjectionComparison { plane, line, compared_times, distance_mismatches, same_schedule, coordinate_mismatches })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    #[test]
    fn projection_coordinates() {
        let p1 = Point2::from_ints(1, 0);
        let p2 = Point2::from_ints(-1, 0);
        let coords = project_scenario_to_line(&p1, &p2, &[Point2::from_ints(0, 3), Point2::from_ints(-1, 0)]).unwrap();
        assert_eq!(coords, alloc::vec![Rat::zero(), r("-1")]);
        assert_eq!(project_scenario_to_line(&p1, &p1, &[]), Err(SimError::DegenerateLine));
        // A 3-4-5 line: the midpoint of (0,0)-(6,8) is (3,4), half-length 5.
        let coords = project_scenario_to_line(&Point2::from_ints(6, 8), &Point2::from_ints(0, 0), &[Point2::from_ints(6, 8)]).unwrap();
        assert_eq!(coords, alloc::vec![r("5")]);
    }
}
