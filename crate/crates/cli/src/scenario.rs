//! Scenario files: one JSON object per experiment.

use std::collections::BTreeMap;

use rendezvous_core::adversary::AdversaryPolicy;
use rendezvous_core::analysis::{AnalysisOptions, MoveRule};
use rendezvous_core::engine::Budgets;
use rendezvous_core::multirobot::PipelineParams;
use rendezvous_core::{LambdaPolicy, Rat};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Robots on a line, as listed in `robots`.
    #[default]
    Line,
    /// Two robots at generated plane positions, compared against the line run.
    PlaneProjection,
    /// Many robots in the plane with merging.
    Multirobot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDescriptor {
    /// Start coordinate; line mode only (generated in the other modes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Rat>,
    #[serde(default = "Rat::one")]
    pub speed: Rat,
    /// Key into `policies`.
    pub policy: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    pub max_total_looks: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time: Option<Rat>,
}

impl BudgetSpec {
    pub fn budgets(&self) -> Budgets {
        Budgets { max_total_looks: self.max_total_looks, max_time: self.max_time.clone() }
    }
}

/// Parameters for the predicted number of looks the free robot takes
/// before the other robot starts moving.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeatPrediction {
    /// Time at which the other robot first starts moving.
    pub gap: Rat,
    /// `1 - λ` of the free robot.
    pub contraction: Rat,
    #[serde(default = "Rat::one")]
    pub speed: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "yes")]
    pub attempts: bool,
    #[serde(default)]
    pub move_rule: MoveRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_prediction: Option<RepeatPrediction>,
}

fn yes() -> bool {
    true
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec { attempts: true, move_rule: MoveRule::default(), repeat_prediction: None }
    }
}

impl AnalysisSpec {
    pub fn options(&self) -> AnalysisOptions {
        AnalysisOptions { attempts: self.attempts, move_rule: self.move_rule }
    }
}

/// Random two-robot plane scenarios: the first robot at a point with
/// coordinates `a/d`, `|a| <= coordinate_range`, `1 <= d <= max_denominator`;
/// the second at a rational distance along a direction with rational
/// cosine and sine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    #[serde(default = "default_range")]
    pub coordinate_range: i64,
    #[serde(default = "default_denominator")]
    pub max_denominator: i64,
    /// Largest initial distance (an integer numerator over `max_denominator`).
    #[serde(default = "default_range")]
    pub max_distance: i64,
}

impl Default for PlaneSpec {
    fn default() -> Self {
        PlaneSpec { coordinate_range: default_range(), max_denominator: default_denominator(), max_distance: default_range() }
    }
}

fn default_range() -> i64 {
    20
}

fn default_denominator() -> i64 {
    6
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultirobotSpec {
    /// Number of robots at random positions; ignored when `tie_pairs` is set.
    #[serde(default)]
    pub robots: u64,
    #[serde(default = "default_range")]
    pub coordinate_range: i64,
    #[serde(default = "default_denominator")]
    pub max_denominator: i64,
    /// Start from this many antipodal pairs on the unit circle instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_pairs: Option<u64>,
    pub pipeline: PipelineParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub robots: Vec<RobotDescriptor>,
    #[serde(default)]
    pub policies: BTreeMap<String, LambdaPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversaryPolicy>,
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_budgets")]
    pub budgets: BudgetSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    /// Reseed a seeded adversary for every trial from the trial stream.
    #[serde(default)]
    pub per_trial_adversary_seed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<PlaneSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multirobot: Option<MultirobotSpec>,
}

fn default_budgets() -> BudgetSpec {
    BudgetSpec { max_total_looks: 1000, max_time: None }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Validation(msg));
        if self.trials < 1 {
            return fail("trials ≥ 1".into());
        }
        if self.budgets.max_total_looks == 0 {
            return fail("budgets.max_total_looks ≥ 1".into());
        }
        for (name, p) in &self.policies {
            p.validate().map_err(|e| CliError::Validation(format!("policies.{name}: {e}")))?;
        }
        for (i, r) in self.robots.iter().enumerate() {
            if !self.policies.contains_key(&r.policy) {
                return fail(format!("robots[{i}].policy: undefined policy {:?}", r.policy));
            }
            if !r.speed.is_positive() {
                return fail(format!("robots[{i}].speed: must be positive"));
            }
            match (self.mode, &r.start) {
                (Mode::Line, None) => return fail(format!("robots[{i}].start: required in line mode")),
                (Mode::PlaneProjection | Mode::Multirobot, Some(_)) => {
                    return fail(format!("robots[{i}].start: positions are generated in this mode"))
                }
                _ => {}
            }
        }
        match self.mode {
            Mode::Line | Mode::PlaneProjection => {
                let Some(adv) = &self.adversary else {
                    return fail("adversary: required".into());
                };
                if self.robots.len() < 2 {
                    return fail("robots: at least two robots are needed".into());
                }
                if self.mode == Mode::PlaneProjection && self.robots.len() != 2 {
                    return fail("robots: plane projection runs take exactly two robots".into());
                }
                adv.validate(self.robots.len()).map_err(|e| CliError::Validation(format!("adversary: {e}")))?;
                if self.multirobot.is_some() {
                    return fail("multirobot: only allowed in multirobot mode".into());
                }
                if self.mode == Mode::Line && self.plane.is_some() {
                    return fail("plane: only allowed in plane_projection mode".into());
                }
                if let Some(plane) = &self.plane {
                    if plane.coordinate_range < 0 || plane.max_denominator < 1 || plane.max_distance < 1 {
                        return fail("plane: ranges must be positive".into());
                    }
                }
            }
            Mode::Multirobot => {
                let Some(m) = &self.multirobot else {
                    return fail("multirobot: required in multirobot mode".into());
                };
                if self.adversary.is_some() || !self.robots.is_empty() {
                    return fail("multirobot mode takes no robots or adversary; see the multirobot block".into());
                }
                if m.tie_pairs.is_none() && m.robots < 1 {
                    return fail("multirobot.robots ≥ 1".into());
                }
                if m.tie_pairs == Some(0) {
                    return fail("multirobot.tie_pairs ≥ 1".into());
                }
                if m.coordinate_range < 1 || m.max_denominator < 1 {
                    return fail("multirobot: ranges must be positive".into());
                }
                if !m.pipeline.tau.is_positive() || m.pipeline.max_looks == 0 {
                    return fail("multirobot.pipeline: tau and max_looks must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn policy_of(&self, robot: usize) -> &LambdaPolicy {
        &self.policies[&self.robots[robot].policy]
    }
}

/// Parses and validates a scenario. Schema errors name the offending field.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Validation(format!("{path}: {}", e.into_inner()))
    })?;
    scenario.validate()?;
    Ok(scenario)
}
