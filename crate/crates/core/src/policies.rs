//! λ-class movement rules.
//!
//! A robot that looks and sees the other robot at distance `d` moves `λ·d`
//! toward the observed position. Everything a policy decides is the value
//! of λ; [`destination`] turns it into a point.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Result, SimError};
use crate::rat::Rat;
use crate::rng::unit_open;

/// Distribution of the λ value drawn at each look.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
#[allow(clippy::large_enum_variant)]
pub enum LambdaPolicy {
    /// Always the same λ.
    Deterministic { lambda: Rat },
    /// Finitely many `(λ, probability)` choices.
    FiniteMixture { choices: Vec<(Rat, Rat)> },
    /// 1, 1/2 or U(0,1), each with probability 1/3.
    ThreeChoice,
    /// 1, 1/2 or 0, each with probability 1/3.
    TauTriple,
    /// 1/(α+1), α/(α+1), 1 and U(0,1), with the given weights (uniform by default).
    KnownAlpha {
        alpha: Rat,
        #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
        weights: Option<[Rat; 4]>,
    },
    /// A scripted sequence, one value per look.
    Oracle { sequence: Vec<Rat> },
}

/// Geometry of the last approach before a meeting, for [`gather_lambda_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ApproachGeometry {
    /// The other robot is moving toward the mover, which moves λ·d toward it.
    OppositeDirections,
    /// The other robot chases the mover, which retreats λ·d away from it.
    SameDirection,
}

enum Choice {
    Fixed(Rat),
    Uniform,
}

impl LambdaPolicy {
    pub fn known_alpha(alpha: Rat) -> Self {
        LambdaPolicy::KnownAlpha { alpha, weights: None }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LambdaPolicy::FiniteMixture { choices } => {
                if choices.is_empty() {
                    return Err(SimError::InvalidPolicy("finite mixture has no choices".into()));
                }
                check_probabilities(choices.iter().map(|(_, p)| p))?;
                common_denominator(choices.iter().map(|(_, p)| p))?;
            }
            LambdaPolicy::KnownAlpha { alpha, weights } => {
                if !alpha.is_positive() {
                    return Err(SimError::InvalidPolicy(format!("alpha must be positive, got {alpha}")));
                }
                if let Some(w) = weights {
                    check_probabilities(w.iter())?;
                    common_denominator(w.iter())?;
                }
            }
            LambdaPolicy::Oracle { sequence } if sequence.is_empty() => {
                return Err(SimError::InvalidPolicy("oracle sequence is empty".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// `(λ, probability)` pairs for policies without a continuous component.
    pub fn finite_support(&self) -> Option<Vec<(Rat, Rat)>> {
        let third = Rat::frac(1, 3);
        match self {
            LambdaPolicy::Deterministic { lambda } => Some(alloc::vec![(lambda.clone(), Rat::one())]),
            LambdaPolicy::FiniteMixture { choices } => Some(choices.clone()),
            LambdaPolicy::TauTriple => Some(alloc::vec![
                (Rat::one(), third.clone()),
                (Rat::frac(1, 2), third.clone()),
                (Rat::zero(), third),
            ]),
            _ => None,
        }
    }

    pub fn sampler(&self, robot: usize) -> LambdaSampler {
        LambdaSampler { policy: self.clone(), robot, cursor: 0 }
    }

    fn choices(&self) -> Vec<(Choice, Rat)> {
        let third = Rat::frac(1, 3);
        match self {
            LambdaPolicy::Deterministic { lambda } => alloc::vec![(Choice::Fixed(lambda.clone()), Rat::one())],
            LambdaPolicy::FiniteMixture { choices } => {
                choices.iter().map(|(l, p)| (Choice::Fixed(l.clone()), p.clone())).collect()
            }
            LambdaPolicy::ThreeChoice => alloc::vec![
                (Choice::Fixed(Rat::one()), third.clone()),
                (Choice::Fixed(Rat::frac(1, 2)), third.clone()),
                (Choice::Uniform, third),
            ],
            LambdaPolicy::TauTriple => alloc::vec![
                (Choice::Fixed(Rat::one()), third.clone()),
                (Choice::Fixed(Rat::frac(1, 2)), third.clone()),
                (Choice::Fixed(Rat::zero()), third),
            ],
            LambdaPolicy::KnownAlpha { alpha, weights } => {
                let quarter = Rat::frac(1, 4);
                let w = weights.clone().unwrap_or_else(|| {
                    [quarter.clone(), quarter.clone(), quarter.clone(), quarter.clone()]
                });
                let denom = alpha + &Rat::one();
                let [w0, w1, w2, w3] = w;
                alloc::vec![
                    (Choice::Fixed(Rat::one() / &denom), w0),
                    (Choice::Fixed(alpha / &denom), w1),
                    (Choice::Fixed(Rat::one()), w2),
                    (Choice::Uniform, w3),
                ]
            }
            LambdaPolicy::Oracle { .. } => Vec::new(),
        }
    }
}

fn check_probabilities<'a>(probs: impl Iterator<Item = &'a Rat>) -> Result<()> {
    let mut total = Rat::zero();
    for p in probs {
        if !p.is_positive() {
            return Err(SimError::InvalidPolicy(format!("probability {p} is not positive")));
        }
        total += p;
    }
    if total != Rat::one() {
        return Err(SimError::InvalidPolicy(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn common_denominator<'a>(probs: impl Iterator<Item = &'a Rat>) -> Result<u64> {
    use num_integer::Integer;
    use num_traits::ToPrimitive;
    let lcm = probs.fold(num_bigint::BigInt::from(1u8), |acc, p| acc.lcm(&p.denom()));
    lcm.to_u64()
        .ok_or_else(|| SimError::InvalidPolicy("probability denominators exceed 64 bits".into()))
}

/// A policy bound to one robot, with the cursor an oracle script needs.
#[derive(Debug, Clone)]
pub struct LambdaSampler {
    policy: LambdaPolicy,
    robot: usize,
    cursor: usize,
}

impl LambdaSampler {
    pub fn policy(&self) -> &LambdaPolicy {
        &self.policy
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Rat> {
        sample_lambda(self, rng)
    }
}

/// Draws the next λ. Oracle scripts return their next value and fail once
/// exhausted; every other policy draws independently of past calls.
pub fn sample_lambda<R: Rng + ?Sized>(sampler: &mut LambdaSampler, rng: &mut R) -> Result<Rat> {
    if let LambdaPolicy::Oracle { sequence } = &sampler.policy {
        let value = sequence.get(sampler.cursor).cloned().ok_or(SimError::OracleExhausted {
            robot: sampler.robot,
            used: sampler.cursor,
        })?;
        sampler.cursor += 1;
        return Ok(value);
    }
    let choices = sampler.policy.choices();
    let denom = common_denominator(choices.iter().map(|(_, p)| p))?;
    let mut ticket = Rat::from_int(rng.random_range(0..denom) as i64) / Rat::from_int(denom as i64);
    for (choice, p) in &choices {
        if ticket < *p {
            return Ok(match choice {
                Choice::Fixed(l) => l.clone(),
                Choice::Uniform => unit_open(rng),
            });
        }
        ticket -= p;
    }
    // Probabilities sum to one, so the ticket always lands in some bucket.
    Err(SimError::InvalidPolicy("probabilities do not sum to 1".into()))
}

/// `own + λ (observed_other - own)`.
pub fn destination(own: &Rat, observed_other: &Rat, lambda: &Rat) -> Rat {
    own + &(lambda * &(observed_other - own))
}

/// The λ under which the mover meets the other robot exactly when the
/// mover's move ends, for a speed ratio `alpha = v_other / v_mover`.
///
/// With [`ApproachGeometry::OppositeDirections`] the answer is `1/(α+1)`;
/// with [`ApproachGeometry::SameDirection`] it is `1/(α-1)`, applied as a
/// retreat (the λ-class rule receives `-λ`).
pub fn gather_lambda_oracle(alpha: &Rat, geometry: ApproachGeometry) -> Result<Rat> {
    if !alpha.is_positive() {
        return Err(SimError::InvalidInput(format!("speed ratio must be positive, got {alpha}")));
    }
    match geometry {
        ApproachGeometry::OppositeDirections => Ok(Rat::one() / (alpha + &Rat::one())),
        ApproachGeometry::SameDirection => (alpha - &Rat::one()).recip().ok_or(SimError::NoCatchup),
    }
}
