use alloc::string::String;

/// Failures raised while configuring or executing a simulation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("schedule underrun: no delays for robot {robot} cycle {cycle}")]
    ScheduleUnderrun { robot: usize, cycle: u64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("the two reference points coincide; no line is defined")]
    DegenerateLine,
    #[error("distance between points is not rational")]
    IrrationalLength,
    #[error("equal speeds moving in the same direction never meet")]
    NoCatchup,
    #[error("oracle script of robot {robot} exhausted after {used} values")]
    OracleExhausted { robot: usize, used: usize },
    #[error("adaptive adversary found an empty feasible interval: {0}")]
    Infeasible(&'static str),
    #[error("robot {robot} has no look in cycle {cycle}")]
    MissingLook { robot: usize, cycle: u64 },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = SimError> = core::result::Result<T, E>;
