use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("derivative of order {order} diverges at s = {s}")]
    Singularity { order: u8, s: f64 },
    #[error("no sign change on [{lo}, {hi}] while solving for {what}")]
    Bracket {
        what: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("continuation stalled at s = {s} after {halvings} step halvings")]
    ContinuationStall { s: f64, halvings: u32 },
    #[error("degenerate chord at s = {s}: derivative gap {gap:e}")]
    DegenerateChord { s: f64, gap: f64 },
    #[error("ambiguous region for point ({y2}, {y3})")]
    ClassifyAmbiguity { y2: f64, y3: f64 },
    #[error("formula for {expected} invoked but parameters select {actual}")]
    CaseMismatch {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("scale of (y1, y2) too small to normalise")]
    DegenerateScale,
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("step too large: intermediate point left the domain at eps = {eps}")]
    StepTooLarge { eps: f64 },
    #[error("split {node} violates |dG| = |dF| (|dF| = {df}, |dG| = {dg})")]
    TransformViolation { node: usize, df: f64, dg: f64 },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
