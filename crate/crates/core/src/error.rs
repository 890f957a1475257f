use core::fmt;

use crate::geom::Point2;

/// Every failure the core can report. Variants carry enough context for a one-line diagnostic.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    // psys
    InvalidSystem(&'static str),
    NotASaddle { side: &'static str },
    TangentEigenvector { which: &'static str, value: f64 },
    OrientationMismatch(&'static str),
    ProbeAmbiguous,
    ZeroField { at: Point2 },
    FieldVanishesOnGrid,
    // flow
    SlidingDetected { t: f64, at: Point2 },
    NonTransversalCrossing { t: f64, at: Point2, transversality: f64 },
    StepFailure { t: f64 },
    IntervalOutOfRange { t: f64 },
    // leaves
    NoConnection { mismatch: f64 },
    NotConverged { what: &'static str, residual: f64 },
    WrongSection,
    MissedTransversal,
    // melnikov
    WeightOverflow { t: f64 },
    // dichotomy
    HorizonTooShort,
    NotOnTransversal,
    PassageLeftRegion,
    // loopmap
    OffSection { residual: f64 },
    OutOfChart,
    BandViolation { what: &'static str, value: f64, lo: f64, hi: f64 },
    LeftRegion { t: f64, at: Point2 },
    DegenerateInput(&'static str),
    // scaling
    InsufficientGrid,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Error::*;
        match self {
            InvalidSystem(w) => write!(f, "invalid system: {w}"),
            NotASaddle { side } => write!(f, "origin is not a saddle of the {side} field"),
            TangentEigenvector { which, value } => {
                write!(f, "eigenvector {which} is tangent to the switching curve (c = {value:e})")
            }
            OrientationMismatch(w) => write!(f, "orientation hint conflicts with F1: {w}"),
            ProbeAmbiguous => write!(f, "probe point too close to the homoclinic loop"),
            ZeroField { at } => write!(f, "field vanishes at ({}, {})", at.x1, at.x2),
            FieldVanishesOnGrid => write!(f, "field vanishes on the kappa sampling grid"),
            SlidingDetected { t, at } => write!(f, "sliding at t = {t} on ({}, {})", at.x1, at.x2),
            NonTransversalCrossing { t, at, transversality } => write!(
                f,
                "non-transversal crossing at t = {t} on ({}, {}) (transversality {transversality:e})",
                at.x1, at.x2
            ),
            StepFailure { t } => write!(f, "step size underflow at t = {t}"),
            IntervalOutOfRange { t } => write!(f, "time {t} outside the stored trajectory"),
            NoConnection { mismatch } => write!(f, "no homoclinic connection (mismatch {mismatch:e})"),
            NotConverged { what, residual } => write!(f, "{what} did not converge (residual {residual:e})"),
            WrongSection => write!(f, "orbit misses the reference section"),
            MissedTransversal => write!(f, "orbit misses the transversal segment"),
            WeightOverflow { t } => write!(f, "trace weight overflow at t = {t}"),
            HorizonTooShort => write!(f, "principal directions not converged over the horizon"),
            NotOnTransversal => write!(f, "point is not on the saddle transversal"),
            PassageLeftRegion => write!(f, "orbit left the saddle region before the horizon"),
            OffSection { residual } => write!(f, "point is off the switching curve (|G| = {residual:e})"),
            OutOfChart => write!(f, "distance beyond the section chart"),
            BandViolation { what, value, lo, hi } => {
                write!(f, "{what} = {value} outside [{lo}, {hi}]")
            }
            LeftRegion { t, at } => write!(f, "orbit left the trapping region at t = {t} ({}, {})", at.x1, at.x2),
            DegenerateInput(w) => write!(f, "degenerate input: {w}"),
            InsufficientGrid => write!(f, "need at least 5 values spanning 1.5 decades"),
        }
    }
}

impl Error {
    /// Contract violations (as opposed to operational failures).
    pub fn is_contract_violation(&self) -> bool {
        matches!(self, Error::BandViolation { .. })
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
