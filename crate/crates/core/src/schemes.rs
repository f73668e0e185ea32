//! Aggregation schemes: maps from a vector of expert forecasts to a single
//! forecast.
//!
//! All two-forecast schemes here are anonymous (order of the forecasts does
//! not matter) except for the minimal-entropy tie case, which is documented
//! on [`min_entropy`].

use crate::model::{bayes_aggregate, ModelError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("scheme takes {expected} forecasts, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("forecast {0} outside [0,1]")]
    ForecastOutOfRange(f64),
    #[error("forecast pair outside the supported martingale values")]
    UnsupportedForecastPair,
    #[error("argument must be interior to (0,1)")]
    BoundaryInput,
    #[error("unknown scheme name: {0}")]
    UnknownScheme(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Anything that can turn a forecast vector into a forecast.
pub trait Aggregator {
    /// Required number of forecasts, or `None` when any arity is accepted.
    fn arity(&self) -> Option<usize>;

    fn aggregate(&self, forecasts: &[f64]) -> Result<f64, SchemeError>;
}

/// The named aggregation schemes under a single dispatch point.
///
/// `Constant` and `KnownPriorBayes` accept any number of forecasts; the rest
/// are two-forecast schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AggregationScheme {
    Constant(f64),
    DeGroot,
    MinEntropy,
    Precision,
    AveragePrior,
    ShiftedPrior,
    OracleBestReply { x: f64, y: f64, alpha: f64 },
    KnownPriorBayes(f64),
}

impl AggregationScheme {
    pub fn name(&self) -> String {
        match self {
            AggregationScheme::Constant(c) => format!("const:{c}"),
            AggregationScheme::DeGroot => "degroot".into(),
            AggregationScheme::MinEntropy => "minentropy".into(),
            AggregationScheme::Precision => "precision".into(),
            AggregationScheme::AveragePrior => "avgprior".into(),
            AggregationScheme::ShiftedPrior => "shiftedprior".into(),
            AggregationScheme::OracleBestReply { x, y, alpha } => {
                format!("bestreply:{x},{y},{alpha}")
            }
            AggregationScheme::KnownPriorBayes(mu) => format!("bayes:{mu}"),
        }
    }
}

impl std::str::FromStr for AggregationScheme {
    type Err = SchemeError;

    /// Parses the CLI scheme names:
    /// `precision|degroot|minentropy|avgprior|shiftedprior|const:<c>|bayes:<mu>`.
    fn from_str(s: &str) -> Result<Self, SchemeError> {
        match s {
            "precision" => return Ok(AggregationScheme::Precision),
            "degroot" => return Ok(AggregationScheme::DeGroot),
            "minentropy" => return Ok(AggregationScheme::MinEntropy),
            "avgprior" => return Ok(AggregationScheme::AveragePrior),
            "shiftedprior" => return Ok(AggregationScheme::ShiftedPrior),
            _ => {}
        }
        if let Some(c) = s.strip_prefix("const:") {
            let c: f64 = c.parse().map_err(|_| SchemeError::UnknownScheme(s.into()))?;
            if !(0.0..=1.0).contains(&c) {
                return Err(SchemeError::ForecastOutOfRange(c));
            }
            return Ok(AggregationScheme::Constant(c));
        }
        if let Some(mu) = s.strip_prefix("bayes:") {
            let mu: f64 = mu.parse().map_err(|_| SchemeError::UnknownScheme(s.into()))?;
            if !(mu > 0.0 && mu < 1.0) {
                return Err(SchemeError::BoundaryInput);
            }
            return Ok(AggregationScheme::KnownPriorBayes(mu));
        }
        Err(SchemeError::UnknownScheme(s.into()))
    }
}

impl Aggregator for AggregationScheme {
    fn arity(&self) -> Option<usize> {
        match self {
            AggregationScheme::Constant(_) | AggregationScheme::KnownPriorBayes(_) => None,
            _ => Some(2),
        }
    }

    fn aggregate(&self, forecasts: &[f64]) -> Result<f64, SchemeError> {
        if let Some(expected) = self.arity() {
            if forecasts.len() != expected {
                return Err(SchemeError::ArityMismatch { expected, got: forecasts.len() });
            }
        }
        for &x in forecasts {
            if !(0.0..=1.0).contains(&x) {
                return Err(SchemeError::ForecastOutOfRange(x));
            }
        }
        match *self {
            AggregationScheme::Constant(c) => Ok(c),
            AggregationScheme::DeGroot => Ok(degroot(forecasts[0], forecasts[1])),
            AggregationScheme::MinEntropy => Ok(min_entropy(forecasts[0], forecasts[1])),
            AggregationScheme::Precision => Ok(precision_scheme(forecasts[0], forecasts[1])),
            AggregationScheme::AveragePrior => average_prior(forecasts[0], forecasts[1]),
            AggregationScheme::ShiftedPrior => shifted_prior(forecasts[0], forecasts[1]),
            AggregationScheme::OracleBestReply { x, y, alpha } => {
                oracle_best_reply(x, y, alpha, forecasts[0], forecasts[1])
            }
            AggregationScheme::KnownPriorBayes(mu) => Ok(bayes_aggregate(mu, forecasts)?),
        }
    }
}

/// The trivial scheme: 1/2 regardless of the forecasts (any arity).
pub fn constant_half(_forecasts: &[f64]) -> f64 {
    0.5
}

/// Arithmetic mean of the two forecasts.
pub fn degroot(x1: f64, x2: f64) -> f64 {
    0.5 * x1 + 0.5 * x2
}

/// Adopts the more extreme forecast; ties go to `x2` (the "otherwise"
/// branch of the defining case split).
pub fn min_entropy(x1: f64, x2: f64) -> f64 {
    if (x1 - 0.5).abs() > (x2 - 0.5).abs() {
        x1
    } else {
        x2
    }
}

/// The precision of a forecast, `phi(x) = 1 / (x (1-x))`.
pub fn phi(x: f64) -> f64 {
    1.0 / (x * (1.0 - x))
}

/// The precision scheme: a weighted mean of the two forecasts with weights
/// proportional to `phi` when the forecasts are within 0.4 of each other and
/// to `sqrt(phi)` when further apart.
///
/// Boundary rules, checked first: the pair `{0,1}` maps to 1/2 (it has
/// probability zero in every information structure); otherwise a 0 forecast
/// forces 0 and a 1 forecast forces 1.
pub fn precision_scheme(x1: f64, x2: f64) -> f64 {
    let has_zero = x1 == 0.0 || x2 == 0.0;
    let has_one = x1 == 1.0 || x2 == 1.0;
    if has_zero && has_one {
        return 0.5;
    }
    if has_zero {
        return 0.0;
    }
    if has_one {
        return 1.0;
    }
    let (w1, w2) = if (x1 - x2).abs() <= 0.4 {
        (phi(x1), phi(x2))
    } else {
        (phi(x1).sqrt(), phi(x2).sqrt())
    };
    (w1 * x1 + w2 * x2) / (w1 + w2)
}

/// Bayes aggregation with the mean of the two forecasts as a dummy prior.
pub fn average_prior(x1: f64, x2: f64) -> Result<f64, SchemeError> {
    Ok(bayes_aggregate(0.5 * (x1 + x2), &[x1, x2])?)
}

/// The dummy prior of the shifted-prior scheme: `0.49 x1 + 0.49 x2`, plus
/// `0.02` when `x1 + x2 > 1`.
pub fn shifted_dummy_prior(x1: f64, x2: f64) -> f64 {
    let base = 0.49 * x1 + 0.49 * x2;
    if x1 + x2 <= 1.0 {
        base
    } else {
        base + 0.02
    }
}

/// Bayes aggregation with the shifted dummy prior.
///
/// The dummy prior lies in `[0, 1]` by construction; it is clamped away from
/// the endpoints before aggregation, which only matters at `ep = 0` where the
/// zero-forecast shortcut already applies.
pub fn shifted_prior(x1: f64, x2: f64) -> Result<f64, SchemeError> {
    let ep = shifted_dummy_prior(x1, x2).clamp(1e-12, 1.0 - 1e-12);
    Ok(bayes_aggregate(ep, &[x1, x2])?)
}

/// The anonymous best reply of an aggregator who knows the two-value
/// martingale `(x, y, alpha)` with `y < x`: a weighted mean on the pair
/// `{x, y}`, absorbing 0- and 1-forecasts.
pub fn oracle_best_reply(
    x: f64,
    y: f64,
    alpha: f64,
    f1: f64,
    f2: f64,
) -> Result<f64, SchemeError> {
    if f1 == 0.0 || f2 == 0.0 {
        return Ok(0.0);
    }
    if f1 == 1.0 || f2 == 1.0 {
        return Ok(1.0);
    }
    let matches = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let is_pair = (matches(f1, x) && matches(f2, y)) || (matches(f1, y) && matches(f2, x));
    if !is_pair {
        return Err(SchemeError::UnsupportedForecastPair);
    }
    let weight_x = (1.0 - alpha) * (1.0 - y) / (1.0 - x);
    let weight_y = alpha * x / y;
    Ok((weight_x * x + weight_y * y) / (weight_x + weight_y))
}

/// The loss-maximizing branch weight for the two-value martingale on
/// `{x, y}`: `sqrt(y(1-y)) / (sqrt(y(1-y)) + sqrt(x(1-x)))`.
pub fn alpha_star(x: f64, y: f64) -> Result<f64, SchemeError> {
    if !(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0) {
        return Err(SchemeError::BoundaryInput);
    }
    let sx = (x * (1.0 - x)).sqrt();
    let sy = (y * (1.0 - y)).sqrt();
    Ok(sy / (sy + sx))
}

/// The `sqrt(phi)`-weighted mean of two interior forecasts; coincides with
/// the precision scheme when the forecasts are more than 0.4 apart.
pub fn sqrt_precision_mean(x: f64, y: f64) -> f64 {
    let wx = phi(x).sqrt();
    let wy = phi(y).sqrt();
    (wx * x + wy * y) / (wx + wy)
}
