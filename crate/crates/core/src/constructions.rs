//! Factories for the named adversarial instances: the XOR structure, the
//! Blackwell and conditionally-independent maxmin mixtures, the correlated
//! near-confusable pair, and the confusable chain used by the many-expert
//! bounds.
//!
//! Every factory returns validated objects; none of them draws randomness.

use crate::loss::{CiMixture, LossError, MixedAdversary};
use crate::model::{
    ci_from_posteriors, CondIndepStructure, InformationStructure, MartingaleBranch, ModelError,
    PosteriorMartingale, WeightEntry,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("index m={m} out of range 1..={len}")]
    IndexOutOfRange { m: usize, len: usize },
    #[error("unknown construction name: {0}")]
    UnknownConstruction(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// The two-expert structure in which each signal alone is uninformative but
/// the pair reveals the state: weight 1/4 on each of (0; s1 s2), (0; s1' s2'),
/// (1; s1 s2'), (1; s1' s2).
pub fn xor_structure() -> InformationStructure {
    InformationStructure::from_entries(
        vec![2, 2],
        &[
            WeightEntry { omega: 0, signals: vec![0, 0], p: 0.25 },
            WeightEntry { omega: 0, signals: vec![1, 1], p: 0.25 },
            WeightEntry { omega: 1, signals: vec![0, 1], p: 0.25 },
            WeightEntry { omega: 1, signals: vec![1, 0], p: 0.25 },
        ],
    )
    .expect("static table is valid")
}

/// Prior 1/2; expert 1 learns nothing, expert 2 learns the state. The worst
/// case for the mean (DeGroot) scheme.
pub fn degroot_witness() -> InformationStructure {
    PosteriorMartingale::new(vec![MartingaleBranch {
        prob: 1.0,
        x1: 0.5,
        leaves: vec![(0.5, 0.0), (0.5, 1.0)],
    }])
    .expect("static martingale is valid")
    .realize()
}

/// The martingale with `X1 in {0.2, 0.8}` and conditional jumps to
/// `{0, 0.7}` and `{0.3, 1}` with probabilities 5/7 and 2/7; the witness
/// against the minimal-entropy scheme.
pub fn fig1_martingale() -> InformationStructure {
    PosteriorMartingale::new(vec![
        MartingaleBranch { prob: 0.5, x1: 0.2, leaves: vec![(5.0 / 7.0, 0.0), (2.0 / 7.0, 0.7)] },
        MartingaleBranch { prob: 0.5, x1: 0.8, leaves: vec![(2.0 / 7.0, 0.3), (5.0 / 7.0, 1.0)] },
    ])
    .expect("static martingale is valid")
    .realize()
}

/// The maxmin martingale for Blackwell-ordered experts at noise level `x`:
/// prior 1/2, less-informed posterior `x` or `1-x`, and conditional jumps to
/// `{0, 1-x}` resp. `{x, 1}` with weights `(1-2x)/(1-x)` and `x/(1-x)`.
pub fn blackwell_base_martingale(x: f64) -> Result<PosteriorMartingale, ConstructError> {
    if !(x > 0.0 && x < 0.5) {
        return Err(ConstructError::Domain(format!("need 0 < x < 1/2, got {x}")));
    }
    let near = x / (1.0 - x);
    let far = (1.0 - 2.0 * x) / (1.0 - x);
    Ok(PosteriorMartingale::new(vec![
        MartingaleBranch { prob: 0.5, x1: x, leaves: vec![(far, 0.0), (near, 1.0 - x)] },
        MartingaleBranch { prob: 0.5, x1: 1.0 - x, leaves: vec![(near, x), (far, 1.0)] },
    ])?)
}

/// The adversary's maxmin mixed strategy for Blackwell-ordered experts:
/// the base martingale realized with either expert being the more-informed
/// one, with probability 1/2 each.
pub fn blackwell_maxmin(x: f64) -> Result<MixedAdversary, ConstructError> {
    let realized = blackwell_base_martingale(x)?.realize();
    let swapped = realized.swap_experts();
    Ok(MixedAdversary::new(vec![(0.5, realized), (0.5, swapped)])?)
}

/// The maxmin mixture for conditionally independent experts: with
/// probability 1/2 the prior is `x` and both experts' posteriors are
/// `{0, 1/2}` with weights `{1-2x, 2x}`; with probability 1/2 the mirrored
/// structure with prior `1-x` and posteriors `{1, 1/2}`.
pub fn ci_maxmin(x: f64) -> Result<CiMixture, ConstructError> {
    if !(x > 0.0 && x < 0.5) {
        return Err(ConstructError::Domain(format!("need 0 < x < 1/2, got {x}")));
    }
    let low_support = vec![(1.0 - 2.0 * x, 0.0), (2.0 * x, 0.5)];
    let high_support = vec![(1.0 - 2.0 * x, 1.0), (2.0 * x, 0.5)];
    let low = ci_from_posteriors(x, &[low_support.clone(), low_support])?;
    let high = ci_from_posteriors(1.0 - x, &[high_support.clone(), high_support])?;
    Ok(CiMixture::new(vec![(0.5, low), (0.5, high)])?)
}

/// The correlated pair of structures whose forecasts are nearly confusable
/// across atoms while, within each atom, the forecast pair reveals the
/// state. As `delta` shrinks, no aggregation scheme can do better than 1/2.
pub fn correlated_delta(delta: f64) -> Result<MixedAdversary, ConstructError> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(ConstructError::Domain(format!("need 0 < delta < 1/2, got {delta}")));
    }
    let first = InformationStructure::from_entries(
        vec![2, 2],
        &[
            WeightEntry { omega: 0, signals: vec![0, 0], p: 0.25 },
            WeightEntry { omega: 0, signals: vec![1, 1], p: 0.25 },
            WeightEntry { omega: 1, signals: vec![0, 1], p: (1.0 + delta) / 4.0 },
            WeightEntry { omega: 1, signals: vec![1, 0], p: (1.0 - delta) / 4.0 },
        ],
    )?;
    let d = 4.0 - 2.0 * delta * delta;
    let second = InformationStructure::from_entries(
        vec![2, 2],
        &[
            WeightEntry { omega: 0, signals: vec![0, 0], p: (1.0 + delta) / d },
            WeightEntry { omega: 0, signals: vec![1, 1], p: (1.0 - delta) / d },
            WeightEntry { omega: 1, signals: vec![0, 1], p: (1.0 - delta * delta) / d },
            WeightEntry { omega: 1, signals: vec![1, 0], p: (1.0 - delta * delta) / d },
        ],
    )?;
    Ok(MixedAdversary::new(vec![(0.5, first), (0.5, second)])?)
}

/// A two-value martingale: `X1 = y` with probability `1-alpha` jumping to
/// `{0, x}`, or `X1 = x` with probability `alpha` jumping to `{y, 1}`;
/// requires `0 < y < x < 1`.
pub fn two_value_martingale(
    x: f64,
    y: f64,
    alpha: f64,
) -> Result<PosteriorMartingale, ConstructError> {
    if !(y > 0.0 && y < x && x < 1.0) {
        return Err(ConstructError::Domain(format!("need 0 < y < x < 1, got x={x}, y={y}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConstructError::Domain(format!("need 0 < alpha < 1, got {alpha}")));
    }
    Ok(PosteriorMartingale::new(vec![
        MartingaleBranch {
            prob: 1.0 - alpha,
            x1: y,
            leaves: vec![((x - y) / x, 0.0), (y / x, x)],
        },
        MartingaleBranch {
            prob: alpha,
            x1: x,
            leaves: vec![((1.0 - x) / (1.0 - y), y), ((x - y) / (1.0 - y), 1.0)],
        },
    ])?)
}

/// Parameters of the confusable chain of single-expert structures.
///
/// Member `m` has binary signals with posteriors `1/2 - 1/(4k)` and
/// `1/2 + 1/(4k)`, high-signal probability `y_m`, and prior `mu_m`; the
/// mixing weights `alpha_m` are chosen so that the forecast distribution of
/// member `m` in state 1 coincides with member `m+1` in state 0 at equal
/// posterior odds.
///
/// `len` may exceed `k`: the chain recursion extends naturally, which is how
/// the coarse 1/4-vs-3/4 instances (the `k = 1` family) get their second and
/// third members. The printed bounds on `y`, `mu`, `beta` are only claimed
/// for `len <= k`.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    k: usize,
    len: usize,
    y: Vec<f64>,
    mu: Vec<f64>,
    beta: Vec<f64>,
    alpha: Vec<f64>,
}

impl ChainSpec {
    pub fn new(k: usize) -> Self {
        Self::with_len(k, k)
    }

    pub fn with_len(k: usize, len: usize) -> Self {
        assert!(k >= 1 && len >= 1);
        let kf = k as f64;
        let base = 1.0 - 2.0 / (2.0 * kf + 1.0);
        // exponent form rather than iterated multiplication: no error
        // accumulation at large k
        let y: Vec<f64> = (1..=len).map(|m| 1.0 / (1.0 + base.powi(2 * m as i32 - 2))).collect();
        let mu: Vec<f64> =
            y.iter().map(|&ym| 0.5 - 1.0 / (4.0 * kf) + ym / (2.0 * kf)).collect();
        let mut beta = vec![1.0];
        for m in 1..len {
            let next = beta[m - 1] * mu[m - 1] / (1.0 - mu[m]);
            beta.push(next);
        }
        let total: f64 = beta.iter().sum();
        let alpha: Vec<f64> = beta.iter().map(|&b| b / total).collect();
        ChainSpec { k, len, y, mu, beta, alpha }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Posterior announced on the low signal: `1/2 - 1/(4k)`.
    pub fn low_forecast(&self) -> f64 {
        0.5 - 1.0 / (4.0 * self.k as f64)
    }

    /// Posterior announced on the high signal: `1/2 + 1/(4k)`.
    pub fn high_forecast(&self) -> f64 {
        0.5 + 1.0 / (4.0 * self.k as f64)
    }

    /// `m` is 1-based throughout, matching the chain indexing.
    pub fn y(&self, m: usize) -> f64 {
        self.y[m - 1]
    }

    pub fn mu(&self, m: usize) -> f64 {
        self.mu[m - 1]
    }

    pub fn beta(&self, m: usize) -> f64 {
        self.beta[m - 1]
    }

    pub fn alpha(&self, m: usize) -> f64 {
        self.alpha[m - 1]
    }

    /// Probability of the high forecast under member `m` conditional on the
    /// state.
    pub fn high_fraction(&self, m: usize, omega: u8) -> f64 {
        let (lo, hi) = (0.5 - 1.0 / (4.0 * self.k as f64), 0.5 + 1.0 / (4.0 * self.k as f64));
        let ym = self.y(m);
        match omega {
            1 => hi * ym / (hi * ym + lo * (1.0 - ym)),
            _ => lo * ym / (lo * ym + hi * (1.0 - ym)),
        }
    }

    /// The `n`-expert conditionally independent structure of member `m`.
    pub fn structure(&self, m: usize, n: usize) -> Result<CondIndepStructure, ConstructError> {
        if m == 0 || m > self.len {
            return Err(ConstructError::IndexOutOfRange { m, len: self.len });
        }
        if n == 0 {
            return Err(ConstructError::Domain("need at least one expert".into()));
        }
        let kf = self.k as f64;
        let (lo, hi) = (0.5 - 1.0 / (4.0 * kf), 0.5 + 1.0 / (4.0 * kf));
        let ym = self.y(m);
        let mu = self.mu(m);
        let expert = crate::model::ExpertSignals {
            p_given_0: vec![hi * (1.0 - ym) / (1.0 - mu), lo * ym / (1.0 - mu)],
            p_given_1: vec![lo * (1.0 - ym) / mu, hi * ym / mu],
        };
        Ok(CondIndepStructure::new(mu, vec![expert; n])?)
    }
}

/// Shorthand for [`ChainSpec::new`].
pub fn chain_spec(k: usize) -> ChainSpec {
    ChainSpec::new(k)
}

/// The mixed strategy over the chain: member `m` with weight `alpha_m`,
/// each with `n` i.i.d. experts.
pub fn sigma_k(k: usize, n: usize) -> Result<CiMixture, ConstructError> {
    let spec = ChainSpec::new(k);
    let atoms = (1..=k)
        .map(|m| Ok((spec.alpha(m), spec.structure(m, n)?)))
        .collect::<Result<Vec<_>, ConstructError>>()?;
    Ok(CiMixture::new(atoms)?)
}

/// A named construction parsed from the CLI grammar.
pub enum Construction {
    Joint(InformationStructure),
    JointMixture(MixedAdversary),
    CiMixture(CiMixture),
}

impl Construction {
    pub fn n_experts(&self) -> usize {
        match self {
            Construction::Joint(s) => s.n_experts(),
            Construction::JointMixture(m) => m.n_experts(),
            Construction::CiMixture(m) => m.n_experts(),
        }
    }
}

/// Parses `xor | degroot-witness | fig1 | blackwell:<x> | ci:<x> |
/// delta:<d> | chain:<k>,<m>,<n> | sigma:<k>,<n>`.
pub fn parse_construction(name: &str) -> Result<Construction, ConstructError> {
    match name {
        "xor" => return Ok(Construction::Joint(xor_structure())),
        "degroot-witness" => return Ok(Construction::Joint(degroot_witness())),
        "fig1" => return Ok(Construction::Joint(fig1_martingale())),
        _ => {}
    }
    let parse_f64 = |s: &str| -> Result<f64, ConstructError> {
        s.parse().map_err(|_| ConstructError::UnknownConstruction(name.into()))
    };
    let parse_usize = |s: &str| -> Result<usize, ConstructError> {
        s.parse().map_err(|_| ConstructError::UnknownConstruction(name.into()))
    };
    if let Some(arg) = name.strip_prefix("blackwell:") {
        return Ok(Construction::JointMixture(blackwell_maxmin(parse_f64(arg)?)?));
    }
    if let Some(arg) = name.strip_prefix("ci:") {
        return Ok(Construction::CiMixture(ci_maxmin(parse_f64(arg)?)?));
    }
    if let Some(arg) = name.strip_prefix("delta:") {
        return Ok(Construction::JointMixture(correlated_delta(parse_f64(arg)?)?));
    }
    if let Some(arg) = name.strip_prefix("chain:") {
        let parts: Vec<&str> = arg.split(',').collect();
        if parts.len() != 3 {
            return Err(ConstructError::UnknownConstruction(name.into()));
        }
        let (k, m, n) = (parse_usize(parts[0])?, parse_usize(parts[1])?, parse_usize(parts[2])?);
        if k == 0 {
            return Err(ConstructError::Domain("chain needs k >= 1".into()));
        }
        let spec = ChainSpec::with_len(k, m.max(k));
        let ci = spec.structure(m, n)?;
        return Ok(Construction::CiMixture(CiMixture::from(ci)));
    }
    if let Some(arg) = name.strip_prefix("sigma:") {
        let parts: Vec<&str> = arg.split(',').collect();
        if parts.len() != 2 {
            return Err(ConstructError::UnknownConstruction(name.into()));
        }
        let (k, n) = (parse_usize(parts[0])?, parse_usize(parts[1])?);
        if k == 0 {
            return Err(ConstructError::Domain("sigma needs k >= 1".into()));
        }
        return Ok(Construction::CiMixture(sigma_k(k, n)?));
    }
    Err(ConstructError::UnknownConstruction(name.into()))
}
