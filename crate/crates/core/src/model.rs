//! Core probabilistic model: information structures, posteriors, and
//! posterior martingales.
//!
//! An information structure is a joint distribution over `(omega, s1..sn)`
//! where `omega` is a binary state and `s_i` is expert `i`'s private signal.
//! Everything downstream (forecasts, the omniscient benchmark, losses) is
//! derived from it by Bayes rule. All types here are immutable after
//! construction and all operations are pure, so they can be shared freely
//! across threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for checks on sums of probabilities.
pub const SUM_TOL: f64 = 1e-9;
/// Absolute tolerance for checks on individual probability entries.
pub const ENTRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("probability {value} out of [0,1] (name: {name})")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("signal {signal} of expert {expert} has zero marginal probability")]
    ZeroProbabilitySignal { expert: usize, signal: usize },
    #[error("signal profile has zero joint probability")]
    ZeroProbabilityProfile,
    #[error("forecasts contain both a 0 and a 1: no posterior is consistent with both")]
    ContradictoryCertainty,
    #[error("martingale constraint violated: {constraint} (residual {residual:.3e})")]
    InvalidMartingale { constraint: &'static str, residual: f64 },
    #[error("invalid structure: {constraint} (residual {residual:.3e})")]
    InvalidStructure { constraint: String, residual: f64 },
    #[error("structure too large to enumerate (more than 2^22 signal profiles)")]
    TooLarge,
}

/// A probability value, held in `[0,1]`.
///
/// Construction accepts values straying outside the interval by at most
/// `1e-12` (they are clamped); anything worse is rejected.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self, ModelError> {
        if !(-ENTRY_TOL..=1.0 + ENTRY_TOL).contains(&value) {
            return Err(ModelError::OutOfRange { name: "probability", value });
        }
        Ok(Probability(value.clamp(0.0, 1.0)))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for Probability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Computes the posterior `P(omega = 1 | x_1, .., x_n)` for conditionally
/// independent experts from the prior and the individual forecasts.
///
/// Evaluated in log-odds form so that products over many experts neither
/// underflow nor overflow. Forecasts of exactly 0 or 1 short-circuit to the
/// certain posterior; a 0 and a 1 together are contradictory.
pub fn bayes_aggregate(prior: f64, forecasts: &[f64]) -> Result<f64, ModelError> {
    let any_zero = forecasts.contains(&0.0);
    let any_one = forecasts.contains(&1.0);
    if any_zero && any_one {
        return Err(ModelError::ContradictoryCertainty);
    }
    if any_zero {
        return Ok(0.0);
    }
    if any_one {
        return Ok(1.0);
    }
    if !(prior > 0.0 && prior < 1.0) {
        return Err(ModelError::OutOfRange { name: "prior", value: prior });
    }
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let n = forecasts.len() as f64;
    let log_odds: f64 = forecasts.iter().map(|&x| logit(x)).sum::<f64>() - (n - 1.0) * logit(prior);
    // sigmoid, stable on both tails
    if log_odds >= 0.0 {
        Ok(1.0 / (1.0 + (-log_odds).exp()))
    } else {
        let e = log_odds.exp();
        Ok(e / (1.0 + e))
    }
}

/// Serialized form of one positive-weight cell of the joint distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightEntry {
    pub omega: u8,
    pub signals: Vec<usize>,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InformationStructureJson {
    signal_counts: Vec<usize>,
    entries: Vec<WeightEntry>,
}

/// A finite joint distribution over a binary state and a signal profile:
/// the adversary's pure strategy.
///
/// Weights are stored densely, indexed by state and a mixed-radix rank of
/// the signal profile. Per-expert marginals and posteriors are precomputed
/// at construction.
#[derive(Debug, Clone)]
pub struct InformationStructure {
    signal_counts: Vec<usize>,
    strides: Vec<usize>,
    n_profiles: usize,
    /// weights[omega][rank]
    weights: [Vec<f64>; 2],
    /// per expert, per signal: (mass with omega=0, mass with omega=1)
    marginals: Vec<Vec<(f64, f64)>>,
}

const MAX_ENUMERABLE_PROFILES: u128 = 1 << 22;

/// Product of the signal counts, `None` when it exceeds the enumeration cap
/// (computed with checked arithmetic; huge expert counts must not overflow).
fn profile_count(counts: &[usize]) -> Option<usize> {
    let n = counts.iter().try_fold(1u128, |acc, &c| {
        let next = acc.checked_mul(c as u128)?;
        (next <= MAX_ENUMERABLE_PROFILES).then_some(next)
    })?;
    Some(n as usize)
}

impl InformationStructure {
    /// Builds and validates a structure from dense weights
    /// (`weights[omega][rank]`, rank in row-major signal order).
    #[allow(clippy::needless_range_loop)]
    pub fn from_dense(signal_counts: Vec<usize>, weights: [Vec<f64>; 2]) -> Result<Self, ModelError> {
        if signal_counts.is_empty() || signal_counts.contains(&0) {
            return Err(ModelError::InvalidStructure {
                constraint: "signal_counts must be nonempty positive integers".into(),
                residual: 0.0,
            });
        }
        let n_profiles = profile_count(&signal_counts).ok_or(ModelError::TooLarge)?;
        if weights[0].len() != n_profiles || weights[1].len() != n_profiles {
            return Err(ModelError::InvalidStructure {
                constraint: "weight table does not match signal space size".into(),
                residual: 0.0,
            });
        }
        let mut weights = weights;
        let mut total = 0.0;
        for table in weights.iter_mut() {
            for w in table.iter_mut() {
                if *w < -ENTRY_TOL {
                    return Err(ModelError::InvalidStructure {
                        constraint: "negative weight".into(),
                        residual: *w,
                    });
                }
                if *w < 0.0 {
                    *w = 0.0;
                }
                total += *w;
            }
        }
        if (total - 1.0).abs() > SUM_TOL {
            return Err(ModelError::InvalidStructure {
                constraint: "weights must sum to 1".into(),
                residual: total - 1.0,
            });
        }

        let mut strides = vec![1usize; signal_counts.len()];
        for i in (0..signal_counts.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * signal_counts[i + 1];
        }

        let mut marginals: Vec<Vec<(f64, f64)>> =
            signal_counts.iter().map(|&c| vec![(0.0, 0.0); c]).collect();
        let mut profile = vec![0usize; signal_counts.len()];
        for rank in 0..n_profiles {
            decode(rank, &strides, &signal_counts, &mut profile);
            let w0 = weights[0][rank];
            let w1 = weights[1][rank];
            for (i, &s) in profile.iter().enumerate() {
                marginals[i][s].0 += w0;
                marginals[i][s].1 += w1;
            }
        }

        Ok(InformationStructure { signal_counts, strides, n_profiles, weights, marginals })
    }

    /// Builds a structure from sparse entries (the JSON wire format).
    pub fn from_entries(signal_counts: Vec<usize>, entries: &[WeightEntry]) -> Result<Self, ModelError> {
        if signal_counts.is_empty() || signal_counts.contains(&0) {
            return Err(ModelError::InvalidStructure {
                constraint: "signal_counts must be nonempty positive integers".into(),
                residual: 0.0,
            });
        }
        let n_profiles = profile_count(&signal_counts).ok_or(ModelError::TooLarge)?;
        let mut strides = vec![1usize; signal_counts.len()];
        for i in (0..signal_counts.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * signal_counts[i + 1];
        }
        let mut weights = [vec![0.0; n_profiles], vec![0.0; n_profiles]];
        for e in entries {
            if e.omega > 1 {
                return Err(ModelError::InvalidStructure {
                    constraint: format!("omega must be 0 or 1, got {}", e.omega),
                    residual: 0.0,
                });
            }
            if e.signals.len() != signal_counts.len() {
                return Err(ModelError::InvalidStructure {
                    constraint: format!(
                        "entry has {} signals, structure has {} experts",
                        e.signals.len(),
                        signal_counts.len()
                    ),
                    residual: 0.0,
                });
            }
            for (i, (&s, &c)) in e.signals.iter().zip(&signal_counts).enumerate() {
                if s >= c {
                    return Err(ModelError::InvalidStructure {
                        constraint: format!("signal index {s} out of range for expert {i} (|S|={c})"),
                        residual: 0.0,
                    });
                }
            }
            let rank: usize = e.signals.iter().zip(&strides).map(|(&s, &st)| s * st).sum();
            weights[e.omega as usize][rank] += e.p;
        }
        Self::from_dense(signal_counts, weights)
    }

    pub fn n_experts(&self) -> usize {
        self.signal_counts.len()
    }

    pub fn signal_counts(&self) -> &[usize] {
        &self.signal_counts
    }

    pub fn n_profiles(&self) -> usize {
        self.n_profiles
    }

    /// Joint weight of `(omega, profile)`.
    pub fn weight(&self, omega: u8, profile: &[usize]) -> f64 {
        self.weights[omega as usize][self.rank(profile)]
    }

    pub fn rank(&self, profile: &[usize]) -> usize {
        profile.iter().zip(&self.strides).map(|(&s, &st)| s * st).sum()
    }

    pub fn decode_rank(&self, rank: usize, profile: &mut Vec<usize>) {
        profile.resize(self.signal_counts.len(), 0);
        decode(rank, &self.strides, &self.signal_counts, profile);
    }

    pub fn weights_at(&self, rank: usize) -> (f64, f64) {
        (self.weights[0][rank], self.weights[1][rank])
    }

    /// Prior probability of `omega = 1`.
    pub fn prior(&self) -> f64 {
        self.weights[1].iter().sum()
    }

    /// The forecast `P(omega = 1 | s_i)` announced by expert `expert` on
    /// observing `signal`.
    pub fn expert_posterior(&self, expert: usize, signal: usize) -> Result<Probability, ModelError> {
        let (w0, w1) = self.marginals[expert][signal];
        if w0 + w1 <= 0.0 {
            return Err(ModelError::ZeroProbabilitySignal { expert, signal });
        }
        Probability::new(w1 / (w0 + w1))
    }

    /// The omniscient benchmark `P(omega = 1 | s_1, .., s_n)`.
    pub fn omniscient_posterior(&self, profile: &[usize]) -> Result<Probability, ModelError> {
        let rank = self.rank(profile);
        let (w0, w1) = (self.weights[0][rank], self.weights[1][rank]);
        if w0 + w1 <= 0.0 {
            return Err(ModelError::ZeroProbabilityProfile);
        }
        Probability::new(w1 / (w0 + w1))
    }

    /// Returns the structure with experts relabeled by `perm`
    /// (new expert `i` is old expert `perm[i]`).
    pub fn permute_experts(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n_experts());
        let new_counts: Vec<usize> = perm.iter().map(|&i| self.signal_counts[i]).collect();
        let mut new_strides = vec![1usize; new_counts.len()];
        for i in (0..new_counts.len().saturating_sub(1)).rev() {
            new_strides[i] = new_strides[i + 1] * new_counts[i + 1];
        }
        let mut new_weights = [vec![0.0; self.n_profiles], vec![0.0; self.n_profiles]];
        let mut profile = vec![0usize; self.n_experts()];
        for rank in 0..self.n_profiles {
            decode(rank, &self.strides, &self.signal_counts, &mut profile);
            let new_rank: usize =
                perm.iter().zip(&new_strides).map(|(&old, &st)| profile[old] * st).sum();
            new_weights[0][new_rank] = self.weights[0][rank];
            new_weights[1][new_rank] = self.weights[1][rank];
        }
        InformationStructure::from_dense(new_counts, new_weights)
            .expect("permutation preserves validity")
    }

    /// Two-expert convenience: swap the expert roles.
    pub fn swap_experts(&self) -> Self {
        assert_eq!(self.n_experts(), 2, "swap_experts is for two-expert structures");
        self.permute_experts(&[1, 0])
    }

    pub fn to_json(&self) -> String {
        let mut entries = Vec::new();
        let mut profile = Vec::new();
        for omega in 0..2u8 {
            for rank in 0..self.n_profiles {
                let p = self.weights[omega as usize][rank];
                if p > 0.0 {
                    self.decode_rank(rank, &mut profile);
                    entries.push(WeightEntry { omega, signals: profile.clone(), p });
                }
            }
        }
        serde_json::to_string_pretty(&InformationStructureJson {
            signal_counts: self.signal_counts.clone(),
            entries,
        })
        .expect("serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let raw: InformationStructureJson =
            serde_json::from_str(s).map_err(|e| ModelError::InvalidStructure {
                constraint: format!("malformed JSON: {e}"),
                residual: 0.0,
            })?;
        Self::from_entries(raw.signal_counts, &raw.entries)
    }
}

fn decode(rank: usize, strides: &[usize], counts: &[usize], out: &mut [usize]) {
    for i in 0..counts.len() {
        out[i] = (rank / strides[i]) % counts[i];
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpertSignals {
    pub p_given_0: Vec<f64>,
    pub p_given_1: Vec<f64>,
}

/// Prior plus per-expert conditional signal distributions; the experts'
/// signals are independent given the state.
///
/// This form scales to very large expert counts; [`Self::expand`] produces
/// the explicit joint only when the signal space is small enough to
/// enumerate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondIndepStructure {
    prior: Probability,
    experts: Vec<ExpertSignals>,
}

impl CondIndepStructure {
    pub fn new(prior: f64, experts: Vec<ExpertSignals>) -> Result<Self, ModelError> {
        let prior = Probability::new(prior)?;
        for (i, e) in experts.iter().enumerate() {
            if e.p_given_0.len() != e.p_given_1.len() || e.p_given_0.is_empty() {
                return Err(ModelError::InvalidStructure {
                    constraint: format!("expert {i}: conditional distributions must share a nonempty signal set"),
                    residual: 0.0,
                });
            }
            for (name, dist) in [("p_given_0", &e.p_given_0), ("p_given_1", &e.p_given_1)] {
                if let Some(&bad) = dist.iter().find(|&&p| p < -ENTRY_TOL) {
                    return Err(ModelError::InvalidStructure {
                        constraint: format!("expert {i}: negative entry in {name}"),
                        residual: bad,
                    });
                }
                let sum: f64 = dist.iter().sum();
                if (sum - 1.0).abs() > SUM_TOL {
                    return Err(ModelError::InvalidStructure {
                        constraint: format!("expert {i}: {name} must sum to 1"),
                        residual: sum - 1.0,
                    });
                }
            }
        }
        Ok(CondIndepStructure { prior, experts })
    }

    pub fn prior(&self) -> f64 {
        self.prior.get()
    }

    pub fn n_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn experts(&self) -> &[ExpertSignals] {
        &self.experts
    }

    pub fn signal_counts(&self) -> Vec<usize> {
        self.experts.iter().map(|e| e.p_given_0.len()).collect()
    }

    /// `P(s_i = signal | omega)`.
    pub fn conditional(&self, expert: usize, signal: usize, omega: u8) -> f64 {
        match omega {
            0 => self.experts[expert].p_given_0[signal],
            _ => self.experts[expert].p_given_1[signal],
        }
    }

    /// Expert `i`'s forecast on observing `signal`.
    pub fn posterior(&self, expert: usize, signal: usize) -> Result<Probability, ModelError> {
        let mu = self.prior.get();
        let w1 = mu * self.experts[expert].p_given_1[signal];
        let w0 = (1.0 - mu) * self.experts[expert].p_given_0[signal];
        if w0 + w1 <= 0.0 {
            return Err(ModelError::ZeroProbabilitySignal { expert, signal });
        }
        Probability::new(w1 / (w0 + w1))
    }

    /// Expands to the explicit joint: `w(omega, s) = P(omega) * prod_i P(s_i | omega)`.
    #[allow(clippy::needless_range_loop)]
    pub fn expand(&self) -> Result<InformationStructure, ModelError> {
        let counts = self.signal_counts();
        let n_profiles = profile_count(&counts).ok_or(ModelError::TooLarge)?;
        let mut strides = vec![1usize; counts.len()];
        for i in (0..counts.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * counts[i + 1];
        }
        let mu = self.prior.get();
        let mut weights = [vec![0.0; n_profiles], vec![0.0; n_profiles]];
        let mut profile = vec![0usize; counts.len()];
        for rank in 0..n_profiles {
            decode(rank, &strides, &counts, &mut profile);
            let mut p0 = 1.0 - mu;
            let mut p1 = mu;
            for (i, &s) in profile.iter().enumerate() {
                p0 *= self.experts[i].p_given_0[s];
                p1 *= self.experts[i].p_given_1[s];
            }
            weights[0][rank] = p0;
            weights[1][rank] = p1;
        }
        InformationStructure::from_dense(counts, weights)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let raw: CondIndepStructure =
            serde_json::from_str(s).map_err(|e| ModelError::InvalidStructure {
                constraint: format!("malformed JSON: {e}"),
                residual: 0.0,
            })?;
        Self::new(raw.prior.get(), raw.experts)
    }
}

/// Builds a conditionally independent structure from a prior and, per
/// expert, a finitely supported distribution over posterior values.
///
/// Uses the splitting construction `P(s=v | omega=1) = p_v v / mu` and
/// `P(s=v | omega=0) = p_v (1-v) / (1-mu)`, which is the unique signal
/// distribution realizing the given posteriors. Each expert's posterior
/// distribution must have mean `mu`; zero-probability support points are
/// dropped.
pub fn ci_from_posteriors(
    prior: f64,
    per_expert: &[Vec<(f64, f64)>], // (probability, posterior value)
) -> Result<CondIndepStructure, ModelError> {
    if !(prior > 0.0 && prior < 1.0) {
        return Err(ModelError::OutOfRange { name: "prior", value: prior });
    }
    let mut experts = Vec::with_capacity(per_expert.len());
    for (i, support) in per_expert.iter().enumerate() {
        let support: Vec<(f64, f64)> = support.iter().copied().filter(|&(p, _)| p > 0.0).collect();
        let mass: f64 = support.iter().map(|&(p, _)| p).sum();
        let mean: f64 = support.iter().map(|&(p, v)| p * v).sum();
        if (mass - 1.0).abs() > SUM_TOL {
            return Err(ModelError::InvalidStructure {
                constraint: format!("expert {i}: posterior distribution must sum to 1"),
                residual: mass - 1.0,
            });
        }
        if (mean - prior).abs() > SUM_TOL {
            return Err(ModelError::InvalidStructure {
                constraint: format!("expert {i}: posterior distribution must have mean equal to the prior"),
                residual: mean - prior,
            });
        }
        let p_given_1: Vec<f64> = support.iter().map(|&(p, v)| p * v / prior).collect();
        let p_given_0: Vec<f64> = support.iter().map(|&(p, v)| p * (1.0 - v) / (1.0 - prior)).collect();
        experts.push(ExpertSignals { p_given_0, p_given_1 });
    }
    CondIndepStructure::new(prior, experts)
}

/// One branch of a length-2 posterior martingale: the less-informed
/// expert's posterior and, conditional on it, the more-informed expert's.
#[derive(Debug, Clone)]
pub struct MartingaleBranch {
    pub prob: f64,
    pub x1: f64,
    pub leaves: Vec<(f64, f64)>, // (conditional probability, x2)
}

/// A martingale `(X0, X1, X2)` of posteriors: prior, the less-informed
/// expert's posterior, the more-informed expert's posterior.
///
/// Zero-probability branches and leaves are dropped at construction; they
/// cannot affect any expected loss.
#[derive(Debug, Clone)]
pub struct PosteriorMartingale {
    x0: f64,
    branches: Vec<MartingaleBranch>,
}

impl PosteriorMartingale {
    pub fn new(branches: Vec<MartingaleBranch>) -> Result<Self, ModelError> {
        let mut kept = Vec::with_capacity(branches.len());
        for b in branches {
            if b.prob < -ENTRY_TOL {
                return Err(ModelError::InvalidMartingale {
                    constraint: "negative branch probability",
                    residual: b.prob,
                });
            }
            if b.prob <= 0.0 {
                continue;
            }
            let leaves: Vec<(f64, f64)> = b.leaves.into_iter().filter(|&(q, _)| q > 0.0).collect();
            let qsum: f64 = leaves.iter().map(|&(q, _)| q).sum();
            if (qsum - 1.0).abs() > SUM_TOL {
                return Err(ModelError::InvalidMartingale {
                    constraint: "leaf probabilities must sum to 1",
                    residual: qsum - 1.0,
                });
            }
            let mean: f64 = leaves.iter().map(|&(q, v)| q * v).sum();
            if (mean - b.x1).abs() > SUM_TOL {
                return Err(ModelError::InvalidMartingale {
                    constraint: "E[X2 | X1] must equal X1",
                    residual: mean - b.x1,
                });
            }
            Probability::new(b.x1)?;
            for &(_, v) in &leaves {
                Probability::new(v)?;
            }
            kept.push(MartingaleBranch { prob: b.prob, x1: b.x1, leaves });
        }
        let psum: f64 = kept.iter().map(|b| b.prob).sum();
        if (psum - 1.0).abs() > SUM_TOL {
            return Err(ModelError::InvalidMartingale {
                constraint: "branch probabilities must sum to 1",
                residual: psum - 1.0,
            });
        }
        let x0: f64 = kept.iter().map(|b| b.prob * b.x1).sum();
        Ok(PosteriorMartingale { x0, branches: kept })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn branches(&self) -> &[MartingaleBranch] {
        &self.branches
    }

    /// Realizes the martingale as a two-expert Blackwell-ordered structure.
    ///
    /// Expert 1 is the less-informed expert (signal = branch index, posterior
    /// `X1`); expert 2 is the more-informed expert (signal = leaf index,
    /// posterior `X2`, and its signal determines expert 1's). The prior is
    /// `X0` and the omniscient posterior on every positive-probability
    /// profile equals `X2`.
    pub fn realize(&self) -> InformationStructure {
        let n1 = self.branches.len();
        let n2: usize = self.branches.iter().map(|b| b.leaves.len()).sum();
        let mut weights = [vec![0.0; n1 * n2], vec![0.0; n1 * n2]];
        let mut leaf_base = 0usize;
        for (j, b) in self.branches.iter().enumerate() {
            for (l, &(q, x2)) in b.leaves.iter().enumerate() {
                let rank = j * n2 + (leaf_base + l);
                let mass = b.prob * q;
                weights[1][rank] = mass * x2;
                weights[0][rank] = mass * (1.0 - x2);
            }
            leaf_base += b.leaves.len();
        }
        InformationStructure::from_dense(vec![n1, n2], weights)
            .expect("a valid martingale realizes a valid structure")
    }
}

/// The extreme points `M_{x,y,z}` of the set of length-2 martingales:
/// `X0 = X1 = y` surely, `X2 = x` with probability `(z-y)/(z-x)` and
/// `X2 = z` with probability `(y-x)/(z-x)`.
#[derive(Debug, Clone, Copy)]
pub struct ExtremeMartingale {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ExtremeMartingale {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, ModelError> {
        for (name, v) in [("x", x), ("y", y), ("z", z)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::OutOfRange { name, value: v });
            }
        }
        if x > y || y > z {
            return Err(ModelError::InvalidMartingale {
                constraint: "requires x <= y <= z",
                residual: (x - y).max(y - z),
            });
        }
        Ok(ExtremeMartingale { x, y, z })
    }

    /// Branch weights on `X2 = x` and `X2 = z`; the degenerate case `x = z`
    /// is the point mass at `y`.
    pub fn leaf_weights(&self) -> Vec<(f64, f64)> {
        if self.z - self.x <= 0.0 {
            vec![(1.0, self.y)]
        } else {
            vec![
                ((self.z - self.y) / (self.z - self.x), self.x),
                ((self.y - self.x) / (self.z - self.x), self.z),
            ]
        }
    }

    pub fn to_martingale(&self) -> PosteriorMartingale {
        PosteriorMartingale::new(vec![MartingaleBranch {
            prob: 1.0,
            x1: self.y,
            leaves: self.leaf_weights(),
        }])
        .expect("extreme martingale is valid by construction")
    }
}

/// A two-point posterior distribution with mean `mu` and support `{y, z}`,
/// `y <= mu <= z`: the extreme points of the set of posterior distributions.
#[derive(Debug, Clone, Copy)]
pub struct ExtremePosteriorDist {
    pub mu: f64,
    pub y: f64,
    pub z: f64,
}

impl ExtremePosteriorDist {
    pub fn new(mu: f64, y: f64, z: f64) -> Result<Self, ModelError> {
        for (name, v) in [("mu", mu), ("y", y), ("z", z)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::OutOfRange { name, value: v });
            }
        }
        if y > mu || mu > z {
            return Err(ModelError::InvalidStructure {
                constraint: "requires y <= mu <= z".into(),
                residual: (y - mu).max(mu - z),
            });
        }
        Ok(ExtremePosteriorDist { mu, y, z })
    }

    /// Support as `(probability, posterior)` pairs; `y = z` degenerates to a
    /// point mass at `mu`.
    pub fn support(&self) -> Vec<(f64, f64)> {
        if self.z - self.y <= 1e-14 {
            vec![(1.0, self.mu)]
        } else {
            vec![
                ((self.z - self.mu) / (self.z - self.y), self.y),
                ((self.mu - self.y) / (self.z - self.y), self.z),
            ]
        }
    }
}
