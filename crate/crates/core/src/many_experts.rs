//! Desk-scale verification of the many-expert impossibility: with `n`
//! conditionally i.i.d. experts, no aggregation scheme beats the constant
//! 1/2 forecast by more than a vanishing margin.
//!
//! The lower bound is exact: against the confusable chain `sigma(k)`, even
//! an aggregator who observes the full forecast distribution has square
//! loss `1/4` outside two tail events, giving the floor
//! `(1/4)(1 - alpha_1 (1 - mu_1) - mu_k alpha_k) >= 1/4 - 1/(3k)`.
//! The upper bound is simulated: a 0/1 counting scheme that thresholds the
//! fraction of high forecasts errs with probability at most
//! `exp(-n / (72 k^2))` by Hoeffding's inequality.

use crate::constructions::ChainSpec;
use crate::loss::pooled_conditional_variance;
use crate::schemes::{Aggregator, SchemeError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Count of experts announcing the high forecast out of `n`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ForecastCountStat {
    pub n: usize,
    pub count_high: usize,
}

impl ForecastCountStat {
    pub fn q(&self) -> f64 {
        self.count_high as f64 / self.n as f64
    }
}

/// Exact square loss of the distribution-observing aggregator against
/// `sigma(k)`: 1/4 on every confusable event, 0 on the two tails.
pub fn bayesian_floor(k: usize) -> f64 {
    let spec = ChainSpec::new(k);
    0.25 * (1.0 - spec.alpha(1) * (1.0 - spec.mu(1)) - spec.mu(k) * spec.alpha(k))
}

/// The same floor computed by generic pooling over the `2k` events
/// `(member, state)`, keyed by the observed forecast distribution.
///
/// Independent of the closed form: it only uses the confusability pairing
/// and the conditional-variance identity.
pub fn bayesian_floor_by_pooling(k: usize) -> f64 {
    let spec = ChainSpec::new(k);
    let mut items: Vec<(usize, f64, f64)> = Vec::with_capacity(2 * k);
    for m in 1..=k {
        // state 1 of member m shares its forecast distribution with state 0
        // of member m+1; label both with m. Tails get unique labels.
        items.push((m, spec.alpha(m) * spec.mu(m), 1.0));
        items.push((m - 1, spec.alpha(m) * (1.0 - spec.mu(m)), 0.0));
    }
    pooled_conditional_variance(items)
}

/// Expected fraction of experts announcing the high forecast under member
/// `m` of the chain, conditional on the state.
pub fn expected_high_fraction(spec: &ChainSpec, m: usize, omega: u8) -> f64 {
    spec.high_fraction(m, omega)
}

/// Gap between the state-1 and state-0 expected high fractions of member
/// `m`; at least `1/(6k)` everywhere on the chain.
pub fn fraction_gap(spec: &ChainSpec, m: usize) -> f64 {
    spec.high_fraction(m, 1) - spec.high_fraction(m, 0)
}

/// The same gap as a function of a free high-signal probability `y`;
/// monotonically decreasing on `[1/2, 1]`.
pub fn fraction_gap_at(k: usize, y: f64) -> f64 {
    let kf = k as f64;
    let (lo, hi) = (0.5 - 1.0 / (4.0 * kf), 0.5 + 1.0 / (4.0 * kf));
    hi * y / (hi * y + lo * (1.0 - y)) - lo * y / (lo * y + hi * (1.0 - y))
}

/// The 0/1 counting scheme for one chain member: forecast 1 when the
/// fraction of high forecasts is at least the midpoint of the two expected
/// fractions (ties go to state 1), else 0.
#[derive(Debug, Clone, Copy)]
pub struct CountingScheme {
    n: usize,
    low_forecast: f64,
    high_forecast: f64,
    midpoint: f64,
}

impl CountingScheme {
    pub fn new(spec: &ChainSpec, m: usize, n: usize) -> Self {
        CountingScheme {
            n,
            low_forecast: spec.low_forecast(),
            high_forecast: spec.high_forecast(),
            midpoint: 0.5 * (spec.high_fraction(m, 1) + spec.high_fraction(m, 0)),
        }
    }

    pub fn classify(&self, q: f64) -> f64 {
        if q >= self.midpoint {
            1.0
        } else {
            0.0
        }
    }

    pub fn count(&self, forecasts: &[f64]) -> ForecastCountStat {
        let split = 0.5 * (self.low_forecast + self.high_forecast);
        let count_high = forecasts.iter().filter(|&&x| x > split).count();
        ForecastCountStat { n: forecasts.len(), count_high }
    }
}

impl Aggregator for CountingScheme {
    fn arity(&self) -> Option<usize> {
        Some(self.n)
    }

    fn aggregate(&self, forecasts: &[f64]) -> Result<f64, SchemeError> {
        Ok(self.classify(self.count(forecasts).q()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CountingErrorReport {
    pub k: usize,
    pub m: usize,
    pub n_experts: usize,
    pub trials: u64,
    pub errors: u64,
    pub rate: f64,
    pub standard_error: f64,
    /// `exp(-n / (72 k^2))`
    pub hoeffding_bound: f64,
    pub seed: u64,
}

/// Simulates the counting scheme on member `m`: draw the state from the
/// member's prior, then `n` i.i.d. signals, count the high forecasts and
/// classify. One RNG substream per trial.
pub fn counting_scheme_error(
    k: usize,
    m: usize,
    n_experts: usize,
    trials: u64,
    seed: u64,
) -> CountingErrorReport {
    assert!(trials >= 1 && n_experts >= 1);
    let spec = ChainSpec::new(k);
    let scheme = CountingScheme::new(&spec, m, n_experts);
    let mu = spec.mu(m);
    let p_high = [spec.high_fraction(m, 0), spec.high_fraction(m, 1)];
    let mut errors = 0u64;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t);
        let omega = usize::from(rng.gen::<f64>() < mu);
        let p = p_high[omega];
        let mut count_high = 0usize;
        for _ in 0..n_experts {
            if rng.gen::<f64>() < p {
                count_high += 1;
            }
        }
        let q = count_high as f64 / n_experts as f64;
        if scheme.classify(q) != omega as f64 {
            errors += 1;
        }
    }
    let rate = errors as f64 / trials as f64;
    let standard_error = (rate * (1.0 - rate) / trials as f64).sqrt();
    CountingErrorReport {
        k,
        m,
        n_experts,
        trials,
        errors,
        rate,
        standard_error,
        hoeffding_bound: hoeffding_bound(k, n_experts),
        seed,
    }
}

/// `exp(-n / (72 k^2))`: the mistake-probability bound of the counting
/// scheme, from a one-sided Hoeffding bound at deviation `1/(12k)`.
pub fn hoeffding_bound(k: usize, n_experts: usize) -> f64 {
    (-(n_experts as f64) / (72.0 * (k as f64) * (k as f64))).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct RegretCurveRow {
    pub n_experts: u64,
    pub k: usize,
    /// Exact loss floor of the distribution-observing aggregator.
    pub floor: f64,
    pub hoeffding_bound: f64,
    /// `floor - hoeffding_bound`: no scheme's regret is below this.
    pub implied_floor: f64,
    /// `1/4 - 3 sqrt(ln n / n)`.
    pub asymptotic_floor: f64,
    /// `k` rounded to 1: the chain is a single structure and implies nothing.
    pub degenerate: bool,
    pub chain_ok: bool,
}

/// For each `n`, picks `k = round(sqrt(n / (72 ln n)))` (floor 1) and
/// reports the implied finite-`n` regret floor next to the asymptotic one.
pub fn regret_curve(n_values: &[u64]) -> Vec<RegretCurveRow> {
    n_values
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let k = (nf / (72.0 * nf.ln())).sqrt().round().max(1.0) as usize;
            let floor = bayesian_floor(k);
            let bound = hoeffding_bound(k, n as usize);
            let implied_floor = floor - bound;
            let asymptotic_floor = 0.25 - 3.0 * (nf.ln() / nf).sqrt();
            let degenerate = k < 2;
            RegretCurveRow {
                n_experts: n,
                k,
                floor,
                hoeffding_bound: bound,
                implied_floor,
                asymptotic_floor,
                degenerate,
                chain_ok: !degenerate && implied_floor >= asymptotic_floor - 1e-12,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{monte_carlo_loss, CiMixture};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (diff {:.3e})", (a - b).abs());
    }

    #[test]
    fn floor_is_zero_for_a_single_member() {
        assert_close(bayesian_floor(1), 0.0, 1e-15);
    }

    #[test]
    fn floor_beats_the_stated_bound() {
        for k in 2..=200 {
            let floor = bayesian_floor(k);
            let bound = 0.25 - 1.0 / (3.0 * k as f64);
            assert!(floor >= bound, "floor {floor} below bound {bound} at k={k}");
        }
    }

    #[test]
    fn floor_matches_pooling_oracle() {
        for k in [1, 2, 3, 7, 20] {
            assert_close(bayesian_floor_by_pooling(k), bayesian_floor(k), 1e-12);
        }
    }

    #[test]
    fn tail_mass_matches_the_bounding_chain() {
        for k in 2..=200 {
            let spec = ChainSpec::new(k);
            let kf = k as f64;
            let head = spec.alpha(1) * (1.0 - spec.mu(1));
            let tail = spec.mu(k) * spec.alpha(k);
            assert!(head <= 1.0 / (2.0 * kf) + 1e-12);
            assert!(head + tail <= (1.0 + 1.53) / (2.0 * kf) + 1e-12);
        }
    }

    #[test]
    fn fraction_gap_examples() {
        for k in 1..=50 {
            let spec = ChainSpec::new(k);
            for m in 1..=k {
                assert!(
                    fraction_gap(&spec, m) >= 1.0 / (6.0 * k as f64),
                    "gap too small at k={k}, m={m}"
                );
            }
        }
        // closed form at y = 1/2: the gap is exactly 1/(2k)
        for k in [1usize, 3, 10] {
            assert_close(fraction_gap_at(k, 0.5), 1.0 / (2.0 * k as f64), 1e-12);
            let spec = ChainSpec::new(k);
            assert_close(fraction_gap(&spec, 1), fraction_gap_at(k, 0.5), 1e-12);
        }
    }

    #[test]
    fn fraction_gap_is_decreasing_in_y() {
        let k = 5;
        let mut prev = fraction_gap_at(k, 0.5);
        for i in 1..=100 {
            let y = 0.5 + 0.5 * i as f64 / 100.0;
            let cur = fraction_gap_at(k, y);
            assert!(cur < prev, "gap not decreasing at y={y}");
            prev = cur;
        }
    }

    #[test]
    fn counting_scheme_ties_go_to_state_one() {
        let spec = ChainSpec::new(3);
        let scheme = CountingScheme::new(&spec, 1, 4);
        assert_eq!(scheme.classify(scheme.midpoint), 1.0);
        assert_eq!(scheme.classify(scheme.midpoint - 1e-9), 0.0);
    }

    #[test]
    fn counting_scheme_counts_high_forecasts() {
        let spec = ChainSpec::new(3);
        let scheme = CountingScheme::new(&spec, 2, 4);
        let (lo, hi) = (spec.low_forecast(), spec.high_forecast());
        let stat = scheme.count(&[lo, hi, hi, lo]);
        assert_eq!(stat.count_high, 2);
        assert_close(stat.q(), 0.5, 1e-15);
    }

    #[test]
    fn counting_error_is_within_the_hoeffding_bound() {
        let report = counting_scheme_error(3, 2, 2000, 2000, 11);
        assert!(
            report.rate <= report.hoeffding_bound + 3.0 * report.standard_error,
            "rate {} vs bound {}",
            report.rate,
            report.hoeffding_bound
        );
    }

    #[test]
    fn counting_error_is_reproducible() {
        let a = counting_scheme_error(3, 1, 500, 1000, 5);
        let b = counting_scheme_error(3, 1, 500, 1000, 5);
        assert_eq!(a.errors, b.errors);
    }

    #[test]
    fn hoeffding_sweep() {
        // every chain member at every scale stays within the bound
        for k in [2usize, 3, 5] {
            for n in [1_000usize, 10_000] {
                for m in 1..=k {
                    let r = counting_scheme_error(k, m, n, 10_000, 31);
                    assert!(
                        r.rate <= r.hoeffding_bound + 3.0 * r.standard_error,
                        "rate {} above bound {} at k={k}, m={m}, n={n}",
                        r.rate,
                        r.hoeffding_bound
                    );
                }
            }
        }
    }

    #[test]
    fn vacuous_bound_at_one_expert() {
        let report = counting_scheme_error(3, 2, 1, 2000, 17);
        assert!(report.hoeffding_bound > 0.99);
        assert!(report.rate <= report.hoeffding_bound + 3.0 * report.standard_error);
    }

    #[test]
    fn counting_scheme_loss_through_the_monte_carlo_engine() {
        // as an Aggregator, its mean square loss is its mistake rate
        let k = 3;
        let m = 2;
        let n = 600;
        let spec = ChainSpec::new(k);
        let scheme = CountingScheme::new(&spec, m, n);
        let mix = CiMixture::from(spec.structure(m, n).unwrap());
        let est = monte_carlo_loss(&mix, &scheme, 3000, 23).unwrap();
        assert!(est.scheme_loss <= hoeffding_bound(k, n) + 3.0 * est.scheme_se + 1e-9);
    }

    #[test]
    fn regret_curve_shape() {
        let rows = regret_curve(&[1_000, 10_000, 100_000, 1_000_000]);
        assert_eq!(rows[0].k, 1);
        assert!(rows[0].degenerate);
        assert_eq!(rows[2].k, 11);
        assert!(rows[2].implied_floor >= 0.2197);
        for pair in rows.windows(2) {
            assert!(pair[1].implied_floor > pair[0].implied_floor, "curve not increasing");
        }
        for row in &rows[1..] {
            assert!(row.chain_ok, "chain inequality failed at n={}", row.n_experts);
        }
    }

    #[test]
    #[ignore = "heavy corroboration run; the exact floor plus Blackwell domination covers it"]
    fn sampled_aggregator_cannot_beat_the_floor() {
        // a Bayes-posterior aggregator that sees only the sampled high count
        // must lose at least the distribution-observing floor
        let k = 3;
        let n = 200usize;
        let trials = 20_000u64;
        let spec = ChainSpec::new(k);
        let ln_binom: Vec<f64> = {
            // ln C(n, c) via ln-factorial recurrence
            let mut ln_fact = vec![0.0f64; n + 1];
            for i in 1..=n {
                ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
            }
            (0..=n).map(|c| ln_fact[n] - ln_fact[c] - ln_fact[n - c]).collect()
        };
        let posterior_given_count = |c: usize| -> f64 {
            let mut num = 0.0;
            let mut den = 0.0;
            for m in 1..=k {
                for omega in 0..2u8 {
                    let p = spec.high_fraction(m, omega);
                    let w_state = if omega == 1 { spec.mu(m) } else { 1.0 - spec.mu(m) };
                    let ll = ln_binom[c] + c as f64 * p.ln() + (n - c) as f64 * (1.0 - p).ln();
                    let w = spec.alpha(m) * w_state * ll.exp();
                    den += w;
                    if omega == 1 {
                        num += w;
                    }
                }
            }
            num / den
        };
        let mut loss = 0.0;
        let mut loss_sq = 0.0;
        for t in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(97);
            rng.set_stream(t);
            let u: f64 = rng.gen();
            let mut m = k;
            let mut acc = 0.0;
            for j in 1..=k {
                acc += spec.alpha(j);
                if u < acc {
                    m = j;
                    break;
                }
            }
            let omega = usize::from(rng.gen::<f64>() < spec.mu(m));
            let p = spec.high_fraction(m, omega as u8);
            let mut c = 0usize;
            for _ in 0..n {
                if rng.gen::<f64>() < p {
                    c += 1;
                }
            }
            let forecast = posterior_given_count(c);
            let sample = (forecast - omega as f64) * (forecast - omega as f64);
            loss += sample;
            loss_sq += sample * sample;
        }
        let mean = loss / trials as f64;
        let var = (loss_sq / trials as f64 - mean * mean).max(0.0);
        let se = (var / trials as f64).sqrt();
        assert!(
            mean >= bayesian_floor(k) - 5.0 * se,
            "sampled aggregator beat the floor: {mean} < {}",
            bayesian_floor(k)
        );
    }
}
