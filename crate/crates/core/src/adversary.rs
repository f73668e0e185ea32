//! The adversary's best reply to a fixed aggregation scheme.
//!
//! Two closed-form families are optimized:
//!
//! * Blackwell-ordered experts reduce to extreme martingales `(x, y, z)`
//!   with `x <= y <= z`; the worst case over the family bounds the regret of
//!   any anonymous scheme on the whole class.
//! * Conditionally independent experts reduce to a prior plus one two-point
//!   posterior distribution per expert, a five-parameter problem
//!   `(mu, y1 <= mu <= z1, y2 <= mu <= z2)`.
//!
//! Both optimizers run a dense constraint-respecting grid followed by
//! simplex refinement from the best grid cells; the orderings are enforced
//! by reparameterization, not penalties, because optima sit on the
//! constraint boundaries. Every reported optimum is re-validated by
//! realizing the argmax as an information structure and re-evaluating the
//! loss by enumeration.

use crate::loss::{relative_loss, LossError};
use crate::model::{
    ci_from_posteriors, ExtremeMartingale, ExtremePosteriorDist, ModelError,
};
use crate::schemes::{shifted_dummy_prior, AggregationScheme, Aggregator, SchemeError};
use crate::simplex::{nelder_mead, SimplexOptions};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptError {
    #[error("martingale support must satisfy x <= y <= z (got {x}, {y}, {z})")]
    OrderViolation { x: f64, y: f64, z: f64 },
    #[error("scheme is not anonymous: f({a}, {b}) != f({b}, {a})")]
    NonAnonymousScheme { a: f64, b: f64 },
    #[error("prior must be interior to (0,1)")]
    DegeneratePrior,
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Worst case found by an optimizer, with the independent re-evaluation of
/// the argmax through structure realization and exact enumeration.
#[derive(Debug, Clone, Serialize)]
pub struct OptResult {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub restarts_used: usize,
    /// Maxima per 0.4-split region of the extreme-martingale problem, when
    /// applicable.
    pub region_maxima: Option<Vec<RegionMax>>,
    /// The argmax re-evaluated via `relative_loss` on the realized
    /// structure; must agree with `value` to about 1e-7.
    pub cross_check: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionMax {
    pub region: &'static str,
    pub value: f64,
    pub argmax: Vec<f64>,
}

/// Expected squared gap to the more-informed expert on the extreme
/// martingale `(x, y, z)`:
/// `(z-y)/(z-x) (f(y,x) - x)^2 + (y-x)/(z-x) (f(y,z) - z)^2`.
///
/// Zero-probability branches are not evaluated, so schemes that reject the
/// contradictory pair `{0,1}` are safe on the whole domain.
pub fn loss_on_extreme_martingale<A: Aggregator + ?Sized>(
    x: f64,
    y: f64,
    z: f64,
    scheme: &A,
) -> Result<f64, OptError> {
    if !(0.0 <= x && x <= y && y <= z && z <= 1.0) {
        return Err(OptError::OrderViolation { x, y, z });
    }
    if z - x <= 1e-14 {
        let f = scheme.aggregate(&[y, y])?;
        return Ok((f - y) * (f - y));
    }
    let w_low = (z - y) / (z - x);
    let w_high = (y - x) / (z - x);
    let mut total = 0.0;
    if w_low > 0.0 {
        let f = scheme.aggregate(&[y, x])?;
        total += w_low * (f - x) * (f - x);
    }
    if w_high > 0.0 {
        let f = scheme.aggregate(&[y, z])?;
        total += w_high * (f - z) * (f - z);
    }
    Ok(total)
}

pub struct BlackwellOptions {
    /// Grid step is `1/grid` per coordinate.
    pub grid: usize,
    /// Number of top grid cells refined by simplex descent.
    pub refine_starts: usize,
    pub nm_iters: usize,
    /// Simplex convergence tolerance on the objective spread.
    pub nm_f_tol: f64,
}

impl Default for BlackwellOptions {
    fn default() -> Self {
        BlackwellOptions { grid: 400, refine_starts: 32, nm_iters: 600, nm_f_tol: 1e-13 }
    }
}

const REGION_NAMES: [&str; 4] = [
    "both-far",          // |x-y| >= 0.4 and |z-y| >= 0.4
    "low-near-high-far", // |x-y| <= 0.4 and |z-y| >= 0.4
    "low-far-high-near", // |x-y| >= 0.4 and |z-y| <= 0.4
    "both-near",         // |x-y| <= 0.4 and |z-y| <= 0.4
];

fn region_memberships(x: f64, y: f64, z: f64) -> [bool; 4] {
    let dxy_far = y - x >= 0.4;
    let dxy_near = y - x <= 0.4;
    let dzy_far = z - y >= 0.4;
    let dzy_near = z - y <= 0.4;
    [dxy_far && dzy_far, dxy_near && dzy_far, dxy_far && dzy_near, dxy_near && dzy_near]
}

// Deterministic interior probe pairs; irrational offsets keep them off the
// minimal-entropy tie line |a - 1/2| = |b - 1/2|.
fn anonymity_probes() -> Vec<(f64, f64)> {
    (1..=24)
        .map(|t| {
            let a = (t as f64 * 0.618_033_988_749_894_9).fract();
            let b = (t as f64 * 0.414_213_562_373_095_1).fract();
            (a.clamp(0.01, 0.99), b.clamp(0.01, 0.99))
        })
        .collect()
}

fn check_anonymous<A: Aggregator + ?Sized>(scheme: &A) -> Result<(), OptError> {
    for (a, b) in anonymity_probes() {
        let ab = scheme.aggregate(&[a, b])?;
        let ba = scheme.aggregate(&[b, a])?;
        if (ab - ba).abs() > 1e-12 {
            return Err(OptError::NonAnonymousScheme { a, b });
        }
    }
    Ok(())
}

/// Bounded-size set of the best seeds, deduplicated on a coarse lattice so
/// refinement starts are diverse. Ordering is deterministic.
struct TopSeeds<const D: usize> {
    items: Vec<(f64, [f64; D])>,
    cap: usize,
}

impl<const D: usize> TopSeeds<D> {
    fn new(cap: usize) -> Self {
        TopSeeds { items: Vec::with_capacity(4 * cap + 1), cap }
    }

    fn offer(&mut self, value: f64, point: [f64; D]) {
        if self.items.len() >= 4 * self.cap {
            if let Some(&(min_v, _)) = self.items.last() {
                if value <= min_v {
                    return;
                }
            }
        }
        self.items.push((value, point));
        self.items.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.partial_cmp(&b.1).unwrap()));
        self.items.truncate(4 * self.cap);
    }

    fn take_distinct(self) -> Vec<(f64, [f64; D])> {
        let mut out: Vec<(f64, [f64; D])> = Vec::with_capacity(self.cap);
        'outer: for (v, p) in self.items {
            for (_, q) in &out {
                let close = p.iter().zip(q.iter()).all(|(a, b)| (a - b).abs() < 0.04);
                if close {
                    continue 'outer;
                }
            }
            out.push((v, p));
            if out.len() == self.cap {
                break;
            }
        }
        out
    }
}

/// Maximizes [`loss_on_extreme_martingale`] over `x <= y <= z`, reporting
/// per-region maxima for the four 0.4-split regions and the global maximum.
///
/// Requires an anonymous scheme: the reduction from two-sided mixtures to a
/// single martingale relies on forecast order not mattering.
pub fn optimize_blackwell<A: Aggregator + ?Sized>(
    scheme: &A,
    opts: &BlackwellOptions,
) -> Result<OptResult, OptError> {
    check_anonymous(scheme)?;
    let g = opts.grid;
    let step = 1.0 / g as f64;
    let mut seeds = TopSeeds::<3>::new(opts.refine_starts.max(1));
    let mut regions: Vec<(f64, [f64; 3])> = vec![(f64::NEG_INFINITY, [0.0; 3]); 4];
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for i in 0..=g {
        let x = i as f64 * step;
        for j in i..=g {
            let y = j as f64 * step;
            for k in j..=g {
                let z = k as f64 * step;
                let v = loss_on_extreme_martingale(x, y, z, scheme)?;
                if v > best.0 {
                    best = (v, [x, y, z]);
                }
                seeds.offer(v, [x, y, z]);
                for (r, hit) in region_memberships(x, y, z).iter().enumerate() {
                    if *hit && v > regions[r].0 {
                        regions[r] = (v, [x, y, z]);
                    }
                }
            }
        }
    }

    // simplex refinement in an order-free parameterization:
    // y free in [0,1], x = a*y, z = y + c*(1-y)
    let objective = |p: &[f64]| -> f64 {
        let y = p[1].clamp(0.0, 1.0);
        let x = p[0].clamp(0.0, 1.0) * y;
        let z = y + p[2].clamp(0.0, 1.0) * (1.0 - y);
        match loss_on_extreme_martingale(x, y, z, scheme) {
            Ok(v) => -v,
            Err(_) => f64::INFINITY,
        }
    };
    let starts = seeds.take_distinct();
    let restarts_used = starts.len();
    let nm_opts = SimplexOptions { max_iters: opts.nm_iters, f_tol: opts.nm_f_tol, ..Default::default() };
    for (_, [x, y, z]) in starts {
        let p0 = [
            if y > 1e-12 { x / y } else { 0.0 },
            y,
            if y < 1.0 - 1e-12 { (z - y) / (1.0 - y) } else { 0.0 },
        ];
        let (p, neg_v) = nelder_mead(objective, &p0, &nm_opts);
        let v = -neg_v;
        if v > best.0 {
            let y = p[1].clamp(0.0, 1.0);
            let x = p[0].clamp(0.0, 1.0) * y;
            let z = y + p[2].clamp(0.0, 1.0) * (1.0 - y);
            best = (v, [x, y, z]);
        }
    }
    let [x, y, z] = best.1;
    for (r, hit) in region_memberships(x, y, z).iter().enumerate() {
        if *hit && best.0 > regions[r].0 {
            regions[r] = (best.0, best.1);
        }
    }

    let realized = ExtremeMartingale::new(x, y, z)?.to_martingale().realize();
    let cross_check = relative_loss(&realized, scheme)?.relative_loss;
    Ok(OptResult {
        value: best.0,
        argmax: best.1.to_vec(),
        restarts_used,
        region_maxima: Some(
            regions
                .iter()
                .enumerate()
                .filter(|(_, (v, _))| v.is_finite())
                .map(|(r, (v, p))| RegionMax {
                    region: REGION_NAMES[r],
                    value: *v,
                    argmax: p.to_vec(),
                })
                .collect(),
        ),
        cross_check,
    })
}

/// How the dummy prior fed to Bayes aggregation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DummyPrior {
    /// Mean of the two forecasts.
    Average,
    /// `0.49 x1 + 0.49 x2 (+ 0.02 above the diagonal)`.
    Shifted,
    /// The true prior: a cheating baseline with zero loss everywhere.
    TruePrior,
}

impl DummyPrior {
    pub fn dummy(self, x1: f64, x2: f64, true_mu: f64) -> f64 {
        match self {
            DummyPrior::Average => 0.5 * (x1 + x2),
            DummyPrior::Shifted => shifted_dummy_prior(x1, x2).clamp(1e-12, 1.0 - 1e-12),
            DummyPrior::TruePrior => true_mu,
        }
    }

    /// The aggregation scheme this dummy prior induces, used for the
    /// independent cross-check of optimizer results.
    pub fn scheme(self, true_mu: f64) -> AggregationScheme {
        match self {
            DummyPrior::Average => AggregationScheme::AveragePrior,
            DummyPrior::Shifted => AggregationScheme::ShiftedPrior,
            DummyPrior::TruePrior => AggregationScheme::KnownPriorBayes(true_mu),
        }
    }
}

/// Two-expert Bayes posterior in ratio form; the caller never passes the
/// contradictory pair `{0, 1}`.
fn g2(mu: f64, a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    if a == 1.0 || b == 1.0 {
        return 1.0;
    }
    let num = (1.0 - mu) * a * b;
    num / (num + mu * (1.0 - a) * (1.0 - b))
}

fn psi(mu: f64, a: f64, b: f64) -> f64 {
    (1.0 - a) * (1.0 - b) / (1.0 - mu) + a * b / mu
}

/// Probability that the realized posterior pair is `(x1, x2)` when expert
/// `i`'s posterior takes value `x_i` with probability `p_i`:
/// `p1 p2 ((1-x1)(1-x2)/(1-mu) + x1 x2 / mu)`.
pub fn ci_pair_probability(
    p1: f64,
    p2: f64,
    mu: f64,
    x1: f64,
    x2: f64,
) -> Result<f64, OptError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(OptError::DegeneratePrior);
    }
    for (name, v) in [("p1", p1), ("p2", p2), ("x1", x1), ("x2", x2)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(OptError::Domain(format!("{name} = {v} outside [0,1]")));
        }
    }
    Ok(p1 * p2 * psi(mu, x1, x2))
}

/// Squared gap between the true posterior and the dummy-prior posterior at
/// the realized pair `(x1, x2)`.
pub fn ci_point_loss(mu: f64, x1: f64, x2: f64, dummy: DummyPrior) -> Result<f64, OptError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(OptError::DegeneratePrior);
    }
    if (x1 == 0.0 && x2 == 1.0) || (x1 == 1.0 && x2 == 0.0) {
        return Err(OptError::Scheme(SchemeError::Model(ModelError::ContradictoryCertainty)));
    }
    let truth = g2(mu, x1, x2);
    let guess = g2(dummy.dummy(x1, x2, mu), x1, x2);
    Ok((truth - guess) * (truth - guess))
}

fn two_point_support(mu: f64, y: f64, z: f64) -> [(f64, f64); 2] {
    if z - y <= 1e-14 {
        [(1.0, mu), (0.0, mu)]
    } else {
        [((z - mu) / (z - y), y), ((mu - y) / (z - y), z)]
    }
}

/// The five-parameter objective: expected squared posterior gap when each
/// expert's posterior distribution is the two-point extreme `(y_i, z_i)`
/// around the prior.
pub fn ci_objective(dummy: DummyPrior, mu: f64, y1: f64, z1: f64, y2: f64, z2: f64) -> f64 {
    let s1 = two_point_support(mu, y1, z1);
    let s2 = two_point_support(mu, y2, z2);
    let mut total = 0.0;
    for &(p, a) in &s1 {
        if p <= 0.0 {
            continue;
        }
        for &(q, b) in &s2 {
            if q <= 0.0 {
                continue;
            }
            let weight = p * q * psi(mu, a, b);
            if weight <= 0.0 {
                continue;
            }
            let truth = g2(mu, a, b);
            let guess = g2(dummy.dummy(a, b, mu), a, b);
            total += weight * (truth - guess) * (truth - guess);
        }
    }
    total
}

pub struct CiOptions {
    pub grid: usize,
    pub refine_starts: usize,
    pub nm_iters: usize,
    pub nm_f_tol: f64,
}

impl Default for CiOptions {
    fn default() -> Self {
        CiOptions { grid: 200, refine_starts: 16, nm_iters: 800, nm_f_tol: 1e-13 }
    }
}

/// Upper concave envelope of `(index, value)` points evaluated at `at`,
/// maximizing over chords; returns the value and the chord endpoints.
///
/// This is exactly the maximum over two-point distributions `(y1, z1)` on
/// the grid with mean `at`, by linearity of the objective in expert 1's
/// distribution.
fn envelope_at(values: &[f64], at: usize, hull: &mut Vec<usize>) -> (f64, usize, usize) {
    hull.clear();
    for a in 0..values.len() {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let p = hull[hull.len() - 1];
            // pop p when it lies on or below the chord o -> a
            let cross = (p - o) as f64 * (values[a] - values[o])
                - (values[p] - values[o]) * (a - o) as f64;
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(a);
    }
    let pos = hull.partition_point(|&v| v < at);
    if pos < hull.len() && hull[pos] == at {
        return (values[at], at, at);
    }
    let (l, r) = (hull[pos - 1], hull[pos]);
    let t = (at - l) as f64 / (r - l) as f64;
    (values[l] + t * (values[r] - values[l]), l, r)
}

/// Collapses a two-point support to the canonical point mass when one
/// support point carries no weight.
fn canonicalize_pair(mu: f64, y: f64, z: f64) -> (f64, f64) {
    let [(wy, _), (wz, _)] = two_point_support(mu, y, z);
    if wy < 1e-9 || wz < 1e-9 {
        (mu, mu)
    } else {
        (y, z)
    }
}

/// Maximizes [`ci_objective`] over `(mu, y1 <= mu <= z1, y2 <= mu <= z2)`.
///
/// The grid stage enumerates `mu` and expert 2's pair `(y2, z2)` at step
/// `1/grid` and, for each, maximizes over expert 1's pair exactly via the
/// concave envelope; simplex refinement then polishes the best cells in a
/// constraint-free parameterization. Point masses (`y_i = z_i = mu`) are on
/// the boundary of the parameterization and are canonicalized in the
/// reported argmax.
#[allow(clippy::needless_range_loop)]
pub fn optimize_ci(dummy: DummyPrior, opts: &CiOptions) -> Result<OptResult, OptError> {
    if dummy == DummyPrior::TruePrior {
        // the cheating baseline has zero objective everywhere; skip the scan
        let mu = 0.5;
        return finish_ci(dummy, (0.0, [mu, mu, mu, mu, mu]), 0, None);
    }
    let g = opts.grid;
    let step = 1.0 / g as f64;
    let mut seeds = TopSeeds::<5>::new(opts.refine_starts.max(1));
    let mut best = (f64::NEG_INFINITY, [0.0; 5]);

    // table[a][b] = psi * r at the pair (a, b), rebuilt per prior; the
    // dummy-prior forecast does not depend on the prior, so cache it
    let mut guess_tab = vec![vec![0.0; g + 1]; g + 1];
    for ia in 0..=g {
        let a = ia as f64 * step;
        for ib in ia..=g {
            let b = ib as f64 * step;
            let guess = if (a == 0.0 && b == 1.0) || (a == 1.0 && b == 0.0) {
                0.0 // contradictory pair: gated by psi = 0 below
            } else {
                g2(dummy.dummy(a, b, f64::NAN), a, b)
            };
            guess_tab[ia][ib] = guess;
            guess_tab[ib][ia] = guess;
        }
    }

    let mut table = vec![vec![0.0; g + 1]; g + 1];
    let mut gvec = vec![0.0; g + 1];
    let mut hull: Vec<usize> = Vec::with_capacity(g + 2);
    for im in 1..g {
        let mu = im as f64 * step;
        for ia in 0..=g {
            let a = ia as f64 * step;
            for ib in 0..=g {
                let b = ib as f64 * step;
                let w = psi(mu, a, b);
                if w <= 0.0 {
                    table[ia][ib] = 0.0;
                    continue;
                }
                let truth = g2(mu, a, b);
                let gap = truth - guess_tab[ia][ib];
                table[ia][ib] = w * gap * gap;
            }
        }
        for iy2 in 0..=im {
            for iz2 in im..=g {
                let (w_y2, w_z2) = if iz2 == iy2 {
                    (1.0, 0.0)
                } else {
                    let y2 = iy2 as f64 * step;
                    let z2 = iz2 as f64 * step;
                    ((z2 - mu) / (z2 - y2), (mu - y2) / (z2 - y2))
                };
                for (a, slot) in gvec.iter_mut().enumerate() {
                    *slot = w_y2 * table[a][iy2] + w_z2 * table[a][iz2];
                }
                let (v, l, r) = envelope_at(&gvec, im, &mut hull);
                let worth_keeping = seeds.items.len() < 4 * seeds.cap
                    || v > seeds.items.last().map_or(f64::NEG_INFINITY, |s| s.0);
                if v > best.0 || worth_keeping {
                    let point = [
                        mu,
                        l as f64 * step,
                        r as f64 * step,
                        iy2 as f64 * step,
                        iz2 as f64 * step,
                    ];
                    if v > best.0 {
                        best = (v, point);
                    }
                    seeds.offer(v, point);
                }
            }
        }
    }

    // refinement: mu free, y_i = t * mu, z_i = mu + t' * (1 - mu)
    let objective = |p: &[f64]| -> f64 {
        let mu = p[0].clamp(1e-6, 1.0 - 1e-6);
        let y1 = p[1].clamp(0.0, 1.0) * mu;
        let z1 = mu + p[2].clamp(0.0, 1.0) * (1.0 - mu);
        let y2 = p[3].clamp(0.0, 1.0) * mu;
        let z2 = mu + p[4].clamp(0.0, 1.0) * (1.0 - mu);
        -ci_objective(dummy, mu, y1, z1, y2, z2)
    };
    let starts = seeds.take_distinct();
    let restarts_used = starts.len();
    let nm_opts = SimplexOptions { max_iters: opts.nm_iters, f_tol: opts.nm_f_tol, ..Default::default() };
    for (_, [mu, y1, z1, y2, z2]) in starts {
        let enc = |y: f64, z: f64| {
            [
                if mu > 1e-12 { y / mu } else { 0.0 },
                if mu < 1.0 - 1e-12 { (z - mu) / (1.0 - mu) } else { 0.0 },
            ]
        };
        let [a1, c1] = enc(y1, z1);
        let [a2, c2] = enc(y2, z2);
        let (p, neg_v) = nelder_mead(objective, &[mu, a1, c1, a2, c2], &nm_opts);
        let v = -neg_v;
        if v > best.0 {
            let mu = p[0].clamp(1e-6, 1.0 - 1e-6);
            best = (
                v,
                [
                    mu,
                    p[1].clamp(0.0, 1.0) * mu,
                    mu + p[2].clamp(0.0, 1.0) * (1.0 - mu),
                    p[3].clamp(0.0, 1.0) * mu,
                    mu + p[4].clamp(0.0, 1.0) * (1.0 - mu),
                ],
            );
        }
    }
    finish_ci(dummy, best, restarts_used, None)
}

/// Relabeling the state maps `(mu, y, z)` to `(1-mu, 1-z, 1-y)` and leaves
/// the objective unchanged (up to the shifted scheme's tie diagonal), so
/// maxima come in mirror pairs; report the `mu <= 1/2` representative when
/// it attains the same value.
fn mirror_to_canonical(dummy: DummyPrior, value: f64, p: [f64; 5]) -> (f64, [f64; 5]) {
    let [mu, y1, z1, y2, z2] = p;
    if mu <= 0.5 {
        return (value, p);
    }
    let mirrored = [1.0 - mu, 1.0 - z1, 1.0 - y1, 1.0 - z2, 1.0 - y2];
    let v = ci_objective(dummy, mirrored[0], mirrored[1], mirrored[2], mirrored[3], mirrored[4]);
    if v >= value - 1e-12 {
        (value.max(v), mirrored)
    } else {
        (value, p)
    }
}

fn finish_ci(
    dummy: DummyPrior,
    best: (f64, [f64; 5]),
    restarts_used: usize,
    region_maxima: Option<Vec<RegionMax>>,
) -> Result<OptResult, OptError> {
    let (value, [mu, y1, z1, y2, z2]) = mirror_to_canonical(dummy, best.0, best.1);
    let (y1, z1) = canonicalize_pair(mu, y1, z1);
    let (y2, z2) = canonicalize_pair(mu, y2, z2);
    let d1 = ExtremePosteriorDist::new(mu, y1, z1)?;
    let d2 = ExtremePosteriorDist::new(mu, y2, z2)?;
    let ci = ci_from_posteriors(mu, &[d1.support(), d2.support()])?;
    let joint = ci.expand()?;
    let cross_check = relative_loss(&joint, &dummy.scheme(mu))?.relative_loss;
    Ok(OptResult {
        value,
        argmax: vec![mu, y1, z1, y2, z2],
        restarts_used,
        region_maxima,
        cross_check,
    })
}

/// The relative loss obtained against the best reply on the two-value
/// martingale `(x, y, alpha)` with `0 < y < x < 1`:
/// `2 (x-y)^2 AB / (A + B)` with `A = (1-alpha)(1-y)/(1-x)`, `B = alpha x/y`.
///
/// As a function of `alpha` this is the realized minimal loss up to a
/// positive factor depending only on `(x, y)`, so its stationary point is
/// the loss-maximizing branch weight `alpha_star`.
pub fn best_reply_loss(x: f64, y: f64, alpha: f64) -> Result<f64, OptError> {
    if !(y > 0.0 && y < x && x < 1.0) {
        return Err(OptError::Domain(format!("need 0 < y < x < 1, got x={x}, y={y}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(OptError::Domain(format!("need 0 < alpha < 1, got {alpha}")));
    }
    let a = (1.0 - alpha) * (1.0 - y) / (1.0 - x);
    let b = alpha * x / y;
    Ok(2.0 * (x - y) * (x - y) * a * b / (a + b))
}

pub struct IidOptions {
    /// Grid for the single-structure search over `(mu, y, z)`.
    pub grid: usize,
    /// Coarse grid for the two-atom mixture search.
    pub two_atom_grid: usize,
    pub refine_starts: usize,
    pub nm_iters: usize,
    pub nm_f_tol: f64,
}

impl Default for IidOptions {
    fn default() -> Self {
        IidOptions { grid: 200, two_atom_grid: 16, refine_starts: 12, nm_iters: 800, nm_f_tol: 1e-13 }
    }
}

/// Evidence report for the identical-experts search: the best single
/// two-point structure, the best two-atom identical mixture, and whether
/// either exceeds the Blackwell minimax value.
#[derive(Debug, Clone, Serialize)]
pub struct IidReport {
    pub point_best: OptResult,
    pub two_atom_best: OptResult,
    /// `(5 sqrt 5 - 11) / 8`, the value the identical family is conjectured
    /// not to exceed.
    pub threshold: f64,
    pub tolerance: f64,
    pub exceeds_threshold: bool,
}

/// Identical-experts objective for one shared two-point posterior
/// distribution.
pub fn iid_point_objective(dummy: DummyPrior, mu: f64, y: f64, z: f64) -> f64 {
    ci_objective(dummy, mu, y, z, y, z)
}

/// Identical-experts objective for a shared two-atom mixture of two-point
/// distributions; quadratic in the mixing weight.
pub fn iid_two_atom_objective(
    dummy: DummyPrior,
    mu: f64,
    y1: f64,
    z1: f64,
    y2: f64,
    z2: f64,
    gamma: f64,
) -> f64 {
    let s1 = two_point_support(mu, y1, z1);
    let s2 = two_point_support(mu, y2, z2);
    let mut support: Vec<(f64, f64)> = Vec::with_capacity(4);
    for &(p, v) in s1.iter() {
        support.push((gamma * p, v));
    }
    for &(p, v) in s2.iter() {
        support.push(((1.0 - gamma) * p, v));
    }
    let mut total = 0.0;
    for &(p, a) in &support {
        if p <= 0.0 {
            continue;
        }
        for &(q, b) in &support {
            if q <= 0.0 {
                continue;
            }
            let weight = p * q * psi(mu, a, b);
            if weight <= 0.0 {
                continue;
            }
            let truth = g2(mu, a, b);
            let guess = g2(dummy.dummy(a, b, mu), a, b);
            total += weight * (truth - guess) * (truth - guess);
        }
    }
    total
}

/// Searches the identical-experts family for losses above the Blackwell
/// minimax value. Reports evidence only: that the family caps at the
/// threshold is a conjecture, not a proven bound.
pub fn explore_iid(dummy: DummyPrior, opts: &IidOptions) -> Result<IidReport, OptError> {
    let threshold = (5.0 * 5.0_f64.sqrt() - 11.0) / 8.0;
    let tolerance = 5e-4;

    // single structure: (mu, y, z)
    let g = opts.grid;
    let step = 1.0 / g as f64;
    let mut seeds = TopSeeds::<3>::new(opts.refine_starts.max(1));
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for im in 1..g {
        let mu = im as f64 * step;
        for iy in 0..=im {
            let y = iy as f64 * step;
            for iz in im..=g {
                let z = iz as f64 * step;
                let v = iid_point_objective(dummy, mu, y, z);
                if v > best.0 {
                    best = (v, [mu, y, z]);
                }
                seeds.offer(v, [mu, y, z]);
            }
        }
    }
    let point_objective = |p: &[f64]| -> f64 {
        let mu = p[0].clamp(1e-6, 1.0 - 1e-6);
        let y = p[1].clamp(0.0, 1.0) * mu;
        let z = mu + p[2].clamp(0.0, 1.0) * (1.0 - mu);
        -iid_point_objective(dummy, mu, y, z)
    };
    let starts = seeds.take_distinct();
    let point_restarts = starts.len();
    let nm_opts = SimplexOptions { max_iters: opts.nm_iters, f_tol: opts.nm_f_tol, ..Default::default() };
    for (_, [mu, y, z]) in starts {
        let p0 = [
            mu,
            if mu > 1e-12 { y / mu } else { 0.0 },
            if mu < 1.0 - 1e-12 { (z - mu) / (1.0 - mu) } else { 0.0 },
        ];
        let (p, neg_v) = nelder_mead(point_objective, &p0, &nm_opts);
        let v = -neg_v;
        if v > best.0 {
            let mu = p[0].clamp(1e-6, 1.0 - 1e-6);
            best = (v, [mu, p[1].clamp(0.0, 1.0) * mu, mu + p[2].clamp(0.0, 1.0) * (1.0 - mu)]);
        }
    }
    let (mut best_v, [mut mu, mut y, mut z]) = best;
    if mu > 0.5 {
        let mirrored = [1.0 - mu, 1.0 - z, 1.0 - y];
        let v = iid_point_objective(dummy, mirrored[0], mirrored[1], mirrored[2]);
        if v >= best_v - 1e-12 {
            best_v = best_v.max(v);
            [mu, y, z] = mirrored;
        }
    }
    let best = (best_v, [mu, y, z]);
    let (y, z) = canonicalize_pair(mu, y, z);
    let d = ExtremePosteriorDist::new(mu, y, z)?;
    let ci = ci_from_posteriors(mu, &[d.support(), d.support()])?;
    let point_cross = relative_loss(&ci.expand()?, &dummy.scheme(mu))?.relative_loss;
    let point_best = OptResult {
        value: best.0,
        argmax: vec![mu, y, z],
        restarts_used: point_restarts,
        region_maxima: None,
        cross_check: point_cross,
    };

    // two-atom identical mixtures: (mu, y1, z1, y2, z2, gamma)
    let g2a = opts.two_atom_grid;
    let step2 = 1.0 / g2a as f64;
    let mut seeds2 = TopSeeds::<6>::new(opts.refine_starts.max(1));
    let mut best2 = (f64::NEG_INFINITY, [0.0; 6]);
    for im in 1..g2a {
        let mu = im as f64 * step2;
        for iy1 in 0..=im {
            for iz1 in im..=g2a {
                for iy2 in iy1..=im {
                    for iz2 in im..=g2a {
                        for ig in 1..=9 {
                            let gamma = 0.1 * ig as f64;
                            let point = [
                                mu,
                                iy1 as f64 * step2,
                                iz1 as f64 * step2,
                                iy2 as f64 * step2,
                                iz2 as f64 * step2,
                                gamma,
                            ];
                            let v = iid_two_atom_objective(
                                dummy, point[0], point[1], point[2], point[3], point[4], point[5],
                            );
                            if v > best2.0 {
                                best2 = (v, point);
                            }
                            seeds2.offer(v, point);
                        }
                    }
                }
            }
        }
    }
    let two_atom_objective = |p: &[f64]| -> f64 {
        let mu = p[0].clamp(1e-6, 1.0 - 1e-6);
        let y1 = p[1].clamp(0.0, 1.0) * mu;
        let z1 = mu + p[2].clamp(0.0, 1.0) * (1.0 - mu);
        let y2 = p[3].clamp(0.0, 1.0) * mu;
        let z2 = mu + p[4].clamp(0.0, 1.0) * (1.0 - mu);
        let gamma = p[5].clamp(0.0, 1.0);
        -iid_two_atom_objective(dummy, mu, y1, z1, y2, z2, gamma)
    };
    let starts2 = seeds2.take_distinct();
    let two_restarts = starts2.len();
    for (_, [mu, y1, z1, y2, z2, gamma]) in starts2 {
        let enc = |y: f64, z: f64| {
            [
                if mu > 1e-12 { y / mu } else { 0.0 },
                if mu < 1.0 - 1e-12 { (z - mu) / (1.0 - mu) } else { 0.0 },
            ]
        };
        let [a1, c1] = enc(y1, z1);
        let [a2, c2] = enc(y2, z2);
        let (p, neg_v) = nelder_mead(two_atom_objective, &[mu, a1, c1, a2, c2, gamma], &nm_opts);
        let v = -neg_v;
        if v > best2.0 {
            let mu = p[0].clamp(1e-6, 1.0 - 1e-6);
            best2 = (
                v,
                [
                    mu,
                    p[1].clamp(0.0, 1.0) * mu,
                    mu + p[2].clamp(0.0, 1.0) * (1.0 - mu),
                    p[3].clamp(0.0, 1.0) * mu,
                    mu + p[4].clamp(0.0, 1.0) * (1.0 - mu),
                    p[5].clamp(0.0, 1.0),
                ],
            );
        }
    }
    let [mu2, y1, z1, y2, z2, gamma] = best2.1;
    let (y1, z1) = canonicalize_pair(mu2, y1, z1);
    let (y2, z2) = canonicalize_pair(mu2, y2, z2);
    let s1 = ExtremePosteriorDist::new(mu2, y1, z1)?.support();
    let s2 = ExtremePosteriorDist::new(mu2, y2, z2)?.support();
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (p, v) in s1 {
        merged.push((gamma * p, v));
    }
    for (p, v) in s2 {
        merged.push(((1.0 - gamma) * p, v));
    }
    let ci2 = ci_from_posteriors(mu2, &[merged.clone(), merged])?;
    let two_cross = relative_loss(&ci2.expand()?, &dummy.scheme(mu2))?.relative_loss;
    let two_atom_best = OptResult {
        value: best2.0,
        argmax: vec![mu2, y1, z1, y2, z2, gamma],
        restarts_used: two_restarts,
        region_maxima: None,
        cross_check: two_cross,
    };

    let max_found = point_best.value.max(two_atom_best.value);
    Ok(IidReport {
        point_best,
        two_atom_best,
        threshold,
        tolerance,
        exceeds_threshold: max_found > threshold + tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::two_value_martingale;
    use crate::loss::{min_loss_against_mixture, MixedAdversary};
    use crate::schemes::{alpha_star, AggregationScheme};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (diff {:.3e})", (a - b).abs());
    }

    fn minimax() -> f64 {
        (5.0 * 5.0_f64.sqrt() - 11.0) / 8.0
    }

    fn x_star() -> f64 {
        (3.0 - 5.0_f64.sqrt()) / 4.0
    }

    #[test]
    fn extreme_martingale_loss_examples() {
        let v = loss_on_extreme_martingale(
            0.0,
            x_star(),
            1.0 - x_star(),
            &AggregationScheme::Precision,
        )
        .unwrap();
        assert_close(v, minimax(), 1e-12);
        for scheme in [AggregationScheme::Precision, AggregationScheme::DeGroot] {
            let v = loss_on_extreme_martingale(0.3, 0.3, 0.3, &scheme).unwrap();
            assert_close(v, 0.0, 1e-15);
        }
        let v = loss_on_extreme_martingale(0.2, 0.5, 0.8, &AggregationScheme::DeGroot).unwrap();
        assert_close(v, 0.0225, 1e-15);
        assert!(matches!(
            loss_on_extreme_martingale(0.5, 0.2, 0.8, &AggregationScheme::DeGroot),
            Err(OptError::OrderViolation { .. })
        ));
    }

    #[test]
    fn extreme_loss_cross_validates_against_enumeration() {
        for (x, y, z) in [(0.1, 0.3, 0.9), (0.0, 0.25, 0.7), (0.2, 0.6, 1.0), (0.4, 0.4, 0.9)] {
            for scheme in [
                AggregationScheme::Precision,
                AggregationScheme::DeGroot,
                AggregationScheme::Constant(0.5),
            ] {
                let closed = loss_on_extreme_martingale(x, y, z, &scheme).unwrap();
                let realized = ExtremeMartingale::new(x, y, z).unwrap().to_martingale().realize();
                let enumerated = relative_loss(&realized, &scheme).unwrap().relative_loss;
                assert_close(closed, enumerated, 1e-12);
            }
        }
    }

    #[test]
    fn blackwell_degroot_worst_case_is_one_sixteenth() {
        let opts = BlackwellOptions { grid: 100, refine_starts: 8, nm_iters: 400, nm_f_tol: 1e-13 };
        let res = optimize_blackwell(&AggregationScheme::DeGroot, &opts).unwrap();
        assert_close(res.value, 0.0625, 1e-6);
        assert_close(res.argmax[0], 0.0, 0.01);
        assert_close(res.argmax[1], 0.5, 0.01);
        assert_close(res.argmax[2], 1.0, 0.01);
        assert_close(res.cross_check, res.value, 1e-7);
    }

    #[test]
    fn blackwell_constant_half_worst_case_is_one_quarter() {
        let opts = BlackwellOptions { grid: 60, refine_starts: 8, nm_iters: 300, nm_f_tol: 1e-13 };
        let res = optimize_blackwell(&AggregationScheme::Constant(0.5), &opts).unwrap();
        assert_close(res.value, 0.25, 1e-9);
        assert_close(res.cross_check, res.value, 1e-7);
    }

    #[test]
    fn blackwell_precision_quick_scan() {
        // coarse here; the acceptance suite runs the default grid
        let opts = BlackwellOptions { grid: 120, refine_starts: 12, nm_iters: 500, nm_f_tol: 1e-13 };
        let res = optimize_blackwell(&AggregationScheme::Precision, &opts).unwrap();
        assert_close(res.value, minimax(), 1e-5);
        assert_close(res.cross_check, res.value, 1e-7);
        let regions = res.region_maxima.as_ref().unwrap();
        assert_eq!(regions.len(), 4);
        let global = regions.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
        assert_close(global, res.value, 1e-12);
    }

    #[test]
    fn monotone_sanity_constant_dominates_precision() {
        let opts = BlackwellOptions { grid: 60, refine_starts: 6, nm_iters: 200, nm_f_tol: 1e-13 };
        let c = optimize_blackwell(&AggregationScheme::Constant(0.5), &opts).unwrap();
        let p = optimize_blackwell(&AggregationScheme::Precision, &opts).unwrap();
        assert!(c.value >= p.value && p.value >= 0.0);
    }

    #[test]
    fn region_boundaries_are_shared() {
        // points on the |x-y| = 0.4 line belong to both adjacent regions, so
        // each region's running maximum dominates the boundary maximum
        let scheme = AggregationScheme::Precision;
        let opts = BlackwellOptions { grid: 50, refine_starts: 4, nm_iters: 200, nm_f_tol: 1e-13 };
        let res = optimize_blackwell(&scheme, &opts).unwrap();
        let regions = res.region_maxima.unwrap();
        let mut boundary_max = f64::NEG_INFINITY;
        let g = 50;
        for j in 20..=g {
            let y = j as f64 / g as f64;
            let x = y - 0.4;
            for k in j..=g {
                let z = k as f64 / g as f64;
                if z - y >= 0.4 {
                    boundary_max =
                        boundary_max.max(loss_on_extreme_martingale(x, y, z, &scheme).unwrap());
                }
            }
        }
        let k1 = regions.iter().find(|r| r.region == "both-far").unwrap();
        let k2 = regions.iter().find(|r| r.region == "low-near-high-far").unwrap();
        assert!(k1.value >= boundary_max - 1e-12);
        assert!(k2.value >= boundary_max - 1e-12);
    }

    #[test]
    fn non_anonymous_scheme_is_rejected() {
        struct FirstExpert;
        impl Aggregator for FirstExpert {
            fn arity(&self) -> Option<usize> {
                Some(2)
            }
            fn aggregate(&self, f: &[f64]) -> Result<f64, SchemeError> {
                Ok(f[0])
            }
        }
        let opts = BlackwellOptions { grid: 10, refine_starts: 2, nm_iters: 50, nm_f_tol: 1e-13 };
        assert!(matches!(
            optimize_blackwell(&FirstExpert, &opts),
            Err(OptError::NonAnonymousScheme { .. })
        ));
    }

    #[test]
    fn pair_probability_examples() {
        assert_close(ci_pair_probability(1.0, 1.0, 0.5, 0.5, 0.5).unwrap(), 1.0, 1e-15);
        assert_eq!(ci_pair_probability(0.0, 0.7, 0.5, 0.5, 0.5).unwrap(), 0.0);
        assert!(matches!(
            ci_pair_probability(0.5, 0.5, 1.0, 0.5, 0.5),
            Err(OptError::DegeneratePrior)
        ));
    }

    #[test]
    fn point_loss_examples() {
        // dummy prior equal to the truth: no loss
        assert_close(ci_point_loss(0.3, 0.3, 0.3, DummyPrior::Average).unwrap(), 0.0, 1e-15);
        assert_close(ci_point_loss(0.42, 0.1, 0.9, DummyPrior::TruePrior).unwrap(), 0.0, 1e-15);
        // the dominant cell of the average-prior worst case
        let w = 0.12 / 0.746;
        let contribution = w * ci_point_loss(0.12, 0.12, 0.746, DummyPrior::Average).unwrap();
        assert_close(contribution, 0.0260, 2e-4);
        assert!(ci_point_loss(0.12, 0.0, 1.0, DummyPrior::Average).is_err());
    }

    #[test]
    fn ci_objective_matches_enumerated_loss() {
        // hull-stage objective vs direct enumeration on a small grid
        let dummy = DummyPrior::Average;
        for &(mu, y1, z1, y2, z2) in
            &[(0.3, 0.1, 0.5, 0.0, 0.9), (0.5, 0.5, 0.5, 0.2, 0.8), (0.12, 0.12, 0.12, 0.0, 0.75)]
        {
            let v = ci_objective(dummy, mu, y1, z1, y2, z2);
            let d1 = ExtremePosteriorDist::new(mu, y1, z1).unwrap();
            let d2 = ExtremePosteriorDist::new(mu, y2, z2).unwrap();
            let ci = ci_from_posteriors(mu, &[d1.support(), d2.support()]).unwrap();
            let joint = ci.expand().unwrap();
            let enumerated =
                relative_loss(&joint, &AggregationScheme::AveragePrior).unwrap().relative_loss;
            assert_close(v, enumerated, 1e-12);
        }
    }

    #[test]
    fn optimize_ci_quick_scan_average() {
        let opts = CiOptions { grid: 60, refine_starts: 8, nm_iters: 500, nm_f_tol: 1e-13 };
        let res = optimize_ci(DummyPrior::Average, &opts).unwrap();
        assert_close(res.value, 0.0260, 5e-4);
        assert_close(res.cross_check, res.value, 1e-7);
    }

    #[test]
    fn optimize_ci_true_prior_is_zero() {
        let opts = CiOptions { grid: 40, refine_starts: 4, nm_iters: 100, nm_f_tol: 1e-13 };
        let res = optimize_ci(DummyPrior::TruePrior, &opts).unwrap();
        assert!(res.value <= 1e-12);
        assert!(res.cross_check <= 1e-12);
    }

    #[test]
    fn grid_stage_agrees_with_direct_enumeration_on_coarse_grid() {
        // the envelope trick must reproduce a brute-force scan exactly
        let dummy = DummyPrior::Average;
        let g = 14usize;
        let step = 1.0 / g as f64;
        let mut brute = f64::NEG_INFINITY;
        for im in 1..g {
            let mu = im as f64 * step;
            for iy1 in 0..=im {
                for iz1 in im..=g {
                    for iy2 in 0..=im {
                        for iz2 in im..=g {
                            let v = ci_objective(
                                dummy,
                                mu,
                                iy1 as f64 * step,
                                iz1 as f64 * step,
                                iy2 as f64 * step,
                                iz2 as f64 * step,
                            );
                            brute = brute.max(v);
                        }
                    }
                }
            }
        }
        let res = optimize_ci(dummy, &CiOptions { grid: g, refine_starts: 0, nm_iters: 0, nm_f_tol: 1e-13 })
            .unwrap();
        assert!(
            res.value >= brute - 1e-12,
            "grid stage missed the brute-force optimum: {} < {brute}",
            res.value
        );
    }

    #[test]
    fn best_reply_loss_limits() {
        let (x, y) = (0.7, 0.2);
        assert!(best_reply_loss(x, y, 1e-7).unwrap() < 1e-5);
        assert!(best_reply_loss(x, y, 1.0 - 1e-7).unwrap() < 1e-5);
        assert!(best_reply_loss(0.3000001, 0.3, 0.5).unwrap() < 1e-10);
        assert!(best_reply_loss(0.2, 0.7, 0.5).is_err());
        assert!(best_reply_loss(0.7, 0.2, 0.0).is_err());
    }

    #[test]
    fn best_reply_loss_is_stationary_at_alpha_star() {
        let h = 1e-4;
        for &(x, y) in &[(0.7, 0.2), (0.9, 0.5), (0.55, 0.1), (0.8, 0.75)] {
            let a = alpha_star(x, y).unwrap();
            let up = best_reply_loss(x, y, a + h).unwrap();
            let down = best_reply_loss(x, y, a - h).unwrap();
            let derivative = (up - down) / (2.0 * h);
            assert!(derivative.abs() < 1e-6, "derivative {derivative:.3e} at ({x}, {y})");
        }
    }

    #[test]
    fn best_reply_loss_is_proportional_to_the_realized_min_loss() {
        // the printed closed form is the realized minimal loss of the
        // role-symmetrized martingale, scaled by 2x(1-y)/(y(1-x))
        for &(x, y, alpha) in &[(0.8, 0.2, 0.5), (0.7, 0.3, 0.4), (0.6, 0.1, 0.7)] {
            let m = two_value_martingale(x, y, alpha).unwrap().realize();
            let adv = MixedAdversary::new(vec![(0.5, m.clone()), (0.5, m.swap_experts())]).unwrap();
            let realized = min_loss_against_mixture(&adv).unwrap();
            let factor = 2.0 * x * (1.0 - y) / (y * (1.0 - x));
            assert_close(best_reply_loss(x, y, alpha).unwrap(), realized * factor, 1e-10);
            // first-principles check of the realized value
            let w_x = (1.0 - alpha) * y / x;
            let w_y = alpha * (1.0 - x) / (1.0 - y);
            let direct = (x - y) * (x - y) * w_x * w_y / (w_x + w_y);
            assert_close(realized, direct, 1e-12);
        }
    }

    #[test]
    fn one_dimensional_family_peaks_at_x_star() {
        let f = |x: f64| x / (1.0 - x) * (0.5 - x) * (0.5 - x);
        let h = 1e-5;
        let derivative = (f(x_star() + h) - f(x_star() - h)) / (2.0 * h);
        assert!(derivative.abs() < 1e-6);
        assert_close(f(x_star()), minimax(), 1e-10);
    }

    #[test]
    fn explore_iid_finds_the_known_maximum() {
        let opts = IidOptions { grid: 80, two_atom_grid: 8, refine_starts: 8, nm_iters: 500, nm_f_tol: 1e-13 };
        let report = explore_iid(DummyPrior::Average, &opts).unwrap();
        assert_close(report.point_best.value, minimax(), 5e-4);
        assert_close(report.point_best.cross_check, report.point_best.value, 1e-7);
        assert!(!report.exceeds_threshold);
        assert!(report.two_atom_best.value <= report.threshold + report.tolerance);
        // the 1-parameter family (prior x, posteriors {0, 1/2}) is inside
        let v = iid_point_objective(DummyPrior::Average, x_star(), 0.0, 0.5);
        assert_close(v, minimax(), 1e-10);
    }

    #[test]
    fn explore_iid_true_prior_is_zero() {
        let opts = IidOptions { grid: 24, two_atom_grid: 5, refine_starts: 2, nm_iters: 60, nm_f_tol: 1e-13 };
        let report = explore_iid(DummyPrior::TruePrior, &opts).unwrap();
        assert!(report.point_best.value <= 1e-12);
        assert!(report.two_atom_best.value <= 1e-12);
    }
}
