//! Small-rational recognition for display: the exact constructions (xor,
//! fig1, the coarse chain tables) produce losses that are simple fractions,
//! so print them as such next to the float.

/// Returns `p/q` with `q <= 10_000` when `x` is within `1e-12` of that
/// fraction, via continued-fraction convergents.
///
/// The cap keeps ordinary convergents of irrational values out: a convergent
/// lands within `1e-12` only when the next denominator exceeds `1e8`, which
/// does not happen by accident at this scale.
pub fn as_fraction(x: f64) -> Option<String> {
    if !x.is_finite() {
        return None;
    }
    let negative = x < 0.0;
    let target = x.abs();
    let (mut h0, mut h1) = (0i64, 1i64); // numerators
    let (mut k0, mut k1) = (1i64, 0i64); // denominators
    let mut frac = target;
    for _ in 0..40 {
        let a = frac.floor();
        if a > i64::MAX as f64 / 2.0 {
            break;
        }
        let a_int = a as i64;
        let h2 = a_int.checked_mul(h1).and_then(|v| v.checked_add(h0))?;
        let k2 = a_int.checked_mul(k1).and_then(|v| v.checked_add(k0))?;
        if k2 > 10_000 {
            break;
        }
        (h0, h1) = (h1, h2);
        (k0, k1) = (k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - target).abs() <= 1e-12 * target.max(1.0) {
            let sign = if negative { "-" } else { "" };
            return Some(if k1 == 1 {
                format!("{sign}{h1}")
            } else {
                format!("{sign}{h1}/{k1}")
            });
        }
        let rem = frac - a;
        if rem.abs() < 1e-15 {
            break;
        }
        frac = 1.0 / rem;
    }
    None
}
