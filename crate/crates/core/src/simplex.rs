//! Minimal Nelder-Mead simplex minimizer used to polish grid optima.
//!
//! Deterministic: no randomness, fixed initial simplex. Callers handle
//! domain constraints inside the objective (clamping the parameters).

pub struct SimplexOptions {
    pub max_iters: usize,
    pub initial_step: f64,
    pub f_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_iters: 600, initial_step: 0.02, f_tol: 1e-13 }
    }
}

/// Minimizes `f` from `x0`, returning the best point and value found.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    opts: &SimplexOptions,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    assert!(n >= 1);
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    for _ in 0..opts.max_iters {
        // order the simplex, best first
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        if (values[n] - values[0]).abs() < opts.f_tol {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|v| v[d]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> =
            (0..n).map(|d| centroid[d] + alpha * (centroid[d] - simplex[n][d])).collect();
        let f_reflect = f(&reflect);

        if f_reflect < values[0] {
            let expand: Vec<f64> =
                (0..n).map(|d| centroid[d] + gamma * (reflect[d] - centroid[d])).collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[n] = expand;
                values[n] = f_expand;
            } else {
                simplex[n] = reflect;
                values[n] = f_reflect;
            }
        } else if f_reflect < values[n - 1] {
            simplex[n] = reflect;
            values[n] = f_reflect;
        } else {
            let contract: Vec<f64> =
                (0..n).map(|d| centroid[d] + rho * (simplex[n][d] - centroid[d])).collect();
            let f_contract = f(&contract);
            if f_contract < values[n] {
                simplex[n] = contract;
                values[n] = f_contract;
            } else {
                let anchor = simplex[0].clone();
                for v in simplex.iter_mut().skip(1) {
                    for d in 0..n {
                        v[d] = anchor[d] + sigma * (v[d] - anchor[d]);
                    }
                }
                // recompute after shrink
                for i in 1..=n {
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best].clone(), values[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.7).powi(2);
        let (x, v) = nelder_mead(f, &[0.0, 0.0], &SimplexOptions::default());
        assert!(v < 1e-12);
        assert!((x[0] - 0.3).abs() < 1e-6 && (x[1] + 0.7).abs() < 1e-6);
    }

    #[test]
    fn is_deterministic() {
        let f = |x: &[f64]| (x[0] * x[0] - x[1]).powi(2) + (1.0 - x[0]).powi(2);
        let a = nelder_mead(f, &[-1.2, 1.0], &SimplexOptions::default());
        let b = nelder_mead(f, &[-1.2, 1.0], &SimplexOptions::default());
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
