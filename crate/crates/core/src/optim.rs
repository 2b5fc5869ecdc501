//! Nelder-Mead direct search, used for likelihood maximization on the
//! unconstrained parameterization and for the combination-weight smoothing
//! coefficients.

/// Options for one Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Relative tolerance on the simplex function-value spread.
    pub f_tolerance: f64,
    /// Absolute tolerance on the simplex coordinate spread.
    pub x_tolerance: f64,
    /// Relative initial step for building the simplex around the start.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            f_tolerance: 1e-8,
            x_tolerance: 1e-6,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration; non-increasing.
    pub trace: Vec<f64>,
}

/// Minimize `f` starting from `x0`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        let fx = f(x0);
        return NelderMeadResult {
            x: vec![],
            fx,
            iterations: 0,
            converged: true,
            trace: vec![fx],
        };
    }

    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    // initial simplex: x0 plus a perturbation along each axis
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = if v[i].abs() > 1e-8 {
            opts.initial_step * v[i].abs()
        } else {
            opts.initial_step
        };
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;

        // order the simplex by objective value
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        trace.push(values[best]);

        // convergence: function spread and simplex size
        let f_spread = (values[worst] - values[best]).abs();
        let f_scale = values[best].abs().max(values[worst].abs()).max(1.0);
        let x_spread = (0..n)
            .map(|i| {
                simplex
                    .iter()
                    .map(|v| v[i])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    })
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0f64, f64::max);
        if f_spread <= opts.f_tolerance * f_scale && x_spread <= opts.x_tolerance {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; n];
        for (idx, v) in simplex.iter().enumerate() {
            if idx == worst {
                continue;
            }
            for i in 0..n {
                centroid[i] += v[i];
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }

        let reflected: Vec<f64> = (0..n)
            .map(|i| centroid[i] + ALPHA * (centroid[i] - simplex[worst][i]))
            .collect();
        let f_reflected = f(&reflected);

        if f_reflected < values[best] {
            let expanded: Vec<f64> = (0..n)
                .map(|i| centroid[i] + GAMMA * (reflected[i] - centroid[i]))
                .collect();
            let f_expanded = f(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            // contraction, outside or inside of the worst vertex
            let (point, f_point) = if f_reflected < values[worst] {
                let outside: Vec<f64> = (0..n)
                    .map(|i| centroid[i] + RHO * (reflected[i] - centroid[i]))
                    .collect();
                let fv = f(&outside);
                (outside, fv)
            } else {
                let inside: Vec<f64> = (0..n)
                    .map(|i| centroid[i] - RHO * (centroid[i] - simplex[worst][i]))
                    .collect();
                let fv = f(&inside);
                (inside, fv)
            };
            if f_point < values[worst].min(f_reflected) {
                simplex[worst] = point;
                values[worst] = f_point;
            } else {
                // shrink toward the best vertex
                let best_vertex = simplex[best].clone();
                for (idx, v) in simplex.iter_mut().enumerate() {
                    if idx == best {
                        continue;
                    }
                    for i in 0..n {
                        v[i] = best_vertex[i] + SIGMA * (v[i] - best_vertex[i]);
                    }
                    values[idx] = f(v);
                }
            }
        }
    }

    let (best_idx, &fx) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty simplex");
    trace.push(fx);
    NelderMeadResult {
        x: simplex[best_idx].clone(),
        fx,
        iterations,
        converged,
        trace,
    }
}
