//! Independent oracles shared by the integration suites. Everything here
//! reimplements the checked quantity from first principles and must stay
//! independent of the production code paths it validates.

#![allow(dead_code)]

use varcast_core::dist::ErrorLaw;
use varcast_core::model::{Dynamics, ParamVector, RegressorSet};

/// Adaptive Simpson quadrature over unit-width panels, so integrands that
/// are tiny over most of a wide span cannot fool the error estimate.
pub fn integrate<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    let panels = ((b - a).ceil() as usize).clamp(1, 20_000);
    let width = (b - a) / panels as f64;
    let panel_tol = tol / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * width;
        let hi = lo + width;
        let whole = simpson(&f, lo, hi);
        total += recurse(&f, lo, hi, whole, panel_tol, 30);
    }
    total
}

/// Integral of g over the whole real line: a paneled central part on [-T, T]
/// plus both tails under the substitution z = T/v^2 (dz = 2T/v^3 dv), which
/// turns polynomial tail decay into a bounded integrand on (0, 1].
pub fn integrate_real_line<F: Fn(f64) -> f64 + Copy>(g: F, center_span: f64, tol: f64) -> f64 {
    let t = center_span;
    let central = integrate(g, -t, t, tol / 2.0);
    let tail = |sign: f64| {
        let h = move |v: f64| {
            let z = sign * t / (v * v);
            g(z) * 2.0 * t / (v * v * v)
        };
        // the v -> 0 endpoint maps to |z| = infinity; stop just short of it
        integrate(h, 1e-8, 1.0, tol / 4.0)
    };
    central + tail(1.0) + tail(-1.0)
}

/// Straight-line reimplementation of the log-likelihood: explicit recursions
/// and inline closed-form log-densities, no shared code with the library
/// filter.
pub fn loglik_oracle(
    dynamics: Dynamics,
    law: &ErrorLaw,
    p: &ParamVector,
    returns: &[f64],
    regressors: &RegressorSet,
) -> f64 {
    let n = returns.len();
    let r_mean = returns.iter().sum::<f64>() / n as f64;
    let mut var0 = 0.0;
    for &r in returns {
        var0 += (r - r_mean) * (r - r_mean);
    }
    var0 /= n as f64;
    if var0 < 1e-12 {
        var0 = 1e-12;
    }

    let dx = |t: usize| -> f64 {
        let mut acc = 0.0;
        for (c, col) in regressors.columns.iter().enumerate() {
            acc += p.delta[c] * col[t];
        }
        acc
    };

    let e_abs = abs_moment_oracle(law);
    let mut eps = vec![0.0; n];
    let mut sig2 = vec![0.0; n];
    eps[0] = returns[0] - p.mu - p.phi * r_mean;
    sig2[0] = var0;
    for t in 1..n {
        eps[t] = returns[t] - p.mu - p.phi * returns[t - 1];
        sig2[t] = match dynamics {
            Dynamics::Garch => {
                p.omega + dx(t) + p.alpha * eps[t - 1] * eps[t - 1] + p.beta * sig2[t - 1]
            }
            Dynamics::Gjr => {
                let ind = if eps[t - 1] <= 0.0 { 1.0 } else { 0.0 };
                p.omega
                    + dx(t)
                    + (p.alpha + p.gamma * ind) * eps[t - 1] * eps[t - 1]
                    + p.beta * sig2[t - 1]
            }
            Dynamics::Egarch => {
                let z = eps[t - 1] / sig2[t - 1].sqrt();
                let g = p.alpha * z + p.gamma * (z.abs() - e_abs);
                (p.omega + dx(t) + g + p.beta * sig2[t - 1].ln()).exp()
            }
        };
    }
    let mut ll = 0.0;
    for t in 0..n {
        let z = eps[t] / sig2[t].sqrt();
        ll += log_pdf_oracle(law, z) - 0.5 * sig2[t].ln();
    }
    ll
}

/// Closed-form standardized log-densities, written directly from the
/// formulas (lgamma via Stirling-Lanczos below).
pub fn log_pdf_oracle(law: &ErrorLaw, z: f64) -> f64 {
    match *law {
        ErrorLaw::Gaussian => -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z,
        ErrorLaw::StudentT { nu } => {
            let s = ((nu - 2.0) / nu).sqrt();
            let t = z / s;
            lgamma_oracle(0.5 * (nu + 1.0))
                - lgamma_oracle(0.5 * nu)
                - 0.5 * (nu * std::f64::consts::PI).ln()
                - 0.5 * (nu + 1.0) * (1.0 + t * t / nu).ln()
                - s.ln()
        }
        ErrorLaw::Ged { nu } => {
            let lam = (2.0f64.powf(-2.0 / nu) * (lgamma_oracle(1.0 / nu)
                - lgamma_oracle(3.0 / nu))
                .exp())
            .sqrt();
            nu.ln()
                - 0.5 * (z.abs() / lam).powf(nu)
                - lam.ln()
                - (1.0 + 1.0 / nu) * 2.0f64.ln()
                - lgamma_oracle(1.0 / nu)
        }
    }
}

pub fn abs_moment_oracle(law: &ErrorLaw) -> f64 {
    match *law {
        ErrorLaw::Gaussian => (2.0 / std::f64::consts::PI).sqrt(),
        ErrorLaw::StudentT { nu } => {
            let s = ((nu - 2.0) / nu).sqrt();
            s * 2.0 * nu.sqrt() * (lgamma_oracle(0.5 * (nu + 1.0)) - lgamma_oracle(0.5 * nu)).exp()
                / (std::f64::consts::PI.sqrt() * (nu - 1.0))
        }
        ErrorLaw::Ged { nu } => {
            let lam = (2.0f64.powf(-2.0 / nu)
                * (lgamma_oracle(1.0 / nu) - lgamma_oracle(3.0 / nu)).exp())
            .sqrt();
            lam * 2.0f64.powf(1.0 / nu)
                * (lgamma_oracle(2.0 / nu) - lgamma_oracle(1.0 / nu)).exp()
        }
    }
}

/// Independent lgamma (Stirling series with shift); 1e-12-accurate on the
/// shapes used here.
pub fn lgamma_oracle(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 12.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv / 12.0 - inv * inv2 / 360.0 + inv * inv2 * inv2 / 1260.0
        - inv * inv2 * inv2 * inv2 / 1680.0;
    shift + 0.5 * ((2.0 * std::f64::consts::PI).ln() - x.ln()) + x * (x.ln() - 1.0) + series
}

/// Direct transliteration of the block-bootstrap index algorithm: v block
/// starts drawn uniformly, each extended k rows with wrap-around, columns
/// concatenated, l leftovers appended. Mirrors the generator draw order.
pub fn bootstrap_replay(n: usize, k: usize, b: usize, seed: u64) -> Vec<Vec<usize>> {
    use rand::Rng;
    use rand::SeedableRng;
    let v = n / k - 1;
    let l = n - k * v;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut all = Vec::with_capacity(b);
    for _ in 0..b {
        let mut starts = Vec::with_capacity(v);
        let mut extras = Vec::with_capacity(l);
        let mut matrix = vec![vec![0usize; v]; k];
        for j in 0..v {
            starts.push(rng.gen_range(0..n));
            matrix[0][j] = starts[j];
            for i in 1..k {
                let mut next = matrix[i - 1][j] + 1;
                if next >= n {
                    next -= n;
                }
                matrix[i][j] = next;
            }
        }
        for _ in 0..l {
            extras.push(rng.gen_range(0..n));
        }
        let mut flat = Vec::with_capacity(n);
        for j in 0..v {
            for row in matrix.iter().take(k) {
                flat.push(row[j]);
            }
        }
        flat.extend(extras);
        all.push(flat);
    }
    all
}

/// Ordinary least squares via normal equations with full Gauss-Jordan
/// elimination; used by the scripted DQ oracle.
pub fn ols_oracle(x_cols: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let ncols = x_cols.len();
    let rows = y.len();
    let mut xtx = vec![vec![0.0; ncols]; ncols];
    let mut xty = vec![0.0; ncols];
    for a in 0..ncols {
        for b in 0..ncols {
            let mut acc = 0.0;
            for i in 0..rows {
                acc += x_cols[a][i] * x_cols[b][i];
            }
            xtx[a][b] = acc;
        }
        let mut acc = 0.0;
        for i in 0..rows {
            acc += x_cols[a][i] * y[i];
        }
        xty[a] = acc;
    }
    // Gauss-Jordan solve
    let mut aug: Vec<Vec<f64>> = xtx
        .iter()
        .zip(&xty)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..ncols {
        let pivot_row = (col..ncols).max_by(|&r1, &r2| {
            aug[r1][col]
                .abs()
                .partial_cmp(&aug[r2][col].abs())
                .unwrap()
        })?;
        if aug[pivot_row][col].abs() < 1e-10 {
            return None;
        }
        aug.swap(col, pivot_row);
        let pivot = aug[col][col];
        for v in &mut aug[col] {
            *v /= pivot;
        }
        for row in 0..ncols {
            if row == col {
                continue;
            }
            let factor = aug[row][col];
            for j in 0..=ncols {
                let delta = factor * aug[col][j];
                aug[row][j] -= delta;
            }
        }
    }
    Some(aug.iter().map(|r| r[ncols]).collect())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
