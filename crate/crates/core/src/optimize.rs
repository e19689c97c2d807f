//! Derivative-free local minimisation (Nelder–Mead) and a deterministic
//! multistart driver for small, smooth objectives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of objective values in the simplex drops below this.
    pub f_tol: f64,
    /// Stop when every vertex is within this distance of the best one.
    pub x_tol: f64,
    /// Number of times the search is restarted from its own optimum.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evals: 4000,
            f_tol: 1e-18,
            x_tol: 1e-12,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

/// Minimise `f` from `x0` with initial simplex edge lengths `step`.
pub fn nelder_mead<F>(f: &F, x0: &[f64], step: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let mut best = simplex_search(f, x0, step, opts);
    for _ in 0..opts.restarts {
        let shrunk: Vec<f64> = step.iter().map(|s| s * 0.05).collect();
        let again = simplex_search(f, &best.x, &shrunk, opts);
        let evals = best.evals + again.evals;
        let improved = again.f < best.f;
        if improved {
            best = again;
        }
        best.evals = evals;
        if !improved {
            break;
        }
    }
    best
}

fn simplex_search<F>(f: &F, x0: &[f64], step: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;

    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let size = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= opts.f_tol || size <= opts.x_tol {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(gamma);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(rho);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = f(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = pts[i]
                .iter()
                .zip(&pts[0])
                .map(|(p, b)| b + sigma * (p - b))
                .collect();
            vals[i] = f(&shrunk);
            pts[i] = shrunk;
        }
        evals += n;
    }

    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    Minimum {
        x: pts[best].clone(),
        f: vals[best],
        evals,
    }
}

/// `count` start points drawn uniformly from the box `bounds`, preceded by the
/// explicitly supplied `seeds`. Deterministic in `seed`.
pub fn start_points(bounds: &[(f64, f64)], count: usize, seed: u64, seeds: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f64>> = seeds.to_vec();
    for _ in 0..count {
        out.push(bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect());
    }
    out
}

/// Run [`nelder_mead`] from every start and return all local minima in the
/// order of the starts.
pub fn multistart<F>(f: &F, starts: &[Vec<f64>], step: &[f64], opts: &NelderMeadOptions) -> Vec<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    starts.iter().map(|x0| nelder_mead(f, x0, step, opts)).collect()
}
