//! Derivative-free local search and start-point sampling.

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Absolute tolerance on the simplex spread in parameter space.
    pub xatol: f64,
    /// Absolute tolerance on the spread of objective values.
    pub fatol: f64,
    /// Stop after this many consecutive iterations in which the best value
    /// improved by no more than `fatol`.
    pub stall_iter: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iter: 2000,
            xatol: 1e-6,
            fatol: 1e-9,
            stall_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    /// The search stopped on a plateau rather than by tolerance.
    pub stalled: bool,
    pub evaluations: usize,
}

/// Nelder–Mead simplex minimization with the standard coefficients.
///
/// The initial simplex perturbs each coordinate by 5 % of its value (or
/// 2.5e-4 when the coordinate is zero).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let (rho, chi, psi, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut sim: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    sim.push(x0.to_vec());
    for k in 0..n {
        let mut y = x0.to_vec();
        y[k] = if y[k] != 0.0 { 1.05 * y[k] } else { 0.00025 };
        sim.push(y);
    }
    let mut fsim: Vec<f64> = sim.iter().map(|x| eval(x)).collect();

    let order = |sim: &mut Vec<Vec<f64>>, fsim: &mut Vec<f64>| {
        let mut idx: Vec<usize> = (0..sim.len()).collect();
        idx.sort_by(|&a, &b| fsim[a].total_cmp(&fsim[b]));
        *sim = idx.iter().map(|&i| sim[i].clone()).collect();
        *fsim = idx.iter().map(|&i| fsim[i]).collect();
    };
    order(&mut sim, &mut fsim);

    let mut converged = false;
    let mut stalled = false;
    let mut last_improvement = (fsim[0], 0usize);
    for iter in 0..opts.max_iter {
        if fsim[0] < last_improvement.0 - opts.fatol {
            last_improvement = (fsim[0], iter);
        } else if iter - last_improvement.1 >= opts.stall_iter {
            stalled = true;
            break;
        }
        let x_spread = sim[1..]
            .iter()
            .flat_map(|x| x.iter().zip(&sim[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0_f64, f64::max);
        let f_spread = fsim[1..]
            .iter()
            .map(|v| (v - fsim[0]).abs())
            .fold(0.0_f64, f64::max);
        if x_spread <= opts.xatol && f_spread <= opts.fatol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| sim[..n].iter().map(|x| x[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = sim[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(rho);
        let fr = eval(&xr);
        let mut shrink = false;
        if fr < fsim[0] {
            let xe = along(rho * chi);
            let fe = eval(&xe);
            if fe < fr {
                sim[n] = xe;
                fsim[n] = fe;
            } else {
                sim[n] = xr;
                fsim[n] = fr;
            }
        } else if fr < fsim[n - 1] {
            sim[n] = xr;
            fsim[n] = fr;
        } else if fr < fsim[n] {
            let xc = along(psi * rho);
            let fc = eval(&xc);
            if fc <= fr {
                sim[n] = xc;
                fsim[n] = fc;
            } else {
                shrink = true;
            }
        } else {
            let xcc = along(-psi);
            let fcc = eval(&xcc);
            if fcc < fsim[n] {
                sim[n] = xcc;
                fsim[n] = fcc;
            } else {
                shrink = true;
            }
        }
        if shrink {
            let best = sim[0].clone();
            for j in 1..=n {
                sim[j] = best
                    .iter()
                    .zip(&sim[j])
                    .map(|(b, x)| b + sigma * (x - b))
                    .collect();
                fsim[j] = eval(&sim[j]);
            }
        }
        order(&mut sim, &mut fsim);
    }

    Minimum {
        x: sim[0].clone(),
        value: fsim[0],
        converged,
        stalled,
        evaluations,
    }
}

/// Latin-hypercube sample of `n` points in the box `[lo, hi]`.
pub fn latin_hypercube<R: Rng>(rng: &mut R, n: usize, lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let d = lo.len();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(d);
    for k in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        columns.push(
            strata
                .into_iter()
                .map(|s| {
                    let u = (s as f64 + rng.random::<f64>()) / n as f64;
                    lo[k] + (hi[k] - lo[k]) * u
                })
                .collect(),
        );
    }
    (0..n).map(|i| (0..d).map(|k| columns[k][i]).collect()).collect()
}
