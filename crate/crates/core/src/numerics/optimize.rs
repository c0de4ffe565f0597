//! Thin wrappers around argmin's Brent and Nelder-Mead solvers.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::brent::BrentOpt;
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

struct ScalarCost<'a, F>(&'a F);

impl<F: Fn(f64) -> f64> CostFunction for ScalarCost<'_, F> {
    type Param = f64;
    type Output = f64;
    fn cost(&self, x: &f64) -> Result<f64, ArgminError> {
        Ok((self.0)(*x))
    }
}

struct VectorCost<'a, F>(&'a F);

impl<F: Fn(&[f64]) -> f64> CostFunction for VectorCost<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, x: &Vec<f64>) -> Result<f64, ArgminError> {
        Ok((self.0)(x))
    }
}

/// Brent minimization on `[lo, hi]`.
pub fn brent<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, abs_tol: f64) -> ScalarMinimum {
    let solver = BrentOpt::new(lo, hi).set_tolerance(f64::EPSILON.sqrt(), abs_tol);
    let run = Executor::new(ScalarCost(f), solver).configure(|s| s.max_iters(500)).run();
    match run {
        Ok(res) => {
            let state = res.state();
            let x = *state.get_best_param().unwrap_or(&f64::NAN);
            let converged = state.get_termination_status().terminated()
                && state.get_iter() < state.get_max_iters();
            ScalarMinimum { x, value: state.get_best_cost(), converged }
        }
        Err(_) => ScalarMinimum { x: f64::NAN, value: f64::INFINITY, converged: false },
    }
}

/// Global-ish 1-D minimization: evaluate `seeds` evenly spaced points in
/// `(lo, hi]` (in parallel), then refine the best one with Brent inside its
/// neighbouring grid cells.
pub fn scan_then_brent<F>(f: &F, lo: f64, hi: f64, seeds: usize, abs_tol: f64) -> ScalarMinimum
where
    F: Fn(f64) -> f64 + Sync,
{
    let seeds = seeds.max(3);
    let step = (hi - lo) / seeds as f64;
    let grid: Vec<f64> = (1..=seeds).map(|i| lo + step * i as f64).collect();
    let values: Vec<f64> = grid.par_iter().map(|&x| f(x)).collect();
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let left = if best == 0 { lo + 0.5 * step } else { grid[best - 1] };
    let right = grid[(best + 1).min(seeds - 1)];
    let refined = brent(f, left, right.max(grid[best]), abs_tol);
    if refined.value.is_finite() && refined.value <= values[best] {
        refined
    } else {
        ScalarMinimum { x: grid[best], value: values[best], converged: false }
    }
}

/// Nelder-Mead from `x0` with an axis-aligned initial simplex of size `step`,
/// restarted `restarts` times from the best vertex.
pub fn nelder_mead<F>(f: &F, x0: &[f64], step: f64, max_iters: u64, restarts: usize) -> VectorMinimum
where
    F: Fn(&[f64]) -> f64,
{
    let mut best = x0.to_vec();
    let mut best_value = f(x0);
    let mut converged = false;
    for _ in 0..=restarts {
        let mut simplex = vec![best.clone()];
        for i in 0..best.len() {
            let mut v = best.clone();
            v[i] += step;
            simplex.push(v);
        }
        let solver = match NelderMead::new(simplex).with_sd_tolerance(1e-13) {
            Ok(s) => s,
            Err(_) => break,
        };
        let Ok(res) = Executor::new(VectorCost(f), solver).configure(|s| s.max_iters(max_iters)).run() else {
            break;
        };
        let state = res.state();
        converged = state.get_iter() < max_iters;
        if let Some(p) = state.get_best_param() {
            if state.get_best_cost() <= best_value {
                best_value = state.get_best_cost();
                best = p.clone();
            }
        }
    }
    VectorMinimum { x: best, value: best_value, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_on_parabola() {
        let m = brent(&|x: f64| (x - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-10);
        assert!((m.x - 0.3).abs() < 1e-6);
        assert!(m.converged);
    }

    #[test]
    fn scan_finds_global_of_multimodal() {
        let f = |x: f64| (5.0 * x).cos() + 0.1 * (x - 2.0).powi(2);
        let m = scan_then_brent(&f, -3.0, 3.0, 200, 1e-10);
        let brute = (0..600_001)
            .map(|i| -3.0 + 6.0 * i as f64 / 600_000.0)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        assert!((m.x - brute).abs() < 1e-4, "{} vs {}", m.x, brute);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(&f, &[-1.0, 1.0], 0.1, 5000, 2);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }
}
