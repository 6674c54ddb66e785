//! Limited-memory BFGS with the two-loop recursion and a backtracking Armijo
//! line search.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    /// Number of stored `(s, y)` curvature pairs.
    pub history: usize,
    /// First trial step of every line search.
    pub initial_step: f64,
    /// Stop once the gradient norm falls to this value.
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            history: 10,
            initial_step: 1.0,
            grad_tol: 1e-12,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    /// Best iterate seen.
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective at the accepted iterate of each iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

pub fn lbfgs_minimize<F>(objective: F, x0: &[f64], config: &LbfgsConfig) -> LbfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    lbfgs_minimize_projected(objective, x0, config, |_| {})
}

/// L-BFGS where every trial point is passed through `project` (e.g. a box
/// clamp) before evaluation.
pub fn lbfgs_minimize_projected<F, P>(
    mut objective: F,
    x0: &[f64],
    config: &LbfgsConfig,
    mut project: P,
) -> LbfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    P: FnMut(&mut [f64]),
{
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut f, mut g) = objective(&x);
    let mut evaluations = 1;
    let mut best = (x.clone(), f);
    let mut trace = Vec::new();
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.history);

    let finish = |best: (Vec<f64>, f64), trace: Vec<f64>, evaluations, termination| {
        let iterations = trace.len();
        LbfgsOutcome {
            x: best.0,
            value: best.1,
            trace,
            iterations,
            evaluations,
            termination,
        }
    };

    if !f.is_finite() || !g.iter().all(|v| v.is_finite()) {
        return finish(best, trace, evaluations, Termination::NonFinite);
    }

    while trace.len() < config.max_iters {
        if norm(&g) <= config.grad_tol {
            return finish(best, trace, evaluations, Termination::Converged);
        }
        let mut direction = two_loop(&g, &history);
        if dot(&direction, &g) >= 0.0 {
            history.clear();
            direction = g.iter().map(|v| -v).collect();
        }

        let mut accepted = None;
        let mut step = config.initial_step;
        for _ in 0..=config.max_backtracks {
            let mut trial: Vec<f64> = x.iter().zip(&direction).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
            let decrease = dot(&g, &moved);
            let (ft, gt) = objective(&trial);
            evaluations += 1;
            if !ft.is_finite() || !gt.iter().all(|v| v.is_finite()) {
                if ft.is_nan() || gt.iter().any(|v| v.is_nan()) {
                    return finish(best, trace, evaluations, Termination::NonFinite);
                }
                step *= config.backtrack;
                continue;
            }
            if decrease < 0.0 && ft <= f + config.armijo_c * decrease {
                accepted = Some((trial, moved, ft, gt));
                break;
            }
            step *= config.backtrack;
        }

        let Some((trial, s, ft, gt)) = accepted else {
            if history.is_empty() {
                return finish(best, trace, evaluations, Termination::LineSearchFailed);
            }
            // retry from steepest descent
            history.clear();
            continue;
        };

        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 {
            if history.len() == config.history {
                history.pop_front();
            }
            if config.history > 0 {
                history.push_back((s, y, 1.0 / sy));
            }
        } else {
            // negative curvature: the stored pairs no longer describe the
            // local model
            history.clear();
        }
        x = trial;
        f = ft;
        g = gt;
        trace.push(f);
        if f < best.1 {
            best = (x.clone(), f);
        }
    }
    let termination = if norm(&g) <= config.grad_tol {
        Termination::Converged
    } else {
        Termination::MaxIterations
    };
    finish(best, trace, evaluations, termination)
}

/// `-H g` with `H` the L-BFGS inverse-Hessian estimate, `H0 = (s^T y / y^T y) I`.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(&mut q, -a, y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(&mut q, a - b, s);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}
