//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the Euclidean gradient norm falls below this value.
    pub gtol: f64,
    /// Stop when the objective itself falls below this value.
    pub fmin: f64,
    /// Sufficient-decrease parameter.
    pub c1: f64,
    /// Step shrink factor on rejection.
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 12,
            max_iter: 500,
            gtol: 1e-10,
            fmin: f64::NEG_INFINITY,
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Objective,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsReport {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Objective value after every accepted step, starting with the initial one.
    pub history: Vec<f64>,
}

impl LbfgsReport {
    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::Gradient | Termination::Objective)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Initial inverse-Hessian approximation applied inside the two-loop recursion.
pub type Preconditioner<'a> = &'a dyn Fn(&[f64]) -> Vec<f64>;

/// Two-loop recursion: returns `−H g`.
fn direction(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, h0: Option<Preconditioner>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alpha.push(a);
    }
    if let Some(p) = h0 {
        q = p(&q);
    }
    if let Some((s, y, _)) = mem.back() {
        let hy = match h0 {
            Some(p) => p(y),
            None => y.clone(),
        };
        let scale = dot(s, y) / dot(y, &hy);
        for qi in q.iter_mut() {
            *qi *= scale;
        }
    }
    for ((s, y, rho), a) in mem.iter().zip(alpha.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `f`, which returns the objective value and gradient.
/// Accepted steps never increase the objective.
pub fn minimize<F>(f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    minimize_preconditioned(f, x0, opts, None)
}

/// As [`minimize`], with `h0` approximating the inverse Hessian.
pub fn minimize_preconditioned<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions, h0: Option<Preconditioner>) -> LbfgsReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut evaluations = 1;
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut history = vec![fx];
    let mut iterations = 0;
    let mut first_step = true;
    let termination = loop {
        let gn = norm(&g);
        if gn <= opts.gtol {
            break Termination::Gradient;
        }
        if fx <= opts.fmin {
            break Termination::Objective;
        }
        if iterations >= opts.max_iter {
            break Termination::MaxIterations;
        }
        let mut d = direction(&g, &mem, h0);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) || !slope.is_finite() {
            mem.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        let mut step = if mem.is_empty() && first_step && h0.is_none() { 1.0 / gn.max(1.0) } else { 1.0 };
        first_step = false;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fnew, gnew) = f(&xn);
            evaluations += 1;
            if fnew.is_finite() && fnew <= fx + opts.c1 * step * slope && fnew <= fx {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            step *= opts.shrink;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if mem.is_empty() {
                break Termination::LineSearchFailed;
            }
            // Retry from steepest descent before giving up.
            mem.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            mem.push_back((s, y, 1.0 / sy));
            if mem.len() > opts.memory {
                mem.pop_front();
            }
        }
        x = xn;
        fx = fnew;
        g = gnew;
        iterations += 1;
        history.push(fx);
    };
    let grad_norm = norm(&g);
    LbfgsReport { x, f: fx, grad_norm, iterations, evaluations, termination, history }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let r = minimize(f, vec![-1.2, 1.0], &LbfgsOptions { max_iter: 200, ..Default::default() });
        assert!(r.converged(), "{:?}", r.termination);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let n = 50;
        let f = |x: &[f64]| {
            let v: f64 = x.iter().enumerate().map(|(i, xi)| (1.0 + i as f64).powi(2) * xi * xi).sum();
            let g = x.iter().enumerate().map(|(i, xi)| 2.0 * (1.0 + i as f64).powi(2) * xi).collect();
            (v, g)
        };
        let r = minimize(f, vec![1.0; n], &LbfgsOptions { max_iter: 1000, gtol: 1e-9, ..Default::default() });
        assert!(r.converged(), "{:?} {} {} {}", r.termination, r.iterations, r.f, r.grad_norm);
        assert!(r.f < 1e-12);
    }
}
