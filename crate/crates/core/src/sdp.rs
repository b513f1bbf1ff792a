//! A small dense semidefinite-program solver for linear objectives over
//! block PSD constraints, written for the tiny (<= 16x16 per block)
//! instances produced by the diamond-norm metric.
//!
//! Solves `min c.x  s.t.  C_b + sum_i x_i A_{b,i} >= 0` for every block `b`
//! with a log-det barrier path-following method. The returned gap bound is
//! the standard barrier certificate `(total block dimension) / t`.

use crate::linalg::RMat;
use crate::{Error, Result};

/// One PSD constraint block `C + sum_i x_i A_i >= 0`.
pub struct SdpBlock {
    pub dim: usize,
    pub constant: RMat,
    /// Sparse list of (variable index, symmetric coefficient matrix).
    pub coeffs: Vec<(usize, RMat)>,
}

impl SdpBlock {
    fn eval(&self, x: &[f64]) -> RMat {
        let mut s = self.constant.clone();
        for (i, a) in &self.coeffs {
            s += a * x[*i];
        }
        s
    }
}

pub struct SdpProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<SdpBlock>,
}

#[derive(Debug, Clone)]
pub struct SdpOptions {
    pub gap_tol: f64,
    pub t_init: f64,
    pub mu: f64,
    pub max_newton: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-7, t_init: 1.0, mu: 20.0, max_newton: 80 }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub gap_bound: f64,
}

fn cholesky_ok(s: &RMat) -> bool {
    s.clone().cholesky().is_some()
}

/// Path-following barrier solve starting from the strictly feasible `x0`.
pub fn solve(problem: &SdpProblem, x0: &[f64], opts: &SdpOptions) -> Result<SdpSolution> {
    let n = problem.n_vars;
    assert_eq!(x0.len(), n);
    let total_dim: usize = problem.blocks.iter().map(|b| b.dim).sum();
    for b in &problem.blocks {
        if !cholesky_ok(&b.eval(x0)) {
            return Err(Error::Numerical("SDP start point is not strictly feasible".into()));
        }
    }

    let mut x = x0.to_vec();
    let mut t = opts.t_init;
    let c = &problem.objective;

    let barrier = |x: &[f64], t: f64| -> f64 {
        let mut val = t * dot(c, x);
        for b in &problem.blocks {
            match b.eval(x).cholesky() {
                Some(ch) => {
                    let mut logdet = 0.0;
                    for i in 0..b.dim {
                        logdet += ch.l()[(i, i)].ln();
                    }
                    val -= 2.0 * logdet;
                }
                None => return f64::INFINITY,
            }
        }
        val
    };

    loop {
        // center at this t
        for _ in 0..opts.max_newton {
            let mut grad = vec![0.0; n];
            for (i, gi) in grad.iter_mut().enumerate() {
                *gi = t * c[i];
            }
            let mut hess = RMat::zeros(n, n);
            for b in &problem.blocks {
                let s = b.eval(&x);
                let ch = s
                    .cholesky()
                    .ok_or_else(|| Error::Numerical("SDP iterate left the cone".into()))?;
                let s_inv = ch.inverse();
                let ws: Vec<(usize, RMat)> =
                    b.coeffs.iter().map(|(i, a)| (*i, &s_inv * a)).collect();
                for (i, wi) in &ws {
                    grad[*i] -= wi.trace();
                }
                for (i, wi) in &ws {
                    for (j, wj) in &ws {
                        if j < i {
                            continue;
                        }
                        let mut tr = 0.0;
                        for r in 0..b.dim {
                            for cidx in 0..b.dim {
                                tr += wi[(r, cidx)] * wj[(cidx, r)];
                            }
                        }
                        hess[(*i, *j)] += tr;
                        if i != j {
                            hess[(*j, *i)] += tr;
                        }
                    }
                }
            }
            // solve H d = -g with a ridge fallback
            let mut ridge = 0.0;
            let d = loop {
                let mut h = hess.clone();
                if ridge > 0.0 {
                    for i in 0..n {
                        h[(i, i)] += ridge;
                    }
                }
                if let Some(ch) = h.cholesky() {
                    let mut rhs = nalgebra::DVector::from_vec(grad.iter().map(|v| -v).collect());
                    ch.solve_mut(&mut rhs);
                    break rhs;
                }
                ridge = if ridge == 0.0 { 1e-12 * hess.trace().abs().max(1.0) } else { ridge * 100.0 };
                if ridge > 1e6 {
                    return Err(Error::Numerical(
                        "SDP Newton system is singular beyond repair".into(),
                    ));
                }
            };
            let decrement2: f64 = -d
                .iter()
                .zip(grad.iter())
                .map(|(di, gi)| di * gi)
                .sum::<f64>();
            if decrement2 * 0.5 < 1e-10 {
                break;
            }
            // backtrack into the cone, then Armijo
            let f0 = barrier(&x, t);
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..70 {
                let xt: Vec<f64> = x.iter().zip(d.iter()).map(|(xi, di)| xi + step * di).collect();
                let ft = barrier(&xt, t);
                if ft.is_finite() && ft <= f0 - 1e-4 * step * decrement2 {
                    x = xt;
                    accepted = true;
                    break;
                }
                step *= 0.6;
            }
            if !accepted {
                break;
            }
        }

        let gap = total_dim as f64 / t;
        if gap < opts.gap_tol {
            return Ok(SdpSolution { x: x.clone(), objective: dot(c, &x), gap_bound: gap });
        }
        t *= opts.mu;
        if t > 1e18 {
            return Err(Error::Numerical(format!(
                "SDP did not converge: best objective {:.6e}, gap bound {:.3e}",
                dot(c, &x),
                gap
            )));
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn smallest_dominating_scalar_is_max_eigenvalue() {
        // min t s.t. t I - M >= 0 with eig(M) = {1, 3}
        let m = RMat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let problem = SdpProblem {
            n_vars: 1,
            objective: vec![1.0],
            blocks: vec![SdpBlock {
                dim: 2,
                constant: -m,
                coeffs: vec![(0, RMat::identity(2, 2))],
            }],
        };
        let sol = solve(&problem, &[10.0], &SdpOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.objective, 3.0, epsilon = 1e-6);
    }

    #[test]
    fn off_diagonal_domination() {
        // min x s.t. [[x, 1], [1, x]] >= 0  ->  x* = 1
        let mut c0 = RMat::zeros(2, 2);
        c0[(0, 1)] = 1.0;
        c0[(1, 0)] = 1.0;
        let problem = SdpProblem {
            n_vars: 1,
            objective: vec![1.0],
            blocks: vec![SdpBlock { dim: 2, constant: c0, coeffs: vec![(0, RMat::identity(2, 2))] }],
        };
        let sol = solve(&problem, &[5.0], &SdpOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn two_blocks_and_two_vars() {
        // min x + y s.t. x >= 2 (1x1 block), y >= 3 (1x1 block)
        let problem = SdpProblem {
            n_vars: 2,
            objective: vec![1.0, 1.0],
            blocks: vec![
                SdpBlock {
                    dim: 1,
                    constant: RMat::from_element(1, 1, -2.0),
                    coeffs: vec![(0, RMat::identity(1, 1))],
                },
                SdpBlock {
                    dim: 1,
                    constant: RMat::from_element(1, 1, -3.0),
                    coeffs: vec![(1, RMat::identity(1, 1))],
                },
            ],
        };
        let sol = solve(&problem, &[10.0, 10.0], &SdpOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.objective, 5.0, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_start_is_reported() {
        let problem = SdpProblem {
            n_vars: 1,
            objective: vec![1.0],
            blocks: vec![SdpBlock {
                dim: 1,
                constant: RMat::from_element(1, 1, -2.0),
                coeffs: vec![(0, RMat::identity(1, 1))],
            }],
        };
        assert!(solve(&problem, &[0.0], &SdpOptions::default()).is_err());
    }
}
