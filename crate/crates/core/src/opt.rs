//! Local optimizers: a limited-memory BFGS with backtracking line search
//! driven by central-difference gradients, and a Nelder-Mead simplex for
//! small derivative-free fits.

/// Central-difference gradient with per-coordinate step `eps * (1 + |x_i|)`.
pub fn numerical_gradient(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = eps * (1.0 + x[i].abs());
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = f(&xp);
        xp[i] = orig - h;
        let fm = f(&xp);
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
    pub memory: usize,
    pub grad_eps: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { max_iters: 400, grad_tol: 1e-7, f_tol: 1e-12, memory: 10, grad_eps: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct OptOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` from `x0`. The objective may return infinity to reject a
/// point; the line search backtracks out of such regions. The accepted
/// iterate sequence is non-increasing in `f`.
pub fn lbfgs(f: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64], opts: &LbfgsOptions) -> OptOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = numerical_gradient(f, &x, opts.grad_eps);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iters = 0;

    for iter in 0..opts.max_iters {
        iters = iter + 1;
        let gnorm = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gnorm < opts.grad_tol {
            converged = true;
            break;
        }

        // two-loop recursion
        let mut q = g.clone();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &q);
            axpy(-alpha[i], &y_hist[i], &mut q);
        }
        if k > 0 {
            let ys = dot(&y_hist[k - 1], &s_hist[k - 1]);
            let yy = dot(&y_hist[k - 1], &y_hist[k - 1]);
            let scale = ys / yy.max(1e-300);
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for i in 0..k {
            let beta = rho_hist[i] * dot(&y_hist[i], &q);
            axpy(alpha[i] - beta, &s_hist[i], &mut q);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut dg = dot(&dir, &g);
        if dg >= 0.0 {
            // not a descent direction; fall back to steepest descent
            dir = g.iter().map(|v| -v).collect();
            dg = dot(&dir, &g);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // backtracking Armijo line search
        let mut step = 1.0;
        let c1 = 1e-4;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f(&x_new);
            if f_new.is_finite() && f_new <= fx + c1 * step * dg {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true; // no further progress possible along this ray
            break;
        }

        let g_new = numerical_gradient(f, &x_new, opts.grad_eps);
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let ys = dot(&y, &s);
        if ys > 1e-12 * norm(&y) * norm(&s) {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / ys);
            s_hist.push(s);
            y_hist.push(y);
        }

        let f_drop = fx - f_new;
        x = x_new.clone();
        fx = f_new;
        g = g_new;
        if f_drop.abs() < opts.f_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
    }
    OptOutcome { x, f: fx, iterations: iters, converged }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for i in 0..x.len() {
        y[i] += a * x[i];
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iters: usize,
    pub f_tol: f64,
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iters: 2000, f_tol: 1e-10, x_tol: 1e-9, initial_step: 0.05 }
    }
}

/// Nelder-Mead simplex minimization; never returns a point worse than the
/// start.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> OptOutcome {
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        let h = opts.initial_step * (1.0 + x0[i].abs());
        p[i] += h;
        simplex.push(p);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut iters = 0;
    let mut converged = false;

    for iter in 0..opts.max_iters {
        iters = iter + 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fv[a].partial_cmp(&fv[b]).unwrap_or(std::cmp::Ordering::Equal));
        let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let refv: Vec<f64> = order.iter().map(|&i| fv[i]).collect();
        simplex = reordered;
        fv = refv;

        let spread = fv[n] - fv[0];
        let size: f64 = (0..n)
            .map(|j| {
                simplex
                    .iter()
                    .map(|p| (p[j] - simplex[0][j]).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if spread.abs() < opts.f_tol * (1.0 + fv[0].abs()) && size < opts.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let xr: Vec<f64> =
            (0..n).map(|j| centroid[j] + alpha * (centroid[j] - simplex[n][j])).collect();
        let fr = f(&xr);
        if fr < fv[0] {
            let xe: Vec<f64> =
                (0..n).map(|j| centroid[j] + gamma * (xr[j] - centroid[j])).collect();
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            simplex[n] = xr;
            fv[n] = fr;
        } else {
            let xc: Vec<f64> =
                (0..n).map(|j| centroid[j] + rho * (simplex[n][j] - centroid[j])).collect();
            let fc = f(&xc);
            if fc < fv[n] {
                simplex[n] = xc;
                fv[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = (0..n)
                        .map(|j| simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]))
                        .collect();
                    fv[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| fv[a].partial_cmp(&fv[b]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap();
    OptOutcome { x: simplex[best].clone(), f: fv[best], iterations: iters, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn lbfgs_minimizes_quadratic() {
        let mut f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2);
        let out = lbfgs(&mut f, &[0.0, 0.0], &LbfgsOptions::default());
        assert!(out.converged);
        assert_abs_diff_eq!(out.x[0], 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(out.x[1], -1.0, epsilon = 1e-6);
    }

    #[test]
    fn lbfgs_handles_rosenbrock() {
        let mut f = |x: &[f64]| rosenbrock(x);
        let out = lbfgs(
            &mut f,
            &[-1.2, 1.0],
            &LbfgsOptions { max_iters: 2000, ..Default::default() },
        );
        assert!(out.f < 1e-8, "f = {}", out.f);
    }

    #[test]
    fn lbfgs_never_increases_objective() {
        let mut f = |x: &[f64]| x[0].powi(4) + (x[1] - 2.0).powi(2);
        let f0 = f(&[1.5, 0.0]);
        let out = lbfgs(&mut f, &[1.5, 0.0], &LbfgsOptions::default());
        assert!(out.f <= f0);
    }

    #[test]
    fn lbfgs_backtracks_out_of_infeasible_regions() {
        let mut f = |x: &[f64]| {
            if x[0] <= -0.9 {
                f64::INFINITY
            } else {
                (x[0] - 1.0).powi(2)
            }
        };
        let out = lbfgs(&mut f, &[-0.5, 0.0][..1].to_vec().as_slice(), &LbfgsOptions::default());
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn nelder_mead_minimizes_rosenbrock() {
        let mut f = |x: &[f64]| rosenbrock(x);
        let out = nelder_mead(
            &mut f,
            &[-1.2, 1.0],
            &NelderMeadOptions { max_iters: 5000, initial_step: 0.5, ..Default::default() },
        );
        assert!(out.f < 1e-8, "f = {}", out.f);
    }

    #[test]
    fn nelder_mead_never_worse_than_start() {
        let mut f = |x: &[f64]| x.iter().map(|v| v.abs()).sum::<f64>();
        let start = [0.0, 0.0, 0.0, 0.0];
        let f0 = f(&start);
        let out = nelder_mead(&mut f, &start, &NelderMeadOptions::default());
        assert!(out.f <= f0);
    }
}
