//! BFGS minimizer with backtracking (Armijo) line search.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop once the infinity norm of the gradient falls below this.
    pub gtol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            gtol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    /// Gradient tolerance reached.
    pub converged: bool,
    /// The line search could not decrease the objective any further.
    pub stalled: bool,
}

/// Minimizes `objective`, which returns the value and writes the gradient into its
/// second argument. Infeasible points must return `f64::INFINITY` (or NaN).
pub fn minimize<F>(objective: F, x0: &[f64], opts: BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    minimize_from(objective, x0, None, opts)
}

/// As [`minimize`], starting from the given inverse-Hessian approximation
/// (identity when `None`).
pub fn minimize_from<F>(mut objective: F, x0: &[f64], inv_hessian: Option<DMatrix<f64>>, opts: BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut g = DVector::zeros(n);
    let mut f = objective(x.as_slice(), g.as_mut_slice());
    if n == 0 {
        return BfgsResult {
            x: vec![],
            value: f,
            grad: vec![],
            iterations: 0,
            converged: true,
            stalled: false,
        };
    }
    let seeded = inv_hessian.is_some();
    let mut h = inv_hessian.unwrap_or_else(|| DMatrix::<f64>::identity(n, n));
    let mut first = !seeded;
    let mut stalled = false;
    let mut iterations = 0;
    let mut x_new = DVector::zeros(n);
    let mut g_new = DVector::zeros(n);

    while iterations < opts.max_iter {
        if g.amax() < opts.gtol {
            break;
        }
        iterations += 1;
        let mut dir = -(&h * &g);
        let mut slope = dir.dot(&g);
        if !(slope < 0.0) {
            // not a descent direction: restart from steepest descent
            h = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = dir.dot(&g);
        }
        if first {
            // keep the very first trial step modest
            let scale = 1.0 / g.norm().max(1.0);
            dir *= scale;
            slope *= scale;
        }

        let mut step = 1.0;
        let mut f_new = f64::INFINITY;
        let mut accepted = false;
        for _ in 0..80 {
            x_new.copy_from(&x);
            x_new.axpy(step, &dir, 1.0);
            f_new = objective(x_new.as_slice(), g_new.as_mut_slice());
            if f_new.is_finite() && f_new <= f + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if first {
                stalled = true;
                break;
            }
            // retry once from steepest descent before giving up
            h = DMatrix::identity(n, n);
            first = true;
            continue;
        }

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if first && sy > 0.0 {
            h = DMatrix::identity(n, n) * (sy / y.dot(&y));
        }
        first = false;
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }

        let progress = f - f_new;
        x.copy_from(&x_new);
        g.copy_from(&g_new);
        f = f_new;
        if progress <= f64::EPSILON * f.abs().max(1.0) && s.amax() <= f64::EPSILON * x.amax().max(1.0) {
            stalled = true;
            break;
        }
    }

    BfgsResult {
        converged: g.amax() < opts.gtol,
        x: x.as_slice().to_vec(),
        value: f,
        grad: g.as_slice().to_vec(),
        iterations,
        stalled,
    }
}

/// Central-difference gradient.
pub fn numerical_gradient<F>(mut f: F, x: &[f64]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let dn = f(&xp);
            xp[i] = x[i];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let res = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &[-1.2, 1.0],
            BfgsOptions::default(),
        );
        assert!(res.converged, "{res:?}");
        assert!((res.x[0] - 1.0).abs() < 1e-6);
        assert!((res.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn respects_infeasible_region() {
        // minimize x - log(x): optimum at 1, infeasible for x <= 0
        let res = minimize(
            |x, g| {
                if x[0] <= 0.0 {
                    return f64::INFINITY;
                }
                g[0] = 1.0 - 1.0 / x[0];
                x[0] - x[0].ln()
            },
            &[5.0],
            BfgsOptions::default(),
        );
        assert!((res.x[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn numerical_gradient_of_quadratic() {
        let g = numerical_gradient(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, -1.0]);
        assert!((g[0] - 4.0).abs() < 1e-6);
        assert!((g[1] - 3.0).abs() < 1e-6);
    }
}
