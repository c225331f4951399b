//! Quasi-Newton (BFGS) minimisation with central-difference gradients.

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Half-width of the central difference.
    pub gradient_step: f64,
    /// Relative objective change and (square-rooted) parameter change below
    /// which the search stops.
    pub tolerance: f64,
    /// Largest infinity-norm of a single trial step.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_step: 1e-5,
            tolerance: 1e-10,
            max_step: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn central_gradient<F>(f: &F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

struct InverseHessian {
    n: usize,
    h: Vec<f64>,
    fresh: bool,
}

impl InverseHessian {
    fn identity(n: usize) -> Self {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
        Self { n, h, fresh: true }
    }

    fn direction(&self, g: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| -dot(&self.h[i * self.n..(i + 1) * self.n], g))
            .collect()
    }

    fn update(&mut self, s: &[f64], y: &[f64]) {
        let n = self.n;
        let sy = dot(s, y);
        if sy <= 1e-12 * dot(s, s).sqrt() * dot(y, y).sqrt() || !sy.is_finite() {
            return;
        }
        if self.fresh {
            let scale = sy / dot(y, y);
            for v in &mut self.h {
                *v *= scale;
            }
            self.fresh = false;
        }
        let hy: Vec<f64> = (0..n).map(|i| dot(&self.h[i * n..(i + 1) * n], y)).collect();
        let yhy = dot(y, &hy);
        let rho = 1.0 / sy;
        let coef = (1.0 + rho * yhy) * rho;
        for i in 0..n {
            for j in 0..n {
                self.h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
            }
        }
    }
}

/// Minimises `f` from `x0`. Non-finite objective values are treated as
/// infeasible and rejected by the line search.
pub fn minimize<F>(f: F, x0: &[f64], opts: &BfgsOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let initial_value = fx;
    if !fx.is_finite() || n == 0 {
        return Minimum {
            x,
            value: fx,
            initial_value,
            iterations: 0,
            converged: n == 0 && fx.is_finite(),
        };
    }
    let gtol = 1e-6 * (1.0 + fx.abs());
    let mut g = central_gradient(&f, &x, opts.gradient_step);
    let mut hess = InverseHessian::identity(n);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if inf_norm(&g) <= gtol {
            converged = true;
            break;
        }
        let mut d = hess.direction(&g);
        let mut slope = dot(&g, &d);
        if slope.is_nan() || slope >= 0.0 {
            hess = InverseHessian::identity(n);
            d = hess.direction(&g);
            slope = dot(&g, &d);
        }
        let d_norm = inf_norm(&d);
        let mut alpha = if d_norm > opts.max_step {
            opts.max_step / d_norm
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }

        let Some((x_new, f_new)) = accepted else {
            if !hess.fresh {
                hess = InverseHessian::identity(n);
                continue;
            }
            // No descent possible along the steepest direction: numerical floor.
            converged = inf_norm(&g) <= 1e-4 * (1.0 + fx.abs());
            break;
        };

        let g_new = central_gradient(&f, &x_new, opts.gradient_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let df = (fx - f_new).abs();
        let dx = inf_norm(&s);
        let x_scale = 1.0 + inf_norm(&x_new);
        hess.update(&s, &y);
        x = x_new;
        fx = f_new;
        g = g_new;
        if df <= opts.tolerance * (1.0 + fx.abs()) && dx <= opts.tolerance.sqrt() * x_scale {
            converged = true;
            break;
        }
    }

    Minimum {
        x,
        value: fx,
        initial_value,
        iterations,
        converged,
    }
}
