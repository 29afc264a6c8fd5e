//! Local maximizers used by the pulse search: L-BFGS with numerical
//! gradients for fast descent, Nelder-Mead for derivative-free polishing
//! (the confinement objectives lose gradient accuracy near their optima,
//! where out-of-band energy underflows the finite-difference step), and an
//! augmented-Lagrangian wrapper for equality constraints.

/// Options for the L-BFGS stage.
#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub history: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
    /// Central-difference step.
    pub fd_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            history: 8,
            grad_tol: 1e-10,
            f_tol: 1e-13,
            fd_step: 1e-6,
        }
    }
}

/// Central-difference gradient.
pub fn numerical_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
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

/// Maximize `f` from `x0` with L-BFGS (two-loop recursion, backtracking
/// Armijo line search). Returns the best point and value seen.
pub fn lbfgs_maximize(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], opts: &LbfgsOptions) -> (Vec<f64>, f64) {
    let n = x0.len();
    if n == 0 {
        return (Vec::new(), f(x0));
    }
    let neg = |x: &[f64]| -f(x);
    let mut x = x0.to_vec();
    let mut fx = neg(&x);
    let mut g = numerical_gradient(&neg, &x, opts.fd_step);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    for _ in 0..opts.max_iters {
        let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if gnorm < opts.grad_tol {
            break;
        }
        // two-loop recursion for the search direction
        let mut q = g.clone();
        let mut alphas = vec![0.0; s_hist.len()];
        for i in (0..s_hist.len()).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &q);
            alphas[i] = a;
            axpy(&mut q, -a, &y_hist[i]);
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, y) / dot(y, y).max(1e-300);
            for v in q.iter_mut() {
                *v *= gamma;
            }
        }
        for i in 0..s_hist.len() {
            let b = rho_hist[i] * dot(&y_hist[i], &q);
            axpy(&mut q, alphas[i] - b, &s_hist[i]);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut dg = dot(&dir, &g);
        if dg >= 0.0 {
            // not a descent direction; fall back to steepest descent
            dir = g.iter().map(|v| -v).collect();
            dg = dot(&dir, &g);
        }

        // backtracking Armijo
        let mut step = 1.0;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = neg(&x_new);
            if f_new <= fx + 1e-4 * step * dg {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || (fx - f_new).abs() <= opts.f_tol * (1.0 + fx.abs()) {
            if accepted {
                x = x_new;
                fx = f_new;
            }
            break;
        }
        let g_new = numerical_gradient(&neg, &x_new, opts.fd_step);
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if s_hist.len() == opts.history {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(y);
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    (x, -fx)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Options for the Nelder-Mead stage.
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    /// Initial simplex edge length.
    pub init_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            x_tol: 1e-11,
            f_tol: 1e-12,
            init_step: 0.05,
        }
    }
}

/// Maximize `f` with the Nelder-Mead simplex from `x0`.
pub fn nelder_mead_maximize(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    if n == 0 {
        return (Vec::new(), f(x0));
    }
    let neg = |x: &[f64]| -f(x);
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        neg(x)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.init_step;
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    while evals < opts.max_evals {
        // order ascending (minimizing)
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap());
        let reorder: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let fre: Vec<f64> = idx.iter().map(|&i| fvals[i]).collect();
        simplex = reorder;
        fvals = fre;

        let spread = fvals[n] - fvals[0];
        let xspread = (0..n)
            .map(|j| {
                simplex
                    .iter()
                    .map(|v| v[j])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    })
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max);
        if spread < opts.f_tol * (1.0 + fvals[0].abs()) && xspread < opts.x_tol {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflect: Vec<f64> = (0..n).map(|j| centroid[j] + (centroid[j] - worst[j])).collect();
        let fr = eval(&reflect, &mut evals);

        if fr < fvals[0] {
            let expand: Vec<f64> = (0..n)
                .map(|j| centroid[j] + 2.0 * (centroid[j] - worst[j]))
                .collect();
            let fe = eval(&expand, &mut evals);
            if fe < fr {
                simplex[n] = expand;
                fvals[n] = fe;
            } else {
                simplex[n] = reflect;
                fvals[n] = fr;
            }
        } else if fr < fvals[n - 1] {
            simplex[n] = reflect;
            fvals[n] = fr;
        } else {
            let contract: Vec<f64> = if fr < fvals[n] {
                (0..n).map(|j| centroid[j] + 0.5 * (reflect[j] - centroid[j])).collect()
            } else {
                (0..n).map(|j| centroid[j] + 0.5 * (worst[j] - centroid[j])).collect()
            };
            let fc = eval(&contract, &mut evals);
            if fc < fvals[n].min(fr) {
                simplex[n] = contract;
                fvals[n] = fc;
            } else {
                // shrink toward the best vertex
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    fvals[i] = eval(&simplex[i].clone(), &mut evals);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if fvals[i] < fvals[best] {
            best = i;
        }
    }
    (simplex[best].clone(), -fvals[best])
}

/// Result of a constrained maximization.
#[derive(Debug, Clone)]
pub struct ConstrainedResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_residual: f64,
}

/// Options for the augmented-Lagrangian outer loop.
#[derive(Debug, Clone)]
pub struct AugLagOptions {
    pub outer_iters: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub residual_tol: f64,
    pub lbfgs: LbfgsOptions,
    pub polish: NelderMeadOptions,
}

impl Default for AugLagOptions {
    fn default() -> Self {
        Self {
            outer_iters: 12,
            initial_penalty: 10.0,
            penalty_growth: 4.0,
            residual_tol: 1e-9,
            lbfgs: LbfgsOptions::default(),
            polish: NelderMeadOptions {
                max_evals: 4000,
                ..NelderMeadOptions::default()
            },
        }
    }
}

/// Maximize `f(x)` subject to `constraints(x) == 0` (componentwise) with the
/// method of multipliers. When the constraint vector is empty this reduces to
/// unconstrained maximization (L-BFGS + Nelder-Mead polish).
pub fn maximize_with_equality_constraints(
    f: &dyn Fn(&[f64]) -> f64,
    constraints: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    opts: &AugLagOptions,
) -> ConstrainedResult {
    let c0 = constraints(x0);
    if c0.is_empty() {
        let (x1, _) = lbfgs_maximize(f, x0, &opts.lbfgs);
        let (x2, v2) = nelder_mead_maximize(f, &x1, &opts.polish);
        return ConstrainedResult {
            x: x2,
            objective: v2,
            max_residual: 0.0,
        };
    }

    let mut lambda = vec![0.0; c0.len()];
    let mut penalty = opts.initial_penalty;
    let mut x = x0.to_vec();
    let mut prev_viol = f64::INFINITY;
    for _ in 0..opts.outer_iters {
        let lam = lambda.clone();
        let pen = penalty;
        let merit = |xx: &[f64]| -> f64 {
            let c = constraints(xx);
            let mut quad = 0.0;
            let mut lin = 0.0;
            for (ci, li) in c.iter().zip(&lam) {
                quad += ci * ci;
                lin += li * ci;
            }
            f(xx) - lin - 0.5 * pen * quad
        };
        let (x1, _) = lbfgs_maximize(&merit, &x, &opts.lbfgs);
        let (x2, _) = nelder_mead_maximize(&merit, &x1, &opts.polish);
        x = x2;
        let c = constraints(&x);
        let viol = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (li, ci) in lambda.iter_mut().zip(&c) {
            *li += penalty * ci;
        }
        if viol <= opts.residual_tol {
            break;
        }
        if viol > 0.5 * prev_viol {
            penalty *= opts.penalty_growth;
        }
        prev_viol = viol;
    }
    let c = constraints(&x);
    let max_residual = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    ConstrainedResult {
        objective: f(&x),
        x,
        max_residual,
    }
}
