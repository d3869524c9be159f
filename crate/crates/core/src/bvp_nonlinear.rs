//! Nonlinear collocated problems solved by damped Newton iteration with
//! analytic Jacobians obtained by symbolic differentiation of the residual.
//!
//! The residual expression G(x, eps, y0..ym) is collocated exactly like the
//! linear assembly, with the same boundary-row replacement; each Newton step
//! solves J·Δ = −R and backtracks by halving until the residual ∞-norm
//! strictly decreases. When no step length improves the residual the
//! iteration stops and reports non-convergence rather than wandering.

use crate::bvp_linear::{
    condition_rows, derivative_stack, validate_conditions, validate_shape, BoundaryCondition, Side,
    Solution,
};
use crate::chebgrid::Grid;
use crate::expr::{differentiate, evaluate, max_y_symbol, EvalContext, Expr, Symbol};
use crate::linsys::{dot2, lu_factor, DenseMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct NonlinearProblem {
    /// Highest derivative order m, 1..=4.
    pub order: usize,
    /// G(x, eps, y0..ym); the equation solved is G = 0 at interior rows.
    pub residual: Expr,
    pub domain: (f64, f64),
    pub epsilon: f64,
    pub conditions: Vec<BoundaryCondition>,
}

impl NonlinearProblem {
    pub fn validate(&self) -> Result<()> {
        validate_shape(self.order, self.domain, self.epsilon)?;
        validate_conditions(self.order, &self.conditions)?;
        if let Some(k) = max_y_symbol(&self.residual) {
            if k as usize > self.order {
                return Err(Error::InvalidProblem(format!(
                    "residual references y{k} but the problem order is {}",
                    self.order
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Residual ∞-norm below which the iteration stops as converged.
    pub tol: f64,
    /// Maximum accepted Newton steps.
    pub max_iter: usize,
    /// Maximum step-halvings per iteration before declaring a stall.
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> NewtonConfig {
        NewtonConfig {
            tol: 1e-12,
            max_iter: 50,
            max_halvings: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    /// Number of accepted steps.
    pub iterations: usize,
    /// Residual ∞-norm at the returned values, evaluated afresh.
    pub final_residual: f64,
    /// Residual ∞-norm at the initial guess and after each accepted step.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Nodal derivative values (W^k y for k = 0..=order) with compensated row
/// products, so residuals near the rounding floor are not polluted by
/// summation error.
fn derivative_values(stack: &[DenseMatrix], y: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = y.len();
    let mut ds = Vec::with_capacity(order + 1);
    ds.push(y.to_vec());
    for w in stack.iter().take(order) {
        let mut d = Vec::with_capacity(n);
        for i in 0..n {
            d.push(dot2(w.row(i), y));
        }
        ds.push(d);
    }
    ds
}

fn residual_with_stack(
    p: &NonlinearProblem,
    g: &Grid,
    stack: &[DenseMatrix],
    y: &[f64],
) -> Result<Vec<f64>> {
    let n = g.n_points;
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let ds = derivative_values(stack, y, p.order);
    let mut r = Vec::with_capacity(n);
    for i in 0..n {
        let mut ctx = EvalContext::new().with_x(g.nodes[i]).with_eps(p.epsilon);
        for k in 0..=p.order {
            ctx = ctx.with_y(k, ds[k][i]);
        }
        let v = evaluate(&p.residual, &ctx).map_err(|err| Error::EvalAtNode {
            node: i,
            source: Box::new(err),
        })?;
        r.push(v);
    }
    for (row, cond) in condition_rows(n, &p.conditions) {
        let boundary = match cond.side {
            Side::A => 0,
            Side::B => n - 1,
        };
        r[row] = ds[cond.derivative_order][boundary] - cond.value;
    }
    Ok(r)
}

/// Collocated residual at the given nodal values: G rows at interior nodes,
/// condition rows (value or derivative minus target) at replaced positions.
pub fn residual(p: &NonlinearProblem, g: &Grid, y: &[f64]) -> Result<Vec<f64>> {
    let stack = derivative_stack(g, p.order);
    residual_with_stack(p, g, &stack, y)
}

fn jacobian_with_stack(
    p: &NonlinearProblem,
    g: &Grid,
    stack: &[DenseMatrix],
    partials: &[Expr],
    y: &[f64],
) -> Result<DenseMatrix> {
    let n = g.n_points;
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let ds = derivative_values(stack, y, p.order);
    let mut j = DenseMatrix::new(n, n);
    for i in 0..n {
        let mut ctx = EvalContext::new().with_x(g.nodes[i]).with_eps(p.epsilon);
        for k in 0..=p.order {
            ctx = ctx.with_y(k, ds[k][i]);
        }
        for (k, partial) in partials.iter().enumerate() {
            let gk = evaluate(partial, &ctx).map_err(|err| Error::EvalAtNode {
                node: i,
                source: Box::new(err),
            })?;
            if gk == 0.0 {
                continue;
            }
            if k == 0 {
                j.set(i, i, j.get(i, i) + gk);
            } else {
                let w = &stack[k - 1];
                for col in 0..n {
                    j.set(i, col, gk.mul_add(w.get(i, col), j.get(i, col)));
                }
            }
        }
    }
    for (row, cond) in condition_rows(n, &p.conditions) {
        let boundary = match cond.side {
            Side::A => 0,
            Side::B => n - 1,
        };
        if cond.derivative_order == 0 {
            for col in 0..n {
                j.set(row, col, if col == boundary { 1.0 } else { 0.0 });
            }
        } else {
            let w = &stack[cond.derivative_order - 1];
            for col in 0..n {
                j.set(row, col, w.get(boundary, col));
            }
        }
    }
    Ok(j)
}

fn residual_partials(p: &NonlinearProblem) -> Vec<Expr> {
    (0..=p.order)
        .map(|k| differentiate(&p.residual, Symbol::Y(k as u8)))
        .collect()
}

/// Analytic Jacobian of [`residual`]: Σ_k diag(∂G/∂y_k)·W^(k) at interior
/// rows, constant condition rows at replaced positions.
pub fn jacobian(p: &NonlinearProblem, g: &Grid, y: &[f64]) -> Result<DenseMatrix> {
    let stack = derivative_stack(g, p.order);
    let partials = residual_partials(p);
    jacobian_with_stack(p, g, &stack, &partials, y)
}

/// Straight-line initial guess from the value conditions: through both
/// endpoint values when present, value plus slope when a first-derivative
/// condition accompanies a single value, constant for a lone value, zero
/// otherwise.
pub(crate) fn initial_guess(p: &NonlinearProblem, g: &Grid) -> Vec<f64> {
    let (a, b) = p.domain;
    let value_at = |side: Side| {
        p.conditions
            .iter()
            .find(|c| c.side == side && c.derivative_order == 0)
            .map(|c| c.value)
    };
    let slope = p
        .conditions
        .iter()
        .find(|c| c.derivative_order == 1)
        .map(|c| c.value);
    match (value_at(Side::A), value_at(Side::B)) {
        (Some(va), Some(vb)) => g
            .nodes
            .iter()
            .map(|x| va + (vb - va) * (x - a) / (b - a))
            .collect(),
        (Some(va), None) => {
            let s = slope.unwrap_or(0.0);
            g.nodes.iter().map(|x| va + s * (x - a)).collect()
        }
        (None, Some(vb)) => {
            let s = slope.unwrap_or(0.0);
            g.nodes.iter().map(|x| vb + s * (x - b)).collect()
        }
        (None, None) => vec![0.0; g.n_points],
    }
}

/// Damped Newton iteration on the collocated residual. Returns the solution
/// and a report; non-convergence (stall or iteration cap) is reported via
/// `converged = false`, not an error. Errors are reserved for structural
/// failures: invalid problems, singular Jacobians, unevaluable residuals at
/// an accepted iterate.
pub fn newton_solve(
    p: &NonlinearProblem,
    n_points: usize,
    cfg: &NewtonConfig,
) -> Result<(Solution, NewtonReport)> {
    p.validate()?;
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::InvalidProblem(
            "Newton tolerance must be positive and max iterations at least 1".to_string(),
        ));
    }
    if n_points < p.order + 1 {
        return Err(Error::InvalidProblem(format!(
            "order-{} problem needs at least {} grid points, got {n_points}",
            p.order,
            p.order + 1
        )));
    }
    let grid = Grid::on_interval(n_points, p.domain.0, p.domain.1)?;
    let stack = derivative_stack(&grid, p.order);
    let partials = residual_partials(p);

    let mut y = initial_guess(p, &grid);
    let mut r = residual_with_stack(p, &grid, &stack, &y)?;
    let mut rnorm = norm_inf(&r);
    let mut history = vec![rnorm];
    let mut iterations = 0;

    while rnorm > cfg.tol && iterations < cfg.max_iter {
        let j = jacobian_with_stack(p, &grid, &stack, &partials, &y)?;
        let factors = lu_factor(&j)?;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = factors.solve_refined(&neg_r);

        let mut lambda = 1.0_f64;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = y
                .iter()
                .zip(&delta)
                .map(|(yi, di)| yi + lambda * di)
                .collect();
            // A trial whose residual cannot be evaluated (domain violation)
            // is treated like a non-improving step and the step is shortened.
            if let Ok(tr) = residual_with_stack(p, &grid, &stack, &trial) {
                let tn = norm_inf(&tr);
                if tn.is_finite() && tn < rnorm {
                    accepted = Some((trial, tr, tn));
                    break;
                }
            }
            lambda /= 2.0;
        }
        match accepted {
            Some((ynew, rnew, tnorm)) => {
                y = ynew;
                r = rnew;
                rnorm = tnorm;
                iterations += 1;
                history.push(rnorm);
            }
            // Stall: no step length improves the residual, typically because
            // the iterate sits on the arithmetic floor of the discretization.
            None => break,
        }
    }

    // Independent certificate: re-evaluate through the public entry point.
    let certificate = residual(p, &grid, &y)?;
    let final_residual = norm_inf(&certificate);
    let converged = final_residual <= cfg.tol;

    let condition_estimate = match jacobian_with_stack(p, &grid, &stack, &partials, &y)
        .and_then(|j| lu_factor(&j))
    {
        Ok(f) => f.condition_estimate(),
        Err(_) => f64::INFINITY,
    };

    Ok((
        Solution {
            grid,
            values: y,
            residual_inf: final_residual,
            condition_estimate,
        },
        NewtonReport {
            iterations,
            final_residual,
            residual_history: history,
            converged,
        },
    ))
}
