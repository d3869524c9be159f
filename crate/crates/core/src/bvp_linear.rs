//! Linear boundary/initial value problems solved by differentiation-matrix
//! collocation with boundary-condition row replacement.
//!
//! The collocation system Σ_k c_k(x_i)·(W^(k) y)_i = f(x_i) is assembled on
//! the full grid, then one full row per boundary condition is replaced:
//! conditions at the left endpoint occupy rows 0, 1, … (value first, then
//! ascending derivative order) and conditions at the right endpoint occupy
//! the bottom rows mirror-wise (value in the last row).

use std::collections::BTreeMap;

use crate::chebgrid::Grid;
use crate::diffmat::{first_derivative_explicit, higher_order};
use crate::expr::{evaluate, max_y_symbol, EvalContext, Expr};
use crate::linsys::{lu_factor, DenseMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    /// Left endpoint of the domain.
    A,
    /// Right endpoint of the domain.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCondition {
    pub side: Side,
    /// 0 constrains the value itself, k constrains the k-th derivative.
    pub derivative_order: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProblem {
    /// Highest derivative order m, 1..=4.
    pub order: usize,
    /// Coefficient expression for each derivative order 0..=m that appears.
    pub coefficients: BTreeMap<usize, Expr>,
    /// Right-hand side f(x, eps).
    pub rhs: Expr,
    pub domain: (f64, f64),
    pub epsilon: f64,
    /// Exactly `order` conditions, one row replacement each.
    pub conditions: Vec<BoundaryCondition>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub grid: Grid,
    /// Nodal solution values, ascending-node order.
    pub values: Vec<f64>,
    /// ∞-norm residual of the replaced system at the returned values.
    pub residual_inf: f64,
    /// ∞-norm condition estimate of the replaced system matrix.
    pub condition_estimate: f64,
}

/// Shared validation of boundary-condition sets: count must equal the
/// problem order, orders must stay below it, and (side, order) pairs must be
/// unique.
pub(crate) fn validate_conditions(order: usize, conditions: &[BoundaryCondition]) -> Result<()> {
    if conditions.len() != order {
        return Err(Error::InvalidProblem(format!(
            "an order-{order} problem needs exactly {order} conditions, got {}",
            conditions.len()
        )));
    }
    for c in conditions {
        if c.derivative_order >= order {
            return Err(Error::InvalidProblem(format!(
                "condition on derivative {} exceeds problem order {order}",
                c.derivative_order
            )));
        }
        if !c.value.is_finite() {
            return Err(Error::InvalidProblem(
                "condition value must be finite".to_string(),
            ));
        }
    }
    let mut pairs: Vec<(Side, usize)> = conditions
        .iter()
        .map(|c| (c.side, c.derivative_order))
        .collect();
    pairs.sort();
    pairs.dedup();
    if pairs.len() != conditions.len() {
        return Err(Error::InvalidProblem(
            "duplicate (side, derivative-order) condition".to_string(),
        ));
    }
    Ok(())
}

pub(crate) fn validate_shape(order: usize, domain: (f64, f64), epsilon: f64) -> Result<()> {
    if !(1..=4).contains(&order) {
        return Err(Error::InvalidProblem(format!(
            "derivative order must be 1..=4, got {order}"
        )));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidProblem(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let (a, b) = domain;
    if !a.is_finite() || !b.is_finite() || !(a < b) {
        return Err(Error::InvalidProblem(format!(
            "domain must be a finite interval with a < b, got ({a}, {b})"
        )));
    }
    Ok(())
}

impl LinearProblem {
    pub fn validate(&self) -> Result<()> {
        validate_shape(self.order, self.domain, self.epsilon)?;
        validate_conditions(self.order, &self.conditions)?;
        for (&k, e) in &self.coefficients {
            if k > self.order {
                return Err(Error::InvalidProblem(format!(
                    "coefficient for derivative {k} exceeds problem order {}",
                    self.order
                )));
            }
            if max_y_symbol(e).is_some() {
                return Err(Error::InvalidProblem(format!(
                    "coefficient for derivative {k} must depend only on x and eps"
                )));
            }
        }
        if max_y_symbol(&self.rhs).is_some() {
            return Err(Error::InvalidProblem(
                "right-hand side must depend only on x and eps".to_string(),
            ));
        }
        Ok(())
    }
}

/// Rows each condition replaces: left-side conditions from the top (row =
/// rank in ascending derivative order), right-side conditions from the
/// bottom (value condition in the last row, then upward).
pub(crate) fn condition_rows(
    n_points: usize,
    conditions: &[BoundaryCondition],
) -> Vec<(usize, BoundaryCondition)> {
    let mut a_side: Vec<BoundaryCondition> = conditions
        .iter()
        .copied()
        .filter(|c| c.side == Side::A)
        .collect();
    let mut b_side: Vec<BoundaryCondition> = conditions
        .iter()
        .copied()
        .filter(|c| c.side == Side::B)
        .collect();
    a_side.sort_by_key(|c| c.derivative_order);
    b_side.sort_by_key(|c| c.derivative_order);
    assert!(
        a_side.len() + b_side.len() <= n_points,
        "more conditions than grid rows"
    );
    let mut placed = Vec::with_capacity(conditions.len());
    for (idx, c) in a_side.into_iter().enumerate() {
        placed.push((idx, c));
    }
    for (idx, c) in b_side.into_iter().enumerate() {
        placed.push((n_points - 1 - idx, c));
    }
    placed
}

/// Derivative matrices W^(1)..=W^(order) for a grid, index k−1 holding order k.
pub(crate) fn derivative_stack(g: &Grid, order: usize) -> Vec<DenseMatrix> {
    let d1 = first_derivative_explicit(g);
    let mut stack = vec![d1.weights.clone()];
    for k in 2..=order {
        stack.push(
            higher_order(&d1, k)
                .expect("orders 2..=4 are valid")
                .weights,
        );
    }
    stack
}

pub(crate) fn eval_at_node(e: &Expr, x: f64, eps: f64, node: usize) -> Result<f64> {
    let ctx = EvalContext::new().with_x(x).with_eps(eps);
    evaluate(e, &ctx).map_err(|err| Error::EvalAtNode {
        node,
        source: Box::new(err),
    })
}

/// Collocation matrix and right-hand side on the grid, before any boundary
/// rows are replaced.
pub fn assemble(p: &LinearProblem, g: &Grid) -> Result<(DenseMatrix, Vec<f64>)> {
    if g.domain != p.domain {
        return Err(Error::InvalidProblem(format!(
            "grid domain ({}, {}) differs from problem domain ({}, {})",
            g.domain.0, g.domain.1, p.domain.0, p.domain.1
        )));
    }
    let n = g.n_points;
    if n < p.order + 1 {
        return Err(Error::InvalidProblem(format!(
            "order-{} problem needs at least {} grid points, got {n}",
            p.order,
            p.order + 1
        )));
    }
    let stack = derivative_stack(g, p.order);
    let mut a = DenseMatrix::new(n, n);
    for (&k, coeff) in &p.coefficients {
        for i in 0..n {
            let c = eval_at_node(coeff, g.nodes[i], p.epsilon, i)?;
            if k == 0 {
                a.set(i, i, a.get(i, i) + c);
            } else {
                let w = &stack[k - 1];
                for j in 0..n {
                    a.set(i, j, c.mul_add(w.get(i, j), a.get(i, j)));
                }
            }
        }
    }
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        rhs.push(eval_at_node(&p.rhs, g.nodes[i], p.epsilon, i)?);
    }
    Ok((a, rhs))
}

/// Replace one full row per boundary condition. Value conditions become unit
/// rows; derivative conditions become the boundary node's row of W^(k).
pub fn apply_conditions(
    system: (DenseMatrix, Vec<f64>),
    p: &LinearProblem,
    g: &Grid,
) -> Result<(DenseMatrix, Vec<f64>)> {
    let (mut a, mut rhs) = system;
    let n = g.n_points;
    let stack = derivative_stack(g, p.order);
    for (row, cond) in condition_rows(n, &p.conditions) {
        let boundary = match cond.side {
            Side::A => 0,
            Side::B => n - 1,
        };
        if cond.derivative_order == 0 {
            for j in 0..n {
                a.set(row, j, if j == boundary { 1.0 } else { 0.0 });
            }
        } else {
            let w = &stack[cond.derivative_order - 1];
            for j in 0..n {
                a.set(row, j, w.get(boundary, j));
            }
        }
        rhs[row] = cond.value;
    }
    Ok((a, rhs))
}

/// End-to-end linear solve: grid construction, assembly, row replacement,
/// LU factorization, and one refined solve, with diagnostics.
pub fn solve_linear(p: &LinearProblem, n_points: usize) -> Result<Solution> {
    p.validate()?;
    if n_points < p.order + 1 {
        return Err(Error::InvalidProblem(format!(
            "order-{} problem needs at least {} grid points, got {n_points}",
            p.order,
            p.order + 1
        )));
    }
    let grid = Grid::on_interval(n_points, p.domain.0, p.domain.1)?;
    let system = assemble(p, &grid)?;
    let (a, rhs) = apply_conditions(system, p, &grid)?;
    let factors = lu_factor(&a)?;
    let values = factors.solve_refined(&rhs);
    let residual_inf = factors.residual_inf(&values, &rhs);
    let condition_estimate = factors.condition_estimate();
    Ok(Solution {
        grid,
        values,
        residual_inf,
        condition_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn problem(
        order: usize,
        coeffs: &[(usize, &str)],
        rhs: &str,
        domain: (f64, f64),
        epsilon: f64,
        conditions: Vec<BoundaryCondition>,
    ) -> LinearProblem {
        LinearProblem {
            order,
            coefficients: coeffs
                .iter()
                .map(|(k, s)| (*k, parse(s).unwrap()))
                .collect(),
            rhs: parse(rhs).unwrap(),
            domain,
            epsilon,
            conditions,
        }
    }

    fn cond(side: Side, derivative_order: usize, value: f64) -> BoundaryCondition {
        BoundaryCondition {
            side,
            derivative_order,
            value,
        }
    }

    #[test]
    fn third_derivative_zero_yields_identity_solution() {
        let p = problem(
            3,
            &[(3, "1")],
            "0",
            (0.0, 1.0),
            1.0,
            vec![
                cond(Side::A, 0, 0.0),
                cond(Side::A, 1, 1.0),
                cond(Side::B, 0, 1.0),
            ],
        );
        for n in [4usize, 5, 8, 16] {
            let s = solve_linear(&p, n).unwrap();
            for (y, x) in s.values.iter().zip(&s.grid.nodes) {
                assert!((y - x).abs() <= 1e-12, "n={n}: y({x})={y}");
            }
        }
    }

    #[test]
    fn quadratic_problem_reproduces_square() {
        let p = problem(
            2,
            &[(2, "1")],
            "2",
            (0.0, 1.0),
            1.0,
            vec![cond(Side::A, 0, 0.0), cond(Side::B, 0, 1.0)],
        );
        let s = solve_linear(&p, 7).unwrap();
        for (y, x) in s.values.iter().zip(&s.grid.nodes) {
            assert!((y - x * x).abs() <= 1e-10 * (1.0 + x * x));
        }
    }

    #[test]
    fn quartic_problem_reproduces_fourth_power() {
        let p = problem(
            4,
            &[(4, "1")],
            "24",
            (0.0, 1.0),
            1.0,
            vec![
                cond(Side::A, 0, 0.0),
                cond(Side::A, 1, 0.0),
                cond(Side::A, 2, 0.0),
                cond(Side::B, 0, 1.0),
            ],
        );
        let s = solve_linear(&p, 9).unwrap();
        for (y, x) in s.values.iter().zip(&s.grid.nodes) {
            assert!((y - x.powi(4)).abs() <= 1e-10);
        }
    }

    #[test]
    fn first_order_problem_reproduces_cube() {
        let p = problem(
            1,
            &[(1, "1")],
            "3*x^2",
            (0.0, 1.0),
            1.0,
            vec![cond(Side::A, 0, 0.0)],
        );
        let s = solve_linear(&p, 8).unwrap();
        for (y, x) in s.values.iter().zip(&s.grid.nodes) {
            assert!((y - x.powi(3)).abs() <= 1e-10);
        }
    }

    #[test]
    fn boundary_conditions_are_satisfied_by_the_solution() {
        let p = problem(
            3,
            &[(3, "eps"), (1, "1+x/2"), (0, "-1/2")],
            "0",
            (0.0, 1.0),
            0.01,
            vec![
                cond(Side::A, 0, 0.6),
                cond(Side::A, 1, 0.23),
                cond(Side::B, 0, 0.9),
            ],
        );
        let s = solve_linear(&p, 20).unwrap();
        let n = s.grid.n_points;
        assert!((s.values[0] - 0.6).abs() <= 1e-9 * 1.6);
        assert!((s.values[n - 1] - 0.9).abs() <= 1e-9 * 1.9);
        let d1 = first_derivative_explicit(&s.grid);
        let slopes = d1.weights.mul_vec(&s.values);
        assert!((slopes[0] - 0.23).abs() <= 1e-9 * 1.23);
    }

    #[test]
    fn condition_rows_follow_the_placement_rule() {
        // Mixed set from a fourth-order problem: left value, left second
        // derivative, right value, right second derivative.
        let conds = vec![
            cond(Side::B, 0, 1.0),
            cond(Side::A, 2, -1.0),
            cond(Side::B, 2, -1.0),
            cond(Side::A, 0, 1.0),
        ];
        let placed = condition_rows(10, &conds);
        let find = |side, k| {
            placed
                .iter()
                .find(|(_, c)| c.side == side && c.derivative_order == k)
                .unwrap()
                .0
        };
        assert_eq!(find(Side::A, 0), 0);
        assert_eq!(find(Side::A, 2), 1);
        assert_eq!(find(Side::B, 0), 9);
        assert_eq!(find(Side::B, 2), 8);
    }

    #[test]
    fn replaced_rows_are_unit_and_derivative_rows() {
        let p = problem(
            3,
            &[(3, "eps"), (1, "4"), (0, "-4")],
            "x^2",
            (0.0, 1.0),
            0.1,
            vec![
                cond(Side::A, 0, 0.5),
                cond(Side::A, 1, 0.5),
                cond(Side::B, 0, 1.47),
            ],
        );
        let g = Grid::on_interval(8, 0.0, 1.0).unwrap();
        let system = assemble(&p, &g).unwrap();
        let (a, rhs) = apply_conditions(system, &p, &g).unwrap();
        // Row 0: unit row at node 0.
        for j in 0..8 {
            assert_eq!(a.get(0, j), if j == 0 { 1.0 } else { 0.0 });
        }
        assert_eq!(rhs[0], 0.5);
        // Row 1: first-derivative row of node 0.
        let d1 = first_derivative_explicit(&g);
        for j in 0..8 {
            assert_eq!(a.get(1, j), d1.weights.get(0, j));
        }
        assert_eq!(rhs[1], 0.5);
        // Last row: unit row at node 7.
        for j in 0..8 {
            assert_eq!(a.get(7, j), if j == 7 { 1.0 } else { 0.0 });
        }
        assert_eq!(rhs[7], 1.47);
    }

    #[test]
    fn pre_replacement_matrix_is_singular() {
        let p = problem(
            3,
            &[(3, "eps")],
            "0",
            (0.0, 1.0),
            0.1,
            vec![
                cond(Side::A, 0, 0.0),
                cond(Side::A, 1, 0.0),
                cond(Side::B, 0, 0.0),
            ],
        );
        let g = Grid::on_interval(10, 0.0, 1.0).unwrap();
        let (a, _) = assemble(&p, &g).unwrap();
        assert!(matches!(
            lu_factor(&a),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn validation_rejects_malformed_problems() {
        let base = problem(
            2,
            &[(2, "1")],
            "0",
            (0.0, 1.0),
            0.1,
            vec![cond(Side::A, 0, 0.0), cond(Side::B, 0, 1.0)],
        );

        let mut p = base.clone();
        p.order = 5;
        assert!(p.validate().is_err());

        let mut p = base.clone();
        p.epsilon = -1.0;
        assert!(p.validate().is_err());

        let mut p = base.clone();
        p.domain = (1.0, 0.0);
        assert!(p.validate().is_err());

        let mut p = base.clone();
        p.conditions.pop();
        assert!(p.validate().is_err());

        let mut p = base.clone();
        p.conditions[1] = cond(Side::A, 0, 1.0);
        assert!(p.validate().is_err());

        let mut p = base.clone();
        p.conditions[1] = cond(Side::B, 3, 1.0);
        assert!(p.validate().is_err());

        let mut p = base.clone();
        p.coefficients.insert(3, parse("1").unwrap());
        assert!(p.validate().is_err());

        let mut p = base.clone();
        p.rhs = parse("y0").unwrap();
        assert!(p.validate().is_err());
    }

    #[test]
    fn evaluation_failure_reports_the_node() {
        // 1/x blows up at the left endpoint node x=0.
        let p = problem(
            2,
            &[(2, "1"), (0, "1/x")],
            "0",
            (0.0, 1.0),
            0.1,
            vec![cond(Side::A, 0, 0.0), cond(Side::B, 0, 1.0)],
        );
        let g = Grid::on_interval(6, 0.0, 1.0).unwrap();
        match assemble(&p, &g) {
            Err(Error::EvalAtNode { node, .. }) => assert_eq!(node, 0),
            other => panic!("expected node-tagged evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn grid_domain_mismatch_is_rejected() {
        let p = problem(
            2,
            &[(2, "1")],
            "0",
            (0.0, 1.0),
            0.1,
            vec![cond(Side::A, 0, 0.0), cond(Side::B, 0, 1.0)],
        );
        let g = Grid::on_interval(6, 0.0, 2.0).unwrap();
        assert!(assemble(&p, &g).is_err());
    }

    #[test]
    fn too_few_points_is_rejected() {
        let p = problem(
            3,
            &[(3, "1")],
            "0",
            (0.0, 1.0),
            1.0,
            vec![
                cond(Side::A, 0, 0.0),
                cond(Side::A, 1, 1.0),
                cond(Side::B, 0, 1.0),
            ],
        );
        assert!(solve_linear(&p, 3).is_err());
        assert!(solve_linear(&p, 4).is_ok());
    }
}
