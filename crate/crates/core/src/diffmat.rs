//! Differentiation (weighting-coefficient) matrices on Chebyshev grids.
//!
//! Two independent order-1 constructions are provided — a closed-form
//! trigonometric formula and a Lagrange node-product formula — plus two
//! independent higher-order constructions (matrix power and a one-step
//! recurrence). Each pair cross-validates the other in the test suite.
//!
//! All returned matrices act on node values in ascending-node storage order
//! and carry the interval scaling, so `weights · f(nodes)` approximates the
//! derivative on the grid's own interval with no further conversion.

use crate::chebgrid::Grid;
use crate::linsys::DenseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct DiffMatrix {
    /// Derivative order, 1..=4.
    pub order: usize,
    /// n_points × n_points weighting coefficients, ascending-node indexing.
    pub weights: DenseMatrix,
    /// The grid the matrix differentiates on.
    pub grid: Grid,
}

/// Products K′(x_j) = Π_{k≠j} (x_j − x_k) of node differences.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    pub node_products: Vec<f64>,
}

/// Chebyshev expansion coefficients of a function sampled at the grid nodes,
/// in the normalized variable t = 2(x−a)/(b−a) − 1 which is ascending with x.
#[derive(Debug, Clone)]
pub struct ChebFit {
    pub coefficients: Vec<f64>,
    pub domain: (f64, f64),
}

/// Order-1 matrix from the closed-form trigonometric-node formula. The
/// formula is invariant under simultaneous index reversal, so it applies to
/// ascending storage unchanged; the interval factor `g.scale` is multiplied
/// in, making the result valid on mapped grids as well.
pub fn first_derivative_explicit(g: &Grid) -> DiffMatrix {
    let n = g.n_points;
    let m = n - 1;
    let xi = &g.canonical_nodes;
    let cbar = |i: usize| if i == 0 || i == m { 2.0 } else { 1.0 };
    let mut w = DenseMatrix::new(n, n);
    for i in 0..n {
        let mut row_sum = 0.0_f64;
        for j in 0..n {
            if j == i {
                continue;
            }
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let v = cbar(i) / cbar(j) * sign / (xi[i] - xi[j]);
            w.set(i, j, v);
            row_sum += v;
        }
        // Diagonal by negative sum: makes the null-vector property exact up
        // to one rounding of the sum, independent of the closed-form value.
        w.set(i, i, -row_sum);
    }
    if g.scale != 1.0 {
        for v in w.data.iter_mut() {
            *v *= g.scale;
        }
    }
    DiffMatrix {
        order: 1,
        weights: w,
        grid: g.clone(),
    }
}

/// Node-difference products for the Lagrange construction. Fails on the
/// first product that overflows, underflows to zero, or is otherwise
/// non-finite, carrying the offending node index.
pub fn lagrange_basis(g: &Grid) -> Result<LagrangeBasis> {
    let n = g.n_points;
    let mut node_products = Vec::with_capacity(n);
    for j in 0..n {
        let mut p = 1.0_f64;
        for k in 0..n {
            if k != j {
                p *= g.nodes[j] - g.nodes[k];
            }
        }
        if !p.is_finite() || p == 0.0 {
            return Err(Error::NonFiniteNodeProduct(j));
        }
        node_products.push(p);
    }
    Ok(LagrangeBasis { node_products })
}

/// Order-1 matrix from the Lagrange node-product formula, built directly on
/// the physical nodes (no separate scaling step).
pub fn first_derivative_lagrange(g: &Grid) -> Result<DiffMatrix> {
    let n = g.n_points;
    let basis = lagrange_basis(g)?;
    let kp = &basis.node_products;
    let mut w = DenseMatrix::new(n, n);
    for i in 0..n {
        let mut row_sum = 0.0_f64;
        for j in 0..n {
            if j == i {
                continue;
            }
            let v = kp[i] / ((g.nodes[i] - g.nodes[j]) * kp[j]);
            w.set(i, j, v);
            row_sum += v;
        }
        w.set(i, i, -row_sum);
    }
    Ok(DiffMatrix {
        order: 1,
        weights: w,
        grid: g.clone(),
    })
}

fn check_higher_order_args(d1: &DiffMatrix, order: usize) -> Result<()> {
    if d1.order != 1 {
        return Err(Error::InvalidOrder(d1.order));
    }
    if !(2..=4).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }
    Ok(())
}

/// Derivative matrix of the given order as the matrix power of the order-1
/// matrix. Since the order-1 matrix already carries the interval scaling,
/// the power carries scale^order automatically.
pub fn higher_order(d1: &DiffMatrix, order: usize) -> Result<DiffMatrix> {
    check_higher_order_args(d1, order)?;
    let mut w = d1.weights.clone();
    for _ in 1..order {
        w = w.matmul(&d1.weights);
    }
    Ok(DiffMatrix {
        order,
        weights: w,
        grid: d1.grid.clone(),
    })
}

/// Alternative higher-order construction by the one-step recurrence
/// w_ij^(n) = n·(w_ii^(n−1)·w_ij^(1) − w_ij^(n−1)/(x_i−x_j)) for j≠i, with
/// negative-sum diagonals. Operates on physical nodes, so the result is in
/// the same units as [`higher_order`].
pub fn higher_order_recurrence(d1: &DiffMatrix, order: usize) -> Result<DiffMatrix> {
    check_higher_order_args(d1, order)?;
    let n = d1.grid.n_points;
    let x = &d1.grid.nodes;
    let mut prev = d1.weights.clone();
    for ord in 2..=order {
        let mut next = DenseMatrix::new(n, n);
        for i in 0..n {
            let mut row_sum = 0.0_f64;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let v = ord as f64
                    * (prev.get(i, i) * d1.weights.get(i, j) - prev.get(i, j) / (x[i] - x[j]));
                next.set(i, j, v);
                row_sum += v;
            }
            next.set(i, i, -row_sum);
        }
        prev = next;
    }
    Ok(DiffMatrix {
        order,
        weights: prev,
        grid: d1.grid.clone(),
    })
}

/// Chebyshev coefficients of the sampled function via the discrete cosine
/// identity on the extrema grid: with classical indexing j (node cos(jπ/M)),
/// c_k = (2 / (M·c̄_k)) Σ″_j f_j cos(jkπ/M), where Σ″ halves the first and
/// last terms and c̄ = 2 at the ends. Ascending storage index k corresponds
/// to classical index M−k in the normalized variable, hence the reversal.
pub fn chebyshev_fit(samples: &[f64], g: &Grid) -> Result<ChebFit> {
    let n = g.n_points;
    if samples.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: samples.len(),
        });
    }
    let m = n - 1;
    let mf = m as f64;
    let pi = std::f64::consts::PI;
    let cbar = |k: usize| if k == 0 || k == m { 2.0 } else { 1.0 };
    let classical = |j: usize| samples[m - j];
    let mut coefficients = Vec::with_capacity(n);
    for k in 0..n {
        let mut s = 0.5 * classical(0);
        for j in 1..m {
            s += classical(j) * ((j * k) as f64 * pi / mf).cos();
        }
        s += 0.5 * classical(m) * (k as f64 * pi).cos();
        coefficients.push(2.0 * s / (mf * cbar(k)));
    }
    Ok(ChebFit {
        coefficients,
        domain: g.domain,
    })
}

impl ChebFit {
    /// Evaluate the fitted expansion at a physical abscissa by the Clenshaw
    /// recurrence in the normalized variable.
    pub fn evaluate(&self, x: f64) -> f64 {
        let (a, b) = self.domain;
        let t = 2.0 * (x - a) / (b - a) - 1.0;
        let c = &self.coefficients;
        let mut b1 = 0.0_f64;
        let mut b2 = 0.0_f64;
        for k in (1..c.len()).rev() {
            let next = 2.0 * t * b1 - b2 + c[k];
            b2 = b1;
            b1 = next;
        }
        c[0] + t * b1 - b2
    }
}

/// Row-major CSV dump with 17 significant digits per entry.
pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.n_rows {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebgrid::{gauss_lobatto, Grid};

    fn max_abs(m: &DenseMatrix) -> f64 {
        m.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn three_point_first_derivative_matches_hand_computation() {
        let g = gauss_lobatto(3).unwrap();
        let d = first_derivative_explicit(&g);
        let expected = [[-1.5, 2.0, -0.5], [-0.5, 0.0, 0.5], [0.5, -2.0, 1.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (d.weights.get(i, j) - expected[i][j]).abs() < 1e-14,
                    "({i},{j}): {} vs {}",
                    d.weights.get(i, j),
                    expected[i][j]
                );
            }
        }
    }

    #[test]
    fn corner_magnitude_follows_degree_formula() {
        for n in [3usize, 5, 12] {
            let m = (n - 1) as f64;
            let g = gauss_lobatto(n).unwrap();
            let d = first_derivative_explicit(&g);
            let expected = (2.0 * m * m + 1.0) / 6.0;
            assert!((d.weights.get(0, 0).abs() - expected).abs() < 1e-10);
            assert!((d.weights.get(n - 1, n - 1).abs() - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn two_point_lagrange_matrix_is_half_slope() {
        let g = gauss_lobatto(2).unwrap();
        let d = first_derivative_lagrange(&g).unwrap();
        for i in 0..2 {
            assert!((d.weights.get(i, 0) + 0.5).abs() < 1e-15);
            assert!((d.weights.get(i, 1) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn explicit_and_lagrange_constructions_agree() {
        for n in [5usize, 10, 20] {
            for (a, b) in [(-1.0, 1.0), (0.0, 1.0)] {
                let g = Grid::on_interval(n, a, b).unwrap();
                let de = first_derivative_explicit(&g);
                let dl = first_derivative_lagrange(&g).unwrap();
                let scale = max_abs(&de.weights);
                for i in 0..n {
                    for j in 0..n {
                        let diff = (de.weights.get(i, j) - dl.weights.get(i, j)).abs();
                        assert!(
                            diff <= 1e-10 * scale,
                            "n={n} [{a},{b}] ({i},{j}): diff {diff:.3e}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn row_sums_vanish_relative_to_row_magnitude() {
        let g = Grid::on_interval(30, 0.0, 1.0).unwrap();
        let d1 = first_derivative_explicit(&g);
        for order in 1..=4usize {
            let d = if order == 1 {
                d1.clone()
            } else {
                higher_order(&d1, order).unwrap()
            };
            for i in 0..g.n_points {
                let row = d.weights.row(i);
                let sum: f64 = row.iter().sum();
                let row_max = row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                assert!(
                    sum.abs() <= 1e-10 * row_max,
                    "order {order} row {i}: sum {sum:.3e} vs max {row_max:.3e}"
                );
            }
        }
    }

    #[test]
    fn canonical_first_derivative_is_skew_centrosymmetric() {
        let n = 12;
        let m = n - 1;
        let g = gauss_lobatto(n).unwrap();
        let d = first_derivative_explicit(&g);
        for i in 0..n {
            for j in 0..n {
                let v = d.weights.get(i, j);
                let mirrored = d.weights.get(m - i, m - j);
                assert!((v + mirrored).abs() <= 1e-12, "({i},{j}): {v} vs {mirrored}");
            }
        }
    }

    #[test]
    fn monomials_differentiate_exactly_up_to_grid_degree() {
        for n in [5usize, 9, 14, 20] {
            let g = Grid::on_interval(n, 0.0, 1.0).unwrap();
            let d1 = first_derivative_explicit(&g);
            for order in 1..=4usize {
                let d = if order == 1 {
                    d1.clone()
                } else {
                    higher_order(&d1, order).unwrap()
                };
                let tol = 1e-8 * (1.0 + d.weights.norm_inf());
                for k in 0..n {
                    let v: Vec<f64> = g.nodes.iter().map(|x| x.powi(k as i32)).collect();
                    let got = d.weights.mul_vec(&v);
                    for (i, &x) in g.nodes.iter().enumerate() {
                        let expected = if k < order {
                            0.0
                        } else {
                            // k!/(k-order)! · x^(k-order)
                            let mut c = 1.0_f64;
                            for f in (k - order + 1)..=k {
                                c *= f as f64;
                            }
                            c * x.powi((k - order) as i32)
                        };
                        assert!(
                            (got[i] - expected).abs() <= tol,
                            "n={n} order={order} k={k} i={i}: {} vs {expected}",
                            got[i]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn cubic_third_derivative_is_constant_six() {
        for (a, b) in [(-1.0, 1.0), (0.0, 1.0)] {
            let g = Grid::on_interval(10, a, b).unwrap();
            let d3 = higher_order(&first_derivative_explicit(&g), 3).unwrap();
            let v: Vec<f64> = g.nodes.iter().map(|x| x * x * x).collect();
            for y in d3.weights.mul_vec(&v) {
                assert!((y - 6.0).abs() <= 1e-9, "{y}");
            }
        }
    }

    #[test]
    fn power_and_recurrence_constructions_agree() {
        for n in [10usize, 20, 30] {
            for (a, b) in [(-1.0, 1.0), (0.0, 2.0)] {
                let g = Grid::on_interval(n, a, b).unwrap();
                let d1 = first_derivative_explicit(&g);
                for order in 2..=4usize {
                    let p = higher_order(&d1, order).unwrap();
                    let r = higher_order_recurrence(&d1, order).unwrap();
                    let scale = max_abs(&p.weights);
                    for i in 0..n {
                        for j in 0..n {
                            let diff = (p.weights.get(i, j) - r.weights.get(i, j)).abs();
                            assert!(
                                diff <= 1e-8 * scale,
                                "n={n} order={order} ({i},{j}): {diff:.3e} vs scale {scale:.3e}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn unit_interval_weights_are_exactly_twice_canonical() {
        let gc = gauss_lobatto(16).unwrap();
        let gm = Grid::on_interval(16, 0.0, 1.0).unwrap();
        let dc = first_derivative_explicit(&gc);
        let dm = first_derivative_explicit(&gm);
        for (c, m) in dc.weights.data.iter().zip(&dm.weights.data) {
            assert_eq!(2.0 * c, *m);
        }
        // Powers of an exactly rescaled matrix rescale exactly too, because
        // the factor is a power of two.
        let dc2 = higher_order(&dc, 2).unwrap();
        let dm2 = higher_order(&dm, 2).unwrap();
        for (c, m) in dc2.weights.data.iter().zip(&dm2.weights.data) {
            assert_eq!(4.0 * c, *m);
        }
    }

    #[test]
    fn all_ones_vector_is_annihilated() {
        for n in [10usize, 20, 50] {
            for (a, b) in [(-1.0, 1.0), (0.0, 1.0)] {
                let g = Grid::on_interval(n, a, b).unwrap();
                let d1 = first_derivative_explicit(&g);
                for order in 1..=4usize {
                    let d = if order == 1 {
                        d1.clone()
                    } else {
                        higher_order(&d1, order).unwrap()
                    };
                    let ones = vec![1.0; n];
                    let out = d.weights.mul_vec(&ones);
                    let worst = out.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                    assert!(
                        worst <= 1e-10 * (1.0 + d.weights.norm_inf()),
                        "n={n} order={order}: {worst:.3e}"
                    );
                }
            }
        }
    }

    #[test]
    fn higher_order_rejects_bad_orders() {
        let g = gauss_lobatto(8).unwrap();
        let d1 = first_derivative_explicit(&g);
        assert!(matches!(higher_order(&d1, 1), Err(Error::InvalidOrder(1))));
        assert!(matches!(higher_order(&d1, 5), Err(Error::InvalidOrder(5))));
        let d2 = higher_order(&d1, 2).unwrap();
        assert!(matches!(higher_order(&d2, 3), Err(Error::InvalidOrder(2))));
        assert!(matches!(
            higher_order_recurrence(&d1, 7),
            Err(Error::InvalidOrder(7))
        ));
    }

    #[test]
    fn lagrange_construction_rejects_overflowing_node_products() {
        let g = Grid::on_interval(6, 0.0, 1e300).unwrap();
        assert!(matches!(
            first_derivative_lagrange(&g),
            Err(Error::NonFiniteNodeProduct(_))
        ));
    }

    #[test]
    fn chebyshev_fit_recovers_second_basis_polynomial() {
        for n in [5usize, 9] {
            let g = gauss_lobatto(n).unwrap();
            let samples: Vec<f64> = g.nodes.iter().map(|x| 2.0 * x * x - 1.0).collect();
            let fit = chebyshev_fit(&samples, &g).unwrap();
            for (k, c) in fit.coefficients.iter().enumerate() {
                let expected = if k == 2 { 1.0 } else { 0.0 };
                assert!((c - expected).abs() <= 1e-12, "n={n} k={k}: {c}");
            }
        }
    }

    #[test]
    fn chebyshev_fit_of_constant_is_single_coefficient() {
        let g = Grid::on_interval(7, 0.0, 3.0).unwrap();
        let fit = chebyshev_fit(&[7.0; 7], &g).unwrap();
        assert!((fit.coefficients[0] - 7.0).abs() <= 1e-13);
        for c in &fit.coefficients[1..] {
            assert!(c.abs() <= 1e-13);
        }
    }

    #[test]
    fn chebyshev_fit_of_cubic_splits_into_two_terms() {
        let g = gauss_lobatto(5).unwrap();
        let samples: Vec<f64> = g.nodes.iter().map(|x| x * x * x).collect();
        let fit = chebyshev_fit(&samples, &g).unwrap();
        assert!((fit.coefficients[1] - 0.75).abs() <= 1e-14);
        assert!((fit.coefficients[3] - 0.25).abs() <= 1e-14);
        for k in [0usize, 2, 4] {
            assert!(fit.coefficients[k].abs() <= 1e-14);
        }
    }

    #[test]
    fn chebyshev_fit_reproduces_samples_at_nodes() {
        let g = Grid::on_interval(8, 0.0, 2.0).unwrap();
        let samples: Vec<f64> = g.nodes.iter().map(|x| (1.3 * x).sin() + 0.2 * x).collect();
        let fit = chebyshev_fit(&samples, &g).unwrap();
        let max_sample = samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (k, &x) in g.nodes.iter().enumerate() {
            assert!((fit.evaluate(x) - samples[k]).abs() <= 1e-10 * max_sample);
        }
    }

    #[test]
    fn chebyshev_fit_rejects_length_mismatch() {
        let g = gauss_lobatto(5).unwrap();
        assert!(matches!(
            chebyshev_fit(&[1.0, 2.0], &g),
            Err(Error::DimensionMismatch {
                expected: 5,
                got: 2
            })
        ));
    }

    #[test]
    fn csv_dump_has_full_precision_and_row_layout() {
        let mut m = DenseMatrix::new(2, 2);
        m.set(0, 0, 1.0 / 3.0);
        m.set(0, 1, -2.0);
        m.set(1, 0, 0.0);
        m.set(1, 1, 1e-12);
        let csv = matrix_to_csv(&m);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "3.3333333333333331e-1,-2.0000000000000000e0");
        // The double nearest 1e-12 sits just below it, so seventeen
        // significant digits render with a 9.99... mantissa.
        assert_eq!(lines[1], "0.0000000000000000e0,9.9999999999999998e-13");
        let back: f64 = lines[0].split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
        let back: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, 1e-12);
    }
}
