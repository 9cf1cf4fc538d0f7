//! Finite-difference stencil matrices on a grid.
//!
//! On uniform grids the one-sided operators are exact banded Toeplitz
//! matrices: out-of-range stencil entries are simply dropped by the matrix
//! shape, so e.g. θ₁I − A^F_2 keeps the constant diagonal θ₁ + 3/(2h) on
//! every row. On nonuniform grids each row is a local polynomial fit
//! (exact for quadratics) and the edge rows degrade to first order; the
//! affected rows are recorded either way.

use super::{Banded, DiscreteOperator, OperatorKind};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// First-order one-sided difference (A^F upper bidiagonal or A^B lower).
pub fn first_order(grid: &Grid, dir: Direction) -> DiscreteOperator {
    let x = grid.nodes();
    let n = x.len();
    match dir {
        Direction::Forward => {
            let mut m = Banded::zero(n, 0, 1);
            for i in 0..n {
                let h = if i + 1 < n { x[i + 1] - x[i] } else { x[i] - x[i - 1] };
                m.set(i, i, -1.0 / h);
                if i + 1 < n {
                    m.set(i, i + 1, 1.0 / h);
                }
            }
            DiscreteOperator {
                matrix: m,
                kind: OperatorKind::Forward,
                order: 1,
                boundary_rows: vec![n - 1],
            }
        }
        Direction::Backward => {
            let mut m = Banded::zero(n, 1, 0);
            for i in 0..n {
                let h = if i >= 1 { x[i] - x[i - 1] } else { x[i + 1] - x[i] };
                m.set(i, i, 1.0 / h);
                if i >= 1 {
                    m.set(i, i - 1, -1.0 / h);
                }
            }
            DiscreteOperator {
                matrix: m,
                kind: OperatorKind::Backward,
                order: 1,
                boundary_rows: vec![0],
            }
        }
    }
}

/// Second-order one-sided difference (A^F_2 / A^B_2, bandwidth 2).
pub fn second_order_one_sided(grid: &Grid, dir: Direction) -> DiscreteOperator {
    let x = grid.nodes();
    let n = x.len();
    assert!(n >= 3, "second-order stencil needs at least 3 nodes");
    let uniform = grid.uniform_step();
    match dir {
        Direction::Forward => {
            let mut m = Banded::zero(n, 0, 2);
            if let Some(h) = uniform {
                for i in 0..n {
                    m.set(i, i, -3.0 / (2.0 * h));
                    if i + 1 < n {
                        m.set(i, i + 1, 2.0 / h);
                    }
                    if i + 2 < n {
                        m.set(i, i + 2, -1.0 / (2.0 * h));
                    }
                }
            } else {
                for i in 0..n {
                    if i + 2 < n {
                        let a = x[i + 1] - x[i];
                        let b = x[i + 2] - x[i];
                        m.set(i, i, -(a + b) / (a * b));
                        m.set(i, i + 1, b / (a * (b - a)));
                        m.set(i, i + 2, -a / (b * (b - a)));
                    } else if i + 1 < n {
                        let a = x[i + 1] - x[i];
                        m.set(i, i, -1.0 / a);
                        m.set(i, i + 1, 1.0 / a);
                    } else {
                        let a = x[i] - x[i - 1];
                        m.set(i, i, -1.0 / a);
                    }
                }
            }
            DiscreteOperator {
                matrix: m,
                kind: OperatorKind::Forward2,
                order: 2,
                boundary_rows: vec![n - 2, n - 1],
            }
        }
        Direction::Backward => {
            let mut m = Banded::zero(n, 2, 0);
            if let Some(h) = uniform {
                for i in 0..n {
                    m.set(i, i, 3.0 / (2.0 * h));
                    if i >= 1 {
                        m.set(i, i - 1, -2.0 / h);
                    }
                    if i >= 2 {
                        m.set(i, i - 2, 1.0 / (2.0 * h));
                    }
                }
            } else {
                for i in 0..n {
                    if i >= 2 {
                        let a = x[i] - x[i - 1];
                        let b = x[i] - x[i - 2];
                        m.set(i, i, (a + b) / (a * b));
                        m.set(i, i - 1, -b / (a * (b - a)));
                        m.set(i, i - 2, a / (b * (b - a)));
                    } else if i >= 1 {
                        let a = x[i] - x[i - 1];
                        m.set(i, i, 1.0 / a);
                        m.set(i, i - 1, -1.0 / a);
                    } else {
                        let a = x[i + 1] - x[i];
                        m.set(i, i, 1.0 / a);
                    }
                }
            }
            DiscreteOperator {
                matrix: m,
                kind: OperatorKind::Backward2,
                order: 2,
                boundary_rows: vec![0, 1],
            }
        }
    }
}

/// A^C = (A^F + A^B)/2 and A^C_2 = A^F · A^B.
pub fn central_operators(grid: &Grid) -> (DiscreteOperator, DiscreteOperator) {
    let af = first_order(grid, Direction::Forward);
    let ab = first_order(grid, Direction::Backward);
    let n = grid.len();
    let ac = DiscreteOperator {
        matrix: af.matrix.add_scaled(0.5, &ab.matrix, 0.5),
        kind: OperatorKind::Central,
        order: 2,
        boundary_rows: vec![0, n - 1],
    };
    let ac2 = DiscreteOperator {
        matrix: af.matrix.mul(&ab.matrix),
        kind: OperatorKind::Central2,
        order: 2,
        boundary_rows: vec![0, n - 1],
    };
    (ac, ac2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn grid3() -> Grid {
        Grid::build_uniform(0.0, 1.0, 3).unwrap()
    }

    #[test]
    fn forward_stencil_h_half() {
        let op = first_order(&grid3(), Direction::Forward);
        let d = op.to_dense();
        assert_eq!(d[(0, 0)], -2.0);
        assert_eq!(d[(0, 1)], 2.0);
        assert_eq!(d[(2, 2)], -2.0); // truncated last row keeps the diagonal
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = Grid::build_uniform(-1.0, 2.0, 25).unwrap();
        let ones = vec![1.0; 25];
        for op in [
            first_order(&g, Direction::Forward),
            second_order_one_sided(&g, Direction::Backward),
        ] {
            let y = op.apply(&ones);
            for i in op.interior_rows() {
                assert!(y[i].abs() < 1e-12, "row {i}: {}", y[i]);
            }
        }
    }

    #[test]
    fn derivative_of_identity_is_one() {
        let g = Grid::build_uniform(-1.0, 2.0, 41).unwrap();
        let x: Vec<f64> = g.nodes().to_vec();
        for op in [
            first_order(&g, Direction::Forward),
            first_order(&g, Direction::Backward),
            second_order_one_sided(&g, Direction::Forward),
            second_order_one_sided(&g, Direction::Backward),
        ] {
            let y = op.apply(&x);
            for i in op.interior_rows() {
                assert!((y[i] - 1.0).abs() < 1e-10, "{:?} row {i}: {}", op.kind, y[i]);
            }
        }
    }

    #[test]
    fn second_order_forward_rows() {
        let op = second_order_one_sided(&grid3(), Direction::Forward);
        let d = op.to_dense();
        // h = 0.5: scaled rows {-3, 4, -1}
        assert!((d[(0, 0)] + 3.0).abs() < 1e-14);
        assert!((d[(0, 1)] - 4.0).abs() < 1e-14);
        assert!((d[(0, 2)] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_sided_second_order_on_quadratic() {
        let g = Grid::build_uniform(0.0, 2.0, 41).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|&x| x * x).collect();
        let op = second_order_one_sided(&g, Direction::Forward);
        let y = op.apply(&f);
        for i in op.interior_rows() {
            // exact for quadratics
            assert!((y[i] - 2.0 * g.nodes()[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn central_rows_uniform() {
        let g = Grid::build_uniform(0.0, 4.0, 9).unwrap(); // h = 0.5
        let (ac, ac2) = central_operators(&g);
        let d = ac.to_dense();
        assert!((d[(3, 2)] + 1.0).abs() < 1e-14);
        assert!(d[(3, 3)].abs() < 1e-14);
        assert!((d[(3, 4)] - 1.0).abs() < 1e-14);
        let d2 = ac2.to_dense();
        assert!((d2[(3, 2)] - 4.0).abs() < 1e-13);
        assert!((d2[(3, 3)] + 8.0).abs() < 1e-13);
        assert!((d2[(3, 4)] - 4.0).abs() < 1e-13);
    }

    #[test]
    fn central2_on_quadratic() {
        let g = Grid::build_uniform(0.0, 2.0, 81).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|&x| x * x).collect();
        let (_, ac2) = central_operators(&g);
        let y = ac2.apply(&f);
        for i in ac2.interior_rows() {
            assert!((y[i] - 2.0).abs() < 1e-9, "row {i}: {}", y[i]);
        }
    }

    #[test]
    fn nonuniform_second_order_exact_on_quadratics() {
        let g = Grid::build_concentrated(-2.0, 2.0, 31, 0.4).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|&x| 1.5 * x * x - 0.3 * x + 2.0).collect();
        let op = second_order_one_sided(&g, Direction::Backward);
        let y = op.apply(&f);
        for i in op.interior_rows() {
            let want = 3.0 * g.nodes()[i] - 0.3;
            assert!((y[i] - want).abs() < 1e-9, "row {i}");
        }
    }
}
