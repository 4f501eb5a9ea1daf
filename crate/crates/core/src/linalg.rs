//! Dense stationary-vector solve for small Markov chains.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows} rows, row {row} has {len} entries)")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("linear system is singular")]
    Singular,
}

/// Solves `nu * P = nu`, `sum(nu) = 1` by Gaussian elimination with partial
/// pivoting on the transposed balance equations, the last of which is
/// replaced by the normalization constraint.
pub fn stationary_vector<T: Scalar>(transition: &[Vec<T>]) -> Result<Vec<T>, LinalgError> {
    let m = transition.len();
    for (row, r) in transition.iter().enumerate() {
        if r.len() != m {
            return Err(LinalgError::NotSquare {
                rows: m,
                row,
                len: r.len(),
            });
        }
    }
    if m == 0 {
        return Err(LinalgError::Singular);
    }

    // a[i][j] = P[j][i] - delta_ij, augmented with the right-hand side.
    let mut a: Vec<Vec<T>> = (0..m)
        .map(|i| {
            let mut row: Vec<T> = (0..m)
                .map(|j| {
                    let v = transition[j][i];
                    if i == j {
                        v - T::one()
                    } else {
                        v
                    }
                })
                .collect();
            row.push(T::zero());
            row
        })
        .collect();
    a[m - 1] = vec![T::one(); m + 1];

    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&x, &y| {
                a[x][col]
                    .abs()
                    .partial_cmp(&a[y][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty pivot range");
        if a[pivot][col].is_zero() {
            return Err(LinalgError::Singular);
        }
        a.swap(col, pivot);
        let p = a[col][col];
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r == col {
                continue;
            }
            let factor = row[col] / p;
            if factor.is_zero() {
                continue;
            }
            for (x, &y) in row.iter_mut().zip(&pivot_row).skip(col) {
                *x = *x - factor * y;
            }
        }
    }

    Ok((0..m).map(|i| a[i][m] / a[i][i]).collect())
}

/// `max_j |(nu P)_j - nu_j|`.
pub fn balance_residual<T: Scalar>(transition: &[Vec<T>], nu: &[T]) -> T {
    let m = nu.len();
    (0..m)
        .map(|j| {
            let flow = (0..m).fold(T::zero(), |acc, i| acc + nu[i] * transition[i][j]);
            (flow - nu[j]).abs()
        })
        .fold(T::zero(), |acc, v| acc.max_of(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn power_iterate(p: &[Vec<f64>], steps: usize) -> Vec<f64> {
        let m = p.len();
        let mut v = vec![1.0 / m as f64; m];
        for _ in 0..steps {
            let mut next = vec![0.0; m];
            for i in 0..m {
                for j in 0..m {
                    next[j] += v[i] * p[i][j];
                }
            }
            v = next;
        }
        v
    }

    #[test]
    fn two_state_exact() {
        let r = |n, d| Rational::new(n, d);
        let p = vec![vec![r(9, 10), r(1, 10)], vec![r(1, 2), r(1, 2)]];
        let nu = stationary_vector(&p).unwrap();
        assert_eq!(nu, vec![r(5, 6), r(1, 6)]);
        assert_eq!(balance_residual(&p, &nu), r(0, 1));
    }

    #[test]
    fn two_state_float_matches_power_iteration() {
        let p = vec![vec![0.9, 0.1], vec![0.5, 0.5]];
        let nu = stationary_vector(&p).unwrap();
        let oracle = power_iterate(&p, 500);
        for (a, b) in nu.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((nu[0] - 5.0 / 6.0).abs() < 1e-14);
        assert!(balance_residual(&p, &nu) <= 1e-10);
    }

    #[test]
    fn periodic_chain() {
        let p = vec![vec![0.0_f32, 1.0], vec![1.0, 0.0]];
        let nu = stationary_vector(&p).unwrap();
        assert!((nu[0] - 0.5).abs() < 1e-6 && (nu[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn reducible_chain_is_singular() {
        let p = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(stationary_vector(&p), Err(LinalgError::Singular));
    }

    #[test]
    fn ragged_matrix_rejected() {
        let p = vec![vec![1.0, 0.0], vec![1.0]];
        assert!(matches!(
            stationary_vector(&p),
            Err(LinalgError::NotSquare { .. })
        ));
    }
}
