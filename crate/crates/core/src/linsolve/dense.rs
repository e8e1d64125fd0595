//! Dense symmetric indefinite factorization `P A Pᵀ = L D Lᵀ` with
//! Bunch–Kaufman partial pivoting (1x1 and 2x2 diagonal blocks).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Growth-bound constant `(1 + √17) / 8`.
const ALPHA: f64 = 0.640_388_203_202_208_0;

#[derive(Debug, Clone)]
pub struct BunchKaufman {
    /// Unit lower factor below the diagonal, `D` blocks on and next to it.
    factor: DMatrix<f64>,
    /// Row `i` of the permuted matrix is row `perm[i]` of the original.
    perm: Vec<usize>,
    /// Size (1 or 2) of the pivot block starting at each position; 0 for the
    /// second row of a 2x2 block.
    block: Vec<u8>,
}

impl BunchKaufman {
    /// Factorizes a symmetric matrix; only the lower triangle is read.
    ///
    /// The trailing block is kept fully symmetric so that row and column
    /// interchanges can be applied to whole rows and columns.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "matrix must be square");
        let mut m = a.clone();
        for j in 0..n {
            for i in 0..j {
                m[(i, j)] = m[(j, i)];
            }
        }
        let scale = m.amax();
        let tiny = f64::EPSILON * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut block = vec![0u8; n];
        let mut k = 0;
        while k < n {
            let akk = m[(k, k)].abs();
            let (mut r, mut colmax) = (k, 0.0);
            for i in k + 1..n {
                if m[(i, k)].abs() > colmax {
                    colmax = m[(i, k)].abs();
                    r = i;
                }
            }
            if akk.max(colmax) <= tiny {
                return Err(Error::SingularSystem { pivot: k });
            }
            let two_by_two = if akk >= ALPHA * colmax {
                false
            } else {
                let mut rowmax: f64 = 0.0;
                for j in k..n {
                    if j != r {
                        rowmax = rowmax.max(m[(r, j)].abs());
                    }
                }
                if akk * rowmax >= ALPHA * colmax * colmax {
                    false
                } else if m[(r, r)].abs() >= ALPHA * rowmax {
                    swap_symmetric(&mut m, &mut perm, k, r);
                    false
                } else {
                    swap_symmetric(&mut m, &mut perm, k + 1, r);
                    true
                }
            };
            if two_by_two {
                let (d11, d21, d22) = (m[(k, k)], m[(k + 1, k)], m[(k + 1, k + 1)]);
                let det = d11 * d22 - d21 * d21;
                if det.abs() <= tiny * scale {
                    return Err(Error::SingularSystem { pivot: k });
                }
                let c0: Vec<f64> = (k + 2..n).map(|i| m[(i, k)]).collect();
                let c1: Vec<f64> = (k + 2..n).map(|i| m[(i, k + 1)]).collect();
                let l0: Vec<f64> = c0.iter().zip(&c1).map(|(a0, a1)| (a0 * d22 - a1 * d21) / det).collect();
                let l1: Vec<f64> = c0.iter().zip(&c1).map(|(a0, a1)| (a1 * d11 - a0 * d21) / det).collect();
                for (b, j) in (k + 2..n).enumerate() {
                    for (a, i) in (k + 2..n).enumerate() {
                        m[(i, j)] -= l0[a] * c0[b] + l1[a] * c1[b];
                    }
                }
                for (a, i) in (k + 2..n).enumerate() {
                    m[(i, k)] = l0[a];
                    m[(i, k + 1)] = l1[a];
                }
                block[k] = 2;
                k += 2;
            } else {
                let d = m[(k, k)];
                let col: Vec<f64> = (k + 1..n).map(|i| m[(i, k)]).collect();
                for (b, j) in (k + 1..n).enumerate() {
                    let f = col[b] / d;
                    for (a, i) in (k + 1..n).enumerate() {
                        m[(i, j)] -= col[a] * f;
                    }
                }
                for (a, i) in (k + 1..n).enumerate() {
                    m[(i, k)] = col[a] / d;
                }
                block[k] = 1;
                k += 1;
            }
        }
        Ok(Self { factor: m, perm, block })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let m = &self.factor;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // L z = y
        let mut k = 0;
        while k < n {
            let w = self.block[k] as usize;
            for c in k..k + w {
                for i in k + w..n {
                    y[i] -= m[(i, c)] * y[c];
                }
            }
            k += w;
        }
        // D w = z
        let mut k = 0;
        while k < n {
            if self.block[k] == 1 {
                y[k] /= m[(k, k)];
                k += 1;
            } else {
                let (d11, d21, d22) = (m[(k, k)], m[(k + 1, k)], m[(k + 1, k + 1)]);
                let det = d11 * d22 - d21 * d21;
                let (z0, z1) = (y[k], y[k + 1]);
                y[k] = (d22 * z0 - d21 * z1) / det;
                y[k + 1] = (d11 * z1 - d21 * z0) / det;
                k += 2;
            }
        }
        // Lᵀ v = w
        let starts: Vec<usize> = (0..n).filter(|&k| self.block[k] != 0).collect();
        for &k in starts.iter().rev() {
            let w = self.block[k] as usize;
            for c in k..k + w {
                let mut s = y[c];
                for i in k + w..n {
                    s -= m[(i, c)] * y[i];
                }
                y[c] = s;
            }
        }
        for (i, &p) in self.perm.iter().enumerate() {
            b[p] = y[i];
        }
    }

    /// Number of negative eigenvalues (inertia of `D`).
    pub fn negative_eigenvalues(&self) -> usize {
        let m = &self.factor;
        let mut count = 0;
        let mut k = 0;
        while k < self.dim() {
            if self.block[k] == 1 {
                count += (m[(k, k)] < 0.0) as usize;
                k += 1;
            } else {
                let (a, b, c) = (m[(k, k)], m[(k + 1, k)], m[(k + 1, k + 1)]);
                let tr = a + c;
                let det = a * c - b * b;
                count += if det < 0.0 { 1 } else if tr < 0.0 { 2 } else { 0 };
                k += 2;
            }
        }
        count
    }
}

fn swap_symmetric(m: &mut DMatrix<f64>, perm: &mut [usize], i: usize, j: usize) {
    if i == j {
        return;
    }
    m.swap_rows(i, j);
    m.swap_columns(i, j);
    perm.swap(i, j);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
        let f = BunchKaufman::factor(a).unwrap();
        let mut x = b.to_vec();
        f.solve_in_place(&mut x);
        x
    }

    #[test]
    fn identity() {
        let x = solve(&DMatrix::identity(4, 4), &[1.0, -2.0, 3.0, 0.5]);
        assert_eq!(x, vec![1.0, -2.0, 3.0, 0.5]);
    }

    #[test]
    fn indefinite_with_zero_diagonal() {
        // forces a 2x2 pivot at the first step
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 2.0, 0.0, 3.0, 1.0, 3.0, 4.0]);
        let xs = [1.0, -1.0, 2.0];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[(i, j)] * xs[j]).sum()).collect();
        let x = solve(&a, &b);
        for k in 0..3 {
            assert!((x[k] - xs[k]).abs() < 1e-13);
        }
        let f = BunchKaufman::factor(&a).unwrap();
        let eig = a.clone().symmetric_eigenvalues();
        assert_eq!(f.negative_eigenvalues(), eig.iter().filter(|&&e| e < 0.0).count());
    }

    #[test]
    fn random_symmetric_indefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 40;
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        a = &a + a.transpose();
        let xs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = (&a * nalgebra::DVector::from_vec(xs.clone())).as_slice().to_vec();
        let x = solve(&a, &b);
        let err = x.iter().zip(&xs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn singular_reports_pivot() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(BunchKaufman::factor(&a).unwrap_err(), Error::SingularSystem { pivot: 1 });
    }
}
