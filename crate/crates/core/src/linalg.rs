//! Structured linear solvers.

use nalgebra::{DMatrix, DVector};

/// Solves a tridiagonal system by the Thomas algorithm.
///
/// `sub[i]` multiplies `x[i-1]` in row `i` (`sub[0]` unused), `sup[i]`
/// multiplies `x[i+1]` (last entry unused). Returns `None` on a zero pivot.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return None;
    }
    c[0] = sup[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - sub[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { sup[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / beta;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Square block system whose block row `i` touches block columns
/// `i-1, i, i+1, i+2`.
#[derive(Debug, Clone)]
pub struct BlockBanded {
    pub block: usize,
    pub lower: Vec<DMatrix<f64>>,
    pub diag: Vec<DMatrix<f64>>,
    pub upper1: Vec<DMatrix<f64>>,
    pub upper2: Vec<DMatrix<f64>>,
}

impl BlockBanded {
    pub fn zeros(rows: usize, block: usize) -> Self {
        let z = DMatrix::zeros(block, block);
        Self {
            block,
            lower: vec![z.clone(); rows],
            diag: vec![z.clone(); rows],
            upper1: vec![z.clone(); rows],
            upper2: vec![z; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.diag.len()
    }

    /// Block elimination without inter-block pivoting.
    pub fn factor(self) -> Option<BlockBandedLu> {
        let n = self.rows();
        let BlockBanded { block, lower, mut diag, mut upper1, upper2 } = self;
        let mut lus = Vec::with_capacity(n);
        let mut x1 = Vec::with_capacity(n);
        let mut x2 = Vec::with_capacity(n);
        for i in 0..n {
            let lu = diag[i].clone().lu();
            let a = lu.solve(&upper1[i])?;
            let b = lu.solve(&upper2[i])?;
            if i + 1 < n {
                let l = &lower[i + 1];
                diag[i + 1] -= l * &a;
                upper1[i + 1] -= l * &b;
            }
            lus.push(lu);
            x1.push(a);
            x2.push(b);
        }
        Some(BlockBandedLu { block, lus, lower, x1, x2 })
    }
}

/// Factorization produced by [`BlockBanded::factor`], reusable for several right-hand sides.
pub struct BlockBandedLu {
    block: usize,
    lus: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    lower: Vec<DMatrix<f64>>,
    x1: Vec<DMatrix<f64>>,
    x2: Vec<DMatrix<f64>>,
}

impl BlockBandedLu {
    pub fn solve(&self, rhs: &[DVector<f64>]) -> Option<Vec<DVector<f64>>> {
        let n = self.lus.len();
        let mut y: Vec<DVector<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut b = rhs[i].clone();
            if i > 0 {
                b -= &self.lower[i] * &y[i - 1];
            }
            y.push(self.lus[i].solve(&b)?);
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                let t = &self.x1[i] * &y[i + 1];
                y[i] -= t;
            }
            if i + 2 < n {
                let t = &self.x2[i] * &y[i + 2];
                y[i] -= t;
            }
        }
        debug_assert!(y.iter().all(|v| v.len() == self.block));
        Some(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense() {
        let sub = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let sup = [-1.0, -1.0, -1.0, 0.0];
        let rhs = [1.0, 2.0, 3.0, 4.0];
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        for i in 0..4 {
            let mut r = diag[i] * x[i];
            if i > 0 {
                r += sub[i] * x[i - 1];
            }
            if i < 3 {
                r += sup[i] * x[i + 1];
            }
            assert!((r - rhs[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn block_banded_matches_dense() {
        let (rows, m) = (6, 3);
        let mut sys = BlockBanded::zeros(rows, m);
        let mut dense = DMatrix::<f64>::zeros(rows * m, rows * m);
        let val = |i: usize, j: usize, s: usize| ((i * 7 + j * 3 + s * 11) % 13) as f64 / 13.0 - 0.5;
        for i in 0..rows {
            for r in 0..m {
                for c in 0..m {
                    let d = val(r, c, i) + if r == c { 6.0 } else { 0.0 };
                    sys.diag[i][(r, c)] = d;
                    dense[(i * m + r, i * m + c)] = d;
                    if i > 0 {
                        sys.lower[i][(r, c)] = val(r, c, i + 1);
                        dense[(i * m + r, (i - 1) * m + c)] = val(r, c, i + 1);
                    }
                    if i + 1 < rows {
                        sys.upper1[i][(r, c)] = val(c, r, i + 2);
                        dense[(i * m + r, (i + 1) * m + c)] = val(c, r, i + 2);
                    }
                    if i + 2 < rows {
                        sys.upper2[i][(r, c)] = val(r, c, i + 5) * 0.5;
                        dense[(i * m + r, (i + 2) * m + c)] = val(r, c, i + 5) * 0.5;
                    }
                }
            }
        }
        let rhs: Vec<DVector<f64>> = (0..rows).map(|i| DVector::from_fn(m, |r, _| (i + r) as f64)).collect();
        let x = sys.factor().unwrap().solve(&rhs).unwrap();
        let flat = DVector::from_iterator(rows * m, x.iter().flat_map(|v| v.iter().copied()));
        let b = DVector::from_iterator(rows * m, rhs.iter().flat_map(|v| v.iter().copied()));
        assert!((dense * flat - b).amax() < 1e-12);
    }
}
