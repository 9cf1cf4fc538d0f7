//! Discrete derivative operators and the matrix machinery built on them.

pub mod checks;
pub mod expm;
pub mod matfun;
pub mod stencil;
pub mod toeplitz;

use ndarray::Array2;

/// Which stencil an operator represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// A^F, first-order forward, upper bidiagonal.
    Forward,
    /// A^B, first-order backward, lower bidiagonal.
    Backward,
    /// A^F_2, second-order one-sided forward, upper banded width 2.
    Forward2,
    /// A^B_2, second-order one-sided backward, lower banded width 2.
    Backward2,
    /// A^C = (A^F + A^B)/2.
    Central,
    /// A^C_2 = A^F · A^B.
    Central2,
    Composite,
}

/// Banded matrix stored by diagonal offset. `diag(d)[i]` is the element at
/// (row i, col i+d); entries outside the matrix are zero and unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded {
    n: usize,
    lower: usize,
    upper: usize,
    diags: Vec<Vec<f64>>,
}

impl Banded {
    pub fn zero(n: usize, lower: usize, upper: usize) -> Self {
        Banded {
            n,
            lower,
            upper,
            diags: vec![vec![0.0; n]; lower + upper + 1],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    #[inline]
    pub fn diag(&self, offset: isize) -> &[f64] {
        &self.diags[(offset + self.lower as isize) as usize]
    }

    #[inline]
    pub fn diag_mut(&mut self, offset: isize) -> &mut [f64] {
        &mut self.diags[(offset + self.lower as isize) as usize]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let d = j as isize - i as isize;
        if d < -(self.lower as isize) || d > self.upper as isize {
            0.0
        } else {
            self.diag(d)[i]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let d = j as isize - i as isize;
        self.diag_mut(d)[i] = v;
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for d in -(self.lower as isize)..=(self.upper as isize) {
            let v = self.diag(d);
            let (i0, i1) = if d >= 0 {
                (0usize, n - d as usize)
            } else {
                ((-d) as usize, n)
            };
            for i in i0..i1 {
                y[i] += v[i] * x[(i as isize + d) as usize];
            }
        }
        y
    }

    /// Solve A x = b for an upper-triangular banded A (lower = 0) by back
    /// substitution, O(n · upper).
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(self.lower, 0, "solve_upper needs an upper-triangular band");
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for d in 1..=self.upper {
                if i + d < n {
                    s -= self.diag(d as isize)[i] * x[i + d];
                }
            }
            x[i] = s / self.diag(0)[i];
        }
        x
    }

    /// Solve A x = b for a lower-triangular banded A (upper = 0).
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(self.upper, 0, "solve_lower needs a lower-triangular band");
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for d in 1..=self.lower {
                if i >= d {
                    s -= self.diag(-(d as isize))[i] * x[i - d];
                }
            }
            x[i] = s / self.diag(0)[i];
        }
        x
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n;
        let mut m = Array2::zeros((n, n));
        for d in -(self.lower as isize)..=(self.upper as isize) {
            let v = self.diag(d);
            let (i0, i1) = if d >= 0 {
                (0usize, n - d as usize)
            } else {
                ((-d) as usize, n)
            };
            for i in i0..i1 {
                m[(i, (i as isize + d) as usize)] = v[i];
            }
        }
        m
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.diags {
            for e in v.iter_mut() {
                *e *= a;
            }
        }
    }

    pub fn add_diag(&mut self, a: f64) {
        for e in self.diag_mut(0).iter_mut() {
            *e += a;
        }
    }

    /// C = self · other; band widths add.
    pub fn mul(&self, other: &Banded) -> Banded {
        let n = self.n;
        assert_eq!(n, other.n);
        let lower = self.lower + other.lower;
        let upper = self.upper + other.upper;
        let mut c = Banded::zero(n, lower, upper);
        for da in -(self.lower as isize)..=(self.upper as isize) {
            for db in -(other.lower as isize)..=(other.upper as isize) {
                let d = da + db;
                for i in 0..n {
                    let k = i as isize + da;
                    let j = k + db;
                    if k >= 0 && (k as usize) < n && j >= 0 && (j as usize) < n {
                        let add = self.diag(da)[i] * other.diag(db)[k as usize];
                        c.diag_mut(d)[i] += add;
                    }
                }
            }
        }
        c
    }

    /// a·self + b·other, aligning bands.
    pub fn add_scaled(&self, a: f64, other: &Banded, b: f64) -> Banded {
        let n = self.n;
        assert_eq!(n, other.n);
        let lower = self.lower.max(other.lower);
        let upper = self.upper.max(other.upper);
        let mut c = Banded::zero(n, lower, upper);
        for d in -(lower as isize)..=(upper as isize) {
            for i in 0..n {
                let j = i as isize + d;
                if j < 0 || j as usize >= n {
                    continue;
                }
                let mut v = 0.0;
                if d >= -(self.lower as isize) && d <= self.upper as isize {
                    v += a * self.diag(d)[i];
                }
                if d >= -(other.lower as isize) && d <= other.upper as isize {
                    v += b * other.diag(d)[i];
                }
                c.diag_mut(d)[i] = v;
            }
        }
        c
    }

    /// First-row symbol if the matrix is upper-triangular Toeplitz
    /// (constant diagonals) to within `tol`.
    pub fn ut_toeplitz_symbol(&self, tol: f64) -> Option<Vec<f64>> {
        if self.lower != 0 {
            return None;
        }
        let mut sym = vec![0.0; self.n];
        for d in 0..=self.upper.min(self.n - 1) {
            let v = self.diag(d as isize);
            let c = v[0];
            for i in 0..self.n - d {
                if (v[i] - c).abs() > tol * c.abs().max(1.0) {
                    return None;
                }
            }
            sym[d] = c;
        }
        Some(sym)
    }
}

/// A discretized differential operator together with its stencil metadata.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: Banded,
    pub kind: OperatorKind,
    /// Declared order of accuracy in h.
    pub order: usize,
    /// Rows whose stencils are truncated at the grid edge; invariant tests
    /// exclude these.
    pub boundary_rows: Vec<usize>,
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.matrix.to_dense()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }

    /// Interior rows: all rows minus the recorded boundary rows.
    pub fn interior_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |i| !self.boundary_rows.contains(i))
    }
}

/// Dump a dense matrix in a plain text format: header "N rows N cols",
/// then row-major entries.
pub fn write_matrix_txt<W: std::io::Write>(m: &Array2<f64>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{} rows {} cols", m.nrows(), m.ncols())?;
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
