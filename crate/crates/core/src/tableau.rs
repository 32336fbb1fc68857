//! Closed-form Butcher tableaus of the Chebyshev collocation methods.
//!
//! The `s`-stage method (`k = s`) has `A = P X P^T / s`, where `P` is the
//! cosine matrix `P[i][j] = P_j(c_i)` and `X` the sparse spectral factor that
//! encodes integration in coefficient space. With `k > s` quadrature nodes the
//! tableau is `k x k` and uses the extended factor with one extra row.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::basis::{integral_p_all, nodes, NodeSet};
use crate::error::{Error, Result};

/// Sparse spectral factor `X_s` (square) or its extension with a trailing
/// `(0, .., 0, beta_s)` row.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactor {
    s: usize,
    extended: bool,
    /// `beta[j - 1] = 1 / (4j)` for `j = 1..=s`.
    beta: Vec<f64>,
    /// `alpha[j - 3] = (-1)^j 8 sqrt(2) beta_j beta_{j-2}` for `j = 3..=s`.
    alpha: Vec<f64>,
    /// Nonzero entries as zero-based `(row, col, value)`, row-major order.
    entries: Vec<(usize, usize, f64)>,
}

impl SpectralFactor {
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn is_extended(&self) -> bool {
        self.extended
    }

    pub fn rows(&self) -> usize {
        if self.extended {
            self.s + 1
        } else {
            self.s
        }
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows(), self.s);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }

    /// Sparse product `X Z` for `Z` with `s` rows.
    pub fn apply(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.rows(), z.ncols());
        self.apply_into(z, &mut out)?;
        Ok(out)
    }

    /// Sparse product written into `out`, which must be `rows() x z.ncols()`.
    pub fn apply_into(&self, z: &DMatrix<f64>, out: &mut DMatrix<f64>) -> Result<()> {
        if z.nrows() != self.s || out.nrows() != self.rows() || out.ncols() != z.ncols() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows in, {}x{} out", self.s, self.rows(), z.ncols()),
                got: format!("{}x{} in, {}x{} out", z.nrows(), z.ncols(), out.nrows(), out.ncols()),
            });
        }
        out.fill(0.0);
        for col in 0..z.ncols() {
            let zc = z.column(col);
            let mut oc = out.column_mut(col);
            for &(i, j, v) in &self.entries {
                oc[i] += v * zc[j];
            }
        }
        Ok(())
    }
}

/// Builds `X_s`, or the `(s+1) x s` extension when `extended` is set.
pub fn build_spectral_factor(s: usize, extended: bool) -> Result<SpectralFactor> {
    if s == 0 {
        return Err(Error::ZeroStages);
    }
    let beta: Vec<f64> = (1..=s).map(|j| 1.0 / (4 * j) as f64).collect();
    let b = |j: usize| beta[j - 1];
    let alpha: Vec<f64> = (3..=s)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * 8.0 * SQRT_2 * b(j) * b(j - 2)
        })
        .collect();

    let mut entries = vec![(0, 0, 0.5)];
    if s >= 2 {
        entries.push((0, 1, -SQRT_2 * b(2)));
    }
    for j in 3..=s {
        entries.push((0, j - 1, alpha[j - 3]));
    }
    if s >= 2 {
        entries.push((1, 0, SQRT_2 * b(1)));
        if s >= 3 {
            entries.push((1, 2, -b(1)));
        }
    }
    for i in 2..s {
        entries.push((i, i - 1, b(i)));
        if i + 1 < s {
            entries.push((i, i + 1, -b(i)));
        }
    }
    if extended {
        // The P_1 coefficient of int P_0 carries the sqrt(2) of the first
        // column, so for s = 1 the appended entry is sqrt(2) beta_1.
        let last = if s == 1 { SQRT_2 * b(1) } else { b(s) };
        entries.push((s, s - 1, last));
    }
    Ok(SpectralFactor {
        s,
        extended,
        beta,
        alpha,
        entries,
    })
}

/// Cosine matrix `M[i][j] = P_j(c_i) = nu_j cos(j theta_i)` with `nu_0 = 1` and
/// `nu_j = sqrt(2)` otherwise, formed from the stored angles.
pub fn cosine_matrix(nodes: &NodeSet, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(nodes.s, cols, |i, j| {
        let nu = if j == 0 { 1.0 } else { SQRT_2 };
        nu * (j as f64 * nodes.theta[i]).cos()
    })
}

/// Integral matrix `I[i][j] = int_0^{c_i} P_j`, built from the antiderivative
/// recurrences. Used to cross-check the factorisation `I = P X`.
pub fn integral_matrix(nodes: &NodeSet, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(nodes.s, cols);
    let mut row = vec![0.0; cols];
    for (i, &c) in nodes.c.iter().enumerate() {
        integral_p_all(c, &mut row);
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

/// Quadrature weights of the method with degree `s` and `k` nodes.
pub fn weights(s: usize, k: usize) -> Result<Vec<f64>> {
    if s == 0 {
        return Err(Error::ZeroStages);
    }
    if k < s {
        return Err(Error::TooFewNodes { s, k });
    }
    let upper = s.div_ceil(2) - 1;
    let kf = k as f64;
    Ok((1..=k)
        .map(|i| {
            let sum: f64 = (1..=upper)
                .map(|j| {
                    let jf = j as f64;
                    let angle = (2 * i - 1) as f64 * jf * std::f64::consts::PI / kf;
                    angle.cos() / (4.0 * jf * jf - 1.0)
                })
                .sum();
            (1.0 - 2.0 * sum) / kf
        })
        .collect())
}

/// A Chebyshev collocation method (CCM(s), or CCM(k, s) when `k > s`).
#[derive(Debug, Clone)]
pub struct ButcherTableau {
    pub s: usize,
    pub k: usize,
    pub nodes: NodeSet,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    /// Dense `k x k` Butcher matrix.
    pub a: DMatrix<f64>,
    /// `k x s` cosine matrix.
    pub p: DMatrix<f64>,
    /// `k x (s+1)` cosine matrix, only for `k > s`.
    pub p_ext: Option<DMatrix<f64>>,
    pub x: SpectralFactor,
}

impl ButcherTableau {
    /// Builds and certifies the tableau.
    pub fn new(s: usize, k: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::ZeroStages);
        }
        if k < s {
            return Err(Error::TooFewNodes { s, k });
        }
        let nodes = nodes(k)?;
        let p = cosine_matrix(&nodes, s);
        let square = k == s;
        let x = build_spectral_factor(s, !square)?;
        let (a, p_ext) = if square {
            (&p * x.to_dense() * p.transpose() / k as f64, None)
        } else {
            let p_ext = cosine_matrix(&nodes, s + 1);
            (&p_ext * x.to_dense() * p.transpose() / k as f64, Some(p_ext))
        };
        let tableau = ButcherTableau {
            s,
            k,
            c: nodes.c.clone(),
            b: weights(s, k)?,
            nodes,
            a,
            p,
            p_ext,
            x,
        };
        tableau.certify()?;
        Ok(tableau)
    }

    /// Square CCM(s) tableau.
    pub fn ccm(s: usize) -> Result<Self> {
        Self::new(s, s)
    }

    pub fn is_square(&self) -> bool {
        self.k == self.s
    }

    fn certify(&self) -> Result<()> {
        let kf = self.k as f64;
        let scale = kf.max(16.0) / 16.0;
        let sum: f64 = self.b.iter().sum();
        if (sum - 1.0).abs() > 1e-14 * scale {
            return Err(Error::Certification(format!("weights sum to {sum:.17e}")));
        }
        let floor = 1.0 / (kf * kf);
        if let Some((i, bi)) = self.b.iter().enumerate().find(|(_, &bi)| bi < floor) {
            return Err(Error::Certification(format!("weight b[{i}] = {bi:e} is below 1/k^2")));
        }
        let row_defect = self.row_sum_defect();
        if row_defect > 1e-13 * scale {
            return Err(Error::Certification(format!(
                "row sums deviate from c by {row_defect:e}"
            )));
        }
        Ok(())
    }

    /// `max_i |sum_j a_ij - c_i|`.
    pub fn row_sum_defect(&self) -> f64 {
        self.a
            .row_iter()
            .zip(&self.c)
            .map(|(row, ci)| (row.sum() - ci).abs())
            .fold(0.0, f64::max)
    }

    /// JSON export: `{s, k, c, b, A (row-major), X (triplets)}` with every value
    /// printed with 17 significant digits.
    pub fn to_json(&self) -> String {
        let num = |v: f64| format!("{v:.16e}");
        let list = |xs: &[f64]| xs.iter().map(|&v| num(v)).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        let _ = writeln!(out, "{{");
        let _ = writeln!(out, "  \"s\": {},", self.s);
        let _ = writeln!(out, "  \"k\": {},", self.k);
        let _ = writeln!(out, "  \"c\": [{}],", list(&self.c));
        let _ = writeln!(out, "  \"b\": [{}],", list(&self.b));
        let rows: Vec<String> = self
            .a
            .row_iter()
            .map(|r| format!("    [{}]", list(&r.iter().copied().collect::<Vec<_>>())))
            .collect();
        let _ = writeln!(out, "  \"A\": [\n{}\n  ],", rows.join(",\n"));
        let triplets: Vec<String> = self
            .x
            .triplets()
            .iter()
            .map(|&(i, j, v)| format!("      [{i}, {j}, {}]", num(v)))
            .collect();
        let _ = writeln!(
            out,
            "  \"X\": {{\n    \"rows\": {},\n    \"cols\": {},\n    \"triplets\": [\n{}\n    ]\n  }}",
            self.x.rows(),
            self.s,
            triplets.join(",\n")
        );
        out.push('}');
        out.push('\n');
        out
    }
}

/// Residuals of the symmetry conditions `reverse(b) = b` and
/// `Pi A Pi = 1 b^T - A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryDefects {
    pub max_defect_b: f64,
    pub max_defect_a: f64,
}

pub fn symmetry_certificate(t: &ButcherTableau) -> Result<SymmetryDefects> {
    if !t.is_square() {
        return Err(Error::InvalidConfig(
            "symmetry certificate needs a square tableau (k = s)".into(),
        ));
    }
    let n = t.k;
    let mut max_defect_b = 0.0f64;
    let mut max_defect_a = 0.0f64;
    for i in 0..n {
        max_defect_b = max_defect_b.max((t.b[n - 1 - i] - t.b[i]).abs());
        for j in 0..n {
            let flipped = t.a[(n - 1 - i, n - 1 - j)];
            max_defect_a = max_defect_a.max((flipped - (t.b[j] - t.a[(i, j)])).abs());
        }
    }
    Ok(SymmetryDefects {
        max_defect_b,
        max_defect_a,
    })
}

/// Linear stability function `R(z) = 1 + z b^T (I - z A)^{-1} 1`.
pub fn stability_function(t: &ButcherTableau, z: Complex<f64>) -> Result<Complex<f64>> {
    let n = t.k;
    let m = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j {
            Complex::new(1.0, 0.0)
        } else {
            Complex::new(0.0, 0.0)
        };
        id - z * t.a[(i, j)]
    });
    let rhs = DVector::from_element(n, Complex::new(1.0, 0.0));
    let v = m.lu().solve(&rhs).ok_or(Error::Singular)?;
    let dot: Complex<f64> = t.b.iter().zip(v.iter()).map(|(&bi, vi)| vi * bi).sum();
    let r = Complex::new(1.0, 0.0) + z * dot;
    if r.re.is_finite() && r.im.is_finite() {
        Ok(r)
    } else {
        Err(Error::Singular)
    }
}

/// Eigenvalues of the dense `X_s`.
pub fn spectral_factor_eigenvalues(s: usize) -> Result<Vec<Complex<f64>>> {
    let x = build_spectral_factor(s, false)?.to_dense();
    let schur = Schur::try_new(x, f64::EPSILON, 1000 * s.max(10)).ok_or(Error::EigenNoConvergence(s))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Smallest real part over the spectrum of `X_s`.
pub fn min_eig_realpart(s: usize) -> Result<f64> {
    Ok(spectral_factor_eigenvalues(s)?
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min))
}
