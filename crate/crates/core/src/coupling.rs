//! Matrix of cos²θ in the |J,M⟩ basis.
//!
//! Within a parity block cos²θ only connects J to J and J±2, so the matrix is
//! symmetric tridiagonal in grid index. Elements come from the closed form of
//! the P₂ matrix elements; [`quadrature_element`] evaluates the same integrals
//! by Gauss–Legendre quadrature and serves as an independent check.

use nalgebra::{DMatrix, DVector};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};

/// Banded storage of ⟨J′,M|cos²θ|J,M⟩ on one parity block.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    basis: BasisSpec,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl CouplingMatrix {
    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    /// ⟨J,M|cos²θ|J,M⟩ for each grid J.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// ⟨J+2,M|cos²θ|J,M⟩ for each grid J except the top one.
    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, k| {
            if i == k {
                self.diag[i]
            } else if i + 1 == k {
                self.offdiag[i]
            } else if k + 1 == i {
                self.offdiag[k]
            } else {
                0.0
            }
        })
    }

    /// y = C·x for any scalar type that real numbers scale.
    pub fn apply<T>(&self, x: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let n = self.dim();
        assert_eq!(x.len(), n, "vector length does not match the coupling matrix");
        (0..n)
            .map(|i| {
                let mut acc = x[i] * self.diag[i];
                if i > 0 {
                    acc = acc + x[i - 1] * self.offdiag[i - 1];
                }
                if i + 1 < n {
                    acc = acc + x[i + 1] * self.offdiag[i];
                }
                acc
            })
            .collect()
    }

    /// Eigenvalues λ and orthonormal eigenvectors V with C = V·diag(λ)·Vᵀ.
    pub fn eigen(&self) -> Result<CouplingEigen> {
        let eig = nalgebra::SymmetricEigen::try_new(self.to_dense(), f64::EPSILON, 0).ok_or_else(|| {
            Error::Eigen(format!("cos²θ coupling matrix on {}", self.basis))
        })?;
        Ok(CouplingEigen { values: eig.eigenvalues, vectors: eig.eigenvectors })
    }
}

/// Spectral decomposition of a [`CouplingMatrix`].
#[derive(Debug, Clone)]
pub struct CouplingEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// ⟨J,M|cos²θ|J,M⟩ = 1/3 + (2/3)·[J(J+1) − 3M²] / [(2J−1)(2J+3)].
pub fn diagonal_element(j: u32, m: i32) -> f64 {
    let j = j as f64;
    let m2 = (m as f64).powi(2);
    1.0 / 3.0 + (2.0 / 3.0) * (j * (j + 1.0) - 3.0 * m2) / ((2.0 * j - 1.0) * (2.0 * j + 3.0))
}

/// ⟨J+2,M|cos²θ|J,M⟩.
pub fn offdiagonal_element(j: u32, m: i32) -> f64 {
    let j = j as f64;
    let m2 = (m as f64).powi(2);
    let num = (((j + 1.0).powi(2) - m2) * ((j + 2.0).powi(2) - m2)).sqrt();
    num / ((2.0 * j + 3.0) * ((2.0 * j + 1.0) * (2.0 * j + 5.0)).sqrt())
}

pub fn cos2_matrix(basis: &BasisSpec) -> CouplingMatrix {
    let m = basis.m();
    let diag = basis.js().map(|j| diagonal_element(j, m)).collect();
    let offdiag = basis.js().take(basis.dim() - 1).map(|j| offdiagonal_element(j, m)).collect();
    CouplingMatrix { basis: *basis, diag, offdiag }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order > 0, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = x;
            nodes[n - 1 - i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.order() - 1
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

/// Associated Legendre function normalized to ∫₋₁¹ Θ² dx = 1.
pub fn normalized_legendre(l: u32, m: u32, x: f64) -> f64 {
    assert!(m <= l, "need m ≤ l");
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..=m {
        let k = k as f64;
        pmm *= -((2.0 * k + 1.0) / (2.0 * k)).sqrt() * s;
    }
    if l == m {
        return pmm;
    }
    let mf = m as f64;
    let mut prev = pmm;
    let mut cur = x * (2.0 * mf + 3.0).sqrt() * pmm;
    for ll in (m + 2)..=l {
        let lf = ll as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        let next = a * (x * cur - b * prev);
        prev = cur;
        cur = next;
    }
    cur
}

/// ⟨J1,M|cos²θ|J2,M⟩ by quadrature with the given rule.
///
/// The integrand is a polynomial of degree J1+J2+2 in cosθ, so the rule must
/// be exact to that degree.
pub fn quadrature_element(rule: &GaussLegendre, j1: u32, j2: u32, m: i32) -> Result<f64> {
    let am = m.unsigned_abs();
    if j1 < am || j2 < am {
        return Err(Error::InvalidBasis(format!("J1={j1}, J2={j2} must both be ≥ |M|={am}")));
    }
    let needed = (j1 + j2 + 2) as usize;
    if rule.exact_degree() < needed {
        return Err(Error::QuadratureOrder { order: rule.order(), exact: rule.exact_degree(), needed });
    }
    Ok(rule.integrate(|x| normalized_legendre(j1, am, x) * x * x * normalized_legendre(j2, am, x)))
}
