//! Symmetric-free conical product quadrature on the reference tetrahedron.
//!
//! The rule is the tensor product of three one-dimensional Gauss rules under
//! the collapsed coordinates `x = u`, `y = v (1-u)`, `z = w (1-u)(1-v)` whose
//! Jacobian is `(1-u)^2 (1-v)`: Gauss-Jacobi with weight `(1-t)^2` in `u`,
//! weight `(1-t)` in `v`, and Gauss-Legendre in `w`. With `n` points per
//! direction the rule integrates every polynomial of total degree `2n - 1`
//! exactly and all weights are positive.

use crate::Real;

/// Quadrature points (barycentric) and weights on the reference tet.
/// Weights sum to the reference volume `1/6`.
#[derive(Clone, Debug)]
pub struct QuadratureRule<S> {
    pub points: Vec<[S; 4]>,
    pub weights: Vec<S>,
    /// Largest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl<S: Real> QuadratureRule<S> {
    /// Smallest conical rule exact for total degree `degree`.
    pub fn for_degree(degree: usize) -> Self {
        let n = degree / 2 + 1; // 2n - 1 >= degree
        let (xu, wu) = gauss_jacobi_unit(n, 2);
        let (xv, wv) = gauss_jacobi_unit(n, 1);
        let (xw, ww) = gauss_jacobi_unit(n, 0);
        let mut points = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let u = xu[i];
                    let v = xv[j] * (1.0 - u);
                    let w = xw[k] * (1.0 - u) * (1.0 - xv[j]);
                    let l0 = 1.0 - u - v - w;
                    points.push([S::of(l0), S::of(u), S::of(v), S::of(w)]);
                    weights.push(S::of(wu[i] * wv[j] * ww[k]));
                }
            }
        }
        QuadratureRule { points, weights, degree: 2 * n - 1 }
    }

    /// The default rule used by all assembly (degree 5).
    pub fn default_rule() -> Self {
        Self::for_degree(5)
    }

    /// Higher-order rule used for non-polynomial reference integrands.
    pub fn oracle_rule() -> Self {
        Self::for_degree(9)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `n`-point Gauss rule for `int_0^1 f(t) (1-t)^k dt`, computed in `f64`.
///
/// Nodes are the roots of the monic Jacobi-type orthogonal polynomial,
/// located by interlacing bisection on the three-term recurrence; weights
/// come from matching the moments `m_j = j! k! / (j+k+1)!`.
fn gauss_jacobi_unit(n: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && n <= 16);
    let kf = k as f64;
    // Monic recurrence p_{j+1} = (t - a_j) p_j - b_j p_{j-1} on [0,1],
    // mapped from the classical Jacobi (alpha = k, beta = 0) coefficients.
    let a = |j: usize| -> f64 {
        let jf = j as f64;
        let am1 = if j == 0 {
            -kf / (kf + 2.0)
        } else {
            -(kf * kf) / ((2.0 * jf + kf) * (2.0 * jf + kf + 2.0))
        };
        (am1 + 1.0) / 2.0
    };
    let b = |j: usize| -> f64 {
        let jf = j as f64;
        let bm1 = if j == 1 {
            4.0 * (kf + 1.0) / ((kf + 2.0) * (kf + 2.0) * (kf + 3.0))
        } else {
            let s = 2.0 * jf + kf;
            4.0 * jf * jf * (jf + kf) * (jf + kf) / (s * s * (s + 1.0) * (s - 1.0))
        };
        bm1 / 4.0
    };
    let eval = |m: usize, t: f64| -> f64 {
        let (mut pm1, mut p) = (0.0, 1.0);
        for j in 0..m {
            let next = (t - a(j)) * p - if j == 0 { 0.0 } else { b(j) } * pm1;
            pm1 = p;
            p = next;
        }
        p
    };

    // Roots of p_m interlace those of p_{m-1}; grow the root set degree by degree.
    let mut roots = vec![a(0)];
    for m in 2..=n {
        let mut brackets = Vec::with_capacity(m + 1);
        brackets.push(0.0);
        brackets.extend_from_slice(&roots);
        brackets.push(1.0);
        let mut next = Vec::with_capacity(m);
        for w in brackets.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let flo = eval(m, lo);
            for _ in 0..120 {
                let mid = 0.5 * (lo + hi);
                if (eval(m, mid) > 0.0) == (flo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            next.push(0.5 * (lo + hi));
        }
        roots = next;
    }

    // Weights from the Vandermonde moment system V^T w = m.
    let moment = |j: usize| -> f64 {
        // j! k! / (j + k + 1)!
        let mut v = 1.0;
        for i in 1..=k {
            v *= i as f64;
        }
        for i in (j + 1)..=(j + k + 1) {
            v /= i as f64;
        }
        v
    };
    let mut mat = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        for (i, &t) in roots.iter().enumerate() {
            mat[j][i] = t.powi(j as i32);
        }
        rhs[j] = moment(j);
    }
    let weights = solve_dense(&mut mat, &mut rhs);
    (roots, weights)
}

/// Gaussian elimination with partial pivoting for the small weight systems.
fn solve_dense(mat: &mut [Vec<f64>], rhs: &mut [f64]) -> Vec<f64> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| mat[i][col].abs().total_cmp(&mat[j][col].abs()))
            .unwrap();
        mat.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in (col + 1)..n {
            let f = mat[row][col] / mat[col][col];
            for c in col..n {
                mat[row][c] -= f * mat[col][c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for c in (row + 1)..n {
            s -= mat[row][c] * x[c];
        }
        x[row] = s / mat[row][row];
    }
    x
}
