//! Pointwise-evaluable fields over a mesh and the matrix coefficient `A`.
//!
//! Quadrature loops evaluate integrands at `(tet, physical point, barycentric
//! point)`; anything implementing [`ScalarField`] or [`VectorField`] can be
//! integrated, assembled against, or combined. Plain closures of the physical
//! point implement the traits, so exact reference solutions slot in directly.

use crate::Real;

/// Scalar-valued field evaluable inside a tet.
pub trait ScalarField<S> {
    fn eval(&self, tet: usize, x: &[S; 3], bary: &[S; 4]) -> S;
}

/// 3-vector-valued field evaluable inside a tet.
pub trait VectorField<S> {
    fn eval(&self, tet: usize, x: &[S; 3], bary: &[S; 4]) -> [S; 3];
}

impl<S, F: Fn(&[S; 3]) -> S> ScalarField<S> for F {
    fn eval(&self, _tet: usize, x: &[S; 3], _bary: &[S; 4]) -> S {
        self(x)
    }
}

impl<S, F: Fn(&[S; 3]) -> [S; 3]> VectorField<S> for F {
    fn eval(&self, _tet: usize, x: &[S; 3], _bary: &[S; 4]) -> [S; 3] {
        self(x)
    }
}

/// Borrow adapter: lets a `&F` participate in the field combinators without
/// a blanket impl for references (which would collide with the closure impls).
pub struct ByRef<'a, F>(pub &'a F);

impl<S, F: ScalarField<S>> ScalarField<S> for ByRef<'_, F> {
    fn eval(&self, tet: usize, x: &[S; 3], bary: &[S; 4]) -> S {
        self.0.eval(tet, x, bary)
    }
}

impl<S, F: VectorField<S>> VectorField<S> for ByRef<'_, F> {
    fn eval(&self, tet: usize, x: &[S; 3], bary: &[S; 4]) -> [S; 3] {
        self.0.eval(tet, x, bary)
    }
}

/// Pointwise difference `a - b` of two vector fields.
pub struct VDiff<A, B>(pub A, pub B);

impl<S: Real, A: VectorField<S>, B: VectorField<S>> VectorField<S> for VDiff<A, B> {
    fn eval(&self, tet: usize, x: &[S; 3], bary: &[S; 4]) -> [S; 3] {
        let a = self.0.eval(tet, x, bary);
        let b = self.1.eval(tet, x, bary);
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }
}

/// `A f` for a vector field `f`.
pub struct VApply<'c, S, F>(pub &'c CoefficientField<S>, pub F);

impl<S: Real, F: VectorField<S>> VectorField<S> for VApply<'_, S, F> {
    fn eval(&self, tet: usize, x: &[S; 3], bary: &[S; 4]) -> [S; 3] {
        self.0.at(tet).apply(self.1.eval(tet, x, bary))
    }
}

/// `A^{-1} f` for a vector field `f`.
pub struct VApplyInv<'c, S, F>(pub &'c CoefficientField<S>, pub F);

impl<S: Real, F: VectorField<S>> VectorField<S> for VApplyInv<'_, S, F> {
    fn eval(&self, tet: usize, x: &[S; 3], bary: &[S; 4]) -> [S; 3] {
        self.0.at(tet).inverse().apply(self.1.eval(tet, x, bary))
    }
}

/// Symmetric 3x3 matrix, stored as `(xx, yy, zz, xy, xz, yz)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat3<S> {
    pub data: [S; 6],
}

impl<S: Real> SymMat3<S> {
    pub fn identity() -> Self {
        Self::diagonal([S::one(), S::one(), S::one()])
    }

    pub fn diagonal(d: [S; 3]) -> Self {
        SymMat3 { data: [d[0], d[1], d[2], S::zero(), S::zero(), S::zero()] }
    }

    pub fn scaled_identity(s: S) -> Self {
        Self::diagonal([s, s, s])
    }

    pub fn entry(&self, i: usize, j: usize) -> S {
        let [xx, yy, zz, xy, xz, yz] = self.data;
        match (i.min(j), i.max(j)) {
            (0, 0) => xx,
            (1, 1) => yy,
            (2, 2) => zz,
            (0, 1) => xy,
            (0, 2) => xz,
            (1, 2) => yz,
            _ => unreachable!("index out of range"),
        }
    }

    pub fn apply(&self, v: [S; 3]) -> [S; 3] {
        let [xx, yy, zz, xy, xz, yz] = self.data;
        [
            xx * v[0] + xy * v[1] + xz * v[2],
            xy * v[0] + yy * v[1] + yz * v[2],
            xz * v[0] + yz * v[1] + zz * v[2],
        ]
    }

    pub fn det(&self) -> S {
        let [xx, yy, zz, xy, xz, yz] = self.data;
        xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) + xz * (xy * yz - yy * xz)
    }

    pub fn inverse(&self) -> SymMat3<S> {
        let [xx, yy, zz, xy, xz, yz] = self.data;
        let det = self.det();
        SymMat3 {
            data: [
                (yy * zz - yz * yz) / det,
                (xx * zz - xz * xz) / det,
                (xx * yy - xy * xy) / det,
                (xz * yz - xy * zz) / det,
                (xy * yz - xz * yy) / det,
                (xy * xz - xx * yz) / det,
            ],
        }
    }

    /// Smallest eigenvalue, by the trigonometric closed form for symmetric
    /// 3x3 matrices.
    pub fn min_eigenvalue(&self) -> S {
        let [xx, yy, zz, xy, xz, yz] = self.data;
        let p1 = xy * xy + xz * xz + yz * yz;
        if p1 == S::zero() {
            return xx.min(yy).min(zz);
        }
        let third = S::one() / S::of(3.0);
        let q = (xx + yy + zz) * third;
        let p2 = (xx - q) * (xx - q) + (yy - q) * (yy - q) + (zz - q) * (zz - q)
            + S::of(2.0) * p1;
        let p = (p2 / S::of(6.0)).sqrt();
        let b = SymMat3 {
            data: [(xx - q) / p, (yy - q) / p, (zz - q) / p, xy / p, xz / p, yz / p],
        };
        let r = (b.det() / S::of(2.0)).max(-S::one()).min(S::one());
        let phi = r.acos() * third;
        // smallest root of the characteristic polynomial
        q + S::of(2.0) * p * (phi + S::of(2.0) * S::PI() * third).cos()
    }

    pub fn is_spd(&self) -> bool {
        self.min_eigenvalue() > S::zero()
    }
}

/// The diffusion coefficient `A`: symmetric positive definite, constant per tet.
#[derive(Clone, Debug)]
pub enum CoefficientField<S> {
    Identity,
    Uniform(SymMat3<S>),
    PerTet(Vec<SymMat3<S>>),
}

impl<S: Real> CoefficientField<S> {
    pub fn at(&self, tet: usize) -> SymMat3<S> {
        match self {
            CoefficientField::Identity => SymMat3::identity(),
            CoefficientField::Uniform(m) => *m,
            CoefficientField::PerTet(v) => v[tet],
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, CoefficientField::Identity)
    }

    /// Smallest eigenvalue over the first `n_tets` tets, `None` for empty input.
    pub fn min_eigenvalue(&self, n_tets: usize) -> Option<S> {
        match self {
            CoefficientField::Identity => Some(S::one()),
            CoefficientField::Uniform(m) => Some(m.min_eigenvalue()),
            CoefficientField::PerTet(v) => v[..n_tets.min(v.len())]
                .iter()
                .map(|m| m.min_eigenvalue())
                .fold(None, |acc, e| Some(acc.map_or(e, |a: S| a.min(e)))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_eigenvalue_of_diagonal() {
        let m = SymMat3::<f64>::diagonal([4.0, 1.0, 9.0]);
        assert!((m.min_eigenvalue() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn min_eigenvalue_of_full_matrix() {
        // eigenvalues of [[2,1,0],[1,2,0],[0,0,5]] are 1, 3, 5
        let m = SymMat3::<f64> { data: [2.0, 2.0, 5.0, 1.0, 0.0, 0.0] };
        assert!((m.min_eigenvalue() - 1.0).abs() < 1e-12);
        assert!(m.is_spd());
    }

    #[test]
    fn inverse_of_spd_matrix() {
        let m = SymMat3::<f64> { data: [2.0, 3.0, 4.0, 0.5, 0.25, -0.5] };
        let inv = m.inverse();
        let v = [1.0, -2.0, 3.0];
        let back = m.apply(inv.apply(v));
        for k in 0..3 {
            assert!((back[k] - v[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_detected() {
        let m = SymMat3::<f64>::diagonal([1.0, -0.5, 2.0]);
        assert!(!m.is_spd());
    }
}
