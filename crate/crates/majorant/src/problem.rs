//! Problem data, weighted norms, coercivity constants and the closed-form
//! reference solution for the exterior of the unit ball.

use crate::fem::{weighted_sq_norm, FeGradient, FeScalar, FeSpace, FeVector, QuadratureRule};
use crate::fields::{CoefficientField, ScalarField};
use crate::mesh::{dot, BoundaryTag};
use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("dimension must be at least 3, got {0}")]
    DimensionTooSmall(u32),
    #[error("coefficient is not symmetric positive definite")]
    NotSpd,
    #[error("unsupported weight exponent {0}, expected -1, 0 or 1")]
    UnsupportedWeight(i32),
    #[error("point with |x| = {0} is outside the exterior domain")]
    OutsideDomain(f64),
    #[error("function does not vanish on the {tag:?} boundary (node {node})")]
    NotZeroTrace { tag: BoundaryTag, node: u32 },
}

/// `c_N = 2/(N-2)` and `c_{N,alpha} = alpha c_N`, the constants of the
/// exterior-domain coercivity estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants<S> {
    pub c_n: S,
    pub c_n_alpha: S,
}

pub fn constants<S: Real>(dimension: u32, alpha: S) -> Result<Constants<S>, ProblemError> {
    if dimension < 3 {
        return Err(ProblemError::DimensionTooSmall(dimension));
    }
    let c_n = S::of(2.0) / S::of((dimension - 2) as f64);
    Ok(Constants { c_n, c_n_alpha: alpha * c_n })
}

/// Shape of the inner boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    /// Exterior of the closed unit ball.
    Ball,
    /// Exterior of the closed cube `[-1,1]^3`.
    Cube,
}

/// Per-tet affine scalar source term.
#[derive(Clone, Debug)]
pub struct AffineScalar<S> {
    pub constant: S,
    pub gradient: [S; 3],
}

/// The source `f`, supported inside the truncated domain only.
#[derive(Clone, Debug, Default)]
pub enum SourceField<S> {
    #[default]
    Zero,
    PerTet(Vec<AffineScalar<S>>),
}

impl<S: Real> SourceField<S> {
    pub fn is_zero(&self) -> bool {
        matches!(self, SourceField::Zero)
    }
}

impl<S: Real> ScalarField<S> for SourceField<S> {
    fn eval(&self, tet: usize, x: &[S; 3], _bary: &[S; 4]) -> S {
        match self {
            SourceField::Zero => S::zero(),
            SourceField::PerTet(polys) => {
                let p = &polys[tet];
                p.constant + dot(p.gradient, *x)
            }
        }
    }
}

/// Data of one exterior Dirichlet problem on the truncated domain.
///
/// `alpha` is always derived from the coefficient (smallest eigenvalue scan),
/// never user supplied, so the ellipticity invariant is machine checkable.
#[derive(Clone, Debug)]
pub struct ProblemSpec<S> {
    /// Space dimension for the constants; the geometry itself is fixed at 3.
    pub dimension: u32,
    pub geometry: Geometry,
    pub coefficient: CoefficientField<S>,
    pub source: SourceField<S>,
    /// Constant Dirichlet value on the inner boundary.
    pub boundary_value: S,
    /// Truncation radius of the artificial sphere.
    pub radius: S,
}

impl<S: Real> ProblemSpec<S> {
    /// The Dirichlet Laplace model problem: `A = id`, `f = 0`, `u_0 = 1`.
    pub fn laplace(geometry: Geometry, radius: S) -> Self {
        ProblemSpec {
            dimension: 3,
            geometry,
            coefficient: CoefficientField::Identity,
            source: SourceField::Zero,
            boundary_value: S::one(),
            radius,
        }
    }

    /// Ellipticity constant: `alpha = (min eigenvalue of A)^{-1/2}`.
    pub fn alpha(&self, n_tets: usize) -> Result<S, ProblemError> {
        alpha_from_coefficient(&self.coefficient, n_tets)
    }

    pub fn constants(&self, n_tets: usize) -> Result<Constants<S>, ProblemError> {
        constants(self.dimension, self.alpha(n_tets)?)
    }
}

/// `alpha` such that `A >= alpha^{-2} id` with equality on some tet.
pub fn alpha_from_coefficient<S: Real>(
    coeff: &CoefficientField<S>,
    n_tets: usize,
) -> Result<S, ProblemError> {
    let min = coeff.min_eigenvalue(n_tets).ok_or(ProblemError::NotSpd)?;
    if !(min > S::zero()) {
        return Err(ProblemError::NotSpd);
    }
    Ok(S::one() / min.sqrt())
}

/// `||u||_{L^2_s}` of a finite element function over the mesh (octant value).
pub fn weighted_norm<S: Real>(
    space: &FeSpace<S>,
    coeffs: &[S],
    s: i32,
    quad: &QuadratureRule<S>,
) -> Result<S, ProblemError> {
    if !(-1..=1).contains(&s) {
        return Err(ProblemError::UnsupportedWeight(s));
    }
    let mesh = space.mesh;
    let value = if space.components == 1 {
        let f = FeScalar { space, coeffs };
        weighted_sq_norm(mesh, quad, s, &f)
    } else {
        let f = FeVector { space, coeffs };
        let mut total = S::zero();
        for t in 0..mesh.tets.len() {
            let geom = crate::fem::tet_geometry(mesh, t);
            let scale = S::of(6.0) * geom.volume.abs();
            for (bary, &w) in quad.points.iter().zip(&quad.weights) {
                let x = geom.point(bary);
                let v = f.value(t, bary);
                let rho2 = S::one() + dot(x, x);
                total += w * scale * dot(v, v) * rho2.powi(s);
            }
        }
        total
    };
    Ok(value.sqrt())
}

/// Energy norm (octant value): `||grad u||_{L^2, A}` for scalar functions,
/// `||w||_{L^2, A}` for vector fields.
pub fn energy_norm<S: Real>(
    space: &FeSpace<S>,
    coeffs: &[S],
    coeff: &CoefficientField<S>,
    quad: &QuadratureRule<S>,
) -> S {
    let mesh = space.mesh;
    let sq = if space.components == 1 {
        let f = FeGradient(FeScalar { space, coeffs });
        crate::fem::a_norm_sq(mesh, quad, coeff, &f)
    } else {
        let f = FeVector { space, coeffs };
        crate::fem::a_norm_sq(mesh, quad, coeff, &f)
    };
    sq.sqrt()
}

/// Value `1/|x|` and gradient `-x/|x|^3` of the reference solution on the
/// exterior of the unit ball.
pub fn exact_solution_ball<S: Real>(point: &[S; 3]) -> Result<(S, [S; 3]), ProblemError> {
    let r = dot(*point, *point).sqrt();
    if r < S::of(1.0 - 1e-9) {
        return Err(ProblemError::OutsideDomain(r.to_f64().unwrap_or(f64::NAN)));
    }
    let r3 = r * r * r;
    Ok((S::one() / r, [-point[0] / r3, -point[1] / r3, -point[2] / r3]))
}

/// Gradient of the ball reference solution as a plain vector field closure.
pub fn exact_gradient_ball<S: Real>() -> impl Fn(&[S; 3]) -> [S; 3] {
    |x: &[S; 3]| {
        let r2 = dot(*x, *x);
        let r3 = r2 * r2.sqrt();
        [-x[0] / r3, -x[1] / r3, -x[2] / r3]
    }
}

/// Both sides of the coercivity estimate
/// `||u||_{L^2_{-1}} <= c_{N,alpha} ||grad u||_{L^2,A}`
/// for a scalar function vanishing on the Gamma and Sphere dofs.
pub fn poincare_check<S: Real>(
    space: &FeSpace<S>,
    coeffs: &[S],
    coeff: &CoefficientField<S>,
    consts: &Constants<S>,
    quad: &QuadratureRule<S>,
) -> Result<(S, S), ProblemError> {
    for tag in [BoundaryTag::Gamma, BoundaryTag::Sphere] {
        for node in space.nodes_with_tag(tag) {
            if coeffs[node as usize] != S::zero() {
                return Err(ProblemError::NotZeroTrace { tag, node });
            }
        }
    }
    let lhs = weighted_norm(space, coeffs, -1, quad)?;
    let rhs = consts.c_n_alpha * energy_norm(space, coeffs, coeff, quad);
    Ok((lhs, rhs))
}
