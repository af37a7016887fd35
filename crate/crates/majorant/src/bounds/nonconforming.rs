//! Two-sided bounds for flux approximations that are only square integrable.
//!
//! Given a per-tet polynomial flux field `v~` (no continuity across faces)
//! with tail amplitude `zeta~`, the squared error `|grad(u_exact) - A^{-1}
//! v~|^2_A` is bounded from above by
//!
//! ```text
//! M_plus = inf_v M_+^2(A^{-1} v~, v)  +  inf_u |grad u - A^{-1} v~|^2_A
//! ```
//!
//! (first infimum over the constrained flux space, exactly the conforming
//! majorant machinery; second over the P2 affine space whose traces match the
//! boundary value and the tail) and from below by
//!
//! ```text
//! M_minus = sup_u M_-(A^{-1} v~, u)  +  (2 grad(u*) - A^{-1}(2 v~ + psi), A^{-1} psi)_A
//! ```
//!
//! where `psi` is the divergence-free part of a discrete Helmholtz split of
//! the gradient error and `u*` the affine-space minimizer. A triangle
//! inequality variant gives the weaker family
//! `(1 + 4/theta) inf M_+^2 + (4 + theta) inf M~_+^2`, which for `theta = 1`
//! is exactly five times the sharp upper bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::{
    a_norm_sq, apply_constraints, assemble_gradient_rhs, assemble_source_rhs, assemble_stiffness,
    l2_dot, solve_cg, CgOptions, ConstraintSet, Degree, FeGradient, FeScalar, FeSpace,
    QuadratureRule,
};
use crate::fields::{ByRef, VApply, VApplyInv, VDiff, VectorField};
use crate::mesh::{dot, BoundaryTag, TetMesh};
use crate::problem::{exact_gradient_ball, Geometry, ProblemSpec};
use crate::truncation::{tail_energy, TruncatedApproximation};
use crate::Real;

use super::conforming::{minimize_majorant, maximize_minorant, MajorantConfig, MajorantOutcome};
use super::BoundsError;

/// Gradient of the ball reference solution `u0 / r`.
fn scaled_ball_gradient<S: Real>(u0: S) -> impl Fn(&[S; 3]) -> [S; 3] {
    let base = exact_gradient_ball::<S>();
    move |x: &[S; 3]| {
        let g = base(x);
        [u0 * g[0], u0 * g[1], u0 * g[2]]
    }
}

/// Affine vector polynomial `v(x) = value + jac (x - base)` on one tet.
#[derive(Clone, Copy, Debug)]
pub struct AffineVec3<S> {
    pub base: [S; 3],
    pub value: [S; 3],
    pub jac: [[S; 3]; 3],
}

impl<S: Real> AffineVec3<S> {
    pub fn constant(value: [S; 3]) -> Self {
        AffineVec3 { base: [S::zero(); 3], value, jac: [[S::zero(); 3]; 3] }
    }

    pub fn eval(&self, x: &[S; 3]) -> [S; 3] {
        let d = [x[0] - self.base[0], x[1] - self.base[1], x[2] - self.base[2]];
        let mut out = self.value;
        for i in 0..3 {
            for j in 0..3 {
                out[i] += self.jac[i][j] * d[j];
            }
        }
        out
    }
}

/// A flux approximation: per-tet affine 3-vector data on the mesh, plus the
/// tail amplitude defining `-zeta~ r^{-2} e_r` outside the sphere. No
/// continuity across faces is assumed.
#[derive(Clone, Debug)]
pub struct FluxApproximation<S> {
    pub per_tet: Vec<AffineVec3<S>>,
    pub zeta: S,
}

impl<S: Real> VectorField<S> for FluxApproximation<S> {
    fn eval(&self, tet: usize, x: &[S; 3], _bary: &[S; 4]) -> [S; 3] {
        self.per_tet[tet].eval(x)
    }
}

impl<S: Real> FluxApproximation<S> {
    /// `A grad(u~)` of a P1 approximation: per-tet constant, conforming input.
    pub fn from_conforming(
        space: &FeSpace<S>,
        problem: &ProblemSpec<S>,
        approx: &TruncatedApproximation<S>,
    ) -> Self {
        let center = [S::of(0.25); 4];
        let fe = FeScalar { space, coeffs: &approx.coeffs };
        let per_tet = (0..space.mesh.tets.len())
            .map(|t| {
                let g = fe.gradient(t, &center);
                AffineVec3::constant(problem.coefficient.at(t).apply(g))
            })
            .collect();
        FluxApproximation { per_tet, zeta: approx.zeta }
    }

    /// Per-tet affine interpolant of a pointwise field (matched at vertices).
    pub fn from_point_function(
        mesh: &TetMesh<S>,
        f: impl Fn(&[S; 3]) -> [S; 3],
        zeta: S,
    ) -> Self {
        let per_tet = (0..mesh.tets.len())
            .map(|t| {
                let geom = crate::fem::tet_geometry(mesh, t);
                let values: Vec<[S; 3]> = geom.vertices.iter().map(|p| f(p)).collect();
                let mut jac = [[S::zero(); 3]; 3];
                for k in 0..4 {
                    for i in 0..3 {
                        for j in 0..3 {
                            jac[i][j] += values[k][i] * geom.lambda_grads[k][j];
                        }
                    }
                }
                AffineVec3 { base: geom.vertices[0], value: values[0], jac }
            })
            .collect();
        FluxApproximation { per_tet, zeta }
    }

    /// Adds `delta` times a seeded per-tet constant perturbation with zero
    /// volume-weighted average and unit `L^2` norm over the mesh. The jumps
    /// across faces make the result genuinely non-conforming while keeping
    /// `|perturbed - self|_{L^2} = delta` exactly.
    pub fn perturbed(&self, mesh: &TetMesh<S>, delta: S, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = mesh.tets.len();
        let mut w: Vec<[S; 3]> = (0..n)
            .map(|_| {
                [
                    S::of(rng.gen_range(-1.0..1.0)),
                    S::of(rng.gen_range(-1.0..1.0)),
                    S::of(rng.gen_range(-1.0..1.0)),
                ]
            })
            .collect();
        let volumes: Vec<S> = (0..n).map(|t| mesh.signed_volume(t).abs()).collect();
        let total: S = volumes.iter().fold(S::zero(), |a, &v| a + v);
        let mut mean = [S::zero(); 3];
        for (wt, &v) in w.iter().zip(&volumes) {
            for c in 0..3 {
                mean[c] += v * wt[c];
            }
        }
        for m in &mut mean {
            *m = *m / total;
        }
        let mut norm_sq = S::zero();
        for (wt, &v) in w.iter_mut().zip(&volumes) {
            for c in 0..3 {
                wt[c] -= mean[c];
            }
            norm_sq += v * dot(*wt, *wt);
        }
        let scale = delta / norm_sq.sqrt();
        let per_tet = self
            .per_tet
            .iter()
            .zip(&w)
            .map(|(a, wt)| {
                let mut out = *a;
                for c in 0..3 {
                    out.value[c] += scale * wt[c];
                }
                out
            })
            .collect();
        FluxApproximation { per_tet, zeta: self.zeta }
    }
}

/// Reference gradient used to build the error field for the Helmholtz split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NcReference {
    /// Closed-form solution of the unit-ball problem.
    ExactBall,
    /// P2 Galerkin solution in the affine space tied to the flux tail;
    /// keeps the split discretely consistent and is the only option when no
    /// closed-form solution exists (surrogate truth).
    DiscreteP2,
}

#[derive(Clone, Debug)]
pub struct NcConfig<S> {
    pub majorant: MajorantConfig<S>,
    pub cg: CgOptions<S>,
    pub thetas: Vec<S>,
    pub reference: NcReference,
}

impl<S: Real> Default for NcConfig<S> {
    fn default() -> Self {
        NcConfig {
            majorant: MajorantConfig::default(),
            cg: CgOptions::default(),
            thetas: vec![S::of(0.5), S::one(), S::of(2.0)],
            reference: NcReference::DiscreteP2,
        }
    }
}

/// Discrete Helmholtz split of a gradient-error field `E`:
/// `E = grad(phi) + A^{-1} psi` with `phi` interior-zero P2 and `psi`
/// orthogonal to all discrete gradients. Norms are octant values.
#[derive(Clone, Debug)]
pub struct HelmholtzSplit<S> {
    /// Coefficients of the gradient-potential part (interior-zero P2).
    pub phi: Vec<S>,
    /// `|grad phi|^2_A` (octant).
    pub grad_phi_norm_sq: S,
    /// `|A^{-1} psi|^2_A` (octant).
    pub psi_norm_sq: S,
    /// `|E|^2_A` (octant).
    pub e_norm_sq: S,
    /// Norm of the discrete orthogonality residual (free dofs); solver-level.
    pub orthogonality_residual: S,
}

/// Splits `E` against the interior-zero P2 test space:
/// `(A grad phi, grad chi) = (A E, grad chi)` for all `chi`, `psi = A(E - grad phi)`.
pub fn helmholtz_split<S: Real>(
    space: &FeSpace<S>,
    problem: &ProblemSpec<S>,
    e_field: &impl VectorField<S>,
    cg: &CgOptions<S>,
) -> Result<HelmholtzSplit<S>, BoundsError<S>> {
    let mesh = space.mesh;
    let quad = QuadratureRule::default_rule();
    let stiffness = assemble_stiffness(space, &problem.coefficient, &quad)?;
    let weighted = VApply(&problem.coefficient, ByRef(e_field));
    let rhs = assemble_gradient_rhs(space, &weighted, &quad)?;
    let mut bc = ConstraintSet::new();
    for tag in [BoundaryTag::Gamma, BoundaryTag::Sphere] {
        for n in space.nodes_with_tag(tag) {
            bc.set(n, S::zero())?;
        }
    }
    let reduced = apply_constraints(&stiffness, &rhs, &bc)?;
    let (x, _) = solve_cg(&reduced.matrix, &reduced.rhs, None, cg)?;
    let phi = reduced.reconstruct(&x);

    let fe = FeScalar { space, coeffs: &phi };
    let grad_phi = FeGradient(fe);
    let coeff = &problem.coefficient;
    let grad_phi_norm_sq = a_norm_sq(mesh, &quad, coeff, &grad_phi);
    // A^{-1} psi = E - grad phi, so |A^{-1} psi|^2_A needs no inversion
    let residual_field = VDiff(ByRef(e_field), grad_phi);
    let psi_norm_sq = a_norm_sq(mesh, &quad, coeff, &residual_field);
    let e_norm_sq = a_norm_sq(mesh, &quad, coeff, &ByRef(e_field));
    let r_full = stiffness.apply(&phi);
    let residual: Vec<S> = rhs.iter().zip(&r_full).map(|(&b, &a)| b - a).collect();
    let orthogonality_residual = crate::fem::sparse::norm_vec(&reduced.restrict(&residual));

    Ok(HelmholtzSplit {
        phi,
        grad_phi_norm_sq,
        psi_norm_sq,
        e_norm_sq,
        orthogonality_residual,
    })
}

/// The P2 Galerkin solution in the affine space whose traces match the
/// boundary value on Gamma and `zeta~/R` on the sphere.
pub fn discrete_reference_p2<S: Real>(
    space: &FeSpace<S>,
    problem: &ProblemSpec<S>,
    zeta: S,
    cg: &CgOptions<S>,
) -> Result<Vec<S>, BoundsError<S>> {
    let quad = QuadratureRule::default_rule();
    let stiffness = assemble_stiffness(space, &problem.coefficient, &quad)?;
    let rhs = assemble_source_rhs(space, &problem.source, &quad)?;
    let reduced = apply_constraints(&stiffness, &rhs, &affine_trace(space, problem, zeta)?)?;
    let (x, _) = solve_cg(&reduced.matrix, &reduced.rhs, None, cg)?;
    Ok(reduced.reconstruct(&x))
}

fn affine_trace<S: Real>(
    space: &FeSpace<S>,
    problem: &ProblemSpec<S>,
    zeta: S,
) -> Result<ConstraintSet<S>, BoundsError<S>> {
    let mut bc = ConstraintSet::new();
    for n in space.nodes_with_tag(BoundaryTag::Gamma) {
        bc.set(n, problem.boundary_value)?;
    }
    let sphere_trace = zeta / problem.radius;
    for n in space.nodes_with_tag(BoundaryTag::Sphere) {
        bc.set(n, sphere_trace)?;
    }
    Ok(bc)
}

#[derive(Clone, Debug)]
pub struct NcMajorant<S> {
    /// The constrained-flux infimum (conforming majorant machinery).
    pub flux_part: MajorantOutcome<S>,
    /// Minimizer of `|grad u - A^{-1} v~|^2_A` over the affine P2 space.
    pub u_affine: Vec<S>,
    /// That infimum (full domain).
    pub grad_misfit_sq: S,
    /// `inf M_+^2 + inf M~_+^2`.
    pub total: S,
}

/// Upper-bound pipeline for a non-conforming flux approximation.
pub fn nc_majorant<S: Real>(
    mesh: &TetMesh<S>,
    problem: &ProblemSpec<S>,
    flux: &FluxApproximation<S>,
    config: &NcConfig<S>,
) -> Result<NcMajorant<S>, BoundsError<S>> {
    let target = VApplyInv(&problem.coefficient, ByRef(flux));
    let flux_part = minimize_majorant(mesh, problem, &target, flux.zeta, &config.majorant)?;

    // one SPD solve for the second infimum
    let space = FeSpace::scalar(mesh, Degree::P2);
    let quad = QuadratureRule::default_rule();
    let stiffness = assemble_stiffness(&space, &problem.coefficient, &quad)?;
    let rhs = assemble_gradient_rhs(&space, &ByRef(flux), &quad)?;
    let reduced = apply_constraints(&stiffness, &rhs, &affine_trace(&space, problem, flux.zeta)?)?;
    let (x, _) = solve_cg(&reduced.matrix, &reduced.rhs, None, &config.cg)?;
    let u_affine = reduced.reconstruct(&x);

    let fe = FeScalar { space: &space, coeffs: &u_affine };
    let misfit = VDiff(FeGradient(fe), VApplyInv(&problem.coefficient, ByRef(flux)));
    let grad_misfit_sq = S::of(8.0) * a_norm_sq(mesh, &quad, &problem.coefficient, &misfit);

    let total = flux_part.majorant_sq + grad_misfit_sq;
    Ok(NcMajorant { flux_part, u_affine, grad_misfit_sq, total })
}

#[derive(Clone, Debug)]
pub struct NcMinorant<S> {
    /// `sup_u M_-` over interior-zero P2 functions (full domain).
    pub sup_m_minus: S,
    /// The divergence-free-candidate term evaluated at `(u*, psi)` (full domain).
    pub m_tilde_minus: S,
    /// `M_minus = sup M_- + M~_-`.
    pub total: S,
    pub split: HelmholtzSplit<S>,
}

/// Lower-bound pipeline; `u_affine` is the minimizer from [`nc_majorant`].
pub fn nc_minorant<S: Real>(
    mesh: &TetMesh<S>,
    problem: &ProblemSpec<S>,
    flux: &FluxApproximation<S>,
    u_affine: &[S],
    config: &NcConfig<S>,
) -> Result<NcMinorant<S>, BoundsError<S>> {
    let sup = maximize_minorant(mesh, problem, &ByRef(flux), &config.cg)?;

    let space = FeSpace::scalar(mesh, Degree::P2);
    let quad = QuadratureRule::default_rule();
    let coeff = &problem.coefficient;

    // error field E = grad(reference) - A^{-1} v~
    let reference = match config.reference {
        NcReference::ExactBall => {
            if problem.geometry != Geometry::Ball {
                return Err(BoundsError::Usage(
                    "exact reference requires the unit-ball geometry".into(),
                ));
            }
            None
        }
        NcReference::DiscreteP2 => Some(discrete_reference_p2(&space, problem, flux.zeta, &config.cg)?),
    };
    let split = match &reference {
        Some(coeffs) => {
            let fe = FeScalar { space: &space, coeffs };
            let e = VDiff(FeGradient(fe), VApplyInv(coeff, ByRef(flux)));
            helmholtz_split(&space, problem, &e, &config.cg)?
        }
        None => {
            let exact = scaled_ball_gradient(problem.boundary_value);
            let e = VDiff(exact, VApplyInv(coeff, ByRef(flux)));
            helmholtz_split(&space, problem, &e, &config.cg)?
        }
    };

    // M~_- = (2 grad u* - A^{-1}(2 v~ + psi), A^{-1} psi)_A
    //      = 2 (grad u* - A^{-1} v~, psi) - |A^{-1} psi|^2_A,
    // with A^{-1} psi = E - grad phi.
    let fe_u = FeScalar { space: &space, coeffs: u_affine };
    let fe_phi = FeScalar { space: &space, coeffs: &split.phi };
    let u_misfit = VDiff(FeGradient(fe_u), VApplyInv(coeff, ByRef(flux)));
    let m_tilde_oct = match &reference {
        Some(coeffs) => {
            let fe_ref = FeScalar { space: &space, coeffs };
            let e = VDiff(FeGradient(fe_ref), VApplyInv(coeff, ByRef(flux)));
            let psi = VApply(coeff, VDiff(e, FeGradient(fe_phi)));
            S::of(2.0) * l2_dot(mesh, &quad, &u_misfit, &psi) - split.psi_norm_sq
        }
        None => {
            let exact = scaled_ball_gradient(problem.boundary_value);
            let e = VDiff(exact, VApplyInv(coeff, ByRef(flux)));
            let psi = VApply(coeff, VDiff(e, FeGradient(fe_phi)));
            S::of(2.0) * l2_dot(mesh, &quad, &u_misfit, &psi) - split.psi_norm_sq
        }
    };
    let m_tilde_minus = S::of(8.0) * m_tilde_oct;
    Ok(NcMinorant { sup_m_minus: sup.minorant, m_tilde_minus, total: sup.minorant + m_tilde_minus, split })
}

/// The triangle-inequality bounds reusing the two infima:
/// `(1 + 4/theta) inf M_+^2 + (4 + theta) inf M~_+^2` per theta, and the
/// weaker lower bound that simply drops the divergence-free term.
pub fn appendix_bounds<S: Real>(
    inf_m_plus_sq: S,
    inf_m_tilde_plus_sq: S,
    sup_m_minus: S,
    thetas: &[S],
) -> Result<(Vec<(S, S)>, S), BoundsError<S>> {
    let mut upper = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        if !(theta > S::zero()) {
            return Err(BoundsError::Usage(format!("theta must be positive, got {theta}")));
        }
        let value = (S::one() + S::of(4.0) / theta) * inf_m_plus_sq
            + (S::of(4.0) + theta) * inf_m_tilde_plus_sq;
        upper.push((theta, value));
    }
    Ok((upper, sup_m_minus))
}

/// Full report of the non-conforming pipeline for one flux approximation.
#[derive(Clone, Debug)]
pub struct NcBoundReport<S> {
    pub inf_m_plus_sq: S,
    pub inf_m_tilde_plus_sq: S,
    pub m_plus_total: S,
    pub sup_m_minus: S,
    pub m_tilde_minus: S,
    pub m_minus_total: S,
    /// `(theta, value)` pairs of the triangle-inequality upper bound.
    pub appendix_plus: Vec<(S, S)>,
    /// Appendix lower bound (first supremum only).
    pub appendix_minus: S,
    pub beta: S,
    /// `|E|^2` against the closed-form solution (ball geometry only).
    pub oracle_error_sq: Option<S>,
    /// Octant norms of the Helmholtz split behind the minorant, for the
    /// Pythagoras identity `|E|^2 = |grad phi|^2 + |A^{-1} psi|^2`.
    pub split_e_norm_sq: S,
    pub split_grad_norm_sq: S,
    pub split_psi_norm_sq: S,
}

/// Exact squared gradient error of a flux approximation for the ball
/// geometry: high-order quadrature plus the closed-form tail.
pub fn nc_oracle_error_sq<S: Real>(
    mesh: &TetMesh<S>,
    problem: &ProblemSpec<S>,
    flux: &FluxApproximation<S>,
) -> Result<S, BoundsError<S>> {
    if problem.geometry != Geometry::Ball {
        return Err(BoundsError::Usage("oracle requires the unit-ball geometry".into()));
    }
    let quad = QuadratureRule::oracle_rule();
    let exact = scaled_ball_gradient(problem.boundary_value);
    let e = VDiff(exact, VApplyInv(&problem.coefficient, ByRef(flux)));
    let octant = a_norm_sq(mesh, &quad, &problem.coefficient, &e);
    let tail = tail_energy(problem.boundary_value - flux.zeta, problem.radius)
        .map_err(|_| BoundsError::Usage("invalid radius".into()))?;
    Ok(S::of(8.0) * octant + tail)
}

/// Runs the whole non-conforming pipeline.
pub fn nonconforming_bounds<S: Real>(
    mesh: &TetMesh<S>,
    problem: &ProblemSpec<S>,
    flux: &FluxApproximation<S>,
    config: &NcConfig<S>,
) -> Result<NcBoundReport<S>, BoundsError<S>> {
    let maj = nc_majorant(mesh, problem, flux, config)?;
    let min = nc_minorant(mesh, problem, flux, &maj.u_affine, config)?;
    let (appendix_plus, appendix_minus) = appendix_bounds(
        maj.flux_part.majorant_sq,
        maj.grad_misfit_sq,
        min.sup_m_minus,
        &config.thetas,
    )?;
    let oracle = match problem.geometry {
        Geometry::Ball => Some(nc_oracle_error_sq(mesh, problem, flux)?),
        Geometry::Cube => None,
    };
    Ok(NcBoundReport {
        inf_m_plus_sq: maj.flux_part.majorant_sq,
        inf_m_tilde_plus_sq: maj.grad_misfit_sq,
        m_plus_total: maj.total,
        sup_m_minus: min.sup_m_minus,
        m_tilde_minus: min.m_tilde_minus,
        m_minus_total: min.total,
        appendix_plus,
        appendix_minus,
        beta: maj.flux_part.beta,
        oracle_error_sq: oracle,
        split_e_norm_sq: min.split.e_norm_sq,
        split_grad_norm_sq: min.split.grad_phi_norm_sq,
        split_psi_norm_sq: min.split.psi_norm_sq,
    })
}

/// Ordering contract of the non-conforming report; violations are bugs.
pub fn check_nc_ordering<S: Real>(report: &NcBoundReport<S>, slack_rel: S) -> Result<(), String> {
    let scale = report.m_plus_total.abs().max(report.m_minus_total.abs()).max(S::min_positive_value());
    let slack = slack_rel * scale;
    if report.m_minus_total > report.m_plus_total + slack {
        return Err(format!(
            "lower bound {} exceeds upper bound {}",
            report.m_minus_total, report.m_plus_total
        ));
    }
    if let Some(oracle) = report.oracle_error_sq {
        if report.m_minus_total > oracle + slack {
            return Err(format!("lower bound {} exceeds error {}", report.m_minus_total, oracle));
        }
        if oracle > report.m_plus_total + slack {
            return Err(format!("error {} exceeds upper bound {}", oracle, report.m_plus_total));
        }
    }
    for &(theta, value) in &report.appendix_plus {
        if report.m_plus_total > value + slack {
            return Err(format!(
                "upper bound {} exceeds its triangle-inequality weakening {} (theta {})",
                report.m_plus_total, value, theta
            ));
        }
    }
    Ok(())
}
