//! The truncated approximation: a P1 finite element function on the octant
//! mesh glued to the harmonic tail `zeta / r` outside the artificial sphere,
//! and the alternating minimization of the total Dirichlet energy
//! `|grad u|^2_{omega_R} + 4 pi zeta^2 / R` (full-domain normalization,
//! octant integrals times 8).
//!
//! The approximation decomposes as `u = u_0 + lift_gamma + (zeta/R) lift_sphere`
//! where the two lifts carry the boundary data (`u_0` is interior): `lift_gamma`
//! equals the boundary value on Gamma and 0 on the sphere, `lift_sphere` is 0 on
//! Gamma and 1 on the sphere and must not be discretely harmonic, otherwise the
//! interior update would not depend on the current tail amplitude.

use crate::fem::{
    apply_constraints, assemble_stiffness, solve_cg, CgOptions, CgStats, ConstraintError,
    ConstraintSet, CsrMatrix, Degree, FeScalar, FeSpace, QuadratureRule, ReducedSystem,
    SolveError,
};
use crate::fem::sparse::{dot_vec, norm_vec};
use crate::fields::CoefficientField;
use crate::mesh::BoundaryTag;
use crate::problem::{Geometry, ProblemSpec};
use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum TruncationError<S: Real> {
    #[error("truncation radius must be positive, got {0}")]
    InvalidRadius(S),
    #[error("space must be scalar P1 on the computational mesh")]
    WrongSpace,
    #[error(transparent)]
    Assemble(#[from] crate::fem::AssembleError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError<S>),
    #[error(transparent)]
    Solve(#[from] SolveError<S>),
    #[error(transparent)]
    Interpolate(#[from] crate::fem::InterpolateError),
}

/// `4 pi zeta^2 / R`: Dirichlet energy of the tail `zeta / r` on the exterior
/// of the sphere of radius `R` (full-domain value).
pub fn tail_energy<S: Real>(zeta: S, radius: S) -> Result<S, TruncationError<S>> {
    if !(radius > S::zero()) {
        return Err(TruncationError::InvalidRadius(radius));
    }
    Ok(S::of(4.0) * S::PI() * zeta * zeta / radius)
}

/// Stopping parameters of the alternating minimization.
#[derive(Clone, Copy, Debug)]
pub struct TailSolveOptions<S> {
    /// Stop once `|zeta_k - zeta_{k-1}| / |zeta_k|` drops below this.
    pub stop_rel: S,
    pub max_iter: usize,
    pub cg: CgOptions<S>,
}

impl<S: Real> Default for TailSolveOptions<S> {
    fn default() -> Self {
        TailSolveOptions { stop_rel: S::of(1e-8), max_iter: 50, cg: CgOptions::default() }
    }
}

/// One row of the iteration trace.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord<S> {
    pub k: usize,
    pub zeta: S,
    /// Total energy (full domain) after the iteration.
    pub energy: S,
    pub zeta_rel_change: S,
}

/// The truncated approximation produced by the energy minimization.
#[derive(Clone, Debug)]
pub struct TruncatedApproximation<S> {
    /// Coefficients of the P1 function on the mesh.
    pub coeffs: Vec<S>,
    /// Tail amplitude: the approximation is `zeta / r` outside the sphere.
    pub zeta: S,
    pub radius: S,
    /// Interior part (zero trace on Gamma and Sphere).
    pub interior: Vec<S>,
    /// Lift carrying the Gamma boundary value.
    pub lift_gamma: Vec<S>,
    /// Lift carrying the sphere trace (1 there, 0 on Gamma).
    pub lift_sphere: Vec<S>,
    pub converged: bool,
    pub trace: Vec<IterationRecord<S>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown<S> {
    /// `8 * int_octant |grad u|^2`.
    pub interior: S,
    /// `4 pi zeta^2 / R`.
    pub tail: S,
    pub total: S,
}

/// Seed lifts: a discrete harmonic lift of the Gamma data, and the radial
/// blend for the sphere lift. Boundary nodes are set to their exact values,
/// so the trace conditions hold identically at the dofs.
pub fn seed_auxiliary_functions<S: Real>(
    space: &FeSpace<S>,
    problem: &ProblemSpec<S>,
    cg: &CgOptions<S>,
) -> Result<(Vec<S>, Vec<S>), TruncationError<S>> {
    let quad = QuadratureRule::default_rule();
    let stiffness = assemble_stiffness(space, &CoefficientField::Identity, &quad)?;
    seed_with_stiffness(space, problem, &stiffness, cg)
}

fn seed_with_stiffness<S: Real>(
    space: &FeSpace<S>,
    problem: &ProblemSpec<S>,
    stiffness: &CsrMatrix<S>,
    cg: &CgOptions<S>,
) -> Result<(Vec<S>, Vec<S>), TruncationError<S>> {
    let gamma = space.nodes_with_tag(BoundaryTag::Gamma);
    let sphere = space.nodes_with_tag(BoundaryTag::Sphere);

    // lift_gamma: discrete harmonic with data (u0, 0)
    let mut bc = ConstraintSet::new();
    for &n in &gamma {
        bc.set(n, problem.boundary_value)?;
    }
    for &n in &sphere {
        bc.set(n, S::zero())?;
    }
    let zero_rhs = vec![S::zero(); space.num_dofs()];
    let reduced = apply_constraints(stiffness, &zero_rhs, &bc)?;
    let (x, _) = solve_cg(&reduced.matrix, &reduced.rhs, None, cg)?;
    let lift_gamma = reduced.reconstruct(&x);

    // lift_sphere: radial blend, deliberately not discretely harmonic
    let r = problem.radius;
    let blend: Box<dyn Fn(&[S; 3]) -> S> = match problem.geometry {
        Geometry::Ball => Box::new(move |p: &[S; 3]| {
            let rr = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            (rr - S::one()) / (r - S::one())
        }),
        Geometry::Cube => Box::new(move |p: &[S; 3]| {
            let m = p[0].abs().max(p[1].abs()).max(p[2].abs());
            (m - S::one()) / (r - S::one())
        }),
    };
    let mut lift_sphere = space.interpolate_scalar(|p| blend(p))?;
    for &n in &gamma {
        lift_sphere[n as usize] = S::zero();
    }
    for &n in &sphere {
        lift_sphere[n as usize] = S::one();
    }
    Ok((lift_gamma, lift_sphere))
}

/// Precomputed state for the alternating minimization; exposes the two
/// half-steps so they can be driven and checked individually.
pub struct TailIteration<'a, 'm, S> {
    pub space: &'a FeSpace<'m, S>,
    pub stiffness: CsrMatrix<S>,
    reduced: ReducedSystem<S>,
    pub lift_gamma: Vec<S>,
    pub lift_sphere: Vec<S>,
    k_lift_sphere: Vec<S>,
    /// `8 * lift_sphere' K lift_sphere` (full-domain norm of its gradient).
    grad_sphere_sq: S,
    pub radius: S,
    cg: CgOptions<S>,
}

impl<'a, 'm, S: Real> TailIteration<'a, 'm, S> {
    pub fn new(
        space: &'a FeSpace<'m, S>,
        problem: &ProblemSpec<S>,
        cg: CgOptions<S>,
    ) -> Result<Self, TruncationError<S>> {
        if space.components != 1 || space.degree != Degree::P1 {
            return Err(TruncationError::WrongSpace);
        }
        if !(problem.radius > S::zero()) {
            return Err(TruncationError::InvalidRadius(problem.radius));
        }
        let quad = QuadratureRule::default_rule();
        let stiffness = assemble_stiffness(space, &CoefficientField::Identity, &quad)?;
        let (lift_gamma, lift_sphere) = seed_with_stiffness(space, problem, &stiffness, &cg)?;
        Self::with_seeds(space, problem.radius, stiffness, lift_gamma, lift_sphere, cg)
    }

    /// Entry point for custom (admissible) seed lifts.
    pub fn with_seeds(
        space: &'a FeSpace<'m, S>,
        radius: S,
        stiffness: CsrMatrix<S>,
        lift_gamma: Vec<S>,
        lift_sphere: Vec<S>,
        cg: CgOptions<S>,
    ) -> Result<Self, TruncationError<S>> {
        let mut bc = ConstraintSet::new();
        for tag in [BoundaryTag::Gamma, BoundaryTag::Sphere] {
            for n in space.nodes_with_tag(tag) {
                bc.set(n, S::zero())?;
            }
        }
        let zero_rhs = vec![S::zero(); space.num_dofs()];
        let reduced = apply_constraints(&stiffness, &zero_rhs, &bc)?;
        let k_lift_sphere = stiffness.apply(&lift_sphere);
        let grad_sphere_sq = S::of(8.0) * dot_vec(&lift_sphere, &k_lift_sphere);
        Ok(TailIteration {
            space,
            stiffness,
            reduced,
            lift_gamma,
            lift_sphere,
            k_lift_sphere,
            grad_sphere_sq,
            radius,
            cg,
        })
    }

    fn lifted(&self, zeta: S) -> Vec<S> {
        let s = zeta / self.radius;
        self.lift_gamma
            .iter()
            .zip(&self.lift_sphere)
            .map(|(&g, &h)| g + s * h)
            .collect()
    }

    /// Minimizes the energy over the interior dofs at fixed `zeta`; returns
    /// the full-size interior coefficient vector (zero trace).
    pub fn interior_step(
        &self,
        zeta: S,
        warm: Option<&[S]>,
    ) -> Result<(Vec<S>, CgStats<S>), TruncationError<S>> {
        let lifted = self.lifted(zeta);
        let mut rhs_full = self.stiffness.apply(&lifted);
        for v in &mut rhs_full {
            *v = -*v;
        }
        let rhs = self.reduced.restrict(&rhs_full);
        let warm_red = warm.map(|w| self.reduced.restrict(w));
        let (x, stats) = solve_cg(&self.reduced.matrix, &rhs, warm_red.as_deref(), &self.cg)?;
        Ok((self.reduced.reconstruct(&x), stats))
    }

    /// Closed-form tail amplitude minimizing the quadratic energy at fixed
    /// interior part: `zeta = -R <grad(u + lift_gamma), grad lift_sphere> /
    /// (4 pi R + |grad lift_sphere|^2)` in full-domain normalization.
    pub fn zeta_step(&self, interior: &[S]) -> S {
        let mut s12 = S::zero();
        for ((&u, &g), &kw) in interior.iter().zip(&self.lift_gamma).zip(&self.k_lift_sphere) {
            s12 += (u + g) * kw;
        }
        let s12_full = S::of(8.0) * s12;
        let denom = S::of(4.0) * S::PI() * self.radius + self.grad_sphere_sq;
        -self.radius * s12_full / denom
    }

    /// Total energy (full domain) of `interior + lifts(zeta)` with tail `zeta`.
    pub fn energy(&self, interior: &[S], zeta: S) -> S {
        let mut total = self.lifted(zeta);
        for (t, &u) in total.iter_mut().zip(interior) {
            *t = *t + u;
        }
        let quad_form = dot_vec(&total, &self.stiffness.apply(&total));
        S::of(8.0) * quad_form + S::of(4.0) * S::PI() * zeta * zeta / self.radius
    }

    /// Max-norm of the discrete residual on the free dofs; near zero after an
    /// interior step (Galerkin orthogonality).
    pub fn galerkin_residual(&self, interior: &[S], zeta: S) -> S {
        let mut total = self.lifted(zeta);
        for (t, &u) in total.iter_mut().zip(interior) {
            *t = *t + u;
        }
        let r = self.stiffness.apply(&total);
        norm_vec(&self.reduced.restrict(&r))
    }

    /// Norm of the discrete-Laplacian residual of the sphere lift on the
    /// interior dofs; must be positive for the iteration to make progress.
    pub fn sphere_lift_residual(&self) -> S {
        norm_vec(&self.reduced.restrict(&self.k_lift_sphere))
    }
}

/// Runs the alternating minimization until the tail amplitude settles.
pub fn solve_truncated<S: Real>(
    space: &FeSpace<S>,
    problem: &ProblemSpec<S>,
    opts: &TailSolveOptions<S>,
) -> Result<TruncatedApproximation<S>, TruncationError<S>> {
    let iteration = TailIteration::new(space, problem, opts.cg)?;
    run_iteration(iteration, opts)
}

/// Same, but with caller-provided seed lifts.
pub fn run_iteration<S: Real>(
    iteration: TailIteration<S>,
    opts: &TailSolveOptions<S>,
) -> Result<TruncatedApproximation<S>, TruncationError<S>> {
    let mut zeta = S::one();
    let mut interior = vec![S::zero(); iteration.space.num_dofs()];
    let mut trace = Vec::new();
    let mut converged = false;

    for k in 1..=opts.max_iter {
        let (u, _) = iteration.interior_step(zeta, Some(&interior))?;
        interior = u;
        let zeta_next = iteration.zeta_step(&interior);
        let diff = (zeta_next - zeta).abs();
        let rel = if diff == S::zero() {
            S::zero()
        } else {
            diff / zeta_next.abs()
        };
        zeta = zeta_next;
        trace.push(IterationRecord {
            k,
            zeta,
            energy: iteration.energy(&interior, zeta),
            zeta_rel_change: rel,
        });
        if rel <= opts.stop_rel {
            converged = true;
            break;
        }
    }

    // assembled exactly as the documented decomposition, term by term
    let s = zeta / iteration.radius;
    let coeffs = (0..interior.len())
        .map(|i| interior[i] + iteration.lift_gamma[i] + s * iteration.lift_sphere[i])
        .collect();
    Ok(TruncatedApproximation {
        coeffs,
        zeta,
        radius: iteration.radius,
        interior,
        lift_gamma: iteration.lift_gamma,
        lift_sphere: iteration.lift_sphere,
        converged,
        trace,
    })
}

/// Energy of an approximation, interior part evaluated by quadrature.
pub fn energy_breakdown<S: Real>(
    space: &FeSpace<S>,
    approx: &TruncatedApproximation<S>,
    quad: &QuadratureRule<S>,
) -> Result<EnergyBreakdown<S>, TruncationError<S>> {
    let f = FeScalar { space, coeffs: &approx.coeffs };
    let grad = crate::fem::FeGradient(f);
    let octant = crate::fem::a_norm_sq(space.mesh, quad, &CoefficientField::Identity, &grad);
    let interior = S::of(8.0) * octant;
    let tail = tail_energy(approx.zeta, approx.radius)?;
    Ok(EnergyBreakdown { interior, tail, total: interior + tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_ball_octant_shell;

    #[test]
    fn tail_energy_values() {
        assert_eq!(tail_energy(0.0f64, 5.0).unwrap(), 0.0);
        let e = tail_energy(1.0f64, 1.0).unwrap();
        assert!((e - 4.0 * std::f64::consts::PI).abs() < 1e-14);
        let e = tail_energy(2.0f64, 10.0).unwrap();
        assert!((e - 1.6 * std::f64::consts::PI).abs() < 1e-14);
        assert!(tail_energy(1.0f64, 0.0).is_err());
    }

    #[test]
    fn seeds_satisfy_boundary_conditions_and_nonharmonicity() {
        let mesh = generate_ball_octant_shell::<f64>(5.0, 2, 3).unwrap();
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let problem = ProblemSpec::laplace(Geometry::Ball, 5.0);
        let it = TailIteration::new(&space, &problem, CgOptions::default()).unwrap();
        for n in space.nodes_with_tag(BoundaryTag::Gamma) {
            assert_eq!(it.lift_gamma[n as usize], 1.0);
            assert_eq!(it.lift_sphere[n as usize], 0.0);
        }
        for n in space.nodes_with_tag(BoundaryTag::Sphere) {
            assert_eq!(it.lift_gamma[n as usize], 0.0);
            assert_eq!(it.lift_sphere[n as usize], 1.0);
        }
        assert!(it.sphere_lift_residual() > 1e-6);
    }

    #[test]
    fn zeta_formula_special_cases() {
        // interior + lift_gamma discretely harmonic => numerator is
        // -R <grad(u + w1), grad w2>; if that inner product is zero, zeta = 0.
        let mesh = generate_ball_octant_shell::<f64>(5.0, 1, 2).unwrap();
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let problem = ProblemSpec::laplace(Geometry::Ball, 5.0);
        let mut it = TailIteration::new(&space, &problem, CgOptions::default()).unwrap();
        // force lift_gamma = 0: numerator vanishes with zero interior
        it.lift_gamma = vec![0.0; space.num_dofs()];
        let interior = vec![0.0; space.num_dofs()];
        assert_eq!(it.zeta_step(&interior), 0.0);
    }

    #[test]
    fn zeta_is_the_parabola_vertex() {
        let mesh = generate_ball_octant_shell::<f64>(5.0, 2, 3).unwrap();
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let problem = ProblemSpec::laplace(Geometry::Ball, 5.0);
        let it = TailIteration::new(&space, &problem, CgOptions::default()).unwrap();
        let (u, _) = it.interior_step(1.0, None).unwrap();
        let z = it.zeta_step(&u);
        let e = it.energy(&u, z);
        assert!(e <= it.energy(&u, z + 0.1));
        assert!(e <= it.energy(&u, z - 0.1));
    }

    #[test]
    fn interior_step_is_galerkin_orthogonal_and_decreases_energy() {
        let mesh = generate_ball_octant_shell::<f64>(5.0, 2, 3).unwrap();
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let problem = ProblemSpec::laplace(Geometry::Ball, 5.0);
        let it = TailIteration::new(&space, &problem, CgOptions::default()).unwrap();
        let zeta = 1.0;
        let (u, _) = it.interior_step(zeta, None).unwrap();
        let zero = vec![0.0; space.num_dofs()];
        assert!(it.energy(&u, zeta) <= it.energy(&zero, zeta));
        let scale = it.energy(&u, zeta);
        assert!(it.galerkin_residual(&u, zeta) <= 1e-8 * scale);
    }

    #[test]
    fn infinite_stop_rel_means_single_iteration() {
        let mesh = generate_ball_octant_shell::<f64>(5.0, 1, 2).unwrap();
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let problem = ProblemSpec::laplace(Geometry::Ball, 5.0);
        let opts = TailSolveOptions { stop_rel: f64::INFINITY, ..Default::default() };
        let approx = solve_truncated(&space, &problem, &opts).unwrap();
        assert_eq!(approx.trace.len(), 1);
        assert!(approx.converged);
    }

    #[test]
    fn trace_continuity_holds_exactly_at_dofs() {
        let mesh = generate_ball_octant_shell::<f64>(5.0, 2, 3).unwrap();
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let problem = ProblemSpec::laplace(Geometry::Ball, 5.0);
        let approx = solve_truncated(&space, &problem, &TailSolveOptions::default()).unwrap();
        assert!(approx.converged);
        for n in space.nodes_with_tag(BoundaryTag::Gamma) {
            assert_eq!(approx.coeffs[n as usize], 1.0);
        }
        let trace = approx.zeta / approx.radius;
        for n in space.nodes_with_tag(BoundaryTag::Sphere) {
            assert_eq!(approx.coeffs[n as usize], trace);
        }
        // decomposition holds exactly at the coefficient level
        for i in 0..space.num_dofs() {
            let recomposed = approx.interior[i]
                + approx.lift_gamma[i]
                + approx.zeta / approx.radius * approx.lift_sphere[i];
            assert_eq!(approx.coeffs[i], recomposed);
        }
    }

    #[test]
    fn energy_is_monotone_and_zeta_near_one() {
        let mesh = generate_ball_octant_shell::<f64>(5.0, 4, 6).unwrap();
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let problem = ProblemSpec::laplace(Geometry::Ball, 5.0);
        let approx = solve_truncated(&space, &problem, &TailSolveOptions::default()).unwrap();
        assert!(approx.converged);
        for w in approx.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs());
        }
        // exact tail amplitude for the unit ball is 1
        assert!((approx.zeta - 1.0).abs() < 0.05, "zeta = {}", approx.zeta);
        // conforming minimization overshoots the exact energy 4 pi
        let total = approx.trace.last().unwrap().energy;
        assert!(total >= 4.0 * std::f64::consts::PI - 1e-10);
    }
}
