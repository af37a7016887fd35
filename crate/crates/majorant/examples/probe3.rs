// Scratch: preconditioner shoot-out on the hardest beta system.
use majorant::fem::sparse::Preconditioner;
use majorant::fem::{
    apply_constraints, assemble_flux_system, assemble_vector_value_rhs, solve_cg, CgOptions,
    Degree, FeGradient, FeScalar, FeSpace, QuadratureRule,
};
use majorant::bounds::conforming::flux_constraints;
use majorant::mesh::generate_ball_octant_shell;
use majorant::problem::{Geometry, ProblemSpec};
use majorant::truncation::{solve_truncated, TailSolveOptions};

fn main() {
    let r = 5.0f64;
    let mesh = generate_ball_octant_shell::<f64>(r, 8, 8).unwrap();
    let space1 = FeSpace::scalar(&mesh, Degree::P1);
    let problem = ProblemSpec::laplace(Geometry::Ball, r);
    let approx = solve_truncated(&space1, &problem, &TailSolveOptions::default()).unwrap();
    let fe = FeScalar { space: &space1, coeffs: &approx.coeffs };
    let target = FeGradient(fe);

    let quad = QuadratureRule::<f64>::default_rule();
    let space = FeSpace::vector(&mesh, Degree::P2);
    let (mass, div) = assemble_flux_system(&space, &problem.coefficient, &quad).unwrap();
    let g = assemble_vector_value_rhs(&space, &target, &quad).unwrap();
    let constraints = flux_constraints(&space, approx.zeta, r).unwrap();

    // the hard regime: beta ~ 1e-3
    let beta = 1.07e-3f64;
    let c = 2.0;
    let cd = c * c * (1.0 + 1.0 / beta);
    let cm = 1.0 + beta;
    let system = div.linear_combination(cd, &mass, cm);
    let rhs: Vec<f64> = g.iter().map(|&x| cm * x).collect();
    let reduced = apply_constraints(&system, &rhs, &constraints).unwrap();
    println!("system: n = {}, nnz = {}", reduced.matrix.n, reduced.matrix.nnz());

    for (name, pc) in [
        ("jacobi", Preconditioner::Jacobi),
        ("ic0", Preconditioner::IncompleteCholesky),
        ("ssor", Preconditioner::Ssor),
    ] {
        let opts = CgOptions { rel_tol: 1e-10, max_iter_factor: 20, preconditioner: pc };
        let t = std::time::Instant::now();
        match solve_cg(&reduced.matrix, &reduced.rhs, None, &opts) {
            Ok((_, stats)) => println!(
                "{name:7} iters={:6} rel={:.2e} t={:?}",
                stats.iterations, stats.rel_residual, t.elapsed()
            ),
            Err(e) => println!("{name:7} FAILED: {e}"),
        }
    }
}
