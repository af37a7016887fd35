use majorant::bounds::conforming::{conforming_bounds, ConformingConfig};
use majorant::fem::{Degree, FeSpace};
use majorant::mesh::generate_ball_octant_shell;
use majorant::problem::{Geometry, ProblemSpec};

fn main() {
    let r = 5.0;
    let mesh = generate_ball_octant_shell::<f64>(r, 2, 3).unwrap();
    let space = FeSpace::scalar(&mesh, Degree::P1);
    let mut problem = ProblemSpec::laplace(Geometry::Ball, r);
    problem.boundary_value = 0.0;
    let n = space.num_dofs();
    let approx = majorant::truncation::TruncatedApproximation {
        coeffs: vec![0.0; n],
        zeta: 0.0,
        radius: r,
        interior: vec![0.0; n],
        lift_gamma: vec![0.0; n],
        lift_sphere: vec![0.0; n],
        converged: true,
        trace: Vec::new(),
    };
    let report = conforming_bounds(&space, &problem, &approx, &ConformingConfig::default()).unwrap();
    println!("maj={} sharp={} min={} beta={} td={} tf={} oracle={:?}",
        report.majorant_sq, report.majorant_sq_sharp, report.minorant, report.beta,
        report.term_div, report.term_flux, report.oracle_error_sq);
}
