// Scratch calibration probe; not part of the deliverable surface.
use majorant::bounds::conforming::{conforming_bounds, ConformingConfig};
use majorant::fem::{Degree, FeSpace, QuadratureRule};
use majorant::mesh::generate_ball_octant_shell;
use majorant::problem::{Geometry, ProblemSpec};
use majorant::truncation::{solve_truncated, TailSolveOptions};

fn main() {
    let r = 5.0f64;
    // volume deficits
    for m in [4usize, 8, 16] {
        let mesh = generate_ball_octant_shell::<f64>(r, 4, m).unwrap();
        let exact = (4.0 * std::f64::consts::PI / 3.0) * (r.powi(3) - 1.0) / 8.0;
        let vol = mesh.total_volume();
        println!(
            "m={m:2} tets={:6} vol={vol:.6} exact={exact:.6} deficit={:.3e}",
            mesh.tets.len(),
            (exact - vol) / exact
        );
    }

    // interpolation-error floor (criterion-4 scale) for P1 interpolant of 1/r
    for (n, m) in [(8usize, 8usize), (12, 12), (16, 16), (24, 24), (32, 32)] {
        let mesh = generate_ball_octant_shell::<f64>(r, n, m).unwrap();
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let coeffs = space
            .interpolate_scalar(|p| 1.0 / (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
            .unwrap();
        let quad = QuadratureRule::oracle_rule();
        let fe = majorant::fem::FeScalar { space: &space, coeffs: &coeffs };
        let exact = majorant::problem::exact_gradient_ball::<f64>();
        let diff = majorant::fields::VDiff(exact, majorant::fem::FeGradient(fe));
        let oct = majorant::fem::a_norm_sq(
            &mesh,
            &quad,
            &majorant::fields::CoefficientField::Identity,
            &diff,
        );
        let err_sq = 8.0 * oct; // zeta = 1: no tail term
        let grad_sq = 8.0
            * majorant::fem::a_norm_sq(
                &mesh,
                &quad,
                &majorant::fields::CoefficientField::Identity,
                &majorant::fem::FeGradient(fe),
            )
            + 4.0 * std::f64::consts::PI / r;
        println!(
            "ladder ({n:2},{m:2}) tets={:6} err^2/|grad|^2 = {:.4e}",
            mesh.tets.len(),
            err_sq / grad_sq
        );
    }

    // one full conforming-bounds run on the coarse mesh, timed
    let t0 = std::time::Instant::now();
    let mesh = generate_ball_octant_shell::<f64>(r, 8, 8).unwrap();
    let space = FeSpace::scalar(&mesh, Degree::P1);
    let problem = ProblemSpec::laplace(Geometry::Ball, r);
    let approx = solve_truncated(&space, &problem, &TailSolveOptions::default()).unwrap();
    println!(
        "solve: tets={} zeta={:.6} iters={} t={:?}",
        mesh.tets.len(),
        approx.zeta,
        approx.trace.len(),
        t0.elapsed()
    );
    let t1 = std::time::Instant::now();
    let report = conforming_bounds(&space, &problem, &approx, &ConformingConfig::default()).unwrap();
    let e = report.energy_sq;
    println!(
        "bounds: maj={:.4}% oracle={:.4}% min={:.4}% beta={:.4} eff={:.3} t={:?}",
        100.0 * report.majorant_sq / e,
        100.0 * report.oracle_error_sq.unwrap() / e,
        100.0 * report.minorant / e,
        report.beta,
        report.efficiency_majorant.unwrap(),
        t1.elapsed()
    );
}
