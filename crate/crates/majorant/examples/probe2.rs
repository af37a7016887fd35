// Scratch: majorant solver instrumentation.
use majorant::bounds::conforming::{minimize_majorant, MajorantConfig};
use majorant::fem::{Degree, FeGradient, FeScalar, FeSpace};
use majorant::mesh::generate_ball_octant_shell;
use majorant::problem::{Geometry, ProblemSpec};
use majorant::truncation::{solve_truncated, TailSolveOptions};

fn main() {
    let r = 5.0f64;
    let mesh = generate_ball_octant_shell::<f64>(r, 8, 8).unwrap();
    let space = FeSpace::scalar(&mesh, Degree::P1);
    let problem = ProblemSpec::laplace(Geometry::Ball, r);
    let approx = solve_truncated(&space, &problem, &TailSolveOptions::default()).unwrap();
    let fe = FeScalar { space: &space, coeffs: &approx.coeffs };
    let target = FeGradient(fe);

    let config = MajorantConfig::default();
    let t0 = std::time::Instant::now();
    let out = minimize_majorant(&mesh, &problem, &target, approx.zeta, &config).unwrap();
    println!(
        "beta_iters={} beta={:.6e} maj={:.6e} trace_len={} t={:?}",
        out.beta_iterations,
        out.beta,
        out.majorant_sq,
        out.value_trace.len(),
        t0.elapsed()
    );
    println!("cg iterations per solve: {:?}", out.cg_iterations);
}
