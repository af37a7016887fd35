// Scratch: non-conforming pipeline margins on the medium mesh.
use majorant::bounds::nonconforming::{
    check_nc_ordering, nonconforming_bounds, FluxApproximation, NcConfig,
};
use majorant::fem::{Degree, FeSpace};
use majorant::mesh::generate_ball_octant_shell;
use majorant::problem::{Geometry, ProblemSpec};
use majorant::truncation::{solve_truncated, TailSolveOptions};

fn main() {
    let r = 5.0f64;
    let mesh = generate_ball_octant_shell::<f64>(r, 12, 12).unwrap();
    let space = FeSpace::scalar(&mesh, Degree::P1);
    let problem = ProblemSpec::laplace(Geometry::Ball, r);
    let approx = solve_truncated(&space, &problem, &TailSolveOptions::default()).unwrap();
    println!("mesh tets={} zeta={:.8}", mesh.tets.len(), approx.zeta);

    let base = FluxApproximation::from_conforming(&space, &problem, &approx);
    let config = NcConfig::default();
    for delta in [0.0f64, 0.01, 0.1] {
        let flux = if delta == 0.0 { base.clone() } else { base.perturbed(&mesh, delta, 7) };
        let t = std::time::Instant::now();
        let rep = nonconforming_bounds(&mesh, &problem, &flux, &config).unwrap();
        let oracle = rep.oracle_error_sq.unwrap();
        println!(
            "delta={delta}: M-={:.6e} oracle={:.6e} M+={:.6e}  (infM+={:.3e} infMt+={:.3e} supM-={:.3e} Mt-={:.3e})",
            rep.m_minus_total, oracle, rep.m_plus_total,
            rep.inf_m_plus_sq, rep.inf_m_tilde_plus_sq, rep.sup_m_minus, rep.m_tilde_minus
        );
        println!(
            "  ratios: M-/oracle = {:.6}, M+/oracle = {:.6}, t={:?}",
            rep.m_minus_total / oracle,
            rep.m_plus_total / oracle,
            t.elapsed()
        );
        match check_nc_ordering(&rep, 1e-8) {
            Ok(()) => println!("  ordering OK"),
            Err(e) => println!("  ORDERING VIOLATION: {e}"),
        }
        for (theta, val) in &rep.appendix_plus {
            println!("  theta={theta}: {val:.6e} (ratio to M+ {:.4})", val / rep.m_plus_total);
        }
    }
}
