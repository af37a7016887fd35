//! Acceptance suite: every release-gating check, one test per criterion,
//! printing one pass line each (run with `-- --nocapture` to see them).
//!
//! Heavy pipelines are shared between criteria through lazily computed state;
//! all runs are sequential and deterministic.

mod common;

use std::sync::LazyLock;
use std::time::Instant;

use majorant::bounds::conforming::{
    check_bracketing, conforming_bounds, minimize_majorant_seeded, BoundReport, ConformingConfig,
    MajorantConfig,
};
use majorant::bounds::nonconforming::{
    check_nc_ordering, nonconforming_bounds, FluxApproximation, NcBoundReport, NcConfig,
};
use majorant::fem::{Degree, FeSpace, QuadratureRule};
use majorant::fields::CoefficientField;
use majorant::mesh::{
    generate_ball_octant_shell, generate_cube_complement_octant, read_mesh_from_str,
    write_mesh_to_string, BoundaryTag, MeshDefect,
};
use majorant::problem::{constants, poincare_check, Geometry, ProblemSpec};
use majorant::truncation::{
    solve_truncated, tail_energy, TailSolveOptions, TruncatedApproximation,
};

const BALL_RADIUS: f64 = 5.0;
const BALL_LADDER_PARAMS: [(usize, usize); 3] = [(8, 8), (12, 12), (16, 16)];

struct LadderEntry {
    n_radial: usize,
    n_angular: usize,
    tets: usize,
    approx: TruncatedApproximation<f64>,
    report: BoundReport<f64>,
}

fn run_ball_entry(n: usize, m: usize) -> LadderEntry {
    let mesh = generate_ball_octant_shell::<f64>(BALL_RADIUS, n, m).unwrap();
    let space = FeSpace::scalar(&mesh, Degree::P1);
    let problem = ProblemSpec::laplace(Geometry::Ball, BALL_RADIUS);
    let approx = solve_truncated(&space, &problem, &TailSolveOptions::default()).unwrap();
    let report = conforming_bounds(&space, &problem, &approx, &ConformingConfig::default()).unwrap();
    LadderEntry { n_radial: n, n_angular: m, tets: mesh.tets.len(), approx, report }
}

static BALL_LADDER: LazyLock<(Vec<LadderEntry>, f64)> = LazyLock::new(|| {
    let t0 = Instant::now();
    let entries = BALL_LADDER_PARAMS.iter().map(|&(n, m)| run_ball_entry(n, m)).collect();
    (entries, t0.elapsed().as_secs_f64())
});

struct NcState {
    reports: Vec<(f64, NcBoundReport<f64>)>, // (delta, report) including delta = 0
}

static NC_MEDIUM: LazyLock<NcState> = LazyLock::new(|| {
    let (n, m) = BALL_LADDER_PARAMS[1];
    let mesh = generate_ball_octant_shell::<f64>(BALL_RADIUS, n, m).unwrap();
    let space = FeSpace::scalar(&mesh, Degree::P1);
    let problem = ProblemSpec::laplace(Geometry::Ball, BALL_RADIUS);
    let approx = solve_truncated(&space, &problem, &TailSolveOptions::default()).unwrap();
    let base = FluxApproximation::from_conforming(&space, &problem, &approx);
    let config = NcConfig::default();
    let mut reports = Vec::new();
    for delta in [0.0, 0.01, 0.1] {
        let flux = if delta == 0.0 { base.clone() } else { base.perturbed(&mesh, delta, 7) };
        let report = nonconforming_bounds(&mesh, &problem, &flux, &config).unwrap();
        reports.push((delta, report));
    }
    NcState { reports }
});

static CUBE_LADDER: LazyLock<Vec<(usize, BoundReport<f64>)>> = LazyLock::new(|| {
    let radius = 10.0;
    [(2usize, 8usize), (3, 10), (4, 13)]
        .iter()
        .map(|&(n, m)| {
            let mesh = generate_cube_complement_octant::<f64>(radius, n, m).unwrap();
            let space = FeSpace::scalar(&mesh, Degree::P1);
            let problem = ProblemSpec::laplace(Geometry::Cube, radius);
            let approx = solve_truncated(&space, &problem, &TailSolveOptions::default()).unwrap();
            let report =
                conforming_bounds(&space, &problem, &approx, &ConformingConfig::default()).unwrap();
            (mesh.tets.len(), report)
        })
        .collect()
});

/// Exact-input runs: P1 interpolant of 1/r with zeta = 1 and the flux seeded
/// from the exact flux; returns (tets, majorant^2 / |grad u|^2) per rung.
static EXACT_INPUT: LazyLock<Vec<(usize, f64)>> = LazyLock::new(|| {
    let r = BALL_RADIUS;
    let problem = ProblemSpec::laplace(Geometry::Ball, r);
    [(8usize, 8usize), (16, 16), (32, 32)]
        .iter()
        .map(|&(n, m)| {
            let mesh = generate_ball_octant_shell::<f64>(r, n, m).unwrap();
            let space = FeSpace::scalar(&mesh, Degree::P1);
            let coeffs = space
                .interpolate_scalar(|p| 1.0 / (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
                .unwrap();
            let fe = majorant::fem::FeScalar { space: &space, coeffs: &coeffs };
            let target = majorant::fem::FeGradient(fe);

            let flux_space = FeSpace::vector(&mesh, Degree::P2);
            let seed = flux_space
                .interpolate_vector(|p| {
                    let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                    let r3 = r2 * r2.sqrt();
                    [-p[0] / r3, -p[1] / r3, -p[2] / r3]
                })
                .unwrap();
            let out = minimize_majorant_seeded(
                &mesh,
                &problem,
                &target,
                1.0,
                &MajorantConfig::default(),
                Some(seed),
            )
            .unwrap();

            let quad = QuadratureRule::default_rule();
            let grad_sq = 8.0
                * majorant::fem::a_norm_sq(&mesh, &quad, &CoefficientField::Identity, &target)
                + tail_energy(1.0, r).unwrap();
            (mesh.tets.len(), out.majorant_sq / grad_sq)
        })
        .collect()
});

#[test]
fn criterion_1_bracketing_with_exact_oracle() {
    let (ladder, wall) = &*BALL_LADDER;
    assert!(ladder[0].tets >= 1500, "coarsest mesh has {} tets", ladder[0].tets);
    let mut rows = Vec::new();
    for e in ladder {
        check_bracketing(&e.report, 1e-8)
            .unwrap_or_else(|msg| panic!("({}, {}): {msg}", e.n_radial, e.n_angular));
        let energy = e.report.energy_sq;
        let maj = e.report.majorant_sq / energy;
        let oracle = e.report.oracle_error_sq.unwrap() / energy;
        let min = e.report.minorant / energy;
        assert!(min <= oracle && oracle <= maj, "ordering violated");
        for (name, v) in [("majorant", maj), ("oracle", oracle), ("minorant", min)] {
            assert!(
                (0.002..=0.10).contains(&v),
                "{name} {:.4}% outside [0.2%, 10%] on {} tets",
                100.0 * v,
                e.tets
            );
        }
        rows.push((maj, oracle, min));
    }
    for w in rows.windows(2) {
        assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1 && w[1].2 < w[0].2, "not decreasing: {rows:?}");
    }
    assert!(*wall <= 300.0, "ladder took {wall:.1} s, budget is 300 s");
    println!(
        "acceptance 1 (bracketing with exact oracle): PASS  rel% rows {:?}, ladder {:.1} s",
        rows.iter()
            .map(|r| format!("{:.2} >= {:.2} >= {:.2}", 100.0 * r.0, 100.0 * r.1, 100.0 * r.2))
            .collect::<Vec<_>>(),
        wall
    );
}

#[test]
fn criterion_2_majorant_efficiency() {
    let (ladder, _) = &*BALL_LADDER;
    let eff: Vec<f64> = ladder.iter().map(|e| e.report.efficiency_majorant.unwrap()).collect();
    assert!(eff[0] <= 1.5, "coarse efficiency {}", eff[0]);
    for w in eff.windows(2) {
        assert!(w[1] <= w[0], "efficiency not decreasing: {eff:?}");
    }
    println!("acceptance 2 (majorant efficiency): PASS  indices {eff:?}");
}

#[test]
fn criterion_3_energy_minimization() {
    let (ladder, _) = &*BALL_LADDER;
    for e in ladder {
        assert!(e.approx.converged, "({}, {}) did not converge", e.n_radial, e.n_angular);
        assert!(e.approx.trace.len() <= 20, "{} outer iterations", e.approx.trace.len());
        let scale = e.approx.trace[0].energy.abs();
        for w in e.approx.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-12 * scale, "energy not monotone");
        }
    }
    let zeta_medium = ladder[1].approx.zeta;
    assert!((zeta_medium - 1.0).abs() <= 0.05, "medium-mesh zeta {zeta_medium}");
    println!(
        "acceptance 3 (energy minimization): PASS  zeta {:?}, iterations {:?}",
        ladder.iter().map(|e| e.approx.zeta).collect::<Vec<_>>(),
        ladder.iter().map(|e| e.approx.trace.len()).collect::<Vec<_>>()
    );
}

#[test]
fn criterion_4_exact_input_degeneracy() {
    let rows = &*EXACT_INPUT;
    for w in rows.windows(2) {
        assert!(w[1].1 < w[0].1, "not decreasing under refinement: {rows:?}");
    }
    let last = rows.last().unwrap();
    assert!(last.1 <= 1e-3, "relative majorant^2 {} on {} tets exceeds 1e-3", last.1, last.0);
    println!(
        "acceptance 4 (exact-input degeneracy): PASS  relative majorant^2 {:?}",
        rows.iter().map(|r| format!("{} tets: {:.3e}", r.0, r.1)).collect::<Vec<_>>()
    );
}

#[test]
fn criterion_5_nonconforming_ordering_chain() {
    let state = &*NC_MEDIUM;
    let mut summary = Vec::new();
    for (delta, report) in &state.reports {
        check_nc_ordering(report, 1e-8).unwrap_or_else(|m| panic!("delta {delta}: {m}"));
        let oracle = report.oracle_error_sq.unwrap();
        if *delta > 0.0 {
            let eff = report.m_plus_total / oracle;
            assert!(eff <= 2.2, "delta {delta}: upper/oracle {eff}");
            let sharp = report.m_minus_total / oracle;
            assert!(sharp >= 0.95, "delta {delta}: lower/oracle {sharp}");
            summary.push(format!("d={delta}: {sharp:.3} <= 1 <= {eff:.3}"));
        }
        for &(theta, value) in &report.appendix_plus {
            assert!(
                report.m_plus_total <= value * (1.0 + 1e-14),
                "theta {theta} weakening below the sharp bound"
            );
        }
    }
    println!("acceptance 5 (non-conforming ordering chain): PASS  {summary:?}");
}

#[test]
fn criterion_6_exact_algebraic_identities() {
    // theta = 1 gives exactly five times the sharp upper bound
    for (delta, report) in &NC_MEDIUM.reports {
        let five = report
            .appendix_plus
            .iter()
            .find(|(t, _)| *t == 1.0)
            .map(|(_, v)| *v)
            .expect("theta = 1 in the grid");
        assert!(
            (five - 5.0 * report.m_plus_total).abs() <= 1e-14 * five.abs(),
            "delta {delta}: {five} vs {}",
            5.0 * report.m_plus_total
        );
        // Helmholtz Pythagoras
        let sum = report.split_grad_norm_sq + report.split_psi_norm_sq;
        assert!(
            (report.split_e_norm_sq - sum).abs() <= 1e-8 * report.split_e_norm_sq,
            "delta {delta}: Pythagoras {} vs {}",
            report.split_e_norm_sq,
            sum
        );
    }
    // optimal-beta identity on every conforming ladder entry
    for e in &BALL_LADDER.0 {
        assert!(
            (e.report.majorant_sq - e.report.majorant_sq_sharp).abs()
                <= 1e-12 * e.report.majorant_sq,
            "({}, {}): {} vs {}",
            e.n_radial,
            e.n_angular,
            e.report.majorant_sq,
            e.report.majorant_sq_sharp
        );
    }
    println!("acceptance 6 (exact algebraic identities): PASS");
}

#[test]
fn criterion_7_conforming_reduction() {
    let conforming = &BALL_LADDER.0[1].report;
    let (delta, nc) = &NC_MEDIUM.reports[0];
    assert_eq!(*delta, 0.0);
    let rel = (nc.m_plus_total - conforming.majorant_sq).abs() / conforming.majorant_sq;
    assert!(rel <= 1e-10, "upper bounds differ by {rel:.3e} relative");
    assert!(nc.inf_m_tilde_plus_sq <= 1e-12 * nc.m_plus_total);
    assert!(nc.m_tilde_minus.abs() <= 1e-12 * nc.m_minus_total.abs());
    println!("acceptance 7 (conforming reduction): PASS  relative gap {rel:.2e}");
}

#[test]
fn criterion_8_cube_example() {
    let ladder = &*CUBE_LADDER;
    assert!(ladder[0].0 >= 2300, "coarsest cube mesh has {} tets", ladder[0].0);
    let mut rows = Vec::new();
    for (tets, report) in ladder {
        check_bracketing(report, 1e-8).unwrap();
        assert!(report.oracle_error_sq.is_none(), "no oracle is claimed for the cube");
        let maj = report.majorant_sq / report.energy_sq;
        let min = report.minorant / report.energy_sq;
        assert!(min <= maj);
        for (name, v) in [("majorant", maj), ("minorant", min)] {
            assert!(
                (0.005..=0.20).contains(&v),
                "{name} {:.3}% outside [0.5%, 20%] on {tets} tets",
                100.0 * v
            );
        }
        rows.push((maj, min));
    }
    for w in rows.windows(2) {
        let gap0 = w[0].0 - w[0].1;
        let gap1 = w[1].0 - w[1].1;
        assert!(gap1 < gap0, "gap not shrinking: {rows:?}");
    }
    println!(
        "acceptance 8 (cube example): PASS  rel% rows {:?}",
        rows.iter()
            .map(|r| format!("{:.2} >= {:.2}", 100.0 * r.0, 100.0 * r.1))
            .collect::<Vec<_>>()
    );
}

#[test]
fn criterion_9_property_suites() {
    // coercivity estimate on >= 100 random admissible functions
    let mesh = generate_ball_octant_shell::<f64>(BALL_RADIUS, 3, 4).unwrap();
    let space = FeSpace::scalar(&mesh, Degree::P1);
    let quad = QuadratureRule::oracle_rule();
    let consts = constants(3, 1.0).unwrap();
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let mut coeffs: Vec<f64> =
            (0..space.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for tag in [BoundaryTag::Gamma, BoundaryTag::Sphere] {
            for n in space.nodes_with_tag(tag) {
                coeffs[n as usize] = 0.0;
            }
        }
        let (lhs, rhs) =
            poincare_check(&space, &coeffs, &CoefficientField::Identity, &consts, &quad).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
    }

    // quadrature monomial exactness against the factorial formula
    for degree in [5usize, 7] {
        let rule = QuadratureRule::<f64>::for_degree(degree);
        let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>().max(1.0);
        for a in 0..=degree as u32 {
            for b in 0..=(degree as u32 - a) {
                for c in 0..=(degree as u32 - a - b) {
                    let num: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, &w)| {
                            w * p[1].powi(a as i32) * p[2].powi(b as i32) * p[3].powi(c as i32)
                        })
                        .sum();
                    let exact = fact(a) * fact(b) * fact(c) / fact(a + b + c + 3);
                    assert!((num - exact).abs() <= 1e-14 * exact);
                }
            }
        }
    }

    // the validator catches seeded defects
    let mut broken = generate_ball_octant_shell::<f64>(BALL_RADIUS, 1, 2).unwrap();
    broken.tets[0].swap(0, 1);
    assert!(broken
        .validate()
        .contains(&MeshDefect::NegativeVolume { tet: 0 }));
    let mut untagged = generate_ball_octant_shell::<f64>(BALL_RADIUS, 1, 2).unwrap();
    untagged.boundary_faces.pop();
    assert!(untagged
        .validate()
        .iter()
        .any(|d| matches!(d, MeshDefect::UncoveredBoundaryFace { .. })));

    // text format round trip is the identity
    let mesh = generate_cube_complement_octant::<f64>(10.0, 1, 3).unwrap();
    let back = read_mesh_from_str::<f64>(&write_mesh_to_string(&mesh)).unwrap();
    assert_eq!(mesh, back);

    // CG residual contract on an assembled system
    let space = FeSpace::scalar(&mesh, Degree::P1);
    let k = majorant::fem::assemble_stiffness(
        &space,
        &CoefficientField::Identity,
        &QuadratureRule::default_rule(),
    )
    .unwrap();
    let mut bc = majorant::fem::ConstraintSet::new();
    for n in space.nodes_with_tag(BoundaryTag::Gamma) {
        bc.set(n, 1.0).unwrap();
    }
    for n in space.nodes_with_tag(BoundaryTag::Sphere) {
        bc.set(n, 0.0).unwrap();
    }
    let rhs = vec![0.0; space.num_dofs()];
    let reduced = majorant::fem::apply_constraints(&k, &rhs, &bc).unwrap();
    let opts = majorant::fem::CgOptions::default();
    let (x, stats) = majorant::fem::solve_cg(&reduced.matrix, &reduced.rhs, None, &opts).unwrap();
    assert!(stats.rel_residual <= opts.rel_tol);
    let ax = reduced.matrix.apply(&x);
    let res: Vec<f64> = reduced.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let rel = majorant::fem::sparse::norm_vec(&res) / majorant::fem::sparse::norm_vec(&reduced.rhs);
    assert!(rel <= opts.rel_tol);

    println!("acceptance 9 (property suites): PASS");
}
