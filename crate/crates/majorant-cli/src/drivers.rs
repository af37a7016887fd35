//! The four experiment drivers. All values in the emitted CSV files are
//! full-domain (octant integrals times 8) unless a column name says
//! otherwise; numbers are written as `%.6e`, percentages with two decimals.

use std::fmt::Write as _;
use std::path::Path;

use majorant::bounds::conforming::{
    check_bracketing, conforming_bounds, ConformingConfig,
};
use majorant::bounds::nonconforming::{
    check_nc_ordering, nonconforming_bounds, FluxApproximation, NcConfig,
};
use majorant::fem::{Degree, FeSpace};
use majorant::mesh::{
    generate_ball_octant_shell, generate_cube_complement_octant, write_mesh, TetMesh,
};
use majorant::problem::{Geometry, ProblemSpec};
use majorant::report::{format_e6, write_vtk_cell_scalars};
use majorant::truncation::{energy_breakdown, solve_truncated, TruncatedApproximation};
use majorant::fem::QuadratureRule;

use crate::config::RunConfig;
use crate::CliError;

fn generate(config: &RunConfig, n: usize, m: usize) -> Result<TetMesh<f64>, CliError> {
    let mesh = match config.geometry() {
        Geometry::Ball => generate_ball_octant_shell(config.radius, n, m),
        Geometry::Cube => generate_cube_complement_octant(config.radius, n, m),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(mesh)
}

fn problem(config: &RunConfig) -> ProblemSpec<f64> {
    let mut p = ProblemSpec::laplace(config.geometry(), config.radius);
    p.boundary_value = config.boundary_value;
    p
}

fn solve_entry(
    config: &RunConfig,
    mesh: &TetMesh<f64>,
) -> Result<TruncatedApproximation<f64>, CliError> {
    let space = FeSpace::scalar(mesh, Degree::P1);
    solve_truncated(&space, &problem(config), &config.tail_options())
        .map_err(|e| CliError::Other(anyhow::anyhow!("energy minimization failed: {e}")))
}

/// `meshgen`: one TETMESH file per ladder entry.
pub fn cmd_meshgen(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    for &(n, m) in &config.ladder {
        let mesh = generate(config, n, m)?;
        let path = out.join(format!("mesh_{n}x{m}.tetmesh"));
        write_mesh(&mesh, &path)
            .map_err(|e| CliError::Other(anyhow::anyhow!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

/// `solve`: tail-coupled energy minimization per ladder entry; summary CSV
/// plus one iteration-trace CSV per mesh. Exit code 3 if any entry fails to
/// converge within the iteration budget.
pub fn cmd_solve(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut summary = String::from(
        "n_radial,n_angular,n_tets,zeta,energy_interior_fulldomain,energy_tail_fulldomain,energy_total_fulldomain,iterations,converged\n",
    );
    let mut all_converged = true;
    for &(n, m) in &config.ladder {
        let mesh = generate(config, n, m)?;
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let approx = solve_entry(config, &mesh)?;
        let quad = QuadratureRule::default_rule();
        let energy = energy_breakdown(&space, &approx, &quad)
            .map_err(|e| CliError::Other(anyhow::anyhow!("{e}")))?;
        let _ = writeln!(
            summary,
            "{n},{m},{},{},{},{},{},{},{}",
            mesh.tets.len(),
            format_e6(approx.zeta),
            format_e6(energy.interior),
            format_e6(energy.tail),
            format_e6(energy.total),
            approx.trace.len(),
            approx.converged
        );
        let mut trace = String::from("k,zeta,energy_fulldomain,zeta_rel_change\n");
        for rec in &approx.trace {
            let _ = writeln!(
                trace,
                "{},{},{},{}",
                rec.k,
                format_e6(rec.zeta),
                format_e6(rec.energy),
                format_e6(rec.zeta_rel_change)
            );
        }
        write_out(out, &format!("trace_{n}x{m}.csv"), &trace)?;
        all_converged &= approx.converged;
    }
    write_out(out, "solve.csv", &summary)?;
    if all_converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence)
    }
}

/// `bounds`: two-sided bounds per ladder entry; CSV mirroring the error
/// tables (percent columns with two decimals) plus per-element indicator VTK.
/// An ordering violation aborts with exit code 4 before the row is written.
pub fn cmd_bounds(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let problem = problem(config);
    let mut csv = String::from(
        "n_radial,n_angular,n_tets,energy_sq_fulldomain,majorant_sq_fulldomain,oracle_error_sq_fulldomain,minorant_fulldomain,majorant_rel_pct,oracle_rel_pct,minorant_rel_pct,beta,efficiency_majorant\n",
    );
    let bounds_config = ConformingConfig {
        majorant: config.majorant_config(),
        minorant_cg: config.cg_options(),
    };
    for &(n, m) in &config.ladder {
        let mesh = generate(config, n, m)?;
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let approx = solve_entry(config, &mesh)?;
        let report = conforming_bounds(&space, &problem, &approx, &bounds_config)
            .map_err(|e| CliError::Other(anyhow::anyhow!("bounds failed: {e}")))?;
        check_bracketing(&report, 1e-8).map_err(CliError::BoundViolation)?;

        let pct = |x: f64| format!("{:.2}", 100.0 * x / report.energy_sq);
        let opt = |x: Option<f64>| x.map(format_e6).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{n},{m},{},{},{},{},{},{},{},{},{},{}",
            mesh.tets.len(),
            format_e6(report.energy_sq),
            format_e6(report.majorant_sq),
            opt(report.oracle_error_sq),
            format_e6(report.minorant),
            pct(report.majorant_sq),
            report.oracle_error_sq.map(&pct).unwrap_or_default(),
            pct(report.minorant),
            format_e6(report.beta),
            opt(report.efficiency_majorant),
        );
        let vtk = out.join(format!("indicator_{n}x{m}.vtk"));
        write_vtk_cell_scalars(&mesh, "error_indicator_octant", &report.indicator, &vtk)
            .map_err(|e| CliError::Other(anyhow::anyhow!("writing {}: {e}", vtk.display())))?;
    }
    write_out(out, "bounds.csv", &csv)?;
    Ok(())
}

/// `nonconforming`: fabricated-flux suite per ladder entry and delta; CSV of
/// the full ordering chain. Exit code 4 on any ordering violation.
pub fn cmd_nonconforming(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let problem = problem(config);
    let thetas = config.thetas();
    let mut header = String::from(
        "instance,n_tets,delta,m_minus_fulldomain,oracle_error_sq_fulldomain,m_plus_fulldomain,inf_m_plus_sq,inf_m_tilde_plus_sq,sup_m_minus,m_tilde_minus,beta",
    );
    for t in &thetas {
        let _ = write!(header, ",appendix_plus_theta_{t}");
    }
    header.push('\n');
    let mut csv = header;
    let nc_config = NcConfig {
        majorant: config.majorant_config(),
        cg: config.cg_options(),
        thetas: thetas.clone(),
        ..NcConfig::default()
    };
    for &(n, m) in &config.ladder {
        let mesh = generate(config, n, m)?;
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let approx = solve_entry(config, &mesh)?;
        let base = FluxApproximation::from_conforming(&space, &problem, &approx);
        for &delta in &config.deltas() {
            let flux = if delta == 0.0 {
                base.clone()
            } else {
                base.perturbed(&mesh, delta, config.perturbation_seed)
            };
            let report = nonconforming_bounds(&mesh, &problem, &flux, &nc_config)
                .map_err(|e| CliError::Other(anyhow::anyhow!("bounds failed: {e}")))?;
            check_nc_ordering(&report, 1e-8).map_err(CliError::BoundViolation)?;
            let opt = |x: Option<f64>| x.map(format_e6).unwrap_or_default();
            let _ = write!(
                csv,
                "{n}x{m},{},{},{},{},{},{},{},{},{},{}",
                mesh.tets.len(),
                format_e6(delta),
                format_e6(report.m_minus_total),
                opt(report.oracle_error_sq),
                format_e6(report.m_plus_total),
                format_e6(report.inf_m_plus_sq),
                format_e6(report.inf_m_tilde_plus_sq),
                format_e6(report.sup_m_minus),
                format_e6(report.m_tilde_minus),
                format_e6(report.beta),
            );
            for &(_, value) in &report.appendix_plus {
                let _ = write!(csv, ",{}", format_e6(value));
            }
            csv.push('\n');
        }
    }
    write_out(out, "nonconforming.csv", &csv)?;
    Ok(())
}

fn write_out(out: &Path, name: &str, content: &str) -> Result<(), CliError> {
    let path = out.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::Other(anyhow::anyhow!("writing {}: {e}", path.display())))
}
