//! Sparse assembly of the bilinear forms and right-hand sides.
//!
//! Local matrices are computed on the upper triangle and mirrored, so the
//! assembled matrices are exactly symmetric. Assembly is sequential and
//! bit-stable for a fixed mesh.

use super::{tet_geometry, FeSpace, QuadratureRule, MAX_LOCAL_NODES};
use crate::fem::sparse::{CsrMatrix, PatternBuilder};
use crate::fields::{CoefficientField, ScalarField, VectorField};
use crate::mesh::dot;
use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum AssembleError {
    #[error("operation requires a scalar (1-component) space")]
    ExpectsScalar,
    #[error("operation requires a 3-component space")]
    ExpectsVector,
    #[error("coefficient on tet {tet} is not symmetric positive definite")]
    NotSpd { tet: usize },
}

const MAX_LOCAL_DOFS: usize = 3 * MAX_LOCAL_NODES;

fn check_spd<S: Real>(coeff: &CoefficientField<S>, n_tets: usize) -> Result<(), AssembleError> {
    match coeff {
        CoefficientField::Identity => Ok(()),
        CoefficientField::Uniform(m) => {
            if m.is_spd() {
                Ok(())
            } else {
                Err(AssembleError::NotSpd { tet: 0 })
            }
        }
        CoefficientField::PerTet(v) => {
            for (t, m) in v.iter().take(n_tets).enumerate() {
                if !m.is_spd() {
                    return Err(AssembleError::NotSpd { tet: t });
                }
            }
            Ok(())
        }
    }
}

/// Sparsity pattern of any of the bilinear forms: scalar node adjacency
/// expanded to all component pairs. Building the adjacency on scalar nodes
/// first keeps the transient memory small on large vector spaces.
fn build_pattern<S: Real>(space: &FeSpace<S>) -> CsrMatrix<S> {
    let comps = space.components;
    let mut pb = PatternBuilder::new(space.num_scalar_nodes());
    for t in 0..space.mesh.tets.len() {
        let (nodes, n) = space.tet_nodes(t);
        for a in 0..n {
            for b in 0..n {
                pb.add(nodes[a], nodes[b]);
            }
        }
    }
    let scalar = pb.build::<S>();
    if comps == 1 {
        return scalar;
    }
    let n = comps * scalar.n;
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0usize);
    let mut cols = Vec::with_capacity(comps * comps * scalar.nnz());
    for node in 0..scalar.n {
        let lo = scalar.row_ptr[node];
        let hi = scalar.row_ptr[node + 1];
        for _c in 0..comps {
            for k in lo..hi {
                let base = scalar.cols[k] * comps as u32;
                for cb in 0..comps as u32 {
                    cols.push(base + cb);
                }
            }
            row_ptr.push(cols.len());
        }
    }
    let vals = vec![S::zero(); cols.len()];
    CsrMatrix { n, row_ptr, cols, vals }
}

/// Scatters the upper triangle of a local matrix symmetrically.
fn scatter_symmetric<S: Real>(
    matrix: &mut CsrMatrix<S>,
    dofs: &[u32],
    local: &[[S; MAX_LOCAL_DOFS]],
) {
    for a in 0..dofs.len() {
        for b in a..dofs.len() {
            let v = local[a][b];
            matrix.add_at(dofs[a], dofs[b], v);
            if a != b {
                matrix.add_at(dofs[b], dofs[a], v);
            }
        }
    }
}

/// Stiffness matrix of a scalar space: entries `sum_T int_T A grad(phi_j) . grad(phi_i)`.
pub fn assemble_stiffness<S: Real>(
    space: &FeSpace<S>,
    coeff: &CoefficientField<S>,
    quad: &QuadratureRule<S>,
) -> Result<CsrMatrix<S>, AssembleError> {
    if space.components != 1 {
        return Err(AssembleError::ExpectsScalar);
    }
    check_spd(coeff, space.mesh.tets.len())?;
    let mut matrix = build_pattern(space);
    let nn = space.local_nodes();
    let mut local = [[S::zero(); MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS];
    for t in 0..space.mesh.tets.len() {
        let geom = tet_geometry(space.mesh, t);
        let scale = S::of(6.0) * geom.volume.abs();
        let a_mat = coeff.at(t);
        for row in local.iter_mut().take(nn) {
            row[..nn].fill(S::zero());
        }
        for (bary, &w) in quad.points.iter().zip(&quad.weights) {
            let (grads, _) = space.basis_gradients(bary, &geom.lambda_grads);
            let ws = w * scale;
            for a in 0..nn {
                let ag = a_mat.apply(grads[a]);
                for b in a..nn {
                    local[a][b] += ws * dot(ag, grads[b]);
                }
            }
        }
        let (nodes, n) = space.tet_nodes(t);
        scatter_symmetric(&mut matrix, &nodes[..n], &local);
    }
    Ok(matrix)
}

/// Mass and weighted divergence matrices of a 3-vector space, sharing one
/// sparsity pattern:
/// mass `int A^{-1} psi_j . psi_i`, divergence `int (1+r^2) div(psi_j) div(psi_i)`.
pub fn assemble_flux_system<S: Real>(
    space: &FeSpace<S>,
    coeff: &CoefficientField<S>,
    quad: &QuadratureRule<S>,
) -> Result<(CsrMatrix<S>, CsrMatrix<S>), AssembleError> {
    if space.components != 3 {
        return Err(AssembleError::ExpectsVector);
    }
    check_spd(coeff, space.mesh.tets.len())?;
    let mut mass = build_pattern(space);
    let mut div = mass.clone();
    let nn = space.local_nodes();
    let nd = 3 * nn;
    let mut local_mass = [[S::zero(); MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS];
    let mut local_div = [[S::zero(); MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS];
    let mut dofs = [0u32; MAX_LOCAL_DOFS];
    for t in 0..space.mesh.tets.len() {
        let geom = tet_geometry(space.mesh, t);
        let scale = S::of(6.0) * geom.volume.abs();
        let ainv = coeff.at(t).inverse();
        for a in 0..nd {
            local_mass[a][..nd].fill(S::zero());
            local_div[a][..nd].fill(S::zero());
        }
        for (bary, &w) in quad.points.iter().zip(&quad.weights) {
            let (vals, _) = space.basis_values(bary);
            let (grads, _) = space.basis_gradients(bary, &geom.lambda_grads);
            let x = geom.point(bary);
            let rho2 = S::one() + dot(x, x);
            let ws = w * scale;
            let wr = ws * rho2;
            // vector basis l = 3*a + ca is phi_a e_{ca}: value phi_a in slot ca,
            // divergence d(phi_a)/d(x_ca)
            for a in 0..nn {
                for ca in 0..3 {
                    let la = 3 * a + ca;
                    let diva = grads[a][ca];
                    for b in a..nn {
                        let cb0 = if b == a { ca } else { 0 };
                        for cb in cb0..3 {
                            let lb = 3 * b + cb;
                            local_mass[la][lb] += ws * ainv.entry(ca, cb) * vals[a] * vals[b];
                            local_div[la][lb] += wr * diva * grads[b][cb];
                        }
                    }
                }
            }
        }
        let (nodes, n) = space.tet_nodes(t);
        for a in 0..n {
            for c in 0..3 {
                dofs[3 * a + c] = nodes[a] * 3 + c as u32;
            }
        }
        scatter_symmetric(&mut mass, &dofs[..nd], &local_mass);
        scatter_symmetric(&mut div, &dofs[..nd], &local_div);
    }
    Ok((mass, div))
}

/// `int A^{-1} psi_j . psi_i` alone.
pub fn assemble_vector_mass<S: Real>(
    space: &FeSpace<S>,
    coeff: &CoefficientField<S>,
    quad: &QuadratureRule<S>,
) -> Result<CsrMatrix<S>, AssembleError> {
    Ok(assemble_flux_system(space, coeff, quad)?.0)
}

/// `int (1+r^2) div(psi_j) div(psi_i)` alone.
pub fn assemble_weighted_div<S: Real>(
    space: &FeSpace<S>,
    quad: &QuadratureRule<S>,
) -> Result<CsrMatrix<S>, AssembleError> {
    Ok(assemble_flux_system(space, &CoefficientField::Identity, quad)?.1)
}

/// `int f phi_i` for a scalar space.
pub fn assemble_source_rhs<S: Real>(
    space: &FeSpace<S>,
    f: &impl ScalarField<S>,
    quad: &QuadratureRule<S>,
) -> Result<Vec<S>, AssembleError> {
    if space.components != 1 {
        return Err(AssembleError::ExpectsScalar);
    }
    let mut rhs = vec![S::zero(); space.num_dofs()];
    for t in 0..space.mesh.tets.len() {
        let geom = tet_geometry(space.mesh, t);
        let scale = S::of(6.0) * geom.volume.abs();
        let (nodes, n) = space.tet_nodes(t);
        for (bary, &w) in quad.points.iter().zip(&quad.weights) {
            let (vals, _) = space.basis_values(bary);
            let x = geom.point(bary);
            let fv = f.eval(t, &x, bary) * w * scale;
            for a in 0..n {
                rhs[nodes[a] as usize] += fv * vals[a];
            }
        }
    }
    Ok(rhs)
}

/// `int w . grad(phi_i)` for a scalar space.
pub fn assemble_gradient_rhs<S: Real>(
    space: &FeSpace<S>,
    w: &impl VectorField<S>,
    quad: &QuadratureRule<S>,
) -> Result<Vec<S>, AssembleError> {
    if space.components != 1 {
        return Err(AssembleError::ExpectsScalar);
    }
    let mut rhs = vec![S::zero(); space.num_dofs()];
    for t in 0..space.mesh.tets.len() {
        let geom = tet_geometry(space.mesh, t);
        let scale = S::of(6.0) * geom.volume.abs();
        let (nodes, n) = space.tet_nodes(t);
        for (bary, &wq) in quad.points.iter().zip(&quad.weights) {
            let (grads, _) = space.basis_gradients(bary, &geom.lambda_grads);
            let x = geom.point(bary);
            let wv = w.eval(t, &x, bary);
            let ws = wq * scale;
            for a in 0..n {
                rhs[nodes[a] as usize] += ws * dot(wv, grads[a]);
            }
        }
    }
    Ok(rhs)
}

/// `int g . psi_i` for a 3-vector space.
pub fn assemble_vector_value_rhs<S: Real>(
    space: &FeSpace<S>,
    g: &impl VectorField<S>,
    quad: &QuadratureRule<S>,
) -> Result<Vec<S>, AssembleError> {
    if space.components != 3 {
        return Err(AssembleError::ExpectsVector);
    }
    let mut rhs = vec![S::zero(); space.num_dofs()];
    for t in 0..space.mesh.tets.len() {
        let geom = tet_geometry(space.mesh, t);
        let scale = S::of(6.0) * geom.volume.abs();
        let (nodes, n) = space.tet_nodes(t);
        for (bary, &wq) in quad.points.iter().zip(&quad.weights) {
            let (vals, _) = space.basis_values(bary);
            let x = geom.point(bary);
            let gv = g.eval(t, &x, bary);
            let ws = wq * scale;
            for a in 0..n {
                let base = nodes[a] as usize * 3;
                for c in 0..3 {
                    rhs[base + c] += ws * gv[c] * vals[a];
                }
            }
        }
    }
    Ok(rhs)
}

/// `int (1+r^2) f div(psi_i)` for a 3-vector space.
pub fn assemble_weighted_div_rhs<S: Real>(
    space: &FeSpace<S>,
    f: &impl ScalarField<S>,
    quad: &QuadratureRule<S>,
) -> Result<Vec<S>, AssembleError> {
    if space.components != 3 {
        return Err(AssembleError::ExpectsVector);
    }
    let mut rhs = vec![S::zero(); space.num_dofs()];
    for t in 0..space.mesh.tets.len() {
        let geom = tet_geometry(space.mesh, t);
        let scale = S::of(6.0) * geom.volume.abs();
        let (nodes, n) = space.tet_nodes(t);
        for (bary, &wq) in quad.points.iter().zip(&quad.weights) {
            let (grads, _) = space.basis_gradients(bary, &geom.lambda_grads);
            let x = geom.point(bary);
            let rho2 = S::one() + dot(x, x);
            let fv = f.eval(t, &x, bary) * wq * scale * rho2;
            for a in 0..n {
                let base = nodes[a] as usize * 3;
                for c in 0..3 {
                    rhs[base + c] += fv * grads[a][c];
                }
            }
        }
    }
    Ok(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::sparse::dot_vec;
    use crate::fem::Degree;
    use crate::mesh::{BoundaryTag, TetMesh};

    pub fn reference_tet_mesh() -> TetMesh<f64> {
        TetMesh {
            vertices: vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            tets: vec![[0, 1, 2, 3]],
            regions: vec![0],
            boundary_faces: vec![
                ([1, 2, 3], BoundaryTag::Gamma),
                ([0, 2, 3], BoundaryTag::SymX),
                ([0, 1, 3], BoundaryTag::SymY),
                ([0, 1, 2], BoundaryTag::SymZ),
            ],
        }
    }

    #[test]
    fn p1_reference_stiffness_matches_hand_integration() {
        let mesh = reference_tet_mesh();
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let k = assemble_stiffness(&space, &CoefficientField::Identity, &QuadratureRule::default_rule())
            .unwrap();
        // grad(l0) = (-1,-1,-1), grad(l_i) = e_i, volume 1/6:
        let expected = [
            [0.5, -1.0 / 6.0, -1.0 / 6.0, -1.0 / 6.0],
            [-1.0 / 6.0, 1.0 / 6.0, 0.0, 0.0],
            [-1.0 / 6.0, 0.0, 1.0 / 6.0, 0.0],
            [-1.0 / 6.0, 0.0, 0.0, 1.0 / 6.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (k.get(i as u32, j as u32) - expected[i][j]).abs() < 1e-14,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero_and_scale_linearly() {
        let mesh = crate::mesh::generate_ball_octant_shell::<f64>(5.0, 2, 3).unwrap();
        let space = FeSpace::scalar(&mesh, Degree::P2);
        let quad = QuadratureRule::default_rule();
        let k = assemble_stiffness(&space, &CoefficientField::Identity, &quad).unwrap();
        let ones = vec![1.0; space.num_dofs()];
        let row_sums = k.apply(&ones);
        let scale = k.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(row_sums.iter().all(|&r| r.abs() <= 1e-12 * scale));

        let k2 = assemble_stiffness(
            &space,
            &CoefficientField::Uniform(crate::fields::SymMat3::scaled_identity(2.0)),
            &quad,
        )
        .unwrap();
        for (a, b) in k.vals.iter().zip(&k2.vals) {
            assert!((2.0 * a - b).abs() <= 1e-14 * b.abs().max(1e-300));
        }
        assert!(k.asymmetry() == 0.0);
    }

    #[test]
    fn non_spd_coefficient_is_rejected() {
        let mesh = reference_tet_mesh();
        let space = FeSpace::scalar(&mesh, Degree::P1);
        let bad = CoefficientField::Uniform(crate::fields::SymMat3::diagonal([1.0, -1.0, 1.0]));
        assert!(matches!(
            assemble_stiffness(&space, &bad, &QuadratureRule::default_rule()),
            Err(AssembleError::NotSpd { .. })
        ));
    }

    #[test]
    fn weighted_div_kernel_contains_constants_and_matches_symbolic_value() {
        let mesh = reference_tet_mesh();
        let space = FeSpace::vector(&mesh, Degree::P2);
        let quad = QuadratureRule::default_rule();
        let d = assemble_weighted_div(&space, &quad).unwrap();
        // constant field has zero divergence
        let mut constant = vec![0.0; space.num_dofs()];
        for n in 0..space.num_scalar_nodes() {
            constant[3 * n] = 0.3;
            constant[3 * n + 1] = -0.7;
            constant[3 * n + 2] = 0.1;
        }
        let q = dot_vec(&constant, &d.apply(&constant));
        assert!(q.abs() < 1e-13);

        // v(x) = x has div = 3: int (1+r^2) 9 over the reference tet
        // = 9 (1/6 + 3/60) = 39/20
        let v = space.interpolate_vector(|p| *p).unwrap();
        let q = dot_vec(&v, &d.apply(&v));
        assert!((q - 39.0 / 20.0).abs() < 1e-13, "{q}");

        // integrand is already exact: raising the degree changes nothing
        let d7 = assemble_weighted_div(&space, &QuadratureRule::for_degree(7)).unwrap();
        let q7 = dot_vec(&v, &d7.apply(&v));
        assert!((q - q7).abs() <= 1e-13 * q.abs());
    }

    #[test]
    fn vector_mass_total_and_scaling() {
        let mesh = crate::mesh::generate_ball_octant_shell::<f64>(4.0, 2, 2).unwrap();
        let space = FeSpace::vector(&mesh, Degree::P2);
        let quad = QuadratureRule::default_rule();
        let m = assemble_vector_mass(&space, &CoefficientField::Identity, &quad).unwrap();
        let ones = vec![1.0; space.num_dofs()];
        let total = dot_vec(&ones, &m.apply(&ones));
        let vol = mesh.total_volume();
        assert!((total - 3.0 * vol).abs() < 1e-12 * vol, "{total} vs 3*{vol}");

        // A = 4 id scales the A^{-1} form by 1/4
        let m4 = assemble_vector_mass(
            &space,
            &CoefficientField::Uniform(crate::fields::SymMat3::scaled_identity(4.0)),
            &quad,
        )
        .unwrap();
        let total4 = dot_vec(&ones, &m4.apply(&ones));
        assert!((total4 - total / 4.0).abs() < 1e-12 * total);
        assert!(m.asymmetry() == 0.0);
    }

    #[test]
    fn scalar_vector_usage_errors() {
        let mesh = reference_tet_mesh();
        let scalar = FeSpace::scalar(&mesh, Degree::P1);
        let vector = FeSpace::vector(&mesh, Degree::P1);
        let quad = QuadratureRule::default_rule();
        assert!(matches!(
            assemble_stiffness(&vector, &CoefficientField::Identity, &quad),
            Err(AssembleError::ExpectsScalar)
        ));
        assert!(matches!(
            assemble_weighted_div(&scalar, &quad),
            Err(AssembleError::ExpectsVector)
        ));
    }
}
