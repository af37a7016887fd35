//! Nodal tetrahedral finite elements of degree 1 and 2, scalar or 3-vector,
//! with quadrature, sparse assembly, Dirichlet elimination and a Jacobi
//! preconditioned conjugate gradient solver.

pub mod assemble;
pub mod constraints;
pub mod quadrature;
pub mod sparse;

pub use assemble::{
    assemble_flux_system, assemble_gradient_rhs, assemble_source_rhs, assemble_stiffness,
    assemble_vector_mass, assemble_vector_value_rhs, assemble_weighted_div,
    assemble_weighted_div_rhs, AssembleError,
};
pub use constraints::{apply_constraints, ConstraintError, ConstraintSet, ReducedSystem};
pub use quadrature::QuadratureRule;
pub use sparse::{solve_cg, CgOptions, CgStats, CsrMatrix, SolveError};

use crate::fields::{ScalarField, VectorField};
use crate::mesh::{cross, dot, sub, BoundaryTag, TetMesh};
use crate::Real;

/// Polynomial degree of a nodal space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Degree {
    P1,
    P2,
}

/// Local edge enumeration of a tet, matching the P2 dof order.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Largest number of scalar nodes per tet (P2).
pub const MAX_LOCAL_NODES: usize = 10;

/// Nodal finite element space on a [`TetMesh`].
///
/// Scalar nodes are the mesh vertices (P1) plus the edge midpoints (P2);
/// a `components == 3` space replicates every scalar node per Cartesian
/// component, interleaved as `dof = node * components + component`.
pub struct FeSpace<'m, S> {
    pub mesh: &'m TetMesh<S>,
    pub degree: Degree,
    pub components: usize,
    /// Unique mesh edges, sorted lexicographically (empty for P1).
    pub edges: Vec<[u32; 2]>,
    /// Scalar node coordinates: vertices, then edge midpoints.
    pub node_coords: Vec<[S; 3]>,
    tet_edge_nodes: Vec<[u32; 6]>,
}

impl<'m, S: Real> FeSpace<'m, S> {
    pub fn scalar(mesh: &'m TetMesh<S>, degree: Degree) -> Self {
        Self::new(mesh, degree, 1)
    }

    pub fn vector(mesh: &'m TetMesh<S>, degree: Degree) -> Self {
        Self::new(mesh, degree, 3)
    }

    fn new(mesh: &'m TetMesh<S>, degree: Degree, components: usize) -> Self {
        assert!(components == 1 || components == 3);
        let mut node_coords = mesh.vertices.clone();
        let (edges, tet_edge_nodes) = match degree {
            Degree::P1 => (Vec::new(), Vec::new()),
            Degree::P2 => {
                let mut edges: Vec<[u32; 2]> = Vec::with_capacity(mesh.tets.len() * 6);
                for tet in &mesh.tets {
                    for (a, b) in LOCAL_EDGES {
                        let (i, j) = (tet[a], tet[b]);
                        edges.push([i.min(j), i.max(j)]);
                    }
                }
                edges.sort_unstable();
                edges.dedup();
                let nv = mesh.vertices.len() as u32;
                let mut tet_edge_nodes = Vec::with_capacity(mesh.tets.len());
                for tet in &mesh.tets {
                    let mut ids = [0u32; 6];
                    for (k, (a, b)) in LOCAL_EDGES.iter().enumerate() {
                        let (i, j) = (tet[*a], tet[*b]);
                        let key = [i.min(j), i.max(j)];
                        let e = edges.binary_search(&key).expect("tet edge present") as u32;
                        ids[k] = nv + e;
                    }
                    tet_edge_nodes.push(ids);
                }
                let half = S::of(0.5);
                for [i, j] in &edges {
                    let (p, q) = (mesh.vertices[*i as usize], mesh.vertices[*j as usize]);
                    node_coords.push([
                        half * (p[0] + q[0]),
                        half * (p[1] + q[1]),
                        half * (p[2] + q[2]),
                    ]);
                }
                (edges, tet_edge_nodes)
            }
        };
        FeSpace { mesh, degree, components, edges, node_coords, tet_edge_nodes }
    }

    pub fn num_scalar_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.components * self.num_scalar_nodes()
    }

    pub fn local_nodes(&self) -> usize {
        match self.degree {
            Degree::P1 => 4,
            Degree::P2 => 10,
        }
    }

    /// Global scalar node ids of tet `t` in local order (vertices, then edges).
    pub fn tet_nodes(&self, t: usize) -> ([u32; MAX_LOCAL_NODES], usize) {
        let mut out = [0u32; MAX_LOCAL_NODES];
        let tet = self.mesh.tets[t];
        out[..4].copy_from_slice(&tet);
        match self.degree {
            Degree::P1 => (out, 4),
            Degree::P2 => {
                out[4..10].copy_from_slice(&self.tet_edge_nodes[t]);
                (out, 10)
            }
        }
    }

    /// Shape function values at a barycentric point.
    pub fn basis_values(&self, bary: &[S; 4]) -> ([S; MAX_LOCAL_NODES], usize) {
        let mut out = [S::zero(); MAX_LOCAL_NODES];
        match self.degree {
            Degree::P1 => {
                out[..4].copy_from_slice(bary);
                (out, 4)
            }
            Degree::P2 => {
                let two = S::of(2.0);
                let four = S::of(4.0);
                for i in 0..4 {
                    out[i] = bary[i] * (two * bary[i] - S::one());
                }
                for (k, (a, b)) in LOCAL_EDGES.iter().enumerate() {
                    out[4 + k] = four * bary[*a] * bary[*b];
                }
                (out, 10)
            }
        }
    }

    /// Shape function gradients at a barycentric point, given the (constant)
    /// barycentric gradients of the tet.
    pub fn basis_gradients(
        &self,
        bary: &[S; 4],
        lambda_grads: &[[S; 3]; 4],
    ) -> ([[S; 3]; MAX_LOCAL_NODES], usize) {
        let mut out = [[S::zero(); 3]; MAX_LOCAL_NODES];
        match self.degree {
            Degree::P1 => {
                out[..4].copy_from_slice(lambda_grads);
                (out, 4)
            }
            Degree::P2 => {
                let four = S::of(4.0);
                for i in 0..4 {
                    let f = four * bary[i] - S::one();
                    for d in 0..3 {
                        out[i][d] = f * lambda_grads[i][d];
                    }
                }
                for (k, (a, b)) in LOCAL_EDGES.iter().enumerate() {
                    for d in 0..3 {
                        out[4 + k][d] =
                            four * (bary[*b] * lambda_grads[*a][d] + bary[*a] * lambda_grads[*b][d]);
                    }
                }
                (out, 10)
            }
        }
    }

    /// Scalar node ids lying on boundary faces with the given tag
    /// (vertices of those faces, plus their edge nodes for P2).
    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> Vec<u32> {
        let nv = self.mesh.vertices.len() as u32;
        let mut ids: Vec<u32> = Vec::new();
        for face in self.mesh.faces_with_tag(tag) {
            ids.extend_from_slice(&face);
            if self.degree == Degree::P2 {
                for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                    let (i, j) = (face[a], face[b]);
                    let key = [i.min(j), i.max(j)];
                    let e = self.edges.binary_search(&key).expect("face edge present") as u32;
                    ids.push(nv + e);
                }
            }
        }
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Nodal interpolation of a pointwise scalar function.
    pub fn interpolate_scalar(
        &self,
        f: impl Fn(&[S; 3]) -> S,
    ) -> Result<Vec<S>, InterpolateError> {
        assert_eq!(self.components, 1, "scalar interpolation on a vector space");
        let mut coeffs = Vec::with_capacity(self.num_dofs());
        for (node, p) in self.node_coords.iter().enumerate() {
            let v = f(p);
            if !v.is_finite() {
                return Err(InterpolateError { node });
            }
            coeffs.push(v);
        }
        Ok(coeffs)
    }

    /// Nodal interpolation of a pointwise vector function.
    pub fn interpolate_vector(
        &self,
        f: impl Fn(&[S; 3]) -> [S; 3],
    ) -> Result<Vec<S>, InterpolateError> {
        assert_eq!(self.components, 3, "vector interpolation on a scalar space");
        let mut coeffs = Vec::with_capacity(self.num_dofs());
        for (node, p) in self.node_coords.iter().enumerate() {
            let v = f(p);
            if v.iter().any(|c| !c.is_finite()) {
                return Err(InterpolateError { node });
            }
            coeffs.extend_from_slice(&v);
        }
        Ok(coeffs)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("non-finite value at dof node {node}")]
pub struct InterpolateError {
    pub node: usize,
}

/// Affine geometry of one tet: barycentric gradients and volume.
#[derive(Clone, Copy, Debug)]
pub struct TetGeometry<S> {
    pub vertices: [[S; 3]; 4],
    pub lambda_grads: [[S; 3]; 4],
    pub volume: S,
}

pub fn tet_geometry<S: Real>(mesh: &TetMesh<S>, t: usize) -> TetGeometry<S> {
    let [a, b, c, d] = mesh.tets[t];
    let p = |i: u32| mesh.vertices[i as usize];
    let (p0, p1, p2, p3) = (p(a), p(b), p(c), p(d));
    let e1 = sub(p1, p0);
    let e2 = sub(p2, p0);
    let e3 = sub(p3, p0);
    let det = dot(e1, cross(e2, e3));
    let scale = |v: [S; 3]| [v[0] / det, v[1] / det, v[2] / det];
    let g1 = scale(cross(e2, e3));
    let g2 = scale(cross(e3, e1));
    let g3 = scale(cross(e1, e2));
    let g0 = [-g1[0] - g2[0] - g3[0], -g1[1] - g2[1] - g3[1], -g1[2] - g2[2] - g3[2]];
    TetGeometry {
        vertices: [p0, p1, p2, p3],
        lambda_grads: [g0, g1, g2, g3],
        volume: det / S::of(6.0),
    }
}

impl<S: Real> TetGeometry<S> {
    pub fn point(&self, bary: &[S; 4]) -> [S; 3] {
        let mut x = [S::zero(); 3];
        for (l, v) in bary.iter().zip(&self.vertices) {
            for d in 0..3 {
                x[d] = x[d] + *l * v[d];
            }
        }
        x
    }
}

/// Scalar finite element function: a space plus its coefficient vector.
#[derive(Clone, Copy)]
pub struct FeScalar<'a, 'm, S> {
    pub space: &'a FeSpace<'m, S>,
    pub coeffs: &'a [S],
}

impl<S: Real> FeScalar<'_, '_, S> {
    pub fn value(&self, tet: usize, bary: &[S; 4]) -> S {
        let (nodes, n) = self.space.tet_nodes(tet);
        let (vals, _) = self.space.basis_values(bary);
        let mut out = S::zero();
        for k in 0..n {
            out += vals[k] * self.coeffs[nodes[k] as usize];
        }
        out
    }

    pub fn gradient(&self, tet: usize, bary: &[S; 4]) -> [S; 3] {
        let geom = tet_geometry(self.space.mesh, tet);
        let (nodes, n) = self.space.tet_nodes(tet);
        let (grads, _) = self.space.basis_gradients(bary, &geom.lambda_grads);
        let mut out = [S::zero(); 3];
        for k in 0..n {
            let c = self.coeffs[nodes[k] as usize];
            for d in 0..3 {
                out[d] += c * grads[k][d];
            }
        }
        out
    }

}

impl<'a, 'm, S: Real> FeScalar<'a, 'm, S> {
    pub fn grad(self) -> FeGradient<'a, 'm, S> {
        FeGradient(self)
    }
}

impl<S: Real> ScalarField<S> for FeScalar<'_, '_, S> {
    fn eval(&self, tet: usize, _x: &[S; 3], bary: &[S; 4]) -> S {
        self.value(tet, bary)
    }
}

/// Gradient of a scalar finite element function, as a vector field.
#[derive(Clone, Copy)]
pub struct FeGradient<'a, 'm, S>(pub FeScalar<'a, 'm, S>);

impl<S: Real> VectorField<S> for FeGradient<'_, '_, S> {
    fn eval(&self, tet: usize, _x: &[S; 3], bary: &[S; 4]) -> [S; 3] {
        self.0.gradient(tet, bary)
    }
}

/// 3-vector finite element function.
#[derive(Clone, Copy)]
pub struct FeVector<'a, 'm, S> {
    pub space: &'a FeSpace<'m, S>,
    pub coeffs: &'a [S],
}

impl<'a, 'm, S: Real> FeVector<'a, 'm, S> {
    pub fn value(&self, tet: usize, bary: &[S; 4]) -> [S; 3] {
        let (nodes, n) = self.space.tet_nodes(tet);
        let (vals, _) = self.space.basis_values(bary);
        let mut out = [S::zero(); 3];
        for k in 0..n {
            let base = nodes[k] as usize * 3;
            for c in 0..3 {
                out[c] += vals[k] * self.coeffs[base + c];
            }
        }
        out
    }

    pub fn divergence(&self, tet: usize, bary: &[S; 4]) -> S {
        let geom = tet_geometry(self.space.mesh, tet);
        let (nodes, n) = self.space.tet_nodes(tet);
        let (grads, _) = self.space.basis_gradients(bary, &geom.lambda_grads);
        let mut out = S::zero();
        for k in 0..n {
            let base = nodes[k] as usize * 3;
            for c in 0..3 {
                out += self.coeffs[base + c] * grads[k][c];
            }
        }
        out
    }

    pub fn divergence_field(self) -> FeDivergence<'a, 'm, S> {
        FeDivergence(self)
    }
}

impl<S: Real> VectorField<S> for FeVector<'_, '_, S> {
    fn eval(&self, tet: usize, _x: &[S; 3], bary: &[S; 4]) -> [S; 3] {
        self.value(tet, bary)
    }
}

/// Divergence of a vector finite element function, as a scalar field.
#[derive(Clone, Copy)]
pub struct FeDivergence<'a, 'm, S>(pub FeVector<'a, 'm, S>);

impl<S: Real> ScalarField<S> for FeDivergence<'_, '_, S> {
    fn eval(&self, tet: usize, _x: &[S; 3], bary: &[S; 4]) -> S {
        self.0.divergence(tet, bary)
    }
}

/// `int f` over the mesh.
pub fn integrate_scalar<S: Real>(
    mesh: &TetMesh<S>,
    quad: &QuadratureRule<S>,
    f: &impl ScalarField<S>,
) -> S {
    let mut total = S::zero();
    for t in 0..mesh.tets.len() {
        let geom = tet_geometry(mesh, t);
        let scale = S::of(6.0) * geom.volume.abs();
        for (bary, &w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.point(bary);
            total += w * scale * f.eval(t, &x, bary);
        }
    }
    total
}

/// `int (1 + r^2)^s f^2` over the mesh.
pub fn weighted_sq_norm<S: Real>(
    mesh: &TetMesh<S>,
    quad: &QuadratureRule<S>,
    s: i32,
    f: &impl ScalarField<S>,
) -> S {
    let mut total = S::zero();
    for t in 0..mesh.tets.len() {
        let geom = tet_geometry(mesh, t);
        let scale = S::of(6.0) * geom.volume.abs();
        for (bary, &w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.point(bary);
            let v = f.eval(t, &x, bary);
            let rho2 = S::one() + dot(x, x);
            total += w * scale * v * v * rho2.powi(s);
        }
    }
    total
}

/// `int A f . f` over the mesh.
pub fn a_norm_sq<S: Real>(
    mesh: &TetMesh<S>,
    quad: &QuadratureRule<S>,
    coeff: &crate::fields::CoefficientField<S>,
    f: &impl VectorField<S>,
) -> S {
    let mut total = S::zero();
    for t in 0..mesh.tets.len() {
        let geom = tet_geometry(mesh, t);
        let scale = S::of(6.0) * geom.volume.abs();
        let a = coeff.at(t);
        for (bary, &w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.point(bary);
            let v = f.eval(t, &x, bary);
            total += w * scale * dot(a.apply(v), v);
        }
    }
    total
}

/// `int f . g` over the mesh, for vector fields.
pub fn l2_dot<S: Real>(
    mesh: &TetMesh<S>,
    quad: &QuadratureRule<S>,
    f: &impl VectorField<S>,
    g: &impl VectorField<S>,
) -> S {
    let mut total = S::zero();
    for t in 0..mesh.tets.len() {
        let geom = tet_geometry(mesh, t);
        let scale = S::of(6.0) * geom.volume.abs();
        for (bary, &w) in quad.points.iter().zip(&quad.weights) {
            let x = geom.point(bary);
            total += w * scale * dot(f.eval(t, &x, bary), g.eval(t, &x, bary));
        }
    }
    total
}

/// `int (1 + r^2)^s f^2` restricted to a single tet.
pub fn weighted_sq_norm_on_tet<S: Real>(
    mesh: &TetMesh<S>,
    quad: &QuadratureRule<S>,
    t: usize,
    s: i32,
    f: &impl ScalarField<S>,
) -> S {
    let geom = tet_geometry(mesh, t);
    let scale = S::of(6.0) * geom.volume.abs();
    let mut total = S::zero();
    for (bary, &w) in quad.points.iter().zip(&quad.weights) {
        let x = geom.point(bary);
        let v = f.eval(t, &x, bary);
        let rho2 = S::one() + dot(x, x);
        total += w * scale * v * v * rho2.powi(s);
    }
    total
}

/// `int A f . f` restricted to a single tet.
pub fn a_norm_sq_on_tet<S: Real>(
    mesh: &TetMesh<S>,
    quad: &QuadratureRule<S>,
    coeff: &crate::fields::CoefficientField<S>,
    t: usize,
    f: &impl VectorField<S>,
) -> S {
    let geom = tet_geometry(mesh, t);
    let scale = S::of(6.0) * geom.volume.abs();
    let a = coeff.at(t);
    let mut total = S::zero();
    for (bary, &w) in quad.points.iter().zip(&quad.weights) {
        let x = geom.point(bary);
        let v = f.eval(t, &x, bary);
        total += w * scale * dot(a.apply(v), v);
    }
    total
}
