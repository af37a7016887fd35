//! Tetrahedral meshes of the truncated computational domain.
//!
//! A [`TetMesh`] stores vertices, positively oriented tetrahedra and tagged
//! boundary faces. The generators in this module produce one octant of the
//! truncated domain: the shell between the unit sphere and the artificial
//! sphere of radius `R` ([`generate_ball_octant_shell`]), or the region
//! between the unit cube and that sphere ([`generate_cube_complement_octant`]).

mod generate;
mod io;

pub use generate::{generate_ball_octant_shell, generate_cube_complement_octant};
pub use io::{read_mesh, read_mesh_from_str, write_mesh, write_mesh_to_string, MeshIoError};

use std::collections::BTreeMap;

use crate::Real;

/// Tag carried by every boundary face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    /// Inner boundary (unit sphere or unit cube surface).
    Gamma,
    /// Artificial outer sphere of radius `R`.
    Sphere,
    /// Symmetry plane `x = 0`.
    SymX,
    /// Symmetry plane `y = 0`.
    SymY,
    /// Symmetry plane `z = 0`.
    SymZ,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 5] = [
        BoundaryTag::Gamma,
        BoundaryTag::Sphere,
        BoundaryTag::SymX,
        BoundaryTag::SymY,
        BoundaryTag::SymZ,
    ];

    /// Keyword used in the TETMESH text format.
    pub fn keyword(self) -> &'static str {
        match self {
            BoundaryTag::Gamma => "gamma",
            BoundaryTag::Sphere => "sphere",
            BoundaryTag::SymX => "symx",
            BoundaryTag::SymY => "symy",
            BoundaryTag::SymZ => "symz",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.keyword() == s)
    }
}

/// Parameters were outside the generator's admissible range.
#[derive(Debug, thiserror::Error)]
#[error("invalid mesh parameters: {0}")]
pub struct ParameterError(pub String);

/// Tetrahedral mesh with tagged boundary faces. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct TetMesh<S> {
    /// Vertex coordinates.
    pub vertices: Vec<[S; 3]>,
    /// Four vertex indices per tetrahedron, positively oriented.
    pub tets: Vec<[u32; 4]>,
    /// Region tag per tetrahedron.
    pub regions: Vec<u32>,
    /// Boundary faces as vertex triples with their tag.
    pub boundary_faces: Vec<([u32; 3], BoundaryTag)>,
}

/// A violated mesh invariant, reported by [`TetMesh::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeshDefect {
    /// Tet references a vertex index out of range.
    InvalidVertexIndex { tet: usize },
    /// Boundary face references a vertex index out of range.
    InvalidFaceIndex { face: usize },
    /// Signed volume of the tet is not positive.
    NegativeVolume { tet: usize },
    /// A face is shared by more than two tets.
    OvershardFace { face: [u32; 3] },
    /// A listed boundary face is not a boundary face of the tet complex.
    NotOnBoundary { face: usize },
    /// A topological boundary face carries no tag.
    UncoveredBoundaryFace { face: [u32; 3] },
    /// A boundary face is listed (tagged) more than once.
    MultiplyTagged { face: [u32; 3] },
}

impl std::fmt::Display for MeshDefect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshDefect::InvalidVertexIndex { tet } => write!(f, "invalid vertex index, tet {tet}"),
            MeshDefect::InvalidFaceIndex { face } => write!(f, "invalid vertex index, bface {face}"),
            MeshDefect::NegativeVolume { tet } => write!(f, "negative volume, tet {tet}"),
            MeshDefect::OvershardFace { face } => write!(f, "face {face:?} shared by more than two tets"),
            MeshDefect::NotOnBoundary { face } => write!(f, "bface {face} is not on the boundary"),
            MeshDefect::UncoveredBoundaryFace { face } => write!(f, "uncovered boundary face {face:?}"),
            MeshDefect::MultiplyTagged { face } => write!(f, "boundary face {face:?} tagged more than once"),
        }
    }
}

fn sorted3(f: [u32; 3]) -> [u32; 3] {
    let mut f = f;
    f.sort_unstable();
    f
}

impl<S: Real> TetMesh<S> {
    pub fn vertex(&self, i: u32) -> [S; 3] {
        self.vertices[i as usize]
    }

    /// Signed volume of tet `t` (positive for correct orientation).
    pub fn signed_volume(&self, t: usize) -> S {
        let [a, b, c, d] = self.tets[t];
        let p = |i: u32| self.vertices[i as usize];
        signed_volume(p(a), p(b), p(c), p(d))
    }

    /// Sum of all tet volumes.
    pub fn total_volume(&self) -> S {
        (0..self.tets.len()).fold(S::zero(), |acc, t| acc + self.signed_volume(t).abs())
    }

    /// The four faces of tet `t`, each opposite to the omitted vertex.
    pub fn tet_faces(t: [u32; 4]) -> [[u32; 3]; 4] {
        let [a, b, c, d] = t;
        [[b, c, d], [a, c, d], [a, b, d], [a, b, c]]
    }

    /// Checks every structural invariant and returns the list of defects.
    /// Generated meshes must validate cleanly; defects are data, not errors.
    pub fn validate(&self) -> Vec<MeshDefect> {
        let mut defects = Vec::new();
        let nv = self.vertices.len() as u32;

        for (t, tet) in self.tets.iter().enumerate() {
            if tet.iter().any(|&i| i >= nv) {
                defects.push(MeshDefect::InvalidVertexIndex { tet: t });
            }
        }
        for (k, (face, _)) in self.boundary_faces.iter().enumerate() {
            if face.iter().any(|&i| i >= nv) {
                defects.push(MeshDefect::InvalidFaceIndex { face: k });
            }
        }
        if !defects.is_empty() {
            return defects; // index defects make the geometric checks unsafe
        }

        for t in 0..self.tets.len() {
            if !(self.signed_volume(t) > S::zero()) {
                defects.push(MeshDefect::NegativeVolume { tet: t });
            }
        }

        // Count face incidences over the tet complex.
        let mut incidence: BTreeMap<[u32; 3], u32> = BTreeMap::new();
        for tet in &self.tets {
            for face in Self::tet_faces(*tet) {
                *incidence.entry(sorted3(face)).or_insert(0) += 1;
            }
        }
        for (&face, &count) in &incidence {
            if count > 2 {
                defects.push(MeshDefect::OvershardFace { face });
            }
        }

        let mut tagged: BTreeMap<[u32; 3], u32> = BTreeMap::new();
        for (k, (face, _)) in self.boundary_faces.iter().enumerate() {
            let key = sorted3(*face);
            let seen = tagged.entry(key).or_insert(0);
            *seen += 1;
            if *seen == 2 {
                defects.push(MeshDefect::MultiplyTagged { face: key });
            }
            if incidence.get(&key) != Some(&1) {
                defects.push(MeshDefect::NotOnBoundary { face: k });
            }
        }
        for (&face, &count) in &incidence {
            if count == 1 && !tagged.contains_key(&face) {
                defects.push(MeshDefect::UncoveredBoundaryFace { face });
            }
        }

        defects
    }

    /// Boundary faces carrying the given tag.
    pub fn faces_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = [u32; 3]> + '_ {
        self.boundary_faces
            .iter()
            .filter(move |(_, t)| *t == tag)
            .map(|(f, _)| *f)
    }

    /// Vertex indices lying on faces with the given tag.
    pub fn vertices_with_tag(&self, tag: BoundaryTag) -> Vec<u32> {
        let mut ids: Vec<u32> = self.faces_with_tag(tag).flatten().collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

pub(crate) fn sub<S: Real>(a: [S; 3], b: [S; 3]) -> [S; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross<S: Real>(a: [S; 3], b: [S; 3]) -> [S; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot<S: Real>(a: [S; 3], b: [S; 3]) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm<S: Real>(a: [S; 3]) -> S {
    dot(a, a).sqrt()
}

/// Signed volume of the tet `(a, b, c, d)`.
pub fn signed_volume<S: Real>(a: [S; 3], b: [S; 3], c: [S; 3], d: [S; 3]) -> S {
    dot(cross(sub(b, a), sub(c, a)), sub(d, a)) / S::of(6.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_tet() -> TetMesh<f64> {
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
    fn single_tet_validates() {
        assert!(single_tet().validate().is_empty());
    }

    #[test]
    fn inverted_tet_is_a_defect() {
        let mut m = single_tet();
        m.tets[0] = [1, 0, 2, 3];
        assert!(m
            .validate()
            .contains(&MeshDefect::NegativeVolume { tet: 0 }));
    }

    #[test]
    fn untagged_boundary_face_is_a_defect() {
        let mut m = single_tet();
        m.boundary_faces.pop();
        assert!(m
            .validate()
            .iter()
            .any(|d| matches!(d, MeshDefect::UncoveredBoundaryFace { .. })));
    }

    #[test]
    fn out_of_range_index_is_a_defect() {
        let mut m = single_tet();
        m.tets[0] = [0, 1, 2, 9];
        assert_eq!(m.validate(), vec![MeshDefect::InvalidVertexIndex { tet: 0 }]);
    }

    #[test]
    fn doubly_tagged_face_is_a_defect() {
        let mut m = single_tet();
        m.boundary_faces.push(([2, 1, 3], BoundaryTag::Sphere));
        assert!(m
            .validate()
            .iter()
            .any(|d| matches!(d, MeshDefect::MultiplyTagged { .. })));
    }
}
