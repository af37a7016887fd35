//! TETMESH v1: a line-oriented ASCII mesh format.
//!
//! ```text
//! TETMESH v1
//! vertices <n>
//! x y z            (n lines, full precision)
//! tets <m>
//! i0 i1 i2 i3 region
//! bfaces <k>
//! i0 i1 i2 tag     (tag: gamma | sphere | symx | symy | symz)
//! ```
//!
//! Indices are 0-based. Coordinates are written with enough digits to round
//! trip bit-exactly. The reader only checks syntax and index ranges; geometric
//! soundness is [`TetMesh::validate`]'s job.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryTag, TetMesh};
use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum MeshIoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_err<T>(line: usize, message: impl Into<String>) -> Result<T, MeshIoError> {
    Err(MeshIoError::Parse { line, message: message.into() })
}

pub fn write_mesh_to_string<S: Real>(mesh: &TetMesh<S>) -> String {
    let mut out = String::new();
    out.push_str("TETMESH v1\n");
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {} {}", v[0], v[1], v[2]);
    }
    let _ = writeln!(out, "tets {}", mesh.tets.len());
    for (t, r) in mesh.tets.iter().zip(&mesh.regions) {
        let _ = writeln!(out, "{} {} {} {} {}", t[0], t[1], t[2], t[3], r);
    }
    let _ = writeln!(out, "bfaces {}", mesh.boundary_faces.len());
    for (f, tag) in &mesh.boundary_faces {
        let _ = writeln!(out, "{} {} {} {}", f[0], f[1], f[2], tag.keyword());
    }
    out
}

pub fn write_mesh<S: Real>(mesh: &TetMesh<S>, path: impl AsRef<Path>) -> Result<(), MeshIoError> {
    Ok(std::fs::write(path, write_mesh_to_string(mesh))?)
}

pub fn read_mesh<S: Real>(path: impl AsRef<Path>) -> Result<TetMesh<S>, MeshIoError> {
    read_mesh_from_str(&std::fs::read_to_string(path)?)
}

pub fn read_mesh_from_str<S: Real>(text: &str) -> Result<TetMesh<S>, MeshIoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, &str), MeshIoError> {
        lines.next().ok_or(MeshIoError::Parse {
            line: text.lines().count() + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    };

    let (line, header) = next("header")?;
    if header.trim() != "TETMESH v1" {
        return parse_err(line, format!("expected `TETMESH v1` header, got `{header}`"));
    }

    let count = |line: usize, text: &str, keyword: &str| -> Result<usize, MeshIoError> {
        let mut parts = text.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(n), None) if k == keyword => n
                .parse()
                .or_else(|_| parse_err(line, format!("invalid {keyword} count `{n}`"))),
            _ => parse_err(line, format!("expected `{keyword} <count>`, got `{text}`")),
        }
    };

    let (line, l) = next("vertex count")?;
    let n_vertices = count(line, l, "vertices")?;
    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (line, l) = next("vertex coordinates")?;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 3 {
            return parse_err(line, format!("expected 3 coordinates, got {}", fields.len()));
        }
        let mut v = [S::zero(); 3];
        for (k, f) in fields.iter().enumerate() {
            v[k] = f
                .parse()
                .or_else(|_| parse_err(line, format!("invalid coordinate `{f}`")))?;
        }
        vertices.push(v);
    }

    let (line, l) = next("tet count")?;
    let n_tets = count(line, l, "tets")?;
    let mut tets = Vec::with_capacity(n_tets);
    let mut regions = Vec::with_capacity(n_tets);
    for _ in 0..n_tets {
        let (line, l) = next("tet indices")?;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 5 {
            return parse_err(line, format!("expected `i0 i1 i2 i3 region`, got `{l}`"));
        }
        let mut idx = [0u32; 4];
        for (k, f) in fields[..4].iter().enumerate() {
            idx[k] = f
                .parse()
                .or_else(|_| parse_err(line, format!("invalid vertex index `{f}`")))?;
            if idx[k] as usize >= n_vertices {
                return parse_err(line, format!("vertex index {} out of range", idx[k]));
            }
        }
        let region = fields[4]
            .parse()
            .or_else(|_| parse_err(line, format!("invalid region tag `{}`", fields[4])))?;
        tets.push(idx);
        regions.push(region);
    }

    let (line, l) = next("bface count")?;
    let n_faces = count(line, l, "bfaces")?;
    let mut boundary_faces = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let (line, l) = next("boundary face")?;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 4 {
            return parse_err(line, format!("expected `i0 i1 i2 tag`, got `{l}`"));
        }
        let mut idx = [0u32; 3];
        for (k, f) in fields[..3].iter().enumerate() {
            idx[k] = f
                .parse()
                .or_else(|_| parse_err(line, format!("invalid vertex index `{f}`")))?;
            if idx[k] as usize >= n_vertices {
                return parse_err(line, format!("vertex index {} out of range", idx[k]));
            }
        }
        let tag = BoundaryTag::from_keyword(fields[3])
            .ok_or(MeshIoError::Parse { line, message: format!("unknown tag `{}`", fields[3]) })?;
        boundary_faces.push((idx, tag));
    }

    for (line, l) in lines {
        if !l.trim().is_empty() {
            return parse_err(line, format!("trailing content `{l}`"));
        }
    }

    Ok(TetMesh { vertices, tets, regions, boundary_faces })
}
