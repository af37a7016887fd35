//! Deterministic structured mesh generators.
//!
//! Both generators share the same construction: a triangulated inner surface
//! (octant of the unit sphere, or the three visible unit squares of the cube)
//! is projected radially onto the outer sphere in graded layers, and every
//! resulting prism is split into three tetrahedra with a diagonal rule that
//! keeps neighbouring prisms conforming.

use super::{cross, dot, norm, signed_volume, sorted3, sub, BoundaryTag, ParameterError, TetMesh};
use crate::Real;

use std::collections::BTreeMap;

/// Relative tolerance used to classify generated boundary faces.
const CLASSIFY_TOL: f64 = 1e-13;

struct BaseSurface<S> {
    /// Points on the inner boundary.
    points: Vec<[S; 3]>,
    /// Outward oriented triangles (normal pointing away from the origin).
    triangles: Vec<[u32; 3]>,
    /// Region tag inherited by the tets extruded from each triangle.
    triangle_regions: Vec<u32>,
}

enum InnerBoundary {
    UnitSphere,
    UnitCube,
}

/// Octant of the spherical shell `1 < |x| < R`, `x_i > 0`.
///
/// `n_radial` graded layers times an `n_angular`-fold geodesic subdivision of
/// the octant triangle; the tet count is `3 * n_radial * n_angular^2`. Inner
/// spherical faces are tagged `Gamma`, outer ones `Sphere`, coordinate-plane
/// faces `SymX`/`SymY`/`SymZ`.
pub fn generate_ball_octant_shell<S: Real>(
    radius: S,
    n_radial: usize,
    n_angular: usize,
) -> Result<TetMesh<S>, ParameterError> {
    if !(radius > S::one()) {
        return Err(ParameterError(format!("radius must exceed 1, got {radius}")));
    }
    if n_radial == 0 || n_angular == 0 {
        return Err(ParameterError("subdivision counts must be positive".into()));
    }
    let base = sphere_octant_surface(n_angular);
    // First layer thickness matched to the arc length of one angular facet.
    let t1 = S::of(0.5) * S::PI() / S::of(n_angular as f64);
    Ok(extrude_shell(&base, radius, n_radial, t1, InnerBoundary::UnitSphere))
}

/// Octant of the region between the unit cube and the sphere of radius `R`:
/// `{x in the first octant : x not in [0,1]^3, |x| < R}`, requiring `R > sqrt(3)`.
///
/// The three visible unit squares of the cube are subdivided `n_angular` times
/// per side and projected radially outward; the tet count is
/// `18 * n_radial * n_angular^2`. Cube-surface faces are tagged `Gamma`.
pub fn generate_cube_complement_octant<S: Real>(
    radius: S,
    n_radial: usize,
    n_angular: usize,
) -> Result<TetMesh<S>, ParameterError> {
    if !(radius > S::of(3.0).sqrt()) {
        return Err(ParameterError(format!(
            "radius must exceed sqrt(3) so the sphere encloses the cube, got {radius}"
        )));
    }
    if n_radial == 0 || n_angular == 0 {
        return Err(ParameterError("subdivision counts must be positive".into()));
    }
    let base = cube_octant_surface(n_angular);
    let t1 = S::one() / S::of(n_angular as f64);
    Ok(extrude_shell(&base, radius, n_radial, t1, InnerBoundary::UnitCube))
}

/// Geodesic subdivision of the first-octant spherical triangle: lattice points
/// `(i, j, m-i-j) / |...|` for `i + j <= m`.
fn sphere_octant_surface<S: Real>(m: usize) -> BaseSurface<S> {
    let index = |i: usize, j: usize| -> u32 {
        // rows of decreasing length m+1, m, ...
        (i * (m + 1) - i * i.saturating_sub(1) / 2 + j) as u32
    };
    let mut points = Vec::with_capacity((m + 1) * (m + 2) / 2);
    for i in 0..=m {
        for j in 0..=(m - i) {
            let k = m - i - j;
            let v = [S::of(i as f64), S::of(j as f64), S::of(k as f64)];
            let len = norm(v);
            points.push([v[0] / len, v[1] / len, v[2] / len]);
        }
    }
    let mut triangles = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..(m - i) {
            triangles.push([index(i, j), index(i + 1, j), index(i, j + 1)]);
            if i + j + 2 <= m {
                triangles.push([index(i + 1, j), index(i + 1, j + 1), index(i, j + 1)]);
            }
        }
    }
    let triangle_regions = vec![0; triangles.len()];
    BaseSurface { points, triangles, triangle_regions }
}

/// The three unit squares `{x_a = 1}` of the cube surface visible from the
/// domain, each split into an `m x m` grid of triangle pairs. Vertices on the
/// shared square edges are deduplicated through exact integer lattice keys.
fn cube_octant_surface<S: Real>(m: usize) -> BaseSurface<S> {
    let mut key_to_id: BTreeMap<[usize; 3], u32> = BTreeMap::new();
    let mut points: Vec<[S; 3]> = Vec::new();
    let mut triangles = Vec::new();
    let mut triangle_regions = Vec::new();

    let ms = S::of(m as f64);
    for axis in 0..3usize {
        // integer lattice coordinates of the grid point (u, v) on this square
        let embed = |u: usize, v: usize| -> [usize; 3] {
            let mut p = [0; 3];
            p[axis] = m;
            p[(axis + 1) % 3] = u;
            p[(axis + 2) % 3] = v;
            p
        };
        let mut id = |key: [usize; 3], points: &mut Vec<[S; 3]>| -> u32 {
            *key_to_id.entry(key).or_insert_with(|| {
                points.push([
                    S::of(key[0] as f64) / ms,
                    S::of(key[1] as f64) / ms,
                    S::of(key[2] as f64) / ms,
                ]);
                (points.len() - 1) as u32
            })
        };
        let mut outward = [S::zero(); 3];
        outward[axis] = S::one();
        for u in 0..m {
            for v in 0..m {
                let q = [
                    id(embed(u, v), &mut points),
                    id(embed(u + 1, v), &mut points),
                    id(embed(u + 1, v + 1), &mut points),
                    id(embed(u, v + 1), &mut points),
                ];
                for tri in [[q[0], q[1], q[2]], [q[0], q[2], q[3]]] {
                    triangles.push(orient_outward(&points, tri, outward));
                    triangle_regions.push(axis as u32);
                }
            }
        }
    }
    BaseSurface { points, triangles, triangle_regions }
}

fn orient_outward<S: Real>(points: &[[S; 3]], tri: [u32; 3], outward: [S; 3]) -> [u32; 3] {
    let p = |i: u32| points[i as usize];
    let n = cross(sub(p(tri[1]), p(tri[0])), sub(p(tri[2]), p(tri[0])));
    if dot(n, outward) < S::zero() {
        [tri[0], tri[2], tri[1]]
    } else {
        tri
    }
}

/// Normalized cumulative radial knots `0 = tau_0 < ... < tau_n = 1` with
/// geometrically progressing layer thicknesses, the first one equal to `t1`
/// (the angular facet size at the inner boundary).
fn radial_knots<S: Real>(n: usize, t1: S, total: S) -> Vec<S> {
    assert!(n >= 1);
    if n == 1 {
        return vec![S::zero(), S::one()];
    }
    let nf = S::of(n as f64);
    let sum = |q: S| -> S {
        if (q - S::one()).abs() < S::of(1e-12) {
            nf * t1
        } else {
            t1 * (q.powi(n as i32) - S::one()) / (q - S::one())
        }
    };
    // sum(q) is increasing in q; bracket the root and bisect.
    let q = if t1 >= total {
        S::one() // degenerate: angular facets coarser than the whole shell
    } else {
        let mut lo = S::of(1e-9);
        let mut hi = S::of(2.0);
        while sum(hi) < total && hi < S::of(1e6) {
            hi = hi * S::of(2.0);
        }
        for _ in 0..200 {
            let mid = S::of(0.5) * (lo + hi);
            if sum(mid) < total {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        S::of(0.5) * (lo + hi)
    };
    let cn = sum(q);
    let mut knots = Vec::with_capacity(n + 1);
    knots.push(S::zero());
    for l in 1..n {
        let cl = if (q - S::one()).abs() < S::of(1e-12) {
            S::of(l as f64) * t1
        } else {
            t1 * (q.powi(l as i32) - S::one()) / (q - S::one())
        };
        knots.push(cl / cn);
    }
    knots.push(S::one());
    knots
}

fn extrude_shell<S: Real>(
    base: &BaseSurface<S>,
    radius: S,
    n_radial: usize,
    t1: S,
    inner: InnerBoundary,
) -> TetMesh<S> {
    let ns = base.points.len();
    let knots = radial_knots(n_radial, t1, radius - S::one());

    // Layer-major vertex numbering: vertex (layer l, surface s) = l*ns + s.
    let mut vertices = Vec::with_capacity((n_radial + 1) * ns);
    for (l, &tau) in knots.iter().enumerate() {
        for p in &base.points {
            if l == 0 {
                vertices.push(*p); // keep inner-boundary coordinates exact
            } else {
                let a = norm(*p);
                let r = if l == n_radial { radius } else { a + (radius - a) * tau };
                let s = r / a;
                vertices.push([p[0] * s, p[1] * s, p[2] * s]);
            }
        }
    }

    let mut tets = Vec::with_capacity(3 * n_radial * base.triangles.len());
    let mut regions = Vec::with_capacity(tets.capacity());
    for l in 0..n_radial {
        let bot = (l * ns) as u32;
        let top = ((l + 1) * ns) as u32;
        for (tri, &region) in base.triangles.iter().zip(&base.triangle_regions) {
            // Rotate so c0 is the smallest surface id: the quad diagonals then
            // all pass through the lowest-numbered (bottom) vertex of each quad,
            // which makes the splits of neighbouring prisms agree.
            let rot = (0..3)
                .min_by_key(|&k| tri[k])
                .expect("triangle has vertices");
            let c = [tri[rot], tri[(rot + 1) % 3], tri[(rot + 2) % 3]];
            let b = [bot + c[0], bot + c[1], bot + c[2]];
            let t = [top + c[0], top + c[1], top + c[2]];
            let split: [[u32; 4]; 3] = if c[1] < c[2] {
                [
                    [b[0], b[1], b[2], t[2]],
                    [b[0], b[1], t[2], t[1]],
                    [b[0], t[1], t[2], t[0]],
                ]
            } else {
                [
                    [b[0], b[2], b[1], t[1]],
                    [b[0], b[2], t[1], t[2]],
                    [b[0], t[2], t[1], t[0]],
                ]
            };
            for mut tet in split {
                let p = |i: u32| vertices[i as usize];
                if signed_volume(p(tet[0]), p(tet[1]), p(tet[2]), p(tet[3])) < S::zero() {
                    tet.swap(2, 3);
                }
                tets.push(tet);
                regions.push(region);
            }
        }
    }

    let boundary_faces = classify_boundary(&vertices, &tets, radius, inner);
    TetMesh { vertices, tets, regions, boundary_faces }
}

/// Collects the topological boundary (faces owned by exactly one tet) and
/// classifies each face geometrically.
fn classify_boundary<S: Real>(
    vertices: &[[S; 3]],
    tets: &[[u32; 4]],
    radius: S,
    inner: InnerBoundary,
) -> Vec<([u32; 3], BoundaryTag)> {
    let mut incidence: BTreeMap<[u32; 3], u32> = BTreeMap::new();
    for tet in tets {
        for face in TetMesh::<S>::tet_faces(*tet) {
            *incidence.entry(sorted3(face)).or_insert(0) += 1;
        }
    }

    let tol = S::of(CLASSIFY_TOL);
    let on_inner = |p: [S; 3]| -> bool {
        match inner {
            InnerBoundary::UnitSphere => (norm(p) - S::one()).abs() <= tol,
            // On the cube surface: some coordinate is exactly 1, the others at most 1.
            InnerBoundary::UnitCube => {
                p.iter().all(|&c| c <= S::one() + tol)
                    && p.iter().any(|&c| (c - S::one()).abs() <= tol)
            }
        }
    };
    let shares_unit_axis = |ps: &[[S; 3]; 3]| -> bool {
        match inner {
            InnerBoundary::UnitSphere => true,
            InnerBoundary::UnitCube => {
                (0..3).any(|a| ps.iter().all(|p| (p[a] - S::one()).abs() <= tol))
            }
        }
    };

    let mut faces = Vec::new();
    for (&face, &count) in &incidence {
        if count != 1 {
            continue;
        }
        let ps = [
            vertices[face[0] as usize],
            vertices[face[1] as usize],
            vertices[face[2] as usize],
        ];
        let tag = if ps.iter().all(|&p| on_inner(p)) && shares_unit_axis(&ps) {
            BoundaryTag::Gamma
        } else if ps.iter().all(|&p| (norm(p) - radius).abs() <= tol * radius) {
            BoundaryTag::Sphere
        } else if ps.iter().all(|p| p[0].abs() <= tol) {
            BoundaryTag::SymX
        } else if ps.iter().all(|p| p[1].abs() <= tol) {
            BoundaryTag::SymY
        } else if ps.iter().all(|p| p[2].abs() <= tol) {
            BoundaryTag::SymZ
        } else {
            unreachable!("generator produced an unclassifiable boundary face {face:?}")
        };
        faces.push((face, tag));
    }
    faces
}
