//! Shared test utilities: an exact polynomial integrator over the reference
//! tetrahedron (independent of the quadrature implementation under test) and
//! assorted numeric helpers.

use std::collections::BTreeMap;

/// Sparse trivariate polynomial with exact integration over the reference tet
/// via the factorial formula `int x^a y^b z^c = a! b! c! / (a+b+c+3)!`.
#[derive(Clone, Debug, Default)]
pub struct Poly {
    terms: BTreeMap<(u32, u32, u32), f64>,
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        let mut p = Poly::default();
        if c != 0.0 {
            p.terms.insert((0, 0, 0), c);
        }
        p
    }

    /// The coordinate monomial `x`, `y` or `z`.
    pub fn var(axis: usize) -> Self {
        let mut key = (0u32, 0u32, 0u32);
        match axis {
            0 => key.0 = 1,
            1 => key.1 = 1,
            2 => key.2 = 1,
            _ => panic!("axis out of range"),
        }
        let mut p = Poly::default();
        p.terms.insert(key, 1.0);
        p
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (&k, &v) in &other.terms {
            *out.terms.entry(k).or_insert(0.0) += v;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= s;
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (&(a1, b1, c1), &v1) in &self.terms {
            for (&(a2, b2, c2), &v2) in &other.terms {
                *out.terms.entry((a1 + a2, b1 + b2, c1 + c2)).or_insert(0.0) += v1 * v2;
            }
        }
        out
    }

    pub fn derivative(&self, axis: usize) -> Poly {
        let mut out = Poly::default();
        for (&(a, b, c), &v) in &self.terms {
            let (e, key) = match axis {
                0 if a > 0 => (a, (a - 1, b, c)),
                1 if b > 0 => (b, (a, b - 1, c)),
                2 if c > 0 => (c, (a, b, c - 1)),
                _ => continue,
            };
            *out.terms.entry(key).or_insert(0.0) += v * e as f64;
        }
        out
    }

    /// Exact integral over the reference tetrahedron.
    pub fn integral_ref_tet(&self) -> f64 {
        let fact = |m: u32| (1..=m).map(|i| i as f64).product::<f64>().max(1.0);
        self.terms
            .iter()
            .map(|(&(a, b, c), &v)| v * fact(a) * fact(b) * fact(c) / fact(a + b + c + 3))
            .sum()
    }
}

/// Barycentric coordinates on the reference tet as polynomials in `(x, y, z)`.
pub fn barycentric_polys() -> [Poly; 4] {
    let x = Poly::var(0);
    let y = Poly::var(1);
    let z = Poly::var(2);
    let l0 = Poly::constant(1.0).add(&x.scale(-1.0)).add(&y.scale(-1.0)).add(&z.scale(-1.0));
    [l0, x, y, z]
}

/// The ten P2 shape functions on the reference tet, in the library's local
/// node order (four vertices, then the six edges (0,1),(0,2),(0,3),(1,2),(1,3),(2,3)).
pub fn p2_shape_polys() -> Vec<Poly> {
    let l = barycentric_polys();
    let mut shapes = Vec::with_capacity(10);
    for li in &l {
        // l (2l - 1)
        shapes.push(li.mul(&li.scale(2.0).add(&Poly::constant(-1.0))));
    }
    for (a, b) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        shapes.push(l[a].mul(&l[b]).scale(4.0));
    }
    shapes
}

/// Spearman rank correlation of two samples.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        va += (x - mean) * (x - mean);
        vb += (y - mean) * (y - mean);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Composite Simpson quadrature on `[a, b]`.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}
