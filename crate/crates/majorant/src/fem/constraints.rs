//! Dirichlet-type constraints and their symmetric elimination.

use std::collections::BTreeMap;

use super::sparse::CsrMatrix;
use crate::Real;

/// Map from dof index to a fixed value. Inserting the same dof twice is fine
/// as long as the values agree exactly; differing values are a conflict.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet<S> {
    map: BTreeMap<u32, S>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConstraintError<S: std::fmt::Display + std::fmt::Debug> {
    #[error("conflicting constraint at dof {dof}: {existing} vs {new}")]
    Conflict { dof: u32, existing: S, new: S },
    #[error("constraint dof {dof} out of range (system size {size})")]
    OutOfRange { dof: u32, size: usize },
}

impl<S: Real> ConstraintSet<S> {
    pub fn new() -> Self {
        ConstraintSet { map: BTreeMap::new() }
    }

    pub fn set(&mut self, dof: u32, value: S) -> Result<(), ConstraintError<S>> {
        if let Some(&existing) = self.map.get(&dof) {
            if existing != value {
                return Err(ConstraintError::Conflict { dof, existing, new: value });
            }
            return Ok(());
        }
        self.map.insert(dof, value);
        Ok(())
    }

    pub fn get(&self, dof: u32) -> Option<S> {
        self.map.get(&dof).copied()
    }

    pub fn contains(&self, dof: u32) -> bool {
        self.map.contains_key(&dof)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, S)> + '_ {
        self.map.iter().map(|(&d, &v)| (d, v))
    }

    /// Applies the fixed values onto a full-size vector.
    pub fn imprint(&self, x: &mut [S]) {
        for (&d, &v) in &self.map {
            x[d as usize] = v;
        }
    }
}

/// The result of eliminating constrained dofs from a symmetric system:
/// a system over the free dofs plus the data to reconstruct full vectors.
pub struct ReducedSystem<S> {
    pub matrix: CsrMatrix<S>,
    pub rhs: Vec<S>,
    free: Vec<u32>,
    template: Vec<S>,
}

impl<S: Real> ReducedSystem<S> {
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Full-size vector with constrained values in place and the reduced
    /// solution scattered onto the free dofs.
    pub fn reconstruct(&self, reduced: &[S]) -> Vec<S> {
        let mut out = self.template.clone();
        for (k, &i) in self.free.iter().enumerate() {
            out[i as usize] = reduced[k];
        }
        out
    }

    /// Picks the free entries out of a full-size vector (for warm starts).
    pub fn restrict(&self, full: &[S]) -> Vec<S> {
        self.free.iter().map(|&i| full[i as usize]).collect()
    }
}

/// Symmetric elimination: drops constrained rows/columns and lifts their
/// values into the right-hand side, preserving positive definiteness.
pub fn apply_constraints<S: Real>(
    matrix: &CsrMatrix<S>,
    rhs: &[S],
    constraints: &ConstraintSet<S>,
) -> Result<ReducedSystem<S>, ConstraintError<S>> {
    let n = matrix.n;
    assert_eq!(rhs.len(), n);
    for (dof, _) in constraints.iter() {
        if dof as usize >= n {
            return Err(ConstraintError::OutOfRange { dof, size: n });
        }
    }

    let mut template = vec![S::zero(); n];
    constraints.imprint(&mut template);

    // old index -> new index among free dofs, u32::MAX for constrained
    let mut renumber = vec![u32::MAX; n];
    let mut free = Vec::with_capacity(n - constraints.len());
    for i in 0..n as u32 {
        if !constraints.contains(i) {
            renumber[i as usize] = free.len() as u32;
            free.push(i);
        }
    }

    let mut row_ptr = Vec::with_capacity(free.len() + 1);
    row_ptr.push(0usize);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut reduced_rhs = Vec::with_capacity(free.len());
    for &i in &free {
        let mut b = rhs[i as usize];
        for k in matrix.row_ptr[i as usize]..matrix.row_ptr[i as usize + 1] {
            let j = matrix.cols[k];
            let v = matrix.vals[k];
            if let Some(c) = constraints.get(j) {
                b -= v * c;
            } else {
                cols.push(renumber[j as usize]);
                vals.push(v);
            }
        }
        row_ptr.push(cols.len());
        reduced_rhs.push(b);
    }

    Ok(ReducedSystem {
        matrix: CsrMatrix { n: free.len(), row_ptr, cols, vals },
        rhs: reduced_rhs,
        free,
        template,
    })
}
