//! Spin geometries and pairwise coupling coefficients.
//!
//! Spins sit on an integer grid (1D chain, 2D rectangular lattice, or any
//! `dims` with product ≤ 24). Coupling strengths are expressed in units of
//! the nearest-neighbor strength `a_12 = 1`, which also fixes the time unit
//! `1/a_12` used throughout the crate. Spin index 0 is the designated
//! contact spin and always sits at the lattice corner.

use crate::error::{Error, Result};

/// Largest spin count for which exact simulation is supported.
pub const MAX_SPINS: usize = 24;

/// How pairwise couplings are populated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    /// All-to-all couplings with `a_ij = 1 / r_ij^3`.
    FullDipolar,
    /// Couplings only between grid-adjacent spins, all equal to 1.
    NearestNeighbor,
}

impl CouplingMode {
    /// Parse the config-file spellings `dipolar` / `nn`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dipolar" => Ok(CouplingMode::FullDipolar),
            "nn" => Ok(CouplingMode::NearestNeighbor),
            other => Err(Error::InvalidArgument(format!(
                "unknown coupling mode `{other}` (expected `dipolar` or `nn`)"
            ))),
        }
    }
}

/// A rectangular grid of spins.
#[derive(Debug, Clone)]
pub struct Lattice {
    dims: Vec<usize>,
    spacing: f64,
    mode: CouplingMode,
    positions: Vec<[f64; 3]>,
}

/// Pairwise coupling strengths `a_ij`, stored once per unordered pair with
/// `i < j`. The same table provides the `d_ij` of the dipolar Hamiltonian.
#[derive(Debug, Clone)]
pub struct CouplingTable {
    entries: Vec<(usize, usize, f64)>,
}

impl Lattice {
    /// Lay spins on an integer grid with unit spacing.
    pub fn new(dims: &[usize], mode: CouplingMode) -> Result<Self> {
        Self::with_spacing(dims, 1.0, mode)
    }

    pub fn with_spacing(dims: &[usize], spacing: f64, mode: CouplingMode) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidLattice("empty dims".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidLattice("zero-length dimension".into()));
        }
        if dims.len() > 3 {
            return Err(Error::InvalidLattice(format!(
                "{}-dimensional grid not supported",
                dims.len()
            )));
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidLattice("spacing must be positive".into()));
        }
        let n: usize = dims.iter().product();
        if n > MAX_SPINS {
            return Err(Error::TooLarge {
                n_spins: n,
                limit: MAX_SPINS,
            });
        }
        // Row-major enumeration; index 0 is the corner (0, 0, 0).
        let mut positions = Vec::with_capacity(n);
        for idx in 0..n {
            let mut rem = idx;
            let mut pos = [0.0f64; 3];
            for (axis, &d) in dims.iter().enumerate().rev() {
                pos[axis] = (rem % d) as f64 * spacing;
                rem /= d;
            }
            positions.push(pos);
        }
        Ok(Lattice {
            dims: dims.to_vec(),
            spacing,
            mode,
            positions,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn coupling_mode(&self) -> CouplingMode {
        self.mode
    }

    pub fn n_spins(&self) -> usize {
        self.positions.len()
    }

    /// Index of the spin in local contact with the target qubit.
    pub fn contact_spin(&self) -> usize {
        0
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        self.positions[i]
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        let a = self.positions[i];
        let b = self.positions[j];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// Whether two spins are adjacent on the grid (one unit step along one axis).
    fn grid_adjacent(&self, i: usize, j: usize) -> bool {
        let d = self.distance(i, j) / self.spacing;
        (d - 1.0).abs() < 1e-9
    }

    /// Populate the coupling table for this geometry.
    pub fn coupling_table(&self) -> CouplingTable {
        let n = self.n_spins();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                match self.mode {
                    CouplingMode::FullDipolar => {
                        let r = self.distance(i, j) / self.spacing;
                        entries.push((i, j, r.powi(3).recip()));
                    }
                    CouplingMode::NearestNeighbor => {
                        if self.grid_adjacent(i, j) {
                            entries.push((i, j, 1.0));
                        }
                    }
                }
            }
        }
        CouplingTable { entries }
    }
}

impl CouplingTable {
    /// All stored pairs `(i, j, a_ij)` with `i < j`.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Coupling between spins `i` and `j`, or `None` when the pair is absent.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let key = (i.min(j), i.max(j));
        self.entries
            .iter()
            .find(|&&(a, b, _)| (a, b) == key)
            .map(|&(_, _, v)| v)
    }
}

/// Build a lattice and its coupling table in one call.
pub fn build_lattice(dims: &[usize], mode: CouplingMode) -> Result<(Lattice, CouplingTable)> {
    let lat = Lattice::new(dims, mode)?;
    let table = lat.coupling_table();
    Ok((lat, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_of_two_has_unit_coupling() {
        let (_, table) = build_lattice(&[2], CouplingMode::FullDipolar).unwrap();
        assert_eq!(table.len(), 1);
        assert!((table.get(0, 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chain_of_three_next_nearest_is_one_eighth() {
        let (_, table) = build_lattice(&[3], CouplingMode::FullDipolar).unwrap();
        assert!((table.get(0, 2).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn square_diagonal_coupling() {
        // Unit square: diagonal distance sqrt(2), coupling 1/sqrt(2)^3.
        let (lat, table) = build_lattice(&[2, 2], CouplingMode::FullDipolar).unwrap();
        let expected = 1.0 / 2.0_f64.sqrt().powi(3);
        assert!((expected - 0.35355339059327373).abs() < 1e-15);
        // Spins 0 and 3 are opposite corners in row-major order.
        assert!((lat.distance(0, 3) - 2.0_f64.sqrt()).abs() < 1e-12);
        assert!((table.get(0, 3).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn coupling_counts_for_chain() {
        let l = 7;
        let (_, dip) = build_lattice(&[l], CouplingMode::FullDipolar).unwrap();
        let (_, nn) = build_lattice(&[l], CouplingMode::NearestNeighbor).unwrap();
        assert_eq!(dip.len(), l * (l - 1) / 2);
        assert_eq!(nn.len(), l - 1);
    }

    #[test]
    fn couplings_translation_invariant() {
        // a_ij depends only on geometry, so equal-offset pairs match.
        let (_, table) = build_lattice(&[4, 5], CouplingMode::FullDipolar).unwrap();
        // (row 0, col 0)-(row 0, col 1) vs (row 3, col 3)-(row 3, col 4)
        let a = table.get(0, 1).unwrap();
        let b = table.get(18, 19).unwrap();
        assert!((a - b).abs() < 1e-15);
        // diagonal pairs across the grid
        let c = table.get(0, 6).unwrap();
        let d = table.get(7, 13).unwrap();
        assert!((c - d).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(build_lattice(&[], CouplingMode::FullDipolar).is_err());
        assert!(build_lattice(&[0], CouplingMode::FullDipolar).is_err());
        assert!(build_lattice(&[5, 5], CouplingMode::FullDipolar).is_err());
        assert!(build_lattice(&[25], CouplingMode::FullDipolar).is_err());
    }

    #[test]
    fn contact_spin_is_corner() {
        let lat = Lattice::new(&[4, 5], CouplingMode::FullDipolar).unwrap();
        assert_eq!(lat.contact_spin(), 0);
        assert_eq!(lat.position(0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn nn_mode_on_grid() {
        let (_, table) = build_lattice(&[2, 3], CouplingMode::NearestNeighbor).unwrap();
        // 2x3 grid: 3 vertical + 4 horizontal bonds = 7
        assert_eq!(table.len(), 7);
        assert!(table.entries().iter().all(|&(_, _, a)| a == 1.0));
        assert_eq!(table.get(0, 4), None); // diagonal absent
    }
}
