//! Computational-basis state representations and density operators.
//!
//! Bit conventions, fixed once for the whole crate:
//! * spin `i` lives on bit `i`; the contact spin is bit 0;
//! * bit value 0 means spin up, bit value 1 means spin down;
//! * the collective magnetization of a bitmask `b` over `n` spins is
//!   `m_z(b) = (n - 2 popcount(b)) / 2`, ranging from `-n/2` to `n/2`
//!   in unit steps (spin-1/2 convention).

use num_complex::Complex64;
use std::io::Write;

use crate::error::{Error, Result};
use crate::lattice::MAX_SPINS;

/// Largest spin count for which a dense density operator may be built
/// (matrix dimension 2^11 = 2048).
pub const MAX_DENSE_DENSITY_SPINS: usize = 11;

/// Magnetization of a basis state: `(n - 2 popcount(b)) / 2`.
pub fn magnetization_of(bitmask: u64, n_spins: usize) -> f64 {
    (n_spins as f64 - 2.0 * bitmask.count_ones() as f64) / 2.0
}

/// A pure state over `n_spins` spin-1/2 particles in the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_spins: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The zero vector (not normalized; used as an accumulator).
    pub fn zero(n_spins: usize) -> Result<Self> {
        check_spins(n_spins)?;
        Ok(StateVector {
            n_spins,
            amps: vec![Complex64::new(0.0, 0.0); 1 << n_spins],
        })
    }

    /// The basis state `|b>`.
    pub fn basis(n_spins: usize, bitmask: u64) -> Result<Self> {
        check_spins(n_spins)?;
        if bitmask >= (1u64 << n_spins) {
            return Err(Error::InvalidArgument(format!(
                "bitmask {bitmask:#x} out of range for {n_spins} spins"
            )));
        }
        let mut s = Self::zero(n_spins)?;
        s.amps[bitmask as usize] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(n_spins: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_spins(n_spins)?;
        if amps.len() != 1 << n_spins {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_spins,
                found: amps.len(),
            });
        }
        Ok(StateVector { n_spins, amps })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scale(&mut self, c: Complex64) {
        for a in &mut self.amps {
            *a *= c;
        }
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.scale(Complex64::new(1.0 / n, 0.0));
        }
    }

    /// Apply the Pauli X gate to one spin (bit flip).
    pub fn flip_spin(&mut self, spin: usize) {
        assert!(spin < self.n_spins, "spin index out of range");
        let mask = 1usize << spin;
        for b in 0..self.amps.len() {
            if b & mask == 0 {
                self.amps.swap(b, b | mask);
            }
        }
    }

    /// Tensor product; `self` occupies the low bits, `right` the high bits.
    pub fn tensor(&self, right: &StateVector) -> Result<StateVector> {
        let n = self.n_spins + right.n_spins;
        check_spins(n)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (j, bj) in right.amps.iter().enumerate() {
            if bj.norm_sqr() == 0.0 {
                continue;
            }
            let base = j << self.n_spins;
            for (i, ai) in self.amps.iter().enumerate() {
                amps[base | i] = ai * bj;
            }
        }
        StateVector::from_amplitudes(n, amps)
    }

    /// Dump as CSV rows `(bitmask, re, im)` with a header naming `n_spins`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# n_spins={}", self.n_spins)?;
        writeln!(w, "bitmask,re,im")?;
        for (b, a) in self.amps.iter().enumerate() {
            writeln!(w, "{},{},{}", b, a.re, a.im)?;
        }
        Ok(())
    }
}

fn check_spins(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SPINS {
        return Err(Error::TooLarge {
            n_spins: n,
            limit: MAX_SPINS,
        });
    }
    Ok(())
}

/// The fully polarized state `|up>^n` (bitmask 0).
pub fn polarized_state(n_spins: usize) -> Result<StateVector> {
    StateVector::basis(n_spins, 0)
}

/// The symmetric Dicke state with `k` spins down: equal amplitude
/// `1/sqrt(C(n, k))` on every bitmask of popcount `k`. An eigenstate of
/// `J_z` with `m_z = (n - 2k) / 2`.
pub fn dicke_state(n_spins: usize, k: usize) -> Result<StateVector> {
    check_spins(n_spins)?;
    if k > n_spins {
        return Err(Error::InvalidArgument(format!(
            "dicke_state: k = {k} exceeds n = {n_spins}"
        )));
    }
    let mut s = StateVector::zero(n_spins)?;
    let amp = Complex64::new(binomial(n_spins, k).recip().sqrt(), 0.0);
    for b in popcount_masks(n_spins, k) {
        s.amps[b as usize] = amp;
    }
    Ok(s)
}

/// Iterate all `n`-bit masks of popcount `k` in ascending order
/// (Gosper's hack).
pub fn popcount_masks(n: usize, k: usize) -> impl Iterator<Item = u64> {
    let limit = 1u64 << n;
    let mut cur = if k == 0 { 0u64 } else { (1u64 << k) - 1 };
    let mut done = false;
    std::iter::from_fn(move || {
        if done || cur >= limit {
            return None;
        }
        let out = cur;
        if k == 0 {
            done = true;
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            cur = (((r ^ cur) >> 2) / c) | r;
        }
        Some(out)
    })
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// A qubit-controlled pure state of the MSS, stored as the two conditional
/// branches of `(|0>psi0 + |1>psi1)/sqrt(2)`. The control qubit is never
/// acted on by the internal Hamiltonians, so this is exact.
#[derive(Debug, Clone)]
pub struct BranchState {
    pub psi0: StateVector,
    pub psi1: StateVector,
}

impl BranchState {
    pub fn new(psi0: StateVector, psi1: StateVector) -> Result<Self> {
        if psi0.dim() != psi1.dim() {
            return Err(Error::DimensionMismatch {
                expected: psi0.dim(),
                found: psi1.dim(),
            });
        }
        Ok(BranchState { psi0, psi1 })
    }

    pub fn n_spins(&self) -> usize {
        self.psi0.n_spins()
    }

    /// The joint qubit ⊗ MSS pure state with the qubit on the top bit.
    pub fn joint_state(&self) -> Result<StateVector> {
        let n = self.n_spins() + 1;
        check_spins(n)?;
        let half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let dim = 1usize << self.n_spins();
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (b, a) in self.psi0.amplitudes().iter().enumerate() {
            amps[b] = a * half;
        }
        for (b, a) in self.psi1.amplitudes().iter().enumerate() {
            amps[dim | b] = a * half;
        }
        StateVector::from_amplitudes(n, amps)
    }
}

/// A diagonal MSS density operator `sum_b p_b |b><b|`, truncated to the
/// highest-probability terms.
#[derive(Debug, Clone)]
pub struct DiagonalMixture {
    n_spins: usize,
    terms: Vec<(u64, f64)>,
    kept_mass: f64,
}

impl DiagonalMixture {
    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Kept terms `(bitmask, probability)`; probabilities renormalized to 1.
    pub fn terms(&self) -> &[(u64, f64)] {
        &self.terms
    }

    /// Probability mass retained before renormalization.
    pub fn kept_mass(&self) -> f64 {
        self.kept_mass
    }

    pub fn discarded_mass(&self) -> f64 {
        1.0 - self.kept_mass
    }
}

/// Truncation target: terms are kept until this cumulative mass is reached.
pub const MIXTURE_MASS_TARGET: f64 = 1.0 - 1e-6;

/// The product state `((1 - eps/2)|up><up| + (eps/2)|down><down|)^n` as a
/// diagonal mixture. Whole popcount classes are added in decreasing
/// probability until the kept mass reaches [`MIXTURE_MASS_TARGET`], then
/// probabilities are renormalized; the retained mass is recorded.
pub fn mixed_polarized(n_spins: usize, eps: f64) -> Result<DiagonalMixture> {
    check_spins(n_spins)?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "polarization parameter eps = {eps} outside [0, 1]"
        )));
    }
    let p_down = eps / 2.0;
    let p_up = 1.0 - p_down;
    let mut terms = Vec::new();
    let mut kept = 0.0f64;
    for k in 0..=n_spins {
        let p = p_up.powi((n_spins - k) as i32) * p_down.powi(k as i32);
        if p <= 0.0 {
            break;
        }
        for b in popcount_masks(n_spins, k) {
            terms.push((b, p));
        }
        kept += p * binomial(n_spins, k);
        if kept >= MIXTURE_MASS_TARGET {
            break;
        }
    }
    let norm = terms.iter().map(|&(_, p)| p).sum::<f64>();
    for t in &mut terms {
        t.1 /= norm;
    }
    Ok(DiagonalMixture {
        n_spins,
        terms,
        kept_mass: kept.min(1.0),
    })
}

/// A dense Hermitian density operator. Restricted to small registers; larger
/// mixed-state computations must go through [`DiagonalMixture`] plus branch
/// decompositions.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    n_spins: usize,
    mat: Vec<Complex64>,
}

impl DensityOperator {
    pub fn zero(n_spins: usize) -> Result<Self> {
        if n_spins == 0 || n_spins > MAX_DENSE_DENSITY_SPINS {
            return Err(Error::TooLarge {
                n_spins,
                limit: MAX_DENSE_DENSITY_SPINS,
            });
        }
        let dim = 1usize << n_spins;
        Ok(DensityOperator {
            n_spins,
            mat: vec![Complex64::new(0.0, 0.0); dim * dim],
        })
    }

    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let mut rho = Self::zero(state.n_spins())?;
        rho.accumulate_pure(state, 1.0);
        Ok(rho)
    }

    /// Add `weight * |state><state|`, touching only the support of `state`.
    pub fn accumulate_pure(&mut self, state: &StateVector, weight: f64) {
        let dim = self.dim();
        assert_eq!(dim, state.dim(), "dimension mismatch");
        let a = state.amplitudes();
        let support: Vec<usize> = (0..dim).filter(|&b| a[b].norm_sqr() > 0.0).collect();
        for &r in &support {
            let row = &mut self.mat[r * dim..(r + 1) * dim];
            let ar = weight * a[r];
            for &c in &support {
                row[c] += ar * a[c].conj();
            }
        }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }

    pub fn element(&self, r: usize, c: usize) -> Complex64 {
        self.mat[r * self.dim() + c]
    }

    pub fn set_element(&mut self, r: usize, c: usize, v: Complex64) {
        let dim = self.dim();
        self.mat[r * dim + c] = v;
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.mat
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.element(i, i)).sum()
    }

    pub fn max_hermiticity_violation(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                let d = (self.element(r, c) - self.element(c, r).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Trace out every spin not in `keep`. Kept spins are re-indexed in the
    /// order given.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("empty keep set".into()));
        }
        subsystem_masks(keep, self.n_spins)?;
        let traced: Vec<usize> = (0..self.n_spins).filter(|i| !keep.contains(i)).collect();
        let out_dim = 1usize << keep.len();
        let mut out = DensityOperator {
            n_spins: keep.len(),
            mat: vec![Complex64::new(0.0, 0.0); out_dim * out_dim],
        };
        let scatter_keep = |idx: usize| -> usize {
            let mut b = 0usize;
            for (pos, &spin) in keep.iter().enumerate() {
                if idx >> pos & 1 == 1 {
                    b |= 1 << spin;
                }
            }
            b
        };
        let scatter_traced = |idx: usize| -> usize {
            let mut b = 0usize;
            for (pos, &spin) in traced.iter().enumerate() {
                if idx >> pos & 1 == 1 {
                    b |= 1 << spin;
                }
            }
            b
        };
        for kr in 0..out_dim {
            let br = scatter_keep(kr);
            for kc in 0..out_dim {
                let bc = scatter_keep(kc);
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..(1usize << traced.len()) {
                    let bt = scatter_traced(t);
                    acc += self.element(br | bt, bc | bt);
                }
                out.mat[kr * out_dim + kc] = acc;
            }
        }
        Ok(out)
    }

    /// Transpose the indices of the spins in `subsystem`. The result is
    /// Hermitian with unchanged trace.
    pub fn partial_transpose(&self, subsystem: &[usize]) -> Result<DensityOperator> {
        let masks = subsystem_masks(subsystem, self.n_spins)?;
        let mut mask = 0usize;
        for m in masks {
            mask |= m;
        }
        let dim = self.dim();
        let mut out = self.clone();
        for r in 0..dim {
            for c in 0..dim {
                let rr = (r & !mask) | (c & mask);
                let cc = (c & !mask) | (r & mask);
                out.mat[r * dim + c] = self.mat[rr * dim + cc];
            }
        }
        Ok(out)
    }

    /// Eigenvalues of the (Hermitian) matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        crate::linalg::hermitian_eigenvalues(&self.mat, self.dim())
    }
}

fn subsystem_masks(spins: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut masks = Vec::with_capacity(spins.len());
    for &s in spins {
        if s >= n {
            return Err(Error::InvalidArgument(format!(
                "spin index {s} out of range for {n} spins"
            )));
        }
        if seen[s] {
            return Err(Error::InvalidArgument(format!("duplicate spin index {s}")));
        }
        seen[s] = true;
        masks.push(1usize << s);
    }
    Ok(masks)
}
