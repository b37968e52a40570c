//! The three many-body Hamiltonians on a lattice, stored by their two-spin
//! term structure rather than as materialized matrices.
//!
//! Conventions: Pauli operators (eigenvalues ±1) inside Hamiltonians,
//! spin-1/2 convention (±1/2 per spin) for `J_z`. With the bit convention
//! (bit 1 = spin down), `sigma_+` clears a bit: `sigma_+|down> = |up>`.
//!
//! * `H_dip  = sum d_ij (2 sz_i sz_j - sx_i sx_j - sy_i sy_j)` — diagonal
//!   `+2 d_ij` terms plus flip-flop hops with amplitude `-2 d_ij`;
//! * `H_XY   = sum a_ij (s+_i s-_j + s-_i s+_j)` — flip-flop hops, conserves
//!   the collective magnetization;
//! * `H_2GR  = sum a_ij (s+_i s+_j + s-_i s-_j)` — double-flip hops, changes
//!   `m_z` by ±2 and conserves magnetization parity.
//!
//! All matrix elements are real; operators are Hermitian by construction.

use num_complex::Complex64;
use std::io::Write;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::spectra::Spectrum;
use crate::state::StateVector;

/// A two-spin exchange term: couples `|b>` to `|b ^ mask>` with real
/// amplitude `amp`. `needs_equal` selects double-flip terms (bits i, j must
/// agree) versus flip-flop terms (bits must differ).
#[derive(Debug, Clone, Copy)]
pub struct Hop {
    pub i: u8,
    pub j: u8,
    pub amp: f64,
    pub needs_equal: bool,
}

/// Diagonal `sigma_z^i sigma_z^j` contribution with prefactor `coeff`.
#[derive(Debug, Clone, Copy)]
pub struct ZzTerm {
    pub i: u8,
    pub j: u8,
    pub coeff: f64,
}

/// A sparse Hermitian many-body operator over the `2^n` computational basis.
#[derive(Debug, Clone)]
pub struct SpinOperator {
    n_spins: usize,
    zz: Vec<ZzTerm>,
    hops: Vec<Hop>,
}

/// Secular dipolar Hamiltonian, Pauli convention.
pub fn build_dipolar(lattice: &Lattice) -> SpinOperator {
    let table = lattice.coupling_table();
    let mut zz = Vec::new();
    let mut hops = Vec::new();
    for &(i, j, d) in table.entries() {
        zz.push(ZzTerm {
            i: i as u8,
            j: j as u8,
            coeff: 2.0 * d,
        });
        hops.push(Hop {
            i: i as u8,
            j: j as u8,
            amp: -2.0 * d,
            needs_equal: false,
        });
    }
    SpinOperator {
        n_spins: lattice.n_spins(),
        zz,
        hops,
    }
}

/// Zero-quantum flip-flop Hamiltonian.
pub fn build_xy(lattice: &Lattice) -> SpinOperator {
    let table = lattice.coupling_table();
    let hops = table
        .entries()
        .iter()
        .map(|&(i, j, a)| Hop {
            i: i as u8,
            j: j as u8,
            amp: a,
            needs_equal: false,
        })
        .collect();
    SpinOperator {
        n_spins: lattice.n_spins(),
        zz: Vec::new(),
        hops,
    }
}

/// Reversible grade-raising Hamiltonian. `-H_2GR` is its sign negation
/// (equivalently, evolve with `-t`); no separate builder exists.
pub fn build_grade_raising(lattice: &Lattice) -> SpinOperator {
    let table = lattice.coupling_table();
    let hops = table
        .entries()
        .iter()
        .map(|&(i, j, a)| Hop {
            i: i as u8,
            j: j as u8,
            amp: a,
            needs_equal: true,
        })
        .collect();
    SpinOperator {
        n_spins: lattice.n_spins(),
        zz: Vec::new(),
        hops,
    }
}

impl SpinOperator {
    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    pub fn zz_terms(&self) -> &[ZzTerm] {
        &self.zz
    }

    /// True when every term commutes with `J_z` (flip-flop hops only).
    pub fn conserves_magnetization(&self) -> bool {
        self.hops.iter().all(|h| !h.needs_equal)
    }

    /// All two-spin terms change the popcount by 0 or ±2, so magnetization
    /// parity is always conserved.
    pub fn conserves_parity(&self) -> bool {
        true
    }

    /// Sign-negated copy.
    pub fn negated(&self) -> SpinOperator {
        let mut out = self.clone();
        for z in &mut out.zz {
            z.coeff = -z.coeff;
        }
        for h in &mut out.hops {
            h.amp = -h.amp;
        }
        out
    }

    /// Diagonal element `<b|H|b>`.
    pub fn diagonal(&self, b: u64) -> f64 {
        let mut acc = 0.0;
        for z in &self.zz {
            let si = 1.0 - 2.0 * ((b >> z.i) & 1) as f64;
            let sj = 1.0 - 2.0 * ((b >> z.j) & 1) as f64;
            acc += z.coeff * si * sj;
        }
        acc
    }

    /// Matrix element `<row|H|col>` computed from the term structure.
    pub fn element(&self, row: u64, col: u64) -> f64 {
        if row == col {
            return self.diagonal(col);
        }
        let mut acc = 0.0;
        for h in &self.hops {
            let mask = (1u64 << h.i) | (1u64 << h.j);
            if row ^ col != mask {
                continue;
            }
            let x = col & mask;
            let active = if h.needs_equal {
                x == 0 || x == mask
            } else {
                x != 0 && x != mask
            };
            if active {
                acc += h.amp;
            }
        }
        acc
    }

    /// Upper bound on the spectral norm (max absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        let zz: f64 = self.zz.iter().map(|z| z.coeff.abs()).sum();
        let hop: f64 = self.hops.iter().map(|h| h.amp.abs()).sum();
        zz + hop
    }

    /// Dense row-major matrix; real because all elements are real.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        const LIMIT: usize = 10;
        if self.n_spins > LIMIT {
            return Err(Error::TooLarge {
                n_spins: self.n_spins,
                limit: LIMIT,
            });
        }
        let dim = 1usize << self.n_spins;
        let mut mat = vec![0.0; dim * dim];
        for b in 0..dim as u64 {
            mat[b as usize * dim + b as usize] = self.diagonal(b);
        }
        for h in &self.hops {
            let mask = (1usize << h.i) | (1usize << h.j);
            for b in 0..dim {
                let x = b & mask;
                let active = if h.needs_equal {
                    x == 0 || x == mask
                } else {
                    x != 0 && x != mask
                };
                if active {
                    mat[b * dim + (b ^ mask)] += h.amp;
                }
            }
        }
        Ok(mat)
    }

    /// Debug dump of the nonzero entries with `col >= row` as CSV rows
    /// `(row, col, re, im)`.
    pub fn write_triplets_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# n_spins={}", self.n_spins)?;
        writeln!(w, "row,col,re,im")?;
        let dim = 1u64 << self.n_spins;
        for b in 0..dim {
            let d = self.diagonal(b);
            if d != 0.0 {
                writeln!(w, "{b},{b},{d},0")?;
            }
            for h in &self.hops {
                let mask = (1u64 << h.i) | (1u64 << h.j);
                let t = b ^ mask;
                if t < b {
                    continue;
                }
                let x = b & mask;
                let active = if h.needs_equal {
                    x == 0 || x == mask
                } else {
                    x != 0 && x != mask
                };
                if active {
                    writeln!(w, "{b},{t},{},0", h.amp)?;
                }
            }
        }
        Ok(())
    }
}

/// The vector space an evolution runs in: the full `2^n` basis or a
/// conserved sector of it.
#[derive(Debug, Clone)]
pub enum SpinBasis {
    Full {
        n: usize,
    },
    /// Fixed number of down spins; `states` ascending, `index` maps a full
    /// bitmask to its row (u32::MAX when outside the sector).
    Popcount {
        n: usize,
        k: usize,
        states: Vec<u64>,
        index: Vec<u32>,
    },
    /// Fixed popcount parity. Row `r` encodes bits 1..n of the bitmask; bit 0
    /// is reconstructed from the parity, so no index tables are needed.
    Parity {
        n: usize,
        parity: u8,
    },
}

impl SpinBasis {
    pub fn full(n: usize) -> Self {
        SpinBasis::Full { n }
    }

    pub fn popcount(n: usize, k: usize) -> Self {
        let states: Vec<u64> = crate::state::popcount_masks(n, k).collect();
        let mut index = vec![u32::MAX; 1 << n];
        for (r, &b) in states.iter().enumerate() {
            index[b as usize] = r as u32;
        }
        SpinBasis::Popcount {
            n,
            k,
            states,
            index,
        }
    }

    pub fn parity(n: usize, parity: u8) -> Self {
        SpinBasis::Parity { n, parity }
    }

    pub fn n_spins(&self) -> usize {
        match self {
            SpinBasis::Full { n } => *n,
            SpinBasis::Popcount { n, .. } => *n,
            SpinBasis::Parity { n, .. } => *n,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpinBasis::Full { n } => 1 << n,
            SpinBasis::Popcount { states, .. } => states.len(),
            SpinBasis::Parity { n, .. } => 1 << (n - 1),
        }
    }

    pub fn bitmask_of(&self, row: usize) -> u64 {
        match self {
            SpinBasis::Full { .. } => row as u64,
            SpinBasis::Popcount { states, .. } => states[row],
            SpinBasis::Parity { parity, .. } => {
                let r = row as u64;
                let bit0 = (r.count_ones() as u64 ^ *parity as u64) & 1;
                (r << 1) | bit0
            }
        }
    }

    pub fn row_of(&self, b: u64) -> Option<usize> {
        match self {
            SpinBasis::Full { .. } => Some(b as usize),
            SpinBasis::Popcount { index, .. } => {
                let r = index[b as usize];
                (r != u32::MAX).then_some(r as usize)
            }
            SpinBasis::Parity { parity, .. } => {
                (b.count_ones() as u8 & 1 == *parity).then_some((b >> 1) as usize)
            }
        }
    }

    /// Restrict a full statevector to this basis. Errors unless the state is
    /// supported on the sector exactly.
    pub fn project(&self, v: &StateVector) -> Result<Vec<Complex64>> {
        if v.n_spins() != self.n_spins() {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.n_spins(),
                found: v.dim(),
            });
        }
        let mut rows = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (b, a) in v.amplitudes().iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            match self.row_of(b as u64) {
                Some(r) => rows[r] = *a,
                None => {
                    return Err(Error::InvalidArgument(
                        "state has support outside the requested sector".into(),
                    ))
                }
            }
        }
        Ok(rows)
    }

    /// Embed sector rows back into a full statevector.
    pub fn embed(&self, rows: &[Complex64]) -> Result<StateVector> {
        if rows.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rows.len(),
            });
        }
        let mut v = StateVector::zero(self.n_spins())?;
        for (r, a) in rows.iter().enumerate() {
            if a.norm_sqr() != 0.0 {
                v.amplitudes_mut()[self.bitmask_of(r) as usize] = *a;
            }
        }
        Ok(v)
    }

    /// Exact magnetization spectrum of a sector-resident vector.
    pub fn spectrum_of_rows(&self, rows: &[Complex64]) -> Spectrum {
        let n = self.n_spins();
        let mut probs = vec![0.0; n + 1];
        match self {
            SpinBasis::Full { .. } => {
                for (r, a) in rows.iter().enumerate() {
                    let w = a.norm_sqr();
                    if w > 0.0 {
                        probs[r.count_ones() as usize] += w;
                    }
                }
            }
            SpinBasis::Popcount { k, .. } => {
                probs[*k] = rows.iter().map(|a| a.norm_sqr()).sum();
            }
            SpinBasis::Parity { parity, .. } => {
                let p = *parity as u32;
                for (r, a) in rows.iter().enumerate() {
                    let w = a.norm_sqr();
                    if w > 0.0 {
                        let ones = (r as u64).count_ones();
                        probs[(ones + ((ones ^ p) & 1)) as usize] += w;
                    }
                }
            }
        }
        Spectrum::new(n, probs).expect("length matches by construction")
    }
}

/// A hop compiled to one of its two active bit patterns on row indices:
/// rows with `bit_a = va`, `bit_b = vb` receive `amp * v[row + delta]`,
/// where `delta` flips both bits. Flip-flop hops compile to the (0,1) and
/// (1,0) patterns, double-flip hops to (0,0) and (1,1).
#[derive(Debug, Clone, Copy)]
struct HopPattern {
    a: u32,
    b: u32,
    va: usize,
    vb: usize,
    delta: isize,
    amp: f64,
}

/// A parity-basis hop on the implicit bit 0; the condition involves the
/// popcount of the row, so it cannot be expressed as a bit pattern.
#[derive(Debug, Clone, Copy)]
struct ContactHop {
    bj: u32,
    mm: usize,
    amp: f64,
    needs_equal: bool,
}

/// An operator compiled against a basis: cached diagonal plus hop structure
/// ready for the matvec kernels.
pub struct PreparedOperator<'b> {
    basis: &'b SpinBasis,
    diag: Vec<f64>,
    hops: Vec<Hop>,
    patterns: Vec<HopPattern>,
    contact: Vec<ContactHop>,
    parity_flag: u8,
}

/// Row-block size for the blocked matvec kernels; keeps the output block and
/// the hop-shifted input segments cache-resident.
const BLOCK_ROWS: usize = 1 << 13;

impl<'b> PreparedOperator<'b> {
    pub fn new(op: &SpinOperator, basis: &'b SpinBasis) -> Result<Self> {
        if op.n_spins() != basis.n_spins() {
            return Err(Error::DimensionMismatch {
                expected: basis.n_spins(),
                found: op.n_spins(),
            });
        }
        if matches!(basis, SpinBasis::Popcount { .. }) && !op.conserves_magnetization() {
            return Err(Error::InvalidArgument(
                "operator does not preserve fixed-magnetization sectors".into(),
            ));
        }
        let dim = basis.dim();
        let mut diag = vec![0.0; dim];
        if !op.zz.is_empty() {
            for (r, d) in diag.iter_mut().enumerate() {
                *d = op.diagonal(basis.bitmask_of(r));
            }
        }
        let mut patterns = Vec::new();
        let mut contact = Vec::new();
        let mut parity_flag = 0u8;
        match basis {
            SpinBasis::Popcount { .. } => {}
            SpinBasis::Full { .. } | SpinBasis::Parity { .. } => {
                let shift = u32::from(matches!(basis, SpinBasis::Parity { .. }));
                if let SpinBasis::Parity { parity, .. } = basis {
                    parity_flag = *parity;
                }
                for h in &op.hops {
                    if shift == 1 && h.i == 0 {
                        contact.push(ContactHop {
                            bj: (h.j - 1) as u32,
                            mm: 1usize << (h.j - 1),
                            amp: h.amp,
                            needs_equal: h.needs_equal,
                        });
                        continue;
                    }
                    let a = (h.i as u32) - shift;
                    let b = (h.j as u32) - shift;
                    let pats: [(usize, usize); 2] = if h.needs_equal {
                        [(0, 0), (1, 1)]
                    } else {
                        [(0, 1), (1, 0)]
                    };
                    for (va, vb) in pats {
                        let delta =
                            (1 - 2 * va as isize) * (1isize << a) + (1 - 2 * vb as isize) * (1isize << b);
                        patterns.push(HopPattern {
                            a,
                            b,
                            va,
                            vb,
                            delta,
                            amp: h.amp,
                        });
                    }
                }
            }
        }
        Ok(PreparedOperator {
            basis,
            diag,
            hops: op.hops.clone(),
            patterns,
            contact,
            parity_flag,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &SpinBasis {
        self.basis
    }

    /// `out = H v`, fixed evaluation order (bitwise deterministic).
    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(v.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        match self.basis {
            SpinBasis::Full { .. } | SpinBasis::Parity { .. } => self.apply_xor(v, out),
            SpinBasis::Popcount { states, index, .. } => {
                self.apply_indexed(v, out, states, index)
            }
        }
    }

    /// Kernel for bases where `b -> b ^ mask` acts as an XOR (equivalently a
    /// constant offset on pattern rows). Blocked over rows; each pattern is
    /// walked as contiguous runs so the inner loop is a straight fused
    /// multiply-add over two slices.
    fn apply_xor(&self, v: &[Complex64], out: &mut [Complex64]) {
        let dim = v.len();
        let mut start = 0usize;
        while start < dim {
            let len = BLOCK_ROWS.min(dim - start);
            for r in start..start + len {
                out[r] = self.diag[r] * v[r];
            }
            for p in &self.patterns {
                for_each_pattern_run(start, len, p, &mut |rs, rl| {
                    let src = &v[(rs as isize + p.delta) as usize..][..rl];
                    let dst = &mut out[rs..rs + rl];
                    let amp = p.amp;
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += amp * s;
                    }
                });
            }
            // contact-spin hops in a parity basis: the implicit bit 0 is the
            // popcount parity of the row, so these stay per-row branchless
            let pf = self.parity_flag as u32;
            for c in &self.contact {
                let bj = c.bj;
                let mm = c.mm;
                if c.needs_equal {
                    for r in start..start + len {
                        let bit0 = (r.count_ones() ^ pf) & 1;
                        let bitj = (r as u32 >> bj) & 1;
                        let w = (1 - (bit0 ^ bitj)) as f64 * c.amp;
                        out[r] += w * v[r ^ mm];
                    }
                } else {
                    for r in start..start + len {
                        let bit0 = (r.count_ones() ^ pf) & 1;
                        let bitj = (r as u32 >> bj) & 1;
                        out[r] += (bit0 ^ bitj) as f64 * c.amp * v[r ^ mm];
                    }
                }
            }
            start += len;
        }
    }

    /// Kernel for fixed-popcount bases (flip-flop hops only): targets are
    /// found through the sector index table.
    fn apply_indexed(
        &self,
        v: &[Complex64],
        out: &mut [Complex64],
        states: &[u64],
        index: &[u32],
    ) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.diag[r] * v[r];
        }
        for h in &self.hops {
            let mask = (1u64 << h.i) | (1u64 << h.j);
            let amp = h.amp;
            for (r, &b) in states.iter().enumerate() {
                let x = b & mask;
                if x != 0 && x != mask {
                    let t = index[(b ^ mask) as usize] as usize;
                    out[r] += amp * v[t];
                }
            }
        }
    }
}

/// Call `f(run_start, run_len)` for every maximal run of consecutive rows in
/// `[block_start, block_start + block_len)` whose bits `a < b` equal
/// `(va, vb)`. The block start is always a multiple of its length.
fn for_each_pattern_run(
    block_start: usize,
    block_len: usize,
    p: &HopPattern,
    f: &mut impl FnMut(usize, usize),
) {
    let (a, b) = (p.a, p.b);
    let (va, vb) = (p.va, p.vb);
    let emit_a = |lo: usize, hi: usize, f: &mut dyn FnMut(usize, usize)| {
        if (1usize << a) >= hi - lo {
            if (lo >> a) & 1 == va {
                f(lo, hi - lo);
            }
            return;
        }
        let step = 1usize << (a + 1);
        let mut q = lo + (va << a);
        while q < hi {
            f(q, 1 << a);
            q += step;
        }
    };
    if (1usize << b) >= block_len {
        if (block_start >> b) & 1 == vb {
            emit_a(block_start, block_start + block_len, f);
        }
        return;
    }
    let step = 1usize << (b + 1);
    let mut q = block_start + (vb << b);
    let end = block_start + block_len;
    while q < end {
        emit_a(q, q + (1 << b), f);
        q += step;
    }
}

/// Pick the smallest conserved basis for evolving `v` under `h`: a fixed
/// popcount sector when the operator conserves magnetization and the state
/// is popcount-pure, else a parity sector when the state is parity-pure,
/// else the full basis. Support is detected through exact structural zeros.
pub fn natural_basis(h: &SpinOperator, v: &StateVector) -> SpinBasis {
    let n = v.n_spins();
    let mut pops: Option<u32> = None;
    let mut single_pop = true;
    let mut parity: Option<u32> = None;
    let mut single_parity = true;
    for (b, a) in v.amplitudes().iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let k = (b as u64).count_ones();
        match pops {
            None => pops = Some(k),
            Some(k0) if k0 != k => single_pop = false,
            _ => {}
        }
        match parity {
            None => parity = Some(k & 1),
            Some(p) if p != k & 1 => single_parity = false,
            _ => {}
        }
    }
    if single_pop && h.conserves_magnetization() {
        if let Some(k) = pops {
            return SpinBasis::popcount(n, k as usize);
        }
    }
    if single_parity && n >= 2 {
        if let Some(p) = parity {
            return SpinBasis::parity(n, p as u8);
        }
    }
    SpinBasis::full(n)
}
