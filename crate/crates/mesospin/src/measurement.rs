//! The two-outcome collective POVM, post-selected state update, and the
//! assembly of the final two-qubit density matrix.
//!
//! A collective two-outcome measurement is parametrized by a phase function
//! `theta(m_z)`: `E_0 = sum cos^2(theta) Pi(m)`, `E_1 = 1 - E_0`, with
//! update operators `M_0 = sum cos(theta) Pi(m)` and
//! `M_1 = i sum sin(theta) Pi(m)` (the global `i` is fixed by the two-level
//! apparatus model). Completeness `cos^2 + sin^2 = 1` holds identically.
//!
//! The post-selected two-qubit state is computed without ever materializing
//! the joint MSS register. Write `chi_ij` for the MSS state tagged to qubit
//! label `ij` after measurement and disentangling; every Gram element
//! `<chi_kl|chi_ij>` reduces to sums over the branch-1 spectra whenever each
//! branch-0 state is a magnetization eigenstate, because the disentangling
//! legs recombine into `U_1 U_0^dag psi_0 = psi_1`. Both magnification
//! circuits started from a polarized register satisfy this exactly, so the
//! reduction is exact, and it is what makes the same formulas usable for
//! binomial extrapolation at sizes far beyond exact reach.

use num_complex::Complex64;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::magnification::magnify_gr;
use crate::propagator::PropagatorConfig;
use crate::spectra::{spectrum_of, Spectrum};
use crate::state::{magnetization_of, BranchState, DiagonalMixture, StateVector};

/// Probability floor below which post-selection on outcome 1 is refused.
pub const P_SELECT_FLOOR: f64 = 1e-12;

/// Residual tolerance for the branch-0 eigenstate check.
const DELTA_TOL: f64 = 1e-9;

/// A two-outcome collective POVM with an affine phase function
/// `theta(m) = slope * m + offset`.
#[derive(Debug, Clone, Copy)]
pub struct PhasePovm {
    n_total: usize,
    slope: f64,
    offset: f64,
}

impl PhasePovm {
    /// The linear phase function `theta(m) = 2 pi m / N` that selects the
    /// odd-magnetization qubit subspace of the one-time circuit.
    pub fn canonical(n_total: usize) -> Self {
        PhasePovm {
            n_total,
            slope: 2.0 * std::f64::consts::PI / n_total as f64,
            offset: 0.0,
        }
    }

    /// Polarization-aware slope `2 pi / (N (1 - eps))`.
    pub fn with_polarization(n_total: usize, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::InvalidArgument(format!(
                "polarization-aware phase needs eps in [0, 1), got {eps}"
            )));
        }
        Ok(PhasePovm {
            n_total,
            slope: 2.0 * std::f64::consts::PI / (n_total as f64 * (1.0 - eps)),
            offset: 0.0,
        })
    }

    pub fn affine(n_total: usize, slope: f64, offset: f64) -> Self {
        PhasePovm {
            n_total,
            slope,
            offset,
        }
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn theta(&self, m: f64) -> f64 {
        self.slope * m + self.offset
    }

    /// `|cos^2 + sin^2 - 1|` maximized over the magnetization range; zero up
    /// to one ulp by the Pythagorean identity.
    pub fn completeness_defect(&self) -> f64 {
        let n = self.n_total;
        (0..=n)
            .map(|k| {
                let m = (n as f64 - 2.0 * k as f64) / 2.0;
                let t = self.theta(m);
                (t.cos().powi(2) + t.sin().powi(2) - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Apply `M_1` across the two halves with the left half frozen at
/// magnetization `m_left`: each amplitude picks up `i sin(theta(m_left +
/// m(b)))`. Returns the sub-normalized state and its weight
/// `sum sin^2 theta P(m)`.
pub fn povm_apply(
    povm: &PhasePovm,
    m_left: f64,
    state: &StateVector,
) -> Result<(StateVector, f64)> {
    let n_r = state.n_spins();
    if povm.n_total < n_r {
        return Err(Error::DimensionMismatch {
            expected: povm.n_total,
            found: n_r,
        });
    }
    let mut out = state.clone();
    let mut weight = 0.0;
    for (b, a) in out.amplitudes_mut().iter_mut().enumerate() {
        let m = magnetization_of(b as u64, n_r);
        let s = povm.theta(m_left + m).sin();
        *a *= Complex64::new(0.0, s);
        weight += a.norm_sqr();
    }
    Ok((out, weight))
}

/// Simulate the measurement through an explicit two-level apparatus: apply
/// `U_M = sum Pi(m) (x) exp(-i theta(m) sigma_y)` to `state (x) |0>_a`, then
/// project the apparatus on `outcome`. Returns the sub-normalized MSS state
/// and the outcome probability; apart from the fixed global phase of `M_1`,
/// this reproduces `povm_apply` exactly.
pub fn apparatus_outcome(
    povm: &PhasePovm,
    state: &StateVector,
    outcome: u8,
) -> Result<(StateVector, f64)> {
    if outcome > 1 {
        return Err(Error::InvalidArgument("outcome must be 0 or 1".into()));
    }
    let n = state.n_spins();
    let mut out = state.clone();
    let mut weight = 0.0;
    for (b, a) in out.amplitudes_mut().iter_mut().enumerate() {
        let theta = povm.theta(magnetization_of(b as u64, n));
        // exp(-i theta sigma_y) |0> = cos(theta) |0> + sin(theta) |1>
        let c = if outcome == 0 { theta.cos() } else { theta.sin() };
        *a *= c;
        weight += a.norm_sqr();
    }
    Ok((out, weight))
}

/// Final two-qubit density matrix in the basis `|00>, |01>, |10>, |11>`
/// (left qubit first).
#[derive(Debug, Clone, PartialEq)]
pub struct QubitDensityMatrix {
    mat: [Complex64; 16],
}

impl QubitDensityMatrix {
    pub fn from_elements(mat: [Complex64; 16]) -> Self {
        QubitDensityMatrix { mat }
    }

    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        self.mat[row * 4 + col]
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.mat[i * 5].re).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        crate::linalg::hermitian_eigenvalues(&self.mat, 4)
    }

    pub fn max_hermiticity_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..4 {
            for c in 0..4 {
                worst = worst.max((self.element(r, c) - self.element(c, r).conj()).norm());
            }
        }
        worst
    }
}

/// Outcome of the measurement pipelines: selection probability, the
/// normalized two-qubit state, and its defining scalars.
#[derive(Debug, Clone)]
pub struct JointOutcome {
    pub p_select: f64,
    pub rho_q: QubitDensityMatrix,
    /// Population scalar `c_{01,01}`.
    pub c_0101: f64,
    /// Coherence scalar `c_{01,10}`.
    pub c_0110: f64,
}

impl JointOutcome {
    /// Population of the odd subspace, `c_{01,01} + c_{10,10}`.
    pub fn population(&self) -> f64 {
        self.rho_q.element(1, 1).re + self.rho_q.element(2, 2).re
    }

    /// Coherence relative to the population, `c_{01,10} / c_{01,01}`.
    pub fn coherence_rel(&self) -> f64 {
        self.c_0110 / self.c_0101
    }

    /// Overlap with the triplet-zero Bell state.
    pub fn fidelity(&self) -> f64 {
        crate::entanglement::fidelity_m0(&self.rho_q)
    }
}

/// Spectral data of one half entering the Gram elements.
struct HalfSums {
    /// Branch-0 magnetization (a delta by precondition).
    m0: f64,
    p1: Spectrum,
}

impl HalfSums {
    fn from_branch(branch: &BranchState) -> Result<Self> {
        let s0 = spectrum_of(&branch.psi0);
        let m0 = s0.as_delta(DELTA_TOL).ok_or_else(|| {
            Error::InvalidArgument(
                "branch-0 state must be a magnetization eigenstate; both \
                 magnification circuits started from a polarized register \
                 satisfy this"
                    .into(),
            )
        })?;
        if (s0.mass() - 1.0).abs() > 1e-9 || (spectrum_of(&branch.psi1).mass() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidArgument(
                "branch states must be normalized".into(),
            ));
        }
        Ok(HalfSums {
            m0,
            p1: spectrum_of(&branch.psi1),
        })
    }

    fn s_sum(&self, povm: &PhasePovm, shift: f64) -> f64 {
        self.p1
            .iter()
            .map(|(m, p)| povm.theta(shift + m).sin() * p)
            .sum()
    }

    fn s2_sum(&self, povm: &PhasePovm, shift: f64) -> f64 {
        self.p1
            .iter()
            .map(|(m, p)| povm.theta(shift + m).sin().powi(2) * p)
            .sum()
    }
}

/// Exact post-selected two-qubit state for a pair of pure branch states.
///
/// Requires `branch.psi0` of each half to be a magnetization eigenstate (see
/// the module docs); the full 4x4 matrix is then assembled from spectral
/// sums, with the coherence `c_{01,10}` factorizing into the product of two
/// sine-weighted sums over the branch-1 spectra.
pub fn joint_pipeline(
    branch_l: &BranchState,
    branch_r: &BranchState,
    povm: &PhasePovm,
) -> Result<JointOutcome> {
    let n_l = branch_l.n_spins();
    let n_r = branch_r.n_spins();
    if povm.n_total != n_l + n_r {
        return Err(Error::DimensionMismatch {
            expected: n_l + n_r,
            found: povm.n_total,
        });
    }
    let left = HalfSums::from_branch(branch_l)?;
    let right = HalfSums::from_branch(branch_r)?;
    let st = |m: f64| povm.theta(m).sin();

    let g0000 = st(left.m0 + right.m0).powi(2);
    let g0101 = right.s2_sum(povm, left.m0);
    let g1010 = left.s2_sum(povm, right.m0);
    let s_l = left.s_sum(povm, right.m0);
    let s_r = right.s_sum(povm, left.m0);
    let g0110 = s_l * s_r;
    let g0100 = st(left.m0 + right.m0) * s_r;
    let g1000 = st(left.m0 + right.m0) * s_l;

    let mut g1111 = 0.0;
    let mut g1101 = 0.0;
    let mut g1110 = 0.0;
    let mut cross = 0.0; // sum st(mL + mR) P1L P1R
    for (ml, pl) in left.p1.iter() {
        if pl == 0.0 {
            continue;
        }
        for (mr, pr) in right.p1.iter() {
            if pr == 0.0 {
                continue;
            }
            let w = pl * pr;
            let s = st(ml + mr);
            g1111 += s * s * w;
            g1101 += st(left.m0 + mr) * s * w;
            g1110 += st(ml + right.m0) * s * w;
            cross += s * w;
        }
    }
    let g1100 = st(left.m0 + right.m0) * cross;

    assemble_outcome(GramElements {
        g0000,
        g0101,
        g1010,
        g1111,
        g0100,
        g1000,
        g0110,
        g1101,
        g1110,
        g1100,
    })
}

/// The ten independent Gram elements `<chi_kl|chi_ij>` (all real).
struct GramElements {
    g0000: f64,
    g0101: f64,
    g1010: f64,
    g1111: f64,
    g0100: f64,
    g1000: f64,
    g0110: f64,
    g1101: f64,
    g1110: f64,
    g1100: f64,
}

fn assemble_outcome(g: GramElements) -> Result<JointOutcome> {
    let w = g.g0000 + g.g0101 + g.g1010 + g.g1111;
    let p_select = w / 4.0;
    if p_select < P_SELECT_FLOOR {
        return Err(Error::PostSelectionImpossible { p: p_select });
    }
    let re = |x: f64| Complex64::new(x / w, 0.0);
    let mut mat = [Complex64::new(0.0, 0.0); 16];
    // rows/cols ordered |00>, |01>, |10>, |11>
    mat[0] = re(g.g0000);
    mat[5] = re(g.g0101);
    mat[10] = re(g.g1010);
    mat[15] = re(g.g1111);
    mat[1] = re(g.g0100); // (00, 01) and conjugate
    mat[4] = re(g.g0100);
    mat[2] = re(g.g1000); // (00, 10)
    mat[8] = re(g.g1000);
    mat[6] = re(g.g0110); // (01, 10)
    mat[9] = re(g.g0110);
    mat[7] = re(g.g1101); // (01, 11)
    mat[13] = re(g.g1101);
    mat[11] = re(g.g1110); // (10, 11)
    mat[14] = re(g.g1110);
    mat[3] = re(g.g1100); // (00, 11)
    mat[12] = re(g.g1100);
    Ok(JointOutcome {
        p_select,
        rho_q: QubitDensityMatrix::from_elements(mat),
        c_0101: g.g0101 / w,
        c_0110: g.g0110 / w,
    })
}

/// Pipeline outcome for mixed initial states, plus the diagnostics of the
/// mixture truncation.
#[derive(Debug, Clone)]
pub struct MixedOutcome {
    pub outcome: JointOutcome,
    pub kept_mass_left: f64,
    pub kept_mass_right: f64,
}

/// Exact post-selected two-qubit state when each half of the MSS starts in a
/// diagonal mixture, via the term-by-term branch decomposition: every kept
/// basis state `|b>` is run through the one-time circuit as a pure branch,
/// and the magnetization of the untouched branch-0 state enters the phase
/// function as a shift.
pub fn joint_pipeline_mixed(
    mix_l: &DiagonalMixture,
    mix_r: &DiagonalMixture,
    lattice: &Lattice,
    t: f64,
    povm: &PhasePovm,
    cfg: &PropagatorConfig,
) -> Result<MixedOutcome> {
    let n = lattice.n_spins();
    if mix_l.n_spins() != n || mix_r.n_spins() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mix_l.n_spins().max(mix_r.n_spins()),
        });
    }
    if povm.n_total != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            found: povm.n_total,
        });
    }

    // Branch-1 spectra do not depend on the mixture weights, so each
    // distinct basis state is evolved once and shared between the halves.
    let masks: Vec<u64> = {
        let mut set: BTreeMap<u64, ()> = BTreeMap::new();
        for &(b, _) in mix_l.terms().iter().chain(mix_r.terms()) {
            set.insert(b, ());
        }
        set.into_keys().collect()
    };
    let evolved = crate::parallel::ordered_map(masks.clone(), |b| {
        let init = StateVector::basis(n, b)?;
        let res = magnify_gr(lattice, t, &init, cfg)?;
        Ok::<Spectrum, Error>(spectrum_of(&res.branch.psi1))
    });
    let mut spectra: BTreeMap<u64, Spectrum> = BTreeMap::new();
    for (b, s) in masks.iter().zip(evolved) {
        spectra.insert(*b, s?);
    }

    // Class-aggregated tables; classes are the n + 1 branch-0 magnetizations.
    let m_of = |c: usize| (n as f64 - 2.0 * c as f64) / 2.0;
    let st = |m: f64| povm.theta(m).sin();
    let side_tables = |mix: &DiagonalMixture| -> Result<SideTables> {
        let mut tab = SideTables::new(n);
        for &(bmask, p) in mix.terms() {
            let c = bmask.count_ones() as usize;
            let spec = spectra
                .get(&bmask)
                .ok_or(Error::MissingMixtureTerm { bitmask: bmask })?;
            tab.w[c] += p;
            for (k, &pk) in spec.probs().iter().enumerate() {
                tab.q[k] += p * pk;
                tab.qc[c][k] += p * pk;
            }
            for shift_class in 0..=n {
                let shift = m_of(shift_class);
                let mut s_sum = 0.0;
                let mut s2_sum = 0.0;
                for (k, &pk) in spec.probs().iter().enumerate() {
                    let s = st(shift + m_of(k));
                    s_sum += s * pk;
                    s2_sum += s * s * pk;
                }
                tab.b[c][shift_class] += p * s_sum;
                tab.a2_tot[shift_class] += p * s2_sum;
            }
        }
        Ok(tab)
    };
    let lt = side_tables(mix_l)?;
    let rt = side_tables(mix_r)?;

    let mut g = GramElements {
        g0000: 0.0,
        g0101: 0.0,
        g1010: 0.0,
        g1111: 0.0,
        g0100: 0.0,
        g1000: 0.0,
        g0110: 0.0,
        g1101: 0.0,
        g1110: 0.0,
        g1100: 0.0,
    };
    for cl in 0..=n {
        for cr in 0..=n {
            let s = st(m_of(cl) + m_of(cr));
            g.g0000 += lt.w[cl] * rt.w[cr] * s * s;
            g.g0100 += lt.w[cl] * s * rt.b[cr][cl];
            g.g1000 += rt.w[cr] * s * lt.b[cl][cr];
            g.g0110 += lt.b[cl][cr] * rt.b[cr][cl];
            // spectral double sum for the (00, 11) coherence
            let mut inner = 0.0;
            for k in 0..=n {
                if lt.qc[cl][k] == 0.0 {
                    continue;
                }
                for kp in 0..=n {
                    inner += st(m_of(k) + m_of(kp)) * lt.qc[cl][k] * rt.qc[cr][kp];
                }
            }
            g.g1100 += s * inner;
        }
    }
    for c in 0..=n {
        g.g0101 += lt.w[c] * rt.a2_tot[c];
        g.g1010 += rt.w[c] * lt.a2_tot[c];
    }
    for k in 0..=n {
        for kp in 0..=n {
            let s = st(m_of(k) + m_of(kp));
            g.g1111 += s * s * lt.q[k] * rt.q[kp];
        }
    }
    for cl in 0..=n {
        for kp in 0..=n {
            g.g1101 += st(m_of(cl) + m_of(kp)) * lt.b[cl][kp] * rt.q[kp];
        }
    }
    for cr in 0..=n {
        for k in 0..=n {
            g.g1110 += st(m_of(k) + m_of(cr)) * rt.b[cr][k] * lt.q[k];
        }
    }

    let outcome = assemble_outcome(g)?;
    Ok(MixedOutcome {
        outcome,
        kept_mass_left: mix_l.kept_mass(),
        kept_mass_right: mix_r.kept_mass(),
    })
}

struct SideTables {
    /// Class weights of the branch-0 magnetizations.
    w: Vec<f64>,
    /// `b[c][c']`: class-`c` aggregate of the sine-weighted branch-1 sums at
    /// shift class `c'`.
    b: Vec<Vec<f64>>,
    /// Aggregate of the squared-sine sums at each shift class.
    a2_tot: Vec<f64>,
    /// Mixture-averaged branch-1 spectrum.
    q: Vec<f64>,
    /// Per-class branch-1 spectra.
    qc: Vec<Vec<f64>>,
}

impl SideTables {
    fn new(n: usize) -> Self {
        SideTables {
            w: vec![0.0; n + 1],
            b: vec![vec![0.0; n + 1]; n + 1],
            a2_tot: vec![0.0; n + 1],
            q: vec![0.0; n + 1],
            qc: vec![vec![0.0; n + 1]; n + 1],
        }
    }
}
