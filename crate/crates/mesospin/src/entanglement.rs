//! Entanglement quantifiers: Bell fidelity, negativity and logarithmic
//! negativity, von Neumann entropies, entanglement of projection after a
//! single particle loss, and the loss ceiling on the Bell fidelity.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::magnification::magnify_gr;
use crate::measurement::QubitDensityMatrix;
use crate::propagator::PropagatorConfig;
use crate::state::{BranchState, DensityOperator, DiagonalMixture, StateVector};

/// Overlap of a two-qubit state with the triplet-zero Bell state
/// `(|01> + |10>)/sqrt(2)`.
pub fn fidelity_m0(rho: &QubitDensityMatrix) -> f64 {
    0.5 * (rho.element(1, 1).re
        + rho.element(2, 2).re
        + rho.element(1, 2).re
        + rho.element(2, 1).re)
}

/// Largest register for which the dense partial-transpose eigensolve runs.
pub const MAX_NEGATIVITY_SPINS: usize = 12;

fn pt_eigenvalues(rho: &DensityOperator, split: &[usize]) -> Result<Vec<f64>> {
    if rho.n_spins() > MAX_NEGATIVITY_SPINS {
        return Err(Error::TooLarge {
            n_spins: rho.n_spins(),
            limit: MAX_NEGATIVITY_SPINS,
        });
    }
    Ok(rho.partial_transpose(split)?.eigenvalues())
}

/// Sum of the absolute values of the negative eigenvalues of the partially
/// transposed density matrix. Zero for separable states, 1/2 for maximally
/// entangled qubit pairs.
pub fn negativity(rho: &DensityOperator, split: &[usize]) -> Result<f64> {
    Ok(pt_eigenvalues(rho, split)?
        .into_iter()
        .filter(|&l| l < 0.0)
        .map(f64::abs)
        .sum())
}

/// `log2` of the trace norm of the partial transpose; equals
/// `log2(2 Neg + 1)` for trace-one states.
pub fn log_negativity(rho: &DensityOperator, split: &[usize]) -> Result<f64> {
    let trace_norm: f64 = pt_eigenvalues(rho, split)?
        .into_iter()
        .map(f64::abs)
        .sum();
    Ok(trace_norm.log2())
}

/// The pure qubit-MSS state `(|0> psi0 + |1> psi1)/sqrt(2)` as a dense
/// density operator, qubit on the top bit.
pub fn qubit_mss_pure(branch: &BranchState) -> Result<DensityOperator> {
    DensityOperator::from_pure(&branch.joint_state()?)
}

/// The qubit-MSS state when the MSS half starts in a diagonal mixture: each
/// kept basis state is run through the one-time circuit and contributes a
/// pure conditional branch.
pub fn qubit_mss_mixed(
    mix: &DiagonalMixture,
    lattice: &Lattice,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<DensityOperator> {
    let n = lattice.n_spins();
    if mix.n_spins() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mix.n_spins(),
        });
    }
    let joints = crate::parallel::ordered_map(mix.terms().to_vec(), |(b, p)| {
        let init = StateVector::basis(n, b)?;
        let res = magnify_gr(lattice, t, &init, cfg)?;
        Ok::<(StateVector, f64), Error>((res.branch.joint_state()?, p))
    });
    let mut rho = DensityOperator::zero(n + 1)?;
    for j in joints {
        let (joint, p) = j?;
        rho.accumulate_pure(&joint, p);
    }
    Ok(rho)
}

/// Negativity of a pure branch state from its 2x2 Schmidt data:
/// `sqrt(1 - |<psi0|psi1>|^2) / 2`. Independent of the dense
/// partial-transpose route and used to cross-check it.
pub fn pure_branch_negativity(branch: &BranchState) -> Result<f64> {
    let g = branch.psi0.inner(&branch.psi1)?.norm();
    Ok((1.0 - g * g).max(0.0).sqrt() / 2.0)
}

/// Entropy floor: eigenvalues below this contribute nothing.
const ENTROPY_FLOOR: f64 = 1e-15;

fn entropy_of_probs(probs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &p in probs {
        let p = if p > -1e-9 { p.max(0.0) } else { p };
        if p > ENTROPY_FLOOR {
            acc -= p * p.log2();
        }
    }
    acc
}

/// Von Neumann entropy (base 2) of a density operator.
pub fn entropy_of_density(rho: &DensityOperator) -> f64 {
    entropy_of_probs(&rho.eigenvalues())
}

/// Entropy of the qubit marginal of `(|0> w0 + |1> w1)/sqrt(2 p)`, computed
/// from the 2x2 Gram matrix of the (sub-normalized) components.
fn qubit_marginal_entropy(w0: &[Complex64], w1: &[Complex64], norm_sqr: f64) -> f64 {
    if norm_sqr <= ENTROPY_FLOOR {
        return 0.0;
    }
    let g00: f64 = w0.iter().map(|a| a.norm_sqr()).sum();
    let g11: f64 = w1.iter().map(|a| a.norm_sqr()).sum();
    let g01: Complex64 = w0.iter().zip(w1).map(|(a, b)| a.conj() * b).sum();
    let (a, d, b2) = (g00 / norm_sqr, g11 / norm_sqr, g01.norm_sqr() / (norm_sqr * norm_sqr));
    let mid = 0.5 * (a + d);
    let off = (0.25 * (a - d) * (a - d) + b2).sqrt();
    entropy_of_probs(&[mid + off, mid - off])
}

/// Conditioning of a qubit-MSS branch state on the z basis of one lost spin.
#[derive(Debug, Clone, Copy)]
pub struct LossOutcome {
    pub lost_index: usize,
    pub p_up: f64,
    pub p_down: f64,
    /// Qubit-MSS entanglement entropy of the spin-up conditional state.
    pub e_up: f64,
    pub e_down: f64,
    /// Entanglement of projection `p_up e_up + p_down e_down`.
    pub e_p: f64,
}

/// Condition the pure qubit-MSS state on the lost spin's z basis and return
/// the ensemble-weighted entanglement of the two conditional pure states.
pub fn lose_particle(branch: &BranchState, lost: usize) -> Result<LossOutcome> {
    let n = branch.n_spins();
    if lost >= n {
        return Err(Error::InvalidArgument(format!(
            "lost spin {lost} out of range for {n} spins"
        )));
    }
    let project = |psi: &StateVector, bit: u64| -> Vec<Complex64> {
        let mask = 1usize << lost;
        let keep_low = mask - 1;
        let mut out = vec![Complex64::new(0.0, 0.0); 1 << (n - 1)];
        for (b, a) in psi.amplitudes().iter().enumerate() {
            if (b >> lost) as u64 & 1 != bit {
                continue;
            }
            let reduced = (b & keep_low) | ((b >> 1) & !keep_low);
            out[reduced] = *a;
        }
        out
    };
    let mut outcome = LossOutcome {
        lost_index: lost,
        p_up: 0.0,
        p_down: 0.0,
        e_up: 0.0,
        e_down: 0.0,
        e_p: 0.0,
    };
    for bit in [0u64, 1] {
        let w0 = project(&branch.psi0, bit);
        let w1 = project(&branch.psi1, bit);
        let norm_sqr: f64 = 0.5
            * (w0.iter().map(|a| a.norm_sqr()).sum::<f64>()
                + w1.iter().map(|a| a.norm_sqr()).sum::<f64>());
        let entropy = qubit_marginal_entropy(&w0, &w1, 2.0 * norm_sqr);
        if bit == 0 {
            outcome.p_up = norm_sqr;
            outcome.e_up = entropy;
        } else {
            outcome.p_down = norm_sqr;
            outcome.e_down = entropy;
        }
    }
    outcome.e_p = outcome.p_up * outcome.e_up + outcome.p_down * outcome.e_down;
    Ok(outcome)
}

/// Entanglement of projection averaged over which spin is lost, all spins
/// equally likely.
pub fn average_loss_entropy(branch: &BranchState) -> Result<f64> {
    let n = branch.n_spins();
    let mut acc = 0.0;
    for a in 0..n {
        acc += lose_particle(branch, a)?.e_p;
    }
    Ok(acc / n as f64)
}

/// Closed form of the entanglement of projection for the symmetric states:
/// `E_p^r(r) = -(1 + r)/2 [ 1/(1+r) log2(1/(1+r)) + r/(1+r) log2(r/(1+r)) ]`,
/// with `r` the probability of finding a lost spin up. Losing one spin of a
/// Dicke branch `|D_k>` lands on `r = 1 - k/n`.
pub fn ep_closed_form(r_up: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r_up) {
        return Err(Error::InvalidArgument(format!(
            "r_up = {r_up} outside [0, 1]"
        )));
    }
    Ok(0.5 * (1.0 + r_up) * entropy_of_probs(&[1.0 / (1.0 + r_up), r_up / (1.0 + r_up)]))
}

/// Per-spin projections of branch 1 on spin-up, `|alpha_a|^2`.
fn alpha_sqr_per_spin(branch: &BranchState) -> Result<Vec<f64>> {
    // requires the polarized branch-0 of the one-time circuit
    let a0 = branch.psi0.amplitudes();
    if (a0[0].norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "loss bound requires branch-0 to be the polarized state".into(),
        ));
    }
    let n = branch.n_spins();
    let mut alpha = vec![0.0; n];
    for (b, a) in branch.psi1.amplitudes().iter().enumerate() {
        let w = a.norm_sqr();
        if w == 0.0 {
            continue;
        }
        for (i, item) in alpha.iter_mut().enumerate() {
            if b >> i & 1 == 0 {
                *item += w;
            }
        }
    }
    Ok(alpha)
}

/// Ceiling on the post-selected Bell fidelity after one particle loss, with
/// the lost spin replaced by `|up><up|`: the average over all MSS spins of
/// `(1 + |alpha_a|^2) / 2`. Settles at 3/4 once the branch-1 spectrum has
/// mean zero with magnetization spread evenly over the spins.
pub fn loss_fidelity_bound(branch_l: &BranchState, branch_r: &BranchState) -> Result<f64> {
    let mut acc = 0.0;
    let mut count = 0usize;
    for branch in [branch_l, branch_r] {
        for a2 in alpha_sqr_per_spin(branch)? {
            acc += 0.5 * (1.0 + a2);
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

/// Aggregates of the per-spin branch-1 projections for one half:
/// `(sum |alpha_a|, sum |alpha_a|^2)`. The first feeds the summed form
/// `1/2 + sum |alpha_a| / (2 N)` of the fidelity ceiling.
pub fn loss_alpha_aggregates(branch: &BranchState) -> Result<(f64, f64)> {
    let alpha = alpha_sqr_per_spin(branch)?;
    Ok((
        alpha.iter().map(|a2| a2.sqrt()).sum(),
        alpha.iter().sum(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, CouplingMode};
    use crate::measurement::QubitDensityMatrix;
    use crate::state::{dicke_state, polarized_state};

    fn bell_rho() -> QubitDensityMatrix {
        let mut mat = [Complex64::new(0.0, 0.0); 16];
        mat[5] = Complex64::new(0.5, 0.0);
        mat[10] = Complex64::new(0.5, 0.0);
        mat[6] = Complex64::new(0.5, 0.0);
        mat[9] = Complex64::new(0.5, 0.0);
        QubitDensityMatrix::from_elements(mat)
    }

    #[test]
    fn fidelity_examples() {
        assert!((fidelity_m0(&bell_rho()) - 1.0).abs() < 1e-15);

        let mut mat = [Complex64::new(0.0, 0.0); 16];
        mat[0] = Complex64::new(1.0, 0.0);
        assert_eq!(fidelity_m0(&QubitDensityMatrix::from_elements(mat)), 0.0);

        // even-parity mixtures have zero overlap with |m0>
        let mut mat = [Complex64::new(0.0, 0.0); 16];
        mat[0] = Complex64::new(0.5, 0.0);
        mat[15] = Complex64::new(0.5, 0.0);
        assert_eq!(fidelity_m0(&QubitDensityMatrix::from_elements(mat)), 0.0);
    }

    #[test]
    fn negativity_of_bell_state() {
        let bell = {
            let mut s = StateVector::zero(2).unwrap();
            let r = std::f64::consts::FRAC_1_SQRT_2;
            s.amplitudes_mut()[0] = Complex64::new(r, 0.0);
            s.amplitudes_mut()[3] = Complex64::new(r, 0.0);
            s
        };
        let rho = DensityOperator::from_pure(&bell).unwrap();
        let neg = negativity(&rho, &[0]).unwrap();
        let lneg = log_negativity(&rho, &[0]).unwrap();
        assert!((neg - 0.5).abs() < 1e-10);
        assert!((lneg - 1.0).abs() < 1e-10);
        // the identity lneg = log2(2 neg + 1)
        assert!((lneg - (2.0 * neg + 1.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn negativity_of_product_state_vanishes() {
        let prod = polarized_state(2)
            .unwrap()
            .tensor(&dicke_state(2, 1).unwrap())
            .unwrap();
        let rho = DensityOperator::from_pure(&prod).unwrap();
        assert!(negativity(&rho, &[0, 1]).unwrap() < 1e-9);
        assert!(log_negativity(&rho, &[0, 1]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn dense_and_schmidt_negativity_agree_for_branches() {
        let (lat, _) = build_lattice(&[5], CouplingMode::FullDipolar).unwrap();
        let init = polarized_state(5).unwrap();
        let res = magnify_gr(&lat, 17.0, &init, &Default::default()).unwrap();
        let rho = qubit_mss_pure(&res.branch).unwrap();
        let dense = negativity(&rho, &[5]).unwrap(); // qubit is the top bit
        let schmidt = pure_branch_negativity(&res.branch).unwrap();
        assert!(
            (dense - schmidt).abs() < 1e-9,
            "dense {dense:.6} vs schmidt {schmidt:.6}"
        );
    }

    #[test]
    fn entropy_from_either_marginal_agrees() {
        let (lat, _) = build_lattice(&[4], CouplingMode::FullDipolar).unwrap();
        let init = polarized_state(4).unwrap();
        let res = magnify_gr(&lat, 9.0, &init, &Default::default()).unwrap();
        let rho = qubit_mss_pure(&res.branch).unwrap();
        let qubit_side = entropy_of_density(&rho.partial_trace(&[4]).unwrap());
        let mss_side = entropy_of_density(&rho.partial_trace(&[0, 1, 2, 3]).unwrap());
        assert!((qubit_side - mss_side).abs() < 1e-10);
    }

    #[test]
    fn dicke_loss_matches_closed_form() {
        for n in [3usize, 6, 9] {
            for k in 1..=n {
                let branch = BranchState::new(
                    polarized_state(n).unwrap(),
                    dicke_state(n, k).unwrap(),
                )
                .unwrap();
                let expected = ep_closed_form(1.0 - k as f64 / n as f64).unwrap();
                for a in 0..n {
                    let out = lose_particle(&branch, a).unwrap();
                    assert!(
                        (out.e_p - expected).abs() < 1e-10,
                        "n={n} k={k} spin {a}: {} vs {expected}",
                        out.e_p
                    );
                    assert!((out.p_up + out.p_down - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn ghz_limit_loses_all_entanglement() {
        let n = 6;
        let branch =
            BranchState::new(polarized_state(n).unwrap(), dicke_state(n, n).unwrap()).unwrap();
        let out = lose_particle(&branch, 2).unwrap();
        assert!(out.e_p.abs() < 1e-12);
    }

    #[test]
    fn closed_form_endpoints() {
        assert!(ep_closed_form(0.0).unwrap().abs() < 1e-15);
        assert!((ep_closed_form(1.0).unwrap() - 1.0).abs() < 1e-15);
        // the value at r = 1/2, quoted as the loss asymptote
        let mid = ep_closed_form(0.5).unwrap();
        assert!((mid - 0.6887218755408672).abs() < 1e-12);
        assert!(ep_closed_form(1.5).is_err());
    }

    #[test]
    fn loss_bound_examples() {
        let n = 5;
        // psi1 = psi0 = polarized: every |alpha_a| = 1, bound = 1
        let branch = BranchState::new(
            polarized_state(n).unwrap(),
            polarized_state(n).unwrap(),
        )
        .unwrap();
        assert!((loss_fidelity_bound(&branch, &branch).unwrap() - 1.0).abs() < 1e-12);

        // psi1 = |down..down>: alpha_a = 0, bound = 1/2
        let branch =
            BranchState::new(polarized_state(n).unwrap(), dicke_state(n, n).unwrap()).unwrap();
        assert!((loss_fidelity_bound(&branch, &branch).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn alpha_normalization_and_mean_zero_balance() {
        let n = 10;
        let (lat, _) = build_lattice(&[n], CouplingMode::FullDipolar).unwrap();
        let init = polarized_state(n).unwrap();
        let t = 2.0 * std::f64::consts::PI * n as f64;
        let res = magnify_gr(&lat, t, &init, &Default::default()).unwrap();
        let (_, sum_sq) = loss_alpha_aggregates(&res.branch).unwrap();
        // sum |alpha|^2 + sum |beta|^2 = n per normalization
        let (mean, _) = crate::spectra::spectrum_of(&res.branch.psi1)
            .moments()
            .unwrap();
        // mean-zero spectrum <=> sum |alpha|^2 = n/2
        assert!((sum_sq - (n as f64 / 2.0 + mean)).abs() < 1e-8);
    }
}
