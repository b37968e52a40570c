//! Krylov-subspace evolution `exp(-i H t) v` for sparse Hermitian `H`.
//!
//! Lanczos with full reorthogonalization inside each subspace; the substep
//! size is chosen adaptively from the standard residual estimate
//! `err(tau) ~ |beta_k| * integral |[exp(-i s T)]_{k,1}| ds`, evaluated by
//! Simpson's rule on the eigendecomposition of the small tridiagonal matrix.
//! Iteration and summation orders are fixed, so repeated runs are bitwise
//! identical.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::{natural_basis, PreparedOperator, SpinBasis, SpinOperator};
use crate::linalg;
use crate::state::StateVector;

/// Propagator tuning knobs. `tol` is the per-substep local error target.
#[derive(Debug, Clone, Copy)]
pub struct PropagatorConfig {
    pub krylov_dim: usize,
    pub tol: f64,
    pub max_substeps: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            krylov_dim: 30,
            tol: 1e-10,
            max_substeps: 1_000_000,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=100).contains(&self.krylov_dim) {
            return Err(Error::InvalidArgument(format!(
                "krylov_dim = {} outside [2, 100]",
                self.krylov_dim
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        Ok(())
    }
}

/// Diagnostics reported alongside every evolution.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvolveReport {
    pub substeps: usize,
    pub matvecs: usize,
    /// Sum of the accepted per-substep local error estimates.
    pub est_error: f64,
}

impl EvolveReport {
    /// Accumulate another report (used when a circuit chains evolutions).
    pub fn merge(&mut self, other: &EvolveReport) {
        self.substeps += other.substeps;
        self.matvecs += other.matvecs;
        self.est_error += other.est_error;
    }
}

/// Guard against runaway allocations: basis storage is capped at ~3.5 GB.
const MAX_BASIS_BYTES: usize = 3_500_000_000;

/// Evolve a statevector by `exp(-i H t)`, automatically restricting to the
/// smallest conserved sector containing the state.
pub fn evolve(
    h: &SpinOperator,
    t: f64,
    v: &StateVector,
    cfg: &PropagatorConfig,
) -> Result<(StateVector, EvolveReport)> {
    let basis = natural_basis(h, v);
    evolve_with_basis(h, t, v, &basis, cfg)
}

/// Evolve without sector restriction. Mainly for tests of the sector logic.
pub fn evolve_full_space(
    h: &SpinOperator,
    t: f64,
    v: &StateVector,
    cfg: &PropagatorConfig,
) -> Result<(StateVector, EvolveReport)> {
    let basis = SpinBasis::full(v.n_spins());
    evolve_with_basis(h, t, v, &basis, cfg)
}

fn evolve_with_basis(
    h: &SpinOperator,
    t: f64,
    v: &StateVector,
    basis: &SpinBasis,
    cfg: &PropagatorConfig,
) -> Result<(StateVector, EvolveReport)> {
    let mut rows = basis.project(v)?;
    let prep = PreparedOperator::new(h, basis)?;
    let report = evolve_rows(&prep, t, &mut rows, cfg)?;
    Ok((basis.embed(&rows)?, report))
}

/// In-place evolution of sector-resident rows.
pub fn evolve_rows(
    prep: &PreparedOperator,
    t: f64,
    rows: &mut Vec<Complex64>,
    cfg: &PropagatorConfig,
) -> Result<EvolveReport> {
    cfg.validate()?;
    let dim = prep.dim();
    if rows.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rows.len(),
        });
    }
    if t == 0.0 || !t.is_finite() {
        if !t.is_finite() {
            return Err(Error::InvalidArgument("non-finite evolution time".into()));
        }
        return Ok(EvolveReport::default());
    }
    let m = cfg.krylov_dim.min(dim.max(2));
    if dim.saturating_mul(m + 2).saturating_mul(16) > MAX_BASIS_BYTES {
        return Err(Error::TooLarge {
            n_spins: prep.basis().n_spins(),
            limit: 24,
        });
    }

    let mut ws = Workspace::new(dim, m);
    let mut report = EvolveReport::default();
    let mut consumed = 0.0f64;
    let time_eps = 1e-12 * t.abs().max(1.0);
    // first substep guess: refined by the residual estimate below
    let mut suggestion = f64::INFINITY;

    while (t - consumed).abs() > time_eps {
        if report.substeps >= cfg.max_substeps {
            return Err(Error::PropagationFailed {
                substeps: report.substeps,
                remaining: (t - consumed).abs(),
            });
        }
        let remaining = t - consumed;
        let step = substep(prep, rows, remaining, suggestion, cfg, &mut ws)?;
        consumed += step.tau;
        suggestion = step.next_suggestion;
        report.substeps += 1;
        report.matvecs += step.matvecs;
        report.est_error += step.err;
    }
    Ok(report)
}

struct Workspace {
    basis: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
}

impl Workspace {
    fn new(dim: usize, m: usize) -> Self {
        Workspace {
            basis: (0..=m).map(|_| vec![Complex64::new(0.0, 0.0); dim]).collect(),
            w: vec![Complex64::new(0.0, 0.0); dim],
        }
    }
}

struct StepResult {
    tau: f64,
    err: f64,
    matvecs: usize,
    next_suggestion: f64,
}

/// One adaptive substep: build a Krylov basis from the current vector, pick
/// the largest `tau` whose local error estimate meets `cfg.tol`, apply it.
fn substep(
    prep: &PreparedOperator,
    rows: &mut [Complex64],
    remaining: f64,
    suggestion: f64,
    cfg: &PropagatorConfig,
    ws: &mut Workspace,
) -> Result<StepResult> {
    let dim = prep.dim();
    let m = cfg.krylov_dim.min(dim.max(2));
    let beta0 = linalg::norm(rows);
    if beta0 <= 0.0 {
        return Err(Error::InvalidArgument("evolving a zero vector".into()));
    }

    // Lanczos with full reorthogonalization.
    let mut alpha: Vec<f64> = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    {
        let v0 = &mut ws.basis[0];
        v0.copy_from_slice(rows);
        linalg::scale(beta0.recip(), v0);
    }
    let mut k = m;
    let mut happy = false;
    let mut scale_est = 0.0f64;
    for j in 0..m {
        let (head, tail) = ws.basis.split_at_mut(j + 1);
        let vj = &head[j];
        let w = &mut ws.w;
        prep.apply(vj, w);
        let a = linalg::dot(vj, w).re;
        alpha.push(a);
        linalg::axpy(Complex64::new(-a, 0.0), vj, w);
        if j > 0 {
            linalg::axpy(Complex64::new(-beta[j - 1], 0.0), &head[j - 1], w);
        }
        // full reorthogonalization pass
        for vi in head.iter() {
            let c = linalg::dot(vi, w);
            if c.norm_sqr() > 0.0 {
                linalg::axpy(-c, vi, w);
            }
        }
        let b = linalg::norm(w);
        scale_est = scale_est.max(a.abs() + b);
        if b <= 1e-13 * scale_est.max(1.0) {
            k = j + 1;
            happy = true;
            beta.push(b);
            break;
        }
        beta.push(b);
        if j + 1 < m {
            let next = &mut tail[0];
            next.copy_from_slice(w);
            linalg::scale(b.recip(), next);
        }
    }

    // Small tridiagonal eigenproblem: T = Q diag(vals) Q^T.
    let (vals, q) = linalg::tridiagonal_eigen(&alpha[..k], &beta[..k - 1]);
    let q0: Vec<f64> = (0..k).map(|i| q[i]).collect(); // first row of Q
    let out_coupling = beta[k - 1];

    // y(tau) = Q exp(-i tau Lambda) Q^T e_1; the last component drives the
    // local error estimate.
    let y_at = |tau: f64| -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); k];
        for i in 0..k {
            let phase = Complex64::from_polar(q0[i], -tau * vals[i]);
            for (row, yr) in y.iter_mut().enumerate() {
                *yr += q[row * k + i] * phase;
            }
        }
        y
    };
    let last_mag = |tau: f64| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..k {
            acc += Complex64::from_polar(q0[i] * q[(k - 1) * k + i], -tau * vals[i]);
        }
        acc.norm()
    };
    let err_at = |tau: f64| -> f64 {
        if happy {
            return 0.0;
        }
        let g_half = last_mag(tau / 2.0);
        let g_full = last_mag(tau);
        out_coupling * tau.abs() * (4.0 * g_half + g_full) / 6.0
    };

    // Shrink tau until the estimate meets tol.
    let spread = (vals[k - 1] - vals[0]).max(1e-12);
    let mut tau = remaining
        .abs()
        .min(suggestion)
        .min(4.0 * m as f64 / spread)
        .copysign(remaining);
    let mut err = err_at(tau);
    let mut shrinks = 0;
    while err > cfg.tol && shrinks < 200 {
        let factor = (0.9 * (cfg.tol / err).powf(1.0 / k as f64)).clamp(0.2, 0.8);
        tau *= factor;
        err = err_at(tau);
        shrinks += 1;
        if tau.abs() < 1e-14 * remaining.abs().max(1.0) {
            return Err(Error::PropagationFailed {
                substeps: shrinks,
                remaining: remaining.abs(),
            });
        }
    }

    // Assemble rows = beta0 * V y(tau).
    let y = y_at(tau);
    for x in rows.iter_mut() {
        *x = Complex64::new(0.0, 0.0);
    }
    for (row, &c) in y.iter().enumerate() {
        linalg::axpy(beta0 * c, &ws.basis[row], rows);
    }

    let grow = if err < cfg.tol / 20.0 {
        1.8
    } else if err < cfg.tol / 2.0 {
        1.25
    } else {
        1.05
    };
    Ok(StepResult {
        tau,
        err,
        matvecs: k,
        next_suggestion: tau.abs() * grow,
    })
}

/// Reference propagator by full dense eigendecomposition. Exact up to
/// round-off; restricted to small registers and used to validate `evolve`.
pub fn evolve_dense_oracle(h: &SpinOperator, t: f64, v: &StateVector) -> Result<StateVector> {
    let n = v.n_spins();
    if h.n_spins() != n {
        return Err(Error::DimensionMismatch {
            expected: 1 << h.n_spins(),
            found: v.dim(),
        });
    }
    let dense = h.to_dense()?; // enforces the size limit
    let dim = 1usize << n;
    let (vals, q) = linalg::symmetric_eigen(&dense, dim);
    // w = Q exp(-i t Lambda) Q^T v
    let amps = v.amplitudes();
    let mut tmp = vec![Complex64::new(0.0, 0.0); dim];
    for i in 0..dim {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..dim {
            acc += q[r * dim + i] * amps[r];
        }
        tmp[i] = acc * Complex64::from_polar(1.0, -t * vals[i]);
    }
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            acc += q[r * dim + i] * tmp[i];
        }
        *o = acc;
    }
    StateVector::from_amplitudes(n, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_dipolar, build_grade_raising, build_xy};
    use crate::lattice::{build_lattice, CouplingMode, Lattice};
    use crate::state::{polarized_state, StateVector};
    use crate::spectra::spectrum_of;

    fn chain(n: usize) -> Lattice {
        build_lattice(&[n], CouplingMode::FullDipolar).unwrap().0
    }

    fn cfg() -> PropagatorConfig {
        PropagatorConfig::default()
    }

    #[test]
    fn two_spin_flip_flop_rabi() {
        // H = XY on 2 spins, t = pi/2: |up down> -> -i |down up>
        let h = build_xy(&chain(2));
        let v = StateVector::basis(2, 0b10).unwrap();
        let (out, rep) = evolve(&h, std::f64::consts::FRAC_PI_2, &v, &cfg()).unwrap();
        assert!((out.amplitudes()[0b01] - Complex64::new(0.0, -1.0)).norm() < 1e-9);
        assert!(out.amplitudes()[0b10].norm() < 1e-9);
        assert!(rep.substeps >= 1);
    }

    #[test]
    fn zero_time_is_identity() {
        let h = build_xy(&chain(3));
        let v = polarized_state(3).unwrap();
        let (out, rep) = evolve(&h, 0.0, &v, &cfg()).unwrap();
        assert_eq!(out.amplitudes(), v.amplitudes());
        assert_eq!(rep.substeps, 0);
    }

    #[test]
    fn reversibility() {
        let lat = chain(6);
        let h = build_grade_raising(&lat);
        let v = polarized_state(6).unwrap();
        let t = 11.0;
        let (fwd, _) = evolve(&h, t, &v, &cfg()).unwrap();
        let (back, _) = evolve(&h, -t, &fwd, &cfg()).unwrap();
        let overlap = back.inner(&v).unwrap();
        assert!((overlap.norm() - 1.0).abs() < 1e-8);
        let diff: f64 = back
            .amplitudes()
            .iter()
            .zip(v.amplitudes())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-8, "diff = {diff:.3e}");
    }

    #[test]
    fn matches_dense_oracle_on_random_states() {
        use rand::prelude::*;
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..6 {
            let n = rng.gen_range(2..=6);
            let lat = chain(n);
            let h = match trial % 3 {
                0 => build_xy(&lat),
                1 => build_grade_raising(&lat),
                _ => build_dipolar(&lat),
            };
            let dim = 1usize << n;
            let mut v = StateVector::zero(n).unwrap();
            for b in 0..dim {
                v.amplitudes_mut()[b] =
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            v.normalize();
            let t = rng.gen_range(-8.0..8.0);
            let (krylov, _) = evolve(&h, t, &v, &cfg()).unwrap();
            let exact = evolve_dense_oracle(&h, t, &v).unwrap();
            let err: f64 = krylov
                .amplitudes()
                .iter()
                .zip(exact.amplitudes())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-8, "trial {trial}: err = {err:.3e}");
        }
    }

    #[test]
    fn oracle_on_diagonal_subspace_is_phase_rotation() {
        // For two dipolar-coupled spins the flip-flop part couples only
        // |01> and |10>, so the {|00>, |11>} subspace evolves by the
        // diagonal phases exp(-i 2 t).
        let lat = chain(2);
        let h = build_dipolar(&lat);
        let v = {
            let mut s = StateVector::zero(2).unwrap();
            s.amplitudes_mut()[0b00] = Complex64::new(0.5_f64.sqrt(), 0.0);
            s.amplitudes_mut()[0b11] = Complex64::new(0.5_f64.sqrt(), 0.0);
            s
        };
        let t = 0.37;
        let out = evolve_dense_oracle(&h, t, &v).unwrap();
        let expected = Complex64::from_polar(0.5_f64.sqrt(), -2.0 * t);
        assert!((out.amplitudes()[0b00] - expected).norm() < 1e-12);
        assert!((out.amplitudes()[0b11] - expected).norm() < 1e-12);
    }

    #[test]
    fn norm_is_preserved() {
        let lat = chain(8);
        let h = build_grade_raising(&lat);
        let v = polarized_state(8).unwrap();
        let (out, _) = evolve(&h, 2.0 * std::f64::consts::PI * 8.0, &v, &cfg()).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn magnetization_conserving_evolution_keeps_spectrum() {
        use rand::prelude::*;
        let mut rng = StdRng::seed_from_u64(3);
        let lat = chain(6);
        for h in [build_xy(&lat), build_dipolar(&lat)] {
            let mut v = StateVector::zero(6).unwrap();
            for b in 0..64 {
                v.amplitudes_mut()[b] =
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            v.normalize();
            let before = spectrum_of(&v);
            let (out, _) = evolve(&h, 5.3, &v, &cfg()).unwrap();
            let after = spectrum_of(&out);
            let tv: f64 = before
                .probs()
                .iter()
                .zip(after.probs())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv < 1e-10, "total variation {tv:.3e}");
        }
    }

    #[test]
    fn sector_and_full_space_agree() {
        let lat = chain(8);
        let h = build_grade_raising(&lat);
        let v = polarized_state(8).unwrap();
        let t = 7.7;
        let (sector, _) = evolve(&h, t, &v, &cfg()).unwrap();
        let (full, _) = evolve_full_space(&h, t, &v, &cfg()).unwrap();
        let diff: f64 = sector
            .amplitudes()
            .iter()
            .zip(full.amplitudes())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-10, "diff = {diff:.3e}");
    }

    #[test]
    fn xy_on_single_spin_register_is_identity() {
        // one MSS spin: H_XY has no pairs, evolution is trivial
        let lat = chain(1);
        let h = build_xy(&lat);
        let v = polarized_state(1).unwrap();
        let (out, _) = evolve(&h, 3.0, &v, &cfg()).unwrap();
        assert!((out.amplitudes()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        let lat = chain(2);
        let h = build_xy(&lat);
        let v = polarized_state(2).unwrap();
        let bad = PropagatorConfig {
            krylov_dim: 1,
            ..Default::default()
        };
        assert!(evolve(&h, 1.0, &v, &bad).is_err());
        let bad = PropagatorConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(evolve(&h, 1.0, &v, &bad).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = build_xy(&chain(3));
        let v = polarized_state(4).unwrap();
        assert!(evolve(&h, 1.0, &v, &cfg()).is_err());
    }
}
