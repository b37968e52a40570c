//! The two magnification circuits that correlate a target qubit with the
//! collective magnetization of its half of the MSS.
//!
//! Both circuits are simulated as a [`BranchState`]: the control qubit is
//! never touched by the internal Hamiltonians, so evolving the two
//! conditional MSS branches separately is exact and halves the memory.
//!
//! * repeated interaction: `r` rounds of a qubit-controlled NOT on the
//!   contact spin followed by flip-flop evolution `exp(-i H_XY dt)`; the
//!   evolution acts on both branches, only the CNOT is conditional;
//! * one-time interaction: `exp(-i H_2GR t)`, one conditional NOT, then the
//!   reversed evolution (`-H_2GR` is synthesized by sign negation, which is
//!   the same as evolving with `-t`). Branch 0 is returned as the initial
//!   state bitwise, since its forward and reverse legs cancel exactly.

use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_grade_raising, build_xy, natural_basis, PreparedOperator, SpinBasis,
};
use crate::propagator::{evolve, evolve_rows, EvolveReport, PropagatorConfig};
use crate::spectra::spectrum_of;
use crate::state::{BranchState, StateVector};

/// Which circuit produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    XyRepeated,
    GrOneTime,
}

/// Circuit parameters echoed into results and output files.
#[derive(Debug, Clone, Copy)]
pub enum MagnifyParams {
    Xy { dt: f64, reps: usize },
    Gr { t: f64 },
}

/// One sampled point of a magnification trajectory: time, mean and standard
/// deviation of the branch-1 magnetization spectrum.
#[derive(Debug, Clone, Copy)]
pub struct TranscriptPoint {
    pub time: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone)]
pub struct MagnificationResult {
    pub branch: BranchState,
    pub protocol: Protocol,
    pub params: MagnifyParams,
    /// Filled only when a trajectory was requested.
    pub transcript: Vec<TranscriptPoint>,
    pub report: EvolveReport,
}

/// Repeated-interaction magnification: `r` rounds of conditional NOT on the
/// contact spin followed by `exp(-i H_XY dt)` on both branches.
pub fn magnify_xy(
    lattice: &crate::lattice::Lattice,
    dt: f64,
    reps: usize,
    initial: &StateVector,
    cfg: &PropagatorConfig,
) -> Result<MagnificationResult> {
    check_initial(lattice, initial)?;
    let h = build_xy(lattice);
    let contact = lattice.contact_spin();
    let mut psi0 = initial.clone();
    let mut psi1 = initial.clone();
    let mut report = EvolveReport::default();
    for _ in 0..reps {
        psi1.flip_spin(contact);
        let (next0, rep0) = evolve(&h, dt, &psi0, cfg)?;
        let (next1, rep1) = evolve(&h, dt, &psi1, cfg)?;
        psi0 = next0;
        psi1 = next1;
        report.merge(&rep0);
        report.merge(&rep1);
    }
    Ok(MagnificationResult {
        branch: BranchState::new(psi0, psi1)?,
        protocol: Protocol::XyRepeated,
        params: MagnifyParams::Xy { dt, reps },
        transcript: Vec::new(),
        report,
    })
}

/// One-time grade-raising magnification. Branch 0 is the initial state
/// bitwise; branch 1 is `exp(+i H t) X_contact exp(-i H t) |initial>`.
pub fn magnify_gr(
    lattice: &crate::lattice::Lattice,
    t: f64,
    initial: &StateVector,
    cfg: &PropagatorConfig,
) -> Result<MagnificationResult> {
    check_initial(lattice, initial)?;
    let h = build_grade_raising(lattice);
    let contact = lattice.contact_spin();
    let (mut fwd, rep_f) = evolve(&h, t, initial, cfg)?;
    fwd.flip_spin(contact);
    let (psi1, rep_b) = evolve(&h, -t, &fwd, cfg)?;
    let mut report = rep_f;
    report.merge(&rep_b);
    Ok(MagnificationResult {
        branch: BranchState::new(initial.clone(), psi1)?,
        protocol: Protocol::GrOneTime,
        params: MagnifyParams::Gr { t },
        transcript: Vec::new(),
        report,
    })
}

fn check_initial(lattice: &crate::lattice::Lattice, initial: &StateVector) -> Result<()> {
    if initial.n_spins() != lattice.n_spins() {
        return Err(Error::DimensionMismatch {
            expected: 1 << lattice.n_spins(),
            found: initial.dim(),
        });
    }
    if !initial.is_normalized(1e-9) {
        return Err(Error::InvalidArgument(
            "initial state must be normalized".into(),
        ));
    }
    Ok(())
}

/// Branch-1 trajectory of the repeated-interaction circuit, one point per
/// round at `time = k dt`. The branch state recurs round to round, so this
/// costs the same as a single `magnify_xy` call.
pub fn xy_trajectory(
    lattice: &crate::lattice::Lattice,
    dt: f64,
    reps: usize,
    initial: &StateVector,
    cfg: &PropagatorConfig,
) -> Result<Vec<TranscriptPoint>> {
    check_initial(lattice, initial)?;
    let h = build_xy(lattice);
    let contact = lattice.contact_spin();
    let mut psi1 = initial.clone();
    let mut transcript = Vec::with_capacity(reps + 1);
    let push = |tr: &mut Vec<TranscriptPoint>, time: f64, v: &StateVector| -> Result<()> {
        let (mean, sd) = spectrum_of(v).moments()?;
        tr.push(TranscriptPoint { time, mean, sd });
        Ok(())
    };
    push(&mut transcript, 0.0, &psi1)?;
    for k in 0..reps {
        psi1.flip_spin(contact);
        let (next, _) = evolve(&h, dt, &psi1, cfg)?;
        psi1 = next;
        push(&mut transcript, (k + 1) as f64 * dt, &psi1)?;
    }
    Ok(transcript)
}

/// Branch-1 trajectory of the one-time circuit on a uniform grid of
/// `samples` points over `[0, t_max]`.
///
/// The forward leg is shared across samples; each sample needs its own
/// reversed leg of duration `t_k`, which dominates the cost at large sizes.
/// When `stop_below` is set, sampling stops after the first point whose
/// mean falls below the threshold (the transient-time value is unaffected,
/// since only the first crossing matters).
pub fn gr_trajectory(
    lattice: &crate::lattice::Lattice,
    t_max: f64,
    samples: usize,
    initial: &StateVector,
    cfg: &PropagatorConfig,
    stop_below: Option<f64>,
) -> Result<Vec<TranscriptPoint>> {
    check_initial(lattice, initial)?;
    if samples < 2 || !(t_max > 0.0) {
        return Err(Error::InvalidArgument(
            "gr_trajectory needs samples >= 2 and t_max > 0".into(),
        ));
    }
    let h = build_grade_raising(lattice);
    let contact = lattice.contact_spin();
    if contact != 0 {
        return Err(Error::InvalidArgument("contact spin must be spin 0".into()));
    }

    let n = lattice.n_spins();
    let start_parity = initial
        .amplitudes()
        .iter()
        .enumerate()
        .find(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(b, _)| (b.count_ones() & 1) as u8)
        .unwrap_or(0);
    let sector_ok = n >= 2 && matches!(natural_basis(&h, initial), SpinBasis::Parity { .. });

    let dt = t_max / (samples - 1) as f64;
    let mut transcript = Vec::with_capacity(samples);
    // at t = 0 the circuit reduces to the bare conditional flip
    let first = {
        let mut flipped = initial.clone();
        flipped.flip_spin(contact);
        spectrum_of(&flipped).moments()?
    };
    transcript.push(TranscriptPoint {
        time: 0.0,
        mean: first.0,
        sd: first.1,
    });
    if let Some(th) = stop_below {
        if first.0 < th {
            return Ok(transcript);
        }
    }

    if sector_ok {
        // Forward leg lives in the initial parity sector; the contact flip
        // toggles bit 0, which is implicit in a parity basis, so the flipped
        // state has identical rows read in the opposite sector.
        let fwd_basis = SpinBasis::parity(n, start_parity);
        let flip_basis = SpinBasis::parity(n, start_parity ^ 1);
        let prep_fwd = PreparedOperator::new(&h, &fwd_basis)?;
        let prep_flip = PreparedOperator::new(&h, &flip_basis)?;
        let mut fwd_rows = fwd_basis.project(initial)?;
        for k in 1..samples {
            let t_k = k as f64 * dt;
            evolve_rows(&prep_fwd, dt, &mut fwd_rows, cfg)?;
            let mut back_rows = fwd_rows.clone();
            evolve_rows(&prep_flip, -t_k, &mut back_rows, cfg)?;
            let (mean, sd) = flip_basis.spectrum_of_rows(&back_rows).moments()?;
            transcript.push(TranscriptPoint { time: t_k, mean, sd });
            if let Some(th) = stop_below {
                if mean < th {
                    break;
                }
            }
        }
    } else {
        let mut fwd = initial.clone();
        for k in 1..samples {
            let t_k = k as f64 * dt;
            let (next, _) = evolve(&h, dt, &fwd, cfg)?;
            fwd = next;
            let mut flipped = fwd.clone();
            flipped.flip_spin(contact);
            let (back, _) = evolve(&h, -t_k, &flipped, cfg)?;
            let (mean, sd) = spectrum_of(&back).moments()?;
            transcript.push(TranscriptPoint { time: t_k, mean, sd });
            if let Some(th) = stop_below {
                if mean < th {
                    break;
                }
            }
        }
    }
    Ok(transcript)
}

/// Earliest sampled time at which the trajectory mean first drops below half
/// of its starting value (about `N_h / 4` for a polarized start, whose
/// single conditional flip puts the first sample at `N_h / 2 - 1`); `+inf`
/// when it never crosses within the transcript.
pub fn transient_metric(transcript: &[TranscriptPoint]) -> Result<f64> {
    let first = transcript.first().ok_or(Error::EmptyTranscript)?;
    let threshold = first.mean / 2.0;
    Ok(transcript
        .iter()
        .find(|p| p.mean < threshold)
        .map(|p| p.time)
        .unwrap_or(f64::INFINITY))
}

/// Transient time of the one-time circuit: identical to
/// `transient_metric(gr_trajectory(..))` on the same grid, but stops
/// sampling at the first crossing.
pub fn gr_transient_time(
    lattice: &crate::lattice::Lattice,
    t_max: f64,
    samples: usize,
    initial: &StateVector,
    cfg: &PropagatorConfig,
) -> Result<f64> {
    let threshold = {
        let mut flipped = initial.clone();
        flipped.flip_spin(lattice.contact_spin());
        spectrum_of(&flipped).moments()?.0 / 2.0
    };
    let transcript = gr_trajectory(lattice, t_max, samples, initial, cfg, Some(threshold))?;
    transient_metric(&transcript)
}
