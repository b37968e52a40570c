use mesospin::entanglement::*;
use mesospin::lattice::{build_lattice, CouplingMode};
use mesospin::magnification::magnify_gr;
use mesospin::measurement::{joint_pipeline, joint_pipeline_mixed, PhasePovm};
use mesospin::state::{mixed_polarized, polarized_state};
use std::time::Instant;

fn main() {
    let cfg = Default::default();
    let pi2 = 2.0 * std::f64::consts::PI;

    // criterion 3 exact part
    for nh in [6usize, 8, 10] {
        let (lat, _) = build_lattice(&[nh], CouplingMode::FullDipolar).unwrap();
        let init = polarized_state(nh).unwrap();
        let res = magnify_gr(&lat, pi2 * nh as f64, &init, &cfg).unwrap();
        let out = joint_pipeline(&res.branch, &res.branch, &PhasePovm::canonical(2 * nh)).unwrap();
        println!("C3 N={:2}: F={:.4} p={:.4} pop={:.4} coh_rel={:.4}", 2 * nh, out.fidelity(), out.p_select, out.population(), out.coherence_rel());
    }

    // criterion 4: Lneg at eps=0 and eps curve
    for nh in [4usize, 6, 8, 10] {
        let t0 = Instant::now();
        let (lat, _) = build_lattice(&[nh], CouplingMode::FullDipolar).unwrap();
        let init = polarized_state(nh).unwrap();
        let res = magnify_gr(&lat, pi2 * nh as f64, &init, &cfg).unwrap();
        let rho = qubit_mss_pure(&res.branch).unwrap();
        let lneg = log_negativity(&rho, &[nh]).unwrap();
        print!("C4 Nh={nh}: Lneg(0)={lneg:.5}");
        for eps in [0.1, 0.2] {
            let mix = mixed_polarized(nh, eps).unwrap();
            let rho = qubit_mss_mixed(&mix, &lat, pi2 * nh as f64, &cfg).unwrap();
            let l = log_negativity(&rho, &[nh]).unwrap();
            print!("  Lneg({eps})={l:.5}");
        }
        println!("  [{:.1}s]", t0.elapsed().as_secs_f64());
    }

    // criterion 6: loss asymptote at Nh = 12, 14
    for nh in [12usize, 14] {
        let t0 = Instant::now();
        let (lat, _) = build_lattice(&[nh], CouplingMode::FullDipolar).unwrap();
        let init = polarized_state(nh).unwrap();
        let res = magnify_gr(&lat, pi2 * nh as f64, &init, &cfg).unwrap();
        let ep = average_loss_entropy(&res.branch).unwrap();
        let bound = loss_fidelity_bound(&res.branch, &res.branch).unwrap();
        println!("C6 Nh={nh}: e_p_avg={ep:.4} (target 2/3 +- 0.05), bound={bound:.4} (target 0.75 +- 0.03) [{:.0}s]", t0.elapsed().as_secs_f64());
    }

    // criterion 10: mixed coherence at N=20 vs N=8
    let t0 = Instant::now();
    for nh in [4usize, 10] {
        let (lat, _) = build_lattice(&[nh], CouplingMode::FullDipolar).unwrap();
        print!("C10 N={:2}: ", 2 * nh);
        for eps in [0.0, 0.05, 0.1, 0.2] {
            let mix = mixed_polarized(nh, eps).unwrap();
            let povm = PhasePovm::with_polarization(2 * nh, eps).unwrap();
            let out = joint_pipeline_mixed(&mix, &mix, &lat, pi2 * nh as f64, &povm, &cfg).unwrap();
            print!("rc({eps})={:.4} ", out.outcome.coherence_rel());
        }
        println!();
    }
    println!("C10 time {:.0}s", t0.elapsed().as_secs_f64());
}
