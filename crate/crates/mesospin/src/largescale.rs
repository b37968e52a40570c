//! Binomial extrapolation of the fidelity and population curves to MSS
//! sizes beyond exact reach.
//!
//! The model replaces the simulated half-spectra by their steady-state
//! binomial shapes — branch 0 by the shifted binomial of the partially
//! polarized register, branch 1 by the mean-zero binomial of an evenly
//! spread register — and pushes them through the same spectral sums as the
//! exact measurement pipeline. The full unit-step support is used; the
//! every-other-step parity structure of the exact branch-1 spectra is not
//! imposed, since only the extent of the spectra matters here.

use statrs::distribution::{Binomial, Discrete};

use crate::error::{Error, Result};
use crate::measurement::PhasePovm;
use crate::spectra::Spectrum;

/// Model spectra for one half of the MSS.
#[derive(Debug, Clone, Copy)]
pub struct BinomialModel {
    pub n_half: usize,
    pub eps: f64,
}

impl BinomialModel {
    pub fn new(n_half: usize, eps: f64) -> Result<Self> {
        if n_half == 0 {
            return Err(Error::InvalidArgument("empty half".into()));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidArgument(format!(
                "eps = {eps} outside [0, 1]"
            )));
        }
        Ok(BinomialModel { n_half, eps })
    }

    fn binomial_spectrum(&self, p_down: f64) -> Spectrum {
        let n = self.n_half;
        let dist = Binomial::new(p_down, n as u64).expect("checked parameters");
        let probs: Vec<f64> = (0..=n).map(|k| dist.pmf(k as u64)).collect();
        Spectrum::new(n, probs).expect("length matches")
    }

    /// Branch-0 spectrum: binomial with per-spin down probability `eps/2`,
    /// mean `(1 - eps) n/2`, sd `sqrt(n (eps/2)(1 - eps/2))`.
    pub fn p0(&self) -> Spectrum {
        self.binomial_spectrum(self.eps / 2.0)
    }

    /// Branch-1 spectrum: the mean-zero binomial with sd `sqrt(n)/2`.
    pub fn p1(&self) -> Spectrum {
        self.binomial_spectrum(0.5)
    }
}

/// Selection weights `sum sin^2(theta) P` over the convolution of two
/// half-spectra. Shared between the extrapolation and tests that feed it
/// simulated spectra.
pub fn selection_weight(s_left: &Spectrum, s_right: &Spectrum, povm: &PhasePovm) -> f64 {
    let mut acc = 0.0;
    for (ml, pl) in s_left.iter() {
        if pl == 0.0 {
            continue;
        }
        for (mr, pr) in s_right.iter() {
            acc += povm.theta(ml + mr).sin().powi(2) * pl * pr;
        }
    }
    acc
}

/// The coherence factor of the spectral factorization: the branch-0
/// average of `sum_m sin(theta(m0 + m)) P1(m)`, squared.
pub fn coherence_weight(s0: &Spectrum, s1: &Spectrum, povm: &PhasePovm) -> f64 {
    let mut avg = 0.0;
    for (m0, p0) in s0.iter() {
        if p0 == 0.0 {
            continue;
        }
        let inner: f64 = s1
            .iter()
            .map(|(m, p)| povm.theta(m0 + m).sin() * p)
            .sum();
        avg += p0 * inner;
    }
    avg * avg
}

/// One extrapolated operating point.
#[derive(Debug, Clone, Copy)]
pub struct ExtrapolatedPoint {
    pub n_total: usize,
    pub eps: f64,
    pub population: f64,
    pub coherence_rel: f64,
    pub fidelity: f64,
    pub p_select: f64,
}

/// Fidelity, population and selection probability of the one-time protocol
/// at `n_total` spins from the binomial spectral model. `theta_slope` of
/// `None` means the polarization-aware default `2 pi / (N (1 - eps))`.
pub fn extrapolate_fidelity(
    n_total: usize,
    eps: f64,
    theta_slope: Option<f64>,
) -> Result<ExtrapolatedPoint> {
    if n_total < 8 || n_total % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "extrapolation needs an even total size of at least 8, got {n_total}"
        )));
    }
    let povm = match theta_slope {
        Some(slope) => PhasePovm::affine(n_total, slope, 0.0),
        None => PhasePovm::with_polarization(n_total, eps)?,
    };
    let model = BinomialModel::new(n_total / 2, eps)?;
    let p0 = model.p0();
    let p1 = model.p1();

    let g00 = selection_weight(&p0, &p0, &povm);
    let g01 = selection_weight(&p0, &p1, &povm);
    let g11 = selection_weight(&p1, &p1, &povm);
    let coh = coherence_weight(&p0, &p1, &povm);

    let w = g00 + 2.0 * g01 + g11;
    if w / 4.0 < crate::measurement::P_SELECT_FLOOR {
        return Err(Error::PostSelectionImpossible { p: w / 4.0 });
    }
    Ok(ExtrapolatedPoint {
        n_total,
        eps,
        population: 2.0 * g01 / w,
        coherence_rel: coh / g01,
        fidelity: (g01 + coh) / w,
        p_select: w / 4.0,
    })
}

/// Tabulate extrapolated points over size and polarization grids.
pub fn population_surface(
    n_grid: &[usize],
    eps_grid: &[f64],
    theta_slope: Option<f64>,
) -> Result<Vec<ExtrapolatedPoint>> {
    let mut rows = Vec::with_capacity(n_grid.len() * eps_grid.len());
    for &n in n_grid {
        for &eps in eps_grid {
            rows.push(extrapolate_fidelity(n, eps, theta_slope)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_moments_match_closed_forms() {
        for (n, eps) in [(12usize, 0.0f64), (12, 0.2), (48, 0.35)] {
            let model = BinomialModel::new(n, eps).unwrap();
            let (m0, sd0) = model.p0().moments().unwrap();
            assert!((m0 - (1.0 - eps) * n as f64 / 2.0).abs() < 1e-10);
            let expect_sd = (n as f64 * (eps / 2.0) * (1.0 - eps / 2.0)).sqrt();
            assert!((sd0 - expect_sd).abs() < 1e-10);
            let (m1, sd1) = model.p1().moments().unwrap();
            assert!(m1.abs() < 1e-10);
            assert!((sd1 - (n as f64).sqrt() / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn threshold_crossings_from_the_model() {
        // N = 24 clears the CHSH-grade threshold; fidelity then grows
        // towards one with system size.
        let f24 = extrapolate_fidelity(24, 0.0, None).unwrap();
        assert!(f24.fidelity > 0.78, "F(24) = {}", f24.fidelity);
        let mut prev = f24.fidelity;
        for n in [32, 40, 48, 64, 80, 96] {
            let f = extrapolate_fidelity(n, 0.0, None).unwrap().fidelity;
            assert!(f >= prev - 1e-9, "fidelity dipped at N = {n}");
            prev = f;
        }
        assert!(prev >= 0.95, "F(96) = {prev}");
    }

    #[test]
    fn hand_checked_value_at_n24() {
        // exact binomial sums at N = 24, eps = 0 (worked by hand):
        // sum sin^2 over P0 * P1 = 0.82983...; coherence = 0.81364...
        let p = extrapolate_fidelity(24, 0.0, None).unwrap();
        assert!((p.fidelity - 0.8462).abs() < 5e-4, "F = {}", p.fidelity);
        assert!((p.p_select - 0.4855).abs() < 5e-4, "p = {}", p.p_select);
    }

    #[test]
    fn large_system_population_saturates() {
        let p = extrapolate_fidelity(400, 0.0, None).unwrap();
        assert!(p.population >= 0.95, "population = {}", p.population);
    }

    #[test]
    fn forbidden_region_population_drops() {
        // N (1 - eps)^2 = 4: deep inside the indistinct regime
        let n = 100;
        let eps = 1.0 - (4.0f64 / n as f64).sqrt(); // 0.8
        let p = extrapolate_fidelity(n, eps, None).unwrap();
        assert!(p.population < 0.6, "population = {}", p.population);
    }

    #[test]
    fn fully_mixed_needs_explicit_slope() {
        assert!(extrapolate_fidelity(16, 1.0, None).is_err());
        // with an explicit slope the four spectra coincide and no selection
        // contrast remains: population stays near 1/2 independent of N
        let slope = 2.0 * std::f64::consts::PI / 16.0;
        let a = extrapolate_fidelity(16, 1.0, Some(slope)).unwrap();
        let b = extrapolate_fidelity(64, 1.0, Some(2.0 * std::f64::consts::PI / 64.0)).unwrap();
        assert!((a.population - 0.5).abs() < 0.05);
        assert!((b.population - 0.5).abs() < 0.05);
    }

    #[test]
    fn surface_covers_grid() {
        let rows = population_surface(&[16, 24], &[0.0, 0.1, 0.2], None).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.p_select > 0.0));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(extrapolate_fidelity(7, 0.0, None).is_err());
        assert!(extrapolate_fidelity(13, 0.0, None).is_err());
    }
}
