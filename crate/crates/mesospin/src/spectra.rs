//! Collective-magnetization spectra, moments, convolution and the
//! macroscopic-distinctness ratio.
//!
//! The projectors `Pi^N(m_z)` are never materialized: binning amplitudes by
//! popcount is exact and O(2^n). Internally a spectrum is indexed by the
//! number of down spins `k`, with `m_z(k) = (n - 2k) / 2`; this keeps
//! half-integer magnetizations (odd `n`) exact.

use std::io::Write;

use crate::error::{Error, Result};
use crate::state::{DiagonalMixture, StateVector};

/// Coefficient relating the single-half distinctness ratio to the
/// whole-MSS distinguishability requirement.
pub const JOINT_DISTINCTNESS_COEFF: f64 = 1.0 + std::f64::consts::SQRT_2;

/// Probability distribution over the collective magnetization
/// `m_z in {-n/2, ..., n/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    n_spins: usize,
    /// Indexed by the number of down spins `k = 0..=n`.
    probs: Vec<f64>,
}

impl Spectrum {
    pub fn new(n_spins: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_spins + 1 {
            return Err(Error::DimensionMismatch {
                expected: n_spins + 1,
                found: probs.len(),
            });
        }
        Ok(Spectrum { n_spins, probs })
    }

    /// A unit point mass at `k` down spins.
    pub fn delta(n_spins: usize, k: usize) -> Self {
        let mut probs = vec![0.0; n_spins + 1];
        probs[k] = 1.0;
        Spectrum { n_spins, probs }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Magnetization value at down-spin count `k`.
    pub fn m_of(&self, k: usize) -> f64 {
        (self.n_spins as f64 - 2.0 * k as f64) / 2.0
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Iterate `(m_z, probability)` pairs from `+n/2` down to `-n/2`.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(k, &p)| (self.m_of(k), p))
    }

    /// Total probability mass (1 for normalized states, the squared norm of
    /// sub-normalized post-measurement branches).
    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Mean and standard deviation of the normalized distribution.
    pub fn moments(&self) -> Result<(f64, f64)> {
        let mass = self.mass();
        if mass <= 0.0 {
            return Err(Error::InvalidArgument(
                "moments of a zero-mass spectrum".into(),
            ));
        }
        let mut mean = 0.0;
        let mut second = 0.0;
        for (m, p) in self.iter() {
            mean += m * p;
            second += m * m * p;
        }
        mean /= mass;
        second /= mass;
        let var = (second - mean * mean).max(0.0);
        Ok((mean, var.sqrt()))
    }

    /// If all mass sits at a single magnetization (within `tol` residual),
    /// return that magnetization.
    pub fn as_delta(&self, tol: f64) -> Option<f64> {
        let mass = self.mass();
        let (k_max, _) = self
            .probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
        let residual = mass - self.probs[k_max];
        if residual.abs() <= tol {
            Some(self.m_of(k_max))
        } else {
            None
        }
    }

    /// Probability mass on magnetizations whose down-spin count has parity
    /// different from `parity` (0 = even, 1 = odd).
    pub fn off_parity_mass(&self, parity: u8) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(k, _)| (*k as u8 & 1) != parity)
            .map(|(_, &p)| p)
            .sum()
    }

    /// Write CSV rows `(m_z, probability)` preceded by `# key=value`
    /// metadata lines.
    pub fn write_csv<W: Write>(&self, mut w: W, metadata: &[(&str, String)]) -> Result<()> {
        writeln!(w, "# n_spins={}", self.n_spins)?;
        for (k, v) in metadata {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "m_z,probability")?;
        for (m, p) in self.iter() {
            writeln!(w, "{m},{p}")?;
        }
        Ok(())
    }
}

/// Exact magnetization spectrum of a pure state: `P(m) = sum |v_b|^2` over
/// bitmasks with that magnetization.
pub fn spectrum_of(v: &StateVector) -> Spectrum {
    let n = v.n_spins();
    let mut probs = vec![0.0; n + 1];
    for (b, a) in v.amplitudes().iter().enumerate() {
        let w = a.norm_sqr();
        if w > 0.0 {
            probs[b.count_ones() as usize] += w;
        }
    }
    Spectrum { n_spins: n, probs }
}

/// Probability-weighted average of per-term spectra for a diagonal mixture.
/// `evolved` must supply a spectrum for every kept term.
pub fn spectrum_of_mixture<F>(mix: &DiagonalMixture, evolved: F) -> Result<Spectrum>
where
    F: Fn(u64) -> Option<Spectrum>,
{
    let n = mix.n_spins();
    let mut probs = vec![0.0; n + 1];
    for &(b, p) in mix.terms() {
        let s = evolved(b).ok_or(Error::MissingMixtureTerm { bitmask: b })?;
        if s.n_spins() != n {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                found: s.n_spins() + 1,
            });
        }
        for (k, q) in s.probs().iter().enumerate() {
            probs[k] += p * q;
        }
    }
    Ok(Spectrum { n_spins: n, probs })
}

/// Distribution of `m_L + m_R`: means add, variances add.
pub fn convolve(left: &Spectrum, right: &Spectrum) -> Spectrum {
    let n = left.n_spins + right.n_spins;
    let mut probs = vec![0.0; n + 1];
    for (kl, &pl) in left.probs.iter().enumerate() {
        if pl == 0.0 {
            continue;
        }
        for (kr, &pr) in right.probs.iter().enumerate() {
            probs[kl + kr] += pl * pr;
        }
    }
    Spectrum { n_spins: n, probs }
}

/// Macroscopic-distinctness ratio of two normalized spectra:
/// `|mean_0 - mean_1| / max(sd_0 + sd_1, 1)`, in units of hbar = 1.
pub fn distinctness_ratio(s0: &Spectrum, s1: &Spectrum) -> Result<f64> {
    let (m0, sd0) = s0.moments()?;
    let (m1, sd1) = s1.moments()?;
    Ok((m0 - m1).abs() / (sd0 + sd1).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{dicke_state, polarized_state, StateVector};
    use num_complex::Complex64;

    #[test]
    fn spectrum_deltas() {
        let s = spectrum_of(&polarized_state(12).unwrap());
        assert_eq!(s.as_delta(0.0), Some(6.0));

        let s = spectrum_of(&dicke_state(12, 6).unwrap());
        assert_eq!(s.as_delta(1e-12), Some(0.0));
    }

    #[test]
    fn ghz_like_two_spin_spectrum() {
        let mut v = StateVector::zero(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        v.amplitudes_mut()[0b00] = Complex64::new(r, 0.0);
        v.amplitudes_mut()[0b11] = Complex64::new(r, 0.0);
        let s = spectrum_of(&v);
        let by_m: Vec<(f64, f64)> = s.iter().filter(|&(_, p)| p > 0.0).collect();
        assert_eq!(by_m.len(), 2);
        assert_eq!(by_m[0].0, 1.0);
        assert!((by_m[0].1 - 0.5).abs() < 1e-15);
        assert_eq!(by_m[1].0, -1.0);
        assert!((by_m[1].1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn moments_examples() {
        let s = Spectrum::delta(12, 0);
        assert_eq!(s.moments().unwrap(), (6.0, 0.0));

        // binomial(12, 1/2) centered at zero: sd = sqrt(12)/2
        let probs: Vec<f64> = (0..=12).map(|k| crate::state::binomial(12, k)).collect();
        let total: f64 = probs.iter().sum();
        let probs = probs.into_iter().map(|p| p / total).collect();
        let s = Spectrum::new(12, probs).unwrap();
        let (mean, sd) = s.moments().unwrap();
        assert!(mean.abs() < 1e-12);
        assert!((sd - 12.0_f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_polarized_moments() {
        // rho_in(12, 0.2): mean (1-eps) n/2 = 4.8, sd sqrt(n eps/2 (1-eps/2))
        let mix = crate::state::mixed_polarized(12, 0.2).unwrap();
        let s = spectrum_of_mixture(&mix, |b| {
            Some(Spectrum::delta(12, b.count_ones() as usize))
        })
        .unwrap();
        let (mean, sd) = s.moments().unwrap();
        // kept-mass truncation at 1 - 1e-6 shifts the moments at that scale
        assert!((mean - 4.8).abs() < 1e-5);
        let expected_sd = (12.0f64 * 0.1 * 0.9).sqrt();
        assert!((expected_sd - 1.0392304845413263).abs() < 1e-12);
        assert!((sd - expected_sd).abs() < 1e-4);
    }

    #[test]
    fn convolution_of_deltas() {
        let a = Spectrum::delta(4, 1); // m = +1
        let b = Spectrum::delta(4, 3); // m = -1
        let c = convolve(&a, &b);
        assert_eq!(c.as_delta(0.0), Some(0.0));
    }

    #[test]
    fn convolution_moment_arithmetic() {
        let probs: Vec<f64> = (0..=8).map(|k| crate::state::binomial(8, k) / 256.0).collect();
        let s = Spectrum::new(8, probs).unwrap();
        let (m, sd) = s.moments().unwrap();
        let c = convolve(&s, &s);
        let (mc, sdc) = c.moments().unwrap();
        assert!((mc - 2.0 * m).abs() < 1e-10);
        assert!((sdc - 2.0_f64.sqrt() * sd).abs() < 1e-10);
    }

    #[test]
    fn convolution_matches_tensor_spectrum() {
        let a = dicke_state(3, 1).unwrap();
        let mut b = StateVector::zero(2).unwrap();
        b.amplitudes_mut()[0] = Complex64::new(0.6, 0.0);
        b.amplitudes_mut()[3] = Complex64::new(0.0, 0.8);
        let joint = a.tensor(&b).unwrap();
        let direct = spectrum_of(&joint);
        let conv = convolve(&spectrum_of(&a), &spectrum_of(&b));
        for (p, q) in direct.probs().iter().zip(conv.probs()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn distinctness_examples() {
        let d6 = Spectrum::delta(12, 0);
        assert_eq!(distinctness_ratio(&d6, &d6).unwrap(), 0.0);

        // delta(8) vs (mean 0, sd 2) at N_h = 16 -> 8 / 2 = 4 = sqrt(16)
        let d8 = Spectrum::delta(16, 0);
        let probs: Vec<f64> = (0..=16)
            .map(|k| crate::state::binomial(16, k) / 65536.0)
            .collect();
        let wide = Spectrum::new(16, probs).unwrap();
        let r = distinctness_ratio(&d8, &wide).unwrap();
        assert!((r - 4.0).abs() < 1e-10);

        // single-spin-flip case: hbar floor active
        let a = Spectrum::delta(2, 0); // m = 1
        let b = Spectrum::delta(2, 1); // m = 0
        assert!((distinctness_ratio(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_spectrum_requires_all_terms() {
        let mix = crate::state::mixed_polarized(3, 0.5).unwrap();
        let err = spectrum_of_mixture(&mix, |b| {
            if b == 0 {
                None
            } else {
                Some(Spectrum::delta(3, b.count_ones() as usize))
            }
        });
        assert!(err.is_err());
    }

    #[test]
    fn csv_format() {
        let s = Spectrum::delta(2, 1);
        let mut buf = Vec::new();
        s.write_csv(&mut buf, &[("protocol", "gr".to_string())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# n_spins=2\n# protocol=gr\nm_z,probability\n"));
        assert!(text.contains("\n0,1\n"));
    }
}
