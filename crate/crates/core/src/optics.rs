//! Gaussian wavepackets and photon sources.
//!
//! Intensity profiles use the `exp[-(x - x_c)^2 / sigma^2]` convention, so the
//! RMS width of a profile is `sigma / sqrt(2)`. A transform-limited pulse has
//! `sigma_t = 1 / sigma_omega` and saturates `rms_t * rms_omega = 1/2`.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measurement (or coding) basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Time,
    Frequency,
}

impl Basis {
    /// Fair coin: `Frequency` on heads.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random_bool(0.5) {
            Basis::Frequency
        } else {
            Basis::Time
        }
    }
}

/// A single photon as seen by the rest of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photon {
    /// Optical frequency (Hz).
    pub nu: f64,
    /// Time relative to the slot reference (s).
    pub t: f64,
}

#[inline]
pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    let z: f64 = StandardNormal.sample(rng);
    mean + sd * z
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse {
    /// Angular center frequency (rad/s).
    pub center_freq: f64,
    pub center_time: f64,
    /// Spectral profile parameter (rad/s).
    pub sigma_omega: f64,
    /// Temporal profile parameter (s).
    pub sigma_t: f64,
}

impl GaussianPulse {
    pub fn transform_limited(center_freq: f64, center_time: f64, sigma_omega: f64) -> Self {
        Self {
            center_freq,
            center_time,
            sigma_omega,
            sigma_t: 1.0 / sigma_omega,
        }
    }

    pub fn rms_time(&self) -> f64 {
        self.sigma_t / SQRT_2
    }

    pub fn rms_omega(&self) -> f64 {
        self.sigma_omega / SQRT_2
    }

    /// Draw the photon's frequency and time from the (unchirped) intensity profiles.
    pub fn sample_photon<R: Rng + ?Sized>(&self, rng: &mut R) -> Photon {
        let omega = normal(rng, self.center_freq, self.rms_omega());
        let t = normal(rng, self.center_time, self.rms_time());
        Photon {
            nu: omega / (2.0 * PI),
            t,
        }
    }
}

/// Prepare-and-measure sources: narrowband S1 (frequency coding) and
/// broadband S2 (time coding). All widths angular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmSourceParams {
    pub omega0: f64,
    pub sigma_omega1: f64,
    pub sigma_omega2: f64,
}

impl PmSourceParams {
    /// Rejects nonphysical widths; returns warnings for a poor S1/S2 match.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.omega0 > 0.0) {
            return Err(Error::domain("omega0", "must be positive"));
        }
        if !(self.sigma_omega1 > 0.0 && self.sigma_omega2 > 0.0) {
            return Err(Error::domain("sigma_omega", "source widths must be positive"));
        }
        let mut warnings = Vec::new();
        let ratio = self.sigma_omega1 / self.sigma_omega2;
        if ratio >= 1.0 {
            warnings.push(format!(
                "S1 linewidth is not narrower than S2 bandwidth (ratio {ratio:.3}); coding ensembles are distinguishable"
            ));
        } else if ratio > 0.1 {
            warnings.push(format!(
                "S1/S2 width ratio {ratio:.3} > 0.1; ensemble covariances differ by ~{:.1e}",
                ratio * ratio
            ));
        }
        Ok(warnings)
    }
}

/// One prepared state: coding basis, the value Alice keeps, and the emitted pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmState {
    pub basis: Basis,
    /// Angular frequency (rad/s) for `Frequency`, time delay (s) for `Time`.
    pub encoded_value: f64,
    pub pulse: GaussianPulse,
}

/// Alice's preparation step: a fair basis coin, then a Gaussian-modulated
/// center frequency (S1) or time delay (S2).
pub fn sample_pm_state<R: Rng + ?Sized>(rng: &mut R, params: &PmSourceParams) -> PmState {
    let basis = Basis::random(rng);
    match basis {
        Basis::Frequency => {
            // density exp[-(b - omega0)^2 / sigma_omega2^2]
            let b = normal(rng, params.omega0, params.sigma_omega2 / SQRT_2);
            PmState {
                basis,
                encoded_value: b,
                pulse: GaussianPulse::transform_limited(b, 0.0, params.sigma_omega1),
            }
        }
        Basis::Time => {
            // density exp[-sigma_omega1^2 b^2]
            let b = normal(rng, 0.0, 1.0 / (SQRT_2 * params.sigma_omega1));
            PmState {
                basis,
                encoded_value: b,
                pulse: GaussianPulse::transform_limited(params.omega0, b, params.sigma_omega2),
            }
        }
    }
}

/// Second moments of an emitted-photon ensemble over `(t, omega)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance2 {
    pub var_t: f64,
    pub var_omega: f64,
    pub cov: f64,
}

impl Covariance2 {
    pub fn entries(&self) -> [f64; 3] {
        [self.var_t, self.var_omega, self.cov]
    }

    /// Largest entrywise relative difference (zero entries compare as equal).
    pub fn max_relative_difference(&self, other: &Covariance2) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(&a, b)| {
                let scale = a.abs().max(b.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Closed-form covariance of the photon ensemble emitted in one coding basis,
/// averaged over Alice's modulation.
pub fn ensemble_covariance(params: &PmSourceParams, basis: Basis) -> Covariance2 {
    let s1 = params.sigma_omega1;
    let s2 = params.sigma_omega2;
    match basis {
        Basis::Frequency => Covariance2 {
            var_t: 1.0 / (2.0 * s1 * s1),
            var_omega: (s1 * s1 + s2 * s2) / 2.0,
            cov: 0.0,
        },
        Basis::Time => Covariance2 {
            var_t: 1.0 / (2.0 * s1 * s1) + 1.0 / (2.0 * s2 * s2),
            var_omega: s2 * s2 / 2.0,
            cov: 0.0,
        },
    }
}

/// Pairs per pump pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emission {
    /// Exactly one pair per pulse.
    Fixed,
    /// Poisson-distributed with the given mean.
    Poisson(f64),
}

/// Energy-time entangled pair source. Widths are RMS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdcParams {
    /// Pump center frequency (Hz).
    pub nu_p0: f64,
    pub pump_linewidth: f64,
    pub pump_duration: f64,
    pub bandwidth_a: f64,
    pub bandwidth_b: f64,
    pub emission: Emission,
    /// Overrides the pair time-correlation width `1 / (2 pi bandwidth_a)`.
    pub pair_time_correlation: Option<f64>,
}

impl SpdcParams {
    /// RMS of `t_B - t_A`.
    pub fn tau_corr(&self) -> f64 {
        match self.pair_time_correlation {
            Some(tau) => tau,
            None if self.bandwidth_a > 0.0 => 1.0 / (2.0 * PI * self.bandwidth_a),
            None => 0.0,
        }
    }

    /// Degenerate daughter center frequency `nu_P0 / 2`.
    pub fn daughter_center(&self) -> f64 {
        self.nu_p0 / 2.0
    }

    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.nu_p0 > 0.0) {
            return Err(Error::domain("nu_p0", "pump frequency must be positive"));
        }
        let widths = [
            self.pump_linewidth,
            self.pump_duration,
            self.bandwidth_a,
            self.bandwidth_b,
        ];
        if widths.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::domain("spdc", "widths must be nonnegative"));
        }
        if let Emission::Poisson(mu) = self.emission {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(Error::domain("mean_pairs_per_pulse", "must be finite and nonnegative"));
            }
        }
        if matches!(self.pair_time_correlation, Some(t) if !(t >= 0.0)) {
            return Err(Error::domain("pair_time_correlation", "must be nonnegative"));
        }
        let mut warnings = Vec::new();
        if self.pump_linewidth > 0.01 * self.bandwidth_a {
            warnings.push(format!(
                "pump linewidth {:.3e} Hz is not << daughter bandwidth {:.3e} Hz",
                self.pump_linewidth, self.bandwidth_a
            ));
        }
        let scale = self.bandwidth_a.max(self.bandwidth_b);
        if scale > 0.0 && (self.bandwidth_a - self.bandwidth_b).abs() > 0.01 * scale {
            warnings.push("daughter bandwidths differ by more than 1%".to_string());
        }
        if self.pump_linewidth * self.pump_duration < 1.0 / (4.0 * PI) * (1.0 - 1e-9) {
            warnings.push(format!(
                "pump linewidth x duration = {:.3e} is below the transform limit 1/(4 pi)",
                self.pump_linewidth * self.pump_duration
            ));
        }
        Ok(warnings)
    }
}

/// One daughter photon at the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprPair {
    pub pair_id: u64,
    /// Pump frequency of this pair; `photon_a.nu + photon_b.nu == nu_p` exactly.
    pub nu_p: f64,
    pub t_pair: f64,
    pub photon_a: Photon,
    pub photon_b: Photon,
}

/// Draw one pair from a pump pulse centered at `t_center`.
pub fn sample_pair<R: Rng + ?Sized>(
    rng: &mut R,
    params: &SpdcParams,
    pair_id: u64,
    t_center: f64,
) -> EprPair {
    let nu_p = normal(rng, params.nu_p0, params.pump_linewidth);
    let t_pair = normal(rng, t_center, params.pump_duration);
    let nu_a = normal(rng, params.daughter_center(), params.bandwidth_a);
    let nu_b = nu_p - nu_a;
    let eps = normal(rng, 0.0, params.tau_corr());
    EprPair {
        pair_id,
        // Re-deriving the sum makes energy conservation hold bit-for-bit; it moves
        // the pump sample by at most one ulp.
        nu_p: nu_a + nu_b,
        t_pair,
        photon_a: Photon { nu: nu_a, t: t_pair },
        photon_b: Photon {
            nu: nu_b,
            t: t_pair + eps,
        },
    }
}

/// Number of pairs produced by one pump pulse.
pub fn sample_pair_count<R: Rng + ?Sized>(rng: &mut R, emission: Emission) -> u64 {
    match emission {
        Emission::Fixed => 1,
        Emission::Poisson(mu) if mu <= 0.0 => 0,
        Emission::Poisson(mu) => {
            let d = Poisson::new(mu).expect("validated Poisson mean");
            let k: f64 = d.sample(rng);
            k as u64
        }
    }
}

/// Pairs emitted by `pulses` pump pulses, each pulse centered at t = 0 of its slot.
pub fn sample_epr_pairs<R: Rng + ?Sized>(
    rng: &mut R,
    params: &SpdcParams,
    pulses: u64,
) -> Vec<EprPair> {
    let mut out = Vec::with_capacity(pulses as usize);
    let mut next_id = 0;
    for _ in 0..pulses {
        for _ in 0..sample_pair_count(rng, params.emission) {
            out.push(sample_pair(rng, params, next_id, 0.0));
            next_id += 1;
        }
    }
    out
}
