//! Lossy fiber with fixed delay and residual broadening, plus the entrance
//! filters that keep incoming photons inside the expected spectral and
//! temporal range.
//!
//! Polarization and phase are not modeled: frequency-time coded photons do
//! not depend on them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{normal, Photon};
use crate::units::{self, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// Fiber length (m).
    #[serde(with = "units::length_km")]
    pub length: f64,
    /// dB per meter.
    #[serde(with = "units::attenuation_db_km")]
    pub attenuation: f64,
    #[serde(with = "units::decibel")]
    pub extra_loss_db: f64,
    #[serde(with = "units::time_ns")]
    pub fixed_delay: f64,
    /// RMS of additional Gaussian timing spread (s).
    #[serde(with = "units::time_ps")]
    pub residual_broadening_rms: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            length: 25e3,
            attenuation: 0.2e-3,
            extra_loss_db: 0.0,
            fixed_delay: 0.0,
            residual_broadening_rms: 0.0,
        }
    }
}

impl ChannelSpec {
    /// A zero-length, lossless, zero-delay link.
    pub fn identity() -> Self {
        Self {
            length: 0.0,
            attenuation: 0.0,
            extra_loss_db: 0.0,
            fixed_delay: 0.0,
            residual_broadening_rms: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("length", self.length),
            ("attenuation", self.attenuation),
            ("extra_loss_db", self.extra_loss_db),
            ("residual_broadening_rms", self.residual_broadening_rms),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("{v} must be finite and nonnegative")));
            }
        }
        if !self.fixed_delay.is_finite() {
            return Err(Error::config("fixed_delay", "must be finite"));
        }
        Ok(())
    }

    pub fn loss_db(&self) -> f64 {
        self.attenuation * self.length + self.extra_loss_db
    }

    /// `eta = 10^(-loss/10)`.
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.loss_db() / 10.0)
    }

    /// The link formed by `self` followed by `next`.
    pub fn concat(&self, next: &ChannelSpec) -> ChannelSpec {
        let length = self.length + next.length;
        let attenuation = if length > 0.0 {
            (self.attenuation * self.length + next.attenuation * next.length) / length
        } else {
            0.0
        };
        ChannelSpec {
            length,
            attenuation,
            extra_loss_db: self.extra_loss_db + next.extra_loss_db,
            fixed_delay: self.fixed_delay + next.fixed_delay,
            residual_broadening_rms: self
                .residual_broadening_rms
                .hypot(next.residual_broadening_rms),
        }
    }

    /// A fraction of this link: length, extra loss and delay scale linearly,
    /// broadening variance scales linearly.
    pub fn portion(&self, fraction: f64) -> ChannelSpec {
        ChannelSpec {
            length: self.length * fraction,
            attenuation: self.attenuation,
            extra_loss_db: self.extra_loss_db * fraction,
            fixed_delay: self.fixed_delay * fraction,
            residual_broadening_rms: self.residual_broadening_rms * fraction.sqrt(),
        }
    }
}

/// Photon-wise loss with probability `1 - eta`, then delay and broadening.
/// `None` means the photon was lost.
pub fn transmit<R: Rng + ?Sized>(photon: Photon, ch: &ChannelSpec, rng: &mut R) -> Option<Photon> {
    let eta = ch.transmittance();
    if eta < 1.0 && rng.random::<f64>() >= eta {
        return None;
    }
    let t = normal(rng, photon.t + ch.fixed_delay, ch.residual_broadening_rms);
    Some(Photon { nu: photon.nu, t })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    #[serde(with = "units::time_ns::window")]
    pub time_window: Window,
    #[serde(with = "units::freq_thz::window")]
    pub freq_window: Window,
}

impl FilterSpec {
    pub fn pass_all() -> Self {
        Self {
            time_window: Window::UNBOUNDED,
            freq_window: Window::UNBOUNDED,
        }
    }

    /// The same filter with its time window moved by `delay`.
    pub fn delayed(&self, delay: f64) -> Self {
        Self {
            time_window: self.time_window.shifted(delay),
            freq_window: self.freq_window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    Spectral,
    Temporal,
}

/// Pass the photon iff its frequency and time both fall inside the windows.
pub fn apply_filter(photon: Photon, f: &FilterSpec) -> Result<Photon, Rejection> {
    if !f.freq_window.contains(photon.nu) {
        return Err(Rejection::Spectral);
    }
    if !f.time_window.contains(photon.t) {
        return Err(Rejection::Temporal);
    }
    Ok(photon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Domain, Streams};
    use crate::stats::mean_var;

    fn link(length_km: f64, extra: f64) -> ChannelSpec {
        ChannelSpec {
            length: length_km * 1e3,
            attenuation: 0.2e-3,
            extra_loss_db: extra,
            fixed_delay: 0.0,
            residual_broadening_rms: 0.0,
        }
    }

    #[test]
    fn transmittance_values() {
        assert_eq!(ChannelSpec::identity().transmittance(), 1.0);
        assert!((link(50.0, 0.0).transmittance() - 0.1).abs() < 1e-12);
        let ratio = link(50.0, 5.0).transmittance() / link(50.0, 0.0).transmittance();
        assert!((ratio - 0.316_227_766_016_837_94).abs() < 1e-12);
    }

    #[test]
    fn lossless_link_only_delays() {
        let mut ch = ChannelSpec::identity();
        ch.fixed_delay = 3.3e-6;
        let mut rng = Streams::new(1).stream(Domain::Bob, 0);
        for i in 0..100 {
            let p = Photon { nu: 1.9e14, t: i as f64 * 1e-12 };
            let out = transmit(p, &ch, &mut rng).unwrap();
            assert_eq!(out.t, p.t + ch.fixed_delay);
            assert_eq!(out.nu, p.nu);
        }
    }

    #[test]
    fn survivors_follow_binomial() {
        let ch = link(50.0, 0.0);
        let mut rng = Streams::new(2).stream(Domain::Bob, 0);
        let p = Photon { nu: 1.9e14, t: 0.0 };
        let n = 1_000_000;
        let survived = (0..n).filter(|_| transmit(p, &ch, &mut rng).is_some()).count() as f64;
        assert!((survived - 1e5).abs() < 5.0 * (1e5f64 * 0.9).sqrt());
    }

    #[test]
    fn femtosecond_broadening_is_negligible() {
        let chain_rms = 42e-12f64;
        let broadening = 10e-15f64;
        let rel_change = (chain_rms.powi(2) + broadening.powi(2)) / chain_rms.powi(2) - 1.0;
        assert!(rel_change < 1e-6);
        let mut ch = ChannelSpec::identity();
        ch.residual_broadening_rms = broadening;
        let mut rng = Streams::new(3).stream(Domain::Bob, 0);
        let ts: Vec<f64> = (0..100_000)
            .map(|_| transmit(Photon { nu: 1.0, t: 0.0 }, &ch, &mut rng).unwrap().t)
            .collect();
        let sd = mean_var(&ts).unwrap().1.sqrt();
        assert!((sd / broadening - 1.0).abs() < 0.02);
    }

    #[test]
    fn filter_windows() {
        let f = FilterSpec {
            time_window: Window::new(-1e-9, 1e-9).unwrap(),
            freq_window: Window::new(193e12, 194e12).unwrap(),
        };
        let inside = Photon { nu: 193.5e12, t: 0.0 };
        assert_eq!(apply_filter(inside, &f), Ok(inside));
        assert_eq!(
            apply_filter(Photon { nu: 192e12, t: 0.0 }, &f),
            Err(Rejection::Spectral)
        );
        assert_eq!(
            apply_filter(Photon { nu: 193.5e12, t: 2e-9 }, &f),
            Err(Rejection::Temporal)
        );
        let any = Photon { nu: 1e30, t: -1e30 };
        assert_eq!(apply_filter(any, &FilterSpec::pass_all()), Ok(any));
    }

    #[test]
    fn loss_is_basis_independent() {
        // transmission draws never see the basis; equal survival per basis
        let ch = link(50.0, 0.0);
        let streams = Streams::new(11);
        let (mut kept, mut total) = ([0u32; 2], [0u32; 2]);
        for slot in 0..200_000u64 {
            let mut rng = streams.stream(Domain::Bob, slot);
            let b = crate::optics::Basis::random(&mut rng) as usize;
            total[b] += 1;
            if transmit(Photon { nu: 1.0, t: 0.0 }, &ch, &mut rng).is_some() {
                kept[b] += 1;
            }
        }
        let eta: Vec<f64> = (0..2).map(|i| kept[i] as f64 / total[i] as f64).collect();
        let se = (0.1 * 0.9 * (1.0 / total[0] as f64 + 1.0 / total[1] as f64)).sqrt();
        assert!((eta[0] - eta[1]).abs() < 5.0 * se);
    }

    proptest::proptest! {
        #[test]
        fn transmittance_multiplies_under_concat(
            l1 in 0.0f64..2e5, l2 in 0.0f64..2e5,
            a1 in 0.0f64..1e-3, a2 in 0.0f64..1e-3,
            x1 in 0.0f64..10.0, x2 in 0.0f64..10.0,
        ) {
            let c1 = ChannelSpec { length: l1, attenuation: a1, extra_loss_db: x1, ..ChannelSpec::identity() };
            let c2 = ChannelSpec { length: l2, attenuation: a2, extra_loss_db: x2, ..ChannelSpec::identity() };
            let joint = c1.concat(&c2).transmittance();
            let prod = c1.transmittance() * c2.transmittance();
            proptest::prop_assert!((joint - prod).abs() <= 1e-12 * prod.max(1e-300) + 1e-300);
        }

        #[test]
        fn filtering_commutes_with_lossless_delay(
            t in -5e-9f64..5e-9, nu in 192e12f64..195e12, delay in -1e-6f64..1e-6,
        ) {
            let ch = ChannelSpec { fixed_delay: delay, ..ChannelSpec::identity() };
            let f = FilterSpec {
                time_window: Window::new(-1e-9, 2e-9).unwrap(),
                freq_window: Window::new(193e12, 194e12).unwrap(),
            };
            let mut rng = Streams::new(0).stream(Domain::Bob, 0);
            let p = Photon { nu, t };
            let before = apply_filter(p, &f).ok().and_then(|p| transmit(p, &ch, &mut rng));
            let after = transmit(p, &ch, &mut rng).and_then(|p| apply_filter(p, &f.delayed(delay)).ok());
            proptest::prop_assert_eq!(before.is_some(), after.is_some());
        }
    }
}
