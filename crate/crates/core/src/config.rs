//! Session configuration.
//!
//! Config files are JSON with unit-suffixed strings (`"jitter_fwhm": "70 ps"`).
//! Any field may be omitted; omitted fields take the defaults of the chosen
//! mode, which `ftqkd print-config pm|epr` prints in full.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::{ChannelSpec, FilterSpec};
use crate::error::{Error, Result};
use crate::measurement::{DetectorSpec, DispersiveElement, GratingBins};
use crate::optics::{Emission, PmSourceParams, SpdcParams};
use crate::units::{self, wavelength_span_to_freq, PhysParams, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Prepare-and-measure: Alice modulates single-photon pulses.
    Pm,
    /// Entanglement-based, pair source inside Alice's station.
    #[serde(alias = "epr")]
    EprSourceAtAlice,
    /// Entanglement-based, pair source halfway along the link.
    EprMidpoint,
}

impl Mode {
    pub fn is_epr(self) -> bool {
        !matches!(self, Mode::Pm)
    }
}

/// How pairwise noise enters the key elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// `q_B = q_A + N(0, Δ²/2)` with the analytic Δ², for clicks that are not dark.
    Eq7,
    /// Key elements come straight from the simulated detector readings.
    Microscopic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreqScheme {
    /// Dispersive element in front of a time-resolving detector.
    Dispersive,
    /// Grating with a detector array.
    Grating,
}

/// Prepare-and-measure sources. Widths are the `sigma` of
/// `exp[-(ν - ν_c)² / sigma²]` profiles, in ordinary frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmSourceConfig {
    /// Narrowband source used for frequency coding.
    #[serde(with = "units::freq_mhz")]
    pub linewidth_s1: f64,
    /// Broadband source used for time coding.
    #[serde(with = "units::freq_ghz")]
    pub bandwidth_s2: f64,
}

impl PmSourceConfig {
    pub fn params(&self, phys: &PhysParams) -> PmSourceParams {
        PmSourceParams {
            omega0: 2.0 * PI * phys.nu0(),
            sigma_omega1: 2.0 * PI * self.linewidth_s1,
            sigma_omega2: 2.0 * PI * self.bandwidth_s2,
        }
    }
}

/// Pair source. Widths are RMS; the pump is centered at twice the link frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdcConfig {
    #[serde(with = "units::freq_mhz")]
    pub pump_linewidth: f64,
    #[serde(with = "units::time_ns")]
    pub pump_duration: f64,
    #[serde(with = "units::freq_ghz")]
    pub bandwidth_a: f64,
    #[serde(with = "units::freq_ghz")]
    pub bandwidth_b: f64,
    /// `null` emits exactly one pair per pulse; a number draws a Poisson count.
    pub mean_pairs_per_pulse: Option<f64>,
    /// `null` uses `1 / (2π bandwidth_a)`.
    #[serde(with = "units::time_ps::option")]
    pub pair_time_correlation: Option<f64>,
}

impl SpdcConfig {
    pub fn params(&self, phys: &PhysParams) -> SpdcParams {
        SpdcParams {
            nu_p0: 2.0 * phys.nu0(),
            pump_linewidth: self.pump_linewidth,
            pump_duration: self.pump_duration,
            bandwidth_a: self.bandwidth_a,
            bandwidth_b: self.bandwidth_b,
            emission: match self.mean_pairs_per_pulse {
                None => Emission::Fixed,
                Some(mu) => Emission::Poisson(mu),
            },
            pair_time_correlation: self.pair_time_correlation,
        }
    }
}

/// A dispersive element centered on the link frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersiveConfig {
    #[serde(with = "units::dispersion_ps_nm")]
    pub dispersion: f64,
    #[serde(with = "units::decibel")]
    pub insertion_loss: f64,
}

impl DispersiveConfig {
    pub fn element(&self, phys: &PhysParams) -> DispersiveElement {
        DispersiveElement {
            d_lambda: self.dispersion,
            nu0: phys.nu0(),
            insertion_loss_db: self.insertion_loss,
        }
    }
}

/// Grating and detector array, specified in wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GratingConfig {
    /// RMS spectral resolution.
    #[serde(with = "units::length_pm")]
    pub resolution: f64,
    #[serde(with = "units::length_pm")]
    pub bin_width: f64,
    pub n_bins: u32,
}

impl GratingConfig {
    /// Bins centered on the link frequency.
    pub fn bins(&self, phys: &PhysParams) -> GratingBins {
        GratingBins::centered(
            phys.nu0(),
            wavelength_span_to_freq(self.bin_width, phys),
            self.n_bins,
            wavelength_span_to_freq(self.resolution, phys),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub mode: Mode,
    pub pulses: u64,
    pub seed: u64,
    pub phys: PhysParams,
    pub pm_source: PmSourceConfig,
    pub spdc_source: SpdcConfig,
    /// Total link. The midpoint mode splits it into two equal halves.
    pub channel: ChannelSpec,
    /// Entrance filter in front of each receiver.
    pub filter: FilterSpec,
    pub detector_a: DetectorSpec,
    pub detector_b: DetectorSpec,
    pub freq_scheme: FreqScheme,
    pub dispersive_a: DispersiveConfig,
    pub dispersive_b: DispersiveConfig,
    pub grating: GratingConfig,
    /// Largest accepted `|T_A - T_B|`; `null` derives it from the timing budget.
    #[serde(with = "units::time_ps::option")]
    pub coincidence_window: Option<f64>,
    /// Scale length (m) of the dimensionless map; `null` uses `sqrt(Δx / Δk)`.
    pub scale_length: Option<f64>,
    pub test_fraction: f64,
    pub f_ec: f64,
    pub noise_mode: NoiseMode,
    /// Process slot batches on the thread pool. Results do not depend on it.
    pub parallel: bool,
}

impl SessionConfig {
    pub fn default_for(mode: Mode) -> Self {
        let epr = mode.is_epr();
        let detector = DetectorSpec {
            jitter_fwhm: if epr { 70e-12 } else { 40e-12 },
            efficiency: 0.8,
            dark_count_prob: 1e-6,
            gate_window: Window {
                min: -100e-9,
                max: 100e-9,
            },
        };
        Self {
            mode,
            pulses: 100_000,
            seed: 1,
            phys: PhysParams::default(),
            pm_source: PmSourceConfig {
                linewidth_s1: 20e6,
                bandwidth_s2: 20e9,
            },
            spdc_source: SpdcConfig {
                pump_linewidth: 10e6,
                pump_duration: 10e-9,
                bandwidth_a: 100e9,
                bandwidth_b: 100e9,
                mean_pairs_per_pulse: None,
                pair_time_correlation: None,
            },
            channel: ChannelSpec::default(),
            filter: FilterSpec::pass_all(),
            detector_a: detector,
            detector_b: detector,
            freq_scheme: if epr {
                FreqScheme::Dispersive
            } else {
                FreqScheme::Grating
            },
            dispersive_a: DispersiveConfig {
                dispersion: 7.0,
                insertion_loss: 5.0,
            },
            dispersive_b: DispersiveConfig {
                dispersion: -7.0,
                insertion_loss: 5.0,
            },
            grating: GratingConfig {
                resolution: 1e-12,
                bin_width: 1e-12,
                n_bins: 2048,
            },
            coincidence_window: None,
            scale_length: None,
            test_fraction: 0.5,
            f_ec: 1.0,
            noise_mode: NoiseMode::Eq7,
            parallel: true,
        }
    }

    /// Parse JSON, filling omitted fields with the defaults of its `mode`.
    pub fn from_json(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text).map_err(|e| Error::config("", e.to_string()))?;
        if !user.is_object() {
            return Err(Error::config("", "expected a JSON object"));
        }
        let mode = match user.get("mode") {
            None => Mode::EprSourceAtAlice,
            Some(m) => serde_json::from_value(m.clone())
                .map_err(|e| Error::config("mode", e.to_string()))?,
        };
        let mut merged = serde_json::to_value(Self::default_for(mode)).expect("config serializes");
        merge(&mut merged, user);
        let cfg: Self = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Check every field, returning advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.pulses == 0 {
            return Err(Error::config("pulses", "must be at least 1"));
        }
        if self.pulses >= 1 << 56 {
            return Err(Error::config("pulses", "must be below 2^56"));
        }
        self.phys.validate().map_err(|e| at("phys", e))?;
        self.channel.validate().map_err(|e| at("channel", e))?;
        self.detector_a.validate().map_err(|e| at("detector_a", e))?;
        self.detector_b.validate().map_err(|e| at("detector_b", e))?;
        if !(self.test_fraction > 0.0 && self.test_fraction <= 1.0) {
            return Err(Error::config("test_fraction", "must lie in (0, 1]"));
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(Error::config("f_ec", "must be finite and at least 1"));
        }
        if let Some(w) = self.coincidence_window {
            if !(w > 0.0) {
                return Err(Error::config("coincidence_window", "must be positive"));
            }
        }
        if let Some(s) = self.scale_length {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config("scale_length", "must be positive and finite"));
            }
        }
        let mut warnings = Vec::new();
        match self.freq_scheme {
            FreqScheme::Dispersive => {
                for (name, d) in [("dispersive_a", &self.dispersive_a), ("dispersive_b", &self.dispersive_b)] {
                    d.element(&self.phys).validate().map_err(|e| at(name, e))?;
                    if d.dispersion == 0.0 {
                        return Err(Error::config(format!("{name}.dispersion"), "must be nonzero"));
                    }
                }
            }
            FreqScheme::Grating => {
                self.grating.bins(&self.phys).validate().map_err(|e| at("grating", e))?;
            }
        }
        if self.mode.is_epr() {
            let spdc = self.spdc_source.params(&self.phys);
            warnings.extend(spdc.validate().map_err(|e| at("spdc_source", e))?);
            if self.freq_scheme == FreqScheme::Dispersive {
                let (a, b) = (self.dispersive_a.dispersion, self.dispersive_b.dispersion);
                if (a + b).abs() > 1e-9 * a.abs() {
                    warnings.push(format!(
                        "dispersive_b is not the negative of dispersive_a ({:.6e} vs {:.6e} s/m); \
                         the spectral spread does not cancel in T_A - T_B",
                        b, a
                    ));
                }
            }
        } else {
            let pm = self.pm_source.params(&self.phys);
            warnings.extend(pm.validate().map_err(|e| at("pm_source", e))?);
            if self.freq_scheme == FreqScheme::Dispersive {
                warnings.push(
                    "dispersive frequency readout in prepare-and-measure mode is an extension: \
                     the narrowband pulse duration maps directly into frequency error"
                        .to_string(),
                );
            }
        }
        Ok(warnings)
    }
}

/// Prefix the path of a nested validation error.
fn at(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { path, reason } if path.is_empty() => Error::config(prefix, reason),
        Error::Config { path, reason } => Error::config(format!("{prefix}.{path}"), reason),
        Error::Domain { name, reason } => Error::config(format!("{prefix}.{name}"), reason),
        other => Error::config(prefix, other.to_string()),
    }
}

/// Overlay `patch` onto `base`, recursing into objects.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}
