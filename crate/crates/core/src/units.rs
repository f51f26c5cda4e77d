//! Physical constants, SI conversions and the time/frequency to
//! position/wave-vector mapping.
//!
//! Everything inside the crate is in SI base units (s, m, Hz, rad/m).
//! Engineering units such as `ps/nm` or `dB/km` only exist at the
//! configuration boundary, where [`parse_quantity`] and the serde helper
//! modules at the bottom of this file translate them.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Group index of standard single-mode fiber near 1550 nm.
pub const DEFAULT_REFRACTIVE_INDEX: f64 = 1.468;

/// Telecom C-band center wavelength (m).
pub const DEFAULT_WAVELENGTH: f64 = 1550e-9;

/// Refractive index and operating wavelength of the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    pub refractive_index: f64,
    #[serde(with = "length_nm")]
    pub wavelength: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            refractive_index: DEFAULT_REFRACTIVE_INDEX,
            wavelength: DEFAULT_WAVELENGTH,
        }
    }
}

impl PhysParams {
    pub fn new(refractive_index: f64, wavelength: f64) -> Result<Self> {
        let p = Self {
            refractive_index,
            wavelength,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.refractive_index > 0.0 && self.refractive_index.is_finite()) {
            return Err(Error::domain("refractive_index", "must be positive"));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::domain("wavelength", "must be positive"));
        }
        Ok(())
    }

    pub fn c(&self) -> f64 {
        SPEED_OF_LIGHT
    }

    /// Center frequency `c / lambda0` (Hz).
    pub fn nu0(&self) -> f64 {
        SPEED_OF_LIGHT / self.wavelength
    }

    /// Phase velocity in the medium (m/s).
    pub fn medium_speed(&self) -> f64 {
        SPEED_OF_LIGHT / self.refractive_index
    }
}

/// Arrival time to position, `X = c t / n`.
pub fn time_to_position(t: f64, p: &PhysParams) -> f64 {
    p.medium_speed() * t
}

/// Inverse of [`time_to_position`].
pub fn position_to_time(x: f64, p: &PhysParams) -> f64 {
    x / p.medium_speed()
}

/// Optical frequency to wave vector, `K = 2 pi n nu / c`.
pub fn freq_to_wavevector(nu: f64, p: &PhysParams) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::domain("frequency", format!("{nu} Hz is not positive")));
    }
    Ok(wavevector_offset(nu, p))
}

/// The linear part of [`freq_to_wavevector`], valid for offsets of either sign.
pub(crate) fn wavevector_offset(delta_nu: f64, p: &PhysParams) -> f64 {
    2.0 * PI * p.refractive_index * delta_nu / SPEED_OF_LIGHT
}

/// Gaussian full width at half maximum to the RMS-like width `w / (2 sqrt(ln 2))`.
pub fn fwhm_to_rms(fwhm: f64) -> Result<f64> {
    if !(fwhm >= 0.0) {
        return Err(Error::domain("fwhm", format!("{fwhm} is negative")));
    }
    Ok(fwhm / (2.0 * LN_2.sqrt()))
}

/// Group-delay slope `dT/dnu` (s/Hz) of an element with wavelength dispersion
/// `d_lambda` (s/m), using `d_lambda_wl = (lambda^2 / c) d_nu`.
pub fn dispersion_to_freq_slope(d_lambda: f64, p: &PhysParams) -> f64 {
    p.wavelength * p.wavelength * d_lambda / SPEED_OF_LIGHT
}

/// Wavelength interval to frequency interval at the operating wavelength.
pub fn wavelength_span_to_freq(d_lambda_wl: f64, p: &PhysParams) -> f64 {
    SPEED_OF_LIGHT * d_lambda_wl / (p.wavelength * p.wavelength)
}

/// Closed interval `[min, max]`. Infinite bounds are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub min: f64,
    pub max: f64,
}

impl Window {
    pub const UNBOUNDED: Window = Window {
        min: f64::NEG_INFINITY,
        max: f64::INFINITY,
    };

    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min < max) {
            return Err(Error::domain("window", format!("[{min}, {max}] is empty")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self {
            min: self.min + by,
            max: self.max + by,
        }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// Physical dimension of a configuration quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Frequency,
    Length,
    Dispersion,
    Decibel,
    Attenuation,
}

impl Dimension {
    /// Accepted suffixes and their factor to SI.
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Time => &[
                ("fs", 1e-15),
                ("ps", 1e-12),
                ("ns", 1e-9),
                ("us", 1e-6),
                ("ms", 1e-3),
                ("s", 1.0),
            ],
            Dimension::Frequency => &[
                ("Hz", 1.0),
                ("kHz", 1e3),
                ("MHz", 1e6),
                ("GHz", 1e9),
                ("THz", 1e12),
            ],
            Dimension::Length => &[
                ("pm", 1e-12),
                ("nm", 1e-9),
                ("um", 1e-6),
                ("mm", 1e-3),
                ("m", 1.0),
                ("km", 1e3),
            ],
            Dimension::Dispersion => &[("ps/nm", 1e-3), ("s/m", 1.0)],
            Dimension::Decibel => &[("dB", 1.0)],
            // stored as dB per meter
            Dimension::Attenuation => &[("dB/km", 1e-3), ("dB/m", 1.0)],
        }
    }

    fn factor(self, suffix: &str) -> Option<f64> {
        self.units()
            .iter()
            .find(|(s, _)| *s == suffix)
            .map(|&(_, f)| f)
    }
}

/// `v * factor` for a power-of-ten factor, dividing by the exact reciprocal
/// when the factor is below one so that `1550 nm` is the same double as `1550e-9`.
fn scale(v: f64, factor: f64) -> f64 {
    if factor < 1.0 {
        v / (1.0 / factor).round()
    } else {
        v * factor
    }
}

/// Parse `"70 ps"`, `"7000ps/nm"`, `"-inf"` or a bare number (taken as SI).
pub fn parse_quantity(input: &str, dim: Dimension) -> Result<f64> {
    let text = input.trim();
    let err = |reason: String| Error::Quantity {
        input: input.to_string(),
        reason,
    };
    let mut units: Vec<_> = dim.units().to_vec();
    units.sort_by_key(|(s, _)| std::cmp::Reverse(s.len()));
    let (number, factor) = units
        .iter()
        .find_map(|&(suffix, f)| text.strip_suffix(suffix).map(|n| (n, f)))
        .unwrap_or((text, 1.0));
    match number.trim().parse::<f64>() {
        Ok(v) => Ok(scale(v, factor)),
        Err(_) if number.len() == text.len() => Err(err(format!("unknown unit for {dim:?}"))),
        Err(_) => Err(err("not a number".into())),
    }
}

/// Render `value` (SI) in `unit`, trimming float noise to 12 significant digits.
pub fn format_quantity(value: f64, dim: Dimension, unit: &str) -> String {
    if value.is_infinite() {
        return if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let factor = dim.factor(unit).expect("display unit belongs to dimension");
    let scaled: f64 = format!("{:.11e}", value / factor).parse().unwrap_or(value / factor);
    format!("{scaled} {unit}")
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawQuantity {
    Number(f64),
    Text(String),
}

fn deserialize_quantity<'de, D: Deserializer<'de>>(d: D, dim: Dimension) -> Result<f64, D::Error> {
    match RawQuantity::deserialize(d)? {
        RawQuantity::Number(v) => Ok(v),
        RawQuantity::Text(s) => parse_quantity(&s, dim).map_err(serde::de::Error::custom),
    }
}

macro_rules! quantity_serde {
    ($(#[$doc:meta])* $module:ident, $dim:expr, $unit:literal) => {
        $(#[$doc])*
        pub mod $module {
            use super::*;

            pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&format_quantity(*v, $dim, $unit))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                deserialize_quantity(d, $dim)
            }

            /// Same, for `Option<f64>` fields (`null` means unset).
            pub mod option {
                use super::*;

                pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
                    match v {
                        Some(v) => s.serialize_str(&format_quantity(*v, $dim, $unit)),
                        None => s.serialize_none(),
                    }
                }

                pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
                    match Option::<RawQuantity>::deserialize(d)? {
                        None => Ok(None),
                        Some(RawQuantity::Number(v)) => Ok(Some(v)),
                        Some(RawQuantity::Text(t)) => parse_quantity(&t, $dim)
                            .map(Some)
                            .map_err(serde::de::Error::custom),
                    }
                }
            }

            /// `[min, max]` pairs.
            pub mod window {
                use super::*;

                pub fn serialize<S: Serializer>(w: &Window, s: S) -> Result<S::Ok, S::Error> {
                    [format_quantity(w.min, $dim, $unit), format_quantity(w.max, $dim, $unit)]
                        .serialize(s)
                }

                pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Window, D::Error> {
                    let [lo, hi] = <[RawQuantity; 2]>::deserialize(d)?;
                    let conv = |r: RawQuantity| match r {
                        RawQuantity::Number(v) => Ok(v),
                        RawQuantity::Text(t) => parse_quantity(&t, $dim),
                    };
                    let lo = conv(lo).map_err(serde::de::Error::custom)?;
                    let hi = conv(hi).map_err(serde::de::Error::custom)?;
                    Window::new(lo, hi).map_err(serde::de::Error::custom)
                }
            }
        }
    };
}

quantity_serde!(time_ps, Dimension::Time, "ps");
quantity_serde!(time_ns, Dimension::Time, "ns");
quantity_serde!(freq_hz, Dimension::Frequency, "Hz");
quantity_serde!(freq_mhz, Dimension::Frequency, "MHz");
quantity_serde!(freq_ghz, Dimension::Frequency, "GHz");
quantity_serde!(freq_thz, Dimension::Frequency, "THz");
quantity_serde!(length_pm, Dimension::Length, "pm");
quantity_serde!(length_nm, Dimension::Length, "nm");
quantity_serde!(length_km, Dimension::Length, "km");
quantity_serde!(dispersion_ps_nm, Dimension::Dispersion, "ps/nm");
quantity_serde!(decibel, Dimension::Decibel, "dB");
quantity_serde!(attenuation_db_km, Dimension::Attenuation, "dB/km");
