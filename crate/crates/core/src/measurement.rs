//! Detector models and the three measurement schemes: direct time of
//! arrival, grating plus detector array, and a dispersive element in front
//! of a time-resolving detector.
//!
//! Detector behavior:
//! - a real click happens with probability `efficiency` and is timestamped
//!   with Gaussian jitter (RMS from the FWHM figure);
//! - independently, a dark click happens with probability `dark_count_prob`
//!   at a uniform time inside the gate;
//! - clicks outside the gate are dropped; if two clicks remain the earlier
//!   one is reported.
//!
//! Dead time, afterpulsing and array crosstalk are not modeled.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{normal, Basis, EprPair, Photon};
use crate::rng::{Domain, Streams};
use crate::stats::{mean_var, Histogram};
use crate::units::{self, dispersion_to_freq_slope, fwhm_to_rms, PhysParams, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    #[serde(with = "units::time_ps")]
    pub jitter_fwhm: f64,
    pub efficiency: f64,
    pub dark_count_prob: f64,
    /// Accepted click times, relative to the party's time reference.
    #[serde(with = "units::time_ns::window")]
    pub gate_window: Window,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            jitter_fwhm: 70e-12,
            efficiency: 0.8,
            dark_count_prob: 1e-6,
            gate_window: Window {
                min: -100e-9,
                max: 100e-9,
            },
        }
    }
}

impl DetectorSpec {
    pub fn ideal() -> Self {
        Self {
            jitter_fwhm: 0.0,
            efficiency: 1.0,
            dark_count_prob: 0.0,
            gate_window: Window::UNBOUNDED,
        }
    }

    pub fn jitter_rms(&self) -> f64 {
        fwhm_to_rms(self.jitter_fwhm).unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.jitter_fwhm >= 0.0 && self.jitter_fwhm.is_finite()) {
            return Err(Error::config("jitter_fwhm", "must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::config("efficiency", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.dark_count_prob) {
            return Err(Error::config("dark_count_prob", "must lie in [0, 1]"));
        }
        if self.dark_count_prob > 0.0 && !self.gate_window.width().is_finite() {
            return Err(Error::config(
                "gate_window",
                "dark counts need a finite gate to be placed in",
            ));
        }
        Ok(())
    }
}

/// Frequency-to-time mapping element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersiveElement {
    /// Wavelength dispersion (s/m), signed.
    #[serde(with = "units::dispersion_ps_nm")]
    pub d_lambda: f64,
    /// Frequency with zero added delay (Hz).
    #[serde(with = "units::freq_thz")]
    pub nu0: f64,
    #[serde(with = "units::decibel")]
    pub insertion_loss_db: f64,
}

impl DispersiveElement {
    pub fn slope(&self, p: &PhysParams) -> f64 {
        dispersion_to_freq_slope(self.d_lambda, p)
    }

    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.insertion_loss_db / 10.0)
    }

    /// Frequency implied by a delay `t` if the photon left at the reference time.
    pub fn infer_frequency(&self, t: f64, p: &PhysParams) -> f64 {
        self.nu0 + t / self.slope(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu0 > 0.0) {
            return Err(Error::config("nu0", "must be positive"));
        }
        if !self.d_lambda.is_finite() {
            return Err(Error::config("d_lambda", "must be finite"));
        }
        if !(self.insertion_loss_db >= 0.0) {
            return Err(Error::config("insertion_loss_db", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Detector-array bins behind a grating (all Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingBins {
    pub nu_start: f64,
    pub bin_width: f64,
    pub n_bins: u32,
    /// RMS spectral resolution applied before binning.
    pub resolution_rms: f64,
}

impl GratingBins {
    /// `n_bins` bins of `bin_width` centered on `center`.
    pub fn centered(center: f64, bin_width: f64, n_bins: u32, resolution_rms: f64) -> Self {
        Self {
            nu_start: center - bin_width * n_bins as f64 / 2.0,
            bin_width,
            n_bins,
            resolution_rms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 {
            return Err(Error::config("bins", "need at least 2 bins"));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::config("bin_width", "must be positive"));
        }
        if !(self.resolution_rms >= 0.0) {
            return Err(Error::config("resolution", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn bin_of(&self, nu: f64) -> Option<u32> {
        let x = ((nu - self.nu_start) / self.bin_width).floor();
        (x >= 0.0 && x < self.n_bins as f64).then_some(x as u32)
    }

    pub fn center(&self, bin: u32) -> f64 {
        self.nu_start + (bin as f64 + 0.5) * self.bin_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

/// One click.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub slot_id: u64,
    pub party: Party,
    pub basis: Basis,
    /// Click time relative to the party's time reference (s).
    pub t_measured: f64,
    /// The measured value in `basis` units: arrival time (s) for `Time`,
    /// inferred optical frequency (Hz) for `Frequency`.
    pub reading: f64,
    pub is_dark: bool,
    pub spda_bin: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoClick {
    /// Nothing reached the detector (lost or filtered upstream).
    NoPhoton,
    InsertionLoss,
    Inefficiency,
    OutOfGate,
    /// Outside the detector array.
    OutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detection {
    Click(DetectionEvent),
    NoClick(NoClick),
}

impl Detection {
    pub fn event(&self) -> Option<&DetectionEvent> {
        match self {
            Detection::Click(e) => Some(e),
            Detection::NoClick(_) => None,
        }
    }
}

/// Who is measuring what in which slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tag {
    pub slot_id: u64,
    pub party: Party,
    pub basis: Basis,
}

/// Passive fair basis choice.
pub fn choose_basis<R: Rng + ?Sized>(rng: &mut R) -> Basis {
    Basis::random(rng)
}

struct RawClick {
    t: f64,
    bin: Option<u32>,
    dark: bool,
}

/// Shared detector logic. `resolve` turns a surviving photon into a click
/// candidate (or a reason for none); `dark_bin` places a dark count.
fn detect<R: Rng + ?Sized>(
    photon: Option<Photon>,
    det: &DetectorSpec,
    rng: &mut R,
    resolve: impl FnOnce(&Photon, &mut R) -> Result<Option<u32>, NoClick>,
    dark_bin: impl FnOnce(&mut R) -> Option<u32>,
) -> Result<RawClick, NoClick> {
    let real = match photon {
        None => Err(NoClick::NoPhoton),
        Some(p) => {
            if det.efficiency < 1.0 && rng.random::<f64>() >= det.efficiency {
                Err(NoClick::Inefficiency)
            } else {
                resolve(&p, rng).and_then(|bin| {
                    let t = normal(rng, p.t, det.jitter_rms());
                    if det.gate_window.contains(t) {
                        Ok(RawClick { t, bin, dark: false })
                    } else {
                        Err(NoClick::OutOfGate)
                    }
                })
            }
        }
    };
    let dark = if det.dark_count_prob > 0.0 && rng.random::<f64>() < det.dark_count_prob {
        let g = det.gate_window;
        let t = g.min + g.width() * rng.random::<f64>();
        Some(RawClick {
            t,
            bin: dark_bin(rng),
            dark: true,
        })
    } else {
        None
    };
    match (real, dark) {
        (Ok(r), Some(d)) => Ok(if d.t < r.t { d } else { r }),
        (Ok(r), None) => Ok(r),
        (Err(_), Some(d)) => Ok(d),
        (Err(why), None) => Err(why),
    }
}

fn finish(tag: Tag, raw: Result<RawClick, NoClick>, reading: impl FnOnce(&RawClick) -> f64) -> Detection {
    match raw {
        Ok(c) => Detection::Click(DetectionEvent {
            slot_id: tag.slot_id,
            party: tag.party,
            basis: tag.basis,
            t_measured: c.t,
            reading: reading(&c),
            is_dark: c.dark,
            spda_bin: c.bin,
        }),
        Err(why) => Detection::NoClick(why),
    }
}

/// Time-of-arrival measurement with a time-resolving detector.
pub fn measure_time<R: Rng + ?Sized>(
    photon: Option<Photon>,
    det: &DetectorSpec,
    tag: Tag,
    rng: &mut R,
) -> Detection {
    let raw = detect(photon, det, rng, |_, _| Ok(None), |_| None);
    finish(tag, raw, |c| c.t)
}

/// Frequency measurement by dispersion: the element delays the photon by
/// `slope * (nu - nu0)` and a time-resolving detector timestamps it.
pub fn measure_freq_dispersive<R: Rng + ?Sized>(
    photon: Option<Photon>,
    det: &DetectorSpec,
    disp: &DispersiveElement,
    phys: &PhysParams,
    tag: Tag,
    rng: &mut R,
) -> Detection {
    let slope = disp.slope(phys);
    let mut lost = false;
    let photon = photon.and_then(|p| {
        if disp.insertion_loss_db > 0.0 && rng.random::<f64>() >= disp.transmittance() {
            lost = true;
            return None;
        }
        Some(Photon {
            nu: p.nu,
            t: p.t + slope * (p.nu - disp.nu0),
        })
    });
    let raw = detect(photon, det, rng, |_, _| Ok(None), |_| None);
    let raw = match raw {
        Err(NoClick::NoPhoton) if lost => Err(NoClick::InsertionLoss),
        other => other,
    };
    finish(tag, raw, |c| disp.infer_frequency(c.t, phys))
}

/// Frequency measurement with a grating and a detector array.
/// The reading is the center of the bin that fired.
pub fn measure_freq_grating<R: Rng + ?Sized>(
    photon: Option<Photon>,
    det: &DetectorSpec,
    bins: &GratingBins,
    tag: Tag,
    rng: &mut R,
) -> Detection {
    let raw = detect(
        photon,
        det,
        rng,
        |p, rng| {
            let nu = normal(rng, p.nu, bins.resolution_rms);
            bins.bin_of(nu).map(Some).ok_or(NoClick::OutOfRange)
        },
        |rng| Some(rng.random_range(0..bins.n_bins)),
    );
    finish(tag, raw, |c| bins.center(c.bin.expect("grating clicks carry a bin")))
}

/// Source characterization with equal-sign dispersion at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrometerResult {
    /// `T_A - T_B` for every coincidence, in pair order.
    pub differences: Vec<f64>,
    pub histogram: Histogram,
    pub rms_difference: f64,
    /// Estimated daughter bandwidth (RMS, Hz): `rms / (2 |slope|)`.
    pub recovered_bandwidth: f64,
    /// Estimated daughter center frequency (Hz).
    pub recovered_center: f64,
    /// Bandwidth that detector jitter alone would produce.
    pub jitter_floor: f64,
    /// True when the estimate is within 3x of the jitter floor.
    pub at_jitter_floor: bool,
}

/// Measure both photons of every pair through dispersive elements of the
/// same sign; `T_A - T_B = slope (2 nu_A - nu_P)` maps the daughter spectrum
/// onto the time axis. Pairs are measured directly at the source (no link).
#[allow(clippy::too_many_arguments)]
pub fn spectrometer_mode(
    pairs: &[EprPair],
    disp_a: &DispersiveElement,
    disp_b: &DispersiveElement,
    det_a: &DetectorSpec,
    det_b: &DetectorSpec,
    phys: &PhysParams,
    nu_p0: f64,
    streams: &Streams,
    n_bins: usize,
) -> Result<SpectrometerResult> {
    if disp_a.d_lambda == 0.0 {
        return Err(Error::config("dispersive_a.dispersion", "spectrometer needs nonzero dispersion"));
    }
    if disp_a.d_lambda.signum() != disp_b.d_lambda.signum() {
        return Err(Error::config(
            "dispersive_b.dispersion",
            "opposite-sign dispersion cancels the spectral spread (that is the key-distribution \
             setting); the spectrometer needs D_B = +D_A",
        ));
    }
    let rel = (disp_a.d_lambda - disp_b.d_lambda).abs() / disp_a.d_lambda.abs();
    if rel > 1e-9 {
        return Err(Error::config(
            "dispersive_b.dispersion",
            "spectrometer needs D_B equal to D_A",
        ));
    }
    let slope = disp_a.slope(phys);
    let differences: Vec<f64> = pairs
        .iter()
        .filter_map(|pair| {
            let mut ra = streams.stream(Domain::Alice, pair.pair_id);
            let mut rb = streams.stream(Domain::Bob, pair.pair_id);
            let tag = |party| Tag {
                slot_id: pair.pair_id,
                party,
                basis: Basis::Frequency,
            };
            let a = measure_freq_dispersive(Some(pair.photon_a), det_a, disp_a, phys, tag(Party::Alice), &mut ra);
            let b = measure_freq_dispersive(Some(pair.photon_b), det_b, disp_b, phys, tag(Party::Bob), &mut rb);
            match (a, b) {
                (Detection::Click(a), Detection::Click(b)) => Some(a.t_measured - b.t_measured),
                _ => None,
            }
        })
        .collect();
    let (mean, var) = mean_var(&differences).unwrap_or((0.0, 0.0));
    let rms = var.sqrt();
    let recovered = rms / (2.0 * slope.abs());
    let floor = det_a.jitter_rms().hypot(det_b.jitter_rms()) / (2.0 * slope.abs());
    Ok(SpectrometerResult {
        histogram: Histogram::from_samples(&differences, n_bins),
        rms_difference: rms,
        recovered_bandwidth: recovered,
        recovered_center: (mean / slope + nu_p0) / 2.0,
        jitter_floor: floor,
        at_jitter_floor: recovered <= 3.0 * floor,
        differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{sample_epr_pairs, Emission, SpdcParams};
    use crate::stats::mean_var;
    use crate::units::SPEED_OF_LIGHT;

    const NU0: f64 = SPEED_OF_LIGHT / 1550e-9;

    fn tag(slot: u64) -> Tag {
        Tag {
            slot_id: slot,
            party: Party::Bob,
            basis: Basis::Time,
        }
    }

    fn disp(d: f64, loss: f64) -> DispersiveElement {
        DispersiveElement {
            d_lambda: d,
            nu0: NU0,
            insertion_loss_db: loss,
        }
    }

    #[test]
    fn ideal_detector_is_exact() {
        let det = DetectorSpec::ideal();
        let mut rng = Streams::new(1).stream(Domain::Bob, 0);
        let p = Photon { nu: NU0, t: 1.234e-9 };
        match measure_time(Some(p), &det, tag(0), &mut rng) {
            Detection::Click(e) => {
                assert_eq!(e.t_measured, p.t);
                assert!(!e.is_dark);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn blind_detector_never_clicks() {
        let det = DetectorSpec {
            efficiency: 0.0,
            ..DetectorSpec::ideal()
        };
        let mut rng = Streams::new(1).stream(Domain::Bob, 0);
        for i in 0..1000 {
            let d = measure_time(Some(Photon { nu: NU0, t: 0.0 }), &det, tag(i), &mut rng);
            assert_eq!(d, Detection::NoClick(NoClick::Inefficiency));
        }
        assert_eq!(
            measure_time(None, &det, tag(0), &mut rng),
            Detection::NoClick(NoClick::NoPhoton)
        );
    }

    #[test]
    fn jitter_rms_matches_fwhm_conversion() {
        let det = DetectorSpec {
            jitter_fwhm: 70e-12,
            ..DetectorSpec::ideal()
        };
        let mut rng = Streams::new(2).stream(Domain::Bob, 0);
        let n = 1_000_000;
        let dt: Vec<f64> = (0..n)
            .map(|i| {
                measure_time(Some(Photon { nu: NU0, t: 0.0 }), &det, tag(i), &mut rng)
                    .event()
                    .unwrap()
                    .t_measured
            })
            .collect();
        let rms = mean_var(&dt).unwrap().1.sqrt();
        let want = 4.203_928_430_752_575e-11;
        assert!((rms / want - 1.0).abs() < 5.0 / (2.0 * n as f64).sqrt(), "{rms}");
    }

    #[test]
    fn dark_clicks_land_in_gate_and_earliest_wins() {
        let det = DetectorSpec {
            jitter_fwhm: 0.0,
            efficiency: 1.0,
            dark_count_prob: 1.0,
            gate_window: Window::new(-1e-9, 1e-9).unwrap(),
        };
        let mut rng = Streams::new(3).stream(Domain::Bob, 0);
        let mut darks = 0;
        for i in 0..10_000 {
            let e = *measure_time(Some(Photon { nu: NU0, t: 0.0 }), &det, tag(i), &mut rng)
                .event()
                .unwrap();
            assert!(e.t_measured <= 0.0);
            assert!(det.gate_window.contains(e.t_measured));
            darks += e.is_dark as u32;
        }
        // the dark click is earlier about half the time
        assert!((darks as f64 / 1e4 - 0.5).abs() < 0.025);
        // a photon outside the gate still leaves the dark click
        let e = measure_time(Some(Photon { nu: NU0, t: 5e-9 }), &det, tag(0), &mut rng);
        assert!(e.event().unwrap().is_dark);
        let quiet = DetectorSpec { dark_count_prob: 0.0, ..det };
        assert_eq!(
            measure_time(Some(Photon { nu: NU0, t: 5e-9 }), &quiet, tag(0), &mut rng),
            Detection::NoClick(NoClick::OutOfGate)
        );
    }

    #[test]
    fn basis_choice_is_fair_and_independent() {
        let s = Streams::new(4);
        let n = 1_000_000u64;
        let (mut freq, mut same) = (0u64, 0u64);
        for slot in 0..n {
            let a = choose_basis(&mut s.stream(Domain::Alice, slot));
            let b = choose_basis(&mut s.stream(Domain::Bob, slot));
            freq += (a == Basis::Frequency) as u64;
            same += (a == b) as u64;
        }
        assert!((freq as f64 / n as f64 - 0.5).abs() < 5.0 * 0.0005);
        assert!((same as f64 / n as f64 - 0.5).abs() < 5.0 * 0.0005);
        let s2 = Streams::new(4);
        for slot in 0..100 {
            assert_eq!(
                choose_basis(&mut s.stream(Domain::Alice, slot)),
                choose_basis(&mut s2.stream(Domain::Alice, slot))
            );
        }
    }

    #[test]
    fn zero_dispersion_reduces_to_time_measurement() {
        let det = DetectorSpec::default();
        let phys = PhysParams::default();
        let s = Streams::new(5);
        for slot in 0..2000 {
            let p = Some(Photon {
                nu: NU0 + 3e10,
                t: (slot as f64 - 1000.0) * 1e-10,
            });
            let a = measure_time(p, &det, tag(slot), &mut s.stream(Domain::Bob, slot));
            let b = measure_freq_dispersive(p, &det, &disp(0.0, 0.0), &phys, tag(slot), &mut s.stream(Domain::Bob, slot));
            match (a, b) {
                (Detection::Click(a), Detection::Click(b)) => {
                    assert_eq!(a.t_measured.to_bits(), b.t_measured.to_bits());
                    assert_eq!(a.is_dark, b.is_dark);
                }
                (a, b) => assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn dispersive_delay_is_56_ps_per_ghz() {
        let phys = PhysParams::default();
        let mut rng = Streams::new(6).stream(Domain::Bob, 0);
        let e = measure_freq_dispersive(
            Some(Photon { nu: NU0 + 1e9, t: 0.0 }),
            &DetectorSpec::ideal(),
            &disp(7.0, 0.0),
            &phys,
            tag(0),
            &mut rng,
        );
        let e = e.event().unwrap();
        assert!((e.t_measured - 56.1e-12).abs() < 0.05e-12, "{}", e.t_measured);
        assert!((e.reading - (NU0 + 1e9)).abs() < 1e-3);
    }

    #[test]
    fn insertion_loss_thins_clicks() {
        let phys = PhysParams::default();
        let mut rng = Streams::new(7).stream(Domain::Bob, 0);
        let n = 100_000;
        let clicks = (0..n)
            .filter(|&i| {
                measure_freq_dispersive(
                    Some(Photon { nu: NU0, t: 0.0 }),
                    &DetectorSpec::ideal(),
                    &disp(7.0, 5.0),
                    &phys,
                    tag(i),
                    &mut rng,
                )
                .event()
                .is_some()
            })
            .count() as f64;
        let eta = 10f64.powf(-0.5);
        assert!((clicks / n as f64 - eta).abs() < 5.0 * (eta * (1.0 - eta) / n as f64).sqrt());
    }

    #[test]
    fn opposite_dispersion_cancels_for_ideal_pairs() {
        let phys = PhysParams::default();
        let spdc = SpdcParams {
            nu_p0: 2.0 * NU0,
            pump_linewidth: 0.0,
            pump_duration: 1e-9,
            bandwidth_a: 100e9,
            bandwidth_b: 100e9,
            emission: Emission::Fixed,
            pair_time_correlation: Some(0.0),
        };
        let s = Streams::new(8);
        let pairs = sample_epr_pairs(&mut s.stream(Domain::Source, 0), &spdc, 1000);
        let (da, db) = (disp(7.0, 0.0), disp(-7.0, 0.0));
        for pair in pairs {
            let t = |party| Tag { slot_id: pair.pair_id, party, basis: Basis::Frequency };
            let a = measure_freq_dispersive(Some(pair.photon_a), &DetectorSpec::ideal(), &da, &phys, t(Party::Alice), &mut s.stream(Domain::Alice, 0));
            let b = measure_freq_dispersive(Some(pair.photon_b), &DetectorSpec::ideal(), &db, &phys, t(Party::Bob), &mut s.stream(Domain::Bob, 0));
            let diff = a.event().unwrap().t_measured - b.event().unwrap().t_measured;
            // exact up to rounding of terms of size slope * bandwidth ~ 10 ns
            assert!(diff.abs() < 1e-21, "{diff}");
        }
    }

    #[test]
    fn grating_bins() {
        let bins = GratingBins::centered(NU0, 1e9, 100, 0.0);
        let mut rng = Streams::new(9).stream(Domain::Bob, 0);
        let det = DetectorSpec::ideal();
        let center = bins.center(37);
        let e = measure_freq_grating(Some(Photon { nu: center, t: 0.0 }), &det, &bins, tag(0), &mut rng);
        assert_eq!(e.event().unwrap().spda_bin, Some(37));
        assert_eq!(e.event().unwrap().reading, center);
        let below = measure_freq_grating(Some(Photon { nu: bins.nu_start - 1.0, t: 0.0 }), &det, &bins, tag(0), &mut rng);
        assert_eq!(below, Detection::NoClick(NoClick::OutOfRange));
        assert!(GratingBins { n_bins: 1, ..bins }.validate().is_err());
    }

    #[test]
    fn grating_quantization_variance() {
        let width = 1e9;
        let bins = GratingBins::centered(NU0, width, 1000, 0.0);
        let mut rng = Streams::new(10).stream(Domain::Bob, 0);
        let n = 200_000;
        let err: Vec<f64> = (0..n)
            .map(|i| {
                let nu = NU0 + (rng.random::<f64>() - 0.5) * 100.0 * width;
                let e = measure_freq_grating(Some(Photon { nu, t: 0.0 }), &DetectorSpec::ideal(), &bins, tag(i), &mut rng);
                e.event().unwrap().reading - nu
            })
            .collect();
        let var = mean_var(&err).unwrap().1;
        let want = width * width / 12.0;
        // uniform on a unit interval: Var(x^2) / (1/12)^2 = 0.8
        assert!((var / want - 1.0).abs() < 5.0 * (0.8 / n as f64).sqrt(), "{}", var / want);
    }

    #[test]
    fn spectrometer_refuses_opposite_sign() {
        let phys = PhysParams::default();
        let r = spectrometer_mode(
            &[],
            &disp(7.0, 0.0),
            &disp(-7.0, 0.0),
            &DetectorSpec::ideal(),
            &DetectorSpec::ideal(),
            &phys,
            2.0 * NU0,
            &Streams::new(0),
            10,
        );
        assert!(matches!(r, Err(Error::Config { .. })));
    }

    #[test]
    fn spectrometer_spread_is_twice_slope_times_bandwidth() {
        let phys = PhysParams::default();
        let spdc = SpdcParams {
            nu_p0: 2.0 * NU0,
            pump_linewidth: 0.0,
            pump_duration: 1e-9,
            bandwidth_a: 100e9,
            bandwidth_b: 100e9,
            emission: Emission::Fixed,
            pair_time_correlation: Some(0.0),
        };
        let s = Streams::new(11);
        let pairs = sample_epr_pairs(&mut s.stream(Domain::Source, 0), &spdc, 100_000);
        let d = disp(7.0, 0.0);
        let res = spectrometer_mode(&pairs, &d, &d, &DetectorSpec::ideal(), &DetectorSpec::ideal(), &phys, spdc.nu_p0, &s, 100).unwrap();
        let want = 2.0 * d.slope(&phys) * 100e9;
        assert!((res.rms_difference / want - 1.0).abs() < 0.02, "{}", res.rms_difference);
        assert!((want - 11.2e-9).abs() < 0.05e-9);
        assert_eq!(res.histogram.total() as usize, res.differences.len());
        assert!((res.recovered_center - NU0).abs() < 1e9);

        let narrow = SpdcParams { bandwidth_a: 0.0, bandwidth_b: 0.0, ..spdc };
        let pairs = sample_epr_pairs(&mut s.stream(Domain::Source, 1), &narrow, 1000);
        let res = spectrometer_mode(&pairs, &d, &d, &DetectorSpec::ideal(), &DetectorSpec::ideal(), &phys, spdc.nu_p0, &s, 100).unwrap();
        assert!(res.rms_difference < 1e-18);
        assert!(res.at_jitter_floor);
    }
}
