//! End-to-end sessions: generate, transmit, filter, choose bases, measure,
//! sift, map to key elements, distill, estimate the QBER and compute rates.
//!
//! Every slot draws from its own streams (see [`crate::rng`]), so slot
//! batches can run in any order and the report does not depend on
//! scheduling. Rates are per pulse; no repetition rate is assumed.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{apply_filter, transmit, ChannelSpec, FilterSpec};
use crate::config::{FreqScheme, Mode, NoiseMode, SessionConfig};
use crate::distillation::{
    distill, estimate_qber, sift, to_dimensionless, BitRecord, Coincidence, Rate, ScaleMap,
    SiftCounts,
};
use crate::error::{Error, Result};
use crate::measurement::{
    choose_basis, measure_freq_dispersive, measure_freq_grating, measure_time, spectrometer_mode,
    Detection, DetectionEvent, DetectorSpec, DispersiveElement, GratingBins, NoClick, Party,
    SpectrometerResult, Tag,
};
use crate::optics::{
    normal, sample_pair, sample_pair_count, sample_pm_state, Basis, EprPair, Photon,
    PmSourceParams, SpdcParams,
};
use crate::rng::{Domain, Streams};
use crate::security::{keyrate_gain, keyrate_ideal, parity_error_exact, qber_bound, variance_chain};
use crate::stats::robust_sigma;
use crate::units::{dispersion_to_freq_slope, fwhm_to_rms};

const CHUNK: u64 = 1 << 16;

/// Where each pulse ended up. Every pulse lands in exactly one category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Terminal {
    /// The source emitted nothing and no detector fired.
    pub empty_pulse: u64,
    /// More than one pair; discarded.
    pub multipair: u64,
    pub lost: u64,
    pub filtered: u64,
    /// Detector inefficiency or insertion loss.
    pub no_click: u64,
    /// Click outside the gate or outside the detector array.
    pub out_of_gate: u64,
    pub basis_mismatch: u64,
    pub window_rejected: u64,
    /// Disclosed for QBER estimation.
    pub test_bit: u64,
    pub key_bit: u64,
}

impl Terminal {
    pub fn total(&self) -> u64 {
        self.empty_pulse
            + self.multipair
            + self.lost
            + self.filtered
            + self.no_click
            + self.out_of_gate
            + self.basis_mismatch
            + self.window_rejected
            + self.test_bit
            + self.key_bit
    }

    fn merge(&mut self, o: &Terminal) {
        self.empty_pulse += o.empty_pulse;
        self.multipair += o.multipair;
        self.lost += o.lost;
        self.filtered += o.filtered;
        self.no_click += o.no_click;
        self.out_of_gate += o.out_of_gate;
        self.basis_mismatch += o.basis_mismatch;
        self.window_rejected += o.window_rejected;
        self.test_bit += o.test_bit;
        self.key_bit += o.key_bit;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Counts {
    #[serde(flatten)]
    pub sift: SiftCounts,
    /// Photons rejected by an entrance filter (either party).
    pub filtered: u64,
    /// Fraction of all clicks that were dark counts.
    pub dark_fraction: f64,
    pub multipair_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gain {
    /// Bob's clicks per pulse.
    pub receiver: f64,
    /// Coincidences per pulse.
    pub coincidence: f64,
    /// The accounting used for the rate: receiver in prepare-and-measure
    /// mode, coincidence in entanglement mode.
    pub used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QberReport {
    pub pooled: Rate,
    pub time_basis: Option<Rate>,
    pub freq_basis: Option<Rate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaSq {
    /// From the configured detector and source widths.
    pub analytic: f64,
    /// `2 σ_time σ_freq` of the simulated `q_A - q_B`, with robust sigmas.
    pub empirical: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticQber {
    pub bound: f64,
    pub exact: f64,
    /// Bound evaluated at the empirical Δ².
    pub bound_empirical: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRate {
    pub f_ec: f64,
    pub ideal_raw: f64,
    pub ideal: f64,
    pub gain_corrected_raw: f64,
    pub gain_corrected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReport {
    pub mode: Mode,
    pub seed: u64,
    pub counts: Counts,
    pub terminal: Terminal,
    pub gain: Gain,
    pub qber: Option<QberReport>,
    pub delta_sq: DeltaSq,
    pub analytic_qber: AnalyticQber,
    pub keyrate: KeyRate,
    /// Key bits left after disclosure of the test sample.
    pub key_bits: u64,
    pub empty_key: bool,
    pub coincidence_window: Option<f64>,
    pub scale_length: f64,
    pub warnings: Vec<String>,
    pub runtime_s: f64,
    pub config: SessionConfig,
}

impl SessionReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Public discussion for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TranscriptRow {
    pub slot_id: u64,
    pub basis_a: Option<Basis>,
    pub basis_b: Option<Basis>,
    /// Alice's broadcast remainder, for slots that became key elements.
    pub m: Option<f64>,
    pub kept: bool,
}

/// Per-party measurement noise that sets Δ² = 2 Δx Δk and the scale length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    /// RMS timing noise of one reading (s).
    pub sigma_t: f64,
    /// RMS frequency noise of one reading (Hz).
    pub sigma_nu: f64,
    pub delta_sq: f64,
    pub scale_length: f64,
}

fn quad(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Analytic noise budget of a configuration.
///
/// Entanglement mode with dispersive readout uses the detector-limited chain
/// with the RMS of the two jitters. Prepare-and-measure mode counts Bob's
/// noise on top of the prepared values: pulse width, jitter and channel
/// broadening in time; source linewidth and readout resolution in frequency.
pub fn noise_budget(cfg: &SessionConfig) -> Result<NoiseBudget> {
    let p = &cfg.phys;
    let ja = fwhm_to_rms(cfg.detector_a.jitter_fwhm)?;
    let jb = fwhm_to_rms(cfg.detector_b.jitter_fwhm)?;
    let grating_noise = |g: &GratingBins| quad(&[g.resolution_rms, g.bin_width / 12f64.sqrt()]);
    let (sigma_t, sigma_nu, fixed_scale) = if cfg.mode.is_epr() {
        let j = ((ja * ja + jb * jb) / 2.0).sqrt();
        match cfg.freq_scheme {
            FreqScheme::Dispersive => {
                let d = cfg.dispersive_a.dispersion;
                let slope = dispersion_to_freq_slope(d, p).abs();
                // the ratio Δx/Δk does not depend on the jitter
                let scale = (p.c() * p.wavelength * p.wavelength * d.abs()
                    / (2.0 * PI * p.refractive_index * p.refractive_index))
                    .sqrt();
                (j, j / slope, Some(scale))
            }
            FreqScheme::Grating => (j, grating_noise(&cfg.grating.bins(p)), None),
        }
    } else {
        let pm = cfg.pm_source.params(p);
        let pulse_t = 1.0 / (SQRT_2 * pm.sigma_omega2);
        let line_nu = pm.sigma_omega1 / (SQRT_2 * 2.0 * PI);
        let t = quad(&[pulse_t, jb, cfg.channel.residual_broadening_rms]);
        let nu = match cfg.freq_scheme {
            FreqScheme::Grating => quad(&[line_nu, grating_noise(&cfg.grating.bins(p))]),
            FreqScheme::Dispersive => {
                let slope = dispersion_to_freq_slope(cfg.dispersive_b.dispersion, p).abs();
                let s1_t = 1.0 / (SQRT_2 * pm.sigma_omega1);
                quad(&[line_nu, quad(&[s1_t, jb]) / slope])
            }
        };
        (t, nu, None)
    };
    let dx = p.c() / p.refractive_index * sigma_t;
    let dk = 2.0 * PI * p.refractive_index / p.c() * sigma_nu;
    let scale = match (cfg.scale_length, fixed_scale) {
        (Some(s), _) => s,
        (None, Some(s)) => s,
        (None, None) if dx > 0.0 && dk > 0.0 => (dx / dk).sqrt(),
        _ => {
            return Err(Error::config(
                "scale_length",
                "cannot derive a scale from a noiseless budget; set it explicitly",
            ))
        }
    };
    let delta_sq = if cfg.mode.is_epr() && cfg.freq_scheme == FreqScheme::Dispersive {
        let j_fwhm = ((cfg.detector_a.jitter_fwhm.powi(2) + cfg.detector_b.jitter_fwhm.powi(2)) / 2.0).sqrt();
        variance_chain(j_fwhm, cfg.dispersive_a.dispersion, p)?.delta_sq
    } else {
        2.0 * dx * dk
    };
    Ok(NoiseBudget {
        sigma_t,
        sigma_nu,
        delta_sq,
        scale_length: scale,
    })
}

/// Default `|T_A - T_B|` acceptance: three standard deviations of the
/// expected difference, at least 1 ps.
pub fn default_coincidence_window(cfg: &SessionConfig) -> f64 {
    let p = &cfg.phys;
    let spdc = cfg.spdc_source.params(p);
    let ja = cfg.detector_a.jitter_rms();
    let jb = cfg.detector_b.jitter_rms();
    let slope = dispersion_to_freq_slope(cfg.dispersive_a.dispersion, p);
    let pump = match cfg.freq_scheme {
        FreqScheme::Dispersive => slope * spdc.pump_linewidth,
        FreqScheme::Grating => 0.0,
    };
    let sd = quad(&[ja, jb, spdc.tau_corr(), cfg.channel.residual_broadening_rms, pump]);
    (3.0 * sd).max(1e-12)
}

/// What happened to one party's photon.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    Click(DetectionEvent),
    NoPair,
    Lost,
    Filtered,
    Missed(NoClick),
}

impl Fate {
    fn event(&self) -> Option<DetectionEvent> {
        match self {
            Fate::Click(e) => Some(*e),
            _ => None,
        }
    }
}

/// Derived, read-only session state shared by all slots.
struct Plan<'a> {
    cfg: &'a SessionConfig,
    streams: Streams,
    pm: PmSourceParams,
    spdc: SpdcParams,
    channel_a: ChannelSpec,
    channel_b: ChannelSpec,
    disp_a: DispersiveElement,
    disp_b: DispersiveElement,
    bins: GratingBins,
    window: Option<f64>,
    scale: ScaleMap,
    eq7_sd: f64,
    want_transcript: bool,
}

struct Receiver<'a> {
    channel: &'a ChannelSpec,
    filter: &'a FilterSpec,
    det: &'a DetectorSpec,
    disp: &'a DispersiveElement,
}

impl Plan<'_> {
    /// Link, filter and detector for one party. Times are relative to the
    /// party's clock, which is offset by the link's fixed delay.
    fn receive(
        &self,
        photon: Option<Photon>,
        rx: Receiver,
        tag: Tag,
        rng: &mut crate::rng::SimRng,
    ) -> Fate {
        let (photon, absent) = match photon {
            None => (None, Fate::NoPair),
            Some(p) => match transmit(p, rx.channel, rng) {
                None => (None, Fate::Lost),
                Some(mut q) => {
                    q.t -= rx.channel.fixed_delay;
                    match apply_filter(q, rx.filter) {
                        Ok(q) => (Some(q), Fate::NoPair),
                        Err(_) => (None, Fate::Filtered),
                    }
                }
            },
        };
        let d = match tag.basis {
            Basis::Time => measure_time(photon, rx.det, tag, rng),
            Basis::Frequency => match self.cfg.freq_scheme {
                FreqScheme::Dispersive => {
                    measure_freq_dispersive(photon, rx.det, rx.disp, &self.cfg.phys, tag, rng)
                }
                FreqScheme::Grating => measure_freq_grating(photon, rx.det, &self.bins, tag, rng),
            },
        };
        match d {
            Detection::Click(e) => Fate::Click(e),
            Detection::NoClick(NoClick::NoPhoton) => absent,
            Detection::NoClick(why) => Fate::Missed(why),
        }
    }

    fn rx_a(&self) -> Receiver<'_> {
        Receiver {
            channel: &self.channel_a,
            filter: &self.cfg.filter,
            det: &self.cfg.detector_a,
            disp: &self.disp_a,
        }
    }

    fn rx_b(&self) -> Receiver<'_> {
        Receiver {
            channel: &self.channel_b,
            filter: &self.cfg.filter,
            det: &self.cfg.detector_b,
            disp: &self.disp_b,
        }
    }

    /// Both parties' fates, or `None` for a discarded multi-pair slot.
    fn slot(&self, slot: u64) -> Option<(Fate, Fate)> {
        let mut rb = self.streams.stream(Domain::Bob, slot);
        let tag = |party, basis| Tag {
            slot_id: slot,
            party,
            basis,
        };
        if self.cfg.mode == Mode::Pm {
            let mut src = self.streams.stream(Domain::Source, slot);
            let state = sample_pm_state(&mut src, &self.pm);
            let photon = state.pulse.sample_photon(&mut src);
            let alice = DetectionEvent {
                slot_id: slot,
                party: Party::Alice,
                basis: state.basis,
                t_measured: state.pulse.center_time,
                reading: match state.basis {
                    Basis::Time => state.encoded_value,
                    Basis::Frequency => state.encoded_value / (2.0 * PI),
                },
                is_dark: false,
                spda_bin: None,
            };
            let basis_b = choose_basis(&mut rb);
            let bob = self.receive(Some(photon), self.rx_b(), tag(Party::Bob, basis_b), &mut rb);
            return Some((Fate::Click(alice), bob));
        }
        let mut src = self.streams.stream(Domain::Source, slot);
        let pair: Option<EprPair> = match sample_pair_count(&mut src, self.spdc.emission) {
            0 => None,
            1 => Some(sample_pair(&mut src, &self.spdc, slot, 0.0)),
            _ => return None,
        };
        let mut ra = self.streams.stream(Domain::Alice, slot);
        let basis_a = choose_basis(&mut ra);
        let basis_b = choose_basis(&mut rb);
        let a = self.receive(pair.map(|p| p.photon_a), self.rx_a(), tag(Party::Alice, basis_a), &mut ra);
        let b = self.receive(pair.map(|p| p.photon_b), self.rx_b(), tag(Party::Bob, basis_b), &mut rb);
        Some((a, b))
    }

    /// Bob's frequency reading stands in for Alice's through `ν_A = ν_P0 - ν_B`.
    fn partner(&self, mut c: Coincidence) -> Coincidence {
        if self.cfg.mode.is_epr() && c.b.basis == Basis::Frequency {
            c.b.reading = self.spdc.nu_p0 - c.b.reading;
        }
        c
    }
}

#[derive(Default)]
struct Chunk {
    sift: SiftCounts,
    terminal: Terminal,
    filtered: u64,
    darks: u64,
    multipair: u64,
    bits: Vec<BitRecord>,
    diff_time: Vec<f64>,
    diff_freq: Vec<f64>,
    transcript: Vec<TranscriptRow>,
}

fn classify(f: &Fate, t: &mut Terminal) {
    match f {
        Fate::NoPair => t.empty_pulse += 1,
        Fate::Lost => t.lost += 1,
        Fate::Filtered => t.filtered += 1,
        Fate::Missed(NoClick::Inefficiency | NoClick::InsertionLoss | NoClick::NoPhoton) => t.no_click += 1,
        Fate::Missed(NoClick::OutOfGate | NoClick::OutOfRange) => t.out_of_gate += 1,
        Fate::Click(_) => unreachable!("only missing sides are classified"),
    }
}

fn run_chunk(plan: &Plan, start: u64, end: u64) -> Result<Chunk> {
    let mut out = Chunk::default();
    let n = (end - start) as usize;
    let mut ev_a = Vec::with_capacity(n);
    let mut ev_b = Vec::with_capacity(n);
    for slot in start..end {
        match plan.slot(slot) {
            None => {
                out.multipair += 1;
                out.terminal.multipair += 1;
                ev_a.push(None);
                ev_b.push(None);
            }
            Some((a, b)) => {
                for f in [&a, &b] {
                    out.filtered += matches!(f, Fate::Filtered) as u64;
                }
                if plan.cfg.mode.is_epr() {
                    out.darks += matches!(a, Fate::Click(e) if e.is_dark) as u64;
                }
                out.darks += matches!(b, Fate::Click(e) if e.is_dark) as u64;
                match (&a, &b) {
                    (Fate::Click(ea), Fate::Click(eb)) if ea.basis != eb.basis => {
                        out.terminal.basis_mismatch += 1
                    }
                    (Fate::Click(_), Fate::Click(_)) => {}
                    (Fate::Click(_), missing) | (missing, _) => classify(missing, &mut out.terminal),
                }
                ev_a.push(a.event());
                ev_b.push(b.event());
            }
        }
    }
    let (coincidences, mut counts) = sift(&ev_a, &ev_b, plan.window)?;
    if plan.cfg.mode == Mode::Pm {
        // Alice's prepared state is not a click
        counts.clicks_a = 0;
    }
    out.terminal.window_rejected = counts.window_rejected;
    out.sift = counts;

    let mut kept_m = Vec::with_capacity(coincidences.len());
    for c in coincidences {
        let c = plan.partner(c);
        let mut k = to_dimensionless(&c, &plan.scale, &plan.cfg.phys);
        let clean = !c.a.is_dark && !c.b.is_dark;
        if clean {
            match k.basis {
                Basis::Time => out.diff_time.push(k.q_b - k.q_a),
                Basis::Frequency => out.diff_freq.push(k.q_b - k.q_a),
            }
            if plan.cfg.noise_mode == NoiseMode::Eq7 {
                let mut rng = plan.streams.stream(Domain::PairNoise, c.slot_id);
                k.q_b = normal(&mut rng, k.q_a, plan.eq7_sd);
            }
        }
        let bit = distill(&k);
        kept_m.push((bit.slot_id, bit.broadcast_m));
        out.bits.push(bit);
    }

    if plan.want_transcript {
        let mut kept = kept_m.into_iter().peekable();
        for (i, slot) in (start..end).enumerate() {
            let both = ev_a[i].zip(ev_b[i]);
            let m = match kept.peek() {
                Some(&(s, m)) if s == slot => {
                    kept.next();
                    Some(m)
                }
                _ => None,
            };
            out.transcript.push(TranscriptRow {
                slot_id: slot,
                basis_a: both.map(|(a, _)| a.basis),
                basis_b: both.map(|(_, b)| b.basis),
                m,
                kept: m.is_some(),
            });
        }
    }
    Ok(out)
}

/// Run a session. When `transcript` is given, one JSON line per slot is
/// written to it with the publicly announced information only.
pub fn run_session(cfg: &SessionConfig, transcript: Option<&mut dyn Write>) -> Result<SessionReport> {
    let started = Instant::now();
    let mut warnings = cfg.validate()?;
    let budget = noise_budget(cfg)?;
    let p = &cfg.phys;
    let (channel_a, channel_b) = match cfg.mode {
        Mode::Pm | Mode::EprSourceAtAlice => (ChannelSpec::identity(), cfg.channel),
        Mode::EprMidpoint => (cfg.channel.portion(0.5), cfg.channel.portion(0.5)),
    };
    let window = cfg
        .mode
        .is_epr()
        .then(|| cfg.coincidence_window.unwrap_or_else(|| default_coincidence_window(cfg)));
    let origin_freq = p.nu0();
    let plan = Plan {
        cfg,
        streams: Streams::new(cfg.seed),
        pm: cfg.pm_source.params(p),
        spdc: cfg.spdc_source.params(p),
        channel_a,
        channel_b,
        disp_a: cfg.dispersive_a.element(p),
        disp_b: cfg.dispersive_b.element(p),
        bins: cfg.grating.bins(p),
        window,
        scale: ScaleMap::new(budget.scale_length, 0.0, origin_freq)?,
        eq7_sd: (budget.delta_sq / 2.0).sqrt(),
        want_transcript: transcript.is_some(),
    };

    let ranges: Vec<(u64, u64)> = (0..cfg.pulses)
        .step_by(CHUNK as usize)
        .map(|s| (s, (s + CHUNK).min(cfg.pulses)))
        .collect();
    let chunks: Vec<Chunk> = if cfg.parallel {
        ranges
            .par_iter()
            .map(|&(s, e)| run_chunk(&plan, s, e))
            .collect::<Result<_>>()?
    } else {
        ranges
            .iter()
            .map(|&(s, e)| run_chunk(&plan, s, e))
            .collect::<Result<_>>()?
    };

    let mut sift_counts = SiftCounts::default();
    let mut terminal = Terminal::default();
    let (mut filtered, mut darks, mut multipair) = (0, 0, 0);
    let mut bits = Vec::new();
    let (mut diff_t, mut diff_f) = (Vec::new(), Vec::new());
    for c in &chunks {
        sift_counts.merge(&c.sift);
        terminal.merge(&c.terminal);
        filtered += c.filtered;
        darks += c.darks;
        multipair += c.multipair;
    }
    if let Some(w) = transcript {
        for c in &chunks {
            for row in &c.transcript {
                serde_json::to_writer(&mut *w, row).map_err(|e| Error::config("transcript", e.to_string()))?;
                w.write_all(b"\n").map_err(|e| Error::config("transcript", e.to_string()))?;
            }
        }
    }
    for c in chunks {
        bits.extend(c.bits);
        diff_t.extend(c.diff_time);
        diff_f.extend(c.diff_freq);
    }

    let gain = Gain {
        receiver: sift_counts.gain_receiver(),
        coincidence: sift_counts.gain_coincidence(),
        used: if cfg.mode.is_epr() {
            sift_counts.gain_coincidence()
        } else {
            sift_counts.gain_receiver()
        },
    };

    let mut rng = plan.streams.stream(Domain::Estimation, 0);
    let estimate = if bits.is_empty() {
        warnings.push("no key elements: the sifted key is empty".to_string());
        None
    } else {
        Some(estimate_qber(&bits, cfg.test_fraction, &mut rng)?)
    };
    terminal.test_bit = estimate.as_ref().map_or(0, |e| e.pooled.n);
    terminal.key_bit = bits.len() as u64 - terminal.test_bit;

    let e_hat = estimate.as_ref().map_or(0.5, |e| e.pooled.value);
    if e_hat > 0.5 {
        warnings.push(format!("estimated QBER {e_hat:.4} exceeds 0.5; rates use 0.5"));
    }
    let e_rate = e_hat.min(0.5);
    let ideal_raw = keyrate_ideal(e_rate, cfg.f_ec)?;
    let gain_raw = keyrate_gain(gain.used, e_rate, cfg.f_ec)?;
    if ideal_raw < 0.0 && estimate.is_some() {
        warnings.push("QBER above the security threshold: no secret key".to_string());
    }

    let empirical = match (robust_sigma(&diff_t), robust_sigma(&diff_f)) {
        (Some(st), Some(sf)) => Some(2.0 * st * sf),
        _ => None,
    };
    let bound = |d: f64| if d > 0.0 { qber_bound(d) } else { Ok(0.0) };

    let clicks = sift_counts.clicks_a + sift_counts.clicks_b;
    Ok(SessionReport {
        mode: cfg.mode,
        seed: cfg.seed,
        counts: Counts {
            sift: sift_counts,
            filtered,
            dark_fraction: if clicks == 0 { 0.0 } else { darks as f64 / clicks as f64 },
            multipair_fraction: multipair as f64 / cfg.pulses as f64,
        },
        terminal,
        gain,
        qber: estimate.as_ref().map(|e| QberReport {
            pooled: e.pooled,
            time_basis: e.time_basis,
            freq_basis: e.freq_basis,
        }),
        delta_sq: DeltaSq {
            analytic: budget.delta_sq,
            empirical,
        },
        analytic_qber: AnalyticQber {
            bound: bound(budget.delta_sq)?,
            exact: parity_error_exact(budget.delta_sq)?,
            bound_empirical: empirical.map(bound).transpose()?,
        },
        keyrate: KeyRate {
            f_ec: cfg.f_ec,
            ideal_raw,
            ideal: ideal_raw.max(0.0),
            gain_corrected_raw: gain_raw,
            gain_corrected: gain_raw.max(0.0),
        },
        key_bits: terminal.key_bit,
        empty_key: terminal.key_bit == 0,
        coincidence_window: window,
        scale_length: budget.scale_length,
        warnings,
        runtime_s: started.elapsed().as_secs_f64(),
        config: cfg.clone(),
    })
}

/// Source characterization: every pair measured at the source through
/// equal-sign dispersion at both arms. One pair per pulse.
pub fn run_spectrometer(cfg: &SessionConfig, n_bins: usize) -> Result<SpectrometerResult> {
    cfg.validate()?;
    let p = &cfg.phys;
    let spdc = cfg.spdc_source.params(p);
    let streams = Streams::new(cfg.seed);
    let make = |slot: u64| sample_pair(&mut streams.stream(Domain::Source, slot), &spdc, slot, 0.0);
    let pairs: Vec<EprPair> = if cfg.parallel {
        (0..cfg.pulses).into_par_iter().map(make).collect()
    } else {
        (0..cfg.pulses).map(make).collect()
    };
    spectrometer_mode(
        &pairs,
        &cfg.dispersive_a.element(p),
        &cfg.dispersive_b.element(p),
        &cfg.detector_a,
        &cfg.detector_b,
        p,
        spdc.nu_p0,
        &streams,
        n_bins,
    )
}
