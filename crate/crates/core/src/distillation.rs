//! Sifting, conversion of readings to dimensionless key elements, mod-√π
//! distillation and QBER estimation.
//!
//! Alice broadcasts `m = q_A mod √π`. Both parties subtract `m`, round to the
//! nearest multiple of √π and keep the parity of that multiple. Bits agree
//! whenever `|q_B - q_A| < √π/2`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::DetectionEvent;
use crate::optics::Basis;
use crate::security::SQRT_PI;
use crate::stats::wilson_95;
use crate::units::{time_to_position, wavevector_offset, PhysParams};

/// Both parties clicked in the same slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coincidence {
    pub slot_id: u64,
    pub a: DetectionEvent,
    pub b: DetectionEvent,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SiftCounts {
    pub sent: u64,
    pub clicks_a: u64,
    pub clicks_b: u64,
    /// Slots where both parties clicked.
    pub coincidences: u64,
    /// Coincidences measured in matching bases.
    pub same_basis: u64,
    /// Matching-basis coincidences outside the coincidence window.
    pub window_rejected: u64,
    /// Key elements produced.
    pub kept: u64,
}

impl SiftCounts {
    /// Bob's clicks per pulse sent (prepare-and-measure accounting).
    pub fn gain_receiver(&self) -> f64 {
        ratio(self.clicks_b, self.sent)
    }

    /// Coincidences per pulse (entanglement accounting).
    pub fn gain_coincidence(&self) -> f64 {
        ratio(self.coincidences, self.sent)
    }

    pub fn merge(&mut self, other: &SiftCounts) {
        self.sent += other.sent;
        self.clicks_a += other.clicks_a;
        self.clicks_b += other.clicks_b;
        self.coincidences += other.coincidences;
        self.same_basis += other.same_basis;
        self.window_rejected += other.window_rejected;
        self.kept += other.kept;
    }
}

fn ratio(k: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

/// Keep slots where both parties clicked in the same basis, and (when a
/// window is given) with click times no more than `window` apart.
pub fn sift(
    a: &[Option<DetectionEvent>],
    b: &[Option<DetectionEvent>],
    window: Option<f64>,
) -> Result<(Vec<Coincidence>, SiftCounts)> {
    if a.len() != b.len() {
        return Err(Error::Misaligned {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut counts = SiftCounts {
        sent: a.len() as u64,
        ..SiftCounts::default()
    };
    let mut kept = Vec::new();
    for (ea, eb) in a.iter().zip(b) {
        counts.clicks_a += ea.is_some() as u64;
        counts.clicks_b += eb.is_some() as u64;
        let (Some(ea), Some(eb)) = (ea, eb) else {
            continue;
        };
        counts.coincidences += 1;
        if ea.basis != eb.basis {
            continue;
        }
        counts.same_basis += 1;
        if let Some(w) = window {
            if !((ea.t_measured - eb.t_measured).abs() <= w) {
                counts.window_rejected += 1;
                continue;
            }
        }
        counts.kept += 1;
        kept.push(Coincidence {
            slot_id: ea.slot_id,
            a: *ea,
            b: *eb,
        });
    }
    Ok((kept, counts))
}

/// Linear map from physical readings to dimensionless quadratures:
/// time `T` to `q = (c/n)(T - origin_time) / s`, frequency `ν` to
/// `q = s · 2πn(ν - origin_freq) / c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleMap {
    /// Scale length (m).
    pub s: f64,
    pub origin_time: f64,
    pub origin_freq: f64,
}

impl ScaleMap {
    pub fn new(s: f64, origin_time: f64, origin_freq: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain("scale length", format!("{s} must be positive and finite")));
        }
        Ok(Self {
            s,
            origin_time,
            origin_freq,
        })
    }

    pub fn to_q(&self, basis: Basis, reading: f64, p: &PhysParams) -> f64 {
        match basis {
            Basis::Time => time_to_position(reading - self.origin_time, p) / self.s,
            Basis::Frequency => self.s * wavevector_offset(reading - self.origin_freq, p),
        }
    }
}

/// A matched-basis pair of correlated dimensionless values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyElement {
    pub slot_id: u64,
    pub basis: Basis,
    pub q_a: f64,
    pub q_b: f64,
}

/// Key element from the parties' readings (`reading` fields of the events).
pub fn to_dimensionless(c: &Coincidence, scale: &ScaleMap, p: &PhysParams) -> KeyElement {
    KeyElement {
        slot_id: c.slot_id,
        basis: c.a.basis,
        q_a: scale.to_q(c.a.basis, c.a.reading, p),
        q_b: scale.to_q(c.b.basis, c.b.reading, p),
    }
}

fn parity(k: f64) -> u8 {
    k.rem_euclid(2.0) as u8
}

/// Alice's side: the public remainder `m` in `[0, √π)` and her bit.
pub fn gp_encode(q_a: f64) -> (f64, u8) {
    let mut m = q_a.rem_euclid(SQRT_PI);
    if m >= SQRT_PI {
        // rem_euclid of a tiny negative number can round up to the modulus
        m = 0.0;
    }
    let k = ((q_a - m) / SQRT_PI).round();
    (m, parity(k))
}

/// Bob's side: parity of the nearest multiple of √π to `q_b - m`.
pub fn gp_decode(q_b: f64, m: f64) -> u8 {
    parity(((q_b - m) / SQRT_PI).round())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BitRecord {
    pub slot_id: u64,
    pub basis: Basis,
    pub bit_a: u8,
    pub bit_b: u8,
    pub broadcast_m: f64,
}

pub fn distill(e: &KeyElement) -> BitRecord {
    let (m, bit_a) = gp_encode(e.q_a);
    BitRecord {
        slot_id: e.slot_id,
        basis: e.basis,
        bit_a,
        bit_b: gp_decode(e.q_b, m),
        broadcast_m: m,
    }
}

/// Disagreement fraction with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub value: f64,
    pub ci_95: (f64, f64),
    pub errors: u64,
    pub n: u64,
}

impl Rate {
    fn from_counts(errors: u64, n: u64) -> Option<Self> {
        (n > 0).then(|| Rate {
            value: errors as f64 / n as f64,
            ci_95: wilson_95(errors as usize, n as usize),
            errors,
            n,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QberEstimate {
    pub pooled: Rate,
    pub time_basis: Option<Rate>,
    pub freq_basis: Option<Rate>,
    /// Slot ids of the disclosed test records, ascending.
    pub test_slots: Vec<u64>,
    /// Records left for the key, in input order.
    pub key: Vec<BitRecord>,
}

/// Disclose a uniform random `ceil(test_fraction * N)` records, compare them
/// and remove them from the key.
pub fn estimate_qber<R: Rng + ?Sized>(
    bits: &[BitRecord],
    test_fraction: f64,
    rng: &mut R,
) -> Result<QberEstimate> {
    if bits.is_empty() {
        return Err(Error::Empty("no sifted bits"));
    }
    if !(test_fraction > 0.0 && test_fraction <= 1.0) {
        return Err(Error::domain("test_fraction", format!("{test_fraction} is outside (0, 1]")));
    }
    let n = bits.len();
    let n_test = ((test_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut is_test = vec![false; n];
    for i in rand::seq::index::sample(rng, n, n_test) {
        is_test[i] = true;
    }
    let mut errs = [0u64; 2];
    let mut tested = [0u64; 2];
    let mut test_slots = Vec::with_capacity(n_test);
    let mut key = Vec::with_capacity(n - n_test);
    for (rec, test) in bits.iter().zip(is_test) {
        if test {
            let i = rec.basis as usize;
            tested[i] += 1;
            errs[i] += (rec.bit_a != rec.bit_b) as u64;
            test_slots.push(rec.slot_id);
        } else {
            key.push(*rec);
        }
    }
    test_slots.sort_unstable();
    Ok(QberEstimate {
        pooled: Rate::from_counts(errs[0] + errs[1], tested[0] + tested[1]).expect("n_test >= 1"),
        time_basis: Rate::from_counts(errs[Basis::Time as usize], tested[Basis::Time as usize]),
        freq_basis: Rate::from_counts(
            errs[Basis::Frequency as usize],
            tested[Basis::Frequency as usize],
        ),
        test_slots,
        key,
    })
}
