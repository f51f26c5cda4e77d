//! Analytic security math: binary entropy, key rates, the QBER bound and the
//! detector-limited conditional variance.
//!
//! Δ² is the conditional variance of the dimensionless key elements: the
//! pairwise error `q_A - q_B` has density `exp(-x²/Δ²) / sqrt(π Δ²)`, so its
//! variance is `Δ²/2`.

use std::f64::consts::{LN_2, PI, SQRT_2};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::units::{fwhm_to_rms, PhysParams};

/// Lattice period of the mod-√π distillation.
pub const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Binary entropy in bits, with `h2(0) = h2(1) = 0`.
pub fn h2(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("x", format!("{x} is outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

fn check_rate_inputs(e: f64, f: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&e) {
        return Err(Error::domain("qber", format!("{e} is outside [0, 0.5]")));
    }
    if !(f >= 1.0 && f.is_finite()) {
        return Err(Error::domain("f", format!("{f} must be finite and at least 1")));
    }
    Ok(())
}

/// Asymptotic key rate per sifted-or-not pulse with perfect gain,
/// `(1 - f h2(e) - h2(e)) / 2`. Negative values are returned as is.
pub fn keyrate_ideal(e: f64, f: f64) -> Result<f64> {
    check_rate_inputs(e, f)?;
    let h = h2(e)?;
    Ok(0.5 * (1.0 - f * h - h))
}

/// Key rate with only the fraction `q1` of pulses contributing.
pub fn keyrate_gain(q1: f64, e: f64, f: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q1) {
        return Err(Error::domain("gain", format!("{q1} is outside [0, 1]")));
    }
    Ok(q1 * keyrate_ideal(e, f)?)
}

/// Upper bound on the QBER after mod-√π distillation:
/// `(2Δ/π) exp(-π / (4Δ²))`.
pub fn qber_bound(delta_sq: f64) -> Result<f64> {
    if !(delta_sq > 0.0 && delta_sq.is_finite()) {
        return Err(Error::domain("delta_sq", format!("{delta_sq} must be positive and finite")));
    }
    Ok(2.0 * delta_sq.sqrt() / PI * (-PI / (4.0 * delta_sq)).exp())
}

/// Exact bit-error probability of mod-√π distillation when
/// `q_B - q_A ~ N(0, Δ²/2)`: the Gaussian mass in the windows that round to
/// an odd multiple of √π.
pub fn parity_error_exact(delta_sq: f64) -> Result<f64> {
    if !(delta_sq >= 0.0 && delta_sq.is_finite()) {
        return Err(Error::domain("delta_sq", format!("{delta_sq} must be nonnegative and finite")));
    }
    if delta_sq == 0.0 {
        return Ok(0.0);
    }
    let sigma = (delta_sq / 2.0).sqrt();
    // upper tail mass beyond x
    let tail = |x: f64| 0.5 * libm::erfc(x / (sigma * SQRT_2));
    let mut sum = 0.0;
    let mut k = 0u32;
    loop {
        let lo = (2.0 * k as f64 + 0.5) * SQRT_PI;
        if lo > 40.0 * sigma {
            break;
        }
        sum += tail(lo) - tail(lo + SQRT_PI);
        k += 1;
    }
    Ok(2.0 * sum)
}

/// Detector-limited spreads of the conjugate variables and the resulting Δ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceBudget {
    /// RMS timing spread (s).
    pub delta_t: f64,
    /// Position spread `(c/n) Δt` (m).
    pub delta_x: f64,
    /// Wavevector spread `2πn Δt / (λ² |D|)` (rad/m).
    pub delta_k: f64,
    /// `2 Δx Δk`.
    pub delta_sq: f64,
}

impl VarianceBudget {
    /// Scale length `sqrt(Δx / Δk)` that makes both dimensionless spreads equal.
    pub fn scale_length(&self) -> f64 {
        (self.delta_x / self.delta_k).sqrt()
    }
}

fn check_chain_inputs(jitter_fwhm: f64, d_lambda: f64, p: &PhysParams) -> Result<()> {
    p.validate()?;
    if !(d_lambda.is_finite() && d_lambda != 0.0) {
        return Err(Error::domain("d_lambda", "dispersion must be finite and nonzero"));
    }
    if !(jitter_fwhm >= 0.0 && jitter_fwhm.is_finite()) {
        return Err(Error::domain("jitter_fwhm", "must be finite and nonnegative"));
    }
    Ok(())
}

/// Δ² built from the position and wavevector spreads a detector with the
/// given jitter produces behind a dispersive element.
pub fn variance_chain(jitter_fwhm: f64, d_lambda: f64, p: &PhysParams) -> Result<VarianceBudget> {
    check_chain_inputs(jitter_fwhm, d_lambda, p)?;
    let n = p.refractive_index;
    let dt = fwhm_to_rms(jitter_fwhm)?;
    let delta_x = p.c() / n * dt;
    let delta_k = 2.0 * PI * n * dt / (p.wavelength * p.wavelength * d_lambda.abs());
    Ok(VarianceBudget {
        delta_t: dt,
        delta_x,
        delta_k,
        delta_sq: 2.0 * delta_x * delta_k,
    })
}

/// Closed form of the same Δ²: `π c δt² / (ln 2 · λ² |D|)`.
pub fn variance_chain_closed(jitter_fwhm: f64, d_lambda: f64, p: &PhysParams) -> Result<f64> {
    check_chain_inputs(jitter_fwhm, d_lambda, p)?;
    Ok(PI * p.c() * jitter_fwhm * jitter_fwhm / (LN_2 * p.wavelength * p.wavelength * d_lambda.abs()))
}

/// Jitter FWHM that yields a given Δ² (inverse of the closed form).
pub fn jitter_for_delta_sq(delta_sq: f64, d_lambda: f64, p: &PhysParams) -> f64 {
    (delta_sq * LN_2 * p.wavelength * p.wavelength * d_lambda.abs() / (PI * p.c())).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub jitter_fwhm: f64,
    pub delta_sq: f64,
    /// Upper bound on the QBER.
    pub qber: f64,
    /// Exact parity error for the same Δ².
    pub qber_exact: f64,
    /// Raw `keyrate_ideal(qber, 1)`, possibly negative.
    pub keyrate: f64,
}

/// QBER and key rate against detector jitter on an evenly spaced grid.
pub fn qber_curve(
    jitter_min: f64,
    jitter_max: f64,
    steps: usize,
    d_lambda: f64,
    p: &PhysParams,
) -> Result<Vec<CurveRow>> {
    if !(jitter_min > 0.0 && jitter_max >= jitter_min && jitter_max.is_finite()) {
        return Err(Error::domain("jitter range", "need 0 < min <= max"));
    }
    if steps < 2 {
        return Err(Error::domain("steps", "need at least 2 steps"));
    }
    let span = jitter_max - jitter_min;
    (0..steps)
        .into_par_iter()
        .map(|i| {
            let jitter = jitter_min + span * i as f64 / (steps - 1) as f64;
            let delta_sq = variance_chain(jitter, d_lambda, p)?.delta_sq;
            let qber = qber_bound(delta_sq)?;
            // the bound exceeds 0.5 for very large Δ²; the rate formula is only defined up to 0.5
            let keyrate = keyrate_ideal(qber.min(0.5), 1.0)?;
            Ok(CurveRow {
                jitter_fwhm: jitter,
                delta_sq,
                qber,
                qber_exact: parity_error_exact(delta_sq)?,
                keyrate,
            })
        })
        .collect()
}

/// `jitter_ps,delta_sq,qber,keyrate` rows with fixed formatting.
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("jitter_ps,delta_sq,qber,keyrate\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.6},{:.10e},{:.10e},{:.10e}",
            r.jitter_fwhm * 1e12,
            r.delta_sq,
            r.qber,
            r.keyrate
        );
    }
    out
}

fn bisect(mut lo: f64, mut hi: f64, tol: f64, increasing_root: impl Fn(f64) -> f64) -> f64 {
    // increasing_root(lo) < 0 <= increasing_root(hi)
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if increasing_root(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Jitter FWHM at which the QBER bound reaches `e`.
pub fn bound_crossing(e: f64, d_lambda: f64, p: &PhysParams) -> Result<f64> {
    if !(e > 0.0 && e < 0.5) {
        return Err(Error::domain("qber", "crossing level must lie in (0, 0.5)"));
    }
    check_chain_inputs(0.0, d_lambda, p)?;
    // qber_bound is increasing in Δ²; search ln Δ² in [ln 1e-4, ln 1e2]
    let ln_dsq = bisect(1e-4f64.ln(), 1e2f64.ln(), 1e-14, |x| {
        qber_bound(x.exp()).expect("positive") - e
    });
    Ok(jitter_for_delta_sq(ln_dsq.exp(), d_lambda, p))
}

/// QBER at which `keyrate_ideal(e, f)` vanishes.
pub fn security_threshold(f: f64) -> Result<f64> {
    check_rate_inputs(0.0, f)?;
    Ok(bisect(0.0, 0.5, 1e-12, |e| {
        -keyrate_ideal(e, f).expect("checked inputs")
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryScheme {
    pub product: f64,
    pub satisfied: bool,
}

/// Advisory check for the two-frequency/two-time binary scheme:
/// `|ν2 - ν1| |t2 - t1| <= 1`.
pub fn binary_scheme_constraint(nu1: f64, nu2: f64, t1: f64, t2: f64) -> BinaryScheme {
    let product = (nu2 - nu1).abs() * (t2 - t1).abs();
    BinaryScheme {
        product,
        satisfied: product <= 1.0 + 1e-12,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{parse_quantity, Dimension};

    fn phys(n: f64) -> PhysParams {
        PhysParams {
            refractive_index: n,
            wavelength: 1550e-9,
        }
    }

    const D: f64 = 7.0; // 7000 ps/nm in s/m

    /// Gaussian mass in the odd windows by composite Simpson quadrature.
    fn parity_oracle(delta_sq: f64) -> f64 {
        let var = delta_sq / 2.0;
        let pdf = |x: f64| (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
        let simpson = |a: f64, b: f64| {
            let n = 2000;
            let h = (b - a) / n as f64;
            let mut s = pdf(a) + pdf(b);
            for i in 1..n {
                s += pdf(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let mut total = 0.0;
        for j in (-41i32..=41).filter(|j| j % 2 != 0) {
            let c = j as f64 * SQRT_PI;
            total += simpson(c - SQRT_PI / 2.0, c + SQRT_PI / 2.0);
        }
        total
    }

    #[test]
    fn binary_entropy() {
        assert_eq!(h2(0.5).unwrap(), 1.0);
        assert_eq!(h2(0.0).unwrap(), 0.0);
        assert_eq!(h2(1.0).unwrap(), 0.0);
        assert!((h2(0.11).unwrap() - 0.49992).abs() < 1e-5);
        assert!(h2(1.1).is_err());
        assert!(h2(-0.1).is_err());
    }

    #[test]
    fn key_rates() {
        assert_eq!(keyrate_ideal(0.0, 1.0).unwrap(), 0.5);
        assert_eq!(keyrate_ideal(0.0, 3.0).unwrap(), 0.5);
        let r = keyrate_ideal(0.11, 1.0).unwrap();
        assert!(r.abs() < 1e-4 && r > 0.0, "{r}");
        let h = h2(0.05).unwrap();
        assert!((h - 0.286_397).abs() < 1e-6);
        assert!((keyrate_ideal(0.05, 1.0).unwrap() - 0.5 * (1.0 - 2.0 * h)).abs() < 1e-15);
        assert!((keyrate_ideal(0.05, 1.0).unwrap() - 0.2137).abs() < 1e-4);
        assert_eq!(keyrate_gain(1.0, 0.07, 1.2).unwrap(), keyrate_ideal(0.07, 1.2).unwrap());
        assert!((keyrate_gain(0.1, 0.0, 1.0).unwrap() - 0.05).abs() < 1e-15);
        let direct = 0.5 * 0.1 * (1.0 - 1.16 * h - h);
        assert!((keyrate_gain(0.1, 0.05, 1.16).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.019_069).abs() < 1e-6);
        assert!(keyrate_ideal(0.6, 1.0).is_err());
        assert!(keyrate_ideal(0.1, 0.9).is_err());
        assert!(keyrate_gain(1.5, 0.1, 1.0).is_err());
        assert!(keyrate_ideal(0.3, 1.0).unwrap() < 0.0);
    }

    #[test]
    fn bound_values() {
        assert!((qber_bound(0.3962).unwrap() - 0.0552).abs() < 1e-4);
        assert!((qber_bound(0.12935).unwrap() - 5.3e-4).abs() < 0.05e-4);
        assert!(qber_bound(1e-3).unwrap() < 1e-300);
        assert!(qber_bound(0.0).is_err());
        assert!(qber_bound(-1.0).is_err());
    }

    #[test]
    fn exact_parity_matches_quadrature_and_bound() {
        for dsq in [0.01, 0.05, 0.1, 0.2, 0.3962, 0.6, 1.0, 3.0] {
            let exact = parity_error_exact(dsq).unwrap();
            let oracle = parity_oracle(dsq);
            assert!((exact - oracle).abs() <= 1e-12 + 1e-9 * oracle, "{dsq}: {exact} vs {oracle}");
            assert!(exact <= qber_bound(dsq).unwrap());
        }
        assert_eq!(parity_error_exact(0.0).unwrap(), 0.0);
        // broad noise scrambles the parity
        assert!((parity_error_exact(400.0).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn chain_at_reference_points() {
        let p = phys(1.468);
        let b70 = variance_chain(70e-12, D, &p).unwrap();
        assert!((b70.delta_sq - 0.3962).abs() < 5e-4, "{}", b70.delta_sq);
        assert!((b70.delta_sq - 2.0 * b70.delta_x * b70.delta_k).abs() <= 1e-12 * b70.delta_sq);
        let b40 = variance_chain(40e-12, D, &p).unwrap();
        assert!((b40.delta_sq - 0.1294).abs() < 5e-4);
        // routes agree and n cancels
        for n in [1.0, 1.468, 2.0] {
            let b = variance_chain(70e-12, D, &phys(n)).unwrap();
            let closed = variance_chain_closed(70e-12, D, &phys(n)).unwrap();
            assert!((b.delta_sq / b70.delta_sq - 1.0).abs() < 1e-12);
            assert!((b.delta_sq / closed - 1.0).abs() < 1e-12);
        }
        assert!(variance_chain(70e-12, 0.0, &p).is_err());
        assert!(variance_chain(70e-12, D, &PhysParams { wavelength: 0.0, ..p }).is_err());
    }

    #[test]
    fn curve_reference_rows() {
        let p = PhysParams::default();
        let rows = qber_curve(10e-12, 200e-12, 191, D, &p).unwrap();
        assert_eq!(rows.len(), 191);
        let at = |ps: f64| {
            rows.iter()
                .find(|r| (r.jitter_fwhm - ps * 1e-12).abs() < 1e-16)
                .unwrap()
        };
        assert!((0.050..=0.060).contains(&at(70.0).qber));
        assert!((3e-4..=8e-4).contains(&at(40.0).qber));
        assert!(rows.windows(2).all(|w| w[1].qber >= w[0].qber));
        let crossing = bound_crossing(0.11, D, &p).unwrap();
        assert!((80e-12..95e-12).contains(&crossing), "{crossing}");
        let csv = curve_csv(&qber_curve(10e-12, 200e-12, 2, D, &p).unwrap());
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("jitter_ps,delta_sq,qber,keyrate\n"));
        assert!(qber_curve(0.0, 1e-12, 5, D, &p).is_err());
        assert!(qber_curve(1e-12, 2e-12, 1, D, &p).is_err());
    }

    #[test]
    fn thresholds() {
        let e1 = security_threshold(1.0).unwrap();
        assert!((e1 - 0.1100).abs() < 5e-4, "{e1}");
        assert!(keyrate_ideal(e1, 1.0).unwrap().abs() < 1e-9);
        assert!(security_threshold(1.2).unwrap() < e1);
        assert!(security_threshold(1e6).unwrap() < 1e-5);
        assert!(security_threshold(0.5).is_err());
    }

    #[test]
    fn binary_scheme() {
        let ghz = parse_quantity("1 GHz", Dimension::Frequency).unwrap();
        let ns = parse_quantity("1 ns", Dimension::Time).unwrap();
        let b = binary_scheme_constraint(0.0, ghz, 0.0, ns);
        assert!((b.product - 1.0).abs() < 1e-12);
        assert!(b.satisfied);
        let b = binary_scheme_constraint(0.0, 10.0 * ghz, 0.0, ns);
        assert!((b.product - 10.0).abs() < 1e-9);
        assert!(!b.satisfied);
        let b = binary_scheme_constraint(5.0, 5.0, 0.0, ns);
        assert_eq!(b.product, 0.0);
        assert!(b.satisfied);
    }

    proptest::proptest! {
        #[test]
        fn bound_increases(a in -3.0f64..0.0, b in -3.0f64..0.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            proptest::prop_assume!(hi - lo > 1e-9);
            let (lo, hi) = (10f64.powf(lo), 10f64.powf(hi));
            proptest::prop_assert!(qber_bound(lo).unwrap() <= qber_bound(hi).unwrap());
            if qber_bound(lo).unwrap() > 0.0 {
                proptest::prop_assert!(qber_bound(lo).unwrap() < qber_bound(hi).unwrap());
            }
        }

        #[test]
        fn keyrate_decreases_in_e_and_f(e1 in 0.0f64..0.11, e2 in 0.0f64..0.11, f in 1.0f64..3.0) {
            proptest::prop_assume!((e1 - e2).abs() > 1e-9);
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            proptest::prop_assert!(keyrate_ideal(lo, f).unwrap() > keyrate_ideal(hi, f).unwrap());
            if hi > 0.0 {
                proptest::prop_assert!(keyrate_ideal(hi, f).unwrap() > keyrate_ideal(hi, f + 0.1).unwrap());
            }
        }

        #[test]
        fn chain_routes_agree(
            jitter in 1e-12f64..1e-9, d in 0.01f64..100.0, lambda in 400e-9f64..2e-6, n in 1.0f64..3.0,
            neg in proptest::bool::ANY,
        ) {
            let p = PhysParams { refractive_index: n, wavelength: lambda };
            let d = if neg { -d } else { d };
            let product = variance_chain(jitter, d, &p).unwrap().delta_sq;
            let closed = variance_chain_closed(jitter, d, &p).unwrap();
            proptest::prop_assert!((product / closed - 1.0).abs() < 1e-12);
            let vacuum = variance_chain(jitter, d, &PhysParams { refractive_index: 1.0, ..p }).unwrap().delta_sq;
            proptest::prop_assert!((product / vacuum - 1.0).abs() < 1e-12);
        }
    }
}
