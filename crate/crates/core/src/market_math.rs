//! Closed-form Black-Scholes quantities and the Hull-White hedge ratio.
//!
//! Greeks are "practitioner" sensitivities: the Black-Scholes formulas
//! evaluated at each option's own implied volatility. Deltas follow the
//! convention `δ_call = N(d)`, `δ_put = N(d) − 1`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    /// The one-letter flag used in quote files.
    pub fn flag(self) -> char {
        match self {
            OptionKind::Call => 'C',
            OptionKind::Put => 'P',
        }
    }
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        })
    }
}

impl FromStr for OptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c" | "call" => Ok(OptionKind::Call),
            "p" | "put" => Ok(OptionKind::Put),
            other => Err(Error::Domain(format!("unknown option kind `{other}`"))),
        }
    }
}

/// Market and contract inputs to the Black-Scholes formulas.
///
/// Construction rejects non-positive spot, strike, volatility or
/// time to maturity instead of clamping them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingInputs {
    spot: f64,
    strike: f64,
    rate: f64,
    div_yield: f64,
    vol: f64,
    ttm: f64,
}

impl PricingInputs {
    pub fn new(spot: f64, strike: f64, rate: f64, div_yield: f64, vol: f64, ttm: f64) -> Result<Self> {
        let positive = [("spot", spot), ("strike", strike), ("vol", vol), ("ttm", ttm)];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Domain(format!("{name} must be finite and > 0, got {value}")));
            }
        }
        for (name, value) in [("rate", rate), ("div_yield", div_yield)] {
            if !value.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {value}")));
            }
        }
        Ok(Self {
            spot,
            strike,
            rate,
            div_yield,
            vol,
            ttm,
        })
    }

    pub fn spot(&self) -> f64 {
        self.spot
    }
    pub fn strike(&self) -> f64 {
        self.strike
    }
    pub fn rate(&self) -> f64 {
        self.rate
    }
    pub fn div_yield(&self) -> f64 {
        self.div_yield
    }
    pub fn vol(&self) -> f64 {
        self.vol
    }
    pub fn ttm(&self) -> f64 {
        self.ttm
    }
}

/// Coefficients `(a, b, c)` of the Hull-White quadratic correction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HwCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HwCoefficients {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::Domain(format!("non-finite coefficients ({a}, {b}, {c})")));
        }
        Ok(Self { a, b, c })
    }
}

/// Standard normal CDF.
///
/// Evaluated as `erfc(−x/√2)/2`, which keeps full relative precision in
/// the lower tail; absolute error stays below 1e-15 on the real line.
pub fn norm_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("norm_cdf of non-finite value {x}")));
    }
    Ok(0.5 * libm::erfc(-x * FRAC_1_SQRT_2))
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`norm_cdf`] on `(0, 1)`.
pub fn norm_inv_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("norm_inv_cdf requires p in (0,1), got {p}")));
    }
    Ok(Normal::standard().inverse_cdf(p))
}

fn cdf(x: f64) -> f64 {
    // d is finite for validated inputs
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `d = [ln(S/K) + (r − q + σ²/2)τ] / (σ√τ)`.
pub fn bs_d(p: &PricingInputs) -> f64 {
    let vol_sqrt_t = p.vol * p.ttm.sqrt();
    ((p.spot / p.strike).ln() + (p.rate - p.div_yield + 0.5 * p.vol * p.vol) * p.ttm) / vol_sqrt_t
}

pub fn bs_delta(p: &PricingInputs, kind: OptionKind) -> f64 {
    let n = cdf(bs_d(p));
    match kind {
        OptionKind::Call => n,
        OptionKind::Put => n - 1.0,
    }
}

/// Vega per unit of volatility, `S·e^{−qτ}·φ(d)·√τ`; same for calls and puts.
pub fn bs_vega(p: &PricingInputs) -> f64 {
    p.spot * (-p.div_yield * p.ttm).exp() * norm_pdf(bs_d(p)) * p.ttm.sqrt()
}

pub fn bs_gamma(p: &PricingInputs) -> f64 {
    (-p.div_yield * p.ttm).exp() * norm_pdf(bs_d(p)) / (p.spot * p.vol * p.ttm.sqrt())
}

/// Theta per year (calendar time decay of the price).
pub fn bs_theta(p: &PricingInputs, kind: OptionKind) -> f64 {
    let d1 = bs_d(p);
    let d2 = d1 - p.vol * p.ttm.sqrt();
    let fwd_disc = p.spot * (-p.div_yield * p.ttm).exp();
    let k_disc = p.strike * (-p.rate * p.ttm).exp();
    let decay = -fwd_disc * norm_pdf(d1) * p.vol / (2.0 * p.ttm.sqrt());
    match kind {
        OptionKind::Call => decay - p.rate * k_disc * cdf(d2) + p.div_yield * fwd_disc * cdf(d1),
        OptionKind::Put => decay + p.rate * k_disc * cdf(-d2) - p.div_yield * fwd_disc * cdf(-d1),
    }
}

pub fn bs_price(p: &PricingInputs, kind: OptionKind) -> f64 {
    let d1 = bs_d(p);
    let d2 = d1 - p.vol * p.ttm.sqrt();
    let fwd_disc = p.spot * (-p.div_yield * p.ttm).exp();
    let k_disc = p.strike * (-p.rate * p.ttm).exp();
    match kind {
        OptionKind::Call => fwd_disc * cdf(d1) - k_disc * cdf(d2),
        OptionKind::Put => k_disc * cdf(-d2) - fwd_disc * cdf(-d1),
    }
}

/// Hull-White hedge ratio built from the practitioner delta and vega.
pub fn hw_delta(p: &PricingInputs, kind: OptionKind, coef: &HwCoefficients) -> f64 {
    hw_delta_from_greeks(bs_delta(p, kind), bs_vega(p), p.spot, p.ttm, coef)
}

/// `δ_HW = δ_BS + ν_BS/(S√τ)·(a + bδ_BS + cδ_BS²)` with the Greeks supplied.
pub fn hw_delta_from_greeks(delta: f64, vega: f64, spot: f64, ttm: f64, coef: &HwCoefficients) -> f64 {
    if coef.a == 0.0 && coef.b == 0.0 && coef.c == 0.0 {
        return delta;
    }
    delta + vega / (spot * ttm.sqrt()) * hw_polynomial(delta, coef)
}

pub(crate) fn hw_polynomial(delta: f64, coef: &HwCoefficients) -> f64 {
    coef.a + coef.b * delta + coef.c * delta * delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Marsaglia's series `N(x) = 1/2 + φ(x)·Σ x^{2n+1}/(2n+1)!!`.
    /// All terms share a sign, so no cancellation occurs.
    fn cdf_series_oracle(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 1.0;
        while term.abs() > 1e-20 * sum.abs() {
            term *= x * x / (2.0 * n + 1.0);
            sum += term;
            n += 1.0;
        }
        0.5 + norm_pdf(x) * sum
    }

    fn inputs(s: f64, k: f64, r: f64, q: f64, v: f64, t: f64) -> PricingInputs {
        PricingInputs::new(s, k, r, q, v, t).unwrap()
    }

    fn atm() -> PricingInputs {
        inputs(100.0, 100.0, 0.0, 0.0, 0.2, 1.0)
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(norm_cdf(0.0).unwrap(), 0.5);
        // mpmath, 40 digits
        let frozen = [
            (1.96, 0.975_002_104_851_779_6),
            (-8.0, 6.220_960_574_271_784e-16),
            (-5.0, 2.866_515_718_791_939e-7),
            (-3.3, 4.834_241_423_837_772e-4),
            (-1.0, 0.158_655_253_931_457_05),
            (0.5, 0.691_462_461_274_013_1),
            (2.5, 0.993_790_334_674_223_9),
            (6.0, 0.999_999_999_013_412_4),
        ];
        for (x, want) in frozen {
            let got = norm_cdf(x).unwrap();
            assert!((got - want).abs() <= 1e-15, "N({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn cdf_matches_series_on_grid() {
        let mut worst = 0.0_f64;
        for i in 0..=16_000 {
            let x = -8.0 + i as f64 * 1e-3;
            worst = worst.max((norm_cdf(x).unwrap() - cdf_series_oracle(x)).abs());
        }
        assert!(worst <= 1e-12, "max abs error {worst:e}");
    }

    #[test]
    fn cdf_symmetry_and_monotone() {
        let mut prev = 0.0;
        for i in 0..10_000 {
            let x = -6.0 + 12.0 * i as f64 / 9_999.0;
            let n = norm_cdf(x).unwrap();
            assert!(n > prev, "not increasing at {x}");
            prev = n;
            assert!((n + norm_cdf(-x).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(norm_cdf(f64::NAN).is_err());
        assert!(norm_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn inputs_reject_invalid() {
        assert!(PricingInputs::new(0.0, 100.0, 0.0, 0.0, 0.2, 1.0).is_err());
        assert!(PricingInputs::new(100.0, -1.0, 0.0, 0.0, 0.2, 1.0).is_err());
        assert!(PricingInputs::new(100.0, 100.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(PricingInputs::new(100.0, 100.0, 0.0, 0.0, 0.2, 0.0).is_err());
        assert!(PricingInputs::new(100.0, 100.0, f64::NAN, 0.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn d_values() {
        assert!((bs_d(&atm()) - 0.1).abs() < 1e-15);
        assert!((bs_d(&inputs(100.0, 100.0, 0.02, 0.01, 0.2, 0.25)) - 0.075).abs() < 1e-14);
        // mpmath
        let d = bs_d(&inputs(100.0, 120.0, 0.0, 0.0, 0.25, 0.5));
        assert!((d - (-0.942_978_125_675_630_1)).abs() < 1e-14, "{d}");
    }

    #[test]
    fn delta_values() {
        let call = bs_delta(&atm(), OptionKind::Call);
        assert!((call - 0.539_827_837_277_029).abs() < 1e-14);
        let put = bs_delta(&atm(), OptionKind::Put);
        assert!((put - (call - 1.0)).abs() < 1e-15);
        assert!((put + 0.460_172_162_722_971).abs() < 1e-14);
        let deep = inputs(120.0, 100.0, 0.01, 0.0, 1e-8, 0.5);
        assert!((bs_delta(&deep, OptionKind::Call) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vega_values() {
        assert!((bs_vega(&atm()) - 39.695_254_747_701_18).abs() < 1e-11);
        let base = inputs(100.0, 90.0, 0.01, 0.02, 0.3, 0.4);
        let scaled = inputs(200.0, 180.0, 0.01, 0.02, 0.3, 0.4);
        assert!((bs_vega(&scaled) - 2.0 * bs_vega(&base)).abs() < 1e-12);
        let short = inputs(100.0, 100.0, 0.0, 0.0, 0.2, 1e-12);
        assert!(bs_vega(&short) < 1e-4);
    }

    #[test]
    fn price_values() {
        assert!((bs_price(&atm(), OptionKind::Call) - 7.965_567_455_405_796).abs() < 1e-12);
        let tiny_strike = inputs(100.0, 1e-9, 0.03, 0.01, 0.2, 0.5);
        let fwd = 100.0 * (-0.01_f64 * 0.5).exp();
        assert!((bs_price(&tiny_strike, OptionKind::Call) - fwd).abs() < 1e-8);
    }

    #[test]
    fn greeks_agree_with_finite_differences() {
        let p = inputs(2000.0, 2100.0, 0.02, 0.015, 0.22, 0.3);
        let h = 1e-3;
        let up = inputs(2000.0 + h, 2100.0, 0.02, 0.015, 0.22, 0.3);
        let dn = inputs(2000.0 - h, 2100.0, 0.02, 0.015, 0.22, 0.3);
        let fd_gamma = (bs_price(&up, OptionKind::Call) - 2.0 * bs_price(&p, OptionKind::Call)
            + bs_price(&dn, OptionKind::Call))
            / (h * h);
        assert!((fd_gamma - bs_gamma(&p)).abs() < 1e-4 * bs_gamma(&p) + 1e-6);
        let hv = 1e-6;
        let vu = inputs(2000.0, 2100.0, 0.02, 0.015, 0.22 + hv, 0.3);
        let vd = inputs(2000.0, 2100.0, 0.02, 0.015, 0.22 - hv, 0.3);
        let fd_vega = (bs_price(&vu, OptionKind::Put) - bs_price(&vd, OptionKind::Put)) / (2.0 * hv);
        assert!((fd_vega - bs_vega(&p)).abs() < 1e-5 * bs_vega(&p));
        let ht = 1e-6;
        for kind in [OptionKind::Call, OptionKind::Put] {
            let tu = inputs(2000.0, 2100.0, 0.02, 0.015, 0.22, 0.3 + ht);
            let td = inputs(2000.0, 2100.0, 0.02, 0.015, 0.22, 0.3 - ht);
            let fd_theta = -(bs_price(&tu, kind) - bs_price(&td, kind)) / (2.0 * ht);
            assert!((fd_theta - bs_theta(&p, kind)).abs() < 1e-4 * bs_theta(&p, kind).abs());
        }
    }

    #[test]
    fn hw_delta_examples() {
        let p = inputs(100.0, 95.0, 0.01, 0.0, 0.3, 0.25);
        let zero = HwCoefficients::default();
        assert_eq!(hw_delta(&p, OptionKind::Call, &zero), bs_delta(&p, OptionKind::Call));
        let unit = HwCoefficients::new(1.0, 0.0, 0.0).unwrap();
        let got = hw_delta_from_greeks(0.5, 20.0, 100.0, 0.25, &unit);
        assert!((got - 0.9).abs() < 1e-15);
    }

    #[test]
    fn put_inverse_cdf_roundtrip() {
        for p in [1e-6, 0.05, 0.3, 0.5, 0.77, 0.999] {
            let x = norm_inv_cdf(p).unwrap();
            assert!((norm_cdf(x).unwrap() - p).abs() < 1e-13 * p.max(1e-3));
        }
        assert!(norm_inv_cdf(0.0).is_err());
    }

    fn valid_inputs() -> impl Strategy<Value = PricingInputs> {
        (
            10.0..5000.0f64,
            0.5..1.5f64,
            -0.02..0.1f64,
            0.0..0.05f64,
            0.05..1.0f64,
            0.01..3.0f64,
        )
            .prop_map(|(s, m, r, q, v, t)| inputs(s, s * m, r, q, v, t))
    }

    proptest! {
        #[test]
        fn put_call_delta_relation(p in valid_inputs()) {
            let call = bs_delta(&p, OptionKind::Call);
            let put = bs_delta(&p, OptionKind::Put);
            prop_assert!((put - (call - 1.0)).abs() <= 1e-14);
            prop_assert!((0.0..=1.0).contains(&call));
            prop_assert!((-1.0..=0.0).contains(&put));
        }

        #[test]
        fn put_call_parity(p in valid_inputs()) {
            let lhs = bs_price(&p, OptionKind::Call) - bs_price(&p, OptionKind::Put);
            let rhs = p.spot() * (-p.div_yield() * p.ttm()).exp()
                - p.strike() * (-p.rate() * p.ttm()).exp();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * p.spot().max(1.0) / 10.0 + 1e-10,
                "parity gap {}", lhs - rhs);
        }

        #[test]
        fn price_above_discounted_intrinsic(p in valid_inputs()) {
            let fwd = p.spot() * (-p.div_yield() * p.ttm()).exp();
            let k = p.strike() * (-p.rate() * p.ttm()).exp();
            prop_assert!(bs_price(&p, OptionKind::Call) >= (fwd - k).max(0.0) - 1e-9);
            prop_assert!(bs_price(&p, OptionKind::Put) >= (k - fwd).max(0.0) - 1e-9);
        }

        #[test]
        fn hw_zero_coefficients_is_bs(p in valid_inputs()) {
            let zero = HwCoefficients::default();
            for kind in [OptionKind::Call, OptionKind::Put] {
                prop_assert_eq!(hw_delta(&p, kind, &zero).to_bits(), bs_delta(&p, kind).to_bits());
            }
        }

        #[test]
        fn hw_matches_scalar_reevaluation(p in valid_inputs(), a in -0.5..0.5f64, b in -0.5..0.5f64, c in -0.5..0.5f64) {
            let coef = HwCoefficients::new(a, b, c).unwrap();
            // independent scalar evaluation of every term
            let d = ((p.spot() / p.strike()).ln()
                + (p.rate() - p.div_yield() + p.vol() * p.vol() / 2.0) * p.ttm())
                / (p.vol() * p.ttm().sqrt());
            let delta = cdf_series_oracle(d.clamp(-8.0, 8.0));
            let vega = p.spot() * (-p.div_yield() * p.ttm()).exp()
                * (-d * d / 2.0).exp() / (2.0 * PI).sqrt() * p.ttm().sqrt();
            let want = delta + vega / (p.spot() * p.ttm().sqrt()) * (a + b * delta + c * delta * delta);
            prop_assert!((hw_delta(&p, OptionKind::Call, &coef) - want).abs() < 1e-11);
        }
    }
}
