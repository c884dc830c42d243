use nalgebra::{DMatrix, DVector};

use crate::data::HedgeSample;
use crate::error::{Error, Result};
use crate::market_math::{hw_delta_from_greeks, HwCoefficients, OptionKind};

use super::{check_kinds, HedgeRatioModel, ModelVariant};

/// Designs whose column-equilibrated condition number exceeds this are
/// rejected as rank deficient.
const MAX_CONDITION: f64 = 1e12;

/// Inputs of one Hull-White regression row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HwObservation {
    pub delta_s: f64,
    pub delta_v: f64,
    pub bs_delta: f64,
    pub bs_vega: f64,
    pub spot: f64,
    pub ttm: f64,
}

impl HwObservation {
    pub fn from_sample(s: &HedgeSample) -> Self {
        Self {
            delta_s: s.delta_s,
            delta_v: s.delta_v,
            bs_delta: s.bs_delta,
            bs_vega: s.bs_vega,
            spot: s.spot,
            ttm: s.ttm,
        }
    }
}

/// The Hull-White hedge-ratio formula with fitted coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HwModel {
    pub kind: OptionKind,
    pub coef: HwCoefficients,
}

impl HwModel {
    pub fn new(kind: OptionKind, coef: HwCoefficients) -> Self {
        Self { kind, coef }
    }

    /// Training residual sum of squares `Σ(ΔV − δ_HW·ΔS)²`.
    pub fn residual_sum_of_squares(&self, obs: &[HwObservation]) -> f64 {
        obs.iter()
            .map(|o| {
                let d = hw_delta_from_greeks(o.bs_delta, o.bs_vega, o.spot, o.ttm, &self.coef);
                let e = o.delta_v - d * o.delta_s;
                e * e
            })
            .sum()
    }
}

impl HedgeRatioModel for HwModel {
    fn kind(&self) -> OptionKind {
        self.kind
    }

    fn variant(&self) -> ModelVariant {
        ModelVariant::Hw
    }

    fn predict(&self, samples: &[HedgeSample]) -> Result<Vec<f64>> {
        check_kinds(self.kind, samples)?;
        Ok(samples
            .iter()
            .map(|s| hw_delta_from_greeks(s.bs_delta, s.bs_vega, s.spot, s.ttm, &self.coef))
            .collect())
    }
}

/// Fits the Hull-White coefficients on hedge samples of one kind.
pub fn fit_hw(kind: OptionKind, samples: &[HedgeSample]) -> Result<HwModel> {
    check_kinds(kind, samples)?;
    let obs: Vec<HwObservation> = samples.iter().map(HwObservation::from_sample).collect();
    fit_hw_observations(kind, &obs)
}

/// Ordinary least squares of `ΔV − δ_BS·ΔS` on
/// `ΔS·ν/(S√τ)·(1, δ_BS, δ_BS²)`, solved by Householder QR on the
/// column-equilibrated design.
pub fn fit_hw_observations(kind: OptionKind, obs: &[HwObservation]) -> Result<HwModel> {
    if obs.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 observations, got {}", obs.len())));
    }
    let n = obs.len();
    let mut x = DMatrix::<f64>::zeros(n, 3);
    let mut y = DVector::<f64>::zeros(n);
    for (i, o) in obs.iter().enumerate() {
        let scale = o.delta_s * o.bs_vega / (o.spot * o.ttm.sqrt());
        x[(i, 0)] = scale;
        x[(i, 1)] = scale * o.bs_delta;
        x[(i, 2)] = scale * o.bs_delta * o.bs_delta;
        y[i] = o.delta_v - o.bs_delta * o.delta_s;
    }
    if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
        return Err(Error::Domain("non-finite regression inputs".into()));
    }

    let norms: Vec<f64> = (0..3).map(|j| x.column(j).norm()).collect();
    if norms.iter().any(|&c| c == 0.0) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    for (j, &c) in norms.iter().enumerate() {
        x.column_mut(j).scale_mut(1.0 / c);
    }

    let qr = x.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    qr.q_tr_mul(&mut y);
    let rhs = y.rows(0, 3).into_owned();
    let beta = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::Singular { condition })?;
    let coef = HwCoefficients::new(beta[0] / norms[0], beta[1] / norms[1], beta[2] / norms[2])?;
    Ok(HwModel { kind, coef })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn generated(n: usize, coef: &HwCoefficients, seed: u64) -> Vec<HwObservation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let bs_delta = rng.random_range(0.05..0.95);
                let spot = rng.random_range(1500.0..2500.0);
                let ttm: f64 = rng.random_range(14.0..365.0) / 365.0;
                let bs_vega = spot * ttm.sqrt() * rng.random_range(0.05..0.4);
                let delta_s = rng.random_range(-40.0..40.0);
                let d = hw_delta_from_greeks(bs_delta, bs_vega, spot, ttm, coef);
                HwObservation {
                    delta_s,
                    delta_v: d * delta_s,
                    bs_delta,
                    bs_vega,
                    spot,
                    ttm,
                }
            })
            .collect()
    }

    #[test]
    fn recovers_noiseless_coefficients() {
        let truth = HwCoefficients::new(0.02, -0.05, 0.03).unwrap();
        let obs = generated(5000, &truth, 1);
        let m = fit_hw_observations(OptionKind::Call, &obs).unwrap();
        assert!((m.coef.a - truth.a).abs() < 1e-8);
        assert!((m.coef.b - truth.b).abs() < 1e-8);
        assert!((m.coef.c - truth.c).abs() < 1e-8);
    }

    #[test]
    fn bs_consistent_data_gives_zero() {
        let obs = generated(200, &HwCoefficients::default(), 2);
        let m = fit_hw_observations(OptionKind::Call, &obs).unwrap();
        for v in [m.coef.a, m.coef.b, m.coef.c] {
            assert!(v.abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn fitted_coefficients_are_locally_optimal() {
        let truth = HwCoefficients::new(0.02, -0.05, 0.03).unwrap();
        let mut obs = generated(2000, &truth, 3);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for o in &mut obs {
            o.delta_v += noise.sample(&mut rng);
        }
        let m = fit_hw_observations(OptionKind::Call, &obs).unwrap();
        let base = m.residual_sum_of_squares(&obs);
        for k in 0..3 {
            for h in [-1e-3, 1e-3] {
                let mut c = m.coef;
                match k {
                    0 => c.a += h,
                    1 => c.b += h,
                    _ => c.c += h,
                }
                let rss = HwModel::new(OptionKind::Call, c).residual_sum_of_squares(&obs);
                assert!(rss >= base, "coordinate {k} step {h}");
            }
        }
    }

    #[test]
    fn rank_deficient_design_reports_condition() {
        let truth = HwCoefficients::new(0.02, -0.05, 0.03).unwrap();
        let mut obs = generated(50, &truth, 5);
        for o in &mut obs {
            o.bs_delta = 0.5;
        }
        match fit_hw_observations(OptionKind::Call, &obs) {
            Err(Error::Singular { condition }) => assert!(condition > 1e12),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn too_few_observations() {
        let obs = generated(2, &HwCoefficients::default(), 6);
        assert!(fit_hw_observations(OptionKind::Put, &obs).is_err());
    }
}
