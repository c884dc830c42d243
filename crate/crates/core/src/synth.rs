//! Synthetic option panels from a log-OU stochastic-volatility world, and
//! the local OLS oracle for the variance-minimizing hedge ratio.

use std::collections::{BTreeMap, HashSet};

use chrono::{Datelike, Days, NaiveDate, Weekday};
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{HedgeSample, OptionQuote};
use crate::error::{Error, Result};
use crate::market_math::{bs_delta, bs_gamma, bs_price, bs_theta, bs_vega, OptionKind, PricingInputs};

/// Simulation time step in years.
pub const DT: f64 = 1.0 / 252.0;

/// Parameters of the synthetic market.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_days: usize,
    pub start_date: NaiveDate,
    pub spot0: f64,
    pub vol0: f64,
    /// Long-run volatility σ̄.
    pub long_vol: f64,
    /// Mean-reversion speed α, per year.
    pub mean_rev: f64,
    /// Volatility of log-volatility β, per √year.
    pub vol_of_vol: f64,
    /// Correlation ρ between spot and volatility shocks.
    pub corr: f64,
    pub rate: f64,
    pub div_yield: f64,
    /// Moneyness ratios K/S at listing.
    pub strike_grid: Vec<f64>,
    /// Maturities at listing, in calendar days.
    pub maturity_grid: Vec<i64>,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_days: 2520,
            start_date: NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date"),
            spot0: 2000.0,
            vol0: 0.2,
            long_vol: 0.2,
            mean_rev: 3.0,
            vol_of_vol: 1.0,
            corr: -0.7,
            rate: 0.02,
            div_yield: 0.015,
            strike_grid: (0..13).map(|i| 0.85 + 0.025 * i as f64).collect(),
            maturity_grid: vec![30, 60, 91, 182],
            seed: 42,
        }
    }
}

impl GeneratorConfig {
    /// The constant-volatility world: no vol-of-vol and `vol0 = σ̄`.
    pub fn constant_vol(mut self) -> Self {
        self.vol_of_vol = 0.0;
        self.vol0 = self.long_vol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_days < 23 {
            return bad(format!("n_days must be at least 23, got {}", self.n_days));
        }
        if !(self.spot0 > 0.0 && self.vol0 > 0.0 && self.long_vol > 0.0) {
            return bad("spot0, vol0 and long_vol must be positive".into());
        }
        if !(self.vol_of_vol >= 0.0 && self.mean_rev >= 0.0) {
            return bad("vol_of_vol and mean_rev must be non-negative".into());
        }
        if !(self.corr.abs() <= 1.0) {
            return bad(format!("corr must lie in [-1, 1], got {}", self.corr));
        }
        if !(self.rate.is_finite() && self.div_yield.is_finite()) {
            return bad("rate and div_yield must be finite".into());
        }
        if self.strike_grid.is_empty() || self.strike_grid.iter().any(|m| !(*m > 0.0)) {
            return bad("strike_grid must be non-empty and positive".into());
        }
        if self.maturity_grid.is_empty() || self.maturity_grid.iter().any(|d| *d < 1) {
            return bad("maturity_grid must be non-empty with maturities of at least one day".into());
        }
        Ok(())
    }
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    pub dates: Vec<NaiveDate>,
    pub spots: Vec<f64>,
    pub vols: Vec<f64>,
    /// `100·σ_t`.
    pub vix_proxy: Vec<f64>,
}

/// Weekdays starting at `start` (rolled forward to a weekday).
pub fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// `n` pairs `(ε_s, ε_v)` of standard normals with correlation `corr`,
/// built as `ε_v = ρ·ε_s + √(1−ρ²)·ε_2`.
pub fn correlated_shocks(corr: f64, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orth = (1.0 - corr * corr).max(0.0).sqrt();
    (0..n)
        .map(|_| {
            let es: f64 = StandardNormal.sample(&mut rng);
            let e2: f64 = StandardNormal.sample(&mut rng);
            (es, corr * es + orth * e2)
        })
        .collect()
}

/// Euler scheme in logs for spot and volatility with `Δt = 1/252`.
pub fn simulate_path(cfg: &GeneratorConfig) -> Result<MarketPath> {
    cfg.validate()?;
    let n = cfg.n_days;
    let shocks = correlated_shocks(cfg.corr, n - 1, cfg.seed);
    let sq = DT.sqrt();
    let ln_bar = cfg.long_vol.ln();
    let mut spots = Vec::with_capacity(n);
    let mut vols = Vec::with_capacity(n);
    let (mut ln_s, mut ln_v) = (cfg.spot0.ln(), cfg.vol0.ln());
    spots.push(cfg.spot0);
    vols.push(cfg.vol0);
    for &(es, ev) in &shocks {
        let sigma = ln_v.exp();
        ln_s += (cfg.rate - cfg.div_yield - 0.5 * sigma * sigma) * DT + sigma * sq * es;
        ln_v += cfg.mean_rev * (ln_bar - ln_v) * DT + cfg.vol_of_vol * sq * ev;
        spots.push(ln_s.exp());
        vols.push(ln_v.exp());
    }
    Ok(MarketPath {
        dates: trading_days(cfg.start_date, n),
        vix_proxy: vols.iter().map(|v| 100.0 * v).collect(),
        spots,
        vols,
    })
}

#[derive(Debug, Clone, Copy)]
struct Listing {
    strike: f64,
    expiry: NaiveDate,
}

fn quote_for(date: NaiveDate, listing: Listing, kind: OptionKind, spot: f64, vol: f64, cfg: &GeneratorConfig) -> OptionQuote {
    let ttm_days = (listing.expiry - date).num_days();
    let p = PricingInputs::new(spot, listing.strike, cfg.rate, cfg.div_yield, vol, ttm_days as f64 / 365.0)
        .expect("generator keeps pricing inputs valid");
    let price = bs_price(&p, kind);
    OptionQuote {
        quote_date: date,
        expiry_date: listing.expiry,
        kind,
        strike: Some(listing.strike),
        bid: Some(price),
        ask: Some(price),
        volume: Some(1),
        implied_vol: Some(vol),
        delta: Some(bs_delta(&p, kind)),
        gamma: Some(bs_gamma(&p)),
        vega: Some(bs_vega(&p)),
        theta: Some(bs_theta(&p, kind)),
        underlying: Some(spot),
        vix: Some(100.0 * vol),
        rate: Some(cfg.rate),
        div_yield: Some(cfg.div_yield),
    }
}

/// Quote panel on a simulated path.
///
/// Every (moneyness, maturity) slot holds one listed contract with a fixed
/// strike `round(m·S)` and expiry `date + d`; when it expires the slot is
/// relisted at the current spot. Each day emits a call and a put for every
/// slot, so the panel has exactly `n_days × |strikes| × |maturities| × 2`
/// rows, ordered by (date, expiry, strike, kind).
pub fn generate_quote_panel(cfg: &GeneratorConfig) -> Result<Vec<OptionQuote>> {
    let path = simulate_path(cfg)?;
    Ok(quotes_on_path(&path, cfg))
}

/// As [`generate_quote_panel`] on an existing path.
pub fn quotes_on_path(path: &MarketPath, cfg: &GeneratorConfig) -> Vec<OptionQuote> {
    let n_slots = cfg.strike_grid.len() * cfg.maturity_grid.len();
    let mut slots: Vec<Option<Listing>> = vec![None; n_slots];
    let mut out = Vec::with_capacity(path.dates.len() * n_slots * 2);
    for (t, &date) in path.dates.iter().enumerate() {
        let spot = path.spots[t];
        let vol = path.vols[t];
        let mut live: HashSet<(u64, NaiveDate)> = slots
            .iter()
            .flatten()
            .filter(|l| l.expiry > date)
            .map(|l| (l.strike.to_bits(), l.expiry))
            .collect();
        for (i, slot) in slots.iter_mut().enumerate() {
            if slot.is_some_and(|l| l.expiry > date) {
                continue;
            }
            let m = cfg.strike_grid[i / cfg.maturity_grid.len()];
            let d = cfg.maturity_grid[i % cfg.maturity_grid.len()];
            let strike = (m * spot).round().max(1.0);
            let mut expiry = date + Days::new(d as u64);
            while live.contains(&(strike.to_bits(), expiry)) {
                expiry = expiry + Days::new(1);
            }
            live.insert((strike.to_bits(), expiry));
            *slot = Some(Listing { strike, expiry });
        }
        let mut today: Vec<Listing> = slots.iter().flatten().copied().collect();
        today.sort_by(|a, b| a.expiry.cmp(&b.expiry).then(a.strike.total_cmp(&b.strike)));
        for listing in today {
            for kind in [OptionKind::Call, OptionKind::Put] {
                out.push(quote_for(date, listing, kind, spot, vol, cfg));
            }
        }
    }
    out
}

/// Rectangular partition of the (ttm, bs_delta) plane into half-open cells
/// `[edge_i, edge_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    pub ttm_edges: Vec<f64>,
    pub delta_edges: Vec<f64>,
}

impl CellPartition {
    pub fn new(ttm_edges: Vec<f64>, delta_edges: Vec<f64>) -> Result<Self> {
        for edges in [&ttm_edges, &delta_edges] {
            if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config("cell edges must be strictly increasing with at least 2 entries".into()));
            }
        }
        Ok(Self { ttm_edges, delta_edges })
    }

    /// `(ttm index, delta index)` of the cell containing the point.
    pub fn locate(&self, ttm: f64, delta: f64) -> Option<(usize, usize)> {
        Some((interval(&self.ttm_edges, ttm)?, interval(&self.delta_edges, delta)?))
    }

    /// Centre of a cell.
    pub fn center(&self, cell: (usize, usize)) -> (f64, f64) {
        let (i, j) = cell;
        (
            0.5 * (self.ttm_edges[i] + self.ttm_edges[i + 1]),
            0.5 * (self.delta_edges[j] + self.delta_edges[j + 1]),
        )
    }
}

fn interval(edges: &[f64], x: f64) -> Option<usize> {
    if !(x >= edges[0] && x < edges[edges.len() - 1]) {
        return None;
    }
    Some(edges.partition_point(|e| *e <= x) - 1)
}

/// Oracle result for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCell {
    /// `ΣΔV·ΔS / ΣΔS²`.
    pub delta_star: f64,
    pub n: usize,
    pub mean_bs_delta: f64,
}

/// Minimum number of samples for a cell to be reported by the oracle.
pub const ORACLE_MIN_SAMPLES: usize = 30;

/// Per-cell constant hedge ratio minimizing `Σ(ΔV − δΔS)²`.
///
/// Cells with fewer than `min_samples` samples or `ΣΔS² = 0` are omitted
/// with a warning; samples outside the partition are ignored.
pub fn local_ols_oracle(
    samples: &[HedgeSample],
    cells: &CellPartition,
    min_samples: usize,
) -> BTreeMap<(usize, usize), OracleCell> {
    #[derive(Default)]
    struct Acc {
        sxy: f64,
        sxx: f64,
        sd: f64,
        n: usize,
    }
    let mut acc: BTreeMap<(usize, usize), Acc> = BTreeMap::new();
    for s in samples {
        if let Some(cell) = cells.locate(s.ttm, s.bs_delta) {
            let a = acc.entry(cell).or_default();
            a.sxy += s.delta_v * s.delta_s;
            a.sxx += s.delta_s * s.delta_s;
            a.sd += s.bs_delta;
            a.n += 1;
        }
    }
    let mut out = BTreeMap::new();
    for (cell, a) in acc {
        if a.n < min_samples.max(1) {
            warn!("oracle cell {cell:?} omitted: {} samples", a.n);
            continue;
        }
        if a.sxx == 0.0 {
            warn!("oracle cell {cell:?} omitted: no spot variation");
            continue;
        }
        out.insert(
            cell,
            OracleCell {
                delta_star: a.sxy / a.sxx,
                n: a.n,
                mean_bs_delta: a.sd / a.n as f64,
            },
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{assign_bucket, filter_quotes, pair_consecutive, DeltaBucket};
    use crate::models::ModelVariant;

    fn small(n_days: usize) -> GeneratorConfig {
        GeneratorConfig {
            n_days,
            strike_grid: vec![0.95, 1.0, 1.05],
            maturity_grid: vec![30, 60],
            ..GeneratorConfig::default()
        }
    }

    fn sample(ds: f64, dv: f64) -> HedgeSample {
        HedgeSample {
            features: vec![0.1, 0.5],
            history: Vec::new(),
            delta_s: ds,
            delta_v: dv,
            bs_delta: 0.5,
            bs_vega: 1.0,
            spot: 100.0,
            ttm: 0.1,
            bucket: assign_bucket(0.5).unwrap_or(DeltaBucket::from_tenths(5).unwrap()),
            quote_date: NaiveDate::from_ymd_opt(2015, 1, 5).unwrap(),
            kind: OptionKind::Call,
            expiry_date: NaiveDate::from_ymd_opt(2015, 2, 5).unwrap(),
            strike: 100.0,
        }
    }

    fn one_cell() -> CellPartition {
        CellPartition::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn noiseless_vol_converges_monotonically() {
        let cfg = GeneratorConfig {
            n_days: 300,
            vol0: 0.4,
            vol_of_vol: 0.0,
            ..GeneratorConfig::default()
        };
        let p = simulate_path(&cfg).unwrap();
        for w in p.vols.windows(2) {
            assert!(w[1] <= w[0] && w[1] >= cfg.long_vol);
        }
        assert!((p.vols[299] - 0.2).abs() < 0.01);
    }

    #[test]
    fn uncorrelated_shocks() {
        let s = correlated_shocks(0.0, 10_000, 42);
        let n = s.len() as f64;
        let (mx, my) = s.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in &s {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        assert!((sxy / (sxx * syy).sqrt()).abs() < 0.05);
    }

    #[test]
    fn correlated_shocks_match_target() {
        let s = correlated_shocks(-0.7, 20_000, 1);
        let r: f64 = s.iter().map(|(x, y)| x * y).sum::<f64>() / s.len() as f64;
        assert!((r + 0.7).abs() < 0.03, "{r}");
    }

    #[test]
    fn deterministic_paths() {
        let a = simulate_path(&small(100)).unwrap();
        let b = simulate_path(&small(100)).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&GeneratorConfig { seed: 7, ..small(100) }).unwrap();
        assert_ne!(a.spots, c.spots);
    }

    #[test]
    fn path_invariants() {
        let p = simulate_path(&small(500)).unwrap();
        assert_eq!(p.dates.len(), 500);
        assert_eq!(p.spots.len(), 500);
        assert!(p.spots.iter().chain(&p.vols).all(|v| *v > 0.0));
        assert!(p.dates.iter().all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(simulate_path(&small(22)).is_err());
        assert!(simulate_path(&GeneratorConfig { corr: 1.5, ..small(50) }).is_err());
        assert!(simulate_path(&GeneratorConfig { vol0: 0.0, ..small(50) }).is_err());
    }

    #[test]
    fn constant_vol_panel() {
        let cfg = small(60).constant_vol();
        for q in generate_quote_panel(&cfg).unwrap() {
            assert_eq!(q.implied_vol, Some(0.2));
        }
    }

    #[test]
    fn row_count_and_self_consistency() {
        let cfg = small(80);
        let panel = generate_quote_panel(&cfg).unwrap();
        assert_eq!(panel.len(), 80 * 3 * 2 * 2);
        for q in &panel {
            let p = PricingInputs::new(
                q.underlying.unwrap(),
                q.strike.unwrap(),
                cfg.rate,
                cfg.div_yield,
                q.implied_vol.unwrap(),
                q.ttm_days() as f64 / 365.0,
            )
            .unwrap();
            assert!((q.delta.unwrap() - bs_delta(&p, q.kind)).abs() <= 1e-12);
            assert!(q.ttm_days() >= 1);
        }
    }

    #[test]
    fn minimal_panel_count() {
        let cfg = GeneratorConfig {
            n_days: 23,
            strike_grid: vec![1.0],
            maturity_grid: vec![30],
            ..GeneratorConfig::default()
        };
        assert_eq!(generate_quote_panel(&cfg).unwrap().len(), 46);
    }

    #[test]
    fn contracts_persist_across_days() {
        let panel = generate_quote_panel(&small(120)).unwrap();
        let samples = pair_consecutive(&panel, ModelVariant::Dnn2);
        // every in-band quote except those on the last day or on their final day pairs up
        let in_band = panel
            .iter()
            .filter(|q| crate::data::assign_bucket(q.delta.unwrap()).is_ok())
            .count();
        assert!(samples.len() <= in_band);
        assert!(samples.len() as f64 > 0.9 * in_band as f64);
    }

    #[test]
    fn filter_only_drops_short_ttm_and_extreme_delta() {
        let panel = generate_quote_panel(&small(200)).unwrap();
        let kept = filter_quotes(&panel);
        let expected = panel
            .iter()
            .filter(|q| {
                let d = q.delta.unwrap().abs();
                q.ttm_days() >= 14 && (0.05..=0.95).contains(&d)
            })
            .count();
        assert_eq!(kept.len(), expected);
    }

    #[test]
    fn oracle_examples() {
        let mut s: Vec<HedgeSample> = Vec::new();
        s.push(sample(1.0, 0.5));
        s.push(sample(2.0, 1.0));
        let r = local_ols_oracle(&s, &one_cell(), 1);
        assert!((r[&(0, 0)].delta_star - 0.5).abs() < 1e-15);

        let s = vec![sample(1.0, 1.0), sample(-1.0, 0.0)];
        assert_eq!(local_ols_oracle(&s, &one_cell(), 1)[&(0, 0)].delta_star, 0.5);

        let s = vec![sample(0.0, 1.0); 40];
        assert!(local_ols_oracle(&s, &one_cell(), 30).is_empty());
    }

    #[test]
    fn oracle_omits_small_cells() {
        let s = vec![sample(1.0, 0.5); 29];
        assert!(local_ols_oracle(&s, &one_cell(), ORACLE_MIN_SAMPLES).is_empty());
        let s = vec![sample(1.0, 0.5); 30];
        assert_eq!(local_ols_oracle(&s, &one_cell(), ORACLE_MIN_SAMPLES).len(), 1);
    }

    #[test]
    fn partition_lookup_is_half_open() {
        let p = CellPartition::new(vec![0.0, 0.1, 0.5], vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(p.locate(0.1, 0.5), Some((1, 1)));
        assert_eq!(p.locate(0.05, 0.49), Some((0, 0)));
        assert_eq!(p.locate(0.5, 0.2), None);
        assert!(CellPartition::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
    }
}
