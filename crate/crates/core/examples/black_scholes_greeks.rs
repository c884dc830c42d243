//! Practitioner Black-Scholes quantities and the Hull-White hedge ratio
//! across a strike ladder.

use mvhedge::market_math::{
    bs_d, bs_delta, bs_gamma, bs_price, bs_theta, bs_vega, hw_delta, HwCoefficients, OptionKind, PricingInputs,
};

fn main() -> mvhedge::Result<()> {
    let spot = 2000.0;
    let coef = HwCoefficients::new(0.02, -0.05, 0.03)?;
    println!(
        "{:>7} {:>4} {:>8} {:>9} {:>8} {:>9} {:>10} {:>9} {:>9}",
        "strike", "cp", "d", "price", "delta", "vega", "gamma", "theta", "hw_delta"
    );
    for strike in [1800.0, 1900.0, 2000.0, 2100.0, 2200.0] {
        let p = PricingInputs::new(spot, strike, 0.02, 0.015, 0.2, 60.0 / 365.0)?;
        for kind in [OptionKind::Call, OptionKind::Put] {
            println!(
                "{:>7.0} {:>4} {:>8.4} {:>9.3} {:>8.4} {:>9.3} {:>10.6} {:>9.2} {:>9.4}",
                strike,
                kind.flag(),
                bs_d(&p),
                bs_price(&p, kind),
                bs_delta(&p, kind),
                bs_vega(&p),
                bs_gamma(&p),
                bs_theta(&p, kind),
                hw_delta(&p, kind, &coef),
            );
        }
    }
    Ok(())
}
