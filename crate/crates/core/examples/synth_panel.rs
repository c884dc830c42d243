//! Simulates one year of the log-OU stochastic-volatility market, writes
//! the quote panel as CSV and summarizes the path.
//!
//! `cargo run --example synth_panel -- [out.csv]`

use std::fs::File;
use std::io::BufWriter;

use mvhedge::data::write_quotes;
use mvhedge::synth::{quotes_on_path, simulate_path, GeneratorConfig};

fn main() -> mvhedge::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synth_quotes.csv".into());
    let cfg = GeneratorConfig {
        n_days: 252,
        ..GeneratorConfig::default()
    };
    let path = simulate_path(&cfg)?;
    let quotes = quotes_on_path(&path, &cfg);

    let (lo, hi) = path
        .vols
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    println!(
        "{} days from {} to {}: spot {:.1} -> {:.1}, vol range [{lo:.3}, {hi:.3}]",
        path.dates.len(),
        path.dates[0],
        path.dates[path.dates.len() - 1],
        path.spots[0],
        path.spots[path.spots.len() - 1],
    );
    for i in (0..path.dates.len()).step_by(63) {
        println!("  {} spot {:>8.2} vol {:.4} vix {:.2}", path.dates[i], path.spots[i], path.vols[i], path.vix_proxy[i]);
    }

    let file = File::create(&out).map_err(|e| mvhedge::Error::io(&out, e))?;
    write_quotes(BufWriter::new(file), &quotes)?;
    println!("wrote {} quotes to {out}", quotes.len());
    Ok(())
}
