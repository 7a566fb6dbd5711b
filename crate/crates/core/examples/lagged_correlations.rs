//! Correlate coupons with every climate series at lags 0..=18 months and
//! report the strongest lag per series.

use catbond::dataset::generate_synthetic;
use catbond::features::lagged_correlations;

fn main() -> anyhow::Result<()> {
    let ds = generate_synthetic(1, 734)?.dataset;
    println!("{:<30} {:>4} {:>8}", "series", "lag", "corr");
    for (name, series) in ds.climate() {
        let table = lagged_correlations(ds.tranches(), series, 0, 18)?;
        match table.peak() {
            Some((lag, c)) => println!("{name:<30} {lag:>4} {c:>8.3}"),
            None => println!("{name:<30} undefined"),
        }
    }
    let soi = lagged_correlations(ds.tranches(), ds.series("SOI")?, 0, 18)?;
    println!("\nSOI by lag:\n{}", soi.to_csv());
    Ok(())
}
