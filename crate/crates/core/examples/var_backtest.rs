//! Value-at-Risk backtests: Kupiec unconditional coverage, Christoffersen
//! independence, their sum, and the Basel traffic-light zone.

use catbond::backtest::{basel_zone, chi2_sf, kupiec_lruc, transition_counts, BacktestReport, ExceedanceSeries};

fn main() -> anyhow::Result<()> {
    for x in [1, 3, 6] {
        let lr = kupiec_lruc(69, x, 0.05)?;
        println!("69 forecasts, {x} exceedances: LRUC {lr:.4}  p {:.4}", chi2_sf(lr, 1)?);
    }

    let hits = [0, 0, 1, 0, 0, 1, 0, 0].map(|h| h == 1).to_vec();
    let series = ExceedanceSeries { hits };
    let t = transition_counts(&series);
    println!("\ntransitions n00 {} n01 {} n10 {} n11 {}", t.n00, t.n01, t.n10, t.n11);
    print!("{}", BacktestReport::from_series(&series, 0.05)?.to_text());

    println!("\nBasel zones for 250 days at 99%:");
    for x in [0, 4, 5, 9, 10] {
        println!("  {x:>2} exceedances -> {}", basel_zone(250, x, 0.01)?);
    }
    Ok(())
}
