//! Generate a synthetic tranche dataset, print a few marginals and the
//! planted coefficients, and write it to disk in the ingest file formats.
//!
//! cargo run --example synthetic_dataset -- [seed] [n] [out_dir]

use catbond::dataset::generate_synthetic;
use catbond::stats::{mean, sample_std};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed = args.first().map_or(Ok(1), |s| s.parse())?;
    let n = args.get(1).map_or(Ok(734), |s| s.parse())?;
    let syn = generate_synthetic(seed, n)?;
    let ts = syn.dataset.tranches();

    println!("{} tranches, {} .. {}", ts.len(), ts[0].issue_date, ts[ts.len() - 1].issue_date);
    for (name, get) in [
        ("expected_loss", (|t| t.expected_loss) as fn(&catbond::dataset::TrancheRecord) -> f64),
        ("final_spread", |t| t.final_spread),
        ("size", |t| t.size),
    ] {
        let v: Vec<f64> = ts.iter().map(get).collect();
        println!("{name:>14}: mean {:.4}  sd {:.4}", mean(&v), sample_std(&v));
    }
    let indemnity = ts.iter().filter(|t| t.trigger_indemnity).count() as f64 / ts.len() as f64;
    println!("indemnity share: {:.1}%", 100.0 * indemnity);
    println!("\nplanted coefficients:\n{}", syn.planted.to_sidecar());

    if let Some(dir) = args.get(2) {
        syn.dataset.save(std::path::Path::new(dir))?;
        std::fs::write(std::path::Path::new(dir).join("planted.txt"), syn.planted.to_sidecar())?;
        println!("written to {dir}");
    }
    Ok(())
}
