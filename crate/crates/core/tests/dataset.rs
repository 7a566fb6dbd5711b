use catbond::dataset::{
    generate_synthetic, parse_tranches, write_tranches, Dataset, PerilType, Territory, YearMonth, MAX_LAG_MONTHS,
};
use catbond::stats::{mean, sample_std};
use nalgebra::{DMatrix, DVector};

/// Reference sample moments (mean, std) of the continuous fields.
const TABLE_MOMENTS: [(&str, f64, f64); 11] = [
    ("attachment_point", 2505.3, 3565.48),
    ("attachment_probability", 0.039, 0.039),
    ("bb_spread", 0.035, 0.014),
    ("cedent_tenure", 60.99, 70.93),
    ("coverage_limit", 3267.14, 4331.26),
    ("expected_loss", 0.025, 0.025),
    ("n_locations", 1.34, 0.65),
    ("n_perils", 2.37, 1.92),
    ("rol_index", 220.49, 40.23),
    ("size", 134.28, 123.59),
    ("term", 36.38, 12.5),
];

fn column(ds: &Dataset, name: &str) -> Vec<f64> {
    ds.tranches().iter().map(|t| t.continuous(name).unwrap()).collect()
}

fn share(ds: &Dataset, f: impl Fn(&catbond::dataset::TrancheRecord) -> bool) -> f64 {
    ds.tranches().iter().filter(|t| f(t)).count() as f64 / ds.len() as f64
}

#[test]
fn continuous_moments_within_fifteen_percent() {
    let syn = generate_synthetic(1, 734).unwrap();
    for (name, m, s) in TABLE_MOMENTS {
        let xs = column(&syn.dataset, name);
        let (sm, ss) = (mean(&xs), sample_std(&xs));
        assert!((sm - m).abs() <= 0.15 * m, "{name}: mean {sm} vs {m}");
        assert!((ss - s).abs() <= 0.15 * s, "{name}: std {ss} vs {s}");
    }
    let el = mean(&column(&syn.dataset, "expected_loss"));
    assert!((el - 0.025).abs() <= 0.15 * 0.025);
}

#[test]
fn indemnity_share_near_reference() {
    let syn = generate_synthetic(1, 734).unwrap();
    let s = share(&syn.dataset, |t| t.trigger_indemnity);
    assert!((s - 0.4305).abs() <= 0.05, "indemnity share {s}");
}

#[test]
fn binary_shares_at_large_n() {
    let syn = generate_synthetic(1, 5000).unwrap();
    let ds = &syn.dataset;
    let checks: Vec<(&str, f64, f64)> = vec![
        ("multiperil", share(ds, |t| t.peril_type == PerilType::Multiperil), 0.5559),
        ("storm", share(ds, |t| t.peril_type == PerilType::Storm), 0.2411),
        ("earthquake", share(ds, |t| t.peril_type == PerilType::Earthquake), 0.173),
        ("other peril", share(ds, |t| t.peril_type == PerilType::Other), 0.03),
        ("indemnity", share(ds, |t| t.trigger_indemnity), 0.4305),
        ("us wind", share(ds, |t| t.region_perils.us_wind), 0.6253),
        ("us eq", share(ds, |t| t.region_perils.us_eq), 0.5545),
        ("europe wind", share(ds, |t| t.region_perils.europe_wind), 0.188),
        ("japan eq", share(ds, |t| t.region_perils.japan_eq), 0.1213),
        ("multiterritory", share(ds, |t| t.territory == Territory::Multi), 0.2561),
        ("us", share(ds, |t| t.territory == Territory::Us), 0.5722),
        ("europe", share(ds, |t| t.territory == Territory::Europe), 0.0736),
        ("japan", share(ds, |t| t.territory == Territory::Japan), 0.0613),
        ("other territory", share(ds, |t| t.territory == Territory::Other), 0.0422),
    ];
    for (name, got, want) in checks {
        assert!((got - want).abs() <= 0.02, "{name}: {got} vs {want}");
    }
}

#[test]
fn planted_coefficients_recovered_within_three_standard_errors() {
    let syn = generate_synthetic(1, 5000).unwrap();
    let ds = &syn.dataset;
    let soi = ds.series("SOI").unwrap();
    let olr = ds.series("OLR").unwrap();
    let names = [
        "intercept",
        "expected_loss",
        "bb_spread",
        "peril_storm",
        "peril_earthquake",
        "territory_us",
        "soi_lag15",
        "olr_lag12",
    ];
    let n = ds.len();
    let x = DMatrix::from_fn(n, names.len(), |i, j| {
        let t = &ds.tranches()[i];
        let ym = YearMonth::of(t.issue_date);
        match j {
            0 => 1.0,
            1 => t.expected_loss,
            2 => t.bb_spread,
            3 => (t.peril_type == PerilType::Storm) as u8 as f64,
            4 => (t.peril_type == PerilType::Earthquake) as u8 as f64,
            5 => (t.territory == Territory::Us) as u8 as f64,
            6 => soi.get(ym.minus_months(15)).unwrap(),
            _ => olr.get(ym.minus_months(12)).unwrap(),
        }
    });
    let y = DVector::from_iterator(n, ds.tranches().iter().map(|t| t.final_spread));
    // Normal equations, solved independently of the library's OLS.
    let xtx = x.transpose() * &x;
    let chol = xtx.clone().cholesky().unwrap();
    let beta = chol.solve(&(x.transpose() * &y));
    let resid = &y - &x * &beta;
    let sigma2 = resid.norm_squared() / (n - names.len()) as f64;
    let inv = chol.inverse();
    for (j, name) in names.iter().enumerate() {
        let se = (sigma2 * inv[(j, j)]).sqrt();
        let truth = syn.planted.get(name);
        assert!(
            (beta[j] - truth).abs() <= 3.0 * se,
            "{name}: estimate {} truth {truth} se {se}",
            beta[j]
        );
    }
}

#[test]
fn every_lag_resolvable() {
    let syn = generate_synthetic(9, 300).unwrap();
    for t in syn.dataset.tranches() {
        for s in syn.dataset.climate().values() {
            for lag in 0..=MAX_LAG_MONTHS {
                assert!(s.get(YearMonth::of(t.issue_date).minus_months(lag)).is_some());
            }
        }
    }
}

#[test]
fn serialize_parse_round_trip() {
    let syn = generate_synthetic(4, 200).unwrap();
    let text = write_tranches(syn.dataset.tranches());
    let back = parse_tranches(&text, true).unwrap();
    assert_eq!(back, syn.dataset.tranches());
}
