use proptest::prelude::*;
use skewfsv::io::{self, fmt_f64, LoadOptions, Stamped};
use skewfsv::Provenance;
use skewfsv_core::engine::{run_mcmc, DrawStore, Serial};
use skewfsv_core::model::{McmcSettings, ModelConfig, Variant};
use skewfsv_core::rng::{stream, Purpose};
use skewfsv_core::simulate::{simulate, TrueParams};
use skewfsv_core::Dataset;

proptest! {
    #[test]
    fn float_text_is_exact(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn dataset_csv_round_trips(vals in prop::collection::vec(-1e3f64..1e3, 6..60)) {
        let t = vals.len() / 3;
        let cols: Vec<Vec<f64>> = (0..3).map(|i| vals[i * t..(i + 1) * t].to_vec()).collect();
        prop_assume!(t >= 2);
        let mut d = Dataset::from_columns(&cols).unwrap();
        d.dates = io::business_days(chrono::NaiveDate::from_ymd_opt(2010, 1, 4).unwrap(), t);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let prov = Provenance::new(3, &"cfg");
        io::write_dataset(&path, &d, &prov).unwrap();
        let back = io::load_returns(&path, &LoadOptions::returns()).unwrap();
        prop_assert_eq!(back, d);
        prop_assert_eq!(io::read_csv_table(&path).unwrap().provenance, Some(prov));
    }
}

fn store() -> DrawStore {
    let mut rng = stream(1, Purpose::Misc, 0, 0);
    let truth = TrueParams::benchmark(3, 1, &[0.0, 0.0, 0.0, -1.0], &mut rng).unwrap();
    let (data, _) = simulate(&truth, 80, 2).unwrap();
    let mut cfg = ModelConfig::new(3, 1, Variant::SSYF);
    cfg.mcmc = McmcSettings { burn_in: 20, n_draws: 30, thin: 1, seed: 4, snapshot_every: 10, ..McmcSettings::default() };
    run_mcmc(&cfg, &data, &Serial).unwrap()
}

#[test]
fn draws_csv_round_trips() {
    let s = store();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("draws.csv");
    io::write_draws(&path, &s, &Provenance::new(4, &"x")).unwrap();
    let (names, cols) = io::read_draws(&path).unwrap();
    assert_eq!(names, s.column_names());
    for (name, col) in names.iter().zip(&cols) {
        let orig = s.column(name).unwrap();
        assert!(orig.iter().zip(col).all(|(a, b)| a.to_bits() == b.to_bits()), "{name}");
    }
}

#[test]
fn store_json_round_trips() {
    let s = store();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    let prov = Provenance::new(4, &"x");
    io::write_json(&path, &Stamped::new(&prov, &s)).unwrap();
    let back: Stamped<DrawStore> = io::read_json(&path).unwrap();
    assert_eq!(back.data, s);
    assert_eq!(back.seed, 4);
    // Derived constants are rebuilt on load.
    let p = back.data.records[0].params[0];
    assert_eq!(p.c(), p.nu / (p.nu - 2.0));
}

#[test]
fn invalid_parameters_are_rejected_on_load() {
    let bad = r#"{"mu":0.0,"phi":1.5,"sigma":0.1,"rho":0.0,"nu":8.0,"beta":0.0}"#;
    assert!(serde_json::from_str::<skewfsv_core::SeriesParams>(bad).is_err());
    let bad = r#"{"k":2,"p":1,"entries":[2.0,0.5]}"#;
    assert!(serde_json::from_str::<skewfsv_core::LoadingMatrix>(bad).is_err());
}
