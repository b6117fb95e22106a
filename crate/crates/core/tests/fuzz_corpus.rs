//! Replays the checked-in fuzz seeds through the same checks as the fuzz targets.

use std::fs;
use std::path::PathBuf;

use sdlab::config::{parse_pairs, ExperimentConfig};
use sdlab::observables::ObservableSpec;

fn seeds(target: &str) -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<String> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| fs::read_to_string(e.unwrap().path()).unwrap())
        .collect();
    out.sort();
    out
}

#[test]
fn config_seeds() {
    let s = seeds("config_parse");
    assert!(s.len() >= 5);
    let mut valid = 0;
    for text in &s {
        let _ = parse_pairs(text);
        if let Ok(cfg) = text.parse::<ExperimentConfig>() {
            assert!(cfg.n > 0 && cfg.replicas > 0);
            valid += 1;
        }
    }
    assert_eq!(valid, s.len() - 1);
}

#[test]
fn observable_seeds_round_trip() {
    for text in seeds("observable_parse") {
        let spec: ObservableSpec = text.parse().unwrap();
        assert_eq!(spec.to_string().parse::<ObservableSpec>().unwrap(), spec);
    }
}
