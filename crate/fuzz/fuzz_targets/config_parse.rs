#![no_main]

use libfuzzer_sys::fuzz_target;
use sdlab::config::{parse_pairs, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_pairs(text);
    if let Ok(cfg) = text.parse::<ExperimentConfig>() {
        assert!(cfg.n > 0 && cfg.replicas > 0);
        assert!(cfg.t_grid.iter().all(|&t| t > 0.0 && t <= 1.0));
        assert!(cfg.tail_max > cfg.tail_min);
    }
});
