#![no_main]

use libfuzzer_sys::fuzz_target;
use sdlab::observables::ObservableSpec;

// Display output must parse back to the same spec.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<ObservableSpec>() {
        let again: ObservableSpec = spec.to_string().parse().expect("display output parses");
        assert_eq!(again, spec);
    }
});
