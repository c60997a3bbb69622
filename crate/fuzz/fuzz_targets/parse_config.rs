//! The config parser must never panic on arbitrary input; it returns
//! structured errors. A successfully parsed config must survive the
//! canonical emit/re-parse round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = coolwalk::config::parse_config(text) {
        let emitted = cfg.to_text();
        let reparsed = coolwalk::config::parse_config(&emitted)
            .expect("canonical emission must re-parse");
        assert_eq!(cfg, reparsed, "round trip changed the config");
    }
});
