//! The atom-list literal grammar: no panics, and every accepted list must
//! pass through distribution validation and the scalar model
//! characteristics without panicking either.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(atoms) = coolwalk::config::parse_atom_list(text) {
        if let Ok(dist) = coolwalk::env::AlphaDistribution::new(&atoms, 0.1) {
            let m = dist.rho_moments();
            assert!(m.mean_rho.is_finite());
            assert!(dist.speed().abs() < 1.0);
            let _ = dist.solve_s(1e-9);
        }
        let _ = coolwalk::env::AlphaDistribution::reference(&atoms, 0.1);
    }
});
