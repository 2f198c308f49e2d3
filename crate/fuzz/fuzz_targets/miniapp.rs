#![no_main]

use std::sync::OnceLock;

use graphaudit::frontend::{parse_miniapp, parse_profile, PlatformProfile, SourceUnit};
use libfuzzer_sys::fuzz_target;

fn profile() -> &'static PlatformProfile {
    static PROFILE: OnceLock<PlatformProfile> = OnceLock::new();
    PROFILE.get_or_init(|| parse_profile(include_str!("../../fixtures/profile.json")).unwrap())
}

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_miniapp(&[SourceUnit::new("Fuzz.mapp".to_string(), text.to_string())], profile());
    }
});
