#![no_main]

use graphaudit::frontend::parse_permission_map;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_permission_map("permissions.xml", text);
    }
});
