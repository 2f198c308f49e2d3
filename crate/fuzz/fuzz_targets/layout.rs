#![no_main]

use graphaudit::frontend::parse_layout;
use graphaudit::GraphBuilder;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let mut builder = GraphBuilder::new();
        let _ = parse_layout(&mut builder, "layout/fuzz.xml", text);
    }
});
