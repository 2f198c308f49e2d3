#![no_main]

use graphaudit::frontend::{export_graph_json, import_graph_json};
use libfuzzer_sys::fuzz_target;

// Anything that imports must re-export to a fixpoint.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(graph) = import_graph_json(text) {
        let once = export_graph_json(&graph);
        let again = import_graph_json(&once).expect("exported graph must import");
        assert_eq!(export_graph_json(&again), once);
    }
});
