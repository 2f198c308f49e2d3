#![no_main]

use std::sync::OnceLock;

use graphaudit::audit::AuditState;
use graphaudit::frontend::import_graph_json;
use graphaudit::ProgramGraph;
use libfuzzer_sys::fuzz_target;

fn graph() -> &'static ProgramGraph {
    static GRAPH: OnceLock<ProgramGraph> = OnceLock::new();
    GRAPH.get_or_init(|| import_graph_json(include_str!("../corpus/graph_json/smsblocker.json")).unwrap())
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(state) = AuditState::from_json(text, graph()) {
        let again = AuditState::from_json(&state.to_json(), graph()).expect("saved state must reload");
        assert_eq!(again, state);
    }
});
