#![no_main]

use std::sync::{Arc, OnceLock};

use graphaudit::frontend::import_graph_json;
use graphaudit::query::{eval_query, parse_query};
use graphaudit::ProgramGraph;
use libfuzzer_sys::fuzz_target;

fn graph() -> &'static Arc<ProgramGraph> {
    static GRAPH: OnceLock<Arc<ProgramGraph>> = OnceLock::new();
    GRAPH.get_or_init(|| Arc::new(import_graph_json(include_str!("../corpus/graph_json/smsblocker.json")).unwrap()))
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_query(text) {
        Ok(script) => {
            let _ = eval_query(&script, graph());
        }
        Err(e) => assert!(e.offset <= text.len()),
    }
});
