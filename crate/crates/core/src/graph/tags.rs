//! Tag and attribute vocabulary shared by every pass.

// Node kinds.
pub const TYPE: &str = "TYPE";
pub const METHOD: &str = "METHOD";
pub const FIELD: &str = "FIELD";
pub const VARIABLE: &str = "VARIABLE";
pub const CALLSITE_RESULT: &str = "CALLSITE_RESULT";
pub const LITERAL: &str = "LITERAL";
pub const XML_ELEMENT: &str = "XML_ELEMENT";
pub const PERMISSION: &str = "PERMISSION";
pub const PACKAGE: &str = "PACKAGE";
/// Statement nodes carry the intra-method control flow.
pub const STATEMENT: &str = "STATEMENT";

pub const NODE_KINDS: &[&str] = &[
    TYPE,
    METHOD,
    FIELD,
    VARIABLE,
    CALLSITE_RESULT,
    LITERAL,
    XML_ELEMENT,
    PERMISSION,
    PACKAGE,
    STATEMENT,
];

// Edge kinds. Exactly one of these is carried by every edge.
pub const DECLARES: &str = "DECLARES";
pub const CALL: &str = "CALL";
pub const OVERRIDES: &str = "OVERRIDES";
pub const EXTENDS: &str = "EXTENDS";
pub const DATA_FLOW: &str = "DATA_FLOW";
pub const CONTROL_FLOW: &str = "CONTROL_FLOW";
pub const INSTANTIATES: &str = "INSTANTIATES";
pub const TYPE_OF: &str = "TYPE_OF";
pub const XML_CALLBACK: &str = "XML_CALLBACK";

pub const EDGE_KINDS: &[&str] = &[
    DECLARES,
    CALL,
    OVERRIDES,
    EXTENDS,
    DATA_FLOW,
    CONTROL_FLOW,
    INSTANTIATES,
    TYPE_OF,
    XML_CALLBACK,
];

// Derived tags added by indexers.
pub const RTA_FEASIBLE: &str = "RTA_FEASIBLE";
pub const RTA_REACHABLE: &str = "RTA_REACHABLE";
pub const ENTRY_POINT: &str = "ENTRY_POINT";
pub const XML_HANDLER: &str = "XML_HANDLER";
pub const MANIFEST_HIGH_PRIORITY: &str = "MANIFEST_HIGH_PRIORITY";
pub const PERMISSION_PROTECTED: &str = "PERMISSION_PROTECTED";
pub const DECLARED: &str = "DECLARED";

// Platform profile tags.
pub const STUB: &str = "STUB";
pub const NATIVE: &str = "NATIVE";
pub const REFLECTION: &str = "REFLECTION";
pub const SOURCE: &str = "SOURCE";
pub const SINK: &str = "SINK";
pub const SENSITIVE_MUTABLE: &str = "SENSITIVE_MUTABLE";
pub const EXPENSIVE: &str = "EXPENSIVE";

pub const PROFILE_TAGS: &[&str] = &[NATIVE, REFLECTION, SOURCE, SINK, SENSITIVE_MUTABLE, EXPENSIVE];

pub fn is_node_kind(tag: &str) -> bool {
    NODE_KINDS.contains(&tag)
}

pub fn is_edge_kind(tag: &str) -> bool {
    EDGE_KINDS.contains(&tag)
}

/// Attribute keys.
pub mod attr {
    pub const NAME: &str = "name";
    pub const ARITY: &str = "arity";
    pub const DECLARING_TYPE: &str = "declaringType";
    pub const RETURN_TYPE: &str = "returnType";
    pub const TYPE: &str = "type";
    pub const ROLE: &str = "role";
    pub const INDEX: &str = "index";
    pub const CALLEE: &str = "callee";
    pub const RECEIVER_TYPE: &str = "receiverType";
    pub const STATEMENT_KIND: &str = "kind";
    pub const VALUE: &str = "value";
    pub const ELEMENT: &str = "element";
    pub const FILE: &str = "file";
    pub const PRIORITY: &str = "priority";
    pub const PERMISSION: &str = "permission";
    pub const PROTECTION_LEVEL: &str = "protectionLevel";
    pub const GROUP: &str = "group";
    pub const CALLSITES: &str = "callsites";
    pub const SPAN_PATH: &str = "spanPath";
    pub const SPAN_START: &str = "spanStart";
    pub const SPAN_END: &str = "spanEnd";

    pub const ROLE_PARAM: &str = "param";
    pub const ROLE_LOCAL: &str = "local";
}
