//! Textual query scripts.
//!
//! ```text
//! expression := source | expression '.' call
//! source     := 'universe()' | 'nodes(' ident ')' | 'methods(' string ',' string ')'
//! call       := 'nodesTaggedAny(' tags ')' | 'edgesTaggedAny(' tags ')' | 'retainEdges()'
//!             | 'forward(' expression ')' | 'reverse(' expression ')'
//!             | 'between(' expression ',' expression ')'
//!             | 'union(' expression ')' | 'intersection(' expression ')'
//!             | 'difference(' expression ')'
//!             | 'forwardStep(' expression ')' | 'reverseStep(' expression ')'
//! tags       := [ ident { ',' ident } ]
//! ```
//!
//! The parser reads the argument list of any known operation before
//! checking whether the operation may appear in that position, so an
//! unterminated call reports the offset where its arguments ran out.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::Subgraph;
use crate::graph::ProgramGraph;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("syntax error at line {line}, column {column} (offset {offset}): {message}")]
pub struct SyntaxError {
    /// Byte offset into the script.
    pub offset: usize,
    /// 1-based line.
    pub line: usize,
    /// 1-based column, counted in characters.
    pub column: usize,
    pub message: String,
}

impl SyntaxError {
    fn at(text: &str, offset: usize, message: impl Into<String>) -> Self {
        let before = &text[..offset.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        SyntaxError {
            offset,
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryExpr {
    Universe,
    Nodes(String),
    Methods(String, String),
    NodesTaggedAny(Box<QueryExpr>, Vec<String>),
    EdgesTaggedAny(Box<QueryExpr>, Vec<String>),
    RetainEdges(Box<QueryExpr>),
    Forward(Box<QueryExpr>, Box<QueryExpr>),
    Reverse(Box<QueryExpr>, Box<QueryExpr>),
    ForwardStep(Box<QueryExpr>, Box<QueryExpr>),
    ReverseStep(Box<QueryExpr>, Box<QueryExpr>),
    Between(Box<QueryExpr>, Box<QueryExpr>, Box<QueryExpr>),
    Union(Box<QueryExpr>, Box<QueryExpr>),
    Intersection(Box<QueryExpr>, Box<QueryExpr>),
    Difference(Box<QueryExpr>, Box<QueryExpr>),
}

impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use QueryExpr::*;
        match self {
            Universe => write!(f, "universe()"),
            Nodes(tag) => write!(f, "nodes({tag})"),
            Methods(ty, m) => write!(f, "methods({ty:?}, {m:?})"),
            NodesTaggedAny(q, tags) => write!(f, "{q}.nodesTaggedAny({})", tags.join(", ")),
            EdgesTaggedAny(q, tags) => write!(f, "{q}.edgesTaggedAny({})", tags.join(", ")),
            RetainEdges(q) => write!(f, "{q}.retainEdges()"),
            Forward(q, o) => write!(f, "{q}.forward({o})"),
            Reverse(q, o) => write!(f, "{q}.reverse({o})"),
            ForwardStep(q, o) => write!(f, "{q}.forwardStep({o})"),
            ReverseStep(q, o) => write!(f, "{q}.reverseStep({o})"),
            Between(q, a, b) => write!(f, "{q}.between({a}, {b})"),
            Union(q, o) => write!(f, "{q}.union({o})"),
            Intersection(q, o) => write!(f, "{q}.intersection({o})"),
            Difference(q, o) => write!(f, "{q}.difference({o})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryScript {
    pub text: String,
    pub expr: QueryExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' | ')' | ',' | '.' => {
                chars.next();
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    _ => Tok::Dot,
                };
                out.push((tok, start));
            }
            '"' => {
                chars.next();
                let mut value = String::new();
                loop {
                    match chars.next() {
                        Some((_, '"')) => break,
                        Some((_, '\\')) => match chars.next() {
                            Some((_, esc @ ('"' | '\\'))) => value.push(esc),
                            Some((_, 'n')) => value.push('\n'),
                            Some((i, other)) => {
                                return Err(SyntaxError::at(text, i, format!("unknown escape `\\{other}`")))
                            }
                            None => return Err(SyntaxError::at(text, text.len(), "unterminated string")),
                        },
                        Some((_, ch)) => value.push(ch),
                        None => return Err(SyntaxError::at(text, text.len(), "unterminated string")),
                    }
                }
                out.push((Tok::Str(value), start));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&(_, ch)) = chars.peek() {
                    if ch.is_alphanumeric() || ch == '_' {
                        ident.push(ch);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(ident), start));
            }
            other => return Err(SyntaxError::at(text, start, format!("unexpected character `{other}`"))),
        }
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Args {
    None,
    Tag,
    TwoStrings,
    Tags,
    OneExpr,
    TwoExprs,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Position {
    Source,
    Call,
}

fn signature(name: &str) -> Option<(Args, Position)> {
    Some(match name {
        "universe" => (Args::None, Position::Source),
        "nodes" => (Args::Tag, Position::Source),
        "methods" => (Args::TwoStrings, Position::Source),
        "nodesTaggedAny" | "edgesTaggedAny" => (Args::Tags, Position::Call),
        "retainEdges" => (Args::None, Position::Call),
        "forward" | "reverse" | "forwardStep" | "reverseStep" | "union" | "intersection" | "difference" => {
            (Args::OneExpr, Position::Call)
        }
        "between" => (Args::TwoExprs, Position::Call),
        _ => return None,
    })
}

enum Parsed {
    None,
    Tag(String),
    Strings(String, String),
    Tags(Vec<String>),
    One(QueryExpr),
    Two(QueryExpr, QueryExpr),
}

/// Bound on expression-tree depth (argument nesting plus chain length).
const MAX_DEPTH: usize = 128;

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let tok = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::at(self.text, self.offset(), message)
    }

    fn expect(&mut self, want: Tok) -> Result<(), SyntaxError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", want.describe(), self.peek().describe())))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {}", other.describe()))),
        }
    }

    fn string(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected string, found {}", other.describe()))),
        }
    }

    /// Reads `name(args)`, returning the name, its position class and
    /// the parsed arguments.
    fn operation(&mut self) -> Result<(String, usize, Position, Parsed), SyntaxError> {
        let start = self.offset();
        let name = self.ident()?;
        let Some((args, position)) = signature(&name) else {
            return Err(SyntaxError::at(self.text, start, format!("unknown operation `{name}`")));
        };
        self.expect(Tok::LParen)?;
        let parsed = match args {
            Args::None => Parsed::None,
            Args::Tag => Parsed::Tag(self.ident()?),
            Args::TwoStrings => {
                let a = self.string()?;
                self.expect(Tok::Comma)?;
                Parsed::Strings(a, self.string()?)
            }
            Args::Tags => {
                let mut tags = Vec::new();
                if *self.peek() != Tok::RParen {
                    tags.push(self.ident()?);
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        tags.push(self.ident()?);
                    }
                }
                Parsed::Tags(tags)
            }
            Args::OneExpr => Parsed::One(self.expression()?),
            Args::TwoExprs => {
                let a = self.expression()?;
                self.expect(Tok::Comma)?;
                Parsed::Two(a, self.expression()?)
            }
        };
        self.expect(Tok::RParen)?;
        Ok((name, start, position, parsed))
    }

    fn deeper(&mut self) -> Result<(), SyntaxError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("query nested too deeply"));
        }
        Ok(())
    }

    fn expression(&mut self) -> Result<QueryExpr, SyntaxError> {
        let outer = self.depth;
        self.deeper()?;
        let (name, start, position, args) = self.operation()?;
        if position != Position::Source {
            return Err(SyntaxError::at(
                self.text,
                start,
                format!("`{name}` needs a receiver; expressions start with universe(), nodes(..) or methods(..)"),
            ));
        }
        let mut expr = match args {
            Parsed::None => QueryExpr::Universe,
            Parsed::Tag(tag) => QueryExpr::Nodes(tag),
            Parsed::Strings(ty, m) => QueryExpr::Methods(ty, m),
            _ => unreachable!("source signatures"),
        };
        while *self.peek() == Tok::Dot {
            self.bump();
            self.deeper()?;
            let (name, start, position, args) = self.operation()?;
            if position != Position::Call {
                return Err(SyntaxError::at(
                    self.text,
                    start,
                    format!("`{name}` starts an expression and cannot be chained"),
                ));
            }
            let recv = Box::new(expr);
            expr = match (name.as_str(), args) {
                ("nodesTaggedAny", Parsed::Tags(t)) => QueryExpr::NodesTaggedAny(recv, t),
                ("edgesTaggedAny", Parsed::Tags(t)) => QueryExpr::EdgesTaggedAny(recv, t),
                ("retainEdges", Parsed::None) => QueryExpr::RetainEdges(recv),
                ("forward", Parsed::One(o)) => QueryExpr::Forward(recv, Box::new(o)),
                ("reverse", Parsed::One(o)) => QueryExpr::Reverse(recv, Box::new(o)),
                ("forwardStep", Parsed::One(o)) => QueryExpr::ForwardStep(recv, Box::new(o)),
                ("reverseStep", Parsed::One(o)) => QueryExpr::ReverseStep(recv, Box::new(o)),
                ("union", Parsed::One(o)) => QueryExpr::Union(recv, Box::new(o)),
                ("intersection", Parsed::One(o)) => QueryExpr::Intersection(recv, Box::new(o)),
                ("difference", Parsed::One(o)) => QueryExpr::Difference(recv, Box::new(o)),
                ("between", Parsed::Two(a, b)) => QueryExpr::Between(recv, Box::new(a), Box::new(b)),
                _ => unreachable!("call signatures"),
            };
        }
        self.depth = outer;
        Ok(expr)
    }
}

pub fn parse_query(text: &str) -> Result<QueryScript, SyntaxError> {
    let toks = lex(text)?;
    let mut parser = Parser {
        text,
        toks,
        pos: 0,
        depth: 0,
    };
    let expr = parser.expression()?;
    if *parser.peek() != Tok::Eof {
        return Err(parser.error(format!("unexpected {} after expression", parser.peek().describe())));
    }
    Ok(QueryScript {
        text: text.to_owned(),
        expr,
    })
}

pub fn eval_query(script: &QueryScript, graph: &Arc<ProgramGraph>) -> Subgraph {
    eval_expr(&script.expr, graph)
}

pub fn eval_expr(expr: &QueryExpr, graph: &Arc<ProgramGraph>) -> Subgraph {
    use QueryExpr::*;
    let eval = |e: &QueryExpr| eval_expr(e, graph);
    // Every operand is evaluated against the same snapshot.
    let same = "single-graph evaluation";
    match expr {
        Universe => Subgraph::universe(graph),
        Nodes(tag) => Subgraph::nodes_with_tag(graph, tag),
        Methods(ty, m) => Subgraph::method_select(graph, ty, m),
        NodesTaggedAny(q, tags) => eval(q).nodes_tagged_any(tags),
        EdgesTaggedAny(q, tags) => eval(q).edges_tagged_any(tags),
        RetainEdges(q) => eval(q).retain_edges(),
        Forward(q, o) => eval(q).forward(&eval(o)),
        Reverse(q, o) => eval(q).reverse(&eval(o)),
        ForwardStep(q, o) => eval(q).forward_step(&eval(o)),
        ReverseStep(q, o) => eval(q).reverse_step(&eval(o)),
        Between(q, a, b) => eval(q).between(&eval(a), &eval(b)),
        Union(q, o) => eval(q).union(&eval(o)).expect(same),
        Intersection(q, o) => eval(q).intersection(&eval(o)).expect(same),
        Difference(q, o) => eval(q).difference(&eval(o)).expect(same),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrs;
    use crate::graph::{tags, GraphBuilder};

    #[test]
    fn chained_script_matches_composition() {
        let mut b = GraphBuilder::new();
        let m1 = b.add_node(tags::METHOD, "a", attrs!()).unwrap();
        let m2 = b.add_node(tags::METHOD, "b", attrs!()).unwrap();
        let v = b.add_node(tags::VARIABLE, "v", attrs!()).unwrap();
        b.add_edge(tags::CALL, m1, m2, attrs!()).unwrap();
        b.add_edge(tags::DATA_FLOW, m2, v, attrs!()).unwrap();
        let g = b.freeze();
        let script = parse_query("universe().edgesTaggedAny(CALL).retainEdges()").unwrap();
        let expected = Subgraph::universe(&g).edges_tagged_any([tags::CALL]).retain_edges();
        assert_eq!(eval_query(&script, &g), expected);
    }

    #[test]
    fn unterminated_call_reports_end_offset() {
        let err = parse_query("between(").unwrap_err();
        assert_eq!(err.offset, 8);
        assert_eq!((err.line, err.column), (1, 9));
    }

    #[test]
    fn call_without_receiver_is_rejected() {
        let err = parse_query("retainEdges()").unwrap_err();
        assert_eq!(err.offset, 0);
        let err = parse_query("universe().universe()").unwrap_err();
        assert_eq!(err.offset, 11);
    }

    #[test]
    fn positions_track_lines() {
        let err = parse_query("universe()\n  .forward(nodes(X)\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert_eq!(err.column, 1);
        let err = parse_query("universe().bogus()").unwrap_err();
        assert_eq!(err.offset, 11);
        assert!(err.message.contains("bogus"));
    }

    #[test]
    fn rejects_trailing_tokens_and_bad_chars() {
        assert!(parse_query("universe() universe()").is_err());
        assert_eq!(parse_query("universe()#").unwrap_err().offset, 10);
        assert!(parse_query("methods(\"A\", \"b").is_err());
        assert!(parse_query("").is_err());
    }

    #[test]
    fn display_round_trips() {
        let text = r#"methods("BroadcastReceiver", "onReceive").union(universe().edgesTaggedAny(OVERRIDES, CALL).retainEdges().reverse(nodes(X))).between(nodes(A), nodes(B)).nodesTaggedAny()"#;
        let parsed = parse_query(text).unwrap();
        let again = parse_query(&parsed.expr.to_string()).unwrap();
        assert_eq!(parsed.expr, again.expr);
    }

    #[test]
    fn deep_queries_are_rejected() {
        let nested = format!("universe(){}", ".union(universe()".repeat(400) + &")".repeat(400));
        assert!(parse_query(&nested).is_err());
        let chain = format!("universe(){}", ".retainEdges()".repeat(400));
        assert!(parse_query(&chain).is_err());
        let fine = format!("universe(){}", ".retainEdges()".repeat(50));
        assert!(parse_query(&fine).is_ok());
    }
}
