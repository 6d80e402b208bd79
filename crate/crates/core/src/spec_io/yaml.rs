//! A YAML node tree that remembers where every key and value came from.
//!
//! Only the plain data subset is accepted: one document, no anchors, aliases or tags.

use yaml_rust2::parser::{Event, Parser};
use yaml_rust2::scanner::{Marker, TScalarStyle};

use crate::model::{SourceSpan, ViolationCode};

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub struct Key {
    pub text: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Scalar { text: String, quoted: bool },
    Seq(Vec<Node>),
    Map(Vec<(Key, Node)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub span: SourceSpan,
}

impl Node {
    pub fn as_scalar(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Scalar { text, .. } => Some(text),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&[(Key, Node)]> {
        match &self.kind {
            NodeKind::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_seq(&self) -> Option<&[Node]> {
        match &self.kind {
            NodeKind::Seq(s) => Some(s),
            _ => None,
        }
    }

    /// Plain `~`, `null` or an empty plain scalar.
    pub fn is_null(&self) -> bool {
        matches!(&self.kind, NodeKind::Scalar { text, quoted: false } if text.is_empty() || text == "~" || text == "null")
    }

    pub fn is_quoted(&self) -> bool {
        matches!(self.kind, NodeKind::Scalar { quoted: true, .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            NodeKind::Scalar { .. } => "scalar",
            NodeKind::Seq(_) => "sequence",
            NodeKind::Map(_) => "mapping",
        }
    }
}

fn span(m: &Marker) -> SourceSpan {
    SourceSpan {
        line: m.line().max(1),
        column: m.col() + 1,
    }
}

fn err(code: ViolationCode, at: SourceSpan, message: impl Into<String>) -> ParseError {
    ParseError {
        code,
        line: at.line,
        column: at.column,
        path: String::new(),
        message: message.into(),
    }
}

struct Builder<'a> {
    parser: Parser<std::str::Chars<'a>>,
}

impl Builder<'_> {
    fn next(&mut self) -> Result<(Event, SourceSpan), ParseError> {
        match self.parser.next_token() {
            Ok((ev, m)) => Ok((ev, span(&m))),
            Err(e) => Err(err(ViolationCode::Syntax, span(e.marker()), e.info().to_string())),
        }
    }

    fn node(&mut self, ev: Event, at: SourceSpan, depth: usize) -> Result<Node, ParseError> {
        if depth > 64 {
            return Err(err(ViolationCode::Unsupported, at, "document nested too deeply"));
        }
        match ev {
            Event::Alias(_) => Err(err(ViolationCode::Unsupported, at, "aliases are not supported")),
            Event::Scalar(text, style, anchor, tag) => {
                reject_anchor_tag(anchor, tag.is_some(), at)?;
                Ok(Node {
                    kind: NodeKind::Scalar {
                        text,
                        quoted: style != TScalarStyle::Plain,
                    },
                    span: at,
                })
            }
            Event::SequenceStart(anchor, tag) => {
                reject_anchor_tag(anchor, tag.is_some(), at)?;
                let mut items = Vec::new();
                loop {
                    let (ev, sp) = self.next()?;
                    if ev == Event::SequenceEnd {
                        break;
                    }
                    items.push(self.node(ev, sp, depth + 1)?);
                }
                Ok(Node {
                    kind: NodeKind::Seq(items),
                    span: at,
                })
            }
            Event::MappingStart(anchor, tag) => {
                reject_anchor_tag(anchor, tag.is_some(), at)?;
                let mut entries: Vec<(Key, Node)> = Vec::new();
                loop {
                    let (ev, ksp) = self.next()?;
                    if ev == Event::MappingEnd {
                        break;
                    }
                    let key = match self.node(ev, ksp, depth + 1)? {
                        Node {
                            kind: NodeKind::Scalar { text, .. },
                            span,
                        } => Key { text, span },
                        other => {
                            return Err(err(
                                ViolationCode::Unsupported,
                                other.span,
                                "mapping keys must be scalars",
                            ))
                        }
                    };
                    if entries.iter().any(|(k, _)| k.text == key.text) {
                        return Err(err(
                            ViolationCode::DuplicateKey,
                            key.span,
                            format!("duplicate key `{}`", key.text),
                        ));
                    }
                    let (ev, vsp) = self.next()?;
                    let value = self.node(ev, vsp, depth + 1)?;
                    entries.push((key, value));
                }
                Ok(Node {
                    kind: NodeKind::Map(entries),
                    span: at,
                })
            }
            other => Err(err(ViolationCode::Syntax, at, format!("unexpected {other:?}"))),
        }
    }
}

fn reject_anchor_tag(anchor: usize, tagged: bool, at: SourceSpan) -> Result<(), ParseError> {
    if anchor != 0 {
        return Err(err(ViolationCode::Unsupported, at, "anchors are not supported"));
    }
    if tagged {
        return Err(err(ViolationCode::Unsupported, at, "tags are not supported"));
    }
    Ok(())
}

/// Parses a single-document YAML (or JSON) text into a [`Node`].
pub fn parse_node(text: &str) -> Result<Node, ParseError> {
    let mut b = Builder {
        parser: Parser::new_from_str(text),
    };
    let origin = SourceSpan { line: 1, column: 1 };
    let mut root = None;
    loop {
        let (ev, at) = b.next()?;
        match ev {
            Event::StreamStart | Event::DocumentEnd | Event::Nothing => {}
            Event::StreamEnd => break,
            Event::DocumentStart => {
                if root.is_some() {
                    return Err(err(ViolationCode::Unsupported, at, "multi-document streams are not supported"));
                }
                let (ev, at) = b.next()?;
                if ev == Event::DocumentEnd {
                    return Err(err(ViolationCode::Syntax, at, "empty document"));
                }
                root = Some(b.node(ev, at, 0)?);
            }
            other => return Err(err(ViolationCode::Syntax, at, format!("unexpected {other:?}"))),
        }
    }
    root.ok_or_else(|| err(ViolationCode::Syntax, origin, "empty document"))
}
