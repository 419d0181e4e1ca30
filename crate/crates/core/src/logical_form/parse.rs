use super::{Leaf, Literal, Operator, Placeholder, SExpr, Sort};

/// Parse failure. Offsets are byte offsets into the input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown operator `{tag}` at offset {offset}")]
    UnknownOperator { tag: String, offset: usize },
    #[error("{op} expects {expected} argument(s), found {found} (at offset {offset})")]
    Arity {
        op: Operator,
        expected: usize,
        found: usize,
        offset: usize,
    },
    #[error("at offset {offset}: {message}")]
    Sort { offset: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok<'_>)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Tok::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::Close));
                i += 1;
            }
            b if b.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                if bytes[i] == b'"' {
                    i += 1;
                    while i < bytes.len() && bytes[i] != b'"' {
                        i += if bytes[i] == b'\\' { 2 } else { 1 };
                    }
                    if i >= bytes.len() {
                        return Err(ParseError::Syntax {
                            offset: start,
                            message: "unterminated string literal".into(),
                        });
                    }
                    i += 1;
                }
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                out.push((start, Tok::Atom(&text[start..i])));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(usize, Tok<'a>)> {
        self.toks.get(self.pos)
    }

    fn expr(&mut self, sort: Sort) -> Result<SExpr, ParseError> {
        let Some((offset, tok)) = self.toks.get(self.pos).cloned() else {
            return Err(ParseError::Syntax {
                offset: self.len,
                message: "unexpected end of input".into(),
            });
        };
        self.pos += 1;
        match tok {
            Tok::Close => Err(ParseError::Syntax {
                offset,
                message: "unexpected `)`".into(),
            }),
            Tok::Atom(atom) => classify_leaf(atom, sort, offset).map(SExpr::Leaf),
            Tok::Open => {
                let (tag_offset, tag) = match self.toks.get(self.pos).cloned() {
                    Some((o, Tok::Atom(tag))) => (o, tag),
                    Some((o, _)) => {
                        return Err(ParseError::Syntax {
                            offset: o,
                            message: "expected operator after `(`".into(),
                        })
                    }
                    None => {
                        return Err(ParseError::Syntax {
                            offset: self.len,
                            message: "unexpected end of input".into(),
                        })
                    }
                };
                self.pos += 1;
                let op = Operator::from_tag(tag).ok_or_else(|| ParseError::UnknownOperator {
                    tag: tag.to_string(),
                    offset: tag_offset,
                })?;
                let sig = op.signature(sort).ok_or_else(|| ParseError::Sort {
                    offset: tag_offset,
                    message: format!("{op} cannot appear in a {sort:?}-valued position"),
                })?;
                let mut args = Vec::new();
                loop {
                    match self.peek() {
                        Some((_, Tok::Close)) => {
                            self.pos += 1;
                            break;
                        }
                        None => {
                            return Err(ParseError::Syntax {
                                offset: self.len,
                                message: "unbalanced parenthesis".into(),
                            })
                        }
                        Some(_) => {
                            if args.len() >= sig.len() {
                                let found = args.len() + 1 + self.count_remaining_args();
                                return Err(ParseError::Arity {
                                    op,
                                    expected: sig.len(),
                                    found,
                                    offset: tag_offset,
                                });
                            }
                            args.push(self.expr(sig[args.len()])?);
                        }
                    }
                }
                if args.len() != sig.len() {
                    return Err(ParseError::Arity {
                        op,
                        expected: sig.len(),
                        found: args.len(),
                        offset: tag_offset,
                    });
                }
                Ok(SExpr::Node(op, args))
            }
        }
    }

    /// Number of further sibling expressions after the current one, used
    /// only to report an accurate count in arity errors.
    fn count_remaining_args(&self) -> usize {
        let mut depth = 0i32;
        let mut count = 0usize;
        for (_, t) in &self.toks[self.pos..] {
            match t {
                Tok::Open => {
                    if depth == 0 {
                        count += 1;
                    }
                    depth += 1;
                }
                Tok::Close => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                Tok::Atom(_) if depth == 0 => count += 1,
                Tok::Atom(_) => {}
            }
        }
        count.saturating_sub(1)
    }
}

fn is_entity_id(atom: &str) -> bool {
    atom.starts_with("m.") || atom.starts_with("g.")
}

fn classify_leaf(atom: &str, sort: Sort, offset: usize) -> Result<Leaf, ParseError> {
    let mismatch = |what: &str| ParseError::Sort {
        offset,
        message: format!("{what} `{atom}` cannot appear in a {sort:?}-valued position"),
    };
    if atom.starts_with('<') {
        let (p, idx) = Placeholder::parse_token(atom).ok_or_else(|| ParseError::Syntax {
            offset,
            message: format!("unknown placeholder `{atom}`"),
        })?;
        let leaf = Leaf::Slot(p, idx);
        return if leaf.fits(sort) {
            Ok(leaf)
        } else {
            Err(mismatch("placeholder"))
        };
    }
    if atom.contains("^^") {
        let lit = Literal::parse(atom).ok_or_else(|| ParseError::Syntax {
            offset,
            message: format!("malformed literal `{atom}`"),
        })?;
        return match sort {
            Sort::Set | Sort::Literal => Ok(Leaf::Literal(lit)),
            Sort::Relation => Err(mismatch("literal")),
        };
    }
    match sort {
        Sort::Literal => Err(mismatch("identifier")),
        Sort::Relation if is_entity_id(atom) => Err(mismatch("entity")),
        Sort::Relation => Ok(Leaf::Relation(atom.to_string())),
        Sort::Set if is_entity_id(atom) => Ok(Leaf::Entity(atom.to_string())),
        Sort::Set => Ok(Leaf::Class(atom.to_string())),
    }
}

pub(super) fn parse(text: &str) -> Result<SExpr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        len: text.len(),
    };
    let expr = p.expr(Sort::Set)?;
    if let Some((offset, _)) = p.peek() {
        return Err(ParseError::Syntax {
            offset: *offset,
            message: "trailing input after expression".into(),
        });
    }
    Ok(expr)
}
