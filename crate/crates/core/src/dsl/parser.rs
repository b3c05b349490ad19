//! Recursive-descent parser for the `name { arg ; arg }` notation.
//!
//! Parsing happens in two steps: the text is read into a raw tree of
//! applications and atoms, then atoms are resolved by position. Template
//! skeletons reuse the raw tree with their own resolution rules.

use thiserror::Error;

use super::ast::{collapse_whitespace, LogicForm};
use super::catalog::{ArgKind, Function};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function {name:?} at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
    #[error("{name} takes {expected} argument(s), found {found} (byte {offset})")]
    Arity {
        offset: usize,
        name: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RawNode {
    Apply {
        name: String,
        offset: usize,
        args: Vec<RawNode>,
    },
    Atom {
        text: String,
        escaped: bool,
        offset: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Semi,
    Chunk { text: String, escaped: bool },
}

fn tokenize(input: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = input.char_indices().peekable();
    while let Some(&(offset, c)) = chars.peek() {
        match c {
            '{' | '}' | ';' => {
                chars.next();
                let tok = match c {
                    '{' => Token::Open,
                    '}' => Token::Close,
                    _ => Token::Semi,
                };
                tokens.push((offset, tok));
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut text = String::new();
                let mut escaped = false;
                while let Some(&(pos, c)) = chars.peek() {
                    match c {
                        '{' | '}' | ';' => break,
                        '\\' => {
                            chars.next();
                            let Some((_, next)) = chars.next() else {
                                return Err(ParseError::Syntax {
                                    offset: pos,
                                    message: "dangling escape at end of input".into(),
                                });
                            };
                            escaped = true;
                            text.push(next);
                        }
                        _ => {
                            chars.next();
                            text.push(c);
                        }
                    }
                }
                tokens.push((
                    offset,
                    Token::Chunk {
                        text: collapse_whitespace(&text),
                        escaped,
                    },
                ));
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn form(&mut self) -> Result<RawNode, ParseError> {
        let offset = self.offset();
        let Some(Token::Chunk { text, escaped }) = self.peek().cloned() else {
            return Err(self.error(match self.peek() {
                None => "unexpected end of input".to_string(),
                Some(t) => format!("expected a form, found {}", describe(t)),
            }));
        };
        self.pos += 1;
        if self.peek() != Some(&Token::Open) {
            return Ok(RawNode::Atom { text, escaped, offset });
        }
        self.pos += 1;
        let mut args = vec![self.form()?];
        loop {
            match self.peek() {
                Some(Token::Semi) => {
                    self.pos += 1;
                    args.push(self.form()?);
                }
                Some(Token::Close) => {
                    self.pos += 1;
                    break;
                }
                Some(t) => {
                    let msg = format!("expected ';' or '}}', found {}", describe(t));
                    return Err(self.error(msg));
                }
                None => return Err(self.error("unclosed '{'")),
            }
        }
        Ok(RawNode::Apply {
            name: text,
            offset,
            args,
        })
    }
}

fn describe(t: &Token) -> String {
    match t {
        Token::Open => "'{'".into(),
        Token::Close => "'}'".into(),
        Token::Semi => "';'".into(),
        Token::Chunk { text, .. } => format!("{text:?}"),
    }
}

pub(crate) fn parse_raw(input: &str) -> Result<RawNode, ParseError> {
    let mut parser = Parser {
        tokens: tokenize(input)?,
        pos: 0,
        end: input.len(),
    };
    let node = parser.form()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.error("trailing input after form"));
    }
    Ok(node)
}

/// Parses a logic form. Atoms in header positions become column references,
/// other atoms literals, and an unescaped `all_rows` the whole-table view.
pub fn parse_logic_form(input: &str) -> Result<LogicForm, ParseError> {
    resolve(parse_raw(input)?, None)
}

fn resolve(node: RawNode, slot: Option<ArgKind>) -> Result<LogicForm, ParseError> {
    match node {
        RawNode::Apply { name, offset, args } => {
            let function = Function::from_name(&name).ok_or(ParseError::UnknownFunction {
                offset,
                name: name.clone(),
            })?;
            let kinds = function.args();
            if kinds.len() != args.len() {
                return Err(ParseError::Arity {
                    offset,
                    name,
                    expected: kinds.len(),
                    found: args.len(),
                });
            }
            let args = args
                .into_iter()
                .zip(kinds)
                .map(|(a, &k)| resolve(a, Some(k)))
                .collect::<Result<_, _>>()?;
            Ok(LogicForm::Apply(function, args))
        }
        RawNode::Atom { text, escaped, .. } => Ok(if !escaped && text == "all_rows" {
            LogicForm::AllRows
        } else if matches!(slot, Some(ArgKind::Header | ArgKind::NumericHeader)) {
            LogicForm::Column(text)
        } else {
            LogicForm::Literal(text)
        }),
    }
}
