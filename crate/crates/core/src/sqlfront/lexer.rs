//! Tokenizer for the select-project-join subset.

use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TokenKind {
    /// Identifier or keyword, lower-cased.
    Word(String),
    Number(String),
    Text(String),
    Comma,
    Dot,
    Semicolon,
    LParen,
    RParen,
    Star,
    Cmp(CmpOp),
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    /// The operator seen from the other side: `5 < x` is `x > 5`.
    pub(crate) fn flipped(self) -> Self {
        match self {
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, SqlError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let (tok_line, tok_col) = (line, column);
        let push = |tokens: &mut Vec<Token>, kind| {
            tokens.push(Token {
                kind,
                line: tok_line,
                column: tok_col,
            })
        };
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '-' if {
                let mut look = chars.clone();
                look.next();
                look.peek() == Some(&'-')
            } =>
            {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c.to_ascii_lowercase());
                        bump!();
                    } else {
                        break;
                    }
                }
                push(&mut tokens, TokenKind::Word(word));
            }
            '"' => {
                bump!();
                let mut word = String::new();
                loop {
                    match bump!() {
                        Some('"') => break,
                        Some(c) => word.push(c.to_ascii_lowercase()),
                        None => {
                            return Err(SqlError::syntax(tok_line, tok_col, "unterminated quoted identifier"))
                        }
                    }
                }
                push(&mut tokens, TokenKind::Word(word));
            }
            c if c.is_ascii_digit() => {
                let mut number = String::new();
                let mut seen_dot = false;
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() || (c == '.' && !seen_dot) {
                        seen_dot |= c == '.';
                        number.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                push(&mut tokens, TokenKind::Number(number));
            }
            '\'' => {
                bump!();
                let mut text = String::new();
                loop {
                    match bump!() {
                        Some('\'') => {
                            if chars.peek() == Some(&'\'') {
                                bump!();
                                text.push('\'');
                            } else {
                                break;
                            }
                        }
                        Some(c) => text.push(c),
                        None => return Err(SqlError::syntax(tok_line, tok_col, "unterminated string literal")),
                    }
                }
                push(&mut tokens, TokenKind::Text(text));
            }
            ',' | '.' | ';' | '(' | ')' | '*' => {
                bump!();
                let kind = match c {
                    ',' => TokenKind::Comma,
                    '.' => TokenKind::Dot,
                    ';' => TokenKind::Semicolon,
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    _ => TokenKind::Star,
                };
                push(&mut tokens, kind);
            }
            '=' | '<' | '>' | '!' => {
                bump!();
                let next = chars.peek().copied();
                let op = match (c, next) {
                    ('=', _) => CmpOp::Eq,
                    ('<', Some('=')) => {
                        bump!();
                        CmpOp::Le
                    }
                    ('<', Some('>')) => {
                        bump!();
                        CmpOp::Ne
                    }
                    ('<', _) => CmpOp::Lt,
                    ('>', Some('=')) => {
                        bump!();
                        CmpOp::Ge
                    }
                    ('>', _) => CmpOp::Gt,
                    ('!', Some('=')) => {
                        bump!();
                        CmpOp::Ne
                    }
                    _ => return Err(SqlError::syntax(tok_line, tok_col, "unexpected character '!'")),
                };
                push(&mut tokens, TokenKind::Cmp(op));
            }
            other => {
                return Err(SqlError::syntax(
                    tok_line,
                    tok_col,
                    format!("unexpected character '{other}'"),
                ))
            }
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        line,
        column,
    });
    Ok(tokens)
}
