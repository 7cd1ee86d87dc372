use super::{ParseDiagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    LBrace,
    RBrace,
    Comma,
    Dot,
    Arrow,
    At,
    Slash,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(_) => "string".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::At => "`@`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

pub(crate) fn lex(text: &str) -> (Vec<Token>, Vec<ParseDiagnostic>) {
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let span = |line, column, length| SourceSpan { line, column, length };

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
            }
            '{' | '}' | ',' | '.' | '@' | '/' => {
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    '@' => Tok::At,
                    _ => Tok::Slash,
                };
                tokens.push(Token { tok, span: span(line, col, 1) });
                i += 1;
                col += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                tokens.push(Token { tok: Tok::Arrow, span: span(line, col, 2) });
                i += 2;
                col += 2;
            }
            '"' => {
                let mut value = String::new();
                let mut closed = false;
                i += 1;
                col += 1;
                while i < chars.len() {
                    match chars[i] {
                        '"' => {
                            closed = true;
                            i += 1;
                            col += 1;
                            break;
                        }
                        '\n' => break,
                        '\\' if i + 1 < chars.len() => {
                            let esc = chars[i + 1];
                            match esc {
                                'n' => value.push('\n'),
                                '"' | '\\' => value.push(esc),
                                other => {
                                    diags.push(ParseDiagnostic::error(
                                        span(line, col, 2),
                                        "E-SYNTAX",
                                        format!("unknown escape `\\{other}`"),
                                    ));
                                    value.push(other);
                                }
                            }
                            i += 2;
                            col += 2;
                        }
                        ch => {
                            value.push(ch);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                let length = if start_line == line { col - start_col } else { 1 };
                if closed {
                    tokens.push(Token { tok: Tok::Str(value), span: span(start_line, start_col, length) });
                } else {
                    diags.push(ParseDiagnostic::error(
                        span(start_line, start_col, length.max(1)),
                        "E-SYNTAX",
                        "unterminated string",
                    ));
                }
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut word = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    word.push(chars[i]);
                    i += 1;
                    col += 1;
                }
                let length = word.chars().count();
                tokens.push(Token { tok: Tok::Ident(word), span: span(start_line, start_col, length) });
            }
            other => {
                diags.push(ParseDiagnostic::error(
                    span(line, col, 1),
                    "E-SYNTAX",
                    format!("unexpected character `{other}`"),
                ));
                i += 1;
                col += 1;
            }
        }
    }
    // anchor end-of-input on the last character so the span stays in the text
    let eof_span = match tokens.last() {
        Some(t) => SourceSpan { column: t.span.column + t.span.length.saturating_sub(1), length: 1, ..t.span },
        None => span(1, 1, 1),
    };
    tokens.push(Token { tok: Tok::Eof, span: eof_span });
    (tokens, diags)
}
