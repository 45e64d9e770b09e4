use super::{ScriptError, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number(f64),
    Param,
    Let,
    Output,
    In,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Eq,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl TokenKind {
    /// How the token is written in source, for error messages.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Number(v) => format!("number `{v}`"),
            TokenKind::Eof => "end of input".into(),
            other => format!("`{}`", other.text()),
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            TokenKind::Param => "param",
            TokenKind::Let => "let",
            TokenKind::Output => "output",
            TokenKind::In => "in",
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::LBracket => "[",
            TokenKind::RBracket => "]",
            TokenKind::Comma => ",",
            TokenKind::Semi => ";",
            TokenKind::Eq => "=",
            TokenKind::Plus => "+",
            TokenKind::Minus => "-",
            TokenKind::Star => "*",
            TokenKind::Slash => "/",
            TokenKind::Ident(_) => "identifier",
            TokenKind::Number(_) => "number",
            TokenKind::Eof => "end of input",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

/// Splits `src` into tokens, ending with [`TokenKind::Eof`].
pub fn tokenize(src: &str) -> Result<Vec<Token>, ScriptError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&(start, c)) = chars.peek() {
        let (tl, tc) = (line, col);
        let bump = |chars: &mut std::iter::Peekable<std::str::CharIndices>, col: &mut usize| {
            chars.next();
            *col += 1;
        };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            bump(&mut chars, &mut col);
            continue;
        }
        if c == '#' {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump(&mut chars, &mut col);
            }
            continue;
        }
        let kind = if c.is_ascii_alphabetic() || c == '_' {
            let mut end = start;
            while let Some(&(i, c)) = chars.peek() {
                if !(c.is_ascii_alphanumeric() || c == '_') {
                    break;
                }
                end = i + c.len_utf8();
                bump(&mut chars, &mut col);
            }
            match &src[start..end] {
                "param" => TokenKind::Param,
                "let" => TokenKind::Let,
                "output" => TokenKind::Output,
                "in" => TokenKind::In,
                s => TokenKind::Ident(s.to_string()),
            }
        } else if c.is_ascii_digit() || c == '.' {
            let mut end = start;
            let mut prev = ' ';
            while let Some(&(i, c)) = chars.peek() {
                let exp_sign = (c == '+' || c == '-') && (prev == 'e' || prev == 'E');
                if !(c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign) {
                    break;
                }
                prev = c;
                end = i + 1;
                bump(&mut chars, &mut col);
            }
            let text = &src[start..end];
            let span = SourceSpan { start, end, line: tl, col: tc };
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => TokenKind::Number(v),
                Ok(_) => return Err(ScriptError::lex(span, format!("number `{text}` is out of range"))),
                Err(_) => return Err(ScriptError::lex(span, format!("malformed number `{text}`"))),
            }
        } else {
            let k = match c {
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                '[' => TokenKind::LBracket,
                ']' => TokenKind::RBracket,
                ',' => TokenKind::Comma,
                ';' => TokenKind::Semi,
                '=' => TokenKind::Eq,
                '+' => TokenKind::Plus,
                '-' => TokenKind::Minus,
                '*' => TokenKind::Star,
                '/' => TokenKind::Slash,
                _ => {
                    let span = SourceSpan { start, end: start + c.len_utf8(), line: tl, col: tc };
                    return Err(ScriptError::lex(span, format!("illegal character `{c}`")));
                }
            };
            bump(&mut chars, &mut col);
            k
        };
        let end = chars.peek().map_or(src.len(), |&(i, _)| i);
        out.push(Token { kind, span: SourceSpan { start, end, line: tl, col: tc } });
    }
    let end = src.len();
    out.push(Token { kind: TokenKind::Eof, span: SourceSpan { start: end, end, line, col } });
    Ok(out)
}
