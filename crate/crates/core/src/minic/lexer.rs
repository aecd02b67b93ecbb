use std::fmt;

use super::ast::SourceSpan;
use super::FrontendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Int,
    Void,
    If,
    Else,
    While,
    For,
    Switch,
    Case,
    Default,
    Break,
    Return,
}

impl Keyword {
    pub const ALL: [Keyword; 11] = [
        Keyword::Int,
        Keyword::Void,
        Keyword::If,
        Keyword::Else,
        Keyword::While,
        Keyword::For,
        Keyword::Switch,
        Keyword::Case,
        Keyword::Default,
        Keyword::Break,
        Keyword::Return,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Int => "int",
            Keyword::Void => "void",
            Keyword::If => "if",
            Keyword::Else => "else",
            Keyword::While => "while",
            Keyword::For => "for",
            Keyword::Switch => "switch",
            Keyword::Case => "case",
            Keyword::Default => "default",
            Keyword::Break => "break",
            Keyword::Return => "return",
        }
    }

    pub fn from_str(s: &str) -> Option<Keyword> {
        Keyword::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Punct {
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Colon,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
}

impl Punct {
    pub fn as_str(self) -> &'static str {
        match self {
            Punct::LParen => "(",
            Punct::RParen => ")",
            Punct::LBrace => "{",
            Punct::RBrace => "}",
            Punct::LBracket => "[",
            Punct::RBracket => "]",
            Punct::Semi => ";",
            Punct::Comma => ",",
            Punct::Colon => ":",
            Punct::Assign => "=",
            Punct::Plus => "+",
            Punct::Minus => "-",
            Punct::Star => "*",
            Punct::Slash => "/",
            Punct::Percent => "%",
            Punct::Lt => "<",
            Punct::Le => "<=",
            Punct::Gt => ">",
            Punct::Ge => ">=",
            Punct::EqEq => "==",
            Punct::Ne => "!=",
            Punct::AndAnd => "&&",
            Punct::OrOr => "||",
            Punct::Bang => "!",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    IntLit(i64),
    Punct(Punct),
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Keyword(k) => f.write_str(k.as_str()),
            TokenKind::Ident(s) => f.write_str(s),
            TokenKind::IntLit(v) => write!(f, "{v}"),
            TokenKind::Punct(p) => f.write_str(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

/// Splits MiniC source into tokens. Whitespace separates tokens; any other
/// character must belong to a token.
pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let (mut line, mut col) = (1u32, 1u32);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let start = i;
        let kind = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match Keyword::from_str(&word) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident(word),
            }
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let end_col = col + (i - start) as u32;
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                return Err(FrontendError::Lex {
                    message: format!("malformed number '{}{}'", text, chars[i]),
                    span: SourceSpan::new(line, col, line, end_col + 1),
                });
            }
            let value = text.parse::<i64>().map_err(|_| FrontendError::Lex {
                message: format!("integer literal '{text}' out of range"),
                span: SourceSpan::new(line, col, line, end_col),
            })?;
            TokenKind::IntLit(value)
        } else {
            let next = chars.get(i + 1).copied();
            let (p, len) = match (c, next) {
                ('<', Some('=')) => (Punct::Le, 2),
                ('>', Some('=')) => (Punct::Ge, 2),
                ('=', Some('=')) => (Punct::EqEq, 2),
                ('!', Some('=')) => (Punct::Ne, 2),
                ('&', Some('&')) => (Punct::AndAnd, 2),
                ('|', Some('|')) => (Punct::OrOr, 2),
                ('(', _) => (Punct::LParen, 1),
                (')', _) => (Punct::RParen, 1),
                ('{', _) => (Punct::LBrace, 1),
                ('}', _) => (Punct::RBrace, 1),
                ('[', _) => (Punct::LBracket, 1),
                (']', _) => (Punct::RBracket, 1),
                (';', _) => (Punct::Semi, 1),
                (',', _) => (Punct::Comma, 1),
                (':', _) => (Punct::Colon, 1),
                ('=', _) => (Punct::Assign, 1),
                ('+', _) => (Punct::Plus, 1),
                ('-', _) => (Punct::Minus, 1),
                ('*', _) => (Punct::Star, 1),
                ('/', _) => (Punct::Slash, 1),
                ('%', _) => (Punct::Percent, 1),
                ('<', _) => (Punct::Lt, 1),
                ('>', _) => (Punct::Gt, 1),
                ('!', _) => (Punct::Bang, 1),
                _ => {
                    return Err(FrontendError::Lex {
                        message: format!("unexpected character '{c}'"),
                        span: SourceSpan::new(line, col, line, col + 1),
                    })
                }
            };
            i += len;
            TokenKind::Punct(p)
        };
        let width = (i - start) as u32;
        tokens.push(Token {
            kind,
            span: SourceSpan::new(line, col, line, col + width),
        });
        col += width;
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declaration_tokens() {
        let toks = tokenize("int x;").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.kind.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                TokenKind::Keyword(Keyword::Int),
                TokenKind::Ident("x".into()),
                TokenKind::Punct(Punct::Semi)
            ]
        );
        assert_eq!(toks[1].span, SourceSpan::new(1, 5, 1, 6));
    }

    #[test]
    fn empty_source() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("  \n\t ").unwrap().is_empty());
    }

    #[test]
    fn unknown_character_reports_column() {
        match tokenize("x @ y") {
            Err(FrontendError::Lex { span, .. }) => {
                assert_eq!((span.start_line, span.start_col), (1, 3))
            }
            other => panic!("expected lex error, got {other:?}"),
        }
    }

    #[test]
    fn two_char_operators() {
        let toks = tokenize("a<=b&&c!=d||!e").unwrap();
        let text: Vec<String> = toks.iter().map(|t| t.kind.to_string()).collect();
        assert_eq!(text, ["a", "<=", "b", "&&", "c", "!=", "d", "||", "!", "e"]);
    }

    #[test]
    fn lines_and_columns() {
        let toks = tokenize("int f(){\n  return 10;\n}").unwrap();
        let ret = toks.iter().find(|t| t.kind == TokenKind::Keyword(Keyword::Return)).unwrap();
        assert_eq!(ret.span, SourceSpan::new(2, 3, 2, 9));
        let lit = toks.iter().find(|t| t.kind == TokenKind::IntLit(10)).unwrap();
        assert_eq!(lit.span, SourceSpan::new(2, 10, 2, 12));
    }

    #[test]
    fn overflowing_literal_is_rejected() {
        assert!(tokenize("99999999999999999999").is_err());
        assert!(tokenize("12ab").is_err());
    }
}
