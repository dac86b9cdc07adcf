//! Tokenizer for `.imp` sources.

use super::FrontendError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    KwDecl,
    KwInput,
    KwIf,
    KwElse,
    KwWhile,
    KwAssert,
    KwSkip,
    KwTrue,
    KwFalse,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Assign,
    Plus,
    Minus,
    Star,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

pub struct Lexer<'a> {
    src: &'a [u8],
    at: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), at: 0, line: 1, col: 1 }
    }

    pub fn tokenize(mut self) -> Result<Vec<(Tok, Pos)>, FrontendError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws_and_comments();
            let pos = Pos { line: self.line, col: self.col };
            let Some(&c) = self.src.get(self.at) else {
                out.push((Tok::Eof, pos));
                return Ok(out);
            };
            let tok = match c {
                b'(' => self.one(Tok::LParen),
                b')' => self.one(Tok::RParen),
                b'{' => self.one(Tok::LBrace),
                b'}' => self.one(Tok::RBrace),
                b',' => self.one(Tok::Comma),
                b';' => self.one(Tok::Semi),
                b'+' => self.one(Tok::Plus),
                b'-' => self.one(Tok::Minus),
                b'*' => self.one(Tok::Star),
                b'=' => {
                    if self.peek2() == Some(b'=') {
                        self.two(Tok::EqEq)
                    } else {
                        self.one(Tok::Assign)
                    }
                }
                b'!' => {
                    if self.peek2() == Some(b'=') {
                        self.two(Tok::NotEq)
                    } else {
                        self.one(Tok::Bang)
                    }
                }
                b'<' => {
                    if self.peek2() == Some(b'=') {
                        self.two(Tok::Le)
                    } else {
                        self.one(Tok::Lt)
                    }
                }
                b'>' => {
                    if self.peek2() == Some(b'=') {
                        self.two(Tok::Ge)
                    } else {
                        self.one(Tok::Gt)
                    }
                }
                b'&' => {
                    if self.peek2() == Some(b'&') {
                        self.two(Tok::AndAnd)
                    } else {
                        return Err(FrontendError::syntax(pos, "expected '&&'"));
                    }
                }
                b'|' => {
                    if self.peek2() == Some(b'|') {
                        self.two(Tok::OrOr)
                    } else {
                        return Err(FrontendError::syntax(pos, "expected '||'"));
                    }
                }
                b'0'..=b'9' => self.number(pos)?,
                c if c == b'_' || c.is_ascii_alphabetic() => self.ident(),
                other => {
                    return Err(FrontendError::syntax(
                        pos,
                        format!("unexpected character {:?}", other as char),
                    ));
                }
            };
            out.push((tok, pos));
        }
    }

    fn skip_ws_and_comments(&mut self) {
        loop {
            match self.src.get(self.at) {
                Some(b' ') | Some(b'\t') | Some(b'\r') => {
                    self.at += 1;
                    self.col += 1;
                }
                Some(b'\n') => {
                    self.at += 1;
                    self.line += 1;
                    self.col = 1;
                }
                Some(b'/') if self.peek2() == Some(b'/') => {
                    while let Some(&c) = self.src.get(self.at) {
                        if c == b'\n' {
                            break;
                        }
                        self.at += 1;
                        self.col += 1;
                    }
                }
                _ => return,
            }
        }
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.at + 1).copied()
    }

    fn one(&mut self, t: Tok) -> Tok {
        self.at += 1;
        self.col += 1;
        t
    }

    fn two(&mut self, t: Tok) -> Tok {
        self.at += 2;
        self.col += 2;
        t
    }

    fn number(&mut self, pos: Pos) -> Result<Tok, FrontendError> {
        let start = self.at;
        while matches!(self.src.get(self.at), Some(c) if c.is_ascii_digit()) {
            self.at += 1;
            self.col += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.at]).unwrap();
        text.parse::<i64>()
            .map(Tok::Int)
            .map_err(|_| FrontendError::syntax(pos, format!("integer literal out of range: {text}")))
    }

    fn ident(&mut self) -> Tok {
        let start = self.at;
        while matches!(self.src.get(self.at), Some(c) if *c == b'_' || c.is_ascii_alphanumeric()) {
            self.at += 1;
            self.col += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.at]).unwrap();
        match text {
            "decl" => Tok::KwDecl,
            "input" => Tok::KwInput,
            "if" => Tok::KwIf,
            "else" => Tok::KwElse,
            "while" => Tok::KwWhile,
            "assert" => Tok::KwAssert,
            "skip" => Tok::KwSkip,
            "true" => Tok::KwTrue,
            "false" => Tok::KwFalse,
            _ => Tok::Ident(text.to_string()),
        }
    }
}
