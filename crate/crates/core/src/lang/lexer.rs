use super::ParseError;
use crate::symexpr::Rat;
use num_bigint::BigInt;
use num_traits::{One, Zero};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(Rat),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

// Longest symbols first so that prefixes do not shadow them.
const SYMBOLS: &[&str] = &[
    ":=", "+=", "-=", "==", "!=", "<=", ">=", "&&", "||", "+", "-", "*", "/", "^", "(", ")", "{", "}", "[", "]", ";",
    ",", "=", "<", ">", "%", "!", "@",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize, chars: &[char]| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1, &chars);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            let word: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(word), line: l0, col: c0 });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            let int_part: String = chars[start..i].iter().collect();
            let mut value = Rat::from_integer(int_part.parse::<BigInt>().unwrap());
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1, &chars);
                let fs = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(&mut i, &mut line, &mut col, 1, &chars);
                }
                let frac: String = chars[fs..i].iter().collect();
                let mut scale = BigInt::one();
                for _ in 0..frac.len() {
                    scale *= 10;
                }
                let f: BigInt = frac.parse().unwrap_or_else(|_| BigInt::zero());
                value += Rat::new(f, scale);
            }
            out.push(Token { tok: Tok::Num(value), line: l0, col: c0 });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = SYMBOLS.iter().find(|s| rest.starts_with(**s));
        match sym {
            Some(s) => {
                advance(&mut i, &mut line, &mut col, s.len(), &chars);
                out.push(Token { tok: Tok::Sym(s), line: l0, col: c0 });
            }
            None => {
                return Err(ParseError { line: l0, col: c0, message: format!("unexpected character '{c}'") });
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
