use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Digits with an optional fractional part, kept as text.
    Number(String),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Number(s) => write!(f, "number `{s}`"),
            Tok::Kw(k) => write!(f, "`{k}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

pub const KEYWORDS: &[&str] = &[
    "if", "then", "else", "fi", "while", "do", "od", "choose", "or", "ro", "skip", "skipAsn",
    "skipIf", "true", "false", "low", "high", "int", "bool", "array",
];

// Longest first so that `:=` wins over `:`.
const SYMBOLS: &[&str] = &[
    ":=", "==", "!=", "<=", ":", ";", "(", ")", "[", "]", "+", "-", "*", "=", "<", "/",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: usize,
    pub column: usize,
    pub found: char,
}

pub fn tokenize(src: &str) -> Result<Vec<Spanned>, LexError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word),
            }
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            Tok::Number(chars[start..i].iter().collect())
        } else {
            let rest = &chars[i..];
            let sym = SYMBOLS.iter().find(|s| {
                let n = s.chars().count();
                rest.len() >= n && s.chars().zip(rest).all(|(a, b)| a == *b)
            });
            match sym {
                Some(s) => {
                    i += s.len();
                    Tok::Sym(s)
                }
                None => {
                    return Err(LexError {
                        line,
                        column: col,
                        found: c,
                    })
                }
            }
        };
        col += i - start;
        out.push(Spanned {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn assignment_and_comparison() {
        assert_eq!(
            toks("x:=x+1; i<=3"),
            vec![
                Tok::Ident("x".into()),
                Tok::Sym(":="),
                Tok::Ident("x".into()),
                Tok::Sym("+"),
                Tok::Number("1".into()),
                Tok::Sym(";"),
                Tok::Ident("i".into()),
                Tok::Sym("<="),
                Tok::Number("3".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn numbers_keywords_comments() {
        assert_eq!(
            toks("choose 0.25: skip // tail\nor 1/2 ro"),
            vec![
                Tok::Kw("choose"),
                Tok::Number("0.25".into()),
                Tok::Sym(":"),
                Tok::Kw("skip"),
                Tok::Kw("or"),
                Tok::Number("1".into()),
                Tok::Sym("/"),
                Tok::Number("2".into()),
                Tok::Kw("ro"),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let t = tokenize("a\n  bc").unwrap();
        assert_eq!((t[1].line, t[1].column), (2, 3));
        assert_eq!((t[2].line, t[2].column), (2, 5));
    }

    #[test]
    fn bad_character() {
        let e = tokenize("x := @").unwrap_err();
        assert_eq!((e.line, e.column, e.found), (1, 6, '@'));
    }
}
