use super::SyntaxError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(String),
    Let,
    LetP,
    In,
    Case,
    Of,
    Obs,
    Der,
    Sample,
    Bern,
    True,
    False,
    Def,
    IfZero,
    Then,
    Else,
    Eq,
    Comma,
    Semi,
    LAngle,
    RAngle,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Bang,
    Backslash,
    Dot,
    Arrow,
    Slash,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Let => "let",
            Tok::LetP => "letp",
            Tok::In => "in",
            Tok::Case => "case",
            Tok::Of => "of",
            Tok::Obs => "obs",
            Tok::Der => "der",
            Tok::Sample => "sample",
            Tok::Bern => "bern",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Def => "def",
            Tok::IfZero => "ifZero",
            Tok::Then => "then",
            Tok::Else => "else",
            Tok::Eq => "=",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::LAngle => "<",
            Tok::RAngle => ">",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Bang => "!",
            Tok::Backslash => "\\",
            Tok::Dot => ".",
            Tok::Arrow => "=>",
            Tok::Slash => "/",
            Tok::Ident(_) | Tok::Number(_) | Tok::Eof => "",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "let" => Tok::Let,
        "letp" => Tok::LetP,
        "in" => Tok::In,
        "case" => Tok::Case,
        "of" => Tok::Of,
        "obs" => Tok::Obs,
        "der" => Tok::Der,
        "sample" => Tok::Sample,
        "bern" => Tok::Bern,
        "true" => Tok::True,
        "false" => Tok::False,
        "def" => Tok::Def,
        "ifZero" => Tok::IfZero,
        "then" => Tok::Then,
        "else" => Tok::Else,
        _ => return None,
    })
}

pub fn tokenize(src: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut push = |tok: Tok, width: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned { tok, line: l0, col: c0 });
            *i += width;
            *col += width;
        };
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
                }
            }
            '=' if chars.get(i + 1) == Some(&'>') => push(Tok::Arrow, 2, &mut i, &mut col),
            '=' => push(Tok::Eq, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            ';' => push(Tok::Semi, 1, &mut i, &mut col),
            '<' => push(Tok::LAngle, 1, &mut i, &mut col),
            '>' => push(Tok::RAngle, 1, &mut i, &mut col),
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '{' => push(Tok::LBrace, 1, &mut i, &mut col),
            '}' => push(Tok::RBrace, 1, &mut i, &mut col),
            '!' => push(Tok::Bang, 1, &mut i, &mut col),
            '\\' => push(Tok::Backslash, 1, &mut i, &mut col),
            '/' => push(Tok::Slash, 1, &mut i, &mut col),
            '.' if !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                push(Tok::Dot, 1, &mut i, &mut col)
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                if text.matches('.').count() > 1 || text.ends_with('.') {
                    return Err(SyntaxError::new(l0, c0, format!("malformed number `{text}`")));
                }
                col += i - start;
                out.push(Spanned { tok: Tok::Number(text), line: l0, col: c0 });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                col += i - start;
                let tok = keyword(&text).unwrap_or(Tok::Ident(text));
                out.push(Spanned { tok, line: l0, col: c0 });
            }
            other => return Err(SyntaxError::new(l0, c0, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}
