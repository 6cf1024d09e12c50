use super::{Assignment, Comparator, MeanExpr, Predicate, Program};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Assign,
    LParen,
    RParen,
    Comma,
    Semi,
    Gt,
    Lt,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut push = |tok, n: usize, i: &mut usize, col: &mut usize| {
            out.push(Token { tok, line: l0, column: c0 });
            *i += n;
            *col += n;
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
            ':' if chars.get(i + 1) == Some(&'=') => push(Tok::Assign, 2, &mut i, &mut col),
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            ';' => push(Tok::Semi, 1, &mut i, &mut col),
            '>' => push(Tok::Gt, 1, &mut i, &mut col),
            '<' => push(Tok::Lt, 1, &mut i, &mut col),
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += i - start;
                out.push(Token { tok: Tok::Ident(word), line: l0, column: c0 });
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let d = chars[i];
                    let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s.parse().map_err(|_| parse_err(l0, c0, format!("malformed number `{s}`")))?;
                if !v.is_finite() {
                    return Err(parse_err(l0, c0, format!("number `{s}` is not finite")));
                }
                col += i - start;
                out.push(Token { tok: Tok::Number(v), line: l0, column: c0 });
            }
            other => return Err(parse_err(l0, c0, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(parse_err(t.line, t.column, format!("expected {what}, found {}", describe(&t.tok))))
        }
    }

    fn ident(&mut self) -> Result<Token> {
        let t = self.next();
        match t.tok {
            Tok::Ident(_) => Ok(t),
            ref other => Err(parse_err(t.line, t.column, format!("expected identifier, found {}", describe(other)))),
        }
    }

    fn number(&mut self) -> Result<(f64, Token)> {
        let t = self.next();
        match t.tok {
            Tok::Number(v) => Ok((v, t)),
            ref other => Err(parse_err(t.line, t.column, format!("expected number, found {}", describe(other)))),
        }
    }

    fn predicate(&mut self) -> Result<(Predicate, Token)> {
        self.expect(Tok::LParen, "`(`")?;
        let v = self.ident()?;
        let c = self.next();
        let cmp = match c.tok {
            Tok::Gt => Comparator::Gt,
            Tok::Lt => Comparator::Lt,
            ref other => return Err(parse_err(c.line, c.column, format!("expected `>` or `<`, found {}", describe(other)))),
        };
        let (threshold, _) = self.number()?;
        self.expect(Tok::RParen, "`)`")?;
        let Tok::Ident(var) = v.tok.clone() else { unreachable!() };
        Ok((Predicate { var, cmp, threshold }, v))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(v) => format!("number {v}"),
        Tok::Assign => "`:=`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Semi => "`;`".into(),
        Tok::Gt => "`>`".into(),
        Tok::Lt => "`<`".into(),
        Tok::Eof => "end of input".into(),
    }
}

fn check_bound(assignments: &[Assignment], name: &str, at: &Token) -> Result<usize> {
    assignments.iter().position(|a| a.name == name).ok_or_else(|| Error::UnboundVariable {
        name: name.to_string(),
        line: at.line,
        column: at.column,
    })
}

/// Parse a program; errors carry the line and column of the offending token.
pub fn parse(text: &str) -> Result<Program> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let mut assignments: Vec<Assignment> = Vec::new();
    let mut observation: Option<(Predicate, Token)> = None;
    loop {
        let head = p.next();
        match &head.tok {
            Tok::Ident(kw) if kw == "return" => {
                if assignments.is_empty() {
                    return Err(parse_err(head.line, head.column, "program needs at least one assignment"));
                }
                let (query, at) = p.predicate()?;
                if p.peek().tok == Tok::Semi {
                    p.next();
                }
                let end = p.next();
                if end.tok != Tok::Eof {
                    return Err(parse_err(end.line, end.column, format!("expected end of input, found {}", describe(&end.tok))));
                }
                check_bound(&assignments, &query.var, &at)?;
                return Ok(Program { assignments, observation: observation.map(|o| o.0), query });
            }
            Tok::Ident(kw) if kw == "observe" => {
                if observation.is_some() {
                    return Err(parse_err(head.line, head.column, "only one observation is supported"));
                }
                let (pred, at) = p.predicate()?;
                p.expect(Tok::Semi, "`;`")?;
                let idx = check_bound(&assignments, &pred.var, &at)?;
                if idx + 1 != assignments.len() {
                    return Err(parse_err(at.line, at.column, "observation must be on the last assigned variable"));
                }
                observation = Some((pred, at));
            }
            Tok::Ident(name) if name != "normal" => {
                if observation.is_some() {
                    return Err(parse_err(head.line, head.column, "assignment after an observation is not supported"));
                }
                if assignments.iter().any(|a| &a.name == name) {
                    return Err(parse_err(head.line, head.column, format!("variable `{name}` is already bound")));
                }
                p.expect(Tok::Assign, "`:=`")?;
                let f = p.ident()?;
                if f.tok != Tok::Ident("normal".into()) {
                    return Err(parse_err(f.line, f.column, format!("expected `normal`, found {}", describe(&f.tok))));
                }
                p.expect(Tok::LParen, "`(`")?;
                let m = p.next();
                let mean = match &m.tok {
                    Tok::Number(v) => MeanExpr::Literal(*v),
                    Tok::Ident(v) => {
                        let idx = check_bound(&assignments, v, &m)?;
                        if idx + 1 != assignments.len() {
                            return Err(parse_err(m.line, m.column, format!("mean may only refer to the previous variable, not `{v}`")));
                        }
                        MeanExpr::Var(v.clone())
                    }
                    other => return Err(parse_err(m.line, m.column, format!("expected number or identifier, found {}", describe(other)))),
                };
                p.expect(Tok::Comma, "`,`")?;
                let (variance, vt) = p.number()?;
                if variance <= 0.0 {
                    return Err(Error::NonPositiveVariance { line: vt.line, column: vt.column });
                }
                p.expect(Tok::RParen, "`)`")?;
                p.expect(Tok::Semi, "`;`")?;
                assignments.push(Assignment { name: name.clone(), mean, variance });
            }
            other => {
                return Err(parse_err(head.line, head.column, format!("expected statement, found {}", describe(other))));
            }
        }
    }
}
