//! SMT-LIB2 term syntax restricted to the operators of [`Op`].

use super::{Decls, LogicError, Op, Sort, Term};

pub(super) fn operator(sym: &str) -> Option<Op> {
    Some(match sym {
        "+" => Op::Add,
        "-" => Op::Sub,
        "*" => Op::Mul,
        "div" => Op::Div,
        "mod" => Op::Mod,
        "<" => Op::Lt,
        "<=" => Op::Le,
        ">" => Op::Gt,
        ">=" => Op::Ge,
        "=" => Op::Eq,
        "distinct" => Op::Distinct,
        "and" => Op::And,
        "or" => Op::Or,
        "not" => Op::Not,
        "=>" => Op::Implies,
        "ite" => Op::Ite,
        _ => return None,
    })
}

const RESERVED: &[&str] = &["let", "forall", "exists", "as", "par", "match", "_", "!"];

pub(super) fn is_reserved(sym: &str) -> bool {
    RESERVED.contains(&sym)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Num(u64),
    Sym(String),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, LogicError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' => {
                out.push((i, Tok::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::Close));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let lit = &text[start..i];
                if lit.len() > 1 && lit.starts_with('0') {
                    return Err(LogicError::Syntax {
                        pos: start,
                        message: format!("numeral `{lit}` has a leading zero"),
                    });
                }
                let v = lit.parse::<u64>().map_err(|_| LogicError::Syntax {
                    pos: start,
                    message: format!("numeral `{lit}` out of range"),
                })?;
                out.push((start, Tok::Num(v)));
            }
            _ => {
                let start = i;
                while i < bytes.len() && !matches!(bytes[i], b' ' | b'\t' | b'\n' | b'\r' | b'(' | b')' | b';') {
                    i += 1;
                }
                let sym = &text[start..i];
                if sym.bytes().any(|b| b == b'|' || b == b'"' || b == b':' || !b.is_ascii_graphic()) {
                    return Err(LogicError::Syntax {
                        pos: start,
                        message: format!("unsupported token `{sym}`"),
                    });
                }
                out.push((start, Tok::Sym(sym.to_string())));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    decls: &'a Decls,
}

impl Parser<'_> {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.0)
    }

    fn next(&mut self) -> Result<(usize, Tok), LogicError> {
        let t = self.toks.get(self.at).cloned().ok_or(LogicError::Syntax {
            pos: self.end,
            message: "unexpected end of input".into(),
        })?;
        self.at += 1;
        Ok(t)
    }

    fn term(&mut self) -> Result<Term, LogicError> {
        let (pos, tok) = self.next()?;
        match tok {
            Tok::Num(v) => i64::try_from(v).map(Term::int).map_err(|_| LogicError::Syntax {
                pos,
                message: format!("numeral `{v}` out of range"),
            }),
            Tok::Close => Err(LogicError::Syntax {
                pos,
                message: "unexpected `)`".into(),
            }),
            Tok::Sym(s) => self.atom(pos, &s),
            Tok::Open => {
                let (hpos, head) = self.next()?;
                let sym = match head {
                    Tok::Sym(s) => s,
                    _ => {
                        return Err(LogicError::Syntax {
                            pos: hpos,
                            message: "expected an operator after `(`".into(),
                        })
                    }
                };
                let op = operator(&sym).ok_or_else(|| LogicError::Syntax {
                    pos: hpos,
                    message: format!("unknown operator `{sym}`"),
                })?;
                // `(- n)` denotes a negative literal, including i64::MIN.
                if op == Op::Sub {
                    if let (Some((_, Tok::Num(n))), Some((_, Tok::Close))) =
                        (self.toks.get(self.at), self.toks.get(self.at + 1))
                    {
                        let n = *n;
                        if n == i64::MIN.unsigned_abs() {
                            self.at += 2;
                            return Ok(Term::int(i64::MIN));
                        }
                    }
                }
                let mut args = Vec::new();
                loop {
                    match self.toks.get(self.at) {
                        Some((_, Tok::Close)) => {
                            self.at += 1;
                            break;
                        }
                        Some(_) => args.push(self.term()?),
                        None => {
                            return Err(LogicError::Syntax {
                                pos: self.end,
                                message: "unbalanced parentheses".into(),
                            })
                        }
                    }
                }
                let op = if op == Op::Sub && args.len() == 1 { Op::Neg } else { op };
                if op == Op::Neg {
                    if let Some(v) = args[0].as_int().and_then(i64::checked_neg) {
                        return Ok(Term::int(v));
                    }
                }
                Term::app(op, args).map_err(|e| match e {
                    LogicError::Sort { message, .. } => LogicError::Sort { symbol: sym, message },
                    other => other,
                })
            }
        }
    }

    fn atom(&self, pos: usize, s: &str) -> Result<Term, LogicError> {
        match s {
            "true" => Ok(Term::tt()),
            "false" => Ok(Term::ff()),
            _ if operator(s).is_some() || is_reserved(s) => Err(LogicError::Syntax {
                pos,
                message: format!("operator `{s}` used as a constant"),
            }),
            _ => match self.decls.get(s) {
                Some(sort) => Ok(Term::var(s, *sort)),
                None => Err(LogicError::Undeclared {
                    name: s.to_string(),
                    pos,
                }),
            },
        }
    }
}

/// Parses one term of either sort.
pub fn parse_term(text: &str, decls: &Decls) -> Result<Term, LogicError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        end: text.len(),
        decls,
    };
    let t = p.term()?;
    if p.at < p.toks.len() {
        return Err(LogicError::Syntax {
            pos: p.pos(),
            message: "trailing input after term".into(),
        });
    }
    Ok(t)
}

/// Parses a Bool-sorted term.
pub fn parse_formula(text: &str, decls: &Decls) -> Result<Term, LogicError> {
    let t = parse_term(text, decls)?;
    if t.sort() != Sort::Bool {
        return Err(LogicError::Sort {
            symbol: text.trim().chars().take(40).collect(),
            message: "expected a Bool term".into(),
        });
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decls() -> Decls {
        [("x", Sort::Int), ("y", Sort::Int), ("b", Sort::Bool)]
            .into_iter()
            .map(|(n, s)| (n.to_string(), s))
            .collect()
    }

    #[test]
    fn parses_basic_terms() {
        let d = decls();
        let f = parse_formula("(> x 0)", &d).unwrap();
        assert_eq!(f, Term::mk(Op::Gt, vec![Term::var("x", Sort::Int), Term::int(0)]));
        let g = parse_formula("(and (<= y x) (> x 1))", &d).unwrap();
        assert_eq!(g.to_string(), "(and (<= y x) (> x 1))");
        assert_eq!(parse_term("(- 5)", &d).unwrap(), Term::int(-5));
        assert_eq!(parse_term("(- 9223372036854775808)", &d).unwrap(), Term::int(i64::MIN));
        assert_eq!(Term::int(i64::MIN).to_string(), "(- 9223372036854775808)");
    }

    #[test]
    fn reports_sort_errors_by_symbol() {
        match parse_formula("(> x true)", &decls()) {
            Err(LogicError::Sort { symbol, .. }) => assert_eq!(symbol, ">"),
            other => panic!("expected sort error, got {other:?}"),
        }
        assert!(matches!(parse_formula("(+ x 1)", &decls()), Err(LogicError::Sort { .. })));
    }

    #[test]
    fn reports_positions() {
        match parse_formula("(> x 0", &decls()) {
            Err(LogicError::Syntax { pos, .. }) => assert_eq!(pos, 6),
            other => panic!("{other:?}"),
        }
        match parse_formula("(> z 0)", &decls()) {
            Err(LogicError::Undeclared { name, pos }) => {
                assert_eq!(name, "z");
                assert_eq!(pos, 3);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_formula("(> x 0) y", &decls()), Err(LogicError::Syntax { pos: 8, .. })));
        assert!(matches!(parse_formula("(foo x)", &decls()), Err(LogicError::Syntax { pos: 1, .. })));
        assert!(parse_formula("(> x 007)", &decls()).is_err());
    }
}
