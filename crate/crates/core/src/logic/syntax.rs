//! Concrete syntax for formulas.
//!
//! ```text
//! F ::= NAME(v, ...) | v = w | Not F | And{F, ...} | Exists v . F
//!     | Or{F, ...} | Forall v . F | ( F )
//! ```
//! `Or` and `Forall` are sugar for `Not And{Not ...}` and `Not Exists v . Not F`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::logic::formula::{Formula, Kind, Var};
use crate::logic::signature::Signature;

/// Parse against a signature; unknown symbols and arity mismatches are errors.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula> {
    let mut p = Parser::new(text, Some(sig));
    let f = p.formula()?;
    p.finish()?;
    Ok(f)
}

/// Parse without a signature, returning the formula and the inferred symbols.
pub fn parse_formula_infer(text: &str) -> Result<(Formula, Signature)> {
    let mut p = Parser::new(text, None);
    let f = p.formula()?;
    p.finish()?;
    Ok((f, Signature { relations: p.seen }))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Equals,
    End,
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    sig: Option<&'a Signature>,
    seen: BTreeMap<String, usize>,
}

fn var_of(name: &str) -> Option<Var> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    digits.parse::<u32>().ok().map(Var)
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, sig: Option<&'a Signature>) -> Self {
        Parser {
            text,
            pos: 0,
            sig,
            seen: BTreeMap::new(),
        }
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> Error {
        let before = &self.text[..pos.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map(|s| s.chars().count()).unwrap_or(0) + 1;
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Returns the next token and its start offset without consuming it.
    fn peek(&mut self) -> Result<(Tok, usize, usize)> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.text[start..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start, start));
        };
        let single = |t| Ok((t, start, start + 1));
        match c {
            '(' => single(Tok::LParen),
            ')' => single(Tok::RParen),
            '{' => single(Tok::LBrace),
            '}' => single(Tok::RBrace),
            ',' => single(Tok::Comma),
            '.' => single(Tok::Dot),
            '=' => single(Tok::Equals),
            c if c.is_ascii_alphabetic() || c == '_' => {
                let len = rest
                    .char_indices()
                    .find(|(_, ch)| !(ch.is_ascii_alphanumeric() || *ch == '_'))
                    .map(|(i, _)| i)
                    .unwrap_or(rest.len());
                Ok((Tok::Ident(rest[..len].to_string()), start, start + len))
            }
            other => Err(self.error_at(start, format!("unexpected character `{other}`"))),
        }
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        let (t, s, e) = self.peek()?;
        self.pos = e;
        Ok((t, s))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let (t, s) = self.next()?;
        if t == want {
            Ok(())
        } else {
            Err(self.error_at(s, format!("expected {what}, found {}", describe(&t))))
        }
    }

    fn var(&mut self) -> Result<Var> {
        let (t, s) = self.next()?;
        match &t {
            Tok::Ident(name) => var_of(name)
                .ok_or_else(|| self.error_at(s, format!("expected variable, found `{name}`"))),
            _ => Err(self.error_at(s, format!("expected variable, found {}", describe(&t)))),
        }
    }

    fn finish(&mut self) -> Result<()> {
        let (t, s, _) = self.peek()?;
        if t == Tok::End {
            Ok(())
        } else {
            Err(self.error_at(s, format!("trailing input: {}", describe(&t))))
        }
    }

    fn list(&mut self) -> Result<Vec<Formula>> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        if self.peek()?.0 == Tok::RBrace {
            self.next()?;
            return Ok(out);
        }
        loop {
            out.push(self.formula()?);
            let (t, s) = self.next()?;
            match t {
                Tok::Comma => continue,
                Tok::RBrace => break,
                other => {
                    return Err(self.error_at(s, format!("expected `,` or `}}`, found {}", describe(&other))))
                }
            }
        }
        Ok(out)
    }

    fn quantifier_body(&mut self) -> Result<(Var, Formula)> {
        let v = self.var()?;
        if self.peek()?.0 == Tok::Dot {
            self.next()?;
        }
        Ok((v, self.formula()?))
    }

    fn formula(&mut self) -> Result<Formula> {
        let (t, s) = self.next()?;
        match t {
            Tok::LParen => {
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(name) => match name.as_str() {
                "Not" => Ok(Formula::not(self.formula()?)),
                "And" => Ok(Formula::and(self.list()?)),
                "Or" => Ok(Formula::or(self.list()?)),
                "Exists" => {
                    let (v, f) = self.quantifier_body()?;
                    Ok(Formula::exists(v, f))
                }
                "Forall" => {
                    let (v, f) = self.quantifier_body()?;
                    Ok(Formula::forall(v, f))
                }
                _ => {
                    let (next, _, _) = self.peek()?;
                    match (var_of(&name), next) {
                        (Some(a), Tok::Equals) => {
                            self.next()?;
                            let b = self.var()?;
                            Ok(Formula::eq(a, b))
                        }
                        (_, Tok::LParen) => {
                            self.next()?;
                            let mut args = Vec::new();
                            if self.peek()?.0 == Tok::RParen {
                                self.next()?;
                            } else {
                                loop {
                                    args.push(self.var()?);
                                    let (t, s2) = self.next()?;
                                    match t {
                                        Tok::Comma => continue,
                                        Tok::RParen => break,
                                        other => {
                                            return Err(self.error_at(
                                                s2,
                                                format!("expected `,` or `)`, found {}", describe(&other)),
                                            ))
                                        }
                                    }
                                }
                            }
                            self.symbol(&name, args.len(), s)?;
                            Ok(Formula::atom(name.as_str(), args))
                        }
                        (Some(_), _) => Err(self.error_at(s, "expected `=` after variable")),
                        (None, _) => {
                            // Bare propositional symbol.
                            self.symbol(&name, 0, s)?;
                            Ok(Formula::atom(name.as_str(), Vec::new()))
                        }
                    }
                }
            },
            other => Err(self.error_at(s, format!("expected formula, found {}", describe(&other)))),
        }
    }

    fn symbol(&mut self, name: &str, arity: usize, at: usize) -> Result<()> {
        if let Some(sig) = self.sig {
            return sig.check(name, arity);
        }
        match self.seen.get(name) {
            Some(&a) if a != arity => Err(self.error_at(
                at,
                format!("symbol `{name}` used with arities {a} and {arity}"),
            )),
            _ => {
                self.seen.insert(name.to_string(), arity);
                Ok(())
            }
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Dot => "`.`".into(),
        Tok::Equals => "`=`".into(),
        Tok::End => "end of input".into(),
    }
}

/// Print in the core grammar (no sugar). Output size equals the tree size,
/// which can be exponential in the shared size; see [`try_print`].
pub fn print(f: &Formula) -> String {
    let mut s = String::new();
    write_core(&mut s, f);
    s
}

/// Print unless the tree has more than `max_nodes` nodes.
pub fn try_print(f: &Formula, max_nodes: u64) -> Result<String> {
    if f.size() > max_nodes {
        return Err(Error::ResourceLimit(format!(
            "formula tree has {} nodes, print limit is {max_nodes}",
            f.size()
        )));
    }
    Ok(print(f))
}

fn write_core(out: &mut String, f: &Formula) {
    match f.kind() {
        Kind::Atom { rel, args } => {
            out.push_str(rel);
            out.push('(');
            for (i, v) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push(')');
        }
        Kind::Eq(a, b) => {
            let _ = write!(out, "{a} = {b}");
        }
        Kind::Not(c) => {
            out.push_str("Not ");
            write_core(out, c);
        }
        Kind::And(cs) => {
            out.push_str("And{");
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_core(out, c);
            }
            out.push('}');
        }
        Kind::Exists(v, c) => {
            let _ = write!(out, "Exists {v} . ");
            write_core(out, c);
        }
    }
}

/// Print using `Or` and `Forall` where the shape allows; parses back to the
/// same formula.
pub fn print_sugared(f: &Formula) -> String {
    let mut s = String::new();
    write_sugared(&mut s, f);
    s
}

fn write_sugared(out: &mut String, f: &Formula) {
    match f.kind() {
        Kind::Not(c) => match c.kind() {
            Kind::And(cs) if !cs.is_empty() && cs.iter().all(|g| matches!(g.kind(), Kind::Not(_))) => {
                // Children of the printed Or must be listed in an order that
                // re-parses to the same set; the set coding makes any order fine.
                out.push_str("Or{");
                for (i, g) in cs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    if let Kind::Not(inner) = g.kind() {
                        write_sugared(out, inner);
                    }
                }
                out.push('}');
            }
            Kind::Exists(v, body) => {
                if let Kind::Not(inner) = body.kind() {
                    let _ = write!(out, "Forall {v} . ");
                    write_sugared(out, inner);
                } else {
                    out.push_str("Not ");
                    write_sugared(out, c);
                }
            }
            _ => {
                out.push_str("Not ");
                write_sugared(out, c);
            }
        },
        Kind::And(cs) => {
            out.push_str("And{");
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_sugared(out, c);
            }
            out.push('}');
        }
        Kind::Exists(v, c) => {
            let _ = write!(out, "Exists {v} . ");
            write_sugared(out, c);
        }
        _ => write_core(out, f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> Signature {
        Signature::new([("P", 1), ("R", 2), ("Q", 0)])
    }

    #[test]
    fn parses_atoms_and_dedups_conjunctions() {
        let f = parse_formula("P(x0)", &sig()).unwrap();
        assert_eq!(f, Formula::atom("P", vec![Var(0)]));
        let g = parse_formula("And{P(x0), P(x0)}", &sig()).unwrap();
        match g.kind() {
            Kind::And(cs) => assert_eq!(cs.len(), 1),
            _ => panic!(),
        }
    }

    #[test]
    fn parses_quantifier_over_conjunction() {
        let f = parse_formula("Exists x1 . And{R(x0,x1), Not R(x1,x0)}", &sig()).unwrap();
        match f.kind() {
            Kind::Exists(v, body) => {
                assert_eq!(*v, Var(1));
                assert!(matches!(body.kind(), Kind::And(cs) if cs.len() == 2));
            }
            _ => panic!(),
        }
        // The dot is optional.
        assert_eq!(f, parse_formula("Exists x1 And{Not R(x1,x0), R(x0,x1)}", &sig()).unwrap());
    }

    #[test]
    fn errors_carry_positions() {
        match parse_formula("And{P(x0),\n  S(x1)}", &sig()) {
            Err(Error::UnknownSymbol(s)) => assert_eq!(s, "S"),
            other => panic!("{other:?}"),
        }
        match parse_formula("R(x0)", &sig()) {
            Err(Error::ArityMismatch { expected: 2, found: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_formula("And{P(x0),\n  P(x1) P(x2)}", &sig()) {
            Err(Error::Parse { line: 2, column: 9, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_formula("Exists y . P(y)", &sig()), Err(Error::Parse { .. })));
    }

    #[test]
    fn zero_ary_and_sugar() {
        let f = parse_formula("Q", &sig()).unwrap();
        assert_eq!(print(&f), "Q()");
        assert_eq!(parse_formula("Q()", &sig()).unwrap(), f);
        let g = parse_formula("Forall x0 . Or{P(x0), x0 = x0}", &sig()).unwrap();
        let s = print_sugared(&g);
        assert!(s.starts_with("Forall x0 . Or{"));
        assert_eq!(parse_formula(&s, &sig()).unwrap(), g);
        assert_eq!(parse_formula(&print(&g), &sig()).unwrap(), g);
    }

    #[test]
    fn infer_rejects_inconsistent_arity() {
        assert!(parse_formula_infer("And{R(x0), R(x0,x1)}").is_err());
        let (_, s) = parse_formula_infer("And{R(x0,x1), Q}").unwrap();
        assert_eq!(s, Signature::new([("Q", 0), ("R", 2)]));
    }

    #[test]
    fn print_limit() {
        let f = parse_formula("And{P(x0), P(x1)}", &sig()).unwrap();
        assert!(try_print(&f, 2).is_err());
        assert!(try_print(&f, 3).is_ok());
    }
}
