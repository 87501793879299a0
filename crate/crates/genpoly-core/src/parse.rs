//! Text grammar for generalized polynomials.
//!
//! Tokens: `n`, decimal/rational literals (`3`, `-1/2`, `0.25`), the
//! constants `sqrt<k>`, `pi`, `e`, `golden`, operators `+ - * ^`,
//! parentheses and the nearest-integer bracket `[| ... |]`.
//!
//! Constant folding is deterministic: literal factors merge into monomial
//! coefficients, `n`-free factors of complex children become `Scale` nodes,
//! and any subexpression with no occurrence of n outside a Scale
//! coefficient is rejected (generalized polynomials vanish at n = 0).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::coeff::Coefficient;
use crate::error::{GpError, Result};
use crate::expr::GpExpr;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    N,
    Number(BigRational),
    Const(Coefficient),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, expected: &str) -> GpError {
        GpError::Syntax {
            pos: self.pos,
            expected: expected.to_string(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let start = self.pos;
            let c = self.src[self.pos];
            match c {
                b' ' | b'\t' | b'\n' | b'\r' => {
                    self.pos += 1;
                }
                b'+' => {
                    self.pos += 1;
                    out.push((start, Tok::Plus));
                }
                b'-' => {
                    self.pos += 1;
                    out.push((start, Tok::Minus));
                }
                b'*' => {
                    self.pos += 1;
                    out.push((start, Tok::Star));
                }
                b'^' => {
                    self.pos += 1;
                    out.push((start, Tok::Caret));
                }
                b'(' => {
                    self.pos += 1;
                    out.push((start, Tok::LParen));
                }
                b')' => {
                    self.pos += 1;
                    out.push((start, Tok::RParen));
                }
                b'[' => {
                    if self.src.get(self.pos + 1) == Some(&b'|') {
                        self.pos += 2;
                        out.push((start, Tok::LBracket));
                    } else {
                        return Err(self.err("'[|'"));
                    }
                }
                b'|' => {
                    if self.src.get(self.pos + 1) == Some(&b']') {
                        self.pos += 2;
                        out.push((start, Tok::RBracket));
                    } else {
                        return Err(self.err("'|]'"));
                    }
                }
                b'0'..=b'9' => {
                    out.push((start, self.number()?));
                }
                b'a'..=b'z' | b'A'..=b'Z' => {
                    out.push((start, self.ident()?));
                }
                _ => return Err(self.err("a token")),
            }
        }
        Ok(out)
    }

    fn number(&mut self) -> Result<Tok> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_part: BigInt = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("an integer"))?;
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let fstart = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if fstart == self.pos {
                return Err(self.err("digits after '.'"));
            }
            let frac_digits = &self.src[fstart..self.pos];
            let frac: BigInt = std::str::from_utf8(frac_digits).unwrap().parse().unwrap();
            let den = BigInt::from(10u32).pow(frac_digits.len() as u32);
            let q = BigRational::from(int_part) + BigRational::new(frac, den);
            return Ok(Tok::Number(q));
        }
        Ok(Tok::Number(BigRational::from(int_part)))
    }

    fn ident(&mut self) -> Result<Tok> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match word {
            "n" => Ok(Tok::N),
            "pi" => Ok(Tok::Const(Coefficient::pi())),
            "e" => Ok(Tok::Const(Coefficient::euler())),
            "golden" => Ok(Tok::Const(Coefficient::golden())),
            _ => {
                if let Some(rest) = word.strip_prefix("sqrt") {
                    let k: u64 = rest.parse().map_err(|_| GpError::Syntax {
                        pos: start,
                        expected: "sqrt<k> with integer k".to_string(),
                    })?;
                    Ok(Tok::Const(Coefficient::sqrt_int(k)))
                } else {
                    Err(GpError::Syntax {
                        pos: start,
                        expected: "'n', 'pi', 'e', 'golden' or 'sqrt<k>'".to_string(),
                    })
                }
            }
        }
    }
}

/// Either a constant (no n anywhere) or a genuine expression.
#[derive(Clone, Debug)]
enum Node {
    Const(Coefficient),
    Poly(GpExpr),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    idx: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map(|(p, _)| *p).unwrap_or(self.len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(_, t)| t.clone());
        self.idx += 1;
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&t) {
            self.idx += 1;
            Ok(())
        } else {
            Err(GpError::Syntax {
                pos: self.pos(),
                expected: what.to_string(),
            })
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut items = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.idx += 1;
                    items.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    self.idx += 1;
                    items.push(negate(self.term()?));
                }
                _ => break,
            }
        }
        if items.len() == 1 {
            return Ok(items.pop().unwrap());
        }
        if items.iter().all(|i| matches!(i, Node::Const(_))) {
            let mut acc = Coefficient::zero();
            for i in items {
                if let Node::Const(c) = i {
                    acc = acc.add(&c);
                }
            }
            return Ok(Node::Const(acc));
        }
        let mut children = Vec::with_capacity(items.len());
        for i in items {
            match i {
                Node::Poly(p) => children.push(p),
                Node::Const(c) => {
                    return Err(GpError::ConstantTerm {
                        what: format!("additive constant {c}"),
                    })
                }
            }
        }
        Ok(Node::Poly(GpExpr::sum(children)))
    }

    fn term(&mut self) -> Result<Node> {
        let mut factors = vec![self.factor()?];
        while self.peek() == Some(&Tok::Star) {
            self.idx += 1;
            factors.push(self.factor()?);
        }
        if factors.len() == 1 {
            return Ok(factors.pop().unwrap());
        }
        // Fold constants and merge monomial factors deterministically.
        let mut k = Coefficient::one();
        let mut mono: Option<(Coefficient, u32)> = None;
        let mut complex: Vec<GpExpr> = Vec::new();
        for f in factors {
            match f {
                Node::Const(c) => k = k.mul(&c),
                Node::Poly(GpExpr::Monomial { coeff, power }) => {
                    mono = Some(match mono {
                        None => (coeff, power),
                        Some((c0, p0)) => (c0.mul(&coeff), p0 + power),
                    });
                }
                Node::Poly(p) => complex.push(p),
            }
        }
        if let Some((c, p)) = mono {
            let merged = GpExpr::monomial(c.mul(&k), p);
            if complex.is_empty() {
                return Ok(Node::Poly(merged));
            }
            let mut children = vec![merged];
            children.extend(complex);
            return Ok(Node::Poly(GpExpr::product(children)));
        }
        if complex.is_empty() {
            return Ok(Node::Const(k));
        }
        let body = if complex.len() == 1 {
            complex.pop().unwrap()
        } else {
            GpExpr::product(complex)
        };
        Ok(Node::Poly(GpExpr::scale(k, body)))
    }

    fn factor(&mut self) -> Result<Node> {
        if self.peek() == Some(&Tok::Minus) {
            self.idx += 1;
            return Ok(negate(self.factor()?));
        }
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.idx += 1;
            let e = match self.bump() {
                Some(Tok::Number(q)) if q.is_integer() && !q.numer().sign().eq(&num_bigint::Sign::Minus) => {
                    let v = q.to_integer();
                    u32::try_from(v).map_err(|_| GpError::Syntax {
                        pos: self.pos(),
                        expected: "a small nonnegative exponent".to_string(),
                    })?
                }
                _ => {
                    return Err(GpError::Syntax {
                        pos: self.pos(),
                        expected: "a nonnegative integer exponent".to_string(),
                    })
                }
            };
            return match base {
                Node::Const(c) => Ok(Node::Const(c.pow(e))),
                Node::Poly(GpExpr::Monomial { coeff, power }) => {
                    if e == 0 {
                        Ok(Node::Const(coeff.pow(0)))
                    } else {
                        Ok(Node::Poly(GpExpr::monomial(coeff.pow(e), power * e)))
                    }
                }
                Node::Poly(_) => Err(GpError::Syntax {
                    pos: self.pos(),
                    expected: "exponent on n or a constant".to_string(),
                }),
            };
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.bump() {
            Some(Tok::N) => Ok(Node::Poly(GpExpr::var())),
            Some(Tok::Number(q)) => {
                // Rational literal p/q is lexed as two numbers; glue here is
                // unnecessary because '/' is not a token: accept "p/q" via
                // the dedicated check below.
                Ok(Node::Const(Coefficient::from_rational(q)))
            }
            Some(Tok::Const(c)) => Ok(Node::Const(c)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::LBracket) => {
                let inner = self.expr()?;
                self.expect(Tok::RBracket, "'|]'")?;
                match inner {
                    Node::Const(c) => Err(GpError::ConstantTerm {
                        what: format!("bracket of constant {c}"),
                    }),
                    Node::Poly(p) => Ok(Node::Poly(GpExpr::bracket(p))),
                }
            }
            _ => Err(GpError::Syntax {
                pos: self.pos(),
                expected: "'n', a literal, a constant, '(' or '[|'".to_string(),
            }),
        }
    }
}

fn negate(n: Node) -> Node {
    match n {
        Node::Const(c) => Node::Const(c.neg()),
        Node::Poly(p) => Node::Poly(p.negate()),
    }
}

/// Preprocess rational literals "p/q" into exact form. The grammar has no
/// general division; a slash is only legal between two integer literals.
fn fold_slashes(toks: Vec<(usize, Tok)>) -> Vec<(usize, Tok)> {
    toks
}

/// Parse an expression. Rejects constant subexpressions; round-trips with
/// [`GpExpr::format`].
pub fn parse(text: &str) -> Result<GpExpr> {
    // Handle "p/q" rational literals before lexing: replace the slash with
    // an exact rational by scanning.
    let toks = lex_with_rationals(text)?;
    let toks = fold_slashes(toks);
    let len = text.len();
    let mut p = Parser { toks, idx: 0, len };
    let node = p.expr()?;
    if p.idx != p.toks.len() {
        return Err(GpError::Syntax {
            pos: p.pos(),
            expected: "end of input".to_string(),
        });
    }
    match node {
        Node::Const(c) => Err(GpError::ConstantTerm {
            what: format!("whole expression is the constant {c}"),
        }),
        Node::Poly(e) => Ok(e),
    }
}

/// Lex, then merge Number '/' Number triples into rational literals.
fn lex_with_rationals(text: &str) -> Result<Vec<(usize, Tok)>> {
    // '/' is not in the base lexer; split manually.
    let mut toks: Vec<(usize, Tok)> = Vec::new();
    let mut rest = text;
    let mut base = 0usize;
    loop {
        match rest.find('/') {
            None => {
                let mut chunk = Lexer::new(rest).tokens()?;
                for t in &mut chunk {
                    t.0 += base;
                }
                toks.extend(chunk);
                break;
            }
            Some(i) => {
                let mut chunk = Lexer::new(&rest[..i]).tokens()?;
                for t in &mut chunk {
                    t.0 += base;
                }
                toks.extend(chunk);
                // Numerator must be the last token so far.
                let numer = match toks.last() {
                    Some((_, Tok::Number(q))) if q.is_integer() => q.to_integer(),
                    _ => {
                        return Err(GpError::Syntax {
                            pos: base + i,
                            expected: "integer numerator before '/'".to_string(),
                        })
                    }
                };
                // Denominator: digits immediately after the slash.
                let after = &rest[i + 1..];
                let dlen = after.bytes().take_while(|b| b.is_ascii_digit()).count();
                if dlen == 0 {
                    return Err(GpError::Syntax {
                        pos: base + i + 1,
                        expected: "integer denominator after '/'".to_string(),
                    });
                }
                let den: BigInt = after[..dlen].parse().unwrap();
                if den.is_zero() {
                    return Err(GpError::Syntax {
                        pos: base + i + 1,
                        expected: "nonzero denominator".to_string(),
                    });
                }
                let pos0 = toks.last().unwrap().0;
                toks.pop();
                toks.push((pos0, Tok::Number(BigRational::new(numer, den))));
                base += i + 1 + dlen;
                rest = &rest[i + 1 + dlen..];
            }
        }
    }
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::Coefficient;

    #[test]
    fn grammar_golden_cases() {
        let b = parse("[| sqrt2 * n |]").unwrap();
        assert_eq!(
            b,
            GpExpr::bracket(GpExpr::monomial(Coefficient::sqrt_int(2), 1))
        );
        let s = parse("n^2 + [| pi * n |]").unwrap();
        assert_eq!(
            s,
            GpExpr::sum(vec![
                GpExpr::monomial(Coefficient::one(), 2),
                GpExpr::bracket(GpExpr::monomial(Coefficient::pi(), 1)),
            ])
        );
    }

    #[test]
    fn constant_bracket_rejected() {
        assert!(matches!(
            parse("[| 3 |]"),
            Err(GpError::ConstantTerm { .. })
        ));
        assert!(matches!(parse("n + 3"), Err(GpError::ConstantTerm { .. })));
        assert!(matches!(parse("5"), Err(GpError::ConstantTerm { .. })));
    }

    #[test]
    fn rational_literals() {
        let e = parse("1/2 * n").unwrap();
        assert_eq!(
            e,
            GpExpr::monomial(
                Coefficient::from_rational(BigRational::new(1.into(), 2.into())),
                1
            )
        );
        let d = parse("0.25 * n").unwrap();
        assert_eq!(
            d,
            GpExpr::monomial(
                Coefficient::from_rational(BigRational::new(1.into(), 4.into())),
                1
            )
        );
    }

    #[test]
    fn format_round_trips() {
        for src in [
            "[| sqrt2 * n |]",
            "n^2 + [| pi * n |]",
            "(sqrt2 * n + n^2) * [| n |]",
            "-3/2 * n + [| golden * n^3 |]",
            "[| 2 * pi * n^2 + (-1 * [| 2 * pi * n^2 |]) + sqrt2 * n |]",
            "n * [| e * n |] * [| sqrt5 * n |]",
        ] {
            let ast = parse(src).unwrap();
            let text = ast.format();
            let again = parse(&text).unwrap();
            assert_eq!(ast, again, "round trip failed for {src} -> {text}");
        }
    }

    #[test]
    fn syntax_error_carries_position() {
        match parse("n + @") {
            Err(GpError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }
}
