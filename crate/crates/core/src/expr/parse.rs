//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := ('-' | '+') unary | power
//! power    := atom ('^' exponent)?
//! atom     := number | 'x1' | 'x2' | 'x3' | '(' expr ')' | func '(' expr ')'
//! func     := 'sin' | 'cos' | 'sqrt' | 'sign' | 'abs'
//! exponent := integer | '(' '-'? integer ('/' integer)? ')'
//! ```
//!
//! Exponents must be integer multiples of one half. Whitespace is ignored.

use super::{Exponent, Expr, ExprError, Var};

pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { src: text, pos: 0 };
    p.skip_ws();
    if p.at_end() {
        return Err(p.err("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.err(&format!("unexpected `{}`", p.peek_char().unwrap())));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek_char() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                terms.push(self.term()?.neg());
            } else {
                break;
            }
        }
        Ok(Expr::add(terms))
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                let rhs = self.unary()?;
                acc = Expr::product(&acc, &rhs);
            } else if self.eat('/') {
                let rhs = self.unary()?;
                acc = Expr::div(&acc, &rhs);
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat('^') {
            let k = self.exponent()?;
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Exponent, ExprError> {
        self.skip_ws();
        let start = self.pos;
        if self.eat('(') {
            let neg = self.eat('-');
            let num = self.integer()?;
            let den = if self.eat('/') { self.integer()? } else { 1 };
            self.expect(')')?;
            let text = self.src[start..self.pos].to_string();
            let disallowed = || ExprError::DisallowedExponent { pos: start, text: text.clone() };
            if den == 0 || (2 * num) % den != 0 {
                return Err(disallowed());
            }
            let halves = i32::try_from(2 * num / den).map_err(|_| disallowed())?;
            return Ok(Exponent::halves(if neg { -halves } else { halves }));
        }
        if self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
            let n = self.integer()?;
            if self.peek_char().is_some_and(|c| c == '.' || c == 'e' || c == 'E') {
                let rest: String = self.src[self.pos..]
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '.')
                    .collect();
                return Err(ExprError::DisallowedExponent {
                    pos: start,
                    text: format!("{n}{rest}"),
                });
            }
            let n = i32::try_from(n).map_err(|_| self.err("exponent too large"))?;
            return Ok(Exponent::int(n));
        }
        Err(self.err("expected an exponent"))
    }

    fn integer(&mut self) -> Result<i64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer"));
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| self.err("integer out of range"))
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let Some(c) = self.peek_char() else {
            return Err(self.err("unexpected end of input"));
        };
        if c == '(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(')')?;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while self
                .peek_char()
                .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                self.pos += 1;
            }
            let name = &self.src[start..self.pos];
            let is_call = {
                let save = self.pos;
                let call = self.eat('(');
                self.pos = save;
                call
            };
            if is_call {
                let f: fn(&Expr) -> Expr = match name {
                    "sin" => Expr::sin,
                    "cos" => Expr::cos,
                    "sqrt" => Expr::sqrt,
                    "sign" => Expr::sign,
                    "abs" => Expr::abs,
                    _ => {
                        return Err(ExprError::DisallowedFunction {
                            pos: start,
                            name: name.to_string(),
                        })
                    }
                };
                self.expect('(')?;
                let arg = self.expr()?;
                self.expect(')')?;
                return Ok(f(&arg));
            }
            let var = name
                .strip_prefix('x')
                .and_then(|d| d.parse::<usize>().ok())
                .and_then(Var::numbered);
            return match var {
                Some(v) => Ok(Expr::Var(v)),
                None => Err(ExprError::UnknownIdentifier {
                    pos: start,
                    name: name.to_string(),
                }),
            };
        }
        Err(self.err(&format!("unexpected `{c}`")))
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        let text = &self.src[start..i];
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            pos: start,
            msg: format!("malformed number `{text}`"),
        })?;
        Ok(Expr::constant(value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_mapping() {
        let e = parse("x1^2 + x2").unwrap();
        assert_eq!(e, Expr::add(vec![Expr::x(1).powi(2), Expr::x(2)]));
        assert_eq!(parse("sin(x2)").unwrap(), Expr::Sin(Box::new(Expr::x(2))));
        assert_eq!(parse("  x1 *  x2 ").unwrap(), parse("x2*x1").unwrap());
    }

    #[test]
    fn half_exponents() {
        assert_eq!(parse("x1^(1/2)").unwrap(), parse("sqrt(x1)").unwrap());
        assert_eq!(parse("x1^(3/2)").unwrap(), Expr::x(1).pow(Exponent::halves(3)));
        assert_eq!(parse("x1^(-1)").unwrap(), parse("1/x1").unwrap());
    }

    #[test]
    fn rejects_third_root() {
        assert!(matches!(parse("x1^(1/3)"), Err(ExprError::DisallowedExponent { .. })));
        assert!(matches!(parse("x1^0.5"), Err(ExprError::DisallowedExponent { .. })));
    }

    #[test]
    fn identifier_errors() {
        assert!(matches!(parse("x4 + 1"), Err(ExprError::UnknownIdentifier { pos: 0, .. })));
        assert!(matches!(parse("y"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("1 + exp(x1)"), Err(ExprError::DisallowedFunction { pos: 4, .. })));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse("x1 + * x2") {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("(x1 + x2").is_err());
        assert!(parse("").is_err());
        assert!(parse("x1 x2").is_err());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("2.5e-1").unwrap(), Expr::constant(0.25));
        assert_eq!(parse(".5*x1").unwrap(), Expr::x(1).scale(0.5));
        assert_eq!(parse("-3").unwrap(), Expr::constant(-3.0));
    }
}
