//! Printing in the input grammar, so that `parse(to_string(e)) == e`.

use super::canon::split_coeff;
use super::{Exponent, Expr};

pub fn to_string(e: &Expr) -> String {
    let mut out = String::new();
    write_sum(e, &mut out);
    out
}

fn write_sum(e: &Expr, out: &mut String) {
    match e {
        Expr::Add(ts) => {
            for (i, t) in ts.iter().enumerate() {
                let (c, mono) = split_coeff(t);
                if i == 0 {
                    write_term(c, mono.as_ref(), out);
                } else if c < 0.0 {
                    out.push_str(" - ");
                    write_term(-c, mono.as_ref(), out);
                } else {
                    out.push_str(" + ");
                    write_term(c, mono.as_ref(), out);
                }
            }
        }
        other => {
            let (c, mono) = split_coeff(other);
            write_term(c, mono.as_ref(), out);
        }
    }
}

fn write_term(c: f64, mono: Option<&Expr>, out: &mut String) {
    let Some(mono) = mono else {
        out.push_str(&number(c));
        return;
    };
    let factors: Vec<&Expr> = match mono {
        Expr::Mul(xs) => xs.iter().collect(),
        other => vec![other],
    };
    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<String> = Vec::new();
    for f in factors {
        match f {
            Expr::Pow(b, k) if k.is_negative() => den.push(power(b, -*k)),
            other => num.push(factor(other)),
        }
    }
    if num.is_empty() {
        out.push_str(&number(c));
    } else {
        if c == -1.0 {
            out.push('-');
        } else if c != 1.0 {
            out.push_str(&number(c));
            out.push('*');
        }
        out.push_str(&num.join("*"));
    }
    match den.len() {
        0 => {}
        1 => {
            out.push('/');
            out.push_str(&den[0]);
        }
        _ => {
            out.push_str("/(");
            out.push_str(&den.join("*"));
            out.push(')');
        }
    }
}

/// A non-sum, non-product node as a multiplicative factor.
fn factor(e: &Expr) -> String {
    match e {
        Expr::Pow(b, k) => power(b, *k),
        Expr::Add(_) | Expr::Mul(_) => format!("({})", to_string(e)),
        Expr::Const(c) if *c < 0.0 => format!("({})", number(*c)),
        other => atom(other),
    }
}

fn atom(e: &Expr) -> String {
    match e {
        Expr::Const(c) => number(*c),
        Expr::Var(v) => v.to_string(),
        Expr::Sin(a) => format!("sin({})", to_string(a)),
        Expr::Cos(a) => format!("cos({})", to_string(a)),
        Expr::Sign(a) => format!("sign({})", to_string(a)),
        Expr::Abs(a) => format!("abs({})", to_string(a)),
        other => format!("({})", to_string(other)),
    }
}

fn power(base: &Expr, k: Exponent) -> String {
    if k == Exponent::ONE {
        return factor(base);
    }
    if k == Exponent::HALF {
        return format!("sqrt({})", to_string(base));
    }
    let b = match base {
        Expr::Var(_) | Expr::Sin(_) | Expr::Cos(_) | Expr::Sign(_) | Expr::Abs(_) => atom(base),
        Expr::Const(c) if *c >= 0.0 => number(*c),
        _ => format!("({})", to_string(base)),
    };
    match k.as_int() {
        Some(n) if n >= 0 => format!("{b}^{n}"),
        Some(n) => format!("{b}^({n})"),
        None => format!("{b}^({}/2)", k.half_units()),
    }
}

fn number(c: f64) -> String {
    let s = format!("{c}");
    if s.len() > 24 {
        format!("{c:e}")
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    fn round(s: &str) -> String {
        parse(s).unwrap().to_string()
    }

    #[test]
    fn readable_output() {
        assert_eq!(round("x1^2 + x2"), "x2 + x1^2");
        assert_eq!(round("-x2"), "-x2");
        assert_eq!(round("x1 - 2*x2"), "x1 - 2*x2");
        assert_eq!(round("sqrt(1 + x2^2)"), "sqrt(1 + x2^2)");
        assert_eq!(round("1/x1"), "1/x1");
        assert_eq!(round("x2^2/sqrt(1 + x2^2)"), "x2^2/sqrt(1 + x2^2)");
        assert_eq!(round("x1^(3/2)"), "x1^(3/2)");
        assert_eq!(round("-1"), "-1");
        assert_eq!(round("2 - 2*cos(x2)"), "2 - 2*cos(x2)");
    }

    #[test]
    fn print_parse_round_trip() {
        for s in [
            "x1^2 + x2",
            "-(2 + sqrt(3))*x2*sqrt(1 + x2^2)",
            "x1*x2/(x3*sin(x1))",
            "(x1 + x2)^(-2)",
            "1e-30*x1 + 1e30*x2",
            "sign(x1)*abs(x2) - 0.1",
            "2^(3/2)*x1",
        ] {
            let e = parse(s).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert_eq!(again, e, "{s} printed as {e}");
        }
    }
}
