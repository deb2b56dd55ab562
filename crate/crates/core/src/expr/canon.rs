use std::cmp::Ordering;

use super::{cmp_expr, normalize_zero, pow_value, sign_value, Exponent, Expr};

/// Combined coefficients smaller than this fraction of the largest addend are
/// treated as exact cancellation.
const CANCEL_REL: f64 = 1e-12;
/// Largest positive integer power of a sum that is expanded.
const MAX_EXPAND_POW: i32 = 12;
/// Largest number of product terms produced by one distribution step.
const MAX_EXPAND_TERMS: usize = 4096;

pub(super) fn canonicalize(e: &Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::constant(*c),
        Expr::Var(v) => Expr::Var(*v),
        Expr::Add(xs) => add(xs.iter().map(canonicalize).collect()),
        Expr::Mul(xs) => mul(xs.iter().map(canonicalize).collect()),
        Expr::Pow(b, k) => pow(canonicalize(b), *k),
        Expr::Sin(a) => sin(canonicalize(a)),
        Expr::Cos(a) => cos(canonicalize(a)),
        Expr::Sign(a) => sign(canonicalize(a)),
        Expr::Abs(a) => abs(canonicalize(a)),
    }
}

/// Splits a canonical term into its constant coefficient and the remaining
/// monomial (`None` for a pure constant).
pub(super) fn split_coeff(term: &Expr) -> (f64, Option<Expr>) {
    match term {
        Expr::Const(c) => (*c, None),
        Expr::Mul(xs) => match xs.first() {
            Some(Expr::Const(c)) => {
                let rest = &xs[1..];
                let mono = if rest.len() == 1 {
                    rest[0].clone()
                } else {
                    Expr::Mul(rest.to_vec())
                };
                (*c, Some(mono))
            }
            _ => (1.0, Some(term.clone())),
        },
        other => (1.0, Some(other.clone())),
    }
}

pub(super) fn make_term(c: f64, mono: Option<Expr>) -> Expr {
    match mono {
        None => Expr::constant(c),
        Some(m) if c == 1.0 => m,
        Some(Expr::Mul(xs)) => {
            let mut v = Vec::with_capacity(xs.len() + 1);
            v.push(Expr::constant(c));
            v.extend(xs);
            Expr::Mul(v)
        }
        Some(m) => Expr::Mul(vec![Expr::constant(c), m]),
    }
}

fn cmp_mono(a: &Option<Expr>, b: &Option<Expr>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => cmp_expr(x, y),
    }
}

pub(super) fn add(terms: Vec<Expr>) -> Expr {
    let mut flat: Vec<(f64, Option<Expr>)> = Vec::with_capacity(terms.len());
    for t in terms {
        match t {
            Expr::Add(xs) => flat.extend(xs.iter().map(split_coeff)),
            other => flat.push(split_coeff(&other)),
        }
    }
    flat.sort_by(|a, b| cmp_mono(&a.1, &b.1));

    let mut out: Vec<Expr> = Vec::with_capacity(flat.len());
    let mut iter = flat.into_iter().peekable();
    while let Some((c, mono)) = iter.next() {
        let mut sum = c;
        let mut largest = c.abs();
        while let Some((c2, _)) = iter.next_if(|(_, m2)| cmp_mono(&mono, m2) == Ordering::Equal) {
            sum += c2;
            largest = largest.max(c2.abs());
        }
        if sum == 0.0 || sum.abs() <= CANCEL_REL * largest {
            continue;
        }
        out.push(make_term(sum, mono));
    }
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::Add(out),
    }
}

pub(super) fn mul(factors: Vec<Expr>) -> Expr {
    let mut flat: Vec<Expr> = Vec::with_capacity(factors.len());
    for f in factors {
        match f {
            Expr::Mul(xs) => flat.extend(xs),
            other => flat.push(other),
        }
    }

    // Distribute over sums.
    if flat.iter().any(|f| matches!(f, Expr::Add(_))) {
        let (sums, others): (Vec<Expr>, Vec<Expr>) =
            flat.into_iter().partition(|f| matches!(f, Expr::Add(_)));
        let count: usize = sums
            .iter()
            .map(|s| match s {
                Expr::Add(ts) => ts.len(),
                _ => 1,
            })
            .try_fold(1usize, |acc, n| acc.checked_mul(n))
            .unwrap_or(usize::MAX);
        if count <= MAX_EXPAND_TERMS {
            let mut partial: Vec<Vec<Expr>> = vec![others];
            for s in sums {
                let Expr::Add(ts) = s else { unreachable!() };
                let mut next = Vec::with_capacity(partial.len() * ts.len());
                for p in &partial {
                    for t in &ts {
                        let mut v = p.clone();
                        v.push(t.clone());
                        next.push(v);
                    }
                }
                partial = next;
            }
            return add(partial.into_iter().map(mul).collect());
        }
        // Too large to expand: keep the sums as opaque factors.
        return mul_no_distribute(sums.into_iter().chain(others).collect());
    }
    mul_no_distribute(flat)
}

fn mul_no_distribute(flat: Vec<Expr>) -> Expr {
    let mut coeff = 1.0;
    let mut powers: Vec<(Expr, Exponent)> = Vec::with_capacity(flat.len());
    for f in flat {
        match f {
            Expr::Const(c) => coeff *= c,
            Expr::Pow(b, k) => powers.push((*b, k)),
            other => powers.push((other, Exponent::ONE)),
        }
    }
    if coeff == 0.0 {
        return Expr::zero();
    }
    powers.sort_by(|a, b| cmp_expr(&a.0, &b.0));

    let mut merged: Vec<(Expr, Exponent)> = Vec::with_capacity(powers.len());
    for (b, k) in powers {
        match merged.last_mut() {
            Some((lb, lk)) if cmp_expr(lb, &b) == Ordering::Equal => *lk = *lk + k,
            _ => merged.push((b, k)),
        }
    }

    let mut rebuilt: Vec<Expr> = Vec::with_capacity(merged.len());
    let mut again = false;
    for (b, k) in merged {
        if k == Exponent::ZERO {
            continue;
        }
        let p = pow(b, k);
        match p {
            Expr::Const(c) => coeff *= c,
            Expr::Mul(_) | Expr::Add(_) => {
                again = true;
                rebuilt.push(p);
            }
            other => rebuilt.push(other),
        }
    }
    if coeff == 0.0 {
        return Expr::zero();
    }
    if again {
        rebuilt.push(Expr::constant(coeff));
        return mul(rebuilt);
    }
    rebuilt.sort_by(cmp_expr);
    let coeff = normalize_zero(coeff);
    match (rebuilt.len(), coeff == 1.0) {
        (0, _) => Expr::constant(coeff),
        (1, true) => rebuilt.pop().unwrap(),
        (_, true) => Expr::Mul(rebuilt),
        _ => {
            let mut v = Vec::with_capacity(rebuilt.len() + 1);
            v.push(Expr::constant(coeff));
            v.extend(rebuilt);
            Expr::Mul(v)
        }
    }
}

/// Leading coefficient of a canonical expression (first term of a sum).
pub(super) fn leading_coeff(e: &Expr) -> f64 {
    match e {
        Expr::Const(c) => *c,
        Expr::Add(ts) => split_coeff(&ts[0]).0,
        other => split_coeff(other).0,
    }
}

pub(super) fn pow(base: Expr, k: Exponent) -> Expr {
    if k == Exponent::ZERO {
        return Expr::one();
    }
    if k == Exponent::ONE {
        return base;
    }
    match base {
        Expr::Const(c) => match pow_value(c, k) {
            Some(v) if v.is_finite() => Expr::constant(v),
            _ => Expr::Pow(Box::new(Expr::Const(c)), k),
        },
        Expr::Pow(b, k1) => {
            if k.is_integer() {
                let combined = k1.checked_mul(k).expect("integer multiple of a half");
                return pow(*b, combined);
            }
            if let Some(n1) = k1.as_int() {
                if n1 % 2 == 0 {
                    // (b^(2m))^(j/2) = |b|^(m*j)
                    let mj = (n1 / 2) * k.half_units();
                    return if mj % 2 == 0 {
                        pow(*b, Exponent::int(mj))
                    } else {
                        pow(abs(*b), Exponent::int(mj))
                    };
                }
            }
            Expr::Pow(Box::new(Expr::Pow(b, k1)), k)
        }
        Expr::Mul(xs) => {
            if k.is_integer() {
                return mul(xs.into_iter().map(|x| pow(x, k)).collect());
            }
            match xs.first() {
                Some(Expr::Const(c)) if *c > 0.0 && *c != 1.0 => {
                    let c = *c;
                    let rest: Vec<Expr> = xs[1..].to_vec();
                    let rest = if rest.len() == 1 {
                        rest.into_iter().next().unwrap()
                    } else {
                        Expr::Mul(rest)
                    };
                    mul(vec![pow(Expr::Const(c), k), pow(rest, k)])
                }
                _ => Expr::Pow(Box::new(Expr::Mul(xs)), k),
            }
        }
        Expr::Add(ts) => {
            if let Some(n) = k.as_int() {
                if (1..=MAX_EXPAND_POW).contains(&n)
                    && (ts.len() as f64).powi(n) <= MAX_EXPAND_TERMS as f64
                {
                    let base = Expr::Add(ts);
                    let mut acc = base.clone();
                    for _ in 1..n {
                        acc = mul(vec![acc, base.clone()]);
                    }
                    return acc;
                }
                if n < -1 {
                    let expanded = pow(Expr::Add(ts), Exponent::int(-n));
                    if !matches!(expanded, Expr::Pow(..)) {
                        return pow(expanded, Exponent::int(-1));
                    }
                    let Expr::Pow(b, _) = expanded else { unreachable!() };
                    let Expr::Add(ts) = *b else { unreachable!() };
                    return Expr::Pow(Box::new(Expr::Add(ts)), k);
                }
            }
            let lead = split_coeff(&ts[0]).0;
            let content = if k.is_integer() { lead } else { lead.abs() };
            if content != 1.0 && content != 0.0 && content.is_finite() {
                let inv = 1.0 / content;
                let scaled = add(
                    ts.into_iter()
                        .map(|t| mul(vec![Expr::Const(inv), t]))
                        .collect(),
                );
                return mul(vec![pow(Expr::Const(content), k), pow(scaled, k)]);
            }
            Expr::Pow(Box::new(Expr::Add(ts)), k)
        }
        Expr::Abs(a) if k.as_int().is_some_and(|n| n % 2 == 0) => pow(*a, k),
        other => Expr::Pow(Box::new(other), k),
    }
}

pub(super) fn sin(a: Expr) -> Expr {
    if let Expr::Const(c) = a {
        return Expr::constant(c.sin());
    }
    if leading_coeff(&a) < 0.0 {
        return mul(vec![Expr::Const(-1.0), sin(mul(vec![Expr::Const(-1.0), a]))]);
    }
    Expr::Sin(Box::new(a))
}

pub(super) fn cos(a: Expr) -> Expr {
    if let Expr::Const(c) = a {
        return Expr::constant(c.cos());
    }
    if leading_coeff(&a) < 0.0 {
        return cos(mul(vec![Expr::Const(-1.0), a]));
    }
    Expr::Cos(Box::new(a))
}

pub(super) fn sign(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::constant(sign_value(c)),
        Expr::Sign(_) => a,
        Expr::Mul(ref xs) if matches!(xs.first(), Some(Expr::Const(_))) => {
            let (c, rest) = split_coeff(&a);
            let rest = rest.expect("product with a non-constant factor");
            mul(vec![Expr::constant(sign_value(c)), sign(rest)])
        }
        other => Expr::Sign(Box::new(other)),
    }
}

pub(super) fn abs(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::constant(c.abs()),
        Expr::Abs(_) => a,
        Expr::Pow(_, k) if k.as_int().is_some_and(|n| n % 2 == 0) || !k.is_integer() => a,
        Expr::Mul(ref xs) if matches!(xs.first(), Some(Expr::Const(_))) => {
            let (c, rest) = split_coeff(&a);
            let rest = rest.expect("product with a non-constant factor");
            mul(vec![Expr::constant(c.abs()), abs(rest)])
        }
        other => Expr::Abs(Box::new(other)),
    }
}

pub(super) fn approx_eq(a: &Expr, b: &Expr, rel: f64) -> bool {
    let close = |x: f64, y: f64| x == y || (x - y).abs() <= rel * x.abs().max(y.abs());
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => close(*x, *y),
        (Expr::Var(x), Expr::Var(y)) => x == y,
        (Expr::Add(xs), Expr::Add(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| approx_eq(x, y, rel))
        }
        // A unit coefficient is omitted from a product, so `x` and
        // `1.0000000000000002*x` differ in shape; compare through the split.
        (Expr::Mul(_), _) | (_, Expr::Mul(_)) => {
            let (ca, ma) = split_coeff(a);
            let (cb, mb) = split_coeff(b);
            if !close(ca, cb) {
                return false;
            }
            match (ma, mb) {
                (Some(Expr::Mul(xs)), Some(Expr::Mul(ys))) => {
                    xs.len() == ys.len() && xs.iter().zip(&ys).all(|(x, y)| approx_eq(x, y, rel))
                }
                (Some(Expr::Mul(_)), _) | (_, Some(Expr::Mul(_))) => false,
                (Some(x), Some(y)) => approx_eq(&x, &y, rel),
                (None, None) => true,
                _ => false,
            }
        }
        (Expr::Pow(b1, k1), Expr::Pow(b2, k2)) => k1 == k2 && approx_eq(b1, b2, rel),
        (Expr::Sin(x), Expr::Sin(y))
        | (Expr::Cos(x), Expr::Cos(y))
        | (Expr::Sign(x), Expr::Sign(y))
        | (Expr::Abs(x), Expr::Abs(y)) => approx_eq(x, y, rel),
        _ => false,
    }
}
