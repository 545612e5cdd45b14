//! Verification engine for a probabilistic timed calculus of wireless broadcast systems.
//!
//! The crate is layered bottom-up:
//!
//! - [`calculus`]: syntax, substitution, canonical forms, well-formedness.
//! - [`semantics`]: the probabilistic labelled transition system and weak transitions.
//! - [`transport`]: exact optimal transport between finite distributions.
//! - [`quasimetric`]: the weak simulation quasimetric as a fixed point.
//! - [`laws`]: algebraic laws as tolerance certificates.
//! - [`gossip`]: the gossip processes and case-study networks.
//! - [`oracle`]: exact reachability and Monte Carlo delivery estimates.

pub mod calculus;
pub mod gossip;
pub mod laws;
pub mod oracle;
pub mod poly;
pub mod quasimetric;
pub mod semantics;
pub mod transport;

pub use num_rational::BigRational as Q;

/// Builds the rational `n/d`.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

/// Builds the integer rational `n`.
pub fn qi(n: i64) -> Q {
    Q::from_integer(n.into())
}

/// Parses `a/b`, an integer, or a finite decimal into an exact rational.
pub fn parse_rational(s: &str) -> Option<Q> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: num_bigint::BigInt = n.trim().parse().ok()?;
        let d: num_bigint::BigInt = d.trim().parse().ok()?;
        if d == num_bigint::BigInt::from(0) {
            return None;
        }
        return Some(Q::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let n: num_bigint::BigInt = if digits.is_empty() { 0.into() } else { digits.parse().ok()? };
    let d = num_bigint::BigInt::from(10).pow(frac.len() as u32);
    let r = Q::new(n, d);
    Some(if neg { -r } else { r })
}

/// Lossy conversion for display and sampling.
pub fn to_f64(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("4/5"), Some(q(4, 5)));
        assert_eq!(parse_rational("0.8"), Some(q(4, 5)));
        assert_eq!(parse_rational("1"), Some(qi(1)));
        assert_eq!(parse_rational(".25"), Some(q(1, 4)));
        assert_eq!(parse_rational("-0.5"), Some(q(-1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational(""), None);
    }
}
