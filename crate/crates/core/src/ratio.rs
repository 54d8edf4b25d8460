//! Exact rational helpers shared by the parser, the checker and the renderers.

use num::bigint::{BigInt, Sign};
use num::rational::BigRational;
use num::{Integer, One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn frac(num: u64, den: u64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses a decimal literal such as `0.675`, `12` or `1e-3` into the exact
/// rational its digits denote.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (whole, fractional) = match mantissa.split_once('.') {
        Some((w, f)) => (w, f),
        None => (mantissa, ""),
    };
    if whole.is_empty() && fractional.is_empty() {
        return None;
    }
    if !whole.chars().chain(fractional.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{whole}{fractional}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let scale = exponent - fractional.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num::pow(ten, (-scale) as usize))
    };
    Some(value)
}

/// Rounds to `digits` decimals, ties to even, and renders the result with
/// exactly that many fractional digits.
pub fn round_half_even(r: &Rational, digits: usize) -> String {
    let scale = num::pow(BigInt::from(10u32), digits);
    let scaled = r * Rational::from_integer(scale.clone());
    let floor = scaled.floor().to_integer();
    let rem = &scaled - Rational::from_integer(floor.clone());
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let rounded = match rem.cmp(&half) {
        std::cmp::Ordering::Less => floor,
        std::cmp::Ordering::Greater => floor + 1,
        std::cmp::Ordering::Equal => {
            if floor.is_even() {
                floor
            } else {
                floor + 1
            }
        }
    };
    render_scaled(&rounded, digits)
}

fn render_scaled(value: &BigInt, digits: usize) -> String {
    let negative = value.sign() == Sign::Minus;
    let mut s = value.abs().to_string();
    if digits == 0 {
        return if negative { format!("-{s}") } else { s };
    }
    if s.len() <= digits {
        s = format!("{}{}", "0".repeat(digits + 1 - s.len()), s);
    }
    let (w, f) = s.split_at(s.len() - digits);
    format!("{}{}.{}", if negative { "-" } else { "" }, w, f)
}

/// Renders a rational as the shortest exact literal the model language
/// accepts: an integer, a terminating decimal, or `num/den`.
pub fn render_exact(r: &Rational) -> String {
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    let mut den = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if den.is_one() {
        let digits = twos.max(fives);
        let scaled = r * Rational::from_integer(num::pow(BigInt::from(10u32), digits));
        return render_scaled(&scaled.to_integer(), digits);
    }
    format!("{}/{}", r.numer(), r.denom())
}

pub fn abs_diff(a: &Rational, b: &Rational) -> Rational {
    (a - b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse_decimal("0.675").unwrap(), frac(675, 1000));
        assert_eq!(parse_decimal("1").unwrap(), int(1));
        assert_eq!(parse_decimal("0.0").unwrap(), int(0));
        assert_eq!(parse_decimal("2.5e-2").unwrap(), frac(1, 40));
        assert!(parse_decimal(".").is_none());
        assert!(parse_decimal("1.2.3").is_none());
    }

    #[test]
    fn rounding_ties_to_even() {
        assert_eq!(round_half_even(&frac(4748, 7035), 3), "0.675");
        assert_eq!(round_half_even(&frac(1, 8), 2), "0.12");
        assert_eq!(round_half_even(&frac(3, 8), 2), "0.38");
        assert_eq!(round_half_even(&int(1), 3), "1.000");
        assert_eq!(round_half_even(&frac(0, 5), 3), "0.000");
    }

    #[test]
    fn exact_rendering_round_trips() {
        for r in [frac(1, 4), frac(4748, 7035), int(3), frac(7, 20), frac(0, 1)] {
            let text = render_exact(&r);
            let back = match text.split_once('/') {
                Some((n, d)) => Rational::new(n.parse().unwrap(), d.parse().unwrap()),
                None => parse_decimal(&text).unwrap(),
            };
            assert_eq!(back, r, "{text}");
        }
        assert_eq!(render_exact(&frac(7, 20)), "0.35");
    }
}
