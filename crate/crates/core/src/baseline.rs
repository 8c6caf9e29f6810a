//! Champernowne's constant in any integer base: `0.1 2 3 … (b−1) 10 11 …`
//! written in base `b`.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::arithmetic::{Dyadic, UnitFixed};
use crate::discrepancy::OrbitPoints;

fn digit_char(d: u32, base: u32) -> char {
    char::from_digit(d, base).expect("digit below base")
}

/// Lazily produces the fractional digits, one numeral at a time.
#[derive(Clone, Debug)]
pub struct ChampernowneStream {
    base: u32,
    next_number: u64,
    /// Digits of the current numeral, least significant first.
    pending: Vec<u32>,
}

impl ChampernowneStream {
    pub fn new(base: u32) -> Self {
        assert!((2..=36).contains(&base), "base must be in 2..=36");
        ChampernowneStream {
            base,
            next_number: 1,
            pending: Vec::new(),
        }
    }
}

impl Iterator for ChampernowneStream {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.pending.is_empty() {
            let mut n = self.next_number;
            self.next_number += 1;
            while n > 0 {
                self.pending.push((n % self.base as u64) as u32);
                n /= self.base as u64;
            }
        }
        self.pending.pop()
    }
}

pub fn champernowne_digits(base: u32, count: usize) -> String {
    ChampernowneStream::new(base)
        .take(count)
        .map(|d| digit_char(d, base))
        .collect()
}

/// The digit at 1-based `position`, found by skipping whole blocks of
/// equal-length numerals.
pub fn champernowne_digit_at(base: u32, position: u64) -> char {
    assert!((2..=36).contains(&base), "base must be in 2..=36");
    assert!(position >= 1, "positions start at 1");
    let b = base as u128;
    let mut offset = (position - 1) as u128;
    let mut len = 1u32;
    let mut first = 1u128; // smallest numeral with `len` digits
    loop {
        let block = (b - 1) * first * len as u128;
        if offset < block {
            break;
        }
        offset -= block;
        len += 1;
        first *= b;
    }
    let number = first + offset / len as u128;
    let from_left = (offset % len as u128) as u32;
    let d = (number / b.pow(len - 1 - from_left)) % b;
    digit_char(d as u32, base)
}

/// `{C_b · b^x}` for `x < p`, each point built from the next 128 bits' worth
/// of digits, with radius covering the dropped digits and the rounding.
pub fn champernowne_orbit(base: u32, p: usize) -> OrbitPoints {
    let window = (128.0 / (base as f64).log2()).ceil() as usize + 1;
    let digits: Vec<u32> = ChampernowneStream::new(base).take(p + window).collect();
    let b = BigUint::from(base);
    let denom = b.pow(window as u32);
    let points = (0..p)
        .map(|x| {
            let mut n = BigUint::default();
            for &d in &digits[x..x + window] {
                n = n * &b + d;
            }
            let scaled = (n << 128u32) / &denom;
            debug_assert!(scaled.to_u128().is_some());
            UnitFixed::with_radius(scaled, 128, Dyadic::pow2(-127))
        })
        .collect();
    OrbitPoints::new(points, format!("champernowne base {base}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrepancy::star_discrepancy;

    #[test]
    fn prefixes() {
        assert_eq!(champernowne_digits(10, 16), "1234567891011121");
        assert_eq!(champernowne_digits(2, 10), "1101110010");
        assert_eq!(champernowne_digits(3, 6), "121011");
    }

    #[test]
    fn digit_at_examples() {
        assert_eq!(champernowne_digit_at(10, 1), '1');
        assert_eq!(champernowne_digit_at(10, 11), '0');
        assert_eq!(champernowne_digit_at(10, 10), '1');
    }

    #[test]
    fn digit_at_agrees_with_stream() {
        for base in [2u32, 3, 7, 10, 16] {
            let digits = champernowne_digits(base, 100_000);
            for (i, c) in digits.chars().enumerate() {
                assert_eq!(champernowne_digit_at(base, i as u64 + 1), c, "base {base} pos {}", i + 1);
            }
        }
    }

    #[test]
    fn digit_at_far_out() {
        // 10^12-th decimal digit; only checks that block skipping stays in range
        let c = champernowne_digit_at(10, 1_000_000_000_000);
        assert!(c.is_ascii_digit());
    }

    #[test]
    fn binary_orbit_starts_with_constant() {
        let pts = champernowne_orbit(2, 4);
        // 0.1101110010…₂
        let top = pts.points[0].top_u128() >> 118;
        assert_eq!(top, 0b1101110010);
        assert!(star_discrepancy(&pts) <= 1.0);
    }
}
