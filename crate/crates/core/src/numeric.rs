//! Small numeric helpers shared across modules.

use std::cmp::Ordering;

/// Sums `terms` in ascending value order.
///
/// The result depends only on the multiset of terms, so any reduction over
/// vertices that goes through here is bit-identical under vertex relabeling.
pub fn invariant_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// Lowest index of the maximum entry.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if x.partial_cmp(&xs[best]) == Some(Ordering::Greater) {
            best = i;
        }
    }
    best
}

/// Formats a value with 12 significant digits, as used by every numeric
/// output file.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        trim_zeros(&s)
    } else {
        let s = format!("{:.11e}", x);
        match s.split_once('e') {
            Some((mantissa, e)) => format!("{}e{}", trim_zeros(mantissa), e),
            None => s,
        }
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt12_digits() {
        assert_eq!(fmt12(1.0), "1");
        assert_eq!(fmt12(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt12(-0.5), "-0.5");
        assert_eq!(fmt12(123456.789), "123456.789");
        assert_eq!(fmt12(1.5e-9), "1.5e-9");
        assert_eq!(fmt12(0.0), "0");
    }

    #[test]
    fn invariant_sum_ignores_order() {
        let a = [1e16, 1.0, -1e16, 3.5, 1e-3];
        let mut x = a.to_vec();
        let mut y: Vec<f64> = a.iter().rev().copied().collect();
        assert_eq!(invariant_sum(&mut x).to_bits(), invariant_sum(&mut y).to_bits());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
    }
}
