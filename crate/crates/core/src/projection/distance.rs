use crate::error::{Error, Result};

/// Russel-Rao dissimilarity `(n - c_TT) / n`, where `c_TT` counts positions set in
/// both rows.
///
/// Unlike most dissimilarities this is not zero on the diagonal: a row is at
/// distance `(n - |ones|) / n` from itself, so only rows missing every path are at
/// distance zero from their copies.
pub fn russel_rao(u: &[bool], v: &[bool]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    if u.is_empty() {
        return Err(Error::InvalidConfig("Russel-Rao needs vectors of length at least 1".into()));
    }
    let both = u.iter().zip(v).filter(|(a, b)| **a && **b).count();
    Ok((u.len() - both) as f64 / u.len() as f64)
}

/// Number of positions set in both packed rows.
#[inline]
pub fn both_set(u: &[u64], v: &[u64]) -> u32 {
    u.iter().zip(v).map(|(a, b)| (a & b).count_ones()).sum()
}

#[inline]
pub fn hamming(u: &[u64], v: &[u64]) -> u32 {
    u.iter().zip(v).map(|(a, b)| (a ^ b).count_ones()).sum()
}

/// Packed-row form of [`russel_rao`]; `n` is the logical row length.
#[inline]
pub fn russel_rao_words(u: &[u64], v: &[u64], n: usize) -> f64 {
    (n as f64 - both_set(u, v) as f64) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        let u = [true, false, true, true];
        let v = [true, true, false, true];
        assert_eq!(russel_rao(&u, &v).unwrap(), 0.5);
        assert_eq!(russel_rao(&[true; 3], &[true; 3]).unwrap(), 0.0);
        assert_eq!(russel_rao(&[false; 2], &[false; 2]).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_lengths_fail() {
        assert!(matches!(russel_rao(&[true], &[true, false]), Err(Error::LengthMismatch { .. })));
        assert!(russel_rao(&[], &[]).is_err());
    }

    #[test]
    fn packed_matches_unpacked() {
        let u = [0b1011u64];
        let v = [0b1101u64];
        assert_eq!(russel_rao_words(&u, &v, 4), 0.5);
        assert_eq!(hamming(&u, &v), 2);
    }
}
