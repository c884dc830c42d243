use std::fmt;

use crate::error::{Error, Result};

/// Delta bucket identified by its center in tenths: `DeltaBucket(3)` is the
/// 0.3 bucket, `DeltaBucket(-7)` the −0.7 bucket.
///
/// Bucket `a` holds deltas in `[a − 0.05, a + 0.05)`. The outermost
/// upper edges (0.95 for calls, −0.05 for puts) are closed so every delta
/// kept by the filter has a bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeltaBucket(i8);

impl DeltaBucket {
    pub fn from_tenths(tenths: i8) -> Result<Self> {
        if tenths == 0 || !(-9..=9).contains(&tenths) {
            return Err(Error::Domain(format!("no delta bucket with center {tenths}/10")));
        }
        Ok(Self(tenths))
    }

    pub fn tenths(self) -> i8 {
        self.0
    }

    pub fn center(self) -> f64 {
        f64::from(self.0) / 10.0
    }

    /// Lower (inclusive) edge.
    pub fn lower(self) -> f64 {
        f64::from(2 * self.0 - 1) / 20.0
    }

    /// Upper edge; exclusive except for the 0.9 and −0.1 buckets.
    pub fn upper(self) -> f64 {
        f64::from(2 * self.0 + 1) / 20.0
    }

    fn upper_closed(self) -> bool {
        self.0 == 9 || self.0 == -1
    }

    pub fn contains(self, delta: f64) -> bool {
        delta >= self.lower() && (delta < self.upper() || (self.upper_closed() && delta == self.upper()))
    }

    /// All eighteen buckets, puts first, in increasing center order.
    pub fn all() -> impl Iterator<Item = DeltaBucket> {
        (-9..=9i8).filter(|&k| k != 0).map(DeltaBucket)
    }
}

impl fmt::Display for DeltaBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.center())
    }
}

/// Maps a filtered delta to its bucket.
pub fn assign_bucket(delta: f64) -> Result<DeltaBucket> {
    let in_range = (0.05..=0.95).contains(&delta) || (-0.95..=-0.05).contains(&delta);
    if !in_range {
        return Err(Error::Domain(format!("delta {delta} outside the bucketed range")));
    }
    let guess = (delta * 10.0).round() as i8;
    for k in [guess, guess - 1, guess + 1] {
        if let Ok(b) = DeltaBucket::from_tenths(k) {
            if b.contains(delta) {
                return Ok(b);
            }
        }
    }
    Err(Error::Domain(format!("delta {delta} has no bucket")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(assign_bucket(0.149).unwrap().tenths(), 1);
        assert_eq!(assign_bucket(-0.55).unwrap().tenths(), -5);
        assert_eq!(assign_bucket(0.95).unwrap().tenths(), 9);
        assert_eq!(assign_bucket(0.05).unwrap().tenths(), 1);
        assert_eq!(assign_bucket(-0.95).unwrap().tenths(), -9);
        assert_eq!(assign_bucket(-0.05).unwrap().tenths(), -1);
        assert_eq!(assign_bucket(0.15).unwrap().tenths(), 2);
        assert!(assign_bucket(0.96).is_err());
        assert!(assign_bucket(0.0).is_err());
        assert!(assign_bucket(f64::NAN).is_err());
    }

    #[test]
    fn display() {
        assert_eq!(DeltaBucket::from_tenths(-3).unwrap().to_string(), "-0.3");
        assert_eq!(DeltaBucket::all().count(), 18);
    }
}
