use serde::{Deserialize, Serialize};

/// Half-open integer range `[lo, hi)`. Bounds are 64-bit so that open-ended
/// predicates such as `x > 8` can be expressed as `[9, i64::MAX)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValueRange {
    pub lo: i64,
    pub hi: i64,
}

impl ValueRange {
    pub fn new(lo: i64, hi: i64) -> Self {
        assert!(lo < hi, "empty range [{lo}, {hi})");
        ValueRange { lo, hi }
    }

    pub fn at_least(lo: i64) -> Self {
        Self::new(lo, i64::MAX)
    }

    #[inline]
    pub fn contains(&self, v: i32) -> bool {
        let v = v as i64;
        self.lo <= v && v < self.hi
    }
}

/// Closed interval of values actually present in a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Zone {
    pub min: i32,
    pub max: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    AlwaysTrue,
    AlwaysFalse,
    Ambivalent,
}

/// Classifies a range predicate against a block's min/max.
#[inline]
pub fn classify_predicate(zone: Zone, range: ValueRange) -> Classification {
    let (min, max) = (zone.min as i64, zone.max as i64);
    if range.hi <= min || range.lo > max {
        Classification::AlwaysFalse
    } else if range.lo <= min && max < range.hi {
        Classification::AlwaysTrue
    } else {
        Classification::Ambivalent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn skipping_examples() {
        let z = Zone { min: 5, max: 6 };
        assert_eq!(classify_predicate(z, ValueRange::at_least(9)), Classification::AlwaysFalse);
        assert_eq!(classify_predicate(z, ValueRange::at_least(5)), Classification::AlwaysTrue);
        let z = Zone { min: 5, max: 9 };
        assert_eq!(classify_predicate(z, ValueRange::new(7, 8)), Classification::Ambivalent);
    }

    proptest! {
        #[test]
        fn classification_is_sound(values in proptest::collection::vec(-50i32..50, 1..40), lo in -60i64..60, w in 1i64..40) {
            let range = ValueRange::new(lo, lo + w);
            let zone = Zone {
                min: *values.iter().min().unwrap(),
                max: *values.iter().max().unwrap(),
            };
            let hits = values.iter().filter(|v| range.contains(**v)).count();
            match classify_predicate(zone, range) {
                Classification::AlwaysFalse => prop_assert_eq!(hits, 0),
                Classification::AlwaysTrue => prop_assert_eq!(hits, values.len()),
                Classification::Ambivalent => {
                    // Bounds are attained, so an ambivalent range must split the endpoints.
                    prop_assert!(!(range.contains(zone.min) && range.contains(zone.max)));
                    prop_assert!(range.lo <= zone.max as i64 && range.hi > zone.min as i64);
                }
            }
        }
    }
}
