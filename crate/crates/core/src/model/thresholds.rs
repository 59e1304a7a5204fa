use serde::{Deserialize, Serialize};

use super::{ModelError, SimTime};

/// Attained-service range `[lower, upper)` of one priority queue.
/// `upper == None` marks the unbounded bottom queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueInterval {
    pub lower: SimTime,
    pub upper: Option<SimTime>,
}

impl QueueInterval {
    pub fn contains(&self, t: SimTime) -> bool {
        t >= self.lower && self.upper.is_none_or(|u| t < u)
    }
}

/// Exponentially growing queue bounds: queue `j` (one-based) ends at
/// `M^(j-1) * s1_up`; the last queue is open-ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueueThresholds {
    intervals: Vec<QueueInterval>,
}

impl QueueThresholds {
    pub fn new(k: usize, s1_up: SimTime, m: f64) -> Result<Self, ModelError> {
        Ok(QueueThresholds {
            intervals: queue_thresholds(k, s1_up, m)?,
        })
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[QueueInterval] {
        &self.intervals
    }

    /// One-based index of the queue whose interval contains `t`.
    pub fn queue_for(&self, t: SimTime) -> usize {
        self.intervals
            .iter()
            .position(|iv| iv.contains(t))
            .map_or(self.intervals.len(), |i| i + 1)
    }
}

pub fn queue_thresholds(k: usize, s1_up: SimTime, m: f64) -> Result<Vec<QueueInterval>, ModelError> {
    if k == 0 {
        return Err(ModelError::OutOfRange {
            field: "k",
            value: 0.0,
        });
    }
    if s1_up == SimTime::ZERO {
        return Err(ModelError::OutOfRange {
            field: "s1_up",
            value: 0.0,
        });
    }
    if !(m > 1.0 && m.is_finite()) {
        return Err(ModelError::OutOfRange { field: "m", value: m });
    }
    let s1 = s1_up.as_us() as f64;
    let mut out = Vec::with_capacity(k);
    let mut lower = SimTime::ZERO;
    for j in 1..=k {
        let upper = if j == k {
            None
        } else {
            Some(SimTime::from_us_f64(m.powi(j as i32 - 1) * s1))
        };
        out.push(QueueInterval { lower, upper });
        if let Some(u) = upper {
            lower = u;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ms(v: u64) -> SimTime {
        SimTime::from_ms_int(v)
    }

    fn bounds(iv: &[QueueInterval]) -> Vec<(u64, Option<u64>)> {
        iv.iter()
            .map(|i| (i.lower.as_us() / 1000, i.upper.map(|u| u.as_us() / 1000)))
            .collect()
    }

    #[test]
    fn four_queues_doubling() {
        let q = queue_thresholds(4, ms(50), 2.0).unwrap();
        assert_eq!(
            bounds(&q),
            vec![(0, Some(50)), (50, Some(100)), (100, Some(200)), (200, None)]
        );
    }

    #[test]
    fn single_queue_unbounded() {
        let q = queue_thresholds(1, ms(50), 2.0).unwrap();
        assert_eq!(bounds(&q), vec![(0, None)]);
    }

    #[test]
    fn three_queues_tripling() {
        let q = queue_thresholds(3, ms(10), 3.0).unwrap();
        assert_eq!(bounds(&q), vec![(0, Some(10)), (10, Some(30)), (30, None)]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(queue_thresholds(0, ms(50), 2.0).is_err());
        assert!(queue_thresholds(3, SimTime::ZERO, 2.0).is_err());
        assert!(queue_thresholds(3, ms(50), 1.0).is_err());
        assert!(queue_thresholds(3, ms(50), f64::NAN).is_err());
    }

    #[test]
    fn membership() {
        let q = QueueThresholds::new(4, ms(50), 2.0).unwrap();
        assert_eq!(q.queue_for(ms(120)), 3);
        assert_eq!(q.queue_for(ms(0)), 1);
        assert_eq!(q.queue_for(ms(50)), 2);
        assert_eq!(q.queue_for(ms(100_000)), 4);
    }

    proptest! {
        #[test]
        fn intervals_partition_the_line(k in 1usize..12, s1 in 1u64..1_000_000, m in 1.01f64..5.0) {
            let q = queue_thresholds(k, SimTime::from_us(s1), m).unwrap();
            prop_assert_eq!(q.len(), k);
            prop_assert_eq!(q[0].lower, SimTime::ZERO);
            prop_assert!(q[k - 1].upper.is_none());
            for w in q.windows(2) {
                prop_assert_eq!(w[0].upper, Some(w[1].lower));
                prop_assert!(w[0].lower <= w[1].lower);
            }
        }
    }
}
