//! Isotonic projection onto non-decreasing grid functions.
//!
//! [`isotonic_projection`] is the production path (pool-adjacent-violators).
//! The two oracles share no code with it: [`isotonic_maxmin_oracle`] uses the
//! interval max-min characterisation and [`isotonic_partition_oracle`]
//! enumerates every consecutive-block partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest input accepted by [`isotonic_partition_oracle`].
pub const PARTITION_ORACLE_MAX: usize = 14;

/// Maximal run `[start, end]` (inclusive, zero based) sharing value `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub end: usize,
    pub theta: f64,
}

impl Block {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Blocks of an isotonic fit; thetas are strictly increasing and each equals
/// the mean of the input over its block.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockDecomposition {
    pub blocks: Vec<Block>,
}

impl BlockDecomposition {
    pub fn expand(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.blocks.last().map_or(0, |b| b.end + 1));
        for b in &self.blocks {
            out.extend(std::iter::repeat_n(b.theta, b.len()));
        }
        out
    }
}

struct Pool {
    start: usize,
    len: usize,
    sum: f64,
}

impl Pool {
    fn mean(&self) -> f64 {
        self.sum / self.len as f64
    }
}

/// Uniform-weight L² projection of `l` onto non-decreasing arrays.
pub fn isotonic_projection(l: &[f64]) -> Result<(Vec<f64>, BlockDecomposition)> {
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("isotonic projection of non-finite input"));
    }
    let mut stack: Vec<Pool> = Vec::with_capacity(l.len());
    for (i, &v) in l.iter().enumerate() {
        let mut cur = Pool { start: i, len: 1, sum: v };
        // pool only on strict violations
        while let Some(prev) = stack.last() {
            if prev.mean() > cur.mean() {
                let prev = stack.pop().expect("non-empty");
                cur = Pool {
                    start: prev.start,
                    len: prev.len + cur.len,
                    sum: prev.sum + cur.sum,
                };
            } else {
                break;
            }
        }
        stack.push(cur);
    }
    // merge neighbours whose means tie so thetas are strictly increasing
    let mut merged: Vec<Pool> = Vec::with_capacity(stack.len());
    for p in stack {
        match merged.last_mut() {
            Some(last) if last.mean() == p.mean() => {
                last.len += p.len;
                last.sum += p.sum;
            }
            _ => merged.push(p),
        }
    }
    let blocks = BlockDecomposition {
        blocks: merged
            .iter()
            .map(|p| Block {
                start: p.start,
                end: p.start + p.len - 1,
                theta: p.mean(),
            })
            .collect(),
    };
    let mut fitted = blocks.expand();
    // Tied means merged above can differ from the pooled mean by an ulp; keep
    // the output monotone regardless.
    for i in 1..fitted.len() {
        if fitted[i] < fitted[i - 1] {
            fitted[i] = fitted[i - 1];
        }
    }
    Ok((fitted, blocks))
}

/// `out[i] = max_{j≤i} min_{k≥i} mean(l[j..=k])`, in `O(M²)`.
pub fn isotonic_maxmin_oracle(l: &[f64]) -> Vec<f64> {
    let m = l.len();
    let mut prefix = vec![0.0; m + 1];
    for (i, v) in l.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let mean = |j: usize, k: usize| (prefix[k + 1] - prefix[j]) / (k - j + 1) as f64;
    let mut out = vec![f64::NEG_INFINITY; m];
    for j in 0..m {
        // suffix minimum over k of mean(j..=k), swept from the right
        let mut best = f64::INFINITY;
        let mut mins = vec![0.0; m - j];
        for k in (j..m).rev() {
            best = best.min(mean(j, k));
            mins[k - j] = best;
        }
        for i in j..m {
            out[i] = out[i].max(mins[i - j]);
        }
    }
    out
}

/// Exhaustive search over all `2^{M-1}` consecutive-block partitions with
/// non-decreasing block means; returns the least-squares one.
pub fn isotonic_partition_oracle(l: &[f64]) -> Result<Vec<f64>> {
    let m = l.len();
    if m > PARTITION_ORACLE_MAX {
        return Err(Error::Capacity {
            what: "partition oracle length",
            got: m,
            limit: PARTITION_ORACLE_MAX,
        });
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for cuts in 0u32..(1 << (m - 1)) {
        // bit i set ⇒ a block boundary between positions i and i+1
        let mut fit = Vec::with_capacity(m);
        let mut start = 0;
        let mut prev_mean = f64::NEG_INFINITY;
        let mut feasible = true;
        for end in 0..m {
            if end == m - 1 || cuts & (1 << end) != 0 {
                let block = &l[start..=end];
                let mean = block.iter().sum::<f64>() / block.len() as f64;
                if mean < prev_mean {
                    feasible = false;
                    break;
                }
                fit.extend(std::iter::repeat_n(mean, block.len()));
                prev_mean = mean;
                start = end + 1;
            }
        }
        if !feasible {
            continue;
        }
        let sse: f64 = fit.iter().zip(l).map(|(f, v)| (f - v) * (f - v)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, fit));
        }
    }
    Ok(best.expect("the single-block partition is always feasible").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iso(l: &[f64]) -> Vec<f64> {
        isotonic_projection(l).unwrap().0
    }

    #[test]
    fn small_cases() {
        assert_eq!(iso(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(iso(&[3.0, 1.0, 2.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(iso(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic_maxmin_oracle(&[3.0, 1.0, 2.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic_maxmin_oracle(&[5.0]), vec![5.0]);
        assert_eq!(isotonic_maxmin_oracle(&[2.0, 2.0]), vec![2.0, 2.0]);
        assert_eq!(isotonic_partition_oracle(&[3.0, 1.0, 2.0]).unwrap(), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic_partition_oracle(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(isotonic_partition_oracle(&[1.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(
            isotonic_partition_oracle(&[1.0, 3.0, 2.0, 4.0]).unwrap(),
            vec![1.0, 2.5, 2.5, 4.0]
        );
    }

    #[test]
    fn errors() {
        assert!(isotonic_projection(&[1.0, f64::NAN]).is_err());
        assert!(matches!(
            isotonic_partition_oracle(&[0.0; 15]),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn ties_merge_into_one_block() {
        let (fit, blocks) = isotonic_projection(&[2.0, 1.0, 1.5, 1.5, 3.0]).unwrap();
        assert_eq!(fit, vec![1.5, 1.5, 1.5, 1.5, 3.0]);
        assert_eq!(blocks.blocks.len(), 2);
        assert_eq!((blocks.blocks[0].start, blocks.blocks[0].end), (0, 3));
    }

    fn arb_array(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, 1..max_len)
    }

    proptest! {
        #[test]
        fn agrees_with_oracles(l in arb_array(12)) {
            let fit = iso(&l);
            let mm = isotonic_maxmin_oracle(&l);
            let part = isotonic_partition_oracle(&l).unwrap();
            for i in 0..l.len() {
                prop_assert!((fit[i] - mm[i]).abs() < 1e-9);
                prop_assert!((fit[i] - part[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn blocks_are_means(l in arb_array(60)) {
            let (fit, blocks) = isotonic_projection(&l).unwrap();
            prop_assert!(fit.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(blocks.blocks.first().unwrap().start, 0);
            prop_assert_eq!(blocks.blocks.last().unwrap().end, l.len() - 1);
            for w in blocks.blocks.windows(2) {
                prop_assert_eq!(w[0].end + 1, w[1].start);
                prop_assert!(w[0].theta < w[1].theta);
            }
            for b in &blocks.blocks {
                let mean = l[b.start..=b.end].iter().sum::<f64>() / b.len() as f64;
                prop_assert!((mean - b.theta).abs() < 1e-9);
            }
        }

        #[test]
        fn scaling_and_shift(l in arb_array(60), k in 0.0f64..10.0, c in -20.0f64..20.0) {
            let base = iso(&l);
            let scaled = iso(&l.iter().map(|v| k * v).collect::<Vec<_>>());
            let shifted = iso(&l.iter().map(|v| v + c).collect::<Vec<_>>());
            for i in 0..l.len() {
                prop_assert!((scaled[i] - k * base[i]).abs() < 1e-9 * (1.0 + k * 50.0));
                prop_assert!((shifted[i] - base[i] - c).abs() < 1e-9 * 50.0);
            }
        }

        #[test]
        fn idempotent(l in arb_array(60)) {
            let once = iso(&l);
            // pooled means of equal values may round by an ulp
            for (a, b) in iso(&once).iter().zip(&once) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
