//! Stable argsort of `f64` slices and the rank-reordering permutation used to
//! re-couple empirical samples.

const RADIX_BITS: u32 = 11;
const BUCKETS: usize = 1 << RADIX_BITS;
const SMALL: usize = 512;

/// Order-preserving map from `f64` to `u64` (total order, `-0.0 < 0.0`).
#[inline]
fn key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Indices that sort `values` ascending. Ties keep their original order.
pub fn argsort(values: &[f64]) -> Vec<u32> {
    let n = values.len();
    assert!(n <= u32::MAX as usize, "argsort supports at most 2^32 - 1 values");
    if n < SMALL {
        let mut idx: Vec<u32> = (0..n as u32).collect();
        idx.sort_by_key(|&i| key(values[i as usize]));
        return idx;
    }

    let mut keys: Vec<u64> = values.iter().map(|&x| key(x)).collect();
    let mut idx: Vec<u32> = (0..n as u32).collect();
    let mut keys_tmp = vec![0u64; n];
    let mut idx_tmp = vec![0u32; n];
    let mut counts = vec![0usize; BUCKETS];

    let mut shift = 0;
    while shift < 64 {
        counts.iter_mut().for_each(|c| *c = 0);
        for &k in &keys {
            counts[((k >> shift) as usize) & (BUCKETS - 1)] += 1;
        }
        // A digit shared by every key leaves the order unchanged.
        if counts.contains(&n) {
            shift += RADIX_BITS;
            continue;
        }
        let mut total = 0;
        for c in counts.iter_mut() {
            let here = *c;
            *c = total;
            total += here;
        }
        for (&k, &i) in keys.iter().zip(&idx) {
            let slot = &mut counts[((k >> shift) as usize) & (BUCKETS - 1)];
            keys_tmp[*slot] = k;
            idx_tmp[*slot] = i;
            *slot += 1;
        }
        std::mem::swap(&mut keys, &mut keys_tmp);
        std::mem::swap(&mut idx, &mut idx_tmp);
        shift += RADIX_BITS;
    }
    idx
}

/// Permutation that gives `values` the ranks of `scores`.
///
/// Returns `source` such that `values[source[r]]` is the value to place in row
/// `r`: the row holding the j-th smallest score receives the j-th smallest value.
pub fn reorder_permutation(values: &[f64], scores: &[f64]) -> Vec<u32> {
    assert_eq!(values.len(), scores.len());
    let by_value = argsort(values);
    let by_score = argsort(scores);
    let mut source = vec![0u32; values.len()];
    for (&row, &src) in by_score.iter().zip(&by_value) {
        source[row as usize] = src;
    }
    source
}

/// Applies a permutation produced by [`reorder_permutation`].
pub fn apply_permutation(values: &[f64], source: &[u32]) -> Vec<f64> {
    source.iter().map(|&s| values[s as usize]).collect()
}

/// Ranks (0-based) of `values`, ties broken by index.
pub fn ranks(values: &[f64]) -> Vec<u32> {
    let order = argsort(values);
    let mut r = vec![0u32; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        r[i as usize] = pos as u32;
    }
    r
}
