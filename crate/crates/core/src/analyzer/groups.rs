use std::ops::Range;

use crate::error::{Error, Result};
use crate::factorize::RowScaledSvd;
use crate::matrix::DenseMatrix;
use crate::svd::SvdResult;

/// Contiguous groups over singular-value indices sorted non-increasing.
/// Group 1 holds the largest values; the first `k mod G` groups get one
/// extra index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    ranges: Vec<Range<usize>>,
}

impl GroupPartition {
    pub fn group_count(&self) -> usize {
        self.ranges.len()
    }

    /// Zero-based index range of group `g` (1-based).
    pub fn range(&self, g: usize) -> Result<Range<usize>> {
        if g == 0 || g > self.ranges.len() {
            return Err(Error::InvalidArgument(format!(
                "group {g} outside 1..={}",
                self.ranges.len()
            )));
        }
        Ok(self.ranges[g - 1].clone())
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    /// `s` with the entries of group `g` set to zero.
    pub fn zero_group(&self, s: &[f64], g: usize) -> Result<Vec<f64>> {
        let range = self.range(g)?;
        let k = self.ranges.last().map_or(0, |r| r.end);
        if s.len() != k {
            return Err(Error::InvalidArgument(format!(
                "partition covers {k} singular values, got {}",
                s.len()
            )));
        }
        let mut out = s.to_vec();
        out[range].iter_mut().for_each(|v| *v = 0.0);
        Ok(out)
    }
}

pub fn group_partition(k: usize, groups: usize) -> Result<GroupPartition> {
    if groups == 0 || groups > k {
        return Err(Error::InvalidArgument(format!(
            "group count {groups} outside 1..={k}"
        )));
    }
    let base = k / groups;
    let extra = k % groups;
    let mut ranges = Vec::with_capacity(groups);
    let mut start = 0;
    for g in 0..groups {
        let len = base + usize::from(g < extra);
        ranges.push(start..start + len);
        start += len;
    }
    Ok(GroupPartition { ranges })
}

/// Reconstruction of `f` with the singular values of group `g` zeroed.
pub fn group_truncate_layer(f: &SvdResult, g: usize, partition: &GroupPartition) -> Result<DenseMatrix> {
    Ok(f.reconstruct_with(&partition.zero_group(&f.s, g)?))
}

/// Same, for a row-scaled decomposition: groups act on the spectrum of the
/// scaled matrix and the result is mapped back through the inverse scaling.
pub fn group_truncate_scaled(
    f: &RowScaledSvd,
    g: usize,
    partition: &GroupPartition,
) -> Result<DenseMatrix> {
    Ok(f.reconstruct_with(&partition.zero_group(&f.svd.s, g)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::frobenius_error;
    use crate::svd::svd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partition_examples() {
        assert_eq!(group_partition(10, 10).unwrap().sizes(), vec![1; 10]);
        let p = group_partition(10, 5).unwrap();
        let ranges: Vec<_> = (1..=5).map(|g| p.range(g).unwrap()).collect();
        assert_eq!(ranges, vec![0..2, 2..4, 4..6, 6..8, 8..10]);
        assert_eq!(group_partition(11, 5).unwrap().sizes(), vec![3, 2, 2, 2, 2]);
        assert!(group_partition(3, 4).is_err());
        assert!(group_partition(3, 0).is_err());
        assert!(p.range(0).is_err() && p.range(6).is_err());
    }

    #[test]
    fn truncating_the_small_singular_value() {
        let f = svd(&DenseMatrix::from_diag(&[3.0, 1.0])).unwrap();
        let p = group_partition(2, 2).unwrap();
        let w = group_truncate_layer(&f, 2, &p).unwrap();
        assert!(w.sub(&DenseMatrix::from_diag(&[3.0, 0.0])).max_abs() < 1e-15);
        assert!(group_truncate_layer(&f, 3, &p).is_err());
    }

    #[test]
    fn zero_group_reconstructs_exactly() {
        let w = DenseMatrix::from_diag(&[4.0, 2.0, 0.0, 0.0]);
        let f = svd(&w).unwrap();
        let p = group_partition(4, 2).unwrap();
        let r = group_truncate_layer(&f, 2, &p).unwrap();
        assert!(frobenius_error(&w, &r).unwrap() < 1e-15);
    }

    #[test]
    fn singleton_groups_sum_to_g_minus_one_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = DenseMatrix::from_fn(7, 5, |_, _| rng.random_range(-1.0..1.0));
        let f = svd(&w).unwrap();
        let p = group_partition(5, 5).unwrap();
        let mut sum = DenseMatrix::zeros(7, 5);
        for g in 1..=5 {
            let wg = group_truncate_layer(&f, g, &p).unwrap();
            // Dropping σ_g costs exactly σ_g in Frobenius norm.
            let err = frobenius_error(&w, &wg).unwrap();
            assert!((err - f.s[g - 1]).abs() < 1e-12);
            // Adding the rank-one term back restores W.
            let mut only = vec![0.0; 5];
            only[g - 1] = f.s[g - 1];
            assert!(wg.add(&f.reconstruct_with(&only)).sub(&w).max_abs() < 1e-9);
            sum = sum.add(&wg);
        }
        assert!(sum.sub(&w.scaled(4.0)).max_abs() < 1e-9);
    }
}
