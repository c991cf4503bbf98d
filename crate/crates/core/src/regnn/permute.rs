use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::netsim::ChannelRealization;

pub fn validate_permutation(perm: &[usize], k: usize) -> Result<()> {
    if perm.len() != k {
        return Err(Error::InvalidPermutation(format!("length {} for {k} links", perm.len())));
    }
    let mut seen = vec![false; k];
    for &i in perm {
        if i >= k || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidPermutation(format!("{perm:?} is not a bijection")));
        }
    }
    Ok(())
}

/// `P^T x`: entry `a` of the result is `x[perm[a]]`.
pub fn permute_vector(x: ArrayView1<f64>, perm: &[usize]) -> Result<Array1<f64>> {
    validate_permutation(perm, x.len())?;
    Ok(perm.iter().map(|&i| x[i]).collect())
}

/// `P^T G P`: rows and columns reordered by `perm`, consistently with
/// [`permute_vector`].
pub fn permute_channel(g: &ChannelRealization, perm: &[usize]) -> Result<ChannelRealization> {
    let k = g.k();
    validate_permutation(perm, k)?;
    let reorder = |m: &Array2<f64>| Array2::from_shape_fn((k, k), |(a, b)| m[[perm[a], perm[b]]]);
    Ok(g.with_matrices(reorder(g.gains()), reorder(g.shift())))
}
