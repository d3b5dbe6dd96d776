use crate::env::JointAction;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Value given to unavailable actions.
pub const UNAVAILABLE: f64 = -1e9;

/// Replaces unavailable entries with [`UNAVAILABLE`].
pub fn masked_utilities<T: Real>(agent: usize, utilities: &[T], mask: &[bool]) -> Result<Vec<T>> {
    if utilities.len() != mask.len() {
        return Err(Error::shape("masked_utilities", mask.len(), utilities.len()));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMasked(agent));
    }
    let sentinel = T::lit(UNAVAILABLE);
    Ok(utilities.iter().zip(mask).map(|(&u, &m)| if m { u } else { sentinel }).collect())
}

/// Index of the largest available utility; ties go to the lowest index.
pub fn greedy_action<T: Real>(agent: usize, utilities: &[T], mask: &[bool]) -> Result<usize> {
    let mut best: Option<(usize, T)> = None;
    for (j, (&u, &m)) in utilities.iter().zip(mask).enumerate() {
        if m && best.is_none_or(|(_, b)| u > b) {
            best = Some((j, u));
        }
    }
    best.map(|(j, _)| j).ok_or(Error::AllMasked(agent))
}

/// Decentralized greedy joint action: each agent maximizes its own utility.
pub fn igm_argmax<T: Real, U: AsRef<[T]>>(utilities: &[U], masks: &[Vec<bool>]) -> Result<JointAction> {
    if utilities.len() != masks.len() {
        return Err(Error::shape("igm_argmax", masks.len(), utilities.len()));
    }
    utilities
        .iter()
        .zip(masks)
        .enumerate()
        .map(|(i, (u, m))| greedy_action(i, u.as_ref(), m))
        .collect::<Result<Vec<_>>>()
        .map(JointAction)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_lowest_index() {
        let u = vec![vec![0.0, 5.0, 1.0], vec![3.0, 3.0, 3.0]];
        let a = igm_argmax::<f64, _>(&u, &[vec![true; 3], vec![true; 3]]).unwrap();
        assert_eq!(a.0, vec![1, 0]);
    }

    #[test]
    fn forced_single_action() {
        let u = vec![vec![9.0, 5.0, 1.0], vec![3.0, 7.0, 3.0]];
        let masks = vec![vec![false, false, true], vec![true, false, false]];
        assert_eq!(igm_argmax::<f64, _>(&u, &masks).unwrap().0, vec![2, 0]);
    }

    #[test]
    fn masking_uses_sentinel_and_rejects_empty() {
        let m = masked_utilities(0, &[1.0, 2.0, 3.0], &[true, false, false]).unwrap();
        assert_eq!(m, vec![1.0, UNAVAILABLE, UNAVAILABLE]);
        assert!(matches!(masked_utilities(2, &[1.0f64], &[false]), Err(Error::AllMasked(2))));
        assert!(matches!(greedy_action(1, &[1.0f64, 2.0], &[false, false]), Err(Error::AllMasked(1))));
    }
}
