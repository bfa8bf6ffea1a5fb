//! Fixpoint iteration over finite lattices.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no fixed point after {0} iterations; the transfer function is not monotone")]
pub struct FixpointError(pub usize);

/// Iterates `f` from `bottom` until two successive values are equal.
///
/// `cap` bounds the number of applications; on a lattice of height `h` a monotone
/// `f` needs at most `h + 1`.
pub fn fix_eq<T: PartialEq>(bottom: T, cap: usize, mut f: impl FnMut(&T) -> T) -> Result<T, FixpointError> {
    let mut x = bottom;
    for _ in 0..cap {
        let y = f(&x);
        if y == x {
            return Ok(x);
        }
        x = y;
    }
    Err(FixpointError(cap))
}

/// Like [`fix_eq`] for transfer functions that can fail.
pub fn try_fix_eq<T: PartialEq, E: From<FixpointError>>(
    bottom: T,
    cap: usize,
    mut f: impl FnMut(&T) -> Result<T, E>,
) -> Result<T, E> {
    let mut x = bottom;
    for _ in 0..cap {
        let y = f(&x)?;
        if y == x {
            return Ok(x);
        }
        x = y;
    }
    Err(FixpointError(cap).into())
}
