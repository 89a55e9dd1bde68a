use alloc::vec;
use alloc::vec::Vec;

use super::ArchSpace;
use crate::error::{ensure_len, Result};

/// Multilinear extension of a table:
/// `sum_c table[c] * prod_d alpha_d[c_d]`, with `alpha` given as the
/// concatenated per-dimension vectors. At any one-hot vertex this is exactly
/// the table entry of that config.
pub fn multilinear_eval(space: &ArchSpace, table: &[f64], alpha: &[f64]) -> Result<f64> {
    Ok(contract(space, table, alpha, false)?.0)
}

/// Value and `d value / d alpha` (same layout as `alpha`).
pub fn multilinear_eval_with_grad(space: &ArchSpace, table: &[f64], alpha: &[f64]) -> Result<(f64, Vec<f64>)> {
    contract(space, table, alpha, true)
}

fn contract(space: &ArchSpace, table: &[f64], alpha: &[f64], want_grad: bool) -> Result<(f64, Vec<f64>)> {
    ensure_len("multilinear table", table.len(), space.total_configs())?;
    ensure_len("multilinear alpha", alpha.len(), space.encoding_len())?;
    let dims = space.dims();
    let choices = space.choices();
    let offsets = space.offsets();
    let mut grad = if want_grad { vec![0.0; alpha.len()] } else { Vec::new() };

    let mut digits = vec![0usize; dims];
    // prefix[d] = prod_{d' < d} alpha_{d'}[c_{d'}]
    let mut prefix = vec![1.0; dims + 1];
    let mut suffix = vec![1.0; dims + 1];
    let mut value = 0.0;
    for &t in table {
        for d in 0..dims {
            prefix[d + 1] = prefix[d] * alpha[offsets[d] + digits[d]];
        }
        value += t * prefix[dims];
        if want_grad && t != 0.0 {
            for d in (0..dims).rev() {
                suffix[d] = suffix[d + 1] * alpha[offsets[d] + digits[d]];
            }
            for d in 0..dims {
                grad[offsets[d] + digits[d]] += t * prefix[d] * suffix[d + 1];
            }
        }
        // advance mixed-radix counter, last dimension fastest
        for d in (0..dims).rev() {
            digits[d] += 1;
            if digits[d] < choices[d] {
                break;
            }
            digits[d] = 0;
        }
    }
    Ok((value, grad))
}
