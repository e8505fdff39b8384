//! Iterated contraction of a dense order-p tensor against per-slot vectors.

use std::borrow::Cow;

#[derive(Clone, Copy)]
pub(crate) enum Slot<'a> {
    Vec(&'a [f64]),
    Free,
}

/// `Σ_{i_1..i_p} T[i_1..i_p] Π_k v_k[i_k]` where `slots[k]` supplies `v_k`.
/// With one [`Slot::Free`] the result is the length-`n` vector indexed by that
/// slot; otherwise a single scalar. Slots are contracted from the last
/// (fastest) index inwards.
pub(crate) fn contract(t: &[f64], n: usize, slots: &[Slot]) -> Vec<f64> {
    let p = slots.len();
    debug_assert_eq!(t.len(), n.pow(p as u32));
    let mut width = 1usize;
    let mut cur: Cow<[f64]> = Cow::Borrowed(t);
    for k in (0..p).rev() {
        let rows = n.pow(k as u32);
        match slots[k] {
            Slot::Free => {
                debug_assert_eq!(width, 1, "at most one free slot");
                // (rows, n, 1) and (rows, width = n) share a layout
                width = n;
            }
            Slot::Vec(v) => {
                let mut next = vec![0.0; rows * width];
                if width == 1 {
                    for (r, out) in next.iter_mut().enumerate() {
                        let row = &cur[r * n..(r + 1) * n];
                        *out = row.iter().zip(v).map(|(a, b)| a * b).sum();
                    }
                } else {
                    for r in 0..rows {
                        let out = &mut next[r * width..(r + 1) * width];
                        let base = r * n * width;
                        for (i, &vi) in v.iter().enumerate() {
                            let src = &cur[base + i * width..base + (i + 1) * width];
                            for (o, s) in out.iter_mut().zip(src) {
                                *o += vi * s;
                            }
                        }
                    }
                }
                cur = Cow::Owned(next);
            }
        }
    }
    cur.into_owned()
}

/// Sum of [`contract`] over every injective placement of `specials` into the
/// `p` slots, with `sigma` in the remaining slots. This is the k-th
/// directional derivative of `σ ↦ ⟨T, σ^{⊗p}⟩` (with a free slot giving the
/// gradient of the remaining form). Returns zeros when `specials.len() > p`.
pub(crate) fn placements_sum(t: &[f64], n: usize, p: usize, sigma: &[f64], specials: &[Slot]) -> Vec<f64> {
    let out_len = if specials.iter().any(|s| matches!(s, Slot::Free)) {
        n
    } else {
        1
    };
    let mut acc = vec![0.0; out_len];
    if specials.len() > p {
        return acc;
    }
    let mut slots: Vec<Slot> = vec![Slot::Vec(sigma); p];
    let mut used = vec![false; p];
    place(t, n, sigma, specials, 0, &mut slots, &mut used, &mut acc);
    acc
}

#[allow(clippy::too_many_arguments)]
fn place<'a>(
    t: &[f64],
    n: usize,
    sigma: &'a [f64],
    specials: &[Slot<'a>],
    next: usize,
    slots: &mut Vec<Slot<'a>>,
    used: &mut Vec<bool>,
    acc: &mut [f64],
) {
    if next == specials.len() {
        let v = contract(t, n, slots);
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += b;
        }
        return;
    }
    for pos in 0..slots.len() {
        if used[pos] {
            continue;
        }
        used[pos] = true;
        slots[pos] = specials[next];
        place(t, n, sigma, specials, next + 1, slots, used, acc);
        slots[pos] = Slot::Vec(sigma);
        used[pos] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_contractions() {
        // T = [[1, 2], [3, 4]]: T[i][j] with j fastest
        let t = [1.0, 2.0, 3.0, 4.0];
        let a = [1.0, 10.0];
        let b = [100.0, 1000.0];
        // a^T T b
        let v = contract(&t, 2, &[Slot::Vec(&a), Slot::Vec(&b)]);
        assert_eq!(v, vec![1.0 * 100.0 + 2000.0 + 10.0 * 300.0 + 10.0 * 4000.0]);
        // T b
        let v = contract(&t, 2, &[Slot::Free, Slot::Vec(&b)]);
        assert_eq!(v, vec![2100.0, 4300.0]);
        // a^T T
        let v = contract(&t, 2, &[Slot::Vec(&a), Slot::Free]);
        assert_eq!(v, vec![31.0, 42.0]);
    }

    #[test]
    fn order_three_against_brute_force() {
        let n = 3;
        let t: Vec<f64> = (0..27).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = [0.3, -1.2, 0.8];
        let y = [1.1, 0.4, -0.5];
        let z = [-0.7, 0.2, 0.9];
        let mut brute = 0.0;
        let mut brute_free = [0.0; 3];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let e = t[(i * n + j) * n + k];
                    brute += e * x[i] * y[j] * z[k];
                    brute_free[j] += e * x[i] * z[k];
                }
            }
        }
        let v = contract(&t, n, &[Slot::Vec(&x), Slot::Vec(&y), Slot::Vec(&z)]);
        assert!((v[0] - brute).abs() < 1e-12);
        let w = contract(&t, n, &[Slot::Vec(&x), Slot::Free, Slot::Vec(&z)]);
        for (a, b) in w.iter().zip(&brute_free) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_specials_is_zero() {
        let t = [2.0, 3.0];
        let u = [1.0, 1.0];
        let v = placements_sum(&t, 2, 1, &u, &[Slot::Vec(&u), Slot::Vec(&u)]);
        assert_eq!(v, vec![0.0]);
    }
}
