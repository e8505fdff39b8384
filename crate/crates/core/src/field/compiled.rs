//! Fast evaluation form of a [`Hamiltonian`]: for each degree the weighted
//! couplings of every term are folded into one coefficient per monomial
//! `σ_{i1}⋯σ_{ip}` with `i1 ≤ … ≤ ip`, evaluated by nested Horner sums.
//! Storage of the couplings themselves stays unsymmetrized.

use super::{Energy, Hamiltonian};

#[derive(Debug, Clone)]
struct DegreeForm {
    p: usize,
    coefs: Vec<f64>,
}

/// Value-only evaluator with the same polynomial as its source Hamiltonian.
#[derive(Debug, Clone)]
pub struct CompiledField {
    n: usize,
    forms: Vec<DegreeForm>,
}

fn canonical_flat(idx: &mut [usize], n: usize) -> usize {
    idx.sort_unstable();
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

fn collect(dense: &[f64], n: usize, left: usize, start: usize, prefix: usize, out: &mut Vec<f64>) {
    for i in start..n {
        let flat = prefix * n + i;
        if left == 1 {
            out.push(dense[flat]);
        } else {
            collect(dense, n, left - 1, i, flat, out);
        }
    }
}

fn horner(coefs: &[f64], pos: &mut usize, x: &[f64], left: usize, start: usize) -> f64 {
    let mut s = 0.0;
    for i in start..x.len() {
        let inner = if left == 1 {
            let c = coefs[*pos];
            *pos += 1;
            c
        } else {
            horner(coefs, pos, x, left - 1, i)
        };
        s += x[i] * inner;
    }
    s
}

impl CompiledField {
    pub(crate) fn build(h: &Hamiltonian) -> Self {
        let n = h.n();
        let mut degrees: Vec<usize> = h.terms().map(|(p, _, _)| p).collect();
        degrees.sort_unstable();
        degrees.dedup();
        let mut forms = Vec::with_capacity(degrees.len());
        let mut idx = Vec::new();
        for p in degrees {
            let mut dense = vec![0.0; n.pow(p as u32)];
            for (q, w, t) in h.terms() {
                if q != p {
                    continue;
                }
                for (flat, &v) in t.iter().enumerate() {
                    idx.clear();
                    let mut f = flat;
                    for _ in 0..p {
                        idx.push(f % n);
                        f /= n;
                    }
                    dense[canonical_flat(&mut idx, n)] += w * v;
                }
            }
            let mut coefs = Vec::new();
            collect(&dense, n, p, 0, 0, &mut coefs);
            forms.push(DegreeForm { p, coefs });
        }
        Self { n, forms }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        self.forms
            .iter()
            .map(|f| {
                let mut pos = 0;
                horner(&f.coefs, &mut pos, x, f.p, 0)
            })
            .sum()
    }
}

impl Energy for CompiledField {
    fn dim(&self) -> usize {
        self.n
    }
    fn energy(&self, x: &[f64]) -> f64 {
        self.value(x)
    }
}
