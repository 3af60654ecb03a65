//! Truncated multivariate Taylor arithmetic.
//!
//! A [`TaylorPoly`] holds the Taylor coefficients of a smooth function around a
//! base point, truncated at a fixed total degree. Ring operations (add, mul,
//! composition with elementary functions) are exact in the quotient ring, so
//! every retained coefficient equals the true Taylor coefficient up to machine
//! rounding. Partial derivatives of any mixed order up to the truncation
//! degree drop out of the coefficient table with no finite differencing.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Shared index tables for one (number of variables, truncation order) pair.
///
/// Construction enumerates all monomials of total degree <= `order` in graded
/// lexicographic order and precomputes the product pair table and per-variable
/// derivative maps. Spaces are cached globally; cloning an `Arc<JetSpace>` is
/// cheap.
pub struct JetSpace {
    nvars: usize,
    order: usize,
    monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    degree: Vec<u8>,
    /// (i, j, k) with monomial_i * monomial_j = monomial_k, deg_i + deg_j <= order.
    prod_pairs: Vec<(u32, u32, u32)>,
    /// dvar[v][i] = Some((j, m)) when d/dx_v monomial_i = m * monomial_j.
    dvar: Vec<Vec<Option<(usize, f64)>>>,
    /// alpha! for each monomial (product of per-variable factorials).
    alpha_factorial: Vec<f64>,
}

fn enumerate_monomials(nvars: usize, order: usize) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = Vec::new();
    for deg in 0..=order {
        // all compositions of `deg` into nvars parts, lexicographic
        let mut cur = vec![0u8; nvars];
        fn rec(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, pos: usize, left: usize) {
            if pos + 1 == cur.len() {
                cur[pos] = left as u8;
                out.push(cur.clone());
                return;
            }
            for take in (0..=left).rev() {
                cur[pos] = take as u8;
                rec(out, cur, pos + 1, left - take);
            }
        }
        rec(&mut out, &mut cur, 0, deg);
    }
    out
}

impl JetSpace {
    fn build(nvars: usize, order: usize) -> Self {
        assert!(nvars >= 1 && order >= 1);
        let monomials = enumerate_monomials(nvars, order);
        let mut index = HashMap::with_capacity(monomials.len());
        for (i, m) in monomials.iter().enumerate() {
            index.insert(m.clone(), i);
        }
        let degree: Vec<u8> = monomials
            .iter()
            .map(|m| m.iter().map(|&e| e as u32).sum::<u32>() as u8)
            .collect();
        let mut prod_pairs = Vec::new();
        let mut sum = vec![0u8; nvars];
        for i in 0..monomials.len() {
            for j in 0..monomials.len() {
                if degree[i] as usize + degree[j] as usize > order {
                    continue;
                }
                for v in 0..nvars {
                    sum[v] = monomials[i][v] + monomials[j][v];
                }
                let k = index[&sum];
                prod_pairs.push((i as u32, j as u32, k as u32));
            }
        }
        let mut dvar = vec![vec![None; monomials.len()]; nvars];
        for v in 0..nvars {
            for (i, m) in monomials.iter().enumerate() {
                if m[v] > 0 {
                    let mut t = m.clone();
                    t[v] -= 1;
                    dvar[v][i] = Some((index[&t], m[v] as f64));
                }
            }
        }
        let alpha_factorial: Vec<f64> = monomials
            .iter()
            .map(|m| {
                m.iter()
                    .map(|&e| (1..=e as u64).product::<u64>() as f64)
                    .product()
            })
            .collect();
        JetSpace {
            nvars,
            order,
            monomials,
            index,
            degree,
            prod_pairs,
            dvar,
            alpha_factorial,
        }
    }

    /// Fetch the cached space for `nvars` variables truncated at `order`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monomials
    }

    pub fn monomial_index(&self, alpha: &[u8]) -> Option<usize> {
        self.index.get(alpha).copied()
    }

    pub fn alpha_factorial(&self, idx: usize) -> f64 {
        self.alpha_factorial[idx]
    }
}

/// Truncated Taylor expansion of a scalar function around a base point.
///
/// `c[k]` is the coefficient of `space.monomials()[k]` in the expansion in the
/// offset variables; the constant term `c[0]` is the function value.
#[derive(Clone)]
pub struct TaylorPoly {
    space: Arc<JetSpace>,
    c: Vec<f64>,
}

impl TaylorPoly {
    pub fn zero(space: &Arc<JetSpace>) -> Self {
        TaylorPoly {
            space: space.clone(),
            c: vec![0.0; space.len()],
        }
    }

    pub fn constant(space: &Arc<JetSpace>, v: f64) -> Self {
        let mut p = Self::zero(space);
        p.c[0] = v;
        p
    }

    /// The expansion of coordinate `var` around base value `base`: base + dx_var.
    pub fn variable(space: &Arc<JetSpace>, var: usize, base: f64) -> Self {
        let mut p = Self::zero(space);
        p.c[0] = base;
        let mut alpha = vec![0u8; space.nvars()];
        alpha[var] = 1;
        let idx = space.monomial_index(&alpha).expect("order >= 1");
        p.c[idx] = 1.0;
        p
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Mixed partial derivative value for the multi-index `alpha`.
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        let idx = self
            .space
            .monomial_index(alpha)
            .expect("multi-index outside truncation order");
        self.c[idx] * self.space.alpha_factorial(idx)
    }

    pub fn add(&self, o: &TaylorPoly) -> TaylorPoly {
        let mut r = self.clone();
        for (a, b) in r.c.iter_mut().zip(&o.c) {
            *a += *b;
        }
        r
    }

    pub fn sub(&self, o: &TaylorPoly) -> TaylorPoly {
        let mut r = self.clone();
        for (a, b) in r.c.iter_mut().zip(&o.c) {
            *a -= *b;
        }
        r
    }

    pub fn neg(&self) -> TaylorPoly {
        let mut r = self.clone();
        for a in r.c.iter_mut() {
            *a = -*a;
        }
        r
    }

    pub fn scale(&self, s: f64) -> TaylorPoly {
        let mut r = self.clone();
        for a in r.c.iter_mut() {
            *a *= s;
        }
        r
    }

    pub fn mul(&self, o: &TaylorPoly) -> TaylorPoly {
        let mut r = TaylorPoly::zero(&self.space);
        for &(i, j, k) in &self.space.prod_pairs {
            r.c[k as usize] += self.c[i as usize] * o.c[j as usize];
        }
        r
    }

    /// Derivative with respect to variable `var` (degree drops by one; the
    /// result is exact for coefficients up to order-1).
    pub fn derivative(&self, var: usize) -> TaylorPoly {
        let mut r = TaylorPoly::zero(&self.space);
        for (i, slot) in self.space.dvar[var].iter().enumerate() {
            if let Some((j, m)) = slot {
                r.c[*j] += self.c[i] * m;
            }
        }
        r
    }

    /// Compose univariate Taylor coefficients `us` (us[k] = f^(k)(g0)/k!) with
    /// the zero-constant part of `self`. Horner in the truncated ring.
    pub fn compose(&self, us: &[f64]) -> TaylorPoly {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut r = TaylorPoly::constant(&self.space, us[us.len() - 1]);
        for k in (0..us.len() - 1).rev() {
            r = r.mul(&h);
            r.c[0] += us[k];
        }
        r
    }

    /// Integer power by repeated truncated multiplication.
    pub fn powi(&self, mut e: u64) -> TaylorPoly {
        let mut base = self.clone();
        let mut acc = TaylorPoly::constant(&self.space, 1.0);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }
}

/// Univariate derivative ladders f^(k)(x0)/k! for the supported elementary
/// functions. `order` is the truncation order of the surrounding space.
pub mod ladders {
    /// exp
    pub fn exp(x0: f64, order: usize) -> Vec<f64> {
        let e = x0.exp();
        let mut v = vec![e; order + 1];
        let mut fact = 1.0;
        for (k, item) in v.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *item = e / fact;
        }
        v
    }

    /// natural log; requires x0 > 0 (checked by the caller)
    pub fn log(x0: f64, order: usize) -> Vec<f64> {
        let mut v = vec![0.0; order + 1];
        v[0] = x0.ln();
        let mut p = 1.0;
        for (k, item) in v.iter_mut().enumerate().skip(1) {
            p *= x0;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            *item = sign / (k as f64 * p);
        }
        v
    }

    /// x^p for non-integer p; requires x0 > 0
    pub fn powf(x0: f64, p: f64, order: usize) -> Vec<f64> {
        let mut v = vec![0.0; order + 1];
        v[0] = x0.powf(p);
        for k in 1..=order {
            v[k] = v[k - 1] * (p - (k as f64 - 1.0)) / (k as f64 * x0);
        }
        v
    }

    pub fn sqrt(x0: f64, order: usize) -> Vec<f64> {
        powf(x0, 0.5, order)
    }

    /// 1/x; requires x0 != 0
    pub fn recip(x0: f64, order: usize) -> Vec<f64> {
        let mut v = vec![0.0; order + 1];
        let r = 1.0 / x0;
        let mut cur = r;
        for item in v.iter_mut() {
            *item = cur;
            cur *= -r;
        }
        v
    }

    pub fn sin(x0: f64, order: usize) -> Vec<f64> {
        let cycle = [x0.sin(), x0.cos(), -x0.sin(), -x0.cos()];
        let mut fact = 1.0;
        let mut v = vec![0.0; order + 1];
        for (k, item) in v.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *item = cycle[k % 4] / fact;
        }
        v
    }

    pub fn cos(x0: f64, order: usize) -> Vec<f64> {
        let cycle = [x0.cos(), -x0.sin(), -x0.cos(), x0.sin()];
        let mut fact = 1.0;
        let mut v = vec![0.0; order + 1];
        for (k, item) in v.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *item = cycle[k % 4] / fact;
        }
        v
    }

    pub fn sinh(x0: f64, order: usize) -> Vec<f64> {
        let cycle = [x0.sinh(), x0.cosh()];
        let mut fact = 1.0;
        let mut v = vec![0.0; order + 1];
        for (k, item) in v.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *item = cycle[k % 2] / fact;
        }
        v
    }

    pub fn cosh(x0: f64, order: usize) -> Vec<f64> {
        let cycle = [x0.cosh(), x0.sinh()];
        let mut fact = 1.0;
        let mut v = vec![0.0; order + 1];
        for (k, item) in v.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *item = cycle[k % 2] / fact;
        }
        v
    }

    /// tan via the Riccati recurrence t' = 1 + t^2
    pub fn tan(x0: f64, order: usize) -> Vec<f64> {
        let mut t = vec![0.0; order + 1];
        t[0] = x0.tan();
        for k in 0..order {
            let mut conv = 0.0;
            for i in 0..=k {
                conv += t[i] * t[k - i];
            }
            let src = if k == 0 { 1.0 } else { 0.0 };
            t[k + 1] = (src + conv) / (k as f64 + 1.0);
        }
        t
    }

    /// tanh via t' = 1 - t^2
    pub fn tanh(x0: f64, order: usize) -> Vec<f64> {
        let mut t = vec![0.0; order + 1];
        t[0] = x0.tanh();
        for k in 0..order {
            let mut conv = 0.0;
            for i in 0..=k {
                conv += t[i] * t[k - i];
            }
            let src = if k == 0 { 1.0 } else { 0.0 };
            t[k + 1] = (src - conv) / (k as f64 + 1.0);
        }
        t
    }
}

/// Invert an n x n matrix of Taylor polynomials whose constant part is the
/// invertible matrix `const_inv`^-1. Uses the Neumann series around the
/// constant part, which terminates exactly in the truncated ring.
pub fn poly_mat_inverse(n: usize, mat: &[TaylorPoly], const_inv: &[f64]) -> Vec<TaylorPoly> {
    let space = mat[0].space().clone();
    let order = space.order();
    // E = A0^-1 * A - I  (no constant term)
    let mut e = vec![TaylorPoly::zero(&space); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = TaylorPoly::zero(&space);
            for k in 0..n {
                acc = acc.add(&mat[k * n + j].scale(const_inv[i * n + k]));
            }
            if i == j {
                acc.c[0] -= 1.0;
            }
            e[i * n + j] = acc;
        }
    }
    // inv = (sum_k (-E)^k) * A0^-1
    let mut series = vec![TaylorPoly::zero(&space); n * n];
    for i in 0..n {
        series[i * n + i] = TaylorPoly::constant(&space, 1.0);
    }
    let mut power = series.clone();
    for _ in 1..=order {
        // power <- -E * power
        let mut next = vec![TaylorPoly::zero(&space); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = TaylorPoly::zero(&space);
                for k in 0..n {
                    acc = acc.add(&e[i * n + k].mul(&power[k * n + j]));
                }
                next[i * n + j] = acc.neg();
            }
        }
        power = next;
        for (s, p) in series.iter_mut().zip(&power) {
            *s = s.add(p);
        }
    }
    let mut inv = vec![TaylorPoly::zero(&space); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = TaylorPoly::zero(&space);
            for k in 0..n {
                acc = acc.add(&series[i * n + k].scale(const_inv[k * n + j]));
            }
            inv[i * n + j] = acc;
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_of_variables_has_unit_mixed_coefficient() {
        let space = JetSpace::get(2, 3);
        let x = TaylorPoly::variable(&space, 0, 2.0);
        let y = TaylorPoly::variable(&space, 1, -1.0);
        let p = x.mul(&y);
        assert_relative_eq!(p.value(), -2.0);
        assert_relative_eq!(p.partial(&[1, 1]), 1.0);
        assert_relative_eq!(p.partial(&[1, 0]), -1.0);
        assert_relative_eq!(p.partial(&[0, 1]), 2.0);
        assert_relative_eq!(p.partial(&[2, 0]), 0.0);
    }

    #[test]
    fn exp_ladder_matches_series() {
        let space = JetSpace::get(1, 5);
        let x = TaylorPoly::variable(&space, 0, 0.0);
        let e = x.compose(&ladders::exp(0.0, 5));
        for k in 0..=5u8 {
            let fact: f64 = (1..=k as u64).product::<u64>() as f64;
            assert_relative_eq!(e.partial(&[k]), 1.0, epsilon = 1e-12);
            assert_relative_eq!(e.coeffs()[space.monomial_index(&[k]).unwrap()], 1.0 / fact);
        }
    }

    #[test]
    fn neumann_inverse_is_exact_in_ring() {
        let space = JetSpace::get(2, 4);
        let x = TaylorPoly::variable(&space, 0, 0.3);
        let y = TaylorPoly::variable(&space, 1, -0.2);
        // A = [[1 + x^2, x*y], [x*y, 2 + y]]
        let a = vec![
            x.mul(&x).add(&TaylorPoly::constant(&space, 1.0)),
            x.mul(&y),
            x.mul(&y),
            y.add(&TaylorPoly::constant(&space, 2.0)),
        ];
        let a0 = [a[0].value(), a[1].value(), a[2].value(), a[3].value()];
        let det = a0[0] * a0[3] - a0[1] * a0[2];
        let a0_inv = [a0[3] / det, -a0[1] / det, -a0[2] / det, a0[0] / det];
        let inv = poly_mat_inverse(2, &a, &a0_inv);
        // A * inv == I in the truncated ring
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = TaylorPoly::zero(&space);
                for k in 0..2 {
                    acc = acc.add(&a[i * 2 + k].mul(&inv[k * 2 + j]));
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                for (m, c) in acc.coeffs().iter().enumerate() {
                    let want = if m == 0 { expect } else { 0.0 };
                    assert_relative_eq!(*c, want, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn tan_ladder_matches_closed_form() {
        let us = ladders::tan(0.0, 5);
        // tan x = x + x^3/3 + 2x^5/15
        assert_relative_eq!(us[0], 0.0);
        assert_relative_eq!(us[1], 1.0);
        assert_relative_eq!(us[2], 0.0);
        assert_relative_eq!(us[3], 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(us[5], 2.0 / 15.0, epsilon = 1e-14);
    }
}
