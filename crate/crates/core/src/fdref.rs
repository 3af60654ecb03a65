//! Richardson-extrapolated finite-difference references.
//!
//! These routines deliberately avoid the Taylor-jet machinery: they evaluate
//! plain closures at shifted points, so they serve as an independent route for
//! cross-checking analytic derivatives, Christoffel symbols and curvature.

/// Central first derivative with one Richardson step (error O(h^6)).
pub fn d1<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let stencil = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let a = stencil(h);
    let b = stencil(h / 2.0);
    (4.0 * b - a) / 3.0
}

/// Central second derivative with one Richardson step.
pub fn d2<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let stencil = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    let a = stencil(h);
    let b = stencil(h / 2.0);
    (4.0 * b - a) / 3.0
}

/// First partial of a scalar function of a coordinate vector.
pub fn partial1<F: Fn(&[f64]) -> f64>(f: F, u: &[f64], var: usize, h: f64) -> f64 {
    d1(
        |t| {
            let mut q = u.to_vec();
            q[var] = t;
            f(&q)
        },
        u[var],
        h,
    )
}

/// Second partial (possibly mixed) of a scalar function.
pub fn partial2<F: Fn(&[f64]) -> f64 + Copy>(f: F, u: &[f64], v1: usize, v2: usize, h: f64) -> f64 {
    if v1 == v2 {
        d2(
            |t| {
                let mut q = u.to_vec();
                q[v1] = t;
                f(&q)
            },
            u[v1],
            h,
        )
    } else {
        partial1(
            |q: &[f64]| partial1(f, q, v2, h),
            u,
            v1,
            h,
        )
    }
}

/// Christoffel symbols Gamma^k_{ij} of a metric field `g` (row-major d*d) at
/// `x`, by finite differences of the metric.
pub fn christoffel<G: Fn(&[f64]) -> Vec<f64> + Copy>(
    g: G,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    let d = x.len();
    let g0 = g(x);
    let ginv = invert(&g0, d);
    // dg[c][i][j] = d g_ij / d x_c
    let mut dg = vec![0.0; d * d * d];
    for c in 0..d {
        for i in 0..d {
            for j in 0..d {
                dg[(c * d + i) * d + j] =
                    partial1(|q: &[f64]| g(q)[i * d + j], x, c, h);
            }
        }
    }
    let mut gamma = vec![0.0; d * d * d];
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += ginv[k * d + l]
                        * (dg[(i * d + l) * d + j] + dg[(j * d + l) * d + i]
                            - dg[(l * d + i) * d + j]);
                }
                gamma[(k * d + i) * d + j] = 0.5 * acc;
            }
        }
    }
    gamma
}

/// Riemann tensor R^i_{hjk} = d_k Gamma^i_{hj} - d_j Gamma^i_{hk}
/// + Gamma^m_{hj} Gamma^i_{mk} - Gamma^m_{hk} Gamma^i_{mj}
/// (the sign/ordering convention used throughout this crate).
pub fn riemann<G: Fn(&[f64]) -> Vec<f64> + Copy>(g: G, x: &[f64], h: f64) -> Vec<f64> {
    let d = x.len();
    let gamma0 = christoffel(g, x, h);
    // dgamma[c][k][i][j]
    let mut dgamma = vec![0.0; d * d * d * d];
    for c in 0..d {
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    dgamma[((c * d + k) * d + i) * d + j] = partial1(
                        |q: &[f64]| christoffel(g, q, h)[(k * d + i) * d + j],
                        x,
                        c,
                        h,
                    );
                }
            }
        }
    }
    let gm = |k: usize, i: usize, j: usize| gamma0[(k * d + i) * d + j];
    let dgm = |c: usize, k: usize, i: usize, j: usize| dgamma[((c * d + k) * d + i) * d + j];
    let mut r = vec![0.0; d * d * d * d];
    for i in 0..d {
        for hh in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut acc = dgm(k, i, hh, j) - dgm(j, i, hh, k);
                    for m in 0..d {
                        acc += gm(m, hh, j) * gm(i, m, k) - gm(m, hh, k) * gm(i, m, j);
                    }
                    r[((i * d + hh) * d + j) * d + k] = acc;
                }
            }
        }
    }
    r
}

/// Ricci tensor R_ij = R^k_{ijk} under the same convention.
pub fn ricci<G: Fn(&[f64]) -> Vec<f64> + Copy>(g: G, x: &[f64], h: f64) -> Vec<f64> {
    let d = x.len();
    let riem = riemann(g, x, h);
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += riem[((k * d + i) * d + j) * d + k];
            }
            out[i * d + j] = acc;
        }
    }
    out
}

/// Dense inverse for the small matrices used in the reference paths.
pub fn invert(m: &[f64], d: usize) -> Vec<f64> {
    let mat = nalgebra::DMatrix::from_row_slice(d, d, m);
    let inv = mat.try_inverse().expect("reference metric not invertible");
    inv.transpose().as_slice().to_vec()
}
