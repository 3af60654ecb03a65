//! Analytic backend: truncated Taylor expansions of every fundamental object
//! around a phase point.
//!
//! Building the expansion at degree D yields exact coefficients for
//! L (degree D), the Hessian blocks (D-2), the inverse metric (D-2), the
//! semispray (D-2) and the N-connection (D-3). Downstream consumers read
//! values and derivatives without any finite differencing, so this path is
//! the high-precision reference for the grid backend.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::expr::taylor::{poly_mat_inverse, JetSpace, TaylorPoly};
use crate::expr::ExpressionAst;

use super::{
    regularity_threshold, Anholonomy, GeomError, HMetric, NConnection, PhasePoint,
};

pub struct LagrangeExpansion {
    n: usize,
    degree: usize,
    space: Arc<JetSpace>,
    point: PhasePoint,
    /// Lagrangian expansion, exact to `degree`.
    pub l: TaylorPoly,
    /// g[i*n+j], exact to degree-2
    pub g: Vec<TaylorPoly>,
    /// inverse of g in the truncated ring, exact to degree-2
    pub g_inv: Vec<TaylorPoly>,
    /// spray coefficients G^a, exact to degree-2
    pub spray: Vec<TaylorPoly>,
    /// ncoef[a*n+i] = N^a_i, exact to degree-3
    pub ncoef: Vec<TaylorPoly>,
}

impl LagrangeExpansion {
    /// Expand at `u`. `degree` must cover the deepest derivative the caller
    /// will read (2 for the metric, 3 for N, 4 for connection coefficients
    /// and anholonomy, 5 for curvature).
    pub fn new(
        ast: &ExpressionAst,
        u: &PhasePoint,
        degree: usize,
        eps_reg: f64,
    ) -> Result<Self, GeomError> {
        let n = ast.base_dim();
        assert_eq!(u.dim(), n, "point dimension mismatch");
        let space = JetSpace::get(2 * n, degree);
        let coords = u.coords();
        let l = ast.evaluate_taylor(&space, &coords)?;

        // Hessian block g_ij = 1/2 d^2 L / dy^i dy^j
        let mut g = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                g.push(l.derivative(n + i).derivative(n + j).scale(0.5));
            }
        }
        // regularity of the constant part
        let g0 = DMatrix::from_fn(n, n, |i, j| g[i * n + j].value());
        let det = g0.determinant();
        let threshold = regularity_threshold(&g0, eps_reg);
        if !det.is_finite() || det.abs() <= threshold {
            return Err(GeomError::Degenerate {
                point: coords.clone(),
                det,
                threshold,
            });
        }
        let g0_inv = g0.clone().try_inverse().ok_or(GeomError::Degenerate {
            point: coords.clone(),
            det,
            threshold,
        })?;
        let mut g0_inv_flat = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g0_inv_flat[i * n + j] = g0_inv[(i, j)];
            }
        }
        let g_inv = poly_mat_inverse(n, &g, &g0_inv_flat);

        // 4 G^j = g^{ji} (d^2 L / dy^i dx^k * y^k - dL/dx^i)
        let mut bracket = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = TaylorPoly::zero(&space);
            for k in 0..n {
                let yk = TaylorPoly::variable(&space, n + k, coords[n + k]);
                acc = acc.add(&l.derivative(n + i).derivative(k).mul(&yk));
            }
            bracket.push(acc.sub(&l.derivative(i)));
        }
        let mut spray = Vec::with_capacity(n);
        for j in 0..n {
            let mut acc = TaylorPoly::zero(&space);
            for i in 0..n {
                acc = acc.add(&g_inv[j * n + i].mul(&bracket[i]));
            }
            spray.push(acc.scale(0.25));
        }

        // N^a_i = dG^a / dy^i
        let mut ncoef = Vec::with_capacity(n * n);
        for a in 0..n {
            for i in 0..n {
                ncoef.push(spray[a].derivative(n + i));
            }
        }

        Ok(LagrangeExpansion {
            n,
            degree,
            space,
            point: u.clone(),
            l,
            g,
            g_inv,
            spray,
            ncoef,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn point(&self) -> &PhasePoint {
        &self.point
    }

    /// Elongated horizontal derivative e_k = d/dx^k - N^c_k d/dy^c applied to
    /// a polynomial object (result degree drops by one).
    pub fn e_h(&self, k: usize, p: &TaylorPoly) -> TaylorPoly {
        let mut acc = p.derivative(k);
        for c in 0..self.n {
            acc = acc.sub(&self.ncoef[c * self.n + k].mul(&p.derivative(self.n + c)));
        }
        acc
    }

    /// Vertical derivative e_c = d/dy^c.
    pub fn e_v(&self, c: usize, p: &TaylorPoly) -> TaylorPoly {
        p.derivative(self.n + c)
    }

    pub fn metric(&self) -> HMetric {
        let n = self.n;
        let g = DMatrix::from_fn(n, n, |i, j| self.g[i * n + j].value());
        let g_inv = DMatrix::from_fn(n, n, |i, j| self.g_inv[i * n + j].value());
        HMetric {
            det: g.determinant(),
            g,
            g_inv,
        }
    }

    pub fn spray_values(&self) -> Vec<f64> {
        self.spray.iter().map(|p| p.value()).collect()
    }

    pub fn nconnection(&self) -> NConnection {
        let n = self.n;
        NConnection {
            spray: self.spray_values(),
            coeffs: DMatrix::from_fn(n, n, |a, i| self.ncoef[a * n + i].value()),
        }
    }

    /// W^a_{ib} = dN^a_i/dy^b and Omega^a_{ji} = e_i(N^a_j) - e_j(N^a_i).
    pub fn anholonomy(&self) -> Anholonomy {
        let n = self.n;
        let mut w_lin = vec![0.0; n * n * n];
        let mut omega = vec![0.0; n * n * n];
        // e_i(N^a_j) values
        let mut ehn = vec![0.0; n * n * n]; // [a][j][i]
        for a in 0..n {
            for j in 0..n {
                let p = &self.ncoef[a * n + j];
                for b in 0..n {
                    w_lin[(a * n + j) * n + b] = self.e_v(b, p).value();
                }
                for i in 0..n {
                    ehn[(a * n + j) * n + i] = self.e_h(i, p).value();
                }
            }
        }
        for a in 0..n {
            for j in 0..n {
                for i in 0..n {
                    omega[(a * n + j) * n + i] =
                        ehn[(a * n + j) * n + i] - ehn[(a * n + i) * n + j];
                }
            }
        }
        Anholonomy { n, w_lin, omega }
    }
}
