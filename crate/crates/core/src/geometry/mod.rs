//! Point-wise fundamental Lagrange objects: Hessian metric, semispray,
//! canonical N-connection, adapted frames, anholonomy, Sasaki d-metric and
//! the coordinate-basis metric.

mod expansion;
mod trajectory;

pub use expansion::LagrangeExpansion;
pub use trajectory::{el_trajectory, spray_trajectory, Trajectory};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{ExprError, ExpressionAst};

#[derive(Debug, Clone, Error)]
pub enum GeomError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("degenerate Hessian at {point:?}: |det| = {det:e} <= {threshold:e}")]
    Degenerate {
        point: Vec<f64>,
        det: f64,
        threshold: f64,
    },
    #[error("regularity lost along trajectory at parameter {s}")]
    TrajectoryDegenerate { s: f64 },
}

/// Point u = (x, y) on the 2n-dimensional phase domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len(), "base and fiber dimensions differ");
        PhasePoint { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Flat coordinate vector (x1..xn, y1..yn).
    pub fn coords(&self) -> Vec<f64> {
        let mut c = self.x.clone();
        c.extend_from_slice(&self.y);
        c
    }

    pub fn from_coords(c: &[f64]) -> Self {
        let n = c.len() / 2;
        PhasePoint {
            x: c[..n].to_vec(),
            y: c[n..].to_vec(),
        }
    }
}

/// Regularity threshold for a Hessian block: eps * (max |entry|)^n, so the
/// test is scale-aware. `eps` defaults to 1e-10.
pub fn regularity_threshold(g: &DMatrix<f64>, eps: f64) -> f64 {
    let maxn = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    eps * maxn.powi(g.nrows() as i32)
}

/// Hessian (Lagrange) metric block with its inverse and determinant.
#[derive(Debug, Clone)]
pub struct HMetric {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub det: f64,
}

impl HMetric {
    /// Build from a symmetric matrix, enforcing the regularity threshold.
    pub fn new(g: DMatrix<f64>, eps_reg: f64, point: &PhasePoint) -> Result<Self, GeomError> {
        let det = g.determinant();
        let threshold = regularity_threshold(&g, eps_reg);
        if !det.is_finite() || det.abs() <= threshold {
            return Err(GeomError::Degenerate {
                point: point.coords(),
                det,
                threshold,
            });
        }
        let g_inv = g.clone().try_inverse().ok_or(GeomError::Degenerate {
            point: point.coords(),
            det,
            threshold,
        })?;
        Ok(HMetric { g, g_inv, det })
    }
}

/// Semispray coefficients G^a and the canonical N-connection N^a_i.
///
/// `coeffs` is stored with row a (fiber index) and column i (base index).
#[derive(Debug, Clone)]
pub struct NConnection {
    pub spray: Vec<f64>,
    pub coeffs: DMatrix<f64>,
}

/// Adapted frame/coframe pair in the block form
/// e = [[I, N], [0, I]], e_inv = [[I, -N], [0, I]], with the N-block laid out
/// exactly as `NConnection::coeffs`. `eta` carries the signature of the
/// h-metric at the domain center.
#[derive(Debug, Clone)]
pub struct FrameMatrix {
    pub e: DMatrix<f64>,
    pub e_inv: DMatrix<f64>,
    pub eta: Vec<f64>,
}

/// Nonholonomy data: W^a_{ib} = dN^a_i/dy^b and the N-connection curvature
/// Omega^a_{ji} = e_i(N^a_j) - e_j(N^a_i), antisymmetric in (j, i).
#[derive(Debug, Clone)]
pub struct Anholonomy {
    n: usize,
    /// w[a][i][b]
    pub w_lin: Vec<f64>,
    /// omega[a][j][i]
    pub omega: Vec<f64>,
}

impl Anholonomy {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn w(&self, a: usize, i: usize, b: usize) -> f64 {
        self.w_lin[(a * self.n + i) * self.n + b]
    }

    pub fn omega(&self, a: usize, j: usize, i: usize) -> f64 {
        self.omega[(a * self.n + j) * self.n + i]
    }
}

/// Block d-metric: h-block, v-block and the N-connection. In tangent-bundle
/// mode the two blocks coincide bit-identically.
#[derive(Debug, Clone)]
pub struct DMetric {
    pub g_h: HMetric,
    pub g_v: HMetric,
    pub nconn: NConnection,
}

/// g_ij = (1/2) d^2 L / dy^i dy^j with inverse and regularity check.
pub fn hessian_metric(
    ast: &ExpressionAst,
    u: &PhasePoint,
    eps_reg: f64,
) -> Result<HMetric, GeomError> {
    let ex = LagrangeExpansion::new(ast, u, 2, eps_reg)?;
    Ok(ex.metric())
}

/// Semispray coefficients from the Euler-Lagrange rewrite
/// 4 G^j = g^{ij} (d^2L/dy^i dx^k y^k - dL/dx^i).
pub fn spray(ast: &ExpressionAst, u: &PhasePoint, eps_reg: f64) -> Result<Vec<f64>, GeomError> {
    let ex = LagrangeExpansion::new(ast, u, 2, eps_reg)?;
    Ok(ex.spray_values())
}

/// Canonical N-connection N^a_i = dG^a/dy^i together with the spray.
pub fn nconnection(
    ast: &ExpressionAst,
    u: &PhasePoint,
    eps_reg: f64,
) -> Result<NConnection, GeomError> {
    let ex = LagrangeExpansion::new(ast, u, 3, eps_reg)?;
    Ok(ex.nconnection())
}

/// Frame transform pair built from N-connection coefficients; `eta` from the
/// eigenvalue signs of `g_center`.
pub fn adapted_frames(nconn: &NConnection, g_center: &DMatrix<f64>) -> FrameMatrix {
    let n = nconn.coeffs.nrows();
    let mut e = DMatrix::<f64>::identity(2 * n, 2 * n);
    let mut e_inv = DMatrix::<f64>::identity(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            e[(r, n + c)] = nconn.coeffs[(r, c)];
            e_inv[(r, n + c)] = -nconn.coeffs[(r, c)];
        }
    }
    let eta = signature(g_center);
    FrameMatrix { e, e_inv, eta }
}

/// Signature entries (+1/-1) from the eigenvalue signs of a symmetric block.
pub fn signature(g: &DMatrix<f64>) -> Vec<f64> {
    let sym = nalgebra::SymmetricEigen::new(g.clone());
    let mut signs: Vec<f64> = sym
        .eigenvalues
        .iter()
        .map(|&l| if l >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    // canonical order: positive directions first
    signs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    signs
}

/// Nonholonomy coefficients of the canonical N-connection.
pub fn anholonomy(
    ast: &ExpressionAst,
    u: &PhasePoint,
    eps_reg: f64,
) -> Result<Anholonomy, GeomError> {
    let ex = LagrangeExpansion::new(ast, u, 4, eps_reg)?;
    Ok(ex.anholonomy())
}

/// Sasaki-type canonical d-metric: both blocks equal the Hessian metric.
pub fn sasaki_dmetric(
    ast: &ExpressionAst,
    u: &PhasePoint,
    eps_reg: f64,
) -> Result<DMetric, GeomError> {
    let ex = LagrangeExpansion::new(ast, u, 3, eps_reg)?;
    let g_h = ex.metric();
    let g_v = g_h.clone();
    Ok(DMetric {
        g_h,
        g_v,
        nconn: ex.nconnection(),
    })
}

/// Coordinate-basis 2n x 2n metric of a d-metric:
/// [[g + N^T g_v N, N^T g_v], [g_v N, g_v]] in (x, y) block order.
pub fn coordinate_metric(dm: &DMetric) -> DMatrix<f64> {
    let n = dm.g_h.g.nrows();
    let nc = &dm.nconn.coeffs;
    let mut full = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let mut hh = dm.g_h.g[(i, j)];
            for a in 0..n {
                for b in 0..n {
                    hh += nc[(a, i)] * nc[(b, j)] * dm.g_v.g[(a, b)];
                }
            }
            full[(i, j)] = hh;
            let mut hv = 0.0;
            for e in 0..n {
                hv += nc[(e, i)] * dm.g_v.g[(e, j)];
            }
            full[(i, n + j)] = hv;
            full[(n + j, i)] = hv;
            full[(n + i, n + j)] = dm.g_v.g[(i, j)];
        }
    }
    full
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_relative_eq;

    fn pt(x: [f64; 2], y: [f64; 2]) -> PhasePoint {
        PhasePoint::new(x.to_vec(), y.to_vec())
    }

    #[test]
    fn flat_metric_is_identity() {
        let ast = parse("y1^2 + y2^2", 2).unwrap();
        let m = hessian_metric(&ast, &pt([0.3, -0.4], [1.0, 2.0]), 1e-10).unwrap();
        assert_relative_eq!(m.g[(0, 0)], 1.0);
        assert_relative_eq!(m.g[(1, 1)], 1.0);
        assert_relative_eq!(m.g[(0, 1)], 0.0);
    }

    #[test]
    fn product_squares_metric() {
        // L = y1^2 y2^2 at y = (1,1): g = [[1, 2], [2, 1]]
        let ast = parse("y1^2 * y2^2", 2).unwrap();
        let m = hessian_metric(&ast, &pt([0.0, 0.0], [1.0, 1.0]), 1e-10).unwrap();
        assert_relative_eq!(m.g[(0, 0)], 1.0);
        assert_relative_eq!(m.g[(0, 1)], 2.0);
        assert_relative_eq!(m.g[(1, 0)], 2.0);
        assert_relative_eq!(m.g[(1, 1)], 1.0);
    }

    #[test]
    fn indefinite_but_regular_accepted() {
        // L = y1 y2: det g = -1/4, nondegenerate
        let ast = parse("y1*y2", 2).unwrap();
        let m = hessian_metric(&ast, &pt([0.0, 0.0], [0.7, -0.3]), 1e-10).unwrap();
        assert_relative_eq!(m.det, -0.25);
    }

    #[test]
    fn degenerate_hessian_rejected() {
        let ast = parse("y1^2", 2).unwrap();
        assert!(matches!(
            hessian_metric(&ast, &pt([0.0, 0.0], [1.0, 1.0]), 1e-10),
            Err(GeomError::Degenerate { .. })
        ));
    }

    #[test]
    fn spray_vanishes_without_x_dependence() {
        let ast = parse("y1^2 + y2^2 + y1*y2", 2).unwrap();
        let g = spray(&ast, &pt([0.5, -0.2], [1.0, 2.0]), 1e-10).unwrap();
        assert_relative_eq!(g[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(g[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn spray_hand_derived_value() {
        // L = (1 + x1^2)(y1^2 + y2^2) at x = (1, 0), y = (1, 0):
        // g = 2I, bracket = (4 - 2, 0), so G = (1/4, 0).
        let ast = parse("(1 + x1^2)*(y1^2 + y2^2)", 2).unwrap();
        let g = spray(&ast, &pt([1.0, 0.0], [1.0, 0.0]), 1e-10).unwrap();
        assert_relative_eq!(g[0], 0.25, epsilon = 1e-14);
        assert_relative_eq!(g[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn frames_match_block_form() {
        let n = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let nconn = NConnection {
            spray: vec![0.0; 2],
            coeffs: n,
        };
        let frames = adapted_frames(&nconn, &DMatrix::identity(2, 2));
        assert_relative_eq!(frames.e[(0, 2)], 1.0);
        assert_relative_eq!(frames.e[(0, 3)], 2.0);
        assert_relative_eq!(frames.e[(1, 2)], 3.0);
        assert_relative_eq!(frames.e[(1, 3)], 4.0);
        assert_relative_eq!(frames.e_inv[(0, 2)], -1.0);
        assert_relative_eq!(frames.e_inv[(1, 3)], -4.0);
        let prod = &frames.e * &frames.e_inv;
        assert!((prod - DMatrix::<f64>::identity(4, 4)).amax() == 0.0);
    }

    #[test]
    fn coordinate_metric_block_determinant() {
        let ast = parse("(1 + x1^2)*(y1^2 + y2^2)", 2).unwrap();
        let u = pt([0.4, 0.0], [0.8, 0.9]);
        let dm = sasaki_dmetric(&ast, &u, 1e-10).unwrap();
        let full = coordinate_metric(&dm);
        let det = full.determinant();
        assert_relative_eq!(det, dm.g_h.det * dm.g_v.det, epsilon = 1e-12 * det.abs());
        // symmetry
        assert!((full.clone() - full.transpose()).amax() < 1e-15);
    }

    #[test]
    fn coordinate_metric_block_diagonal_when_n_zero() {
        let ast = parse("y1^2 + y2^2", 2).unwrap();
        let u = pt([0.0, 0.0], [1.0, 1.0]);
        let dm = sasaki_dmetric(&ast, &u, 1e-10).unwrap();
        let full = coordinate_metric(&dm);
        assert!((full - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
    }
}
