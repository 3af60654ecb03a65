//! Canonical d-connection, Levi-Civita connection, torsion, distortion,
//! curvature, Ricci and Einstein tensors, with cross-validation between the
//! two connections.

pub mod formulas;

pub use formulas::{
    canonical_dconn, christoffel, compatibility_residual, curvature_blocks, einstein_blocks,
    lc_ricci_from, ricci_blocks, scalar_curvatures, ConnDerivs, CurvatureBlocks, DConnTables,
    DMetricData, EinsteinBlocks, RicciData, Ring,
};

use std::sync::Arc;

use crate::expr::taylor::{poly_mat_inverse, JetSpace, TaylorPoly};
use crate::expr::ExpressionAst;
use crate::geometry::{GeomError, LagrangeExpansion, PhasePoint};

use formulas::{idx2, idx3, idx4};

/// Canonical d-connection coefficient tables over f64.
pub type DConnection = DConnTables<f64>;

/// Levi-Civita Christoffel table of the full 2n x 2n coordinate metric,
/// stored [upper][lower1][lower2].
#[derive(Debug, Clone)]
pub struct Christoffel {
    pub dim: usize,
    pub gamma: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, g: usize, a: usize, b: usize) -> f64 {
        self.gamma[idx3(self.dim, g, a, b)]
    }
}

/// The five nontrivial d-torsion blocks.
#[derive(Debug, Clone)]
pub struct Torsion {
    pub n: usize,
    /// T^i_{jk} = L^i_jk - L^i_kj
    pub t_hjk: Vec<f64>,
    /// T^i_{ja} = C^i_ja
    pub t_hja: Vec<f64>,
    /// T^a_{ji} = Omega^a_{ji}
    pub t_vji: Vec<f64>,
    /// T^a_{bi} = dN^a_i/dy^b - L^a_bi
    pub t_vbi: Vec<f64>,
    /// T^a_{bc} = C^a_bc - C^a_cb
    pub t_vbc: Vec<f64>,
}

/// Distortion Z with the Levi-Civita connection: LC (in the adapted frame)
/// = d-connection + Z, componentwise. Blocks are stored by slot
/// (upper type, differentiated index type, direction type); the pure slots
/// Z^i_jk and Z^a_bc vanish identically.
#[derive(Debug, Clone)]
pub struct Distortion {
    pub n: usize,
    /// Z^a_{jk} (upper v, lower h h)
    pub z_v_jk: Vec<f64>,
    /// Z^i_{bk} (upper h, differentiated v, direction h)
    pub z_h_bk: Vec<f64>,
    /// Z^i_{jb} (upper h, differentiated h, direction v)
    pub z_h_jb: Vec<f64>,
    /// Z^a_{jb} (upper v, differentiated h, direction v)
    pub z_v_jb: Vec<f64>,
    /// Z^i_{ab} (upper h, lower v v)
    pub z_h_ab: Vec<f64>,
    /// q^{ih}_{jk} = 1/2 (d^i_j d^h_k - g_jk g^{ih})
    pub q_h: Vec<f64>,
    /// +q^{ab}_{cd} = 1/2 (d^a_c d^b_d + g_cd g^{ab})
    pub q_plus: Vec<f64>,
    /// -q^{ab}_{cd} = 1/2 (d^a_c d^b_d - g_cd g^{ab})
    pub q_minus: Vec<f64>,
    /// Xi^c_{aj} = L^c_{aj} - e_a(N^c_j)
    pub xi: Vec<f64>,
}

/// Ricci blocks with scalars; see [`RicciData`] for the contraction rules.
#[derive(Debug, Clone)]
pub struct RicciBlocks {
    pub data: RicciData,
    pub scalar_h: f64,
    pub scalar_v: f64,
    pub scalar: f64,
}

/// Everything the appendix formulas produce at one point on the analytic
/// path: the d-metric data, canonical d-connection, anholonomy, torsion,
/// curvature, Ricci blocks, the coordinate-basis Levi-Civita data and the
/// distortion tensor.
pub struct AnalyticDGeometry {
    pub n: usize,
    pub data: DMetricData<f64>,
    pub omega: Vec<f64>,
    pub conn: DConnection,
    pub torsion: Torsion,
    pub curvature: CurvatureBlocks,
    pub ricci: RicciBlocks,
    pub einstein: EinsteinBlocks,
    pub compat_residual: f64,
    /// coordinate metric (2n x 2n, row-major) and inverse
    pub coord_metric: Vec<f64>,
    pub coord_metric_inv: Vec<f64>,
    pub lc: Christoffel,
    /// coordinate-basis LC Ricci (2n x 2n) and scalar
    pub lc_ricci: Vec<f64>,
    pub lc_scalar: f64,
    pub distortion: Distortion,
}

/// D-metric data over Taylor polynomials, tangent-bundle mode (g_v = g_h).
pub fn dmetric_poly(ex: &LagrangeExpansion) -> DMetricData<TaylorPoly> {
    let n = ex.dim();
    let gh = ex.g.clone();
    let gh_inv = ex.g_inv.clone();
    let mut eh_gh = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                eh_gh.push(ex.e_h(k, &ex.g[idx2(n, i, j)]));
            }
        }
    }
    let mut ev_gh = Vec::with_capacity(n * n * n);
    for c in 0..n {
        for i in 0..n {
            for j in 0..n {
                ev_gh.push(ex.e_v(c, &ex.g[idx2(n, i, j)]));
            }
        }
    }
    let mut dx_n = Vec::with_capacity(n * n * n);
    let mut dy_n = Vec::with_capacity(n * n * n);
    for a in 0..n {
        for i in 0..n {
            for k in 0..n {
                dx_n.push(ex.ncoef[idx2(n, a, i)].derivative(k));
            }
            for b in 0..n {
                dy_n.push(ex.ncoef[idx2(n, a, i)].derivative(n + b));
            }
        }
    }
    DMetricData {
        n,
        gv: gh.clone(),
        gv_inv: gh_inv.clone(),
        gh,
        gh_inv,
        ncoef: ex.ncoef.clone(),
        eh_gv: eh_gh.clone(),
        ev_gv: ev_gh.clone(),
        eh_gh,
        ev_gh,
        dx_n,
        dy_n,
    }
}

/// Extract point values from polynomial d-metric data.
pub fn dmetric_values(d: &DMetricData<TaylorPoly>) -> DMetricData<f64> {
    let val = |v: &Vec<TaylorPoly>| v.iter().map(|p| p.value()).collect::<Vec<f64>>();
    DMetricData {
        n: d.n,
        gh: val(&d.gh),
        gh_inv: val(&d.gh_inv),
        gv: val(&d.gv),
        gv_inv: val(&d.gv_inv),
        ncoef: val(&d.ncoef),
        eh_gh: val(&d.eh_gh),
        ev_gh: val(&d.ev_gh),
        eh_gv: val(&d.eh_gv),
        ev_gv: val(&d.ev_gv),
        dx_n: val(&d.dx_n),
        dy_n: val(&d.dy_n),
    }
}

fn conn_values(c: &DConnTables<TaylorPoly>) -> DConnection {
    let val = |v: &Vec<TaylorPoly>| v.iter().map(|p| p.value()).collect::<Vec<f64>>();
    DConnTables {
        n: c.n,
        l_h: val(&c.l_h),
        l_v: val(&c.l_v),
        c_h: val(&c.c_h),
        c_v: val(&c.c_v),
    }
}

/// e-frame derivatives of polynomial connection tables, as point values.
pub fn conn_derivs_poly(ex: &LagrangeExpansion, conn: &DConnTables<TaylorPoly>) -> ConnDerivs {
    let n = conn.n;
    let mut der = ConnDerivs::zeros(n);
    for m in 0..n {
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let i = idx3(n, a, b, c);
                    let o = idx4(n, m, a, b, c);
                    der.eh_lh[o] = ex.e_h(m, &conn.l_h[i]).value();
                    der.ev_lh[o] = ex.e_v(m, &conn.l_h[i]).value();
                    der.eh_lv[o] = ex.e_h(m, &conn.l_v[i]).value();
                    der.ev_lv[o] = ex.e_v(m, &conn.l_v[i]).value();
                    der.eh_ch[o] = ex.e_h(m, &conn.c_h[i]).value();
                    der.ev_ch[o] = ex.e_v(m, &conn.c_h[i]).value();
                    der.eh_cv[o] = ex.e_h(m, &conn.c_v[i]).value();
                    der.ev_cv[o] = ex.e_v(m, &conn.c_v[i]).value();
                }
            }
        }
    }
    der
}

/// Canonical d-connection of the Lagrange d-metric at a point.
pub fn canonical_dconnection(
    ast: &ExpressionAst,
    u: &PhasePoint,
    eps_reg: f64,
) -> Result<DConnection, GeomError> {
    let ex = LagrangeExpansion::new(ast, u, 4, eps_reg)?;
    let data = dmetric_poly(&ex);
    Ok(conn_values(&canonical_dconn(&data)))
}

/// D-torsion blocks of a connection given anholonomy data.
pub fn d_torsion(conn: &DConnection, omega: &[f64], dy_n: &[f64]) -> Torsion {
    let n = conn.n;
    let mut t_hjk = vec![0.0; n * n * n];
    let mut t_vbc = vec![0.0; n * n * n];
    let mut t_vbi = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                t_hjk[idx3(n, a, b, c)] =
                    conn.l_h[idx3(n, a, b, c)] - conn.l_h[idx3(n, a, c, b)];
                t_vbc[idx3(n, a, b, c)] =
                    conn.c_v[idx3(n, a, b, c)] - conn.c_v[idx3(n, a, c, b)];
                t_vbi[idx3(n, a, b, c)] = dy_n[idx3(n, a, c, b)] - conn.l_v[idx3(n, a, b, c)];
            }
        }
    }
    Torsion {
        n,
        t_hjk,
        t_hja: conn.c_h.clone(),
        t_vji: omega.to_vec(),
        t_vbi,
        t_vbc,
    }
}

/// Distortion tensor from the d-metric data and canonical d-connection.
/// The closed forms below follow from the Koszul formula for the LC
/// connection expressed in the adapted frame; the identity
/// `lc_adapted = embed(conn) + embed(distortion)` pins them numerically.
pub fn distortion(d: &DMetricData<f64>, conn: &DConnection, omega: &[f64]) -> Distortion {
    let n = d.n;
    let mut xi = vec![0.0; n * n * n];
    for c in 0..n {
        for a in 0..n {
            for j in 0..n {
                xi[idx3(n, c, a, j)] = conn.l_v[idx3(n, c, a, j)] - d.dy_n[idx3(n, c, j, a)];
            }
        }
    }

    let mut z_v_jk = vec![0.0; n * n * n];
    let mut z_h_bk = vec![0.0; n * n * n];
    let mut z_h_jb = vec![0.0; n * n * n];
    let mut z_v_jb = vec![0.0; n * n * n];
    let mut z_h_ab = vec![0.0; n * n * n];

    for a in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.5 * omega[idx3(n, a, k, j)];
                for b in 0..n {
                    acc -= 0.5 * d.gv_inv[idx2(n, a, b)] * d.ev_gh[idx3(n, b, j, k)];
                }
                z_v_jk[idx3(n, a, j, k)] = acc;
            }
        }
    }
    for i in 0..n {
        for b in 0..n {
            for k in 0..n {
                let mut acc = conn.c_h[idx3(n, i, k, b)];
                for l in 0..n {
                    for a in 0..n {
                        acc += 0.5
                            * d.gh_inv[idx2(n, i, l)]
                            * d.gv[idx2(n, a, b)]
                            * omega[idx3(n, a, l, k)];
                    }
                }
                z_h_bk[idx3(n, i, b, k)] = acc;
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for b in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    for a in 0..n {
                        acc -= 0.5
                            * d.gh_inv[idx2(n, i, l)]
                            * d.gv[idx2(n, a, b)]
                            * omega[idx3(n, a, j, l)];
                    }
                }
                z_h_jb[idx3(n, i, j, b)] = acc;
            }
        }
    }
    for a in 0..n {
        for j in 0..n {
            for b in 0..n {
                z_v_jb[idx3(n, a, j, b)] = xi[idx3(n, a, b, j)];
            }
        }
    }
    for i in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    for c in 0..n {
                        acc -= 0.5
                            * d.gh_inv[idx2(n, i, l)]
                            * (d.gv[idx2(n, c, b)] * xi[idx3(n, c, a, l)]
                                + d.gv[idx2(n, c, a)] * xi[idx3(n, c, b, l)]);
                    }
                }
                z_h_ab[idx3(n, i, a, b)] = acc;
            }
        }
    }

    // intermediates of the printed component formulas
    let mut q_h = vec![0.0; n * n * n * n];
    let mut q_plus = vec![0.0; n * n * n * n];
    let mut q_minus = vec![0.0; n * n * n * n];
    for i in 0..n {
        for h in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let delta = if i == j && h == k { 1.0 } else { 0.0 };
                    q_h[idx4(n, i, h, j, k)] =
                        0.5 * (delta - d.gh[idx2(n, j, k)] * d.gh_inv[idx2(n, i, h)]);
                    let gg = d.gv[idx2(n, j, k)] * d.gv_inv[idx2(n, i, h)];
                    q_plus[idx4(n, i, h, j, k)] = 0.5 * (delta + gg);
                    q_minus[idx4(n, i, h, j, k)] = 0.5 * (delta - gg);
                }
            }
        }
    }

    Distortion {
        n,
        z_v_jk,
        z_h_bk,
        z_h_jb,
        z_v_jb,
        z_h_ab,
        q_h,
        q_plus,
        q_minus,
        xi,
    }
}

/// Embed the four d-connection families into the full (2n)^3 cube
/// [upper][differentiated][direction]; mixed-type slots are zero.
pub fn embed_dconnection(conn: &DConnection) -> Vec<f64> {
    let n = conn.n;
    let d = 2 * n;
    let mut full = vec![0.0; d * d * d];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                full[idx3(d, a, b, c)] = conn.l_h[idx3(n, a, b, c)];
                full[idx3(d, n + a, n + b, c)] = conn.l_v[idx3(n, a, b, c)];
                full[idx3(d, a, b, n + c)] = conn.c_h[idx3(n, a, b, c)];
                full[idx3(d, n + a, n + b, n + c)] = conn.c_v[idx3(n, a, b, c)];
            }
        }
    }
    full
}

/// Embed the distortion blocks into the full (2n)^3 cube.
pub fn embed_distortion(z: &Distortion) -> Vec<f64> {
    let n = z.n;
    let d = 2 * n;
    let mut full = vec![0.0; d * d * d];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                full[idx3(d, n + a, b, c)] = z.z_v_jk[idx3(n, a, b, c)];
                full[idx3(d, a, n + b, c)] = z.z_h_bk[idx3(n, a, b, c)];
                full[idx3(d, a, b, n + c)] = z.z_h_jb[idx3(n, a, b, c)];
                full[idx3(d, n + a, b, n + c)] = z.z_v_jb[idx3(n, a, b, c)];
                full[idx3(d, a, n + b, n + c)] = z.z_h_ab[idx3(n, a, b, c)];
            }
        }
    }
    full
}

/// Transform coordinate-basis Christoffels into the N-adapted frame,
/// including the inhomogeneous term from differentiating the frame
/// coefficients:
/// Gamma^g_{ab}(frame) = e^g_gbar [ e_b^bbar d_bbar(e_a^gbar)
///   + e_a^abar e_b^bbar Gamma^gbar_{abar bbar} ].
pub fn lc_adapted_frame(
    n: usize,
    gamma_coord: &[f64],
    ncoef: &[f64],
    dx_n: &[f64],
    dy_n: &[f64],
) -> Vec<f64> {
    let d = 2 * n;
    // frame vector components V[alpha][coord] and inverse Vinv[coord][alpha]
    let mut v = vec![0.0; d * d];
    let mut vinv = vec![0.0; d * d];
    for r in 0..d {
        v[idx2(d, r, r)] = 1.0;
        vinv[idx2(d, r, r)] = 1.0;
    }
    for i in 0..n {
        for a in 0..n {
            v[idx2(d, i, n + a)] = -ncoef[idx2(n, a, i)];
            vinv[idx2(d, i, n + a)] = ncoef[idx2(n, a, i)];
        }
    }
    // dV[coordderiv][alpha][coord] (only the h-row, v-column entries move)
    let dv = |bbar: usize, alpha: usize, gbar: usize| -> f64 {
        if alpha < n && gbar >= n {
            let a = gbar - n;
            let i = alpha;
            if bbar < n {
                -dx_n[idx3(n, a, i, bbar)]
            } else {
                -dy_n[idx3(n, a, i, bbar - n)]
            }
        } else {
            0.0
        }
    };
    let mut out = vec![0.0; d * d * d];
    for g in 0..d {
        for alpha in 0..d {
            for beta in 0..d {
                let mut acc = 0.0;
                for gbar in 0..d {
                    let mut inner = 0.0;
                    for bbar in 0..d {
                        let vb = v[idx2(d, beta, bbar)];
                        if vb == 0.0 {
                            continue;
                        }
                        inner += vb * dv(bbar, alpha, gbar);
                        for abar in 0..d {
                            let va = v[idx2(d, alpha, abar)];
                            if va != 0.0 {
                                inner += va * vb * gamma_coord[idx3(d, gbar, abar, bbar)];
                            }
                        }
                    }
                    acc += inner * vinv[idx2(d, gbar, g)];
                }
                out[idx3(d, g, alpha, beta)] = acc;
            }
        }
    }
    out
}

/// Coordinate metric, inverse, Christoffels, Ricci and scalar of the
/// Levi-Civita connection, all as Taylor polynomials.
struct LcPoly {
    dim: usize,
    full: Vec<TaylorPoly>,
    full_inv: Vec<TaylorPoly>,
    gamma: Vec<TaylorPoly>,
}

fn lc_poly(ex: &LagrangeExpansion) -> Result<LcPoly, GeomError> {
    let n = ex.dim();
    let d = 2 * n;
    let space: &Arc<JetSpace> = ex.space();
    let zero = TaylorPoly::zero(space);
    // coordinate metric blocks per the block ansatz
    let mut full = vec![zero.clone(); d * d];
    for i in 0..n {
        for j in 0..n {
            let mut hh = ex.g[idx2(n, i, j)].clone();
            for a in 0..n {
                for b in 0..n {
                    hh = hh.add(
                        &ex.ncoef[idx2(n, a, i)]
                            .mul(&ex.ncoef[idx2(n, b, j)])
                            .mul(&ex.g[idx2(n, a, b)]),
                    );
                }
            }
            full[idx2(d, i, j)] = hh;
            let mut hv = zero.clone();
            for e in 0..n {
                hv = hv.add(&ex.ncoef[idx2(n, e, i)].mul(&ex.g[idx2(n, e, j)]));
            }
            full[idx2(d, i, n + j)] = hv.clone();
            full[idx2(d, n + j, i)] = hv;
            full[idx2(d, n + i, n + j)] = ex.g[idx2(n, i, j)].clone();
        }
    }
    // invert the constant part
    let f0 = nalgebra::DMatrix::from_fn(d, d, |r, c| full[idx2(d, r, c)].value());
    let f0_inv = f0.try_inverse().ok_or(GeomError::Degenerate {
        point: ex.point().coords(),
        det: 0.0,
        threshold: 0.0,
    })?;
    let mut f0_inv_flat = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..d {
            f0_inv_flat[idx2(d, r, c)] = f0_inv[(r, c)];
        }
    }
    let full_inv = poly_mat_inverse(d, &full, &f0_inv_flat);
    // coordinate derivatives of the metric
    let mut dg = vec![zero.clone(); d * d * d];
    for c in 0..d {
        for a in 0..d {
            for b in 0..d {
                dg[idx3(d, c, a, b)] = full[idx2(d, a, b)].derivative(c);
            }
        }
    }
    let gamma = christoffel(d, &full_inv, &dg);
    Ok(LcPoly {
        dim: d,
        full,
        full_inv,
        gamma,
    })
}

/// Levi-Civita Christoffels of the coordinate metric at a point.
pub fn levi_civita(
    ast: &ExpressionAst,
    u: &PhasePoint,
    eps_reg: f64,
) -> Result<Christoffel, GeomError> {
    let ex = LagrangeExpansion::new(ast, u, 4, eps_reg)?;
    let lc = lc_poly(&ex)?;
    Ok(Christoffel {
        dim: lc.dim,
        gamma: lc.gamma.iter().map(|p| p.value()).collect(),
    })
}

/// Coordinate-basis Ricci matrix and scalar of the Levi-Civita connection.
pub fn lc_ricci(
    ast: &ExpressionAst,
    u: &PhasePoint,
    eps_reg: f64,
) -> Result<(Vec<f64>, f64), GeomError> {
    let ex = LagrangeExpansion::new(ast, u, 5, eps_reg)?;
    let lc = lc_poly(&ex)?;
    let d = lc.dim;
    let gamma: Vec<f64> = lc.gamma.iter().map(|p| p.value()).collect();
    let mut dgamma = vec![0.0; d * d * d * d];
    for c in 0..d {
        for g in 0..d {
            for a in 0..d {
                for b in 0..d {
                    dgamma[idx4(d, c, g, a, b)] = lc.gamma[idx3(d, g, a, b)].derivative(c).value();
                }
            }
        }
    }
    let ricci = lc_ricci_from(d, &gamma, &dgamma);
    let mut scalar = 0.0;
    for a in 0..d {
        for b in 0..d {
            scalar += lc.full_inv[idx2(d, a, b)].value() * ricci[idx2(d, a, b)];
        }
    }
    Ok((ricci, scalar))
}

/// Full analytic geometry bundle at one point (degree-5 expansion).
pub fn analytic_geometry(
    ast: &ExpressionAst,
    u: &PhasePoint,
    eps_reg: f64,
) -> Result<AnalyticDGeometry, GeomError> {
    let ex = LagrangeExpansion::new(ast, u, 5, eps_reg)?;
    let n = ex.dim();
    let data_poly = dmetric_poly(&ex);
    let conn_poly = canonical_dconn(&data_poly);
    let data = dmetric_values(&data_poly);
    let conn = conn_values(&conn_poly);
    let omega_poly = data_poly.omega();
    let omega: Vec<f64> = omega_poly.iter().map(|p| p.value()).collect();
    let der = conn_derivs_poly(&ex, &conn_poly);
    let curvature = curvature_blocks(&conn, &der, &omega, &data.dy_n);
    let rd = ricci_blocks(&curvature);
    let (scalar_h, scalar_v, scalar) = scalar_curvatures(&rd, &data.gh_inv, &data.gv_inv);
    let einstein = einstein_blocks(&rd, &data.gh, &data.gv, scalar);
    let torsion = d_torsion(&conn, &omega, &data.dy_n);
    let compat = compatibility_residual(&data, &conn);
    let dist = distortion(&data, &conn, &omega);

    let lc = lc_poly(&ex)?;
    let d = lc.dim;
    let gamma: Vec<f64> = lc.gamma.iter().map(|p| p.value()).collect();
    let mut dgamma = vec![0.0; d * d * d * d];
    for c in 0..d {
        for g in 0..d {
            for a in 0..d {
                for b in 0..d {
                    dgamma[idx4(d, c, g, a, b)] = lc.gamma[idx3(d, g, a, b)].derivative(c).value();
                }
            }
        }
    }
    let lc_ric = lc_ricci_from(d, &gamma, &dgamma);
    let mut lc_scalar = 0.0;
    for a in 0..d {
        for b in 0..d {
            lc_scalar += lc.full_inv[idx2(d, a, b)].value() * lc_ric[idx2(d, a, b)];
        }
    }

    Ok(AnalyticDGeometry {
        n,
        omega,
        torsion,
        curvature,
        ricci: RicciBlocks {
            data: rd,
            scalar_h,
            scalar_v,
            scalar,
        },
        einstein,
        compat_residual: compat,
        coord_metric: lc.full.iter().map(|p| p.value()).collect(),
        coord_metric_inv: lc.full_inv.iter().map(|p| p.value()).collect(),
        lc: Christoffel { dim: d, gamma },
        lc_ricci: lc_ric,
        lc_scalar,
        distortion: dist,
        data,
        conn,
    })
}

/// Max-norm of the distortion identity residual
/// `lc_adapted - embed(dconn) - embed(distortion)` at one point.
pub fn distortion_identity_residual(geo: &AnalyticDGeometry) -> f64 {
    let n = geo.n;
    let d = 2 * n;
    let lhs = lc_adapted_frame(
        n,
        &geo.lc.gamma,
        &geo.data.ncoef,
        &geo.data.dx_n,
        &geo.data.dy_n,
    );
    let emb_c = embed_dconnection(&geo.conn);
    let emb_z = embed_distortion(&geo.distortion);
    let mut worst = 0.0f64;
    for idx in 0..d * d * d {
        worst = worst.max((lhs[idx] - emb_c[idx] - emb_z[idx]).abs());
    }
    worst
}
