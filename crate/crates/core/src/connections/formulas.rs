//! Tensor formulas shared by the analytic and grid backends.
//!
//! Everything here is written once over an abstract scalar ring: the grid
//! backend instantiates with `f64` (derivative inputs from finite-difference
//! stencils), the analytic backend with truncated Taylor polynomials
//! (derivative inputs exact). Index storage order is [upper][lower1][lower2]
//! throughout; h-indices run over 0..n and v-indices over 0..n within their
//! own tables.

use crate::expr::taylor::TaylorPoly;

/// Minimal scalar-ring surface needed by the tensor formulas. No division:
/// inverse metrics are precomputed by each backend.
pub trait Ring: Clone {
    fn zero_like(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, c: f64) -> Self;
}

impl Ring for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
}

impl Ring for TaylorPoly {
    fn zero_like(&self) -> Self {
        TaylorPoly::zero(self.space())
    }
    fn add(&self, o: &Self) -> Self {
        TaylorPoly::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        TaylorPoly::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        TaylorPoly::mul(self, o)
    }
    fn neg(&self) -> Self {
        TaylorPoly::neg(self)
    }
    fn scale(&self, c: f64) -> Self {
        TaylorPoly::scale(self, c)
    }
}

#[inline]
pub fn idx2(n: usize, a: usize, b: usize) -> usize {
    a * n + b
}

#[inline]
pub fn idx3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

#[inline]
pub fn idx4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

/// Point data of a d-metric together with the first e-frame derivatives the
/// connection formulas consume.
///
/// - `eh_*[k][i][j]` is the elongated derivative e_k = d/dx^k - N^c_k d/dy^c
///   of the block entry (i, j);
/// - `ev_*[c][i][j]` is d/dy^c of the entry;
/// - `dx_n[a][i][k]` is the plain coordinate derivative dN^a_i/dx^k;
/// - `dy_n[a][i][b]` is dN^a_i/dy^b (the anholonomy coefficients W^a_{ib}).
#[derive(Clone)]
pub struct DMetricData<T> {
    pub n: usize,
    pub gh: Vec<T>,
    pub gh_inv: Vec<T>,
    pub gv: Vec<T>,
    pub gv_inv: Vec<T>,
    pub ncoef: Vec<T>,
    pub eh_gh: Vec<T>,
    pub ev_gh: Vec<T>,
    pub eh_gv: Vec<T>,
    pub ev_gv: Vec<T>,
    pub dx_n: Vec<T>,
    pub dy_n: Vec<T>,
}

impl<T: Ring> DMetricData<T> {
    fn zero(&self) -> T {
        self.gh[0].zero_like()
    }

    /// Elongated derivative of N: e_i(N^a_j) = dN^a_j/dx^i - N^c_i dN^a_j/dy^c.
    pub fn eh_n(&self, a: usize, j: usize, i: usize) -> T {
        let n = self.n;
        let mut acc = self.dx_n[idx3(n, a, j, i)].clone();
        for c in 0..n {
            acc = acc.sub(&self.ncoef[idx2(n, c, i)].mul(&self.dy_n[idx3(n, a, j, c)]));
        }
        acc
    }

    /// Omega^a_{ji} = e_i(N^a_j) - e_j(N^a_i), antisymmetric in (j, i).
    pub fn omega(&self) -> Vec<T> {
        let n = self.n;
        let mut ehn = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for j in 0..n {
                for i in 0..n {
                    ehn.push(self.eh_n(a, j, i));
                }
            }
        }
        let mut out = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for j in 0..n {
                for i in 0..n {
                    out.push(ehn[idx3(n, a, j, i)].sub(&ehn[idx3(n, a, i, j)]));
                }
            }
        }
        out
    }
}

/// Canonical d-connection coefficient tables.
#[derive(Clone)]
pub struct DConnTables<T> {
    pub n: usize,
    /// Lhat^i_{jk}
    pub l_h: Vec<T>,
    /// Lhat^a_{bk}
    pub l_v: Vec<T>,
    /// Chat^i_{jc}
    pub c_h: Vec<T>,
    /// Chat^a_{bc}
    pub c_v: Vec<T>,
}

/// Coefficients of the unique metric-compatible d-connection with vanishing
/// pure-index torsion blocks.
pub fn canonical_dconn<T: Ring>(d: &DMetricData<T>) -> DConnTables<T> {
    let n = d.n;
    let zero = d.zero();
    let mut l_h = vec![zero.clone(); n * n * n];
    let mut l_v = vec![zero.clone(); n * n * n];
    let mut c_h = vec![zero.clone(); n * n * n];
    let mut c_v = vec![zero.clone(); n * n * n];

    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // Lhat^i_jk = 1/2 g^{ir} (e_k g_jr + e_j g_kr - e_r g_jk)
                let mut acc = zero.clone();
                for r in 0..n {
                    let term = d.eh_gh[idx3(n, k, j, r)]
                        .add(&d.eh_gh[idx3(n, j, k, r)])
                        .sub(&d.eh_gh[idx3(n, r, j, k)]);
                    acc = acc.add(&d.gh_inv[idx2(n, i, r)].mul(&term));
                }
                l_h[idx3(n, i, j, k)] = acc.scale(0.5);
            }
        }
    }

    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                // Lhat^a_bk = e_b(N^a_k)
                //   + 1/2 g^{ac} (e_k g_bc - g_dc e_b(N^d_k) - g_db e_c(N^d_k))
                let mut acc = d.dy_n[idx3(n, a, k, b)].clone();
                let mut corr = zero.clone();
                for c in 0..n {
                    let mut term = d.eh_gv[idx3(n, k, b, c)].clone();
                    for dd in 0..n {
                        term = term
                            .sub(&d.gv[idx2(n, dd, c)].mul(&d.dy_n[idx3(n, dd, k, b)]))
                            .sub(&d.gv[idx2(n, dd, b)].mul(&d.dy_n[idx3(n, dd, k, c)]));
                    }
                    corr = corr.add(&d.gv_inv[idx2(n, a, c)].mul(&term));
                }
                l_v[idx3(n, a, b, k)] = acc.add(&corr.scale(0.5));
            }
        }
    }

    for i in 0..n {
        for j in 0..n {
            for c in 0..n {
                // Chat^i_jc = 1/2 g^{ik} e_c(g_jk)
                let mut acc = zero.clone();
                for k in 0..n {
                    acc = acc.add(&d.gh_inv[idx2(n, i, k)].mul(&d.ev_gh[idx3(n, c, j, k)]));
                }
                c_h[idx3(n, i, j, c)] = acc.scale(0.5);
            }
        }
    }

    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                // Chat^a_bc = 1/2 g^{ad} (e_b g_dc + e_c g_bd - e_d g_bc)
                let mut acc = zero.clone();
                for dd in 0..n {
                    let term = d.ev_gv[idx3(n, b, dd, c)]
                        .add(&d.ev_gv[idx3(n, c, b, dd)])
                        .sub(&d.ev_gv[idx3(n, dd, b, c)]);
                    acc = acc.add(&d.gv_inv[idx2(n, a, dd)].mul(&term));
                }
                c_v[idx3(n, a, b, c)] = acc.scale(0.5);
            }
        }
    }

    DConnTables { n, l_h, l_v, c_h, c_v }
}

/// e-frame derivatives of the connection tables; outer index is the
/// derivative direction (h then v variants per family).
pub struct ConnDerivs {
    pub n: usize,
    pub eh_lh: Vec<f64>,
    pub ev_lh: Vec<f64>,
    pub eh_lv: Vec<f64>,
    pub ev_lv: Vec<f64>,
    pub eh_ch: Vec<f64>,
    pub ev_ch: Vec<f64>,
    pub eh_cv: Vec<f64>,
    pub ev_cv: Vec<f64>,
}

impl ConnDerivs {
    pub fn zeros(n: usize) -> Self {
        let sz = n * n * n * n;
        ConnDerivs {
            n,
            eh_lh: vec![0.0; sz],
            ev_lh: vec![0.0; sz],
            eh_lv: vec![0.0; sz],
            ev_lv: vec![0.0; sz],
            eh_ch: vec![0.0; sz],
            ev_ch: vec![0.0; sz],
            eh_cv: vec![0.0; sz],
            ev_cv: vec![0.0; sz],
        }
    }
}

/// The six N-adapted curvature blocks.
#[derive(Debug, Clone)]
pub struct CurvatureBlocks {
    pub n: usize,
    /// R^i_{hjk}
    pub r_h_hjk: Vec<f64>,
    /// R^a_{bjk}
    pub r_v_bjk: Vec<f64>,
    /// R^i_{jka}
    pub r_h_jka: Vec<f64>,
    /// R^c_{bka}
    pub r_v_bka: Vec<f64>,
    /// R^i_{jbc}
    pub r_h_jbc: Vec<f64>,
    /// R^a_{bcd}
    pub r_v_bcd: Vec<f64>,
}

/// Mixed torsion entry T^b_{ak} = dN^b_k/dy^a - Lhat^b_{ak}; the curvature
/// formulas contract against it with the (h, v) index pair written (k, a).
#[inline]
fn t_mixed(n: usize, conn: &DConnTables<f64>, dy_n: &[f64], b: usize, a: usize, k: usize) -> f64 {
    dy_n[idx3(n, b, k, a)] - conn.l_v[idx3(n, b, a, k)]
}

/// All six curvature blocks of a d-connection from its coefficients, their
/// e-derivatives, and the anholonomy data (omega[a][j][i], dy_n[a][i][b]).
pub fn curvature_blocks(
    conn: &DConnTables<f64>,
    der: &ConnDerivs,
    omega: &[f64],
    dy_n: &[f64],
) -> CurvatureBlocks {
    let n = conn.n;
    let sz = n * n * n * n;
    let mut r_h_hjk = vec![0.0; sz];
    let mut r_v_bjk = vec![0.0; sz];
    let mut r_h_jka = vec![0.0; sz];
    let mut r_v_bka = vec![0.0; sz];
    let mut r_h_jbc = vec![0.0; sz];
    let mut r_v_bcd = vec![0.0; sz];

    for i in 0..n {
        for h in 0..n {
            for j in 0..n {
                for k in 0..n {
                    // R^i_hjk = e_k L^i_hj - e_j L^i_hk
                    //   + L^m_hj L^i_mk - L^m_hk L^i_mj - C^i_ha Omega^a_kj
                    let mut acc = der.eh_lh[idx4(n, k, i, h, j)] - der.eh_lh[idx4(n, j, i, h, k)];
                    for m in 0..n {
                        acc += conn.l_h[idx3(n, m, h, j)] * conn.l_h[idx3(n, i, m, k)]
                            - conn.l_h[idx3(n, m, h, k)] * conn.l_h[idx3(n, i, m, j)];
                    }
                    for a in 0..n {
                        acc -= conn.c_h[idx3(n, i, h, a)] * omega[idx3(n, a, k, j)];
                    }
                    r_h_hjk[idx4(n, i, h, j, k)] = acc;
                }
            }
        }
    }

    for a in 0..n {
        for b in 0..n {
            for j in 0..n {
                for k in 0..n {
                    // R^a_bjk = e_k L^a_bj - e_j L^a_bk
                    //   + L^c_bj L^a_ck - L^c_bk L^a_cj - C^a_bc Omega^c_kj
                    let mut acc = der.eh_lv[idx4(n, k, a, b, j)] - der.eh_lv[idx4(n, j, a, b, k)];
                    for c in 0..n {
                        acc += conn.l_v[idx3(n, c, b, j)] * conn.l_v[idx3(n, a, c, k)]
                            - conn.l_v[idx3(n, c, b, k)] * conn.l_v[idx3(n, a, c, j)];
                        acc -= conn.c_v[idx3(n, a, b, c)] * omega[idx3(n, c, k, j)];
                    }
                    r_v_bjk[idx4(n, a, b, j, k)] = acc;
                }
            }
        }
    }

    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for a in 0..n {
                    // R^i_jka = e_a L^i_jk - D_k C^i_ja + C^i_jb T^b_{ka}
                    // D_k C^i_ja = e_k C^i_ja + L^i_mk C^m_ja
                    //   - L^m_jk C^i_ma - L^b_ak C^i_jb
                    let mut dkc = der.eh_ch[idx4(n, k, i, j, a)];
                    for m in 0..n {
                        dkc += conn.l_h[idx3(n, i, m, k)] * conn.c_h[idx3(n, m, j, a)]
                            - conn.l_h[idx3(n, m, j, k)] * conn.c_h[idx3(n, i, m, a)];
                    }
                    for b in 0..n {
                        dkc -= conn.l_v[idx3(n, b, a, k)] * conn.c_h[idx3(n, i, j, b)];
                    }
                    let mut acc = der.ev_lh[idx4(n, a, i, j, k)] - dkc;
                    for b in 0..n {
                        acc += conn.c_h[idx3(n, i, j, b)] * t_mixed(n, conn, dy_n, b, a, k);
                    }
                    r_h_jka[idx4(n, i, j, k, a)] = acc;
                }
            }
        }
    }

    for c in 0..n {
        for b in 0..n {
            for k in 0..n {
                for a in 0..n {
                    // R^c_bka = e_a L^c_bk - D_k C^c_ba + C^c_bd T^d_{ka}
                    // D_k C^c_ba = e_k C^c_ba + L^c_dk C^d_ba
                    //   - L^d_bk C^c_da - L^d_ak C^c_bd
                    let mut dkc = der.eh_cv[idx4(n, k, c, b, a)];
                    for dd in 0..n {
                        dkc += conn.l_v[idx3(n, c, dd, k)] * conn.c_v[idx3(n, dd, b, a)]
                            - conn.l_v[idx3(n, dd, b, k)] * conn.c_v[idx3(n, c, dd, a)]
                            - conn.l_v[idx3(n, dd, a, k)] * conn.c_v[idx3(n, c, b, dd)];
                    }
                    let mut acc = der.ev_lv[idx4(n, a, c, b, k)] - dkc;
                    for dd in 0..n {
                        acc += conn.c_v[idx3(n, c, b, dd)] * t_mixed(n, conn, dy_n, dd, a, k);
                    }
                    r_v_bka[idx4(n, c, b, k, a)] = acc;
                }
            }
        }
    }

    for i in 0..n {
        for j in 0..n {
            for b in 0..n {
                for c in 0..n {
                    // R^i_jbc = e_c C^i_jb - e_b C^i_jc + C^h_jb C^i_hc - C^h_jc C^i_hb
                    let mut acc = der.ev_ch[idx4(n, c, i, j, b)] - der.ev_ch[idx4(n, b, i, j, c)];
                    for h in 0..n {
                        acc += conn.c_h[idx3(n, h, j, b)] * conn.c_h[idx3(n, i, h, c)]
                            - conn.c_h[idx3(n, h, j, c)] * conn.c_h[idx3(n, i, h, b)];
                    }
                    r_h_jbc[idx4(n, i, j, b, c)] = acc;
                }
            }
        }
    }

    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for dd in 0..n {
                    // R^a_bcd = e_d C^a_bc - e_c C^a_bd + C^e_bc C^a_ed - C^e_bd C^a_ec
                    let mut acc = der.ev_cv[idx4(n, dd, a, b, c)] - der.ev_cv[idx4(n, c, a, b, dd)];
                    for e in 0..n {
                        acc += conn.c_v[idx3(n, e, b, c)] * conn.c_v[idx3(n, a, e, dd)]
                            - conn.c_v[idx3(n, e, b, dd)] * conn.c_v[idx3(n, a, e, c)];
                    }
                    r_v_bcd[idx4(n, a, b, c, dd)] = acc;
                }
            }
        }
    }

    CurvatureBlocks {
        n,
        r_h_hjk,
        r_v_bjk,
        r_h_jka,
        r_v_bka,
        r_h_jbc,
        r_v_bcd,
    }
}

/// Ricci d-tensor blocks and scalars contracted from the curvature blocks.
#[derive(Debug, Clone)]
pub struct RicciData {
    pub n: usize,
    /// R_ij = R^k_{ijk}
    pub r_hh: Vec<f64>,
    /// R_ia = -R^k_{ika}
    pub r_ha: Vec<f64>,
    /// R_ai = R^b_{aib}
    pub r_vh: Vec<f64>,
    /// R_ab = R^c_{abc}
    pub r_vv: Vec<f64>,
}

pub fn ricci_blocks(cb: &CurvatureBlocks) -> RicciData {
    let n = cb.n;
    let mut r_hh = vec![0.0; n * n];
    let mut r_ha = vec![0.0; n * n];
    let mut r_vh = vec![0.0; n * n];
    let mut r_vv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += cb.r_h_hjk[idx4(n, k, i, j, k)];
            }
            r_hh[idx2(n, i, j)] = acc;
        }
        for a in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc -= cb.r_h_jka[idx4(n, k, i, k, a)];
            }
            r_ha[idx2(n, i, a)] = acc;
        }
    }
    for a in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for b in 0..n {
                acc += cb.r_v_bka[idx4(n, b, a, i, b)];
            }
            r_vh[idx2(n, a, i)] = acc;
        }
        for b in 0..n {
            let mut acc = 0.0;
            for c in 0..n {
                acc += cb.r_v_bcd[idx4(n, c, a, b, c)];
            }
            r_vv[idx2(n, a, b)] = acc;
        }
    }
    RicciData {
        n,
        r_hh,
        r_ha,
        r_vh,
        r_vv,
    }
}

/// (R, S, sR = R + S) from Ricci blocks and the inverse metric blocks.
pub fn scalar_curvatures(r: &RicciData, gh_inv: &[f64], gv_inv: &[f64]) -> (f64, f64, f64) {
    let n = r.n;
    let mut rh = 0.0;
    let mut sv = 0.0;
    for i in 0..n {
        for j in 0..n {
            rh += gh_inv[idx2(n, i, j)] * r.r_hh[idx2(n, i, j)];
            sv += gv_inv[idx2(n, i, j)] * r.r_vv[idx2(n, i, j)];
        }
    }
    (rh, sv, rh + sv)
}

/// Einstein block tensor G = Ric - 1/2 g sR on the block components; the
/// mixed blocks keep the nonsymmetric Ricci parts unchanged (the adapted
/// metric has no mixed components).
pub struct EinsteinBlocks {
    pub n: usize,
    pub g_hh: Vec<f64>,
    pub g_ha: Vec<f64>,
    pub g_vh: Vec<f64>,
    pub g_vv: Vec<f64>,
}

pub fn einstein_blocks(r: &RicciData, gh: &[f64], gv: &[f64], scalar: f64) -> EinsteinBlocks {
    let n = r.n;
    let mut g_hh = vec![0.0; n * n];
    let mut g_vv = vec![0.0; n * n];
    for i in 0..n * n {
        g_hh[i] = r.r_hh[i] - 0.5 * gh[i] * scalar;
        g_vv[i] = r.r_vv[i] - 0.5 * gv[i] * scalar;
    }
    EinsteinBlocks {
        n,
        g_hh,
        g_ha: r.r_ha.clone(),
        g_vh: r.r_vh.clone(),
        g_vv,
    }
}

/// Max-norm of the covariant derivative of both metric blocks under the
/// d-connection (the defining compatibility property; analytically ~1e-13).
pub fn compatibility_residual(d: &DMetricData<f64>, conn: &DConnTables<f64>) -> f64 {
    let n = d.n;
    let mut worst = 0.0f64;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                // D_k g_ij
                let mut acc = d.eh_gh[idx3(n, k, i, j)];
                for m in 0..n {
                    acc -= conn.l_h[idx3(n, m, i, k)] * d.gh[idx2(n, m, j)]
                        + conn.l_h[idx3(n, m, j, k)] * d.gh[idx2(n, i, m)];
                }
                worst = worst.max(acc.abs());
                // D_k g_ab (relabel i -> a, j -> b)
                let mut acc = d.eh_gv[idx3(n, k, i, j)];
                for c in 0..n {
                    acc -= conn.l_v[idx3(n, c, i, k)] * d.gv[idx2(n, c, j)]
                        + conn.l_v[idx3(n, c, j, k)] * d.gv[idx2(n, i, c)];
                }
                worst = worst.max(acc.abs());
                // D_c g_ij (relabel k -> c)
                let mut acc = d.ev_gh[idx3(n, k, i, j)];
                for m in 0..n {
                    acc -= conn.c_h[idx3(n, m, i, k)] * d.gh[idx2(n, m, j)]
                        + conn.c_h[idx3(n, m, j, k)] * d.gh[idx2(n, i, m)];
                }
                worst = worst.max(acc.abs());
                // D_c g_ab
                let mut acc = d.ev_gv[idx3(n, k, i, j)];
                for e in 0..n {
                    acc -= conn.c_v[idx3(n, e, i, k)] * d.gv[idx2(n, e, j)]
                        + conn.c_v[idx3(n, e, j, k)] * d.gv[idx2(n, i, e)];
                }
                worst = worst.max(acc.abs());
            }
        }
    }
    worst
}

/// Coordinate Christoffel symbols Gamma^g_{ab} = 1/2 g^{gr}(d_a g_rb + d_b g_ra - d_r g_ab)
/// for a full metric of dimension `d`; `dg[c][a][b]` holds d_c g_ab.
pub fn christoffel<T: Ring>(d: usize, g_inv: &[T], dg: &[T]) -> Vec<T> {
    let zero = g_inv[0].zero_like();
    let mut out = vec![zero.clone(); d * d * d];
    for g in 0..d {
        for a in 0..d {
            for b in 0..d {
                let mut acc = zero.clone();
                for r in 0..d {
                    let term = dg[idx3(d, a, r, b)]
                        .add(&dg[idx3(d, b, r, a)])
                        .sub(&dg[idx3(d, r, a, b)]);
                    acc = acc.add(&g_inv[idx2(d, g, r)].mul(&term));
                }
                out[idx3(d, g, a, b)] = acc.scale(0.5);
            }
        }
    }
    out
}

/// Coordinate Ricci tensor R_ab = d_r Gamma^r_ab - d_b Gamma^r_ra
/// + Gamma^r_rl Gamma^l_ab - Gamma^r_bl Gamma^l_ra, from the Christoffel
/// table and its coordinate derivatives `dgamma[c][g][a][b]`.
pub fn lc_ricci_from(d: usize, gamma: &[f64], dgamma: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            let mut acc = 0.0;
            for r in 0..d {
                acc += dgamma[idx4(d, r, r, a, b)] - dgamma[idx4(d, b, r, r, a)];
                for l in 0..d {
                    acc += gamma[idx3(d, r, r, l)] * gamma[idx3(d, l, a, b)]
                        - gamma[idx3(d, r, b, l)] * gamma[idx3(d, l, r, a)];
                }
            }
            out[idx2(d, a, b)] = acc;
        }
    }
    out
}
