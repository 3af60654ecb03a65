//! Grid backend: the connection/curvature/Ricci formulas evaluated with
//! periodic finite-difference derivatives in place of exact jets.
//!
//! The pipeline mirrors the analytic path stage by stage: sample derivatives
//! of the metric blocks and N-coefficients, build the connection coefficient
//! fields through the shared formulas, differentiate those fields, and
//! contract. Elongated derivatives are always assembled as
//! e_k = d/dx^k - N^c_k d/dy^c from plain coordinate stencils.

use std::sync::Arc;

use crate::connections::formulas::{idx2, idx3, idx4};
use crate::connections::{
    canonical_dconn, christoffel, compatibility_residual, curvature_blocks, lc_ricci_from,
    ricci_blocks, scalar_curvatures, ConnDerivs, DMetricData,
};

use super::{
    det_flat, fd_slab, invert_flat, volume_element, FieldError, GridDMetricFields, GridDomain,
    ScalarField, TensorField,
};

/// d-connection geometry fields on a grid.
pub struct DGridGeometry {
    pub domain: Arc<GridDomain>,
    /// connection coefficient fields, shapes [n,n,n]
    pub l_h: TensorField,
    pub l_v: TensorField,
    pub c_h: TensorField,
    pub c_v: TensorField,
    /// omega[a][j][i] and dN^a_i/dy^b fields
    pub omega: TensorField,
    pub dy_n: TensorField,
    /// Ricci blocks [n,n]
    pub ricci_hh: TensorField,
    pub ricci_ha: TensorField,
    pub ricci_vh: TensorField,
    pub ricci_vv: TensorField,
    /// h- and v-scalar curvature fields
    pub scalar_h: ScalarField,
    pub scalar_v: ScalarField,
    /// max-norm of D g per node
    pub compat: ScalarField,
    /// inverse metric block fields
    pub gh_inv: TensorField,
    pub gv_inv: TensorField,
    /// volume density sqrt(|det gh| |det gv|)
    pub volume: ScalarField,
}

/// Levi-Civita geometry of the coordinate metric on a grid.
pub struct LcGridGeometry {
    pub domain: Arc<GridDomain>,
    /// full 2n x 2n coordinate metric and inverse, shape [2n, 2n]
    pub coord_metric: TensorField,
    pub coord_metric_inv: TensorField,
    /// Christoffel field, shape [2n, 2n, 2n]
    pub gamma: TensorField,
    /// coordinate Ricci [2n, 2n] and scalar
    pub ricci: TensorField,
    pub scalar: ScalarField,
    /// volume density (same as the d-path by block factorization)
    pub volume: ScalarField,
}

struct ElongatedDerivs {
    /// eh[k][comp] fields: e_k applied to each component
    eh: TensorField,
    /// ev[c][comp] fields
    ev: TensorField,
}

/// Elongated/vertical derivatives of every component of `field`.
fn elongated(field: &TensorField, ncoef: &TensorField) -> ElongatedDerivs {
    let dom = &field.domain;
    let n = dom.base_dim();
    let comps = field.comps();
    let nodes = dom.node_count();
    let mut shape = vec![n];
    shape.extend_from_slice(&field.shape);
    let mut eh = TensorField::zeros(dom, shape.clone());
    let mut ev = TensorField::zeros(dom, shape);
    // vertical first (reused by the elongation correction)
    let mut dv = Vec::with_capacity(n);
    for c in 0..n {
        let mut per_comp = Vec::with_capacity(comps);
        for comp in 0..comps {
            per_comp.push(fd_slab(dom, field.comp(comp), n + c, 1));
        }
        dv.push(per_comp);
    }
    for c in 0..n {
        for comp in 0..comps {
            ev.comp_mut(c * comps + comp).copy_from_slice(&dv[c][comp]);
        }
    }
    for k in 0..n {
        for comp in 0..comps {
            let mut dx = fd_slab(dom, field.comp(comp), k, 1);
            for c in 0..n {
                let nc = ncoef.comp(c * n + k);
                let dvc = &dv[c][comp];
                for node in 0..nodes {
                    dx[node] -= nc[node] * dvc[node];
                }
            }
            eh.comp_mut(k * comps + comp).copy_from_slice(&dx);
        }
    }
    ElongatedDerivs { eh, ev }
}

/// Plain coordinate first derivatives of every component along all 2n axes:
/// result shape [2n, components...].
fn coord_derivs(field: &TensorField) -> TensorField {
    let dom = &field.domain;
    let d = dom.axes().len();
    let comps = field.comps();
    let mut shape = vec![d];
    shape.extend_from_slice(&field.shape);
    let mut out = TensorField::zeros(dom, shape);
    for axis in 0..d {
        for comp in 0..comps {
            let der = fd_slab(dom, field.comp(comp), axis, 1);
            out.comp_mut(axis * comps + comp).copy_from_slice(&der);
        }
    }
    out
}

/// Canonical d-connection geometry from grid fields.
pub fn grid_dconn_geometry(fields: &GridDMetricFields) -> Result<DGridGeometry, FieldError> {
    let dom = fields.domain.clone();
    let n = dom.base_dim();
    let nodes = dom.node_count();
    let n2 = n * n;
    let n3 = n2 * n;

    // inverse blocks
    let mut gh_inv = TensorField::zeros(&dom, vec![n, n]);
    let mut gv_inv = TensorField::zeros(&dom, vec![n, n]);
    for node in 0..nodes {
        let gh = fields.gh.at_node(node);
        let inv = invert_flat(n, &gh).ok_or_else(|| FieldError::DegenerateNode {
            node,
            coords: dom.node_coords(node),
            det: det_flat(n, &gh),
        })?;
        gh_inv.set_node(node, &inv);
        let gv = fields.gv.at_node(node);
        let inv = invert_flat(n, &gv).ok_or_else(|| FieldError::DegenerateNode {
            node,
            coords: dom.node_coords(node),
            det: det_flat(n, &gv),
        })?;
        gv_inv.set_node(node, &inv);
    }

    // derivative fields of the inputs
    let dgh = elongated(&fields.gh, &fields.ncoef);
    let dgv = elongated(&fields.gv, &fields.ncoef);
    let dnc = coord_derivs(&fields.ncoef); // [axis][a][i]

    // per-node connection tables via the shared formulas
    let mut l_h = TensorField::zeros(&dom, vec![n, n, n]);
    let mut l_v = TensorField::zeros(&dom, vec![n, n, n]);
    let mut c_h = TensorField::zeros(&dom, vec![n, n, n]);
    let mut c_v = TensorField::zeros(&dom, vec![n, n, n]);
    let mut omega = TensorField::zeros(&dom, vec![n, n, n]);
    let mut dy_n = TensorField::zeros(&dom, vec![n, n, n]);
    let mut compat = ScalarField::zeros(&dom);

    let gather3 = |tf: &TensorField, node: usize| -> Vec<f64> {
        let nn = dom.node_count();
        (0..tf.comps()).map(|c| tf.data[c * nn + node]).collect()
    };

    for node in 0..nodes {
        // dx_n[a][i][k] and dy_n[a][i][b] from the coordinate gradient
        let mut dx_n_node = vec![0.0; n3];
        let mut dy_n_node = vec![0.0; n3];
        for a in 0..n {
            for i in 0..n {
                for k in 0..n {
                    dx_n_node[idx3(n, a, i, k)] = dnc.data[(k * n2 + a * n + i) * nodes + node];
                    dy_n_node[idx3(n, a, i, k)] =
                        dnc.data[((n + k) * n2 + a * n + i) * nodes + node];
                }
            }
        }
        let data = DMetricData {
            n,
            gh: fields.gh.at_node(node),
            gh_inv: gh_inv.at_node(node),
            gv: fields.gv.at_node(node),
            gv_inv: gv_inv.at_node(node),
            ncoef: fields.ncoef.at_node(node),
            eh_gh: gather3(&dgh.eh, node),
            ev_gh: gather3(&dgh.ev, node),
            eh_gv: gather3(&dgv.eh, node),
            ev_gv: gather3(&dgv.ev, node),
            dx_n: dx_n_node,
            dy_n: dy_n_node,
        };
        let conn = canonical_dconn(&data);
        let om = data.omega();
        for c in 0..n3 {
            l_h.data[c * nodes + node] = conn.l_h[c];
            l_v.data[c * nodes + node] = conn.l_v[c];
            c_h.data[c * nodes + node] = conn.c_h[c];
            c_v.data[c * nodes + node] = conn.c_v[c];
            omega.data[c * nodes + node] = om[c];
            dy_n.data[c * nodes + node] = data.dy_n[c];
        }
        compat.data[node] = compatibility_residual(&data, &conn);
    }

    // e-derivatives of the connection fields
    let d_lh = elongated(&l_h, &fields.ncoef);
    let d_lv = elongated(&l_v, &fields.ncoef);
    let d_ch = elongated(&c_h, &fields.ncoef);
    let d_cv = elongated(&c_v, &fields.ncoef);

    // curvature and Ricci per node
    let mut ricci_hh = TensorField::zeros(&dom, vec![n, n]);
    let mut ricci_ha = TensorField::zeros(&dom, vec![n, n]);
    let mut ricci_vh = TensorField::zeros(&dom, vec![n, n]);
    let mut ricci_vv = TensorField::zeros(&dom, vec![n, n]);
    let mut scalar_h = ScalarField::zeros(&dom);
    let mut scalar_v = ScalarField::zeros(&dom);

    for node in 0..nodes {
        let conn = crate::connections::DConnTables {
            n,
            l_h: gather3(&l_h, node),
            l_v: gather3(&l_v, node),
            c_h: gather3(&c_h, node),
            c_v: gather3(&c_v, node),
        };
        let mut der = ConnDerivs::zeros(n);
        for m in 0..n {
            for c in 0..n3 {
                der.eh_lh[m * n3 + c] = d_lh.eh.data[(m * n3 + c) * nodes + node];
                der.ev_lh[m * n3 + c] = d_lh.ev.data[(m * n3 + c) * nodes + node];
                der.eh_lv[m * n3 + c] = d_lv.eh.data[(m * n3 + c) * nodes + node];
                der.ev_lv[m * n3 + c] = d_lv.ev.data[(m * n3 + c) * nodes + node];
                der.eh_ch[m * n3 + c] = d_ch.eh.data[(m * n3 + c) * nodes + node];
                der.ev_ch[m * n3 + c] = d_ch.ev.data[(m * n3 + c) * nodes + node];
                der.eh_cv[m * n3 + c] = d_cv.eh.data[(m * n3 + c) * nodes + node];
                der.ev_cv[m * n3 + c] = d_cv.ev.data[(m * n3 + c) * nodes + node];
            }
        }
        let om = gather3(&omega, node);
        let dyn_node = gather3(&dy_n, node);
        let cb = curvature_blocks(&conn, &der, &om, &dyn_node);
        let rd = ricci_blocks(&cb);
        let ghi = gh_inv.at_node(node);
        let gvi = gv_inv.at_node(node);
        let (r, s, _) = scalar_curvatures(&rd, &ghi, &gvi);
        for c in 0..n2 {
            ricci_hh.data[c * nodes + node] = rd.r_hh[c];
            ricci_ha.data[c * nodes + node] = rd.r_ha[c];
            ricci_vh.data[c * nodes + node] = rd.r_vh[c];
            ricci_vv.data[c * nodes + node] = rd.r_vv[c];
        }
        scalar_h.data[node] = r;
        scalar_v.data[node] = s;
    }

    let volume = volume_element(&fields.gh, &fields.gv)?;

    Ok(DGridGeometry {
        domain: dom,
        l_h,
        l_v,
        c_h,
        c_v,
        omega,
        dy_n,
        ricci_hh,
        ricci_ha,
        ricci_vh,
        ricci_vv,
        scalar_h,
        scalar_v,
        compat,
        gh_inv,
        gv_inv,
        volume,
    })
}

/// Coordinate metric field of the d-metric blocks.
pub fn coordinate_metric_field(fields: &GridDMetricFields) -> TensorField {
    let dom = &fields.domain;
    let n = dom.base_dim();
    let d = 2 * n;
    let nodes = dom.node_count();
    let mut full = TensorField::zeros(dom, vec![d, d]);
    for node in 0..nodes {
        let gh = fields.gh.at_node(node);
        let gv = fields.gv.at_node(node);
        let nc = fields.ncoef.at_node(node);
        for i in 0..n {
            for j in 0..n {
                let mut hh = gh[idx2(n, i, j)];
                for a in 0..n {
                    for b in 0..n {
                        hh += nc[idx2(n, a, i)] * nc[idx2(n, b, j)] * gv[idx2(n, a, b)];
                    }
                }
                full.data[idx2(d, i, j) * nodes + node] = hh;
                let mut hv = 0.0;
                for e in 0..n {
                    hv += nc[idx2(n, e, i)] * gv[idx2(n, e, j)];
                }
                full.data[idx2(d, i, n + j) * nodes + node] = hv;
                full.data[idx2(d, n + j, i) * nodes + node] = hv;
                full.data[idx2(d, n + i, n + j) * nodes + node] = gv[idx2(n, i, j)];
            }
        }
    }
    full
}

/// Levi-Civita geometry of the coordinate metric from grid fields.
pub fn grid_lc_geometry(fields: &GridDMetricFields) -> Result<LcGridGeometry, FieldError> {
    let dom = fields.domain.clone();
    let n = dom.base_dim();
    let d = 2 * n;
    let d2 = d * d;
    let d3 = d2 * d;
    let nodes = dom.node_count();

    let coord_metric = coordinate_metric_field(fields);
    let mut coord_metric_inv = TensorField::zeros(&dom, vec![d, d]);
    for node in 0..nodes {
        let m = coord_metric.at_node(node);
        let inv = invert_flat(d, &m).ok_or_else(|| FieldError::DegenerateNode {
            node,
            coords: dom.node_coords(node),
            det: det_flat(d, &m),
        })?;
        coord_metric_inv.set_node(node, &inv);
    }

    // dg[c][a][b]
    let dg = coord_derivs(&coord_metric);
    let mut gamma = TensorField::zeros(&dom, vec![d, d, d]);
    for node in 0..nodes {
        let ginv = coord_metric_inv.at_node(node);
        let mut dg_node = vec![0.0; d3];
        for c in 0..d3 {
            dg_node[c] = dg.data[c * nodes + node];
        }
        let g = christoffel(d, &ginv, &dg_node);
        for c in 0..d3 {
            gamma.data[c * nodes + node] = g[c];
        }
    }

    // dgamma[c][g][a][b]
    let dgamma = coord_derivs(&gamma);
    let mut ricci = TensorField::zeros(&dom, vec![d, d]);
    let mut scalar = ScalarField::zeros(&dom);
    for node in 0..nodes {
        let mut g_node = vec![0.0; d3];
        for c in 0..d3 {
            g_node[c] = gamma.data[c * nodes + node];
        }
        let mut dg_node = vec![0.0; d3 * d];
        for c in 0..d3 * d {
            dg_node[c] = dgamma.data[c * nodes + node];
        }
        let ric = lc_ricci_from(d, &g_node, &dg_node);
        let ginv = coord_metric_inv.at_node(node);
        let mut sc = 0.0;
        for a in 0..d {
            for b in 0..d {
                sc += ginv[idx2(d, a, b)] * ric[idx2(d, a, b)];
            }
        }
        for c in 0..d2 {
            ricci.data[c * nodes + node] = ric[c];
        }
        scalar.data[node] = sc;
    }

    let volume = volume_element(&fields.gh, &fields.gv)?;

    Ok(LcGridGeometry {
        domain: dom,
        coord_metric,
        coord_metric_inv,
        gamma,
        ricci,
        scalar,
        volume,
    })
}

impl DGridGeometry {
    /// Covariant Hessian of a scalar field under the d-connection:
    /// hess_h[i][j] = e_i(e_j f) - L^m_{ji} e_m f (h-block) and
    /// hess_v[a][b] = d_a d_b f - C^c_{ba} d_c f (v-block).
    /// Returns (e_h f, e_v f, hess_h, hess_v).
    pub fn scalar_hessian(
        &self,
        f: &ScalarField,
        ncoef: &TensorField,
    ) -> (TensorField, TensorField, TensorField, TensorField) {
        let dom = &self.domain;
        let n = dom.base_dim();
        let nodes = dom.node_count();
        // wrap f as a one-component tensor field
        let mut ft = TensorField::zeros(dom, vec![1]);
        ft.comp_mut(0).copy_from_slice(&f.data);
        let df = elongated(&ft, ncoef);
        let mut ef_h = TensorField::zeros(dom, vec![n]);
        let mut ef_v = TensorField::zeros(dom, vec![n]);
        for k in 0..n {
            ef_h.comp_mut(k).copy_from_slice(df.eh.comp(k));
            ef_v.comp_mut(k).copy_from_slice(df.ev.comp(k));
        }
        // second level: e-derivatives of the gradient components
        let dgh = elongated(&ef_h, ncoef);
        let dgv = elongated(&ef_v, ncoef);
        let mut hess_h = TensorField::zeros(dom, vec![n, n]);
        let mut hess_v = TensorField::zeros(dom, vec![n, n]);
        for node in 0..nodes {
            for i in 0..n {
                for j in 0..n {
                    // direction i, slot j
                    let mut hh = dgh.eh.data[(i * n + j) * nodes + node];
                    let mut vv = dgv.ev.data[(i * n + j) * nodes + node];
                    for m in 0..n {
                        hh -= self.l_h.data[idx3(n, m, j, i) * nodes + node]
                            * ef_h.data[m * nodes + node];
                        vv -= self.c_v.data[idx3(n, m, j, i) * nodes + node]
                            * ef_v.data[m * nodes + node];
                    }
                    hess_h.data[(i * n + j) * nodes + node] = hh;
                    hess_v.data[(i * n + j) * nodes + node] = vv;
                }
            }
        }
        (ef_h, ef_v, hess_h, hess_v)
    }
}

impl LcGridGeometry {
    /// Coordinate covariant Hessian of a scalar:
    /// hess[a][b] = d_a d_b f - Gamma^r_{ba} d_r f. Returns (df, hess).
    pub fn scalar_hessian(&self, f: &ScalarField) -> (TensorField, TensorField) {
        let dom = &self.domain;
        let d = dom.axes().len();
        let nodes = dom.node_count();
        let mut df = TensorField::zeros(dom, vec![d]);
        for axis in 0..d {
            let der = fd_slab(dom, &f.data, axis, 1);
            df.comp_mut(axis).copy_from_slice(&der);
        }
        let ddf = coord_derivs(&df); // [axis][axis]
        let mut hess = TensorField::zeros(dom, vec![d, d]);
        for node in 0..nodes {
            for a in 0..d {
                for b in 0..d {
                    let mut v = ddf.data[(a * d + b) * nodes + node];
                    for r in 0..d {
                        v -= self.gamma.data[idx3(d, r, b, a) * nodes + node]
                            * df.data[r * nodes + node];
                    }
                    hess.data[(a * d + b) * nodes + node] = v;
                }
            }
        }
        (df, hess)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::fields::{sample_dmetric, AxisSpec};
    use crate::geometry::PhasePoint;

    fn domain(resx: usize, resy: usize) -> Arc<GridDomain> {
        GridDomain::new(
            2,
            vec![
                AxisSpec { center: 0.0, period: std::f64::consts::TAU, resolution: resx },
                AxisSpec { center: 0.0, period: std::f64::consts::TAU, resolution: resx },
                AxisSpec { center: 1.1, period: 1.0, resolution: resy },
                AxisSpec { center: 1.1, period: 1.0, resolution: resy },
            ],
        )
        .unwrap()
    }

    #[test]
    fn flat_fields_give_zero_curvature() {
        let ast = parse("y1^2 + y2^2", 2).unwrap();
        let dom = domain(8, 8);
        let fields = sample_dmetric(&ast, &dom, 1e-10).unwrap();
        let geo = grid_dconn_geometry(&fields).unwrap();
        assert!(geo.ricci_hh.data.iter().all(|v| v.abs() < 1e-12));
        assert!(geo.ricci_vv.data.iter().all(|v| v.abs() < 1e-12));
        assert!(geo.compat.data.iter().all(|v| v.abs() < 1e-12));
        let lc = grid_lc_geometry(&fields).unwrap();
        assert!(lc.ricci.data.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn grid_matches_analytic_on_riemannian_interior() {
        // y-quadratic Lagrangian with a curved (conformal) base metric: all
        // fields are polynomial in y, so the fixed y-resolution is exact away
        // from the wrap band; compare on interior probe nodes and check
        // 4th-order convergence in x.
        let src = "exp(0.4*sin(x1) + 0.2*cos(x2))*(y1^2 + y2^2)";
        let ast = parse(src, 2).unwrap();
        let mut errs = Vec::new();
        for resx in [16usize, 32] {
            let dom = domain(resx, 8);
            let fields = sample_dmetric(&ast, &dom, 1e-10).unwrap();
            let geo = grid_dconn_geometry(&fields).unwrap();
            let nodes_probe: Vec<Vec<usize>> = vec![
                vec![3, 5, 4, 4],
                vec![7, 2, 4, 3],
                vec![1, 9, 3, 4],
            ];
            let mut worst = 0.0f64;
            for probe in nodes_probe {
                let mut idx = probe.clone();
                idx[0] = probe[0] * resx / 16;
                idx[1] = probe[1] * resx / 16;
                let flat = dom.flat_index(&idx);
                let coords = dom.node_coords(flat);
                let p = PhasePoint::from_coords(&coords);
                let ana = crate::connections::analytic_geometry(&ast, &p, 1e-10).unwrap();
                for c in 0..4 {
                    let nodes = dom.node_count();
                    worst = worst
                        .max((geo.ricci_hh.data[c * nodes + flat] - ana.ricci.data.r_hh[c]).abs());
                }
            }
            errs.push(worst);
        }
        let slope = (errs[0] / errs[1]).log2();
        assert!(
            slope > 3.5,
            "cross-backend convergence slope {slope} ({errs:?})"
        );
    }
}
