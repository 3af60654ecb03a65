//! Time integration of the nonholonomic Ricci flow for both connections, the
//! coupled potential equation, normalization, frame evolution and breather
//! classification.
//!
//! The N-connection field is held fixed along the flow (no evolution law is
//! available for it), which makes the d(N^c N^d)/dchi terms of the
//! coordinate-frame equations vanish identically. The mixed-Ricci constraint
//! is monitored, never imposed.

use serde::Serialize;
use thiserror::Error;

use crate::connections::formulas::idx2;
use crate::entropy::{
    self, ConnectionKind, EntropyError, GeometryRef,
};
use crate::fields::{
    det_flat, grid_dconn_geometry, grid_lc_geometry, integrate, invert_flat, DGridGeometry,
    FieldError, GridDMetricFields, LcGridGeometry, ScalarField, TensorField,
};

#[derive(Debug, Clone, Error)]
pub enum FlowError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("non-finite update at chi = {chi}, node {node}")]
    NonFinite { chi: f64, node: usize },
    #[error("metric degenerated at chi = {chi}: min |det g_h| = {det:e}")]
    Degenerate { chi: f64, det: f64 },
    #[error("tau reached {tau} at chi = {chi}; W-coupled quantities need tau > 0")]
    TauExhausted { chi: f64, tau: f64 },
}

/// Potential coupling mode for the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FCoupling {
    Off,
    FCoupled,
    WCoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowIntegrator {
    Euler,
    Rk4,
}

/// Complete flow state: evolving metric blocks, fixed N-connection,
/// potential, flow time and scale parameter.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub fields: GridDMetricFields,
    pub f_pot: ScalarField,
    pub chi: f64,
    pub tau: f64,
}

impl FlowState {
    pub fn min_det_gh(&self) -> f64 {
        self.fields.min_abs_det().0
    }
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub connection: ConnectionKind,
    pub normalize: bool,
    pub lambda_divisor: f64,
    pub dt: f64,
    pub steps: usize,
    pub snapshot_stride: usize,
    pub f_coupling: FCoupling,
    pub integrator: FlowIntegrator,
    pub paper_literal_w: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            connection: ConnectionKind::DConn,
            normalize: false,
            lambda_divisor: 5.0,
            dt: 1e-3,
            steps: 100,
            snapshot_stride: 10,
            f_coupling: FCoupling::Off,
            integrator: FlowIntegrator::Euler,
            paper_literal_w: false,
        }
    }
}

/// Per-step monitored quantities.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepDiagnostics {
    pub lambda: f64,
    /// max |R_ia|, |R_ai| (d-connection) or the mixed-equation residual (LC)
    pub mixed_residual: f64,
    /// max asymmetry of the Ricci blocks before symmetrization
    pub asym_norm: f64,
}

/// One emitted time-series row.
#[derive(Debug, Clone, Serialize)]
pub struct TimeSeriesRecord {
    pub chi: f64,
    pub tau: f64,
    pub f_functional: f64,
    pub w_functional: f64,
    pub e_avg: f64,
    pub s_entropy: f64,
    pub sigma: f64,
    pub volume: f64,
    pub ricci_mixed_residual: f64,
    pub min_det_gh: f64,
    pub asym_norm: f64,
}

impl TimeSeriesRecord {
    pub fn csv_header() -> &'static str {
        "chi,tau,F,W,E_avg,S_entropy,sigma,volume,ricci_mixed_residual,min_det_gh,asym_norm"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.chi,
            self.tau,
            self.f_functional,
            self.w_functional,
            self.e_avg,
            self.s_entropy,
            self.sigma,
            self.volume,
            self.ricci_mixed_residual,
            self.min_det_gh,
            self.asym_norm
        )
    }
}

/// Normalizing factor: lambda = (int scalar dV / int dV) / divisor, or 0 when
/// normalization is off.
pub fn lambda_normalization(
    geo: &GeometryRef,
    normalize: bool,
    divisor: f64,
) -> f64 {
    if !normalize {
        return 0.0;
    }
    let s = geo.scalar_field();
    let vol = geo.volume();
    let one = ScalarField::constant(&s.domain, 1.0);
    let total = integrate(&one, vol);
    let r = integrate(&s, vol) / total;
    r / divisor
}

/// Right-hand sides of the metric-block flow (time derivatives per
/// component-node) plus the potential derivative when coupled.
struct FlowRhs {
    dgh: Vec<f64>,
    dgv: Vec<f64>,
    df: Option<Vec<f64>>,
    diag: StepDiagnostics,
}

fn symmetrized_update(n: usize, nodes: usize, ricci: &TensorField) -> (Vec<f64>, f64) {
    let mut out = vec![0.0; n * n * nodes];
    let mut asym = 0.0f64;
    for node in 0..nodes {
        for i in 0..n {
            for j in 0..n {
                let a = ricci.data[idx2(n, i, j) * nodes + node];
                let b = ricci.data[idx2(n, j, i) * nodes + node];
                asym = asym.max((a - b).abs());
                out[idx2(n, i, j) * nodes + node] = 0.5 * (a + b);
            }
        }
    }
    (out, asym)
}

fn dconn_rhs(
    state: &FlowState,
    cfg: &FlowConfig,
    geo: &DGridGeometry,
) -> Result<FlowRhs, FlowError> {
    let n = state.fields.domain.base_dim();
    let nodes = state.fields.domain.node_count();
    let gref = GeometryRef::DConn {
        geo,
        ncoef: &state.fields.ncoef,
    };
    let lambda = lambda_normalization(&gref, cfg.normalize, cfg.lambda_divisor);

    let (ric_h, asym_h) = symmetrized_update(n, nodes, &geo.ricci_hh);
    let (ric_v, asym_v) = symmetrized_update(n, nodes, &geo.ricci_vv);
    let mut mixed = 0.0f64;
    for v in geo.ricci_ha.data.iter().chain(&geo.ricci_vh.data) {
        mixed = mixed.max(v.abs());
    }

    let mut dgh = vec![0.0; n * n * nodes];
    let mut dgv = vec![0.0; n * n * nodes];
    for c in 0..n * n {
        for node in 0..nodes {
            let k = c * nodes + node;
            dgh[k] = -2.0 * (ric_h[k] - lambda * state.fields.gh.data[k]);
            dgv[k] = -2.0 * (ric_v[k] - lambda * state.fields.gv.data[k]);
        }
    }

    let df = match cfg.f_coupling {
        FCoupling::Off => None,
        mode => Some(potential_rhs_dconn(state, geo, mode)?),
    };

    Ok(FlowRhs {
        dgh,
        dgv,
        df,
        diag: StepDiagnostics {
            lambda,
            mixed_residual: mixed,
            asym_norm: asym_h.max(asym_v),
        },
    })
}

/// df/dchi = -Lap f + |D f|^2 - R - S (+ n/tau in W mode).
fn potential_rhs_dconn(
    state: &FlowState,
    geo: &DGridGeometry,
    mode: FCoupling,
) -> Result<Vec<f64>, FlowError> {
    let n = state.fields.domain.base_dim();
    let nodes = state.fields.domain.node_count();
    let (ef_h, ef_v, hess_h, hess_v) = geo.scalar_hessian(&state.f_pot, &state.fields.ncoef);
    let mut out = vec![0.0; nodes];
    for node in 0..nodes {
        let mut lap = 0.0;
        let mut grad2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let ghi = geo.gh_inv.data[idx2(n, i, j) * nodes + node];
                let gvi = geo.gv_inv.data[idx2(n, i, j) * nodes + node];
                lap += ghi * hess_h.data[idx2(n, i, j) * nodes + node]
                    + gvi * hess_v.data[idx2(n, i, j) * nodes + node];
                grad2 += ghi * ef_h.data[i * nodes + node] * ef_h.data[j * nodes + node]
                    + gvi * ef_v.data[i * nodes + node] * ef_v.data[j * nodes + node];
            }
        }
        let scal = geo.scalar_h.data[node] + geo.scalar_v.data[node];
        out[node] = -lap + grad2 - scal;
        if mode == FCoupling::WCoupled {
            if state.tau <= 0.0 {
                return Err(FlowError::TauExhausted {
                    chi: state.chi,
                    tau: state.tau,
                });
            }
            out[node] += n as f64 / state.tau;
        }
    }
    Ok(out)
}

fn lc_rhs(state: &FlowState, cfg: &FlowConfig, geo: &LcGridGeometry) -> Result<FlowRhs, FlowError> {
    let n = state.fields.domain.base_dim();
    let d = 2 * n;
    let nodes = state.fields.domain.node_count();
    let gref = GeometryRef::Lc(geo);
    let lambda = lambda_normalization(&gref, cfg.normalize, cfg.lambda_divisor);

    // coordinate Ricci blocks
    let mut asym = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            for node in 0..nodes {
                let x = geo.ricci.data[idx2(d, a, b) * nodes + node];
                let y = geo.ricci.data[idx2(d, b, a) * nodes + node];
                asym = asym.max((x - y).abs());
            }
        }
    }

    let mut dgh = vec![0.0; n * n * nodes];
    let mut dgv = vec![0.0; n * n * nodes];
    let mut mixed = 0.0f64;
    for node in 0..nodes {
        let nc = state.fields.ncoef.at_node(node);
        for i in 0..n {
            for j in 0..n {
                // v-block: dg_ab = -2 (R_ab - lambda g_ab)
                let rvv = 0.5
                    * (geo.ricci.data[idx2(d, n + i, n + j) * nodes + node]
                        + geo.ricci.data[idx2(d, n + j, n + i) * nodes + node]);
                dgv[idx2(n, i, j) * nodes + node] =
                    -2.0 * (rvv - lambda * state.fields.gv.data[idx2(n, i, j) * nodes + node]);
                // h-block: dg_ij = 2 [N^a_i N^b_j (R_ab - lambda g_ab) - R_ij + lambda g_ij]
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        let rab = 0.5
                            * (geo.ricci.data[idx2(d, n + a, n + b) * nodes + node]
                                + geo.ricci.data[idx2(d, n + b, n + a) * nodes + node]);
                        acc += nc[idx2(n, a, i)]
                            * nc[idx2(n, b, j)]
                            * (rab
                                - lambda * state.fields.gv.data[idx2(n, a, b) * nodes + node]);
                    }
                }
                let rhh = 0.5
                    * (geo.ricci.data[idx2(d, i, j) * nodes + node]
                        + geo.ricci.data[idx2(d, j, i) * nodes + node]);
                dgh[idx2(n, i, j) * nodes + node] = 2.0
                    * (acc - rhh
                        + lambda * state.fields.gh.data[idx2(n, i, j) * nodes + node]);
            }
        }
        // mixed-equation residual: N^e_i dg_ea + 2 R_{i, n+a} - 2 lambda N^e_i g_ea
        for i in 0..n {
            for a in 0..n {
                let mut res = 2.0 * geo.ricci.data[idx2(d, i, n + a) * nodes + node];
                for e in 0..n {
                    res += nc[idx2(n, e, i)] * dgv[idx2(n, e, a) * nodes + node];
                    res -= 2.0
                        * lambda
                        * nc[idx2(n, e, i)]
                        * state.fields.gv.data[idx2(n, e, a) * nodes + node];
                }
                mixed = mixed.max(res.abs());
            }
        }
    }

    let df = match cfg.f_coupling {
        FCoupling::Off => None,
        mode => Some(potential_rhs_lc(state, geo, mode)?),
    };

    Ok(FlowRhs {
        dgh,
        dgv,
        df,
        diag: StepDiagnostics {
            lambda,
            mixed_residual: mixed,
            asym_norm: asym,
        },
    })
}

fn potential_rhs_lc(
    state: &FlowState,
    geo: &LcGridGeometry,
    mode: FCoupling,
) -> Result<Vec<f64>, FlowError> {
    let n = state.fields.domain.base_dim();
    let d = 2 * n;
    let nodes = state.fields.domain.node_count();
    let (df, hess) = geo.scalar_hessian(&state.f_pot);
    let mut out = vec![0.0; nodes];
    for node in 0..nodes {
        let ginv = geo.coord_metric_inv.at_node(node);
        let mut lap = 0.0;
        let mut grad2 = 0.0;
        for a in 0..d {
            for b in 0..d {
                lap += ginv[idx2(d, a, b)] * hess.data[idx2(d, a, b) * nodes + node];
                grad2 += ginv[idx2(d, a, b)]
                    * df.data[a * nodes + node]
                    * df.data[b * nodes + node];
            }
        }
        out[node] = -lap + grad2 - geo.scalar.data[node];
        if mode == FCoupling::WCoupled {
            if state.tau <= 0.0 {
                return Err(FlowError::TauExhausted {
                    chi: state.chi,
                    tau: state.tau,
                });
            }
            out[node] += n as f64 / state.tau;
        }
    }
    Ok(out)
}

fn rhs(state: &FlowState, cfg: &FlowConfig) -> Result<FlowRhs, FlowError> {
    match cfg.connection {
        ConnectionKind::DConn => {
            let geo = grid_dconn_geometry(&state.fields)?;
            dconn_rhs(state, cfg, &geo)
        }
        ConnectionKind::Lc => {
            let geo = grid_lc_geometry(&state.fields)?;
            lc_rhs(state, cfg, &geo)
        }
    }
}

fn apply(state: &FlowState, r: &FlowRhs, dt: f64, cfg: &FlowConfig) -> FlowState {
    let mut out = state.clone();
    for (dst, src) in out.fields.gh.data.iter_mut().zip(&r.dgh) {
        *dst += dt * src;
    }
    for (dst, src) in out.fields.gv.data.iter_mut().zip(&r.dgv) {
        *dst += dt * src;
    }
    if let Some(df) = &r.df {
        for (dst, src) in out.f_pot.data.iter_mut().zip(df) {
            *dst += dt * src;
        }
    }
    out.chi += dt;
    if cfg.f_coupling == FCoupling::WCoupled {
        out.tau -= dt;
    }
    out
}

fn check_state(state: &FlowState) -> Result<(), FlowError> {
    for (node, v) in state.fields.gh.data.iter().enumerate() {
        if !v.is_finite() {
            return Err(FlowError::NonFinite {
                chi: state.chi,
                node: node % state.fields.domain.node_count(),
            });
        }
    }
    let (dh, dv) = state.fields.min_abs_det();
    if dh <= 0.0 || dv <= 0.0 || !dh.is_finite() {
        return Err(FlowError::Degenerate {
            chi: state.chi,
            det: dh.min(dv),
        });
    }
    Ok(())
}

/// Advance one step with the chosen connection and integrator. Returns the
/// new state and the diagnostics of the (first-stage) right-hand side.
pub fn step(state: &FlowState, cfg: &FlowConfig) -> Result<(FlowState, StepDiagnostics), FlowError> {
    let out = match cfg.integrator {
        FlowIntegrator::Euler => {
            let r = rhs(state, cfg)?;
            let next = apply(state, &r, cfg.dt, cfg);
            (next, r.diag)
        }
        FlowIntegrator::Rk4 => {
            let dt = cfg.dt;
            let k1 = rhs(state, cfg)?;
            let s2 = apply(state, &k1, 0.5 * dt, cfg_half(cfg));
            let k2 = rhs(&s2, cfg)?;
            let s3 = apply(state, &k2, 0.5 * dt, cfg_half(cfg));
            let k3 = rhs(&s3, cfg)?;
            let s4 = apply(state, &k3, dt, cfg);
            let k4 = rhs(&s4, cfg)?;
            let mut combined = k1;
            let w = [2.0, 2.0, 1.0];
            for (idx, kk) in [k2, k3, k4].into_iter().enumerate() {
                for (a, b) in combined.dgh.iter_mut().zip(&kk.dgh) {
                    *a += w[idx] * b;
                }
                for (a, b) in combined.dgv.iter_mut().zip(&kk.dgv) {
                    *a += w[idx] * b;
                }
                if let (Some(af), Some(bf)) = (combined.df.as_mut(), kk.df.as_ref()) {
                    for (a, b) in af.iter_mut().zip(bf) {
                        *a += w[idx] * b;
                    }
                }
            }
            for a in combined.dgh.iter_mut() {
                *a /= 6.0;
            }
            for a in combined.dgv.iter_mut() {
                *a /= 6.0;
            }
            if let Some(af) = combined.df.as_mut() {
                for a in af.iter_mut() {
                    *a /= 6.0;
                }
            }
            let next = apply(state, &combined, dt, cfg);
            (next, combined.diag)
        }
    };
    check_state(&out.0)?;
    Ok(out)
}

// intermediate RK stages advance chi/tau fractionally; reuse `apply` with the
// same coupling flags
fn cfg_half(cfg: &FlowConfig) -> &FlowConfig {
    cfg
}

/// Evaluate the record row for the current state (with the state's own
/// connection geometry).
pub fn record(state: &FlowState, cfg: &FlowConfig, diag: &StepDiagnostics) -> Result<TimeSeriesRecord, FlowError> {
    let one = ScalarField::constant(&state.fields.domain, 1.0);
    let (f_val, w_val, e_avg, s_entropy, sigma, volume) = match cfg.connection {
        ConnectionKind::DConn => {
            let geo = grid_dconn_geometry(&state.fields)?;
            let gref = GeometryRef::DConn {
                geo: &geo,
                ncoef: &state.fields.ncoef,
            };
            let vol = integrate(&one, &geo.volume);
            let (fnorm, _) = entropy::normalize_f(&state.f_pot, state.tau.max(1e-12), &geo.volume)?;
            let t = entropy::thermodynamics(&state.fields, &gref, &fnorm, state.tau.max(1e-12), false)?;
            (
                t.f_functional,
                t.w_functional,
                t.e_avg,
                t.s_entropy,
                t.sigma,
                vol,
            )
        }
        ConnectionKind::Lc => {
            let geo = grid_lc_geometry(&state.fields)?;
            let gref = GeometryRef::Lc(&geo);
            let vol = integrate(&one, &geo.volume);
            let (fnorm, _) = entropy::normalize_f(&state.f_pot, state.tau.max(1e-12), &geo.volume)?;
            let t = entropy::thermodynamics(&state.fields, &gref, &fnorm, state.tau.max(1e-12), false)?;
            (
                t.f_functional,
                t.w_functional,
                t.e_avg,
                t.s_entropy,
                t.sigma,
                vol,
            )
        }
    };
    Ok(TimeSeriesRecord {
        chi: state.chi,
        tau: state.tau,
        f_functional: f_val,
        w_functional: w_val,
        e_avg,
        s_entropy,
        sigma,
        volume,
        ricci_mixed_residual: diag.mixed_residual,
        min_det_gh: state.min_det_gh(),
        asym_norm: diag.asym_norm,
    })
}

/// Completed run: time series plus snapshot states.
pub struct FlowRun {
    pub records: Vec<TimeSeriesRecord>,
    pub snapshots: Vec<(usize, FlowState)>,
    pub final_state: FlowState,
}

/// Iterate the configured stepper, recording every `snapshot_stride` steps
/// (including step 0 and the final step).
pub fn run(cfg: &FlowConfig, initial: FlowState) -> Result<FlowRun, FlowError> {
    let mut state = initial;
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let stride = cfg.snapshot_stride.max(1);

    let mut diag = StepDiagnostics::default();
    // initial diagnostics from a throwaway RHS evaluation
    {
        let r = rhs(&state, cfg)?;
        diag = r.diag;
    }
    records.push(record(&state, cfg, &diag)?);
    snapshots.push((0, state.clone()));

    for k in 1..=cfg.steps {
        let (next, d) = step(&state, cfg)?;
        state = next;
        diag = d;
        if k % stride == 0 || k == cfg.steps {
            records.push(record(&state, cfg, &diag)?);
            snapshots.push((k, state.clone()));
        }
    }
    Ok(FlowRun {
        records,
        snapshots,
        final_state: state,
    })
}

/// Initial frame field from a pointwise factorization of the coordinate
/// metric: rows are frame vectors, E g E^T = eta with eta the signature.
pub fn frames_from_metric(fields: &GridDMetricFields) -> (TensorField, Vec<f64>) {
    let dom = &fields.domain;
    let n = dom.base_dim();
    let d = 2 * n;
    let nodes = dom.node_count();
    let coord = crate::fields::gridgeom::coordinate_metric_field(fields);
    let mut frames = TensorField::zeros(dom, vec![d, d]);
    let mut eta = vec![1.0; d];
    for node in 0..nodes {
        let g = nalgebra::DMatrix::from_row_slice(d, d, &coord.at_node(node));
        let eig = nalgebra::SymmetricEigen::new(g);
        // E = |Lambda|^{-1/2} Q^T so that E g E^T = sign(Lambda)
        let mut e = nalgebra::DMatrix::<f64>::zeros(d, d);
        for r in 0..d {
            let lam = eig.eigenvalues[r];
            let scale = lam.abs().sqrt().recip();
            if node == 0 {
                eta[r] = if lam >= 0.0 { 1.0 } else { -1.0 };
            }
            for c in 0..d {
                e[(r, c)] = scale * eig.eigenvectors[(c, r)];
            }
        }
        let mut flat = vec![0.0; d * d];
        for r in 0..d {
            for c in 0..d {
                flat[idx2(d, r, c)] = e[(r, c)];
            }
        }
        frames.set_node(node, &flat);
    }
    (frames, eta)
}

/// One evolution step of the preferred-frame field:
/// d e_alpha^abar = g^{abar bbar} R_{bbar gbar} e_alpha^gbar with the
/// coordinate-basis Ricci of the chosen connection.
pub fn frame_evolution_step(
    frames: &TensorField,
    state: &FlowState,
    dt: f64,
    connection: ConnectionKind,
) -> Result<TensorField, FlowError> {
    let dom = &state.fields.domain;
    let n = dom.base_dim();
    let d = 2 * n;
    let nodes = dom.node_count();

    // coordinate Ricci of the chosen connection
    let (ricci_coord, metric_inv) = match connection {
        ConnectionKind::Lc => {
            let geo = grid_lc_geometry(&state.fields)?;
            (geo.ricci, geo.coord_metric_inv)
        }
        ConnectionKind::DConn => {
            let geo = grid_dconn_geometry(&state.fields)?;
            // transform adapted blocks to the coordinate frame with the
            // coframe (dx, dy + N dx)
            let mut out = TensorField::zeros(dom, vec![d, d]);
            for node in 0..nodes {
                let nc = state.fields.ncoef.at_node(node);
                let rh = geo.ricci_hh.at_node(node);
                let rha = geo.ricci_ha.at_node(node);
                let rvh = geo.ricci_vh.at_node(node);
                let rvv = geo.ricci_vv.at_node(node);
                for i in 0..n {
                    for j in 0..n {
                        let mut hh = rh[idx2(n, i, j)];
                        for a in 0..n {
                            hh += rha[idx2(n, i, a)] * nc[idx2(n, a, j)]
                                + nc[idx2(n, a, i)] * rvh[idx2(n, a, j)];
                            for b in 0..n {
                                hh += nc[idx2(n, a, i)] * nc[idx2(n, b, j)] * rvv[idx2(n, a, b)];
                            }
                        }
                        out.data[idx2(d, i, j) * nodes + node] = hh;
                        let mut hv = rha[idx2(n, i, j)];
                        let mut vh = rvh[idx2(n, j, i)];
                        for a in 0..n {
                            hv += nc[idx2(n, a, i)] * rvv[idx2(n, a, j)];
                            vh += rvv[idx2(n, j, a)] * nc[idx2(n, a, i)];
                        }
                        out.data[idx2(d, i, n + j) * nodes + node] = hv;
                        out.data[idx2(d, n + j, i) * nodes + node] = vh;
                        out.data[idx2(d, n + i, n + j) * nodes + node] = rvv[idx2(n, i, j)];
                    }
                }
            }
            let coord = crate::fields::gridgeom::coordinate_metric_field(&state.fields);
            let mut inv = TensorField::zeros(dom, vec![d, d]);
            for node in 0..nodes {
                let m = coord.at_node(node);
                let minv = invert_flat(d, &m).ok_or(FlowError::Degenerate {
                    chi: state.chi,
                    det: det_flat(d, &m),
                })?;
                inv.set_node(node, &minv);
            }
            (out, inv)
        }
    };

    let mut out = frames.clone();
    for node in 0..nodes {
        let e = frames.at_node(node);
        let ric = ricci_coord.at_node(node);
        let ginv = metric_inv.at_node(node);
        // M^abar_gbar = g^{abar bbar} R_{bbar gbar}
        let mut m = vec![0.0; d * d];
        for a in 0..d {
            for g in 0..d {
                let mut acc = 0.0;
                for b in 0..d {
                    acc += ginv[idx2(d, a, b)] * ric[idx2(d, b, g)];
                }
                m[idx2(d, a, g)] = acc;
            }
        }
        let mut next = vec![0.0; d * d];
        for alpha in 0..d {
            for abar in 0..d {
                let mut acc = e[idx2(d, alpha, abar)];
                for gbar in 0..d {
                    acc += dt * m[idx2(d, abar, gbar)] * e[idx2(d, alpha, gbar)];
                }
                next[idx2(d, alpha, abar)] = acc;
            }
        }
        out.set_node(node, &next);
    }
    Ok(out)
}

/// Breather classification of one metric block pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BreatherKind {
    Steady,
    Shrinking,
    Expanding,
    None,
}

#[derive(Debug, Clone, Serialize)]
pub struct BreatherReport {
    pub h_kind: BreatherKind,
    pub h_alpha: f64,
    pub h_deviation: f64,
    pub v_kind: BreatherKind,
    pub v_alpha: f64,
    pub v_deviation: f64,
}

fn classify_block(a: &TensorField, b: &TensorField, tol: f64) -> (BreatherKind, f64, f64) {
    // least-squares seed for alpha, then ternary refinement of the max-norm
    // relative deviation |alpha A - B| / max|B|
    let mut num = 0.0;
    let mut den = 0.0;
    let mut bmax: f64 = 1e-300;
    for (x, y) in a.data.iter().zip(&b.data) {
        num += x * y;
        den += x * x;
        bmax = bmax.max(y.abs());
    }
    let seed = (num / den).max(1e-12);
    let dev = |alpha: f64| -> f64 {
        let mut worst = 0.0f64;
        for (x, y) in a.data.iter().zip(&b.data) {
            worst = worst.max((alpha * x - y).abs());
        }
        worst / bmax
    };
    let (mut lo, mut hi) = (seed / 8.0, seed * 8.0);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if dev(m1) <= dev(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let deviation = dev(alpha);
    let kind = if deviation >= tol {
        BreatherKind::None
    } else if (alpha - 1.0).abs() < tol {
        BreatherKind::Steady
    } else if alpha < 1.0 {
        BreatherKind::Shrinking
    } else {
        BreatherKind::Expanding
    };
    (kind, alpha, deviation)
}

/// Pointwise homothety detection between two states: per-block scale factors
/// and classification (diffeomorphism freedom is not searched).
pub fn breather_classify(a: &FlowState, b: &FlowState, tol: f64) -> BreatherReport {
    let (h_kind, h_alpha, h_deviation) = classify_block(&a.fields.gh, &b.fields.gh, tol);
    let (v_kind, v_alpha, v_deviation) = classify_block(&a.fields.gv, &b.fields.gv, tol);
    BreatherReport {
        h_kind,
        h_alpha,
        h_deviation,
        v_kind,
        v_alpha,
        v_deviation,
    }
}
