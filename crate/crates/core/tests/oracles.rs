//! Independent-route oracles: commutator curvature, Richardson finite
//! differences, and hand-derived reference values.

use ffr_core::connections::formulas::{idx2, idx3, idx4};
use ffr_core::connections::{canonical_dconn, conn_derivs_poly, curvature_blocks, dmetric_poly};
use ffr_core::expr::taylor::TaylorPoly;
use ffr_core::expr::{jet, parse};
use ffr_core::fdref;
use ffr_core::geometry::{LagrangeExpansion, PhasePoint};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Curvature from first principles: R(e_d, e_g) e_b = [D_d, D_g] e_b
/// - D_{[e_d, e_g]} e_b, computed over Taylor polynomials so the frame
/// derivatives of the connection coefficients are exact. Independent of the
/// closed-form block formulas.
fn commutator_curvature(
    ex: &LagrangeExpansion,
    full_conn: &[TaylorPoly],
    omega: &[TaylorPoly],
    dy_n: &[TaylorPoly],
) -> Vec<f64> {
    let n = ex.dim();
    let d = 2 * n;
    let e_dir = |dir: usize, p: &TaylorPoly| -> TaylorPoly {
        if dir < n {
            ex.e_h(dir, p)
        } else {
            ex.e_v(dir - n, p)
        }
    };
    // frame commutator coefficients [e_a, e_b] = w[g][a][b] e_g as values
    let mut wfr = vec![0.0; d * d * d];
    for i in 0..n {
        for j in 0..n {
            for b in 0..n {
                wfr[idx3(d, n + b, i, j)] = omega[idx3(n, b, i, j)].value();
            }
        }
        for b in 0..n {
            for c in 0..n {
                wfr[idx3(d, n + c, i, n + b)] = dy_n[idx3(n, c, i, b)].value();
                wfr[idx3(d, n + c, n + b, i)] = -dy_n[idx3(n, c, i, b)].value();
            }
        }
    }
    let conn_val = |m: usize, a: usize, b: usize| full_conn[idx3(d, m, a, b)].value();
    let mut out = vec![0.0; d * d * d * d];
    for beta in 0..d {
        for gamma in 0..d {
            for delta in 0..d {
                for mu in 0..d {
                    // e_delta(Gamma^mu_{beta gamma}) + Gamma^nu_{beta gamma} Gamma^mu_{nu delta}
                    let mut t1 = e_dir(delta, &full_conn[idx3(d, mu, beta, gamma)]).value();
                    let mut t2 = e_dir(gamma, &full_conn[idx3(d, mu, beta, delta)]).value();
                    for nu in 0..d {
                        t1 += conn_val(nu, beta, gamma) * conn_val(mu, nu, delta);
                        t2 += conn_val(nu, beta, delta) * conn_val(mu, nu, gamma);
                    }
                    // D over the commutator [e_delta, e_gamma]
                    let mut t3 = 0.0;
                    for nu in 0..d {
                        t3 += wfr[idx3(d, nu, delta, gamma)] * conn_val(mu, beta, nu);
                    }
                    out[idx4(d, mu, beta, gamma, delta)] = t1 - t2 - t3;
                }
            }
        }
    }
    out
}

#[test]
fn curvature_blocks_match_commutator_oracle() {
    let src = "(1 + 0.3*cos(x1))*(y1^4 + y2^4 + y1^2*y2^2)^0.5 + 0.1*sin(x2)*y2^2";
    let ast = parse(src, 2).unwrap();
    let n = 2;
    let d = 2 * n;
    for u in [
        PhasePoint::new(vec![0.4, -0.2], vec![0.9, 1.2]),
        PhasePoint::new(vec![-0.9, 0.7], vec![1.3, 0.8]),
    ] {
        let ex = LagrangeExpansion::new(&ast, &u, 5, 1e-10).unwrap();
        let data = dmetric_poly(&ex);
        let conn = canonical_dconn(&data);
        let omega = data.omega();
        // embed connection families into the full cube of polynomials
        let zero = TaylorPoly::zero(ex.space());
        let mut full = vec![zero.clone(); d * d * d];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    full[idx3(d, a, b, c)] = conn.l_h[idx3(n, a, b, c)].clone();
                    full[idx3(d, n + a, n + b, c)] = conn.l_v[idx3(n, a, b, c)].clone();
                    full[idx3(d, a, b, n + c)] = conn.c_h[idx3(n, a, b, c)].clone();
                    full[idx3(d, n + a, n + b, n + c)] = conn.c_v[idx3(n, a, b, c)].clone();
                }
            }
        }
        let oracle = commutator_curvature(&ex, &full, &omega, &data.dy_n);

        // closed-form blocks
        let conn_v = {
            let val = |v: &Vec<TaylorPoly>| v.iter().map(|p| p.value()).collect::<Vec<f64>>();
            ffr_core::connections::DConnTables {
                n,
                l_h: val(&conn.l_h),
                l_v: val(&conn.l_v),
                c_h: val(&conn.c_h),
                c_v: val(&conn.c_v),
            }
        };
        let omega_v: Vec<f64> = omega.iter().map(|p| p.value()).collect();
        let dyn_v: Vec<f64> = data.dy_n.iter().map(|p| p.value()).collect();
        let der = conn_derivs_poly(&ex, &conn);
        let cb = curvature_blocks(&conn_v, &der, &omega_v, &dyn_v);

        let tol = 1e-10;
        for i in 0..n {
            for h in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        // R^i_{hjk}: gamma = j, delta = k
                        assert!(
                            (cb.r_h_hjk[idx4(n, i, h, j, k)] - oracle[idx4(d, i, h, j, k)]).abs()
                                < tol,
                            "r_h_hjk mismatch at ({i},{h},{j},{k})"
                        );
                        // R^a_{bjk}
                        assert!(
                            (cb.r_v_bjk[idx4(n, i, h, j, k)]
                                - oracle[idx4(d, n + i, n + h, j, k)])
                            .abs()
                                < tol,
                            "r_v_bjk mismatch"
                        );
                        // R^i_{jka}: gamma = k (h), delta = a (v)
                        assert!(
                            (cb.r_h_jka[idx4(n, i, h, j, k)]
                                - oracle[idx4(d, i, h, j, n + k)])
                            .abs()
                                < tol,
                            "r_h_jka mismatch at ({i},{h},{j},{k})"
                        );
                        // R^c_{bka}
                        assert!(
                            (cb.r_v_bka[idx4(n, i, h, j, k)]
                                - oracle[idx4(d, n + i, n + h, j, n + k)])
                            .abs()
                                < tol,
                            "r_v_bka mismatch at ({i},{h},{j},{k})"
                        );
                        // R^i_{jbc}: both directions vertical
                        assert!(
                            (cb.r_h_jbc[idx4(n, i, h, j, k)]
                                - oracle[idx4(d, i, h, n + j, n + k)])
                            .abs()
                                < tol,
                            "r_h_jbc mismatch"
                        );
                        // R^a_{bcd}
                        assert!(
                            (cb.r_v_bcd[idx4(n, i, h, j, k)]
                                - oracle[idx4(d, n + i, n + h, n + j, n + k)])
                            .abs()
                                < tol,
                            "r_v_bcd mismatch"
                        );
                        // cross-type upper/lower slots vanish for d-connections
                        assert!(oracle[idx4(d, n + i, h, j, k)].abs() < tol);
                        assert!(oracle[idx4(d, i, n + h, n + j, k)].abs() < tol);
                    }
                }
            }
        }
    }
}

#[test]
fn jet_first_and_second_derivatives_match_richardson_fd() {
    let sources = [
        "sin(x1 + 2*y2)",
        "cos(x2*y1)",
        "tan(0.3*x1 + 0.1*y1)",
        "exp(x1 - y2)",
        "log(2 + x2 + y1)",
        "sqrt(3 + x1*y2)",
        "sinh(x2 - y1)",
        "cosh(0.5*x1 + y2)",
        "tanh(x1*y1)",
        "x1/(2 + y2^2)",
        "(1 + x1^2)^1.5",
        "y1^3 - x2^2*y2",
        "-x1^2 + y1*y2",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for src in sources {
        let ast = parse(src, 2).unwrap();
        for _ in 0..8 {
            let coords: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.4..0.4)).collect();
            let j = match jet(&ast, &coords, 2) {
                Ok(j) => j,
                Err(_) => continue,
            };
            let f = |q: &[f64]| ast.evaluate(q).unwrap();
            for v in 0..4 {
                let fd = fdref::partial1(f, &coords, v, 1e-3);
                let got = j.partial_vars(&[v]);
                let scale = fd.abs().max(1.0);
                assert!(
                    (got - fd).abs() / scale < 1e-6,
                    "{src}: d/d{v} jet {got} vs fd {fd}"
                );
            }
            for v1 in 0..4 {
                for v2 in v1..4 {
                    let fd = fdref::partial2(f, &coords, v1, v2, 1e-3);
                    let got = j.partial_vars(&[v1, v2]);
                    let scale = fd.abs().max(1.0);
                    assert!(
                        (got - fd).abs() / scale < 1e-6,
                        "{src}: d2/d{v1}d{v2} jet {got} vs fd {fd}"
                    );
                }
            }
        }
    }
}

#[test]
fn mixed_partials_symmetric_under_permutation() {
    let src = "exp(0.3*x1)*sin(y1 + 0.5*x2)*cosh(0.2*y2) + x1*y1^2*y2";
    let ast = parse(src, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let coords: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let j = jet(&ast, &coords, 4).unwrap();
        // all permutations of a few index multisets hit the same table entry
        for vars in [
            vec![0usize, 1, 2, 3],
            vec![0, 0, 2, 2],
            vec![1, 2, 2, 3],
            vec![3, 2, 1],
            vec![2, 0],
        ] {
            let base = j.partial_vars(&vars);
            let mut perm = vars.clone();
            perm.reverse();
            assert_eq!(base, j.partial_vars(&perm));
            let mut rotated = vars.clone();
            rotated.rotate_left(1);
            assert_eq!(base, j.partial_vars(&rotated));
        }
    }
}

#[test]
fn frame_congruence_reconstructs_coordinate_metric() {
    let ast = parse("(1 + x1^2)*(y1^2 + y2^2)", 2).unwrap();
    let u = PhasePoint::new(vec![0.6, -0.3], vec![0.9, 0.5]);
    let dm = ffr_core::geometry::sasaki_dmetric(&ast, &u, 1e-10).unwrap();
    let frames = ffr_core::geometry::adapted_frames(&dm.nconn, &dm.g_h.g);
    let full = ffr_core::geometry::coordinate_metric(&dm);
    let n = 2;
    // congruence X^T diag(g_h, g_v) X with X[n+a][i] = N^a_i
    let mut x = nalgebra::DMatrix::<f64>::identity(2 * n, 2 * n);
    for a in 0..n {
        for i in 0..n {
            x[(n + a, i)] = dm.nconn.coeffs[(a, i)];
        }
    }
    let mut block = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = dm.g_h.g[(i, j)];
            block[(n + i, n + j)] = dm.g_v.g[(i, j)];
        }
    }
    let recon = x.transpose() * &block * &x;
    assert!((&recon - &full).amax() < 1e-12);
    // and e * e_inv is the identity exactly
    let prod = &frames.e * &frames.e_inv;
    assert!((prod - nalgebra::DMatrix::<f64>::identity(2 * n, 2 * n)).amax() == 0.0);
}
