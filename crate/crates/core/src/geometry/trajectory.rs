//! Fixed-step classical 4th-order integration of the Euler-Lagrange and
//! semispray trajectory systems.

use nalgebra::{DMatrix, DVector};

use crate::expr::ExpressionAst;

use super::{GeomError, LagrangeExpansion, PhasePoint};

/// Sampled trajectory: parameter values and flat states (x.., y..).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub s: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// CSV with columns s, x1..xn, y1..yn.
    pub fn to_csv(&self) -> String {
        let n = self.states[0].len() / 2;
        let mut out = String::from("s");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        for i in 1..=n {
            out.push_str(&format!(",y{i}"));
        }
        out.push('\n');
        for (s, st) in self.s.iter().zip(&self.states) {
            out.push_str(&format!("{s:.12e}"));
            for v in st {
                out.push_str(&format!(",{v:.12e}"));
            }
            out.push('\n');
        }
        out
    }
}

fn rk4<F>(mut deriv: F, u0: Vec<f64>, t_final: f64, steps: usize) -> Result<Trajectory, GeomError>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, GeomError>,
{
    assert!(steps >= 1);
    let h = t_final / steps as f64;
    let dim = u0.len();
    let mut s = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut u = u0;
    let mut t = 0.0;
    s.push(t);
    states.push(u.clone());
    for _ in 0..steps {
        let k1 = deriv(t, &u)?;
        let mut u2 = u.clone();
        for i in 0..dim {
            u2[i] = u[i] + 0.5 * h * k1[i];
        }
        let k2 = deriv(t + 0.5 * h, &u2)?;
        for i in 0..dim {
            u2[i] = u[i] + 0.5 * h * k2[i];
        }
        let k3 = deriv(t + 0.5 * h, &u2)?;
        for i in 0..dim {
            u2[i] = u[i] + h * k3[i];
        }
        let k4 = deriv(t + h, &u2)?;
        for i in 0..dim {
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
        s.push(t);
        states.push(u.clone());
    }
    Ok(Trajectory { s, states })
}

/// Integrate dx/ds = y, dy/ds = -2 G(x, y).
pub fn spray_trajectory(
    ast: &ExpressionAst,
    u0: &PhasePoint,
    t_final: f64,
    steps: usize,
    eps_reg: f64,
) -> Result<Trajectory, GeomError> {
    let n = ast.base_dim();
    rk4(
        |s, u| {
            let p = PhasePoint::from_coords(u);
            let ex = LagrangeExpansion::new(ast, &p, 2, eps_reg)
                .map_err(|e| wrap_degenerate(e, s))?;
            let g = ex.spray_values();
            let mut du = vec![0.0; 2 * n];
            for i in 0..n {
                du[i] = u[n + i];
                du[n + i] = -2.0 * g[i];
            }
            Ok(du)
        },
        u0.coords(),
        t_final,
        steps,
    )
}

/// Integrate the Euler-Lagrange equations d/ds (dL/dy^i) = dL/dx^i in
/// momentum form: the state is (x, p) with p_i = dL/dy^i, and each stage
/// recovers the velocity from p by Newton iteration with the inverse Hessian.
///
/// This discretizes the flow differently from [`spray_trajectory`] (which
/// advances (x, y) through the spray coefficients), so the two paths agree
/// only up to the integrator order. That makes the pair a working
/// equivalence check rather than two spellings of one update.
pub fn el_trajectory(
    ast: &ExpressionAst,
    u0: &PhasePoint,
    t_final: f64,
    steps: usize,
    eps_reg: f64,
) -> Result<Trajectory, GeomError> {
    let n = ast.base_dim();

    // velocity from momentum: solve dL/dy(x, y) = p
    let recover_y = |s: f64, x: &[f64], p: &[f64], y_guess: &[f64]| -> Result<Vec<f64>, GeomError> {
        let mut y = y_guess.to_vec();
        let mut coords = vec![0.0; 2 * n];
        coords[..n].copy_from_slice(x);
        for _ in 0..40 {
            coords[n..].copy_from_slice(&y);
            let j = crate::expr::jet(ast, &coords, 2).map_err(GeomError::Expr)?;
            let hess = DMatrix::from_fn(n, n, |i, jj| j.partial_vars(&[n + i, n + jj]));
            let det = hess.determinant();
            let thr = super::regularity_threshold(&hess, eps_reg);
            if !det.is_finite() || det.abs() <= thr {
                return Err(GeomError::TrajectoryDegenerate { s });
            }
            let mut resid = DVector::zeros(n);
            let mut scale = 1e-300f64;
            for i in 0..n {
                resid[i] = j.partial_vars(&[n + i]) - p[i];
                scale = scale.max(p[i].abs()).max(1.0);
            }
            let step = hess
                .lu()
                .solve(&resid)
                .ok_or(GeomError::TrajectoryDegenerate { s })?;
            let mut moved = 0.0f64;
            for i in 0..n {
                y[i] -= step[i];
                moved = moved.max(step[i].abs());
            }
            if resid.amax() <= 1e-13 * scale && moved <= 1e-13 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                return Ok(y);
            }
        }
        Ok(y)
    };

    // initial momentum from u0
    let coords0 = u0.coords();
    let j0 = crate::expr::jet(ast, &coords0, 2).map_err(GeomError::Expr)?;
    let mut state0 = coords0[..n].to_vec();
    for i in 0..n {
        state0.push(j0.partial_vars(&[n + i]));
    }

    let mut y_seed = u0.y.clone();
    let traj = rk4(
        |s, u| {
            let x = &u[..n];
            let p = &u[n..];
            let y = recover_y(s, x, p, &y_seed)?;
            y_seed = y.clone();
            let mut coords = x.to_vec();
            coords.extend_from_slice(&y);
            let j = crate::expr::jet(ast, &coords, 1).map_err(GeomError::Expr)?;
            let mut du = vec![0.0; 2 * n];
            for i in 0..n {
                du[i] = y[i];
                du[n + i] = j.partial_vars(&[i]);
            }
            Ok(du)
        },
        state0,
        t_final,
        steps,
    )?;

    // convert (x, p) samples back to (x, y)
    let mut states = Vec::with_capacity(traj.states.len());
    let mut y_cur = u0.y.clone();
    for (idx, st) in traj.states.iter().enumerate() {
        let y = recover_y(traj.s[idx], &st[..n], &st[n..], &y_cur)?;
        y_cur = y.clone();
        let mut out = st[..n].to_vec();
        out.extend_from_slice(&y);
        states.push(out);
    }
    Ok(Trajectory { s: traj.s, states })
}

fn wrap_degenerate(e: GeomError, s: f64) -> GeomError {
    match e {
        GeomError::Degenerate { .. } => GeomError::TrajectoryDegenerate { s },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_relative_eq;

    #[test]
    fn flat_trajectory_is_straight_line() {
        let ast = parse("y1^2 + y2^2", 2).unwrap();
        let u0 = PhasePoint::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let tr = spray_trajectory(&ast, &u0, 1.0, 100, 1e-10).unwrap();
        let end = tr.final_state();
        assert_relative_eq!(end[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(end[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(end[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spray_and_el_agree_at_fourth_order() {
        let ast = parse("(1 + x1^2)*(y1^2 + y2^2)", 2).unwrap();
        let u0 = PhasePoint::new(vec![0.3, -0.2], vec![0.7, 0.4]);
        let mut errs = Vec::new();
        for steps in [100usize, 200, 400] {
            let a = spray_trajectory(&ast, &u0, 1.0, steps, 1e-10).unwrap();
            let b = el_trajectory(&ast, &u0, 1.0, steps, 1e-10).unwrap();
            let mut maxd = 0.0f64;
            for (sa, sb) in a.states.iter().zip(&b.states) {
                for (va, vb) in sa.iter().zip(sb) {
                    maxd = maxd.max((va - vb).abs());
                }
            }
            errs.push(maxd);
        }
        let slope1 = (errs[0] / errs[1]).log2();
        let slope2 = (errs[1] / errs[2]).log2();
        assert!(
            slope1 > 3.5 && slope2 > 3.5,
            "convergence slopes too low: {slope1} {slope2} ({errs:?})"
        );
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let ast = parse("(1 + x1^2)*(y1^2 + y2^2)", 2).unwrap();
        let u0 = PhasePoint::new(vec![0.3, -0.2], vec![0.7, 0.4]);
        let fwd = spray_trajectory(&ast, &u0, 1.0, 1000, 1e-10).unwrap();
        let end = fwd.final_state().to_vec();
        let rev0 = PhasePoint::new(end[..2].to_vec(), vec![-end[2], -end[3]]);
        let back = spray_trajectory(&ast, &rev0, 1.0, 1000, 1e-10).unwrap();
        let fin = back.final_state();
        assert_relative_eq!(fin[0], u0.x[0], epsilon = 1e-6);
        assert_relative_eq!(fin[1], u0.x[1], epsilon = 1e-6);
        assert_relative_eq!(fin[2], -u0.y[0], epsilon = 1e-6);
        assert_relative_eq!(fin[3], -u0.y[1], epsilon = 1e-6);
    }
}
