//! Complete mixed-partial tables of a Lagrangian at a phase point.

use std::sync::Arc;

use super::ast::ExpressionAst;
use super::taylor::{JetSpace, TaylorPoly};
use super::ExprError;

/// Largest mixed-derivative order exposed through [`jet`].
pub const MAX_JET_ORDER: usize = 4;

/// All mixed partials of L at a point, up to a fixed order.
///
/// The table is complete: every multi-index with |alpha| <= order is present,
/// and permutation symmetry holds exactly because each derivative is stored
/// once, keyed by the multi-index itself.
#[derive(Clone)]
pub struct Jet {
    point: Vec<f64>,
    order: usize,
    space: Arc<JetSpace>,
    poly: TaylorPoly,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("point", &self.point)
            .field("order", &self.order)
            .field("value", &self.poly.value())
            .finish()
    }
}

impl Jet {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    /// Function value at the expansion point.
    pub fn value(&self) -> f64 {
        self.poly.value()
    }

    /// Partial derivative for a multi-index over the 2n coordinates.
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        debug_assert!(alpha.iter().map(|&a| a as usize).sum::<usize>() <= self.order);
        self.poly.partial(alpha)
    }

    /// Partial derivative named by a list of variable indices, e.g.
    /// `[0, 2, 2]` for d^3 / dx1 dy1 dy1 at n = 2. Order of the list is
    /// irrelevant (mixed partials are symmetric by construction).
    pub fn partial_vars(&self, vars: &[usize]) -> f64 {
        let mut alpha = vec![0u8; self.space.nvars()];
        for &v in vars {
            alpha[v] += 1;
        }
        self.partial(&alpha)
    }

    /// Multi-indices with |alpha| <= order, in the table's canonical order.
    pub fn multi_indices(&self) -> &[Vec<u8>] {
        self.space.monomials()
    }
}

/// Compute the full jet of `ast` at `coords` (x1..xn, y1..yn) up to `order`.
///
/// Exact to machine rounding: derivatives come from forward propagation of
/// truncated Taylor data through the tree, never from finite differences.
pub fn jet(ast: &ExpressionAst, coords: &[f64], order: usize) -> Result<Jet, ExprError> {
    if order == 0 || order > MAX_JET_ORDER {
        return Err(ExprError::JetOrder {
            order,
            max: MAX_JET_ORDER,
        });
    }
    let space = JetSpace::get(2 * ast.base_dim(), order);
    let poly = ast.evaluate_taylor(&space, coords)?;
    Ok(Jet {
        point: coords.to_vec(),
        order,
        space,
        poly,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_relative_eq;

    #[test]
    fn second_partial_of_square_is_two() {
        let ast = parse("y1^2", 2).unwrap();
        for p in [[0.0, 0.0, 0.0, 0.0], [1.0, -2.0, 3.0, 0.5]] {
            let j = jet(&ast, &p, 2).unwrap();
            assert_relative_eq!(j.partial_vars(&[2, 2]), 2.0);
        }
    }

    #[test]
    fn third_mixed_partial_of_triple_product() {
        let ast = parse("x1*y1*y2", 2).unwrap();
        let j = jet(&ast, &[0.7, 0.1, -0.3, 0.9], 3).unwrap();
        assert_relative_eq!(j.partial_vars(&[0, 2, 3]), 1.0);
    }

    #[test]
    fn exp_weighted_square_third_partial() {
        // L = exp(x1)(y1^2 + y2^2) at x1 = 0, y = (1,1): d^3 L / dx1 dy1^2 = 2
        let ast = parse("exp(x1)*(y1^2 + y2^2)", 2).unwrap();
        let j = jet(&ast, &[0.0, 0.0, 1.0, 1.0], 3).unwrap();
        assert_relative_eq!(j.partial_vars(&[0, 2, 2]), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn order_cap_enforced() {
        let ast = parse("y1^2", 2).unwrap();
        assert!(jet(&ast, &[0.0; 4], 5).is_err());
    }

    #[test]
    fn domain_error_reports_offending_node() {
        let ast = parse("log(y1)", 2).unwrap();
        let err = ast.evaluate(&[0.0, 0.0, -1.0, 0.0]).unwrap_err();
        assert!(matches!(err, ExprError::Domain { offset: 0, .. }));
        let err = jet(&ast, &[0.0, 0.0, -1.0, 0.0], 2).unwrap_err();
        assert!(matches!(err, ExprError::Domain { .. }));
    }
}
