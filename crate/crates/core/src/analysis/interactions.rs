use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monomials of degree 1..=order over `base_dim` variables, ordered by
/// degree and then lexicographically by variable indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionDesign {
    pub base_dim: usize,
    pub order: usize,
    /// Also include repeated-variable products such as `x_i²`.
    pub include_squares: bool,
    pub terms: Vec<Vec<usize>>,
    pub feature_names: Vec<String>,
}

fn combos(d: usize, r: usize, repeat: bool, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == r {
        out.push(cur.clone());
        return;
    }
    for i in start..d {
        cur.push(i);
        combos(d, r, repeat, if repeat { i } else { i + 1 }, cur, out);
        cur.pop();
    }
}

impl InteractionDesign {
    pub fn new(base_dim: usize, order: usize, include_squares: bool, names: Option<&[String]>) -> Result<Self> {
        if order == 0 || order > 4 {
            return Err(Error::input("interaction order must be 1..=4"));
        }
        if base_dim == 0 || (!include_squares && order > base_dim) {
            return Err(Error::input(format!(
                "order {order} needs at least {order} distinct variables, got {base_dim}"
            )));
        }
        if let Some(n) = names {
            if n.len() != base_dim {
                return Err(Error::input("one name per base variable required"));
            }
        }
        let mut terms = Vec::new();
        for r in 1..=order {
            combos(base_dim, r, include_squares, 0, &mut Vec::new(), &mut terms);
        }
        let name = |i: usize| names.map_or_else(|| format!("x{}", i + 1), |n| n[i].clone());
        let feature_names = terms
            .iter()
            .map(|t| t.iter().map(|&i| name(i)).collect::<Vec<_>>().join("*"))
            .collect();
        Ok(InteractionDesign {
            base_dim,
            order,
            include_squares,
            terms,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn expand(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.base_dim {
            return Err(Error::input(format!(
                "expected {} variables, got {}",
                self.base_dim,
                x.len()
            )));
        }
        Ok(self.terms.iter().map(|t| t.iter().map(|&i| x[i]).product()).collect())
    }
}

/// Distinct-variable products of `x` up to `order`.
pub fn interaction_expand(x: &[f64], order: usize) -> Result<Vec<f64>> {
    InteractionDesign::new(x.len(), order, false, None)?.expand(x)
}

/// `Σ_{r=1..order} C(base_dim, r)`.
pub fn feature_count(base_dim: usize, order: usize) -> usize {
    let mut total = 0;
    let mut c = 1usize;
    for r in 1..=order.min(base_dim) {
        c = c * (base_dim + 1 - r) / r;
        total += c;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_variables_order_two() {
        assert_eq!(interaction_expand(&[2.0, 3.0], 2).unwrap(), vec![2.0, 3.0, 6.0]);
    }

    #[test]
    fn three_variables_order_three() {
        let v = interaction_expand(&[2.0, 3.0, 5.0], 3).unwrap();
        assert_eq!(v, vec![2.0, 3.0, 5.0, 6.0, 10.0, 15.0, 30.0]);
    }

    #[test]
    fn order_one_is_identity() {
        assert_eq!(interaction_expand(&[1.5, -2.0, 0.0], 1).unwrap(), vec![1.5, -2.0, 0.0]);
    }

    #[test]
    fn order_above_dim_fails() {
        assert!(interaction_expand(&[1.0, 2.0], 3).is_err());
        assert!(interaction_expand(&[1.0, 2.0, 3.0, 4.0, 5.0], 5).is_err());
    }

    #[test]
    fn squares_toggle() {
        let d = InteractionDesign::new(2, 2, true, None).unwrap();
        assert_eq!(d.expand(&[2.0, 3.0]).unwrap(), vec![2.0, 3.0, 4.0, 6.0, 9.0]);
        assert_eq!(d.feature_names, ["x1", "x2", "x1*x1", "x1*x2", "x2*x2"]);
    }
}
