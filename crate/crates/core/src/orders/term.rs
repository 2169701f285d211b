//! Symbolic order types built from copies of ℚ and finite blocks.
//!
//! A colored order is encoded by replacing each point of color `c` with
//! `ℚ + (c+2)`; recovery reads one point per finite block back off.

use std::fmt;

use serde_json::{json, Value};

use super::{ColoredOrder, LT};
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::logic::eval::ExtensionCache;
use crate::logic::formula::{Formula, Var};
use crate::logic::structure::tuple_index;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    DenseQ,
    Fin(u64),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct OrderTerm {
    pub blocks: Vec<Block>,
}

impl OrderTerm {
    pub fn new(blocks: Vec<Block>) -> Self {
        OrderTerm { blocks }
    }

    /// Merge `ℚ + ℚ` into `ℚ` and `k + l` into `k+l`; drop `Fin(0)`.
    pub fn normalize(&self) -> OrderTerm {
        let mut out: Vec<Block> = Vec::with_capacity(self.blocks.len());
        for &b in &self.blocks {
            match (out.last_mut(), b) {
                (_, Block::Fin(0)) => {}
                (Some(Block::DenseQ), Block::DenseQ) => {}
                (Some(Block::Fin(k)), Block::Fin(l)) => *k += l,
                _ => out.push(b),
            }
        }
        OrderTerm { blocks: out }
    }

    pub fn is_normalized(&self) -> bool {
        self.normalize() == *self
    }

    pub fn to_value(&self) -> Value {
        Value::Array(
            self.blocks
                .iter()
                .map(|b| match b {
                    Block::DenseQ => json!("Q"),
                    Block::Fin(k) => json!(k),
                })
                .collect(),
        )
    }

    /// `["Q", 2, "Q", 3]`, or the text form `Q + 2 + Q + 3`.
    pub fn from_value(v: &Value) -> Result<OrderTerm> {
        if let Some(s) = v.as_str() {
            return s.parse();
        }
        let items = v
            .as_array()
            .ok_or_else(|| Error::Invalid("order term: expected an array or a string".into()))?;
        let blocks = items
            .iter()
            .map(|x| match x {
                Value::String(s) if s == "Q" => Ok(Block::DenseQ),
                _ => x
                    .as_u64()
                    .map(Block::Fin)
                    .ok_or_else(|| Error::Invalid(format!("order term: bad block {x}"))),
            })
            .collect::<Result<_>>()?;
        Ok(OrderTerm { blocks })
    }
}

impl fmt::Display for OrderTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.blocks.is_empty() {
            return write!(f, "0");
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            match b {
                Block::DenseQ => write!(f, "Q")?,
                Block::Fin(k) => write!(f, "{k}")?,
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for OrderTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<OrderTerm> {
        let s = s.trim();
        if s.is_empty() || s == "0" {
            return Ok(OrderTerm::default());
        }
        let blocks = s
            .split('+')
            .map(|p| match p.trim() {
                "Q" => Ok(Block::DenseQ),
                t => t
                    .parse::<u64>()
                    .map(Block::Fin)
                    .map_err(|_| Error::Invalid(format!("order term: bad block `{t}`"))),
            })
            .collect::<Result<_>>()?;
        Ok(OrderTerm { blocks })
    }
}

/// `Σ_a (ℚ + (color(a) + 2))` over the points in order.
pub fn encode_order(o: &ColoredOrder) -> OrderTerm {
    let blocks = o
        .vertex_colors()
        .iter()
        .flat_map(|&c| [Block::DenseQ, Block::Fin(c as u64 + 2)])
        .collect();
    OrderTerm { blocks }.normalize()
}

/// Read back the order and vertex colors: one point per finite block, of
/// color `size - 2`. Terms outside the image of [`encode_order`] are
/// rejected.
pub fn recover_order(t: &OrderTerm) -> Result<(usize, Vec<u32>)> {
    let t = t.normalize();
    let mut colors = Vec::new();
    let mut dense_before = false;
    for (i, b) in t.blocks.iter().enumerate() {
        match *b {
            Block::DenseQ => dense_before = true,
            Block::Fin(k) => {
                if !dense_before {
                    return Err(Error::Invalid(format!("block {i} ({k}) has no dense block before it")));
                }
                if k < 2 {
                    return Err(Error::Invalid(format!("block {i} has size {k}; encoded blocks have size at least 2")));
                }
                let c = u32::try_from(k - 2).map_err(|_| Error::Invalid(format!("block {i} is too large")))?;
                colors.push(c);
                dense_before = false;
            }
        }
    }
    if dense_before {
        return Err(Error::Invalid("trailing dense block: not an encoded order".into()));
    }
    Ok((colors.len(), colors))
}

/// Recover the order and color the pairs with the given defining formulas
/// (free variables `x0 < x1`, over `Lt` and the `P_i`). Every increasing
/// pair must satisfy exactly one of them.
pub fn recover_order_with_edges(t: &OrderTerm, defs: &[(u32, Formula)]) -> Result<ColoredOrder> {
    let (n, colors) = recover_order(t)?;
    let bare = ColoredOrder::new(colors.clone(), |_, _| 0);
    let m = bare.to_structure(true, false);
    let budget = Budget::unlimited();
    let mut ext = ExtensionCache::new(&m, &budget);
    let mut edge = vec![None; n * n];
    for (j, f) in defs {
        if f.free_vars().iter().any(|v| v.0 > 1) {
            return Err(Error::Invalid(format!("formula for color {j} has free variables beyond x0, x1")));
        }
        // pad to two free variables so extensions index the same way
        let f2 = Formula::and([f.clone(), Formula::atom(LT, vec![Var(0), Var(1)])]);
        let x = ext.get(&f2)?;
        for a in 0..n {
            for b in a + 1..n {
                if x.bits.contains(tuple_index(&[a, b], n)) {
                    if let Some(old) = edge[a * n + b].replace(*j) {
                        return Err(Error::Invalid(format!("pair {a},{b} satisfies the formulas of {old} and {j}")));
                    }
                }
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            if edge[a * n + b].is_none() {
                return Err(Error::Invalid(format!("pair {a},{b} satisfies no formula")));
            }
        }
    }
    Ok(ColoredOrder::new(colors, |a, b| edge[a * n + b].expect("checked")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Block::*;

    #[test]
    fn encode_examples() {
        let o = ColoredOrder::new(vec![0, 1], |_, _| 0);
        assert_eq!(encode_order(&o).blocks, vec![DenseQ, Fin(2), DenseQ, Fin(3)]);
        assert_eq!(encode_order(&ColoredOrder::new(vec![], |_, _| 0)).blocks, vec![]);
        assert_eq!(encode_order(&ColoredOrder::new(vec![0], |_, _| 0)).blocks, vec![DenseQ, Fin(2)]);
    }

    #[test]
    fn recover_examples() {
        assert_eq!(recover_order(&OrderTerm::new(vec![DenseQ, Fin(2), DenseQ, Fin(3)])).unwrap(), (2, vec![0, 1]));
        assert_eq!(recover_order(&OrderTerm::default()).unwrap(), (0, vec![]));
        assert!(recover_order(&OrderTerm::new(vec![DenseQ, Fin(1)])).is_err());
        assert!(recover_order(&OrderTerm::new(vec![Fin(2)])).is_err());
        assert!(recover_order(&OrderTerm::new(vec![DenseQ, Fin(2), DenseQ])).is_err());
        // ℚ + ℚ + 1 + 1 is ℚ + 2
        assert_eq!(recover_order(&OrderTerm::new(vec![DenseQ, DenseQ, Fin(1), Fin(1)])).unwrap(), (1, vec![0]));
    }

    #[test]
    fn normalization() {
        let t = OrderTerm::new(vec![DenseQ, DenseQ, Fin(1), Fin(0), Fin(3), DenseQ]);
        assert_eq!(t.normalize().blocks, vec![DenseQ, Fin(4), DenseQ]);
        assert!(t.normalize().is_normalized());
        let s: OrderTerm = "Q + 2 + Q + 3".parse().unwrap();
        assert_eq!(s.to_string(), "Q + 2 + Q + 3");
        assert_eq!(OrderTerm::from_value(&s.to_value()).unwrap(), s);
    }

    #[test]
    fn edges_from_formulas() {
        let t: OrderTerm = "Q + 2 + Q + 3 + Q + 2".parse().unwrap();
        let p1 = |v| Formula::atom("P1", vec![Var(v)]);
        let defs = vec![
            (7, Formula::or([p1(0), p1(1)])),
            (8, Formula::and([Formula::not(p1(0)), Formula::not(p1(1))])),
        ];
        let o = recover_order_with_edges(&t, &defs).unwrap();
        assert_eq!(o.edge(0, 1), 7);
        assert_eq!(o.edge(0, 2), 8);
        assert!(recover_order_with_edges(&t, &defs[..1]).is_err());
    }
}
