//! Packed parameter vectors with a named block layout.
//!
//! Estimators differ in which blocks they carry (`beta` per subtype, `eta`,
//! `psi`, `gamma`); a `ParameterLayout` records the order and extent of each
//! block so gradients, Hessians and reports can address entries by name.

use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Block {
    /// Regression coefficients for subtype `k` (1-based), length `p`.
    Beta(usize),
    Eta,
    Psi,
    Gamma,
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Block::Beta(k) => write!(f, "beta{k}"),
            Block::Eta => write!(f, "eta"),
            Block::Psi => write!(f, "psi"),
            Block::Gamma => write!(f, "gamma"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    blocks: Vec<(Block, Range<usize>)>,
    dim: usize,
}

impl ParameterLayout {
    pub fn new(blocks: impl IntoIterator<Item = (Block, usize)>) -> Result<Self> {
        let mut out = Vec::new();
        let mut offset = 0usize;
        for (block, len) in blocks {
            if out.iter().any(|(b, _)| *b == block) {
                return Err(Error::Config(format!("duplicate parameter block {block}")));
            }
            out.push((block, offset..offset + len));
            offset += len;
        }
        Ok(Self { blocks: out, dim: offset })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&Block, Range<usize>)> {
        self.blocks.iter().map(|(b, r)| (b, r.clone()))
    }

    pub fn range(&self, block: &Block) -> Option<Range<usize>> {
        self.blocks.iter().find(|(b, _)| b == block).map(|(_, r)| r.clone())
    }

    pub fn contains(&self, block: &Block) -> bool {
        self.range(block).is_some()
    }

    /// Range of `beta` for subtype `k`; errors if absent.
    pub fn beta(&self, k: usize) -> Result<Range<usize>> {
        self.range(&Block::Beta(k))
            .ok_or_else(|| Error::Config(format!("layout has no beta block for subtype {k}")))
    }

    pub fn require(&self, block: &Block) -> Result<Range<usize>> {
        self.range(block).ok_or_else(|| Error::Config(format!("layout has no {block} block")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    layout: ParameterLayout,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(layout: ParameterLayout) -> Self {
        let values = vec![0.0; layout.dim()];
        Self { layout, values }
    }

    pub fn from_values(layout: ParameterLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.dim() {
            return Err(Error::Domain(format!(
                "value vector has length {}, layout requires {}",
                values.len(),
                layout.dim()
            )));
        }
        Ok(Self { layout, values })
    }

    /// Assembles a vector from named block slices. Every block of the layout
    /// must be supplied exactly once with the right length.
    pub fn pack(layout: ParameterLayout, parts: &[(Block, &[f64])]) -> Result<Self> {
        let mut values = vec![f64::NAN; layout.dim()];
        let mut filled = 0usize;
        for (block, slice) in parts {
            let range = layout.require(block)?;
            if range.len() != slice.len() {
                return Err(Error::Domain(format!(
                    "block {block} expects {} values, got {}",
                    range.len(),
                    slice.len()
                )));
            }
            values[range.clone()].copy_from_slice(slice);
            filled += slice.len();
        }
        if filled != layout.dim() {
            return Err(Error::Domain("pack did not cover every block".into()));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Block view; `None` when the layout lacks the block.
    pub fn block(&self, block: &Block) -> Option<&[f64]> {
        self.layout.range(block).map(|r| &self.values[r])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn demo_layout() -> ParameterLayout {
        ParameterLayout::new([
            (Block::Beta(1), 2),
            (Block::Beta(2), 2),
            (Block::Eta, 2),
            (Block::Psi, 2),
        ])
        .unwrap()
    }

    #[test]
    fn ranges_are_contiguous_and_cover() {
        let layout = demo_layout();
        assert_eq!(layout.dim(), 8);
        let mut next = 0usize;
        for (_, r) in layout.blocks() {
            assert_eq!(r.start, next);
            next = r.end;
        }
        assert_eq!(next, layout.dim());
    }

    #[test]
    fn duplicate_blocks_rejected() {
        assert!(ParameterLayout::new([(Block::Eta, 1), (Block::Eta, 2)]).is_err());
    }

    #[test]
    fn pack_requires_full_cover() {
        let layout = demo_layout();
        let b1 = [1.0, 2.0];
        assert!(ParameterVector::pack(layout, &[(Block::Beta(1), &b1)]).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_identity(values in proptest::collection::vec(-1e6f64..1e6, 8)) {
            let layout = demo_layout();
            let parts: Vec<(Block, &[f64])> = vec![
                (Block::Beta(1), &values[0..2]),
                (Block::Beta(2), &values[2..4]),
                (Block::Eta, &values[4..6]),
                (Block::Psi, &values[6..8]),
            ];
            let packed = ParameterVector::pack(layout, &parts).unwrap();
            prop_assert_eq!(packed.values(), &values[..]);
            for (block, slice) in &parts {
                prop_assert_eq!(packed.block(block).unwrap(), *slice);
            }
        }
    }
}
