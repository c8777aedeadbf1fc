use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::NetworkSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TensorRole {
    Weight,
    Bias,
}

/// Location of one tensor inside the flat vector. Weights are row-major
/// `rows = fan_out`, `cols = fan_in`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorSlot {
    pub layer: usize,
    pub role: TensorRole,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSlot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Index map from `(layer, role)` onto `[0, len)`, weight before bias per layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layout {
    slots: Vec<TensorSlot>,
    len: usize,
}

impl Layout {
    pub fn from_spec(spec: &NetworkSpec) -> Self {
        let widths = spec.widths();
        let mut slots = Vec::with_capacity(2 * (widths.len() - 1));
        let mut offset = 0;
        for (layer, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            for (role, rows, cols) in [
                (TensorRole::Weight, fan_out, fan_in),
                (TensorRole::Bias, fan_out, 1),
            ] {
                slots.push(TensorSlot {
                    layer,
                    role,
                    offset,
                    rows,
                    cols,
                });
                offset += rows * cols;
            }
        }
        Self { slots, len: offset }
    }

    /// Concatenation of two layouts, the second shifted past the first.
    pub fn concat(a: &Layout, b: &Layout) -> Self {
        let n_layers = a.n_layers();
        let slots = a
            .slots
            .iter()
            .copied()
            .chain(b.slots.iter().map(|s| TensorSlot {
                layer: s.layer + n_layers,
                offset: s.offset + a.len,
                ..*s
            }))
            .collect();
        Self {
            slots,
            len: a.len + b.len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_layers(&self) -> usize {
        self.slots.iter().map(|s| s.layer + 1).max().unwrap_or(0)
    }

    pub fn slots(&self) -> &[TensorSlot] {
        &self.slots
    }

    pub fn slot(&self, layer: usize, role: TensorRole) -> Option<&TensorSlot> {
        self.slots
            .iter()
            .find(|s| s.layer == layer && s.role == role)
    }

    /// FNV-1a over the slot table; identifies the layout in serialised form.
    pub fn hash64(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.len as u64);
        for s in &self.slots {
            feed(s.layer as u64);
            feed(matches!(s.role, TensorRole::Bias) as u64);
            feed(s.offset as u64);
            feed(s.rows as u64);
            feed(s.cols as u64);
        }
        h
    }
}

/// Flat parameter (or gradient) vector bound to a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    values: Vec<T>,
    layout: Arc<Layout>,
}

impl<T: Scalar> ParamVector<T> {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        Self {
            values: vec![T::zero(); layout.len()],
            layout,
        }
    }

    pub fn from_values(layout: Arc<Layout>, values: Vec<T>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Dimension {
                expected: layout.len(),
                got: values.len(),
            });
        }
        Ok(Self { values, layout })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn tensor(&self, layer: usize, role: TensorRole) -> Option<&[T]> {
        self.layout
            .slot(layer, role)
            .map(|s| &self.values[s.range()])
    }

    /// Splits into per-tensor vectors in layout order.
    pub fn to_tensors(&self) -> Vec<Vec<T>> {
        self.layout
            .slots()
            .iter()
            .map(|s| self.values[s.range()].to_vec())
            .collect()
    }

    pub fn from_tensors(layout: Arc<Layout>, tensors: &[Vec<T>]) -> Result<Self> {
        if tensors.len() != layout.slots().len() {
            return Err(Error::LayoutMismatch(format!(
                "{} tensors for a layout of {}",
                tensors.len(),
                layout.slots().len()
            )));
        }
        let mut values = vec![T::zero(); layout.len()];
        for (slot, t) in layout.slots().iter().zip(tensors) {
            if t.len() != slot.len() {
                return Err(Error::Dimension {
                    expected: slot.len(),
                    got: t.len(),
                });
            }
            values[slot.range()].copy_from_slice(t);
        }
        Ok(Self { values, layout })
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }

    pub fn check_layout(&self, other: &Self) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(format!(
                "{} vs {} parameters",
                self.len(),
                other.len()
            )))
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.check_layout(other)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: T) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn dot(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Concatenates two vectors into one over the concatenated layout.
    pub fn concat(a: &Self, b: &Self) -> Self {
        let layout = Arc::new(Layout::concat(&a.layout, &b.layout));
        let mut values = a.values.clone();
        values.extend_from_slice(&b.values);
        Self { values, layout }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, NetworkSpec};
    use proptest::prelude::*;

    fn layout(hidden: Vec<usize>) -> Arc<Layout> {
        Arc::new(Layout::from_spec(&NetworkSpec::value(
            3,
            hidden,
            Activation::Tanh,
        )))
    }

    #[test]
    fn layout_is_a_bijection() {
        let l = layout(vec![4, 5]);
        let mut seen = vec![false; l.len()];
        for s in l.slots() {
            for i in s.range() {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&x| x));
        assert_eq!(l.len(), 3 * 4 + 4 + 4 * 5 + 5 + 5 + 1);
    }

    #[test]
    fn same_spec_same_layout() {
        assert_eq!(layout(vec![7]), layout(vec![7]));
        assert_eq!(layout(vec![7]).hash64(), layout(vec![7]).hash64());
        assert_ne!(layout(vec![7]).hash64(), layout(vec![8]).hash64());
    }

    #[test]
    fn mismatched_layouts_rejected() {
        let mut a = ParamVector::<f64>::zeros(layout(vec![2]));
        let b = ParamVector::<f64>::zeros(layout(vec![3]));
        assert!(a.axpy(1.0, &b).is_err());
    }

    proptest! {
        #[test]
        fn flatten_unflatten_is_identity(
            hidden in prop::collection::vec(1usize..6, 0..3),
            seed in any::<u64>(),
        ) {
            let l = layout(hidden);
            let values: Vec<f64> = (0..l.len()).map(|i| ((i as u64 ^ seed) % 1000) as f64 * 1e-3).collect();
            let p = ParamVector::from_values(l.clone(), values).unwrap();
            let back = ParamVector::from_tensors(l, &p.to_tensors()).unwrap();
            prop_assert_eq!(back.to_tensors(), p.to_tensors());
            prop_assert_eq!(back, p);
        }
    }
}
