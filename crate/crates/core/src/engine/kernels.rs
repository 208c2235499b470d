//! Closed-form factor-to-variable messages for AND/OR factors.
//!
//! Every kernel reads the factor's incoming variable-to-factor row, slot 0
//! being the head, and skips the target slot. Cost is linear in the arity.

use crate::graph::FactorKind;
use crate::storage::Message;

/// Multiplication counter threaded through the kernels. Divisions count as
/// multiplications.
pub trait Tally {
    fn mul(&mut self, n: u64);
}

/// The no-op tally used on the hot path.
#[derive(Debug, Default, Clone, Copy)]
pub struct Untallied;

impl Tally for Untallied {
    #[inline(always)]
    fn mul(&mut self, _: u64) {}
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct MulCounter(pub u64);

impl Tally for MulCounter {
    #[inline]
    fn mul(&mut self, n: u64) {
        self.0 += n;
    }
}

// Running products are rescaled by an exact power of two once they drop
// below TINY.
const TINY: f64 = 3.054936363499605e-151; // 2^-500
const BIG: f64 = 3.273390607896142e150; // 2^500

/// A message stored as `message · 2^(-500 · shift)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub message: Message,
    pub shift: i32,
}

impl Scaled {
    /// The true value; may underflow to zero for large shifts.
    pub fn value(self) -> Message {
        let mut m = self.message;
        for _ in 0..self.shift {
            m = Message::new(m.m0 * TINY, m.m1 * TINY);
        }
        m
    }

    /// Unit-mass message, independent of the shift.
    pub fn normalized(self) -> Option<Message> {
        self.message.normalized()
    }
}

#[inline]
fn scaled(m0: f64, m1: f64, shift: i32) -> Scaled {
    Scaled {
        message: Message::new(m0.max(0.0), m1.max(0.0)),
        shift,
    }
}

/// `(Π (m0 + m1), Π m(which))` over body slots other than `target`, with
/// the shared power-of-two shift.
#[inline]
fn body_products(row: &[Message], target: usize, which_one: bool, tally: &mut impl Tally) -> (f64, f64, i32) {
    let mut sums = 1.0;
    let mut picked = 1.0;
    let mut shift = 0;
    for (k, m) in row.iter().enumerate().skip(1) {
        if k == target {
            continue;
        }
        sums *= m.m0 + m.m1;
        picked *= if which_one { m.m1 } else { m.m0 };
        tally.mul(2);
        if sums < TINY && sums > 0.0 {
            sums *= BIG;
            picked *= BIG;
            shift += 1;
            tally.mul(2);
        }
    }
    (sums, picked, shift)
}

/// Componentwise product of `msgs`, skipping index `excluded`.
#[inline]
pub fn product_excluding(msgs: &[Message], excluded: usize, tally: &mut impl Tally) -> Scaled {
    let (mut m0, mut m1, mut shift) = (1.0, 1.0, 0);
    for (k, m) in msgs.iter().enumerate() {
        if k == excluded {
            continue;
        }
        m0 *= m.m0;
        m1 *= m.m1;
        tally.mul(2);
        if m0.max(m1) < TINY && m0.max(m1) > 0.0 {
            m0 *= BIG;
            m1 *= BIG;
            shift += 1;
            tally.mul(2);
        }
    }
    Scaled {
        message: Message::new(m0, m1),
        shift,
    }
}

/// AND factor, target is a body slot.
#[inline]
pub fn and_nonhead(row: &[Message], target: usize, p1: f64, p2: f64, tally: &mut impl Tally) -> Scaled {
    debug_assert!(target >= 1 && target < row.len());
    let h = row[0];
    let (sums, ones, shift) = body_products(row, target, true, tally);
    let prod1 = ((1.0 - p2) * h.m0 + p2 * h.m1) * sums;
    let prod2 = (p2 - p1) * (h.m0 - h.m1) * ones;
    tally.mul(5);
    scaled(prod1, prod1 + prod2, shift)
}

/// AND factor, target is the head.
#[inline]
pub fn and_head(row: &[Message], p1: f64, p2: f64, tally: &mut impl Tally) -> Scaled {
    let (sums, ones, shift) = body_products(row, 0, true, tally);
    let m1 = p2 * sums + (p1 - p2) * ones;
    let m0 = (1.0 - p2) * sums + (p2 - p1) * ones;
    tally.mul(4);
    scaled(m0, m1, shift)
}

/// OR factor, target is a body slot.
#[inline]
pub fn or_nonhead(row: &[Message], target: usize, p1: f64, p2: f64, tally: &mut impl Tally) -> Scaled {
    debug_assert!(target >= 1 && target < row.len());
    let h = row[0];
    let (sums, zeros, shift) = body_products(row, target, false, tally);
    let prod1 = ((1.0 - p1) * h.m0 + p1 * h.m1) * sums;
    let prod2 = (p1 - p2) * (h.m0 - h.m1) * zeros;
    tally.mul(5);
    scaled(prod1 + prod2, prod1, shift)
}

/// OR factor, target is the head.
#[inline]
pub fn or_head(row: &[Message], p1: f64, p2: f64, tally: &mut impl Tally) -> Scaled {
    let (sums, zeros, shift) = body_products(row, 0, false, tally);
    let m1 = p1 * sums + (p2 - p1) * zeros;
    let m0 = (1.0 - p1) * sums + (p1 - p2) * zeros;
    tally.mul(4);
    scaled(m0, m1, shift)
}

/// Dispatches on kind and target. `row` holds one incoming message per
/// slot; the target's own entry is ignored.
pub fn factor_message(
    kind: FactorKind,
    row: &[Message],
    target: usize,
    p1: f64,
    p2: f64,
    tally: &mut impl Tally,
) -> Scaled {
    match (kind, target == 0) {
        (FactorKind::And, true) => and_head(row, p1, p2, tally),
        (FactorKind::And, false) => and_nonhead(row, target, p1, p2, tally),
        (FactorKind::Or, true) => or_head(row, p1, p2, tally),
        (FactorKind::Or, false) => or_nonhead(row, target, p1, p2, tally),
    }
}

/// [`factor_message`] scaled to unit mass; the two divisions are tallied.
pub fn normalized_factor_message(
    kind: FactorKind,
    row: &[Message],
    target: usize,
    p1: f64,
    p2: f64,
    tally: &mut impl Tally,
) -> Option<Message> {
    let s = factor_message(kind, row, target, p1, p2, tally);
    tally.mul(2);
    s.normalized()
}
