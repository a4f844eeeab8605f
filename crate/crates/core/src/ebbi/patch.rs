//! n×n patch extraction around an event pixel, and the per-event sequence of
//! binary feature vectors fed to the classifier.

use crate::bits::BitVec;
use crate::ebbi::{BankedMemory, BinaryImage, EbbiStack};
use crate::error::{Error, Result};
use crate::event::{Event, Polarity};

/// A zero-padded n×n cutout of a binary image, centered on an event pixel.
///
/// Indexing is `(i, j)` where `i` tracks the x offset and `j` the y offset:
/// `get(dx + r, dy + r)` is the pixel at `(x_c + dx, y_c + dy)`, r = n/2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    n: usize,
    bits: Vec<bool>,
}

impl Patch {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    /// Row-major flattening (first index outer), matching `get`.
    pub fn flatten(&self) -> &[bool] {
        &self.bits
    }
}

fn check_patch_size(n: usize) -> Result<usize> {
    if n == 0 || n % 2 == 0 {
        return Err(Error::Config(format!("patch size must be odd, got {n}")));
    }
    Ok(n / 2)
}

/// Cut an n×n window out of `image` around `(x_c, y_c)`; out-of-frame pixels
/// read as zero.
pub fn extract_patch(image: &BinaryImage, x_c: u16, y_c: u16, n: usize) -> Result<Patch> {
    let r = check_patch_size(n)? as i32;
    let g = image.geometry();
    let mut bits = vec![false; n * n];
    for dx in -r..=r {
        let x = x_c as i32 + dx;
        if x < 0 || x >= g.width() as i32 {
            continue;
        }
        for dy in -r..=r {
            let y = y_c as i32 + dy;
            if y < 0 || y >= g.height() as i32 {
                continue;
            }
            let i = (dx + r) as usize;
            let j = (dy + r) as usize;
            bits[i * n + j] = image.get(x as u16, y as u16);
        }
    }
    Ok(Patch { n, bits })
}

/// The classifier input for one event: one binary vector per surviving EBBI
/// pair, oldest window first. Each vector is the positive patch flattened
/// row-major followed by the negative patch, `2n²` bits total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchSequence {
    input_dim: usize,
    vectors: Vec<BitVec>,
}

impl PatchSequence {
    pub fn new(input_dim: usize, vectors: Vec<BitVec>) -> Result<Self> {
        for v in &vectors {
            if v.len() != input_dim {
                return Err(Error::Shape(format!(
                    "vector length {} does not match input dim {input_dim}",
                    v.len()
                )));
            }
        }
        Ok(Self { input_dim, vectors })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[BitVec] {
        &self.vectors
    }

    pub fn get(&self, k: usize) -> &BitVec {
        &self.vectors[k]
    }
}

fn concat_polarity_vector(pos: &Patch, neg: &Patch) -> BitVec {
    let n2 = pos.n() * pos.n();
    let mut v = BitVec::zeros(2 * n2);
    for (i, &b) in pos.flatten().iter().enumerate() {
        v.set(i, b);
    }
    for (i, &b) in neg.flatten().iter().enumerate() {
        v.set(n2 + i, b);
    }
    v
}

/// Build the per-event feature sequence by reading the stack's plain images.
pub fn extract_sequence(stack: &EbbiStack, e: &Event, n: usize) -> Result<PatchSequence> {
    check_patch_size(n)?;
    let mut vectors = Vec::with_capacity(stack.n_ebbi());
    for slot in stack.sequence_slots() {
        let pair = stack.slot(slot);
        let pos = extract_patch(&pair.pos, e.x, e.y, n)?;
        let neg = extract_patch(&pair.neg, e.x, e.y, n)?;
        vectors.push(concat_polarity_vector(&pos, &neg));
    }
    PatchSequence::new(2 * n * n, vectors)
}

/// Same output as [`extract_sequence`], but every bit is served from the
/// banked word store via whole-word fetches.
pub fn extract_sequence_banked(
    stack: &EbbiStack,
    memory: &BankedMemory,
    e: &Event,
    n: usize,
) -> Result<PatchSequence> {
    check_patch_size(n)?;
    let mut vectors = Vec::with_capacity(stack.n_ebbi());
    for slot in stack.sequence_slots() {
        let pos = memory.extract_patch(slot, Polarity::Positive, e.x, e.y, n)?;
        let neg = memory.extract_patch(slot, Polarity::Negative, e.x, e.y, n)?;
        vectors.push(concat_polarity_vector(&pos, &neg));
    }
    PatchSequence::new(2 * n * n, vectors)
}

pub(crate) fn patch_from_bits(n: usize, bits: Vec<bool>) -> Patch {
    debug_assert_eq!(bits.len(), n * n);
    Patch { n, bits }
}
