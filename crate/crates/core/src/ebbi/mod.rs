//! Event-based binary images: the rotating EBBI stack, bit-packed banked
//! storage, and patch extraction.
//!
//! The stack keeps `n_ebbi + 1` image pairs so one pair can be wiped while the
//! other `n_ebbi` stay readable. Slots and both pointers use 1-based indices
//! in `[1, n_ebbi + 1]`.

mod banked;
mod patch;

pub use banked::{
    assemble_patch, bank_locate, BankAddress, BankConfig, BankedMemory, FetchedWord, PatchFetch,
};
pub use patch::{extract_patch, extract_sequence, extract_sequence_banked, Patch, PatchSequence};

use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::event::{Event, Polarity, SensorGeometry};

/// A W×H image at one bit per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    geometry: SensorGeometry,
    bits: BitVec,
}

impl BinaryImage {
    pub fn zeros(geometry: SensorGeometry) -> Self {
        Self {
            geometry,
            bits: BitVec::zeros(geometry.num_pixels() as usize),
        }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    fn index(&self, x: u16, y: u16) -> usize {
        y as usize * self.geometry.width() as usize + x as usize
    }

    pub fn get(&self, x: u16, y: u16) -> bool {
        self.bits.get(self.index(x, y))
    }

    pub fn set(&mut self, x: u16, y: u16) {
        let i = self.index(x, y);
        self.bits.set(i, true);
    }

    pub fn clear(&mut self) {
        self.bits = BitVec::zeros(self.bits.len());
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    /// Render as an ASCII portable bitmap (PBM P1) for eyeballing dumps.
    pub fn to_pbm(&self) -> String {
        let (w, h) = (self.geometry.width(), self.geometry.height());
        let mut out = format!("P1\n{w} {h}\n");
        for y in 0..h {
            let row: Vec<&str> = (0..w)
                .map(|x| if self.get(x, y) { "1" } else { "0" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// One accumulation window: a positive-polarity and a negative-polarity image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EbbiPair {
    pub pos: BinaryImage,
    pub neg: BinaryImage,
}

impl EbbiPair {
    pub fn zeros(geometry: SensorGeometry) -> Self {
        Self {
            pos: BinaryImage::zeros(geometry),
            neg: BinaryImage::zeros(geometry),
        }
    }

    pub fn image(&self, polarity: Polarity) -> &BinaryImage {
        match polarity {
            Polarity::Positive => &self.pos,
            Polarity::Negative => &self.neg,
        }
    }

    pub fn image_mut(&mut self, polarity: Polarity) -> &mut BinaryImage {
        match polarity {
            Polarity::Positive => &mut self.pos,
            Polarity::Negative => &mut self.neg,
        }
    }

    pub fn clear(&mut self) {
        self.pos.clear();
        self.neg.clear();
    }

    pub fn count_ones(&self) -> usize {
        self.pos.count_ones() + self.neg.count_ones()
    }
}

/// When the active accumulation window rolls over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum WindowMode {
    /// Roll over once the window has spanned at least `t_e_us` microseconds.
    FixedTime { t_e_us: u64 },
    /// Roll over once the window has absorbed `n_e` events.
    FixedCount { n_e: u64 },
}

/// What one `process_event` call did to the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    /// Slot the event's bit was written into (the active slot at write time).
    pub slot_written: usize,
    pub transitioned: bool,
    /// Slot that was wiped, when a transition fired.
    pub slot_cleared: Option<usize>,
}

/// Rotating stack of EBBI pairs with active/clear pointers.
#[derive(Debug, Clone)]
pub struct EbbiStack {
    geometry: SensorGeometry,
    n_ebbi: usize,
    mode: WindowMode,
    slots: Vec<EbbiPair>,
    ptr_active: usize,
    ptr_clear: usize,
    event_count: u64,
    t_start: Option<u64>,
}

impl EbbiStack {
    pub fn new(geometry: SensorGeometry, n_ebbi: usize, mode: WindowMode) -> Result<Self> {
        if n_ebbi == 0 {
            return Err(Error::Config("n_ebbi must be at least 1".into()));
        }
        match mode {
            WindowMode::FixedTime { t_e_us } if t_e_us == 0 => {
                return Err(Error::Config("t_e_us must be positive".into()))
            }
            WindowMode::FixedCount { n_e } if n_e == 0 => {
                return Err(Error::Config("n_e must be positive".into()))
            }
            _ => {}
        }
        let n_slots = n_ebbi + 1;
        Ok(Self {
            geometry,
            n_ebbi,
            mode,
            slots: vec![EbbiPair::zeros(geometry); n_slots],
            ptr_active: 1,
            ptr_clear: n_slots,
            event_count: 0,
            t_start: None,
        })
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn n_ebbi(&self) -> usize {
        self.n_ebbi
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn mode(&self) -> WindowMode {
        self.mode
    }

    pub fn ptr_active(&self) -> usize {
        self.ptr_active
    }

    pub fn ptr_clear(&self) -> usize {
        self.ptr_clear
    }

    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    pub fn t_start(&self) -> Option<u64> {
        self.t_start
    }

    /// Borrow a slot by its 1-based index.
    pub fn slot(&self, slot: usize) -> &EbbiPair {
        &self.slots[slot - 1]
    }

    pub fn total_set_bits(&self) -> usize {
        self.slots.iter().map(EbbiPair::count_ones).sum()
    }

    /// Write one event and roll the window over if its budget is exhausted.
    pub fn process_event(&mut self, e: &Event) -> Result<StepOutcome> {
        if !self.geometry.contains(e.x, e.y) {
            return Err(Error::Validation(format!(
                "event at ({}, {}) outside {}x{} geometry",
                e.x,
                e.y,
                self.geometry.width(),
                self.geometry.height()
            )));
        }
        let slot_written = self.ptr_active;
        self.slots[slot_written - 1]
            .image_mut(e.polarity)
            .set(e.x, e.y);
        self.event_count += 1;
        let t_start = *self.t_start.get_or_insert(e.t);

        let fire = match self.mode {
            WindowMode::FixedTime { t_e_us } => e.t.saturating_sub(t_start) >= t_e_us,
            WindowMode::FixedCount { n_e } => self.event_count >= n_e,
        };
        if !fire {
            return Ok(StepOutcome {
                slot_written,
                transitioned: false,
                slot_cleared: None,
            });
        }

        // Roll over: the freshly cleared slot becomes the new active window
        // and the oldest surviving slot is wiped for the next rotation.
        self.ptr_active = self.ptr_clear;
        self.ptr_clear = if self.ptr_clear == 1 {
            self.n_slots()
        } else {
            self.ptr_clear - 1
        };
        self.slots[self.ptr_clear - 1].clear();
        self.event_count = 0;
        self.t_start = Some(e.t);
        Ok(StepOutcome {
            slot_written,
            transitioned: true,
            slot_cleared: Some(self.ptr_clear),
        })
    }

    /// Slots feeding the classifier, oldest window first, active window last.
    /// The slot at `ptr_clear` is never included.
    pub fn sequence_slots(&self) -> Vec<usize> {
        let n_slots = self.n_slots();
        let wrap = |v: usize| (v - 1) % n_slots + 1;
        (1..self.n_ebbi)
            .rev()
            .map(|k| wrap(self.ptr_active + k))
            .chain(std::iter::once(self.ptr_active))
            .collect()
    }
}
