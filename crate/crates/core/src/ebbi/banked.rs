//! Bit-packed multi-bank word store for the EBBI stack.
//!
//! Rows are striped across banks (`bank = y mod n_banks`) so the n rows of an
//! n×n patch land in n distinct banks and can be served in parallel; within a
//! bank, address space is ordered (slot, polarity)-major, then row-major, with
//! `word_bits` pixels per addressable word. Bit 0 of a word is the lowest
//! column index.
//!
//! Worked example (5 banks, 4-bit words, 64×48 frame, 3 slots): pixel
//! (x=6, y=7) of slot 2's negative image lives in bank `7 mod 5 = 2`; the
//! region index is `(2-1)*2 + 0 = 2`, the in-bank row is `7 / 5 = 1`, and with
//! 16 words per row and 10 rows per bank the word address is
//! `(2*10 + 1)*16 + 6/4 = 337`, bit `6 mod 4 = 2`.

use serde::{Deserialize, Serialize};

use crate::ebbi::{patch::patch_from_bits, EbbiStack, Patch};
use crate::error::{Error, Result};
use crate::event::{Polarity, SensorGeometry};

/// Bank count and word width for the packed store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankConfig {
    /// Number of independently addressable banks; equals the patch size n.
    pub n_banks: usize,
    /// Pixels per addressable word.
    pub word_bits: usize,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            n_banks: 5,
            word_bits: 4,
        }
    }
}

impl BankConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_banks == 0 {
            return Err(Error::Config("n_banks must be at least 1".into()));
        }
        if self.word_bits == 0 || self.word_bits > 64 {
            return Err(Error::Config(format!(
                "word_bits must be in 1..=64, got {}",
                self.word_bits
            )));
        }
        Ok(())
    }
}

/// Physical location of one pixel-bit in the banked store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BankAddress {
    pub bank: usize,
    pub word_address: usize,
    pub bit_offset: usize,
}

fn rows_per_bank(geometry: SensorGeometry, cfg: &BankConfig) -> usize {
    (geometry.height() as usize).div_ceil(cfg.n_banks)
}

fn words_per_row(geometry: SensorGeometry, cfg: &BankConfig) -> usize {
    (geometry.width() as usize).div_ceil(cfg.word_bits)
}

fn region(slot: usize, polarity: Polarity) -> usize {
    (slot - 1) * 2 + polarity.plane()
}

/// Map (slot, polarity, pixel) to its (bank, word, bit). Slots are 1-based.
pub fn bank_locate(
    geometry: SensorGeometry,
    cfg: &BankConfig,
    slot: usize,
    polarity: Polarity,
    x: u16,
    y: u16,
) -> BankAddress {
    let bank = y as usize % cfg.n_banks;
    let row_in_bank = y as usize / cfg.n_banks;
    let word_address = (region(slot, polarity) * rows_per_bank(geometry, cfg) + row_in_bank)
        * words_per_row(geometry, cfg)
        + x as usize / cfg.word_bits;
    BankAddress {
        bank,
        word_address,
        bit_offset: x as usize % cfg.word_bits,
    }
}

/// One word pulled out of a bank during a patch fetch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FetchedWord {
    pub bank: usize,
    pub address: usize,
    /// Sensor row this word belongs to.
    pub y: u16,
    /// Column-word index `x / word_bits` within the row.
    pub word_index: usize,
    pub bits: u64,
}

/// Result of reading every word an n×n patch touches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchFetch {
    pub words: Vec<FetchedWord>,
    /// Sequential reads needed from the most-loaded bank. Computed over the
    /// unclamped column window so pipeline timing is alignment-independent;
    /// out-of-frame words cost their cycle but return zeros.
    pub cycles_used: u32,
}

/// Word store for the whole stack: every slot, both polarities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankedMemory {
    geometry: SensorGeometry,
    cfg: BankConfig,
    n_slots: usize,
    rows_per_bank: usize,
    words_per_row: usize,
    banks: Vec<Vec<u64>>,
}

impl BankedMemory {
    pub fn new(geometry: SensorGeometry, n_slots: usize, cfg: BankConfig) -> Result<Self> {
        cfg.validate()?;
        if n_slots == 0 {
            return Err(Error::Config("n_slots must be at least 1".into()));
        }
        let rpb = rows_per_bank(geometry, &cfg);
        let wpr = words_per_row(geometry, &cfg);
        let words_per_bank = n_slots * 2 * rpb * wpr;
        Ok(Self {
            geometry,
            cfg,
            n_slots,
            rows_per_bank: rpb,
            words_per_row: wpr,
            banks: vec![vec![0u64; words_per_bank]; cfg.n_banks],
        })
    }

    /// Build a store mirroring the stack's current images.
    pub fn mirror(stack: &EbbiStack, cfg: BankConfig) -> Result<Self> {
        let mut mem = Self::new(stack.geometry(), stack.n_slots(), cfg)?;
        for slot in 1..=stack.n_slots() {
            let pair = stack.slot(slot);
            for polarity in [Polarity::Negative, Polarity::Positive] {
                let img = pair.image(polarity);
                for y in 0..stack.geometry().height() {
                    for x in 0..stack.geometry().width() {
                        if img.get(x, y) {
                            mem.set_bit(slot, polarity, x, y);
                        }
                    }
                }
            }
        }
        Ok(mem)
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn config(&self) -> BankConfig {
        self.cfg
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    /// Logical capacity in bits: one bit per pixel per polarity per slot.
    /// (Physical words may carry padding when W or H don't divide evenly.)
    pub fn storage_bits(&self) -> u64 {
        2 * self.n_slots as u64 * self.geometry.num_pixels()
    }

    fn locate(&self, slot: usize, polarity: Polarity, x: u16, y: u16) -> BankAddress {
        assert!(
            (1..=self.n_slots).contains(&slot),
            "slot {slot} outside 1..={}",
            self.n_slots
        );
        assert!(
            self.geometry.contains(x, y),
            "pixel ({x}, {y}) outside frame"
        );
        bank_locate(self.geometry, &self.cfg, slot, polarity, x, y)
    }

    pub fn set_bit(&mut self, slot: usize, polarity: Polarity, x: u16, y: u16) {
        let a = self.locate(slot, polarity, x, y);
        self.banks[a.bank][a.word_address] |= 1u64 << a.bit_offset;
    }

    pub fn get_bit(&self, slot: usize, polarity: Polarity, x: u16, y: u16) -> bool {
        let a = self.locate(slot, polarity, x, y);
        (self.banks[a.bank][a.word_address] >> a.bit_offset) & 1 == 1
    }

    /// Wipe both polarity planes of one slot in every bank.
    pub fn clear_slot(&mut self, slot: usize) {
        assert!((1..=self.n_slots).contains(&slot));
        let start = region(slot, Polarity::Negative) * self.rows_per_bank * self.words_per_row;
        let len = 2 * self.rows_per_bank * self.words_per_row;
        for bank in &mut self.banks {
            bank[start..start + len].fill(0);
        }
    }

    pub fn read_word(&self, bank: usize, address: usize) -> u64 {
        self.banks[bank][address]
    }

    /// Read every word covering columns `[x_c - n/2, x_c + n/2]` of the n
    /// rows around `y_c` for one (slot, polarity) plane.
    pub fn fetch_patch_words(
        &self,
        slot: usize,
        polarity: Polarity,
        x_c: u16,
        y_c: u16,
        n: usize,
    ) -> Result<PatchFetch> {
        if n != self.cfg.n_banks {
            return Err(Error::Config(format!(
                "patch size {n} must equal bank count {}",
                self.cfg.n_banks
            )));
        }
        let r = (n / 2) as i64;
        let w = self.cfg.word_bits as i64;
        let word_lo = (x_c as i64 - r).div_euclid(w);
        let word_hi = (x_c as i64 + r).div_euclid(w);
        let cycles_used = (word_hi - word_lo + 1) as u32;

        let mut words = Vec::with_capacity(n * cycles_used as usize);
        for dy in -r..=r {
            let y = y_c as i64 + dy;
            if y < 0 || y >= self.geometry.height() as i64 {
                continue;
            }
            let y = y as u16;
            for wi in word_lo..=word_hi {
                if wi < 0 || wi >= self.words_per_row as i64 {
                    continue;
                }
                let a = bank_locate(
                    self.geometry,
                    &self.cfg,
                    slot,
                    polarity,
                    (wi as usize * self.cfg.word_bits) as u16,
                    y,
                );
                words.push(FetchedWord {
                    bank: a.bank,
                    address: a.word_address,
                    y,
                    word_index: wi as usize,
                    bits: self.read_word(a.bank, a.word_address),
                });
            }
        }
        Ok(PatchFetch { words, cycles_used })
    }

    /// Fetch and assemble in one call.
    pub fn extract_patch(
        &self,
        slot: usize,
        polarity: Polarity,
        x_c: u16,
        y_c: u16,
        n: usize,
    ) -> Result<Patch> {
        let fetch = self.fetch_patch_words(slot, polarity, x_c, y_c, n)?;
        Ok(assemble_patch(self.geometry, &self.cfg, &fetch, x_c, y_c, n))
    }
}

/// Rebuild the n×n patch from fetched words; positions no word covers read
/// as zero.
pub fn assemble_patch(
    geometry: SensorGeometry,
    cfg: &BankConfig,
    fetch: &PatchFetch,
    x_c: u16,
    y_c: u16,
    n: usize,
) -> Patch {
    let r = (n / 2) as i64;
    let mut bits = vec![false; n * n];
    for dx in -r..=r {
        let x = x_c as i64 + dx;
        if x < 0 || x >= geometry.width() as i64 {
            continue;
        }
        let word_index = x as usize / cfg.word_bits;
        let bit = x as usize % cfg.word_bits;
        for dy in -r..=r {
            let y = y_c as i64 + dy;
            if y < 0 || y >= geometry.height() as i64 {
                continue;
            }
            let Some(word) = fetch
                .words
                .iter()
                .find(|w| w.y == y as u16 && w.word_index == word_index)
            else {
                continue;
            };
            if (word.bits >> bit) & 1 == 1 {
                let i = (dx + r) as usize;
                let j = (dy + r) as usize;
                bits[i * n + j] = true;
            }
        }
    }
    patch_from_bits(n, bits)
}
