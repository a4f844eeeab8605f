//! Analytic hardware model: pipeline timing, memory footprint, per-event
//! energy from operation counts, and total power.

use serde::{Deserialize, Serialize};

use crate::ebbi::BankConfig;
use crate::event::SensorGeometry;

/// Whether events stream through overlapped pipeline stages or one at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineMode {
    Pipelined,
    Serial,
}

/// Cycles charged per event in serial mode. The end-to-end latency is the
/// natural figure; a registered output stage adds one more, and both
/// conventions appear in published throughput numbers, so both are selectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleAccounting {
    Latency,
    LatencyPlusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub n_ebbi: usize,
    pub mode: PipelineMode,
    pub serial_accounting: CycleAccounting,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_ebbi: 2,
            mode: PipelineMode::Serial,
            serial_accounting: CycleAccounting::Latency,
        }
    }
}

/// End-to-end cycles for one event: address generation (1), patch fetch (2),
/// FCSNN evaluation (n_ebbi + 3), final comparison (1).
pub fn latency_cycles(cfg: &PipelineConfig) -> u32 {
    1 + 2 + (cfg.n_ebbi as u32 + 3) + 1
}

/// Sustained classification rate in million events per second.
pub fn throughput_meps(cfg: &PipelineConfig, f_clk_hz: f64) -> f64 {
    let cycles_per_event = match cfg.mode {
        PipelineMode::Pipelined => 1,
        PipelineMode::Serial => match cfg.serial_accounting {
            CycleAccounting::Latency => latency_cycles(cfg),
            CycleAccounting::LatencyPlusOne => latency_cycles(cfg) + 1,
        },
    };
    f_clk_hz / cycles_per_event as f64 / 1e6
}

/// Total EBBI storage: one bit per pixel, two polarities, n_ebbi + 1 slots.
pub fn memory_bits(geometry: SensorGeometry, n_ebbi: usize) -> u64 {
    2 * (n_ebbi as u64 + 1) * geometry.num_pixels()
}

/// Per-operation energy constants in pJ.
///
/// The shipped defaults are placeholder desk numbers for relative comparison
/// between filters; they are not calibrated to any process node. Override them
/// to match a measured technology library.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    /// pJ per bit of word width per log2(array words) of a memory access.
    pub read_pj_per_bit: f64,
    pub add_pj: f64,
    pub mul_pj: f64,
    pub cmp_pj: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        Self {
            read_pj_per_bit: 0.08,
            add_pj: 0.03,
            mul_pj: 0.2,
            cmp_pj: 0.03,
        }
    }
}

impl CostTable {
    /// Energy for one access of a `word_bits`-wide word in an array of
    /// `words` entries; grows with log2 of the array size so larger frames
    /// cost more per access without inventing absolute constants.
    pub fn access_pj(&self, word_bits: u64, words: u64) -> f64 {
        let depth = (words.max(2) as f64).log2();
        self.read_pj_per_bit * word_bits as f64 * depth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Snnf,
    Baf,
    Stcf,
    Onf,
}

/// How EBBI reads are tallied. A physical bank read can return the word for
/// every slot and both polarities at once (one wide row), giving the compact
/// per-bank-per-cycle figure; counting each (slot, polarity) plane separately
/// multiplies the reads out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadAccounting {
    PerBankCycle,
    PerPlane,
}

/// Shape of the classifier datapath for energy accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnnfHwParams {
    /// Patch size n (equal to the bank count).
    pub patch: usize,
    pub n_ebbi: usize,
    pub n_hidden: usize,
    pub bank: BankConfig,
    pub read_accounting: ReadAccounting,
}

impl Default for SnnfHwParams {
    fn default() -> Self {
        Self {
            patch: 5,
            n_ebbi: 2,
            n_hidden: 30,
            bank: BankConfig::default(),
            read_accounting: ReadAccounting::PerBankCycle,
        }
    }
}

impl SnnfHwParams {
    /// Worst-case word fetches per bank to cover an n-pixel column span.
    pub fn worst_case_fetch_cycles(&self) -> u64 {
        ((self.patch as u64 - 1).div_ceil(self.bank.word_bits as u64)) + 1
    }

    /// Memory reads charged per event under the configured accounting.
    pub fn reads_per_event(&self) -> u64 {
        let per_bank = self.worst_case_fetch_cycles() * self.bank.n_banks as u64;
        match self.read_accounting {
            ReadAccounting::PerBankCycle => per_bank,
            ReadAccounting::PerPlane => per_bank * 2 * self.n_ebbi as u64,
        }
    }
}

/// Operation tallies and energy split for one event through one filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub reads: u64,
    pub writes: u64,
    pub adds: u64,
    pub comparisons: u64,
    pub memory_pj: f64,
    pub compute_pj: f64,
    pub total_pj: f64,
}

/// Per-event energy model from operation counts.
///
/// SNNF: banked EBBI word reads plus the accumulate-and-fire datapath.
/// BAF/STCF: 8 neighbor timestamp reads + 1 timestamp write (32-bit SAE
/// words) + per-neighbor freshness comparisons. ONF: 4 entry reads + 2
/// overwrites of the row/column memories + distance and freshness checks.
pub fn energy_breakdown(
    filter: FilterKind,
    geometry: SensorGeometry,
    snnf: &SnnfHwParams,
    costs: &CostTable,
) -> EnergyBreakdown {
    let (reads, writes, adds, comparisons, access_pj) = match filter {
        FilterKind::Snnf => {
            let reads = snnf.reads_per_event();
            let n2x2 = 2 * snnf.patch as u64 * snnf.patch as u64;
            let adds =
                snnf.n_ebbi as u64 * n2x2 * snnf.n_hidden as u64 + snnf.n_hidden as u64;
            let comparisons = snnf.n_ebbi as u64 * snnf.n_hidden as u64 + 1;
            // One bank holds every slot and polarity for its stripe of rows.
            let words_per_bank = 2
                * (snnf.n_ebbi as u64 + 1)
                * (geometry.height() as u64).div_ceil(snnf.bank.n_banks as u64)
                * (geometry.width() as u64).div_ceil(snnf.bank.word_bits as u64);
            let access = costs.access_pj(snnf.bank.word_bits as u64, words_per_bank);
            (reads, 0, adds, comparisons, access)
        }
        FilterKind::Baf | FilterKind::Stcf => {
            let access = costs.access_pj(32, geometry.num_pixels());
            (8, 1, 0, 9, access)
        }
        FilterKind::Onf => {
            let entries = 2 * (geometry.width() as u64 + geometry.height() as u64);
            let access = costs.access_pj(32, entries);
            (4, 2, 0, 9, access)
        }
    };
    let memory_pj = (reads + writes) as f64 * access_pj;
    let compute_pj = adds as f64 * costs.add_pj + comparisons as f64 * costs.cmp_pj;
    EnergyBreakdown {
        reads,
        writes,
        adds,
        comparisons,
        memory_pj,
        compute_pj,
        total_pj: memory_pj + compute_pj,
    }
}

pub fn energy_per_event_pj(
    filter: FilterKind,
    geometry: SensorGeometry,
    snnf: &SnnfHwParams,
    costs: &CostTable,
) -> f64 {
    energy_breakdown(filter, geometry, snnf, costs).total_pj
}

/// Measured power figures for deriving energy per event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub dynamic_power_mw: f64,
    pub clock_hz: f64,
    pub leakage_mw: f64,
}

/// E = P / f_sys × N, in nanojoules.
pub fn energy_per_event_nj(spec: &PowerSpec, cycles_per_event: u32) -> f64 {
    spec.dynamic_power_mw * 1e-3 / spec.clock_hz * cycles_per_event as f64 * 1e9
}

/// Total power at a given event rate: dynamic energy × rate + leakage, in mW.
pub fn power_total_mw(spec: &PowerSpec, cycles_per_event: u32, event_rate_hz: f64) -> f64 {
    energy_per_event_nj(spec, cycles_per_event) * 1e-9 * event_rate_hz * 1e3 + spec.leakage_mw
}
