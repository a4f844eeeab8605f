//! Fixed-point forward pass of the single-hidden-layer spiking classifier.
//!
//! Hidden neurons are leaky integrate-and-fire with hard reset: at each step
//! `V <- leak(V_prev) * (1 - spiked_prev) + sum(w1[j,i] * x[i])`, saturated to
//! 12-bit signed range, firing when `V >= v_th`. The readout is a plain
//! weighted sum of the final step's spikes; comparing that score against a
//! sweepable threshold yields the signal/noise decision.
//!
//! Network file layout (little-endian): magic `SNNF`, u16 version, u16
//! input_dim, u16 n_hidden, i32 v_th, u8 beta_shift, f32 s1, f32 s2, then w1
//! as i8 row-major (n_hidden × input_dim), then w2 as i8 (n_hidden).

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::bits::BitVec;
use crate::ebbi::PatchSequence;
use crate::error::{Error, Result};
use crate::event::Decision;

pub const MEMBRANE_BITS: u32 = 12;
pub const MEMBRANE_MAX: i32 = (1 << (MEMBRANE_BITS - 1)) - 1;
pub const MEMBRANE_MIN: i32 = -(1 << (MEMBRANE_BITS - 1));

const NET_MAGIC: &[u8; 4] = b"SNNF";
const NET_VERSION: u16 = 1;

/// Quantized network weights plus the scales they were quantized with.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedFcsnn {
    input_dim: usize,
    n_hidden: usize,
    /// Hidden weights, row-major: `w1[j * input_dim + i]`.
    w1: Vec<i8>,
    /// Readout weights, one per hidden neuron.
    w2: Vec<i8>,
    v_th: i32,
    /// Leak as subtract-shifted-copy: `leak(v) = v - (v >> beta_shift)`,
    /// i.e. beta = 1 - 2^-beta_shift; shift 1 gives beta = 0.5.
    beta_shift: u8,
    s1: f32,
    s2: f32,
}

impl QuantizedFcsnn {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        input_dim: usize,
        n_hidden: usize,
        w1: Vec<i8>,
        w2: Vec<i8>,
        v_th: i32,
        beta_shift: u8,
        s1: f32,
        s2: f32,
    ) -> Result<Self> {
        if input_dim == 0 || n_hidden == 0 {
            return Err(Error::Shape(
                "input_dim and n_hidden must be positive".into(),
            ));
        }
        if w1.len() != n_hidden * input_dim {
            return Err(Error::Shape(format!(
                "w1 has {} weights, expected {}",
                w1.len(),
                n_hidden * input_dim
            )));
        }
        if w2.len() != n_hidden {
            return Err(Error::Shape(format!(
                "w2 has {} weights, expected {n_hidden}",
                w2.len()
            )));
        }
        if v_th <= 0 {
            return Err(Error::Validation(format!(
                "v_th must be positive, got {v_th}"
            )));
        }
        if beta_shift == 0 || beta_shift > 31 {
            return Err(Error::Validation(format!(
                "beta_shift must be in 1..=31, got {beta_shift}"
            )));
        }
        Ok(Self {
            input_dim,
            n_hidden,
            w1,
            w2,
            v_th,
            beta_shift,
            s1,
            s2,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn w1(&self) -> &[i8] {
        &self.w1
    }

    pub fn w2(&self) -> &[i8] {
        &self.w2
    }

    pub fn v_th(&self) -> i32 {
        self.v_th
    }

    pub fn beta_shift(&self) -> u8 {
        self.beta_shift
    }

    pub fn scales(&self) -> (f32, f32) {
        (self.s1, self.s2)
    }

    fn leak(&self, v: i32) -> i32 {
        v - (v >> self.beta_shift)
    }
}

/// Per-event scratch state: membranes and the previous step's spikes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LifState {
    pub membranes: Vec<i32>,
    pub last_spikes: Vec<bool>,
}

impl LifState {
    pub fn new(n_hidden: usize) -> Self {
        Self {
            membranes: vec![0; n_hidden],
            last_spikes: vec![false; n_hidden],
        }
    }

    pub fn reset(&mut self) {
        self.membranes.fill(0);
        self.last_spikes.fill(false);
    }
}

fn saturate(v: i64) -> i32 {
    v.clamp(MEMBRANE_MIN as i64, MEMBRANE_MAX as i64) as i32
}

/// Advance every hidden neuron by one timestep and return the spike vector.
pub fn lif_step(net: &QuantizedFcsnn, state: &mut LifState, x: &BitVec) -> Result<Vec<bool>> {
    if x.len() != net.input_dim {
        return Err(Error::Shape(format!(
            "input has {} bits, network expects {}",
            x.len(),
            net.input_dim
        )));
    }
    if state.membranes.len() != net.n_hidden {
        return Err(Error::Shape(format!(
            "state sized for {} neurons, network has {}",
            state.membranes.len(),
            net.n_hidden
        )));
    }
    let active: Vec<usize> = x.iter_ones().collect();
    let mut spikes = vec![false; net.n_hidden];
    for j in 0..net.n_hidden {
        let carry = if state.last_spikes[j] {
            0
        } else {
            net.leak(state.membranes[j])
        };
        let row = &net.w1[j * net.input_dim..(j + 1) * net.input_dim];
        let mut v = carry as i64;
        for &i in &active {
            v += row[i] as i64;
        }
        let v = saturate(v);
        let s = v >= net.v_th;
        state.membranes[j] = v;
        state.last_spikes[j] = s;
        spikes[j] = s;
    }
    Ok(spikes)
}

/// Weighted sum of the spike vector; the raw classification score.
pub fn readout(net: &QuantizedFcsnn, spikes: &[bool]) -> Result<i32> {
    if spikes.len() != net.n_hidden {
        return Err(Error::Shape(format!(
            "{} spikes for {} neurons",
            spikes.len(),
            net.n_hidden
        )));
    }
    Ok(spikes
        .iter()
        .zip(&net.w2)
        .map(|(&s, &w)| if s { w as i32 } else { 0 })
        .sum())
}

/// Run a fresh state over the whole sequence and read out the final step.
pub fn score_sequence(net: &QuantizedFcsnn, seq: &PatchSequence) -> Result<i32> {
    let mut state = LifState::new(net.n_hidden);
    let mut spikes = vec![false; net.n_hidden];
    for k in 0..seq.len() {
        spikes = lif_step(net, &mut state, seq.get(k))?;
    }
    readout(net, &spikes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub decision: Decision,
    pub score: i32,
}

/// Score the event's patch sequence and compare against `theta`
/// (score >= theta means signal).
pub fn classify_event(
    net: &QuantizedFcsnn,
    seq: &PatchSequence,
    theta: i32,
) -> Result<Classification> {
    let score = score_sequence(net, seq)?;
    let decision = if score >= theta {
        Decision::Signal
    } else {
        Decision::Noise
    };
    Ok(Classification { decision, score })
}

pub fn save_network(net: &QuantizedFcsnn, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(NET_MAGIC)?;
    w.write_u16::<LittleEndian>(NET_VERSION)?;
    w.write_u16::<LittleEndian>(net.input_dim as u16)?;
    w.write_u16::<LittleEndian>(net.n_hidden as u16)?;
    w.write_i32::<LittleEndian>(net.v_th)?;
    w.write_u8(net.beta_shift)?;
    w.write_f32::<LittleEndian>(net.s1)?;
    w.write_f32::<LittleEndian>(net.s2)?;
    for &v in &net.w1 {
        w.write_i8(v)?;
    }
    for &v in &net.w2 {
        w.write_i8(v)?;
    }
    Ok(())
}

pub fn load_network(path: &Path) -> Result<QuantizedFcsnn> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Format {
        offset: 0,
        msg: "file too short for magic".into(),
    })?;
    if &magic != NET_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {magic:?}, expected {NET_MAGIC:?}"),
        });
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != NET_VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported version {version}"),
        });
    }
    let input_dim = r.read_u16::<LittleEndian>()? as usize;
    let n_hidden = r.read_u16::<LittleEndian>()? as usize;
    let v_th = r.read_i32::<LittleEndian>()?;
    let beta_shift = r.read_u8()?;
    let s1 = r.read_f32::<LittleEndian>()?;
    let s2 = r.read_f32::<LittleEndian>()?;
    let mut w1 = vec![0i8; n_hidden * input_dim];
    let mut w2 = vec![0i8; n_hidden];
    read_i8_exact(&mut r, &mut w1)?;
    read_i8_exact(&mut r, &mut w2)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format {
            offset: 0,
            msg: "trailing bytes after network weights".into(),
        });
    }
    QuantizedFcsnn::new(input_dim, n_hidden, w1, w2, v_th, beta_shift, s1, s2)
}

fn read_i8_exact<R: Read>(r: &mut R, out: &mut [i8]) -> Result<()> {
    let mut buf = vec![0u8; out.len()];
    r.read_exact(&mut buf).map_err(|_| Error::Format {
        offset: 0,
        msg: "truncated weight block".into(),
    })?;
    for (dst, src) in out.iter_mut().zip(buf) {
        *dst = src as i8;
    }
    Ok(())
}
