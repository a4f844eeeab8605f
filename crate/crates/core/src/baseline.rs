//! Comparison filters: BAF (one fresh neighbor), STCF (k fresh neighbors),
//! and ONF (row/column latest-event memories), plus tau-sweep ROC replay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Decision, Event, EventStream, Label, SensorGeometry};
use crate::metrics::{ConfusionCounts, RocCurve, RocPoint};

/// Behavior switches for the surface of active events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaeConfig {
    /// Track one timestamp per (pixel, polarity) instead of per pixel.
    pub polarity_split: bool,
    /// Write the current event's timestamp before counting support instead of
    /// after. Decisions are identical either way because the center pixel is
    /// excluded from support; the flag only changes what a mid-replay reader
    /// of the surface observes.
    pub update_first: bool,
}

impl Default for SaeConfig {
    fn default() -> Self {
        Self {
            polarity_split: false,
            update_first: false,
        }
    }
}

/// Surface of active events: most recent timestamp per pixel (per polarity
/// when split).
#[derive(Debug, Clone)]
pub struct Sae {
    geometry: SensorGeometry,
    config: SaeConfig,
    last: Vec<Option<u64>>,
}

impl Sae {
    pub fn new(geometry: SensorGeometry, config: SaeConfig) -> Self {
        let planes = if config.polarity_split { 2 } else { 1 };
        Self {
            geometry,
            config,
            last: vec![None; planes * geometry.num_pixels() as usize],
        }
    }

    pub fn config(&self) -> SaeConfig {
        self.config
    }

    fn index(&self, e_plane: usize, x: u16, y: u16) -> usize {
        let plane = if self.config.polarity_split { e_plane } else { 0 };
        (plane * self.geometry.height() as usize + y as usize) * self.geometry.width() as usize
            + x as usize
    }

    pub fn get(&self, e_plane: usize, x: u16, y: u16) -> Option<u64> {
        self.last[self.index(e_plane, x, y)]
    }

    fn record(&mut self, e: &Event) {
        let i = self.index(e.polarity.plane(), e.x, e.y);
        self.last[i] = Some(e.t);
    }

    /// Count the 8 neighbors whose stored timestamp is within `tau_us` of
    /// `e.t` (closed interval). The center pixel never counts.
    fn neighbor_support(&self, e: &Event, tau_us: u64) -> u32 {
        let cutoff = e.t.saturating_sub(tau_us);
        let mut count = 0;
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let x = e.x as i32 + dx;
                let y = e.y as i32 + dy;
                if x < 0
                    || y < 0
                    || x >= self.geometry.width() as i32
                    || y >= self.geometry.height() as i32
                {
                    continue;
                }
                if let Some(t) = self.get(e.polarity.plane(), x as u16, y as u16) {
                    if t >= cutoff && t <= e.t {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

/// Background-activity filter: signal iff at least one neighbor fired within
/// `tau_us`.
pub fn baf_classify(sae: &mut Sae, e: &Event, tau_us: u64) -> Decision {
    if sae.config.update_first {
        sae.record(e);
    }
    let cutoff = e.t.saturating_sub(tau_us);
    let mut supported = false;
    'scan: for dy in -1i32..=1 {
        for dx in -1i32..=1 {
            if dx == 0 && dy == 0 {
                continue;
            }
            let x = e.x as i32 + dx;
            let y = e.y as i32 + dy;
            if x < 0
                || y < 0
                || x >= sae.geometry.width() as i32
                || y >= sae.geometry.height() as i32
            {
                continue;
            }
            if let Some(t) = sae.get(e.polarity.plane(), x as u16, y as u16) {
                if t >= cutoff && t <= e.t {
                    supported = true;
                    break 'scan;
                }
            }
        }
    }
    if !sae.config.update_first {
        sae.record(e);
    }
    if supported {
        Decision::Signal
    } else {
        Decision::Noise
    }
}

/// Spatiotemporal correlation filter: signal iff at least `k` neighbors fired
/// within `tau_us`. `k = 1` behaves exactly like [`baf_classify`].
pub fn stcf_classify(sae: &mut Sae, e: &Event, tau_us: u64, k: u32) -> Decision {
    if sae.config.update_first {
        sae.record(e);
    }
    let support = sae.neighbor_support(e, tau_us);
    if !sae.config.update_first {
        sae.record(e);
    }
    if support >= k {
        Decision::Signal
    } else {
        Decision::Noise
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct OnfEntry {
    /// x for row entries, y for column entries.
    coord: u16,
    t: u64,
}

/// O(W+H) filter state: the two latest events per row and per column.
#[derive(Debug, Clone)]
pub struct OnfMemory {
    geometry: SensorGeometry,
    rows: Vec<[Option<OnfEntry>; 2]>,
    cols: Vec<[Option<OnfEntry>; 2]>,
}

impl OnfMemory {
    pub fn new(geometry: SensorGeometry) -> Self {
        Self {
            geometry,
            rows: vec![[None; 2]; geometry.height() as usize],
            cols: vec![[None; 2]; geometry.width() as usize],
        }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }
}

fn onf_supported(entries: &[Option<OnfEntry>; 2], coord: u16, t: u64, tau_us: u64) -> bool {
    let cutoff = t.saturating_sub(tau_us);
    entries.iter().flatten().any(|entry| {
        entry.coord.abs_diff(coord) <= 1 && entry.t >= cutoff && entry.t <= t
    })
}

fn onf_overwrite_older(entries: &mut [Option<OnfEntry>; 2], entry: OnfEntry) {
    let idx = match (entries[0], entries[1]) {
        (None, _) => 0,
        (_, None) => 1,
        (Some(a), Some(b)) => {
            if a.t <= b.t {
                0
            } else {
                1
            }
        }
    };
    entries[idx] = Some(entry);
}

/// Signal iff a remembered event in this row or column lies within one pixel
/// and within `tau_us`; the event then replaces the older remembered entry of
/// its row and of its column.
pub fn onf_classify(mem: &mut OnfMemory, e: &Event, tau_us: u64) -> Decision {
    let supported = onf_supported(&mem.rows[e.y as usize], e.x, e.t, tau_us)
        || onf_supported(&mem.cols[e.x as usize], e.y, e.t, tau_us);
    onf_overwrite_older(&mut mem.rows[e.y as usize], OnfEntry { coord: e.x, t: e.t });
    onf_overwrite_older(&mut mem.cols[e.x as usize], OnfEntry { coord: e.y, t: e.t });
    if supported {
        Decision::Signal
    } else {
        Decision::Noise
    }
}

/// Which baseline to replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "filter")]
pub enum BaselineFilter {
    Baf,
    Stcf { k: u32 },
    Onf,
}

/// Run one filter over the whole stream with fresh state, one decision per
/// event.
pub fn replay_decisions(
    filter: BaselineFilter,
    stream: &EventStream,
    tau_us: u64,
    sae_cfg: SaeConfig,
) -> Vec<Decision> {
    match filter {
        BaselineFilter::Baf => {
            let mut sae = Sae::new(stream.geometry(), sae_cfg);
            stream.iter().map(|e| baf_classify(&mut sae, e, tau_us)).collect()
        }
        BaselineFilter::Stcf { k } => {
            let mut sae = Sae::new(stream.geometry(), sae_cfg);
            stream
                .iter()
                .map(|e| stcf_classify(&mut sae, e, tau_us, k))
                .collect()
        }
        BaselineFilter::Onf => {
            let mut mem = OnfMemory::new(stream.geometry());
            stream.iter().map(|e| onf_classify(&mut mem, e, tau_us)).collect()
        }
    }
}

/// Logarithmically spaced correlation windows from 100 us to 1 s.
pub fn default_tau_grid(points: usize) -> Vec<u64> {
    assert!(points >= 2);
    let (lo, hi) = (100f64, 1_000_000f64);
    let mut taus: Vec<u64> = (0..points)
        .map(|i| {
            let frac = i as f64 / (points - 1) as f64;
            (lo * (hi / lo).powf(frac)).round() as u64
        })
        .collect();
    taus.dedup();
    taus
}

/// One ROC operating point per tau, each from a fresh replay of the stream.
/// The `threshold` column carries tau in microseconds; the curve is completed
/// with the trivial all-noise and all-signal endpoints so AUCs are comparable
/// across filters.
pub fn roc_by_tau(
    filter: BaselineFilter,
    stream: &EventStream,
    taus: &[u64],
    sae_cfg: SaeConfig,
) -> Result<RocCurve> {
    if !stream.is_fully_labeled() {
        return Err(Error::Validation(
            "tau sweep needs a fully labeled stream".into(),
        ));
    }
    let labels: Vec<Label> = stream.iter().map(|e| e.label).collect();
    let n_pos = labels.iter().filter(|&&l| l == Label::Signal).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::Validation(
            "tau sweep needs both classes present".into(),
        ));
    }

    let mut points = Vec::with_capacity(taus.len() + 2);
    points.push(RocPoint {
        threshold: 0.0,
        fpr: 0.0,
        tpr: 0.0,
    });
    for &tau in taus {
        let decisions = replay_decisions(filter, stream, tau, sae_cfg);
        let mut counts = ConfusionCounts::default();
        for (&d, &l) in decisions.iter().zip(&labels) {
            counts.record(d, l)?;
        }
        points.push(RocPoint {
            threshold: tau as f64,
            fpr: counts.fpr(),
            tpr: counts.tpr(),
        });
    }
    points.push(RocPoint {
        threshold: f64::INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    points.sort_by(|a, b| {
        a.fpr
            .partial_cmp(&b.fpr)
            .unwrap()
            .then(a.tpr.partial_cmp(&b.tpr).unwrap())
    });
    Ok(RocCurve::from_points(points))
}
