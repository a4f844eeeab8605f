//! Event data model: sensor geometry, events, ordered streams, and file I/O.

mod io;

pub use io::{read_events, read_events_auto, write_events, FileFormat};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sensor pixel array dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorGeometry {
    width: u16,
    height: u16,
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "sensor geometry must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn num_pixels(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }
}

/// Illumination change direction of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    /// Wire encoding: 1 = positive, 0 = negative.
    pub fn code(self) -> u8 {
        match self {
            Polarity::Negative => 0,
            Polarity::Positive => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Polarity::Negative),
            1 => Ok(Polarity::Positive),
            other => Err(Error::Validation(format!(
                "polarity code must be 0 or 1, got {other}"
            ))),
        }
    }

    /// 0 for negative, 1 for positive; used to index per-polarity planes.
    pub fn plane(self) -> usize {
        self.code() as usize
    }
}

/// Ground-truth annotation carried alongside each event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Noise,
    Signal,
    Unlabeled,
}

impl Label {
    /// Wire encoding: 0 = noise, 1 = signal, 2 = unlabeled.
    pub fn code(self) -> u8 {
        match self {
            Label::Noise => 0,
            Label::Signal => 1,
            Label::Unlabeled => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Label::Noise),
            1 => Ok(Label::Signal),
            2 => Ok(Label::Unlabeled),
            other => Err(Error::Validation(format!(
                "label code must be 0, 1 or 2, got {other}"
            ))),
        }
    }
}

/// A filter's verdict for one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Noise,
    Signal,
}

impl Decision {
    pub fn is_signal(self) -> bool {
        matches!(self, Decision::Signal)
    }
}

/// A single DVS event with optional ground-truth label.
///
/// Timestamps are unsigned 64-bit microseconds; wraparound is out of scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: u64,
    pub polarity: Polarity,
    pub label: Label,
}

/// An ordered event sequence bound to a sensor geometry.
///
/// Invariants: every event lies within the geometry and timestamps are
/// non-decreasing. Streams are immutable once constructed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    geometry: SensorGeometry,
    events: Vec<Event>,
}

impl EventStream {
    /// Build a stream from already-sorted events, validating the invariants.
    pub fn new(geometry: SensorGeometry, events: Vec<Event>) -> Result<Self> {
        let mut prev_t: Option<u64> = None;
        for (i, e) in events.iter().enumerate() {
            if !geometry.contains(e.x, e.y) {
                return Err(Error::Validation(format!(
                    "event {i} at ({}, {}) outside {}x{} geometry",
                    e.x,
                    e.y,
                    geometry.width(),
                    geometry.height()
                )));
            }
            if let Some(p) = prev_t {
                if e.t < p {
                    return Err(Error::Ordering {
                        index: i,
                        prev: p,
                        next: e.t,
                    });
                }
            }
            prev_t = Some(e.t);
        }
        Ok(Self { geometry, events })
    }

    /// Build a stream from events in arbitrary order; sorts stably by timestamp.
    pub fn from_unsorted(geometry: SensorGeometry, mut events: Vec<Event>) -> Result<Self> {
        events.sort_by_key(|e| e.t);
        Self::new(geometry, events)
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        Self {
            geometry,
            events: Vec::new(),
        }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// True when every event carries a signal or noise label.
    pub fn is_fully_labeled(&self) -> bool {
        self.events.iter().all(|e| e.label != Label::Unlabeled)
    }
}

/// Stable timestamp merge of two streams over the same geometry.
///
/// On ties, events from `a` precede events from `b`; labels are preserved.
pub fn merge_streams(a: &EventStream, b: &EventStream) -> Result<EventStream> {
    if a.geometry() != b.geometry() {
        return Err(Error::GeometryMismatch(format!(
            "{}x{} vs {}x{}",
            a.geometry().width(),
            a.geometry().height(),
            b.geometry().width(),
            b.geometry().height()
        )));
    }
    let mut merged = Vec::with_capacity(a.len() + b.len());
    let (mut ia, mut ib) = (0, 0);
    let (ea, eb) = (a.events(), b.events());
    while ia < ea.len() && ib < eb.len() {
        // `<=` keeps the first argument ahead on equal timestamps.
        if ea[ia].t <= eb[ib].t {
            merged.push(ea[ia]);
            ia += 1;
        } else {
            merged.push(eb[ib]);
            ib += 1;
        }
    }
    merged.extend_from_slice(&ea[ia..]);
    merged.extend_from_slice(&eb[ib..]);
    EventStream::new(a.geometry(), merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(w: u16, h: u16) -> SensorGeometry {
        SensorGeometry::new(w, h).unwrap()
    }

    fn ev(x: u16, y: u16, t: u64, label: Label) -> Event {
        Event {
            x,
            y,
            t,
            polarity: Polarity::Positive,
            label,
        }
    }

    #[test]
    fn geometry_rejects_zero() {
        assert!(SensorGeometry::new(0, 5).is_err());
        assert!(SensorGeometry::new(5, 0).is_err());
        assert!(SensorGeometry::new(1, 1).is_ok());
    }

    #[test]
    fn stream_rejects_out_of_bounds() {
        let g = geom(4, 4);
        let err = EventStream::new(g, vec![ev(4, 0, 0, Label::Signal)]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn stream_rejects_decreasing_timestamps() {
        let g = geom(4, 4);
        let events = vec![ev(0, 0, 10, Label::Signal), ev(1, 1, 5, Label::Signal)];
        let err = EventStream::new(g, events).unwrap_err();
        assert!(matches!(err, Error::Ordering { index: 1, .. }));
    }

    #[test]
    fn merge_orders_by_timestamp() {
        let g = geom(4, 4);
        let a = EventStream::new(g, vec![ev(0, 0, 1, Label::Signal)]).unwrap();
        let b = EventStream::new(g, vec![ev(1, 1, 2, Label::Noise)]).unwrap();
        let m = merge_streams(&a, &b).unwrap();
        assert_eq!(m.events()[0].t, 1);
        assert_eq!(m.events()[1].t, 2);
    }

    #[test]
    fn merge_tie_break_first_argument_wins() {
        let g = geom(4, 4);
        let a = EventStream::new(g, vec![ev(0, 0, 5, Label::Signal)]).unwrap();
        let b = EventStream::new(g, vec![ev(1, 1, 5, Label::Noise)]).unwrap();
        let m = merge_streams(&a, &b).unwrap();
        assert_eq!(m.events()[0].label, Label::Signal);
        assert_eq!(m.events()[1].label, Label::Noise);
    }

    #[test]
    fn merge_rejects_geometry_mismatch() {
        let a = EventStream::empty(geom(4, 4));
        let b = EventStream::empty(geom(4, 5));
        assert!(matches!(
            merge_streams(&a, &b),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn merge_matches_reference_sort() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = geom(16, 16);
        let mk = |label: Label, rng: &mut rand_chacha::ChaCha8Rng| {
            let mut events: Vec<Event> = (0..1000)
                .map(|_| Event {
                    x: rng.random_range(0..16),
                    y: rng.random_range(0..16),
                    t: rng.random_range(0..100_000),
                    polarity: if rng.random::<bool>() {
                        Polarity::Positive
                    } else {
                        Polarity::Negative
                    },
                    label,
                })
                .collect();
            events.sort_by_key(|e| e.t);
            EventStream::new(g, events).unwrap()
        };
        let a = mk(Label::Signal, &mut rng);
        let b = mk(Label::Noise, &mut rng);
        let merged = merge_streams(&a, &b).unwrap();
        assert_eq!(merged.len(), 2000);

        // Reference: concatenate with a source tag and stable-sort by time.
        let mut reference: Vec<(Event, u8)> = a
            .events()
            .iter()
            .map(|e| (*e, 0u8))
            .chain(b.events().iter().map(|e| (*e, 1u8)))
            .collect();
        reference.sort_by_key(|(e, src)| (e.t, *src));
        let reference: Vec<Event> = reference.into_iter().map(|(e, _)| e).collect();
        assert_eq!(merged.events(), reference.as_slice());
    }
}
