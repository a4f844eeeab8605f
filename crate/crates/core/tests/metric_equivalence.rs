//! The trapezoid area under the ROC must equal the pairwise concordance
//! probability, and the spatiotemporal filters must match a brute-force
//! history scan.

use evdenoise_core::baseline::{baf_classify, stcf_classify, Sae, SaeConfig};
use evdenoise_core::metrics::roc_from_scores;
use evdenoise_core::{Decision, Event, EventStream, Label, Polarity, SensorGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct O(P*N) concordance: P(score_signal > score_noise) + 0.5 ties.
fn concordance(scores: &[f64], labels: &[Label]) -> f64 {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == Label::Signal)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == Label::Noise)
        .map(|(&s, _)| s)
        .collect();
    let mut num = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                num += 1.0;
            } else if p == n {
                num += 0.5;
            }
        }
    }
    num / (pos.len() as f64 * neg.len() as f64)
}

#[test]
fn trapezoid_auc_equals_concordance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..100 {
        let n = 1000;
        // Alternate between continuous scores and heavily tied ones so the
        // tie-group handling is exercised, not just the generic path.
        let quantize = round % 2 == 1;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = rng.random_range(-3.0..3.0);
                if quantize {
                    (s * 2.0).round() / 2.0
                } else {
                    s
                }
            })
            .collect();
        let labels: Vec<Label> = scores
            .iter()
            .map(|&s| {
                // Noisy association between score and class.
                if rng.random::<f64>() < 1.0 / (1.0 + (-s).exp()) {
                    Label::Signal
                } else {
                    Label::Noise
                }
            })
            .collect();
        if !labels.contains(&Label::Signal) || !labels.contains(&Label::Noise) {
            continue;
        }
        let curve = roc_from_scores(&scores, &labels).unwrap();
        let want = concordance(&scores, &labels);
        assert!(
            (curve.auc - want).abs() < 1e-12,
            "round {round}: trapezoid {} vs concordance {want}",
            curve.auc
        );
    }
}

fn dense_stream(geometry: SensorGeometry, n: usize, max_dt: u64, seed: u64) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0u64;
    let events: Vec<Event> = (0..n)
        .map(|_| {
            t += rng.random_range(0..max_dt);
            Event {
                x: rng.random_range(0..geometry.width()),
                y: rng.random_range(0..geometry.height()),
                t,
                polarity: if rng.random() {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                },
                label: Label::Unlabeled,
            }
        })
        .collect();
    EventStream::new(geometry, events).unwrap()
}

/// Count prior events in the 8-neighborhood newer than the cutoff, scanning
/// the whole history backwards. The timestamp-map filters must agree: keeping
/// only the latest time per pixel loses nothing, because the latest neighbor
/// is fresh exactly when any neighbor is.
fn brute_force_support(history: &[Event], e: &Event, tau_us: u64) -> u32 {
    let cutoff = e.t.saturating_sub(tau_us);
    let mut seen = std::collections::HashSet::new();
    let mut count = 0;
    for h in history.iter().rev() {
        if h.t < cutoff {
            break;
        }
        let dx = (h.x as i32 - e.x as i32).abs();
        let dy = (h.y as i32 - e.y as i32).abs();
        if dx <= 1 && dy <= 1 && (dx, dy) != (0, 0) && seen.insert((h.x, h.y)) {
            count += 1;
        }
    }
    count
}

#[test]
fn spatiotemporal_filters_match_history_scan() {
    let g = SensorGeometry::new(64, 48).unwrap();
    let n = 100_000;
    let tau = 5_000u64;
    let stream = dense_stream(g, n, 50, 303);

    let mut baf_sae = Sae::new(g, SaeConfig::default());
    let mut stcf_sae = Sae::new(g, SaeConfig::default());
    let mut history: Vec<Event> = Vec::with_capacity(n);
    let mut supported_events = 0usize;

    for e in stream.iter() {
        let support = brute_force_support(&history, e, tau);
        let want_baf = if support >= 1 {
            Decision::Signal
        } else {
            Decision::Noise
        };
        let want_stcf = if support >= 2 {
            Decision::Signal
        } else {
            Decision::Noise
        };
        assert_eq!(baf_classify(&mut baf_sae, e, tau), want_baf, "t={}", e.t);
        assert_eq!(
            stcf_classify(&mut stcf_sae, e, tau, 2),
            want_stcf,
            "t={}",
            e.t
        );
        if want_baf == Decision::Signal {
            supported_events += 1;
        }
        history.push(e.clone());
    }
    // The stream must actually exercise both branches.
    assert!(supported_events > n / 20, "only {supported_events} supported");
    assert!(supported_events < n * 19 / 20);
}
