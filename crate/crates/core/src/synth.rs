//! Synthetic labeled streams: background-activity noise generators and a
//! moving-edge signal generator, all deterministic given (config, seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Label, Polarity, SensorGeometry};

/// Counter-based PRNG used by every generator; echoed into config metadata so
/// streams can be reproduced by an independent implementation.
pub const PRNG_ALGORITHM: &str = "chacha8";

/// Uncorrelated shot noise: each pixel fires as an independent homogeneous
/// Poisson process; polarity is a fair coin.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShotNoiseConfig {
    /// Per-pixel mean event rate in Hz.
    pub rate_hz: f64,
    pub seed: u64,
}

/// Leak noise: positive-only events whose per-pixel rate is drawn once from a
/// log-normal spread around `mean_rate_hz`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LeakNoiseConfig {
    /// Per-pixel mean positive-event rate in Hz (mean preserved under spread).
    pub mean_rate_hz: f64,
    /// Log-scale sigma of the per-pixel rate distribution; 0 = uniform rates.
    pub dispersion: f64,
    pub seed: u64,
}

/// Which way the synthetic edge line runs (it sweeps perpendicular to itself).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeOrientation {
    /// Vertical line sweeping left-to-right along +x.
    Vertical,
    /// Horizontal line sweeping top-to-bottom along +y.
    Horizontal,
}

/// A straight edge sweeping across the frame at constant speed, emitting
/// positive events on the leading half of each pixel crossing and negative
/// events on the trailing half.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MovingEdgeConfig {
    /// Sweep speed in pixels per second.
    pub speed: f64,
    pub orientation: EdgeOrientation,
    /// Expected events emitted per pixel each time the edge crosses it.
    pub events_per_crossing: f64,
    pub seed: u64,
}

impl MovingEdgeConfig {
    /// Analytic edge position (in pixels along the sweep axis) at time `t_us`.
    pub fn edge_position(&self, t_us: u64) -> f64 {
        self.speed * t_us as f64 * 1e-6
    }
}

fn check_duration(duration_us: u64) -> Result<()> {
    if duration_us == 0 {
        return Err(Error::Config("duration_us must be positive".into()));
    }
    Ok(())
}

fn poisson_count(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(lambda).expect("positive finite lambda");
    dist.sample(rng) as u64
}

/// Generate shot noise over the whole frame for `duration_us`.
///
/// Draws the total count once from Poisson(W·H·rate·T) and scatters events
/// uniformly over pixels and time, which is distributionally identical to
/// per-pixel homogeneous Poisson processes.
pub fn gen_shot_noise(
    geometry: SensorGeometry,
    duration_us: u64,
    config: &ShotNoiseConfig,
) -> Result<EventStream> {
    check_duration(duration_us)?;
    if config.rate_hz < 0.0 {
        return Err(Error::Config(format!(
            "rate_hz must be non-negative, got {}",
            config.rate_hz
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let duration_s = duration_us as f64 * 1e-6;
    let lambda = geometry.num_pixels() as f64 * config.rate_hz * duration_s;
    let count = poisson_count(&mut rng, lambda);

    let mut events = Vec::with_capacity(count as usize);
    for _ in 0..count {
        events.push(Event {
            x: rng.random_range(0..geometry.width()),
            y: rng.random_range(0..geometry.height()),
            t: rng.random_range(0..duration_us),
            polarity: if rng.random::<bool>() {
                Polarity::Positive
            } else {
                Polarity::Negative
            },
            label: Label::Noise,
        });
    }
    EventStream::from_unsorted(geometry, events)
}

/// Generate leak noise: positive-only events, per-pixel rates drawn from a
/// mean-preserving log-normal (`rate_i = mean·exp(σZ − σ²/2)`).
pub fn gen_leak_noise(
    geometry: SensorGeometry,
    duration_us: u64,
    config: &LeakNoiseConfig,
) -> Result<EventStream> {
    check_duration(duration_us)?;
    if config.mean_rate_hz < 0.0 || config.dispersion < 0.0 {
        return Err(Error::Config(format!(
            "mean_rate_hz and dispersion must be non-negative, got {} / {}",
            config.mean_rate_hz, config.dispersion
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let duration_s = duration_us as f64 * 1e-6;
    let sigma = config.dispersion;

    let mut events = Vec::new();
    for y in 0..geometry.height() {
        for x in 0..geometry.width() {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let rate = config.mean_rate_hz * (sigma * z - sigma * sigma / 2.0).exp();
            let k = poisson_count(&mut rng, rate * duration_s);
            for _ in 0..k {
                events.push(Event {
                    x,
                    y,
                    t: rng.random_range(0..duration_us),
                    polarity: Polarity::Positive,
                    label: Label::Noise,
                });
            }
        }
    }
    EventStream::from_unsorted(geometry, events)
}

/// Generate a moving-edge sweep.
///
/// Each pixel on the sweep axis is crossed during a half-pixel-wide time
/// window; events are uniform inside it, positive before the window midpoint
/// and negative after, so every event lies within one pixel of the analytic
/// edge position at its timestamp.
pub fn gen_moving_edge(
    geometry: SensorGeometry,
    duration_us: u64,
    config: &MovingEdgeConfig,
) -> Result<EventStream> {
    check_duration(duration_us)?;
    if !(config.speed > 0.0) {
        return Err(Error::Config(format!(
            "speed must be positive, got {}",
            config.speed
        )));
    }
    if config.events_per_crossing < 0.0 {
        return Err(Error::Config(format!(
            "events_per_crossing must be non-negative, got {}",
            config.events_per_crossing
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (sweep_len, line_len) = match config.orientation {
        EdgeOrientation::Vertical => (geometry.width(), geometry.height()),
        EdgeOrientation::Horizontal => (geometry.height(), geometry.width()),
    };
    let us_per_px = 1e6 / config.speed;

    let mut events = Vec::new();
    for sweep in 0..sweep_len {
        // Edge covers pixel `sweep` while its position is within ±0.5 px.
        let lo = (sweep as f64 - 0.5) * us_per_px;
        let hi = (sweep as f64 + 0.5) * us_per_px;
        let mid = (lo + hi) / 2.0;
        if hi <= 0.0 || lo >= duration_us as f64 {
            continue;
        }
        for line in 0..line_len {
            let k = poisson_count(&mut rng, config.events_per_crossing);
            for _ in 0..k {
                let u = rng.random_range(lo..hi);
                if u < 0.0 || u >= duration_us as f64 {
                    continue;
                }
                let (x, y) = match config.orientation {
                    EdgeOrientation::Vertical => (sweep, line),
                    EdgeOrientation::Horizontal => (line, sweep),
                };
                events.push(Event {
                    x,
                    y,
                    t: u as u64,
                    polarity: if u < mid {
                        Polarity::Positive
                    } else {
                        Polarity::Negative
                    },
                    label: Label::Signal,
                });
            }
        }
    }
    EventStream::from_unsorted(geometry, events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(w: u16, h: u16) -> SensorGeometry {
        SensorGeometry::new(w, h).unwrap()
    }

    #[test]
    fn shot_zero_rate_is_empty() {
        let s = gen_shot_noise(
            geom(32, 32),
            1_000_000,
            &ShotNoiseConfig {
                rate_hz: 0.0,
                seed: 1,
            },
        )
        .unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn shot_count_within_poisson_bounds() {
        // 100x100 px at 1 Hz for 1 s: mean 10_000, sigma 100.
        let s = gen_shot_noise(
            geom(100, 100),
            1_000_000,
            &ShotNoiseConfig {
                rate_hz: 1.0,
                seed: 42,
            },
        )
        .unwrap();
        let n = s.len() as f64;
        assert!((n - 10_000.0).abs() < 4.0 * 100.0, "count {n} out of range");
    }

    #[test]
    fn shot_all_labels_noise_and_sorted() {
        let s = gen_shot_noise(
            geom(20, 20),
            500_000,
            &ShotNoiseConfig {
                rate_hz: 5.0,
                seed: 3,
            },
        )
        .unwrap();
        assert!(s.iter().all(|e| e.label == Label::Noise));
        assert!(s.events().windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn shot_deterministic_per_seed() {
        let g = geom(50, 50);
        let cfg = ShotNoiseConfig {
            rate_hz: 2.0,
            seed: 9,
        };
        let a = gen_shot_noise(g, 200_000, &cfg).unwrap();
        let b = gen_shot_noise(g, 200_000, &cfg).unwrap();
        assert_eq!(a, b);
        let c = gen_shot_noise(
            g,
            200_000,
            &ShotNoiseConfig {
                rate_hz: 2.0,
                seed: 10,
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shot_spatially_uniform_chi_squared() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        // 10^5+ events over 10^4 pixels: expected ~12 per cell.
        let g = geom(100, 100);
        let s = gen_shot_noise(
            g,
            1_000_000,
            &ShotNoiseConfig {
                rate_hz: 12.0,
                seed: 1234,
            },
        )
        .unwrap();
        assert!(s.len() >= 100_000);
        let mut counts = vec![0u64; g.num_pixels() as usize];
        for e in s.iter() {
            counts[e.y as usize * g.width() as usize + e.x as usize] += 1;
        }
        let expected = s.len() as f64 / g.num_pixels() as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        let dof = (g.num_pixels() - 1) as f64;
        let crit = ChiSquared::new(dof).unwrap().inverse_cdf(0.999);
        assert!(stat < crit, "chi^2 {stat} >= critical {crit}");
    }

    #[test]
    fn leak_all_positive() {
        let s = gen_leak_noise(
            geom(30, 30),
            1_000_000,
            &LeakNoiseConfig {
                mean_rate_hz: 2.0,
                dispersion: 1.0,
                seed: 5,
            },
        )
        .unwrap();
        assert!(!s.is_empty());
        assert!(s.iter().all(|e| e.polarity == Polarity::Positive));
        assert!(s.iter().all(|e| e.label == Label::Noise));
    }

    #[test]
    fn leak_mean_count_preserved_under_dispersion() {
        let g = geom(100, 100);
        let mean = 1.0;
        let sigma: f64 = 0.5;
        let duration_s = 1.0;
        let s = gen_leak_noise(
            g,
            1_000_000,
            &LeakNoiseConfig {
                mean_rate_hz: mean,
                dispersion: sigma,
                seed: 77,
            },
        )
        .unwrap();
        let expect = g.num_pixels() as f64 * mean * duration_s;
        // Total variance = Poisson part + log-normal rate mixing part.
        let per_pixel_lambda = mean * duration_s;
        let mix_var = per_pixel_lambda * per_pixel_lambda * ((sigma * sigma).exp() - 1.0);
        let var = g.num_pixels() as f64 * (per_pixel_lambda + mix_var);
        let bound = 4.0 * var.sqrt();
        let n = s.len() as f64;
        assert!(
            (n - expect).abs() < bound,
            "count {n} not within {bound} of {expect}"
        );
    }

    #[test]
    fn leak_zero_dispersion_matches_mean_statistics() {
        let g = geom(60, 60);
        let s = gen_leak_noise(
            g,
            1_000_000,
            &LeakNoiseConfig {
                mean_rate_hz: 3.0,
                dispersion: 0.0,
                seed: 8,
            },
        )
        .unwrap();
        let expect = g.num_pixels() as f64 * 3.0;
        let n = s.len() as f64;
        assert!((n - expect).abs() < 4.0 * expect.sqrt());
    }

    #[test]
    fn edge_events_near_analytic_position() {
        let g = geom(64, 48);
        let cfg = MovingEdgeConfig {
            speed: 100.0,
            orientation: EdgeOrientation::Vertical,
            events_per_crossing: 3.0,
            seed: 11,
        };
        let s = gen_moving_edge(g, 1_000_000, &cfg).unwrap();
        assert!(!s.is_empty());
        for e in s.iter() {
            let pos = cfg.edge_position(e.t);
            assert!(
                (e.x as f64 - pos).abs() <= 1.0,
                "event at x={} t={} but edge at {pos}",
                e.x,
                e.t
            );
            assert_eq!(e.label, Label::Signal);
        }
    }

    #[test]
    fn edge_no_events_after_frame_exit() {
        let g = geom(32, 32);
        let cfg = MovingEdgeConfig {
            speed: 1000.0, // crosses 32 px in 32 ms, well before 1 s
            orientation: EdgeOrientation::Vertical,
            events_per_crossing: 2.0,
            seed: 12,
        };
        let s = gen_moving_edge(g, 1_000_000, &cfg).unwrap();
        let exit_us = ((g.width() as f64 + 0.5) / cfg.speed * 1e6) as u64;
        assert!(s.iter().all(|e| e.t <= exit_us));
    }

    #[test]
    fn edge_horizontal_orientation_sweeps_rows() {
        let g = geom(48, 64);
        let cfg = MovingEdgeConfig {
            speed: 100.0,
            orientation: EdgeOrientation::Horizontal,
            events_per_crossing: 3.0,
            seed: 13,
        };
        let s = gen_moving_edge(g, 1_000_000, &cfg).unwrap();
        assert!(!s.is_empty());
        for e in s.iter() {
            let pos = cfg.edge_position(e.t);
            assert!((e.y as f64 - pos).abs() <= 1.0);
        }
    }

    #[test]
    fn edge_polarity_split_leading_positive() {
        let g = geom(64, 8);
        let cfg = MovingEdgeConfig {
            speed: 50.0,
            orientation: EdgeOrientation::Vertical,
            events_per_crossing: 20.0,
            seed: 14,
        };
        let s = gen_moving_edge(g, 2_000_000, &cfg).unwrap();
        // Within one column, every positive event precedes every negative one.
        let us_per_px = 1e6 / cfg.speed;
        for col in 0..g.width() {
            let mid = col as f64 * us_per_px;
            for e in s.iter().filter(|e| e.x == col) {
                match e.polarity {
                    Polarity::Positive => assert!((e.t as f64) <= mid + 1.0),
                    Polarity::Negative => assert!((e.t as f64) >= mid - 1.0),
                }
            }
        }
        let n_pos = s.iter().filter(|e| e.polarity == Polarity::Positive).count();
        let n_neg = s.len() - n_pos;
        assert!(n_pos > 0 && n_neg > 0);
    }
}
