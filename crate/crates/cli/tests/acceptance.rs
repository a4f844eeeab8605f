//! Acceptance suite: one test per shipping requirement, each printing a
//! single verdict line. Tolerances are pinned here, not in helper code, so a
//! regression shows up as a diff in this file's assertions.

use std::time::Instant;

use evdenoise_core::baseline::{
    baf_classify, replay_decisions, roc_by_tau, stcf_classify, BaselineFilter, Sae, SaeConfig,
    default_tau_grid,
};
use evdenoise_core::bits::BitVec;
use evdenoise_core::ebbi::{
    extract_sequence, extract_sequence_banked, BankConfig, BankedMemory, EbbiStack, PatchSequence,
    WindowMode,
};
use evdenoise_core::event::merge_streams;
use evdenoise_core::metrics::{roc_from_scores, trapezoid_auc, RocPoint};
use evdenoise_core::snn::{lif_step, score_sequence, LifState, QuantizedFcsnn};
use evdenoise_core::synth::{
    gen_moving_edge, gen_shot_noise, EdgeOrientation, MovingEdgeConfig, ShotNoiseConfig,
};
use evdenoise_core::trainer::{
    batch_gradients, batch_loss, build_dataset, quantize, sweep_threshold, train_with_log,
    ClassWeights, FloatFcsnn, LabeledSample, ReplayConfig, SpikeMode, TrainConfig,
};
use evdenoise_core::{Decision, Event, EventStream, Label, Polarity, SensorGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_stream(geometry: SensorGeometry, n: usize, max_dt: u64, seed: u64) -> EventStream {
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

/// 1: patches assembled from the banked word memory must equal the plain
/// bitmap extraction bit-for-bit over a long random replay.
#[test]
fn a1_banked_memory_equals_plain_extraction() {
    let started = Instant::now();
    let g = SensorGeometry::new(64, 48).unwrap();
    let stream = random_stream(g, 100_000, 300, 101);
    let mut stack = EbbiStack::new(g, 2, WindowMode::FixedTime { t_e_us: 5_000 }).unwrap();
    let mut banked = BankedMemory::new(g, stack.n_slots(), BankConfig::default()).unwrap();
    let mut mismatches = 0usize;
    for e in stream.iter() {
        let out = stack.process_event(e).unwrap();
        banked.set_bit(out.slot_written, e.polarity, e.x, e.y);
        if let Some(slot) = out.slot_cleared {
            banked.clear_slot(slot);
        }
        let plain = extract_sequence(&stack, e, 5).unwrap();
        let fetched = extract_sequence_banked(&stack, &banked, e, 5).unwrap();
        if plain != fetched {
            mismatches += 1;
        }
    }
    let elapsed = started.elapsed();
    assert_eq!(mismatches, 0);
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!(
        "[PASS] 1/9 banked fetch equals plain extraction: 100000 events, 0 mismatches, {:.1}s",
        elapsed.as_secs_f64()
    );
}

/// 2: the rotation keeps N+1 slot pairs, wipes the cleared slot on every
/// transition, and the pointer pair returns to its start after exactly N+1
/// transitions, over ten thousand random streams.
#[test]
fn a2_stack_rotation_invariants() {
    let g = SensorGeometry::new(24, 18).unwrap();
    let mut seed_rng = ChaCha8Rng::seed_from_u64(77);
    for round in 0..10_000u32 {
        let n_ebbi = 1 + (round as usize % 4);
        let mode = if round % 2 == 0 {
            WindowMode::FixedTime { t_e_us: 700 }
        } else {
            WindowMode::FixedCount { n_e: 7 }
        };
        let mut stack = EbbiStack::new(g, n_ebbi, mode).unwrap();
        assert_eq!(stack.n_slots(), n_ebbi + 1);
        let start = (stack.ptr_active(), stack.ptr_clear());
        let mut transitions = 0usize;
        let stream = random_stream(g, 120, 200, seed_rng.random());
        for e in stream.iter() {
            let out = stack.process_event(e).unwrap();
            if out.transitioned {
                transitions += 1;
                assert_eq!(stack.slot(out.slot_cleared.unwrap()).count_ones(), 0);
                let back_at_start = (stack.ptr_active(), stack.ptr_clear()) == start;
                assert_eq!(
                    back_at_start,
                    transitions % (n_ebbi + 1) == 0,
                    "pointer period broken at round {round}"
                );
            }
        }
        assert!(transitions >= 2, "round {round} never rotated");
    }
    println!("[PASS] 2/9 stack rotation invariants held over 10000 random streams");
}

/// 3: worst-case words per bank to cover a 5-pixel span: always 2 with 4-bit
/// words, 1 or 2 with 8-bit words (1 only when aligned), never more than 3
/// with 2-bit words.
#[test]
fn a3_fetch_cycle_bounds_by_word_width() {
    let g = SensorGeometry::new(64, 48).unwrap();
    for (word_bits, expect_min, expect_max) in [(4usize, 2u32, 2u32), (8, 1, 2), (2, 3, 3)] {
        let cfg = BankConfig { n_banks: 5, word_bits };
        let memory = BankedMemory::new(g, 3, cfg).unwrap();
        let mut seen_min = u32::MAX;
        let mut seen_max = 0;
        for x_c in 0..g.width() {
            let fetch = memory.fetch_patch_words(1, Polarity::Positive, x_c, 24, 5).unwrap();
            seen_min = seen_min.min(fetch.cycles_used);
            seen_max = seen_max.max(fetch.cycles_used);
        }
        assert_eq!(
            (seen_min, seen_max),
            (expect_min, expect_max),
            "word_bits={word_bits}"
        );
    }
    println!("[PASS] 3/9 fetch cycles: 4-bit words always 2, 8-bit 1..2, 2-bit capped at 3");
}

/// Reference LIF simulator written independently from the engine: i64
/// arithmetic, indexed bit reads, floor division, explicit clamps.
struct RefSim {
    v: Vec<i64>,
    spiked: Vec<bool>,
}

impl RefSim {
    fn new(h: usize) -> Self {
        Self {
            v: vec![0; h],
            spiked: vec![false; h],
        }
    }

    fn step(&mut self, net: &QuantizedFcsnn, x: &BitVec) -> Vec<bool> {
        let dim = net.input_dim();
        let denom = 1i64 << net.beta_shift();
        let mut out = Vec::with_capacity(self.v.len());
        for j in 0..self.v.len() {
            let mut acc = if self.spiked[j] {
                0
            } else {
                self.v[j] - self.v[j].div_euclid(denom)
            };
            for i in 0..dim {
                if x.get(i) {
                    acc += net.w1()[j * dim + i] as i64;
                }
            }
            if acc > 2047 {
                acc = 2047;
            }
            if acc < -2048 {
                acc = -2048;
            }
            self.v[j] = acc;
            out.push(acc >= net.v_th() as i64);
        }
        self.spiked = out.clone();
        out
    }

    fn score(&self, net: &QuantizedFcsnn) -> i64 {
        self.spiked
            .iter()
            .zip(net.w2())
            .map(|(&s, &w)| if s { w as i64 } else { 0 })
            .sum()
    }
}

fn random_seq(rng: &mut ChaCha8Rng, dim: usize, steps: usize, density: f64) -> PatchSequence {
    let vectors = (0..steps)
        .map(|_| {
            let bits: Vec<bool> = (0..dim).map(|_| rng.random::<f64>() < density).collect();
            BitVec::from_bools(&bits)
        })
        .collect();
    PatchSequence::new(dim, vectors).unwrap()
}

/// 4: integer engine vs reference simulator over a thousand random networks,
/// hard-reset and saturation behavior, and backprop vs finite differences.
#[test]
fn a4_network_numerics_and_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);

    for round in 0..1000 {
        let dim = rng.random_range(1..=50);
        let hidden = rng.random_range(1..=30);
        let steps = rng.random_range(1..=4);
        let w1: Vec<i8> = (0..hidden * dim).map(|_| rng.random()).collect();
        let w2: Vec<i8> = (0..hidden).map(|_| rng.random()).collect();
        let net = QuantizedFcsnn::new(
            dim,
            hidden,
            w1,
            w2,
            rng.random_range(1..200),
            rng.random_range(1..=5),
            1.0,
            1.0,
        )
        .unwrap();
        let density = rng.random_range(0.1..0.9);
        let seq = random_seq(&mut rng, dim, steps, density);
        let mut state = LifState::new(hidden);
        let mut reference = RefSim::new(hidden);
        for k in 0..seq.len() {
            let got = lif_step(&net, &mut state, seq.get(k)).unwrap();
            let want = reference.step(&net, seq.get(k));
            assert_eq!(got, want, "round {round} step {k}");
        }
        assert_eq!(
            score_sequence(&net, &seq).unwrap() as i64,
            reference.score(&net),
            "round {round}"
        );

        // Hard reset: zero input right after a spike leaves the membrane at 0.
        let spikes = state.last_spikes.clone();
        lif_step(&net, &mut state, &BitVec::zeros(dim)).unwrap();
        for (j, was_spiking) in spikes.iter().enumerate() {
            if *was_spiking {
                assert_eq!(state.membranes[j], 0, "round {round} neuron {j}");
            }
        }
        for &v in &state.membranes {
            assert!((-2048..=2047).contains(&v));
        }
    }

    // Saturation is reachable and pins at the 12-bit rails. The threshold
    // sits above the positive rail so nothing spikes and the clamp is what
    // stops the accumulation.
    let net = QuantizedFcsnn::new(
        16,
        2,
        (0..32).map(|i| if i < 16 { 127 } else { -127 }).collect(),
        vec![1, 1],
        1_000_000,
        1,
        1.0,
        1.0,
    )
    .unwrap();
    let mut state = LifState::new(2);
    let dense = BitVec::from_bools(&[true; 16]);
    for _ in 0..4 {
        lif_step(&net, &mut state, &dense).unwrap();
    }
    assert_eq!(state.membranes, vec![2047, -2048]);

    // Analytic gradients against central differences on 10 probes.
    let dim = 12;
    let hidden = 5;
    let slope = 0.7;
    let weights = ClassWeights::uniform();
    let samples: Vec<LabeledSample> = (0..6)
        .map(|i| LabeledSample {
            sequence: random_seq(&mut rng, dim, 3, 0.5),
            label: if i % 2 == 0 { Label::Signal } else { Label::Noise },
            t: i as u64,
        })
        .collect();
    let w1: Vec<f64> = (0..hidden * dim).map(|_| rng.random_range(-0.6..0.6)).collect();
    let w2: Vec<f64> = (0..hidden).map(|_| rng.random_range(-0.8..0.8)).collect();
    let net = FloatFcsnn::new(dim, hidden, w1.clone(), w2.clone(), 0.5, 1.0).unwrap();
    let (_, grads) = batch_gradients(&net, &samples, slope, SpikeMode::Ramp, &weights);
    let eps = 1e-5;
    for probe in 0..10 {
        let in_w1 = probe < 6;
        let idx = if in_w1 { probe * 9 } else { probe - 6 };
        let analytic = if in_w1 { grads.w1[idx] } else { grads.w2[idx] };
        let loss_at = |delta: f64| {
            let mut w1p = w1.clone();
            let mut w2p = w2.clone();
            if in_w1 {
                w1p[idx] += delta;
            } else {
                w2p[idx] += delta;
            }
            let p = FloatFcsnn::new(dim, hidden, w1p, w2p, 0.5, 1.0).unwrap();
            batch_loss(&p, &samples, slope, SpikeMode::Ramp, &weights)
        };
        let numeric = (loss_at(eps) - loss_at(-eps)) / (2.0 * eps);
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
        assert!(rel < 1e-4, "probe {probe}: analytic {analytic} numeric {numeric}");
    }

    println!("[PASS] 4/9 engine matched reference on 1000 nets; reset/saturation/gradient checks held");
}

/// 5: trapezoidal area under the swept curve equals the probability that a
/// random signal outranks a random noise event (ties counted half).
#[test]
fn a5_auc_equals_pairwise_concordance() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut checked = 0;
    for round in 0..100 {
        let quantized = round % 2 == 1;
        let scores: Vec<f64> = (0..1000)
            .map(|_| {
                let s: f64 = rng.random_range(-2.0..2.0);
                if quantized {
                    s.round()
                } else {
                    s
                }
            })
            .collect();
        let labels: Vec<Label> = scores
            .iter()
            .map(|&s| {
                if rng.random::<f64>() < 1.0 / (1.0 + (-1.5 * s).exp()) {
                    Label::Signal
                } else {
                    Label::Noise
                }
            })
            .collect();
        if !labels.contains(&Label::Signal) || !labels.contains(&Label::Noise) {
            continue;
        }
        let auc = roc_from_scores(&scores, &labels).unwrap().auc;
        let pos: Vec<f64> = scores
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == Label::Signal)
            .map(|(&s, _)| s)
            .collect();
        let neg: Vec<f64> = scores
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == Label::Noise)
            .map(|(&s, _)| s)
            .collect();
        let mut num = 0.0;
        for &p in &pos {
            for &n in &neg {
                num += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        let concordance = num / (pos.len() as f64 * neg.len() as f64);
        assert!(
            (auc - concordance).abs() < 1e-12,
            "round {round}: {auc} vs {concordance}"
        );
        checked += 1;
    }
    assert!(checked >= 95);
    println!("[PASS] 5/9 trapezoid AUC equals concordance within 1e-12 on {checked} score sets");
}

/// 6: the closed-form hardware numbers for the default configuration.
#[test]
fn a6_hardware_model_figures() {
    use evdenoise_core::hw::{
        energy_per_event_nj, latency_cycles, memory_bits, power_total_mw, throughput_meps,
        PipelineConfig, PipelineMode, PowerSpec,
    };
    let g = SensorGeometry::new(346, 260).unwrap();
    assert_eq!(memory_bits(g, 2), 539_760);

    let cfg = PipelineConfig::default();
    assert_eq!(latency_cycles(&cfg), 9);
    let meps = throughput_meps(&cfg, 400e6);
    assert!((meps - 44.44).abs() < 0.01, "throughput {meps}");
    let pipelined = PipelineConfig {
        mode: PipelineMode::Pipelined,
        ..cfg
    };
    assert_eq!(throughput_meps(&pipelined, 400e6), 400.0);

    let spec = PowerSpec {
        dynamic_power_mw: 65.24,
        clock_hz: 400e6,
        leakage_mw: 0.012,
    };
    let nj = energy_per_event_nj(&spec, 9);
    assert!((nj - 1.468).abs() < 0.01, "energy {nj}");
    let mw = power_total_mw(&spec, 9, 1e6);
    assert!((mw - 1.48).abs() < 0.01, "power {mw}");
    println!(
        "[PASS] 6/9 hardware figures: 539760 bits, 9 cycles, {meps:.2} Meps, {nj:.3} nJ, {mw:.3} mW"
    );
}

/// The one benchmark scene used for the end-to-end ranking run: a dense
/// vertical edge crossing the full frame in six seconds, mixed 1:1 with
/// count-matched uniform shot noise.
fn benchmark_scene() -> EventStream {
    let g = SensorGeometry::new(346, 260).unwrap();
    let duration = 6_000_000;
    let edge = gen_moving_edge(
        g,
        duration,
        &MovingEdgeConfig {
            speed: 57.7,
            orientation: EdgeOrientation::Vertical,
            events_per_crossing: 16.0,
            seed: 1,
        },
    )
    .unwrap();
    let shot = gen_shot_noise(
        g,
        duration,
        &ShotNoiseConfig {
            rate_hz: 16.0 / 6.0,
            seed: 2,
        },
    )
    .unwrap();
    merge_streams(&edge, &shot).unwrap()
}

/// 7: on the synthetic benchmark the trained and quantized network separates
/// signal from noise on held-out data, and outranks both spatiotemporal
/// baselines; the whole run stays inside a ten-minute budget.
#[test]
fn a7_end_to_end_ranking_on_synthetic_benchmark() {
    let started = Instant::now();
    let stream = benchmark_scene();
    assert!(stream.len() >= 500_000, "scene has {} events", stream.len());
    let n_signal = stream.iter().filter(|e| e.label == Label::Signal).count();
    let balance = n_signal as f64 / stream.len() as f64;
    assert!((balance - 0.5).abs() < 0.01, "class balance {balance}");

    let replay = ReplayConfig {
        n_ebbi: 2,
        window: WindowMode::FixedTime { t_e_us: 25_000 },
        patch: 5,
    };
    let snnf_auc = {
        let ds = build_dataset(&stream, &replay, 0.8).unwrap();
        let train_set: Vec<_> = ds.train.iter().step_by(8).cloned().collect();
        let config = TrainConfig {
            learning_rate: 0.5,
            epochs: 8,
            batch_size: 32,
            surrogate_slope: 1.0,
            train_fraction: 0.8,
            n_hidden: 30,
            seed: 1,
        };
        let (float_net, _) = train_with_log(&train_set, None, &config).unwrap();
        let quantized = quantize(&float_net).unwrap();
        sweep_threshold(&quantized, &ds.test).unwrap().auc
    };

    let taus = default_tau_grid(33);
    let stcf_auc = roc_by_tau(
        BaselineFilter::Stcf { k: 4 },
        &stream,
        &taus,
        SaeConfig::default(),
    )
    .unwrap()
    .auc;
    let baf_auc = roc_by_tau(BaselineFilter::Baf, &stream, &taus, SaeConfig::default())
        .unwrap()
        .auc;

    let elapsed = started.elapsed();
    assert!(snnf_auc >= 0.85, "network auc {snnf_auc}");
    assert!(
        snnf_auc > stcf_auc && stcf_auc > baf_auc,
        "ranking violated: network {snnf_auc:.4}, stcf {stcf_auc:.4}, baf {baf_auc:.4}"
    );
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}");
    println!(
        "[PASS] 7/9 benchmark ranking: network {snnf_auc:.4} > stcf(k=4) {stcf_auc:.4} > baf {baf_auc:.4} in {:.0}s",
        elapsed.as_secs_f64()
    );
}

/// 8: the count filter at k=1 is the same classifier as the any-neighbor
/// filter, and both match a full-history brute-force scan.
#[test]
fn a8_baseline_decision_equivalence() {
    let g = SensorGeometry::new(48, 36).unwrap();
    for seed in [11u64, 22, 33] {
        let stream = random_stream(g, 10_000, 120, seed);
        for tau in [200u64, 5_000, 150_000] {
            let baf = replay_decisions(BaselineFilter::Baf, &stream, tau, SaeConfig::default());
            let stcf1 = replay_decisions(
                BaselineFilter::Stcf { k: 1 },
                &stream,
                tau,
                SaeConfig::default(),
            );
            assert_eq!(baf, stcf1, "seed {seed} tau {tau}");
        }
    }

    // Full-history oracle: latest event per neighbor pixel, no windowing
    // shortcuts.
    let stream = random_stream(g, 10_000, 120, 44);
    let tau = 5_000u64;
    let mut sae = Sae::new(g, SaeConfig::default());
    let mut sae_k = Sae::new(g, SaeConfig::default());
    let mut history: Vec<Event> = Vec::new();
    for e in stream.iter() {
        let cutoff = e.t.saturating_sub(tau);
        let mut fresh_pixels = std::collections::HashSet::new();
        for h in &history {
            let dx = (h.x as i32 - e.x as i32).abs();
            let dy = (h.y as i32 - e.y as i32).abs();
            if dx <= 1 && dy <= 1 && (dx, dy) != (0, 0) && h.t >= cutoff {
                fresh_pixels.insert((h.x, h.y));
            }
        }
        let want_baf = if fresh_pixels.is_empty() {
            Decision::Noise
        } else {
            Decision::Signal
        };
        let want_stcf4 = if fresh_pixels.len() >= 4 {
            Decision::Signal
        } else {
            Decision::Noise
        };
        assert_eq!(baf_classify(&mut sae, e, tau), want_baf, "t={}", e.t);
        assert_eq!(
            stcf_classify(&mut sae_k, e, tau, 4),
            want_stcf4,
            "t={}",
            e.t
        );
        history.push(e.clone());
    }
    println!("[PASS] 8/9 stcf(k=1) equals baf on 3x10000 events; both match the brute-force scan");
}

/// 9: the command-line evaluator consumes a labeled file and produces a
/// report whose AUC and curve are well formed, for both the network and a
/// baseline.
#[test]
fn a9_cli_eval_produces_auc_report() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.csv");
    let model = dir.path().join("model.snnf");
    let bin = env!("CARGO_BIN_EXE_evdenoise");

    let run = |args: &[&str]| {
        let out = std::process::Command::new(bin)
            .args(args)
            .output()
            .expect("spawn evdenoise");
        assert!(
            out.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8_lossy(&out.stdout).into_owned()
    };

    run(&[
        "synth",
        "--out",
        scene.to_str().unwrap(),
        "--width",
        "128",
        "--height",
        "96",
        "--duration-us",
        "2000000",
        "--edge-speed",
        "64",
        "--events-per-crossing",
        "8",
        "--shot-rate",
        "4",
        "--seed",
        "7",
    ]);
    run(&[
        "train",
        "--input",
        scene.to_str().unwrap(),
        "--model-out",
        model.to_str().unwrap(),
        "--epochs",
        "4",
        "--stride",
        "4",
    ]);

    let mut aucs = Vec::new();
    for (name, extra) in [
        ("snnf", vec!["--model", model.to_str().unwrap()]),
        ("stcf", vec!["--k", "4"]),
    ] {
        let out_dir = dir.path().join(format!("eval_{name}"));
        let mut args = vec![
            "eval",
            "--input",
            scene.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--filter",
            name,
        ];
        args.extend(extra);
        run(&args);

        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
                .unwrap();
        let auc = report["auc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auc), "{name} auc {auc}");
        assert_eq!(report["filter"], name);
        assert!(report["n_signal"].as_u64().unwrap() > 0);

        let roc = std::fs::read_to_string(out_dir.join("roc.csv")).unwrap();
        let lines: Vec<&str> = roc.lines().collect();
        assert_eq!(lines[0], "threshold,fpr,tpr");
        assert!(lines.len() > 3, "{name} curve has {} lines", lines.len());
        aucs.push((name, auc));
    }
    // The trained network should do well on its own training scene; this is
    // a smoke bound, not a benchmark claim.
    assert!(aucs[0].1 > 0.9, "network auc {}", aucs[0].1);

    // A swept curve and the trapezoid helper agree on the written points.
    let roc = std::fs::read_to_string(dir.path().join("eval_stcf/roc.csv")).unwrap();
    let pts: Vec<RocPoint> = roc
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            RocPoint {
                threshold: f[0].parse().unwrap(),
                fpr: f[1].parse().unwrap(),
                tpr: f[2].parse().unwrap(),
            }
        })
        .collect();
    let auc = trapezoid_auc(&pts);
    assert!((auc - aucs[1].1).abs() < 1e-9);

    println!(
        "[PASS] 9/9 cli eval reports: network auc {:.4}, stcf auc {:.4}",
        aucs[0].1, aucs[1].1
    );
}
