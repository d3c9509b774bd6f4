mod common;

use arms_core::harms::{quantize_flow_event, Quantizer};
use arms_core::params::WindowEdges;
use arms_core::*;
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn params(batch: usize) -> ArmsParams {
    ArmsParams {
        w_max: 24,
        num_windows: 4,
        tau: 3000,
        buffer_len: 120,
        batch,
    }
}

/// Checks the quantization contract of one hARMS result against the
/// buffer-pooling oracle for the same event.
fn check_quantized(h: &TrueFlowResult, m: &WindowMeans) -> Result<(), String> {
    let f = m.best();
    if h.window == f {
        let d = (h.vx - m.vx[f]).abs().max((h.vy - m.vy[f]).abs());
        if d > 1.0 {
            return Err(format!("component difference {d} with matching window {f}"));
        }
    } else if (m.mag[f] - m.mag[h.window]).abs() > 1.0 {
        return Err(format!(
            "window {} chosen over {f} although means differ by {}",
            h.window,
            m.mag[f] - m.mag[h.window]
        ));
    }
    Ok(())
}

#[test]
fn p1_within_quantization_bound_of_buffer_pooling() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let events = dense_stream(&mut r, 40, 400, 400.0);
        let p = params(1);
        let oracle = buffer_oracle(&events, &p);
        let out = HarmsEngine::new(p).unwrap().run(&events).unwrap();
        for (h, m) in out.iter().zip(&oracle) {
            check_quantized(&h.to_true_flow(), m).unwrap();
        }
    }
}

#[test]
fn integer_flows_are_bitwise_identical_to_farms() {
    // counts of 1, 2 and 4 divide every sum exactly in Q24.8
    let p = ArmsParams {
        w_max: 8,
        num_windows: 2,
        tau: 100,
        buffer_len: 4,
        batch: 1,
    };
    let flows = [(6.0, 8.0), (-3.0, 4.0), (12.0, 5.0), (0.0, -2.0)];
    let mut events = Vec::new();
    for (i, &(vx, vy)) in flows.iter().cycle().take(24).enumerate() {
        events.push(LocalFlowEvent::new(10 + (i % 2) as u16, 10, i as i64 * 1000, vx, vy).unwrap());
    }
    let mut farms = FarmsEngine::new(p).unwrap();
    let expect: Vec<TrueFlowResult> = events.iter().map(|e| farms.process(e)).collect();
    let got: Vec<TrueFlowResult> = HarmsEngine::new(p)
        .unwrap()
        .run(&events)
        .unwrap()
        .into_iter()
        .map(|r| r.to_true_flow())
        .collect();
    assert_eq!(got, expect);
}

#[test]
fn batch_members_share_one_snapshot() {
    let p = params(8);
    let edges = WindowEdges::new(&p).unwrap();
    let mut r = rng(11);
    let history = dense_stream(&mut r, 30, 100, 80.0);
    let batch = dense_stream(&mut r, 30, 8, 80.0);
    let q = |e: &LocalFlowEvent| quantize_flow_event(e).0;

    let run = |order: &[usize]| {
        let mut rfb = RecentFlowBuffer::new(p.buffer_len).unwrap();
        history.iter().for_each(|e| rfb.insert(q(e)));
        let mut eab = EventAccumulationBuffer::new(p.batch).unwrap();
        for &i in order {
            eab.push(q(&batch[i]));
        }
        harms_process_batch(&mut rfb, &mut eab, &p, &edges).unwrap()
    };
    let identity: Vec<usize> = (0..8).collect();
    let base = run(&identity);
    let mut perm = identity.clone();
    perm.shuffle(&mut r);
    let shuffled = run(&perm);
    for (k, &i) in perm.iter().enumerate() {
        assert_eq!(shuffled[k], base[i]);
    }
}

#[test]
fn early_batch_members_see_later_peers() {
    let p = ArmsParams {
        batch: 2,
        ..params(2)
    };
    let a = LocalFlowEvent::new(10, 10, 0, 10.0, 0.0).unwrap();
    let b = LocalFlowEvent::new(11, 10, 100, 30.0, 0.0).unwrap();
    let batched = HarmsEngine::new(p).unwrap().run(&[a, b]).unwrap();
    let single = HarmsEngine::new(ArmsParams { batch: 1, ..p })
        .unwrap()
        .run(&[a, b])
        .unwrap();
    assert_eq!(batched[0].vx.to_real(), 20.0);
    assert_eq!(single[0].vx.to_real(), 10.0);
    assert_eq!(batched[1], single[1]);
}

#[test]
fn worker_count_and_reruns_are_deterministic() {
    let mut r = rng(5);
    let events = dense_stream(&mut r, 50, 600, 200.0);
    let p = params(16);
    let one = HarmsEngine::new(p).unwrap().run(&events).unwrap();
    for workers in [1, 2, 4] {
        let again = HarmsEngine::new(p)
            .unwrap()
            .with_workers(workers)
            .run(&events)
            .unwrap();
        assert_eq!(again, one);
    }
}

#[test]
fn saturation_is_counted() {
    let mut q = Quantizer::default();
    let e = LocalFlowEvent::new(0, 0, 0, 40_000.0, 1.0).unwrap();
    let out = q.quantize(&e);
    assert_eq!(out.vx_q, i16::MAX);
    assert!(q.saturations() >= 1);
    let mut engine = HarmsEngine::new(params(1)).unwrap();
    engine.run(&[e]).unwrap();
    assert_eq!(engine.saturations(), q.saturations());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quantization_bound_holds_for_any_batch(seed in any::<u64>(), batch in 1usize..6) {
        let mut r = rng(seed);
        let len = r.random_range(1..150);
        let events = dense_stream(&mut r, 25, len, 1000.0);
        let p = params(batch);
        let out = HarmsEngine::new(p).unwrap().run(&events).unwrap();
        prop_assert_eq!(out.len(), events.len());
        if batch == 1 {
            let oracle = buffer_oracle(&events, &p);
            for (h, m) in out.iter().zip(&oracle) {
                if let Err(msg) = check_quantized(&h.to_true_flow(), m) {
                    return Err(TestCaseError::fail(msg));
                }
            }
        }
    }

    #[test]
    fn fixed_point_round_trip(v in -8_000_000.0f64..8_000_000.0) {
        let q = FixedQ24_8::from_real(v);
        prop_assert!((q.to_real() - v).abs() <= 1.0 / 512.0);
    }

    #[test]
    fn quantized_fields_round_to_nearest(vx in -33_000.0f64..33_000.0, vy in -33_000.0f64..33_000.0) {
        prop_assume!(vx != 0.0 || vy != 0.0);
        let e = LocalFlowEvent::new(1, 1, 0, vx, vy).unwrap();
        let (q, sat) = quantize_flow_event(&e);
        let expect = |v: f64| v.round_ties_even().clamp(-32768.0, 32767.0);
        prop_assert_eq!(f64::from(q.vx_q), expect(vx));
        prop_assert_eq!(f64::from(q.vy_q), expect(vy));
        prop_assert_eq!(f64::from(q.mag_q), expect(e.mag));
        let clipped = [vx, vy, e.mag].iter().map(|v| v.round_ties_even())
            .filter(|r| *r > 32767.0 || *r < -32768.0).count() as u32;
        prop_assert_eq!(sat, clipped);
    }
}
