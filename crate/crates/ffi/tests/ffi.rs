use std::ffi::{CStr, CString};
use std::ptr;

use trajint_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(trajint_last_error()) }.to_string_lossy().into_owned()
}

fn ca(x: f64, y: f64, vx: f64, vy: f64) -> TrajintCaState {
    TrajintCaState { x, y, vx, vy, ax: 0.0, ay: 0.0 }
}

fn agent(id: u64, x: f64, y: f64, vx: f64, lane: i64, future: i64) -> TrajintAgent {
    TrajintAgent {
        id,
        x,
        y,
        heading: 0.0,
        vx,
        vy: 0.0,
        ax: 0.0,
        ay: 0.0,
        current_lane: lane,
        future_lane: future,
    }
}

const COEFF: TrajintCoefficients = TrajintCoefficients { horizon: 30.0, epsilon: 1.0, variant: TrajintVariant::Ab };

#[test]
fn closest_approach_head_on() {
    let (mut tau, mut clamped, mut dist) = (0.0, 0.0, 0.0);
    let st = unsafe {
        trajint_closest_approach(&ca(0.0, 0.0, 5.0, 0.0), &ca(20.0, 0.0, -5.0, 0.0), 30.0, &mut tau, &mut clamped, &mut dist)
    };
    assert_eq!(st, TrajintStatus::Ok);
    assert!((tau - 2.0).abs() < 1e-12);
    assert_eq!(clamped, tau);
    assert!(dist.abs() < 1e-9);
    assert_eq!(last_error(), "");
}

#[test]
fn null_pointers_are_reported() {
    let mut v = 0.0;
    let st = unsafe { trajint_closest_approach(ptr::null(), &ca(1.0, 0.0, 0.0, 0.0), 30.0, &mut v, &mut v, &mut v) };
    assert_eq!(st, TrajintStatus::NullPointer);
    assert!(last_error().contains("target"));
}

#[test]
fn closeness_and_degenerate() {
    let mut out = TrajintCloseness { tau: 0.0, tau_clamped: 0.0, current_distance: 0.0, closest_distance: 0.0, value: 0.0 };
    let st = unsafe { trajint_closeness(&ca(0.0, 0.0, 0.0, 0.0), &ca(10.0, 0.0, 1.0, 0.0), &COEFF, &mut out) };
    assert_eq!(st, TrajintStatus::Ok);
    assert!((out.value - 0.1).abs() < 1e-12);
    let st = unsafe { trajint_closeness(&ca(1.0, 1.0, 0.0, 0.0), &ca(1.0, 1.0, 1.0, 0.0), &COEFF, &mut out) };
    assert_eq!(st, TrajintStatus::Degenerate);
    assert!(!last_error().is_empty());
}

#[test]
fn select_same_lane_leader() {
    let agents = [
        agent(0, 0.0, 0.0, 10.0, 1, 1),
        agent(5, 12.0, 0.0, 10.0, 1, 1),
        agent(6, 8.0, 0.0, 10.0, 1, 1),
        agent(7, -5.0, 0.0, 10.0, TRAJINT_NO_LANE, TRAJINT_NO_LANE),
    ];
    let mut out = TrajintNeighbors::default();
    let st = unsafe { trajint_select_neighbors(agents.as_ptr(), agents.len(), 30.0, &mut out) };
    assert_eq!(st, TrajintStatus::Ok);
    assert_eq!(out.present, [true, false, false, false]);
    assert_eq!(out.ids[0], 6);

    let dup = [agent(0, 0.0, 0.0, 1.0, 1, 1), agent(0, 1.0, 0.0, 1.0, 1, 1)];
    let st = unsafe { trajint_select_neighbors(dup.as_ptr(), dup.len(), 30.0, &mut out) };
    assert_eq!(st, TrajintStatus::InvalidInput);
}

#[test]
fn lane_graph_handle() {
    let json = CString::new(r#"[{"lane_id":4,"width":3.5,"centerline":[[0,0],[100,0]]}]"#).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { trajint_lane_graph_from_json(json.as_ptr(), &mut g) }, TrajintStatus::Ok);
    let mut lane = 0;
    assert_eq!(unsafe { trajint_lane_graph_map_point(g, 50.0, 1.0, &mut lane) }, TrajintStatus::Ok);
    assert_eq!(lane, 4);
    assert_eq!(unsafe { trajint_lane_graph_map_point(g, 50.0, 30.0, &mut lane) }, TrajintStatus::Ok);
    assert_eq!(lane, TRAJINT_NO_LANE);
    unsafe { trajint_lane_graph_free(g) };

    let bad = CString::new("{not json").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { trajint_lane_graph_from_json(bad.as_ptr(), &mut g) }, TrajintStatus::Parse);
    assert!(g.is_null());
}

#[test]
fn scene_attention_and_encoding() {
    let mut scene = ptr::null_mut();
    assert_eq!(unsafe { trajint_scene_new(0.1, &mut scene) }, TrajintStatus::Ok);
    for t in 0..3 {
        let dx = t as f64;
        let agents = [agent(0, dx, 0.0, 10.0, 1, 1), agent(1, 15.0 + dx, 0.0, 8.0, 1, 1)];
        let st = unsafe { trajint_scene_push_frame(scene, t as i64 - 2, agents.as_ptr(), agents.len()) };
        assert_eq!(st, TrajintStatus::Ok);
    }
    assert_eq!(unsafe { trajint_scene_len(scene) }, 3);

    // Target missing from frame 0 position.
    let bad = [agent(3, 0.0, 0.0, 1.0, 1, 1)];
    assert_eq!(
        unsafe { trajint_scene_push_frame(scene, 1, bad.as_ptr(), bad.len()) },
        TrajintStatus::InvalidInput
    );
    assert_eq!(unsafe { trajint_scene_len(scene) }, 3);

    let mut alpha = [0.0; 12];
    let st = unsafe { trajint_scene_attention(scene, 30.0, TrajintSelectionMode::All, &COEFF, alpha.as_mut_ptr(), 12) };
    assert_eq!(st, TrajintStatus::Ok);
    assert_eq!(&alpha[0..3], &[1.0, 1.0, 1.0]);
    assert!(alpha[3..].iter().all(|v| *v == 0.0));

    let mut small = [0.0; 4];
    let st = unsafe { trajint_scene_attention(scene, 30.0, TrajintSelectionMode::All, &COEFF, small.as_mut_ptr(), 4) };
    assert_eq!(st, TrajintStatus::BufferTooSmall);

    let mut enc = ptr::null_mut();
    assert_eq!(unsafe { trajint_encoder_seeded(3, &mut enc) }, TrajintStatus::Ok);
    let dim = unsafe { trajint_encoder_model_dim(enc) };
    assert_eq!(dim, 256);
    let mut emb = vec![f64::NAN; 3 * dim];
    let st = unsafe {
        trajint_scene_encode(scene, enc, 30.0, TrajintSelectionMode::Current, &COEFF, emb.as_mut_ptr(), emb.len())
    };
    assert_eq!(st, TrajintStatus::Ok);
    assert!(emb.iter().all(|v| v.is_finite()));

    unsafe {
        trajint_encoder_free(enc);
        trajint_scene_free(scene);
        trajint_scene_free(ptr::null_mut());
    }
}

#[test]
fn scene_lane_annotation() {
    let json = CString::new(
        r#"[{"lane_id":1,"width":3.5,"centerline":[[-100,0],[300,0]]},{"lane_id":2,"width":3.5,"centerline":[[-100,3.5],[300,3.5]]}]"#,
    )
    .unwrap();
    let mut g = ptr::null_mut();
    let mut scene = ptr::null_mut();
    unsafe {
        assert_eq!(trajint_lane_graph_from_json(json.as_ptr(), &mut g), TrajintStatus::Ok);
        assert_eq!(trajint_scene_new(0.1, &mut scene), TrajintStatus::Ok);
        let mut a = [agent(0, 0.0, 0.0, 10.0, TRAJINT_NO_LANE, TRAJINT_NO_LANE), agent(1, 10.0, 0.0, 10.0, 7, 7)];
        a[0].vy = 1.0;
        assert_eq!(trajint_scene_push_frame(scene, 0, a.as_ptr(), a.len()), TrajintStatus::Ok);
        assert_eq!(trajint_scene_annotate_lanes(scene, g, 30), TrajintStatus::Ok);
        let mut alpha = [0.0; 4];
        assert_eq!(
            trajint_scene_attention(scene, 30.0, TrajintSelectionMode::All, &COEFF, alpha.as_mut_ptr(), 4),
            TrajintStatus::Ok
        );
        // The target drifts into lane 2, so agent 1 is only a same-lane leader.
        assert_eq!(alpha, [1.0, 0.0, 0.0, 0.0]);
        trajint_scene_free(scene);
        trajint_lane_graph_free(g);
    }
}

#[test]
fn metrics_and_rmse() {
    let gt = [1.0, 0.0, 2.0, 0.0];
    let pred = [1.0, 1.0, 2.0, 1.0, 1.0, 0.0, 2.0, 0.5];
    let mut m = TrajintMetrics::default();
    assert_eq!(unsafe { trajint_metrics(pred.as_ptr(), gt.as_ptr(), 2, 2, &mut m) }, TrajintStatus::Ok);
    assert!((m.min_ade - 0.25).abs() < 1e-12);
    assert!((m.min_fde - 0.5).abs() < 1e-12);

    let mut r = 0.0;
    assert_eq!(unsafe { trajint_rmse(pred.as_ptr(), gt.as_ptr(), 1, 2, &mut r) }, TrajintStatus::Ok);
    assert!((r - 1.0).abs() < 1e-12);
    assert_eq!(unsafe { trajint_rmse(pred.as_ptr(), gt.as_ptr(), 1, 0, &mut r) }, TrajintStatus::InvalidInput);
}
