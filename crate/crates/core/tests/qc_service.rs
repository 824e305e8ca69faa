use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use image::Rgb;
use tower::ServiceExt;

use vivid_forge_core::geometry::AugmentationKind;
use vivid_forge_core::model::{
    save_frames, save_masks, write_manifest, CaptionLength, Fps, Frame, FrameSequence, Mask,
    MaskSequence, Propagation, SampleRecord, Task,
};
use vivid_forge_core::qc::{qc_router, QcService, QcState, QualityStats, SamplePayload};

fn write_sample(root: &Path, id: &str, frames: usize) -> SampleRecord {
    let seq = FrameSequence::new(
        vec![Frame::from_pixel(8, 6, Rgb([10, 20, 30])); frames],
        Fps::integer(5).unwrap(),
        id,
    )
    .unwrap();
    save_frames(&root.join("src").join(id), &seq).unwrap();
    let masks = MaskSequence::new(vec![Mask::from_fn(8, 6, |x, _| x < 3); frames]).unwrap();
    save_masks(&root.join("masks").join(id), &masks).unwrap();
    SampleRecord {
        id: id.into(),
        task: Task::AdditionModification,
        frames_ref: format!("src/{id}").into(),
        masks_ref: format!("masks/{id}").into(),
        masked_ref: None,
        caption: "The video shows a dog.".into(),
        caption_length_class: CaptionLength::Short,
        augmentation: AugmentationKind::None,
        propagation: Propagation::Tracked,
        entity_label: Some("dog".into()),
        fps: Fps::integer(5).unwrap(),
        resolution: (8, 6),
        provenance: BTreeMap::new(),
        kive: false,
    }
}

struct Fixture {
    _dir: tempfile::TempDir,
    router: axum::Router,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let records = vec![
        write_sample(dir.path(), "v1", 3),
        write_sample(dir.path(), "img", 1),
        write_sample(dir.path(), "v2", 3),
    ];
    let manifest = write_manifest(dir.path().join("manifest.jsonl"), &records).unwrap();
    let state = QcState::open(&manifest, &dir.path().join("verdicts.jsonl")).unwrap();
    let router = qc_router(Arc::new(QcService::new(state)), None);
    Fixture { _dir: dir, router }
}

async fn send(router: &axum::Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(body: serde_json::Value) -> Request<Body> {
    Request::post("/api/verdict")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn review_loop_over_http() {
    let f = fixture();
    let r = &f.router;

    let (status, body) = send(r, get("/api/queue/next?reviewer=ann")).await;
    assert_eq!(status, StatusCode::OK);
    let p: SamplePayload = serde_json::from_slice(&body).unwrap();
    assert_eq!(p.id, "v1");
    assert!(p.mp_applicable);
    assert_eq!(p.frame_urls.len(), 3);

    let (status, png) = send(r, get(&p.mask_urls[2])).await;
    assert_eq!(status, StatusCode::OK);
    assert!(png.starts_with(b"\x89PNG"));
    for bad in ["/media/v1/masks/3", "/media/v1/../../etc/passwd", "/media/nope/frames/0", "/media/v1/secret/0"] {
        assert_eq!(send(r, get(bad)).await.0, StatusCode::NOT_FOUND, "{bad}");
    }

    let ok = serde_json::json!({"sample_id":"v1","reviewer_id":"ann","mg":true,"mp":true,"ta":true});
    assert_eq!(send(r, post(ok.clone())).await.0, StatusCode::OK);
    assert_eq!(send(r, post(ok)).await.0, StatusCode::CONFLICT);
    let mp_on_image = serde_json::json!({"sample_id":"img","reviewer_id":"ann","mg":true,"mp":true,"ta":true});
    assert_eq!(send(r, post(mp_on_image)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let missing_mp = serde_json::json!({"sample_id":"v2","reviewer_id":"ann","mg":true,"ta":true});
    assert_eq!(send(r, post(missing_mp)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let unknown = serde_json::json!({"sample_id":"zz","reviewer_id":"ann","mg":true,"ta":true});
    assert_eq!(send(r, post(unknown)).await.0, StatusCode::NOT_FOUND);

    let (_, body) = send(r, get("/api/queue/next?reviewer=ann")).await;
    let p: SamplePayload = serde_json::from_slice(&body).unwrap();
    assert_eq!(p.id, "img");
    assert!(!p.mp_applicable);
    // A second reviewer starts from the head of the queue.
    let (_, body) = send(r, get("/api/queue/next?reviewer=bob")).await;
    assert_eq!(serde_json::from_slice::<SamplePayload>(&body).unwrap().id, "v1");

    let img = serde_json::json!({"sample_id":"img","reviewer_id":"ann","mg":true,"ta":false});
    let v2 = serde_json::json!({"sample_id":"v2","reviewer_id":"ann","mg":true,"mp":false,"ta":true});
    assert_eq!(send(r, post(img)).await.0, StatusCode::OK);
    assert_eq!(send(r, post(v2)).await.0, StatusCode::OK);
    assert_eq!(send(r, get("/api/queue/next?reviewer=ann")).await.0, StatusCode::NO_CONTENT);

    let (status, body) = send(r, get("/api/stats")).await;
    assert_eq!(status, StatusCode::OK);
    let s: QualityStats = serde_json::from_slice(&body).unwrap();
    assert_eq!(s.n_reviewed, 3);
    assert_eq!(s.mg_rate, Some(1.0));
    assert_eq!(s.mp_rate, Some(0.5));
    assert_eq!(s.hq_rate, Some(1.0 / 3.0));

    assert_eq!(send(r, get("/api/sample/img")).await.0, StatusCode::OK);
    assert_eq!(send(r, get("/api/sample/none")).await.0, StatusCode::NOT_FOUND);
}

#[test]
fn restart_replays_to_identical_stats() {
    let dir = tempfile::tempdir().unwrap();
    let records = vec![write_sample(dir.path(), "a", 2), write_sample(dir.path(), "b", 1)];
    let manifest = write_manifest(dir.path().join("manifest.jsonl"), &records).unwrap();
    let log = dir.path().join("verdicts.jsonl");
    let before = {
        let mut st = QcState::open(&manifest, &log).unwrap();
        for (s, rv, mp) in [("a", "x", Some(true)), ("a", "y", Some(false)), ("b", "x", None)] {
            st.submit(vivid_forge_core::qc::VerdictRecord {
                sample_id: s.into(),
                reviewer_id: rv.into(),
                mg: true,
                mp,
                ta: true,
                timestamp: None,
            })
            .unwrap();
        }
        st.stats()
    };
    assert_eq!(QcState::open(&manifest, &log).unwrap().stats(), before);
}
