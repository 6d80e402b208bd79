use chrono::NaiveDateTime;

use super::*;
use crate::lifecycle::{ComponentEdit, FixedClock, SnapshotOverrides, VirtualClock};
use crate::model::{Annotation, AnnotationKind, AnnotationTarget, Curation, Duration, RecurrenceRule};
use crate::spec_io::parse_dashboard;

const DASHBOARD: &str = include_str!("../../../../samples/dashboard.yaml");
const SAMPLES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../samples");

fn at(s: &str) -> NaiveDateTime {
    s.parse().unwrap()
}

fn workspace() -> Workspace {
    let mut ws = Workspace::from_store(Store::default(), PathBuf::from(SAMPLES));
    ws.add_source(
        "sales",
        SourceRef {
            path: "sales.csv".into(),
            schema: None,
        },
    );
    ws.add_dashboard(parse_dashboard(DASHBOARD).unwrap());
    ws.add_channel("sales", "#sales", vec!["analyst".into(), "ana".into()]).unwrap();
    ws
}

fn draft(ws: &Workspace, policy: UpdatePolicy) -> SnapshotDraft {
    let opts = ComponentOptions {
        annotations: vec![Annotation {
            kind: AnnotationKind::Highlight,
            target: AnnotationTarget::Category("Technology".into()),
            text: Some("promo".into()),
        }],
        ..ComponentOptions::default()
    };
    let c = ws.create_component("superstore-sales", "sales-by-category", opts).unwrap();
    SnapshotDraft {
        id: "weekly".into(),
        title: "Sales".into(),
        author: "analyst".into(),
        components: vec![c],
        curation: Curation::Stack,
        policy,
        overrides: SnapshotOverrides::default(),
    }
}

fn monthly() -> UpdatePolicy {
    UpdatePolicy::AutoRecur(RecurrenceRule {
        period: Duration::months(1),
        until: "2022-12-31".parse().unwrap(),
        publish_time: "09:00:00".parse().unwrap(),
    })
}

#[test]
fn panels_and_templates() {
    let ws = workspace();
    assert_eq!(ws.panels().len(), 3);
    let ids: Vec<String> = ws
        .applicable_templates("superstore-sales", "sales-by-category")
        .unwrap()
        .into_iter()
        .map(|a| a.template.to_string())
        .collect();
    assert!(ids.contains(&"breakdown-with-goal".to_string()));
    assert!(!ids.contains(&"time-series-with-threshold".to_string()));
    let e = ws.applicable_templates("superstore-sales", "nope").unwrap_err();
    assert_eq!(e.class(), ErrorClass::NotFound);
}

#[test]
fn auto_update_replies_in_thread() {
    let mut ws = workspace();
    let clock = VirtualClock::new(at("2022-04-02T09:00:00"));
    ws.compose(draft(&ws, monthly()), &clock).unwrap();
    let root = ws.publish("weekly", "sales", None, "analyst", &clock).unwrap();
    assert!(ws.tick(&clock).posted.is_empty());

    clock.set(at("2022-05-02T09:00:00"));
    let out = ws.tick(&clock);
    assert_eq!(out.posted.len(), 1);
    let reply = ws.store.platform.message(out.posted[0]).unwrap();
    assert_eq!(reply.thread_root, Some(root));
    assert_eq!(ws.store.platform.message(root).unwrap().superseded_by, Some(reply.id));
    let v2 = ws.snapshot("weekly", None).unwrap();
    assert_eq!(v2.version, 2);
    assert!(v2.components[0].annotations.is_empty());
    assert!(ws.tick(&clock).posted.is_empty());
}

#[test]
fn manual_update_keeps_schedule() {
    let mut ws = workspace();
    let clock = VirtualClock::new(at("2022-04-02T09:00:00"));
    ws.compose(draft(&ws, monthly()), &clock).unwrap();
    ws.publish("weekly", "sales", None, "analyst", &clock).unwrap();
    clock.set(at("2022-04-10T12:00:00"));
    let mut edits = ManualEdits::default();
    edits.components.insert(
        "sales-by-category".into(),
        ComponentEdit {
            caption: Some("Mid-month check".into()),
            ..ComponentEdit::default()
        },
    );
    let (v, posted) = ws.update_manual("weekly", edits, "analyst", &clock).unwrap();
    assert_eq!((v, posted.len()), (2, 1));
    let due = ws.store.snapshots.get("weekly").unwrap().next_due().unwrap();
    assert_eq!(due, at("2022-05-02T09:00:00"));
}

#[test]
fn viewer_refresh_needs_viewer_policy() {
    let mut ws = workspace();
    let clock = FixedClock(at("2022-04-02T09:00:00"));
    ws.compose(draft(&ws, monthly()), &clock).unwrap();
    let root = ws.publish("weekly", "sales", None, "analyst", &clock).unwrap();
    let e = ws.refresh_for_viewer(root, "ana", &clock).unwrap_err();
    assert_eq!(e.class(), ErrorClass::Conflict);

    let mut ws = workspace();
    ws.compose(draft(&ws, UpdatePolicy::ManualViewer), &clock).unwrap();
    let root = ws.publish("weekly", "sales", None, "analyst", &clock).unwrap();
    let id = ws.refresh_for_viewer(root, "ana", &clock).unwrap();
    let view = ws.view(id, "ana", &clock).unwrap();
    assert_eq!(view.message.author, "ana");
    assert_eq!(ws.store.snapshots.get("weekly").unwrap().renders.len(), 2);
}

#[test]
fn store_round_trip_preserves_everything() {
    let dir = tempfile::tempdir().unwrap();
    let mut ws = workspace();
    let clock = FixedClock(at("2022-04-02T09:00:00"));
    ws.compose(draft(&ws, monthly()), &clock).unwrap();
    let root = ws.publish("weekly", "sales", None, "analyst", &clock).unwrap();
    ws.apply_filter(
        root,
        "sales-by-category",
        "ana",
        FilterRequest::Clear { key: None },
    )
    .unwrap();
    let path = dir.path().join("store.json");
    ws.save(&path).unwrap();
    let loaded = Workspace::open(&path).unwrap();
    assert_eq!(loaded.store.snapshots, ws.store.snapshots);
    assert_eq!(loaded.store.platform, ws.store.platform);
    assert_eq!(loaded.store.dashboards, ws.store.dashboards);
    // Saved away from the samples directory, so the source path was made absolute.
    let sales = &loaded.store.sources["sales"].path;
    assert!(sales.is_absolute() && sales.ends_with("samples/sales.csv"), "{sales:?}");
    assert!(loaded.registry.resolve("sales").is_ok());
    assert!(matches!(
        ws.compose(draft(&ws, monthly()), &clock),
        Err(WorkspaceError::Conflict(_))
    ));
}

#[test]
fn saving_beside_the_sources_keeps_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(format!("{SAMPLES}/sales.csv"), dir.path().join("sales.csv")).unwrap();
    let mut ws = Workspace::from_store(Store::default(), dir.path().to_path_buf());
    ws.add_source(
        "sales",
        SourceRef {
            path: "sales.csv".into(),
            schema: None,
        },
    );
    let path = dir.path().join("store.json");
    ws.save(&path).unwrap();
    let loaded = Workspace::open(&path).unwrap();
    assert_eq!(loaded.store.sources["sales"].path, PathBuf::from("sales.csv"));
}
