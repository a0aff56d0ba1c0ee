//! Canonical data model and file-backed store for prompts, images and
//! engagement events.
//!
//! A [`FeedbackStore`] is an immutable, validated snapshot of the three JSONL
//! logs (`prompts.jsonl`, `images.jsonl`, `events.jsonl`). Construction
//! verifies referential integrity and clock ordering, and precomputes the
//! per-image counts the curation pipeline works from. Filters return new
//! stores.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};

/// One text prompt that generated images.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub prompt_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

/// One generated image and where its pixels live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub prompt_id: String,
    pub created_at_ms: i64,
    pub uri: String,
    #[serde(default)]
    pub nsfw: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    View,
    Remix,
}

/// One view or remix of an image by a user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngagementEvent {
    pub event_id: String,
    pub image_id: String,
    pub user_id: String,
    pub kind: EventKind,
    pub occurred_at_ms: i64,
}

/// The set of influencer users carrying the creator signal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluencerRoster {
    pub user_ids: BTreeSet<String>,
}

impl InfluencerRoster {
    pub fn from_ids<I: IntoIterator<Item = S>, S: Into<String>>(ids: I) -> Self {
        Self {
            user_ids: ids.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, user_id: &str) -> bool {
        self.user_ids.contains(user_id)
    }
}

/// How repeated remixes of one image by the same user are tallied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RemixCounting {
    /// Every remix event counts.
    #[default]
    EveryEvent,
    /// At most one remix per (image, user) pair counts.
    DistinctUsers,
}

/// Derived per-image engagement counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageStats {
    pub view_count: u64,
    pub remix_count: u64,
    /// Views that occurred strictly before the first remix, with ties on the
    /// timestamp broken by event id. Equals `view_count` for images that were
    /// never remixed.
    pub views_before_first_remix: u64,
    pub first_remix_at_ms: Option<i64>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}:{line}: {reason}")]
    MalformedRecord {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("duplicate {what} {id:?}")]
    Duplicate { what: &'static str, id: String },
    #[error("{what} {id:?} references missing {missing_what} {missing_id:?}")]
    DanglingReference {
        what: &'static str,
        id: String,
        missing_what: &'static str,
        missing_id: String,
    },
    #[error(
        "event {event_id:?} at {occurred_at_ms} precedes creation of image \
         {image_id:?} at {created_at_ms}"
    )]
    ClockViolation {
        event_id: String,
        image_id: String,
        occurred_at_ms: i64,
        created_at_ms: i64,
    },
    #[error("nsfw predicate failed on image {image_id:?}: {reason}")]
    PredicateFailure { image_id: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<JsonlError> for StoreError {
    fn from(err: JsonlError) -> Self {
        match err {
            JsonlError::Io { path, source } => StoreError::MalformedRecord {
                path,
                line: 0,
                reason: source.to_string(),
            },
            JsonlError::Malformed { path, line, reason } => {
                StoreError::MalformedRecord { path, line, reason }
            }
        }
    }
}

/// Immutable, indexed snapshot of an engagement log.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackStore {
    prompts: BTreeMap<String, PromptRecord>,
    images: BTreeMap<String, ImageRecord>,
    /// Sorted by (occurred_at_ms, event_id); this is the canonical order all
    /// derived counts are defined over, so input permutations are immaterial.
    events: Vec<EngagementEvent>,
    images_by_prompt: BTreeMap<String, Vec<String>>,
    stats: BTreeMap<String, ImageStats>,
    remix_counting: RemixCounting,
}

impl FeedbackStore {
    /// Build a validated store from in-memory records.
    pub fn from_records(
        prompts: Vec<PromptRecord>,
        images: Vec<ImageRecord>,
        events: Vec<EngagementEvent>,
        remix_counting: RemixCounting,
    ) -> Result<Self, StoreError> {
        let mut prompt_map = BTreeMap::new();
        for p in prompts {
            if p.text.trim().is_empty() {
                return Err(StoreError::MalformedRecord {
                    path: "<memory>".into(),
                    line: 0,
                    reason: format!("prompt {:?} has empty text", p.prompt_id),
                });
            }
            let id = p.prompt_id.clone();
            if prompt_map.insert(id.clone(), p).is_some() {
                return Err(StoreError::Duplicate {
                    what: "prompt_id",
                    id,
                });
            }
        }
        let mut image_map = BTreeMap::new();
        for img in images {
            if !prompt_map.contains_key(&img.prompt_id) {
                return Err(StoreError::DanglingReference {
                    what: "image",
                    id: img.image_id,
                    missing_what: "prompt",
                    missing_id: img.prompt_id,
                });
            }
            let id = img.image_id.clone();
            if image_map.insert(id.clone(), img).is_some() {
                return Err(StoreError::Duplicate {
                    what: "image_id",
                    id,
                });
            }
        }
        let mut seen_events = BTreeSet::new();
        for ev in &events {
            if !seen_events.insert(ev.event_id.clone()) {
                return Err(StoreError::Duplicate {
                    what: "event_id",
                    id: ev.event_id.clone(),
                });
            }
            let image = image_map.get(&ev.image_id).ok_or_else(|| {
                StoreError::DanglingReference {
                    what: "event",
                    id: ev.event_id.clone(),
                    missing_what: "image",
                    missing_id: ev.image_id.clone(),
                }
            })?;
            if ev.occurred_at_ms < image.created_at_ms {
                return Err(StoreError::ClockViolation {
                    event_id: ev.event_id.clone(),
                    image_id: ev.image_id.clone(),
                    occurred_at_ms: ev.occurred_at_ms,
                    created_at_ms: image.created_at_ms,
                });
            }
        }
        Ok(Self::index(prompt_map, image_map, events, remix_counting))
    }

    fn index(
        prompts: BTreeMap<String, PromptRecord>,
        images: BTreeMap<String, ImageRecord>,
        mut events: Vec<EngagementEvent>,
        remix_counting: RemixCounting,
    ) -> Self {
        events.sort_by(|a, b| {
            (a.occurred_at_ms, &a.event_id).cmp(&(b.occurred_at_ms, &b.event_id))
        });
        let mut images_by_prompt: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for img in images.values() {
            images_by_prompt
                .entry(img.prompt_id.clone())
                .or_default()
                .push(img.image_id.clone());
        }
        for ids in images_by_prompt.values_mut() {
            ids.sort();
        }
        let mut stats: BTreeMap<String, ImageStats> = images
            .keys()
            .map(|id| {
                (
                    id.clone(),
                    ImageStats {
                        view_count: 0,
                        remix_count: 0,
                        views_before_first_remix: 0,
                        first_remix_at_ms: None,
                    },
                )
            })
            .collect();
        let mut remixers: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        // Events are in canonical order, so the first remix seen per image is
        // THE first remix, and views tallied before it are exactly the views
        // preceding it under the tie-break rule.
        for ev in &events {
            let s = stats.get_mut(&ev.image_id).expect("validated reference");
            match ev.kind {
                EventKind::View => {
                    s.view_count += 1;
                    if s.first_remix_at_ms.is_none() {
                        s.views_before_first_remix += 1;
                    }
                }
                EventKind::Remix => {
                    let counted = match remix_counting {
                        RemixCounting::EveryEvent => true,
                        RemixCounting::DistinctUsers => remixers
                            .entry(ev.image_id.clone())
                            .or_default()
                            .insert(ev.user_id.clone()),
                    };
                    if counted {
                        s.remix_count += 1;
                    }
                    if s.first_remix_at_ms.is_none() {
                        s.first_remix_at_ms = Some(ev.occurred_at_ms);
                    }
                }
            }
        }
        Self {
            prompts,
            images,
            events,
            images_by_prompt,
            stats,
            remix_counting,
        }
    }

    /// Load and validate the three JSONL logs.
    pub fn load_log(
        events_path: &Path,
        images_path: &Path,
        prompts_path: &Path,
    ) -> Result<Self, StoreError> {
        Self::load_log_with(events_path, images_path, prompts_path, RemixCounting::default())
    }

    pub fn load_log_with(
        events_path: &Path,
        images_path: &Path,
        prompts_path: &Path,
        remix_counting: RemixCounting,
    ) -> Result<Self, StoreError> {
        let prompt_rows: Vec<(usize, PromptRecord)> = jsonl::read_jsonl(prompts_path)?;
        let image_rows: Vec<(usize, ImageRecord)> = jsonl::read_jsonl(images_path)?;
        let event_rows: Vec<(usize, EngagementEvent)> = jsonl::read_jsonl(events_path)?;

        let mut prompts = BTreeMap::new();
        for (line, p) in prompt_rows {
            if p.text.trim().is_empty() {
                return Err(StoreError::MalformedRecord {
                    path: prompts_path.display().to_string(),
                    line,
                    reason: format!("prompt {:?} has empty text", p.prompt_id),
                });
            }
            if prompts.insert(p.prompt_id.clone(), p.clone()).is_some() {
                return Err(StoreError::MalformedRecord {
                    path: prompts_path.display().to_string(),
                    line,
                    reason: format!("duplicate prompt_id {:?}", p.prompt_id),
                });
            }
        }
        let mut images = BTreeMap::new();
        for (line, img) in image_rows {
            if !prompts.contains_key(&img.prompt_id) {
                return Err(StoreError::DanglingReference {
                    what: "image",
                    id: img.image_id,
                    missing_what: "prompt",
                    missing_id: img.prompt_id,
                });
            }
            if images.insert(img.image_id.clone(), img.clone()).is_some() {
                return Err(StoreError::MalformedRecord {
                    path: images_path.display().to_string(),
                    line,
                    reason: format!("duplicate image_id {:?}", img.image_id),
                });
            }
        }
        let mut events = Vec::with_capacity(event_rows.len());
        let mut seen = BTreeSet::new();
        for (line, ev) in event_rows {
            if !seen.insert(ev.event_id.clone()) {
                return Err(StoreError::MalformedRecord {
                    path: events_path.display().to_string(),
                    line,
                    reason: format!("duplicate event_id {:?}", ev.event_id),
                });
            }
            let image = images
                .get(&ev.image_id)
                .ok_or_else(|| StoreError::DanglingReference {
                    what: "event",
                    id: ev.event_id.clone(),
                    missing_what: "image",
                    missing_id: ev.image_id.clone(),
                })?;
            if ev.occurred_at_ms < image.created_at_ms {
                return Err(StoreError::ClockViolation {
                    event_id: ev.event_id.clone(),
                    image_id: ev.image_id.clone(),
                    occurred_at_ms: ev.occurred_at_ms,
                    created_at_ms: image.created_at_ms,
                });
            }
            events.push(ev);
        }
        Ok(Self::index(prompts, images, events, remix_counting))
    }

    /// Write the store back out as the three canonical JSONL files
    /// (`prompts.jsonl`, `images.jsonl`, `events.jsonl`) inside `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        std::fs::create_dir_all(dir)?;
        let prompts: Vec<&PromptRecord> = self.prompts.values().collect();
        let images: Vec<&ImageRecord> = self.images.values().collect();
        let events: Vec<&EngagementEvent> = self.events.iter().collect();
        jsonl::write_jsonl(&dir.join("prompts.jsonl"), &prompts)?;
        jsonl::write_jsonl(&dir.join("images.jsonl"), &images)?;
        jsonl::write_jsonl(&dir.join("events.jsonl"), &events)?;
        Ok(())
    }

    /// Remove images flagged by `predicate` (and their events); prompts left
    /// with no images are dropped. Predicate failures abort the filter.
    pub fn filter_nsfw<F>(&self, predicate: F) -> Result<FeedbackStore, StoreError>
    where
        F: Fn(&ImageRecord) -> Result<bool, String>,
    {
        let mut kept_images = BTreeMap::new();
        for (id, img) in &self.images {
            let flagged = predicate(img).map_err(|reason| StoreError::PredicateFailure {
                image_id: id.clone(),
                reason,
            })?;
            if !flagged {
                kept_images.insert(id.clone(), img.clone());
            }
        }
        let kept_prompt_ids: BTreeSet<&String> =
            kept_images.values().map(|img| &img.prompt_id).collect();
        let prompts: BTreeMap<String, PromptRecord> = self
            .prompts
            .iter()
            .filter(|(id, _)| kept_prompt_ids.contains(id))
            .map(|(id, p)| (id.clone(), p.clone()))
            .collect();
        let events: Vec<EngagementEvent> = self
            .events
            .iter()
            .filter(|ev| kept_images.contains_key(&ev.image_id))
            .cloned()
            .collect();
        Ok(Self::index(prompts, kept_images, events, self.remix_counting))
    }

    pub fn prompts(&self) -> impl Iterator<Item = &PromptRecord> {
        self.prompts.values()
    }

    pub fn prompt(&self, prompt_id: &str) -> Option<&PromptRecord> {
        self.prompts.get(prompt_id)
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageRecord> {
        self.images.values()
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.images.get(image_id)
    }

    /// Events in canonical (occurred_at_ms, event_id) order.
    pub fn events(&self) -> &[EngagementEvent] {
        &self.events
    }

    pub fn image_stats(&self, image_id: &str) -> Option<&ImageStats> {
        self.stats.get(image_id)
    }

    /// Image ids of a prompt, sorted.
    pub fn images_of_prompt(&self, prompt_id: &str) -> &[String] {
        self.images_by_prompt
            .get(prompt_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn n_prompts(&self) -> usize {
        self.prompts.len()
    }

    pub fn n_images(&self) -> usize {
        self.images.len()
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn remix_counting(&self) -> RemixCounting {
        self.remix_counting
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt(id: &str) -> PromptRecord {
        PromptRecord {
            prompt_id: id.into(),
            text: format!("text of {id}"),
            language: Some("en".into()),
        }
    }

    fn image(id: &str, prompt_id: &str, created: i64) -> ImageRecord {
        ImageRecord {
            image_id: id.into(),
            prompt_id: prompt_id.into(),
            created_at_ms: created,
            uri: format!("synth://{id}"),
            nsfw: false,
        }
    }

    fn event(id: &str, image_id: &str, user: &str, kind: EventKind, at: i64) -> EngagementEvent {
        EngagementEvent {
            event_id: id.into(),
            image_id: image_id.into(),
            user_id: user.into(),
            kind,
            occurred_at_ms: at,
        }
    }

    fn small_store() -> FeedbackStore {
        let prompts = vec![prompt("p1"), prompt("p2"), prompt("p3")];
        let images = vec![
            image("i1", "p1", 100),
            image("i2", "p1", 110),
            image("i3", "p2", 120),
            image("i4", "p2", 130),
            image("i5", "p3", 140),
            image("i6", "p3", 150),
        ];
        let mut events = Vec::new();
        for (n, img) in ["i1", "i2", "i3", "i4", "i5"].iter().enumerate() {
            for k in 0..3 {
                events.push(event(
                    &format!("e{n}{k}"),
                    img,
                    &format!("u{k}"),
                    EventKind::View,
                    200 + (n as i64) * 10 + k as i64,
                ));
            }
        }
        for (n, img) in ["i1", "i2", "i3", "i4", "i5"].iter().enumerate() {
            events.push(event(
                &format!("r{n}"),
                img,
                "u9",
                EventKind::Remix,
                400 + n as i64,
            ));
        }
        assert_eq!(events.len(), 20);
        FeedbackStore::from_records(prompts, images, events, RemixCounting::default()).unwrap()
    }

    #[test]
    fn well_formed_input_round_trips() {
        let store = small_store();
        assert_eq!(store.n_images(), 6);
        assert_eq!(store.n_prompts(), 3);
        assert_eq!(store.n_events(), 20);
    }

    #[test]
    fn dangling_event_reference_rejected() {
        let prompts = vec![prompt("p1")];
        let images = vec![image("i1", "p1", 100)];
        let events = vec![event("e1", "iMISSING", "u1", EventKind::View, 200)];
        let err =
            FeedbackStore::from_records(prompts, images, events, RemixCounting::default())
                .unwrap_err();
        assert!(matches!(err, StoreError::DanglingReference { .. }));
    }

    #[test]
    fn dangling_image_prompt_reference_rejected() {
        let err = FeedbackStore::from_records(
            vec![prompt("p1")],
            vec![image("i1", "pMISSING", 100)],
            vec![],
            RemixCounting::default(),
        )
        .unwrap_err();
        assert!(matches!(err, StoreError::DanglingReference { .. }));
    }

    #[test]
    fn clock_violation_rejected() {
        let err = FeedbackStore::from_records(
            vec![prompt("p1")],
            vec![image("i1", "p1", 1000)],
            vec![event("e1", "i1", "u1", EventKind::View, 999)],
            RemixCounting::default(),
        )
        .unwrap_err();
        assert!(matches!(err, StoreError::ClockViolation { .. }));
    }

    // Brute-force oracle: count view events lexicographically before the
    // first remix under (occurred_at_ms, event_id) order.
    fn views_before_first_remix_oracle(events: &[EngagementEvent], image_id: &str) -> u64 {
        let mut evs: Vec<&EngagementEvent> =
            events.iter().filter(|e| e.image_id == image_id).collect();
        evs.sort_by_key(|e| (e.occurred_at_ms, e.event_id.clone()));
        let first_remix = evs
            .iter()
            .position(|e| e.kind == EventKind::Remix)
            .unwrap_or(evs.len());
        evs[..first_remix]
            .iter()
            .filter(|e| e.kind == EventKind::View)
            .count() as u64
    }

    #[test]
    fn views_before_first_remix_counts_in_time_order() {
        let prompts = vec![prompt("p1")];
        let images = vec![image("i1", "p1", 0)];
        let mut events = Vec::new();
        for k in 0..5 {
            events.push(event(&format!("v{k}"), "i1", "u1", EventKind::View, 10 + k));
        }
        events.push(event("rx", "i1", "u2", EventKind::Remix, 100));
        for k in 0..3 {
            events.push(event(&format!("w{k}"), "i1", "u3", EventKind::View, 200 + k));
        }
        let oracle = views_before_first_remix_oracle(&events, "i1");
        let store =
            FeedbackStore::from_records(prompts, images, events, RemixCounting::default())
                .unwrap();
        let stats = store.image_stats("i1").unwrap();
        assert_eq!(oracle, 5);
        assert_eq!(stats.views_before_first_remix, 5);
        assert_eq!(stats.remix_count, 1);
        assert_eq!(stats.view_count, 8);
    }

    #[test]
    fn simultaneous_events_tie_break_on_event_id() {
        // Same millisecond: view "a" sorts before remix "b", view "c" after.
        let prompts = vec![prompt("p1")];
        let images = vec![image("i1", "p1", 0)];
        let events = vec![
            event("c", "i1", "u1", EventKind::View, 50),
            event("b", "i1", "u2", EventKind::Remix, 50),
            event("a", "i1", "u3", EventKind::View, 50),
        ];
        let store =
            FeedbackStore::from_records(prompts, images, events, RemixCounting::default())
                .unwrap();
        assert_eq!(store.image_stats("i1").unwrap().views_before_first_remix, 1);
    }

    #[test]
    fn zero_remix_vbfr_equals_view_count() {
        let store = small_store();
        let stats = store.image_stats("i6").unwrap();
        assert_eq!(stats.remix_count, 0);
        assert_eq!(stats.views_before_first_remix, stats.view_count);
    }

    #[test]
    fn distinct_user_counting_collapses_repeats() {
        let prompts = vec![prompt("p1")];
        let images = vec![image("i1", "p1", 0)];
        let events = vec![
            event("r1", "i1", "u1", EventKind::Remix, 10),
            event("r2", "i1", "u1", EventKind::Remix, 20),
            event("r3", "i1", "u2", EventKind::Remix, 30),
        ];
        let every = FeedbackStore::from_records(
            prompts.clone(),
            images.clone(),
            events.clone(),
            RemixCounting::EveryEvent,
        )
        .unwrap();
        let distinct =
            FeedbackStore::from_records(prompts, images, events, RemixCounting::DistinctUsers)
                .unwrap();
        assert_eq!(every.image_stats("i1").unwrap().remix_count, 3);
        assert_eq!(distinct.image_stats("i1").unwrap().remix_count, 2);
    }

    #[test]
    fn filter_nsfw_never_flagging_is_identity() {
        let store = small_store();
        let filtered = store.filter_nsfw(|_| Ok(false)).unwrap();
        assert_eq!(store, filtered);
    }

    #[test]
    fn filter_nsfw_drops_image_and_its_events() {
        let store = small_store();
        let filtered = store.filter_nsfw(|img| Ok(img.image_id == "i1")).unwrap();
        assert_eq!(filtered.n_images(), 5);
        assert!(filtered.image("i1").is_none());
        assert!(filtered.events().iter().all(|e| e.image_id != "i1"));
    }

    #[test]
    fn filter_nsfw_drops_emptied_prompts() {
        let store = small_store();
        let filtered = store
            .filter_nsfw(|img| Ok(img.prompt_id == "p2"))
            .unwrap();
        // Oracle: recompute the prompt set from surviving images from scratch.
        let expected: BTreeSet<String> =
            filtered.images().map(|i| i.prompt_id.clone()).collect();
        let actual: BTreeSet<String> =
            filtered.prompts().map(|p| p.prompt_id.clone()).collect();
        assert_eq!(expected, actual);
        assert!(filtered.prompt("p2").is_none());
        assert_eq!(filtered.n_prompts(), 2);
    }

    #[test]
    fn filter_nsfw_predicate_failure_propagates() {
        let store = small_store();
        let err = store
            .filter_nsfw(|img| {
                if img.image_id == "i3" {
                    Err("detector offline".to_string())
                } else {
                    Ok(false)
                }
            })
            .unwrap_err();
        assert!(matches!(err, StoreError::PredicateFailure { .. }));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = small_store();
        store.save(dir.path()).unwrap();
        let back = FeedbackStore::load_log(
            &dir.path().join("events.jsonl"),
            &dir.path().join("images.jsonl"),
            &dir.path().join("prompts.jsonl"),
        )
        .unwrap();
        assert_eq!(store, back);
    }

    #[test]
    fn empty_prompt_text_rejected() {
        let err = FeedbackStore::from_records(
            vec![PromptRecord {
                prompt_id: "p1".into(),
                text: "   ".into(),
                language: None,
            }],
            vec![],
            vec![],
            RemixCounting::default(),
        )
        .unwrap_err();
        assert!(matches!(err, StoreError::MalformedRecord { .. }));
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        fn arb_events() -> impl Strategy<Value = Vec<EngagementEvent>> {
            proptest::collection::vec(
                (0u8..6, 0u8..4, prop::bool::ANY, 0i64..500),
                1..60,
            )
            .prop_map(|raw| {
                raw.into_iter()
                    .enumerate()
                    .map(|(n, (img, user, is_remix, at))| EngagementEvent {
                        event_id: format!("e{n:03}"),
                        image_id: format!("i{}", img % 3 + 1),
                        user_id: format!("u{user}"),
                        kind: if is_remix { EventKind::Remix } else { EventKind::View },
                        occurred_at_ms: 1000 + at,
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn derived_counts_are_input_order_independent(
                events in arb_events(),
                rot in 0usize..60,
            ) {
                let prompts = vec![prompt("p1")];
                let images = vec![
                    image("i1", "p1", 0),
                    image("i2", "p1", 0),
                    image("i3", "p1", 0),
                ];
                let mut permuted = events.clone();
                let r = rot % permuted.len().max(1);
                permuted.rotate_left(r);
                permuted.reverse();
                let a = FeedbackStore::from_records(
                    prompts.clone(),
                    images.clone(),
                    events,
                    RemixCounting::default(),
                )
                .unwrap();
                let b = FeedbackStore::from_records(
                    prompts,
                    images,
                    permuted,
                    RemixCounting::default(),
                )
                .unwrap();
                prop_assert_eq!(a, b);
            }

            #[test]
            fn vbfr_matches_brute_force_oracle(events in arb_events()) {
                let prompts = vec![prompt("p1")];
                let images = vec![
                    image("i1", "p1", 0),
                    image("i2", "p1", 0),
                    image("i3", "p1", 0),
                ];
                let store = FeedbackStore::from_records(
                    prompts,
                    images,
                    events.clone(),
                    RemixCounting::default(),
                )
                .unwrap();
                for id in ["i1", "i2", "i3"] {
                    prop_assert_eq!(
                        store.image_stats(id).unwrap().views_before_first_remix,
                        views_before_first_remix_oracle(&events, id)
                    );
                }
            }
        }
    }
}
