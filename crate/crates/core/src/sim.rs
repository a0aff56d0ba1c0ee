//! Synthetic engagement-log generator.
//!
//! Produces desk-scale logs whose aggregate shape matches the population the
//! curation pipeline expects: user activity and per-image appeal follow
//! Pareto draws, views land on images proportionally to appeal, and each
//! view remixes with a probability that rises with appeal. Outputs are
//! deterministic per seed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::{self, CurationConfig};
use crate::jsonl;
use crate::rng::{self, substream, uniform01};
use crate::store::{
    EngagementEvent, EventKind, FeedbackStore, ImageRecord, InfluencerRoster, PromptRecord,
    RemixCounting,
};

/// 2020-01-01T00:00:00Z, the clock origin for generated logs.
const BASE_TIME_MS: i64 = 1_577_836_800_000;

/// Ceiling on the per-view remix probability.
const REMIX_P_MAX: f64 = 0.30;
/// Slope of the logistic in log-appeal. Steep, so content splits into a
/// remixable top slice (quick first remixes, keeping the view threshold low)
/// and a zero-remix bulk that still accumulates views.
const REMIX_SLOPE: f64 = 3.5;
/// Appeal quantile at which the logistic sits at half its ceiling.
const REMIX_PIVOT_QUANTILE: f64 = 0.95;
/// The activity population is two-regime: a mostly-flat regular crowd and a
/// power-user decile carrying the heavy tail. A single unshifted Pareto
/// cannot produce both target remix shares (bottom half near 30% AND top
/// decile near 40%) at once. Both regimes draw from the configured Pareto;
/// the caps bound single-user influence so decile shares are seed-stable.
const POWER_USER_FRACTION: f64 = 0.10;
const POWER_USER_SCALE: f64 = 3.1;
const POWER_USER_CAP: f64 = 4.0;
const REGULAR_USER_SPREAD: f64 = 0.02;
const REGULAR_USER_CAP: f64 = 50.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_prompts: usize,
    pub n_images_per_prompt: usize,
    pub n_users: usize,
    pub n_influencers: usize,
    pub user_activity_pareto_alpha: f64,
    pub content_appeal_pareto_alpha: f64,
    pub mean_views_per_image: f64,
    pub horizon_days: u32,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_prompts: 250,
            n_images_per_prompt: 24,
            n_users: 800,
            n_influencers: 4,
            user_activity_pareto_alpha: 1.5,
            content_appeal_pareto_alpha: 2.0,
            mean_views_per_image: 60.0,
            horizon_days: 60,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("n_prompts", self.n_prompts),
            ("n_images_per_prompt", self.n_images_per_prompt),
            ("n_users", self.n_users),
            ("n_influencers", self.n_influencers),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(SimError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.n_influencers > self.n_users {
            return Err(SimError::InvalidConfig(
                "n_influencers exceeds n_users".into(),
            ));
        }
        if self.user_activity_pareto_alpha <= 0.0 || self.content_appeal_pareto_alpha <= 0.0 {
            return Err(SimError::InvalidConfig("pareto alphas must be > 0".into()));
        }
        if self.mean_views_per_image <= 0.0 {
            return Err(SimError::InvalidConfig(
                "mean_views_per_image must be > 0".into(),
            ));
        }
        if self.horizon_days == 0 {
            return Err(SimError::InvalidConfig("horizon_days must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("event log is empty")]
    EmptyLog,
    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Latent appeal of one generated image; rank 1 is the most appealing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub image_id: String,
    pub appeal: f64,
    pub appeal_rank: usize,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub store: FeedbackStore,
    pub roster: InfluencerRoster,
    pub ground_truth: Vec<GroundTruthRecord>,
}

impl SimOutput {
    /// Write `prompts.jsonl`, `images.jsonl`, `events.jsonl`, `roster.json`
    /// and `ground_truth.jsonl` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), SimError> {
        std::fs::create_dir_all(dir)?;
        self.store.save(dir)?;
        let roster_json =
            serde_json::to_string_pretty(&self.roster).expect("roster serializes");
        std::fs::write(dir.join("roster.json"), roster_json + "\n")?;
        jsonl::write_jsonl(&dir.join("ground_truth.jsonl"), &self.ground_truth)
            .map_err(SimError::Io)?;
        Ok(())
    }
}

fn word_bank_prompt(rng: &mut rand_chacha::ChaCha8Rng) -> String {
    const ADJECTIVES: &[&str] = &[
        "golden", "neon", "vintage", "pastel", "shiny", "dark", "minimal", "floral", "glitter",
        "rustic", "bold", "soft", "cosmic", "retro", "elegant", "bright",
    ];
    const NOUNS: &[&str] = &[
        "frame", "background", "flower", "crown", "logo", "pattern", "portrait", "landscape",
        "butterfly", "heart", "skyline", "bouquet", "gradient", "texture", "banner", "wallpaper",
    ];
    const STYLES: &[&str] = &[
        "on black canvas", "with sparkles", "in watercolor style", "with bokeh lights",
        "in anime style", "with smoke effect", "in oil paint", "with marble texture",
    ];
    let adj = ADJECTIVES[rng::index_below(rng, ADJECTIVES.len())];
    let noun = NOUNS[rng::index_below(rng, NOUNS.len())];
    let style = STYLES[rng::index_below(rng, STYLES.len())];
    format!("{adj} {noun} {style}")
}

/// Weighted index draw over a cumulative-sum table.
fn draw_weighted(rng: &mut rand_chacha::ChaCha8Rng, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("nonempty weights");
    let x = uniform01(rng) * total;
    match cumulative.binary_search_by(|probe| probe.partial_cmp(&x).unwrap()) {
        Ok(idx) => (idx + 1).min(cumulative.len() - 1),
        Err(idx) => idx.min(cumulative.len() - 1),
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-view remix probability: logistic in log-appeal, pivoted at a fixed
/// quantile of the configured appeal distribution.
fn remix_probability(appeal: f64, content_alpha: f64) -> f64 {
    let pivot_log = -(1.0 - REMIX_PIVOT_QUANTILE).ln() / content_alpha;
    REMIX_P_MAX * sigmoid(REMIX_SLOPE * (appeal.ln() - pivot_log))
}

/// Generate a full engagement log. Deterministic per `cfg.rng_seed`.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let horizon_ms = cfg.horizon_days as i64 * 24 * 3600 * 1000;
    let end_ms = BASE_TIME_MS + horizon_ms;

    // Users and their activity weights.
    let mut user_rng = substream(cfg.rng_seed, "user_activity");
    let user_ids: Vec<String> = (0..cfg.n_users).map(|k| format!("u{k:05}")).collect();
    let n_power = ((cfg.n_users as f64) * POWER_USER_FRACTION).round() as usize;
    let activity: Vec<f64> = (0..cfg.n_users)
        .map(|k| {
            let x = rng::pareto(&mut user_rng, cfg.user_activity_pareto_alpha);
            if k < n_power {
                POWER_USER_SCALE * x.min(POWER_USER_CAP)
            } else {
                1.0 + REGULAR_USER_SPREAD * (x.min(REGULAR_USER_CAP) - 1.0)
            }
        })
        .collect();
    // Influencers are the most active users.
    let mut by_activity: Vec<usize> = (0..cfg.n_users).collect();
    by_activity.sort_by(|&a, &b| {
        activity[b]
            .partial_cmp(&activity[a])
            .unwrap()
            .then(user_ids[a].cmp(&user_ids[b]))
    });
    let roster = InfluencerRoster::from_ids(
        by_activity[..cfg.n_influencers]
            .iter()
            .map(|&k| user_ids[k].clone()),
    );

    // Prompts.
    let mut text_rng = substream(cfg.rng_seed, "prompt_text");
    let prompts: Vec<PromptRecord> = (0..cfg.n_prompts)
        .map(|k| PromptRecord {
            prompt_id: format!("p{k:04}"),
            text: word_bank_prompt(&mut text_rng),
            language: Some("en".into()),
        })
        .collect();

    // Images: creation times and latent appeal.
    let n_images = cfg.n_prompts * cfg.n_images_per_prompt;
    let mut created_rng = substream(cfg.rng_seed, "image_created");
    let mut appeal_rng = substream(cfg.rng_seed, "image_appeal");
    let mut images = Vec::with_capacity(n_images);
    let mut appeal = Vec::with_capacity(n_images);
    for k in 0..n_images {
        let image_id = format!("i{k:06}");
        let prompt_idx = k / cfg.n_images_per_prompt;
        let created_at_ms =
            BASE_TIME_MS + (rng::uniform01(&mut created_rng) * horizon_ms as f64) as i64;
        images.push(ImageRecord {
            image_id: image_id.clone(),
            prompt_id: prompts[prompt_idx].prompt_id.clone(),
            created_at_ms,
            uri: format!("synth://{image_id}"),
            nsfw: false,
        });
        appeal.push(rng::pareto(
            &mut appeal_rng,
            cfg.content_appeal_pareto_alpha,
        ));
    }

    // Cumulative weight tables for the two categorical draws.
    let cum = |weights: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect()
    };
    let appeal_cum = cum(&appeal);
    let activity_cum = cum(&activity);

    // Views proportional to appeal; each view may trigger one remix by the
    // same user shortly afterwards.
    let n_views = (n_images as f64 * cfg.mean_views_per_image).round() as usize;
    let mut view_rng = substream(cfg.rng_seed, "views");
    let mut remix_rng = substream(cfg.rng_seed, "remixes");
    // (occurred_at_ms, generation_seq, image_idx, user_idx, kind)
    let mut raw: Vec<(i64, usize, usize, usize, EventKind)> =
        Vec::with_capacity(n_views + n_views / 4);
    let mut seq = 0usize;
    for _ in 0..n_views {
        let image_idx = draw_weighted(&mut view_rng, &appeal_cum);
        let user_idx = draw_weighted(&mut view_rng, &activity_cum);
        let created = images[image_idx].created_at_ms;
        let span = (end_ms - created).max(1) as f64;
        let at = created + (uniform01(&mut view_rng) * span) as i64;
        raw.push((at, seq, image_idx, user_idx, EventKind::View));
        seq += 1;
        let p = remix_probability(appeal[image_idx], cfg.content_appeal_pareto_alpha);
        if uniform01(&mut remix_rng) < p {
            let delay = 1 + rng::index_below(&mut remix_rng, 30_000) as i64;
            raw.push((at + delay, seq, image_idx, user_idx, EventKind::Remix));
            seq += 1;
        }
    }
    raw.sort_by_key(|&(at, seq, ..)| (at, seq));
    let events: Vec<EngagementEvent> = raw
        .into_iter()
        .enumerate()
        .map(|(rank, (at, _, image_idx, user_idx, kind))| EngagementEvent {
            event_id: format!("e{rank:08}"),
            image_id: images[image_idx].image_id.clone(),
            user_id: user_ids[user_idx].clone(),
            kind,
            occurred_at_ms: at,
        })
        .collect();

    let mut ranked: Vec<usize> = (0..n_images).collect();
    ranked.sort_by(|&a, &b| {
        appeal[b]
            .partial_cmp(&appeal[a])
            .unwrap()
            .then(images[a].image_id.cmp(&images[b].image_id))
    });
    let mut ground_truth: Vec<GroundTruthRecord> = ranked
        .iter()
        .enumerate()
        .map(|(rank, &idx)| GroundTruthRecord {
            image_id: images[idx].image_id.clone(),
            appeal: appeal[idx],
            appeal_rank: rank + 1,
        })
        .collect();
    ground_truth.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    let store = FeedbackStore::from_records(prompts, images, events, RemixCounting::default())?;
    Ok(SimOutput {
        store,
        roster,
        ground_truth,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimStatsReport {
    pub n_events: usize,
    pub n_views: u64,
    pub n_remixes: u64,
    pub n_users_seen: usize,
    /// Remix share of the least active half of users (by remix count). For a
    /// single user this is 1.0 by construction.
    pub bottom_half_remix_share: f64,
    /// Remix share of the most active decile of users.
    pub top_decile_remix_share: f64,
    /// Labeled positives over all store images; `None` when the curation
    /// labeler cannot run (e.g. no remixes at all).
    pub positive_fraction: Option<f64>,
}

/// Lorenz-style activity shares plus the curated positive fraction.
pub fn stats(
    store: &FeedbackStore,
    roster: &InfluencerRoster,
    curation_cfg: &CurationConfig,
) -> Result<SimStatsReport, SimError> {
    if store.n_events() == 0 {
        return Err(SimError::EmptyLog);
    }
    let mut remix_counts: BTreeMap<&str, u64> = BTreeMap::new();
    let mut n_views = 0u64;
    let mut n_remixes = 0u64;
    for ev in store.events() {
        remix_counts.entry(ev.user_id.as_str()).or_default();
        match ev.kind {
            EventKind::View => n_views += 1,
            EventKind::Remix => {
                n_remixes += 1;
                *remix_counts.get_mut(ev.user_id.as_str()).unwrap() += 1;
            }
        }
    }
    // Ascending activity order, ties broken by user id.
    let mut by_count: Vec<(&str, u64)> = remix_counts.iter().map(|(u, c)| (*u, *c)).collect();
    by_count.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
    let n_users = by_count.len();
    let total: u64 = by_count.iter().map(|(_, c)| c).sum();
    let share = |counts: &[(&str, u64)]| -> f64 {
        if total == 0 {
            return 0.0;
        }
        counts.iter().map(|(_, c)| *c).sum::<u64>() as f64 / total as f64
    };
    let bottom_n = (n_users as f64 * 0.5).ceil() as usize;
    let top_n = (n_users as f64 * 0.1).ceil() as usize;
    let bottom_half_remix_share = share(&by_count[..bottom_n]);
    let top_decile_remix_share = share(&by_count[n_users - top_n..]);

    let positive_fraction = curation::label_positives(store, roster, curation_cfg)
        .ok()
        .map(|positives| positives.len() as f64 / store.n_images().max(1) as f64);

    Ok(SimStatsReport {
        n_events: store.n_events(),
        n_views,
        n_remixes,
        n_users_seen: n_users,
        bottom_half_remix_share,
        top_decile_remix_share,
        positive_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(seed: u64) -> SimConfig {
        SimConfig {
            n_prompts: 20,
            n_images_per_prompt: 10,
            n_users: 100,
            n_influencers: 2,
            mean_views_per_image: 30.0,
            rng_seed: seed,
            ..SimConfig::default()
        }
    }

    #[test]
    fn same_seed_gives_byte_identical_files() {
        let cfg = tiny_cfg(7);
        let out1 = simulate(&cfg).unwrap();
        let out2 = simulate(&cfg).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        out1.save(d1.path()).unwrap();
        out2.save(d2.path()).unwrap();
        for name in [
            "prompts.jsonl",
            "images.jsonl",
            "events.jsonl",
            "roster.json",
            "ground_truth.jsonl",
        ] {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = simulate(&tiny_cfg(1)).unwrap();
        let b = simulate(&tiny_cfg(2)).unwrap();
        assert_ne!(a.store.events(), b.store.events());
    }

    #[test]
    fn events_respect_image_creation_and_remix_budget() {
        let out = simulate(&tiny_cfg(3)).unwrap();
        let mut views = 0u64;
        let mut remixes = 0u64;
        for ev in out.store.events() {
            let img = out.store.image(&ev.image_id).unwrap();
            assert!(ev.occurred_at_ms >= img.created_at_ms);
            match ev.kind {
                EventKind::View => views += 1,
                EventKind::Remix => remixes += 1,
            }
        }
        assert!(remixes <= views);
    }

    #[test]
    fn every_remix_follows_a_view_by_the_same_user() {
        let out = simulate(&tiny_cfg(9)).unwrap();
        use std::collections::BTreeSet;
        let mut seen_views: BTreeSet<(&str, &str)> = BTreeSet::new();
        // Events are in canonical chronological order.
        for ev in out.store.events() {
            match ev.kind {
                EventKind::View => {
                    seen_views.insert((ev.image_id.as_str(), ev.user_id.as_str()));
                }
                EventKind::Remix => {
                    assert!(
                        seen_views.contains(&(ev.image_id.as_str(), ev.user_id.as_str())),
                        "remix {} has no preceding view",
                        ev.event_id
                    );
                }
            }
        }
    }

    #[test]
    fn ground_truth_ranks_are_a_permutation() {
        let out = simulate(&tiny_cfg(4)).unwrap();
        assert_eq!(out.ground_truth.len(), out.store.n_images());
        let mut ranks: Vec<usize> = out.ground_truth.iter().map(|g| g.appeal_rank).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, (1..=out.store.n_images()).collect::<Vec<_>>());
    }

    #[test]
    fn influencers_are_most_active_users() {
        let cfg = tiny_cfg(5);
        let out = simulate(&cfg).unwrap();
        assert_eq!(out.roster.user_ids.len(), cfg.n_influencers);
    }

    #[test]
    fn default_config_hits_population_targets() {
        // Aggregate shape the curation pipeline expects from the default
        // config: bottom-half remix share near 30%, top-decile near 40%,
        // curated positive fraction near 8%, at >= 100k events.
        let cfg = SimConfig::default();
        let out = simulate(&cfg).unwrap();
        let report = stats(&out.store, &out.roster, &CurationConfig::default()).unwrap();
        assert!(report.n_events >= 100_000, "only {} events", report.n_events);
        assert!(
            (report.bottom_half_remix_share - 0.30).abs() <= 0.05,
            "bottom-half share {}",
            report.bottom_half_remix_share
        );
        assert!(
            (report.top_decile_remix_share - 0.40).abs() <= 0.05,
            "top-decile share {}",
            report.top_decile_remix_share
        );
        let pf = report.positive_fraction.expect("curation ran");
        assert!((pf - 0.08).abs() <= 0.03, "positive fraction {pf}");
    }

    #[test]
    fn uniform_appeal_limit_is_multinomial_uniform() {
        // content_appeal_pareto_alpha -> infinity collapses appeal to 1, so
        // remix counts across images must look multinomial-uniform.
        let cfg = SimConfig {
            n_prompts: 20,
            n_images_per_prompt: 10,
            n_users: 100,
            n_influencers: 2,
            content_appeal_pareto_alpha: 1e12,
            mean_views_per_image: 50.0,
            rng_seed: 11,
            ..SimConfig::default()
        };
        let out = simulate(&cfg).unwrap();
        let k = out.store.n_images() as f64;
        let counts: Vec<u64> = out
            .store
            .images()
            .map(|img| out.store.image_stats(&img.image_id).unwrap().remix_count)
            .collect();
        let total: u64 = counts.iter().sum();
        let expected = total as f64 / k;
        assert!(expected >= 5.0, "need counts for a chi-square test");
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // Wilson-Hilferty approximation of the chi-square 0.99 quantile.
        let df = k - 1.0;
        let z = 2.326_347_874_040_841; // Phi^-1(0.99)
        let t = 2.0 / (9.0 * df);
        let crit = df * (1.0 - t + z * t.sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 {chi2} >= critical {crit} at p=0.01");
    }

    #[test]
    fn gini_of_remix_counts_falls_as_appeal_flattens() {
        // Statistical check over 20 seeds: flatter appeal (higher alpha)
        // lowers the Gini coefficient of per-image remix counts on average.
        fn gini(counts: &mut [f64]) -> f64 {
            counts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = counts.len() as f64;
            let sum: f64 = counts.iter().sum();
            if sum == 0.0 {
                return 0.0;
            }
            let weighted: f64 = counts
                .iter()
                .enumerate()
                .map(|(i, &x)| (i as f64 + 1.0) * x)
                .sum();
            (2.0 * weighted) / (n * sum) - (n + 1.0) / n
        }
        let mean_gini = |alpha: f64| -> f64 {
            let mut acc = 0.0;
            for seed in 0..20 {
                let cfg = SimConfig {
                    content_appeal_pareto_alpha: alpha,
                    rng_seed: seed,
                    ..tiny_cfg(seed)
                };
                let out = simulate(&cfg).unwrap();
                let mut counts: Vec<f64> = out
                    .store
                    .images()
                    .map(|img| {
                        out.store.image_stats(&img.image_id).unwrap().remix_count as f64
                    })
                    .collect();
                acc += gini(&mut counts);
            }
            acc / 20.0
        };
        let concentrated = mean_gini(1.2);
        let flat = mean_gini(3.0);
        assert!(
            concentrated > flat,
            "gini did not fall: {concentrated} vs {flat}"
        );
    }

    #[test]
    fn stats_degenerate_single_user() {
        use crate::store::{PromptRecord, RemixCounting};
        let prompts = vec![PromptRecord {
            prompt_id: "p".into(),
            text: "p".into(),
            language: None,
        }];
        let images = vec![ImageRecord {
            image_id: "i".into(),
            prompt_id: "p".into(),
            created_at_ms: 0,
            uri: "synth://i".into(),
            nsfw: false,
        }];
        let events: Vec<EngagementEvent> = (0..10)
            .map(|k| EngagementEvent {
                event_id: format!("e{k}"),
                image_id: "i".into(),
                user_id: "solo".into(),
                kind: EventKind::Remix,
                occurred_at_ms: k,
            })
            .collect();
        let store =
            FeedbackStore::from_records(prompts, images, events, RemixCounting::default())
                .unwrap();
        let report = stats(
            &store,
            &InfluencerRoster::default(),
            &CurationConfig::default(),
        )
        .unwrap();
        assert_eq!(report.bottom_half_remix_share, 1.0);
        assert_eq!(report.top_decile_remix_share, 1.0);
    }

    #[test]
    fn stats_two_user_shares() {
        use crate::store::{PromptRecord, RemixCounting};
        let prompts = vec![PromptRecord {
            prompt_id: "p".into(),
            text: "p".into(),
            language: None,
        }];
        let images = vec![ImageRecord {
            image_id: "i".into(),
            prompt_id: "p".into(),
            created_at_ms: 0,
            uri: "synth://i".into(),
            nsfw: false,
        }];
        let mut events = Vec::new();
        for k in 0..3 {
            events.push(EngagementEvent {
                event_id: format!("a{k}"),
                image_id: "i".into(),
                user_id: "alice".into(),
                kind: EventKind::Remix,
                occurred_at_ms: k,
            });
        }
        for k in 0..7 {
            events.push(EngagementEvent {
                event_id: format!("b{k}"),
                image_id: "i".into(),
                user_id: "bob".into(),
                kind: EventKind::Remix,
                occurred_at_ms: 10 + k,
            });
        }
        let store =
            FeedbackStore::from_records(prompts, images, events, RemixCounting::default())
                .unwrap();
        let report = stats(
            &store,
            &InfluencerRoster::default(),
            &CurationConfig::default(),
        )
        .unwrap();
        // Top 10% of 2 users = 1 user (bob) with 7 of 10 remixes.
        assert!((report.top_decile_remix_share - 0.7).abs() < 1e-12);
        assert!((report.bottom_half_remix_share - 0.3).abs() < 1e-12);
    }

    #[test]
    fn stats_rejects_empty_log() {
        use crate::store::{PromptRecord, RemixCounting};
        let store = FeedbackStore::from_records(
            vec![PromptRecord {
                prompt_id: "p".into(),
                text: "p".into(),
                language: None,
            }],
            vec![],
            vec![],
            RemixCounting::default(),
        )
        .unwrap();
        assert!(matches!(
            stats(
                &store,
                &InfluencerRoster::default(),
                &CurationConfig::default()
            ),
            Err(SimError::EmptyLog)
        ));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = SimConfig {
            n_influencers: 10,
            n_users: 5,
            ..SimConfig::default()
        };
        assert!(matches!(simulate(&bad), Err(SimError::InvalidConfig(_))));
        let bad = SimConfig {
            user_activity_pareto_alpha: 0.0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
