#![allow(dead_code)]

use std::path::PathBuf;

use epigate::doxastics::Proposition;
use epigate::epistemics::{JustificationTrace, ProcessLedger, ShotPerformance};
use epigate::evidence::{ChannelId, EvidenceItem, ProcessId};
use epigate::harness::{load_scenario, ScenarioSpec};
use epigate::hnpm::{build_hierarchy, HnpmModel, HypothesisLevel, Observation};
use epigate::worldsim::{
    Entity, EntityClass, EventEffect, ExogenousEvent, GridPos, Region, WorldState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn scenario(name: &str) -> ScenarioSpec {
    let path = scenarios_dir().join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    load_scenario(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every scenario document shipped in the repository.
pub fn all_scenarios() -> Vec<ScenarioSpec> {
    let mut names: Vec<String> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json") && !n.contains("envelopes"))
        .map(|n| n.trim_end_matches(".json").to_string())
        .collect();
    names.sort();
    names.iter().map(|n| scenario(n)).collect()
}

/// An archer with a long good record.
pub fn skilled_archer() -> (JustificationTrace, ProcessLedger) {
    let mut t = JustificationTrace::new("arrow".into());
    t.push(&EvidenceItem {
        channel_id: ChannelId::new("archer"),
        process_id: ProcessId::new("archery"),
        tick: 0,
        subject: "arrow".into(),
        reported_class: EntityClass::FriendlyCombatant,
        likelihoods: Default::default(),
        shared_source: None,
    });
    (
        t,
        ProcessLedger::new()
            .with_history("archery", 97, 100)
            .unwrap(),
    )
}

/// An arrow flying at 2 cells per tick toward a target disc at x = 10.
/// `aim` is the vertical error of the release; `gust`, if any, is a chance
/// crosswind at tick 3.
pub fn archery_shot(aim: i64, gust: Option<i64>) -> (WorldState, ShotPerformance) {
    let arrow = Entity::new("arrow", EntityClass::FriendlyCombatant, GridPos::new(0, 0))
        .moving(GridPos::new(2, 0));
    let mut events = vec![ExogenousEvent::scripted(
        "release",
        1,
        EventEffect::Displace {
            entity: "arrow".into(),
            by: GridPos::new(0, aim),
        },
    )];
    if let Some(dy) = gust {
        events.push(ExogenousEvent::luck(
            "gust",
            3,
            1.0,
            EventEffect::Displace {
                entity: "arrow".into(),
                by: GridPos::new(0, dy),
            },
        ));
    }
    let world = WorldState::new(vec![arrow], events, 8).unwrap();
    let target = Region::new(GridPos::new(10, 0), 1);
    (
        world,
        ShotPerformance {
            outcome: Proposition::within("arrow", target),
            at_tick: 5,
        },
    )
}

fn level(rank: u8, names: &[&str], prior: Vec<f64>, link: Vec<Vec<f64>>) -> HypothesisLevel {
    HypothesisLevel {
        rank,
        hypotheses: names.iter().map(|s| s.to_string()).collect(),
        prior,
        link,
    }
}

/// Bags of marbles: level 1 says whether bags tend to be a single colour,
/// level 2 is a bag's black fraction, level 3 a drawn marble.
pub fn marble_bags() -> HnpmModel {
    let thetas = [0.02, 0.25, 0.5, 0.75, 0.98];
    build_hierarchy(vec![
        level(
            1,
            &["uniform", "mixed"],
            vec![0.5, 0.5],
            vec![
                vec![0.46, 0.02, 0.04, 0.02, 0.46],
                vec![0.02, 0.2, 0.56, 0.2, 0.02],
            ],
        ),
        level(
            2,
            &["b02", "b25", "b50", "b75", "b98"],
            vec![],
            thetas.iter().map(|t| vec![*t, 1.0 - t]).collect(),
        ),
        level(3, &["black", "white"], vec![], vec![]),
    ])
    .unwrap()
}

pub const BLACK: usize = 0;
pub const WHITE: usize = 1;

/// Three single-coloured bags, then one white marble from a fresh bag.
pub fn marble_draws() -> Vec<Observation> {
    let mut obs = Vec::new();
    for (set, colour) in [(0, BLACK), (1, WHITE), (2, BLACK)] {
        obs.extend(std::iter::repeat_n(Observation::new(set, colour), 5));
    }
    obs.push(Observation::new(3, WHITE));
    obs
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let z: f64 = raw.iter().sum();
    let mut d: Vec<f64> = raw.iter().map(|x| x / z).collect();
    let head: f64 = d[..n - 1].iter().sum();
    d[n - 1] = 1.0 - head;
    d
}

/// A seeded random three-level model with its observations.
pub fn random_hierarchy(seed: u64) -> (HnpmModel, Vec<Observation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n1, n2, n3) = (
        rng.random_range(1..=3),
        rng.random_range(2..=4),
        rng.random_range(2..=3),
    );
    let names = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let model = build_hierarchy(vec![
        HypothesisLevel {
            rank: 1,
            hypotheses: names("a", n1),
            prior: random_distribution(&mut rng, n1),
            link: (0..n1).map(|_| random_distribution(&mut rng, n2)).collect(),
        },
        HypothesisLevel {
            rank: 2,
            hypotheses: names("t", n2),
            prior: vec![],
            link: (0..n2).map(|_| random_distribution(&mut rng, n3)).collect(),
        },
        HypothesisLevel {
            rank: 3,
            hypotheses: names("x", n3),
            prior: vec![],
            link: vec![],
        },
    ])
    .unwrap();
    let sets = rng.random_range(0..=4u32);
    let obs = (0..rng.random_range(0..12))
        .filter(|_| sets > 0)
        .map(|_| Observation::new(rng.random_range(0..sets), rng.random_range(0..n3)))
        .collect();
    (model, obs)
}

fn class_name(c: EntityClass) -> &'static str {
    match c {
        EntityClass::Civilian => "Civilian",
        EntityClass::Belligerent => "Belligerent",
        EntityClass::ProtectedObject => "ProtectedObject",
        EntityClass::FriendlyCombatant => "FriendlyCombatant",
    }
}

fn pm(rng: &mut ChaCha8Rng, r: i64) -> i64 {
    rng.random_range(-r..=r)
}

/// A small random engagement: contacts of random class and kinematics,
/// noisy and sometimes spoofed channels, a random envelope and utilities.
/// The doxastic report of each trial is taken at the request tick.
pub fn random_engagement(seed: u64) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two = ["Civilian", "Belligerent"];
    let n_contacts = rng.random_range(1..=3);
    let decide_at = rng.random_range(1..=3u64);
    let mut entities =
        vec![json!({"id": "own", "true_class": "FriendlyCombatant", "position": {"x": 0, "y": 0}})];
    let mut partitions = Vec::new();
    let contacts: Vec<String> = (0..n_contacts).map(|i| format!("c{i}")).collect();
    for c in &contacts {
        let class = if rng.random_bool(0.5) {
            EntityClass::Belligerent
        } else {
            EntityClass::Civilian
        };
        entities.push(json!({
            "id": c,
            "true_class": class_name(class),
            "position": {"x": pm(&mut rng, 20), "y": pm(&mut rng, 20)},
            "motion": {"x": pm(&mut rng, 4), "y": pm(&mut rng, 4)},
            "maneuverable": rng.random_bool(0.5),
        }));
        let p = rng.random_range(0.05..0.95);
        partitions.push(json!({
            "subject": {"entity": c},
            "hypotheses": two,
            "prior": {"Civilian": p, "Belligerent": 1.0 - p},
        }));
    }
    let n_channels = rng.random_range(1..=3);
    let mut channels = Vec::new();
    let mut schedule = Vec::new();
    let mut ledger = serde_json::Map::new();
    let mut observations = Vec::new();
    for k in 0..n_channels {
        let id = format!("ch{k}");
        let process = format!("proc{}", rng.random_range(0..n_channels));
        let acc = rng.random_range(0.6..0.99);
        channels.push(json!({
            "id": id,
            "process_id": process,
            "availability": rng.random_range(0.5..=1.0),
            "confusion": {
                "Civilian": {"Civilian": acc, "Belligerent": 1.0 - acc},
                "Belligerent": {"Civilian": 1.0 - acc, "Belligerent": acc},
            },
        }));
        let trials = 1000u64;
        let successes = (rng.random_range(0.5..0.99) * trials as f64) as u64;
        ledger.insert(process, json!([successes, trials]));
        if rng.random_bool(0.3) {
            let from = rng.random_range(0..=decide_at);
            schedule.push(json!({
                "channel": id,
                "from_tick": 0,
                "change": {"spoof": {"active_window": [from, from + 2], "fabricated_report": two[rng.random_range(0..2)]}},
            }));
        }
        for c in &contacts {
            if rng.random_bool(0.8) {
                observations.push(json!({"channel": id, "subject": c, "window": [1, decide_at]}));
            }
        }
    }
    let mut menu = vec![json!({"id": "hold", "tier": "Navigate"})];
    let mut actions = serde_json::Map::new();
    actions.insert("hold".into(), json!({"any": rng.random_range(-1.0..1.0)}));
    for (i, c) in contacts.iter().enumerate() {
        let collateral: Vec<&String> = contacts
            .iter()
            .filter(|o| *o != c && rng.random_bool(0.3))
            .collect();
        let strike = format!("strike-{c}");
        menu.push(json!({
            "id": strike, "tier": "LethalEffect", "target": {"entity": c},
            "presumed_class": "Belligerent", "collateral": collateral,
        }));
        actions.insert(
            strike,
            json!({"by_class": {
                "Belligerent": rng.random_range(1.0..30.0),
                "Civilian": rng.random_range(-200.0..-20.0),
            }}),
        );
        let warn = format!("warn-{c}");
        menu.push(json!({"id": warn, "tier": "NonLethalEffect", "target": {"entity": c}, "presumed_class": "Belligerent"}));
        actions.insert(
            warn,
            json!({"by_class": {
                "Belligerent": rng.random_range(0.0..8.0),
                "Civilian": rng.random_range(-10.0..2.0),
            }}),
        );
        let watch = format!("watch-{c}");
        menu.push(json!({"id": watch, "tier": "Surveil", "target": {"entity": c}}));
        actions.insert(
            watch,
            json!({"any": rng.random_range(-1.0..3.0) + i as f64 * 1e-3}),
        );
    }
    let mut envelope = Vec::new();
    if rng.random_bool(0.6) {
        envelope.push(json!({"kind": "closing"}));
    }
    if rng.random_bool(0.4) {
        envelope.push(json!({"kind": "maneuver_capable"}));
    }
    if rng.random_bool(0.5) {
        let lo = rng.random_range(0.0..3.0);
        envelope.push(
            json!({"kind": "velocity_band", "min": lo, "max": lo + rng.random_range(0.5..4.0)}),
        );
    }
    if rng.random_bool(0.5) {
        envelope.push(json!({"kind": "range_below", "max": rng.random_range(5.0..30.0)}));
    }
    let mut agent = json!({
        "id": "own",
        "platform": "own",
        "partitions": partitions,
        "observations": observations,
        "ledger": ledger,
    });
    if rng.random_bool(0.5) {
        agent["hierarchy"] = json!({"bins": [0.5, 0.8, 0.95], "regimes": [
            {"name": "sound", "prior": 0.7, "bin_weights": [0.1, 0.3, 0.6]},
            {"name": "compromised", "prior": 0.3, "bin_weights": [0.6, 0.3, 0.1]},
        ]});
    }
    let doc: Value = json!({
        "name": format!("random-{seed}"),
        "master_seed": seed,
        "trials": 1,
        "world": {"entities": entities},
        "channels": channels,
        "schedule": schedule,
        "agent": agent,
        "policy": {
            "kind": "AS3bv",
            "envelope": envelope,
            "human_authorization_required": {"LethalEffect": rng.random_bool(0.3)},
        },
        "menu": menu,
        "utility": {"actions": actions, "harm_weights": {"Civilian": rng.random_range(-80.0..-5.0)}, "miss_utility": 0.0},
        "requests": [{"id": "r", "tick": decide_at, "authorized": rng.random_bool(0.7)}],
        "run": {"tracking_samples": 4, "aaa_reruns": 4},
    });
    load_scenario(&doc.to_string()).unwrap_or_else(|e| panic!("random scenario {seed}: {e}"))
}
