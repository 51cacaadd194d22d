use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use prefscreen_core::acquisition::AcquisitionKind;
use prefscreen_core::featurization::{FingerprintParams, Library, Ligand};
use prefscreen_core::oracles::{LibrarySource, Orientation};
use prefscreen_core::screening::*;
use prefscreen_core::Error;
use proptest::prelude::*;

fn small(n: usize, kind: AcquisitionKind, seed: u64) -> CampaignConfig {
    let mut c = CampaignConfig::default();
    c.library = LibrarySource::Synthetic {
        n,
        seed: 3,
        table: None,
    };
    c.acquisition.kind = kind;
    c.acquisition.mc_affinity_samples = 4;
    c.affinity_model.restarts = 0;
    c.affinity_model.max_hyperopt_points = 64;
    c.init_fraction = 0.05;
    c.batch_fraction = 0.02;
    c.n_iterations = 5;
    c.pairs_per_iteration = 20;
    c.top_k_for_pairs = 8;
    c.accuracy_k = vec![5, 20];
    c.seed = seed;
    c
}

fn open(c: CampaignConfig) -> Campaign {
    let ctx = CampaignContext::from_config(&c).unwrap();
    Campaign::init(c, ctx).unwrap()
}

#[test]
fn initial_sample_size_and_determinism() {
    let mut c = small(1000, AcquisitionKind::Greedy, 5);
    c.init_fraction = 0.01;
    let ctx = CampaignContext::from_config(&c).unwrap();
    let a = Campaign::init(c.clone(), ctx.clone()).unwrap();
    let b = Campaign::init(c.clone(), ctx.clone()).unwrap();
    assert_eq!(a.state().screened.len(), 10);
    assert_eq!(a.state().screened, b.state().screened);
    c.seed = 6;
    let d = Campaign::init(c, ctx).unwrap();
    assert_ne!(a.state().screened, d.state().screened);
}

#[test]
fn screening_everything_at_init_gives_zero_regret() {
    let mut c = small(50, AcquisitionKind::Greedy, 1);
    c.init_fraction = 1.0;
    c.n_iterations = 0;
    let camp = open(c);
    assert!(camp.is_done());
    let m = &camp.metric_trace()[0];
    assert_eq!(m.n_screened, 50);
    assert_eq!(m.regret, Some(0.0));
    assert_eq!(m.top_k_accuracy, vec![Some(1.0), Some(1.0)]);
}

fn toy_library() -> Library {
    let rows = [
        ("a", "CCO", -7.0, 46.0),
        ("b", "CCN", -6.0, 45.0),
        ("c", "CCC", -5.0, 44.0),
    ];
    Library::new(
        rows.iter()
            .map(|&(id, s, aff, mw)| {
                let props = BTreeMap::from([
                    ("affinity".to_string(), aff),
                    ("mw".to_string(), mw),
                    ("logp".to_string(), 1.0),
                    ("rotatable_bonds".to_string(), 0.0),
                ]);
                Ligand::from_smiles(id, s, props, FingerprintParams::default()).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

fn context_for(c: &CampaignConfig, library: Library, oracle: Arc<dyn AffinityOracle>) -> CampaignContext {
    let expert = simulated_expert(c, &library).unwrap();
    let names = c.objective_names();
    let truth = prefscreen_core::oracles::ground_truth_utilities(&expert, &library, &names).unwrap();
    CampaignContext {
        library: Arc::new(library),
        oracle,
        expert: Some(expert),
        truth: Some(Arc::new(truth)),
    }
}

#[test]
fn toy_batch_of_one_moves_one_ligand() {
    let mut c = small(3, AcquisitionKind::Greedy, 0);
    c.init_fraction = 0.5;
    c.batch_fraction = 0.3;
    c.n_iterations = 1;
    c.accuracy_k = vec![1];
    let ctx = context_for(
        &c,
        toy_library(),
        Arc::new(PropertyOracle {
            property: "affinity".into(),
        }),
    );
    let mut camp = Campaign::init(c, ctx).unwrap();
    assert_eq!(camp.state().screened.len(), 2);
    camp.run_iteration().unwrap();
    assert_eq!(camp.state().screened.len(), 3);
    assert_eq!(camp.state().unscreened(), Vec::<usize>::new());
    assert!(camp.is_done());
    assert_eq!(camp.metric_trace().last().unwrap().regret, Some(0.0));
}

fn check_invariants(c: &CampaignConfig, camp: &Campaign) {
    let n = camp.state().library_size;
    let trace = camp.metric_trace();
    assert_eq!(trace.len(), camp.state().iteration as usize + 1);
    let ids: HashSet<usize> = camp.state().screened.iter().map(|e| e.index).collect();
    assert_eq!(ids.len(), camp.state().screened.len(), "a ligand was measured twice");
    let mut expected = fraction_count(c.init_fraction, n);
    assert_eq!(trace[0].n_screened, expected);
    for (i, m) in trace.iter().enumerate().skip(1) {
        expected = (expected + fraction_count(c.batch_fraction, n)).min(n);
        assert_eq!(m.n_screened, expected, "budget after iteration {i}");
    }
    for w in trace.windows(2) {
        assert!(w[1].regret.unwrap() <= w[0].regret.unwrap());
        for (a, b) in w[0].top_k_accuracy.iter().zip(&w[1].top_k_accuracy) {
            assert!(b.unwrap() >= a.unwrap());
        }
    }
    for m in trace {
        assert!(m.regret.unwrap() >= 0.0);
        assert!(m.top_k_accuracy.iter().all(|a| (0.0..=1.0).contains(&a.unwrap())));
    }
    let t = &camp.state().transitions;
    for (k, tr) in t.iter().enumerate() {
        assert_eq!(tr.seq, k as u64);
        assert!(tr.from.allows(tr.to));
    }
    assert_eq!(t.last().unwrap().to, Status::Done);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10, ..ProptestConfig::default() })]

    #[test]
    fn campaign_invariants_hold(seed in 0u64..1000, k in 0usize..AcquisitionKind::ALL.len()) {
        let kind = AcquisitionKind::ALL[k];
        let c = small(150, kind, seed);
        let mut camp = open(c.clone());
        camp.run().unwrap();
        check_invariants(&c, &camp);
    }
}

#[test]
fn every_kind_runs_to_completion() {
    for kind in AcquisitionKind::ALL {
        let c = small(120, kind, 11);
        let mut camp = open(c.clone());
        camp.run().unwrap();
        check_invariants(&c, &camp);
    }
}

#[test]
fn identical_seeds_give_identical_traces() {
    for kind in [
        AcquisitionKind::EpsilonGreedy,
        AcquisitionKind::QTs,
        AcquisitionKind::QEi,
    ] {
        let c = small(200, kind, 42);
        let mut a = open(c.clone());
        let mut b = open(c);
        a.run().unwrap();
        b.run().unwrap();
        assert_eq!(a.state(), b.state());
    }
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(200, AcquisitionKind::QUcb, 9);
    let mut full = open(c.clone());
    full.run().unwrap();

    let ctx = CampaignContext::from_config(&c).unwrap();
    let mut part = Campaign::init(c, ctx.clone()).unwrap();
    for _ in 0..3 {
        part.run_iteration().unwrap();
    }
    let path = dir.path().join("cp.json");
    part.save(&path).unwrap();
    drop(part);
    let mut resumed = Campaign::restore(load_checkpoint(&path).unwrap(), ctx).unwrap();
    resumed.run_iteration().unwrap();
    resumed.run_iteration().unwrap();
    assert!(resumed.is_done());
    assert_eq!(resumed.metric_trace(), full.metric_trace());
    assert_eq!(resumed.state(), full.state());
}

#[test]
fn resume_inside_a_labeling_round_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(200, AcquisitionKind::Greedy, 4);
    c.expert.label_noise = 0.2;
    let mut full = open(c.clone());
    full.run().unwrap();

    let ctx = CampaignContext::from_config(&c).unwrap();
    let mut part = Campaign::init(c, ctx.clone()).unwrap();
    part.run_iteration().unwrap();
    part.begin_iteration().unwrap();
    // Answer the first few pairs exactly as the expert did in the full run.
    let done = part.state().preference_data.len();
    for r in &full.state().preference_data[done..done + 6] {
        let card = part.next_pair().unwrap().unwrap();
        assert_eq!(card.pair_id, r.pair_id);
        let left_wins = card.left.id == r.winner_id;
        part.submit_label(&r.pair_id, left_wins, r.annotator.clone(), Some(r.timestamp_ms))
            .unwrap();
    }
    let path = dir.path().join("cp.json");
    part.save(&path).unwrap();
    drop(part);
    let mut resumed = Campaign::restore(load_checkpoint(&path).unwrap(), ctx).unwrap();
    assert_eq!(resumed.status(), Status::AwaitingLabels);
    resumed.run().unwrap();
    assert_eq!(resumed.state(), full.state());
}

#[test]
fn checkpoint_roundtrip_and_damage() {
    let dir = tempfile::tempdir().unwrap();
    let mut camp = open(small(120, AcquisitionKind::QEubo, 2));
    camp.run_iteration().unwrap();
    camp.begin_iteration().unwrap();
    let path = dir.path().join("cp.json");
    camp.save(&path).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap(), camp.checkpoint());

    let text = std::fs::read_to_string(&path).unwrap();
    let damaged = text.replacen("\"iteration\":1", "\"iteration\":2", 1);
    assert_ne!(damaged, text);
    assert!(matches!(decode_checkpoint(&damaged), Err(Error::Integrity(_))));
    assert!(matches!(
        decode_checkpoint(&text[..text.len() / 2]),
        Err(Error::Integrity(_))
    ));

    let other = text.replacen("\"format_version\":1", "\"format_version\":7", 1);
    match decode_checkpoint(&other) {
        Err(Error::Migration { found, expected }) => assert_eq!((found, expected), (7, 1)),
        r => panic!("{r:?}"),
    }
}

struct Flaky;

impl AffinityOracle for Flaky {
    fn measure(&self, ligand: &Ligand) -> prefscreen_core::Result<f64> {
        if ligand.id.ends_with('3') {
            Err(Error::Oracle {
                id: ligand.id.clone(),
                reason: "docking failed".into(),
            })
        } else {
            Ok(ligand.properties["affinity"])
        }
    }
}

#[test]
fn failed_measurements_spend_budget_but_are_excluded() {
    let c = small(200, AcquisitionKind::Greedy, 4);
    let mut ctx = CampaignContext::from_config(&c).unwrap();
    ctx.oracle = Arc::new(Flaky);
    let mut camp = Campaign::init(c.clone(), ctx).unwrap();
    camp.run().unwrap();
    check_invariants(&c, &camp);
    let failed: HashSet<&str> = camp
        .state()
        .screened
        .iter()
        .filter(|e| e.affinity.is_none())
        .map(|e| e.id.as_str())
        .collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|id| id.ends_with('3')));
    assert_eq!(camp.metric_trace().last().unwrap().n_failed, failed.len());
    for r in &camp.state().preference_data {
        assert!(!failed.contains(r.winner_id.as_str()) && !failed.contains(r.loser_id.as_str()));
    }
}

fn live(n: usize) -> CampaignConfig {
    let mut c = small(n, AcquisitionKind::Greedy, 8);
    c.expert_mode = ExpertMode::Live;
    c.ground_truth = GroundTruthSource::None;
    c.pairs_per_iteration = 6;
    c
}

#[test]
fn live_labeling_protocol() {
    let mut camp = open(live(150));
    assert_eq!(camp.status(), Status::Initializing);
    assert!(matches!(camp.next_pair(), Err(Error::State(_))));
    camp.begin_iteration().unwrap();
    assert_eq!(camp.status(), Status::AwaitingLabels);
    assert_eq!(camp.state().pending_pairs(), 6);
    assert!(matches!(camp.run_iteration(), Err(Error::State(_))));

    let card = camp.next_pair().unwrap().unwrap();
    assert_ne!(card.left.id, card.right.id);
    assert_eq!(card.left.properties.len(), 4);
    // Served again until labeled.
    assert_eq!(camp.next_pair().unwrap().unwrap(), card);
    let ack = camp
        .submit_label(&card.pair_id, true, Some("ana".into()), Some(5))
        .unwrap();
    assert_eq!((ack.completed_pairs, ack.pending_pairs), (1, 5));
    let before = camp.state().clone();
    assert!(matches!(
        camp.submit_label(&card.pair_id, false, None, None),
        Err(Error::AlreadyLabeled(_))
    ));
    assert!(matches!(
        camp.submit_label("nope", true, None, None),
        Err(Error::UnknownPair(_))
    ));
    assert_eq!(camp.state(), &before);
    assert!(matches!(camp.acquire(), Err(Error::State(_))));

    let rec = &camp.state().preference_data[0];
    assert_eq!(rec.winner_id, card.left.id);
    assert_eq!(rec.annotator.as_deref(), Some("ana"));

    while let Some(p) = camp.next_pair().unwrap() {
        camp.submit_label(&p.pair_id, false, None, None).unwrap();
    }
    camp.acquire().unwrap();
    assert_eq!(camp.status(), Status::Measuring);
    let m = camp.metric_trace().last().unwrap();
    assert_eq!(m.regret, None);
    assert_eq!(m.top_k_accuracy, vec![None, None]);
    let rows = camp.metric_rows();
    assert_eq!(rows.len(), 2);
    assert!(rows[1]["regret"].is_null());
}

#[test]
fn finished_campaign_rejects_labels() {
    let mut c = live(100);
    c.n_iterations = 1;
    let mut camp = open(c);
    camp.begin_iteration().unwrap();
    let id = camp.next_pair().unwrap().unwrap().pair_id;
    while let Some(p) = camp.next_pair().unwrap() {
        camp.submit_label(&p.pair_id, true, None, None).unwrap();
    }
    camp.acquire().unwrap();
    assert!(camp.is_done());
    assert!(matches!(camp.submit_label(&id, true, None, None), Err(Error::Finished)));
    assert!(matches!(camp.next_pair(), Err(Error::Finished)));
}

#[test]
fn suspension_blocks_progress() {
    let mut camp = open(live(100));
    camp.begin_iteration().unwrap();
    camp.suspend().unwrap();
    assert_eq!(camp.status(), Status::Suspended);
    let id = camp.state().pairs[0].pair_id.clone();
    assert!(matches!(camp.submit_label(&id, true, None, None), Err(Error::State(_))));
    camp.resume().unwrap();
    assert_eq!(camp.status(), Status::AwaitingLabels);
    camp.submit_label(&id, true, None, None).unwrap();
}

#[test]
fn restart_replays_logged_labels() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = live(150);
    c.output_dir = Some(dir.path().to_path_buf());
    c.resume = Some(dir.path().join(CHECKPOINT_FILE));
    let mut camp = Campaign::open(c.clone()).unwrap();
    camp.begin_iteration().unwrap();
    for _ in 0..4 {
        let p = camp.next_pair().unwrap().unwrap();
        camp.submit_label(&p.pair_id, true, None, None).unwrap();
    }
    let expected = camp.state().clone();
    drop(camp);

    let mut back = Campaign::open(c.clone()).unwrap();
    assert_eq!(back.state(), &expected);
    assert_eq!(back.state().completed_pairs(), 4);
    let log = prefscreen_core::preference::read_preference_log(dir.path().join(PREFERENCES_FILE)).unwrap();
    assert_eq!(log, back.state().preference_data);

    while let Some(p) = back.next_pair().unwrap() {
        back.submit_label(&p.pair_id, false, None, None).unwrap();
    }
    back.acquire().unwrap();
    let metrics = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(metrics.lines().count(), 3);
    assert!(metrics.starts_with("iteration,n_screened,n_failed,regret,best_utility,accuracy@5,accuracy@20\n"));
    let screened = std::fs::read_to_string(dir.path().join(SCREENED_FILE)).unwrap();
    assert_eq!(screened.lines().count(), back.state().screened.len() + 1);

    // A fresh campaign refuses to overwrite.
    let mut fresh = c;
    fresh.resume = None;
    assert!(matches!(Campaign::open(fresh), Err(Error::State(_))));
}

#[test]
fn property_ranges_cover_library() {
    let camp = open(small(100, AcquisitionKind::Greedy, 0));
    let r = camp.property_ranges();
    assert_eq!(r.len(), 4);
    assert_eq!(r[0].name, "affinity");
    assert_eq!(r[0].orientation, Orientation::Minimize);
    for l in camp.library().ligands() {
        for p in &r {
            let v = l.properties[&p.name];
            assert!(p.min <= v && v <= p.max);
        }
    }
}
