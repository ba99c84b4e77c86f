use std::fs;
use std::time::Instant;

use plsa_vw::corpus::{generate_synthetic, load_dataset, DatasetFormat, SyntheticSpec};
use plsa_vw::imagination::{imagine_pipeline, ImaginationConfig};
use plsa_vw::metrics::{evaluate, ground_truth_sets, AnnotationRun};
use plsa_vw::pipeline::{
    cmd_compare, cmd_pipeline, cmd_synth, synthetic_split, ImaginationMode, RunConfig,
    TestImagination,
};
use plsa_vw::plsa::{annotate, fold_in_documents, fold_in_features, train_plsa, EmOptions};
use plsa_vw::Error;

fn spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_docs: 40,
        n_words: 15,
        n_blobs: 20,
        n_topics_true: 3,
        words_per_doc: 3,
        blobs_per_doc: 6,
        drop_rate: 0.4,
        concentration: 0.3,
        seed,
    }
}

fn cfg(mode: ImaginationMode) -> RunConfig {
    RunConfig {
        topics: 3,
        mode,
        em: EmOptions {
            max_iters: 100,
            rel_tol: 1e-7,
            seed: 4,
        },
        ..RunConfig::default()
    }
}

#[test]
fn defaults_match_published_protocol() {
    let c = RunConfig::default();
    assert_eq!(c.topics, 120);
    assert_eq!(c.tau, 0.01);
    assert_eq!(c.annotate_k, 5);
    assert_eq!(c.retrieval_m, 20);
    assert_eq!(c.mode, ImaginationMode::Threshold);
    assert!(c.mask_annotated);
}

#[test]
fn mode_off_equals_manual_composition() {
    let (train, test) = synthetic_split(&spec(1), 10).unwrap();
    let c = cfg(ImaginationMode::Off);
    let out = cmd_pipeline(&c, &train, &test).unwrap();

    let (model, _) = train_plsa(&train.words, c.topics, &c.em).unwrap();
    let (model, _) = fold_in_features(&model, &train.blobs, &c.em).unwrap();
    let folded = fold_in_documents(&model, &test.blobs, &c.em).unwrap();
    let scores = annotate(&model, &folded.mixtures).unwrap();
    let run =
        AnnotationRun::from_scores(scores, ground_truth_sets(&test.words), c.annotate_k).unwrap();
    let report = evaluate(&run, c.retrieval_m).unwrap();

    assert_eq!(out.report, report);
    assert_eq!(out.model, model);
    assert!(out.word_sim.is_none() && out.blob_sim.is_none());
}

#[test]
fn imagination_on_trains_on_augmented_matrices() {
    let (train, test) = synthetic_split(&spec(2), 10).unwrap();
    let c = cfg(ImaginationMode::Threshold);
    let out = cmd_pipeline(&c, &train, &test).unwrap();
    let im = imagine_pipeline(&train, &c.imagination().unwrap()).unwrap();
    let (model, _) = train_plsa(&im.words_aug, c.topics, &c.em).unwrap();
    assert_eq!(out.model.word_given_topic, model.word_given_topic);
    assert_eq!(out.blob_sim.as_ref(), Some(&im.blob_sim));
}

#[test]
fn maximal_threshold_reproduces_baseline() {
    let (train, test) = synthetic_split(&spec(3), 10).unwrap();
    let off = cmd_pipeline(&cfg(ImaginationMode::Off), &train, &test).unwrap();
    let on = RunConfig {
        tau: 1.0,
        test_imagination: TestImagination::SameAsTraining,
        ..cfg(ImaginationMode::Threshold)
    };
    let out = cmd_pipeline(&on, &train, &test).unwrap();
    assert_eq!(out.report, off.report);
    assert_eq!(out.model, off.model);
}

#[test]
fn compare_with_one_seed_equals_individual_runs() {
    let (train, test) = synthetic_split(&spec(4), 10).unwrap();
    let c = cfg(ImaginationMode::Threshold).with_seed(7);
    let cmp = cmd_compare(&c, &train, &test, &[7]).unwrap();
    let words = cmd_pipeline(&c.with_mode(ImaginationMode::Off), &train, &test).unwrap();
    let vw = cmd_pipeline(&c, &train, &test).unwrap();
    assert_eq!(cmp.plsa_words, vec![words.report.clone()]);
    assert_eq!(cmp.plsa_vw, vec![vw.report.clone()]);

    let (vw_sum, words_sum) = cmp.summaries();
    assert_eq!(vw_sum.ap.mean, vw.report.ap);
    assert_eq!(words_sum.map.mean, words.report.map);
    assert_eq!(vw_sum.ap.variance, 0.0);
    let table = cmp.table();
    assert!(table.contains("PLSA-vw") && table.contains("PLSA-words"));
    assert!(table.contains(&format!("{:.2}", vw.report.ap)));
}

#[test]
fn compare_requires_a_seed() {
    let (train, test) = synthetic_split(&spec(4), 10).unwrap();
    assert!(matches!(
        cmd_compare(&cfg(ImaginationMode::Off), &train, &test, &[]),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn errors_name_the_failing_stage() {
    let (train, test) = synthetic_split(&spec(5), 10).unwrap();
    let bad = RunConfig {
        topics: 0,
        ..cfg(ImaginationMode::Off)
    };
    match cmd_pipeline(&bad, &train, &test) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "train"),
        other => panic!("expected a stage error, got {other:?}"),
    }

    let other = synthetic_split(
        &SyntheticSpec {
            n_words: 16,
            ..spec(5)
        },
        10,
    )
    .unwrap()
    .1;
    match cmd_pipeline(&cfg(ImaginationMode::Off), &train, &other) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "input"),
        other => panic!("expected a stage error, got {other:?}"),
    }

    let bad_tau = RunConfig {
        tau: 1.5,
        ..cfg(ImaginationMode::Threshold)
    };
    let err = cmd_pipeline(&bad_tau, &train, &test).unwrap_err();
    assert!(
        matches!(
            err,
            Error::Stage {
                stage: "imagine",
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn pipeline_persists_artifacts() {
    let (train, test) = synthetic_split(&spec(6), 10).unwrap();
    let out = cmd_pipeline(&cfg(ImaginationMode::Threshold), &train, &test).unwrap();
    let dir = tempfile::tempdir().unwrap();
    out.write_to(dir.path()).unwrap();
    for f in ["model.txt", "report.txt", "word_sim.txt", "blob_sim.txt"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert_eq!(report, out.report_text());
    for field in ["ap ", "map ", "rp ", "rsi ", "[per_keyword]", "[coverage]"] {
        assert!(report.contains(field), "report lacks {field:?}");
    }
    let model = plsa_vw::plsa::PlsaModel::load(dir.path().join("model.txt")).unwrap();
    assert_eq!(model, out.model);
}

#[test]
fn synth_is_deterministic_and_fast() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let small = SyntheticSpec {
        n_docs: 30,
        ..SyntheticSpec::default()
    };
    let start = Instant::now();
    cmd_synth(&small, p("t1"), p("o1")).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    cmd_synth(&small, p("t2"), p("o2")).unwrap();
    assert_eq!(fs::read(p("t1")).unwrap(), fs::read(p("t2")).unwrap());
    assert_eq!(fs::read(p("o1")).unwrap(), fs::read(p("o2")).unwrap());

    let corpus = generate_synthetic(&small).unwrap();
    let truth = load_dataset(p("t1"), DatasetFormat::Native).unwrap();
    assert_eq!(truth, corpus.full_truth);

    let no_drop = SyntheticSpec {
        drop_rate: 0.0,
        ..small
    };
    cmd_synth(&no_drop, p("t3"), p("o3")).unwrap();
    assert_eq!(fs::read(p("t3")).unwrap(), fs::read(p("o3")).unwrap());
}

#[test]
fn top_k_imagination_runs_end_to_end() {
    let (train, test) = synthetic_split(&spec(8), 10).unwrap();
    let out = cmd_pipeline(&cfg(ImaginationMode::TopK), &train, &test).unwrap();
    assert!(out.run.predicted.iter().all(|p| p.len() == 5));
    assert_eq!(
        cfg(ImaginationMode::TopK).imagination(),
        Some(ImaginationConfig::top_k(5))
    );
}
