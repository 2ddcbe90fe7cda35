use dialoggate::experiment::planted::{planted_corpus, Level};
use dialoggate::experiment::{
    emit_sweep, proportion_2dp, run_context_sweep, run_dataset, ExperimentConfig, ExperimentError, ReportFormat,
    SpecFactory,
};

fn config(name: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(name);
    c.max_turns = 4;
    c
}

fn cells3(r: &dialoggate::experiment::ExperimentReport) -> [String; 3] {
    [
        proportion_2dp(r.incomplete, r.total),
        proportion_2dp(r.ambiguous, r.total),
        proportion_2dp(r.single_turn_correct, r.total),
    ]
}

#[test]
fn sharc_shaped_sweep() {
    let levels = [Level::new(28, 61, 11), Level::new(2, 38, 60), Level::new(1, 16, 83)];
    let corpus = planted_corpus("ShARC", 100, &levels).unwrap();
    let factory = SpecFactory::scripted(corpus.responder.clone(), corpus.clarifier.clone());
    let cfg = config("ShARC");
    let base = run_dataset(&corpus.records, &cfg, &factory).unwrap();
    let table = run_context_sweep(&corpus.records, &base, &cfg, &factory, 3).unwrap();
    let got: Vec<[String; 3]> = table.rows.iter().map(|r| cells3(&r.report)).collect();
    assert_eq!(
        got,
        [
            ["0.28", "0.61", "0.11"],
            ["0.02", "0.38", "0.60"],
            ["0.01", "0.16", "0.83"],
        ]
    );
    assert_eq!(table.row(1), Some(&base.report));
    let text = emit_sweep(&table, ReportFormat::Text);
    assert!(text.contains("ShARC         1 0.28 0.61 0.11"), "{text}");
}

#[test]
fn unresolved_records_are_counted_in_d_only() {
    let corpus = planted_corpus("mixed", 10, &[Level::new(2, 3, 4)]).unwrap();
    let factory = SpecFactory::scripted(corpus.responder.clone(), corpus.clarifier.clone());
    let r = run_dataset(&corpus.records, &config("mixed"), &factory).unwrap().report;
    assert_eq!((r.incomplete, r.ambiguous, r.single_turn_correct, r.unresolved, r.total), (2, 3, 4, 1, 10));
    // later levels resolve everything at turn two
    assert_eq!(r.correct_at_k[0].count, 4);
    assert_eq!(r.correct_at_k[1].count, 10);
}

#[test]
fn empty_dataset() {
    let corpus = planted_corpus("x", 1, &[Level::new(0, 0, 1)]).unwrap();
    let factory = SpecFactory::scripted(corpus.responder, corpus.clarifier);
    let err = run_dataset(&[], &config("x"), &factory).unwrap_err();
    assert_eq!(err, ExperimentError::EmptyDataset);
    assert_eq!(err.to_string(), "empty dataset");
}

mod common;

use common::{base_config, plant, table1_size, TABLE1, TABLE2};

#[test]
fn table_one_cells() {
    for (name, row) in TABLE1 {
        let n = table1_size(name);
        let corpus = planted_corpus(name, n, &[plant(&row, n)]).unwrap();
        let factory = SpecFactory::scripted(corpus.responder.clone(), corpus.clarifier.clone());
        let report = run_dataset(&corpus.records, &base_config(name), &factory).unwrap().report;
        assert_eq!(common::cells(&report), row.map(String::from), "{name}");
        assert_eq!(report.total, n);
    }
}

#[test]
fn table_two_rows() {
    for (name, rows) in TABLE2 {
        let levels: Vec<Level> = rows.iter().map(|r| plant(r, 100)).collect();
        let corpus = planted_corpus(name, 100, &levels).unwrap();
        let factory = SpecFactory::scripted(corpus.responder.clone(), corpus.clarifier.clone());
        let cfg = base_config(name);
        let base = run_dataset(&corpus.records, &cfg, &factory).unwrap();
        let table = run_context_sweep(&corpus.records, &base, &cfg, &factory, 3).unwrap();
        let got: Vec<[String; 3]> = table.rows.iter().map(|r| common::cells(&r.report)).collect();
        assert_eq!(got, rows.map(|r| r.map(String::from)), "{name}");
        assert_eq!(table.row(1), Some(&base.report), "{name}");
        let flagged: Vec<usize> = table.rows.iter().map(|r| r.report.incomplete + r.report.ambiguous).collect();
        assert!(flagged.windows(2).all(|w| w[1] <= w[0]), "{name}: {flagged:?}");
    }
}
