use cfrec_core::experiment::{compute_metrics, format_table, read_records, write_records, ExplanationRecord, Summary};
use cfrec_core::{Method, Mode};

fn record(method: Method, mode: Mode, repeat: usize, item: u64, valid: bool, ec: Option<usize>) -> ExplanationRecord {
    ExplanationRecord {
        method,
        repeat,
        user: 1,
        item,
        mode,
        edges: Vec::new(),
        ec,
        valid_surrogate: ec.is_some(),
        valid_blackbox: valid,
        rank_before: 1,
        rank_after: ec.map(|_| 20),
        iterations: 1,
        surrogate_accepted: true,
        error: None,
    }
}

#[test]
fn ps_from_validity_flags() {
    let rs: Vec<_> = [true, true, false, true]
        .iter()
        .enumerate()
        .map(|(n, &v)| record(Method::Grease, Mode::Factual, 0, n as u64, v, Some(1)))
        .collect();
    let report = compute_metrics(&rs, 10);
    let m = report.method(Method::Grease).unwrap();
    assert_eq!(m.ps.unwrap().mean, 0.75);
    assert_eq!(m.ps.unwrap().std, 0.0);
    assert_eq!(m.fa_attempts, 4);
    assert_eq!(m.fa_valid, 3);
    assert!(m.pn.is_none() && m.ec_cf.is_none());
}

#[test]
fn ec_over_valid_explanations_only() {
    let rs = vec![
        record(Method::Random, Mode::Counterfactual, 0, 1, true, Some(3)),
        record(Method::Random, Mode::Counterfactual, 0, 2, true, Some(5)),
        record(Method::Random, Mode::Counterfactual, 0, 3, false, Some(9)),
        record(Method::Random, Mode::Counterfactual, 0, 4, false, None),
    ];
    let m = compute_metrics(&rs, 10).methods[0].clone();
    assert_eq!(m.ec_cf.unwrap().mean, 4.0);
    assert_eq!(m.pn.unwrap().mean, 0.5);
}

#[test]
fn sample_std_over_repeats() {
    let s = Summary::of(&[0.8, 0.9]).unwrap();
    assert!((s.mean - 0.85).abs() < 1e-15);
    assert!((s.std - 0.070_710_678_118_654_75).abs() < 1e-12);
    assert_eq!(format!("{:.4}", s.std), "0.0707");
    assert!(Summary::of(&[]).is_none());

    // 4 of 5 valid in repeat 0, 9 of 10 in repeat 1
    let mut rs = Vec::new();
    for (repeat, total, valid) in [(0, 5, 4), (1, 10, 9)] {
        for n in 0..total {
            rs.push(record(
                Method::Grease,
                Mode::Counterfactual,
                repeat,
                n,
                n < valid,
                Some(2),
            ));
        }
    }
    let pn = compute_metrics(&rs, 10).methods[0].pn.unwrap();
    assert!((pn.mean - 0.85).abs() < 1e-15);
    assert!((pn.std - s.std).abs() < 1e-15);
    assert_eq!(pn.repeats, 2);
}

#[test]
fn rejections_and_pairs_are_counted_per_pair() {
    let mut rejected = record(Method::Grease, Mode::Factual, 0, 7, false, None);
    rejected.surrogate_accepted = false;
    let mut rejected_cf = rejected.clone();
    rejected_cf.mode = Mode::Counterfactual;
    let rs = vec![
        rejected,
        rejected_cf,
        record(Method::Grease, Mode::Factual, 0, 8, true, Some(0)),
    ];
    let m = compute_metrics(&rs, 10).methods[0].clone();
    assert_eq!(m.pairs, 2);
    assert_eq!(m.surrogate_rejections, 1);
    assert_eq!(m.ps.unwrap().mean, 0.5);
    assert_eq!(m.pn.unwrap().mean, 0.0);
    assert!(m.ec_cf.is_none());
    assert_eq!(m.ec_fa.unwrap().mean, 0.0);
}

#[test]
fn metrics_recompute_from_record_stream() {
    let rs = vec![
        record(Method::Grease, Mode::Factual, 0, 1, true, Some(2)),
        record(Method::PersonalRank, Mode::Counterfactual, 1, 2, false, None),
    ];
    let mut buf = Vec::new();
    write_records(&mut buf, &rs).unwrap();
    let back = read_records(buf.as_slice()).unwrap();
    assert_eq!(back, rs);
    assert_eq!(compute_metrics(&back, 10), compute_metrics(&rs, 10));
    let table = format_table(&compute_metrics(&rs, 10));
    assert!(table.contains("grease") && table.contains("personalrank") && !table.contains("random"));
}
