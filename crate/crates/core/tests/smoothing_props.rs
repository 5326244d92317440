//! Properties of the transition-smoothing operator on random inputs.

use chrono::NaiveDate;
use gwl_core::datamodel::ClassId;
use gwl_core::smoothing::{
    argmax_series, transition_smooth, transition_smooth_pass, ProbRow, ProbSeries,
};
use proptest::prelude::*;

fn probs_strategy(max_len: usize) -> impl Strategy<Value = ProbSeries> {
    prop::collection::vec(prop::array::uniform7(0.01f64..1.0), 1..max_len).prop_map(|rows| {
        let rows: Vec<ProbRow> = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.map(|v| v / s)
            })
            .collect();
        ProbSeries::new(NaiveDate::from_ymd_opt(1950, 1, 1).unwrap(), rows).unwrap()
    })
}

/// Sequences built from a few runs, with a little noise on top.
fn runny_strategy() -> impl Strategy<Value = ProbSeries> {
    prop::collection::vec((0usize..7, 1usize..6, 0.3f64..0.95), 2..25).prop_map(|segs| {
        let mut rows = Vec::new();
        for (class, len, top) in segs {
            for _ in 0..len {
                let mut r = [(1.0 - top) / 6.0; 7];
                r[class] = top;
                rows.push(r);
            }
        }
        ProbSeries::new(NaiveDate::from_ymd_opt(1950, 1, 1).unwrap(), rows).unwrap()
    })
}

proptest! {
    #[test]
    fn single_pass_changes_are_local(probs in probs_strategy(60)) {
        let pred = argmax_series(&probs);
        let (out, report) = transition_smooth_pass(&pred, &probs);
        let n = pred.len();
        let mut changed = 0;
        for t in 0..n {
            if out.labels[t] == pred.labels[t] {
                continue;
            }
            changed += 1;
            prop_assert!(t >= 1 && t + 3 <= n);
            let lo = t.saturating_sub(2);
            let hi = (t + 2).min(n - 1);
            let near: Vec<ClassId> = (lo..=hi)
                .flat_map(|u| [pred.labels[u], out.labels[u]])
                .collect();
            prop_assert!(near.contains(&out.labels[t]));
        }
        prop_assert_eq!(changed, report.total_changes());
    }

    #[test]
    fn fixpoint_is_idempotent(probs in runny_strategy()) {
        let (out, report) = transition_smooth(&probs);
        if report.converged && !report.skipped {
            let (again, r) = transition_smooth_pass(&out, &probs);
            prop_assert_eq!(again, out);
            prop_assert_eq!(r.total_changes(), 0);
        }
    }

    #[test]
    fn deterministic(probs in probs_strategy(40)) {
        prop_assert_eq!(transition_smooth(&probs), transition_smooth(&probs));
    }
}

#[test]
fn aba_and_two_day_islands_become_one_run() {
    let row = |c: usize, top: f64| {
        let mut r = [(1.0 - top) / 6.0; 7];
        r[c] = top;
        r
    };
    let start = NaiveDate::from_ymd_opt(1950, 1, 1).unwrap();
    let aba = ProbSeries::new(
        start,
        vec![
            row(0, 0.8),
            row(0, 0.8),
            row(1, 0.6),
            row(0, 0.8),
            row(0, 0.8),
            row(0, 0.8),
        ],
    )
    .unwrap();
    assert_eq!(transition_smooth(&aba).0.labels, vec![ClassId::Bm; 6]);
    let aabbaa = ProbSeries::new(
        start,
        vec![
            row(0, 0.9),
            row(0, 0.9),
            row(1, 0.6),
            row(1, 0.6),
            row(0, 0.9),
            row(0, 0.9),
        ],
    )
    .unwrap();
    let (out, report) = transition_smooth(&aabbaa);
    assert_eq!(out.labels, vec![ClassId::Bm; 6]);
    assert!(report.converged);
}
