//! Transition smoothing of predicted label sequences.
//!
//! A pass visits every day whose left neighbour and two right neighbours
//! exist (0-based `1..=T-3`; the first day and the last two are never
//! touched) and rewrites it by the first matching rule:
//!
//! 1. neighborhood consistency: `y[t-1] == y[t+1]` gives `y[t-1]`;
//! 2. two-day consistency: `y[t] == y[t+1]` and `y[t-1] == y[t+2]` gives
//!    `y[t-1]`;
//! 3. transition membership: `y[t] != y[t+1]` and `y[t-1] != y[t+1]` gives
//!    `membership(p[t-1], p[t+1])`;
//! 4. otherwise `membership(p[t-1], p[t+2])`.
//!
//! The left label is read from the sequence being rewritten, the right
//! labels from the sequence as it was before the pass. Probability rows are
//! always the classifier's own.

use super::series::{argmax_row, argmax_series, PredSeries, ProbRow, ProbSeries};
use crate::datamodel::ClassId;

/// Which rule decided a day during a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingCase {
    Neighborhood,
    TwoDay,
    TransitionMembership,
    Else,
}

/// Per-rule change counts accumulated over all passes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SmoothingReport {
    pub neighborhood: usize,
    pub two_day: usize,
    pub transition_membership: usize,
    pub else_branch: usize,
    pub passes_run: usize,
    pub converged: bool,
    /// Set when the series was too short (< 4 days) to smooth.
    pub skipped: bool,
}

impl SmoothingReport {
    pub fn total_changes(&self) -> usize {
        self.neighborhood + self.two_day + self.transition_membership + self.else_branch
    }

    fn record(&mut self, case: SmoothingCase) {
        match case {
            SmoothingCase::Neighborhood => self.neighborhood += 1,
            SmoothingCase::TwoDay => self.two_day += 1,
            SmoothingCase::TransitionMembership => self.transition_membership += 1,
            SmoothingCase::Else => self.else_branch += 1,
        }
    }

    fn absorb(&mut self, other: &SmoothingReport) {
        self.neighborhood += other.neighborhood;
        self.two_day += other.two_day;
        self.transition_membership += other.transition_membership;
        self.else_branch += other.else_branch;
    }

    /// `key=value` lines, as written by the `smooth` command.
    pub fn to_text(&self) -> String {
        format!(
            "neighborhood={}\ntwo_day={}\ntransition_membership={}\nelse={}\npasses={}\nconverged={}\nskipped={}\n",
            self.neighborhood,
            self.two_day,
            self.transition_membership,
            self.else_branch,
            self.passes_run,
            self.converged,
            self.skipped
        )
    }
}

/// Class of whichever row is more confident; ties favour `earlier`.
pub fn membership(earlier: &ProbRow, later: &ProbRow) -> ClassId {
    ClassId::from_index(argmax_row(&pick(earlier, later))).expect("7 columns")
}

fn decide(
    left: ClassId,
    here: ClassId,
    right1: ClassId,
    right2: ClassId,
    p_left: &ProbRow,
    p_right1: &ProbRow,
    p_right2: &ProbRow,
) -> (ClassId, SmoothingCase) {
    if left == right1 {
        (left, SmoothingCase::Neighborhood)
    } else if here == right1 && left == right2 {
        (left, SmoothingCase::TwoDay)
    } else if here != right1 {
        // left != right1 already holds here
        (
            membership(p_left, p_right1),
            SmoothingCase::TransitionMembership,
        )
    } else {
        (membership(p_left, p_right2), SmoothingCase::Else)
    }
}

/// One left-to-right smoothing sweep.
pub fn transition_smooth_pass(
    pred: &PredSeries,
    probs: &ProbSeries,
) -> (PredSeries, SmoothingReport) {
    assert_eq!(
        pred.len(),
        probs.len(),
        "prediction and probability series must align"
    );
    let (labels, report) = sweep(&pred.labels, probs.rows());
    (
        PredSeries {
            start_date: pred.start_date,
            labels,
        },
        report,
    )
}

fn sweep(before: &[ClassId], rows: &[ProbRow]) -> (Vec<ClassId>, SmoothingReport) {
    let n = before.len();
    let mut report = SmoothingReport {
        passes_run: 1,
        ..Default::default()
    };
    if n < 4 {
        report.skipped = true;
        report.converged = true;
        report.passes_run = 0;
        return (before.to_vec(), report);
    }
    let mut out = before.to_vec();
    for t in 1..=n - 3 {
        let (class, case) = decide(
            out[t - 1],
            before[t],
            before[t + 1],
            before[t + 2],
            &rows[t - 1],
            &rows[t + 1],
            &rows[t + 2],
        );
        if class != before[t] {
            report.record(case);
        }
        out[t] = class;
    }
    report.converged = report.total_changes() == 0;
    (out, report)
}

fn pick(earlier: &ProbRow, later: &ProbRow) -> ProbRow {
    let top = |r: &ProbRow| r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top(later) > top(earlier) {
        *later
    } else {
        *earlier
    }
}

/// Argmax followed by [`transition_smooth_pass`] repeated until a pass
/// changes nothing, or `T` passes have run.
///
/// Convergence is not guaranteed: with the probability rows held fixed the
/// rules can cycle, for instance a boundary moved forward by the else rule
/// and back by transition membership on alternate passes. `converged`
/// reports whether a fixpoint was reached.
pub fn transition_smooth(probs: &ProbSeries) -> (PredSeries, SmoothingReport) {
    transition_smooth_bounded(probs, probs.len())
}

/// As [`transition_smooth`], running at most `max_passes` passes (capped at
/// `T`). `max_passes = 1` is a single sweep.
pub fn transition_smooth_bounded(
    probs: &ProbSeries,
    max_passes: usize,
) -> (PredSeries, SmoothingReport) {
    let pred = argmax_series(probs);
    let n = pred.len();
    let mut total = SmoothingReport::default();
    if n < 4 {
        total.skipped = true;
        total.converged = true;
        return (pred, total);
    }
    let mut labels = pred.labels;
    while total.passes_run < max_passes.min(n) {
        let (next, r) = sweep(&labels, probs.rows());
        total.passes_run += 1;
        total.absorb(&r);
        labels = next;
        if r.converged {
            total.converged = true;
            break;
        }
    }
    (
        PredSeries {
            start_date: pred.start_date,
            labels,
        },
        total,
    )
}
