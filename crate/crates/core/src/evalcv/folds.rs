//! Year-grouped outer and inner fold assignment.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub n_outer: usize,
    pub n_inner: usize,
    pub seed: u64,
    /// Year → outer fold.
    pub outer: BTreeMap<i32, usize>,
    /// Per outer fold: each remaining year → inner fold.
    pub inner: Vec<BTreeMap<i32, usize>>,
}

fn assign(years: &[i32], folds: usize, seed: u64, tag: &str, stream: u64) -> BTreeMap<i32, usize> {
    let mut order = years.to_vec();
    order.sort_unstable();
    order.shuffle(&mut seeds::rng(seed, tag, stream));
    order
        .into_iter()
        .enumerate()
        .map(|(i, y)| (y, i % folds))
        .collect()
}

/// Randomly assign whole years to `n_outer` near-equal folds, then split the
/// years outside each outer fold into `n_inner` near-equal inner folds.
pub fn plan_folds(
    years: &BTreeSet<i32>,
    n_outer: usize,
    n_inner: usize,
    seed: u64,
) -> Result<FoldPlan> {
    if n_outer < 2 || n_inner < 2 {
        return Err(Error::invalid("need at least 2 outer and 2 inner folds"));
    }
    if years.len() < n_outer {
        return Err(Error::invalid(format!(
            "{} years cannot fill {n_outer} outer folds",
            years.len()
        )));
    }
    let all: Vec<i32> = years.iter().copied().collect();
    let outer = assign(&all, n_outer, seed, "outer-folds", 0);
    let mut inner = Vec::with_capacity(n_outer);
    for f in 0..n_outer {
        let rest: Vec<i32> = all.iter().copied().filter(|y| outer[y] != f).collect();
        if rest.len() < n_inner {
            return Err(Error::invalid(format!(
                "outer fold {f} leaves {} years for {n_inner} inner folds",
                rest.len()
            )));
        }
        inner.push(assign(&rest, n_inner, seed, "inner-folds", f as u64));
    }
    Ok(FoldPlan {
        n_outer,
        n_inner,
        seed,
        outer,
        inner,
    })
}

pub fn years_of(dates: impl Iterator<Item = NaiveDate>) -> BTreeSet<i32> {
    dates.map(|d| d.year()).collect()
}

/// Day indices playing each role for one outer fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldRoles {
    pub outer: usize,
    pub test: Vec<usize>,
    /// All days outside the test years.
    pub train: Vec<usize>,
    /// Per inner fold: positions into `train` of that fold's days.
    pub inner: Vec<Vec<usize>>,
}

impl FoldRoles {
    /// Positions into `train` outside inner fold `k`.
    pub fn inner_train(&self, k: usize) -> Vec<usize> {
        let held: BTreeSet<usize> = self.inner[k].iter().copied().collect();
        (0..self.train.len())
            .filter(|p| !held.contains(p))
            .collect()
    }
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_outer];
        for f in self.outer.values() {
            sizes[*f] += 1;
        }
        sizes
    }

    pub fn test_years(&self, outer: usize) -> BTreeSet<i32> {
        self.outer
            .iter()
            .filter(|(_, f)| **f == outer)
            .map(|(y, _)| *y)
            .collect()
    }

    /// Split day indices (given by their dates) into the roles of `outer`.
    pub fn roles(&self, dates: &[NaiveDate], outer: usize) -> Result<FoldRoles> {
        if outer >= self.n_outer {
            return Err(Error::invalid(format!("outer fold {outer} out of range")));
        }
        let mut roles = FoldRoles {
            outer,
            test: Vec::new(),
            train: Vec::new(),
            inner: vec![Vec::new(); self.n_inner],
        };
        for (i, d) in dates.iter().enumerate() {
            let year = d.year();
            let f = *self
                .outer
                .get(&year)
                .ok_or_else(|| Error::invalid(format!("year {year} missing from the fold plan")))?;
            if f == outer {
                roles.test.push(i);
            } else {
                roles.inner[self.inner[outer][&year]].push(roles.train.len());
                roles.train.push(i);
            }
        }
        Ok(roles)
    }
}
