use super::class::ClassId;

/// A maximal block of identical consecutive labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub class: ClassId,
    pub start: usize,
    pub len: usize,
}

impl Run {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Decompose a label sequence into maximal runs.
pub fn runs(labels: &[ClassId]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (i, &c) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(r) if r.class == c => r.len += 1,
            _ => out.push(Run {
                class: c,
                start: i,
                len: 1,
            }),
        }
    }
    out
}

/// True at the first and last index of every maximal run.
pub fn boundary_mask(labels: &[ClassId]) -> Vec<bool> {
    let mut mask = vec![false; labels.len()];
    for r in runs(labels) {
        mask[r.start] = true;
        mask[r.end() - 1] = true;
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ClassId::{Bm as A, Hna as B};

    #[test]
    fn run_examples() {
        assert_eq!(
            runs(&[A, A, A, B, B, B]),
            vec![
                Run {
                    class: A,
                    start: 0,
                    len: 3
                },
                Run {
                    class: B,
                    start: 3,
                    len: 3
                }
            ]
        );
        assert_eq!(
            runs(&[A]),
            vec![Run {
                class: A,
                start: 0,
                len: 1
            }]
        );
        let r = runs(&[A, B, A]);
        assert_eq!(r.len(), 3);
        assert!(r.iter().all(|r| r.len == 1));
        assert!(runs(&[]).is_empty());
    }

    #[test]
    fn mask_examples() {
        assert_eq!(boundary_mask(&[A, A, A, A]), vec![true, false, false, true]);
        assert_eq!(
            boundary_mask(&[A, A, A, B, B, B]),
            vec![true, false, true, true, false, true]
        );
        assert_eq!(boundary_mask(&[A]), vec![true]);
    }

    fn label_seq() -> impl Strategy<Value = Vec<ClassId>> {
        proptest::collection::vec(0usize..3, 1..80).prop_map(|v| {
            v.into_iter()
                .map(|i| ClassId::from_index(i).unwrap())
                .collect()
        })
    }

    proptest! {
        #[test]
        fn runs_tile_and_reassemble(labels in label_seq()) {
            let rs = runs(&labels);
            let mut rebuilt = Vec::new();
            for (k, r) in rs.iter().enumerate() {
                prop_assert!(r.len >= 1);
                if k > 0 {
                    prop_assert_ne!(rs[k - 1].class, r.class);
                    prop_assert_eq!(rs[k - 1].end(), r.start);
                }
                rebuilt.extend(std::iter::repeat_n(r.class, r.len));
            }
            prop_assert_eq!(rebuilt, labels);
        }

        #[test]
        fn mask_count_bounds(labels in label_seq()) {
            let rs = runs(&labels);
            let mask = boundary_mask(&labels);
            let marked = mask.iter().filter(|&&m| m).count();
            prop_assert!(marked >= rs.len().max(1));
            prop_assert!(marked <= 2 * rs.len());
            for r in rs.iter().filter(|r| r.len >= 3) {
                for i in r.start + 1..r.end() - 1 {
                    prop_assert!(!mask[i]);
                }
            }
        }
    }
}
