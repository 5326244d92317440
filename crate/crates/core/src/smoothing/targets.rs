use crate::datamodel::{boundary_mask, LabelSeries, N_CLASSES};

/// Training targets: one-hot rows, except on the first and last day of each
/// run where `eps` of the mass is spread uniformly over all classes.
pub fn smooth_targets(labels: &LabelSeries, eps: f64) -> Vec<[f64; N_CLASSES]> {
    assert!(
        (0.0..1.0).contains(&eps),
        "smoothing eps must lie in [0, 1)"
    );
    let mask = boundary_mask(&labels.labels);
    labels
        .labels
        .iter()
        .zip(mask)
        .map(|(c, boundary)| smoothed_row(c.index(), if boundary { eps } else { 0.0 }))
        .collect()
}

pub(crate) fn smoothed_row(class: usize, eps: f64) -> [f64; N_CLASSES] {
    let mut row = [eps / N_CLASSES as f64; N_CLASSES];
    row[class] += 1.0 - eps;
    row
}
