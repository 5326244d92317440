//! Stylized per-class mean pressure patterns.
//!
//! Grid convention: row 0 is the northern edge (about 80N) and rows step 5
//! degrees south; column 0 is the western edge (about 60W) and columns step 5
//! degrees east. Central Europe (50N, 10E) sits near row 6, column 14.

use crate::datamodel::{ClassId, GridField, CELLS, CHANNELS, COLS, FIELD_LEN, ROWS};

pub const BASELINE_SLP: f64 = 1013.25;
pub const BASELINE_Z500: f64 = 5500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    High,
    Low,
}

/// An isotropic Gaussian anomaly on one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub row: f64,
    pub col: f64,
    /// hPa for channel 0, m for channel 1.
    pub amplitude: f64,
    /// In grid cells.
    pub radius: f64,
    pub sign: Sign,
}

impl Bump {
    fn at(&self, row: usize, col: usize) -> f64 {
        let dr = row as f64 - self.row;
        let dc = col as f64 - self.col;
        let s = match self.sign {
            Sign::High => 1.0,
            Sign::Low => -1.0,
        };
        s * self.amplitude * (-(dr * dr + dc * dc) / (2.0 * self.radius * self.radius)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassTemplate {
    pub class: ClassId,
    pub centers: [Vec<Bump>; CHANNELS],
    pub baseline: [f64; CHANNELS],
    /// Linear north-to-south increase across the domain, per channel. Only the
    /// residual template uses it (a weak westerly flow).
    pub meridional_gradient: [f64; CHANNELS],
}

impl ClassTemplate {
    /// Noise-free values, flat in `[channel][row][col]` order.
    pub fn values(&self) -> Vec<f64> {
        let mut out = vec![0.0; FIELD_LEN];
        for c in 0..CHANNELS {
            for r in 0..ROWS {
                let south = r as f64 / (ROWS - 1) as f64 - 0.5;
                for k in 0..COLS {
                    let mut v = self.baseline[c] + self.meridional_gradient[c] * south;
                    for b in &self.centers[c] {
                        v += b.at(r, k);
                    }
                    out[c * CELLS + r * COLS + k] = v;
                }
            }
        }
        out
    }

    pub fn render(&self) -> GridField {
        GridField::new(self.values()).expect("templates render finite fields")
    }
}

fn high(row: f64, col: f64, amplitude: f64, radius: f64) -> Bump {
    Bump {
        row,
        col,
        amplitude,
        radius,
        sign: Sign::High,
    }
}

fn low(row: f64, col: f64, amplitude: f64, radius: f64) -> Bump {
    Bump {
        row,
        col,
        amplitude,
        radius,
        sign: Sign::Low,
    }
}

/// One template per class, indexed by `ClassId::index`.
pub fn make_templates() -> Vec<ClassTemplate> {
    let t = |class, slp: Vec<Bump>, z500: Vec<Bump>| ClassTemplate {
        class,
        centers: [slp, z500],
        baseline: [BASELINE_SLP, BASELINE_Z500],
        meridional_gradient: [0.0, 0.0],
    };
    vec![
        // ridge over Central Europe
        t(
            ClassId::Bm,
            vec![high(6.0, 14.0, 14.0, 3.5), low(1.0, 8.0, 8.0, 3.0)],
            vec![high(6.0, 13.0, 160.0, 4.5)],
        ),
        // high between Iceland and the Norwegian Sea
        t(
            ClassId::Hna,
            vec![high(3.0, 8.0, 16.0, 3.5), low(8.0, 16.0, 6.0, 3.0)],
            vec![high(3.0, 8.0, 180.0, 4.5)],
        ),
        // Fennoscandian high
        t(
            ClassId::Hfa,
            vec![high(3.0, 18.0, 15.0, 3.5), low(6.0, 6.0, 8.0, 3.5)],
            vec![high(3.0, 18.0, 170.0, 4.5)],
        ),
        // high over the British Isles and North Sea, north-easterly flow
        t(
            ClassId::Nea,
            vec![high(5.0, 11.0, 13.0, 3.0), low(10.0, 19.0, 7.0, 3.0)],
            vec![high(4.0, 11.0, 150.0, 4.0), low(10.0, 20.0, 90.0, 4.0)],
        ),
        // high over eastern Europe, south-easterly flow
        t(
            ClassId::Sea,
            vec![high(6.0, 22.0, 13.0, 3.5), low(9.0, 7.0, 9.0, 3.5)],
            vec![high(7.0, 21.0, 140.0, 4.5)],
        ),
        // high bridging the Norwegian Sea and Fennoscandia
        t(
            ClassId::Hnfa,
            vec![high(1.5, 13.0, 15.0, 3.5), low(9.0, 12.0, 6.0, 3.0)],
            vec![high(2.0, 13.0, 170.0, 4.5)],
        ),
        ClassTemplate {
            class: ClassId::Res,
            centers: [Vec::new(), Vec::new()],
            baseline: [BASELINE_SLP, BASELINE_Z500],
            meridional_gradient: [6.0, 80.0],
        },
    ]
}
