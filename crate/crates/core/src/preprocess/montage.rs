//! Re-referencing montages as explicit linear maps over the source channels.

use serde::{Deserialize, Serialize};

use crate::ingest::Electrode;

use super::PreprocessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MontageKind {
    Car,
    Cz,
    Laplacian,
    BipolarDb,
}

impl MontageKind {
    pub const ALL: [MontageKind; 4] = [MontageKind::Car, MontageKind::Cz, MontageKind::Laplacian, MontageKind::BipolarDb];

    pub fn name(self) -> &'static str {
        match self {
            MontageKind::Car => "CAR",
            MontageKind::Cz => "Cz",
            MontageKind::Laplacian => "Laplacian",
            MontageKind::BipolarDb => "BipolarDB",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        MontageKind::ALL.iter().copied().find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

/// Longitudinal double banana.
pub const DOUBLE_BANANA: [(Electrode, Electrode); 18] = {
    use Electrode::*;
    [
        (Fp1, F7),
        (F7, T3),
        (T3, T5),
        (T5, O1),
        (Fp1, F3),
        (F3, C3),
        (C3, P3),
        (P3, O1),
        (Fz, Cz),
        (Cz, Pz),
        (Fp2, F4),
        (F4, C4),
        (C4, P4),
        (P4, O2),
        (Fp2, F8),
        (F8, T4),
        (T4, T6),
        (T6, O2),
    ]
};

/// Nearest neighbours on the 10-20 grid for the small Laplacian.
pub fn laplacian_neighbors(e: Electrode) -> &'static [Electrode] {
    use Electrode::*;
    match e {
        Fp1 => &[Fp2, F3, F7],
        Fp2 => &[Fp1, F4, F8],
        F7 => &[Fp1, F3, T3],
        F3 => &[Fp1, F7, Fz, C3],
        Fz => &[F3, F4, Cz],
        F4 => &[Fp2, Fz, F8, C4],
        F8 => &[Fp2, F4, T4],
        T3 => &[F7, C3, T5],
        C3 => &[F3, T3, Cz, P3],
        Cz => &[Fz, C3, C4, Pz],
        C4 => &[F4, Cz, T4, P4],
        T4 => &[F8, C4, T6],
        T5 => &[T3, P3, O1],
        P3 => &[C3, T5, Pz, O1],
        Pz => &[Cz, P3, P4],
        P4 => &[C4, Pz, T6, O2],
        T6 => &[T4, P4, O2],
        O1 => &[T5, P3, O2],
        O2 => &[T6, P4, O1],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Montage {
    pub kind: MontageKind,
    pub source: Vec<Electrode>,
    pub names: Vec<String>,
    /// derived x source
    pub matrix: Vec<Vec<f64>>,
}

impl Montage {
    pub fn build(kind: MontageKind, source: &[Electrode]) -> Result<Montage, PreprocessError> {
        let c = source.len();
        let idx = |e: Electrode| source.iter().position(|&s| s == e);
        let require = |e: Electrode| idx(e).ok_or(PreprocessError::MissingChannel { montage: kind, channel: e });
        let mut names = Vec::new();
        let mut matrix = Vec::new();
        match kind {
            MontageKind::Car => {
                let w = 1.0 / c as f64;
                for (i, e) in source.iter().enumerate() {
                    names.push(e.name().to_string());
                    matrix.push((0..c).map(|j| if i == j { 1.0 - w } else { -w }).collect());
                }
            }
            MontageKind::Cz => {
                let cz = require(Electrode::Cz)?;
                for (i, e) in source.iter().enumerate() {
                    if i == cz {
                        continue;
                    }
                    let mut row = vec![0.0; c];
                    row[i] = 1.0;
                    row[cz] = -1.0;
                    names.push(format!("{}-Cz", e.name()));
                    matrix.push(row);
                }
            }
            MontageKind::Laplacian => {
                for (i, &e) in source.iter().enumerate() {
                    let nbrs: Vec<usize> = laplacian_neighbors(e).iter().filter_map(|&n| idx(n)).collect();
                    if nbrs.is_empty() {
                        return Err(PreprocessError::MissingChannel {
                            montage: kind,
                            channel: laplacian_neighbors(e)[0],
                        });
                    }
                    let w = 1.0 / nbrs.len() as f64;
                    let mut row = vec![0.0; c];
                    row[i] = 1.0;
                    for j in nbrs {
                        row[j] = -w;
                    }
                    names.push(format!("{}-lap", e.name()));
                    matrix.push(row);
                }
            }
            MontageKind::BipolarDb => {
                for (a, b) in DOUBLE_BANANA {
                    let (ia, ib) = (require(a)?, require(b)?);
                    let mut row = vec![0.0; c];
                    row[ia] = 1.0;
                    row[ib] = -1.0;
                    names.push(format!("{}-{}", a.name(), b.name()));
                    matrix.push(row);
                }
            }
        }
        Ok(Montage { kind, source: source.to_vec(), names, matrix })
    }

    pub fn n_derived(&self) -> usize {
        self.matrix.len()
    }

    /// `matrix x data` for a channels x samples block.
    pub fn apply(&self, data: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = data.first().map_or(0, Vec::len);
        self.matrix
            .iter()
            .map(|row| {
                let mut out = vec![0.0; n];
                for (w, ch) in row.iter().zip(data) {
                    if *w != 0.0 {
                        for (o, v) in out.iter_mut().zip(ch) {
                            *o += w * v;
                        }
                    }
                }
                out
            })
            .collect()
    }
}

/// Re-reference one window with the montage of `kind` over `channels`.
pub fn apply_montage(window: &[Vec<f64>], channels: &[Electrode], kind: MontageKind) -> Result<Vec<Vec<f64>>, PreprocessError> {
    Ok(Montage::build(kind, channels)?.apply(window))
}
