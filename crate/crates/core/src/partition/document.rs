use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AffineLaw, Piece, PwaPartition, Region, StateBox, DEFAULT_CONTINUITY_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDocument {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionDocument {
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

/// Diagonal of the state scaling `D` applied by a rescale, kept for round-trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingRecord {
    pub diag: Vec<f64>,
}

/// On-disk form of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionDocument {
    pub n: usize,
    pub m: usize,
    pub state_box: BoxDocument,
    pub regions: Vec<RegionDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingRecord>,
}

fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize, what: &str, region: usize) -> Result<DMatrix<f64>> {
    for (r, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::DimensionMismatch(format!(
                "region {region}: {what} row {r} has {} entries, expected {ncols}",
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl PartitionDocument {
    pub fn from_reader<R: Read>(source: R) -> Result<Self> {
        Ok(serde_json::from_reader(source)?)
    }

    /// Structural conversion; does not run witness or continuity checks.
    pub fn to_partition(&self) -> Result<PwaPartition> {
        let (n, m) = (self.n, self.m);
        if self.state_box.lo.len() != n || self.state_box.hi.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "state box bounds must have {n} entries"
            )));
        }
        let state_box = StateBox::new(
            DVector::from_vec(self.state_box.lo.clone()),
            DVector::from_vec(self.state_box.hi.clone()),
        )?;
        let mut pieces = Vec::with_capacity(self.regions.len());
        for (idx, rd) in self.regions.iter().enumerate() {
            let h = matrix_from_rows(&rd.h, n, "H", idx)?;
            if rd.f.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "region {idx}: F has {} rows, expected {m}",
                    rd.f.len()
                )));
            }
            let f = matrix_from_rows(&rd.f, n, "F", idx)?;
            let region = Region::new(h, DVector::from_vec(rd.k.clone())).map_err(|e| reindex(e, idx))?;
            let law = AffineLaw::new(f, DVector::from_vec(rd.g.clone())).map_err(|e| reindex(e, idx))?;
            pieces.push(Piece {
                region,
                law,
                witness: rd.witness.clone().map(DVector::from_vec),
            });
        }
        PwaPartition::new(n, m, pieces, state_box)
    }

    pub fn from_partition(p: &PwaPartition) -> Self {
        Self {
            n: p.n(),
            m: p.m(),
            state_box: BoxDocument {
                lo: p.state_box().lo().iter().copied().collect(),
                hi: p.state_box().hi().iter().copied().collect(),
            },
            regions: p
                .pieces()
                .iter()
                .map(|piece| RegionDocument {
                    h: matrix_to_rows(piece.region.h()),
                    k: piece.region.k().iter().copied().collect(),
                    f: matrix_to_rows(piece.law.f()),
                    g: piece.law.g().iter().copied().collect(),
                    witness: piece.witness.as_ref().map(|w| w.iter().copied().collect()),
                })
                .collect(),
            scaling: None,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("partition document serializes")
    }
}

fn reindex(e: Error, region: usize) -> Error {
    match e {
        Error::ZeroNormal { row, .. } => Error::ZeroNormal { region, row },
        Error::DimensionMismatch(msg) => Error::DimensionMismatch(format!("region {region}: {msg}")),
        other => other,
    }
}

/// Parses and fully validates a partition document: structure, region
/// nonemptiness and continuity across shared facets.
pub fn load_partition<R: Read>(source: R) -> Result<PwaPartition> {
    let doc = PartitionDocument::from_reader(source)?;
    let mut p = doc.to_partition()?;
    p.validate(DEFAULT_CONTINUITY_TOL)?;
    Ok(p)
}
