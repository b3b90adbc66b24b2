//! Fixed-point quantization of partitions and exact evaluation of the
//! quantized controller.
//!
//! Region data (`H`, `K`), law data (`F`, `G`) and the on-line state each get
//! their own [`FixedPointFormat`]. The quantized controller stores integer
//! mantissas; point location and law evaluation on quantized operands are
//! carried out exactly, so the only errors are the stored-data and state
//! quantization deltas.

mod exact;
mod format;

pub use exact::ExactSum;
pub use format::{quantize_matrix, quantize_scalar, quantize_vector, FixedPointFormat};

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DataClass, Error, Result};
use crate::partition::{BoxDocument, PwaPartition};

/// Formats for the three data classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Formats {
    pub regions: FixedPointFormat,
    pub laws: FixedPointFormat,
    pub state: FixedPointFormat,
}

impl Formats {
    pub fn uniform(fmt: FixedPointFormat) -> Self {
        Self {
            regions: fmt,
            laws: fmt,
            state: fmt,
        }
    }
}

/// Integer mantissas of one quantized region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionMantissas {
    #[serde(rename = "H")]
    pub h: Vec<Vec<i64>>,
    #[serde(rename = "K")]
    pub k: Vec<i64>,
    #[serde(rename = "F")]
    pub f: Vec<Vec<i64>>,
    #[serde(rename = "G")]
    pub g: Vec<i64>,
}

/// Quantized region data: mantissas plus the exact values they denote.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedRegion {
    pub mantissas: RegionMantissas,
    pub h: DMatrix<f64>,
    pub k: DVector<f64>,
    pub f: DMatrix<f64>,
    pub g: DVector<f64>,
}

/// What the embedded controller stores: formats and quantized data only.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedController {
    n: usize,
    m: usize,
    formats: Formats,
    regions: Vec<QuantizedRegion>,
}

/// Result of evaluating the quantized controller at a true state.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedEvaluation {
    pub x_hat: DVector<f64>,
    pub region: Option<usize>,
    pub u_hat: Option<DVector<f64>>,
}

fn quantize_rows(
    rows: &DMatrix<f64>,
    fmt: FixedPointFormat,
    region: usize,
    class: DataClass,
) -> Result<(Vec<Vec<i64>>, DMatrix<f64>)> {
    let mut mant = vec![vec![0i64; rows.ncols()]; rows.nrows()];
    let mut vals = DMatrix::zeros(rows.nrows(), rows.ncols());
    for r in 0..rows.nrows() {
        for c in 0..rows.ncols() {
            let z = rows[(r, c)];
            let mm = fmt.mantissa(z).map_err(|_| Error::RegionOverflow {
                region,
                class,
                row: r,
                col: c,
                value: z,
                fmt,
            })?;
            mant[r][c] = mm;
            vals[(r, c)] = fmt.value_of(mm);
        }
    }
    Ok((mant, vals))
}

fn quantize_entries(
    v: &DVector<f64>,
    fmt: FixedPointFormat,
    region: usize,
    class: DataClass,
) -> Result<(Vec<i64>, DVector<f64>)> {
    let col = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let (mant, vals) = quantize_rows(&col, fmt, region, class)?;
    Ok((mant.into_iter().map(|r| r[0]).collect(), DVector::from_column_slice(vals.as_slice())))
}

impl QuantizedRegion {
    fn from_mantissas(mantissas: RegionMantissas, formats: &Formats) -> Self {
        let to_mat = |rows: &Vec<Vec<i64>>, fmt: FixedPointFormat, ncols: usize| {
            DMatrix::from_fn(rows.len(), ncols, |r, c| fmt.value_of(rows[r][c]))
        };
        let ncols = mantissas.h.first().map_or(0, |r| r.len());
        let h = to_mat(&mantissas.h, formats.regions, ncols);
        let f = to_mat(&mantissas.f, formats.laws, ncols);
        let k = DVector::from_iterator(mantissas.k.len(), mantissas.k.iter().map(|m| formats.regions.value_of(*m)));
        let g = DVector::from_iterator(mantissas.g.len(), mantissas.g.iter().map(|m| formats.laws.value_of(*m)));
        Self { mantissas, h, k, f, g }
    }

    /// Exact test of `Ĥ x̂ <= K̂`, with `x̂` given as mantissas in `state` format.
    fn contains(&self, x_mant: &[i64], formats: &Formats) -> bool {
        let shift = formats.state.frac_bits();
        self.mantissas
            .h
            .iter()
            .zip(&self.mantissas.k)
            .all(|(row, k)| ExactSum::compute(row, x_mant, -(*k as i128), shift).is_nonpositive())
    }

    /// Exact `F̂ x̂ + Ĝ`, rounded once per entry.
    fn evaluate(&self, x_mant: &[i64], formats: &Formats) -> DVector<f64> {
        let shift = formats.state.frac_bits();
        let scale = formats.laws.frac_bits() + shift;
        DVector::from_iterator(
            self.mantissas.g.len(),
            self.mantissas
                .f
                .iter()
                .zip(&self.mantissas.g)
                .map(|(row, g)| ExactSum::compute(row, x_mant, *g as i128, shift).to_f64_scaled(scale)),
        )
    }
}

impl QuantizedController {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn formats(&self) -> &Formats {
        &self.formats
    }

    pub fn regions(&self) -> &[QuantizedRegion] {
        &self.regions
    }

    pub fn region(&self, i: usize) -> &QuantizedRegion {
        &self.regions[i]
    }

    /// Quantizes `x` with the state format, locates `x̂` by sequential search
    /// over `Ĥ_i x̂ <= K̂_i` (smallest index wins) and evaluates `F̂_i x̂ + Ĝ_i`.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<QuantizedEvaluation> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "state has {} entries, expected {}",
                x.len(),
                self.n
            )));
        }
        let fmt = self.formats.state;
        let x_mant = x.iter().map(|z| fmt.mantissa(*z)).collect::<Result<Vec<_>>>()?;
        let x_hat = DVector::from_iterator(self.n, x_mant.iter().map(|m| fmt.value_of(*m)));
        let region = self.regions.iter().position(|r| r.contains(&x_mant, &self.formats));
        let u_hat = region.map(|i| self.regions[i].evaluate(&x_mant, &self.formats));
        Ok(QuantizedEvaluation { x_hat, region, u_hat })
    }
}

/// Grid-snapped copy of a partition, keeping the original for delta queries.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPartition {
    original: PwaPartition,
    controller: QuantizedController,
}

/// Snaps `H`, `K` to `formats.regions` and `F`, `G` to `formats.laws`.
pub fn quantize_partition(p: &PwaPartition, formats: Formats) -> Result<QuantizedPartition> {
    let mut regions = Vec::with_capacity(p.num_regions());
    for (idx, piece) in p.pieces().iter().enumerate() {
        let (h_m, h) = quantize_rows(piece.region.h(), formats.regions, idx, DataClass::H)?;
        let (k_m, k) = quantize_entries(piece.region.k(), formats.regions, idx, DataClass::K)?;
        let (f_m, f) = quantize_rows(piece.law.f(), formats.laws, idx, DataClass::F)?;
        let (g_m, g) = quantize_entries(piece.law.g(), formats.laws, idx, DataClass::G)?;
        regions.push(QuantizedRegion {
            mantissas: RegionMantissas {
                h: h_m,
                k: k_m,
                f: f_m,
                g: g_m,
            },
            h,
            k,
            f,
            g,
        });
    }
    Ok(QuantizedPartition {
        original: p.clone(),
        controller: QuantizedController {
            n: p.n(),
            m: p.m(),
            formats,
            regions,
        },
    })
}

/// Quantizes `x` and evaluates the quantized controller.
pub fn quantized_evaluate(qp: &QuantizedPartition, x: &DVector<f64>) -> Result<QuantizedEvaluation> {
    qp.controller.evaluate(x)
}

impl QuantizedPartition {
    pub fn original(&self) -> &PwaPartition {
        &self.original
    }

    pub fn controller(&self) -> &QuantizedController {
        &self.controller
    }

    pub fn formats(&self) -> &Formats {
        &self.controller.formats
    }

    pub fn region(&self, i: usize) -> &QuantizedRegion {
        &self.controller.regions[i]
    }

    /// `ΔH_i = Ĥ_i − H_i` (exact in `f64`).
    pub fn delta_h(&self, i: usize) -> DMatrix<f64> {
        &self.region(i).h - self.original.region(i).h()
    }

    pub fn delta_k(&self, i: usize) -> DVector<f64> {
        &self.region(i).k - self.original.region(i).k()
    }

    pub fn delta_f(&self, i: usize) -> DMatrix<f64> {
        &self.region(i).f - self.original.law(i).f()
    }

    pub fn delta_g(&self, i: usize) -> DVector<f64> {
        &self.region(i).g - self.original.law(i).g()
    }

    pub fn to_document(&self) -> QuantizedDocument {
        let b = self.original.state_box();
        QuantizedDocument {
            n: self.controller.n,
            m: self.controller.m,
            state_box: BoxDocument {
                lo: b.lo().iter().copied().collect(),
                hi: b.hi().iter().copied().collect(),
            },
            formats: self.controller.formats,
            regions: self.controller.regions.iter().map(|r| r.mantissas.clone()).collect(),
        }
    }
}

/// On-disk form of a quantized partition: every stored number is an integer
/// mantissa in the format of its data class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizedDocument {
    pub n: usize,
    pub m: usize,
    pub state_box: BoxDocument,
    pub formats: Formats,
    pub regions: Vec<RegionMantissas>,
}

impl QuantizedDocument {
    pub fn from_reader<R: Read>(source: R) -> Result<Self> {
        Ok(serde_json::from_reader(source)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("quantized document serializes")
    }

    /// Rebuilds the controller after checking shapes and mantissa ranges.
    pub fn to_controller(&self) -> Result<QuantizedController> {
        let (n, m) = (self.n, self.m);
        for (idx, r) in self.regions.iter().enumerate() {
            let bad_shape = r.h.len() != r.k.len()
                || r.h.iter().any(|row| row.len() != n)
                || r.f.len() != m
                || r.g.len() != m
                || r.f.iter().any(|row| row.len() != n);
            if bad_shape {
                return Err(Error::DimensionMismatch(format!("quantized region {idx} has inconsistent shapes")));
            }
            let in_range = |fmt: FixedPointFormat, v: &i64| (fmt.min_mantissa()..=fmt.max_mantissa()).contains(v);
            let ok = r.h.iter().flatten().chain(&r.k).all(|v| in_range(self.formats.regions, v))
                && r.f.iter().flatten().chain(&r.g).all(|v| in_range(self.formats.laws, v));
            if !ok {
                return Err(Error::Malformed(format!("quantized region {idx} has out-of-range mantissas")));
            }
        }
        Ok(QuantizedController {
            n,
            m,
            formats: self.formats,
            regions: self
                .regions
                .iter()
                .map(|r| QuantizedRegion::from_mantissas(r.clone(), &self.formats))
                .collect(),
        })
    }
}
