//! Seeded sampling experiments: bound-versus-error sweeps and per-facet
//! sensitivity tables.
//!
//! Every sample owns a ChaCha8 stream keyed by its index, so results do not
//! depend on evaluation order or thread count.

mod export;

pub use export::{
    export_sweep, write_facet_csv, write_reports, write_reports_csv, write_svg_scatter, ExportFormat,
};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundReport, BoundsAnalyzer, NormMode};
use crate::error::{Error, Result};
use crate::norms::vec_norm1;
use crate::partition::{FacetPair, PwaPartition};
use crate::quantize::{Formats, QuantizedPartition};

pub const DEFAULT_SAMPLE_COUNT: usize = 100_000;
pub const DEFAULT_DROP_THRESHOLD: f64 = 1e-4;
/// Attempts per near-facet sample before it is given up.
const MAX_ATTEMPTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Uniform over the state box, keeping located states.
    BoxUniform,
    /// Points on shared facets pushed into one side by a distance in `(0, band_width]`.
    NearFacets { band_width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sample_count: usize,
    pub seed: u64,
    pub mode: SamplingMode,
    pub formats: Formats,
    /// Reports with both the a posteriori bound and the actual error below
    /// this value are dropped from sweeps.
    pub drop_threshold: f64,
    pub norm_mode: NormMode,
}

impl ExperimentConfig {
    pub fn new(formats: Formats) -> Self {
        Self {
            sample_count: DEFAULT_SAMPLE_COUNT,
            seed: 0,
            mode: SamplingMode::BoxUniform,
            formats,
            drop_threshold: DEFAULT_DROP_THRESHOLD,
            norm_mode: NormMode::State,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::InvalidConfig("sample count must be at least 1".into()));
        }
        if let SamplingMode::NearFacets { band_width } = self.mode {
            if !(band_width > 0.0 && band_width.is_finite()) {
                return Err(Error::InvalidConfig(format!("band width must be positive, got {band_width}")));
            }
        }
        if self.drop_threshold.is_nan() || self.drop_threshold < 0.0 {
            return Err(Error::InvalidConfig("drop threshold must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Default near-facet band: twice the largest distance from a facet at which
/// a jump is still possible anywhere in the box, i.e. `2 max δ/‖h‖₂` with
/// box norms.
pub fn default_band_width(p: &PwaPartition, pairs: &[FacetPair], formats: &Formats) -> f64 {
    let eps = formats.regions.step().max(formats.state.step());
    let n = p.n() as f64;
    let x1 = p.state_box().max_norm1();
    let widest = pairs
        .iter()
        .map(|fp| {
            let hp = fp.stored_hyperplane(p);
            let delta = eps * (vec_norm1(hp.h()) + x1 + n * eps + 1.0);
            delta / hp.h().norm()
        })
        .fold(0.0, f64::max);
    if widest > 0.0 {
        2.0 * widest
    } else {
        p.state_box().max_extent() * 1e-3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSample {
    /// Index of the random stream that produced the state.
    pub index: usize,
    pub x: DVector<f64>,
    /// Index into the facet pair list for near-facet samples.
    pub pair: Option<usize>,
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn draw(p: &PwaPartition, pairs: &[FacetPair], cfg: &ExperimentConfig, index: usize) -> Option<StateSample> {
    let mut rng = stream(cfg.seed, index);
    match cfg.mode {
        SamplingMode::BoxUniform => {
            let x = p.state_box().sample(&mut rng);
            p.locate(&x)?;
            Some(StateSample { index, x, pair: None })
        }
        SamplingMode::NearFacets { band_width } => {
            if pairs.is_empty() {
                return None;
            }
            let k = index % pairs.len();
            let fp = &pairs[k];
            if fp.probes.is_empty() {
                return None;
            }
            for _ in 0..MAX_ATTEMPTS {
                let q = facet_combination(&fp.probes, &mut rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let t = band_width * (1.0 - rng.random::<f64>());
                let x = q - fp.hp.h() * (sign * t);
                if p.state_box().contains(&x) && p.locate(&x).is_some() {
                    return Some(StateSample { index, x, pair: Some(k) });
                }
            }
            None
        }
    }
}

/// Random convex combination of three stored facet points.
fn facet_combination(probes: &[DVector<f64>], rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut cuts = [rng.random::<f64>(), rng.random::<f64>()];
    cuts.sort_by(f64::total_cmp);
    let w = [cuts[0], cuts[1] - cuts[0], 1.0 - cuts[1]];
    let mut q = DVector::zeros(probes[0].len());
    for wi in w {
        q += &probes[rng.random_range(0..probes.len())] * wi;
    }
    q
}

/// Draws `cfg.sample_count` candidate states; those outside every region
/// (box mode) or whose attempts all left the box (facet mode) are skipped.
pub fn sample_states(p: &PwaPartition, pairs: &[FacetPair], cfg: &ExperimentConfig) -> Result<Vec<StateSample>> {
    cfg.validate()?;
    Ok((0..cfg.sample_count)
        .into_par_iter()
        .filter_map(|i| draw(p, pairs, cfg, i))
        .collect())
}

/// Sweep output with bookkeeping counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Kept reports, ordered by ascending a priori bound (unbounded last).
    pub reports: Vec<BoundReport>,
    /// States that were sampled and analyzed.
    pub sampled: usize,
    /// Reports removed by the drop threshold.
    pub dropped: usize,
}

fn analyze(analyzer: &BoundsAnalyzer<'_>, samples: &[StateSample]) -> Result<Vec<BoundReport>> {
    let results: Vec<Result<BoundReport>> = samples.par_iter().map(|s| analyzer.report(&s.x)).collect();
    results
        .into_iter()
        .zip(samples)
        .map(|(r, s)| {
            r.map_err(|e| Error::SampleFailed {
                x: s.x.iter().copied().collect(),
                source: Box::new(e),
            })
        })
        .collect()
}

fn below(v: Option<f64>, t: f64) -> bool {
    v.is_some_and(|v| v < t)
}

pub fn run_sweep(p: &PwaPartition, qp: &QuantizedPartition, cfg: &ExperimentConfig) -> Result<Sweep> {
    let analyzer = BoundsAnalyzer::new(p, qp).norm_mode(cfg.norm_mode);
    run_sweep_with(&analyzer, cfg)
}

pub fn run_sweep_with(analyzer: &BoundsAnalyzer<'_>, cfg: &ExperimentConfig) -> Result<Sweep> {
    let samples = sample_states(analyzer.partition(), analyzer.pairs(), cfg)?;
    let all = analyze(analyzer, &samples)?;
    let sampled = all.len();
    let mut reports: Vec<BoundReport> = all
        .into_iter()
        .filter(|r| !(below(r.bound_aposteriori, cfg.drop_threshold) && below(r.actual_error, cfg.drop_threshold)))
        .collect();
    let dropped = sampled - reports.len();
    reports.sort_by(|a, b| match (a.bound_apriori, b.bound_apriori) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(Sweep {
        reports,
        sampled,
        dropped,
    })
}

/// Counts of dominance checks over a set of reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DominanceSummary {
    pub claimed: usize,
    pub violations: usize,
    pub unclaimed: usize,
    /// Unclaimed reports where the actual error exceeds an available bound.
    pub unclaimed_exceeding: usize,
}

pub fn dominance_summary(reports: &[BoundReport]) -> DominanceSummary {
    let mut s = DominanceSummary::default();
    for r in reports {
        if r.claims_bound() {
            s.claimed += 1;
            if !r.dominance_holds() {
                s.violations += 1;
            }
        } else {
            s.unclaimed += 1;
            if let (Some(a), Some(b)) = (r.actual_error, r.bound_aposteriori) {
                if a > b {
                    s.unclaimed_exceeding += 1;
                }
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetSensitivityRow {
    pub i: usize,
    pub j: usize,
    pub max_aposteriori: f64,
    pub max_actual: f64,
    /// Claimed reports whose true and quantized regions are both `i` or `j`.
    pub samples_used: usize,
    /// Samples landing elsewhere or outside the bound's hypotheses.
    pub excluded: usize,
    /// Used samples that jumped between `i` and `j`.
    pub jumps: usize,
    /// Both maxima below the drop threshold.
    pub trivial: bool,
}

pub fn facet_report(p: &PwaPartition, qp: &QuantizedPartition, cfg: &ExperimentConfig) -> Result<Vec<FacetSensitivityRow>> {
    let analyzer = BoundsAnalyzer::new(p, qp).norm_mode(cfg.norm_mode);
    facet_report_with(&analyzer, cfg)
}

/// Aggregates near-facet samples per facet pair, in pair order.
pub fn facet_report_with(analyzer: &BoundsAnalyzer<'_>, cfg: &ExperimentConfig) -> Result<Vec<FacetSensitivityRow>> {
    if !matches!(cfg.mode, SamplingMode::NearFacets { .. }) {
        return Err(Error::InvalidConfig("facet report needs near-facet sampling".into()));
    }
    let pairs = analyzer.pairs();
    let samples = sample_states(analyzer.partition(), pairs, cfg)?;
    let reports = analyze(analyzer, &samples)?;
    let mut rows: Vec<FacetSensitivityRow> = pairs
        .iter()
        .map(|fp| FacetSensitivityRow {
            i: fp.i,
            j: fp.j,
            max_aposteriori: 0.0,
            max_actual: 0.0,
            samples_used: 0,
            excluded: 0,
            jumps: 0,
            trivial: false,
        })
        .collect();
    for (s, r) in samples.iter().zip(&reports) {
        let Some(k) = s.pair else { continue };
        let row = &mut rows[k];
        let ends = [row.i, row.j];
        let local = ends.contains(&r.region_true) && r.region_quant.is_some_and(|q| ends.contains(&q));
        match (local && r.claims_bound(), r.bound_aposteriori, r.actual_error) {
            (true, Some(post), Some(act)) => {
                row.samples_used += 1;
                row.jumps += usize::from(r.flags.jump);
                row.max_aposteriori = row.max_aposteriori.max(post);
                row.max_actual = row.max_actual.max(act);
            }
            _ => row.excluded += 1,
        }
    }
    for row in &mut rows {
        row.trivial = row.max_aposteriori < cfg.drop_threshold && row.max_actual < cfg.drop_threshold;
    }
    Ok(rows)
}
