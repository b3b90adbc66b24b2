//! Upper bounds on the control error `‖û(x̂) − u(x)‖∞` of a quantized PWA law.
//!
//! Two cases are distinguished. When `x` and its quantized copy `x̂` fall in
//! regions with the same index, the error is bounded by the quantization of
//! the law and the state alone. When `x ∈ P_j` but `x̂ ∈ P̂_i` with `i ≠ j`
//! across a shared facet `h·x = k`, the facet residual `y = h·x − k` changes
//! by at most
//!
//! ```text
//! δ = ε (‖h‖₁ + ‖x‖₁ + nε + 1)
//! ```
//!
//! so a jump is only possible for `−δ < y <= 0`, and by continuity of the law
//! on the hyperplane the extra error is at most `δ ‖(F_i − F_j)h'‖∞ / ‖h‖₂²`.
//! The remaining term is bounded either from the realized quantization deltas
//! (a posteriori) or from the original data only (a priori).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{mat_norm_inf, vec_norm1, vec_norm2_sq, vec_norm_inf};
use crate::partition::{
    check_assumptions, default_probe_step, find_facet_pairs, FacetPair, Hyperplane, PwaPartition,
};
use crate::quantize::QuantizedPartition;

/// Additive slack for working-precision roundoff in dominance checks.
pub const ROUNDOFF_SLACK: f64 = 1e-12;

/// `ε (‖h‖₁ + ‖x‖₁ + nε + 1)`.
pub fn delta_bound(hp: &Hyperplane, x: &DVector<f64>, eps: f64, n: usize) -> f64 {
    delta_from_norms(vec_norm1(hp.h()), vec_norm1(x), eps, n)
}

fn delta_from_norms(h_norm1: f64, x_norm1: f64, eps: f64, n: usize) -> f64 {
    eps * (h_norm1 + x_norm1 + n as f64 * eps + 1.0)
}

/// Whether `−δ < h·x − k <= 0`, i.e. `x` is close enough to the facet for a
/// quantization-induced jump to the other side.
pub fn jump_certificate(hp: &Hyperplane, x: &DVector<f64>, delta: f64) -> bool {
    let y = hp.residual(x);
    -delta < y && y <= 0.0
}

/// `δ ‖(F_i − F_j) h'‖∞ / ‖h‖₂²`.
pub fn first_term(f_i: &DMatrix<f64>, f_j: &DMatrix<f64>, hp: &Hyperplane, delta: f64) -> f64 {
    let kink = (f_i - f_j) * hp.h();
    delta * vec_norm_inf(&kink) / vec_norm2_sq(hp.h())
}

/// `‖ΔF‖∞ ‖x‖∞ + ‖ΔG‖∞ + ‖F̂‖∞ ε`.
pub fn second_term_aposteriori(
    d_f: &DMatrix<f64>,
    d_g: &DVector<f64>,
    f_hat: &DMatrix<f64>,
    x: &DVector<f64>,
    eps: f64,
) -> f64 {
    aposteriori_from_norm(d_f, d_g, f_hat, vec_norm_inf(x), eps)
}

fn aposteriori_from_norm(d_f: &DMatrix<f64>, d_g: &DVector<f64>, f_hat: &DMatrix<f64>, x_inf: f64, eps: f64) -> f64 {
    mat_norm_inf(d_f) * x_inf + vec_norm_inf(d_g) + mat_norm_inf(f_hat) * eps
}

/// `ε (‖F‖∞ + n‖x‖∞ + nε + 1)`.
pub fn second_term_apriori(f: &DMatrix<f64>, x: &DVector<f64>, eps: f64, n: usize) -> f64 {
    apriori_from_norm(f, vec_norm_inf(x), eps, n)
}

fn apriori_from_norm(f: &DMatrix<f64>, x_inf: f64, eps: f64, n: usize) -> f64 {
    let n = n as f64;
    eps * (mat_norm_inf(f) + n * x_inf + n * eps + 1.0)
}

/// Which state norms enter the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Norms of the evaluated state.
    #[default]
    State,
    /// Largest norms over the state box, giving state-independent bounds.
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReportFlags {
    pub same_region: bool,
    pub jump: bool,
    pub projection_in_facet: bool,
    pub no_region: bool,
    /// Jump between regions with no detected shared facet.
    pub corner_jump: bool,
    /// `−δ < h·x − k <= 0` on the jump facet.
    pub certificate: bool,
}

/// Per-state bound record. Region indices are 0-based.
///
/// Quantities that do not apply are `None`: `delta` and `first_term` outside
/// a facet jump, every bound when the quantized state is in no region, and
/// the jump bounds for corner jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub x: Vec<f64>,
    pub region_true: usize,
    pub region_quant: Option<usize>,
    pub delta: Option<f64>,
    pub first_term: Option<f64>,
    pub second_apriori: Option<f64>,
    pub second_aposteriori: Option<f64>,
    pub bound_apriori: Option<f64>,
    pub bound_aposteriori: Option<f64>,
    pub actual_error: Option<f64>,
    pub flags: ReportFlags,
}

impl BoundReport {
    /// Whether the bounds are claimed: same region, or a jump across a shared
    /// facet whose projection hypothesis holds.
    pub fn claims_bound(&self) -> bool {
        let f = &self.flags;
        f.same_region || (f.jump && !f.corner_jump && f.projection_in_facet && self.bound_aposteriori.is_some())
    }

    /// `actual <= a posteriori <= a priori` within [`ROUNDOFF_SLACK`].
    pub fn dominance_holds(&self) -> bool {
        match (self.actual_error, self.bound_aposteriori, self.bound_apriori) {
            (Some(act), Some(post), Some(prio)) => act <= post + ROUNDOFF_SLACK && post <= prio + ROUNDOFF_SLACK,
            _ => false,
        }
    }
}

/// Produces [`BoundReport`]s for one partition and its quantized copy,
/// reusing the facet adjacency across states.
#[derive(Debug, Clone)]
pub struct BoundsAnalyzer<'a> {
    p: &'a PwaPartition,
    qp: &'a QuantizedPartition,
    pairs: Vec<FacetPair>,
    mode: NormMode,
}

impl<'a> BoundsAnalyzer<'a> {
    pub fn new(p: &'a PwaPartition, qp: &'a QuantizedPartition) -> Self {
        let pairs = find_facet_pairs(p, default_probe_step(p.state_box()));
        Self::with_pairs(p, qp, pairs)
    }

    pub fn with_pairs(p: &'a PwaPartition, qp: &'a QuantizedPartition, pairs: Vec<FacetPair>) -> Self {
        Self {
            p,
            qp,
            pairs,
            mode: NormMode::State,
        }
    }

    pub fn norm_mode(mut self, mode: NormMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn pairs(&self) -> &[FacetPair] {
        &self.pairs
    }

    pub fn partition(&self) -> &PwaPartition {
        self.p
    }

    pub fn quantized(&self) -> &QuantizedPartition {
        self.qp
    }

    pub fn report(&self, x: &DVector<f64>) -> Result<BoundReport> {
        let p = self.p;
        let j = p
            .locate(x)
            .ok_or_else(|| Error::StateOutsidePartition(x.iter().copied().collect()))?;
        let eval = self.qp.controller().evaluate(x)?;
        let fmts = self.qp.formats();
        let (eps_s, eps_r, eps_l) = (fmts.state.step(), fmts.regions.step(), fmts.laws.step());
        let n = p.n();
        let (x_norm1, x_inf) = match self.mode {
            NormMode::State => (vec_norm1(x), vec_norm_inf(x)),
            NormMode::Box => (p.state_box().max_norm1(), p.state_box().max_norm_inf()),
        };

        let mut report = BoundReport {
            x: x.iter().copied().collect(),
            region_true: j,
            region_quant: eval.region,
            delta: None,
            first_term: None,
            second_apriori: None,
            second_aposteriori: None,
            bound_apriori: None,
            bound_aposteriori: None,
            actual_error: None,
            flags: ReportFlags::default(),
        };
        let (Some(i), Some(u_hat)) = (eval.region, eval.u_hat) else {
            report.flags.no_region = true;
            return Ok(report);
        };

        let u = p.law(j).evaluate(x);
        report.actual_error = Some(vec_norm_inf(&(u_hat - u)));
        let q = self.qp.region(i);
        let post = aposteriori_from_norm(&self.qp.delta_f(i), &self.qp.delta_g(i), &q.f, x_inf, eps_s);
        let prio = apriori_from_norm(p.law(i).f(), x_inf, eps_l.max(eps_s), n);
        report.second_aposteriori = Some(post);
        report.second_apriori = Some(prio);

        if i == j {
            report.flags.same_region = true;
            report.first_term = Some(0.0);
            report.bound_aposteriori = Some(post);
            report.bound_apriori = Some(prio);
            return Ok(report);
        }

        report.flags.jump = true;
        let Some(fp) = self.pairs.iter().find(|fp| fp.connects(i, j)).map(|fp| fp.toward(i)) else {
            report.flags.corner_jump = true;
            return Ok(report);
        };
        let hp = fp.stored_hyperplane(p);
        let delta = delta_from_norms(vec_norm1(hp.h()), x_norm1, eps_r.max(eps_s), n);
        let first = first_term(p.law(i).f(), p.law(j).f(), &hp, delta);
        let assumptions = check_assumptions(p, &fp, x, p.tol());
        report.flags.projection_in_facet = assumptions.projection_in_facet;
        report.flags.certificate = jump_certificate(&hp, x, delta);
        report.delta = Some(delta);
        report.first_term = Some(first);
        report.bound_aposteriori = Some(first + post);
        report.bound_apriori = Some(first + prio);
        Ok(report)
    }
}

/// Single-state report; detects facet adjacency on every call.
pub fn control_error_report(p: &PwaPartition, qp: &QuantizedPartition, x: &DVector<f64>) -> Result<BoundReport> {
    BoundsAnalyzer::new(p, qp).report(x)
}
