//! Diagonal change of state units followed by hyperplane normalization.
//!
//! With `D = diag(1/s_l)` and `s_l = max(|lo_l|, |hi_l|)`, every admissible
//! state satisfies `‖Dx‖∞ <= 1`. Each region row `h·x <= k` is rewritten as
//! `(hD⁻¹/c)·(Dx) <= k/c` with `c = max(‖hD⁻¹‖₁, |k|)`, so that `‖h‖₁ <= 1` and
//! `|k| <= 1` afterwards, and every law becomes `u = (F D⁻¹)(Dx) + G`. The
//! facet residual perturbation is then uniformly bounded by `ε(n + 2 + nε)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::norms::{mat_norm_inf, vec_norm1, vec_norm2_sq, vec_norm_inf};
use crate::partition::{AffineLaw, Hyperplane, Piece, PwaPartition, Region, StateBox};

/// Positive diagonal state scaling `D`.
///
/// Stored through its inverse `s = diag(D⁻¹)` so that `hD⁻¹` and `FD⁻¹` are
/// plain products of the box extents.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTransform {
    inv: DVector<f64>,
}

impl ScalingTransform {
    /// From the diagonal of `D`.
    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() || diag.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scaling diagonal must be finite and positive, got {diag:?}"
            )));
        }
        Ok(Self {
            inv: DVector::from_iterator(diag.len(), diag.iter().map(|d| 1.0 / d)),
        })
    }

    pub fn dim(&self) -> usize {
        self.inv.len()
    }

    /// Diagonal of `D`.
    pub fn diag(&self) -> DVector<f64> {
        self.inv.map(|s| 1.0 / s)
    }

    /// Diagonal of `D⁻¹`.
    pub fn inverse_diag(&self) -> &DVector<f64> {
        &self.inv
    }

    /// `Dx`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_div(&self.inv)
    }

    /// `D⁻¹y`.
    pub fn unapply(&self, y: &DVector<f64>) -> DVector<f64> {
        y.component_mul(&self.inv)
    }

    /// `M D⁻¹` for a matrix with `n` columns.
    pub fn scale_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (c, s) in self.inv.iter().enumerate() {
            out.column_mut(c).scale_mut(*s);
        }
        out
    }

    /// Whether `‖Dx‖∞ <= 1` on the whole box.
    pub fn fits(&self, b: &StateBox) -> bool {
        b.dim() == self.dim()
            && self.apply(b.lo()).iter().chain(self.apply(b.hi()).iter()).all(|e| e.abs() <= 1.0)
    }
}

/// `D = diag(1 / max(|lo_l|, |hi_l|))`.
pub fn compute_scaling(b: &StateBox) -> ScalingTransform {
    ScalingTransform { inv: b.abs_max() }
}

/// `(hD⁻¹/c, k/c)` with `c = max(‖hD⁻¹‖₁, |k|)`; `c` is nudged up when
/// rounding would leave either norm above one.
pub fn normalize_row(h: &DVector<f64>, k: f64, s: &ScalingTransform) -> (DVector<f64>, f64) {
    let hs = h.component_mul(s.inverse_diag());
    let mut c = vec_norm1(&hs).max(k.abs());
    loop {
        let (hn, kn) = (&hs / c, k / c);
        if vec_norm1(&hn) <= 1.0 && kn.abs() <= 1.0 {
            return (hn, kn);
        }
        c = c.next_up();
    }
}

/// Expresses `p` in the scaled state `Dx` with normalized region rows.
/// Region order, hence point-location tie-breaks, is preserved.
pub fn rescale_partition(p: &PwaPartition, s: &ScalingTransform) -> Result<PwaPartition> {
    if !s.fits(p.state_box()) {
        return Err(Error::InvalidConfig(
            "scaling does not map the state box into the unit box".into(),
        ));
    }
    let n = p.n();
    let pieces = p
        .pieces()
        .iter()
        .map(|piece| {
            let region = &piece.region;
            let mut h = DMatrix::zeros(region.num_constraints(), n);
            let mut k = DVector::zeros(region.num_constraints());
            for r in 0..region.num_constraints() {
                let row = region.h().row(r).transpose();
                let (hn, kn) = normalize_row(&row, region.k()[r], s);
                h.set_row(r, &hn.transpose());
                k[r] = kn;
            }
            Ok(Piece {
                region: Region::new(h, k)?,
                law: AffineLaw::new(s.scale_columns(piece.law.f()), piece.law.g().clone())?,
                witness: piece.witness.as_ref().map(|w| s.apply(w)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let state_box = StateBox::new(s.apply(p.state_box().lo()), s.apply(p.state_box().hi()))?;
    PwaPartition::new(n, p.m(), pieces, state_box)
}

/// `ε(n + 2 + nε)`: residual perturbation bound for any normalized row and
/// any state in the unit box.
pub fn rescaled_delta_bound(eps: f64, n: usize) -> f64 {
    let n = n as f64;
    eps * (n + 2.0 + n * eps)
}

/// Control-error bound in scaled coordinates:
///
/// ```text
/// δ/‖h‖₂² ‖(F_i − F_j)D⁻¹h'‖∞ + ε‖F_i D⁻¹‖∞ + nε₁‖x‖∞ + nεε₁ + ε₁
/// ```
///
/// with `δ = ε(n + 2 + nε)`. `f_i`, `f_j` are the unscaled gains, `hp` and
/// `x` are in scaled coordinates, `eps` is the region/state step and `eps1`
/// the law step (covering both `F` and `G`).
#[allow(clippy::too_many_arguments)]
pub fn rescaled_control_bound(
    f_i: &DMatrix<f64>,
    f_j: &DMatrix<f64>,
    hp: &Hyperplane,
    s: &ScalingTransform,
    x: &DVector<f64>,
    eps: f64,
    eps1: f64,
    n: usize,
) -> f64 {
    let delta = rescaled_delta_bound(eps, n);
    let kink = s.scale_columns(&(f_i - f_j)) * hp.h();
    let nf = n as f64;
    delta / vec_norm2_sq(hp.h()) * vec_norm_inf(&kink)
        + eps * mat_norm_inf(&s.scale_columns(f_i))
        + nf * eps1 * vec_norm_inf(x)
        + nf * eps * eps1
        + eps1
}
