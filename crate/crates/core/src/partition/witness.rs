use nalgebra::DVector;

use super::{PwaPartition, Region, StateBox};
use crate::error::{Error, Result};
use crate::norms::vec_norm2_sq;

const MAX_SWEEPS: usize = 4000;
const RELAXATION: f64 = 1.5;

/// Returns a point of region `idx` inside the state box.
///
/// A stored witness is checked and returned as is. Otherwise a point is
/// searched by over-relaxed cyclic projection onto the region's half-spaces
/// shrunk by a margin, starting from the box center with a margin of a quarter
/// of the widest box side and halving it until the shrunken region is
/// reached. The result is strictly interior whenever the region has
/// nonempty interior.
pub fn find_witness(p: &PwaPartition, idx: usize) -> Result<DVector<f64>> {
    let piece = p.piece(idx)?;
    if let Some(w) = &piece.witness {
        if !p.state_box().contains(w) {
            return Err(Error::WitnessOutsideBox { region: idx });
        }
        if !piece.region.contains(w, p.tol()) {
            return Err(Error::Malformed(format!("region {idx}: witness violates the region constraints")));
        }
        return Ok(w.clone());
    }
    let b = p.state_box();
    let mut margin = 0.25 * b.max_extent();
    for _ in 0..60 {
        if let Some(x) = relax(&piece.region, b, margin) {
            return Ok(x);
        }
        margin *= 0.5;
    }
    relax(&piece.region, b, 0.0).ok_or(Error::EmptyRegion { region: idx })
}

/// Cyclic projection onto `{x : H_r x <= K_r − margin ‖H_r‖₂} ∩ shrunken box`.
fn relax(region: &Region, b: &StateBox, margin: f64) -> Option<DVector<f64>> {
    let n = b.dim();
    let lo = b.lo().map(|l| l + margin);
    let hi = b.hi().map(|h| h - margin);
    if (0..n).any(|l| lo[l] > hi[l]) {
        return None;
    }
    let rows: Vec<_> = region.rows().collect();
    let norms: Vec<f64> = rows.iter().map(|hp| vec_norm2_sq(hp.h())).collect();
    let mut x = b.center();
    for _ in 0..MAX_SWEEPS {
        let mut worst = 0.0f64;
        for (hp, n2) in rows.iter().zip(&norms) {
            let bound = hp.k() - margin * n2.sqrt();
            let viol = hp.h().dot(&x) - bound;
            if viol > 0.0 {
                worst = worst.max(viol / n2.sqrt());
                x -= hp.h() * (RELAXATION * viol / n2);
            }
        }
        for l in 0..n {
            x[l] = x[l].clamp(lo[l], hi[l]);
        }
        if worst == 0.0 {
            break;
        }
    }
    let ok = b.contains(&x)
        && rows
            .iter()
            .zip(&norms)
            .all(|(hp, n2)| hp.h().dot(&x) <= hp.k() - margin * n2.sqrt() + 1e-12 * hp.k().abs().max(1.0));
    if ok && region.contains(&x, 0.0) {
        Some(x)
    } else {
        None
    }
}
