//! Facet adjacency by probing.
//!
//! For every constraint row of every region, points on the facet are
//! generated, pushed a small step to either side along the unit normal, and
//! point-located. When the two sides land in different regions whose
//! constraint systems both contain the hyperplane (with opposite
//! orientation), the two regions are recorded as neighbors.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{find_witness, Hyperplane, PwaPartition};
use crate::error::{Error, Result};
use crate::norms::{vec_norm2_sq, vec_norm_inf};

pub const DEFAULT_PROBES_PER_FACET: usize = 32;
pub const DEFAULT_PROBE_SEED: u64 = 0x0005_eedf_ace7;

/// Relative tolerance when matching hyperplanes across regions.
const MATCH_TOL: f64 = 1e-9;
/// Cap on stored facet points per pair.
const MAX_STORED_PROBES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetProbeOptions {
    pub probe_step: f64,
    pub probes_per_facet: usize,
    pub seed: u64,
}

impl FacetProbeOptions {
    pub fn new(probe_step: f64) -> Self {
        Self {
            probe_step,
            probes_per_facet: DEFAULT_PROBES_PER_FACET,
            seed: DEFAULT_PROBE_SEED,
        }
    }
}

/// Two neighboring regions and their common hyperplane.
///
/// `hp` has a unit normal and is oriented so that `h·x <= k` on `P_j` and
/// `h·x >= k` on `P_i`. `row_i` / `row_j` index the constraint rows of the
/// two regions that carry the hyperplane.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetPair {
    pub i: usize,
    pub j: usize,
    pub hp: Hyperplane,
    pub row_i: usize,
    pub row_j: usize,
    /// Points on the shared facet that witnessed the adjacency.
    pub probes: Vec<DVector<f64>>,
}

impl FacetPair {
    pub fn connects(&self, a: usize, b: usize) -> bool {
        (self.i == a && self.j == b) || (self.i == b && self.j == a)
    }

    pub fn reversed(&self) -> Self {
        Self {
            i: self.j,
            j: self.i,
            hp: self.hp.negated(),
            row_i: self.row_j,
            row_j: self.row_i,
            probes: self.probes.clone(),
        }
    }

    /// Orientation for a jump into region `dest`: the returned pair has `i == dest`.
    pub fn toward(&self, dest: usize) -> Self {
        if self.i == dest {
            self.clone()
        } else {
            self.reversed()
        }
    }

    /// The hyperplane exactly as stored in region `i` (negated so that
    /// `h·x <= k` holds on the `P_j` side). This is the representation whose
    /// quantized copy decides membership in `P̂_i`.
    pub fn stored_hyperplane(&self, p: &PwaPartition) -> Hyperplane {
        p.region(self.i).row(self.row_i).negated()
    }
}

/// [`find_facet_pairs_with`] using the default probe count and seed.
pub fn find_facet_pairs(p: &PwaPartition, probe_step: f64) -> Vec<FacetPair> {
    find_facet_pairs_with(p, &FacetProbeOptions::new(probe_step))
}

pub fn find_facet_pairs_with(p: &PwaPartition, opts: &FacetProbeOptions) -> Vec<FacetPair> {
    let mut pairs: Vec<FacetPair> = Vec::new();
    for a in 0..p.num_regions() {
        let Ok(w) = find_witness(p, a) else { continue };
        let region = p.region(a);
        for r in 0..region.num_constraints() {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(((a as u64) << 32) | r as u64);
            for q in facet_points(p, a, r, &w, opts.probes_per_facet, &mut rng) {
                if let Some(found) = classify_probe(p, &region.row(r), &q, opts.probe_step) {
                    merge(&mut pairs, found, q);
                }
            }
        }
    }
    pairs.sort_by_key(|fp| (fp.i, fp.j));
    pairs
}

/// Locates both sides of facet point `q`; returns a pair (with `i < j`) when
/// the sides differ and both regions carry the hyperplane.
fn classify_probe(p: &PwaPartition, row: &Hyperplane, q: &DVector<f64>, step: f64) -> Option<FacetPair> {
    let unit = row.normalized();
    let inside = q - unit.h() * step;
    let outside = q + unit.h() * step;
    let c = p.locate(&inside)?;
    let d = p.locate(&outside)?;
    if c == d {
        return None;
    }
    let row_c = p.region(c).rows().position(|hp| hp.same_halfspace(&unit, MATCH_TOL))?;
    let neg = unit.negated();
    let row_d = p.region(d).rows().position(|hp| hp.same_halfspace(&neg, MATCH_TOL))?;
    // `unit` has h·x <= k on P_c and h·x >= k on P_d.
    let pair = FacetPair {
        i: d,
        j: c,
        hp: unit,
        row_i: row_d,
        row_j: row_c,
        probes: Vec::new(),
    };
    Some(if pair.i < pair.j { pair } else { pair.reversed() })
}

fn merge(pairs: &mut Vec<FacetPair>, found: FacetPair, q: DVector<f64>) {
    if let Some(existing) = pairs
        .iter_mut()
        .find(|fp| fp.i == found.i && fp.j == found.j && fp.hp.same_halfspace(&found.hp, MATCH_TOL))
    {
        if existing.probes.len() < MAX_STORED_PROBES && !existing.probes.contains(&q) {
            existing.probes.push(q);
        }
    } else {
        let mut found = found;
        found.probes.push(q);
        pairs.push(found);
    }
}

/// Which constraint a ray leaves the region through.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Exit {
    Row(usize),
    Box,
}

/// First exit of `w + s·d` (s > 0) from region `a` intersected with the box.
/// Returns `None` when the exit is not unique (a corner within tolerance).
fn ray_exit(p: &PwaPartition, a: usize, w: &DVector<f64>, d: &DVector<f64>) -> Option<(f64, Exit)> {
    let region = p.region(a);
    let b = p.state_box();
    let mut hits: Vec<(f64, Exit)> = Vec::new();
    for r in 0..region.num_constraints() {
        let hd = region.row_dot(r, d);
        if hd > 0.0 {
            let slack = (region.k()[r] - region.row_dot(r, w)).max(0.0);
            hits.push((slack / hd, Exit::Row(r)));
        }
    }
    for l in 0..b.dim() {
        if d[l] > 0.0 {
            hits.push(((b.hi()[l] - w[l]).max(0.0) / d[l], Exit::Box));
        } else if d[l] < 0.0 {
            hits.push(((b.lo()[l] - w[l]).min(0.0) / d[l], Exit::Box));
        }
    }
    hits.sort_by(|x, y| x.0.total_cmp(&y.0));
    let &(s, exit) = hits.first()?;
    if let Some(&(s2, _)) = hits.get(1) {
        if s2 - s <= 1e-9 * s.abs().max(1e-300) {
            return None;
        }
    }
    Some((s, exit))
}

/// Pseudo-random points on facet `r` of region `a`.
///
/// A first point is found by shooting rays from the interior point `w`
/// toward projections of box-uniform samples onto the facet hyperplane;
/// further points follow a hit-and-run walk restricted to the facet.
fn facet_points(
    p: &PwaPartition,
    a: usize,
    r: usize,
    w: &DVector<f64>,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<DVector<f64>> {
    let region = p.region(a);
    let hp = region.row(r);
    let h2 = vec_norm2_sq(hp.h());
    let snap = |x: DVector<f64>| {
        let t = (hp.k() - hp.h().dot(&x)) / h2;
        x + hp.h() * t
    };

    let mut start = None;
    for attempt in 0..count.max(1) * 8 {
        let target = if attempt == 0 {
            snap(w.clone())
        } else {
            snap(p.state_box().sample(rng))
        };
        let d = &target - w;
        if vec_norm_inf(&d) == 0.0 {
            continue;
        }
        if let Some((s, Exit::Row(hit))) = ray_exit(p, a, w, &d) {
            if hit == r {
                start = Some(snap(w + d * s));
                break;
            }
        }
    }
    let Some(mut q) = start else { return Vec::new() };

    let b = p.state_box();
    let n = p.n();
    let mut out = vec![q.clone()];
    while out.len() < count {
        let mut u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        u -= hp.h() * (hp.h().dot(&u) / h2);
        if vec_norm_inf(&u) <= 1e-12 {
            // 1-D facets are single points.
            if n == 1 {
                break;
            }
            continue;
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for rr in (0..region.num_constraints()).filter(|&rr| rr != r) {
            let hu = region.row_dot(rr, &u);
            let slack = (region.k()[rr] - region.row_dot(rr, &q)).max(0.0);
            if hu > 0.0 {
                hi = hi.min(slack / hu);
            } else if hu < 0.0 {
                lo = lo.max(slack / hu);
            }
        }
        for l in 0..n {
            if u[l] > 0.0 {
                hi = hi.min((b.hi()[l] - q[l]).max(0.0) / u[l]);
                lo = lo.max((b.lo()[l] - q[l]).min(0.0) / u[l]);
            } else if u[l] < 0.0 {
                hi = hi.min((b.lo()[l] - q[l]).min(0.0) / u[l]);
                lo = lo.max((b.hi()[l] - q[l]).max(0.0) / u[l]);
            }
        }
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            break;
        }
        let s = lo + (hi - lo) * rng.random::<f64>();
        q = snap(&q + &u * s);
        out.push(q.clone());
    }
    out
}

/// Largest `‖(F_i−F_j)x + (G_i−G_j)‖∞` over the stored facet points of each pair.
pub fn continuity_residuals(p: &PwaPartition, pairs: &[FacetPair]) -> Vec<(f64, Option<DVector<f64>>)> {
    pairs
        .iter()
        .map(|fp| {
            let (li, lj) = (p.law(fp.i), p.law(fp.j));
            fp.probes
                .iter()
                .map(|x| (vec_norm_inf(&(li.evaluate(x) - lj.evaluate(x))), Some(x.clone())))
                .fold((0.0, None), |best, cur| if cur.0 > best.0 { cur } else { best })
        })
        .collect()
}

/// Fails with the worst offending pair when any residual exceeds `tol`.
pub fn check_continuity(p: &PwaPartition, pairs: &[FacetPair], tol: f64) -> Result<()> {
    let residuals = continuity_residuals(p, pairs);
    let worst = residuals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0));
    if let Some((idx, (res, at))) = worst {
        if *res > tol {
            return Err(Error::ContinuityViolation {
                i: pairs[idx].i,
                j: pairs[idx].j,
                residual: *res,
                at: at.as_ref().map(|x| x.iter().copied().collect()).unwrap_or_default(),
            });
        }
    }
    Ok(())
}
