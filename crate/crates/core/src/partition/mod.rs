//! Polyhedral piecewise-affine (PWA) control laws.
//!
//! A [`PwaPartition`] is a list of polyhedral regions `{x : Hx <= K}`, each
//! carrying an affine law `u = Fx + G`, restricted to an axis-aligned state
//! box. Point location is a sequential search with lowest-index tie-break.

mod document;
mod facets;
mod witness;

pub use document::{load_partition, BoxDocument, PartitionDocument, RegionDocument, ScalingRecord};
pub use facets::{
    check_continuity, continuity_residuals, find_facet_pairs, find_facet_pairs_with, FacetPair, FacetProbeOptions,
    DEFAULT_PROBES_PER_FACET, DEFAULT_PROBE_SEED,
};
pub use witness::find_witness;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::norms::vec_norm2_sq;

/// Absolute tolerance on `‖(F_i−F_j)x + (G_i−G_j)‖∞` at shared-facet points.
pub const DEFAULT_CONTINUITY_TOL: f64 = 1e-8;

/// Relative factor applied to the largest `|K|` entry to get the membership tolerance.
pub const MEMBERSHIP_TOL_FACTOR: f64 = 1.0 / (1u64 << 40) as f64;

/// Half-space boundary `h·x = k` with a nonzero normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    h: DVector<f64>,
    k: f64,
}

impl Hyperplane {
    pub fn new(h: DVector<f64>, k: f64) -> Result<Self> {
        if h.iter().all(|e| *e == 0.0) {
            return Err(Error::ZeroNormal { region: 0, row: 0 });
        }
        if !h.iter().all(|e| e.is_finite()) || !k.is_finite() {
            return Err(Error::Malformed("non-finite hyperplane data".into()));
        }
        Ok(Self { h, k })
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    /// `h·x − k`: nonpositive on the `≤` side.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        self.h.dot(x) - self.k
    }

    pub fn negated(&self) -> Self {
        Self {
            h: -&self.h,
            k: -self.k,
        }
    }

    /// Rescaled so that `‖h‖₂ = 1`; the `≤` side is unchanged.
    pub fn normalized(&self) -> Self {
        let norm = vec_norm2_sq(&self.h).sqrt();
        Self {
            h: &self.h / norm,
            k: self.k / norm,
        }
    }

    /// Unit-normal form with the sign fixed by the first nonzero component of `h`.
    /// `(h, k)` and `(−h, −k)` map to the same canonical hyperplane.
    pub fn canonical(&self) -> Self {
        let unit = self.normalized();
        let first = unit.h.iter().copied().find(|e| *e != 0.0).unwrap_or(1.0);
        if first < 0.0 {
            unit.negated()
        } else {
            unit
        }
    }

    /// Whether both hyperplanes describe the same oriented half-space, up to
    /// positive scaling, within `tol` on the unit-normal form.
    pub fn same_halfspace(&self, other: &Hyperplane, tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let a = self.normalized();
        let b = other.normalized();
        let dh = a.h.iter().zip(b.h.iter()).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        dh <= tol && (a.k - b.k).abs() <= tol * a.k.abs().max(1.0)
    }
}

/// Orthogonal projection of `x` onto `h·x = k`.
///
/// Returns `(x_p, t)` with `x_p = x + t·h'` and `t = (k − h·x)/‖h‖₂²`.
pub fn project_onto_hyperplane(x: &DVector<f64>, hp: &Hyperplane) -> (DVector<f64>, f64) {
    let t = (hp.k - hp.h.dot(x)) / vec_norm2_sq(&hp.h);
    (x + &hp.h * t, t)
}

/// Polyhedron `{x : Hx <= K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    h: DMatrix<f64>,
    k: DVector<f64>,
}

impl Region {
    pub fn new(h: DMatrix<f64>, k: DVector<f64>) -> Result<Self> {
        if h.nrows() != k.len() {
            return Err(Error::DimensionMismatch(format!(
                "H has {} rows but K has {} entries",
                h.nrows(),
                k.len()
            )));
        }
        if h.nrows() == 0 {
            return Err(Error::DimensionMismatch("region has no constraints".into()));
        }
        for (r, row) in h.row_iter().enumerate() {
            if row.iter().all(|e| *e == 0.0) {
                return Err(Error::ZeroNormal { region: 0, row: r });
            }
        }
        Ok(Self { h, k })
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn k(&self) -> &DVector<f64> {
        &self.k
    }

    pub fn num_constraints(&self) -> usize {
        self.k.len()
    }

    pub fn row(&self, r: usize) -> Hyperplane {
        Hyperplane {
            h: self.h.row(r).transpose(),
            k: self.k[r],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Hyperplane> + '_ {
        (0..self.num_constraints()).map(move |r| self.row(r))
    }

    /// `H_r · x` for row `r`.
    pub fn row_dot(&self, r: usize, x: &DVector<f64>) -> f64 {
        (0..self.h.ncols()).map(|c| self.h[(r, c)] * x[c]).sum()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        (0..self.num_constraints()).all(|r| self.row_dot(r, x) <= self.k[r] + tol)
    }

    /// Largest constraint violation `max_r (H_r x − K_r)`; nonpositive inside.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        (0..self.num_constraints())
            .map(|r| self.row_dot(r, x) - self.k[r])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Affine control law `u = Fx + G`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLaw {
    f: DMatrix<f64>,
    g: DVector<f64>,
}

impl AffineLaw {
    pub fn new(f: DMatrix<f64>, g: DVector<f64>) -> Result<Self> {
        if f.nrows() != g.len() {
            return Err(Error::DimensionMismatch(format!(
                "F has {} rows but G has {} entries",
                f.nrows(),
                g.len()
            )));
        }
        Ok(Self { f, g })
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.f * x + &self.g
    }
}

/// Axis-aligned box `lo <= x <= hi` of admissible states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBox {
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl StateBox {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch(format!(
                "state box lo has {} entries, hi has {}",
                lo.len(),
                hi.len()
            )));
        }
        for l in 0..lo.len() {
            if !lo[l].is_finite() || !hi[l].is_finite() {
                return Err(Error::InvalidBox(format!("coordinate {l} is unbounded")));
            }
            if lo[l] >= hi[l] {
                return Err(Error::InvalidBox(format!(
                    "coordinate {l} has zero or negative width ({} >= {})",
                    lo[l], hi[l]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> &DVector<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &DVector<f64> {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|l| self.lo[l] <= x[l] && x[l] <= self.hi[l])
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lo + &self.hi) * 0.5
    }

    pub fn max_extent(&self) -> f64 {
        (&self.hi - &self.lo).iter().fold(0.0, |a, e| a.max(*e))
    }

    /// Per-coordinate `max(|lo|, |hi|)`.
    pub fn abs_max(&self) -> DVector<f64> {
        self.lo.zip_map(&self.hi, |l, h| l.abs().max(h.abs()))
    }

    /// Largest 1-norm of any point in the box.
    pub fn max_norm1(&self) -> f64 {
        self.abs_max().sum()
    }

    /// Largest ∞-norm of any point in the box.
    pub fn max_norm_inf(&self) -> f64 {
        self.abs_max().max()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(self.dim(), |l, _| {
            let u: f64 = rng.random();
            self.lo[l] + u * (self.hi[l] - self.lo[l])
        })
    }
}

/// One region of a partition together with its law.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub region: Region,
    pub law: AffineLaw,
    /// A point known to lie in the region, if one was supplied or found.
    pub witness: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PwaPartition {
    n: usize,
    m: usize,
    pieces: Vec<Piece>,
    state_box: StateBox,
    tol: f64,
}

impl PwaPartition {
    /// Builds a partition after checking structural invariants (dimensions,
    /// nonzero normals, a finite box). Nonemptiness and continuity are checked
    /// by [`PwaPartition::validate`].
    pub fn new(n: usize, m: usize, pieces: Vec<Piece>, state_box: StateBox) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::DimensionMismatch(format!("need n >= 1 and m >= 1 (got n={n}, m={m})")));
        }
        if pieces.is_empty() {
            return Err(Error::DimensionMismatch("partition has no regions".into()));
        }
        if state_box.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "state box has dimension {}, expected {n}",
                state_box.dim()
            )));
        }
        let mut max_k: f64 = 0.0;
        for (idx, piece) in pieces.iter().enumerate() {
            let (r, l) = (&piece.region, &piece.law);
            if r.h.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "region {idx}: H has {} columns, expected {n}",
                    r.h.ncols()
                )));
            }
            if l.f.nrows() != m || l.f.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "region {idx}: F is {}x{}, expected {m}x{n}",
                    l.f.nrows(),
                    l.f.ncols()
                )));
            }
            if let Some(w) = &piece.witness {
                if w.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "region {idx}: witness has {} entries, expected {n}",
                        w.len()
                    )));
                }
            }
            let finite = r.h.iter().chain(r.k.iter()).chain(l.f.iter()).chain(l.g.iter()).all(|e| e.is_finite());
            if !finite {
                return Err(Error::Malformed(format!("region {idx} contains non-finite data")));
            }
            for row in 0..r.num_constraints() {
                if r.h.row(row).iter().all(|e| *e == 0.0) {
                    return Err(Error::ZeroNormal { region: idx, row });
                }
            }
            max_k = r.k.iter().fold(max_k, |a, e| a.max(e.abs()));
        }
        Ok(Self {
            n,
            m,
            pieces,
            state_box,
            tol: MEMBERSHIP_TOL_FACTOR * max_k,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_regions(&self) -> usize {
        self.pieces.len()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn piece(&self, i: usize) -> Result<&Piece> {
        self.pieces.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            count: self.pieces.len(),
        })
    }

    pub fn region(&self, i: usize) -> &Region {
        &self.pieces[i].region
    }

    pub fn law(&self, i: usize) -> &AffineLaw {
        &self.pieces[i].law
    }

    pub fn state_box(&self) -> &StateBox {
        &self.state_box
    }

    /// Membership tolerance used by [`PwaPartition::locate`].
    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Smallest region index `i` with `H_i x <= K_i + tol`, if any.
    pub fn locate(&self, x: &DVector<f64>) -> Option<usize> {
        debug_assert_eq!(x.len(), self.n);
        self.pieces.iter().position(|p| p.region.contains(x, self.tol))
    }

    /// `F_i x + G_i` in working precision.
    pub fn evaluate_law(&self, i: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "state has {} entries, expected {}",
                x.len(),
                self.n
            )));
        }
        Ok(self.piece(i)?.law.evaluate(x))
    }

    /// Exact PWA value `u(x)`, or `None` outside every region.
    pub fn evaluate(&self, x: &DVector<f64>) -> Option<(usize, DVector<f64>)> {
        let i = self.locate(x)?;
        Some((i, self.pieces[i].law.evaluate(x)))
    }

    /// Checks that every region is nonempty inside the box (finding witnesses
    /// where none were supplied) and that the law is continuous across every
    /// detected shared facet. On success the found witnesses are stored.
    pub fn validate(&mut self, continuity_tol: f64) -> Result<Vec<FacetPair>> {
        for idx in 0..self.pieces.len() {
            let w = find_witness(self, idx)?;
            self.pieces[idx].witness = Some(w);
        }
        let pairs = find_facet_pairs(self, default_probe_step(&self.state_box));
        check_continuity(self, &pairs, continuity_tol)?;
        Ok(pairs)
    }
}

/// Probe offset used when none is given: a millionth of the widest box side.
pub fn default_probe_step(b: &StateBox) -> f64 {
    1e-6 * b.max_extent()
}

/// Geometric hypotheses of the jump bound for a state and a facet pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AssumptionFlags {
    /// Projection of `x` onto the pair hyperplane lies in region `i` (within tol).
    pub projection_in_facet: bool,
    /// `h·x <= k`, i.e. `x` is on the `P_j` side.
    pub x_on_correct_side: bool,
}

/// Checks whether `x` satisfies the geometric hypotheses for a jump from
/// `P_j` into `P_i` across `fp`.
pub fn check_assumptions(p: &PwaPartition, fp: &FacetPair, x: &DVector<f64>, tol: f64) -> AssumptionFlags {
    let (xp, _) = project_onto_hyperplane(x, &fp.hp);
    AssumptionFlags {
        projection_in_facet: p.region(fp.i).contains(&xp, tol),
        x_on_correct_side: fp.hp.residual(x) <= 0.0,
    }
}
