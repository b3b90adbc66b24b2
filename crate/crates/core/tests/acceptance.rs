//! Acceptance gate. Runs every criterion at its stated size and tolerance,
//! prints one PASS/FAIL line per criterion and exits nonzero on any failure.
//!
//! Reference values are recomputed here with plain `f64` arithmetic on
//! explicitly rounded copies of the data. For the formats used (at most 9
//! fraction bits, magnitudes below 2^6) every product and sum of quantized
//! values is exact in `f64`, so these oracles need no big-integer support.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pwaquant::bounds::{delta_bound, BoundReport, BoundsAnalyzer};
use pwaquant::fixtures;
use pwaquant::harness::{
    default_band_width, facet_report_with, run_sweep_with, ExperimentConfig, SamplingMode,
};
use pwaquant::norms::mat_norm_inf;
use pwaquant::partition::{Hyperplane, PwaPartition};
use pwaquant::quantize::{quantize_partition, FixedPointFormat, Formats, QuantizedPartition};
use pwaquant::rescale::{compute_scaling, rescale_partition, rescaled_delta_bound};

const SLACK: f64 = 1e-12;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn fmt(a: u32, b: u32) -> FixedPointFormat {
    FixedPointFormat::new(a, b).unwrap()
}

fn formats(a: u32, b: u32) -> Formats {
    Formats::uniform(fmt(a, b))
}

/// Round to the nearest multiple of `2^-b`, ties to even.
fn round_to(z: f64, b: u32) -> f64 {
    let s = 2f64.powi(b as i32);
    (z * s).round_ties_even() / s
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|e| e.abs()).sum()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, e| a.max(e.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn oracle_delta(h: &[f64], x: &[f64], eps: f64) -> f64 {
    let n = x.len() as f64;
    eps * (norm1(h) + norm1(x) + n * eps + 1.0)
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn sweep(p: &PwaPartition, qp: &QuantizedPartition, mode: SamplingMode, count: usize, seed: u64) -> Vec<BoundReport> {
    let analyzer = BoundsAnalyzer::new(p, qp);
    let mut cfg = ExperimentConfig::new(*qp.formats());
    cfg.sample_count = count;
    cfg.seed = seed;
    cfg.mode = mode;
    cfg.drop_threshold = 0.0;
    run_sweep_with(&analyzer, &cfg).unwrap().reports
}

fn near_facets(p: &PwaPartition, f: &Formats) -> SamplingMode {
    let pairs = BoundsAnalyzer::new(p, &quantize_partition(p, *f).unwrap()).pairs().to_vec();
    SamplingMode::NearFacets {
        band_width: default_band_width(p, &pairs, f),
    }
}

/// Quantized controller evaluated independently: first region whose rounded
/// rows hold at the rounded state, and its rounded law there.
fn oracle_quantized(p: &PwaPartition, x: &[f64], b: u32) -> Option<(usize, Vec<f64>)> {
    let xq: Vec<f64> = x.iter().map(|z| round_to(*z, b)).collect();
    for (idx, piece) in p.pieces().iter().enumerate() {
        let h = rows_of(piece.region.h());
        let inside = h.iter().zip(piece.region.k().iter()).all(|(row, k)| {
            let rq: Vec<f64> = row.iter().map(|z| round_to(*z, b)).collect();
            dot(&rq, &xq) - round_to(*k, b) <= 0.0
        });
        if inside {
            let f = rows_of(piece.law.f());
            let u = f
                .iter()
                .zip(piece.law.g().iter())
                .map(|(row, g)| {
                    let fq: Vec<f64> = row.iter().map(|z| round_to(*z, b)).collect();
                    dot(&fq, &xq) + round_to(*g, b)
                })
                .collect();
            return Some((idx, u));
        }
    }
    None
}

// ---------------------------------------------------------------------------

fn residual_perturbation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e44a);
    let mut violations = 0usize;
    let mut mismatches = 0usize;
    let mut worst_ratio: f64 = 0.0;
    let per_format = 1_000_000;
    for b in [2u32, 5, 9] {
        let eps = 2f64.powi(-(b as i32));
        for _ in 0..per_format {
            let n = rng.random_range(1..=4);
            let h: Vec<f64> = (0..n).map(|_| rng.random_range(-15.0..=15.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-15.0..=15.0)).collect();
            let k: f64 = rng.random_range(-15.0..=15.0);
            if norm1(&h) == 0.0 {
                continue;
            }
            let y = dot(&h, &x) - k;
            let hq: Vec<f64> = h.iter().map(|z| round_to(*z, b)).collect();
            let xq: Vec<f64> = x.iter().map(|z| round_to(*z, b)).collect();
            let y_hat = dot(&hq, &xq) - round_to(k, b);
            let hp = Hyperplane::new(DVector::from_vec(h.clone()), k).unwrap();
            let delta = delta_bound(&hp, &DVector::from_vec(x.clone()), eps, n);
            if (delta - oracle_delta(&h, &x, eps)).abs() > SLACK {
                mismatches += 1;
            }
            let gap = (y_hat - y).abs();
            worst_ratio = worst_ratio.max(gap / delta);
            if gap > delta {
                violations += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        violations == 0 && mismatches == 0 && secs < 60.0,
        format!(
            "{} triples, {violations} violations, {mismatches} delta mismatches, max |dy|/delta {worst_ratio:.3}, {secs:.1}s",
            3 * per_format
        ),
    )
}

fn jump_localization() -> Outcome {
    let p = fixtures::tiles2();
    let f = formats(12, 5);
    let eps = f.state.step();
    let qp = quantize_partition(&p, f).unwrap();
    let reports = sweep(&p, &qp, near_facets(&p, &f), 100_000, 101);
    let (mut jumps, mut facet_jumps, mut violations, mut flag_violations) = (0, 0, 0, 0);
    for r in &reports {
        let Some(i) = r.region_quant else { continue };
        if i == r.region_true {
            continue;
        }
        jumps += 1;
        if !r.flags.corner_jump {
            facet_jumps += 1;
            if !r.flags.certificate {
                flag_violations += 1;
            }
        }
        // Every row of the quantized region that x violates must be violated
        // by less than its residual bound.
        let region = p.region(i);
        for (row, k) in rows_of(region.h()).iter().zip(region.k().iter()) {
            let v = dot(row, &r.x) - k;
            if v > 0.0 && v >= oracle_delta(row, &r.x, eps) {
                violations += 1;
            }
        }
    }
    (
        facet_jumps > 0 && violations == 0 && flag_violations == 0,
        format!(
            "{} samples, {jumps} jumps ({facet_jumps} across a shared facet), {violations} oracle violations, {flag_violations} certificate-flag violations",
            reports.len()
        ),
    )
}

/// Checks one report against the independent quantized evaluation and the
/// same-region bound formulas. Returns the number of disagreements.
fn cross_check(p: &PwaPartition, r: &BoundReport, b: u32) -> usize {
    let mut bad = 0;
    let oracle = oracle_quantized(p, &r.x, b);
    if oracle.as_ref().map(|o| o.0) != r.region_quant {
        return 1;
    }
    let Some((i, u_hat)) = oracle else { return 0 };
    let x = DVector::from_vec(r.x.clone());
    let u = p.law(r.region_true).evaluate(&x);
    let diff: Vec<f64> = u_hat.iter().zip(u.iter()).map(|(a, c)| a - c).collect();
    if (norm_inf(&diff) - r.actual_error.unwrap()).abs() > SLACK {
        bad += 1;
    }
    let eps = 2f64.powi(-(b as i32));
    let n = r.x.len() as f64;
    let xi = norm_inf(&r.x);
    let f = p.law(i).f();
    let d_f = DMatrix::from_fn(f.nrows(), f.ncols(), |a, c| round_to(f[(a, c)], b) - f[(a, c)]);
    let f_hat = DMatrix::from_fn(f.nrows(), f.ncols(), |a, c| round_to(f[(a, c)], b));
    let d_g: Vec<f64> = p.law(i).g().iter().map(|g| round_to(*g, b) - g).collect();
    let post = mat_norm_inf(&d_f) * xi + norm_inf(&d_g) + mat_norm_inf(&f_hat) * eps;
    let prio = eps * (mat_norm_inf(f) + n * xi + n * eps + 1.0);
    if (post - r.second_aposteriori.unwrap()).abs() > SLACK || (prio - r.second_apriori.unwrap()).abs() > SLACK {
        bad += 1;
    }
    bad
}

fn bound_dominance() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for name in fixtures::NAMES {
        let p = fixtures::by_name(name).unwrap();
        for (a, b) in [(12u32, 5u32), (16, 9)] {
            let f = formats(a, b);
            let qp = quantize_partition(&p, f).unwrap();
            let mut reports = sweep(&p, &qp, SamplingMode::BoxUniform, 100_000, 7);
            reports.extend(sweep(&p, &qp, near_facets(&p, &f), 100_000, 8));
            let (mut claimed, mut violations, mut unclaimed, mut flagless, mut disagreements) = (0, 0, 0, 0, 0);
            for r in &reports {
                disagreements += cross_check(&p, r, b);
                if r.claims_bound() {
                    claimed += 1;
                    let (act, post, prio) = (
                        r.actual_error.unwrap(),
                        r.bound_aposteriori.unwrap(),
                        r.bound_apriori.unwrap(),
                    );
                    if act > post + SLACK || post > prio + SLACK {
                        violations += 1;
                    }
                } else {
                    unclaimed += 1;
                    let f = &r.flags;
                    if !(f.no_region || f.corner_jump || !f.projection_in_facet) {
                        flagless += 1;
                    }
                }
            }
            ok &= violations == 0 && flagless == 0 && disagreements == 0 && claimed > 0;
            details.push(format!(
                "{name}@({a},{b}): {claimed} claimed/{violations} viol/{unclaimed} unclaimed/{disagreements} oracle diffs"
            ));
        }
    }
    (ok, details.join("; "))
}

fn amplification() -> Outcome {
    let p = fixtures::tiles2();
    let f = formats(12, 5);
    let eps = f.state.step();
    let qp = quantize_partition(&p, f).unwrap();
    let reports = sweep(&p, &qp, near_facets(&p, &f), 100_000, 202);
    let max_actual = reports.iter().filter_map(|r| r.actual_error).fold(0.0, f64::max);
    let max_jump = reports
        .iter()
        .filter(|r| r.flags.jump)
        .filter_map(|r| r.actual_error)
        .fold(0.0, f64::max);
    let same_region = (0..p.num_regions())
        .map(|i| mat_norm_inf(&qp.region(i).f) * eps)
        .fold(0.0, f64::max);
    (
        max_actual > 2.0 * eps && max_jump > same_region,
        format!(
            "max actual {max_actual:.5} (> {:.5}), max jump error {max_jump:.5} vs largest |F^|eps {same_region:.5} ({:.0}% of eps)",
            2.0 * eps,
            100.0 * max_jump / eps
        ),
    )
}

fn table_analog() -> Outcome {
    let p = fixtures::tiles2();
    let f = formats(16, 9);
    let qp = quantize_partition(&p, f).unwrap();
    let analyzer = BoundsAnalyzer::new(&p, &qp);
    let mut cfg = ExperimentConfig::new(f);
    cfg.sample_count = 100_000;
    cfg.seed = 303;
    cfg.mode = near_facets(&p, &f);
    let rows = facet_report_with(&analyzer, &cfg).unwrap();
    let equal_gain = [(2, 3), (4, 5)];
    let mut ok = !rows.is_empty();
    let mut lines = Vec::new();
    for r in &rows {
        let want_trivial = equal_gain.contains(&(r.i, r.j));
        ok &= r.trivial == want_trivial && r.max_actual <= r.max_aposteriori + SLACK && r.samples_used > 0;
        lines.push(format!(
            "({},{}) post {:.2e} act {:.2e}{}",
            r.i,
            r.j,
            r.max_aposteriori,
            r.max_actual,
            if r.trivial { " trivial" } else { "" }
        ));
    }
    (ok, lines.join("; "))
}

fn sharpness() -> Outcome {
    let p = fixtures::tiles2();
    let f = formats(12, 5);
    let qp = quantize_partition(&p, f).unwrap();
    let reports = sweep(&p, &qp, near_facets(&p, &f), 100_000, 404);
    let mut ratios: Vec<f64> = reports
        .iter()
        .filter(|r| r.flags.jump && r.claims_bound())
        .filter(|r| [0, 1].contains(&r.region_true) && r.region_quant.is_some_and(|q| q <= 1))
        .map(|r| r.bound_aposteriori.unwrap() / r.actual_error.unwrap())
        .collect();
    ratios.sort_by(f64::total_cmp);
    if ratios.is_empty() {
        return (false, "no jumps across the differing-gain facet (0,1)".into());
    }
    let median = ratios[ratios.len() / 2];
    let dominated = ratios[0] >= 1.0 - SLACK;
    (
        dominated,
        format!(
            "{} jumps across (0,1), median post/actual {median:.2} ({} [1, 20]), min {:.2}",
            ratios.len(),
            if (1.0..=20.0).contains(&median) { "inside" } else { "outside" },
            ratios[0]
        ),
    )
}

fn rescaling() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for (seed, name) in fixtures::NAMES.iter().enumerate() {
        let p = fixtures::by_name(name).unwrap();
        let s = compute_scaling(p.state_box());
        let r = rescale_partition(&p, &s).unwrap();
        let d = s.diag();
        let rows: Vec<(Vec<f64>, f64)> = r
            .pieces()
            .iter()
            .flat_map(|pc| rows_of(pc.region.h()).into_iter().zip(pc.region.k().iter().copied()))
            .collect();
        let normalized = rows.iter().all(|(h, k)| norm1(h) <= 1.0 && k.abs() <= 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let (mut loc_diff, mut val_diff, mut delta_viol) = (0, 0, 0);
        for _ in 0..10_000 {
            let x = p.state_box().sample(&mut rng);
            let y = DVector::from_iterator(x.len(), x.iter().zip(d.iter()).map(|(a, b)| a * b));
            let i = p.locate(&x);
            if i != r.locate(&y) {
                loc_diff += 1;
            }
            if let Some(i) = i {
                let u = p.law(i).evaluate(&x);
                let v = r.law(i).evaluate(&y);
                if (u - v).amax() > SLACK {
                    val_diff += 1;
                }
            }
            let ys: Vec<f64> = y.iter().copied().collect();
            for b in [2, 5, 9] {
                let eps = 2f64.powi(-b);
                let uniform = rescaled_delta_bound(eps, p.n());
                if rows.iter().any(|(h, _)| oracle_delta(h, &ys, eps) > uniform) {
                    delta_viol += 1;
                }
            }
        }
        ok &= normalized && loc_diff == 0 && val_diff == 0 && delta_viol == 0;
        details.push(format!(
            "{name}: rows normalized {normalized}, {loc_diff} locate / {val_diff} value / {delta_viol} delta mismatches"
        ));
    }
    (ok, details.join("; "))
}

fn quantization_properties() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a);
    for (a, b) in [(8u32, 2u32), (12, 5), (16, 9), (24, 12), (32, 16), (53, 40)] {
        let f = fmt(a, b);
        let eps = f.step();
        let (lo, hi) = (f.min_value(), f.max_value());
        let mut bad = 0;
        let mut prev: Option<(f64, f64)> = None;
        for _ in 0..1_000_000 {
            let z = rng.random_range(lo..=hi);
            let q = f.quantize(z).unwrap();
            if (q - z).abs() > eps / 2.0 || q != round_to(z, b) || f.quantize(q).unwrap() != q {
                bad += 1;
            }
            if let Some((pz, pq)) = prev {
                if (pz <= z && pq > q) || (z <= pz && q > pq) {
                    bad += 1;
                }
            }
            prev = Some((z, q));
        }
        let top = 2f64.powi(a as i32 - 1 - b as i32);
        let boundaries = f.quantize(-top).is_ok()
            && f.quantize(top - eps).is_ok()
            && f.quantize(top - eps).unwrap() == top - eps
            && f.quantize((-top).next_down()).is_err()
            && f.quantize((top - eps).next_up()).is_err()
            && f.quantize(top).is_err()
            && f.quantize(f64::NAN).is_err();
        ok &= bad == 0 && boundaries;
        details.push(format!("({a},{b}): {bad} bad, boundaries {boundaries}"));
    }
    // Wide formats, where the top of the range is not an f64.
    for (a, b) in [(64u32, 0u32), (64, 60), (60, 30)] {
        let f = fmt(a, b);
        let top = 2f64.powi(a as i32 - 1 - b as i32);
        let boundaries = f.quantize(-top).is_ok()
            && f.quantize(top.next_down()).is_ok()
            && f.quantize(top).is_err()
            && f.quantize((-top).next_down()).is_err();
        ok &= boundaries;
        details.push(format!("({a},{b}): boundaries {boundaries}"));
    }
    (ok, details.join("; "))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/tiles2.json");
    let run = |tag: &str, threads: &str, mode: &str| -> Vec<u8> {
        let out = dir.path().join(format!("{tag}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_pwaquant"))
            .args(["sweep", fixture, "--a", "12", "--b", "5", "--n", "100000", "--seed", "7"])
            .args(["--mode", mode, "--threads", threads, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let mut ok = true;
    let mut details = Vec::new();
    for mode in ["box", "facets"] {
        let a = run(&format!("{mode}-a"), "1", mode);
        let b = run(&format!("{mode}-b"), "1", mode);
        let c = run(&format!("{mode}-c"), "4", mode);
        let same = a == b && a == c && !a.is_empty();
        ok &= same;
        details.push(format!(
            "{mode}: {} rows, repeat identical {}, 1 vs 4 threads identical {}",
            a.iter().filter(|c| **c == b'\n').count().saturating_sub(1),
            a == b,
            a == c
        ));
    }
    (ok, details.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("residual-perturbation", residual_perturbation),
        ("jump-localization", jump_localization),
        ("bound-dominance", bound_dominance),
        ("error-amplification", amplification),
        ("facet-table", table_analog),
        ("aposteriori-sharpness", sharpness),
        ("rescaling", rescaling),
        ("quantization-properties", quantization_properties),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        failed += usize::from(!ok);
        println!(
            "{} {name} [{:.1}s]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
