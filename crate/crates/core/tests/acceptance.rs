//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::alloc::{GlobalAlloc, Layout, System};
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use ma_chanest::channel::random_on_grid_channel;
use ma_chanest::estimate::{collect_measurements, vectorization_consistency_check};
use ma_chanest::grid::{flat_index, AngleGrid, GridIndex4};
use ma_chanest::harness::{sweep, write_sweep_csv, AggregateRow, Axis, ExperimentConfig, SetupSpec, SweepResult};
use ma_chanest::measure::{
    effective_coherence_1d, gen_cross, gen_random, gen_upa, half_power_width, ideal_sinc_coherence,
    max_beyond_main_lobe, mutual_coherence_column, uniform_positions, MeasurementOperator, OperatorMode,
};
use ma_chanest::metrics::coeff_error;
use ma_chanest::{extract_paths, omp, ChannelRealization, NoiseModel, OmpConfig, SetupKind};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn c1_operator() -> Outcome {
    let start = Instant::now();
    let grid = AngleGrid::new(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst_apply = 0.0f64;
    let mut worst_adjoint = 0.0f64;
    for _ in 0..100 {
        let plan = gen_random(2.0, 16, &mut rng).unwrap();
        let explicit = MeasurementOperator::new(plan.clone(), grid, OperatorMode::Explicit).unwrap();
        let free = MeasurementOperator::new(plan, grid, OperatorMode::MatrixFree).unwrap();
        let u = random_vec(&mut rng, grid.atoms());
        let a = explicit.apply(&u).unwrap();
        let b = free.apply(&u).unwrap();
        let diff: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        worst_apply = worst_apply.max(norm(&diff) / norm(&a));

        let y = random_vec(&mut rng, 16);
        let lhs = inner(&y, &free.apply(&u).unwrap());
        let rhs = inner(&free.adjoint_apply(&y).unwrap(), &u);
        worst_adjoint = worst_adjoint.max((lhs - rhs).norm() / (norm(&y) * norm(&b)));
    }
    let elapsed = start.elapsed();
    outcome(
        worst_apply < 1e-10 && worst_adjoint < 1e-10 && elapsed < Duration::from_secs(5),
        format!("apply rel err {worst_apply:.2e}, adjoint rel err {worst_adjoint:.2e}, {elapsed:.2?}"),
    )
}

fn c2_vectorization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let results: Vec<bool> = (2..=4).map(|n| vectorization_consistency_check(n, 10, &mut rng).unwrap()).collect();
    outcome(results.iter().all(|&b| b), format!("N=2,3,4 -> {results:?}"))
}

fn c3_coherence() -> Outcome {
    let grid = AngleGrid::new(24).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1003);

    // diagonal of the mutual coherence is exactly one
    let small = AngleGrid::new(6).unwrap();
    let mut diag_ok = true;
    for plan in [gen_random(2.0, 50, &mut rng).unwrap(), gen_cross(2.0, 0.4).unwrap(), gen_upa(2.0, 0.5).unwrap()] {
        let op = MeasurementOperator::matrix_free(plan, small).unwrap();
        for n_ref in [1, 777, small.atoms()] {
            diag_ok &= mutual_coherence_column(&op, n_ref).unwrap()[n_ref - 1] == Complex64::new(1.0, 0.0);
        }
    }

    // uniform sampling against the Dirichlet kernel
    let values = grid.values();
    let mut dirichlet_err = 0.0f64;
    for spacing in [0.25, 0.4, 0.5] {
        let xs = uniform_positions(2.0, spacing);
        let m = xs.len() as f64;
        let c = effective_coherence_1d(&xs, &grid).unwrap();
        for k in 0..24 {
            for kp in 0..24 {
                if k == kp {
                    continue;
                }
                let delta = values[kp] - values[k];
                let den = (PI * spacing * delta).sin();
                let want = if den.abs() < 1e-15 { 1.0 } else { ((m * PI * spacing * delta).sin() / (m * den)).abs() };
                dirichlet_err = dirichlet_err.max((c[(k, kp)].norm() - want).abs());
            }
        }
    }

    let sinc = ideal_sinc_coherence(2.0, &grid, 1).unwrap();

    let row = |spacing: f64, span: f64| -> Vec<f64> {
        let c = effective_coherence_1d(&uniform_positions(span, spacing), &grid).unwrap();
        (0..24).map(|k| c[(0, k)].norm()).collect()
    };
    let alias_peak = row(1.0, 2.0)[12];
    let sidelobe = max_beyond_main_lobe(&row(0.4, 2.0));

    // the main lobe narrows when the sampled span covers the whole region
    let half = half_power_width(&row(0.1, 1.0));
    let full = half_power_width(&row(0.1, 2.0));

    let pass = diag_ok
        && dirichlet_err < 1e-10
        && (sinc - 0.9549297).abs() < 1e-6
        && alias_peak >= 0.99
        && sidelobe < 0.5
        && full < half;
    outcome(
        pass,
        format!(
            "diag exact {diag_ok}, Dirichlet err {dirichlet_err:.1e}, sinc(p=1) {sinc:.7}, alias peak {alias_peak:.4}, \
             0.4 sidelobe {sidelobe:.3}, half-power width {half} -> {full}"
        ),
    )
}

fn true_support(ch: &ChannelRealization, grid: &AngleGrid) -> Vec<usize> {
    let mut s: Vec<usize> = ch
        .paths
        .iter()
        .map(|p| {
            let q = |v| grid.quantize(v).unwrap();
            flat_index(GridIndex4::new(q(p.aod.phi), q(p.aod.theta), q(p.aoa.phi), q(p.aoa.theta)), grid.n()).unwrap()
        })
        .collect();
    s.sort_unstable();
    s
}

fn c4_noiseless_recovery() -> Outcome {
    let start = Instant::now();
    let grid = AngleGrid::new(8).unwrap();
    let cfg = OmpConfig::new(1e-6, 32, 0.0).unwrap();
    let noise = NoiseModel::noiseless(1.0).unwrap();
    let mut recovered = 0;
    let mut worst_coeff = 0.0f64;
    let trials = 200;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(40_000 + t);
        let l = 1 + (t as usize % 3);
        let ch = random_on_grid_channel(l, &grid, t, &mut rng).unwrap();
        let plan = gen_random(2.0, 64, &mut rng).unwrap();
        let v = collect_measurements(&ch, &plan, &noise, &mut rng);
        let op = MeasurementOperator::matrix_free(plan, grid).unwrap();
        let Ok(est) = omp(&op, &v, 1.0, &cfg) else { continue };
        let mut support = est.support.clone();
        support.sort_unstable();
        if support == true_support(&ch, &grid) {
            recovered += 1;
            let e = coeff_error(&ch, &extract_paths(&est, &grid).unwrap()).unwrap();
            worst_coeff = worst_coeff.max(e);
        }
    }
    let elapsed = start.elapsed();
    let rate = recovered as f64 / trials as f64;
    outcome(
        rate >= 0.95 && worst_coeff < 1e-8 && elapsed < Duration::from_secs(120),
        format!("support recovered {recovered}/{trials}, worst coeff error {worst_coeff:.1e}, {elapsed:.2?}"),
    )
}

fn desk(kind: SetupKind, trials: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        trials,
        master_seed: seed,
        timing: false,
        setup: SetupSpec::new(kind),
        ..ExperimentConfig::desk()
    }
}

fn pooled_se(a: &AggregateRow, b: &AggregateRow) -> f64 {
    (a.nmse_se.powi(2) + b.nmse_se.powi(2)).sqrt()
}

/// Each step may not increase the mean by more than one pooled standard error.
fn non_increasing(rows: &[AggregateRow]) -> bool {
    rows.windows(2).all(|w| w[1].nmse_mean <= w[0].nmse_mean + pooled_se(&w[0], &w[1]))
}

fn means(rows: &[AggregateRow]) -> String {
    rows.iter().map(|r| format!("{}: {:.4}±{:.4}", r.value, r.nmse_mean, r.nmse_se)).collect::<Vec<_>>().join(", ")
}

fn failures(res: &SweepResult) -> usize {
    res.failures()
}

fn c5_setups_vs_m() -> Outcome {
    let start = Instant::now();
    let random =
        sweep(&desk(SetupKind::RandomDistribution, 100, 5), Axis::Measurements, &[64.0, 144.0, 256.0], workers())
            .unwrap();
    let cross = sweep(&desk(SetupKind::CrossShape, 100, 5), Axis::Measurements, &[144.0], workers()).unwrap();
    let elapsed = start.elapsed();
    let r144 = &random.aggregates[1];
    let c144 = &cross.aggregates[0];
    let margin = c144.nmse_mean - r144.nmse_mean;
    let se = pooled_se(r144, c144);
    let pass = margin >= se
        && non_increasing(&random.aggregates)
        && failures(&random) + failures(&cross) == 0
        && elapsed < Duration::from_secs(15 * 60);
    outcome(
        pass,
        format!(
            "random M {{{}}}; cross@144 {:.4}±{:.4}; margin {margin:.4} vs pooled SE {se:.4}; {elapsed:.2?}",
            means(&random.aggregates),
            c144.nmse_mean,
            c144.nmse_se
        ),
    )
}

fn c6_grid_size() -> Outcome {
    let start = Instant::now();
    let mut cfg = desk(SetupKind::RandomDistribution, 100, 6);
    cfg.setup = cfg.setup.with_measurements(256);
    let res = sweep(&cfg, Axis::GridN, &[8.0, 12.0, 16.0, 24.0], workers()).unwrap();
    outcome(
        non_increasing(&res.aggregates) && failures(&res) == 0,
        format!("N {{{}}}; {:.2?}", means(&res.aggregates), start.elapsed()),
    )
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn c7_snr() -> Outcome {
    let start = Instant::now();
    let mut cfg = desk(SetupKind::RandomDistribution, 100, 7);
    cfg.setup = cfg.setup.with_measurements(256);
    let res = sweep(&cfg, Axis::Snr, &[0.0, 10.0, 20.0], workers()).unwrap();
    let a = &res.aggregates;
    let gain_low = db(a[0].nmse_mean) - db(a[1].nmse_mean);
    let gain_high = db(a[1].nmse_mean) - db(a[2].nmse_mean);
    let decreasing = a.windows(2).all(|w| w[1].nmse_mean < w[0].nmse_mean);
    outcome(
        decreasing && gain_high < gain_low && failures(&res) == 0,
        format!("SNR {{{}}}; gain 0->10 {gain_low:.2} dB, 10->20 {gain_high:.2} dB; {:.2?}", means(a), start.elapsed()),
    )
}

fn c8_position_optimization() -> Outcome {
    let start = Instant::now();
    let mut cfg = desk(SetupKind::RandomDistribution, 100, 8);
    cfg.paths = 5;
    cfg.setup = cfg.setup.with_measurements(256);
    let res = sweep(&cfg, Axis::Measurements, &[256.0], workers()).unwrap();
    let ok: Vec<_> = res.rows.iter().map(|r| &r.record).filter(|r| !r.failed()).collect();
    let ordered = ok.iter().filter(|r| r.max_snr >= r.achieved_snr && r.achieved_snr >= r.fpa_snr).count();
    let agg = &res.aggregates[0];
    let gap = db(agg.max_snr_mean) - db(agg.achieved_snr_mean);
    let pass = ok.len() == 100 && ordered >= 95 && gap <= 1.0;
    outcome(
        pass,
        format!(
            "ordered {ordered}/100; mean SNR perfect {:.2} dB, estimated {:.2} dB, FPA {:.2} dB (gap {gap:.3} dB); {:.2?}",
            db(agg.max_snr_mean),
            db(agg.achieved_snr_mean),
            db(agg.fpa_snr_mean),
            start.elapsed()
        ),
    )
}

fn c9_determinism() -> Outcome {
    let mut cfg = desk(SetupKind::RandomWalk, 12, 9);
    cfg.grid_n = 8;
    let csv = |workers: usize| {
        let res = sweep(&cfg, Axis::Measurements, &[64.0, 100.0], workers).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&res.rows, &mut buf).unwrap();
        buf
    };
    let a = csv(workers());
    let b = csv(workers());
    let c = csv(1);
    outcome(a == b && a == c, format!("{} bytes, repeat identical {}, 1-worker identical {}", a.len(), a == b, a == c))
}

fn c10_complexity() -> Outcome {
    let grid = AngleGrid::new(24).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let plan = gen_random(2.0, 144, &mut rng).unwrap();
    let ch = ma_chanest::channel::random_channel(3, 0, &mut rng).unwrap();
    let v = collect_measurements(&ch, &plan, &NoiseModel::from_snr_db(20.0).unwrap(), &mut rng);
    let cfg = OmpConfig::new(0.1, 1, 0.0).unwrap();

    let baseline = CURRENT.load(Ordering::Relaxed);
    PEAK.store(baseline, Ordering::Relaxed);
    let start = Instant::now();
    let op = MeasurementOperator::matrix_free(plan, grid).unwrap();
    let est = omp(&op, &v, 1.0, &cfg).unwrap();
    let elapsed = start.elapsed();
    let peak = PEAK.load(Ordering::Relaxed) - baseline;
    drop(op);
    let mb = peak as f64 / (1024.0 * 1024.0);
    outcome(
        est.iterations() == 1 && elapsed < Duration::from_secs(5) && mb < 100.0,
        format!("1 iteration in {elapsed:.2?}, peak allocation {mb:.1} MiB"),
    )
}

fn main() {
    // `cargo test` passes harness flags; a name filter selects criteria
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("C1 operator correctness", c1_operator),
        ("C2 vectorization consistency", c2_vectorization),
        ("C3 coherence ground truth", c3_coherence),
        ("C4 noiseless exact recovery", c4_noiseless_recovery),
        ("C5 NMSE vs M and setup", c5_setups_vs_m),
        ("C6 NMSE vs grid size", c6_grid_size),
        ("C7 NMSE vs SNR", c7_snr),
        ("C8 SNR ordering", c8_position_optimization),
        ("C9 sweep determinism", c9_determinism),
        ("C10 complexity guard", c10_complexity),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let r = run();
        println!("{} {name}: {}", if r.pass { "PASS" } else { "FAIL" }, r.detail);
        if !r.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
