//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! A criterion marked `known_failure` is still evaluated exactly as stated
//! and still printed as FAIL, but does not fail the run. The run fails if
//! any other criterion fails, or if a known failure unexpectedly passes.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use faer::{c64, Col, Mat};
use irs_hybrid::beamforming::{project_hybrid, r_max, relaxed_beamformers, water_filling};
use irs_hybrid::channel_model::{general_upa_vector, SystemDims, UpaGeometry};
use irs_hybrid::dbm_to_watts;
use irs_hybrid::effective_channel::{build_effective, gram_sum, total_channel, EffectiveChannel};
use irs_hybrid::evaluation::spectral_efficiency;
use irs_hybrid::experiments::{run_sweep, trial_channel, ExperimentConfig, MethodId, Sweep, SweepOutput};
use irs_hybrid::reflection::{asymptotic_reflection, project_reflection, relaxed_reflection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const LEMMA_TOL: f64 = 1e-9;
const HADAMARD_TOL: f64 = 1e-10;
const GRID_STEP: f64 = 1e-4;
const GRID_TOL: f64 = 1e-3;
const KKT_TOL: f64 = 1e-9;
const MODULUS_TOL: f64 = 1e-15;
const POWER_TOL: f64 = 1e-9;
const FD_REL_TOL: f64 = 0.10;
const PERFECT_CSI_REL_TOL: f64 = 0.03;
const FIG5_TRIALS: usize = 1000;

struct Outcome {
    name: &'static str,
    pass: bool,
    /// Why the criterion cannot hold, if it is expected to fail.
    known_failure: Option<&'static str>,
    detail: String,
    elapsed: Duration,
}

fn cn(rng: &mut ChaCha8Rng) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat<c64> {
    Mat::from_fn(r, c, |_, _| cn(rng))
}

fn config(name: &str) -> ExperimentConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    ExperimentConfig::load(&path).expect("shipped config parses")
}

fn mean_of(out: &SweepOutput, method: MethodId, point: usize) -> f64 {
    out.summary
        .iter()
        .find(|e| e.method == method && e.sweep_index == point)
        .and_then(|e| e.mean_bps_hz)
        .expect("method has successful trials")
}

fn failed_rows(out: &SweepOutput) -> usize {
    out.rows.iter().filter(|r| !r.is_ok()).count()
}

/// Shared Monte-Carlo runs, reused by several criteria.
struct Runs {
    fig2: SweepOutput,
    fig2_matched: SweepOutput,
    fig3_matched: SweepOutput,
    fig4: SweepOutput,
    fig5: SweepOutput,
    fig2_time: Duration,
    fig3_time: Duration,
    fig4_time: Duration,
    fig5_time: Duration,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn at_40_dbm(mut cfg: ExperimentConfig, trials: usize, seed: u64) -> ExperimentConfig {
    cfg.sweep = Sweep::PtxDbm(vec![40.0]);
    cfg.trials = trials;
    cfg.master_seed = seed;
    cfg
}

fn run_all() -> Runs {
    let (fig2, fig2_time) = timed(|| run_sweep(&at_40_dbm(config("fig2.toml"), 200, 2), None).unwrap());
    let (fig2_matched, t_small) = timed(|| run_sweep(&at_40_dbm(config("fig2.toml"), 100, 33), None).unwrap());
    let (fig3_matched, t_large) = timed(|| run_sweep(&at_40_dbm(config("fig3.toml"), 100, 33), None).unwrap());
    let (fig4, fig4_time) = timed(|| {
        let mut cfg = config("fig4.toml");
        cfg.trials = 200;
        assert_eq!(cfg.sweep, Sweep::NPath(vec![2, 4, 8, 12]));
        run_sweep(&cfg, None).unwrap()
    });
    let (fig5, fig5_time) = timed(|| {
        // The -30/-20 dB gap is ~1e-3 bps/Hz; 1000 paired trials resolve it.
        let mut cfg = config("fig5.toml");
        cfg.trials = FIG5_TRIALS;
        cfg.sweep = Sweep::NmseDb(vec![f64::NEG_INFINITY, -30.0, -20.0, -10.0, -5.0]);
        run_sweep(&cfg, None).unwrap()
    });
    Runs { fig2, fig2_matched, fig3_matched, fig4, fig5, fig2_time, fig3_time: t_small + t_large, fig4_time, fig5_time }
}

fn lemma_equality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n_s = rng.random_range(1..=4);
        let rf = rng.random_range(n_s..=4);
        let n_r = rng.random_range(rf..=16);
        let n_t = rng.random_range(rf..=64);
        let dims = SystemDims { n_t, n_r, m: 1, n_t_rf: rf, n_r_rf: rf, n_s };
        let h = random_mat(&mut rng, n_r, n_t);
        let p = 10f64.powf(rng.random_range(-2.0..3.0));
        let bf = relaxed_beamformers(h.as_ref(), &dims, p, 1.0).unwrap();
        let se = spectral_efficiency(h.as_ref(), &bf, 1.0).unwrap();
        let bound = r_max(h.as_ref(), p, 1.0, n_s).unwrap();
        worst = worst.max((se - bound).abs() / bound.abs().max(f64::MIN_POSITIVE));
    }
    let elapsed = start.elapsed();
    Outcome {
        known_failure: None,
        name: "relaxed construction achieves R_max",
        pass: worst <= LEMMA_TOL && elapsed < Duration::from_secs(10),
        detail: format!("max rel err {worst:.2e} (tol {LEMMA_TOL:e}), 100 instances, limit 10 s"),
        elapsed,
    }
}

/// The identity exactly as printed, without conjugating the second factor.
fn hadamard_identity_literal() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    let mut worst_conj = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(1..=64);
        let n_r = rng.random_range(1..=16);
        let n_t = rng.random_range(1..=16);
        let h_ir = random_mat(&mut rng, n_r, m);
        let h_ti = random_mat(&mut rng, m, n_t);
        let g = gram_sum(&EffectiveChannel::from_links(h_ir.as_ref(), h_ti.as_ref()).unwrap());
        let a = h_ir.adjoint() * &h_ir;
        let b = &h_ti * h_ti.adjoint();
        for i in 0..m {
            for j in 0..m {
                worst = worst.max((g[(i, j)] - a[(i, j)] * b[(i, j)]).norm());
                worst_conj = worst_conj.max((g[(i, j)] - a[(i, j)] * b[(i, j)].conj()).norm());
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        known_failure: Some("the block Gram sum equals (H_IR^H H_IR) o conj(H_TI H_TI^H); the unconjugated form only holds when H_TI H_TI^H is real"),
        name: "gram_sum == (H_IR^H H_IR) o (H_TI H_TI^H)",
        pass: worst <= HADAMARD_TOL && elapsed < Duration::from_secs(5),
        detail: format!(
            "max entry err {worst:.2e} (tol {HADAMARD_TOL:e}); with conj(H_TI H_TI^H): {worst_conj:.2e}; limit 5 s"
        ),
        elapsed,
    }
}

fn rate(p: &[f64], gains: &[f64], noise: f64) -> f64 {
    p.iter().zip(gains).map(|(p, g)| (1.0 + p * g / noise).log2()).sum()
}

/// Best allocation on the lattice `p_l ∈ step·ℕ`, `Σ p_l = P`. Handing out
/// quanta greedily by marginal gain is exact for separable concave objectives.
fn grid_search(gains: &[f64], p_tx: f64, noise: f64, step: f64) -> Vec<f64> {
    let quanta = (p_tx / step).round() as usize;
    let mut units = vec![0usize; gains.len()];
    let gain_of = |l: usize, u: usize| {
        let now = (1.0 + u as f64 * step * gains[l] / noise).log2();
        let next = (1.0 + (u + 1) as f64 * step * gains[l] / noise).log2();
        next - now
    };
    for _ in 0..quanta {
        let best = (0..gains.len()).max_by(|&a, &b| gain_of(a, units[a]).total_cmp(&gain_of(b, units[b]))).unwrap();
        units[best] += 1;
    }
    units.iter().map(|&u| u as f64 * step).collect()
}

fn water_filling_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut worst_grid, mut worst_kkt, mut worst_rate) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for _ in 0..50 {
        let gains: Vec<f64> = (0..4).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect();
        let p_tx = rng.random_range(0.5..2.0f64);
        let p_tx = (p_tx / GRID_STEP).round() * GRID_STEP;
        let noise = 1.0;
        let alloc = water_filling(&gains, p_tx, noise, 4).unwrap();
        let grid = grid_search(&gains, p_tx, noise, GRID_STEP);
        for (a, g) in alloc.per_stream_power.iter().zip(&grid) {
            worst_grid = worst_grid.max((a - g).abs());
        }
        let sum: f64 = alloc.per_stream_power.iter().sum();
        worst_kkt = worst_kkt.max((sum - p_tx).abs());
        for (p, g) in alloc.per_stream_power.iter().zip(&gains) {
            worst_kkt = worst_kkt.max((p - (alloc.water_level - noise / g).max(0.0)).abs());
            worst_kkt = worst_kkt.max((-p).max(0.0));
        }
        worst_rate = worst_rate.max(rate(&grid, &gains, noise) - rate(&alloc.per_stream_power, &gains, noise));
    }
    let elapsed = start.elapsed();
    Outcome {
        known_failure: None,
        name: "water-filling matches grid search and KKT",
        pass: worst_grid <= GRID_TOL && worst_kkt <= KKT_TOL && worst_rate <= 1e-12 && elapsed < Duration::from_secs(5),
        detail: format!(
            "max |p - p_grid| {worst_grid:.2e} (tol {GRID_TOL:e}), max KKT/sum err {worst_kkt:.2e} (tol {KKT_TOL:e}), \
             grid rate excess {worst_rate:.2e}; 50 instances, limit 5 s"
        ),
        elapsed,
    }
}

fn constraints(runs: &Runs) -> Outcome {
    let start = Instant::now();
    let outputs = [&runs.fig2, &runs.fig2_matched, &runs.fig3_matched, &runs.fig4, &runs.fig5];
    let rows: usize = outputs.iter().map(|o| o.rows.len()).sum();
    let failures: usize = outputs.iter().map(|o| failed_rows(o)).sum();

    // Independent re-check of every projected output of the Fig. 2 run.
    let cfg = at_40_dbm(config("fig2.toml"), 200, 2);
    let point = cfg.sweep_points()[0];
    let p_tx = dbm_to_watts(point.p_tx_dbm);
    let noise = dbm_to_watts(cfg.noise_dbm);
    let (mut w_err, mut f_err, mut v_err, mut p_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let modulus_err = |a: &Mat<c64>| {
        let target = 1.0 / (a.nrows() as f64).sqrt();
        (0..a.ncols())
            .flat_map(|j| (0..a.nrows()).map(move |i| (i, j)))
            .map(|(i, j)| (a[(i, j)].norm() - target).abs())
            .fold(0.0, f64::max)
    };
    for t in 0..cfg.trials {
        let triple = trial_channel(&cfg, &point, t).unwrap();
        let eff = build_effective(&triple).unwrap();
        let v_hat = project_reflection(&relaxed_reflection(gram_sum(&eff).as_ref()).unwrap());
        let v_sota = asymptotic_reflection(&triple).unwrap();
        for v in [&v_hat, &v_sota] {
            let e = v.entries();
            v_err = v_err.max((0..e.nrows()).map(|i| (e[i].norm() - 1.0).abs()).fold(0.0, f64::max));
            let h = total_channel(triple.h_tr.matrix.as_ref(), &eff, e).unwrap();
            let bf = project_hybrid(&relaxed_beamformers(h.as_ref(), &point.dims, p_tx, noise).unwrap(), p_tx).unwrap();
            w_err = w_err.max(modulus_err(&bf.w_rf));
            f_err = f_err.max(modulus_err(&bf.f_rf));
            p_err = p_err.max((bf.precoder().squared_norm_l2() - p_tx).abs() / p_tx.max(1.0));
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        known_failure: None,
        name: "modulus and power constraints",
        pass: failures == 0
            && w_err <= MODULUS_TOL
            && f_err <= MODULUS_TOL
            && v_err <= MODULUS_TOL
            && p_err <= POWER_TOL,
        detail: format!(
            "{failures}/{rows} failed rows; re-check max errs |W_RF| {w_err:.1e}, |F_RF| {f_err:.1e}, |v| {v_err:.1e} \
             (tol {MODULUS_TOL:e}), power {p_err:.1e} (tol {POWER_TOL:e})"
        ),
        elapsed,
    }
}

fn fig2_trend(runs: &Runs) -> Outcome {
    let hybrid = mean_of(&runs.fig2, MethodId::ProposedHybrid, 0);
    let sota = mean_of(&runs.fig2, MethodId::SotaAsymptotic, 0);
    let fd = mean_of(&runs.fig2, MethodId::ProposedFullyDigital, 0);
    let ub = mean_of(&runs.fig2, MethodId::UpperBound, 0);
    let rel = (ub - fd).abs() / ub;
    Outcome {
        known_failure: None,
        name: "64x16 array, 40 dBm: hybrid beats asymptotic, FD near bound",
        pass: hybrid > sota && rel <= FD_REL_TOL && runs.fig2_time < Duration::from_secs(300),
        detail: format!(
            "proposed_hybrid {hybrid:.4} vs sota {sota:.4}; fully digital {fd:.4} vs bound {ub:.4} ({:.2}% , tol 10%); \
             200 trials, limit 5 min",
            100.0 * rel
        ),
        elapsed: runs.fig2_time,
    }
}

fn fig3_trend(runs: &Runs) -> Outcome {
    let gap = |out: &SweepOutput| {
        let ub = mean_of(out, MethodId::UpperBound, 0);
        (ub - mean_of(out, MethodId::ProposedHybrid, 0)) / ub
    };
    let (small, large) = (gap(&runs.fig2_matched), gap(&runs.fig3_matched));
    Outcome {
        known_failure: None,
        name: "relative gap shrinks with array size",
        pass: large < small && runs.fig3_time < Duration::from_secs(900),
        detail: format!(
            "gap 256x256 {:.3}% vs 64x16 {:.3}%; matched 100-trial runs, limit 15 min",
            100.0 * large,
            100.0 * small
        ),
        elapsed: runs.fig3_time,
    }
}

fn fig4_trend(runs: &Runs) -> Outcome {
    let means: Vec<f64> = (0..4).map(|i| mean_of(&runs.fig4, MethodId::ProposedHybrid, i)).collect();
    let inversions = means.windows(2).filter(|w| w[1] > w[0]).count();
    Outcome {
        known_failure: None,
        name: "hybrid rate nonincreasing in path count",
        pass: inversions <= 1,
        detail: format!("means at N_path 2/4/8/12: {means:.4?}; {inversions} inversions (max 1); 200 trials"),
        elapsed: runs.fig4_time,
    }
}

fn fig5_trend(runs: &Runs) -> Outcome {
    // Points: perfect, -30, -20, -10, -5 dB.
    let means: Vec<f64> = (0..5).map(|i| mean_of(&runs.fig5, MethodId::ProposedHybrid, i)).collect();
    let monotone = means[1..].windows(2).all(|w| w[0] >= w[1]);
    let rel = (means[0] - means[1]).abs() / means[0];
    Outcome {
        known_failure: None,
        name: "hybrid rate nondecreasing in CSI quality",
        pass: monotone && rel <= PERFECT_CSI_REL_TOL,
        detail: format!(
            "means perfect/-30/-20/-10/-5 dB: {means:.4?}; -30 dB vs perfect {:.3}% (tol 3%); {FIG5_TRIALS} trials",
            100.0 * rel
        ),
        elapsed: runs.fig5_time,
    }
}

fn orthogonality_decay() -> Outcome {
    let start = Instant::now();
    let small = UpaGeometry::new(4, 4, 0.5).unwrap();
    let large = UpaGeometry::new(32, 32, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let inner = |geo: &UpaGeometry, a: (f64, f64), b: (f64, f64)| {
        let x: Col<c64> = general_upa_vector(geo, a.0, a.1);
        let y: Col<c64> = general_upa_vector(geo, b.0, b.1);
        (x.adjoint() * &y).norm()
    };
    let mut draw = || {
        let az = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let el = rng.random_range(0.0..std::f64::consts::PI);
        (az.sin() * el.sin(), el.cos())
    };
    let mut exceptions = 0;
    for _ in 0..100 {
        let (a, b) = (draw(), draw());
        if inner(&large, a, b) >= inner(&small, a, b) {
            exceptions += 1;
        }
    }
    Outcome {
        known_failure: None,
        name: "steering vectors decorrelate as the array grows",
        pass: exceptions <= 2,
        detail: format!("{exceptions} of 100 pairs not smaller at X=1024 than X=16 (max 2)"),
        elapsed: start.elapsed(),
    }
}

fn main() -> ExitCode {
    let mut outcomes = vec![lemma_equality(), hadamard_identity_literal(), water_filling_oracle()];
    let runs = run_all();
    outcomes.push(constraints(&runs));
    outcomes.push(fig2_trend(&runs));
    outcomes.push(fig3_trend(&runs));
    outcomes.push(fig4_trend(&runs));
    outcomes.push(fig5_trend(&runs));
    outcomes.push(orthogonality_decay());

    println!();
    for o in &outcomes {
        let tag = match (o.pass, o.known_failure) {
            (true, None) => "PASS",
            (false, None) => "FAIL",
            (false, Some(_)) => "FAIL (known)",
            (true, Some(_)) => "PASS (unexpected)",
        };
        println!("{tag} {:<62} {} [{:.1}s]", o.name, o.detail, o.elapsed.as_secs_f64());
        if let (false, Some(why)) = (o.pass, o.known_failure) {
            println!("     known failure: {why}");
        }
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    let known = outcomes.iter().filter(|o| !o.pass && o.known_failure.is_some()).count();
    let unexpected = outcomes.iter().filter(|o| o.pass == o.known_failure.is_some()).count();
    println!(
        "acceptance: {} passed, {failed} failed ({known} known), {unexpected} unexpected",
        outcomes.len() - failed
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
