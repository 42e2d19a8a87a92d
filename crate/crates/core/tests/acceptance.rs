//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_mocu::benchmarks::spring::{state_space, transfer_magnitude};
use sparse_mocu::benchmarks::synthetic::synthetic_cost;
use sparse_mocu::benchmarks::{Benchmark, SpringSpec, SyntheticSpec};
use sparse_mocu::gp::{log_marginal_likelihood, KernelParams, Nu};
use sparse_mocu::harness::ensemble::run_method;
use sparse_mocu::harness::{run_ensemble, Method, MethodEnsemble, RunConfig};
use sparse_mocu::mocu::{expected_mocu_of_experiment, mocu, select_experiment};
use sparse_mocu::problem::{
    CostMatrix, DiscreteDistribution, ExperimentModel, Fidelity, IndexGrid, Provenance,
    TrainingPoint, TrainingSet,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn global_minimum() -> Outcome {
    let start = Instant::now();
    let spec = SyntheticSpec::new(64, 64).unwrap();
    let mut best = (f64::INFINITY, 0, 0);
    for t in 1..=64 {
        for p in 1..=64 {
            let v = synthetic_cost(t, p, &spec);
            if v < best.0 {
                best = (v, t, p);
            }
        }
    }
    let took = start.elapsed();
    check(
        best == (0.0, 16, 48) && took < Duration::from_secs(1),
        format!("min {} at ({}, {}) in {took:?}", best.0, best.1, best.2),
    )
}

/// Expected MOCU by direct enumeration over outcomes, θ and ψ.
fn brute_force_choice(j: &[[f64; 4]; 4], d: &[f64; 4], lik: &[[[f64; 4]; 2]; 3]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (x, lx) in lik.iter().enumerate() {
        let mut total = 0.0;
        for ly in lx {
            let py: f64 = (0..4).map(|t| ly[t] * d[t]).sum();
            if py <= 0.0 {
                continue;
            }
            let post: Vec<f64> = (0..4).map(|t| ly[t] * d[t] / py).collect();
            let mut robust = (0, f64::INFINITY);
            for p in 0..4 {
                let e: f64 = (0..4).map(|t| post[t] * j[t][p]).sum();
                if e < robust.1 {
                    robust = (p, e);
                }
            }
            let mut m = 0.0;
            for t in 0..4 {
                let row_min = j[t].iter().cloned().fold(f64::INFINITY, f64::min);
                m += post[t] * (j[t][robust.0] - row_min);
            }
            total += py * m;
        }
        if total < best.1 {
            best = (x, total);
        }
    }
    best
}

fn mocu_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases = 60;
    for case in 0..cases {
        let mut j = [[0.0; 4]; 4];
        for row in &mut j {
            for v in row.iter_mut() {
                *v = rng.random_range(0.0..5.0);
            }
        }
        let mut d = [0.0; 4];
        for v in &mut d {
            *v = rng.random_range(0.01..1.0);
        }
        let s: f64 = d.iter().sum();
        for v in &mut d {
            *v /= s;
        }
        let mut lik = [[[0.0; 4]; 2]; 3];
        for lx in &mut lik {
            for t in 0..4 {
                let q: f64 = rng.random();
                lx[1][t] = q;
                lx[0][t] = 1.0 - q;
            }
        }
        let costs = CostMatrix::from_rows(&j.map(|r| r.to_vec()), Provenance::Exact).unwrap();
        let prior = DiscreteDistribution::from_weights(d.to_vec()).unwrap();
        let em = ExperimentModel::from_fn(vec![1, 2, 3], vec![0, 1], 4, 1.0, |x, y, t| lik[x][y][t - 1]).unwrap();
        let got = select_experiment(&costs, &prior, &em).unwrap();
        // brute force runs on the normalized prior the library holds
        let held: [f64; 4] = prior.mass().try_into().unwrap();
        let (x, e) = brute_force_choice(&j, &held, &lik);
        if got.x_index != x || (got.expected_mocu - e).abs() > 1e-12 {
            return Err(format!(
                "case {case}: library x={} E={} vs brute force x={x} E={e}",
                got.x_index, got.expected_mocu
            ));
        }
    }
    let took = start.elapsed();
    check(took < Duration::from_secs(5), format!("{cases} random cases agree in {took:?}"))
}

fn hand_worked_mocu() -> Outcome {
    let j = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], Provenance::Exact).unwrap();
    let d = DiscreteDistribution::from_weights(vec![0.5, 0.5]).unwrap();
    let m = mocu(&j, &d).unwrap();
    let em = ExperimentModel::from_fn(vec![1, 2], vec![0, 1], 2, 0.0, |x, y, t| {
        if x == 0 {
            f64::from(u8::from((y == 1) == (t == 1)))
        } else {
            0.5
        }
    })
    .unwrap();
    let informative = expected_mocu_of_experiment(&j, &d, &em, 0).unwrap().expected_mocu;
    let flat = expected_mocu_of_experiment(&j, &d, &em, 1).unwrap().expected_mocu;
    let chosen = select_experiment(&j, &d, &em).unwrap().x_index;
    check(
        m == 0.5 && informative == 0.0 && flat == 0.5 && chosen == 0,
        format!("mocu {m}, informative {informative}, uninformative {flat}, chosen x{}", chosen + 1),
    )
}

fn gp_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let grid = IndexGrid::new(16, 16).unwrap();
    let mut worst: f64 = 0.0;
    for set in 0..20 {
        let mut ts = TrainingSet::new();
        while ts.len() < 5 {
            let (t, p) = (rng.random_range(1..=16), rng.random_range(1..=16));
            if !ts.contains_location(t, p) {
                let cost = rng.random_range(-1.0..2.0);
                ts.push(grid, TrainingPoint { theta: t, psi: p, cost, fidelity: Fidelity::Fine }).unwrap();
            }
        }
        let base = [
            rng.random_range(-1.0..1.5),
            rng.random_range(0.5..2.5),
            rng.random_range(0.5..2.5),
            rng.random_range(-6.0..-1.0),
        ];
        let lml = |v: &[f64; 4]| log_marginal_likelihood(&ts, &KernelParams::from_log(v, Nu::FiveHalves)).unwrap();
        let an = lml(&base).gradient;
        for i in 0..4 {
            let (mut up, mut dn) = (base, base);
            up[i] += 1e-5;
            dn[i] -= 1e-5;
            let num = (lml(&up).value - lml(&dn).value) / 2e-5;
            let rel = (an[i] - num).abs() / an[i].abs().max(num.abs());
            if !(rel <= 1e-4) {
                return Err(format!("set {set} component {i}: analytic {} vs numeric {num}", an[i]));
            }
            worst = worst.max(rel);
        }
    }
    Ok(format!("20 sets, worst relative error {worst:.2e}"))
}

fn transfer_analytics() -> Outcome {
    let spec = SpringSpec {
        n_springs: 1,
        damping: 0.125,
        mass: 1.0,
        ..SpringSpec::default()
    };
    let ss = state_space(&[1.0], &spec).unwrap();
    let at_one = transfer_magnitude(&ss, 1.0).unwrap();
    let low = transfer_magnitude(&ss, 1e-4).unwrap();
    check(
        (at_one - 8.0).abs() <= 1e-9 && (low - 1.0).abs() <= 1e-3,
        format!("|H(i)| = {at_one}, |H(1e-4 i)| = {low}"),
    )
}

fn fine_calls(e: &MethodEnsemble) -> Vec<usize> {
    e.traces.iter().map(|t| t.fine_calls).collect()
}

fn budget_fairness() -> Outcome {
    let start = Instant::now();
    let mut detail = Vec::new();
    for bench in ["synthetic", "spring"] {
        let mut cfg = RunConfig::default();
        cfg.set("benchmark", bench).unwrap();
        cfg.n_realizations = 8;
        cfg.validate().unwrap();
        let b = cfg.build_benchmark().unwrap();
        let st = run_method(&cfg, &b, Method::StaticSurrogate);
        let ad = run_method(&cfg, &b, Method::AdaptiveSurrogate);
        let (sf, af) = (fine_calls(&st), fine_calls(&ad));
        let failed = st.failures().len() + ad.failures().len();
        if failed > 0 || sf.iter().any(|&c| c != 48) || af.iter().any(|&c| c > 48) {
            return Err(format!("{bench}: static {sf:?}, adaptive {af:?}, {failed} failed realizations"));
        }
        detail.push(format!("{bench}: static {sf:?} adaptive {af:?}"));
    }
    let took = start.elapsed();
    check(took < Duration::from_secs(120), format!("{} in {took:?}", detail.join("; ")))
}

struct TrendNumbers {
    full: (f64, f64),
    static_final: f64,
    adaptive_final: f64,
    variance_final: [f64; 3],
    initial_variance: f64,
}

fn trend_numbers(seed: u64, methods: &[Method]) -> Result<TrendNumbers, String> {
    let mut cfg = RunConfig::default();
    cfg.n_realizations = 32;
    cfg.n_experiments = 256;
    cfg.master_seed = seed;
    cfg.methods = methods.to_vec();
    let results = run_ensemble(&cfg).map_err(|e| e.to_string())?;
    let by = |m: Method| results.iter().find(|e| e.method == m);
    let first_last = |m: Method| {
        by(m).map_or((f64::NAN, f64::NAN), |e| (e.aggregate[0].mean_true_cost, e.aggregate[255].mean_true_cost))
    };
    let var_last = |m: Method| by(m).map_or(f64::NAN, |e| e.aggregate[255].mean_posterior_variance);
    for e in &results {
        if !e.failures().is_empty() {
            return Err(format!("{}: failed realizations {:?}", e.method, e.failures()));
        }
    }
    Ok(TrendNumbers {
        full: first_last(Method::Full),
        static_final: first_last(Method::StaticSurrogate).1,
        adaptive_final: first_last(Method::AdaptiveSurrogate).1,
        variance_final: Method::ALL.map(var_last),
        initial_variance: (64.0 * 64.0 - 1.0) / 12.0,
    })
}

fn trend_reproduction() -> Outcome {
    let start = Instant::now();
    let n = trend_numbers(1, &Method::ALL)?;
    let a = n.full.1 <= 0.5 * n.full.0;
    let mut b = n.adaptive_final <= 1.05 * n.static_final;
    let c = n.variance_final.iter().all(|v| *v <= 0.25 * n.initial_variance);
    let mut note = String::new();
    if !b {
        // a single unlucky seed is not a rejection; all three alternates must hold
        let mut held = 0;
        for alt in [2, 3, 4] {
            let m = trend_numbers(alt, &[Method::StaticSurrogate, Method::AdaptiveSurrogate])?;
            let ok = m.adaptive_final <= 1.05 * m.static_final;
            held += usize::from(ok);
            note.push_str(&format!(" seed {alt}: {:.4} vs {:.4};", m.adaptive_final, m.static_final));
        }
        b = held == 3;
    }
    check(
        a && b && c,
        format!(
            "(a) full {:.4} -> {:.4} [{}]; (b) adaptive {:.4} vs static {:.4} [{}]{note}; (c) variance {:?} vs {:.2} [{}]; {:?}",
            n.full.0,
            n.full.1,
            if a { "ok" } else { "fail" },
            n.adaptive_final,
            n.static_final,
            if b { "ok" } else { "fail" },
            n.variance_final,
            0.25 * n.initial_variance,
            if c { "ok" } else { "fail" },
            start.elapsed()
        ),
    )
}

fn multifidelity_separation() -> Outcome {
    let b = Benchmark::multifidelity(64, 64).unwrap();
    let argmin = |fid: Fidelity| {
        (1..=64)
            .map(|p| (p, b.cost(16, p, fid).unwrap()))
            .fold((0, f64::INFINITY), |acc, (p, v)| if v < acc.1 { (p, v) } else { acc })
            .0
    };
    let (coarse, fine) = (argmin(Fidelity::Coarse), argmin(Fidelity::Fine));
    let mut cfg = RunConfig::default();
    cfg.set("benchmark", "multifidelity").unwrap();
    cfg.n_realizations = 8;
    let ad = run_method(&cfg, &b, Method::AdaptiveSurrogate);
    let fc = fine_calls(&ad);
    let cc: Vec<usize> = ad.traces.iter().map(|t| t.coarse_calls).collect();
    check(
        coarse != 48 && fine == 48 && fc.iter().all(|&c| c <= 16) && ad.failures().is_empty(),
        format!("coarse argmin {coarse}, fine argmin {fine}; fine calls {fc:?}, coarse calls {cc:?}"),
    )
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_sparse-mocu");
    let commands: [&[&str]; 5] = [
        &["ensemble", "--method", "all", "--realizations", "2", "--experiments", "40", "--seed", "7"],
        &["ensemble", "--benchmark", "spring", "--method", "adaptive_surrogate", "--realizations", "2", "--experiments", "24"],
        &["run", "--benchmark", "multifidelity", "--method", "all", "--experiments", "24"],
        &["diagnostics", "--realizations", "2"],
        &["bode"],
    ];
    let mut checked = 0;
    for args in commands {
        // same output path both times, so resolved-config.txt is comparable too
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("out");
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let status = Command::new(bin)
                .args(args)
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(read_dir_bytes(&out));
            std::fs::remove_dir_all(&out).unwrap();
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{args:?}: outputs differ between runs"));
        }
        checked += outputs[0].len();
    }
    Ok(format!("5 commands, {checked} files byte-identical across reruns"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("synthetic global minimum", global_minimum),
        ("MOCU brute-force equivalence", mocu_oracle_equivalence),
        ("hand-worked MOCU", hand_worked_mocu),
        ("GP gradient check", gp_gradient_check),
        ("transfer-function analytics", transfer_analytics),
        ("budget fairness", budget_fairness),
        ("trend reproduction", trend_reproduction),
        ("multifidelity separation", multifidelity_separation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
