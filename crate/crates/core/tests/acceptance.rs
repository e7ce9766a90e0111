//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a subset:
//! `cargo test --release --test acceptance -- 1 4 10`.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rblspi::agents::{blspi_offline, lspi_offline, AgentSpec, IterationLimits};
use rblspi::envs::{collect_uniform, make_env, ChainWalk, EnvOptions};
use rblspi::eval::{blstd_posterior, log_posterior, SufficientStats, GRAM_RIDGE};
use rblspi::features::FeatureMap;
use rblspi::harness::config::FeatureConfig;
use rblspi::harness::run::write_raw_csv;
use rblspi::harness::{run_experiment, EnvConfig, ExperimentConfig, ExperimentResult};
use rblspi::numerics::{Matrix, SeededRng, Vector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

// ---------------------------------------------------------------------------
// test-side oracles

/// Gauss-Jordan elimination with partial pivoting on a dense copy.
fn oracle_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).chain([b[i]]).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "oracle: singular system");
        for j in col..=n {
            m[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    for j in col..=n {
                        m[i][j] -= f * m[col][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|row| row[n]).collect()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn oracle_eigenvalues(s: &Matrix) -> Vec<f64> {
    let n = s.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 0.5 * (s[(i, j)] + s[(j, i)])).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

fn synthetic_stats(k: usize, n: usize, seed: u64) -> SufficientStats {
    let mut rng = SeededRng::new(seed);
    let mut st = SufficientStats::new(k);
    for _ in 0..n {
        let phi = Vector::from_vec(rng.standard_normal_vector(k)).unwrap();
        let next = Vector::from_vec(rng.standard_normal_vector(k)).unwrap();
        st.accumulate_features(&phi, Some(&next), rng.standard_normal(), 0.9).unwrap();
    }
    st
}

fn rel_err(x: &[f64], y: &[f64]) -> f64 {
    let diff: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    diff / y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// fast algebraic criteria

fn chain_convergence() -> Outcome {
    const OPTIMAL: &str = "LLLLLLLLLLRRRRRRRRRR";
    let fm = FeatureMap::polynomial_on(4, 2, 1.0, 20.0).unwrap();
    let policy = |theta: &Vector| -> String {
        (1..=20).map(|s| if fm.greedy_action(&[s as f64], theta.as_slice()) == 0 { 'L' } else { 'R' }).collect()
    };
    let (mut lspi_ok, mut blspi_ok) = (0, 0);
    for seed in 0..20 {
        let mut env = make_env("chain_walk", &EnvOptions::default(), seed).unwrap();
        let data = collect_uniform(env.as_mut(), 5000, &mut SeededRng::new(seed)).unwrap();
        let limits = IterationLimits::default();
        let lspi = lspi_offline(&data, &fm, 0.9, Vector::zeros(fm.k()), limits).unwrap();
        let blspi = blspi_offline(&data, &fm, 0.9, 1e-6, 1.0, Vector::zeros(fm.k()), limits).unwrap();
        let within = |r: &rblspi::agents::OfflineResult| r.settled_at(|th| policy(th) == OPTIMAL).is_some_and(|j| j <= 10);
        lspi_ok += within(&lspi) as usize;
        blspi_ok += within(&blspi) as usize;
    }
    outcome(lspi_ok >= 18 && blspi_ok >= 18, format!("optimal policy within 10 iterations: lspi {lspi_ok}/20, blspi {blspi_ok}/20 (need 18)"))
}

fn lstd_limit() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let st = synthetic_stats(10, 500, 1000 + seed);
        let lstd = oracle_solve(&st.a, st.b.as_slice());
        let post = blstd_posterior(&st, 1e-10, 1.0, GRAM_RIDGE).unwrap();
        worst = worst.max(rel_err(post.mean().as_slice(), &lstd));
    }
    outcome(worst < 1e-4, format!("worst relative gap to LSTD over 50 datasets {worst:.3e} (need < 1e-4)"))
}

fn posterior_algebra() -> Outcome {
    let mut grad_worst: f64 = 0.0;
    let mut eig_excess = f64::NEG_INFINITY;
    // three samples in ten dimensions leave seven directions at exactly the prior variance
    let cases = [(0.01, 1.0, 500), (0.1, 10.0, 500), (1.0, 1.0, 500), (0.1, 1000.0, 500), (5.0, 0.1, 500), (2.0, 1.0, 3)];
    for (i, &(alpha, beta, n)) in cases.iter().enumerate() {
        let st = synthetic_stats(10, n, 2000 + i as u64);
        let post = blstd_posterior(&st, alpha, beta, GRAM_RIDGE).unwrap();
        let m = post.mean();
        let h = 1e-5;
        for j in 0..m.dim() {
            let mut up = m.clone();
            let mut down = m.clone();
            up[j] += h;
            down[j] -= h;
            let g = (log_posterior(&st, &up, alpha, beta, GRAM_RIDGE).unwrap()
                - log_posterior(&st, &down, alpha, beta, GRAM_RIDGE).unwrap())
                / (2.0 * h);
            grad_worst = grad_worst.max(g.abs());
        }
        let lmax = oracle_eigenvalues(&post.covariance().unwrap()).into_iter().fold(f64::NEG_INFINITY, f64::max);
        eig_excess = eig_excess.max(lmax - 1.0 / alpha);
    }

    // predictive check on one posterior at three fixed probe directions
    let st = synthetic_stats(10, 500, 2100);
    let post = blstd_posterior(&st, 0.5, 2.0, GRAM_RIDGE).unwrap();
    let cov = post.covariance().unwrap();
    let mut rng = SeededRng::new(77);
    let probes: Vec<Vector> = (0..3).map(|_| Vector::from_vec(rng.standard_normal_vector(10)).unwrap()).collect();
    let n = 100_000;
    let mut sums = vec![(0.0, 0.0); probes.len()];
    for _ in 0..n {
        let theta = post.sample(&mut rng).unwrap();
        for (p, s) in probes.iter().zip(&mut sums) {
            let q = p.dot(&theta);
            s.0 += q;
            s.1 += q * q;
        }
    }
    let mut z_worst: f64 = 0.0;
    for (p, (s1, s2)) in probes.iter().zip(sums) {
        let mean = p.dot(post.mean());
        let var = p.dot(&cov.mul_vec(p).unwrap());
        let nf = n as f64;
        let emp_mean = s1 / nf;
        let emp_var = (s2 - nf * emp_mean * emp_mean) / (nf - 1.0);
        z_worst = z_worst.max((emp_mean - mean).abs() / (var / nf).sqrt());
        z_worst = z_worst.max((emp_var - var).abs() / (var * (2.0 / (nf - 1.0)).sqrt()));
    }
    let pass = grad_worst < 1e-5 && eig_excess <= 1e-9 && z_worst < 3.0;
    outcome(
        pass,
        format!(
            "max |grad log p(m)| {grad_worst:.2e} (< 1e-5); max(λ_max(S) − 1/α) {eig_excess:.2e} (≤ 1e-9); worst predictive z {z_worst:.2} (< 3)"
        ),
    )
}

fn tabular_oracle() -> Outcome {
    let chain = ChainWalk::default();
    let model = chain.model();
    let n = model.states;
    let gamma = 0.9;
    let onehot = |s: usize, a: usize| {
        let mut v = vec![0.0; 2 * n];
        v[a * n + s] = 1.0;
        Vector::from_vec(v).unwrap()
    };
    let mut rng = SeededRng::new(4);
    let policies: Vec<Vec<usize>> = vec![
        (0..n).map(|s| usize::from(s >= n / 2)).collect(),
        vec![0; n],
        vec![1; n],
        (0..n).map(|_| rng.below(2)).collect(),
    ];
    let mut worst: f64 = 0.0;
    for pi in &policies {
        let mut st = SufficientStats::new(2 * n);
        for s in 0..n {
            for a in 0..2 {
                for &(s2, p) in &model.next[s][a] {
                    st.accumulate_weighted(&onehot(s, a), Some(&onehot(s2, pi[s2])), model.reward[s][a], gamma, p).unwrap();
                }
            }
        }
        let theta = oracle_solve(&st.a, st.b.as_slice());
        // iterative policy evaluation on the model: error shrinks by γ per sweep
        let mut v = vec![0.0; n];
        for _ in 0..2000 {
            v = (0..n).map(|s| model.reward[s][pi[s]] + gamma * model.next[s][pi[s]].iter().map(|&(t, p)| p * v[t]).sum::<f64>()).collect();
        }
        for s in 0..n {
            worst = worst.max((theta[pi[s] * n + s] - v[s]).abs());
            for a in 0..2 {
                let q = model.reward[s][a] + gamma * model.next[s][a].iter().map(|&(t, p)| p * v[t]).sum::<f64>();
                worst = worst.max((theta[a * n + s] - q).abs());
            }
        }
    }
    outcome(worst < 1e-8, format!("max |LSTD − exact| over 4 policies {worst:.2e} (need < 1e-8)"))
}

fn feature_counts() -> Outcome {
    let k = |env: &str, fc: FeatureConfig| fc.build(&EnvConfig { name: env.into(), sparse: false, seed: 0 }.spec().unwrap()).unwrap().k();
    let got = [
        k("mountain_car", FeatureConfig::grid(&[8, 8])),
        k("inverted_pendulum", FeatureConfig::grid(&[3, 3])),
        k("inverted_pendulum", FeatureConfig::grid(&[5, 5])),
        k("cart_pole", FeatureConfig::grid(&[3, 3, 3, 3])),
        k("puddle_world", FeatureConfig::grid(&[8, 8])),
        k("chain_walk", FeatureConfig::default_for("chain_walk")),
    ];
    let want = [195, 30, 78, 164, 260, 10];
    outcome(got == want, format!("k = {got:?} (want {want:?})"))
}

// ---------------------------------------------------------------------------
// learning-curve criteria

fn experiment(env: &str, sparse: bool, agent: AgentSpec, features: FeatureConfig, episodes: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(EnvConfig { name: env.into(), sparse, seed: 0 }, agent, 10, episodes);
    cfg.features = Some(features);
    cfg.workers = workers();
    cfg
}

fn rblspi(k_interval: usize, alpha: f64, beta: f64) -> AgentSpec {
    AgentSpec { k_interval, alpha, beta, ..AgentSpec::named("rblspi") }
}

/// Per-seed (mean steps, goal fraction) over the last `window` episodes.
fn final_block(res: &ExperimentResult, window: usize) -> Vec<(f64, f64)> {
    res.sweeps[0]
        .runs
        .iter()
        .map(|r| {
            let tail = &r.episodes[r.episodes.len() - window..];
            let steps = tail.iter().map(|e| e.steps as f64).sum::<f64>() / window as f64;
            let goals = tail.iter().filter(|e| e.reached_goal).count() as f64 / window as f64;
            (steps, goals)
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn mountain_car() -> Outcome {
    let cfg = experiment("mountain_car", false, rblspi(20, 0.1, 0.1), FeatureConfig::grid(&[8, 8]), 1000);
    let res = run_experiment(&cfg, workers()).unwrap();
    let blocks = final_block(&res, 100);
    let steps = mean(blocks.iter().map(|b| b.0));
    let good = blocks.iter().filter(|b| b.1 > 0.9).count();
    outcome(
        steps < 200.0 && good >= 8,
        format!("final-block mean steps {steps:.1} (< 200); seeds with > 90% goal reach {good}/10 (need 8)"),
    )
}

fn sparse_mountain_car() -> Outcome {
    let grid = FeatureConfig::grid(&[8, 8]);
    let ours = run_experiment(&experiment("mountain_car", true, rblspi(20, 0.1, 1000.0), grid.clone(), 1000), workers()).unwrap();
    let base_agent = AgentSpec { k_interval: 20, ..AgentSpec::named("online_lspi") };
    let base = run_experiment(&experiment("mountain_car", true, base_agent, grid, 1000), workers()).unwrap();
    let (a, b) = (final_block(&ours, 100), final_block(&base, 100));
    let wins = a.iter().zip(&b).filter(|(x, y)| x.1 > y.1).count();
    let all: Vec<bool> = base.sweeps[0].runs.iter().flat_map(|r| r.episodes.iter().map(|e| e.reached_goal)).collect();
    let base_rate = all.iter().filter(|&&g| g).count() as f64 / all.len() as f64;
    let ours_rate = mean(a.iter().map(|x| x.1));
    outcome(
        wins >= 9 && base_rate < 0.1,
        format!(
            "paired seeds where posterior sampling reaches the goal more often {wins}/10 (need 9); baseline overall goal rate {:.1}% (< 10%); sampling final-block goal rate {:.1}%",
            100.0 * base_rate,
            100.0 * ours_rate
        ),
    )
}

fn pendulum_config() -> ExperimentConfig {
    experiment("inverted_pendulum", false, rblspi(50, 0.1, 10.0), FeatureConfig::grid(&[5, 5]), 600)
}

/// Raw CSV of the pendulum run, kept so the determinism check costs one rerun.
static PENDULUM_RAW: OnceLock<Vec<u8>> = OnceLock::new();

fn raw_bytes(res: &ExperimentResult) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    write_raw_csv(res, &path).unwrap();
    std::fs::read(path).unwrap()
}

fn pendulum() -> Outcome {
    let res = run_experiment(&pendulum_config(), workers()).unwrap();
    let _ = PENDULUM_RAW.set(raw_bytes(&res));
    let steps = mean(final_block(&res, 100).iter().map(|b| b.0));
    outcome(steps > 2500.0, format!("final-block mean balancing steps {steps:.1} (> 2500 of 3000)"))
}

fn cart_pole() -> Outcome {
    // K and α at their defaults
    let cfg = experiment("cart_pole", false, rblspi(20, 0.1, 0.1), FeatureConfig::grid(&[3, 3, 3, 3]), 1500);
    let res = run_experiment(&cfg, workers()).unwrap();
    let steps = mean(final_block(&res, 100).iter().map(|b| b.0));
    outcome(steps > 400.0, format!("final-block mean steps {steps:.1} (> 400 of 500)"))
}

fn determinism() -> Outcome {
    let cfg = pendulum_config();
    let first = PENDULUM_RAW.get_or_init(|| raw_bytes(&run_experiment(&cfg, workers()).unwrap()));
    // single worker, so a scheduling dependence would show up too
    let again = raw_bytes(&run_experiment(&cfg, 1).unwrap());
    let same = *first == again;
    outcome(same, format!("pendulum config rerun on 1 worker: raw CSV {} bytes, byte-identical: {same}", first.len()))
}

// ---------------------------------------------------------------------------

struct Criterion {
    id: u32,
    name: &'static str,
    run: fn() -> Outcome,
    /// Hard runtime bound, where one is part of the criterion.
    limit: Option<Duration>,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "chain-walk convergence", run: chain_convergence, limit: Some(Duration::from_secs(10)) },
    Criterion { id: 2, name: "LSTD limit of the posterior mean", run: lstd_limit, limit: Some(Duration::from_secs(5)) },
    Criterion { id: 3, name: "posterior algebra", run: posterior_algebra, limit: Some(Duration::from_secs(30)) },
    Criterion { id: 4, name: "tabular oracle", run: tabular_oracle, limit: Some(Duration::from_secs(1)) },
    Criterion { id: 5, name: "mountain car", run: mountain_car, limit: None },
    Criterion { id: 6, name: "sparse mountain car separation", run: sparse_mountain_car, limit: None },
    Criterion { id: 7, name: "inverted pendulum", run: pendulum, limit: None },
    Criterion { id: 8, name: "cart pole", run: cart_pole, limit: None },
    Criterion { id: 9, name: "determinism", run: determinism, limit: None },
    Criterion { id: 10, name: "feature counts", run: feature_counts, limit: Some(Duration::from_secs(1)) },
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let out = (c.run)();
        let took = start.elapsed();
        let in_time = c.limit.is_none_or(|l| took < l);
        let pass = out.pass && in_time;
        failed += usize::from(!pass);
        let limit = c.limit.map_or(String::new(), |l| format!(" (limit {:.0} s)", l.as_secs_f64()));
        println!(
            "criterion {:2} [{}] {}: {}; {:.1} s{limit}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name,
            out.detail,
            took.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
