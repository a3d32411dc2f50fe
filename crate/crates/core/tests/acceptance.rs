//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.
//!
//! Run with `cargo test -p decomp-core --test acceptance`.

// Negated checks make NaN fail a criterion.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use decomp_core::blotto::{build_blotto, solve_blotto, BlottoSpec};
use decomp_core::certificates::{residual_over_balls, AccuracyCertificate, ExecutionProtocol};
use decomp_core::domain::BallProduct;
use decomp_core::linalg::dot;
use decomp_core::oracles::{
    DenseMatrix, Direction, DpAction, DpStage, DpSystem, KnapsackOracle, KnapsackSpec, SimpleMatrix,
    SimpleMatrixOracle,
};
use decomp_core::saddle::{
    build_master_example1, build_master_example2, master_residual, solve_sp, solve_sp_with, Atom, BilinearSpSpec,
    Offset,
};
use decomp_core::solvers::{
    log_volume_decrement, md_run, optimize_certificate, CertificateOptions, EllipsoidState, FnField, SolverConfig,
    SolverKind,
};
use decomp_core::vi::{eps_nash, nash_to_skew, solve_skew_vi_with, NashPlayer, NashSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// Independent oracles

/// `max_z min_j (zᵀ S)_j` over the simplex of rows, by LP. Returns the value
/// and an optimal `z`.
fn lp_maximin(s: &DenseMatrix) -> (f64, Vec<f64>) {
    let (r, c) = (s.nrows(), s.ncols());
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let z: Vec<_> = (0..r).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let v = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for j in 0..c {
        let mut terms: Vec<_> = (0..r).map(|i| (z[i], s.get(i, j))).collect();
        terms.push((v, -1.0));
        lp.add_constraint(&terms[..], ComparisonOp::Ge, 0.0);
    }
    let ones: Vec<_> = z.iter().map(|&x| (x, 1.0)).collect();
    lp.add_constraint(&ones[..], ComparisonOp::Eq, 1.0);
    let sol = lp.solve().expect("matrix game LP is feasible and bounded");
    (sol.objective(), z.iter().map(|&x| sol[x]).collect())
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::new(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn random_in_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = dot(&x, &x).sqrt();
        if r <= 1.0 {
            return x.iter().map(|v| v * radius).collect();
        }
    }
}

fn dense_weights(atoms: &[Atom], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for a in atoms {
        out[a.index[0]] += a.weight;
    }
    out
}

/// Saddle-point gap of `ψ(w, z) = <w, p> + <z, q> + zᵀ S w` by enumerating
/// the vertices of both simplices.
fn eps_sad_enumerated(s: &DenseMatrix, p: &[f64], q: &[f64], w: &[f64], z: &[f64]) -> f64 {
    let sw = s.mul_vec(w);
    let stz = s.tr_mul_vec(z);
    let sup = (0..s.nrows()).map(|i| q[i] + sw[i]).fold(f64::NEG_INFINITY, f64::max) + dot(w, p);
    let inf = (0..s.ncols()).map(|j| p[j] + stz[j]).fold(f64::INFINITY, f64::min) + dot(z, q);
    sup - inf
}

/// Enumerates every column of a knapsack from its definition.
fn knapsack_columns(spec: &KnapsackSpec) -> Vec<(Vec<usize>, Vec<f64>)> {
    fn go(spec: &KnapsackSpec, s: usize, left: usize, idx: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, Vec<f64>)>) {
        if s == spec.bounds.len() {
            let col = idx.iter().enumerate().flat_map(|(t, &a)| spec.outputs[t][a].clone()).collect();
            out.push((idx.clone(), col));
            return;
        }
        for a in 0..=spec.bounds[s] {
            if a * spec.costs[s] > left {
                break;
            }
            idx.push(a);
            go(spec, s + 1, left - a * spec.costs[s], idx, out);
            idx.pop();
        }
    }
    let mut out = Vec::new();
    go(spec, 0, spec.budget, &mut Vec::new(), &mut out);
    out
}

/// Enumerates every trajectory of a DP system from its definition.
fn dp_columns(stages: &[DpStage], initial: &[usize]) -> Vec<(Vec<usize>, Vec<f64>)> {
    fn go(
        stages: &[DpStage],
        s: usize,
        state: usize,
        idx: &mut Vec<usize>,
        col: &mut Vec<f64>,
        out: &mut Vec<(Vec<usize>, Vec<f64>)>,
    ) {
        if s == stages.len() {
            out.push((idx.clone(), col.clone()));
            return;
        }
        let mut acts = stages[s].states[state].clone();
        acts.sort_by_key(|a| a.label);
        for a in acts {
            idx.push(a.label);
            let len = col.len();
            col.extend_from_slice(&stages[s].outputs[a.output]);
            go(stages, s + 1, a.next, idx, col, out);
            col.truncate(len);
            idx.pop();
        }
    }
    let mut starts = initial.to_vec();
    starts.sort_unstable();
    starts.dedup();
    let mut out = Vec::new();
    for &st in &starts {
        let mut idx = if starts.len() > 1 { vec![st] } else { Vec::new() };
        go(stages, 0, st, &mut idx, &mut Vec::new(), &mut out);
    }
    out
}

/// Extreme column by scanning in lexicographic order; first strict
/// improvement wins, so ties go to the smallest index.
fn brute_extreme(cols: &[(Vec<usize>, Vec<f64>)], x: &[f64], dir: Direction) -> (Vec<usize>, f64) {
    let mut sorted: Vec<_> = cols.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (i, c) in sorted {
        let v = dot(x, c);
        let better = match &best {
            None => true,
            Some((_, b)) => match dir {
                Direction::Max => v > *b,
                Direction::Min => v < *b,
            },
        };
        if better {
            best = Some((i.clone(), v));
        }
    }
    best.unwrap()
}

fn random_value(rng: &mut ChaCha8Rng, integral: bool) -> f64 {
    if integral {
        rng.gen_range(-3i32..=3) as f64
    } else {
        rng.gen_range(-1.0..1.0)
    }
}

fn random_knapsack(rng: &mut ChaCha8Rng, integral: bool) -> KnapsackSpec {
    let m = rng.gen_range(1..=5);
    let bounds: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=5)).collect();
    let costs: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=3)).collect();
    let budget = rng.gen_range(1..=12);
    let outputs = bounds
        .iter()
        .map(|&b| {
            let r = rng.gen_range(1..=3);
            (0..=b).map(|_| (0..r).map(|_| random_value(rng, integral)).collect()).collect()
        })
        .collect();
    KnapsackSpec { bounds, costs, budget, outputs }
}

fn random_dp(rng: &mut ChaCha8Rng, integral: bool) -> (Vec<DpStage>, Vec<usize>) {
    let m = rng.gen_range(1..=5);
    let states: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=4)).collect();
    let stages = (0..m)
        .map(|s| {
            let r = rng.gen_range(1..=3);
            let n_out = rng.gen_range(1..=4);
            let outputs = (0..n_out).map(|_| (0..r).map(|_| random_value(rng, integral)).collect()).collect();
            let next_states = if s + 1 < m { states[s + 1] } else { 1 };
            let st = (0..states[s])
                .map(|_| {
                    let n_act = rng.gen_range(1..=3);
                    let mut labels: Vec<usize> = (0..6).collect();
                    for i in 0..n_act {
                        let j = rng.gen_range(i..labels.len());
                        labels.swap(i, j);
                    }
                    (0..n_act)
                        .map(|i| DpAction {
                            label: labels[i],
                            next: rng.gen_range(0..next_states),
                            output: rng.gen_range(0..n_out),
                        })
                        .collect()
                })
                .collect();
            DpStage { outputs, states: st }
        })
        .collect();
    let n_init = rng.gen_range(1..=states[0]);
    let initial = (0..n_init).map(|_| rng.gen_range(0..states[0])).collect();
    (stages, initial)
}

// ---------------------------------------------------------------------------
// Criteria

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut instances, mut queries, mut max_cols) = (0, 0, 0usize);
    while instances < 50 {
        let integral = instances % 2 == 0;
        let (oracle, cols): (SimpleMatrixOracle, _) = if instances < 25 {
            let spec = random_knapsack(&mut rng, integral);
            let cols = knapsack_columns(&spec);
            (KnapsackOracle::new(spec).map_err(err)?.into(), cols)
        } else {
            let (stages, initial) = random_dp(&mut rng, integral);
            let cols = dp_columns(&stages, &initial);
            (DpSystem::new(stages, initial).map_err(err)?.into(), cols)
        };
        ensure!(cols.len() <= 10_000, "instance {instances}: {} columns", cols.len());
        ensure!(
            oracle.count_columns() == BigUint::from(cols.len()),
            "instance {instances}: count {} vs {} enumerated",
            oracle.count_columns(),
            cols.len()
        );
        max_cols = max_cols.max(cols.len());
        let k = oracle.rows();
        for qi in 0..100 {
            let x: Vec<f64> = (0..k).map(|_| random_value(&mut rng, integral)).collect();
            let dir = if qi % 2 == 0 { Direction::Max } else { Direction::Min };
            let hit = oracle.col_extreme(&x, dir).map_err(err)?;
            let (idx, val) = brute_extreme(&cols, &x, dir);
            ensure!(
                hit.index == idx && hit.value == val,
                "instance {instances}, query {qi}: oracle {:?}/{} vs brute force {:?}/{}",
                hit.index,
                hit.value,
                idx,
                val
            );
            queries += 1;
        }
        instances += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!("{instances} instances, {queries} queries, up to {max_cols} columns, {secs:.2} s"))
}

fn c2_residual_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut rounds, mut worst_slack, mut worst_master) = (0usize, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for g in 0..20 {
        let m = rng.gen_range(2..=5);
        let n = rng.gen_range(2..=5);
        let s = random_matrix(&mut rng, m, n);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let q: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let master =
            build_master_example1(&s, Offset::Explicit(p.clone()), Offset::Explicit(q.clone())).map_err(err)?;
        let (kind, period) = if g % 2 == 0 { (SolverKind::Ellipsoid, 8) } else { (SolverKind::MirrorDescent, 25) };
        let cfg = SolverConfig { max_steps: 600, cert_period: Some(period), gap_threshold: 0.0, ..Default::default() };
        let mut failure = None;
        solve_sp_with(&master, kind, &cfg, &mut |r| {
            let w = dense_weights(&r.solution.w_atoms, n);
            let z = dense_weights(&r.solution.z_atoms, m);
            let eps = eps_sad_enumerated(&s, &p, &q, &w, &z);
            let res = r.view.residual;
            let mres = master_residual(&master, r.view.protocol, r.view.certificate, r.view.payloads, 1000)?;
            worst_slack = worst_slack.max(eps - res);
            worst_master = worst_master.max(mres - res);
            if failure.is_none() && (eps > res + 1e-9 || mres > res + 1e-9) {
                failure = Some(format!("game {g}, step {}: ε_sad {eps}, master {mres}, residual {res}", r.view.step));
            }
            rounds += 1;
            Ok(())
        })
        .map_err(err)?;
        if let Some(f) = failure {
            return Err(f);
        }
    }
    Ok(format!(
        "{rounds} rounds, max(ε_sad - Res) = {worst_slack:.2e}, max(Res_master - Res) = {worst_master:.2e}"
    ))
}

fn c3_matrix_games() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut largest = 0;
    for g in 0..20 {
        let k = rng.gen_range(2..=4);
        let big_m = rng.gen_range(2..=100);
        let big_n = rng.gen_range(2..=100);
        let a = random_matrix(&mut rng, k, big_m);
        let d = random_matrix(&mut rng, k, big_n);
        let s = a.transpose().matmul(&d).map_err(err)?;
        let (lp_value, _) = lp_maximin(&s);
        let spec = BilinearSpSpec::new(a.into(), d.into(), Offset::Zero, Offset::Zero).map_err(err)?;
        let master = build_master_example2(spec).map_err(err)?;
        let cfg = SolverConfig { max_steps: 20_000, gap_threshold: 1e-8, eps_target: 1e-12, ..Default::default() };
        let out = solve_sp(&master, SolverKind::Ellipsoid, &cfg).map_err(err)?;
        let diff = (out.solution.value_estimate - lp_value).abs();
        ensure!(
            diff <= 1e-6,
            "game {g} ({big_m}×{big_n}, K = {k}): value {} vs LP {lp_value}, status {:?}",
            out.solution.value_estimate,
            out.status
        );
        worst = worst.max(diff);
        largest = largest.max(big_m.max(big_n));
    }
    let pennies = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
    let master = build_master_example1(&pennies, Offset::Zero, Offset::Zero).map_err(err)?;
    let cfg = SolverConfig { gap_threshold: 1e-8, eps_target: 1e-12, ..Default::default() };
    let out = solve_sp(&master, SolverKind::Ellipsoid, &cfg).map_err(err)?;
    let v = out.solution.value_estimate;
    ensure!(v.abs() <= 1e-6, "matching pennies value {v}");
    for atoms in [&out.solution.w_atoms, &out.solution.z_atoms] {
        let w = dense_weights(atoms, 2);
        ensure!(w.iter().all(|x| (x - 0.5).abs() <= 1e-3), "matching pennies atoms {w:?}");
    }
    Ok(format!("20 games up to {largest} strategies, max |v - v_LP| = {worst:.2e}; pennies v = {v:.1e}"))
}

/// All feasible allocations `a` with `a_s ≤ caps_s` and `Σ costs_s a_s ≤ budget`.
fn allocations(caps: &[usize], costs: &[usize], budget: usize) -> Vec<Vec<usize>> {
    let spec = KnapsackSpec {
        bounds: caps.to_vec(),
        costs: costs.to_vec(),
        budget,
        outputs: caps.iter().map(|&c| vec![vec![0.0]; c + 1]).collect(),
    };
    knapsack_columns(&spec).into_iter().map(|(i, _)| i).collect()
}

fn c4_desk_blotto() -> Outcome {
    let start = Instant::now();
    let spec = BlottoSpec::uniform(2, 2, 2, 4);
    let omegas = spec.omegas().map_err(err)?;
    let att = allocations(&spec.caps_a, &spec.costs_a, spec.budget_a);
    let def = allocations(&spec.caps_d, &spec.costs_d, spec.budget_d);
    ensure!(att.len() == 6 && def.len() == 6, "{} × {} strategies", att.len(), def.len());
    // Rows: Attacker (maximizes the loss), columns: Defender.
    let data = att.iter().flat_map(|a| def.iter().map(|d| spec.loss(&omegas, a, d))).collect::<Vec<_>>();
    let (lp_value, _) = lp_maximin(&DenseMatrix::new(6, 6, data).map_err(err)?);
    let cfg = SolverConfig { gap_threshold: 1e-8, eps_target: 1e-12, ..Default::default() };
    let rep = solve_blotto(&spec, SolverKind::Ellipsoid, &cfg).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let diff = (rep.value - lp_value).abs();
    ensure!(diff <= 1e-6, "value {} vs LP {lp_value}", rep.value);
    ensure!(secs < 10.0, "took {secs:.1} s");
    Ok(format!("value {:.9} vs LP {lp_value:.9} (diff {diff:.1e}), {} steps, {secs:.2} s", rep.value, rep.steps))
}

fn binomial(n: u64, k: u64) -> BigUint {
    (0..k).fold(BigUint::from(1u32), |acc, i| acc * BigUint::from(n - i) / BigUint::from(i + 1))
}

fn c5_paper_scale_blotto() -> Outcome {
    let start = Instant::now();
    let spec = BlottoSpec::uniform(8, 64, 64, 2024);
    let game = build_blotto(&spec).map_err(err)?;
    let master = build_master_example2(game.sp.clone()).map_err(err)?;
    ensure!(master.dim() == 16, "primal dimension {}", master.dim());
    // Caps never bind under the budget, so the count is the number of
    // nonnegative integer 8-vectors with sum ≤ 64.
    let expected = binomial(72, 8);
    let cfg = SolverConfig { gap_threshold: 1e-4, max_steps: 5000, ..Default::default() };
    let rep = solve_blotto(&spec, SolverKind::Ellipsoid, &cfg).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(rep.dims.0 == expected && rep.dims.1 == expected, "counts {:?} vs {expected}", rep.dims);
    ensure!(expected >= BigUint::from(1_000_000_000u64), "count {expected} below 10^9");
    ensure!(rep.gap_bound <= 1e-4, "certified gap {} after {} steps", rep.gap_bound, rep.steps);
    ensure!(rep.steps <= 5000, "{} steps", rep.steps);
    ensure!(secs <= 600.0, "took {secs:.0} s");
    Ok(format!(
        "dim 16, {expected} strategies per side, certified gap {:.2e} (exact {:.2e}) at step {}, value {:.9}, {secs:.1} s",
        rep.gap_bound, rep.gap, rep.steps, rep.value
    ))
}

fn c6_ellipsoid_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for n in [2usize, 4, 8, 16] {
        let nf = n as f64;
        let constant = (nf / (nf + 1.0)).ln() + 0.5 * (nf - 1.0) * (nf * nf / (nf * nf - 1.0)).ln();
        ensure!((log_volume_decrement(n) - constant).abs() <= 1e-12, "n = {n}: constant mismatch");
        let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut e = EllipsoidState::ball(&center, 2.0).map_err(err)?;
        let mut prev = e.shape().clone().determinant().abs().ln();
        for step in 0..20 {
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            e.cut(&g).map_err(err)?;
            let now = e.shape().clone().determinant().abs().ln();
            let dev = (now - prev - constant).abs();
            ensure!(dev <= 1e-9, "n = {n}, step {step}: decrement {} vs {constant}", now - prev);
            worst = worst.max(dev);
            prev = now;
        }
    }
    Ok(format!("n ∈ {{2,4,8,16}}, 20 cuts each, max deviation {worst:.1e}"))
}

fn desk_nash(rng: &mut ChaCha8Rng) -> (NashSpec, DenseMatrix) {
    let b = random_matrix(rng, 3, 3);
    let player = || NashPlayer { encoding: DenseMatrix::identity(3).into(), linear: None };
    let neg_bt = DenseMatrix::new(3, 3, b.transpose().data().iter().map(|x| -x).collect()).unwrap();
    let loss = vec![vec![DenseMatrix::zeros(3, 3), b.clone()], vec![neg_bt, DenseMatrix::zeros(3, 3)]];
    (NashSpec::new(vec![player(), player()], loss).unwrap(), b)
}

fn c7_vi_chain() -> Outcome {
    use decomp_core::certificates::residual;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut rounds, mut samples, mut worst_eq) = (0usize, 0usize, 0.0f64);
    for g in 0..5 {
        let (nash, b) = desk_nash(&mut rng);
        let spec = nash_to_skew(&nash).map_err(err)?;
        let dense = spec.materialize(100).map_err(err)?;
        ensure!(dense.block_sizes() == vec![3, 3], "blocks {:?}", dense.block_sizes());
        ensure!(dense.skewness_defect(200, g) <= 1e-12, "game {g}: QᵀP is not skew");

        for _ in 0..20 {
            let mut eta = random_simplex(&mut rng, 3);
            eta.extend(random_simplex(&mut rng, 3));
            let en = eps_nash(&nash, &dense.atoms(&eta).map_err(err)?).map_err(err)?;
            let ev = dense.eps_vi(&eta).map_err(err)?;
            ensure!(en <= ev + 1e-12, "game {g}: ε_Nash {en} > ε_VI {ev}");
            samples += 1;
        }

        let radii = spec.radii();
        let cfg = SolverConfig { max_steps: 6000, gap_threshold: 1e-10, cert_period: Some(16), ..Default::default() };
        let mut failure = None;
        let out = solve_skew_vi_with(&spec, SolverKind::Ellipsoid, &cfg, &mut |r| {
            let eta = dense.densify(r.eta)?;
            let eps = dense.eps_vi(&eta)?;
            let j = dense.master_protocol(r.view.protocol, r.view.payloads)?;
            let res_j = residual(&j, r.view.certificate, &dense.theta(radii))?.residual;
            let res_i = r.view.residual;
            if failure.is_none() && !(eps <= res_j + 1e-9 && res_j <= res_i + 1e-9) {
                failure = Some(format!("game {g}, step {}: ε_VI {eps}, Res(J) {res_j}, Res(I) {res_i}", r.view.step));
            }
            rounds += 1;
            Ok(())
        })
        .map_err(err)?;
        if let Some(f) = failure {
            return Err(f);
        }

        // Player 0 minimizes w₀ᵀ B w₁, player 1 maximizes it.
        let eta = dense.densify(&out.eta).map_err(err)?;
        let neg_b = DenseMatrix::new(3, 3, b.data().iter().map(|x| -x).collect()).unwrap();
        let (_, w0) = lp_maximin(&neg_b);
        let (_, w1) = lp_maximin(&b.transpose());
        let lp: Vec<f64> = w0.into_iter().chain(w1).collect();
        let dev = eta.iter().zip(&lp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure!(dev <= 1e-3, "game {g}: equilibrium {eta:?} vs LP {lp:?} (ε {:?})", out.eps_exact);
        worst_eq = worst_eq.max(dev);
    }
    Ok(format!(
        "5 games, {rounds} rounds chained, {samples} ε_Nash ≤ ε_VI samples, max |η - η_LP| = {worst_eq:.1e}"
    ))
}

fn c8_md_rate() -> Outcome {
    let domain = BallProduct::origin(&[(3, 1.0)]).map_err(err)?;
    let field = FnField::new(3, |x: &[f64]| x.to_vec());
    let cfg = SolverConfig {
        start: Some(vec![0.3, -0.2, 0.1]),
        max_steps: 100_000,
        cert_period: Some(100),
        eps_target: f64::MIN_POSITIVE,
        gap_threshold: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut pts = Vec::new();
    md_run(&field, &domain, &cfg, &mut |r| {
        if r.step >= 100 && r.residual > 0.0 {
            pts.push(((r.step as f64).ln(), r.residual.ln()));
        }
        Ok(None)
    })
    .map_err(err)?;
    ensure!(pts.len() >= 2, "only {} rounds", pts.len());
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    ensure!(slope <= -0.4, "log-log slope {slope:.3}");
    Ok(format!("{} rounds over t ∈ [1e2, 1e5], slope {slope:.3}", pts.len()))
}

/// Residual over origin-centered balls computed from its definition.
fn residual_by_definition(p: &ExecutionProtocol, lambda: &[f64], blocks: &[(usize, f64)]) -> f64 {
    let dim = p.dim();
    let mut agg = vec![0.0; dim];
    let mut inner = 0.0;
    for ((x, f), l) in p.points().iter().zip(p.field_values()).zip(lambda) {
        inner += l * dot(f, x);
        for (a, v) in agg.iter_mut().zip(f) {
            *a += l * v;
        }
    }
    let mut start = 0;
    let mut support = 0.0;
    for &(len, r) in blocks {
        let g = &agg[start..start + len];
        support += r * dot(g, g).sqrt();
        start += len;
    }
    inner + support
}

fn c9_certificate_optimizer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let opts = CertificateOptions::default();
    let (mut total_gain, mut worst) = (0.0, f64::NEG_INFINITY);
    for trial in 0..20 {
        let n1 = rng.gen_range(2..=4);
        let n2 = rng.gen_range(2..=4);
        let (r1, r2) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
        let blocks = [(n1, r1), (n2, r2)];
        let balls = BallProduct::origin(&blocks).map_err(err)?;
        let mut proto = ExecutionProtocol::new(n1 + n2);
        for i in 0..50 {
            let mut x = random_in_ball(&mut rng, n1, r1);
            x.extend(random_in_ball(&mut rng, n2, r2));
            let f: Vec<f64> = (0..n1 + n2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            proto.push(i + 1, x, f).map_err(err)?;
        }
        let uniform = AccuracyCertificate::uniform(50).map_err(err)?;
        let r_uni = residual_by_definition(&proto, uniform.weights(), &blocks);
        let (cert, r_opt) = optimize_certificate(&proto, &balls, None, &opts).map_err(err)?;
        let r_def = residual_by_definition(&proto, cert.weights(), &blocks);
        ensure!((r_def - r_opt).abs() <= 1e-9 * (1.0 + r_def.abs()), "trial {trial}: reported {r_opt} vs {r_def}");
        ensure!(r_opt <= r_uni + 1e-12, "trial {trial}: optimized {r_opt} > uniform {r_uni}");
        total_gain += r_uni - r_opt;

        // Warm-started rounds over growing prefixes.
        let mut warm: Option<AccuracyCertificate> = None;
        let mut min_so_far = f64::INFINITY;
        let mut prev_round = f64::INFINITY;
        for t in (10..=50).step_by(10) {
            let prefix = proto.prefix(t);
            let (c, r) = optimize_certificate(&prefix, &balls, warm.as_ref(), &opts).map_err(err)?;
            ensure!(r <= prev_round + 1e-12, "trial {trial}, t = {t}: warm-started {r} > previous {prev_round}");
            let next_min = min_so_far.min(r);
            ensure!(next_min <= min_so_far, "min-so-far increased");
            worst = worst.max(r - residual_over_balls(&prefix, &c, &balls).map_err(err)?);
            min_so_far = next_min;
            prev_round = r;
            warm = Some(c);
        }
    }
    Ok(format!("20 protocols, mean residual reduction {:.3} vs uniform, warm starts monotone", total_gain / 20.0))
}

fn c10_subgradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut instances = Vec::new();
    let s = random_matrix(&mut rng, 4, 5);
    let p: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let q: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
    instances.push(("dense 4×5 with offsets", build_master_example1(&s, Offset::Explicit(p), Offset::Explicit(q))));
    let a = random_matrix(&mut rng, 3, 7);
    let d = random_matrix(&mut rng, 3, 6);
    instances.push((
        "factored K = 3",
        BilinearSpSpec::new(a.into(), d.into(), Offset::Zero, Offset::Zero).and_then(build_master_example2),
    ));
    let blotto = build_blotto(&BlottoSpec::uniform(3, 4, 6, 10)).map_err(err)?;
    instances.push(("blotto m = 3", build_master_example2(blotto.sp)));

    let mut worst = f64::NEG_INFINITY;
    for (name, master) in instances {
        let master = master.map_err(err)?;
        let (n, m) = master.dims();
        let (ru, rv) = master.radii();
        for pair in 0..200 {
            let (u, v) = (random_in_ball(&mut rng, n, ru), random_in_ball(&mut rng, m, rv));
            let (u2, v2) = (random_in_ball(&mut rng, n, ru), random_in_ball(&mut rng, m, rv));
            let at = master.primal_value_grad(&u, &v).map_err(err)?;
            let phi_u2 = master.primal_value_grad(&u2, &v).map_err(err)?.phi;
            let phi_v2 = master.primal_value_grad(&u, &v2).map_err(err)?.phi;
            let du: Vec<f64> = u2.iter().zip(&u).map(|(a, b)| a - b).collect();
            let dv: Vec<f64> = v2.iter().zip(&v).map(|(a, b)| a - b).collect();
            let sub = at.phi + dot(&at.g_u, &du) - phi_u2;
            let sup = phi_v2 - at.phi - dot(&at.g_v, &dv);
            ensure!(sub <= 1e-9, "{name}, pair {pair}: subgradient inequality violated by {sub}");
            ensure!(sup <= 1e-9, "{name}, pair {pair}: supergradient inequality violated by {sup}");
            worst = worst.max(sub).max(sup);
        }
    }
    Ok(format!("3 instances × 200 pairs, max violation {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 oracle equivalence", c1_oracle_equivalence),
        ("2 residual soundness", c2_residual_soundness),
        ("3 matrix-game correctness", c3_matrix_games),
        ("4 desk Blotto", c4_desk_blotto),
        ("5 paper-scale Blotto shape", c5_paper_scale_blotto),
        ("6 ellipsoid geometry", c6_ellipsoid_geometry),
        ("7 VI chain", c7_vi_chain),
        ("8 MD rate", c8_md_rate),
        ("9 certificate optimizer", c9_certificate_optimizer),
        ("10 subgradient checks", c10_subgradients),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| Err(format!("panicked: {}", e.downcast_ref::<String>().cloned().unwrap_or_default())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS  criterion {name}: {msg} [{secs:.2} s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  criterion {name}: {msg} [{secs:.2} s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
