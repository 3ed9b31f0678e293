//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::Instant;

use hiercontact::bounds::{
    bracket_delta_c, certify_extinction, compare_reduce, eps_domination, eps_tilde_bounds, f, finite_survival_bound,
    g, ln_f_eta, recursion, sandwich_holds, smallest_sandwich, survival_product, BracketOptions, SurvivalVerdict,
};
use hiercontact::coupling::{cascade_stats, conditional_law_test, marginal_test, run_coupled};
use hiercontact::exactgen::{
    closed_form_tables, two_level_tables, verify_commute, verify_intertwine, verify_intertwine_with,
    verify_one_level_spectrum, StarConvention, VerifyOptions,
};
use hiercontact::lattice::{AlphaSeq, RateModel};
use hiercontact::rng::replica_rng;
use hiercontact::simulate::{
    estimate_survival, first_jump_distribution, run_common_skeleton, sample_first_jump, EventKind, Sampler,
    SparseConfig,
};
use hiercontact::stats::chi_square;
use rand::Rng;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn lift<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn c01_intertwining() -> Outcome {
    let mut rng = replica_rng(2024, 1);
    let mut worst = [0.0f64; 3];
    let mut worst_commute = [0.0f64; 2];
    let mut ok = true;
    for _ in 0..20 {
        let delta = rng.random_range(0.05..=5.0);
        let alpha: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..=10.0)).collect();
        for n in 1..=3u32 {
            let r = lift(verify_intertwine(n, delta, &alpha[..n as usize]))?;
            let tol = if n <= 2 { 1e-12 } else { 1e-10 };
            ok &= r.max_residual < tol;
            worst[n as usize - 1] = worst[n as usize - 1].max(r.max_residual);
        }
        for n in 1..=2u32 {
            let r = lift(verify_commute(n, delta, &alpha[..n as usize]))?;
            let tol = if n == 1 { 1e-12 } else { 1e-10 };
            ok &= r.max_residual < tol;
            worst_commute[n as usize - 1] = worst_commute[n as usize - 1].max(r.max_residual);
        }
    }
    let sci = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join("/");
    Ok((ok, format!("intertwine max residual n=1/2/3 {}, commute n=1/2 {}", sci(&worst), sci(&worst_commute))))
}

fn c02_spectrum() -> Outcome {
    let mut worst = 0.0f64;
    let mut ok = true;
    for i in 0..10 {
        for j in 0..10 {
            let delta = 0.05 * 10f64.powf(i as f64 / 4.5);
            let alpha1 = 0.02 * 10f64.powf(j as f64 / 3.0);
            let r = lift(verify_one_level_spectrum(delta, alpha1))?;
            // Lead eigenvalue and eigenvector against -2δ f(α₁/δ) and (0, 1-ξ, 1-ξ, 1).
            let xi = lift(f(alpha1 / delta))?;
            let s = lift(hiercontact::exactgen::one_level_spectrum(delta, alpha1))?;
            let lead = (s.numeric[0] + 2.0 * delta * xi).abs() / (2.0 * delta * xi).max(1.0);
            let vec = s.eigvec.iter().zip([0.0, 1.0 - xi, 1.0 - xi, 1.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let e = lead.max(vec);
            worst = worst.max(e);
            ok &= e < 1e-12 && r.pass;
        }
    }
    Ok((ok, format!("100 grid points, worst eigenpair error {worst:.2e}")))
}

fn c03_two_level() -> Outcome {
    let mut ok = true;
    let mut table = 0.0f64;
    let mut ident = 0.0f64;
    for xi in [0.05, 0.25, 0.5] {
        let a = lift(two_level_tables(xi, StarConvention::A))?;
        let b = lift(two_level_tables(xi, StarConvention::B))?;
        let (cp, cip) = closed_form_tables(xi);
        let mut entry = 0.0f64;
        for t in 0..3 {
            for r in 0..3 {
                for c in 0..3 {
                    entry = entry.max((a.p[t][r][c] - cp[t][r][c]).abs()).max((a.ip[t][r][c] - cip[t][r][c]).abs());
                }
            }
        }
        let id = a.product_residual.max(a.full_residual).max(a.antisymmetry_residual);
        let id_b = b.product_residual.max(b.full_residual).max(b.antisymmetry_residual);
        ok &= entry < 1e-14 && id < 1e-12 && id_b < 1e-12;
        ok &= a.p == b.p && a.ip == b.ip;
        table = table.max(entry);
        ident = ident.max(id).max(id_b);
    }
    Ok((ok, format!("table error {table:.2e}, identity residual {ident:.2e}, A and B tables identical")))
}

fn c04_star() -> Outcome {
    let mut rng = replica_rng(2024, 4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let delta = rng.random_range(0.05..=5.0);
        let alpha: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..=10.0)).collect();
        for n in 1..=3u32 {
            let opts = |star| VerifyOptions { star, xi_override: None };
            let ra = lift(verify_intertwine_with(n, delta, &alpha[..n as usize], &opts(StarConvention::A)))?;
            let rb = lift(verify_intertwine_with(n, delta, &alpha[..n as usize], &opts(StarConvention::B)))?;
            worst = worst.max((ra.max_residual - rb.max_residual).abs());
        }
    }
    Ok((worst < 1e-12, format!("max |residual_A - residual_B| = {worst:.2e}")))
}

fn c05_first_jump() -> Outcome {
    const DRAWS: u64 = 1_000_000;
    let mut ok = true;
    let mut lines = Vec::new();
    for base in [2u32, 3] {
        let model = lift(RateModel::new(base, 0.7, AlphaSeq::Geometric { q: 0.6 }))?;
        let sites = (base * base) as usize;
        let configs = [
            ("single", lift(SparseConfig::single(base, 2, 0))?),
            ("half", lift(SparseConfig::from_sites(base, 2, (0..sites).step_by(2).take(sites / 2)))?),
            ("all", lift(SparseConfig::full(base, 2))?),
        ];
        let sampler = lift(Sampler::new(&model, 2))?;
        for (c, (name, config)) in configs.iter().enumerate() {
            let oracle = lift(first_jump_distribution(&model, 2, config))?;
            let total: f64 = oracle.iter().map(|t| t.rate).sum();
            let index: BTreeMap<(EventKind, usize), usize> =
                oracle.iter().enumerate().map(|(i, t)| ((t.kind, t.site), i)).collect();
            let probs: Vec<f64> = oracle.iter().map(|t| t.rate / total).collect();
            let mut counts = vec![0u64; oracle.len()];
            let mut rng = replica_rng(77 + base as u64, c as u64);
            for _ in 0..DRAWS {
                let jump = sample_first_jump(&sampler, config, &mut rng).ok_or("no jump available")?;
                let slot = index.get(&jump).ok_or_else(|| format!("sampled {jump:?} has zero oracle rate"))?;
                counts[*slot] += 1;
            }
            let cs = chi_square(&counts, &probs);
            ok &= cs.p > 1e-3;
            lines.push(format!("N={base} {name}: p={:.3}", cs.p));
        }
    }
    Ok((ok, lines.join(", ")))
}

fn c06_conditional() -> Outcome {
    let model = lift(RateModel::new(2, 1.0, AlphaSeq::explicit([2.0, 1.0])))?;
    let r = lift(conditional_law_test(&model, 2, 1.0, 100_000, 606))?;
    // Pathwise domination over every event of a separate batch.
    let x0 = lift(SparseConfig::single(2, 2, 0))?;
    let mut events = 0u64;
    let mut bad = 0u64;
    for rep in 0..20_000 {
        lift(run_coupled(&model, 2, &x0, 1.0, 607, rep, |e| {
            events += 1;
            bad += (e.state.y & !e.state.ytilde != 0) as u64;
        }))?;
    }
    let pooled = r.pooled_p.unwrap_or(f64::NAN);
    Ok((
        r.pass && bad == 0,
        format!("pooled p={pooled:.4}, {} strata; Y ⊆ Ỹ in {}/{} events", r.strata.len(), events - bad, events),
    ))
}

fn c07_marginal() -> Outcome {
    let model = lift(RateModel::new(2, 1.0, AlphaSeq::explicit([2.0, 1.0])))?;
    let two = lift(marginal_test(&model, 2, 1.0, 100_000, 707, 0.02))?;
    let tv2 = two.params["tv_plain"].as_f64().unwrap_or(f64::NAN);
    let one = lift(marginal_test(&model, 1, 1.0, 100_000, 708, 0.01))?;
    let tv1 = one.params["tv_exact"].as_f64().unwrap_or(f64::NAN);
    Ok((tv2 < 0.02 && tv1 < 0.01, format!("n=2 TV(coupled, plain)={tv2:.4}; n=1 TV(coupled, exact)={tv1:.4}")))
}

fn c08_survival() -> Outcome {
    let alpha = AlphaSeq::Geometric { q: 0.5 };
    let model = lift(RateModel::new(2, 0.1, alpha.clone()))?;
    let init = lift(SparseConfig::single(2, 3, 0))?;
    let est = lift(estimate_survival(&model, 3, &init, 5.0, 100_000, 808))?;
    let bound = lift(finite_survival_bound(0.1, &alpha, 3, 5.0))?;
    Ok((
        est.p_hat >= bound - 3.0 * est.stderr,
        format!("p_hat={:.4} ± {:.4}, bound={bound:.4}", est.p_hat, est.stderr),
    ))
}

fn c09_cascade() -> Outcome {
    let model = lift(RateModel::new(2, 0.3, AlphaSeq::Geometric { q: 0.5 }))?;
    let s = lift(cascade_stats(&model, 3, 1.0, 100_000, 909))?;
    let mut ok = s.order_violations == 0;
    let mut parts = Vec::new();
    for m in 1..=3 {
        let z = (s.origin_freq[m] - s.origin_expected[m]).abs() / s.origin_stderr[m];
        ok &= z <= 3.0;
        parts.push(format!("m={m}: {:.4} vs {:.4} (z={z:.2})", s.origin_freq[m], s.origin_expected[m]));
    }
    Ok((ok, parts.join(", ")))
}

fn c10_closed_forms() -> Outcome {
    let alpha = AlphaSeq::explicit([0.9, 0.7, 0.4, 0.3, 0.2, 0.15]);
    let a = |k: usize| alpha.value(k);
    let delta = 0.01;
    let e = lift(eps_tilde_bounds(delta, &alpha, 3, 9.0))?;
    let ln_direct = (9.0 * delta).powi(8).ln() - 9f64.ln() - (a(4) * a(3) * a(2).powi(2) * a(1).powi(4)).ln();
    let rel_iter = (e.ln_iterated[3] - ln_direct).exp_m1().abs();
    let rel_closed = (e.ln_closed[3] - ln_direct).exp_m1().abs();

    let mut f_rel = 0.0f64;
    for eta in [0.3f64, 0.8, 1.7] {
        for n in 0..=4usize {
            let mut denom = a(n + 1);
            for k in 1..=n {
                denom *= a(k).powi(1 << (n - k));
            }
            let direct = eta.powi(1 << n) / denom;
            f_rel = f_rel.max((lift(ln_f_eta(&alpha, eta, n))?.exp() / direct - 1.0).abs());
        }
    }

    let mut dom_ok = true;
    let mut dom = Vec::new();
    for (name, seq, d) in [
        ("geometric:0.5", AlphaSeq::Geometric { q: 0.5 }, 1e-3),
        ("double_exp:1.5", AlphaSeq::DoubleExp { theta: 1.5 }, 1e-3),
        ("effective_dim:3", AlphaSeq::EffectiveDim { d: 3.0, base: 2 }, 1e-3),
    ] {
        let r = lift(eps_domination(d, &seq, 8))?;
        dom_ok &= r.upper_holds && r.lower_holds && r.lower_valid_until > 0;
        dom.push(format!("{name} lower valid to {}", r.lower_valid_until));
    }
    Ok((
        rel_iter < 1e-10 && rel_closed < 1e-10 && f_rel < 1e-10 && dom_ok,
        format!(
            "eps~(3) rel err iterated {rel_iter:.1e} closed {rel_closed:.1e}; F_eta rel err {f_rel:.1e}; domination [{}]",
            dom.join("; ")
        ),
    ))
}

fn c11_regimes() -> Outcome {
    let slow = AlphaSeq::DoubleExp { theta: 1.5 };
    let b = lift(bracket_delta_c(&slow, 2, &BracketOptions::default()))?;
    let fast = AlphaSeq::DoubleExp { theta: 3.0 };
    let grid: Vec<f64> = (0..=8).map(|i| 10f64.powf(-(i as f64) / 2.0)).collect();
    let mut certified = 0;
    let mut positive = 0;
    for &d in &grid {
        certified += lift(certify_extinction(d, &fast, 2, 60))?.is_some() as usize;
        positive += (lift(survival_product(d, &fast, 1e-8, 400))?.verdict == SurvivalVerdict::Positive) as usize;
    }
    Ok((
        b.lower > 0.0 && certified == grid.len() && positive == 0,
        format!(
            "theta=1.5 bracket [{:.3e}, {:.3e}]; theta=3 certified {certified}/{} down to 1e-4, positive verdicts {positive}",
            b.lower,
            b.upper,
            grid.len()
        ),
    ))
}

fn c12_compare() -> Outcome {
    let found = smallest_sandwich(2.5, 3);
    let pair_ok = found == Some((4, 6)) && sandwich_holds(2.5, 3, 4, 6);

    let alpha = AlphaSeq::Geometric { q: 0.5 };
    let r = lift(compare_reduce(&alpha, 3, 2.5))?;
    let ln3 = 3f64.ln();
    let mut eq_ok = true;
    for l in 0..8 {
        let (i_l, ln_min) = (l * r.m + 1..=l * r.m + r.m)
            .map(|i| (i, alpha.ln_value(i) - i as f64 * ln3))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        eq_ok &= r.blocks[l].argmin == i_l && r.blocks[l].ln_gamma == ln_min;
        for rr in 1..=r.n {
            let k = l * r.n + rr;
            eq_ok &= r.alpha_doubleprime.ln_value(k) == k as f64 * LN_2 + ln_min;
        }
    }

    let (delta, t) = (0.05, 2.0);
    let model = lift(RateModel::new(3, delta, alpha.clone()))?;
    let init = lift(SparseConfig::single(3, 2, 0))?;
    let est = lift(estimate_survival(&model, 2, &init, t, 10_000, 1212))?;
    let bound = lift(finite_survival_bound(delta, &r.alpha_doubleprime, r.n, t))?;
    let mc_ok = bound <= est.p_hat + 3.0 * est.stderr;
    Ok((
        pair_ok && eq_ok && mc_ok,
        format!(
            "smallest (m, n) = {found:?} (expected (4, 6)); blockwise equalities {}; N=2 bound {bound:.4} vs MC {:.4} ± {:.4}",
            if eq_ok { "exact" } else { "broken" },
            est.p_hat,
            est.stderr
        ),
    ))
}

fn c13_monotone() -> Outcome {
    let mut ok = true;
    let rs: Vec<f64> = (0..=4000).map(|i| 10f64.powf(-8.0 + i as f64 * 0.004)).collect();
    for w in rs.windows(2) {
        ok &= lift(f(w[1]))? < lift(f(w[0]))?;
        ok &= lift(g(w[1]))? > lift(g(w[0]))?;
    }
    let grid: Vec<f64> = (0..=40).map(|i| 1e-3 * 10f64.powf(i as f64 / 10.0)).collect();
    for alpha in [
        AlphaSeq::Geometric { q: 0.5 },
        AlphaSeq::DoubleExp { theta: 1.5 },
        AlphaSeq::EffectiveDim { d: 3.0, base: 2 },
    ] {
        let mut prev_lower = f64::INFINITY;
        let mut prev_partial = f64::INFINITY;
        for &d in &grid {
            let lower = lift(survival_product(d, &alpha, 1e-8, 400))?.pi_lower;
            let partial = lift(recursion(d, &alpha, 30))?.ln_product_partial[30];
            ok &= lower <= prev_lower && partial <= prev_partial;
            prev_lower = lower;
            prev_partial = partial;
        }
    }
    let model = lift(RateModel::new(2, 0.1, AlphaSeq::Geometric { q: 0.5 }))?;
    let init = lift(SparseConfig::full(2, 4))?;
    let deltas = [0.05, 0.1, 0.2, 0.4, 0.8];
    let mut violations = 0;
    for seed in 0..50 {
        violations += lift(run_common_skeleton(&model, 4, &init, &deltas, 5.0, seed))?.violations;
    }
    ok &= violations == 0;
    Ok((ok, format!("f/g on 4001 points, Pi(delta) on 3 families x 41 deltas, {violations} skeleton violations in 50 runs")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("intertwining identities", c01_intertwining),
        ("one-level spectrum", c02_spectrum),
        ("two-level tables", c03_two_level),
        ("star-entry independence", c04_star),
        ("first-jump sampler", c05_first_jump),
        ("conditional law", c06_conditional),
        ("marginal consistency", c07_marginal),
        ("finite survival bound", c08_survival),
        ("cascade origin frequencies", c09_cascade),
        ("closed forms", c10_closed_forms),
        ("regimes of double-exponential rates", c11_regimes),
        ("comparison reduction", c12_compare),
        ("monotonicity", c13_monotone),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += !pass as usize;
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            clock.elapsed().as_secs_f64()
        );
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
