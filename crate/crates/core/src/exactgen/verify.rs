use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{invalid, Result};

use super::generators::{a_entry, b_entry, build_contact_generator, build_two_level_coupling_generator, JointSystem, StarConvention};
use super::kernel::build_kernel;
use super::matrix::evolve_law;
use super::state::{space_size, BlockClass};

/// Outcome of one numerical identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub n: u32,
    pub params: Value,
    pub max_residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl VerificationReport {
    fn new(check: &str, n: u32, params: Value, max_residual: f64, threshold: f64) -> Self {
        Self {
            check: check.to_string(),
            n,
            params,
            max_residual,
            threshold,
            pass: max_residual.is_finite() && max_residual < threshold,
        }
    }
}

/// Options shared by the intertwining checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub star: StarConvention,
    /// Replaces `f(α_1/δ)` with a fixed `ξ`; used to confirm that the identities
    /// single out the right value.
    pub xi_override: Option<f64>,
}

/// Residual threshold used at level `n`.
pub fn threshold_for(n: u32) -> f64 {
    if n <= 2 {
        1e-12
    } else {
        1e-10
    }
}

fn params(sys: &JointSystem, opts: &VerifyOptions) -> Value {
    json!({
        "delta": sys.delta,
        "alpha": sys.alpha,
        "xi": sys.xi,
        "delta_prime": sys.delta_prime,
        "star": opts.star,
        "xi_override": opts.xi_override,
    })
}

/// Max over `x ∈ S_n` and `y ∈ S_{n-1}` of `|G P 1_y (x) - Σ_{y'} P(x,y') G'_x(y', y)|`.
pub fn intertwine_residual(sys: &JointSystem) -> f64 {
    let ny = sys.ny();
    let mut worst = 0.0f64;
    for x in 0..sys.g.dim() {
        let row = sys.kernel.row(x);
        let mut rhs = vec![0.0; ny];
        for &(y1, p) in &row {
            for &(y2, r) in sys.addon[x].row(y1) {
                rhs[y2] += p * r;
            }
            rhs[y1] -= p * sys.addon[x].exit_rate(y1);
        }
        let pxy: Vec<f64> = (0..ny).map(|y| sys.kernel.entry(x, y)).collect();
        for y in 0..ny {
            let lhs: f64 = sys.g.row(x).iter().map(|&(x2, r)| r * (sys.kernel.entry(x2, y) - pxy[y])).sum();
            worst = worst.max((lhs - rhs[y]).abs());
        }
    }
    worst
}

pub fn verify_intertwine_with(n: u32, delta: f64, alpha: &[f64], opts: &VerifyOptions) -> Result<VerificationReport> {
    if !(1..=3).contains(&n) {
        return Err(invalid(format!("intertwining check supports n in 1..=3, got {n}")));
    }
    let sys = JointSystem::new(n, delta, alpha, opts.xi_override, opts.star)?;
    let r = intertwine_residual(&sys);
    Ok(VerificationReport::new("intertwine", n, params(&sys, opts), r, threshold_for(n)))
}

pub fn verify_intertwine(n: u32, delta: f64, alpha: &[f64]) -> Result<VerificationReport> {
    verify_intertwine_with(n, delta, alpha, &VerifyOptions::default())
}

/// Residuals of `G P̄ f = P̄ Ĝ f`: the max over indicator functions of joint
/// states, and the value on the constant function.
pub fn commute_residuals(sys: &JointSystem) -> Result<(f64, f64)> {
    let gj = sys.joint_generator()?;
    let nx = sys.g.dim();
    let ny = sys.ny();
    let gj_dense = gj.to_dense();
    let mut worst = 0.0f64;
    for x in 0..nx {
        let prow = sys.kernel.row(x);
        for x0 in 0..nx {
            let gxx0 = sys.g.entry(x, x0);
            for y0 in 0..ny {
                let lhs = gxx0 * sys.kernel.entry(x0, y0);
                let col = sys.joint_index(x0, y0);
                let rhs: f64 = prow.iter().map(|&(y, p)| p * gj_dense[(sys.joint_index(x, y), col)]).sum();
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    let ones = vec![1.0; ny];
    let pbar_one = sys.kernel.apply(&ones);
    let lhs = sys.g.apply(&pbar_one);
    let ghat_one = gj.apply(&vec![1.0; nx * ny]);
    let constant = (0..nx)
        .map(|x| {
            let rhs = sys.kernel.apply_row(x, &ghat_one[x * ny..(x + 1) * ny]);
            (lhs[x] - rhs).abs()
        })
        .fold(0.0, f64::max);
    Ok((worst, constant))
}

pub fn verify_commute_with(n: u32, delta: f64, alpha: &[f64], opts: &VerifyOptions) -> Result<VerificationReport> {
    if !(1..=2).contains(&n) {
        return Err(invalid(format!("commutation check supports n in 1..=2, got {n}")));
    }
    let sys = JointSystem::new(n, delta, alpha, opts.xi_override, opts.star)?;
    let (r, constant) = commute_residuals(&sys)?;
    let mut p = params(&sys, opts);
    p["constant_residual"] = json!(constant);
    let threshold = if n == 1 { 1e-12 } else { 1e-10 };
    Ok(VerificationReport::new("commute", n, p, r, threshold))
}

pub fn verify_commute(n: u32, delta: f64, alpha: &[f64]) -> Result<VerificationReport> {
    verify_commute_with(n, delta, alpha, &VerifyOptions::default())
}

/// Compares the intertwining (and, for `n <= 2`, commutation) residuals under
/// the two star conventions.
pub fn verify_star_independence(n: u32, delta: f64, alpha: &[f64]) -> Result<VerificationReport> {
    let a = VerifyOptions { star: StarConvention::A, xi_override: None };
    let b = VerifyOptions { star: StarConvention::B, xi_override: None };
    let ia = verify_intertwine_with(n, delta, alpha, &a)?;
    let ib = verify_intertwine_with(n, delta, alpha, &b)?;
    let mut diff = (ia.max_residual - ib.max_residual).abs();
    let mut worst = ia.max_residual.max(ib.max_residual);
    if n <= 2 {
        let ca = verify_commute_with(n, delta, alpha, &a)?;
        let cb = verify_commute_with(n, delta, alpha, &b)?;
        diff = diff.max((ca.max_residual - cb.max_residual).abs());
        worst = worst.max(ca.max_residual).max(cb.max_residual);
    }
    let p = json!({ "delta": delta, "alpha": alpha, "largest_residual": worst });
    Ok(VerificationReport::new("star_independence", n, p, diff, 1e-12))
}

/// Spectrum of the contact process on `Ω^1` restricted to symmetric functions
/// vanishing at `00`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneLevelSpectrum {
    pub delta: f64,
    pub alpha1: f64,
    /// `-2δξ` with `ξ = f(α_1/δ)`.
    pub lambda_lead: f64,
    /// `-2δ(γ + sqrt(γ² - 1/2))`.
    pub lambda_sub: f64,
    /// Eigenvalues of the 2×2 block from a numerical eigensolver, leading first.
    pub numeric: [f64; 2],
    /// Leading eigenfunction on `S_1` in the order `00, 10, 01, 11`, scaled so the `11` entry is 1.
    pub eigvec: [f64; 4],
    /// `max |Gv - λ v|` for the full 4-state generator.
    pub eigen_residual: f64,
}

pub fn one_level_spectrum(delta: f64, alpha1: f64) -> Result<OneLevelSpectrum> {
    if !(delta > 0.0) || !(alpha1 >= 0.0) {
        return Err(invalid(format!("need delta > 0 and alpha1 >= 0, got ({delta}, {alpha1})")));
    }
    let gamma = 0.25 * (3.0 + alpha1 / (2.0 * delta));
    let root = (gamma * gamma - 0.5).sqrt();
    let xi = crate::bounds::f(alpha1 / delta)?;
    let lambda_lead = -2.0 * delta * xi;
    let lambda_sub = -2.0 * delta * (gamma + root);

    let m = Matrix2::new(-(delta + 0.5 * alpha1), 0.5 * alpha1, 2.0 * delta, -2.0 * delta);
    let ev = m
        .eigenvalues()
        .ok_or_else(|| crate::Error::InvariantViolated("complex eigenvalues in the one-level block".into()))?;
    let (hi, lo) = if ev[0] >= ev[1] { (ev[0], ev[1]) } else { (ev[1], ev[0]) };

    // Second row of (M - λ)v = 0: 2δ u + (-2δ - λ) v = 0, with v = 1.
    let u = (2.0 * delta + hi) / (2.0 * delta);
    let eigvec = [0.0, u, u, 1.0];
    let g = build_contact_generator(1, delta, &[alpha1])?;
    let gv = g.apply(&eigvec);
    let eigen_residual = gv.iter().zip(eigvec).map(|(a, v)| (a - hi * v).abs()).fold(0.0, f64::max);
    Ok(OneLevelSpectrum { delta, alpha1, lambda_lead, lambda_sub, numeric: [hi, lo], eigvec, eigen_residual })
}

/// The 3×3 tables indexed by `(x̄_0, x̄_1)` for one level-1 target `y`.
pub type ClassTable = [[f64; 3]; 3];

/// Two-level tables rebuilt from the generator and kernel, with their residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelTables {
    pub xi: f64,
    /// `P_y` for `y = 00, 01, 11`.
    pub p: [ClassTable; 3],
    /// `IP_y` for `y = 00, 01, 11`.
    pub ip: [ClassTable; 3],
    /// Entrywise distance to the closed-form tables.
    pub table_residual: f64,
    /// `IP_00 = -b•P_00` and `IP_01 = -a•P_01` on representatives.
    pub product_residual: f64,
    /// `IP(·,y)(x) = Σ_{y'} P(x,y') I'_x(y',y)` over all 16 `x` and 4 `y`.
    pub full_residual: f64,
    /// `|IP(·,01) + IP(·,11)|` over all 16 `x`.
    pub antisymmetry_residual: f64,
}

/// Level-1 configuration written as `y(0)y(1)`, as bits.
const Y00: usize = 0b00;
const Y10: usize = 0b01;
const Y01: usize = 0b10;
const Y11: usize = 0b11;

pub fn closed_form_tables(xi: f64) -> ([ClassTable; 3], [ClassTable; 3]) {
    let e = 1.0 - xi;
    let p00 = [[1.0, xi, 0.0], [xi, xi * xi, 0.0], [0.0; 3]];
    let p01 = [[0.0, e, 1.0], [0.0, xi * e, xi], [0.0; 3]];
    let p11 = [[0.0; 3], [0.0, e * e, e], [0.0, e, 1.0]];
    let ip00 = [[0.0, -xi * e, 0.0], [0.0, -0.5 * xi * xi, 0.0], [0.0; 3]];
    let ip01 = [[0.0, -e * e, -2.0 * e], [0.0, -0.5 * xi * e, -xi], [0.0; 3]];
    let ip11 = ip01.map(|r| r.map(|v| -v));
    ([p00, p01, p11], [ip00, ip01, ip11])
}

pub fn two_level_tables(xi: f64, star: StarConvention) -> Result<TwoLevelTables> {
    let kernel = build_kernel(2, xi)?;
    let ig = build_two_level_coupling_generator();
    // IP(·, y) for each y ∈ S_1, as a function on S_2.
    let ip_full: Vec<Vec<f64>> = (0..4)
        .map(|y| {
            let col: Vec<f64> = (0..16).map(|x| kernel.entry(x, y)).collect();
            ig.apply(&col)
        })
        .collect();
    let ys = [Y00, Y01, Y11];
    let mut p = [[[0.0; 3]; 3]; 3];
    let mut ip = [[[0.0; 3]; 3]; 3];
    let mut product_residual = 0.0f64;
    for c0 in BlockClass::ALL {
        for c1 in BlockClass::ALL {
            let x = (c0.representative() | c1.representative() << 2) as usize;
            for (t, &y) in ys.iter().enumerate() {
                p[t][c0.index()][c1.index()] = kernel.entry(x, y);
                ip[t][c0.index()][c1.index()] = ip_full[y][x];
            }
            let a = a_entry(c0, c1, xi, star);
            let b = b_entry(c0, c1, xi, star);
            product_residual = product_residual
                .max((ip_full[Y00][x] + b * kernel.entry(x, Y00)).abs())
                .max((ip_full[Y01][x] + a * kernel.entry(x, Y01)).abs());
        }
    }
    let (cp, cip) = closed_form_tables(xi);
    let mut table_residual = 0.0f64;
    for t in 0..3 {
        for r in 0..3 {
            for c in 0..3 {
                table_residual = table_residual.max((p[t][r][c] - cp[t][r][c]).abs()).max((ip[t][r][c] - cip[t][r][c]).abs());
            }
        }
    }
    let mut full_residual = 0.0f64;
    let mut antisymmetry_residual = 0.0f64;
    for x in 0..16usize {
        let c0 = BlockClass::of((x & 3) as u8);
        let c1 = BlockClass::of((x >> 2 & 3) as u8);
        let a = a_entry(c0, c1, xi, star);
        let b = b_entry(c0, c1, xi, star);
        let mut ipr = [[0.0; 4]; 4];
        ipr[Y00][Y00] = -b;
        ipr[Y00][Y10] = b;
        ipr[Y01][Y01] = -a;
        ipr[Y01][Y11] = a;
        for y in 0..4 {
            let rhs: f64 = (0..4).map(|y1| kernel.entry(x, y1) * ipr[y1][y]).sum();
            full_residual = full_residual.max((ip_full[y][x] - rhs).abs());
        }
        antisymmetry_residual = antisymmetry_residual.max((ip_full[Y01][x] + ip_full[Y11][x]).abs());
    }
    Ok(TwoLevelTables { xi, p, ip, table_residual, product_residual, full_residual, antisymmetry_residual })
}

pub fn verify_two_level_tables(xi: f64) -> Result<VerificationReport> {
    let t = two_level_tables(xi, StarConvention::A)?;
    let worst = t.table_residual.max(t.product_residual).max(t.full_residual).max(t.antisymmetry_residual);
    let p = json!({
        "xi": xi,
        "table_residual": t.table_residual,
        "product_residual": t.product_residual,
        "full_residual": t.full_residual,
        "antisymmetry_residual": t.antisymmetry_residual,
    });
    Ok(VerificationReport::new("two_level_tables", 2, p, worst, 1e-12))
}

pub fn verify_one_level_spectrum(delta: f64, alpha1: f64) -> Result<VerificationReport> {
    let s = one_level_spectrum(delta, alpha1)?;
    let xi = crate::bounds::f(alpha1 / delta)?;
    let target = [0.0, 1.0 - xi, 1.0 - xi, 1.0];
    let vec_res = s.eigvec.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let lead_res = (s.numeric[0] - s.lambda_lead).abs();
    let sub_res = (s.numeric[1] - s.lambda_sub).abs() / s.lambda_sub.abs();
    let worst = lead_res.max(vec_res).max(s.eigen_residual).max(sub_res);
    let p = json!({
        "delta": delta,
        "alpha1": alpha1,
        "lambda_lead": s.lambda_lead,
        "lambda_sub": s.lambda_sub,
        "numeric": s.numeric,
        "eigvec": s.eigvec,
    });
    Ok(VerificationReport::new("one_level_spectrum", 1, p, worst, 1e-10))
}

/// Law of the contact process on `S_n` at time `t` from the state `x0`, by
/// dense matrix exponential (`n <= 2`).
pub fn exact_law(n: u32, delta: f64, alpha: &[f64], x0: usize, t: f64) -> Result<Vec<f64>> {
    if n > 2 {
        return Err(crate::Error::TooLarge { n: n as usize, cap: 2 });
    }
    let g = build_contact_generator(n, delta, alpha)?;
    let mut init = vec![0.0; g.dim()];
    *init.get_mut(x0).ok_or(crate::Error::IndexOutOfRange { index: x0, size: g.dim() })? = 1.0;
    Ok(evolve_law(&g, &init, t))
}

/// Law of the joint chain `(X_t, Ỹ_t)` started from `X_0 = x0`, `Ỹ_0 ~ P(x0, ·)`.
pub fn exact_joint_law(sys: &JointSystem, x0: usize, t: f64) -> Result<DMatrix<f64>> {
    if sys.n > 2 {
        return Err(crate::Error::TooLarge { n: sys.n as usize, cap: 2 });
    }
    let gj = sys.joint_generator()?;
    let ny = sys.ny();
    let mut init = vec![0.0; gj.dim()];
    for (y, p) in sys.kernel.row(x0) {
        init[sys.joint_index(x0, y)] = p;
    }
    let law = evolve_law(&gj, &init, t);
    Ok(DMatrix::from_row_slice(sys.g.dim(), ny, &law))
}

/// Compares the `X`-marginal of the joint chain with the plain contact process
/// and the conditional law of `Ỹ` given `X` with `P(X, ·)` at time `t`.
pub fn verify_joint_marginal(n: u32, delta: f64, alpha: &[f64], x0: usize, t: f64) -> Result<VerificationReport> {
    let sys = JointSystem::new(n, delta, alpha, None, StarConvention::A)?;
    let joint = exact_joint_law(&sys, x0, t)?;
    let plain = exact_law(n, delta, alpha, x0, t)?;
    let mut worst = 0.0f64;
    for x in 0..sys.g.dim() {
        let mx: f64 = joint.row(x).sum();
        worst = worst.max((mx - plain[x]).abs());
        for y in 0..sys.ny() {
            worst = worst.max((joint[(x, y)] - mx * sys.kernel.entry(x, y)).abs());
        }
    }
    let p = json!({ "delta": delta, "alpha": alpha, "x0": x0, "t": t, "states": space_size(n) });
    Ok(VerificationReport::new("joint_marginal", n, p, worst, 1e-10))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intertwine_examples() {
        assert!(verify_intertwine(1, 1.0, &[2.0]).unwrap().pass);
        assert!(verify_intertwine(2, 1.0, &[2.0, 1.0]).unwrap().pass);
        let r = verify_intertwine(3, 0.6, &[1.5, 0.4, 3.0]).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(verify_intertwine(4, 1.0, &[1.0; 4]).is_err());
    }

    #[test]
    fn wrong_xi_breaks_intertwining() {
        let opts = VerifyOptions { xi_override: Some(0.3), ..Default::default() };
        let r = verify_intertwine_with(2, 1.0, &[2.0, 1.0], &opts).unwrap();
        assert!(!r.pass);
        assert!(r.max_residual > 1e-3);
    }

    #[test]
    fn commute_examples() {
        let r = verify_commute(1, 1.0, &[2.0]).unwrap();
        assert!(r.pass, "{r:?}");
        let r = verify_commute(2, 0.7, &[1.0, 2.5]).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.params["constant_residual"], 0.0);
    }

    #[test]
    fn star_conventions_agree() {
        for n in 1..=3 {
            assert!(verify_star_independence(n, 0.9, &[1.2, 0.8, 2.0]).unwrap().pass);
        }
    }

    #[test]
    fn spectrum_examples() {
        let s = one_level_spectrum(1.0, 0.0).unwrap();
        assert!((s.lambda_lead + 1.0).abs() < 1e-15);
        assert!((s.lambda_sub + 2.0).abs() < 1e-15);
        assert_eq!(s.eigvec[0], 0.0);
        assert!(verify_one_level_spectrum(0.3, 4.0).unwrap().pass);
    }

    #[test]
    fn two_level_examples() {
        let xi = 0.23;
        let t = two_level_tables(xi, StarConvention::A).unwrap();
        assert_eq!(t.p[0][1][1], xi * xi);
        assert!((t.ip[0][1][1] + 0.5 * xi * xi).abs() < 1e-16);
        assert!((t.ip[0][0][1] + xi * (1.0 - xi)).abs() < 1e-16);
        assert!((t.ip[1][1][2] + xi).abs() < 1e-16);
        assert!(verify_two_level_tables(xi).unwrap().pass);
        assert!(verify_two_level_tables(0.5).unwrap().pass);
    }

    #[test]
    fn joint_marginal_matches() {
        let r = verify_joint_marginal(1, 1.0, &[2.0], 0b01, 1.0).unwrap();
        assert!(r.pass, "{r:?}");
        let r = verify_joint_marginal(2, 0.8, &[1.5, 1.0], 0b0110, 0.7).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
