//! Ensemble analysis: mutual-information sweeps over measured Clifford
//! circuits, stretched-exponential fits, finite-size data collapse,
//! infidelity sweeps of the learned postselection, the failure-probability
//! bound, and the ancilla amplification gadget.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{generate_and_record, CircuitSpec, GateFamily, DENSE_QUBIT_CAP};
use crate::dense::{self, StateVector};
use crate::dqite::{self, QiteConfig};
use crate::rng::{derive_seed, stream, Purpose};
use crate::{ring_distance, Error, Result, SubsystemSpec};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

// ---------------------------------------------------------------------------
// mutual-information sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    Median,
    Mean,
}

/// I(A,C)(r) over an ensemble of trajectories at fixed (n, L, p);
/// A = {qubit 0} and C(r) = all qubits at ring distance ≥ r.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MutualInfoCurve {
    pub n: usize,
    pub layers: usize,
    pub p: f64,
    pub stat: Stat,
    pub r_values: Vec<usize>,
    /// Aggregated I(A,C)(r) in bits, one per r.
    pub values: Vec<f64>,
    /// Standard error of the mean at each r (also reported for medians).
    pub stderr: Vec<f64>,
    pub n_traj: usize,
}

/// Complement of the open radius-r ring neighborhood of qubit 0: the
/// cluster C(r) = {j : d(0, j) ≥ r}, separated from A = {0} by the r−1
/// qubits on either side.
fn cluster_region(n: usize, r: usize) -> Result<SubsystemSpec> {
    if r < 1 || 2 * r > n {
        return Err(Error::InvalidRegion(format!(
            "r = {r} must be in [1, n/2 = {}] for a valid cluster",
            n / 2
        )));
    }
    SubsystemSpec::new(n, (0..n).filter(|&j| ring_distance(n, 0, j) >= r).collect())
}

fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

fn aggregate(mut samples: Vec<f64>, stat: Stat) -> (f64, f64) {
    let k = samples.len();
    let mean = kahan_sum(&samples) / k as f64;
    let var = if k > 1 {
        kahan_sum(&samples.iter().map(|v| (v - mean) * (v - mean)).collect::<Vec<_>>())
            / (k as f64 - 1.0)
    } else {
        0.0
    };
    let stderr = (var / k as f64).sqrt();
    let value = match stat {
        Stat::Mean => mean,
        Stat::Median => {
            samples.sort_by(|a, b| a.total_cmp(b));
            median_sorted(&samples)
        }
    };
    (value, stderr)
}

/// Runs `n_traj` independent Clifford trajectories per measurement rate and
/// aggregates I(A,C)(r) by the chosen statistic. Trajectories run in
/// parallel; per-trajectory seeds are derived from `master_seed` by a
/// counter-based split, so results are independent of thread scheduling.
pub fn sweep_mutual_info(
    n: usize,
    layers: usize,
    p_values: &[f64],
    r_values: &[usize],
    n_traj: usize,
    stat: Stat,
    master_seed: u64,
) -> Result<Vec<MutualInfoCurve>> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument("n_traj must be >= 1".into()));
    }
    let a = SubsystemSpec::new(n, vec![0])?;
    let clusters: Vec<SubsystemSpec> = r_values
        .iter()
        .map(|&r| cluster_region(n, r))
        .collect::<Result<_>>()?;
    let mut curves = Vec::with_capacity(p_values.len());
    for (pi, &p) in p_values.iter().enumerate() {
        let rows: Vec<Vec<f64>> = (0..n_traj)
            .into_par_iter()
            .map(|t| -> Result<Vec<f64>> {
                let seed = derive_seed(master_seed, pi as u64, t as u64, Purpose::Trajectory);
                let spec = CircuitSpec::new(n, layers, p, GateFamily::Clifford, seed);
                let (_, fs) = generate_and_record(&spec)?;
                let tab = fs.tableau().expect("clifford family");
                clusters
                    .iter()
                    .map(|cl| tab.mutual_info(&a, cl))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(r_values.len());
        let mut stderr = Vec::with_capacity(r_values.len());
        for ri in 0..r_values.len() {
            let samples: Vec<f64> = rows.iter().map(|row| row[ri]).collect();
            let (v, se) = aggregate(samples, stat);
            values.push(v);
            stderr.push(se);
        }
        curves.push(MutualInfoCurve {
            n,
            layers,
            p,
            stat,
            r_values: r_values.to_vec(),
            values,
            stderr,
            n_traj,
        });
    }
    Ok(curves)
}

// ---------------------------------------------------------------------------
// stretched-exponential fit
// ---------------------------------------------------------------------------

/// Least-squares parameters of f(x) = a·exp(−b·x^d) + e.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpFit {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub e: f64,
    /// Sum of squared residuals at the optimum.
    pub residual: f64,
    /// Set when the fit is insensitive to the decay parameters
    /// (e.g. constant data where a ≈ 0 or b ≈ 0).
    pub degenerate: bool,
}

const D_MIN: f64 = 0.05;
const D_MAX: f64 = 5.0;

#[cfg(test)]
fn exp_model(x: f64, a: f64, b: f64, d: f64, e: f64) -> f64 {
    if x <= 0.0 {
        return a + e;
    }
    a * (-b * x.powf(d)).exp() + e
}

/// Residuals and Jacobian rows (∂f/∂a, ∂f/∂b, ∂f/∂d, ∂f/∂e).
fn exp_residual_jacobian(
    xs: &[f64],
    ys: &[f64],
    theta: &[f64; 4],
    free: &[usize],
) -> (DVector<f64>, DMatrix<f64>, f64) {
    let [a, b, d, e] = *theta;
    let m = xs.len();
    let mut r = DVector::zeros(m);
    let mut j = DMatrix::zeros(m, free.len());
    let mut cost = 0.0;
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let (xp, lx) = if x > 0.0 { (x.powf(d), x.ln()) } else { (0.0, 0.0) };
        let decay = (-b * xp).exp();
        let f = a * decay + e;
        r[i] = f - y;
        cost += r[i] * r[i];
        let grads = [decay, -a * xp * decay, -a * b * xp * lx * decay, 1.0];
        for (col, &param) in free.iter().enumerate() {
            j[(i, col)] = grads[param];
        }
    }
    (r, j, cost)
}

fn clamp_theta(theta: &mut [f64; 4]) {
    theta[1] = theta[1].max(0.0);
    theta[2] = theta[2].clamp(D_MIN, D_MAX);
}

fn lm_minimize(xs: &[f64], ys: &[f64], start: [f64; 4], free: &[usize]) -> ([f64; 4], f64) {
    let mut theta = start;
    clamp_theta(&mut theta);
    let (_, _, mut cost) = exp_residual_jacobian(xs, ys, &theta, free);
    let mut mu = 1e-3;
    for _ in 0..400 {
        let (r, j, _) = exp_residual_jacobian(xs, ys, &theta, free);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut step_taken = false;
        for _ in 0..25 {
            let mut lhs = jtj.clone();
            for k in 0..free.len() {
                lhs[(k, k)] += mu * (jtj[(k, k)].abs() + 1e-12);
            }
            let Some(delta) = lhs.lu().solve(&(-&g)) else {
                mu *= 4.0;
                continue;
            };
            let mut trial = theta;
            for (col, &param) in free.iter().enumerate() {
                trial[param] += delta[col];
            }
            clamp_theta(&mut trial);
            let (_, _, trial_cost) = exp_residual_jacobian(xs, ys, &trial, free);
            if trial_cost < cost {
                let gain = cost - trial_cost;
                theta = trial;
                cost = trial_cost;
                mu = (mu / 3.0).max(1e-12);
                step_taken = true;
                if gain < 1e-16 * (1.0 + cost) {
                    return (theta, cost);
                }
                break;
            }
            mu *= 4.0;
            if mu > 1e12 {
                return (theta, cost);
            }
        }
        if !step_taken {
            break;
        }
    }
    (theta, cost)
}

/// Fits f(x) = a·exp(−b·x^d) + e by damped least squares with seeded random
/// restarts. `fix_offset` pins e = 0 (the area-law branch form).
/// Deterministic given data and seed.
pub fn fit_exponential(xs: &[f64], ys: &[f64], fix_offset: bool, seed: u64) -> Result<ExpFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch);
    }
    if xs.len() < 5 {
        return Err(Error::InvalidArgument("fit needs at least 5 points".into()));
    }
    if xs.iter().any(|&x| x < 0.0 || !x.is_finite()) || ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidArgument("fit inputs must be finite, x >= 0".into()));
    }
    let free: Vec<usize> = if fix_offset { vec![0, 1, 2] } else { vec![0, 1, 2, 3] };
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = (y_max - y_min).max(1e-12);

    // heuristic start: offset from the tail, amplitude from the head,
    // b from a log-linear slope at d = 1
    let e0 = if fix_offset { 0.0 } else { y_min };
    let a0 = (ys[0] - e0).abs().max(0.1 * spread);
    let mut b0 = 0.5;
    let pairs: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && (y - e0) / a0 > 1e-6)
        .map(|(&x, &y)| (x, ((y - e0) / a0).ln()))
        .collect();
    if pairs.len() >= 2 {
        let sx: f64 = pairs.iter().map(|p| p.0).sum();
        let sy: f64 = pairs.iter().map(|p| p.1).sum();
        let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
        let k = pairs.len() as f64;
        let denom = k * sxx - sx * sx;
        if denom.abs() > 1e-12 {
            b0 = (-(k * sxy - sx * sy) / denom).max(1e-3);
        }
    }
    let mut best: Option<([f64; 4], f64)> = None;
    let mut consider = |cand: ([f64; 4], f64)| {
        if best.as_ref().map_or(true, |b| cand.1 < b.1) {
            best = Some(cand);
        }
    };
    consider(lm_minimize(xs, ys, [a0, b0, 1.0, e0], &free));
    for restart in 0..10u64 {
        let mut rng = stream(seed, restart, 0, Purpose::FitRestart);
        let a = spread * (0.2 + 2.0 * rng.gen::<f64>());
        let b = 10f64.powf(-2.0 + 2.5 * rng.gen::<f64>());
        let d = D_MIN + (D_MAX - D_MIN) * rng.gen::<f64>().powi(2);
        let e = if fix_offset {
            0.0
        } else {
            y_min + spread * (rng.gen::<f64>() - 0.25)
        };
        consider(lm_minimize(xs, ys, [a, b, d, e], &free));
    }
    let (theta, residual) = best.expect("at least one start evaluated");
    let [a, b, d, e] = theta;
    let degenerate = a.abs() < 1e-6 * spread.max(1.0) || b < 1e-6;
    Ok(ExpFit {
        a,
        b,
        d,
        e,
        residual,
        degenerate,
    })
}

// ---------------------------------------------------------------------------
// finite-size data collapse
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Area,
    Volume,
}

/// One (n, p, value) sample for the collapse, taken at fixed r = n/16.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CollapsePoint {
    pub n: usize,
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollapseResult {
    pub nu: f64,
    pub p_c: f64,
    pub branch: Branch,
    /// Spline-fit residual of the master curve at the optimal ν.
    pub residual: f64,
    /// Set when the objective is flat over the search interval
    /// (e.g. data independent of n).
    pub degenerate: bool,
}

/// Value of the i-th cubic B-spline basis function on knot vector `t`.
fn bspline_basis(t: &[f64], degree: usize, i: usize, x: f64) -> f64 {
    if degree == 0 {
        // half-open spans, closed at the right end of the last span
        let last = t[i + 1] >= t[t.len() - 1];
        if (t[i] <= x && x < t[i + 1]) || (last && (x - t[i + 1]).abs() < 1e-300 && t[i] <= x)
        {
            return 1.0;
        }
        if last && x >= t[i] && x <= t[i + 1] {
            return 1.0;
        }
        return 0.0;
    }
    let mut value = 0.0;
    let denom_l = t[i + degree] - t[i];
    if denom_l > 0.0 {
        value += (x - t[i]) / denom_l * bspline_basis(t, degree - 1, i, x);
    }
    let denom_r = t[i + degree + 1] - t[i + 1];
    if denom_r > 0.0 {
        value += (t[i + degree + 1] - x) / denom_r * bspline_basis(t, degree - 1, i + 1, x);
    }
    value
}

const SPLINE_CTRL: usize = 8;
const SPLINE_DEGREE: usize = 3;

/// Least-squares residual of a clamped uniform cubic B-spline through
/// (x, y), the master-curve model of the collapse objective.
fn spline_residual(xy: &mut Vec<(f64, f64)>) -> f64 {
    xy.sort_by(|a, b| a.0.total_cmp(&b.0));
    let x_lo = xy[0].0;
    let x_hi = xy[xy.len() - 1].0;
    if x_hi - x_lo < 1e-12 {
        // all abscissae equal: best constant fit
        let mean = xy.iter().map(|p| p.1).sum::<f64>() / xy.len() as f64;
        return xy.iter().map(|p| (p.1 - mean) * (p.1 - mean)).sum();
    }
    let ctrl = SPLINE_CTRL.min(xy.len().saturating_sub(1)).max(SPLINE_DEGREE + 1);
    let spans = ctrl - SPLINE_DEGREE;
    let m = xy.len();
    // interior knots at data quantiles so resolution follows the points
    let mut knots = Vec::with_capacity(ctrl + SPLINE_DEGREE + 1);
    for _ in 0..=SPLINE_DEGREE {
        knots.push(x_lo);
    }
    for s in 1..spans {
        let pos = s as f64 / spans as f64 * (m - 1) as f64;
        let q = xy[pos.round() as usize].0;
        knots.push(q.clamp(x_lo, x_hi));
    }
    for _ in 0..=SPLINE_DEGREE {
        knots.push(x_hi);
    }
    let mut design = DMatrix::zeros(m, ctrl);
    let mut y = DVector::zeros(m);
    for (row, &(x, v)) in xy.iter().enumerate() {
        for col in 0..ctrl {
            design[(row, col)] = bspline_basis(&knots, SPLINE_DEGREE, col, x);
        }
        y[row] = v;
    }
    // tiny ridge keeps empty spans from making the normal equations singular
    let mut lhs = design.transpose() * &design;
    for k in 0..ctrl {
        lhs[(k, k)] += 1e-10;
    }
    let rhs = design.transpose() * &y;
    match lhs.cholesky() {
        Some(chol) => {
            let coef = chol.solve(&rhs);
            let fit = design * coef;
            (0..m).map(|i| (fit[i] - y[i]) * (fit[i] - y[i])).sum()
        }
        None => f64::INFINITY,
    }
}

fn collapse_objective(points: &[CollapsePoint], p_c: f64, nu: f64) -> f64 {
    let mut xy: Vec<(f64, f64)> = points
        .iter()
        .map(|pt| ((pt.p - p_c) * (pt.n as f64).powf(1.0 / nu), pt.value))
        .collect();
    spline_residual(&mut xy)
}

/// Finds the exponent ν collapsing curves of different n onto one master
/// curve: rescales the abscissa to x = (p − p_c)·n^{1/ν}, fits a cubic
/// B-spline, and minimizes the total squared residual by golden-section
/// search over [nu_lo, nu_hi].
pub fn data_collapse(
    points: &[CollapsePoint],
    p_c: f64,
    branch: Branch,
    nu_lo: f64,
    nu_hi: f64,
) -> Result<CollapseResult> {
    if !(nu_lo > 0.0 && nu_hi > nu_lo) {
        return Err(Error::DegenerateInterval);
    }
    let mut sizes: Vec<usize> = points.iter().map(|p| p.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(Error::InvalidArgument(
            "collapse needs at least 3 distinct system sizes".into(),
        ));
    }
    // the objective can be multimodal: bracket the global minimum on a
    // coarse grid, then refine by golden section
    const GRID: usize = 48;
    let grid_at = |i: usize| nu_lo + (nu_hi - nu_lo) * i as f64 / GRID as f64;
    let mut best_i = 0;
    let mut f_min = f64::INFINITY;
    let mut f_max = f64::NEG_INFINITY;
    for i in 0..=GRID {
        let f = collapse_objective(points, p_c, grid_at(i));
        if f < f_min {
            f_min = f;
            best_i = i;
        }
        f_max = f_max.max(f);
    }
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = grid_at(best_i.saturating_sub(1));
    let mut hi = grid_at((best_i + 1).min(GRID));
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = collapse_objective(points, p_c, x1);
    let mut f2 = collapse_objective(points, p_c, x2);
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = collapse_objective(points, p_c, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = collapse_objective(points, p_c, x2);
        }
        f_min = f_min.min(f1.min(f2));
        if hi - lo < 1e-6 {
            break;
        }
    }
    let nu = 0.5 * (lo + hi);
    let residual = collapse_objective(points, p_c, nu);
    let degenerate = f_max - f_min <= 1e-6 * (1.0 + f_min);
    Ok(CollapseResult {
        nu,
        p_c,
        branch,
        residual,
        degenerate,
    })
}

// ---------------------------------------------------------------------------
// infidelity sweeps
// ---------------------------------------------------------------------------

/// One row of the infidelity table: one trajectory, one domain radius, one
/// imaginary time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfidelityRow {
    pub n: usize,
    pub layers: usize,
    pub p: f64,
    pub r: usize,
    pub beta: f64,
    pub trajectory: usize,
    /// 1 − F between the learned-unitary state and the projected target.
    pub infidelity: f64,
    /// 1 − F for the exact nonunitary evolution at the same β.
    pub exact_reference: f64,
    /// Born probability of the postselected outcome.
    pub born_p: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub n: usize,
    pub layers: usize,
    pub p_values: Vec<f64>,
    pub r_values: Vec<usize>,
    pub betas: Vec<f64>,
    pub dtau: f64,
    pub lambda: f64,
    pub tomography: dqite::Tomography,
    pub n_traj: usize,
    pub master_seed: u64,
}

/// Evolves measured Haar circuits, then replaces a measurement of qubit 0
/// by learned imaginary-time steps for every (r, β) on the grid, recording
/// infidelity against the projected target alongside the exact nonunitary
/// reference.
pub fn infidelity_sweep(settings: &SweepSettings) -> Result<Vec<InfidelityRow>> {
    if settings.n > DENSE_QUBIT_CAP {
        return Err(Error::RegionTooLarge(settings.n, DENSE_QUBIT_CAP));
    }
    if settings.n_traj == 0 || settings.betas.is_empty() || settings.r_values.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    let beta_max = settings
        .betas
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        .max(settings.dtau);
    let mut rows = Vec::new();
    for (pi, &p) in settings.p_values.iter().enumerate() {
        let mut batch: Vec<Vec<InfidelityRow>> = (0..settings.n_traj)
            .into_par_iter()
            .map(|t| -> Result<Vec<InfidelityRow>> {
                let seed =
                    derive_seed(settings.master_seed, pi as u64, t as u64, Purpose::Trajectory);
                let spec =
                    CircuitSpec::new(settings.n, settings.layers, p, GateFamily::Haar, seed);
                let (_, fs) = generate_and_record(&spec)?;
                let psi = fs.dense().expect("haar family");
                // sample the postselection target on qubit 0
                let p0 = psi.born_probability(0, false)?;
                let mut orng =
                    stream(settings.master_seed, pi as u64, t as u64, Purpose::TargetOutcome);
                let mut m = orng.gen::<f64>() >= p0;
                if psi.born_probability(0, m)? <= dqite::BORN_FLOOR {
                    m = !m;
                }
                let born = psi.born_probability(0, m)?;
                let mut target = psi.clone();
                target.project_z(0, m)?;
                let h = dqite::outcome_hamiltonian(0, m);
                let exact_ref: Vec<f64> = settings
                    .betas
                    .iter()
                    .map(|&beta| -> Result<f64> {
                        let evolved = psi.imaginary_evolve(&h, beta)?;
                        Ok(1.0 - dense::fidelity(&evolved, &target)?)
                    })
                    .collect::<Result<_>>()?;
                let mut out = Vec::new();
                for &r in &settings.r_values {
                    let config = QiteConfig {
                        beta: beta_max,
                        dtau: settings.dtau,
                        r,
                        lambda: settings.lambda,
                        tomography: settings.tomography,
                    };
                    let mut qrng = stream(
                        settings.master_seed,
                        pi as u64,
                        t as u64,
                        Purpose::Tomography,
                    );
                    let post = dqite::deterministic_postselect(psi, 0, m, &config, &mut qrng)?;
                    for (bi, &beta) in settings.betas.iter().enumerate() {
                        let steps = ((beta / settings.dtau).round() as usize)
                            .min(post.diagnostics.len());
                        let fid = if steps == 0 {
                            born // |⟨ψ|ψ_∞⟩|² = P for a Z-projection target
                        } else {
                            post.diagnostics[steps - 1].fidelity_to_target
                        };
                        out.push(InfidelityRow {
                            n: settings.n,
                            layers: settings.layers,
                            p,
                            r,
                            beta,
                            trajectory: t,
                            infidelity: 1.0 - fid,
                            exact_reference: exact_ref[bi],
                            born_p: born,
                        });
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        // canonical order: trajectory-major within each p
        for b in batch.drain(..) {
            rows.extend(b);
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// failure-probability bound
// ---------------------------------------------------------------------------

/// One monomial coeff·n^{n_deg}·M^{m_deg} of the threshold polynomial.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coeff: f64,
    pub n_deg: u32,
    pub m_deg: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureBound {
    pub m_count: usize,
    pub n: usize,
    pub poly_value: f64,
    /// Threshold probability δ = 1/(M·poly(n, M)).
    pub delta: f64,
    /// 1 − (1−δ)^M.
    pub bound: f64,
    /// First-order approximation 1/poly(n, M).
    pub first_order: f64,
    /// Set when δ ≥ 1 (the bound saturates).
    pub degenerate: bool,
}

/// Probability that any of M postselections falls below the threshold
/// δ = 1/(M·poly(n, M)).
pub fn failure_probability_bound(
    m_count: usize,
    n: usize,
    terms: &[PolyTerm],
) -> Result<FailureBound> {
    if m_count < 1 {
        return Err(Error::InvalidArgument("M must be >= 1".into()));
    }
    let poly_value: f64 = terms
        .iter()
        .map(|t| t.coeff * (n as f64).powi(t.n_deg as i32) * (m_count as f64).powi(t.m_deg as i32))
        .sum();
    if !(poly_value > 0.0) {
        return Err(Error::InvalidArgument("poly(n, M) must be positive".into()));
    }
    let delta = (1.0 / (m_count as f64 * poly_value)).min(1.0);
    let bound = 1.0 - (1.0 - delta).powi(m_count as i32);
    Ok(FailureBound {
        m_count,
        n,
        poly_value,
        delta,
        bound,
        first_order: 1.0 / poly_value,
        degenerate: delta >= 1.0,
    })
}

// ---------------------------------------------------------------------------
// amplification gadget
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum GadgetMode {
    ExactProjection,
    Dqite(QiteConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GadgetResult {
    pub k_amp: u32,
    pub m: usize,
    /// Born probability actually observed at each ancilla postselection.
    pub step_probabilities: Vec<f64>,
    /// Closed-form prediction (α² + β'²/2^{k+1})/(α² + β'²/2^{k}).
    pub predicted_probabilities: Vec<f64>,
    /// Overlap of the final state with the amplified small branch.
    pub final_fidelity: f64,
}

/// Controlled-Hadamard, control on the first factor.
fn controlled_hadamard() -> Matrix4<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = Matrix4::identity();
    u[(2, 2)] = c(s);
    u[(2, 3)] = c(s);
    u[(3, 2)] = c(s);
    u[(3, 3)] = c(-s);
    u
}

/// Amplifies the exponentially small branch of
/// α|0⟩|0⟩ + β'|1⟩|1⟩ (branch weight ratio α²/β'² = 2^{−k_amp}) by
/// applying a controlled Hadamard to each of m fresh ancillas and
/// postselecting it to |0⟩, which halves the large branch's weight per step
/// at Born probability > 1/2. After all m steps the small-branch overlap is
/// 1/(1 + 2^{k_amp−m}).
pub fn amplification_gadget(
    k_amp: u32,
    m: usize,
    mode: &GadgetMode,
    seed: u64,
) -> Result<GadgetResult> {
    if k_amp < 1 {
        return Err(Error::InvalidArgument("k_amp must be >= 1".into()));
    }
    let n = 2 + m;
    if n > DENSE_QUBIT_CAP {
        return Err(Error::RegionTooLarge(n, DENSE_QUBIT_CAP));
    }
    let weight_ratio = 2f64.powi(-(k_amp as i32));
    let beta_amp = (1.0 / (1.0 + weight_ratio)).sqrt();
    let alpha = weight_ratio.sqrt() * beta_amp;
    let mut amps = vec![Complex64::default(); 1 << n];
    amps[0b00] = c(alpha); // branch qubit 0, payload qubit 1
    amps[0b11] = c(beta_amp);
    let mut state = StateVector::from_amplitudes(n, amps)?;
    let ch = controlled_hadamard();
    let mut step_probabilities = Vec::with_capacity(m);
    let mut predicted_probabilities = Vec::with_capacity(m);
    for k in 0..m {
        let ancilla = 2 + k;
        state.apply_2q_unitary(&ch, 0, ancilla)?;
        let prob = match mode {
            GadgetMode::ExactProjection => state.project_z(ancilla, false)?,
            GadgetMode::Dqite(config) => {
                let mut rng = stream(seed, k as u64, 0, Purpose::Tomography);
                let out =
                    dqite::deterministic_postselect(&state, ancilla, false, config, &mut rng)?;
                state = out.state;
                out.born_p
            }
        };
        step_probabilities.push(prob);
        let w = beta_amp * beta_amp;
        predicted_probabilities.push(
            (alpha * alpha + w / 2f64.powi(k as i32 + 1))
                / (alpha * alpha + w / 2f64.powi(k as i32)),
        );
    }
    let small_branch = StateVector::basis_state(n, 0);
    let final_fidelity = dense::fidelity(&state, &small_branch)?;
    Ok(GadgetResult {
        k_amp,
        m,
        step_probabilities,
        predicted_probabilities,
        final_fidelity,
    })
}

// ---------------------------------------------------------------------------
// bounds report
// ---------------------------------------------------------------------------

/// Everything the budget formulas say about postselecting M outcomes of
/// Born probability P within total error ε.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub p: f64,
    pub m_count: usize,
    pub epsilon: f64,
    pub delta_gap: f64,
    pub dtau: f64,
    /// Per-measurement budget ε/(2M).
    pub epsilon_beta: f64,
    /// Required imaginary time (natural-log convention).
    pub beta: f64,
    /// Trotter steps ⌈β/dtau⌉.
    pub n_beta: usize,
    /// Per-measurement runtime n_β²/ε_β.
    pub t_beta: f64,
    /// Total-runtime scaling M²·ε⁻¹·Δ⁻²·ln²(c^{1/2}·M/ε).
    pub total_runtime: f64,
    /// Fidelity lower bound 1 − c·e^{−2βΔ} at the required β.
    pub fidelity_bound: f64,
}

pub fn eval_bounds_report(
    p: f64,
    m_count: usize,
    epsilon: f64,
    delta_gap: f64,
    dtau: f64,
) -> Result<BoundsReport> {
    if !(dtau > 0.0) {
        return Err(Error::InvalidArgument("dtau must be positive".into()));
    }
    let epsilon_beta = dqite::error_budget(epsilon, m_count)?;
    let beta = dqite::required_beta(p, m_count, epsilon, delta_gap)?;
    let n_beta = if beta > 0.0 {
        dqite::trotter_steps(beta, dtau)?
    } else {
        0
    };
    let t_beta = (n_beta as f64).powi(2) / epsilon_beta;
    let weight = (1.0 - p) / p;
    let total_runtime = dqite::runtime_estimate(m_count, epsilon, delta_gap, weight)?;
    let fidelity_bound = dense::fidelity_bound(p, beta, delta_gap)?;
    Ok(BoundsReport {
        p,
        m_count,
        epsilon,
        delta_gap,
        dtau,
        epsilon_beta,
        beta,
        n_beta,
        t_beta,
        total_runtime,
        fidelity_bound,
    })
}
