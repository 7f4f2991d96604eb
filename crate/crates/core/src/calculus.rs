//! Integral and differential operators on processes on `B`.
//!
//! Integrands are evaluated at the left endpoint of each step: the integral of
//! `H` against `X` is `H[0] X[0] + Σ_{j<=k} H[j-1] (X[j] - X[j-1])`. On a grid every
//! path has finite variation, so the Lebesgue–Stieltjes, martingale and
//! semimartingale integrals share this kernel; they differ in the identities
//! their callers rely on, not in arithmetic. All sums run sequentially in index
//! order, so results are reproducible bit for bit.
//!
//! Because the kernel reads `H[j-1]`, an integrand written `G(X_-)` is passed
//! as `G(X)`: the left-endpoint evaluation is what supplies the left limit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{PathEnsemble, SamplePath};
use crate::psit::{
    canonical_fs, glue, stop, union_marks, validate_cs, CoupledSequence, ProcessOnB, Psit, StoppingTime,
};

fn build(psit: &Psit, f: impl Fn(usize) -> (Vec<f64>, Vec<usize>) + Sync + Send) -> ProcessOnB {
    let per_path = (0..psit.n_paths()).into_par_iter().map(f).collect();
    ProcessOnB::from_section_values(psit, per_path)
}

fn left_point_sum(h: &[f64], a: &[f64], last: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(last + 1);
    let mut acc = h[0] * a[0];
    out.push(acc);
    for j in 1..=last {
        acc += h[j - 1] * (a[j] - a[j - 1]);
        out.push(acc);
    }
    out
}

/// Left limits `X_-`, with `X_{0-} = X_0`. Carries no jump marks.
pub fn left_limits(x: &ProcessOnB) -> ProcessOnB {
    build(x.psit(), |p| {
        let s = x.section(p);
        let mut v = Vec::with_capacity(s.len());
        v.push(s[0]);
        v.extend_from_slice(&s[..s.len() - 1]);
        (v, Vec::new())
    })
}

/// Jump process `ΔX`: the increment at annotated indices of `B`, zero elsewhere.
pub fn jumps(x: &ProcessOnB) -> ProcessOnB {
    build(x.psit(), |p| {
        let s = x.section(p);
        let mut v = vec![0.0; s.len()];
        for &k in x.section_marks(p) {
            v[k] = s[k] - s[k - 1];
        }
        (v, Vec::new())
    })
}

/// Summation process `(ΣX)_t = Σ_{s<=t, s∈B} X_s`. Every nonzero term after
/// time 0 is a jump of the result.
pub fn summation(x: &ProcessOnB) -> ProcessOnB {
    build(x.psit(), |p| {
        let s = x.section(p);
        let mut acc = 0.0;
        let mut marks = Vec::new();
        let v = s
            .iter()
            .enumerate()
            .map(|(k, &term)| {
                acc += term;
                if k > 0 && term != 0.0 {
                    marks.push(k);
                }
                acc
            })
            .collect();
        (v, marks)
    })
}

/// An integral on `B`, optionally with the coupled sequence of per-segment
/// classic integrals it was glued from.
#[derive(Clone, Debug)]
pub struct IntegralResult {
    pub process: ProcessOnB,
    pub segments: Option<CoupledSequence>,
}

impl IntegralResult {
    /// Glue the segment breakdown back into a process on `B`.
    pub fn reassemble(&self) -> Option<Result<ProcessOnB>> {
        self.segments.as_ref().map(|cs| glue(cs, self.process.psit()))
    }
}

fn integrate(h: &ProcessOnB, x: &ProcessOnB) -> Result<ProcessOnB> {
    h.require_same_set(x)?;
    Ok(build(x.psit(), |p| {
        let last = x.last_index(p);
        (left_point_sum(h.section(p), x.section(p), last), x.section_marks(p).to_vec())
    }))
}

/// Lebesgue–Stieltjes integral `H • A` on `B`.
pub fn ls_integral(h: &ProcessOnB, a: &ProcessOnB) -> Result<IntegralResult> {
    Ok(IntegralResult { process: integrate(h, a)?, segments: None })
}

/// `H • M` for a martingale integrator on `B`.
pub fn martingale_integral(h: &ProcessOnB, m: &ProcessOnB) -> Result<IntegralResult> {
    Ok(IntegralResult { process: integrate(h, m)?, segments: None })
}

/// Stochastic integral `H • X` for a semimartingale on `B`.
pub fn stoch_integral(h: &ProcessOnB, x: &ProcessOnB) -> Result<IntegralResult> {
    Ok(IntegralResult { process: integrate(h, x)?, segments: None })
}

/// Classic full-grid integral of two ensembles.
pub fn classic_integral(h: &PathEnsemble, a: &PathEnsemble) -> Result<PathEnsemble> {
    if h.n_paths() != a.n_paths() || h.grid() != a.grid() {
        return Err(Error::invalid("integrand and integrator have different shapes"));
    }
    let grid = a.grid();
    let paths = (0..a.n_paths())
        .into_par_iter()
        .map(|p| {
            let (hp, ap) = (h.path(p), a.path(p));
            let v = left_point_sum(hp.values(), ap.values(), grid.steps());
            SamplePath::from_parts(grid, v, ap.jump_marks().to_vec())
        })
        .collect();
    Ok(PathEnsemble::from_parts(grid, paths))
}

/// [`stoch_integral`] together with the pieces `H^{τ_n} · X^{τ_n}` over the
/// canonical fundamental sequence of `B`.
pub fn stoch_integral_segmented(h: &ProcessOnB, x: &ProcessOnB) -> Result<IntegralResult> {
    let process = integrate(h, x)?;
    let fs = canonical_fs(x.psit());
    let entries = fs
        .terms()
        .iter()
        .map(|t| Ok((t.clone(), classic_integral(&stop(h, t)?, &stop(x, t)?)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(IntegralResult { process, segments: Some(CoupledSequence::new(entries)?) })
}

/// `H • A` computed from coupled sequences: the classic integrals
/// `H^(n) · A^(n)` glued along `S_n ∧ S̃_n`.
pub fn ls_integral_glued(h_cs: &CoupledSequence, a_cs: &CoupledSequence, psit: &Psit) -> Result<IntegralResult> {
    for cs in [h_cs, a_cs] {
        if let Some(v) = validate_cs(cs, psit).violations.into_iter().next() {
            return Err(Error::CoupledSequence(v));
        }
    }
    let n = h_cs.len().max(a_cs.len());
    let entries = (0..n)
        .map(|i| {
            let (hi, ai) = (i.min(h_cs.len() - 1), i.min(a_cs.len() - 1));
            let t = h_cs.times(hi).meet(a_cs.times(ai))?;
            Ok((t, classic_integral(h_cs.process(hi), a_cs.process(ai))?))
        })
        .collect::<Result<Vec<_>>>()?;
    let cs = CoupledSequence::new(entries)?;
    let process = glue(&cs, psit)?;
    Ok(IntegralResult { process, segments: Some(cs) })
}

/// Integral of an integrand given in predictable indexing: `H[j]` is the
/// value held over `(t_{j-1}, t_j]`, so the result is
/// `H[0] X[0] + Σ_{j<=k} H[j] (X[j] - X[j-1])`.
pub fn predictable_integral(h: &ProcessOnB, x: &ProcessOnB) -> Result<ProcessOnB> {
    h.require_same_set(x)?;
    Ok(build(x.psit(), |p| {
        let (hs, xs) = (h.section(p), x.section(p));
        let mut out = Vec::with_capacity(xs.len());
        let mut acc = hs[0] * xs[0];
        out.push(acc);
        for j in 1..xs.len() {
            acc += hs[j] * (xs[j] - xs[j - 1]);
            out.push(acc);
        }
        (out, x.section_marks(p).to_vec())
    }))
}

/// Left-endpoint integrand for `H I_{⟦0,τ⟧}`: keeps `H[k]` for `k < τ`, so the
/// increments over `(t_{j-1}, t_j]` with `j <= τ` are the ones integrated.
/// Requires `τ >= 1`.
pub fn integrand_until(h: &ProcessOnB, tau: &StoppingTime) -> Result<ProcessOnB> {
    if tau.n_paths() != h.n_paths() {
        return Err(Error::invalid("stopping time covers a different number of paths"));
    }
    if let Some(p) = (0..h.n_paths()).find(|&p| tau.index(p) == 0) {
        return Err(Error::invalid(format!("integrand truncation at time 0 on path {p}")));
    }
    Ok(build(h.psit(), |p| {
        let t = tau.index(p);
        let v = h.section(p).iter().enumerate().map(|(k, &v)| if k < t { v } else { 0.0 }).collect();
        (v, Vec::new())
    }))
}

/// `[X, Y] = X_0 Y_0 + ⟨X^c, Y^c⟩ + Σ ΔX ΔY` split by jump annotation.
#[derive(Clone, Debug)]
pub struct QuadraticDecomposition {
    pub total: ProcessOnB,
    pub continuous: ProcessOnB,
    pub jump: ProcessOnB,
    pub initial: ProcessOnB,
}

/// Quadratic covariation on `B`. Increments at indices annotated in both
/// processes form the jump part; all other increment products are continuous.
pub fn quad_covar(x: &ProcessOnB, y: &ProcessOnB) -> Result<QuadraticDecomposition> {
    x.require_same_set(y)?;
    let parts: Vec<_> = (0..x.n_paths())
        .into_par_iter()
        .map(|p| {
            let (xs, ys) = (x.section(p), y.section(p));
            let (xp, yp) = (x.ensemble().path(p), y.ensemble().path(p));
            let init = xs[0] * ys[0];
            let n = xs.len();
            let (mut total, mut cont, mut jump) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
            let (mut t, mut c, mut jmp) = (init, 0.0, 0.0);
            total.push(t);
            cont.push(c);
            jump.push(jmp);
            let mut marks = Vec::new();
            for j in 1..n {
                let prod = (xs[j] - xs[j - 1]) * (ys[j] - ys[j - 1]);
                t += prod;
                if xp.is_jump(j) && yp.is_jump(j) {
                    jmp += prod;
                    marks.push(j);
                } else {
                    c += prod;
                }
                total.push(t);
                cont.push(c);
                jump.push(jmp);
            }
            (init, total, cont, jump, marks)
        })
        .collect();
    let psit = x.psit();
    let mut total = Vec::with_capacity(parts.len());
    let mut continuous = Vec::with_capacity(parts.len());
    let mut jump = Vec::with_capacity(parts.len());
    let mut initial = Vec::with_capacity(parts.len());
    for (init, t, c, j, marks) in parts {
        initial.push((vec![init], Vec::new()));
        total.push((t, marks.clone()));
        continuous.push((c, Vec::new()));
        jump.push((j, marks));
    }
    Ok(QuadraticDecomposition {
        total: ProcessOnB::from_section_values(psit, total),
        continuous: ProcessOnB::from_section_values(psit, continuous),
        jump: ProcessOnB::from_section_values(psit, jump),
        initial: ProcessOnB::from_section_values(psit, initial),
    })
}

/// A scalar `C²` function with its first two derivatives.
pub trait C2Function: Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

/// [`C2Function`] assembled from three closures.
pub struct FnC2<F, D1, D2> {
    pub f: F,
    pub d1: D1,
    pub d2: D2,
}

impl<F, D1, D2> C2Function for FnC2<F, D1, D2>
where
    F: Fn(f64) -> f64 + Sync,
    D1: Fn(f64) -> f64 + Sync,
    D2: Fn(f64) -> f64 + Sync,
{
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn d1(&self, x: f64) -> f64 {
        (self.d1)(x)
    }
    fn d2(&self, x: f64) -> f64 {
        (self.d2)(x)
    }
}

/// `C²` map on `ℝ^d`. `hessian` fills a row-major `d × d` buffer.
pub trait C2Map: Sync {
    fn dim(&self) -> usize;
    fn value(&self, z: &[f64]) -> f64;
    fn gradient(&self, z: &[f64], out: &mut [f64]);
    fn hessian(&self, z: &[f64], out: &mut [f64]);
}

fn combine(psit: &Psit, terms: &[(f64, &ProcessOnB)]) -> ProcessOnB {
    build(psit, |p| {
        let n = psit.last_index(p) + 1;
        let v = (0..n)
            .map(|k| terms.iter().fold(0.0, |acc, (c, t)| acc + c * t.value(p, k)))
            .collect();
        (v, Vec::new())
    })
}

/// Itô residual for `d = 1`:
/// `f(X) - f(X_0) - f'(X_-)•(X - X_0) - Σ(f(X) - f(X_-) - f'(X_-)ΔX) - ½ f''(X_-)•⟨X^c⟩`,
/// with the jump sum over annotated indices.
pub fn ito_residual(f: &dyn C2Function, x: &ProcessOnB) -> Result<ProcessOnB> {
    let psit = x.psit();
    let lhs = build(psit, |p| {
        let s = x.section(p);
        let f0 = f.value(s[0]);
        (s.iter().map(|&v| f.value(v) - f0).collect(), Vec::new())
    });
    let first = stoch_integral(&x.map(|v| f.d1(v)), &x.centered())?.process;
    let eta = summation(&build(psit, |p| {
        let s = x.section(p);
        let mut v = vec![0.0; s.len()];
        for &k in x.section_marks(p) {
            let (pre, post) = (s[k - 1], s[k]);
            v[k] = f.value(post) - f.value(pre) - f.d1(pre) * (post - pre);
        }
        (v, Vec::new())
    }));
    let qv = quad_covar(x, x)?;
    let second = ls_integral(&x.map(|v| f.d2(v)), &qv.continuous)?.process;
    Ok(combine(psit, &[(1.0, &lhs), (-1.0, &first), (-1.0, &eta), (-0.5, &second)]))
}

/// Itô residual for a `d`-dimensional semimartingale on `B`.
///
/// The components are read as one vector process: an index annotated in any
/// component is a jump time of the vector, and the whole increment of every
/// component there is its jump.
pub fn ito_residual_multi(f: &dyn C2Map, z: &[ProcessOnB]) -> Result<ProcessOnB> {
    let d = f.dim();
    if z.len() != d || d == 0 {
        return Err(Error::invalid(format!("map has dimension {d}, got {} components", z.len())));
    }
    for c in &z[1..] {
        z[0].require_same_set(c)?;
    }
    let psit = z[0].psit();
    let n_paths = psit.n_paths();
    let marks: Vec<Vec<usize>> = (0..n_paths)
        .map(|p| z.iter().fold(Vec::new(), |acc, c| union_marks(&acc, c.section_marks(p))))
        .collect();
    let comps = z
        .iter()
        .map(|c| c.with_marks(marks.clone()))
        .collect::<Result<Vec<_>>>()?;
    let point = |p: usize, k: usize| -> Vec<f64> { comps.iter().map(|c| c.value(p, k)).collect() };

    let lhs = build(psit, |p| {
        let f0 = f.value(&point(p, 0));
        ((0..=psit.last_index(p)).map(|k| f.value(&point(p, k)) - f0).collect(), Vec::new())
    });
    let mut terms: Vec<(f64, ProcessOnB)> = vec![(1.0, lhs)];
    for (i, c) in comps.iter().enumerate() {
        let g = build(psit, |p| {
            let mut grad = vec![0.0; d];
            let v = (0..=psit.last_index(p))
                .map(|k| {
                    f.gradient(&point(p, k), &mut grad);
                    grad[i]
                })
                .collect();
            (v, Vec::new())
        });
        terms.push((-1.0, stoch_integral(&g, &c.centered())?.process));
    }
    let eta = summation(&build(psit, |p| {
        let mut v = vec![0.0; psit.last_index(p) + 1];
        let mut grad = vec![0.0; d];
        for &k in &marks[p] {
            let (pre, post) = (point(p, k - 1), point(p, k));
            f.gradient(&pre, &mut grad);
            let lin: f64 = (0..d).map(|i| grad[i] * (post[i] - pre[i])).sum();
            v[k] = f.value(&post) - f.value(&pre) - lin;
        }
        (v, Vec::new())
    }));
    terms.push((-1.0, eta));
    for i in 0..d {
        for j in 0..d {
            let h = build(psit, |p| {
                let mut hess = vec![0.0; d * d];
                let v = (0..=psit.last_index(p))
                    .map(|k| {
                        f.hessian(&point(p, k), &mut hess);
                        hess[i * d + j]
                    })
                    .collect();
                (v, Vec::new())
            });
            let qv = quad_covar(&comps[i], &comps[j])?;
            terms.push((-0.5, ls_integral(&h, &qv.continuous)?.process));
        }
    }
    let refs: Vec<(f64, &ProcessOnB)> = terms.iter().map(|(c, t)| (*c, t)).collect();
    Ok(combine(psit, &refs))
}

/// Integration-by-parts residual `XY - X_-•Y - Y_-•X - [X,Y] + 2 X_0 Y_0`.
pub fn ibp_residual(x: &ProcessOnB, y: &ProcessOnB) -> Result<ProcessOnB> {
    ibp_residual_signed(x, y, 1.0)
}

/// [`ibp_residual`] with the sign of the bracket term as a parameter; the
/// verification suite uses `-1` for fault injection.
#[doc(hidden)]
pub fn ibp_residual_signed(x: &ProcessOnB, y: &ProcessOnB, bracket_sign: f64) -> Result<ProcessOnB> {
    x.require_same_set(y)?;
    let xy = x.mul(y)?;
    let a = stoch_integral(x, y)?.process;
    let b = stoch_integral(y, x)?.process;
    let qv = quad_covar(x, y)?.total;
    let psit = x.psit();
    Ok(build(psit, |p| {
        let x0y0 = x.value(p, 0) * y.value(p, 0);
        let v = (0..=psit.last_index(p))
            .map(|k| xy.value(p, k) - a.value(p, k) - b.value(p, k) - bracket_sign * qv.value(p, k) + 2.0 * x0y0)
            .collect();
        (v, Vec::new())
    }))
}

fn check_exp_input(z: &ProcessOnB, s0: f64, need_continuous: bool) -> Result<()> {
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(Error::invalid(format!("initial value must be positive, got {s0}")));
    }
    for p in 0..z.n_paths() {
        if need_continuous && !z.section_marks(p).is_empty() {
            return Err(Error::invalid(format!("driver has jumps on path {p}")));
        }
        if z.value(p, 0) != 0.0 {
            return Err(Error::invalid(format!("driver does not start at 0 on path {p}")));
        }
    }
    Ok(())
}

/// Stochastic exponential `s0 exp(Z - ½⟨Z^c⟩)` of a continuous driver with `Z_0 = 0`.
pub fn stoch_exp(z: &ProcessOnB, s0: f64) -> Result<ProcessOnB> {
    check_exp_input(z, s0, true)?;
    let qv = quad_covar(z, z)?.continuous;
    Ok(build(z.psit(), |p| {
        let v = z.section(p).iter().zip(qv.section(p)).map(|(&zk, &q)| s0 * (zk - 0.5 * q).exp()).collect();
        (v, Vec::new())
    }))
}

/// Euler recursion `S[k] = S[k-1] (1 + ΔZ[k])`, `S[0] = s0`, which solves
/// `S = s0 + S_- • Z` on the grid.
pub fn euler_exp(z: &ProcessOnB, s0: f64) -> Result<ProcessOnB> {
    check_exp_input(z, s0, false)?;
    Ok(build(z.psit(), |p| {
        let zs = z.section(p);
        let mut v = Vec::with_capacity(zs.len());
        let mut s = s0;
        v.push(s);
        for j in 1..zs.len() {
            s *= 1.0 + (zs[j] - zs[j - 1]);
            v.push(s);
        }
        (v, z.section_marks(p).to_vec())
    }))
}
