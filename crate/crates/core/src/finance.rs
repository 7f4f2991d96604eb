//! A one-asset market on a default-bounded horizon.
//!
//! The horizon is `B = ⟦0,T⟧ ∩ ⟦0,τ⟦` for a default time `τ`. Before each
//! switching time `T_n = τ_n ∧ T` the asset follows regime `n`; afterwards the
//! driver continues with the increments of regime `n + 1`. Prices solve
//! `S = s0 + S_- • Z` on the grid, wealth is `x0 + ϑ • S` with the savings
//! account at constant price 1, and strategies are scored by expected log
//! utility at each path's last usable index.

use rand::Rng;
use rand_distr::Exp;
use rayon::prelude::*;

use crate::calculus::{euler_exp, predictable_integral};
use crate::error::{Error, Result};
use crate::grid::{cholesky_psd, gen_correlated_range, PathEnsemble, RngSpec, SamplePath, TimeGrid};
use crate::psit::{glue, psit_default_horizon, CoupledSequence, ProcessOnB, Psit, StoppingTime, INF};
use crate::stats::{mean_estimate, pairwise_sum};

const DOMAIN_DEFAULT: u64 = 0x6465_6661_756c_7400;
const CHUNK_PATHS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regime {
    pub drift: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DefaultTime {
    None,
    Fixed(f64),
    Exponential { rate: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarketSpec {
    pub grid: TimeGrid,
    pub s0: f64,
    pub terminal: f64,
    pub regimes: Vec<Regime>,
    pub default: DefaultTime,
    /// Correlation of the regime drivers, `regimes.len()` square.
    pub rho: Vec<Vec<f64>>,
}

impl MarketSpec {
    /// Regimes with independent drivers.
    pub fn new(grid: TimeGrid, s0: f64, terminal: f64, regimes: Vec<Regime>, default: DefaultTime) -> Result<Self> {
        let n = regimes.len();
        let rho = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        MarketSpec::with_rho(grid, s0, terminal, regimes, default, rho)
    }

    pub fn with_rho(
        grid: TimeGrid,
        s0: f64,
        terminal: f64,
        regimes: Vec<Regime>,
        default: DefaultTime,
        rho: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let spec = MarketSpec { grid, s0, terminal, regimes, default, rho };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(Error::invalid(format!("s0 must be positive, got {}", self.s0)));
        }
        if self.regimes.is_empty() {
            return Err(Error::invalid("at least one regime is required"));
        }
        for (i, r) in self.regimes.iter().enumerate() {
            if !r.drift.is_finite() {
                return Err(Error::invalid(format!("regime {i}: drift must be finite")));
            }
            if !(r.sigma.is_finite() && r.sigma > 0.0) {
                return Err(Error::invalid(format!("regime {i}: sigma must be positive, got {}", r.sigma)));
            }
        }
        if !matches!(self.grid.node_index(self.terminal), Some(k) if k > 0) {
            return Err(Error::invalid(format!("terminal time {} is not a positive grid node", self.terminal)));
        }
        match self.default {
            DefaultTime::None => {}
            DefaultTime::Fixed(t) if t.is_finite() && t > 0.0 => {}
            DefaultTime::Exponential { rate } if rate.is_finite() && rate > 0.0 => {}
            d => return Err(Error::invalid(format!("invalid default time {d:?}"))),
        }
        let n = self.regimes.len();
        if self.rho.len() != n || self.rho.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!("correlation matrix must be {n}x{n}")));
        }
        cholesky_psd(&self.rho).map(|_| ())
    }

    /// The common `(μ, σ)` when every regime uses the same coefficients.
    pub fn constant_coefficients(&self) -> Option<Regime> {
        let first = self.regimes[0];
        self.regimes.iter().all(|r| *r == first).then_some(first)
    }
}

/// Default-time indices for global paths `first..first + n`: snapped down to a
/// node, at least 1, and [`INF`] past the grid end.
pub fn sample_default_times(spec: &MarketSpec, rng: RngSpec, first: usize, n: usize) -> StoppingTime {
    let grid = spec.grid;
    let snap = |t: f64| {
        let k = grid.snap_down(t).max(1);
        if k > grid.steps() {
            INF
        } else {
            k
        }
    };
    let idx = match spec.default {
        DefaultTime::None => vec![INF; n],
        DefaultTime::Fixed(t) => vec![snap(t); n],
        DefaultTime::Exponential { rate } => {
            let exp = Exp::new(rate).expect("validated rate");
            (first..first + n)
                .map(|p| snap(rng.stream(DOMAIN_DEFAULT, p as u64).sample(exp)))
                .collect()
        }
    };
    StoppingTime::new(idx)
}

/// Glued driver `Z` and Brownian motion `w`, with the coupled sequences
/// `(T_n, Z^(n))` and `(T_n, W^(n))` they were glued from.
#[derive(Clone, Debug)]
pub struct SwitchedDriver {
    pub z: ProcessOnB,
    pub w: ProcessOnB,
    pub z_cs: CoupledSequence,
    pub w_cs: CoupledSequence,
}

/// Builds `Z^(1) = μ_1 t + σ_1 W^(1)` and, for `n >= 1`,
/// `Z^(n+1) = Z^(n)` on `[0, T_n]` and `Y^(n+1) + (Z^(n) - Y^(n+1))_{T_n}` after,
/// where `Y^(n) = μ_n t + σ_n W^(n)`. The Brownian `w` is glued the same way
/// from the raw drivers. Segments past the last regime reuse it.
pub fn switching_driver(
    regimes: &[Regime],
    brownians: &[PathEnsemble],
    times: &[StoppingTime],
    psit: &Psit,
) -> Result<SwitchedDriver> {
    if regimes.is_empty() || brownians.len() < regimes.len() {
        return Err(Error::invalid(format!(
            "{} regimes need as many drivers, got {}",
            regimes.len(),
            brownians.len()
        )));
    }
    if times.is_empty() {
        return Err(Error::invalid("no switching times"));
    }
    let grid = psit.grid();
    let n_paths = psit.n_paths();
    if brownians.iter().any(|b| b.grid() != grid || b.n_paths() != n_paths) || times.iter().any(|t| t.n_paths() != n_paths) {
        return Err(Error::invalid("drivers, switching times and set have different shapes"));
    }
    for (i, w) in times.windows(2).enumerate() {
        if let Some(p) = (0..n_paths).find(|&p| w[0].index(p) > w[1].index(p)) {
            return Err(Error::invalid(format!("T_{} > T_{} on path {p}", i + 1, i + 2)));
        }
    }
    let k = grid.steps();
    let t = grid.times();
    let regime_of = |n: usize| n.min(regimes.len() - 1);

    let per_path: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let y = |n: usize, j: usize| {
                let r = regimes[regime_of(n)];
                r.drift * t[j] + r.sigma * brownians[regime_of(n)].path(p).values()[j]
            };
            let b = |n: usize, j: usize| brownians[regime_of(n)].path(p).values()[j];
            let mut zs: Vec<Vec<f64>> = vec![(0..=k).map(|j| y(0, j)).collect()];
            let mut ws: Vec<Vec<f64>> = vec![brownians[0].path(p).values().to_vec()];
            for n in 1..times.len() {
                let tn = times[n - 1].index(p).min(k);
                let (zp, wp) = (&zs[n - 1], &ws[n - 1]);
                let (z_shift, w_shift) = (zp[tn] - y(n, tn), wp[tn] - b(n, tn));
                let mut zn = zp[..=tn].to_vec();
                let mut wn = wp[..=tn].to_vec();
                for j in tn + 1..=k {
                    zn.push(y(n, j) + z_shift);
                    wn.push(b(n, j) + w_shift);
                }
                zs.push(zn);
                ws.push(wn);
            }
            (zs, ws)
        })
        .collect();

    let mut z_paths: Vec<Vec<SamplePath>> = vec![Vec::with_capacity(n_paths); times.len()];
    let mut w_paths: Vec<Vec<SamplePath>> = vec![Vec::with_capacity(n_paths); times.len()];
    for (zs, ws) in per_path {
        for (n, (zn, wn)) in zs.into_iter().zip(ws).enumerate() {
            z_paths[n].push(SamplePath::from_parts(grid, zn, Vec::new()));
            w_paths[n].push(SamplePath::from_parts(grid, wn, Vec::new()));
        }
    }
    let to_cs = |paths: Vec<Vec<SamplePath>>| {
        CoupledSequence::new(
            times
                .iter()
                .cloned()
                .zip(paths.into_iter().map(|ps| PathEnsemble::from_parts(grid, ps)))
                .collect(),
        )
    };
    let z_cs = to_cs(z_paths)?;
    let w_cs = to_cs(w_paths)?;
    Ok(SwitchedDriver { z: glue(&z_cs, psit)?, w: glue(&w_cs, psit)?, z_cs, w_cs })
}

/// `S = s0 + S_- • Z` by the Euler recursion; fails if any `1 + ΔZ <= 0` on `B`.
pub fn price_process(z: &ProcessOnB, s0: f64) -> Result<ProcessOnB> {
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(Error::invalid(format!("s0 must be positive, got {s0}")));
    }
    for p in 0..z.n_paths() {
        let zs = z.section(p);
        if let Some(j) = (1..zs.len()).find(|&j| 1.0 + (zs[j] - zs[j - 1]) <= 0.0) {
            return Err(Error::PriceNotPositive { path: p, index: j, increment: zs[j] - zs[j - 1] });
        }
    }
    euler_exp(z, s0)
}

#[derive(Clone, Debug)]
pub struct Market {
    pub psit: Psit,
    pub switching_times: Vec<StoppingTime>,
    pub driver: SwitchedDriver,
    pub price: ProcessOnB,
    pub s0: f64,
}

impl Market {
    /// Market on explicit drivers (one per regime) and default times.
    pub fn from_drivers(spec: &MarketSpec, drivers: &[PathEnsemble], tau: &StoppingTime) -> Result<Market> {
        let (psit, fs) = psit_default_horizon(spec.terminal, tau, spec.grid)?;
        let switching_times = fs.terms().to_vec();
        let driver = switching_driver(&spec.regimes, drivers, &switching_times, &psit)?;
        let price = price_process(&driver.z, spec.s0)?;
        Ok(Market { psit, switching_times, driver, price, s0: spec.s0 })
    }

    /// Market for global paths `first..first + n`.
    pub fn build_range(spec: &MarketSpec, rng: RngSpec, first: usize, n: usize) -> Result<Market> {
        let factor = cholesky_psd(&spec.rho)?;
        let drivers = gen_correlated_range(spec.grid, &factor, first, n, rng);
        let tau = sample_default_times(spec, rng, first, n);
        Market::from_drivers(spec, &drivers, &tau)
    }

    pub fn build(spec: &MarketSpec, rng: RngSpec, n_paths: usize) -> Result<Market> {
        if n_paths == 0 {
            return Err(Error::invalid("n_paths must be at least 1"));
        }
        Market::build_range(spec, rng, 0, n_paths)
    }

    pub fn n_paths(&self) -> usize {
        self.psit.n_paths()
    }
}

/// Shares held in the asset. `shares[k]` is the position over `(t_{k-1}, t_k]`,
/// chosen at `t_{k-1}`; `shares[0] = 0`.
#[derive(Clone, Debug)]
pub struct Strategy {
    shares: ProcessOnB,
}

impl Strategy {
    pub fn new(shares: ProcessOnB) -> Result<Self> {
        if let Some(p) = (0..shares.n_paths()).find(|&p| shares.value(p, 0) != 0.0) {
            return Err(Error::invalid(format!("initial holding must be 0 (path {p})")));
        }
        Ok(Strategy { shares: shares.with_marks(vec![Vec::new(); shares.n_paths()])? })
    }

    pub fn zero(psit: &Psit) -> Self {
        let e = PathEnsemble::constant(psit.grid(), psit.n_paths(), 0.0);
        Strategy { shares: ProcessOnB::from_parts(psit.clone(), e).canonical() }
    }

    /// Hold `k` shares from the first step on.
    pub fn buy_and_hold(psit: &Psit, k: f64) -> Self {
        let v = (0..psit.grid().len()).map(|j| if j == 0 { 0.0 } else { k }).collect::<Vec<_>>();
        let e = PathEnsemble::from_values(psit.grid(), vec![v; psit.n_paths()]).expect("finite holdings");
        Strategy { shares: ProcessOnB::from_parts(psit.clone(), e).canonical() }
    }

    pub fn shares(&self) -> &ProcessOnB {
        &self.shares
    }

    pub fn scaled(&self, c: f64) -> Strategy {
        Strategy { shares: self.shares.scale(c) }
    }
}

/// Gains `ϑ • S = Σ_{j<=k} ϑ[j] (S[j] - S[j-1])`.
pub fn gains(theta: &Strategy, s: &ProcessOnB) -> Result<ProcessOnB> {
    predictable_integral(&theta.shares, s)
}

/// Self-financing wealth `X = x0 + ϑ • S`.
pub fn wealth(theta: &Strategy, s: &ProcessOnB, x0: f64) -> Result<ProcessOnB> {
    Ok(gains(theta, s)?.map(|g| x0 + g))
}

/// Per-path `a`-admissibility: `min_B ϑ • S >= -a` up to rounding.
pub fn check_admissible(theta: &Strategy, s: &ProcessOnB, a: f64) -> Result<Vec<bool>> {
    if !(a >= 0.0) {
        return Err(Error::invalid(format!("admissibility bound must be non-negative, got {a}")));
    }
    let g = gains(theta, s)?;
    Ok((0..g.n_paths())
        .map(|p| {
            let sec = g.section(p);
            let scale = sec.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            sec.iter().all(|&v| v >= -a - 1e-12 * scale)
        })
        .collect())
}

/// The log-optimal strategy together with the invested amount `π`.
#[derive(Clone, Debug)]
pub struct LogOptimal {
    pub strategy: Strategy,
    pub amount: ProcessOnB,
}

/// Invests `π = (x0 μ/σ²) exp(μ²/(2σ²) t + (μ/σ) w)` in the asset, i.e. holds
/// `π[k-1]/S[k-1]` shares over `(t_{k-1}, t_k]`.
pub fn log_optimal_strategy(market: &Market, spec: &MarketSpec, x0: f64) -> Result<LogOptimal> {
    fractional_strategy(market, spec, x0, 1.0)
}

/// The strategy keeping the fraction `c μ/σ²` of wealth in the asset, through
/// its closed-form amount `π_c = c (x0 μ/σ²) exp((c - c²/2)(μ/σ)² t + c (μ/σ) w)`.
/// `c = 1` is the log-optimal strategy.
pub fn fractional_strategy(market: &Market, spec: &MarketSpec, x0: f64, c: f64) -> Result<LogOptimal> {
    let Regime { drift: mu, sigma } = spec
        .constant_coefficients()
        .ok_or_else(|| Error::invalid("log-optimal strategy needs equal coefficients in all regimes"))?;
    if !(x0.is_finite() && x0 > 0.0) {
        return Err(Error::invalid(format!("x0 must be positive, got {x0}")));
    }
    if !c.is_finite() {
        return Err(Error::invalid(format!("multiplier must be finite, got {c}")));
    }
    if mu == 0.0 || c == 0.0 {
        let zero = Strategy::zero(&market.psit);
        return Ok(LogOptimal { amount: zero.shares.clone(), strategy: zero });
    }
    let (s, w) = (&market.price, &market.driver.w);
    let grid = market.psit.grid();
    let theta = mu / sigma;
    let (growth, vol) = ((c - c * c / 2.0) * theta * theta, c * theta);
    let lead = c * x0 * mu / (sigma * sigma);
    let per_path: Vec<_> = (0..market.n_paths())
        .into_par_iter()
        .map(|p| {
            let pi: Vec<f64> =
                w.section(p).iter().enumerate().map(|(k, &wk)| lead * (growth * grid.time(k) + vol * wk).exp()).collect();
            let ss = s.section(p);
            let shares = (0..pi.len()).map(|k| if k == 0 { 0.0 } else { pi[k - 1] / ss[k - 1] }).collect();
            ((pi, Vec::new()), (shares, Vec::new()))
        })
        .collect();
    let (pi_paths, share_paths): (Vec<_>, Vec<_>) = per_path.into_iter().unzip();
    Ok(LogOptimal {
        amount: ProcessOnB::from_section_values(&market.psit, pi_paths),
        strategy: Strategy { shares: ProcessOnB::from_section_values(&market.psit, share_paths) },
    })
}

/// `ln X` at each path's last index of `B`, or `None` where wealth is not
/// strictly positive somewhere on `B`.
pub fn terminal_log_wealth(x: &ProcessOnB) -> Vec<Option<f64>> {
    (0..x.n_paths())
        .map(|p| {
            let sec = x.section(p);
            sec.iter().all(|&v| v > 0.0).then(|| sec[sec.len() - 1].ln())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtilityEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_valid: usize,
    pub n_rejected: usize,
}

fn summarize(logs: &[Option<f64>]) -> UtilityEstimate {
    let valid: Vec<f64> = logs.iter().flatten().copied().collect();
    let m = mean_estimate(&valid);
    UtilityEstimate { estimate: m.mean, std_error: m.std_error, n_valid: m.n, n_rejected: logs.len() - valid.len() }
}

/// Sample mean and standard error of `ln X` at the last usable index.
pub fn expected_log_utility(strategy: &Strategy, market: &Market, x0: f64) -> Result<UtilityEstimate> {
    let x = wealth(strategy, &market.price, x0)?;
    Ok(summarize(&terminal_log_wealth(&x)))
}

/// Series for one path: time, price, Brownian, driver, invested amount and
/// wealth under the log-optimal strategy, over the path's section of `B`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathBundle {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub pi: Vec<f64>,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierResult {
    pub c: f64,
    pub utility: UtilityEstimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinanceRun {
    pub n_paths: usize,
    pub results: Vec<MultiplierResult>,
    /// Mean over paths of the time of the last usable index.
    pub mean_horizon: f64,
    /// Largest `|X - x0 exp(μ²/(2σ²) t + (μ/σ) w)|` at the last usable index
    /// under the unscaled log-optimal strategy, over paths with positive wealth.
    pub max_merton_gap: f64,
    pub first_path: PathBundle,
}

/// Monte Carlo expected log utility of the fraction `c μ/σ²` for each multiplier `c`.
///
/// Paths are simulated in fixed-size chunks; every per-path quantity depends
/// only on the seed and the path index, and the means are pairwise sums in
/// path order, so results do not depend on the thread count.
pub fn evaluate_multipliers(
    spec: &MarketSpec,
    x0: f64,
    rng: RngSpec,
    n_paths: usize,
    multipliers: &[f64],
) -> Result<FinanceRun> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    let Regime { drift: mu, sigma } = spec
        .constant_coefficients()
        .ok_or_else(|| Error::invalid("log-optimal strategy needs equal coefficients in all regimes"))?;
    let grid = spec.grid;
    let mut logs: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(n_paths); multipliers.len()];
    let mut horizons = Vec::with_capacity(n_paths);
    let mut gaps = Vec::with_capacity(n_paths);
    let mut first_path = PathBundle::default();
    let mut first = 0;
    while first < n_paths {
        let n = CHUNK_PATHS.min(n_paths - first);
        let market = Market::build_range(spec, rng, first, n)?;
        let opt = log_optimal_strategy(&market, spec, x0)?;
        let x1 = wealth(&opt.strategy, &market.price, x0)?;
        for (i, &c) in multipliers.iter().enumerate() {
            let x = if c == 1.0 {
                x1.clone()
            } else {
                wealth(&fractional_strategy(&market, spec, x0, c)?.strategy, &market.price, x0)?
            };
            logs[i].extend(terminal_log_wealth(&x));
        }
        let theta = if sigma > 0.0 { mu / sigma } else { 0.0 };
        for p in 0..n {
            let last = market.psit.last_index(p);
            let t = grid.time(last);
            horizons.push(t);
            let xt = x1.value(p, last);
            if x1.section(p).iter().all(|&v| v > 0.0) {
                let merton = x0 * (0.5 * theta * theta * t + theta * market.driver.w.value(p, last)).exp();
                gaps.push((xt - merton).abs());
            }
        }
        if first == 0 {
            let last = market.psit.last_index(0);
            first_path = PathBundle {
                t: (0..=last).map(|k| grid.time(k)).collect(),
                s: market.price.section(0).to_vec(),
                w: market.driver.w.section(0).to_vec(),
                z: market.driver.z.section(0).to_vec(),
                pi: opt.amount.section(0).to_vec(),
                x: x1.section(0).to_vec(),
            };
        }
        first += n;
    }
    let results = multipliers
        .iter()
        .zip(&logs)
        .map(|(&c, l)| MultiplierResult { c, utility: summarize(l) })
        .collect();
    Ok(FinanceRun {
        n_paths,
        results,
        mean_horizon: pairwise_sum(&horizons) / n_paths as f64,
        max_merton_gap: gaps.iter().fold(0.0, |m: f64, &g| m.max(g)),
        first_path,
    })
}
