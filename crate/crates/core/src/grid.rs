//! Uniform time grids, sampled paths and reproducible random path generation.
//!
//! Every path carries a set of *jump marks*. An annotated index `k` claims the
//! whole increment `values[k] - values[k-1]` as the jump of the path at `t_k`;
//! all other increments are treated as continuous motion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `K`; nodes are indexed `0..=K`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Time of node `k`. The last node is exactly the horizon.
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Index of the node at time `t`, if `t` is a node up to rounding.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let k = x.round();
        if k < 0.0 || k > self.steps as f64 {
            return None;
        }
        ((x - k).abs() <= 1e-9 * x.abs().max(1.0)).then_some(k as usize)
    }

    /// Largest node index `k` with `t_k <= t`. Times within rounding of a node
    /// snap to that node. May exceed `K` for times past the horizon.
    pub fn snap_down(&self, t: f64) -> usize {
        let x = t / self.dt();
        let k = x.round();
        if (x - k).abs() <= 1e-9 * x.abs().max(1.0) {
            k.max(0.0) as usize
        } else {
            x.floor().max(0.0) as usize
        }
    }

    pub fn refine(&self, factor: usize) -> Result<TimeGrid> {
        if factor == 0 {
            return Err(Error::invalid("refinement factor must be at least 1"));
        }
        TimeGrid::new(self.horizon, self.steps * factor)
    }
}

pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, steps)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
    jumps: Vec<usize>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>, mut jumps: Vec<usize>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "path has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at index {k}")));
        }
        jumps.sort_unstable();
        jumps.dedup();
        if let Some(&k) = jumps.iter().find(|&&k| k == 0 || k > grid.steps()) {
            return Err(Error::invalid(format!("jump mark {k} outside 1..={}", grid.steps())));
        }
        Ok(SamplePath { grid, values, jumps })
    }

    /// Internal constructor for paths built by this crate from valid parts.
    pub(crate) fn from_parts(grid: TimeGrid, values: Vec<f64>, jumps: Vec<usize>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert!(jumps.windows(2).all(|w| w[0] < w[1]));
        SamplePath { grid, values, jumps }
    }

    pub fn constant(grid: TimeGrid, c: f64) -> Self {
        SamplePath::from_parts(grid, vec![c; grid.len()], Vec::new())
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Sorted jump marks.
    pub fn jump_marks(&self) -> &[usize] {
        &self.jumps
    }

    pub fn is_jump(&self, k: usize) -> bool {
        self.jumps.binary_search(&k).is_ok()
    }

    pub fn increment(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.values[k] - self.values[k - 1]
        }
    }

    /// Jump size `ΔX[k]`: the increment at an annotated index, zero elsewhere.
    pub fn jump(&self, k: usize) -> f64 {
        if self.is_jump(k) {
            self.increment(k)
        } else {
            0.0
        }
    }

    pub fn set_jump_marks(&mut self, marks: Vec<usize>) -> Result<()> {
        let p = SamplePath::new(self.grid, std::mem::take(&mut self.values), marks)?;
        *self = p;
        Ok(())
    }
}

/// Deterministic fixture path, e.g. a staircase with annotated jumps.
pub fn make_deterministic_path(
    grid: TimeGrid,
    values: Vec<f64>,
    jump_marks: Vec<usize>,
) -> Result<SamplePath> {
    SamplePath::new(grid, values, jump_marks)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    grid: TimeGrid,
    paths: Vec<SamplePath>,
}

impl PathEnsemble {
    pub fn new(grid: TimeGrid, paths: Vec<SamplePath>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("ensemble needs at least one path"));
        }
        if let Some(i) = paths.iter().position(|p| p.grid != grid) {
            return Err(Error::invalid(format!("path {i} lives on a different grid")));
        }
        Ok(PathEnsemble { grid, paths })
    }

    pub(crate) fn from_parts(grid: TimeGrid, paths: Vec<SamplePath>) -> Self {
        PathEnsemble { grid, paths }
    }

    pub fn from_values(grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        let paths = values
            .into_iter()
            .map(|v| SamplePath::new(grid, v, Vec::new()))
            .collect::<Result<Vec<_>>>()?;
        PathEnsemble::new(grid, paths)
    }

    pub fn constant(grid: TimeGrid, n_paths: usize, c: f64) -> Self {
        PathEnsemble::from_parts(grid, vec![SamplePath::constant(grid, c); n_paths])
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn paths(&self) -> &[SamplePath] {
        &self.paths
    }

    pub fn paths_mut(&mut self) -> &mut [SamplePath] {
        &mut self.paths
    }

    pub fn path(&self, i: usize) -> &SamplePath {
        &self.paths[i]
    }

    pub fn into_paths(self) -> Vec<SamplePath> {
        self.paths
    }
}

const DOMAIN_BROWNIAN: u64 = 0x6272_6f77_6e69_616e;
const DOMAIN_BRIDGE: u64 = 0x6272_6964_6765_0000;

/// Words of ChaCha output reserved for each coarse interval during bridge infill.
const BRIDGE_WORDS_PER_INTERVAL: u32 = 20;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed plus the rule that turns `(master_seed, domain, path_index)` into an
/// independent random stream.
///
/// The key of a ChaCha8 generator is derived from `splitmix64(master_seed ^
/// splitmix64(domain))` (expanded by `SeedableRng::seed_from_u64`) and the path
/// index selects the ChaCha stream. Domains separate drivers, default times and
/// bridge levels; a stream never depends on which thread draws it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngSpec {
    pub master_seed: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64) -> Self {
        RngSpec { master_seed }
    }

    pub fn stream(&self, domain: u64, path: u64) -> ChaCha8Rng {
        let key = splitmix64(self.master_seed ^ splitmix64(domain));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(path);
        rng
    }

    /// Stream of the `driver`-th independent Brownian motion on `path`.
    pub fn driver_stream(&self, driver: usize, path: u64) -> ChaCha8Rng {
        self.stream(DOMAIN_BROWNIAN.wrapping_add(driver as u64), path)
    }

    fn bridge_stream(&self, coarse_steps: usize, path: u64, interval: usize) -> ChaCha8Rng {
        let domain = DOMAIN_BRIDGE ^ splitmix64(coarse_steps as u64);
        let mut rng = self.stream(domain, path);
        rng.set_word_pos((interval as u128) << BRIDGE_WORDS_PER_INTERVAL);
        rng
    }
}

fn brownian_path(grid: TimeGrid, rng: &mut ChaCha8Rng) -> SamplePath {
    let sd = grid.dt().sqrt();
    let mut values = Vec::with_capacity(grid.len());
    let mut x = 0.0;
    values.push(x);
    for _ in 0..grid.steps() {
        let z: f64 = rng.sample(StandardNormal);
        x += sd * z;
        values.push(x);
    }
    SamplePath::from_parts(grid, values, Vec::new())
}

/// Standard Brownian paths for global path indices `first..first + n_paths`.
pub fn gen_brownian_range(grid: TimeGrid, first: usize, n_paths: usize, rng: RngSpec) -> PathEnsemble {
    let paths = (first..first + n_paths)
        .into_par_iter()
        .map(|i| brownian_path(grid, &mut rng.driver_stream(0, i as u64)))
        .collect();
    PathEnsemble::from_parts(grid, paths)
}

pub fn gen_brownian(grid: TimeGrid, n_paths: usize, rng: RngSpec) -> Result<PathEnsemble> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    Ok(gen_brownian_range(grid, 0, n_paths, rng))
}

/// Lower-triangular factor `L` with `L Lᵀ = rho`, allowing singular `rho`.
pub fn cholesky_psd(rho: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    const TOL: f64 = 1e-10;
    let n = rho.len();
    if n == 0 {
        return Err(Error::invalid("correlation matrix is empty"));
    }
    for (i, row) in rho.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid(format!("correlation row {i} has {} entries, expected {n}", row.len())));
        }
        if (row[i] - 1.0).abs() > TOL {
            return Err(Error::invalid(format!("correlation diagonal entry {i} is {}, expected 1", row[i])));
        }
        for (j, &r) in row.iter().enumerate() {
            if !r.is_finite() || r.abs() > 1.0 + TOL {
                return Err(Error::invalid(format!("correlation entry ({i},{j}) = {r} outside [-1, 1]")));
            }
            if (r - rho[j][i]).abs() > TOL {
                return Err(Error::invalid(format!("correlation matrix not symmetric at ({i},{j})")));
            }
        }
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s = rho[i][j] - (0..j).map(|m| l[i][m] * l[j][m]).sum::<f64>();
            if i == j {
                if s < -TOL {
                    return Err(Error::NotPositiveSemiDefinite { minor: i + 1 });
                }
                l[i][i] = s.max(0.0).sqrt();
            } else if l[j][j] > TOL {
                l[i][j] = s / l[j][j];
            } else if s.abs() > TOL {
                return Err(Error::NotPositiveSemiDefinite { minor: i + 1 });
            }
        }
    }
    Ok(l)
}

/// Correlated Brownian drivers for global path indices `first..first + n_paths`.
pub fn gen_correlated_range(
    grid: TimeGrid,
    factor: &[Vec<f64>],
    first: usize,
    n_paths: usize,
    rng: RngSpec,
) -> Vec<PathEnsemble> {
    let n = factor.len();
    let sd = grid.dt().sqrt();
    let per_path: Vec<Vec<SamplePath>> = (first..first + n_paths)
        .into_par_iter()
        .map(|i| {
            let mut streams: Vec<ChaCha8Rng> = (0..n).map(|d| rng.driver_stream(d, i as u64)).collect();
            let mut values = vec![Vec::with_capacity(grid.len()); n];
            let mut x = vec![0.0; n];
            let mut z = vec![0.0; n];
            for v in values.iter_mut() {
                v.push(0.0);
            }
            for _ in 0..grid.steps() {
                for (zd, s) in z.iter_mut().zip(streams.iter_mut()) {
                    *zd = s.sample(StandardNormal);
                }
                for d in 0..n {
                    let mixed: f64 = (0..=d).map(|m| factor[d][m] * z[m]).sum();
                    x[d] += sd * mixed;
                    values[d].push(x[d]);
                }
            }
            values
                .into_iter()
                .map(|v| SamplePath::from_parts(grid, v, Vec::new()))
                .collect()
        })
        .collect();
    let mut drivers: Vec<Vec<SamplePath>> = vec![Vec::with_capacity(n_paths); n];
    for paths in per_path {
        for (d, p) in paths.into_iter().enumerate() {
            drivers[d].push(p);
        }
    }
    drivers
        .into_iter()
        .map(|paths| PathEnsemble::from_parts(grid, paths))
        .collect()
}

pub fn gen_correlated_brownians(
    grid: TimeGrid,
    n_drivers: usize,
    rho: &[Vec<f64>],
    n_paths: usize,
    rng: RngSpec,
) -> Result<Vec<PathEnsemble>> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    if rho.len() != n_drivers {
        return Err(Error::invalid(format!(
            "correlation matrix is {}x{}, expected {n_drivers}x{n_drivers}",
            rho.len(),
            rho.len()
        )));
    }
    let factor = cholesky_psd(rho)?;
    Ok(gen_correlated_range(grid, &factor, 0, n_paths, rng))
}

/// Refines a Brownian ensemble by `factor` using Brownian-bridge infill.
///
/// Coarse node values are kept bit-for-bit; the infill of coarse interval `j`
/// on path `p` draws from a stream keyed to `(seed, coarse steps, p, j)`, so
/// refinement ladders always describe the same realization. `first` is the
/// global index of the ensemble's first path.
pub fn refine_bridge(ens: &PathEnsemble, factor: usize, rng: RngSpec, first: usize) -> Result<PathEnsemble> {
    let coarse = ens.grid();
    let fine = coarse.refine(factor)?;
    if let Some(i) = ens.paths().iter().position(|p| !p.jump_marks().is_empty()) {
        return Err(Error::invalid(format!("bridge refinement of annotated path {i}")));
    }
    let h = fine.dt();
    let paths = ens
        .paths()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let v = p.values();
            let mut out = Vec::with_capacity(fine.len());
            out.push(v[0]);
            for j in 0..coarse.steps() {
                let mut r = rng.bridge_stream(coarse.steps(), (first + i) as u64, j);
                let end = v[j + 1];
                let mut x = v[j];
                for m in 1..factor {
                    let remaining = (factor - m + 1) as f64 * h;
                    let mean = x + (end - x) * h / remaining;
                    let var = h * (remaining - h) / remaining;
                    let z: f64 = r.sample(StandardNormal);
                    x = mean + var.sqrt() * z;
                    out.push(x);
                }
                out.push(end);
            }
            SamplePath::from_parts(fine, out, Vec::new())
        })
        .collect();
    Ok(PathEnsemble::from_parts(fine, paths))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes() {
        let g = make_grid(1.0, 4).unwrap();
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = make_grid(2.0, 1).unwrap();
        assert_eq!(g.dt(), 2.0);
        assert_eq!(g.times(), vec![0.0, 2.0]);
        assert!(make_grid(1.0, 0).is_err());
        assert!(make_grid(0.0, 3).is_err());
        assert!(make_grid(-1.0, 3).is_err());
    }

    #[test]
    fn last_node_is_horizon() {
        for steps in [3, 7, 1000, 4000] {
            let g = make_grid(0.3, steps).unwrap();
            assert_eq!(g.time(steps), 0.3);
        }
    }

    #[test]
    fn snapping() {
        let g = make_grid(1.0, 1000).unwrap();
        assert_eq!(g.node_index(0.5), Some(500));
        assert_eq!(g.node_index(0.5004), None);
        assert_eq!(g.snap_down(0.5), 500);
        assert_eq!(g.snap_down(0.5004), 500);
        assert_eq!(g.snap_down(0.3), 300);
    }

    #[test]
    fn deterministic_paths() {
        let g = make_grid(1.0, 2).unwrap();
        let p = make_deterministic_path(g, vec![0.0, 1.0, 3.0], vec![2]).unwrap();
        assert_eq!(p.jump(2), 2.0);
        assert_eq!(p.jump(1), 0.0);
        assert_eq!(p.jump(0), 0.0);
        let c = make_deterministic_path(g, vec![4.0; 3], vec![]).unwrap();
        assert!((0..3).all(|k| c.increment(k) == 0.0));
        assert!(make_deterministic_path(g, vec![0.0, 1.0], vec![]).is_err());
        assert!(make_deterministic_path(g, vec![0.0; 3], vec![0]).is_err());
        assert!(make_deterministic_path(g, vec![0.0; 3], vec![3]).is_err());
        assert!(make_deterministic_path(g, vec![0.0, f64::NAN, 1.0], vec![]).is_err());
    }

    #[test]
    fn staircase_indicator() {
        let g = make_grid(1.0, 8).unwrap();
        let t = 3;
        let values = (0..=8).map(|k| if k >= t { 1.0 } else { 0.0 }).collect();
        let p = make_deterministic_path(g, values, vec![t]).unwrap();
        for k in 0..=8 {
            assert_eq!(p.jump(k), if k == t { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn brownian_starts_at_zero_without_marks() {
        let g = make_grid(1.0, 50).unwrap();
        let e = gen_brownian(g, 20, RngSpec::new(7)).unwrap();
        assert!(e.paths().iter().all(|p| p.values()[0] == 0.0 && p.jump_marks().is_empty()));
        assert!(gen_brownian(g, 0, RngSpec::new(7)).is_err());
    }

    #[test]
    fn brownian_moments() {
        let g = make_grid(1.0, 16).unwrap();
        let n = 10_000;
        let e = gen_brownian(g, n, RngSpec::new(42)).unwrap();
        let ends: Vec<f64> = e.paths().iter().map(|p| p.values()[16]).collect();
        let mean = ends.iter().sum::<f64>() / n as f64;
        let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 4.0 * (1.0 / n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() <= 0.1, "var {var}");
    }

    #[test]
    fn reproducible_regardless_of_threads() {
        let g = make_grid(1.0, 32).unwrap();
        let a = gen_brownian(g, 64, RngSpec::new(3)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| gen_brownian(g, 64, RngSpec::new(3)).unwrap());
        assert_eq!(a, b);
        let c = gen_brownian(g, 64, RngSpec::new(4)).unwrap();
        assert_ne!(a, c);
        // a path depends only on its own index
        let tail = gen_brownian_range(g, 10, 5, RngSpec::new(3));
        assert_eq!(tail.paths(), &a.paths()[10..15]);
    }

    #[test]
    fn correlated_identity_is_independent() {
        let g = make_grid(1.0, 1).unwrap();
        let rho = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let d = gen_correlated_brownians(g, 2, &rho, 10_000, RngSpec::new(5)).unwrap();
        let c = sample_corr(&d[0], &d[1]);
        assert!(c.abs() < 0.05, "corr {c}");
        // driver 0 coincides with the plain generator
        assert_eq!(d[0], gen_brownian(g, 10_000, RngSpec::new(5)).unwrap());
    }

    #[test]
    fn correlated_degenerate_is_identical() {
        let g = make_grid(1.0, 10).unwrap();
        let rho = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let d = gen_correlated_brownians(g, 2, &rho, 100, RngSpec::new(5)).unwrap();
        assert_eq!(d[0], d[1]);
    }

    #[test]
    fn correlated_half() {
        let g = make_grid(1.0, 1).unwrap();
        let rho = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        let d = gen_correlated_brownians(g, 2, &rho, 10_000, RngSpec::new(11)).unwrap();
        let c = sample_corr(&d[0], &d[1]);
        assert!((0.45..=0.55).contains(&c), "corr {c}");
    }

    #[test]
    fn rejects_non_psd() {
        let rho = vec![
            vec![1.0, 0.9, -0.9],
            vec![0.9, 1.0, 0.9],
            vec![-0.9, 0.9, 1.0],
        ];
        match cholesky_psd(&rho) {
            Err(Error::NotPositiveSemiDefinite { minor }) => assert_eq!(minor, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(cholesky_psd(&[vec![1.0, 0.2], vec![0.3, 1.0]]).is_err());
        assert!(cholesky_psd(&[vec![2.0]]).is_err());
    }

    #[test]
    fn bridge_keeps_coarse_nodes() {
        let g = make_grid(1.0, 25).unwrap();
        let rng = RngSpec::new(9);
        let coarse = gen_brownian(g, 8, rng).unwrap();
        let fine = refine_bridge(&coarse, 4, rng, 0).unwrap();
        let finer = refine_bridge(&fine, 4, rng, 0).unwrap();
        assert_eq!(fine.grid().steps(), 100);
        for (c, (f, ff)) in coarse.paths().iter().zip(fine.paths().iter().zip(finer.paths())) {
            for k in 0..=25 {
                assert_eq!(c.values()[k], f.values()[4 * k]);
                assert_eq!(c.values()[k], ff.values()[16 * k]);
            }
        }
        // refining a sub-range reproduces the same infill
        let part = PathEnsemble::new(g, coarse.paths()[3..5].to_vec()).unwrap();
        let part_fine = refine_bridge(&part, 4, rng, 3).unwrap();
        assert_eq!(part_fine.paths(), &fine.paths()[3..5]);
    }

    #[test]
    fn bridge_increment_variance() {
        let g = make_grid(1.0, 4).unwrap();
        let rng = RngSpec::new(1);
        let coarse = gen_brownian(g, 5000, rng).unwrap();
        let fine = refine_bridge(&coarse, 8, rng, 0).unwrap();
        let dt = fine.grid().dt();
        let mut s = 0.0;
        let mut n = 0.0;
        for p in fine.paths() {
            for k in 1..=fine.grid().steps() {
                s += p.increment(k).powi(2);
                n += 1.0;
            }
        }
        let ratio = s / n / dt;
        assert!((ratio - 1.0).abs() < 0.03, "ratio {ratio}");
    }

    fn sample_corr(a: &PathEnsemble, b: &PathEnsemble) -> f64 {
        let xs: Vec<f64> = a.paths().iter().map(|p| p.increment(1)).collect();
        let ys: Vec<f64> = b.paths().iter().map(|p| p.increment(1)).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }
}
