//! Predictable sets of interval type on a grid, stopping times, fundamental
//! and coupled sequences, and the restriction / stopping / gluing operators.
//!
//! A set `B` is stored per path as its debut `d` and whether `d` itself
//! belongs to the section: `B_ω = [0, d]` when closed and `[0, d)` when open.
//! All operators only read values inside `B` and emit *canonical* processes whose
//! values after the last `B` index are frozen at the value there, so nothing
//! outside `B` can leak into an output.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{PathEnsemble, SamplePath, TimeGrid};

/// Index standing for `+∞` (beyond the end of the grid).
pub const INF: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoppingTime(Vec<usize>);

impl StoppingTime {
    pub fn new(indices: Vec<usize>) -> Self {
        StoppingTime(indices)
    }

    pub fn constant(n_paths: usize, k: usize) -> Self {
        StoppingTime(vec![k; n_paths])
    }

    pub fn infinite(n_paths: usize) -> Self {
        StoppingTime(vec![INF; n_paths])
    }

    pub fn n_paths(&self) -> usize {
        self.0.len()
    }

    pub fn index(&self, path: usize) -> usize {
        self.0[path]
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn is_infinite(&self, path: usize) -> bool {
        self.0[path] == INF
    }

    /// Pathwise minimum `T ∧ S`.
    pub fn meet(&self, other: &StoppingTime) -> Result<StoppingTime> {
        if self.n_paths() != other.n_paths() {
            return Err(Error::invalid("stopping times cover different numbers of paths"));
        }
        Ok(StoppingTime(self.0.iter().zip(&other.0).map(|(a, b)| *a.min(b)).collect()))
    }

    /// Pathwise `self <= other`.
    pub fn le(&self, other: &StoppingTime) -> bool {
        self.n_paths() == other.n_paths() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Psit {
    grid: TimeGrid,
    debut: Vec<usize>,
    closed: Vec<bool>,
}

impl Psit {
    pub fn new(grid: TimeGrid, debut: Vec<usize>, closed: Vec<bool>) -> Result<Self> {
        if debut.is_empty() || debut.len() != closed.len() {
            return Err(Error::invalid("debut and closed flags must be non-empty and of equal length"));
        }
        if let Some(p) = (0..debut.len()).find(|&p| debut[p] == 0 && !closed[p]) {
            return Err(Error::invalid(format!("empty section on path {p}: debut 0 must be closed")));
        }
        Ok(Psit { grid, debut, closed })
    }

    /// The whole grid on every path.
    pub fn full(grid: TimeGrid, n_paths: usize) -> Self {
        Psit {
            grid,
            debut: vec![INF; n_paths],
            closed: vec![true; n_paths],
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.debut.len()
    }

    pub fn debut(&self) -> StoppingTime {
        StoppingTime(self.debut.clone())
    }

    pub fn debut_index(&self, path: usize) -> usize {
        self.debut[path]
    }

    pub fn closed_at_debut(&self, path: usize) -> bool {
        self.closed[path]
    }

    /// Largest grid index in the section `B_ω`.
    pub fn last_index(&self, path: usize) -> usize {
        section_last(self.debut[path], self.closed[path], self.grid.steps())
    }

    pub fn last_indices(&self) -> Vec<usize> {
        (0..self.n_paths()).map(|p| self.last_index(p)).collect()
    }

    pub fn contains(&self, path: usize, k: usize) -> bool {
        k <= self.last_index(path)
    }

    pub fn is_full(&self, path: usize) -> bool {
        self.last_index(path) == self.grid.steps()
    }

    /// Whether both sets have identical sections on the grid.
    pub fn same_section(&self, other: &Psit) -> bool {
        self.grid == other.grid
            && self.n_paths() == other.n_paths()
            && (0..self.n_paths()).all(|p| self.last_index(p) == other.last_index(p))
    }

    pub fn is_subset_of(&self, other: &Psit) -> bool {
        self.grid == other.grid
            && self.n_paths() == other.n_paths()
            && (0..self.n_paths()).all(|p| self.last_index(p) <= other.last_index(p))
    }
}

fn section_last(debut: usize, closed: bool, steps: usize) -> usize {
    if debut > steps {
        steps
    } else if closed {
        debut
    } else {
        debut - 1
    }
}

/// `B = ⟦0, T_F⟦ ∩ ⟦0, T_{F^c}⟧`: open at the debut exactly where `F` holds.
pub fn psit_from_debut(t: &StoppingTime, open_flags: &[bool], grid: TimeGrid) -> Result<Psit> {
    if t.n_paths() != open_flags.len() {
        return Err(Error::invalid("one flag per path is required"));
    }
    if let Some(p) = (0..t.n_paths()).find(|&p| t.index(p) == 0 && open_flags[p]) {
        return Err(Error::invalid(format!("empty section on path {p}: open flag set with debut 0")));
    }
    Psit::new(grid, t.indices().to_vec(), open_flags.iter().map(|f| !f).collect())
}

/// An increasing sequence `τ_1 <= τ_2 <= ...` together with its pathwise
/// supremum. On a finite grid only a finite prefix is stored; the sequence is
/// stationary after it. The supremum is kept separately because an announcing
/// sequence never attains it.
#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalSequence {
    grid: TimeGrid,
    terms: Vec<StoppingTime>,
    sup: StoppingTime,
}

impl FundamentalSequence {
    pub fn new(grid: TimeGrid, terms: Vec<StoppingTime>, sup: StoppingTime) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::invalid("fundamental sequence is empty"));
        };
        let n = first.n_paths();
        if n == 0 || sup.n_paths() != n || terms.iter().any(|t| t.n_paths() != n) {
            return Err(Error::invalid("fundamental sequence terms cover different numbers of paths"));
        }
        for (i, w) in terms.windows(2).enumerate() {
            if let Some(p) = (0..n).find(|&p| w[0].index(p) > w[1].index(p)) {
                return Err(Error::invalid(format!(
                    "sequence decreases between terms {} and {} on path {p}",
                    i + 1,
                    i + 2
                )));
            }
        }
        let last = terms.last().unwrap();
        for p in 0..n {
            let (reach, s) = (last.index(p), sup.index(p));
            if reach > s {
                return Err(Error::invalid(format!("term exceeds the supremum on path {p}")));
            }
            if reach < s && reach < section_last(s, false, grid.steps()) {
                return Err(Error::invalid(format!(
                    "terms reach {reach} on path {p} and do not exhaust [0, {s})"
                )));
            }
        }
        Ok(FundamentalSequence { grid, terms, sup })
    }

    /// A sequence whose supremum is its last term.
    pub fn from_terms(grid: TimeGrid, terms: Vec<StoppingTime>) -> Result<Self> {
        let sup = terms
            .last()
            .cloned()
            .ok_or_else(|| Error::invalid("fundamental sequence is empty"))?;
        FundamentalSequence::new(grid, terms, sup)
    }

    /// Announcing sequence `τ_n = d - max(1, ⌈d 2^{-n}⌉)`, capped at the grid end,
    /// strictly below the target `d` and increasing to `d - 1`.
    pub fn announcing(target: &StoppingTime, grid: TimeGrid) -> Result<Self> {
        if let Some(p) = (0..target.n_paths()).find(|&p| target.index(p) == 0) {
            return Err(Error::invalid(format!("cannot announce time 0 (path {p})")));
        }
        let k = grid.steps();
        let goal: Vec<usize> = target.indices().iter().map(|&d| section_last(d, false, k)).collect();
        let term = |d: usize, n: u32| {
            if d == INF {
                k
            } else {
                announce_term(d, n).min(k)
            }
        };
        let terms = build_terms(&goal, |p, n| term(target.index(p), n));
        FundamentalSequence::new(grid, terms, target.clone())
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[StoppingTime] {
        &self.terms
    }

    /// The `n`-th term (1-based); the sequence is stationary past the stored prefix.
    pub fn term(&self, n: usize) -> &StoppingTime {
        assert!(n >= 1, "terms are numbered from 1");
        &self.terms[(n - 1).min(self.terms.len() - 1)]
    }

    pub fn sup(&self) -> &StoppingTime {
        &self.sup
    }

    pub fn n_paths(&self) -> usize {
        self.sup.n_paths()
    }
}

/// `d - max(1, ⌈d / 2^n⌉)` for a finite target `d >= 1`.
fn announce_term(d: usize, n: u32) -> usize {
    let step = if n >= usize::BITS {
        1
    } else {
        d.div_ceil(1usize << n).max(1)
    };
    d - step
}

/// Collect terms `n = 1, 2, ...` until every path reaches its goal index.
fn build_terms(goal: &[usize], term: impl Fn(usize, u32) -> usize) -> Vec<StoppingTime> {
    let mut terms = Vec::new();
    for n in 1..=usize::BITS + 1 {
        let t: Vec<usize> = (0..goal.len()).map(|p| term(p, n)).collect();
        let done = t.iter().zip(goal).all(|(a, g)| a >= g);
        terms.push(StoppingTime(t));
        if done {
            break;
        }
    }
    terms
}

/// `B = ∪_n [0, τ_n]`, with debut the supremum, closed where it is attained.
pub fn psit_from_fs(fs: &FundamentalSequence) -> Result<Psit> {
    let last = fs.terms.last().unwrap();
    let closed = (0..fs.n_paths()).map(|p| last.index(p) == fs.sup.index(p)).collect();
    Psit::new(fs.grid, fs.sup.indices().to_vec(), closed)
}

/// Canonical FS of a set: constant at the debut on closed paths and the
/// announcing sequence of the debut on open ones.
pub fn canonical_fs(psit: &Psit) -> FundamentalSequence {
    let k = psit.grid.steps();
    let goal = psit.last_indices();
    let open = |p: usize| !psit.closed[p] && psit.debut[p] <= k;
    let terms = build_terms(&goal, |p, n| {
        if open(p) {
            announce_term(psit.debut[p], n)
        } else {
            goal[p]
        }
    });
    let sup = (0..psit.n_paths())
        .map(|p| if open(p) { psit.debut[p] } else { goal[p] })
        .collect();
    FundamentalSequence::new(psit.grid, terms, StoppingTime(sup)).expect("canonical sequence is valid")
}

/// A process whose values only matter inside its set `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessOnB {
    psit: Psit,
    ensemble: PathEnsemble,
}

impl ProcessOnB {
    /// Wraps an ensemble without touching values outside `B`.
    pub fn new(psit: Psit, ensemble: PathEnsemble) -> Result<Self> {
        if psit.n_paths() != ensemble.n_paths() {
            return Err(Error::invalid(format!(
                "set covers {} paths, ensemble has {}",
                psit.n_paths(),
                ensemble.n_paths()
            )));
        }
        if psit.grid() != ensemble.grid() {
            return Err(Error::invalid("set and ensemble live on different grids"));
        }
        Ok(ProcessOnB { psit, ensemble })
    }

    pub(crate) fn from_parts(psit: Psit, ensemble: PathEnsemble) -> Self {
        debug_assert_eq!(psit.n_paths(), ensemble.n_paths());
        ProcessOnB { psit, ensemble }
    }

    /// Builds a canonical process from per-path values given on `0..=last`.
    pub(crate) fn from_section_values(psit: &Psit, per_path: Vec<(Vec<f64>, Vec<usize>)>) -> Self {
        let grid = psit.grid();
        let paths = per_path
            .into_iter()
            .map(|(mut v, marks)| {
                let fill = *v.last().unwrap();
                v.resize(grid.len(), fill);
                SamplePath::from_parts(grid, v, marks)
            })
            .collect();
        ProcessOnB::from_parts(psit.clone(), PathEnsemble::from_parts(grid, paths))
    }

    pub fn psit(&self) -> &Psit {
        &self.psit
    }

    pub fn ensemble(&self) -> &PathEnsemble {
        &self.ensemble
    }

    pub fn into_ensemble(self) -> PathEnsemble {
        self.ensemble
    }

    pub fn grid(&self) -> TimeGrid {
        self.psit.grid()
    }

    pub fn n_paths(&self) -> usize {
        self.psit.n_paths()
    }

    pub fn last_index(&self, path: usize) -> usize {
        self.psit.last_index(path)
    }

    /// Values of `path` inside `B`.
    pub fn section(&self, path: usize) -> &[f64] {
        &self.ensemble.path(path).values()[..=self.last_index(path)]
    }

    /// Jump marks of `path` inside `B`.
    pub fn section_marks(&self, path: usize) -> &[usize] {
        let marks = self.ensemble.path(path).jump_marks();
        let end = marks.partition_point(|&k| k <= self.last_index(path));
        &marks[..end]
    }

    pub fn value(&self, path: usize, k: usize) -> f64 {
        self.ensemble.path(path).values()[k]
    }

    /// Value at the last index of the section.
    pub fn terminal(&self, path: usize) -> f64 {
        self.value(path, self.last_index(path))
    }

    /// Indistinguishability on `B`: same section, bitwise equal values and marks.
    pub fn eq_on_b(&self, other: &ProcessOnB) -> bool {
        self.psit.same_section(&other.psit)
            && (0..self.n_paths())
                .all(|p| self.section(p) == other.section(p) && self.section_marks(p) == other.section_marks(p))
    }

    /// Largest absolute difference over `B`; infinite if the sections differ.
    pub fn max_abs_diff_on_b(&self, other: &ProcessOnB) -> f64 {
        if !self.psit.same_section(&other.psit) {
            return f64::INFINITY;
        }
        (0..self.n_paths())
            .flat_map(|p| self.section(p).iter().zip(other.section(p)).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_on_b(&self) -> f64 {
        (0..self.n_paths())
            .flat_map(|p| self.section(p).iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
    }

    /// Copy with values frozen after `B` and marks outside `B` dropped.
    pub fn canonical(&self) -> ProcessOnB {
        let per_path = (0..self.n_paths())
            .map(|p| (self.section(p).to_vec(), self.section_marks(p).to_vec()))
            .collect();
        ProcessOnB::from_section_values(&self.psit, per_path)
    }

    /// Pointwise map on `B`, keeping the jump marks.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> ProcessOnB {
        let per_path = (0..self.n_paths())
            .into_par_iter()
            .map(|p| (self.section(p).iter().map(|&x| f(x)).collect(), self.section_marks(p).to_vec()))
            .collect();
        ProcessOnB::from_section_values(&self.psit, per_path)
    }

    /// Pointwise combination on `B`; marks are the union of both marks.
    pub fn zip_with(&self, other: &ProcessOnB, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<ProcessOnB> {
        self.require_same_set(other)?;
        let per_path = (0..self.n_paths())
            .into_par_iter()
            .map(|p| {
                let v = self.section(p).iter().zip(other.section(p)).map(|(&a, &b)| f(a, b)).collect();
                (v, union_marks(self.section_marks(p), other.section_marks(p)))
            })
            .collect();
        Ok(ProcessOnB::from_section_values(&self.psit, per_path))
    }

    pub fn add(&self, other: &ProcessOnB) -> Result<ProcessOnB> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ProcessOnB) -> Result<ProcessOnB> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ProcessOnB) -> Result<ProcessOnB> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> ProcessOnB {
        self.map(|x| c * x)
    }

    /// `X - X_0 𝔍_B`.
    pub fn centered(&self) -> ProcessOnB {
        let per_path = (0..self.n_paths())
            .map(|p| {
                let s = self.section(p);
                (s.iter().map(|x| x - s[0]).collect(), self.section_marks(p).to_vec())
            })
            .collect();
        ProcessOnB::from_section_values(&self.psit, per_path)
    }

    /// Same process with the jump marks of each path replaced.
    pub fn with_marks(&self, marks: Vec<Vec<usize>>) -> Result<ProcessOnB> {
        if marks.len() != self.n_paths() {
            return Err(Error::invalid("one mark list per path is required"));
        }
        let per_path = marks
            .into_iter()
            .enumerate()
            .map(|(p, m)| {
                let mut m: Vec<usize> = m.into_iter().filter(|&k| k <= self.last_index(p)).collect();
                m.sort_unstable();
                m.dedup();
                if m.contains(&0) {
                    return Err(Error::invalid(format!("jump mark 0 on path {p}")));
                }
                Ok((self.section(p).to_vec(), m))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProcessOnB::from_section_values(&self.psit, per_path))
    }

    pub(crate) fn require_same_set(&self, other: &ProcessOnB) -> Result<()> {
        if self.psit.same_section(&other.psit) {
            Ok(())
        } else {
            Err(Error::invalid("processes live on different sets"))
        }
    }

    /// Restriction to a smaller set `B̃ ⊆ B`.
    pub fn restrict_to(&self, smaller: &Psit) -> Result<ProcessOnB> {
        if !smaller.is_subset_of(&self.psit) {
            return Err(Error::invalid("target set is not contained in the current set"));
        }
        restrict(&self.ensemble, smaller)
    }
}

pub(crate) fn union_marks(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// `𝔍_B X`: the restriction of a full-grid process to `B`.
pub fn restrict(x: &PathEnsemble, psit: &Psit) -> Result<ProcessOnB> {
    ProcessOnB::new(psit.clone(), x.clone()).map(|p| p.canonical())
}

fn check_on_b(x: &ProcessOnB, t: &StoppingTime) -> Result<()> {
    if t.n_paths() != x.n_paths() {
        return Err(Error::invalid("stopping time covers a different number of paths"));
    }
    let k = x.grid().steps();
    for p in 0..x.n_paths() {
        let tp = t.index(p).min(k);
        if tp > x.last_index(p) {
            return Err(Error::Precondition {
                path: p,
                detail: format!("stopping time {} leaves the set (last index {})", t.index(p), x.last_index(p)),
            });
        }
    }
    Ok(())
}

/// Stopped process `X^T`, frozen at `X_T` after `T`; marks after `T` dropped.
pub fn stop(x: &ProcessOnB, t: &StoppingTime) -> Result<PathEnsemble> {
    check_on_b(x, t)?;
    let grid = x.grid();
    let paths = (0..x.n_paths())
        .into_par_iter()
        .map(|p| {
            let tp = t.index(p).min(grid.steps());
            let v = x.ensemble.path(p).values();
            let mut values = v[..=tp].to_vec();
            values.resize(grid.len(), v[tp]);
            let marks = x.ensemble.path(p).jump_marks().iter().copied().filter(|&k| k <= tp).collect();
            SamplePath::from_parts(grid, values, marks)
        })
        .collect();
    Ok(PathEnsemble::from_parts(grid, paths))
}

/// Strictly stopped process `X^{T-}`, frozen at the left limit `X_T - ΔX_T`.
///
/// An unannotated increment at `T` is continuous motion and is kept, so without
/// a jump at `T` this coincides with [`stop`]. `X_{0-} = X_0`.
pub fn stop_strict(x: &ProcessOnB, t: &StoppingTime) -> Result<PathEnsemble> {
    check_on_b(x, t)?;
    let grid = x.grid();
    let paths = (0..x.n_paths())
        .into_par_iter()
        .map(|p| {
            let path = x.ensemble.path(p);
            let v = path.values();
            if t.index(p) > grid.steps() {
                return path.clone();
            }
            let tp = t.index(p);
            let pre = v[tp] - path.jump(tp);
            let mut values = v[..tp].to_vec();
            values.resize(grid.len(), pre);
            let marks = path.jump_marks().iter().copied().filter(|&k| k < tp).collect();
            SamplePath::from_parts(grid, values, marks)
        })
        .collect();
    Ok(PathEnsemble::from_parts(grid, paths))
}

/// A violation found by [`validate_cs`]. Term numbers are 1-based.
#[derive(Clone, Debug, PartialEq)]
pub enum CsViolation {
    Shape(String),
    NotIncreasing { n: usize, path: usize },
    NotCovering { path: usize, reach: usize, last: usize },
    Inconsistent { k: usize, l: usize, path: usize, index: usize },
}

impl fmt::Display for CsViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsViolation::Shape(msg) => write!(f, "{msg}"),
            CsViolation::NotIncreasing { n, path } => {
                write!(f, "T_{n} > T_{} on path {path}", n + 1)
            }
            CsViolation::NotCovering { path, reach, last } => {
                write!(f, "stopping times reach {reach} on path {path}, set extends to {last}")
            }
            CsViolation::Inconsistent { k, l, path, index } => {
                write!(f, "X_{k} and X_{l} differ on path {path} at index {index}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsReport {
    pub violations: Vec<CsViolation>,
}

impl CsReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Pairs `(T_n, X^(n))` with `X^(k) = X^(l)` on `B ∩ [0, T_k]` for `k <= l`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSequence {
    entries: Vec<(StoppingTime, PathEnsemble)>,
}

impl CoupledSequence {
    pub fn new(entries: Vec<(StoppingTime, PathEnsemble)>) -> Result<Self> {
        let Some((t0, x0)) = entries.first() else {
            return Err(Error::invalid("coupled sequence is empty"));
        };
        let (n, grid) = (x0.n_paths(), x0.grid());
        if entries
            .iter()
            .any(|(t, x)| t.n_paths() != n || x.n_paths() != n || x.grid() != grid)
            || t0.n_paths() != n
        {
            return Err(Error::invalid("coupled sequence entries have inconsistent shapes"));
        }
        Ok(CoupledSequence { entries })
    }

    /// `(τ_n, X^{τ_n})` for a process on `B` and an FS of `B`.
    pub fn from_process(x: &ProcessOnB, fs: &FundamentalSequence) -> Result<Self> {
        let entries = fs
            .terms()
            .iter()
            .map(|t| Ok((t.clone(), stop(x, t)?)))
            .collect::<Result<Vec<_>>>()?;
        CoupledSequence::new(entries)
    }

    pub fn entries(&self) -> &[(StoppingTime, PathEnsemble)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn times(&self, n: usize) -> &StoppingTime {
        &self.entries[n].0
    }

    pub fn process(&self, n: usize) -> &PathEnsemble {
        &self.entries[n].1
    }

    pub fn n_paths(&self) -> usize {
        self.entries[0].1.n_paths()
    }

    pub fn grid(&self) -> TimeGrid {
        self.entries[0].1.grid()
    }
}

pub fn validate_cs(cs: &CoupledSequence, psit: &Psit) -> CsReport {
    let mut violations = Vec::new();
    if cs.n_paths() != psit.n_paths() || cs.grid() != psit.grid() {
        violations.push(CsViolation::Shape("coupled sequence and set have different shapes".into()));
        return CsReport { violations };
    }
    let steps = psit.grid().steps();
    for n in 0..cs.len().saturating_sub(1) {
        for p in 0..psit.n_paths() {
            if cs.times(n).index(p) > cs.times(n + 1).index(p) {
                violations.push(CsViolation::NotIncreasing { n: n + 1, path: p });
            }
        }
    }
    let reach = cs.times(cs.len() - 1);
    for p in 0..psit.n_paths() {
        let r = reach.index(p).min(steps);
        if r < psit.last_index(p) {
            violations.push(CsViolation::NotCovering {
                path: p,
                reach: reach.index(p),
                last: psit.last_index(p),
            });
        }
    }
    // consecutive agreement implies agreement of every later pair on [0, T_k]
    for n in 0..cs.len().saturating_sub(1) {
        let (a, b) = (cs.process(n), cs.process(n + 1));
        for p in 0..psit.n_paths() {
            let upto = cs.times(n).index(p).min(steps).min(psit.last_index(p));
            let (pa, pb) = (a.path(p), b.path(p));
            let bad = (0..=upto).find(|&j| pa.values()[j] != pb.values()[j] || pa.is_jump(j) != pb.is_jump(j));
            if let Some(index) = bad {
                violations.push(CsViolation::Inconsistent {
                    k: n + 1,
                    l: n + 2,
                    path: p,
                    index,
                });
            }
        }
    }
    CsReport { violations }
}

/// Glues a coupled sequence into the process on `B` equal to `X^(n)` on
/// `B ∩ (T_{n-1}, T_n]` (with `T_0 = 0`) and to `X^(1)` at time 0.
pub fn glue(cs: &CoupledSequence, psit: &Psit) -> Result<ProcessOnB> {
    if let Some(v) = validate_cs(cs, psit).violations.into_iter().next() {
        return Err(Error::CoupledSequence(v));
    }
    let per_path = (0..psit.n_paths())
        .into_par_iter()
        .map(|p| {
            let last = psit.last_index(p);
            let mut values = Vec::with_capacity(last + 1);
            let mut marks = Vec::new();
            values.push(cs.process(0).path(p).values()[0]);
            let mut n = 0;
            for k in 1..=last {
                while cs.times(n).index(p) < k {
                    n += 1;
                }
                let src = cs.process(n).path(p);
                values.push(src.values()[k]);
                if src.is_jump(k) {
                    marks.push(k);
                }
            }
            (values, marks)
        })
        .collect();
    Ok(ProcessOnB::from_section_values(psit, per_path))
}

/// The default-bounded horizon `B = ⟦0,T⟧ ∩ ⟦0,τ⟦` and its switching times
/// `T_n = τ_n ∧ T`, with `(τ_n)` announcing `τ`.
pub fn psit_default_horizon(
    terminal: f64,
    tau: &StoppingTime,
    grid: TimeGrid,
) -> Result<(Psit, FundamentalSequence)> {
    let t_idx = grid
        .node_index(terminal)
        .filter(|&k| k > 0)
        .ok_or_else(|| Error::invalid(format!("terminal time {terminal} is not a positive grid node")))?;
    if let Some(p) = (0..tau.n_paths()).find(|&p| tau.index(p) == 0) {
        return Err(Error::invalid(format!("default at time 0 on path {p} leaves an empty section")));
    }
    let debut: Vec<usize> = tau.indices().iter().map(|&d| d.min(t_idx)).collect();
    let closed: Vec<bool> = tau.indices().iter().map(|&d| d > t_idx).collect();
    let psit = Psit::new(grid, debut.clone(), closed)?;
    let announcing = FundamentalSequence::announcing(tau, grid)?;
    let goal = psit.last_indices();
    let terms = build_terms(&goal, |p, n| announcing.term(n as usize).index(p).min(t_idx));
    let fs = FundamentalSequence::new(grid, terms, StoppingTime(debut))?;
    Ok((psit, fs))
}
