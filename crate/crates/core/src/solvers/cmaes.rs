//! (μ/μ_w, λ)-CMA-ES with cumulative step-size adaptation, box handling by
//! resampling and nearest-value decoding of discrete dimensions.
//!
//! The search runs in normalized coordinates where every active dimension
//! spans [0, 1]. Candidates are drawn sequentially from one seeded stream and
//! evaluated in parallel; results are collected in draw order, so a run is
//! fully determined by the seed.

use crate::linalg::{sym_eigen, Mat};
use crate::scalar::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum Dimension<T> {
    Continuous { lower: T, upper: T },
    /// Sorted candidate values; the genotype is decoded to the nearest one.
    Discrete { values: Vec<T> },
    Fixed(T),
}

impl<T: Real> Dimension<T> {
    fn range(&self) -> Option<(T, T)> {
        match self {
            Dimension::Continuous { lower, upper } if upper > lower => Some((*lower, *upper)),
            Dimension::Discrete { values } if values.len() > 1 => Some((values[0], values[values.len() - 1])),
            _ => None,
        }
    }

    fn fixed_value(&self) -> T {
        match self {
            Dimension::Continuous { lower, .. } => *lower,
            Dimension::Discrete { values } => values[0],
            Dimension::Fixed(v) => *v,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CmaesSettings<T> {
    pub dims: Vec<Dimension<T>>,
    /// Starting point in raw coordinates; box center when absent.
    pub x0: Option<Vec<T>>,
    /// Initial step as a fraction of the box width.
    pub sigma0: T,
    pub popsize: Option<usize>,
    pub tolfun: T,
    pub tolx: T,
    pub max_evals: usize,
    pub seed: u64,
    /// Additional IPOP runs, each with doubled population.
    pub restarts: usize,
}

impl<T: Real> CmaesSettings<T> {
    pub fn new(dims: Vec<Dimension<T>>) -> Self {
        CmaesSettings {
            dims,
            x0: None,
            sigma0: T::lit(0.3),
            popsize: None,
            tolfun: T::lit(1e-12),
            tolx: T::lit(1e-12),
            max_evals: 100_000,
            seed: 1,
            restarts: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TolFun,
    TolX,
    MaxEvals,
    ConditionCov,
    /// Nothing to search: every dimension is fixed or collapsed.
    NoFreeDimensions,
}

#[derive(Debug, Clone)]
pub struct CmaesResult<T> {
    /// Best point, decoded to raw coordinates (discrete values are catalog members).
    pub x: Vec<T>,
    pub f: T,
    pub evals: usize,
    pub generations: usize,
    pub stop: StopReason,
    /// Best-so-far value after each generation.
    pub best_history: Vec<T>,
}

impl<T> CmaesResult<T> {
    /// Stopped on a convergence criterion rather than the budget.
    pub fn converged(&self) -> bool {
        !matches!(self.stop, StopReason::MaxEvals)
    }
}

struct Space<'a, T> {
    dims: &'a [Dimension<T>],
    active: Vec<usize>,
}

impl<T: Real> Space<'_, T> {
    fn decode(&self, y: &[T]) -> Vec<T> {
        let mut x: Vec<T> = self.dims.iter().map(|d| d.fixed_value()).collect();
        for (k, &i) in self.active.iter().enumerate() {
            let (lo, hi) = self.dims[i].range().unwrap();
            let raw = lo + y[k].max(T::zero()).min(T::one()) * (hi - lo);
            x[i] = match &self.dims[i] {
                Dimension::Discrete { values } => nearest(values, raw),
                _ => raw,
            };
        }
        x
    }

    fn has_discrete(&self) -> bool {
        self.active.iter().any(|&i| matches!(self.dims[i], Dimension::Discrete { .. }))
    }

    /// Keeps every discrete coordinate's standard deviation large enough that
    /// a sample leaves the mean's catalog cell with probability of about 2%
    /// per side. Without it the step size collapses once the mean sits inside
    /// a cell and neighbouring members are never tried again.
    fn apply_margin(&self, mean: &[T], sigma: T, c: &mut Mat<T>) {
        let z = T::two();
        for (k, &i) in self.active.iter().enumerate() {
            let Dimension::Discrete { values } = &self.dims[i] else { continue };
            let (lo, hi) = self.dims[i].range().unwrap();
            let raw = lo + mean[k] * (hi - lo);
            let v = nearest(values, raw);
            let mut gap = T::infinity();
            for &u in values {
                if u != v {
                    gap = gap.min(((u + v) * T::half() - raw).abs());
                }
            }
            if !gap.is_finite() {
                continue;
            }
            let floor = gap / (hi - lo) / z;
            let sd = sigma * c[(k, k)].max(T::zero()).sqrt();
            if sd == T::zero() {
                c[(k, k)] = (floor / sigma).powi(2);
            } else if sd < floor {
                let f = floor / sd;
                for j in 0..c.cols() {
                    c[(k, j)] *= f;
                    c[(j, k)] *= f;
                }
            }
        }
    }

    fn encode(&self, x: &[T]) -> Vec<T> {
        self.active
            .iter()
            .map(|&i| {
                let (lo, hi) = self.dims[i].range().unwrap();
                ((x[i] - lo) / (hi - lo)).max(T::zero()).min(T::one())
            })
            .collect()
    }
}

fn nearest<T: Real>(values: &[T], v: T) -> T {
    let mut best = values[0];
    for &c in values {
        if (c - v).abs() < (best - v).abs() {
            best = c;
        }
    }
    best
}

fn eval_all<T: Real, F: Fn(&[T]) -> T + Sync>(f: &F, xs: &[Vec<T>]) -> Vec<T> {
    xs.par_iter()
        .map(|x| {
            let v = f(x);
            if v.is_nan() {
                T::infinity()
            } else {
                v
            }
        })
        .collect()
}

/// Minimizes `f` over the box/catalog domain described by `settings`.
pub fn cmaes_minimize<T: Real, F: Fn(&[T]) -> T + Sync>(f: F, settings: &CmaesSettings<T>) -> CmaesResult<T> {
    let space = Space { dims: &settings.dims, active: (0..settings.dims.len()).filter(|&i| settings.dims[i].range().is_some()).collect() };
    let n = space.active.len();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let y0 = match &settings.x0 {
        Some(x0) => space.encode(x0),
        None => vec![T::half(); n],
    };
    if n == 0 {
        let x = space.decode(&[]);
        let v = eval_all(&f, std::slice::from_ref(&x))[0];
        return CmaesResult { x, f: v, evals: 1, generations: 0, stop: StopReason::NoFreeDimensions, best_history: vec![v] };
    }
    let base_lambda = settings.popsize.unwrap_or(4 + (3.0 * (n as f64).ln()).floor() as usize).max(2);
    let mut best: Option<(T, Vec<T>)> = None;
    let mut evals = 0;
    let mut generations = 0;
    let mut history = Vec::new();
    let mut stop = StopReason::MaxEvals;
    for run in 0..=settings.restarts {
        if evals >= settings.max_evals {
            stop = StopReason::MaxEvals;
            break;
        }
        let lambda = base_lambda << run;
        let start = if run == 0 {
            y0.clone()
        } else {
            let u = Uniform::new(0.0f64, 1.0).expect("valid range");
            (0..n).map(|_| T::lit(u.sample(&mut rng))).collect()
        };
        let out = run_once(&f, &space, settings, start, lambda, &mut rng, &mut evals, &mut best, &mut history);
        generations += out.0;
        stop = out.1;
    }
    let (fbest, ybest) = best.expect("at least one evaluation");
    CmaesResult { x: space.decode(&ybest), f: fbest, evals, generations, stop, best_history: history }
}

#[allow(clippy::too_many_arguments)]
fn run_once<T: Real, F: Fn(&[T]) -> T + Sync>(
    f: &F,
    space: &Space<'_, T>,
    set: &CmaesSettings<T>,
    start: Vec<T>,
    lambda: usize,
    rng: &mut ChaCha8Rng,
    evals: &mut usize,
    best: &mut Option<(T, Vec<T>)>,
    history: &mut Vec<T>,
) -> (usize, StopReason) {
    let n = start.len();
    let nf = T::from_usize(n);
    let mu = lambda / 2;
    let raw_w: Vec<T> = (0..mu)
        .map(|i| (T::from_usize(mu) + T::half()).ln() - T::from_usize(i + 1).ln())
        .collect();
    let wsum: T = raw_w.iter().copied().sum();
    let w: Vec<T> = raw_w.iter().map(|&v| v / wsum).collect();
    let mueff = T::one() / w.iter().map(|&v| v * v).sum::<T>();
    let two = T::two();
    let cs = (mueff + two) / (nf + mueff + T::lit(5.0));
    let ds = T::one() + two * (((mueff - T::one()) / (nf + T::one())).sqrt() - T::one()).max(T::zero()) + cs;
    let cc = (T::lit(4.0) + mueff / nf) / (nf + T::lit(4.0) + two * mueff / nf);
    let c1 = two / ((nf + T::lit(1.3)).powi(2) + mueff);
    let cmu = (T::one() - c1)
        .min(two * (mueff - two + T::one() / mueff) / ((nf + two).powi(2) + mueff));
    let chin = nf.sqrt() * (T::one() - T::one() / (T::lit(4.0) * nf) + T::one() / (T::lit(21.0) * nf * nf));
    let hist_len = 10 + (30.0 * n as f64 / lambda as f64).ceil() as usize;

    let mut mean = start;
    let mut sigma = set.sigma0;
    let mut c = Mat::<T>::identity(n);
    let mut b = Mat::<T>::identity(n);
    let mut d = vec![T::one(); n];
    let mut pc = vec![T::zero(); n];
    let mut ps = vec![T::zero(); n];
    let mut gen_best: Vec<T> = Vec::new();
    let mut gens = 0;

    loop {
        if *evals >= set.max_evals {
            return (gens, StopReason::MaxEvals);
        }
        // sample
        let mut ys = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let mut cand = None;
            for _ in 0..100 {
                let z: Vec<T> = (0..n).map(|_| T::lit(StandardNormal.sample(rng))).collect();
                let mut y = vec![T::zero(); n];
                for i in 0..n {
                    let mut s = T::zero();
                    for j in 0..n {
                        s += b[(i, j)] * d[j] * z[j];
                    }
                    y[i] = mean[i] + sigma * s;
                }
                if y.iter().all(|&v| v >= T::zero() && v <= T::one()) {
                    cand = Some(y);
                    break;
                }
                cand = Some(y);
            }
            let y: Vec<T> = cand.unwrap().into_iter().map(|v| v.max(T::zero()).min(T::one())).collect();
            ys.push(y);
        }
        let xs: Vec<Vec<T>> = ys.iter().map(|y| space.decode(y)).collect();
        let fs = eval_all(f, &xs);
        *evals += lambda;
        gens += 1;
        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&i, &j| fs[i].total_cmp_real(fs[j]));
        let (fb, yb) = (fs[order[0]], &ys[order[0]]);
        if best.as_ref().is_none_or(|(bf, _)| fb < *bf) {
            *best = Some((fb, yb.clone()));
        }
        history.push(best.as_ref().unwrap().0);
        gen_best.push(fb);

        // recombination
        let old = mean.clone();
        mean = vec![T::zero(); n];
        for (k, &i) in order.iter().take(mu).enumerate() {
            for j in 0..n {
                mean[j] += w[k] * ys[i][j];
            }
        }
        let step: Vec<T> = (0..n).map(|j| (mean[j] - old[j]) / sigma).collect();
        // C^{-1/2} step = B D^{-1} Bᵀ step
        let bt = b.tr_mul_vec(&step);
        let scaled: Vec<T> = (0..n).map(|j| bt[j] / d[j]).collect();
        let cinv = b.mul_vec(&scaled);
        let fac = (cs * (two - cs) * mueff).sqrt();
        for j in 0..n {
            ps[j] = (T::one() - cs) * ps[j] + fac * cinv[j];
        }
        let psn = crate::linalg::norm2(&ps);
        let denom = (T::one() - (T::one() - cs).powi(2 * gens as i32)).sqrt();
        let hsig = psn / denom / chin < T::lit(1.4) + two / (nf + T::one());
        let facc = (cc * (two - cc) * mueff).sqrt();
        for j in 0..n {
            pc[j] = (T::one() - cc) * pc[j] + if hsig { facc * step[j] } else { T::zero() };
        }
        let dh = if hsig { T::zero() } else { cc * (two - cc) };
        let mut cn = Mat::zeros(n, n);
        for r in 0..n {
            for s in 0..n {
                let mut rank_mu = T::zero();
                for (k, &i) in order.iter().take(mu).enumerate() {
                    let yr = (ys[i][r] - old[r]) / sigma;
                    let ys_ = (ys[i][s] - old[s]) / sigma;
                    rank_mu += w[k] * yr * ys_;
                }
                cn[(r, s)] = (T::one() - c1 - cmu) * c[(r, s)] + c1 * (pc[r] * pc[s] + dh * c[(r, s)]) + cmu * rank_mu;
            }
        }
        // symmetrize against round-off
        for r in 0..n {
            for s in 0..r {
                let v = T::half() * (cn[(r, s)] + cn[(s, r)]);
                cn[(r, s)] = v;
                cn[(s, r)] = v;
            }
        }
        c = cn;
        sigma *= ((cs / ds) * (psn / chin - T::one())).exp();
        sigma = sigma.min(T::lit(2.0));
        space.apply_margin(&mean, sigma, &mut c);
        let (vals, vecs) = sym_eigen(&c);
        b = vecs;
        d = vals.iter().map(|&v| v.max(T::epsilon() * T::epsilon()).sqrt()).collect();

        // termination
        let frange = fs[order[lambda - 1]] - fs[order[0]];
        if gen_best.len() >= hist_len {
            let recent = &gen_best[gen_best.len() - hist_len..];
            let hmax = recent.iter().copied().fold(T::neg_infinity(), T::max);
            let hmin = recent.iter().copied().fold(T::infinity(), T::min);
            // the margin keeps discrete samples hopping cells, so only the
            // best-of-generation history can settle there
            if (frange < set.tolfun || space.has_discrete()) && hmax - hmin < set.tolfun {
                return (gens, StopReason::TolFun);
            }
        } else if frange == T::zero() && gens > 1 && fs[order[0]].is_finite() && gen_best.iter().all(|&v| v == fb) {
            // flat landscape (all candidates decode to one point)
            return (gens, StopReason::TolFun);
        }
        let max_sd = (0..n).map(|i| c[(i, i)].sqrt()).fold(T::zero(), T::max);
        if sigma * max_sd < set.tolx && pc.iter().all(|&v| (sigma * v).abs() < set.tolx) {
            return (gens, StopReason::TolX);
        }
        let dmax = d.iter().copied().fold(T::zero(), T::max);
        let dmin = d.iter().copied().fold(T::infinity(), T::min);
        if dmax / dmin > T::lit(1e7) {
            return (gens, StopReason::ConditionCov);
        }
    }
}

trait TotalCmp {
    fn total_cmp_real(self, other: Self) -> std::cmp::Ordering;
}

impl<T: Real> TotalCmp for T {
    fn total_cmp_real(self, other: Self) -> std::cmp::Ordering {
        self.partial_cmp(&other).unwrap_or(std::cmp::Ordering::Equal)
    }
}
