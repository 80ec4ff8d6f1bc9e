//! Bounded Nelder-Mead with random restarts on the unit hypercube.
//!
//! Candidate points are projected onto `[0, 1]^d`; callers map the cube onto their box.
//! The search restarts around the best point whenever the simplex collapses or stops
//! improving, with a randomly sized and oriented fresh simplex.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    /// Maximum objective evaluations, including the initial point.
    pub budget: usize,
    /// Edge length of the first simplex in unit coordinates.
    pub initial_step: f64,
    /// Restart after this many iterations without improving the best value.
    pub stall_iterations: usize,
    /// Restart when the simplex's largest coordinate spread falls below this.
    pub min_diameter: f64,
    /// Seeds restart geometry only; the objective is the caller's.
    pub seed: u64,
}

impl SearchOptions {
    pub fn with_budget(budget: usize) -> Self {
        Self {
            budget,
            initial_step: 0.1,
            stall_iterations: 60,
            min_diameter: 1e-4,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub evaluations: usize,
    pub restarts: usize,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Budgeted<F> {
    f: F,
    used: usize,
    budget: usize,
    best_x: Vec<f64>,
    best_f: f64,
}

impl<F: FnMut(&[f64]) -> f64> Budgeted<F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.used >= self.budget {
            return None;
        }
        self.used += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < self.best_f {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        Some(v)
    }
}

fn project(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t * (b - a), projected.
    let mut out: Vec<f64> = a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect();
    project(&mut out);
    out
}

pub fn minimize<F>(f: F, x0: &[f64], options: &SearchOptions) -> SearchOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let mut start = x0.to_vec();
    project(&mut start);
    let mut obj = Budgeted {
        f,
        used: 0,
        budget: options.budget,
        best_x: start.clone(),
        best_f: f64::INFINITY,
    };
    let initial_value = match obj.eval(&start) {
        Some(v) => v,
        None => {
            return SearchOutcome {
                x: start,
                value: f64::INFINITY,
                initial_value: f64::INFINITY,
                evaluations: 0,
                restarts: 0,
            }
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut restarts = 0;
    if d > 0 {
        let _ = run(&mut obj, options, &mut rng, &mut restarts);
    }
    SearchOutcome {
        x: obj.best_x,
        value: obj.best_f,
        initial_value,
        evaluations: obj.used,
        restarts,
    }
}

/// Runs until the budget is exhausted (signalled by `None`).
fn run<F: FnMut(&[f64]) -> f64>(
    obj: &mut Budgeted<F>,
    options: &SearchOptions,
    rng: &mut ChaCha8Rng,
    restarts: &mut usize,
) -> Option<()> {
    let d = obj.best_x.len();
    let mut first = true;
    loop {
        let center = obj.best_x.clone();
        let center_f = obj.best_f;
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![(center.clone(), center_f)];
        for i in 0..d {
            let (step, sign) = if first {
                (options.initial_step, 1.0)
            } else {
                let s = rng.random_range(0.2..1.5) * options.initial_step;
                (s, if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            };
            let mut x = center.clone();
            let moved = x[i] + sign * step;
            x[i] = if (0.0..=1.0).contains(&moved) {
                moved
            } else {
                x[i] - sign * step
            };
            project(&mut x);
            let fx = obj.eval(&x)?;
            simplex.push((x, fx));
        }
        first = false;

        let mut stall = 0;
        let mut best_seen = obj.best_f;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let diameter = simplex
                .iter()
                .skip(1)
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if diameter < options.min_diameter || stall >= options.stall_iterations {
                *restarts += 1;
                break;
            }

            let mut centroid = vec![0.0; d];
            for (x, _) in &simplex[..d] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / d as f64;
                }
            }
            let (worst_x, worst_f) = simplex[d].clone();
            let second_worst_f = simplex[d - 1.min(d)].1;
            let best_f = simplex[0].1;

            let xr = affine(&centroid, &worst_x, -REFLECT);
            let fr = obj.eval(&xr)?;
            if fr < best_f {
                let xe = affine(&centroid, &xr, EXPAND);
                let fe = obj.eval(&xe)?;
                simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < second_worst_f {
                simplex[d] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst_f {
                    let xc = affine(&centroid, &xr, CONTRACT);
                    let fc = obj.eval(&xc)?;
                    (xc, fc)
                } else {
                    let xc = affine(&centroid, &worst_x, CONTRACT);
                    let fc = obj.eval(&xc)?;
                    (xc, fc)
                };
                if fc < fr.min(worst_f) {
                    simplex[d] = (xc, fc);
                } else {
                    let best_x = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let x = affine(&best_x, &vertex.0, SHRINK);
                        let fx = obj.eval(&x)?;
                        *vertex = (x, fx);
                    }
                }
            }

            if obj.best_f < best_seen {
                best_seen = obj.best_f;
                stall = 0;
            } else {
                stall += 1;
            }
        }
    }
}
