//! Randomized search for pairs that violate the sharp inequality.
//!
//! Every trial draws an independent tree from its own stream, so the report
//! does not depend on how trials are scheduled across threads.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constant::ConstantSolver;
use crate::error::{Error, Result};
use crate::martingale::{MartingalePair, PairBuilder, PsiStats};
use crate::params::ProblemParams;
use crate::surface::Surface;

pub const MAX_DEPTH: usize = 16;
const SPLIT_PROBABILITY: f64 = 0.7;
const SPREAD_DECAY: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversaryReport {
    pub p: f64,
    pub tau: f64,
    pub seed: u64,
    pub trials: u64,
    pub max_depth: usize,
    /// Largest `Psi / (C_power(beta_eff) E|F|^p)` seen.
    pub max_ratio: f64,
    pub argmax_trial: u64,
    pub argmax_tree_digest: String,
    /// Largest `(Psi - H(EF, EG, E|F|^p)) / max(1, Psi)`.
    pub max_majorization_excess: f64,
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    trial: u64,
    ratio: f64,
    excess: f64,
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) { 1.0 } else { -1.0 }
}

/// Draws one random tree from `(seed, trial)`.
pub fn random_pair(seed: u64, trial: u64, max_depth: usize) -> MartingalePair {
    let mut rng = trial_rng(seed, trial);
    let f0 = random_sign(&mut rng) * rng.random_range(0.2..2.0);
    let g0 = if rng.random_bool(0.25) {
        random_sign(&mut rng) * f0
    } else {
        random_sign(&mut rng) * rng.random_range(0.0..3.0) * f0.abs()
    };
    let mut b = PairBuilder::new();
    let root = grow(&mut b, &mut rng, f0, g0, 0, max_depth, f0.abs());
    b.finish(root)
}

fn grow(
    b: &mut PairBuilder,
    rng: &mut ChaCha8Rng,
    f: f64,
    g: f64,
    depth: usize,
    max_depth: usize,
    scale: f64,
) -> usize {
    if depth >= max_depth || !rng.random_bool(SPLIT_PROBABILITY) {
        return b.leaf(f, g);
    }
    let alpha = rng.random_range(0.1..0.9);
    let d = scale * SPREAD_DECAY.powi(depth as i32) * rng.random_range(0.1..2.0) * random_sign(rng);
    let sigma = random_sign(rng);
    let l = grow(
        b,
        rng,
        f + (1.0 - alpha) * d,
        g + (1.0 - alpha) * sigma * d,
        depth + 1,
        max_depth,
        scale,
    );
    let r = grow(
        b,
        rng,
        f - alpha * d,
        g - alpha * sigma * d,
        depth + 1,
        max_depth,
        scale,
    );
    b.split(alpha, l, r)
}

/// `Psi / (C_power(|EG|/|EF|) E|F|^p)`, zero when the constant is infinite.
pub fn certificate_ratio(solver: &ConstantSolver, m: &PsiStats) -> Result<f64> {
    if m.ef == 0.0 || m.efp == 0.0 {
        return Ok(0.0);
    }
    let beta = m.eg.abs() / m.ef.abs();
    let c = solver.c_power(beta)?;
    if !c.is_finite() {
        return Ok(0.0);
    }
    Ok(m.psi / (c * m.efp))
}

fn majorization_excess(surface: &Surface, m: &PsiStats) -> Result<f64> {
    let h = surface.h(m.ef, m.eg, m.efp)?;
    Ok((m.psi - h) / m.psi.max(1.0))
}

fn run_trial(
    surface: &Surface,
    solver: &ConstantSolver,
    seed: u64,
    trial: u64,
    max_depth: usize,
) -> Result<TrialOutcome> {
    let pair = random_pair(seed, trial, max_depth);
    let m = pair.psi(surface.params());
    Ok(TrialOutcome {
        trial,
        ratio: certificate_ratio(solver, &m)?,
        excess: majorization_excess(surface, &m)?,
    })
}

/// Runs `n_trials` random trees and reports the worst ratio.
pub fn random_adversary(
    params: &ProblemParams,
    seed: u64,
    n_trials: u64,
    max_depth: usize,
) -> Result<AdversaryReport> {
    let surface = Surface::build(params)?;
    let solver = ConstantSolver::new(params)?;
    random_adversary_with(&surface, &solver, seed, n_trials, max_depth)
}

/// As [`random_adversary`], reusing a built surface and constant solver.
pub fn random_adversary_with(
    surface: &Surface,
    solver: &ConstantSolver,
    seed: u64,
    n_trials: u64,
    max_depth: usize,
) -> Result<AdversaryReport> {
    if max_depth > MAX_DEPTH {
        return Err(Error::Domain(format!(
            "max_depth = {max_depth} exceeds {MAX_DEPTH}"
        )));
    }
    let outcomes: Vec<TrialOutcome> = (0..n_trials)
        .into_par_iter()
        .map(|t| run_trial(surface, solver, seed, t, max_depth))
        .collect::<Result<_>>()?;

    let mut best = TrialOutcome {
        trial: 0,
        ratio: f64::NEG_INFINITY,
        excess: f64::NEG_INFINITY,
    };
    let mut max_excess = f64::NEG_INFINITY;
    for o in &outcomes {
        if o.ratio > best.ratio {
            best = *o;
        }
        max_excess = max_excess.max(o.excess);
    }
    let digest = if n_trials == 0 {
        String::new()
    } else {
        random_pair(seed, best.trial, max_depth).digest()
    };
    let params = surface.params();
    Ok(AdversaryReport {
        p: params.p(),
        tau: params.tau(),
        seed,
        trials: n_trials,
        max_depth,
        max_ratio: if n_trials == 0 { 0.0 } else { best.ratio },
        argmax_trial: best.trial,
        argmax_tree_digest: digest,
        max_majorization_excess: if n_trials == 0 { 0.0 } else { max_excess },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HillClimbReport {
    pub iterations: usize,
    pub accepted: usize,
    /// `Psi - H` at the moment point before and after.
    pub start: f64,
    pub best: f64,
}

/// Greedy random leaf refinements, kept when they raise `Psi - H(EF, EG, E|F|^p)`.
pub fn hill_climb(
    surface: &Surface,
    pair: &MartingalePair,
    seed: u64,
    iterations: usize,
) -> Result<(MartingalePair, HillClimbReport)> {
    let params = surface.params();
    let objective = |pair: &MartingalePair| -> Result<f64> {
        let m = pair.psi(params);
        Ok(m.psi - surface.h(m.ef, m.eg, m.efp)?)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = pair.clone();
    let start = objective(&current)?;
    let mut best = start;
    let mut accepted = 0;
    for _ in 0..iterations {
        let leaves = current.leaf_indices();
        let idx = leaves[rng.random_range(0..leaves.len())];
        let scale = match current.nodes()[idx] {
            crate::martingale::Node::Leaf { f, g } => f.abs().max(g.abs()).max(1e-3),
            _ => unreachable!("leaf_indices returns leaves"),
        };
        let alpha = rng.random_range(0.1..0.9);
        let d = scale * rng.random_range(1e-3..0.5) * random_sign(&mut rng);
        let sigma = random_sign(&mut rng);
        let mut trial = current.clone();
        trial.refine_leaf(idx, alpha, d, sigma)?;
        let value = objective(&trial)?;
        if value > best {
            best = value;
            current = trial;
            accepted += 1;
        }
    }
    Ok((
        current,
        HillClimbReport {
            iterations,
            accepted,
            start,
            best,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremizer::vertical_extremizer;

    #[test]
    fn random_pairs_are_admissible() {
        for t in 0..200 {
            random_pair(7, t, 10).validate().unwrap();
        }
    }

    #[test]
    fn seeded_rerun_is_identical() {
        let q = ProblemParams::new(1.5, 1.0).unwrap();
        let a = random_adversary(&q, 11, 300, 8).unwrap();
        let b = random_adversary(&q, 11, 300, 8).unwrap();
        assert_eq!(a, b);
        let c = random_adversary(&q, 12, 300, 8).unwrap();
        assert_ne!(a.argmax_tree_digest, c.argmax_tree_digest);
    }

    #[test]
    fn ratio_stays_below_one() {
        for (p, tau) in [(1.5, 1.0), (1.5, 3.0)] {
            let q = ProblemParams::new(p, tau).unwrap();
            let r = random_adversary(&q, 3, 2000, 10).unwrap();
            assert!(r.max_ratio <= 1.0 + 1e-9, "{r:?}");
            assert!(r.max_majorization_excess <= 1e-8, "{r:?}");
            assert!(r.max_ratio > 0.0);
        }
    }

    #[test]
    fn depth_cap_enforced() {
        let q = ProblemParams::new(1.5, 1.0).unwrap();
        assert!(random_adversary(&q, 1, 10, 17).is_err());
        let empty = random_adversary(&q, 1, 0, 4).unwrap();
        assert_eq!(empty.max_ratio, 0.0);
    }

    #[test]
    fn hill_climb_cannot_beat_extremizer() {
        let q = ProblemParams::new(1.5, 1.0).unwrap();
        let s = Surface::build(&q).unwrap();
        let eps = 1e-2;
        let (pair, _) = vertical_extremizer(&s, 10.0, eps).unwrap();
        let (out, rep) = hill_climb(&s, &pair, 5, 60).unwrap();
        out.validate().unwrap();
        let scale = s.b(-1.0, 10.0).unwrap();
        assert!(rep.best - rep.start <= eps * scale, "{rep:?}");
        assert!(rep.best <= 1e-8 * scale);
    }
}
