//! Batch experiments: SMROA recovery, completion grid, and rank-one ADMM.
//!
//! Trials run in parallel; each derives its RNG streams from
//! `(seed, trial index)`, so output does not depend on scheduling.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::completion::{fpc_complete, CompletionConfig};
use crate::decompose::{phase_aligned_distance, smroa, SmroaOptions};
use crate::error::{Error, Result};
use crate::instance::{generate_instance, trial_seed, GroundTruth, InstanceKind, InstanceSpec};
use crate::mask::{apply_mask, gen_ps_mask};
use crate::rank_one::{admm_conv1, is_rank_one_tensor, RelaxConfig, CERTIFY_TOL};

pub const RECOVERY_LAMBDA_TOL: f64 = 1e-8;
pub const RECOVERY_FACTOR_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRecord {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub r: usize,
    pub max_lambda_error: f64,
    pub max_factor_error: f64,
    pub ordered: bool,
    pub success: bool,
}

/// Runs SMROA on one instance and compares with its known factors.
pub fn recovery_trial(spec: &InstanceSpec, trial: usize) -> Result<RecoveryRecord> {
    let inst = generate_instance(spec)?;
    let GroundTruth::Matrix(truth) = &inst.truth else {
        return Err(Error::InvalidConfig(format!(
            "{} has no matrix factors",
            spec.kind
        )));
    };
    let (found, _) = smroa(
        &inst.tensor,
        SmroaOptions {
            max_terms: Some(spec.r),
            tol: 1e-12,
        },
    )?;
    let mut max_lambda_error: f64 = 0.0;
    let mut max_factor_error: f64 = 0.0;
    let complete = found.len() == truth.len();
    for (f, t) in found.factors.iter().zip(&truth.factors) {
        max_lambda_error = max_lambda_error.max((f.lambda - t.lambda).abs());
        max_factor_error = max_factor_error.max(phase_aligned_distance(&f.matrix, &t.matrix));
    }
    if !complete {
        max_lambda_error = f64::INFINITY;
        max_factor_error = f64::INFINITY;
    }
    let lambdas = found.lambdas();
    let ordered = lambdas.windows(2).all(|w| w[0].abs() >= w[1].abs());
    Ok(RecoveryRecord {
        trial,
        seed: spec.seed,
        n: spec.n,
        r: spec.r,
        max_lambda_error,
        max_factor_error,
        ordered,
        success: ordered
            && max_lambda_error <= RECOVERY_LAMBDA_TOL
            && max_factor_error <= RECOVERY_FACTOR_TOL,
    })
}

/// Real PS instances with `n = 3 + trial % 5`, three orthonormal factors.
pub fn run_recovery(trials: usize, seed: u64) -> Result<Vec<RecoveryRecord>> {
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let spec = InstanceSpec::new(
                InstanceKind::PsOrthonormal,
                3 + trial % 5,
                3,
                trial_seed(seed, trial as u64),
            );
            recovery_trial(&spec, trial)
        })
        .collect()
}

pub fn recovery_csv(records: &[RecoveryRecord]) -> String {
    let mut s = String::from("trial,seed,n,r,max_lambda_err,max_factor_err,ordered,success\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6e},{:.6e},{},{}",
            r.trial, r.seed, r.n, r.r, r.max_lambda_error, r.max_factor_error, r.ordered, r.success
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRecord {
    pub n: usize,
    pub r: usize,
    pub p: f64,
    pub trial: usize,
    pub seed: u64,
    pub observed_ratio: f64,
    pub err: f64,
    pub rank_m: usize,
    pub iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionCell {
    pub n: usize,
    pub r: usize,
    pub p: f64,
    pub trials: usize,
    pub mean_err: f64,
    pub max_rank_m: usize,
    /// Fraction of trials with `rank_m == 2r`.
    pub exact_rank_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Grid {
    pub ns: Vec<usize>,
    pub rs: Vec<usize>,
    pub ps: Vec<f64>,
    pub trials: usize,
}

impl Default for Table1Grid {
    fn default() -> Self {
        Self {
            ns: vec![10, 15],
            rs: vec![1, 2, 3],
            ps: vec![0.8, 0.5],
            trials: 20,
        }
    }
}

/// One completion trial: PS-pairs instance, orbit mask, FPC with defaults.
pub fn completion_trial(
    n: usize,
    r: usize,
    p: f64,
    trial: usize,
    seed: u64,
    cfg: &CompletionConfig,
) -> Result<CompletionRecord> {
    let inst = generate_instance(&InstanceSpec::new(InstanceKind::PsPairs, n, r, seed))?;
    let mask = gen_ps_mask(n, p, trial_seed(seed, u64::MAX))?;
    let observed = apply_mask(&inst.tensor, &mask)?;
    let (x, mut report) = fpc_complete(&observed, &mask, cfg)?;
    let err = report.evaluate(&x, &inst.tensor)?;
    Ok(CompletionRecord {
        n,
        r,
        p,
        trial,
        seed,
        observed_ratio: mask.ratio(),
        err,
        rank_m: report.rank_m_solution,
        iters: report.total_iterations(),
    })
}

pub fn run_table1(
    grid: &Table1Grid,
    seed: u64,
    cfg: &CompletionConfig,
) -> Result<Vec<CompletionRecord>> {
    let mut jobs = Vec::new();
    for &n in &grid.ns {
        for &r in &grid.rs {
            for &p in &grid.ps {
                for trial in 0..grid.trials {
                    let index = jobs.len() as u64;
                    jobs.push((n, r, p, trial, trial_seed(seed, index)));
                }
            }
        }
    }
    jobs.into_par_iter()
        .map(|(n, r, p, trial, s)| completion_trial(n, r, p, trial, s, cfg))
        .collect()
}

/// Per-cell aggregates, in first-appearance order.
pub fn summarize_table1(records: &[CompletionRecord]) -> Vec<CompletionCell> {
    let mut cells: Vec<CompletionCell> = Vec::new();
    for rec in records {
        if cells
            .iter()
            .any(|c| c.n == rec.n && c.r == rec.r && c.p == rec.p)
        {
            continue;
        }
        let group: Vec<&CompletionRecord> = records
            .iter()
            .filter(|x| x.n == rec.n && x.r == rec.r && x.p == rec.p)
            .collect();
        let k = group.len() as f64;
        cells.push(CompletionCell {
            n: rec.n,
            r: rec.r,
            p: rec.p,
            trials: group.len(),
            mean_err: group.iter().map(|x| x.err).sum::<f64>() / k,
            max_rank_m: group.iter().map(|x| x.rank_m).max().unwrap_or(0),
            exact_rank_fraction: group.iter().filter(|x| x.rank_m == 2 * x.r).count() as f64 / k,
        });
    }
    cells
}

pub fn table1_csv(records: &[CompletionRecord]) -> String {
    let mut s = String::from("n,r,p,trial,seed,observed_ratio,err,rank_m,iters\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.6},{:.6e},{},{}",
            r.n, r.r, r.p, r.trial, r.seed, r.observed_ratio, r.err, r.rank_m, r.iters
        );
    }
    s
}

pub fn table1_summary_csv(cells: &[CompletionCell]) -> String {
    let mut s = String::from("n,r,p,trials,mean_err,max_rank_m,exact_rank_fraction\n");
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6e},{},{:.3}",
            c.n, c.r, c.p, c.trials, c.mean_err, c.max_rank_m, c.exact_rank_fraction
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmRecord {
    pub trial: usize,
    pub seed: u64,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub nuclear_norm: f64,
    pub certified: bool,
    /// `X_[3,2;1,4]` has numerical rank one at [`CERTIFY_TOL`].
    pub rank_one: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmSummary {
    pub trials: usize,
    pub mean_iterations: f64,
    pub median_iterations: f64,
    pub certified_fraction: f64,
}

/// `T = sum_{i=1}^{r} a_i o a_i o conj(a_i) o conj(a_i)`, warm-started ADMM.
pub fn admm_trial(
    n: usize,
    r: usize,
    trial: usize,
    seed: u64,
    cfg: &RelaxConfig,
) -> Result<AdmmRecord> {
    let inst = generate_instance(&InstanceSpec::new(InstanceKind::CpsVectorSum, n, r, seed))?;
    let sol = admm_conv1(&inst.tensor, cfg)?;
    Ok(AdmmRecord {
        trial,
        seed,
        rho: sol.rho,
        iterations: sol.report.iterations,
        converged: sol.report.converged(),
        objective: sol.certification.objective,
        nuclear_norm: sol.certification.nuclear_norm_3214,
        certified: sol.certification.is_certified(),
        rank_one: is_rank_one_tensor(&sol.x, CERTIFY_TOL)?,
    })
}

pub fn run_rank1_admm(
    trials: usize,
    n: usize,
    r: usize,
    seed: u64,
    cfg: &RelaxConfig,
) -> Result<Vec<AdmmRecord>> {
    (0..trials)
        .into_par_iter()
        .map(|trial| admm_trial(n, r, trial, trial_seed(seed, trial as u64), cfg))
        .collect()
}

pub fn summarize_admm(records: &[AdmmRecord]) -> AdmmSummary {
    let k = records.len().max(1) as f64;
    let mut its: Vec<usize> = records.iter().map(|r| r.iterations).collect();
    its.sort_unstable();
    let median = match its.len() {
        0 => 0.0,
        m if m % 2 == 1 => its[m / 2] as f64,
        m => (its[m / 2 - 1] + its[m / 2]) as f64 / 2.0,
    };
    AdmmSummary {
        trials: records.len(),
        mean_iterations: its.iter().sum::<usize>() as f64 / k,
        median_iterations: median,
        certified_fraction: records.iter().filter(|r| r.certified).count() as f64 / k,
    }
}

pub fn admm_csv(records: &[AdmmRecord]) -> String {
    let mut s = String::from(
        "trial,seed,method,rho,iterations,converged,objective,nuclear_norm,certified,rank_one\n",
    );
    for r in records {
        let _ = writeln!(
            s,
            "{},{},admm,{:.10e},{},{},{:.10e},{:.10e},{},{}",
            r.trial,
            r.seed,
            r.rho,
            r.iterations,
            r.converged,
            r.objective,
            r.nuclear_norm,
            r.certified,
            r.rank_one
        );
    }
    s
}

pub fn admm_summary_csv(s: &AdmmSummary) -> String {
    format!(
        "trials,mean_iterations,median_iterations,certified_fraction\n{},{:.4},{:.1},{:.4}\n",
        s.trials, s.mean_iterations, s.median_iterations, s.certified_fraction
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovery_small_run() {
        let recs = run_recovery(5, 1).unwrap();
        assert_eq!(recs.len(), 5);
        assert!(recs.iter().all(|r| r.success));
        assert_eq!(
            recs.iter().map(|r| r.n).collect::<Vec<_>>(),
            vec![3, 4, 5, 6, 7]
        );
        let csv = recovery_csv(&recs);
        assert_eq!(csv.lines().count(), 6);
        assert_eq!(csv, recovery_csv(&run_recovery(5, 1).unwrap()));
    }

    #[test]
    fn admm_summary_median() {
        let rec = |it| AdmmRecord {
            trial: 0,
            seed: 0,
            rho: 1.0,
            iterations: it,
            converged: true,
            objective: -1.0,
            nuclear_norm: 1.0,
            certified: it < 30,
            rank_one: true,
        };
        let s = summarize_admm(&[rec(10), rec(40), rec(20), rec(30)]);
        assert_eq!(s.mean_iterations, 25.0);
        assert_eq!(s.median_iterations, 25.0);
        assert_eq!(s.certified_fraction, 0.5);
    }

    #[test]
    fn table1_summary_groups_cells() {
        let rec = |r, p, err, rank_m| CompletionRecord {
            n: 4,
            r,
            p,
            trial: 0,
            seed: 0,
            observed_ratio: p,
            err,
            rank_m,
            iters: 1,
        };
        let cells = summarize_table1(&[
            rec(1, 0.5, 1e-9, 2),
            rec(1, 0.5, 3e-9, 3),
            rec(2, 0.5, 1e-9, 4),
        ]);
        assert_eq!(cells.len(), 2);
        assert!((cells[0].mean_err - 2e-9).abs() < 1e-20);
        assert_eq!(cells[0].max_rank_m, 3);
        assert_eq!(cells[0].exact_rank_fraction, 0.5);
    }
}
