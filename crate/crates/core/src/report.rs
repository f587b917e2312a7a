use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Stopping criterion met.
    Converged,
    /// Requested number of terms or iterations reached.
    IterationLimit,
    /// Nothing to do: the input was zero.
    ZeroInput,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::IterationLimit => "iteration_limit",
            Termination::ZeroInput => "zero_input",
        })
    }
}

/// Iteration trace shared by all iterative solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    /// Objective value after each iteration (solver-specific meaning).
    pub objective: Vec<f64>,
    /// Residual or change measure after each iteration.
    pub residuals: Vec<f64>,
    pub termination: Termination,
    /// Set when the leading spectral gap was numerically zero at some step.
    pub degenerate_spectrum: bool,
    /// Accepted step parameters (PLMA `t_k`), empty for other solvers.
    pub step_sizes: Vec<f64>,
    /// Trial steps rejected by a line search.
    pub rejected_steps: usize,
    /// Trial steps where thresholding annihilated the iterate.
    pub annihilated_steps: usize,
}

impl SolverReport {
    pub(crate) fn new() -> Self {
        Self {
            iterations: 0,
            objective: Vec::new(),
            residuals: Vec::new(),
            termination: Termination::IterationLimit,
            degenerate_spectrum: false,
            step_sizes: Vec::new(),
            rejected_steps: 0,
            annihilated_steps: 0,
        }
    }

    pub(crate) fn record(&mut self, objective: f64, residual: f64) {
        self.iterations += 1;
        self.objective.push(objective);
        self.residuals.push(residual);
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}
