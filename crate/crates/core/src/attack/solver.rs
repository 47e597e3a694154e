// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use super::cnf::ClauseSink;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveResult {
    Sat,
    Unsat,
    /// Stopped by the deadline or a resource limit.
    Interrupted,
}

/// Incremental SAT back end: clauses, solving under assumptions, models.
pub trait SatBackend: ClauseSink {
    fn solve(&mut self, assumptions: &[i32]) -> SolveResult;
    /// Value of `lit` in the last model; unconstrained literals read false.
    fn value(&self, lit: i32) -> bool;
}

struct Deadline(Option<Instant>);

impl cadical::Callbacks for Deadline {
    fn terminate(&mut self) -> bool {
        self.0.is_some_and(|d| Instant::now() >= d)
    }
}

/// CaDiCaL through the `cadical` bindings.
pub struct Cadical {
    solver: cadical::Solver<Deadline>,
    vars: i32,
    deadline: Option<Instant>,
}

impl Cadical {
    pub fn new(deadline: Option<Instant>) -> Self {
        let mut solver = cadical::Solver::new();
        solver.set_callbacks(Some(Deadline(deadline)));
        Self {
            solver,
            vars: 0,
            deadline,
        }
    }
}

impl Default for Cadical {
    fn default() -> Self {
        Self::new(None)
    }
}

impl ClauseSink for Cadical {
    fn new_var(&mut self) -> i32 {
        self.vars += 1;
        self.vars
    }

    fn add_clause(&mut self, lits: &[i32]) {
        self.solver.add_clause(lits.iter().copied());
    }
}

impl SatBackend for Cadical {
    fn solve(&mut self, assumptions: &[i32]) -> SolveResult {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return SolveResult::Interrupted;
        }
        // variables that never occur in a clause must still be readable
        self.solver.reserve(self.vars);
        match self.solver.solve_with(assumptions.iter().copied()) {
            Some(true) => SolveResult::Sat,
            Some(false) => SolveResult::Unsat,
            None => SolveResult::Interrupted,
        }
    }

    fn value(&self, lit: i32) -> bool {
        self.solver.value(lit).unwrap_or(false)
    }
}
