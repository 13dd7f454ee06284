/// Outcome of a duty-cycle check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetDecision {
    Accept,
    Reject,
}

/// Actuation time used by each agent and the elapsed episode time.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuationBudget {
    pub used_s: Vec<f64>,
    pub elapsed_s: f64,
    pub cap: f64,
}

impl ActuationBudget {
    pub fn new(agents: usize, cap: f64) -> Self {
        Self { used_s: vec![0.0; agents], elapsed_s: 0.0, cap }
    }

    pub fn reset(&mut self) {
        self.used_s.iter_mut().for_each(|u| *u = 0.0);
        self.elapsed_s = 0.0;
    }

    /// Advances the clock by one decision interval; call once per step before checking.
    pub fn tick(&mut self, dt_s: f64) {
        self.elapsed_s += dt_s;
    }

    /// Decides whether `agent` may spend `required_s` of actuation now.
    ///
    /// Accepted when the request is free, when it is the agent's first
    /// actuation of the episode, or when `(used + required) / elapsed ≤ cap`.
    pub fn check(&self, agent: usize, required_s: f64) -> BudgetDecision {
        let used = self.used_s[agent];
        if required_s <= 0.0 || used == 0.0 || (used + required_s) <= self.cap * self.elapsed_s {
            BudgetDecision::Accept
        } else {
            BudgetDecision::Reject
        }
    }

    pub fn charge(&mut self, agent: usize, required_s: f64) {
        self.used_s[agent] += required_s.max(0.0);
    }

    /// Fraction of the elapsed time `agent` spent actuating.
    pub fn fraction(&self, agent: usize) -> f64 {
        if self.elapsed_s > 0.0 {
            self.used_s[agent] / self.elapsed_s
        } else {
            0.0
        }
    }
}

/// Standalone form of [`ActuationBudget::check`].
pub fn actuation_budget_check(budget: &ActuationBudget, agent: usize, required_s: f64) -> BudgetDecision {
    budget.check(agent, required_s)
}
