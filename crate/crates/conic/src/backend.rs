//! Pluggable solver backends. Each backend is registered under a name and
//! selected at runtime (config/CLI `backend` key).

use std::collections::HashMap;
use std::sync::Arc;

use crate::program::ConicProgram;
use crate::solution::{ConicSolution, SolveError};

pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, program: &ConicProgram, tol: f64) -> Result<ConicSolution, SolveError>;
}

#[derive(Clone)]
pub struct BackendRegistry {
    backends: HashMap<String, Arc<dyn SolverBackend>>,
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self {
            backends: HashMap::new(),
        }
    }

    /// Registry with every built-in backend registered.
    pub fn with_defaults() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(crate::clarabel_backend::ClarabelBackend::default()));
        reg
    }

    pub fn register(&mut self, backend: Arc<dyn SolverBackend>) {
        self.backends.insert(backend.name().to_string(), backend);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SolverBackend>, SolveError> {
        self.backends
            .get(name)
            .cloned()
            .ok_or_else(|| SolveError::UnknownBackend(name.to_string()))
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.backends.keys().cloned().collect();
        v.sort();
        v
    }
}

impl ConicProgram {
    /// Validate and solve with the named backend.
    pub fn solve_with(
        &self,
        registry: &BackendRegistry,
        backend: &str,
        tol: f64,
    ) -> Result<ConicSolution, SolveError> {
        self.validate()?;
        registry.get(backend)?.solve(self, tol)
    }

    /// Validate and solve with the default backend.
    pub fn solve(&self, tol: f64) -> Result<ConicSolution, SolveError> {
        self.solve_with(&BackendRegistry::with_defaults(), "clarabel", tol)
    }
}
