//! A generator wrapper that fails once at a chosen pipeline step.

use std::sync::atomic::{AtomicBool, Ordering};

use knowloop::generator::{GenerationRequest, GenerationResponse, GeneratorError, GeneratorIdentity, TextGenerator};

/// Answers garbage the first time it sees a prompt for `step`, then behaves
/// like `inner`.
pub struct FailOnce<G> {
    inner: G,
    marker: String,
    transient: bool,
    tripped: AtomicBool,
}

impl<G> FailOnce<G> {
    pub fn new(inner: G, step: u8, transient: bool) -> Self {
        Self { inner, marker: format!("pipeline-step: {step}\n"), transient, tripped: AtomicBool::new(false) }
    }
}

impl<G: TextGenerator> TextGenerator for FailOnce<G> {
    fn identity(&self) -> GeneratorIdentity {
        self.inner.identity()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, GeneratorError> {
        if request.prompt.starts_with(&self.marker) && !self.tripped.swap(true, Ordering::SeqCst) {
            if self.transient {
                return Err(GeneratorError::Transient("connection reset".into()));
            }
            return Ok(GenerationResponse { text: "Sure! Here are some ideas...".into(), generator: self.identity() });
        }
        self.inner.complete(request)
    }
}
