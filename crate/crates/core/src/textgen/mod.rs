//! Question, query, reverse and repair generation behind one interface.

mod mock;
pub mod nl;
mod prompt;
mod reform;
mod remote;

pub use mock::{FaultKind, FaultPlan, MockGenerator, EMPTY_RESULT, SEMANTIC_MISMATCH};
pub use nl::{Focus, Form, Lexicon, NlQuestion};
pub use prompt::{
    build_prompt, parse_sections, render_history, render_sections, Prompt, PromptArgs, PromptKind, PromptTemplates,
};
pub use remote::{ChatTransport, EndpointConfig, HttpReply, RemoteChatGenerator, UreqTransport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TextGenError {
    #[error("missing prompt slot {0}")]
    MissingSlot(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("cannot render: {0}")]
    Unrenderable(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorOutput {
    Question { raw: String, complete: String },
    Text(String),
}

impl GeneratorOutput {
    pub fn text(&self) -> &str {
        match self {
            GeneratorOutput::Question { complete, .. } => complete,
            GeneratorOutput::Text(t) => t,
        }
    }

    pub fn into_text(self) -> String {
        match self {
            GeneratorOutput::Question { complete, .. } => complete,
            GeneratorOutput::Text(t) => t,
        }
    }
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, prompt: &Prompt, seed: u64) -> Result<GeneratorOutput, TextGenError>;
}

impl<T: TextGenerator + ?Sized> TextGenerator for &T {
    fn generate(&self, prompt: &Prompt, seed: u64) -> Result<GeneratorOutput, TextGenError> {
        (**self).generate(prompt, seed)
    }
}

impl<T: TextGenerator + ?Sized> TextGenerator for std::sync::Arc<T> {
    fn generate(&self, prompt: &Prompt, seed: u64) -> Result<GeneratorOutput, TextGenError> {
        (**self).generate(prompt, seed)
    }
}

impl<T: TextGenerator + ?Sized> TextGenerator for Box<T> {
    fn generate(&self, prompt: &Prompt, seed: u64) -> Result<GeneratorOutput, TextGenError> {
        (**self).generate(prompt, seed)
    }
}
