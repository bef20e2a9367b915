use super::IntegrationError;
use crate::llm::{CompletionRequest, LlmBackend};

/// The query followed, when there are results, by a `Clue:` section.
pub fn compose_response_prompt(query: &str, renderings: &[String]) -> String {
    if renderings.is_empty() {
        query.to_string()
    } else {
        format!("{query}\nClue: {}", renderings.join("\n"))
    }
}

pub async fn synthesize_response(
    backend: &dyn LlmBackend,
    query: &str,
    renderings: &[String],
    request: &CompletionRequest,
) -> Result<String, IntegrationError> {
    let prompt = compose_response_prompt(query, renderings);
    Ok(backend.complete(&request.with_prompt(prompt)).await?)
}
