pub mod nav;
pub mod pattern;
pub mod replay;
pub mod scenario;
pub mod serve;

use std::path::Path;

use hapticnav_core::policy::{HttpLlmClient, LlmClient, PolicyConfig, TranscriptClient, API_KEY_ENV};

use crate::{CliError, PolicyArg};

/// Client for the chosen policy; `None` means the rule-based fallback.
pub fn policy_client(
    policy: PolicyArg,
    config: &PolicyConfig,
    transcript: Option<&Path>,
) -> Result<Option<Box<dyn LlmClient>>, CliError> {
    match policy {
        PolicyArg::Fallback => Ok(None),
        PolicyArg::Llm => {
            if std::env::var_os(API_KEY_ENV).is_none() {
                return Err(CliError::Usage(format!(
                    "--policy llm needs an API key: export {API_KEY_ENV}=<key> (endpoint {}, model {}); \
                     use --policy fallback or --policy transcript to run offline",
                    config.llm_endpoint, config.llm_model
                )));
            }
            let client = HttpLlmClient::from_env(config).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(Some(Box::new(client)))
        }
        PolicyArg::Transcript => {
            let path = transcript.ok_or_else(|| CliError::Usage("--policy transcript needs --transcript <file>".into()))?;
            let client = TranscriptClient::load(path).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(Some(Box::new(client)))
        }
    }
}
