//! Loading configured sources into token streams.

use levytopic::corpus::{clean_text, linearize_tree, parse_thread, CommentTree, TokenStream};

use crate::config::{RunConfig, SourceConfig, SourceKind};
use crate::error::CliError;

pub fn load_tree(src: &SourceConfig) -> Result<CommentTree, CliError> {
    let bytes = std::fs::read(&src.path).map_err(|e| CliError::data(&src.id, e))?;
    parse_thread(&bytes).map_err(|e| CliError::data(&src.id, e))
}

/// Cleaned token stream of one source, labelled with its configured id.
pub fn load_stream(src: &SourceConfig, cfg: &RunConfig) -> Result<TokenStream, CliError> {
    let opts = cfg.clean_options();
    let stream = match src.kind {
        SourceKind::Text => {
            let bytes = std::fs::read(&src.path).map_err(|e| CliError::data(&src.id, e))?;
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::data(&src.id, "file is not valid UTF-8"))?;
            clean_text(&text, &opts)
        }
        SourceKind::ThreadJson => linearize_tree(&load_tree(src)?, &opts),
    }
    .map_err(|e| CliError::data(&src.id, e))?;
    Ok(stream.with_source_id(src.id.clone()))
}
