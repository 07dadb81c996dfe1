//! Text ingestion: cleaning, frequent-word removal, fixed-size chunking and
//! threaded comment trees.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::{char::is_combining_mark, UnicodeNormalization};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("no tokens left after cleaning")]
    EmptyCorpus,
    #[error("{tokens} tokens is too short for two chunks of {k} words")]
    TooShort { tokens: usize, k: usize },
    #[error("chunk size must be at least 1")]
    InvalidChunkSize,
    #[error("malformed thread document: {0}")]
    Json(String),
    #[error("comment {id} refers to missing parent {parent}")]
    MissingParent { id: String, parent: String },
    #[error("duplicate comment id {0}")]
    DuplicateId(String),
    #[error("more than one root: {0} and {1}")]
    MultipleRoots(String, String),
    #[error("thread has no root (every node names a parent)")]
    NoRoot,
    #[error("parent links form a cycle through {0}")]
    CycleDetected(String),
    #[error("{0} is not a leaf")]
    NotALeaf(String),
    #[error("unknown comment id {0}")]
    UnknownId(String),
}

/// Cleaned, lowercase words of one source, in reading order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub source_id: String,
    pub tokens: Vec<String>,
}

impl TokenStream {
    pub fn new(source_id: impl Into<String>, tokens: Vec<String>) -> Self {
        TokenStream {
            source_id: source_id.into(),
            tokens,
        }
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanOptions {
    pub strip_accents: bool,
    /// Lines whose first non-blank characters start with any of these
    /// literals are dropped before tokenizing.
    pub metadata_patterns: Vec<String>,
}

/// Lowercases, removes punctuation and digits, optionally folds accents.
///
/// A token is a maximal run of alphabetic characters.
pub fn clean_text(raw: &str, opts: &CleanOptions) -> Result<TokenStream, CorpusError> {
    let mut tokens = Vec::new();
    for line in raw.lines() {
        let trimmed = line.trim_start();
        if opts
            .metadata_patterns
            .iter()
            .any(|p| !p.is_empty() && trimmed.starts_with(p.as_str()))
        {
            continue;
        }
        let folded: String = if opts.strip_accents {
            line.nfd().filter(|c| !is_combining_mark(*c)).collect()
        } else {
            line.to_string()
        };
        tokens.extend(
            folded
                .split(|c: char| !c.is_alphabetic())
                .filter(|t| !t.is_empty())
                .map(str::to_lowercase),
        );
    }
    if tokens.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(TokenStream::new(String::new(), tokens))
}

/// Removes every occurrence of the `n` most frequent types. Ties go to the
/// type that appears first.
pub fn drop_top_words(stream: &TokenStream, n: usize) -> TokenStream {
    let mut stats: HashMap<&str, (usize, usize)> = HashMap::new();
    for (i, t) in stream.tokens.iter().enumerate() {
        stats.entry(t.as_str()).or_insert((0, i)).0 += 1;
    }
    let mut ranked: Vec<(&str, usize, usize)> = stats
        .into_iter()
        .map(|(w, (c, first))| (w, c, first))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let drop: std::collections::HashSet<&str> = ranked.iter().take(n).map(|r| r.0).collect();
    TokenStream {
        source_id: stream.source_id.clone(),
        tokens: stream
            .tokens
            .iter()
            .filter(|t| !drop.contains(t.as_str()))
            .cloned()
            .collect(),
    }
}

/// Words per chunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingSpec {
    pub k: usize,
}

impl ChunkingSpec {
    pub fn new(k: usize) -> Result<Self, CorpusError> {
        if k == 0 {
            return Err(CorpusError::InvalidChunkSize);
        }
        Ok(ChunkingSpec { k })
    }

    /// 25, 50, ..., 250.
    pub fn default_sweep() -> Vec<usize> {
        (1..=10).map(|i| 25 * i).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkSequence {
    pub k: usize,
    pub chunks: Vec<Vec<String>>,
}

impl ChunkSequence {
    /// K, the number of chunks.
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

/// Consecutive non-overlapping windows of exactly `k` tokens; the trailing
/// remainder is discarded.
pub fn chunk(stream: &TokenStream, spec: ChunkingSpec) -> Result<ChunkSequence, CorpusError> {
    let k = spec.k;
    if k == 0 {
        return Err(CorpusError::InvalidChunkSize);
    }
    if stream.len() / k < 2 {
        return Err(CorpusError::TooShort {
            tokens: stream.len(),
            k,
        });
    }
    Ok(ChunkSequence {
        k,
        chunks: stream
            .tokens
            .chunks_exact(k)
            .map(<[String]>::to_vec)
            .collect(),
    })
}

/// One submission or comment of a threaded discussion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentNode {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    #[serde(default)]
    pub created_utc: i64,
    #[serde(default)]
    pub body: String,
}

/// Validated discussion tree rooted at the submission.
#[derive(Clone, Debug)]
pub struct CommentTree {
    nodes: Vec<CommentNode>,
    index: HashMap<String, usize>,
    root: usize,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl CommentTree {
    pub fn from_nodes(nodes: Vec<CommentNode>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(n.id.clone()));
            }
        }
        let mut root = None;
        let mut parent = vec![None; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            match &n.parent_id {
                None => {
                    if let Some(r) = root {
                        let first: &CommentNode = &nodes[r];
                        return Err(CorpusError::MultipleRoots(first.id.clone(), n.id.clone()));
                    }
                    root = Some(i);
                }
                Some(p) => match index.get(p) {
                    Some(&pi) => parent[i] = Some(pi),
                    None => {
                        return Err(CorpusError::MissingParent {
                            id: n.id.clone(),
                            parent: p.clone(),
                        })
                    }
                },
            }
        }
        let root = root.ok_or(CorpusError::NoRoot)?;

        const UNSEEN: usize = usize::MAX;
        const ON_PATH: usize = usize::MAX - 1;
        let mut depth = vec![UNSEEN; nodes.len()];
        depth[root] = 0;
        for start in 0..nodes.len() {
            let mut path = Vec::new();
            let mut cur = start;
            while depth[cur] == UNSEEN {
                depth[cur] = ON_PATH;
                path.push(cur);
                cur = parent[cur].expect("only the root lacks a parent");
            }
            if depth[cur] == ON_PATH {
                return Err(CorpusError::CycleDetected(nodes[cur].id.clone()));
            }
            let mut d = depth[cur];
            for &n in path.iter().rev() {
                d += 1;
                depth[n] = d;
            }
        }

        let mut children = vec![Vec::new(); nodes.len()];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        for c in &mut children {
            c.sort_by(|&a, &b| time_order(&nodes[a], &nodes[b]));
        }
        Ok(CommentTree {
            nodes,
            index,
            root,
            children,
            depth,
        })
    }

    pub fn root(&self) -> &CommentNode {
        &self.nodes[self.root]
    }

    pub fn nodes(&self) -> &[CommentNode] {
        &self.nodes
    }

    pub fn get(&self, id: &str) -> Option<&CommentNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    /// Children of `id`, ordered by time then id.
    pub fn children(&self, id: &str) -> Vec<&CommentNode> {
        self.index
            .get(id)
            .map(|&i| self.children[i].iter().map(|&c| &self.nodes[c]).collect())
            .unwrap_or_default()
    }

    /// Path length to the root (the root has depth 0).
    pub fn depth(&self, id: &str) -> Option<usize> {
        self.index.get(id).map(|&i| self.depth[i])
    }

    /// Depths of all comments, excluding the submission itself.
    pub fn comment_depths(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len())
            .filter(move |&i| i != self.root)
            .map(move |i| self.depth[i])
    }

    pub fn comment_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// All nodes by nondecreasing `created_utc`, ties by ascending id.
    pub fn time_ordered(&self) -> Vec<&CommentNode> {
        let mut v: Vec<&CommentNode> = self.nodes.iter().collect();
        v.sort_by(|a, b| time_order(a, b));
        v
    }

    pub fn without_leaf(&self, id: &str) -> Result<CommentTree, CorpusError> {
        let &i = self
            .index
            .get(id)
            .ok_or_else(|| CorpusError::UnknownId(id.to_string()))?;
        if !self.children[i].is_empty() || i == self.root {
            return Err(CorpusError::NotALeaf(id.to_string()));
        }
        let nodes = self.nodes.iter().filter(|n| n.id != id).cloned().collect();
        CommentTree::from_nodes(nodes)
    }
}

fn time_order(a: &CommentNode, b: &CommentNode) -> std::cmp::Ordering {
    a.created_utc
        .cmp(&b.created_utc)
        .then_with(|| a.id.cmp(&b.id))
}

/// Parses a JSON array of comment objects.
pub fn parse_thread(json_doc: &[u8]) -> Result<CommentTree, CorpusError> {
    let nodes: Vec<CommentNode> =
        serde_json::from_slice(json_doc).map_err(|e| CorpusError::Json(e.to_string()))?;
    CommentTree::from_nodes(nodes)
}

/// Concatenates bodies in time order (ties by id) and cleans the result.
pub fn linearize_tree(tree: &CommentTree, opts: &CleanOptions) -> Result<TokenStream, CorpusError> {
    let text = tree
        .time_ordered()
        .iter()
        .map(|n| n.body.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    Ok(clean_text(&text, opts)?.with_source_id(tree.root().id.clone()))
}
