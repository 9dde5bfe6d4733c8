use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::token::TokenSequence;
use super::SmilesError;

pub const PAD_ID: usize = 0;
pub const CLS_ID: usize = 1;
pub const UNK_ID: usize = 2;

const SPECIALS: [&str; 3] = ["<pad>", "<cls>", "<unk>"];

/// Token-text to id mapping. Ids are dense; 0..=2 are PAD, CLS and UNK.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        Vocab::from_tokens(r.tokens)
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            tokens: v.id_to_token,
        }
    }
}

impl Vocab {
    fn from_tokens(id_to_token: Vec<String>) -> Self {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            id_to_token,
            token_to_id,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Id of `text`, or UNK when unseen.
    pub fn id(&self, text: &str) -> usize {
        self.token_to_id.get(text).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, text: &str) -> Option<usize> {
        self.token_to_id.get(text).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }
}

/// Builds a vocabulary from the distinct token texts of `corpus`, sorted
/// lexicographically after the three special tokens.
pub fn build_vocab(corpus: &[TokenSequence]) -> Result<Vocab, SmilesError> {
    if corpus.is_empty() {
        return Err(SmilesError::EmptyCorpus);
    }
    let distinct: BTreeSet<&str> = corpus
        .iter()
        .flat_map(|s| s.texts())
        .filter(|t| !SPECIALS.contains(t))
        .collect();
    let tokens = SPECIALS
        .iter()
        .copied()
        .chain(distinct)
        .map(str::to_string)
        .collect();
    Ok(Vocab::from_tokens(tokens))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSequence {
    pub ids: Vec<usize>,
    pub attention_mask: Vec<u8>,
}

impl EncodedSequence {
    /// Number of unmasked positions (CLS plus real tokens).
    pub fn active_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }
}

/// Prepends CLS, maps tokens to ids and pads to `max_len`. Never truncates.
pub fn encode(
    tokens: &TokenSequence,
    vocab: &Vocab,
    max_len: usize,
) -> Result<EncodedSequence, SmilesError> {
    if max_len < 2 {
        return Err(SmilesError::InvalidMaxLen(max_len));
    }
    let needed = tokens.len() + 1;
    if needed > max_len {
        return Err(SmilesError::SequenceTooLong { needed, max_len });
    }
    let mut ids = Vec::with_capacity(max_len);
    ids.push(CLS_ID);
    ids.extend(tokens.texts().map(|t| vocab.id(t)));
    ids.resize(max_len, PAD_ID);
    let mut attention_mask = vec![1u8; needed];
    attention_mask.resize(max_len, 0);
    Ok(EncodedSequence {
        ids,
        attention_mask,
    })
}
