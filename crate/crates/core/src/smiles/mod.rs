//! SMILES tokenization, graph parsing and integer encoding.
//!
//! Tokenization is lossless: joining the token texts reproduces the input.
//! The parser builds a light molecular graph (atoms, bonds, ring count) used
//! by the structural descriptors; it performs no valence checking and reads
//! stereo markers as plain single bonds.

mod parse;
mod token;
mod vocab;

use thiserror::Error;

pub use parse::{parse, parse_smiles, Atom, Bond, BondOrder, Molecule};
pub use token::{
    assemble_reaction, reaction_tokens, tokenize, Token, TokenKind, TokenSequence, MISSING_TOKEN,
};
pub use vocab::{build_vocab, encode, EncodedSequence, Vocab, CLS_ID, PAD_ID, UNK_ID};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    EmptyInput,
    #[error("unclosed bracket atom starting at byte {position}")]
    UnclosedBracket { position: usize },
    #[error("unknown character {ch:?} at byte {position}")]
    UnknownCharacter { ch: char, position: usize },
    #[error("malformed bracket atom {0}")]
    MalformedBracketAtom(String),
    #[error("unbalanced branch at token {position}")]
    UnbalancedBranch { position: usize },
    #[error("unmatched ring closure {label}")]
    UnmatchedRingClosure { label: String },
    #[error("bond without a following atom at token {position}")]
    DanglingBond { position: usize },
    #[error("empty component list")]
    EmptyComponentList,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("max_len must be at least 2, got {0}")]
    InvalidMaxLen(usize),
    #[error("sequence needs {needed} positions but max_len is {max_len}")]
    SequenceTooLong { needed: usize, max_len: usize },
}
