use std::fmt;

use super::SmilesError;

/// Lexical class of a SMILES token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    Atom,
    BracketAtom,
    Bond,
    BranchOpen,
    BranchClose,
    RingClosure,
    Dot,
    Separator,
    /// Placeholder for an absent reaction component. Never produced by
    /// [`tokenize`]; only inserted by [`reaction_tokens`].
    Missing,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

impl Token {
    fn new(kind: TokenKind, text: &str) -> Self {
        Token {
            kind,
            text: text.to_string(),
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self.kind, TokenKind::Atom | TokenKind::BracketAtom)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Text used for the [`TokenKind::Missing`] placeholder.
pub const MISSING_TOKEN: &str = "<none>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    pub source: String,
    pub tokens: Vec<Token>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }

    /// Concatenation of all token texts. Equals `source` for sequences built by [`tokenize`].
    pub fn joined(&self) -> String {
        self.texts().collect()
    }
}

/// Splits a SMILES string into lossless tokens.
///
/// Organic-subset atoms (`Cl` and `Br` included), bracket atoms, bonds,
/// ring closures (`1`..`9`, `0` and `%nn`), branches, `.` and `>` are each one token.
pub fn tokenize(smiles: &str) -> Result<TokenSequence, SmilesError> {
    if smiles.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    let bytes = smiles.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if !c.is_ascii() {
            // report the full char, not a byte
            let ch = smiles[i..].chars().next().unwrap_or('?');
            return Err(SmilesError::UnknownCharacter { ch, position: i });
        }
        let (kind, len) = match c {
            b'[' => match smiles[i + 1..].find(']') {
                Some(off) => (TokenKind::BracketAtom, off + 2),
                None => return Err(SmilesError::UnclosedBracket { position: i }),
            },
            b'C' if bytes.get(i + 1) == Some(&b'l') => (TokenKind::Atom, 2),
            b'B' if bytes.get(i + 1) == Some(&b'r') => (TokenKind::Atom, 2),
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => (TokenKind::Atom, 1),
            b'b' | b'c' | b'n' | b'o' | b'p' | b's' => (TokenKind::Atom, 1),
            b'-' | b'=' | b'#' | b'/' | b'\\' | b':' | b'~' => (TokenKind::Bond, 1),
            b'0'..=b'9' => (TokenKind::RingClosure, 1),
            b'%' => {
                let two = bytes.get(i + 1..i + 3);
                match two {
                    Some(d) if d.iter().all(u8::is_ascii_digit) => (TokenKind::RingClosure, 3),
                    _ => {
                        return Err(SmilesError::UnknownCharacter {
                            ch: '%',
                            position: i,
                        })
                    }
                }
            }
            b'(' => (TokenKind::BranchOpen, 1),
            b')' => (TokenKind::BranchClose, 1),
            b'.' => (TokenKind::Dot, 1),
            b'>' => (TokenKind::Separator, 1),
            other => {
                return Err(SmilesError::UnknownCharacter {
                    ch: other as char,
                    position: i,
                })
            }
        };
        tokens.push(Token::new(kind, &smiles[i..i + len]));
        i += len;
    }
    Ok(TokenSequence {
        source: smiles.to_string(),
        tokens,
    })
}

/// Joins reaction components with `.` in the order given (the dataset schema order).
///
/// Non-empty components must tokenize. Empty components are kept as empty
/// segments; use [`reaction_tokens`] to get the tokenized form with placeholders.
pub fn assemble_reaction<S: AsRef<str>>(components: &[S]) -> Result<String, SmilesError> {
    if components.is_empty() {
        return Err(SmilesError::EmptyComponentList);
    }
    for c in components {
        let c = c.as_ref();
        if !c.is_empty() {
            tokenize(c)?;
        }
    }
    Ok(components
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<&str>>()
        .join("."))
}

/// Tokenizes a multi-component reaction. Components are separated by a `.`
/// token; an empty component becomes a single [`TokenKind::Missing`] token.
pub fn reaction_tokens<S: AsRef<str>>(components: &[S]) -> Result<TokenSequence, SmilesError> {
    let source = assemble_reaction(components)?;
    let mut tokens = Vec::new();
    for (i, c) in components.iter().enumerate() {
        if i > 0 {
            tokens.push(Token::new(TokenKind::Dot, "."));
        }
        let c = c.as_ref();
        if c.is_empty() {
            tokens.push(Token::new(TokenKind::Missing, MISSING_TOKEN));
        } else {
            tokens.extend(tokenize(c)?.tokens);
        }
    }
    Ok(TokenSequence { source, tokens })
}
