use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::token::{TokenKind, TokenSequence};
use super::SmilesError;

const ELEMENTS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

const AROMATIC_BRACKET: [&str; 9] = ["se", "as", "te", "b", "c", "n", "o", "p", "s"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    /// Capitalized element symbol (`c` is stored as `C` with `aromatic = true`).
    pub element: String,
    pub aromatic: bool,
    pub charge: i32,
    pub explicit_h: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub ring_count: usize,
}

impl Molecule {
    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) {
        debug_assert!(a != b);
        self.bonds.push(Bond { a, b, order });
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }
}

fn bond_order(symbol: &str) -> BondOrder {
    match symbol {
        "=" => BondOrder::Double,
        "#" => BondOrder::Triple,
        ":" => BondOrder::Aromatic,
        // '-', '/', '\' and '~': stereo and query markers collapse to single
        _ => BondOrder::Single,
    }
}

fn organic_atom(text: &str) -> Atom {
    let aromatic = text.chars().all(|c| c.is_ascii_lowercase());
    Atom {
        element: capitalize(text),
        aromatic,
        charge: 0,
        explicit_h: 0,
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

/// Parses the interior of a bracket atom such as `[13CH3+]` or `[nH]`.
fn bracket_atom(text: &str) -> Result<Atom, SmilesError> {
    let bad = || SmilesError::MalformedBracketAtom(text.to_string());
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(bad)?;
    let rest = inner.trim_start_matches(|c: char| c.is_ascii_digit());

    let (element, aromatic, rest) = if let Some(r) = rest.strip_prefix('*') {
        ("*".to_string(), false, r)
    } else if let Some(sym) = AROMATIC_BRACKET.iter().find(|s| rest.starts_with(**s)) {
        (capitalize(sym), true, &rest[sym.len()..])
    } else {
        let two = rest.get(..2).filter(|s| ELEMENTS.contains(s));
        let one = rest.get(..1).filter(|s| ELEMENTS.contains(s));
        match two.or(one) {
            Some(sym) => (sym.to_string(), false, &rest[sym.len()..]),
            None => return Err(bad()),
        }
    };

    let mut rest = rest.trim_start_matches('@');
    // a stereo class suffix like @TH1 / @SP2 is not interpreted
    while rest.starts_with(|c: char| c.is_ascii_uppercase() && c != 'H') {
        rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric() && c != 'H');
    }

    let mut explicit_h = 0;
    if let Some(r) = rest.strip_prefix('H') {
        let digits: String = r.chars().take_while(char::is_ascii_digit).collect();
        explicit_h = if digits.is_empty() {
            1
        } else {
            digits.parse().map_err(|_| bad())?
        };
        rest = &r[digits.len()..];
    }

    let mut charge = 0i32;
    if let Some(sign) = rest.chars().next().filter(|c| *c == '+' || *c == '-') {
        let unit = if sign == '+' { 1 } else { -1 };
        let repeats = rest.chars().take_while(|c| *c == sign).count();
        let after = &rest[repeats..];
        let digits: String = after.chars().take_while(char::is_ascii_digit).collect();
        charge = if !digits.is_empty() && repeats == 1 {
            unit * digits.parse::<i32>().map_err(|_| bad())?
        } else {
            unit * repeats as i32
        };
        rest = &after[digits.len()..];
    }

    if let Some(r) = rest.strip_prefix(':') {
        rest = r.trim_start_matches(|c: char| c.is_ascii_digit());
    }
    if !rest.is_empty() {
        return Err(bad());
    }
    Ok(Atom {
        element,
        aromatic,
        charge,
        explicit_h,
    })
}

/// Builds the molecular graph for a token sequence.
///
/// Adjacent atoms get a single bond unless a bond token says otherwise; two
/// aromatic atoms default to an aromatic bond. Stereo markers are read as
/// single bonds. `.` and `>` break the chain without bonding. No valence checks.
pub fn parse(seq: &TokenSequence) -> Result<Molecule, SmilesError> {
    let mut mol = Molecule::default();
    let mut prev: Option<usize> = None;
    let mut pending: Option<&str> = None;
    let mut branches: Vec<usize> = Vec::new();
    let mut open_rings: BTreeMap<&str, (usize, Option<&str>)> = BTreeMap::new();

    for (pos, tok) in seq.tokens.iter().enumerate() {
        match tok.kind {
            TokenKind::Atom | TokenKind::BracketAtom => {
                let atom = if tok.kind == TokenKind::Atom {
                    organic_atom(&tok.text)
                } else {
                    bracket_atom(&tok.text)?
                };
                let idx = mol.atoms.len();
                mol.atoms.push(atom);
                match prev {
                    Some(p) => {
                        let order = pending.map_or_else(|| mol.default_order(p, idx), bond_order);
                        mol.add_bond(p, idx, order);
                    }
                    None if pending.is_some() => {
                        return Err(SmilesError::DanglingBond { position: pos })
                    }
                    None => {}
                }
                prev = Some(idx);
                pending = None;
            }
            TokenKind::Bond => {
                if prev.is_none() || pending.is_some() {
                    return Err(SmilesError::DanglingBond { position: pos });
                }
                pending = Some(tok.text.as_str());
            }
            TokenKind::BranchOpen => {
                let p = prev.ok_or(SmilesError::UnbalancedBranch { position: pos })?;
                if pending.is_some() {
                    return Err(SmilesError::DanglingBond { position: pos });
                }
                branches.push(p);
            }
            TokenKind::BranchClose => {
                if pending.is_some() {
                    return Err(SmilesError::DanglingBond { position: pos });
                }
                let p = branches
                    .pop()
                    .ok_or(SmilesError::UnbalancedBranch { position: pos })?;
                prev = Some(p);
            }
            TokenKind::RingClosure => {
                let label = tok.text.as_str();
                let here = prev.ok_or_else(|| SmilesError::UnmatchedRingClosure {
                    label: label.to_string(),
                })?;
                match open_rings.remove(label) {
                    Some((other, opened_with)) => {
                        if other == here {
                            return Err(SmilesError::UnmatchedRingClosure {
                                label: label.to_string(),
                            });
                        }
                        let order = pending
                            .or(opened_with)
                            .map_or_else(|| mol.default_order(other, here), bond_order);
                        mol.add_bond(other, here, order);
                        mol.ring_count += 1;
                    }
                    None => {
                        open_rings.insert(label, (here, pending));
                    }
                }
                pending = None;
            }
            TokenKind::Dot | TokenKind::Separator | TokenKind::Missing => {
                if pending.is_some() {
                    return Err(SmilesError::DanglingBond { position: pos });
                }
                if !branches.is_empty() {
                    return Err(SmilesError::UnbalancedBranch { position: pos });
                }
                prev = None;
            }
        }
    }

    if pending.is_some() {
        return Err(SmilesError::DanglingBond {
            position: seq.tokens.len(),
        });
    }
    if !branches.is_empty() {
        return Err(SmilesError::UnbalancedBranch {
            position: seq.tokens.len(),
        });
    }
    if let Some((label, _)) = open_rings.into_iter().next() {
        return Err(SmilesError::UnmatchedRingClosure {
            label: label.to_string(),
        });
    }
    Ok(mol)
}

/// Tokenizes and parses in one step.
pub fn parse_smiles(smiles: &str) -> Result<Molecule, SmilesError> {
    parse(&super::tokenize(smiles)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::tokenize;

    fn order_counts(m: &Molecule) -> [usize; 4] {
        let mut c = [0; 4];
        for b in &m.bonds {
            c[b.order as usize] += 1;
        }
        c
    }

    #[test]
    fn ethanol() {
        let m = parse_smiles("CCO").unwrap();
        let els: Vec<_> = m.atoms.iter().map(|a| a.element.as_str()).collect();
        assert_eq!(els, ["C", "C", "O"]);
        assert_eq!(order_counts(&m), [2, 0, 0, 0]);
        assert_eq!(m.ring_count, 0);
    }

    #[test]
    fn benzene() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.atoms.len(), 6);
        assert!(m.atoms.iter().all(|a| a.aromatic && a.element == "C"));
        assert_eq!(order_counts(&m), [0, 0, 0, 6]);
        assert_eq!(m.ring_count, 1);
    }

    #[test]
    fn acetic_acid_branch() {
        let m = parse_smiles("CC(=O)O").unwrap();
        assert_eq!(m.atoms.len(), 4);
        let bonds: Vec<_> = m.bonds.iter().map(|b| (b.a, b.b, b.order)).collect();
        assert_eq!(
            bonds,
            [
                (0, 1, BondOrder::Single),
                (1, 2, BondOrder::Double),
                (1, 3, BondOrder::Single)
            ]
        );
    }

    #[test]
    fn bracket_atoms() {
        let a = bracket_atom("[OH-]").unwrap();
        assert_eq!((a.element.as_str(), a.charge, a.explicit_h), ("O", -1, 1));
        let a = bracket_atom("[13CH3+]").unwrap();
        assert_eq!((a.element.as_str(), a.charge, a.explicit_h), ("C", 1, 3));
        let a = bracket_atom("[nH]").unwrap();
        assert!(a.aromatic);
        assert_eq!(a.element, "N");
        let a = bracket_atom("[Fe++]").unwrap();
        assert_eq!((a.element.as_str(), a.charge), ("Fe", 2));
        let a = bracket_atom("[C@@H]").unwrap();
        assert_eq!((a.element.as_str(), a.explicit_h), ("C", 1));
        let a = bracket_atom("[Pd]").unwrap();
        assert_eq!(a.element, "Pd");
        let a = bracket_atom("[Cu+2]").unwrap();
        assert_eq!(a.charge, 2);
        let a = bracket_atom("[CH3:4]").unwrap();
        assert_eq!(a.explicit_h, 3);
        assert!(bracket_atom("[Xx]").is_err());
    }

    #[test]
    fn ring_bond_order_from_either_end() {
        let m = parse_smiles("C=1CC1").unwrap();
        assert_eq!(m.bonds.last().unwrap().order, BondOrder::Double);
        let m = parse_smiles("C1CC=1").unwrap();
        assert_eq!(m.bonds.last().unwrap().order, BondOrder::Double);
    }

    #[test]
    fn dot_disconnects() {
        let m = parse_smiles("[Na+].[Cl-]").unwrap();
        assert_eq!(m.atoms.len(), 2);
        assert!(m.bonds.is_empty());
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_smiles("CC(C"),
            Err(SmilesError::UnbalancedBranch { .. })
        ));
        assert!(matches!(
            parse_smiles("CC)C"),
            Err(SmilesError::UnbalancedBranch { .. })
        ));
        assert!(matches!(
            parse_smiles("C1CC"),
            Err(SmilesError::UnmatchedRingClosure { .. })
        ));
        assert!(matches!(
            parse_smiles("CC="),
            Err(SmilesError::DanglingBond { .. })
        ));
        assert!(matches!(
            parse_smiles("=CC"),
            Err(SmilesError::DanglingBond { .. })
        ));
        assert!(matches!(
            parse_smiles("C11"),
            Err(SmilesError::UnmatchedRingClosure { .. })
        ));
    }

    #[test]
    fn stereo_bonds_ignored() {
        let m = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(order_counts(&m), [2, 1, 0, 0]);
        let t = tokenize("F/C=C/F").unwrap();
        assert_eq!(t.len(), 7);
    }
}
