//! A small SMILES reader and writer covering the organic subset, bracket
//! atoms with charge and hydrogen count, branches and ring closures.
//!
//! Stereo markers are accepted and dropped. Aromaticity is taken from the
//! input as written; no kekulization is attempted.

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum; aromatic bonds count as one.
    fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    /// Stable code used in fingerprint hashing.
    pub fn code(self) -> u64 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: String,
    pub charge: i8,
    /// Total attached hydrogens: as written for bracket atoms, implicit
    /// from standard valences otherwise.
    pub h_count: u8,
    pub aromatic: bool,
}

impl Atom {
    pub fn atomic_number(&self) -> u32 {
        atomic_number(&self.element).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MolecularGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub ring_membership: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    UnmatchedParenthesis,
    DanglingRingClosure(u32),
    UnknownSymbol(String),
    ValenceOverflow { element: String, valence: u32 },
    MisplacedToken(char),
    SelfBond,
    DuplicateBond,
    BadBracketAtom(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => write!(f, "empty input"),
            ParseErrorKind::UnmatchedParenthesis => write!(f, "unmatched parenthesis"),
            ParseErrorKind::DanglingRingClosure(n) => write!(f, "ring closure {n} never closed"),
            ParseErrorKind::UnknownSymbol(s) => write!(f, "unknown symbol `{s}`"),
            ParseErrorKind::ValenceOverflow { element, valence } => {
                write!(f, "valence {valence} too high for {element}")
            }
            ParseErrorKind::MisplacedToken(c) => write!(f, "unexpected `{c}`"),
            ParseErrorKind::SelfBond => write!(f, "ring closure bonds an atom to itself"),
            ParseErrorKind::DuplicateBond => write!(f, "atoms are already bonded"),
            ParseErrorKind::BadBracketAtom(s) => write!(f, "malformed bracket atom `{s}`"),
        }
    }
}

const ELEMENTS: [&str; 87] = [
    "", "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",
    "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce",
    "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir",
    "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn",
];

pub fn atomic_number(symbol: &str) -> Option<u32> {
    ELEMENTS
        .iter()
        .position(|&e| !e.is_empty() && e == symbol)
        .map(|z| z as u32)
}

fn standard_valences(element: &str) -> Option<&'static [u32]> {
    Some(match element {
        "B" => &[3],
        "C" => &[4],
        "N" => &[3, 5],
        "O" => &[2],
        "P" => &[3, 5],
        "S" => &[2, 4, 6],
        "F" | "Cl" | "Br" | "I" => &[1],
        _ => return None,
    })
}

struct PendingAtom {
    atom: Atom,
    bracket: bool,
    offset: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<PendingAtom>,
    bonds: Vec<Bond>,
}

fn err(offset: usize, kind: ParseErrorKind) -> Error {
    Error::Parse { offset, kind }
}

/// Parses a SMILES string into a heavy-atom graph.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph> {
    let trimmed = text.trim_end();
    if trimmed.trim().is_empty() {
        return Err(err(0, ParseErrorKind::Empty));
    }
    let mut p = Parser {
        text: trimmed.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
    };
    p.run()?;
    p.finish()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<()> {
        let mut prev: Option<usize> = None;
        let mut pending_bond: Option<(BondOrder, usize)> = None;
        let mut branches: Vec<(usize, usize)> = Vec::new();
        let mut rings: HashMap<u32, (usize, Option<BondOrder>, usize)> = HashMap::new();

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    let Some(p) = prev else {
                        return Err(err(start, ParseErrorKind::MisplacedToken('(')));
                    };
                    branches.push((p, start));
                    self.pos += 1;
                }
                b')' => {
                    let Some((p, _)) = branches.pop() else {
                        return Err(err(start, ParseErrorKind::UnmatchedParenthesis));
                    };
                    if pending_bond.is_some() {
                        return Err(err(start, ParseErrorKind::MisplacedToken(')')));
                    }
                    prev = Some(p);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if prev.is_none() || pending_bond.is_some() {
                        return Err(err(start, ParseErrorKind::MisplacedToken(c as char)));
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    pending_bond = Some((order, start));
                    self.pos += 1;
                }
                b'.' => {
                    if pending_bond.is_some() {
                        return Err(err(start, ParseErrorKind::MisplacedToken('.')));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(p) = prev else {
                        return Err(err(start, ParseErrorKind::MisplacedToken(c as char)));
                    };
                    let label = self.ring_label()?;
                    let bond = pending_bond.take().map(|(o, _)| o);
                    match rings.remove(&label) {
                        Some((other, other_bond, _)) => {
                            if other == p {
                                return Err(err(start, ParseErrorKind::SelfBond));
                            }
                            let order = bond.or(other_bond).unwrap_or_else(|| self.default_order(other, p));
                            self.add_bond(other, p, order, start)?;
                        }
                        None => {
                            rings.insert(label, (p, bond, start));
                        }
                    }
                }
                _ => {
                    let atom = if c == b'[' {
                        self.bracket_atom()?
                    } else {
                        self.organic_atom()?
                    };
                    let idx = self.atoms.len();
                    self.atoms.push(atom);
                    if let Some(p) = prev {
                        let order = match pending_bond.take() {
                            Some((o, _)) => o,
                            None => self.default_order(p, idx),
                        };
                        self.add_bond(p, idx, order, start)?;
                    }
                    prev = Some(idx);
                }
            }
        }
        if let Some((_, off)) = pending_bond {
            return Err(err(off, ParseErrorKind::MisplacedToken(self.text[off] as char)));
        }
        if let Some(&(_, off)) = branches.first() {
            return Err(err(off, ParseErrorKind::UnmatchedParenthesis));
        }
        if let Some((&label, &(_, _, off))) = rings.iter().min_by_key(|(_, v)| v.2) {
            return Err(err(off, ParseErrorKind::DanglingRingClosure(label)));
        }
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].atom.aromatic && self.atoms[b].atom.aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder, offset: usize) -> Result<()> {
        if self
            .bonds
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        {
            return Err(err(offset, ParseErrorKind::DuplicateBond));
        }
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }

    fn ring_label(&mut self) -> Result<u32> {
        let start = self.pos;
        if self.text[self.pos] == b'%' {
            let digits = self.text.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(u32::from(d[0] - b'0') * 10 + u32::from(d[1] - b'0'))
                }
                _ => Err(err(start, ParseErrorKind::MisplacedToken('%'))),
            }
        } else {
            self.pos += 1;
            Ok(u32::from(self.text[start] - b'0'))
        }
    }

    fn organic_atom(&mut self) -> Result<PendingAtom> {
        let start = self.pos;
        let rest = &self.text[self.pos..];
        let (element, aromatic, len) = if rest.starts_with(b"Cl") {
            ("Cl", false, 2)
        } else if rest.starts_with(b"Br") {
            ("Br", false, 2)
        } else {
            match rest[0] {
                b'B' => ("B", false, 1),
                b'C' => ("C", false, 1),
                b'N' => ("N", false, 1),
                b'O' => ("O", false, 1),
                b'P' => ("P", false, 1),
                b'S' => ("S", false, 1),
                b'F' => ("F", false, 1),
                b'I' => ("I", false, 1),
                b'b' => ("B", true, 1),
                b'c' => ("C", true, 1),
                b'n' => ("N", true, 1),
                b'o' => ("O", true, 1),
                b'p' => ("P", true, 1),
                b's' => ("S", true, 1),
                _ => {
                    let ch = std::str::from_utf8(rest)
                        .ok()
                        .and_then(|s| s.chars().next())
                        .map(String::from)
                        .unwrap_or_else(|| format!("\\x{:02x}", rest[0]));
                    return Err(err(start, ParseErrorKind::UnknownSymbol(ch)));
                }
            }
        };
        self.pos += len;
        Ok(PendingAtom {
            atom: Atom {
                element: element.to_string(),
                charge: 0,
                h_count: 0,
                aromatic,
            },
            bracket: false,
            offset: start,
        })
    }

    fn bracket_atom(&mut self) -> Result<PendingAtom> {
        let start = self.pos;
        let close = self.text[start..].iter().position(|&b| b == b']').ok_or_else(|| {
            err(
                start,
                ParseErrorKind::BadBracketAtom(self.lossy(start, self.text.len())),
            )
        })?;
        let body = &self.text[start + 1..start + close];
        self.pos = start + close + 1;
        let bad = || {
            err(
                start,
                ParseErrorKind::BadBracketAtom(String::from_utf8_lossy(body).into_owned()),
            )
        };

        let mut i = 0;
        while i < body.len() && body[i].is_ascii_digit() {
            i += 1; // isotope, discarded
        }
        if i >= body.len() {
            return Err(bad());
        }
        let (element, aromatic) = {
            let two = body.get(i..i + 2).and_then(|s| std::str::from_utf8(s).ok());
            let one = std::str::from_utf8(&body[i..i + 1]).map_err(|_| bad())?;
            let aromatic_two = matches!(two, Some("se") | Some("as"));
            if aromatic_two {
                let s = two.unwrap();
                i += 2;
                (capitalize(s), true)
            } else if let Some(s) = two.filter(|s| atomic_number(s).is_some()) {
                i += 2;
                (s.to_string(), false)
            } else if matches!(one, "b" | "c" | "n" | "o" | "p" | "s") {
                i += 1;
                (one.to_uppercase(), true)
            } else if atomic_number(one).is_some() {
                i += 1;
                (one.to_string(), false)
            } else {
                return Err(err(
                    start,
                    ParseErrorKind::UnknownSymbol(String::from_utf8_lossy(&body[i..]).into_owned()),
                ));
            }
        };
        while i < body.len() && body[i] == b'@' {
            i += 1;
        }
        let mut h_count = 0u8;
        if i < body.len() && body[i] == b'H' {
            i += 1;
            h_count = 1;
            if i < body.len() && body[i].is_ascii_digit() {
                h_count = body[i] - b'0';
                i += 1;
            }
        }
        let mut charge: i8 = 0;
        if i < body.len() && (body[i] == b'+' || body[i] == b'-') {
            let sign: i8 = if body[i] == b'+' { 1 } else { -1 };
            let sym = body[i];
            i += 1;
            let mut mag: i8 = 1;
            if i < body.len() && body[i].is_ascii_digit() {
                mag = (body[i] - b'0') as i8;
                i += 1;
            } else {
                while i < body.len() && body[i] == sym {
                    mag += 1;
                    i += 1;
                }
            }
            charge = sign * mag;
        }
        if i < body.len() && body[i] == b':' {
            i += 1;
            while i < body.len() && body[i].is_ascii_digit() {
                i += 1; // atom class, discarded
            }
        }
        if i != body.len() {
            return Err(bad());
        }
        Ok(PendingAtom {
            atom: Atom {
                element,
                charge,
                h_count,
                aromatic,
            },
            bracket: true,
            offset: start,
        })
    }

    fn lossy(&self, a: usize, b: usize) -> String {
        String::from_utf8_lossy(&self.text[a..b]).into_owned()
    }

    fn finish(self) -> Result<MolecularGraph> {
        let n = self.atoms.len();
        let mut bond_sum = vec![0u32; n];
        for b in &self.bonds {
            bond_sum[b.a] += b.order.valence();
            bond_sum[b.b] += b.order.valence();
        }
        let mut atoms = Vec::with_capacity(n);
        for (i, pending) in self.atoms.into_iter().enumerate() {
            let mut atom = pending.atom;
            if !pending.bracket {
                let valences = standard_valences(&atom.element).expect("organic subset");
                let sum = bond_sum[i];
                let Some(&v) = valences.iter().find(|&&v| v >= sum) else {
                    return Err(err(
                        pending.offset,
                        ParseErrorKind::ValenceOverflow {
                            element: atom.element.clone(),
                            valence: sum,
                        },
                    ));
                };
                let mut h = v - sum;
                if atom.aromatic && h > 0 {
                    h -= 1;
                }
                atom.h_count = h as u8;
            }
            atoms.push(atom);
        }
        let ring_membership = ring_atoms(n, &self.bonds);
        Ok(MolecularGraph {
            atoms,
            bonds: self.bonds,
            ring_membership,
        })
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Marks atoms incident to at least one non-bridge bond.
fn ring_atoms(n: usize, bonds: &[Bond]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, b) in bonds.iter().enumerate() {
        adj[b.a].push((b.b, e));
        adj[b.b].push((b.a, e));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // Iterative DFS: (vertex, parent edge, next neighbor position).
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (u, pe, ref mut next)) = stack.last_mut() {
            if *next < adj[u].len() {
                let (v, e) = adj[u][*next];
                *next += 1;
                if e == pe {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, e, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > disc[parent] {
                        is_bridge[pe] = true;
                    }
                }
            }
        }
    }
    let mut ring = vec![false; n];
    for (e, b) in bonds.iter().enumerate() {
        if !is_bridge[e] {
            ring[b.a] = true;
            ring[b.b] = true;
        }
    }
    ring
}

impl MolecularGraph {
    pub fn degree(&self, atom: usize) -> usize {
        self.bonds.iter().filter(|b| b.a == atom || b.b == atom).count()
    }

    /// `(neighbor, bond order)` lists per atom.
    pub fn adjacency(&self) -> Vec<Vec<(usize, BondOrder)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for b in &self.bonds {
            adj[b.a].push((b.b, b.order));
            adj[b.b].push((b.a, b.order));
        }
        adj
    }
}

/// Writes `graph` as SMILES with a random traversal order. Every atom is
/// bracketed with its hydrogen count and every bond is written explicitly,
/// so the output parses back to an isomorphic graph.
pub fn write_smiles<R: Rng + ?Sized>(graph: &MolecularGraph, rng: &mut R) -> String {
    let n = graph.atoms.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, b) in graph.bonds.iter().enumerate() {
        adj[b.a].push((b.b, e));
        adj[b.b].push((b.a, e));
    }
    for list in adj.iter_mut() {
        list.shuffle(rng);
    }
    let mut roots: Vec<usize> = (0..n).collect();
    roots.shuffle(rng);

    fn visit(
        u: usize,
        graph: &MolecularGraph,
        adj: &[Vec<(usize, usize)>],
        visited: &mut [bool],
        used: &mut [bool],
        children: &mut [Vec<(usize, BondOrder)>],
        closures: &mut [Vec<(usize, BondOrder)>],
    ) {
        visited[u] = true;
        for &(v, e) in &adj[u] {
            if used[e] {
                continue;
            }
            used[e] = true;
            let order = graph.bonds[e].order;
            if visited[v] {
                closures[u].push((v, order));
                closures[v].push((u, order));
            } else {
                children[u].push((v, order));
                visit(v, graph, adj, visited, used, children, closures);
            }
        }
    }

    let mut visited = vec![false; n];
    let mut used = vec![false; graph.bonds.len()];
    let mut children: Vec<Vec<(usize, BondOrder)>> = vec![Vec::new(); n];
    let mut closures: Vec<Vec<(usize, BondOrder)>> = vec![Vec::new(); n];
    let mut components = Vec::new();
    for &root in &roots {
        if !visited[root] {
            components.push(root);
            visit(root, graph, &adj, &mut visited, &mut used, &mut children, &mut closures);
        }
    }

    let mut out = String::new();
    let mut emitted = vec![false; n];
    let mut open: HashMap<(usize, usize), u32> = HashMap::new();
    let mut next_label = 10u32;
    fn emit(
        u: usize,
        graph: &MolecularGraph,
        children: &[Vec<(usize, BondOrder)>],
        closures: &[Vec<(usize, BondOrder)>],
        emitted: &mut [bool],
        open: &mut HashMap<(usize, usize), u32>,
        next_label: &mut u32,
        out: &mut String,
    ) {
        emitted[u] = true;
        let a = &graph.atoms[u];
        out.push('[');
        if a.aromatic {
            out.push_str(&a.element.to_lowercase());
        } else {
            out.push_str(&a.element);
        }
        if a.h_count > 0 {
            out.push('H');
            if a.h_count > 1 {
                out.push_str(&a.h_count.to_string());
            }
        }
        match a.charge {
            0 => {}
            c if c > 0 => out.push_str(&format!("+{c}")),
            c => out.push_str(&format!("-{}", -c)),
        }
        out.push(']');
        for &(v, order) in &closures[u] {
            let key = (u.min(v), u.max(v));
            out.push(order.symbol());
            if emitted[v] {
                let label = open.remove(&key).expect("closure opened at partner");
                out.push_str(&format!("%{label}"));
            } else {
                let label = *next_label;
                *next_label += 1;
                open.insert(key, label);
                out.push_str(&format!("%{label}"));
            }
        }
        let kids = &children[u];
        for (i, &(v, order)) in kids.iter().enumerate() {
            let last = i + 1 == kids.len();
            if !last {
                out.push('(');
            }
            out.push(order.symbol());
            emit(v, graph, children, closures, emitted, open, next_label, out);
            if !last {
                out.push(')');
            }
        }
    }
    for (i, &root) in components.iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        emit(
            root,
            graph,
            &children,
            &closures,
            &mut emitted,
            &mut open,
            &mut next_label,
            &mut out,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(s: &str) -> (usize, usize) {
        let g = parse_smiles(s).unwrap();
        (g.atoms.len(), g.bonds.len())
    }

    #[test]
    fn cyclopropane() {
        let g = parse_smiles("C1CC1").unwrap();
        assert_eq!((g.atoms.len(), g.bonds.len()), (3, 3));
        assert!(g.ring_membership.iter().all(|&r| r));
        assert!(g.atoms.iter().all(|a| a.h_count == 2));
    }

    #[test]
    fn benzene_is_aromatic() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.atoms.len(), 6);
        assert!(g.atoms.iter().all(|a| a.aromatic && a.h_count == 1));
        assert!(g.bonds.iter().all(|b| b.order == BondOrder::Aromatic));
        assert_eq!(g.bonds.len(), 6);
    }

    #[test]
    fn neopentane_branches() {
        let g = parse_smiles("C(C)(C)(C)C").unwrap();
        assert_eq!((g.atoms.len(), g.bonds.len()), (5, 4));
        assert_eq!(g.degree(0), 4);
        assert_eq!(g.atoms[0].h_count, 0);
        assert!(g.ring_membership.iter().all(|&r| !r));
    }

    #[test]
    fn bracket_atoms() {
        let g = parse_smiles("C[NH3+]").unwrap();
        assert_eq!(g.atoms[1].charge, 1);
        assert_eq!(g.atoms[1].h_count, 3);
        let g = parse_smiles("[13CH4]").unwrap();
        assert_eq!(g.atoms[0].h_count, 4);
        let g = parse_smiles("[O-]C(=O)C").unwrap();
        assert_eq!(g.atoms[0].charge, -1);
        let g = parse_smiles("[Fe++]").unwrap();
        assert_eq!(g.atoms[0].charge, 2);
        let g = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(g.atoms[3].h_count, 1);
        assert!(g.atoms[3].aromatic);
    }

    #[test]
    fn stereo_is_discarded() {
        assert_eq!(counts("F/C=C/F"), (4, 3));
        assert_eq!(counts("N[C@@H](C)C(=O)O"), (6, 5));
    }

    #[test]
    fn percent_ring_labels() {
        assert_eq!(counts("C%10CC%10"), (3, 3));
    }

    #[test]
    fn implicit_hydrogens() {
        let g = parse_smiles("CC(=O)O").unwrap();
        let h: Vec<u8> = g.atoms.iter().map(|a| a.h_count).collect();
        assert_eq!(h, vec![3, 0, 0, 1]);
        let g = parse_smiles("C#N").unwrap();
        assert_eq!(g.atoms[0].h_count, 1);
        let g = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(g.atoms[1].h_count, 0);
        let g = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(g.atoms[3].h_count, 0);
    }

    #[test]
    fn error_offsets() {
        let e = parse_smiles("C1CC").unwrap_err();
        assert!(
            matches!(
                e,
                Error::Parse {
                    offset: 1,
                    kind: ParseErrorKind::DanglingRingClosure(1)
                }
            ),
            "{e}"
        );
        let e = parse_smiles("CC(C").unwrap_err();
        assert!(
            matches!(
                e,
                Error::Parse {
                    offset: 2,
                    kind: ParseErrorKind::UnmatchedParenthesis
                }
            ),
            "{e}"
        );
        let e = parse_smiles("CC)C").unwrap_err();
        assert!(matches!(
            e,
            Error::Parse {
                offset: 2,
                kind: ParseErrorKind::UnmatchedParenthesis
            }
        ));
        let e = parse_smiles("CXC").unwrap_err();
        assert!(matches!(
            e,
            Error::Parse {
                offset: 1,
                kind: ParseErrorKind::UnknownSymbol(_)
            }
        ));
        let e = parse_smiles("C(C)(C)(C)(C)C").unwrap_err();
        assert!(matches!(
            e,
            Error::Parse {
                offset: 0,
                kind: ParseErrorKind::ValenceOverflow { .. }
            }
        ));
        let e = parse_smiles("").unwrap_err();
        assert!(matches!(
            e,
            Error::Parse {
                kind: ParseErrorKind::Empty,
                ..
            }
        ));
        assert!(parse_smiles("C11").is_err());
        assert!(parse_smiles("C1C1").is_err());
    }

    #[test]
    fn writer_round_trips_counts() {
        let mut rng = crate::rng::seeded(1);
        for s in ["c1ccc2ccccc2c1", "CC(=O)Oc1ccccc1C(=O)O", "C[NH3+].[Cl-]", "C1CC2CC1C2"] {
            let g = parse_smiles(s).unwrap();
            for _ in 0..5 {
                let w = write_smiles(&g, &mut rng);
                let h = parse_smiles(&w).unwrap_or_else(|e| panic!("{w}: {e}"));
                assert_eq!(g.atoms.len(), h.atoms.len(), "{w}");
                assert_eq!(g.bonds.len(), h.bonds.len(), "{w}");
                let mut ga: Vec<_> = g
                    .atoms
                    .iter()
                    .map(|a| (a.element.clone(), a.h_count, a.aromatic))
                    .collect();
                let mut ha: Vec<_> = h
                    .atoms
                    .iter()
                    .map(|a| (a.element.clone(), a.h_count, a.aromatic))
                    .collect();
                ga.sort();
                ha.sort();
                assert_eq!(ga, ha);
            }
        }
    }
}
