//! Full-text inverted index and the boolean search template.
//!
//! Search grammar (keywords case-insensitive):
//!
//! ```text
//! QUERY  := CLAUSE+
//! CLAUSE := ["-"] TERM | TERM "OR" TERM | '"' PHRASE '"' | "tag:" TERM
//! ```
//!
//! Whitespace-separated clauses are AND-ed. `OR` chains (`a OR b OR c`) are
//! accepted and group into one clause. Scores are tf-idf sums with
//! `tf` = raw count and `idf = ln(1 + N / df)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::StoreError;

static STOPWORDS_TXT: &str = include_str!("../../data/stopwords.txt");

pub fn stopwords() -> &'static BTreeSet<&'static str> {
    static SET: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_TXT.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

/// Lowercased alphanumeric runs, in order; no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// Tokens with stopwords removed, each paired with its position in the
/// unfiltered token stream.
pub fn content_tokens(text: &str) -> Vec<(String, u32)> {
    tokenize(text).into_iter().enumerate().filter(|(_, t)| !is_stopword(t)).map(|(i, t)| (t, i as u32)).collect()
}

/// Key under which a hashtag is indexed.
pub fn tag_term(tag: &str) -> String {
    format!("#{}", tag.trim_start_matches('#').to_lowercase())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
    pub positions: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    vocabulary: BTreeMap<String, u32>,
    terms: Vec<String>,
    postings: Vec<Vec<Posting>>,
    doc_names: Vec<String>,
    doc_lengths: BTreeMap<u32, u32>,
    doc_terms: Vec<Vec<(u32, u32)>>,
    #[serde(skip)]
    doc_by_name: HashMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub doc: u32,
    pub name: String,
    pub score: f64,
}

impl InvertedIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_names.len()
    }

    pub fn doc_name(&self, doc: u32) -> &str {
        &self.doc_names[doc as usize]
    }

    pub fn doc_id(&self, name: &str) -> Option<u32> {
        self.doc_by_name.get(name).copied()
    }

    pub fn doc_length(&self, doc: u32) -> Option<u32> {
        self.doc_lengths.get(&doc).copied()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn df(&self, term: &str) -> usize {
        self.vocabulary.get(term).map_or(0, |&t| self.postings[t as usize].len())
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df(term);
        if df == 0 {
            return 0.0;
        }
        (1.0 + self.doc_count() as f64 / df as f64).ln()
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.vocabulary.get(term).map_or(&[][..], |&t| &self.postings[t as usize])
    }

    /// Indexes one document. Returns its doc id (ids are dense, in insertion
    /// order, so postings stay sorted).
    pub fn add_document(&mut self, name: &str, text: &str, tags: &[String]) -> u32 {
        let doc = self.doc_names.len() as u32;
        self.doc_names.push(name.to_string());
        self.doc_by_name.insert(name.to_string(), doc);

        let mut per_term: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        let tokens = content_tokens(text);
        self.doc_lengths.insert(doc, tokens.len() as u32);
        for (tok, pos) in tokens {
            let t = self.intern(&tok);
            per_term.entry(t).or_default().push(pos);
        }
        let mut tag_terms = BTreeSet::new();
        for tag in tags {
            tag_terms.insert(self.intern(&tag_term(tag)));
        }
        for t in tag_terms {
            per_term.entry(t).or_default();
        }
        let mut fwd = Vec::with_capacity(per_term.len());
        for (t, positions) in per_term {
            let tf = positions.len().max(1) as u32;
            self.postings[t as usize].push(Posting { doc, tf, positions });
            fwd.push((t, tf));
        }
        self.doc_terms.push(fwd);
        doc
    }

    fn intern(&mut self, term: &str) -> u32 {
        if let Some(&t) = self.vocabulary.get(term) {
            return t;
        }
        let t = self.terms.len() as u32;
        self.vocabulary.insert(term.to_string(), t);
        self.terms.push(term.to_string());
        self.postings.push(Vec::new());
        t
    }

    /// Raw term counts of a document.
    pub fn doc_term_counts(&self, doc: u32) -> impl Iterator<Item = (&str, u32)> + '_ {
        self.doc_terms[doc as usize].iter().map(|&(t, tf)| (self.terms[t as usize].as_str(), tf))
    }

    /// tf-idf weighted term vector of a document.
    pub fn tfidf_vector(&self, doc: u32) -> BTreeMap<String, f64> {
        self.doc_term_counts(doc).map(|(term, tf)| (term.to_string(), tf as f64 * self.idf(term))).collect()
    }

    fn rebuild_name_map(&mut self) {
        self.doc_by_name = self.doc_names.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect();
    }

    /// Structural invariants: sorted postings, doc lengths for every doc.
    pub fn check_invariants(&self) -> bool {
        self.postings.iter().all(|p| {
            p.windows(2).all(|w| w[0].doc < w[1].doc) && p.iter().all(|x| self.doc_lengths.contains_key(&x.doc))
        })
    }

    /// Runs a search query; see the module docs for the grammar.
    pub fn search(&self, query: &str) -> Result<Vec<SearchHit>, StoreError> {
        let q = SearchQuery::parse(query)?;
        Ok(self.evaluate(&q))
    }

    pub fn evaluate(&self, q: &SearchQuery) -> Vec<SearchHit> {
        let positive: Vec<&Clause> = q.clauses.iter().filter(|c| !c.is_negated()).collect();
        if positive.is_empty() && q.clauses.iter().all(|c| !c.is_negated()) {
            return Vec::new();
        }
        let mut candidates: Option<BTreeMap<u32, f64>> = None;
        for clause in &positive {
            let matched = self.clause_matches(clause);
            candidates = Some(match candidates {
                None => matched,
                Some(prev) => prev.into_iter().filter_map(|(d, s)| matched.get(&d).map(|s2| (d, s + s2))).collect(),
            });
        }
        let mut scored = candidates.unwrap_or_else(|| (0..self.doc_count() as u32).map(|d| (d, 0.0)).collect());
        for clause in q.clauses.iter().filter(|c| c.is_negated()) {
            if let Clause::Term { term, .. } = clause {
                for p in self.postings(term) {
                    scored.remove(&p.doc);
                }
            }
        }
        let mut hits: Vec<SearchHit> = scored
            .into_iter()
            .map(|(doc, score)| SearchHit { doc, name: self.doc_names[doc as usize].clone(), score })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc.cmp(&b.doc)));
        hits
    }

    fn term_scores(&self, term: &str) -> BTreeMap<u32, f64> {
        let idf = self.idf(term);
        self.postings(term).iter().map(|p| (p.doc, p.tf as f64 * idf)).collect()
    }

    fn clause_matches(&self, clause: &Clause) -> BTreeMap<u32, f64> {
        match clause {
            Clause::Term { term, .. } => self.term_scores(term),
            Clause::Tag(tag) => self.term_scores(&tag_term(tag)),
            Clause::Or(atoms) => {
                let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
                for atom in atoms {
                    let key = match atom {
                        Atom::Term(t) => t.clone(),
                        Atom::Tag(t) => tag_term(t),
                    };
                    for (d, s) in self.term_scores(&key) {
                        *acc.entry(d).or_default() += s;
                    }
                }
                acc
            }
            Clause::Phrase(words) => self.phrase_matches(words),
        }
    }

    fn phrase_matches(&self, words: &[(String, u32)]) -> BTreeMap<u32, f64> {
        let Some((first, first_off)) = words.first() else {
            return BTreeMap::new();
        };
        let lists: Vec<HashMap<u32, &Posting>> =
            words.iter().map(|(w, _)| self.postings(w).iter().map(|p| (p.doc, p)).collect()).collect();
        let mut out = BTreeMap::new();
        'docs: for p in self.postings(first) {
            let mut postings = Vec::with_capacity(words.len());
            for l in &lists {
                match l.get(&p.doc) {
                    Some(x) => postings.push(*x),
                    None => continue 'docs,
                }
            }
            let found = p.positions.iter().any(|&start| {
                words.iter().zip(&postings).all(|((_, off), q)| {
                    let want = start + off - first_off;
                    q.positions.binary_search(&want).is_ok()
                })
            });
            if found {
                let score = words.iter().zip(&postings).map(|((w, _), q)| q.tf as f64 * self.idf(w)).sum();
                out.insert(p.doc, score);
            }
        }
        out
    }
}

impl InvertedIndex {
    /// Deserializes an index dump and restores its lookup tables.
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        let mut idx: InvertedIndex = serde_json::from_str(s)?;
        idx.rebuild_name_map();
        Ok(idx)
    }
}

/// One alternative inside an `OR` clause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Atom {
    Term(String),
    Tag(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Clause {
    Term {
        term: String,
        negated: bool,
    },
    Or(Vec<Atom>),
    /// Content words with their offsets in the quoted phrase.
    Phrase(Vec<(String, u32)>),
    Tag(String),
}

impl Clause {
    fn is_negated(&self) -> bool {
        matches!(self, Clause::Term { negated: true, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub clauses: Vec<Clause>,
}

#[derive(Debug)]
enum Lexeme<'a> {
    Word(&'a str, usize),
    Quoted(&'a str, usize),
}

fn syntax(offset: usize, message: impl Into<String>) -> StoreError {
    StoreError::QuerySyntaxError { offset, message: message.into() }
}

fn lex(query: &str) -> Result<Vec<Lexeme<'_>>, StoreError> {
    let mut out = Vec::new();
    let mut chars = query.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let start = i + 1;
            let mut end = None;
            for (j, d) in chars.by_ref() {
                if d == '"' {
                    end = Some(j);
                    break;
                }
            }
            let end = end.ok_or_else(|| syntax(i, "unterminated phrase"))?;
            out.push(Lexeme::Quoted(&query[start..end], i));
        } else {
            let start = i;
            let mut end = query.len();
            while let Some(&(j, d)) = chars.peek() {
                if d.is_whitespace() || d == '"' {
                    end = j;
                    break;
                }
                chars.next();
            }
            out.push(Lexeme::Word(&query[start..end], start));
        }
    }
    Ok(out)
}

enum Operand {
    Plain(Vec<(String, u32)>),
    Tag(String),
}

fn operand(word: &str, offset: usize) -> Result<Operand, StoreError> {
    if word.len() >= 4 && word[..4].eq_ignore_ascii_case("tag:") {
        let tag = word[4..].trim_start_matches('#').to_lowercase();
        if tag.is_empty() || tag.chars().any(|c| !c.is_alphanumeric()) {
            return Err(syntax(offset, "tag: must be followed by an alphanumeric hashtag"));
        }
        return Ok(Operand::Tag(tag));
    }
    let toks: Vec<(String, u32)> = content_tokens(word);
    if tokenize(word).is_empty() {
        return Err(syntax(offset, format!("term {word:?} has no searchable characters")));
    }
    Ok(Operand::Plain(toks))
}

fn clause_of(op: Operand) -> Option<Clause> {
    match op {
        Operand::Tag(t) => Some(Clause::Tag(t)),
        Operand::Plain(mut toks) => match toks.len() {
            0 => None,
            1 => Some(Clause::Term { term: toks.remove(0).0, negated: false }),
            _ => Some(Clause::Phrase(toks)),
        },
    }
}

impl SearchQuery {
    pub fn parse(query: &str) -> Result<Self, StoreError> {
        let lexemes = lex(query)?;
        if lexemes.is_empty() {
            return Err(syntax(0, "empty query"));
        }
        let is_or = |l: &Lexeme| matches!(l, Lexeme::Word(w, _) if w.eq_ignore_ascii_case("or"));
        let mut clauses = Vec::new();
        let mut i = 0;
        while i < lexemes.len() {
            match &lexemes[i] {
                Lexeme::Quoted(p, off) => {
                    if lexemes.get(i + 1).is_some_and(is_or) {
                        return Err(syntax(*off, "phrases cannot be OR operands"));
                    }
                    let words = content_tokens(p);
                    if tokenize(p).is_empty() {
                        return Err(syntax(*off, "empty phrase"));
                    }
                    if !words.is_empty() {
                        clauses.push(Clause::Phrase(words));
                    }
                    i += 1;
                }
                Lexeme::Word(w, off) if w.eq_ignore_ascii_case("or") => {
                    return Err(syntax(*off, "OR needs a term on both sides"));
                }
                Lexeme::Word(w, off) => {
                    if let Some(rest) = w.strip_prefix('-') {
                        if rest.is_empty() {
                            return Err(syntax(*off, "'-' must be followed by a term"));
                        }
                        if lexemes.get(i + 1).is_some_and(is_or) {
                            return Err(syntax(*off, "negated terms cannot be OR operands"));
                        }
                        match operand(rest, off + 1)? {
                            Operand::Tag(_) => return Err(syntax(*off, "tag: clauses cannot be negated")),
                            Operand::Plain(toks) => {
                                for (t, _) in toks {
                                    clauses.push(Clause::Term { term: t, negated: true });
                                }
                            }
                        }
                        i += 1;
                        continue;
                    }
                    let first = operand(w, *off)?;
                    if !lexemes.get(i + 1).is_some_and(is_or) {
                        clauses.extend(clause_of(first));
                        i += 1;
                        continue;
                    }
                    let mut atoms = Vec::new();
                    let mut push_atom = |op: Operand, at: usize| -> Result<(), StoreError> {
                        match op {
                            Operand::Tag(t) => atoms.push(Atom::Tag(t)),
                            Operand::Plain(toks) if toks.len() == 1 => atoms.push(Atom::Term(toks[0].0.clone())),
                            Operand::Plain(toks) if toks.is_empty() => {}
                            Operand::Plain(_) => return Err(syntax(at, "OR operands must be single terms")),
                        }
                        Ok(())
                    };
                    push_atom(first, *off)?;
                    i += 1;
                    while lexemes.get(i).is_some_and(is_or) {
                        let or_off = match &lexemes[i] {
                            Lexeme::Word(_, o) => *o,
                            Lexeme::Quoted(_, o) => *o,
                        };
                        match lexemes.get(i + 1) {
                            Some(Lexeme::Word(w2, off2)) if !w2.eq_ignore_ascii_case("or") && !w2.starts_with('-') => {
                                push_atom(operand(w2, *off2)?, *off2)?;
                                i += 2;
                            }
                            _ => return Err(syntax(or_off, "OR needs a term on both sides")),
                        }
                    }
                    if !atoms.is_empty() {
                        clauses.push(Clause::Or(atoms));
                    }
                }
            }
        }
        Ok(SearchQuery { clauses })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> InvertedIndex {
        let mut idx = InvertedIndex::new();
        idx.add_document("d1", "hiv prep", &[]);
        idx.add_document("d2", "hiv", &[]);
        idx.add_document("d3", "prep", &[]);
        idx
    }

    fn names(hits: &[SearchHit]) -> Vec<&str> {
        hits.iter().map(|h| h.name.as_str()).collect()
    }

    #[test]
    fn implicit_and() {
        assert_eq!(names(&fixture().search("hiv prep").unwrap()), vec!["d1"]);
    }

    #[test]
    fn or_clause() {
        let hits = fixture().search("hiv OR prep").unwrap();
        assert_eq!(hits.len(), 3);
        // d1 matches both terms, so it ranks first; d2/d3 tie and fall back to doc id
        assert_eq!(names(&hits), vec!["d1", "d2", "d3"]);
        assert!(hits[0].score > hits[1].score);
    }

    #[test]
    fn negation() {
        assert_eq!(names(&fixture().search("hiv -prep").unwrap()), vec!["d2"]);
    }

    #[test]
    fn case_insensitive_keywords_and_terms() {
        assert_eq!(fixture().search("HIV or PREP").unwrap().len(), 3);
    }

    #[test]
    fn phrase_and_tag() {
        let mut idx = InvertedIndex::new();
        idx.add_document("a", "get tested for hiv today", &["prep".into()]);
        idx.add_document("b", "hiv tested get", &[]);
        assert_eq!(names(&idx.search("\"get tested\"").unwrap()), vec!["a"]);
        assert_eq!(names(&idx.search("\"tested for hiv\"").unwrap()), vec!["a"]);
        assert_eq!(names(&idx.search("tag:prep").unwrap()), vec!["a"]);
        assert_eq!(names(&idx.search("tag:#PrEP hiv").unwrap()), vec!["a"]);
        assert_eq!(names(&idx.search("tag:prep OR tested").unwrap()), vec!["a", "b"]);
    }

    #[test]
    fn syntax_errors() {
        for q in ["", "OR hiv", "hiv OR", "\"open", "-", "hiv OR -prep", "tag:", "-tag:x"] {
            assert!(
                matches!(SearchQuery::parse(q), Err(StoreError::QuerySyntaxError { .. })),
                "{q:?} should not parse"
            );
        }
    }

    #[test]
    fn tf_idf_formula() {
        let idx = fixture();
        let hits = idx.search("hiv").unwrap();
        let idf = (1.0f64 + 3.0 / 2.0).ln();
        assert!((hits[0].score - idf).abs() < 1e-12);
        assert!(idx.check_invariants());
    }

    #[test]
    fn json_dump_round_trip() {
        let idx = fixture();
        let s = serde_json::to_string(&idx).unwrap();
        let back = InvertedIndex::from_json(&s).unwrap();
        assert_eq!(back.doc_id("d2"), Some(1));
        assert_eq!(back.search("hiv").unwrap(), idx.search("hiv").unwrap());
    }
}
