//! Corpus ingestion: JSONL parsing, keyword filtering, loading into the
//! store, and the seeded synthetic corpus generator.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use chrono::DateTime;
use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::IngestError;
use crate::store::text::tokenize;
use crate::store::Store;

/// One ingested post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub author_id: String,
    pub created_at: i64,
    pub text: String,
    pub hashtags: Vec<String>,
    pub mentions: Vec<String>,
    pub reply_to: Option<String>,
    pub retweet_of: Option<String>,
}

impl TweetRecord {
    pub fn is_retweet(&self) -> bool {
        self.retweet_of.is_some()
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.hashtags.iter().any(|h| h == tag)
    }

    /// Serializes in the external JSONL schema.
    pub fn to_json_line(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("id".into(), Json::from(self.tweet_id.clone()));
        obj.insert("author_id".into(), Json::from(self.author_id.clone()));
        obj.insert("created_at".into(), Json::from(self.created_at));
        obj.insert("text".into(), Json::from(self.text.clone()));
        obj.insert("hashtags".into(), Json::from(self.hashtags.clone()));
        obj.insert("mentions".into(), Json::from(self.mentions.clone()));
        if let Some(r) = &self.reply_to {
            obj.insert("reply_to".into(), Json::from(r.clone()));
        }
        if let Some(r) = &self.retweet_of {
            obj.insert("retweet_of".into(), Json::from(r.clone()));
        }
        Json::Object(obj).to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records_read: usize,
    pub records_kept: usize,
    pub records_rejected: usize,
    pub distinct_authors: usize,
    pub distinct_hashtags: usize,
    pub time_span: Option<(i64, i64)>,
}

impl CorpusStats {
    pub fn of(records: &[TweetRecord]) -> Self {
        let authors: BTreeSet<&str> = records.iter().map(|r| r.author_id.as_str()).collect();
        let tags: BTreeSet<&str> = records.iter().flat_map(|r| r.hashtags.iter().map(String::as_str)).collect();
        let span = records.iter().map(|r| r.created_at).fold(None, |acc, t| match acc {
            None => Some((t, t)),
            Some((lo, hi)) => Some((lo.min(t), hi.max(t))),
        });
        CorpusStats {
            records_read: records.len(),
            records_kept: records.len(),
            records_rejected: 0,
            distinct_authors: authors.len(),
            distinct_hashtags: tags.len(),
            time_span: span,
        }
    }
}

/// Strips leading `#`, lowercases, drops empties, de-duplicates keeping the
/// first occurrence.
pub fn normalize_hashtags<I, S>(tags: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in tags {
        let norm = t.as_ref().trim().trim_start_matches('#').to_lowercase();
        if norm.is_empty() || norm.contains('#') {
            continue;
        }
        if seen.insert(norm.clone()) {
            out.push(norm);
        }
    }
    out
}

/// Hashtags written inline as `#` followed by alphanumerics.
pub fn extract_hashtags(text: &str) -> Vec<String> {
    let mut raw = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c != '#' {
            continue;
        }
        let start = i + 1;
        let mut end = start;
        while let Some(&(j, d)) = chars.peek() {
            if d.is_alphanumeric() {
                end = j + d.len_utf8();
                chars.next();
            } else {
                break;
            }
        }
        if end > start {
            raw.push(&text[start..end]);
        }
    }
    normalize_hashtags(raw)
}

fn required_str(obj: &serde_json::Map<String, Json>, key: &str) -> Result<String, IngestError> {
    match obj.get(key) {
        Some(Json::String(s)) if !s.is_empty() => Ok(s.clone()),
        Some(Json::String(_)) => Err(IngestError::MalformedRecord(format!("{key} is empty"))),
        Some(_) => Err(IngestError::MalformedRecord(format!("{key} is not a string"))),
        None => Err(IngestError::MalformedRecord(format!("missing {key}"))),
    }
}

fn optional_str(obj: &serde_json::Map<String, Json>, key: &str) -> Result<Option<String>, IngestError> {
    match obj.get(key) {
        None | Some(Json::Null) => Ok(None),
        Some(Json::String(s)) if s.is_empty() => Ok(None),
        Some(Json::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(IngestError::MalformedRecord(format!("{key} is not a string"))),
    }
}

fn string_list(obj: &serde_json::Map<String, Json>, key: &str) -> Result<Option<Vec<String>>, IngestError> {
    match obj.get(key) {
        None | Some(Json::Null) => Ok(None),
        Some(Json::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| IngestError::MalformedRecord(format!("{key} contains a non-string")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(_) => Err(IngestError::MalformedRecord(format!("{key} is not an array"))),
    }
}

/// Parses an ISO-8601 UTC timestamp or integer epoch seconds.
pub fn parse_timestamp(v: &Json) -> Result<i64, IngestError> {
    let t = match v {
        Json::Number(n) => {
            n.as_i64().ok_or_else(|| IngestError::MalformedRecord(format!("created_at {n} is not an integer")))?
        }
        Json::String(s) => DateTime::parse_from_rfc3339(s.trim())
            .map_err(|e| IngestError::MalformedRecord(format!("created_at {s:?}: {e}")))?
            .timestamp(),
        _ => return Err(IngestError::MalformedRecord("created_at must be a string or integer".into())),
    };
    if t < 0 {
        return Err(IngestError::MalformedRecord("created_at before 1970".into()));
    }
    Ok(t)
}

/// Parses one JSONL line of the external record schema.
pub fn parse_tweet_record(line: &str) -> Result<TweetRecord, IngestError> {
    let json: Json =
        serde_json::from_str(line).map_err(|e| IngestError::MalformedRecord(format!("invalid JSON: {e}")))?;
    let obj = json.as_object().ok_or_else(|| IngestError::MalformedRecord("record is not an object".into()))?;
    let tweet_id = required_str(obj, "id")?;
    let author_id = required_str(obj, "author_id")?;
    let created_at = parse_timestamp(
        obj.get("created_at").ok_or_else(|| IngestError::MalformedRecord("missing created_at".into()))?,
    )?;
    let text = match obj.get("text") {
        Some(Json::String(s)) => s.clone(),
        Some(_) => return Err(IngestError::MalformedRecord("text is not a string".into())),
        None => return Err(IngestError::MalformedRecord("missing text".into())),
    };
    let hashtags = match string_list(obj, "hashtags")? {
        Some(tags) => normalize_hashtags(tags),
        None => extract_hashtags(&text),
    };
    let mut seen = HashSet::new();
    let mentions = string_list(obj, "mentions")?
        .unwrap_or_default()
        .into_iter()
        .map(|m| m.trim().trim_start_matches('@').to_string())
        .filter(|m| !m.is_empty() && seen.insert(m.clone()))
        .collect();
    Ok(TweetRecord {
        tweet_id,
        author_id,
        created_at,
        text,
        hashtags,
        mentions,
        reply_to: optional_str(obj, "reply_to")?,
        retweet_of: optional_str(obj, "retweet_of")?,
    })
}

/// True iff some keyword is a case-insensitive token of the text or equals
/// one of the record's hashtags.
pub fn keyword_filter(record: &TweetRecord, keywords: &[String]) -> bool {
    let tokens: HashSet<String> = tokenize(&record.text).into_iter().collect();
    keywords.iter().any(|k| {
        let k = k.to_lowercase();
        tokens.contains(&k) || record.hashtags.iter().any(|h| *h == k)
    })
}

/// Parses and filters a whole JSONL document. Rejected lines are logged and
/// counted; the caller decides what to do with the kept records.
pub fn parse_corpus(
    contents: &str,
    keywords: Option<&[String]>,
    known_ids: impl Fn(&str) -> bool,
) -> (Vec<TweetRecord>, CorpusStats) {
    let keywords = keywords.filter(|k| !k.is_empty());
    let mut kept = Vec::new();
    let mut ids = HashSet::new();
    let mut stats = CorpusStats::default();
    for (lineno, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        stats.records_read += 1;
        let rec = match parse_tweet_record(line) {
            Ok(r) => r,
            Err(e) => {
                warn!("line {}: rejected: {e}", lineno + 1);
                stats.records_rejected += 1;
                continue;
            }
        };
        if known_ids(&rec.tweet_id) || !ids.insert(rec.tweet_id.clone()) {
            warn!("line {}: rejected: duplicate id {}", lineno + 1, rec.tweet_id);
            stats.records_rejected += 1;
            continue;
        }
        if let Some(kw) = keywords {
            if !keyword_filter(&rec, kw) {
                stats.records_rejected += 1;
                continue;
            }
        }
        kept.push(rec);
    }
    let summary = CorpusStats::of(&kept);
    stats.records_kept = kept.len();
    stats.distinct_authors = summary.distinct_authors;
    stats.distinct_hashtags = summary.distinct_hashtags;
    stats.time_span = summary.time_span;
    (kept, stats)
}

/// Loads a JSONL corpus into the store's base tables.
///
/// Every line is validated before anything is inserted; the insert itself is
/// all-or-nothing.
pub fn load_corpus(path: &Path, keywords: Option<&[String]>, store: &mut Store) -> Result<CorpusStats, IngestError> {
    let contents = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::FileNotFound(path.display().to_string()),
        _ => IngestError::Io(format!("{}: {e}", path.display())),
    })?;
    let (kept, stats) = parse_corpus(&contents, keywords, |id| store.contains_tweet(id));
    if kept.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    store.insert_records(kept).map_err(|e| IngestError::Io(e.to_string()))?;
    Ok(stats)
}

/// A hashtag/word vocabulary that a group of authors tweets about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCluster {
    pub name: String,
    pub hashtags: Vec<String>,
    pub words: Vec<String>,
}

/// Extra tweets carrying `tag` in hours `[start_hour, start_hour + hours)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstInjection {
    pub tag: String,
    pub start_hour: u32,
    pub hours: u32,
    pub multiplier: f64,
}

/// An author that many others mention and who mentions many others back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubSpec {
    pub author: usize,
    /// Probability that a base tweet mentions the hub.
    pub inbound_rate: f64,
    /// Number of extra tweets the hub posts, each mentioning a random author.
    pub outbound_mentions: usize,
}

fn default_tags_per_tweet() -> usize {
    2
}

fn default_words_per_tweet() -> usize {
    8
}

fn default_mention_rate() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub authors: usize,
    pub tweets: usize,
    /// First hour of the corpus, epoch seconds (floored to the hour).
    pub start: i64,
    pub span_hours: u32,
    pub clusters: Vec<TopicCluster>,
    #[serde(default = "default_tags_per_tweet")]
    pub tags_per_tweet: usize,
    #[serde(default = "default_words_per_tweet")]
    pub words_per_tweet: usize,
    #[serde(default)]
    pub bursts: Vec<BurstInjection>,
    #[serde(default = "default_mention_rate")]
    pub mention_rate: f64,
    #[serde(default)]
    pub hubs: Vec<HubSpec>,
    #[serde(default)]
    pub reply_rate: f64,
    #[serde(default)]
    pub retweet_rate: f64,
}

impl SyntheticConfig {
    fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: &str| Err(IngestError::InvalidConfig(m.to_string()));
        if self.authors == 0 {
            return bad("authors must be positive");
        }
        if self.tweets == 0 {
            return bad("tweets must be positive");
        }
        if self.span_hours == 0 {
            return bad("span_hours must be positive");
        }
        if self.clusters.is_empty() {
            return bad("at least one topic cluster is required");
        }
        if self.clusters.iter().any(|c| c.hashtags.is_empty() || c.words.is_empty()) {
            return bad("every cluster needs hashtags and words");
        }
        if self.tags_per_tweet == 0 {
            return bad("tags_per_tweet must be positive");
        }
        for b in &self.bursts {
            if self.cluster_of_tag(&b.tag).is_none() {
                return bad(&format!("burst tag {} is in no cluster", b.tag));
            }
            if b.multiplier < 0.0 || b.start_hour + b.hours > self.span_hours {
                return bad(&format!("burst on {} is outside the time span", b.tag));
            }
        }
        if self.hubs.iter().any(|h| h.author >= self.authors) {
            return bad("hub author index out of range");
        }
        for p in [self.mention_rate, self.reply_rate, self.retweet_rate] {
            if !(0.0..=1.0).contains(&p) {
                return bad("rates must lie in [0, 1]");
            }
        }
        Ok(())
    }

    /// A three-topic corpus over two weeks with one health hashtag burst
    /// (`worldaidsday`, hour 200) and one hub author (`u00003`) in the
    /// health cluster.
    pub fn walkthrough(tweets: usize) -> Self {
        let cluster = |name: &str, tags: &[&str], words: &[&str]| TopicCluster {
            name: name.into(),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            words: words.iter().map(|s| s.to_string()).collect(),
        };
        SyntheticConfig {
            authors: 300,
            tweets,
            start: 1_700_000_000,
            span_hours: 336,
            clusters: vec![
                cluster(
                    "health",
                    &["hiv", "aids", "prep", "hivtesting", "worldaidsday", "endhiv"],
                    &[
                        "testing",
                        "clinic",
                        "virus",
                        "treatment",
                        "prevention",
                        "awareness",
                        "status",
                        "care",
                        "stigma",
                        "free",
                    ],
                ),
                cluster(
                    "sports",
                    &["football", "nba", "worldcup", "marathon", "tennis"],
                    &["match", "score", "team", "goal", "league", "season", "coach", "fans", "win", "final"],
                ),
                cluster(
                    "politics",
                    &["election", "vote", "senate", "policy", "debate"],
                    &[
                        "ballot",
                        "campaign",
                        "candidate",
                        "poll",
                        "congress",
                        "law",
                        "budget",
                        "voters",
                        "speech",
                        "party",
                    ],
                ),
            ],
            tags_per_tweet: 2,
            words_per_tweet: 8,
            bursts: vec![BurstInjection { tag: "worldaidsday".into(), start_hour: 200, hours: 1, multiplier: 16.0 }],
            mention_rate: 0.2,
            hubs: vec![HubSpec { author: 3, inbound_rate: 0.05, outbound_mentions: 60 }],
            reply_rate: 0.05,
            retweet_rate: 0.0,
        }
    }

    fn cluster_of_tag(&self, tag: &str) -> Option<usize> {
        self.clusters.iter().position(|c| c.hashtags.iter().any(|h| h == tag))
    }

    pub fn author_id(i: usize) -> String {
        format!("u{i:05}")
    }

    fn author_cluster(&self, author: usize) -> usize {
        author % self.clusters.len()
    }

    /// Expected hourly count of `tag` among base tweets (bursts excluded).
    pub fn base_hourly_rate(&self, tag: &str) -> f64 {
        let Some(c) = self.cluster_of_tag(tag) else {
            return 0.0;
        };
        let authors_in = (0..self.authors).filter(|&a| self.author_cluster(a) == c).count();
        let p_cluster = authors_in as f64 / self.authors as f64;
        let size = self.clusters[c].hashtags.len();
        let p_tag = self.tags_per_tweet.min(size) as f64 / size as f64;
        self.tweets as f64 / self.span_hours as f64 * p_cluster * p_tag
    }

    /// Extra tweets injected per burst hour.
    pub fn burst_extra_per_hour(&self, b: &BurstInjection) -> usize {
        ((b.multiplier * self.base_hourly_rate(&b.tag)).ceil() as usize).max(1)
    }
}

struct Draft {
    author: usize,
    created_at: i64,
    hashtags: Vec<String>,
    words: Vec<String>,
    mentions: Vec<usize>,
}

fn sample_tags(rng: &mut ChaCha8Rng, pool: &[String], n: usize, forced: Option<&str>) -> Vec<String> {
    let mut candidates: Vec<&String> = pool.iter().filter(|t| Some(t.as_str()) != forced).collect();
    candidates.shuffle(rng);
    let mut out: Vec<String> = forced.map(str::to_string).into_iter().collect();
    for t in candidates {
        if out.len() >= n {
            break;
        }
        out.push(t.clone());
    }
    out
}

/// Generates a deterministic corpus: each author belongs to one topic
/// cluster, and each tweet draws its hashtags and words from that cluster.
pub fn generate_synthetic_corpus(config: &SyntheticConfig, seed: u64) -> Result<Vec<TweetRecord>, IngestError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = config.start.div_euclid(3600) * 3600;
    let mut drafts = Vec::with_capacity(config.tweets);

    let random_other = |rng: &mut ChaCha8Rng, me: usize| -> Option<usize> {
        if config.authors < 2 {
            return None;
        }
        let mut o = rng.random_range(0..config.authors - 1);
        if o >= me {
            o += 1;
        }
        Some(o)
    };

    for _ in 0..config.tweets {
        let author = rng.random_range(0..config.authors);
        let hour = rng.random_range(0..config.span_hours) as i64;
        let created_at = start + hour * 3600 + rng.random_range(0..3600);
        let cluster = &config.clusters[config.author_cluster(author)];
        let hashtags = sample_tags(&mut rng, &cluster.hashtags, config.tags_per_tweet, None);
        let words = (0..config.words_per_tweet)
            .map(|_| cluster.words[rng.random_range(0..cluster.words.len())].clone())
            .collect();
        let mut mentions = Vec::new();
        if rng.random_bool(config.mention_rate) {
            mentions.extend(random_other(&mut rng, author));
        }
        for hub in &config.hubs {
            if hub.author != author && rng.random_bool(hub.inbound_rate) {
                mentions.push(hub.author);
            }
        }
        drafts.push(Draft { author, created_at, hashtags, words, mentions });
    }

    for b in &config.bursts {
        let c = config.cluster_of_tag(&b.tag).expect("validated");
        let cluster = &config.clusters[c];
        let members: Vec<usize> = (0..config.authors).filter(|&a| config.author_cluster(a) == c).collect();
        let extra = config.burst_extra_per_hour(b);
        for h in b.start_hour..b.start_hour + b.hours {
            for _ in 0..extra {
                let author = members[rng.random_range(0..members.len())];
                let created_at = start + h as i64 * 3600 + rng.random_range(0..3600);
                let hashtags = sample_tags(&mut rng, &cluster.hashtags, config.tags_per_tweet, Some(&b.tag));
                let words = (0..config.words_per_tweet)
                    .map(|_| cluster.words[rng.random_range(0..cluster.words.len())].clone())
                    .collect();
                drafts.push(Draft { author, created_at, hashtags, words, mentions: Vec::new() });
            }
        }
    }

    for hub in &config.hubs {
        let cluster = &config.clusters[config.author_cluster(hub.author)];
        for _ in 0..hub.outbound_mentions {
            let hour = rng.random_range(0..config.span_hours) as i64;
            let created_at = start + hour * 3600 + rng.random_range(0..3600);
            let hashtags = sample_tags(&mut rng, &cluster.hashtags, config.tags_per_tweet, None);
            let words = (0..config.words_per_tweet)
                .map(|_| cluster.words[rng.random_range(0..cluster.words.len())].clone())
                .collect();
            let mentions = random_other(&mut rng, hub.author).into_iter().collect();
            drafts.push(Draft { author: hub.author, created_at, hashtags, words, mentions });
        }
    }

    // stable: equal timestamps keep generation order
    drafts.sort_by_key(|d| d.created_at);
    let mut out: Vec<TweetRecord> = Vec::with_capacity(drafts.len());
    for (k, d) in drafts.into_iter().enumerate() {
        let mut mentions: Vec<String> = Vec::new();
        for m in d.mentions {
            let id = SyntheticConfig::author_id(m);
            if !mentions.contains(&id) {
                mentions.push(id);
            }
        }
        let mut text = d.words.join(" ");
        for t in &d.hashtags {
            text.push_str(" #");
            text.push_str(t);
        }
        for m in &mentions {
            text.push_str(" @");
            text.push_str(m);
        }
        let reply_to = (k > 0 && config.reply_rate > 0.0 && rng.random_bool(config.reply_rate))
            .then(|| out[rng.random_range(0..k)].tweet_id.clone());
        let retweet_of = (k > 0 && config.retweet_rate > 0.0 && rng.random_bool(config.retweet_rate))
            .then(|| out[rng.random_range(0..k)].tweet_id.clone());
        out.push(TweetRecord {
            tweet_id: format!("t{k:06}"),
            author_id: SyntheticConfig::author_id(d.author),
            created_at: d.created_at,
            text,
            hashtags: normalize_hashtags(&d.hashtags),
            mentions,
            reply_to,
            retweet_of,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashtags_normalized_and_deduplicated() {
        let r =
            parse_tweet_record(r#"{"id":"1","author_id":"a","created_at":0,"text":"Get #PrEP now #prep"}"#).unwrap();
        assert_eq!(r.hashtags, vec!["prep"]);
    }

    #[test]
    fn explicit_hashtags_win_over_text() {
        let r = parse_tweet_record(
            r##"{"id":"1","author_id":"a","created_at":0,"text":"#x","hashtags":["#HIV","hiv","Aids"]}"##,
        )
        .unwrap();
        assert_eq!(r.hashtags, vec!["hiv", "aids"]);
    }

    #[test]
    fn missing_id_is_malformed() {
        let e = parse_tweet_record(r#"{"author_id":"a","created_at":0,"text":"x"}"#).unwrap_err();
        assert!(matches!(e, IngestError::MalformedRecord(_)));
    }

    #[test]
    fn unparseable_timestamp_is_malformed() {
        for ts in [r#""yesterday""#, "-5", "1.5", "true"] {
            let line = format!(r#"{{"id":"1","author_id":"a","created_at":{ts},"text":"x"}}"#);
            assert!(parse_tweet_record(&line).is_err(), "{ts}");
        }
    }

    /// Days-from-civil conversion, written independently of chrono.
    fn epoch_oracle(y: i64, m: i64, d: i64, hh: i64, mm: i64, ss: i64) -> i64 {
        let y = if m <= 2 { y - 1 } else { y };
        let era = y.div_euclid(400);
        let yoe = y - era * 400;
        let mp = (m + 9) % 12;
        let doy = (153 * mp + 2) / 5 + d - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        let days = era * 146_097 + doe - 719_468;
        days * 86_400 + hh * 3600 + mm * 60 + ss
    }

    #[test]
    fn iso_timestamp_matches_oracle() {
        let expected = epoch_oracle(2019, 3, 1, 10, 15, 0);
        assert_eq!(expected, 1_551_435_300);
        let r =
            parse_tweet_record(r#"{"id":"1","author_id":"a","created_at":"2019-03-01T10:15:00Z","text":"x"}"#).unwrap();
        assert_eq!(r.created_at, expected);
        let r = parse_tweet_record(r#"{"id":"1","author_id":"a","created_at":"2019-03-01T12:15:00+02:00","text":"x"}"#)
            .unwrap();
        assert_eq!(r.created_at, expected);
    }

    fn rec(text: &str, tags: &[&str]) -> TweetRecord {
        TweetRecord {
            tweet_id: "t".into(),
            author_id: "a".into(),
            created_at: 0,
            text: text.into(),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            mentions: vec![],
            reply_to: None,
            retweet_of: None,
        }
    }

    #[test]
    fn keyword_filter_cases() {
        let kw = vec!["hiv".to_string()];
        assert!(keyword_filter(&rec("HIV testing today", &[]), &kw));
        assert!(!keyword_filter(&rec("shiver", &[]), &kw));
        assert!(keyword_filter(&rec("nothing here", &["prep"]), &["prep".to_string()]));
        assert!(keyword_filter(&rec("test-hiv-now", &[]), &kw));
    }

    #[test]
    fn synthetic_rejects_empty() {
        let mut c = small_config();
        c.tweets = 0;
        assert!(matches!(generate_synthetic_corpus(&c, 1), Err(IngestError::InvalidConfig(_))));
        let mut c = small_config();
        c.authors = 0;
        assert!(generate_synthetic_corpus(&c, 1).is_err());
    }

    pub(crate) fn small_config() -> SyntheticConfig {
        SyntheticConfig {
            authors: 20,
            tweets: 400,
            start: 1_551_398_400,
            span_hours: 48,
            clusters: vec![
                TopicCluster {
                    name: "health".into(),
                    hashtags: vec!["hiv".into(), "prep".into(), "aids".into()],
                    words: vec!["testing".into(), "clinic".into(), "condom".into()],
                },
                TopicCluster {
                    name: "sports".into(),
                    hashtags: vec!["nba".into(), "finals".into()],
                    words: vec!["game".into(), "score".into()],
                },
            ],
            tags_per_tweet: 2,
            words_per_tweet: 5,
            bursts: vec![BurstInjection { tag: "prep".into(), start_hour: 10, hours: 1, multiplier: 10.0 }],
            mention_rate: 0.3,
            hubs: vec![],
            reply_rate: 0.05,
            retweet_rate: 0.05,
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let c = small_config();
        let a = generate_synthetic_corpus(&c, 7).unwrap();
        let b = generate_synthetic_corpus(&c, 7).unwrap();
        let ser = |v: &[TweetRecord]| v.iter().map(|r| r.to_json_line()).collect::<Vec<_>>().join("\n");
        assert_eq!(ser(&a), ser(&b));
        let c2 = generate_synthetic_corpus(&c, 8).unwrap();
        assert_ne!(ser(&a), ser(&c2));
    }

    #[test]
    fn burst_hour_reaches_multiplier() {
        let c = small_config();
        let recs = generate_synthetic_corpus(&c, 3).unwrap();
        let h0 = c.start + 10 * 3600;
        // independent scan of the generated output
        let count = recs
            .iter()
            .filter(|r| r.created_at >= h0 && r.created_at < h0 + 3600)
            .filter(|r| r.hashtags.iter().any(|t| t == "prep"))
            .count();
        assert!(count as f64 >= 10.0 * c.base_hourly_rate("prep"), "{count}");
        for r in &recs {
            assert!(r.hashtags.iter().all(|h| !h.is_empty() && !h.contains('#') && *h == h.to_lowercase()));
        }
    }

    #[test]
    fn generated_lines_parse_back() {
        let recs = generate_synthetic_corpus(&small_config(), 11).unwrap();
        for r in recs.iter().take(50) {
            assert_eq!(&parse_tweet_record(&r.to_json_line()).unwrap(), r);
        }
    }
}
