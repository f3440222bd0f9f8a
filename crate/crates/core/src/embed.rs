//! Word-embedding similarity boosting.
//!
//! Pre-trained embeddings get a covariance field from corpus contexts
//! (covariation of context vectors around the word vector, not a centered
//! covariance); word similarity is then the negated transformed distance
//! -sqrt(|w1-w2|^2 + lambda * bures(S_w1, S_w2)^2), evaluated against
//! human similarity judgments by Spearman correlation.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::spearman;
use crate::error::{Error, Result};
use crate::measure::euclidean;
use crate::psd::{bures_distance, SymMatrix};

/// Vocabulary of unit-norm vectors.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    pub dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn get(&self, word: &str) -> Option<&Vec<f64>> {
        self.vectors.get(word)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vectors.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &String> {
        self.vectors.keys()
    }
}

/// Parses GloVe text format (token then m reals per line) and
/// L2-normalizes every vector. Duplicate tokens keep the first occurrence.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path)?;
    parse_embeddings(std::io::BufReader::new(file))
}

pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts
            .next()
            .ok_or(Error::Parse { line: lineno + 1, msg: "empty line".into() })?
            .to_string();
        let mut vec = Vec::new();
        for p in parts {
            vec.push(p.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("bad number {p:?}"),
            })?);
        }
        if vec.is_empty() {
            return Err(Error::Parse { line: lineno + 1, msg: "no vector values".into() });
        }
        if table.dim == 0 {
            table.dim = vec.len();
        } else if vec.len() != table.dim {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("dimension {} != {}", vec.len(), table.dim),
            });
        }
        let norm = vec.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            vec.iter_mut().for_each(|v| *v /= norm);
        }
        table.vectors.entry(word).or_insert(vec);
    }
    Ok(table)
}

/// Removes words rarer than `min_count`, then independently drops each
/// surviving occurrence of word w with probability
/// max(0, 1 - sqrt(t / f(w))) where f(w) is the relative frequency in the
/// filtered stream. Deterministic under `seed`.
pub fn preprocess_corpus(
    tokens: &[String],
    min_count: usize,
    subsample_threshold: f64,
    seed: u64,
) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        *counts.entry(t).or_insert(0) += 1;
    }
    let kept: Vec<&String> = tokens
        .iter()
        .filter(|t| counts[t.as_str()] >= min_count)
        .collect();
    let total = kept.len() as f64;
    if total == 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kept.into_iter()
        .filter(|t| {
            let f = counts[t.as_str()] as f64 / total;
            let drop = (1.0 - (subsample_threshold / f).sqrt()).max(0.0);
            rng.gen_range(0.0..1.0) >= drop
        })
        .cloned()
        .collect()
}

/// Whitespace tokenization, lowercased, non-alphanumerics stripped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            t.chars()
                .filter(|c| c.is_ascii_alphanumeric())
                .collect::<String>()
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Per-word context covariation field.
#[derive(Debug, Clone)]
pub struct ContextCov {
    pub covs: HashMap<String, SymMatrix>,
    pub counts: HashMap<String, usize>,
    pub dim: usize,
}

impl ContextCov {
    /// Sigma for a word: the stored matrix, or zero for words never seen
    /// with context.
    pub fn get(&self, word: &str) -> SymMatrix {
        self.covs
            .get(word)
            .cloned()
            .unwrap_or_else(|| SymMatrix::zeros(self.dim))
    }
}

/// Covariation of in-vocabulary context vectors around the word vector:
/// (1/|c(w)|) sum (c_i - w)(c_i - w)^T over all tokens within `window`
/// positions of each occurrence of `word`. Zero matrix with no context.
pub fn context_covariance(
    word: &str,
    corpus: &[String],
    window: usize,
    table: &EmbeddingTable,
) -> Result<SymMatrix> {
    let w = table
        .get(word)
        .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))?;
    let m = table.dim;
    let mut acc = SymMatrix::zeros(m);
    let mut count = 0usize;
    for (pos, t) in corpus.iter().enumerate() {
        if t != word {
            continue;
        }
        let lo = pos.saturating_sub(window);
        let hi = (pos + window).min(corpus.len().saturating_sub(1));
        for (_, c) in (lo..=hi)
            .filter(|&k| k != pos)
            .filter_map(|k| table.get(&corpus[k]).map(|v| (k, v)))
        {
            count += 1;
            for a in 0..m {
                let da = c[a] - w[a];
                for b in a..m {
                    let v = acc.get(a, b) + da * (c[b] - w[b]);
                    acc.set(a, b, v);
                }
            }
        }
    }
    if count == 0 {
        return Ok(SymMatrix::zeros(m));
    }
    Ok(acc.scaled(1.0 / count as f64))
}

/// Builds the covariance field for every word that occurs in the corpus
/// and the table, scanning the corpus once and sharding the accumulation
/// over words.
pub fn build_context_covs(
    corpus: &[String],
    window: usize,
    table: &EmbeddingTable,
) -> ContextCov {
    // Occurrence positions per in-vocabulary word.
    let mut positions: HashMap<&str, Vec<usize>> = HashMap::new();
    for (pos, t) in corpus.iter().enumerate() {
        if table.contains(t) {
            positions.entry(t).or_default().push(pos);
        }
    }
    let m = table.dim;
    let entries: Vec<(String, SymMatrix, usize)> = positions
        .par_iter()
        .map(|(word, occs)| {
            let w = table.get(word).unwrap();
            let mut acc = SymMatrix::zeros(m);
            let mut count = 0usize;
            for &pos in occs {
                let lo = pos.saturating_sub(window);
                let hi = (pos + window).min(corpus.len() - 1);
                for k in lo..=hi {
                    if k == pos {
                        continue;
                    }
                    if let Some(c) = table.get(&corpus[k]) {
                        count += 1;
                        for a in 0..m {
                            let da = c[a] - w[a];
                            for b in a..m {
                                let v = acc.get(a, b) + da * (c[b] - w[b]);
                                acc.set(a, b, v);
                            }
                        }
                    }
                }
            }
            let cov = if count == 0 { SymMatrix::zeros(m) } else { acc.scaled(1.0 / count as f64) };
            (word.to_string(), cov, count)
        })
        .collect();
    let mut covs = HashMap::new();
    let mut counts = HashMap::new();
    for (w, c, n) in entries {
        covs.insert(w.clone(), c);
        counts.insert(w, n);
    }
    ContextCov { covs, counts, dim: m }
}

/// Similarity of two words: the negated transformed distance
/// -sqrt(|w1-w2|^2 + lambda * bures(S1,S2)^2). Higher is more similar.
pub fn gt_word_similarity(
    w1: &str,
    w2: &str,
    covs: &ContextCov,
    lambda: f64,
    table: &EmbeddingTable,
) -> Result<f64> {
    let v1 = table
        .get(w1)
        .ok_or_else(|| Error::OutOfVocabulary(w1.to_string()))?;
    let v2 = table
        .get(w2)
        .ok_or_else(|| Error::OutOfVocabulary(w2.to_string()))?;
    let loc = euclidean(v1, v2);
    if lambda == 0.0 {
        return Ok(-loc);
    }
    let dc = bures_distance(&covs.get(w1), &covs.get(w2), None)?;
    Ok(-(loc * loc + lambda * dc * dc).sqrt())
}

/// One (word, word, human score) benchmark row.
#[derive(Debug, Clone)]
pub struct BenchmarkPair {
    pub word1: String,
    pub word2: String,
    pub score: f64,
}

/// Parses `word1<TAB>word2<TAB>score` (comma also accepted); a non-numeric
/// first score field is treated as a header.
pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkPair>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains('\t') {
            line.split('\t').collect()
        } else {
            line.split(',').collect()
        };
        if fields.len() < 3 {
            return Err(Error::Parse { line: lineno + 1, msg: "expected 3 fields".into() });
        }
        match fields[2].trim().parse::<f64>() {
            Ok(score) => out.push(BenchmarkPair {
                word1: fields[0].trim().to_lowercase(),
                word2: fields[1].trim().to_lowercase(),
                score,
            }),
            Err(_) if lineno == 0 => continue, // header
            Err(_) => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad score {:?}", fields[2]),
                })
            }
        }
    }
    Ok(out)
}

/// Spearman correlation of a scorer against human judgments; pairs the
/// scorer cannot handle (out-of-vocabulary) are skipped and counted.
pub fn evaluate_benchmark<F>(pairs: &[BenchmarkPair], mut scorer: F) -> Result<(f64, usize, usize)>
where
    F: FnMut(&str, &str) -> Result<f64>,
{
    assert!(!pairs.is_empty(), "benchmark must be nonempty");
    let mut human = Vec::new();
    let mut model = Vec::new();
    let mut skipped = 0usize;
    for p in pairs {
        match scorer(&p.word1, &p.word2) {
            Ok(s) => {
                human.push(p.score);
                model.push(s);
            }
            Err(Error::OutOfVocabulary(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if human.len() < 2 {
        return Err(Error::TooFewPairs(human.len()));
    }
    let rho = spearman(&human, &model)?;
    Ok((rho, human.len(), skipped))
}

/// Per-dataset evaluation record for the JSON report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchmarkReport {
    pub dataset: String,
    pub rho_baseline: f64,
    pub rho_gt: f64,
    pub covered: usize,
    pub skipped: usize,
    pub lambda: f64,
    pub window: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_table() -> EmbeddingTable {
        let text = "a 3 4\nb 1 0\nc 0 2\n";
        parse_embeddings(std::io::Cursor::new(text)).unwrap()
    }

    #[test]
    fn loading_normalizes_and_dedups() {
        let t = fixture_table();
        assert_eq!(t.len(), 3);
        let a = t.get("a").unwrap();
        assert!((a[0] - 0.6).abs() < 1e-12 && (a[1] - 0.8).abs() < 1e-12);
        let c = t.get("c").unwrap();
        assert_eq!(c, &vec![0.0, 1.0]);

        let dup = parse_embeddings(std::io::Cursor::new("x 1 0\nx 0 1\n")).unwrap();
        assert_eq!(dup.get("x").unwrap(), &vec![1.0, 0.0]);

        let empty = parse_embeddings(std::io::Cursor::new("")).unwrap();
        assert!(empty.is_empty());

        assert!(matches!(
            parse_embeddings(std::io::Cursor::new("a 1 0\nb 1 2 3\n")),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn preprocessing_rules() {
        let toks = tokenize("The cat! The CAT the dog");
        assert_eq!(toks, vec!["the", "cat", "the", "cat", "the", "dog"]);

        // Everything frequent, threshold above max frequency: unchanged.
        let out = preprocess_corpus(&toks, 1, 1.0, 7);
        assert_eq!(out, toks);

        // Rare word removed everywhere.
        let out = preprocess_corpus(&toks, 2, 1.0, 7);
        assert!(!out.contains(&"dog".to_string()));
        assert_eq!(out.len(), 5);
    }

    #[test]
    fn subsampling_keep_rate_matches_formula() {
        // Stream where "w" has relative frequency 0.5.
        let mut toks = Vec::new();
        for i in 0..100_000 {
            toks.push(if i % 2 == 0 { "w".to_string() } else { format!("f{}", i % 20) });
        }
        let t = 1e-5;
        let out = preprocess_corpus(&toks, 1, t, 42);
        let kept_w = out.iter().filter(|x| x.as_str() == "w").count() as f64;
        let expect = 50_000.0 * (t / 0.5f64).sqrt();
        let sigma = (50_000.0 * (t / 0.5f64).sqrt()).sqrt();
        assert!(
            (kept_w - expect).abs() < 3.0 * sigma + 3.0,
            "kept {kept_w}, expected {expect}"
        );
    }

    #[test]
    fn context_covariance_cases() {
        let t = fixture_table();
        let corpus: Vec<String> = tokenize("a b a c");
        // Contexts of "a" with W=1: positions 0 -> {b}, 2 -> {b, c}.
        let cov = context_covariance("a", &corpus, 1, &t).unwrap();
        let a = t.get("a").unwrap().clone();
        let b = t.get("b").unwrap().clone();
        let c = t.get("c").unwrap().clone();
        let mut want = SymMatrix::zeros(2);
        for ctx in [&b, &b, &c] {
            for i in 0..2 {
                for j in i..2 {
                    let v = want.get(i, j) + (ctx[i] - a[i]) * (ctx[j] - a[j]) / 3.0;
                    want.set(i, j, v);
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((cov.get(i, j) - want.get(i, j)).abs() < 1e-12);
            }
        }

        // Absent from corpus: zero matrix.
        let z = context_covariance("c", &tokenize("b b b"), 2, &t).unwrap();
        assert_eq!(z.frobenius_norm(), 0.0);

        // Single context word.
        let corpus = tokenize("b c");
        let cov = context_covariance("b", &corpus, 1, &t).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((cov.get(i, j) - (c[i] - b[i]) * (c[j] - b[j])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_covs_match_single_word_route() {
        let t = fixture_table();
        let corpus = tokenize("a b a c b a c c b a");
        let batch = build_context_covs(&corpus, 2, &t);
        for w in ["a", "b", "c"] {
            let single = context_covariance(w, &corpus, 2, &t).unwrap();
            let got = batch.get(w);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((single.get(i, j) - got.get(i, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn similarity_basics() {
        let t = fixture_table();
        let corpus = tokenize("a b a c");
        let covs = build_context_covs(&corpus, 1, &t);

        let same = gt_word_similarity("a", "a", &covs, 0.5, &t).unwrap();
        assert!(same.abs() < 1e-9);

        let e = gt_word_similarity("a", "b", &covs, 0.0, &t).unwrap();
        let want = -euclidean(t.get("a").unwrap(), t.get("b").unwrap());
        assert!((e - want).abs() < 1e-12);

        // Composition oracle.
        let s = gt_word_similarity("a", "c", &covs, 0.7, &t).unwrap();
        let manual = crate::gt::gt_distance(
            t.get("a").unwrap(),
            t.get("c").unwrap(),
            &covs.get("a"),
            &covs.get("c"),
            0.7,
            None,
        )
        .unwrap();
        assert!((s + manual).abs() < 1e-12);

        assert!(matches!(
            gt_word_similarity("zzz", "a", &covs, 0.0, &t),
            Err(Error::OutOfVocabulary(_))
        ));
    }

    #[test]
    fn benchmark_evaluation() {
        let pairs: Vec<BenchmarkPair> = (0..10)
            .map(|i| BenchmarkPair {
                word1: format!("w{i}"),
                word2: format!("v{i}"),
                score: i as f64,
            })
            .collect();
        let (rho, covered, skipped) = evaluate_benchmark(&pairs, |w1, _| {
            Ok(w1[1..].parse::<f64>().unwrap())
        })
        .unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        assert_eq!((covered, skipped), (10, 0));

        let (rho, _, _) =
            evaluate_benchmark(&pairs, |w1, _| Ok(-w1[1..].parse::<f64>().unwrap())).unwrap();
        assert!((rho + 1.0).abs() < 1e-12);

        // OOV pairs are skipped and counted.
        let (_, covered, skipped) = evaluate_benchmark(&pairs, |w1, _| {
            let k: usize = w1[1..].parse().unwrap();
            if k < 3 {
                Err(Error::OutOfVocabulary(w1.to_string()))
            } else {
                Ok(k as f64)
            }
        })
        .unwrap();
        assert_eq!((covered, skipped), (7, 3));
    }

    #[test]
    fn rho_continuous_at_lambda_zero() {
        let t = fixture_table();
        let corpus = tokenize("a b a c b c a b");
        let covs = build_context_covs(&corpus, 2, &t);
        let pairs = vec![
            BenchmarkPair { word1: "a".into(), word2: "b".into(), score: 3.0 },
            BenchmarkPair { word1: "a".into(), word2: "c".into(), score: 1.0 },
            BenchmarkPair { word1: "b".into(), word2: "c".into(), score: 2.0 },
        ];
        let rho_at = |lambda: f64| {
            evaluate_benchmark(&pairs, |w1, w2| {
                gt_word_similarity(w1, w2, &covs, lambda, &t)
            })
            .unwrap()
            .0
        };
        assert!((rho_at(1e-9) - rho_at(0.0)).abs() < 1e-6);
    }
}
