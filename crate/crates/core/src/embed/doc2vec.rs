//! Paragraph vectors, distributed bag-of-words variant (PV-DBOW), trained
//! with negative sampling.
//!
//! Each document vector is trained to predict the words of its document
//! against words drawn from the unigram^0.75 noise distribution. Word output
//! weights are shared across documents, so documents that share words are
//! pulled toward each other.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::table::DescriptionEmbedder;
use super::text::{preprocess, Corpus};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Doc2VecParams {
    pub vector_size: usize,
    pub min_count: usize,
    pub epochs: usize,
    /// Initial step size, decayed linearly to `min_learning_rate`.
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub negative_samples: usize,
    pub seed: u64,
}

impl Default for Doc2VecParams {
    fn default() -> Self {
        Self {
            vector_size: 3,
            min_count: 1,
            epochs: 2000,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            negative_samples: 5,
            seed: 1,
        }
    }
}

impl Doc2VecParams {
    pub fn validate(&self) -> Result<()> {
        if self.vector_size == 0 {
            return Err(Error::InvalidParameter("vector_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if self.min_count == 0 {
            return Err(Error::InvalidParameter("min_count must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.min_learning_rate >= 0.0) {
            return Err(Error::InvalidParameter(
                "learning rates must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Doc2VecModel {
    vocabulary: IndexMap<String, usize>,
    word_counts: Vec<usize>,
    /// Output (context) weight per vocabulary word, `vector_size` each.
    word_vectors: Vec<Vec<f64>>,
    doc_vectors: IndexMap<String, Vec<f64>>,
    params: Doc2VecParams,
    /// Negative-sampling objective after each epoch.
    loss_history: Vec<f64>,
    noise_cdf: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// -ln(sigmoid(x)), stable for large |x|.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn init_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let half = 0.5 / d as f64;
    (0..d).map(|_| rng.random_range(-half..half)).collect()
}

struct Sgd<'a> {
    word_vectors: &'a mut [Vec<f64>],
    noise_cdf: &'a [f64],
    negative: usize,
    update_words: bool,
}

impl Sgd<'_> {
    fn sample_noise(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.noise_cdf
            .partition_point(|&c| c < u)
            .min(self.noise_cdf.len() - 1)
    }

    /// One positive pair plus `negative` noise words for a single
    /// (document, word) occurrence.
    fn step(&mut self, doc: &mut [f64], target: usize, alpha: f64, rng: &mut ChaCha8Rng) {
        let d = doc.len();
        let mut doc_grad = vec![0.0; d];
        for k in 0..=self.negative {
            let (word, label) = if k == 0 {
                (target, 1.0)
            } else {
                let w = self.sample_noise(rng);
                if w == target {
                    continue;
                }
                (w, 0.0)
            };
            let wv = &mut self.word_vectors[word];
            let g = (label - sigmoid(dot(doc, wv))) * alpha;
            for j in 0..d {
                doc_grad[j] += g * wv[j];
            }
            if self.update_words {
                for j in 0..d {
                    wv[j] += g * doc[j];
                }
            }
        }
        for j in 0..d {
            doc[j] += doc_grad[j];
        }
    }
}

impl Doc2VecModel {
    pub fn train(corpus: &Corpus, params: &Doc2VecParams) -> Result<Self> {
        params.validate()?;
        if corpus.is_empty() {
            return Err(Error::Empty("corpus has no documents".into()));
        }

        let mut raw: IndexMap<&str, usize> = IndexMap::new();
        for doc in corpus.documents() {
            for t in &doc.tokens {
                *raw.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut vocabulary = IndexMap::new();
        let mut word_counts = Vec::new();
        for (w, c) in raw {
            if c >= params.min_count {
                vocabulary.insert(w.to_string(), word_counts.len());
                word_counts.push(c);
            }
        }
        if vocabulary.is_empty() {
            return Err(Error::EmptyVocabulary(format!(
                "no word occurs at least {} times",
                params.min_count
            )));
        }

        let powered: Vec<f64> = word_counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = powered.iter().sum();
        let mut acc = 0.0;
        let noise_cdf: Vec<f64> = powered
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();

        let d = params.vector_size;
        let mut rng = seed::rng(params.seed);
        let mut doc_vectors: Vec<Vec<f64>> = corpus
            .documents()
            .iter()
            .map(|_| init_vector(&mut rng, d))
            .collect();
        let mut word_vectors = vec![vec![0.0; d]; vocabulary.len()];

        let docs: Vec<Vec<usize>> = corpus
            .documents()
            .iter()
            .map(|doc| {
                doc.tokens
                    .iter()
                    .filter_map(|t| vocabulary.get(t).copied())
                    .collect()
            })
            .collect();
        for (doc, ids) in corpus.documents().iter().zip(&docs) {
            if ids.is_empty() {
                log::warn!("document `{}` has no in-vocabulary words", doc.tag);
            }
        }

        let mut loss_history = Vec::with_capacity(params.epochs);
        let mut order: Vec<usize> = (0..docs.len()).collect();
        let total_steps = (params.epochs * docs.len()) as f64;
        let mut step = 0usize;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &di in &order {
                let alpha = params.learning_rate
                    - (params.learning_rate - params.min_learning_rate) * step as f64 / total_steps;
                step += 1;
                let mut sgd = Sgd {
                    word_vectors: &mut word_vectors,
                    noise_cdf: &noise_cdf,
                    negative: params.negative_samples,
                    update_words: true,
                };
                for &w in &docs[di] {
                    sgd.step(&mut doc_vectors[di], w, alpha, &mut rng);
                }
            }
            loss_history.push(objective(
                &docs,
                &doc_vectors,
                &word_vectors,
                &noise_cdf,
                params.negative_samples,
            ));
        }

        Ok(Self {
            vocabulary,
            word_counts,
            word_vectors,
            doc_vectors: corpus
                .documents()
                .iter()
                .map(|d| d.tag.clone())
                .zip(doc_vectors)
                .collect(),
            params: params.clone(),
            loss_history,
            noise_cdf,
        })
    }

    pub fn params(&self) -> &Doc2VecParams {
        &self.params
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.vocabulary.keys().map(String::as_str)
    }

    pub fn word_count(&self, word: &str) -> Option<usize> {
        self.vocabulary.get(word).map(|&i| self.word_counts[i])
    }

    pub fn word_vector(&self, word: &str) -> Option<&[f64]> {
        self.vocabulary
            .get(word)
            .map(|&i| self.word_vectors[i].as_slice())
    }

    pub fn doc_vector(&self, tag: &str) -> Option<&[f64]> {
        self.doc_vectors.get(tag).map(Vec::as_slice)
    }

    pub fn doc_tags(&self) -> impl Iterator<Item = &str> {
        self.doc_vectors.keys().map(String::as_str)
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    /// Fit a fresh document vector to `tokens` with the word weights frozen.
    /// Returns the zero vector when no token is in the vocabulary.
    pub fn infer_vector(&self, tokens: &[String], epochs: usize, seed: u64) -> Vec<f64> {
        let ids: Vec<usize> = tokens
            .iter()
            .filter_map(|t| self.vocabulary.get(t).copied())
            .collect();
        let d = self.params.vector_size;
        if ids.is_empty() {
            log::warn!("no in-vocabulary tokens in {tokens:?}; using the zero vector");
            return vec![0.0; d];
        }
        let mut rng = seed::rng(seed);
        let mut doc = init_vector(&mut rng, d);
        let mut words = self.word_vectors.clone();
        let mut sgd = Sgd {
            word_vectors: &mut words,
            noise_cdf: &self.noise_cdf,
            negative: self.params.negative_samples,
            update_words: false,
        };
        let epochs = epochs.max(1);
        let (a0, a1) = (self.params.learning_rate, self.params.min_learning_rate);
        for e in 0..epochs {
            let alpha = a0 - (a0 - a1) * e as f64 / epochs as f64;
            for &w in &ids {
                sgd.step(&mut doc, w, alpha, &mut rng);
            }
        }
        doc
    }
}

/// Negative-sampling objective with the noise term taken in expectation,
/// so that it is a deterministic function of the current weights.
fn objective(
    docs: &[Vec<usize>],
    doc_vectors: &[Vec<f64>],
    word_vectors: &[Vec<f64>],
    noise_cdf: &[f64],
    negative: usize,
) -> f64 {
    let probs: Vec<f64> = noise_cdf
        .iter()
        .scan(0.0, |prev, &c| {
            let p = c - *prev;
            *prev = c;
            Some(p)
        })
        .collect();
    let mut total = 0.0;
    for (ids, dv) in docs.iter().zip(doc_vectors) {
        if ids.is_empty() {
            continue;
        }
        let noise: f64 = word_vectors
            .iter()
            .zip(&probs)
            .map(|(wv, p)| p * neg_log_sigmoid(-dot(dv, wv)))
            .sum();
        for &w in ids {
            total += neg_log_sigmoid(dot(dv, &word_vectors[w])) + negative as f64 * noise;
        }
    }
    total
}

/// Trained doc vectors for known descriptions; inference for anything else.
impl DescriptionEmbedder for Doc2VecModel {
    fn dimension(&self) -> usize {
        self.params.vector_size
    }

    fn embed(&self, description: &str) -> Result<Vec<f64>> {
        if let Some(v) = self.doc_vector(description) {
            return Ok(v.to_vec());
        }
        Ok(self.infer_vector(
            &preprocess(description),
            self.params.epochs,
            seed::derive(self.params.seed, &[0x1f3e]),
        ))
    }
}

pub fn train_doc2vec(corpus: &Corpus, params: &Doc2VecParams) -> Result<Doc2VecModel> {
    Doc2VecModel::train(corpus, params)
}
