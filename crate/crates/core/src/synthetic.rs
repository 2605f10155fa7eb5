//! Seeded synthetic corpora and examples for scale and property tests.
//!
//! Documents are bags of pseudo-words `w0000…`. Each example's question and
//! gold context borrow words from its gold document; distractor contexts
//! are random words, so every method has signal to find.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ContextItem, Corpus, Document, Example};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub documents: usize,
    pub examples: usize,
    pub contexts_per_example: usize,
    /// Document lengths are uniform over this inclusive range.
    pub doc_len: (usize, usize),
    pub vocabulary: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// 651 documents averaging 38.5 tokens, 1,105 examples of 10 contexts.
    fn default() -> Self {
        SyntheticSpec {
            documents: 651,
            examples: 1105,
            contexts_per_example: 10,
            doc_len: (20, 57),
            vocabulary: 4000,
            seed: 17,
        }
    }
}

pub struct Synthetic {
    pub corpus: Corpus,
    pub examples: Vec<Example>,
    /// Token count of every generated document, in corpus order.
    pub doc_lengths: Vec<usize>,
}

fn word(rng: &mut ChaCha8Rng, vocabulary: usize) -> String {
    format!("w{:04}", rng.random_range(0..vocabulary))
}

fn words(rng: &mut ChaCha8Rng, vocabulary: usize, n: usize) -> Vec<String> {
    (0..n).map(|_| word(rng, vocabulary)).collect()
}

pub fn generate(spec: &SyntheticSpec) -> Synthetic {
    assert!(spec.documents > 0 && spec.contexts_per_example > 0 && spec.doc_len.0 >= 4);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut documents = Vec::with_capacity(spec.documents);
    let mut doc_words = Vec::with_capacity(spec.documents);
    let mut doc_lengths = Vec::with_capacity(spec.documents);
    for i in 0..spec.documents {
        let len = rng.random_range(spec.doc_len.0..=spec.doc_len.1);
        let w = words(&mut rng, spec.vocabulary, len);
        documents.push(Document {
            doc_id: format!("d{i:04}"),
            text: w.join(" "),
            source: None,
        });
        doc_lengths.push(len);
        doc_words.push(w);
    }

    let mut examples = Vec::with_capacity(spec.examples);
    for e in 0..spec.examples {
        let gold = rng.random_range(0..spec.documents);
        let from_gold = |rng: &mut ChaCha8Rng, n: usize| -> Vec<String> {
            (0..n)
                .map(|_| doc_words[gold][rng.random_range(0..doc_words[gold].len())].clone())
                .collect()
        };
        let mut question = from_gold(&mut rng, 3);
        question.extend(words(&mut rng, spec.vocabulary, 2));
        let mut gold_ctx = from_gold(&mut rng, 3);
        gold_ctx.extend(words(&mut rng, spec.vocabulary, 2));

        let mut texts = vec![gold_ctx.join(" ")];
        let mut seen: HashSet<String> = texts.iter().cloned().collect();
        while texts.len() < spec.contexts_per_example {
            let t = words(&mut rng, spec.vocabulary, 5).join(" ");
            if seen.insert(t.clone()) {
                texts.push(t);
            }
        }
        let mut order: Vec<usize> = (0..texts.len()).collect();
        order.shuffle(&mut rng);
        let contexts: Vec<ContextItem> = order
            .iter()
            .enumerate()
            .map(|(slot, &t)| ContextItem::new(format!("c{slot:02}"), texts[t].clone()))
            .collect();
        let gold_slot = order.iter().position(|&t| t == 0).unwrap();
        examples.push(Example {
            example_id: format!("e{e:04}"),
            question: question.join(" "),
            gold_ctx_id: Some(contexts[gold_slot].ctx_id.clone()),
            contexts,
            gold_doc_id: format!("d{gold:04}"),
        });
    }

    Synthetic {
        corpus: Corpus::new(documents).expect("generated ids are unique"),
        examples,
        doc_lengths,
    }
}
