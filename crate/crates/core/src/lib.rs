//! Cross-lingual word-embedding alignment from identical-token supervision.
//!
//! The crate is `no_std` (with `alloc`) and contains only the algorithmic
//! pieces: tokenization and token classification, vocabularies, embedding
//! spaces, synthetic bilingual dictionaries, orthogonal mapping with
//! self-learning, anchoring post-processing and the evaluation kernels.
//! File formats, corpus streaming and the command-line pipeline live in the
//! `anchorlex` crate.
//!
//! Enable the `parallel` feature to spread exhaustive retrieval over a rayon
//! thread pool. Results are identical for any thread count.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

mod error;
mod par;

pub mod evalkit;
pub mod lexicon;
pub mod linalg;
pub mod mapper;
pub mod refine;
pub mod retrieval;
pub mod space;
pub mod token;
pub mod vocab;

pub use crate::error::{Error, Result};
pub use crate::lexicon::{BilingualDictionary, DictPair, TestDictionary};
pub use crate::linalg::Matrix;
pub use crate::mapper::AlignmentModel;
pub use crate::refine::CrossLingualSpace;
pub use crate::retrieval::Retrieval;
pub use crate::space::EmbeddingSpace;
pub use crate::token::TokenClass;
pub use crate::vocab::Vocabulary;
