//! Test fixtures shared by the darkscan crates: a seeded synthetic shop
//! corpus with a ground-truth manifest, a minimal HTTP server, and a tiny
//! ONNX sequence classifier.

pub mod corpus;
pub mod http;
pub mod onnx;

pub use corpus::{generate_corpus, CorpusManifest, InjectedString, PageManifest, CORPUS_SEED};
pub use http::{StubRequest, StubResponse, StubServer};
pub use onnx::{write_keyword_model, KeywordModel};
