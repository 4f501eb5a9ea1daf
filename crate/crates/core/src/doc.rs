use std::fmt;

use serde::{Deserialize, Serialize};

/// A document identifier. Documents are numbered `1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(u32);

impl DocId {
    /// Builds a document id from its 1-based number.
    ///
    /// Panics if `number` is zero or does not fit in `u32`.
    pub fn new(number: usize) -> Self {
        assert!(number >= 1, "document numbers start at 1");
        DocId(u32::try_from(number).expect("document number fits in u32"))
    }

    /// Builds a document id from a 0-based array index.
    pub fn from_index(index: usize) -> Self {
        DocId::new(index + 1)
    }

    /// 1-based document number.
    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// 0-based array index.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
