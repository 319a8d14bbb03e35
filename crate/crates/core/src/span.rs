use serde::{Deserialize, Serialize};

/// Half-open byte range into a source buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// True if `offset` falls inside the half-open range.
    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }

    /// True if `other` lies entirely inside `self` (end-inclusive).
    pub fn encloses(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Overlap test used for edits. An empty `other` overlaps only when it sits
    /// strictly inside `self`, so insertions at either edge do not count.
    pub fn touches(&self, other: Span) -> bool {
        if other.is_empty() {
            self.start < other.start && other.start < self.end
        } else {
            other.start < self.end && self.start < other.end
        }
    }

    pub fn shifted(&self, delta: isize) -> Span {
        Span { start: (self.start as isize + delta) as usize, end: (self.end as isize + delta) as usize }
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

impl From<std::ops::Range<usize>> for Span {
    fn from(r: std::ops::Range<usize>) -> Self {
        Span::new(r.start, r.end)
    }
}
