//! Term templates: the abstract syntax of a typed term before it is built
//! in a store. Lexical entries, schema mothers, rule right-hand sides and
//! CLI terms are all templates.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::lattice::{Feature, SortId, SortLattice};

/// A coreference tag such as `X` or `#1`.
pub type Tag = Arc<str>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermTemplate {
    pub tag: Option<Tag>,
    pub sort: SortId,
    pub features: Vec<(Feature, TermTemplate)>,
}

impl TermTemplate {
    pub fn sort(sort: SortId) -> Self {
        TermTemplate {
            tag: None,
            sort,
            features: Vec::new(),
        }
    }

    pub fn tag(tag: &str) -> Self {
        TermTemplate {
            tag: Some(Arc::from(tag)),
            sort: SortId::TOP,
            features: Vec::new(),
        }
    }

    pub fn with(mut self, feature: &str, value: TermTemplate) -> Self {
        self.features.push((Feature::new(feature), value));
        self
    }

    pub fn tagged(mut self, tag: &str) -> Self {
        self.tag = Some(Arc::from(tag));
        self
    }

    /// `[items | tail]` as an nelist/elist chain. `tail` defaults to elist.
    pub fn list(items: Vec<TermTemplate>, tail: Option<TermTemplate>, lists: ListSorts) -> Self {
        let mut acc = tail.unwrap_or_else(|| TermTemplate::sort(lists.elist));
        for item in items.into_iter().rev() {
            acc = TermTemplate::sort(lists.nelist).with("first", item).with("rest", acc);
        }
        acc
    }

    /// Whether this occurrence only refers to a tag (no sort or features of its own).
    pub fn is_bare_tag(&self) -> bool {
        self.tag.is_some() && self.sort == SortId::TOP && self.features.is_empty()
    }

    pub fn value(&self, feature: &str) -> Option<&TermTemplate> {
        self.features.iter().find(|(f, _)| f.as_str() == feature).map(|(_, v)| v)
    }

    /// Count of occurrences of each tag.
    pub fn tag_counts(&self) -> HashMap<Tag, usize> {
        let mut counts = HashMap::new();
        self.count_tags(&mut counts);
        counts
    }

    pub(crate) fn count_tags(&self, counts: &mut HashMap<Tag, usize>) {
        if let Some(t) = &self.tag {
            *counts.entry(t.clone()).or_default() += 1;
        }
        for (_, v) in &self.features {
            v.count_tags(counts);
        }
    }

    pub(crate) fn collect_tags(&self, out: &mut Vec<Tag>) {
        if let Some(t) = &self.tag {
            out.push(t.clone());
        }
        for (_, v) in &self.features {
            v.collect_tags(out);
        }
    }

    /// Follows `path` through the template, jumping through tag
    /// references to the occurrence that carries the tag's structure.
    pub fn resolve(&self, path: &[Feature]) -> Option<&TermTemplate> {
        let mut defs = HashMap::new();
        self.collect_defs(&mut defs);
        let mut cur = self;
        for f in path {
            if cur.features.is_empty() {
                if let Some(def) = cur.tag.as_ref().and_then(|t| defs.get(t)) {
                    cur = def;
                }
            }
            cur = cur.features.iter().find(|(g, _)| g == f).map(|(_, v)| v)?;
        }
        Some(cur)
    }

    fn collect_defs<'a>(&'a self, defs: &mut HashMap<Tag, &'a TermTemplate>) {
        if let Some(t) = &self.tag {
            if !self.features.is_empty() {
                defs.entry(t.clone()).or_insert(self);
            }
        }
        for (_, v) in &self.features {
            v.collect_defs(defs);
        }
    }

    pub fn render(&self, lattice: &SortLattice) -> String {
        let mut out = String::new();
        self.render_into(lattice, &mut out);
        out
    }

    fn render_into(&self, lattice: &SortLattice, out: &mut String) {
        if let Some(t) = &self.tag {
            out.push_str(t);
            if self.is_bare_tag() {
                return;
            }
            out.push(':');
        }
        out.push_str(lattice.name(self.sort));
        if !self.features.is_empty() {
            out.push('(');
            for (i, (f, v)) in self.features.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{f} => ");
                v.render_into(lattice, out);
            }
            out.push(')');
        }
    }
}

/// The sorts used to encode lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ListSorts {
    pub elist: SortId,
    pub nelist: SortId,
}

impl ListSorts {
    pub fn from_lattice(lattice: &SortLattice) -> Option<Self> {
        Some(ListSorts {
            elist: lattice.lookup("elist")?,
            nelist: lattice.lookup("nelist")?,
        })
    }
}
