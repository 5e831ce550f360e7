use std::collections::BTreeMap;

use super::problem::{BilevelProblem, ProblemDoc};
use crate::error::{Error, Result};

/// "flat-segment": `h ≡ 0`, so all of `C` is optimal for the follower.
pub fn flat_segment() -> ProblemDoc {
    ProblemDoc {
        name: "FS".into(),
        dim_y: 1,
        dim_x: 2,
        a: vec![vec![1.0, 1.0]],
        b: vec![1.0],
        k_lower: vec![0.0],
        k_upper: vec![1.0],
        f: "1 + 4*y[0]*(1 - y[0]) + x[0]".into(),
        h: "0".into(),
        f_convex_in_x: None,
        h_convex_in_x: None,
    }
}

/// "quad-band": unit box in `(z₁, z₂)` with slacks; the follower optimum is
/// the band `z₁ + z₂ = 1` and `f` is constant along it.
pub fn quad_band() -> ProblemDoc {
    ProblemDoc {
        name: "QB".into(),
        dim_y: 1,
        dim_x: 4,
        a: vec![vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]],
        b: vec![1.0, 1.0],
        k_lower: vec![0.0],
        k_upper: vec![1.0],
        f: "(1 + 4*y[0]*(1 - y[0]))*(1 + x[0] + x[1])".into(),
        h: "(x[0] + x[1] - 1)^2".into(),
        f_convex_in_x: None,
        h_convex_in_x: None,
    }
}

/// Named problem documents: the built-ins plus any registered by the user.
#[derive(Debug, Clone)]
pub struct Registry {
    docs: BTreeMap<String, ProblemDoc>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut docs = BTreeMap::new();
        for d in [flat_segment(), quad_band()] {
            docs.insert(d.name.clone(), d);
        }
        Self { docs }
    }
}

impl Registry {
    /// Adds a document after checking that it builds.
    pub fn register(&mut self, doc: ProblemDoc) -> Result<()> {
        doc.build()?;
        self.docs.insert(doc.name.clone(), doc);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.docs.keys().map(String::as_str).collect()
    }

    pub fn doc(&self, name: &str) -> Result<&ProblemDoc> {
        self.docs.get(name).ok_or_else(|| Error::UnknownProblem(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<BilevelProblem> {
        self.doc(name)?.build()
    }
}

/// A built-in problem by name.
pub fn registry_get(name: &str) -> Result<BilevelProblem> {
    Registry::default().get(name)
}
