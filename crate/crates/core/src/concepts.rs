//! The lifted concept repository (domain → topic → concept) and uniform
//! sampling of concept pairs for NL statement generation.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::hash;
use crate::statement::Concept;

/// The bundled undergraduate repository.
pub const UNDERGRAD_YAML: &str = include_str!("../fixtures/undergrad.yaml");

#[derive(Debug, thiserror::Error)]
pub enum RepoError {
    #[error("cannot read {path}")]
    Io { path: String, source: std::io::Error },
    #[error("parse failure: {0}")]
    Parse(String),
    #[error("no concepts")]
    Empty,
    #[error("duplicate concept ({domain}, {topic}, {name})")]
    Duplicate {
        domain: String,
        topic: String,
        name: String,
    },
    #[error("topic '{topic}' in domain '{domain}' has no concepts")]
    EmptyTopic { domain: String, topic: String },
    #[error("empty {0} name")]
    EmptyName(&'static str),
    #[error("need at least two concepts to sample a pair, repository has {0}")]
    TooFewConcepts(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RepoCounts {
    pub domains: usize,
    pub topics: usize,
    pub concepts: usize,
}

#[derive(Debug, Clone)]
pub struct ConceptRepository {
    concepts: Vec<Concept>,
    /// domain → topic → indices into `concepts`, in file order.
    index: BTreeMap<String, BTreeMap<String, Vec<usize>>>,
    content_hash: String,
}

impl ConceptRepository {
    /// Builds and validates a repository from (domain, topic, concept) rows.
    /// `declared_topics` lists topics that must be nonempty even if no row
    /// names them.
    pub fn from_rows(
        rows: Vec<(String, String, String)>,
        declared_topics: &[(String, String)],
    ) -> Result<Self, RepoError> {
        for (domain, topic) in declared_topics {
            if !rows.iter().any(|(d, t, _)| d == domain && t == topic) {
                return Err(RepoError::EmptyTopic {
                    domain: domain.clone(),
                    topic: topic.clone(),
                });
            }
        }
        if rows.is_empty() {
            return Err(RepoError::Empty);
        }
        let mut seen = HashSet::new();
        let mut concepts = Vec::with_capacity(rows.len());
        let mut index: BTreeMap<String, BTreeMap<String, Vec<usize>>> = BTreeMap::new();
        for (domain, topic, name) in rows {
            let (domain, topic, name) = (
                domain.trim().to_string(),
                topic.trim().to_string(),
                name.trim().to_string(),
            );
            if domain.is_empty() {
                return Err(RepoError::EmptyName("domain"));
            }
            if topic.is_empty() {
                return Err(RepoError::EmptyName("topic"));
            }
            if name.is_empty() {
                return Err(RepoError::EmptyName("concept"));
            }
            if !seen.insert((domain.clone(), topic.clone(), name.clone())) {
                return Err(RepoError::Duplicate { domain, topic, name });
            }
            let id = hash::short_id("c", &[domain.as_bytes(), topic.as_bytes(), name.as_bytes()]);
            index
                .entry(domain.clone())
                .or_default()
                .entry(topic.clone())
                .or_default()
                .push(concepts.len());
            concepts.push(Concept {
                id,
                name,
                topic,
                domain,
            });
        }
        let mut keys: Vec<String> = concepts
            .iter()
            .map(|c| format!("{}\u{0}{}\u{0}{}", c.domain, c.topic, c.name))
            .collect();
        keys.sort();
        let content_hash = hash::sha256_hex(keys.join("\n").as_bytes());
        Ok(Self {
            concepts,
            index,
            content_hash,
        })
    }

    pub fn from_yaml_str(text: &str) -> Result<Self, RepoError> {
        if text.trim().is_empty() {
            return Err(RepoError::Empty);
        }
        let doc: serde_yaml::Value = serde_yaml::from_str(text).map_err(|e| RepoError::Parse(e.to_string()))?;
        let domains = match doc {
            serde_yaml::Value::Mapping(m) => m,
            serde_yaml::Value::Null => return Err(RepoError::Empty),
            _ => return Err(RepoError::Parse("top level must map domains to topics".into())),
        };
        let mut rows = Vec::new();
        let mut declared = Vec::new();
        for (domain, topics) in domains {
            let domain = scalar(&domain)?;
            let topics = match topics {
                serde_yaml::Value::Mapping(m) => m,
                serde_yaml::Value::Null => return Err(RepoError::Parse(format!("domain '{domain}' has no topics"))),
                _ => return Err(RepoError::Parse(format!("domain '{domain}' must map topics"))),
            };
            for (topic, concepts) in topics {
                let topic = scalar(&topic)?;
                declared.push((domain.clone(), topic.clone()));
                let names: Vec<String> = match concepts {
                    serde_yaml::Value::Sequence(items) => items.iter().map(scalar).collect::<Result<_, _>>()?,
                    // Mathlib's catalogue maps concept names to declarations.
                    serde_yaml::Value::Mapping(m) => m.keys().map(scalar).collect::<Result<_, _>>()?,
                    serde_yaml::Value::Null => Vec::new(),
                    _ => return Err(RepoError::Parse(format!("topic '{topic}' must list concepts"))),
                };
                for name in names {
                    rows.push((domain.clone(), topic.clone(), name));
                }
            }
        }
        Self::from_rows(rows, &declared)
    }

    /// CSV with a `domain,topic,concept` header.
    pub fn from_csv_str(text: &str) -> Result<Self, RepoError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| RepoError::Parse(e.to_string()))?.clone();
        if headers.is_empty() {
            return Err(RepoError::Empty);
        }
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| RepoError::Parse(format!("missing column '{name}'")))
        };
        let (d, t, c) = (col("domain")?, col("topic")?, col("concept")?);
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| RepoError::Parse(e.to_string()))?;
            let get = |i: usize| record.get(i).unwrap_or("").to_string();
            rows.push((get(d), get(t), get(c)));
        }
        Self::from_rows(rows, &[])
    }

    /// Loads a repository file; `.csv` files use the tabular form, anything
    /// else the hierarchical form.
    pub fn load(path: &Path) -> Result<Self, RepoError> {
        let text = std::fs::read_to_string(path).map_err(|source| RepoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            Self::from_csv_str(&text)
        } else {
            Self::from_yaml_str(&text)
        }
    }

    pub fn bundled() -> Self {
        Self::from_yaml_str(UNDERGRAD_YAML).expect("bundled repository is valid")
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn get(&self, id: &str) -> Option<&Concept> {
        self.concepts.iter().find(|c| c.id == id)
    }

    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    pub fn counts(&self) -> RepoCounts {
        RepoCounts {
            domains: self.index.len(),
            topics: self.index.values().map(BTreeMap::len).sum(),
            concepts: self.concepts.len(),
        }
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    /// Concepts of a topic, in file order.
    pub fn topic(&self, domain: &str, topic: &str) -> Vec<&Concept> {
        self.index
            .get(domain)
            .and_then(|t| t.get(topic))
            .map(|ix| ix.iter().map(|&i| &self.concepts[i]).collect())
            .unwrap_or_default()
    }

    pub fn topics(&self, domain: &str) -> Vec<&str> {
        self.index
            .get(domain)
            .map(|t| t.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    /// Draws an unordered pair of distinct concepts, uniformly over all such
    /// pairs. The pair is returned in repository order.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(&Concept, &Concept), RepoError> {
        let n = self.concepts.len();
        if n < 2 {
            return Err(RepoError::TooFewConcepts(n));
        }
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        Ok((&self.concepts[a], &self.concepts[b]))
    }
}

fn scalar(v: &serde_yaml::Value) -> Result<String, RepoError> {
    match v {
        serde_yaml::Value::String(s) => Ok(s.clone()),
        serde_yaml::Value::Number(n) => Ok(n.to_string()),
        serde_yaml::Value::Bool(b) => Ok(b.to_string()),
        other => Err(RepoError::Parse(format!("expected a name, found {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bundled_repository_has_expected_shape() {
        let repo = ConceptRepository::bundled();
        assert_eq!(
            repo.counts(),
            RepoCounts {
                domains: 13,
                topics: 55,
                concepts: 350
            }
        );
        let matrices = repo.topic("Linear algebra", "Matrices");
        assert!(matrices.iter().any(|c| c.name == "determinant"));
        assert!(matrices.iter().any(|c| c.name == "commutative-ring-valued matrices"));
        let ids: HashSet<_> = repo.concepts().iter().map(|c| &c.id).collect();
        assert_eq!(ids.len(), 350);
        for c in repo.concepts() {
            assert!(repo.topic(&c.domain, &c.topic).contains(&c));
        }
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(ConceptRepository::from_yaml_str(""), Err(RepoError::Empty)));
        assert!(matches!(
            ConceptRepository::from_csv_str("domain,topic,concept\n"),
            Err(RepoError::Empty)
        ));
        let err = ConceptRepository::from_yaml_str("Algebra:\n  Groups: []\n  Rings:\n    - ring\n").unwrap_err();
        assert!(matches!(err, RepoError::EmptyTopic { .. }), "{err}");
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let err = ConceptRepository::from_csv_str("domain,topic,concept\nAlgebra,Groups,group\nAlgebra,Groups,group\n")
            .unwrap_err();
        assert!(matches!(err, RepoError::Duplicate { .. }));
        let err = ConceptRepository::from_yaml_str("A:\n  T:\n    - x\n    - x\n").unwrap_err();
        assert!(matches!(err, RepoError::Duplicate { .. }));
    }

    #[test]
    fn mapping_form_of_topics_is_accepted() {
        let repo = ConceptRepository::from_yaml_str(
            "Linear algebra:\n  Duality:\n    dual vector space: 'Module.Dual'\n    dual basis: 'Basis.dualBasis'\n",
        )
        .unwrap();
        assert_eq!(repo.counts().concepts, 2);
    }

    #[test]
    fn unparseable_file_is_a_parse_error() {
        assert!(matches!(
            ConceptRepository::from_yaml_str("- just\n- a list\n"),
            Err(RepoError::Parse(_))
        ));
        assert!(matches!(
            ConceptRepository::from_yaml_str("a: [b"),
            Err(RepoError::Parse(_))
        ));
    }

    #[test]
    fn two_concepts_force_the_pair() {
        let repo = ConceptRepository::from_csv_str("domain,topic,concept\nA,T,x\nA,T,y\n").unwrap();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = repo.sample_pair(&mut rng).unwrap();
            assert_eq!((a.name.as_str(), b.name.as_str()), ("x", "y"));
        }
        let single = ConceptRepository::from_csv_str("domain,topic,concept\nA,T,x\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            single.sample_pair(&mut rng),
            Err(RepoError::TooFewConcepts(1))
        ));
    }

    #[test]
    fn sampling_is_reproducible_per_seed() {
        let repo = ConceptRepository::bundled();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = repo.sample_pair(&mut rng).unwrap();
            (a.id.clone(), b.id.clone())
        };
        assert_eq!(draw(42), draw(42));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let (a, b) = repo.sample_pair(&mut rng).unwrap();
            assert_ne!(a.id, b.id);
        }
    }

    #[test]
    fn pair_distribution_is_uniform() {
        let repo = ConceptRepository::from_csv_str("domain,topic,concept\nA,T,a\nA,T,b\nB,U,c\nB,U,d\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
        let draws = 100_000;
        for _ in 0..draws {
            let (a, b) = repo.sample_pair(&mut rng).unwrap();
            *counts.entry((a.name.clone(), b.name.clone())).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = draws as f64 / 6.0;
        let chi2: f64 = counts.values().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 5 degrees of freedom, 0.999 quantile.
        assert!(chi2 < 20.52, "chi-square {chi2}");
        for &o in counts.values() {
            let frac = o as f64 / draws as f64;
            assert!((frac - 1.0 / 6.0).abs() < 0.02, "{frac}");
        }
    }
}
