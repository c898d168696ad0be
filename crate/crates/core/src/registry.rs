//! Named strategy factories: recommenders, sentiment scorers and recipient
//! resolvers are picked by name from the config.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::config::Config;
use crate::ibgr::IbgrRecommender;
use crate::recommender::{GroupRecommender, LeaderRankRecommender};
use crate::resolver::{BroadcastResolver, ExternalResolver, HeuristicResolver, RecipientResolver};
use crate::sentiment::{LexiconScorer, NeutralScorer, SentimentLexicon, SentimentScorer};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown {kind} `{name}`; known: {known}")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },
    #[error("building {kind} `{name}`: {message}")]
    Build {
        kind: &'static str,
        name: String,
        message: String,
    },
}

type Factory<T> = Box<dyn Fn(&Config) -> Result<Arc<T>, String> + Send + Sync>;

/// The strategies one session runs with.
#[derive(Clone)]
pub struct Strategies {
    pub proposed: Arc<dyn GroupRecommender>,
    pub baseline: Arc<dyn GroupRecommender>,
    pub scorer: Arc<dyn SentimentScorer>,
    pub resolver: Arc<dyn RecipientResolver>,
}

impl std::fmt::Debug for Strategies {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Strategies")
            .field("proposed", &self.proposed.name())
            .field("baseline", &self.baseline.name())
            .field("scorer", &self.scorer.name())
            .field("resolver", &self.resolver.name())
            .finish()
    }
}

impl Strategies {
    pub fn from_config(config: &Config) -> Result<Self, RegistryError> {
        Registry::builtin().build(config)
    }

    pub fn recommenders(&self) -> [&Arc<dyn GroupRecommender>; 2] {
        [&self.proposed, &self.baseline]
    }
}

pub struct Registry {
    recommenders: BTreeMap<String, Factory<dyn GroupRecommender>>,
    scorers: BTreeMap<String, Factory<dyn SentimentScorer>>,
    resolvers: BTreeMap<String, Factory<dyn RecipientResolver>>,
}

fn pick<T: ?Sized>(
    map: &BTreeMap<String, Factory<T>>,
    kind: &'static str,
    name: &str,
    config: &Config,
) -> Result<Arc<T>, RegistryError> {
    let factory = map.get(name).ok_or_else(|| RegistryError::Unknown {
        kind,
        name: name.to_owned(),
        known: map.keys().cloned().collect::<Vec<_>>().join(", "),
    })?;
    factory(config).map_err(|message| RegistryError::Build {
        kind,
        name: name.to_owned(),
        message,
    })
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            recommenders: BTreeMap::new(),
            scorers: BTreeMap::new(),
            resolvers: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register_recommender("leaderrank", |c| Ok(Arc::new(LeaderRankRecommender::new(c.leaderrank))));
        r.register_recommender("ibgr", |c| Ok(Arc::new(IbgrRecommender::new(c.ibgr))));
        r.register_scorer("lexicon", |c| {
            let lexicon = match &c.strategies.lexicon {
                Some(path) => SentimentLexicon::load(path).map_err(|e| e.to_string())?,
                None => SentimentLexicon::builtin(),
            };
            Ok(Arc::new(LexiconScorer::new(lexicon)))
        });
        r.register_scorer("neutral", |_| Ok(Arc::new(NeutralScorer)));
        r.register_resolver("heuristic", |_| Ok(Arc::new(HeuristicResolver)));
        r.register_resolver("broadcast", |_| Ok(Arc::new(BroadcastResolver)));
        r.register_resolver("external", |c| {
            ExternalResolver::spawn(&c.strategies.resolver_command)
                .map(|x| Arc::new(x) as Arc<dyn RecipientResolver>)
                .map_err(|e| e.to_string())
        });
        r
    }

    pub fn register_recommender(
        &mut self,
        name: &str,
        f: impl Fn(&Config) -> Result<Arc<dyn GroupRecommender>, String> + Send + Sync + 'static,
    ) {
        self.recommenders.insert(name.to_owned(), Box::new(f));
    }

    pub fn register_scorer(
        &mut self,
        name: &str,
        f: impl Fn(&Config) -> Result<Arc<dyn SentimentScorer>, String> + Send + Sync + 'static,
    ) {
        self.scorers.insert(name.to_owned(), Box::new(f));
    }

    pub fn register_resolver(
        &mut self,
        name: &str,
        f: impl Fn(&Config) -> Result<Arc<dyn RecipientResolver>, String> + Send + Sync + 'static,
    ) {
        self.resolvers.insert(name.to_owned(), Box::new(f));
    }

    pub fn recommender_names(&self) -> Vec<&str> {
        self.recommenders.keys().map(String::as_str).collect()
    }

    pub fn scorer_names(&self) -> Vec<&str> {
        self.scorers.keys().map(String::as_str).collect()
    }

    pub fn resolver_names(&self) -> Vec<&str> {
        self.resolvers.keys().map(String::as_str).collect()
    }

    pub fn recommender(&self, name: &str, config: &Config) -> Result<Arc<dyn GroupRecommender>, RegistryError> {
        pick(&self.recommenders, "recommender", name, config)
    }

    pub fn scorer(&self, name: &str, config: &Config) -> Result<Arc<dyn SentimentScorer>, RegistryError> {
        pick(&self.scorers, "sentiment scorer", name, config)
    }

    pub fn resolver(&self, name: &str, config: &Config) -> Result<Arc<dyn RecipientResolver>, RegistryError> {
        pick(&self.resolvers, "recipient resolver", name, config)
    }

    pub fn build(&self, config: &Config) -> Result<Strategies, RegistryError> {
        let s = &config.strategies;
        Ok(Strategies {
            proposed: self.recommender(&s.proposed, config)?,
            baseline: self.recommender(&s.baseline, config)?,
            scorer: self.scorer(&s.sentiment, config)?,
            resolver: self.resolver(&s.resolver, config)?,
        })
    }
}
