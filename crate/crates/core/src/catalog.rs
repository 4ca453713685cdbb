//! Service universe, popularities and the analytic edge hit rate.
//!
//! A catalog is a probability space over task types: every service carries a
//! popularity and the popularities sum to one. Pushing a new service rescales
//! the existing popularities by `1 - p_new` so the total mass is preserved.

use crate::ids::{MicroserviceId, ServiceId};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Tolerance used for every popularity comparison.
pub const POPULARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("unknown service id `{0}`")]
    UnknownService(ServiceId),
    #[error("duplicate service id `{0}`")]
    DuplicateService(ServiceId),
    #[error("service `{id}` has popularity {popularity} outside {range}")]
    PopularityOutOfRange {
        id: ServiceId,
        popularity: f64,
        range: &'static str,
    },
    #[error("service `{0}` has no microservices")]
    EmptyService(ServiceId),
    #[error("popularities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("deployment threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("arrival probability {0} outside [0, 1]")]
    BadArrivalProbability(f64),
    #[error("candidate popularity {value} outside [{threshold}, 1]")]
    CandidateBelowThreshold { value: f64, threshold: f64 },
    #[error("candidate popularity set is empty but the arrival probability is {0}")]
    EmptyCandidates(f64),
}

/// An atomic deployable unit with its storage footprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Microservice {
    pub id: MicroserviceId,
    #[serde(default = "unit_size")]
    pub size: u32,
}

fn unit_size() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Service {
    pub id: ServiceId,
    pub popularity: f64,
    pub microservices: BTreeSet<MicroserviceId>,
}

impl Service {
    pub fn new<I, M>(id: impl Into<ServiceId>, popularity: f64, microservices: I) -> Self
    where
        I: IntoIterator<Item = M>,
        M: Into<MicroserviceId>,
    {
        Self {
            id: id.into(),
            popularity,
            microservices: microservices.into_iter().map(Into::into).collect(),
        }
    }
}

/// The set of services currently known to the network.
///
/// Invariants: service ids are unique, every service has at least one
/// microservice and the popularities sum to one within
/// [`POPULARITY_TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCatalog", into = "RawCatalog")]
pub struct ServiceCatalog {
    services: Vec<Service>,
    index: BTreeMap<ServiceId, usize>,
    sizes: BTreeMap<MicroserviceId, u32>,
    deployment_threshold: f64,
    slot_index: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawCatalog {
    services: Vec<Service>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    microservice_sizes: BTreeMap<MicroserviceId, u32>,
    #[serde(default)]
    deployment_threshold: f64,
    #[serde(default)]
    slot_index: u32,
}

impl TryFrom<RawCatalog> for ServiceCatalog {
    type Error = CatalogError;

    fn try_from(raw: RawCatalog) -> Result<Self, Self::Error> {
        let mut catalog = ServiceCatalog::new(raw.services, raw.deployment_threshold)?;
        catalog.sizes = raw.microservice_sizes;
        catalog.slot_index = raw.slot_index;
        Ok(catalog)
    }
}

impl From<ServiceCatalog> for RawCatalog {
    fn from(c: ServiceCatalog) -> Self {
        RawCatalog {
            services: c.services,
            microservice_sizes: c.sizes,
            deployment_threshold: c.deployment_threshold,
            slot_index: c.slot_index,
        }
    }
}

impl ServiceCatalog {
    pub fn new(services: Vec<Service>, deployment_threshold: f64) -> Result<Self, CatalogError> {
        if !(0.0..=1.0).contains(&deployment_threshold) {
            return Err(CatalogError::BadThreshold(deployment_threshold));
        }
        let mut index = BTreeMap::new();
        for (i, s) in services.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.popularity) {
                return Err(CatalogError::PopularityOutOfRange {
                    id: s.id.clone(),
                    popularity: s.popularity,
                    range: "[0, 1]",
                });
            }
            if s.microservices.is_empty() {
                return Err(CatalogError::EmptyService(s.id.clone()));
            }
            if index.insert(s.id.clone(), i).is_some() {
                return Err(CatalogError::DuplicateService(s.id.clone()));
            }
        }
        let total: f64 = services.iter().map(|s| s.popularity).sum();
        if (total - 1.0).abs() > POPULARITY_TOLERANCE {
            return Err(CatalogError::NotNormalized(total));
        }
        Ok(Self {
            services,
            index,
            sizes: BTreeMap::new(),
            deployment_threshold,
            slot_index: 0,
        })
    }

    /// Overrides the storage size of individual microservices (default 1).
    pub fn with_sizes(mut self, sizes: BTreeMap<MicroserviceId, u32>) -> Self {
        self.sizes = sizes;
        self
    }

    pub fn services(&self) -> &[Service] {
        &self.services
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    pub fn get(&self, id: &ServiceId) -> Option<&Service> {
        self.index.get(id).map(|&i| &self.services[i])
    }

    pub fn popularity(&self, id: &ServiceId) -> Result<f64, CatalogError> {
        self.get(id)
            .map(|s| s.popularity)
            .ok_or_else(|| CatalogError::UnknownService(id.clone()))
    }

    pub fn deployment_threshold(&self) -> f64 {
        self.deployment_threshold
    }

    pub fn slot_index(&self) -> u32 {
        self.slot_index
    }

    pub fn set_slot_index(&mut self, slot: u32) {
        self.slot_index = slot;
    }

    pub fn size_of(&self, m: &MicroserviceId) -> u32 {
        self.sizes.get(m).copied().unwrap_or(1)
    }

    pub fn sizes(&self) -> &BTreeMap<MicroserviceId, u32> {
        &self.sizes
    }

    /// Every microservice referenced by some service.
    pub fn microservices(&self) -> BTreeSet<MicroserviceId> {
        self.services
            .iter()
            .flat_map(|s| s.microservices.iter().cloned())
            .collect()
    }

    /// Services in descending popularity, ties broken by id.
    pub fn by_descending_popularity(&self) -> Vec<&Service> {
        let mut v: Vec<&Service> = self.services.iter().collect();
        v.sort_by(|a, b| {
            b.popularity
                .total_cmp(&a.popularity)
                .then_with(|| a.id.cmp(&b.id))
        });
        v
    }

    /// Analytic edge hit rate: the popularity mass of the deployed services.
    pub fn hit_rate<'a, I>(&self, deployed: I) -> Result<f64, CatalogError>
    where
        I: IntoIterator<Item = &'a ServiceId>,
    {
        let mut seen = BTreeSet::new();
        let mut total = 0.0;
        for id in deployed {
            let p = self.popularity(id)?;
            if seen.insert(id) {
                total += p;
            }
        }
        Ok(total.clamp(0.0, 1.0))
    }

    fn check_new(&self, new: &Service) -> Result<(), CatalogError> {
        if self.index.contains_key(&new.id) {
            return Err(CatalogError::DuplicateService(new.id.clone()));
        }
        if !(new.popularity > 0.0 && new.popularity < 1.0) {
            return Err(CatalogError::PopularityOutOfRange {
                id: new.id.clone(),
                popularity: new.popularity,
                range: "(0, 1)",
            });
        }
        if new.microservices.is_empty() {
            return Err(CatalogError::EmptyService(new.id.clone()));
        }
        Ok(())
    }

    /// Returns the catalog after `new` enters the network. Existing
    /// popularities are scaled by `1 - p_new`, so their relative order is kept.
    pub fn push_service(&self, new: Service) -> Result<ServiceCatalog, CatalogError> {
        self.check_new(&new)?;
        let scale = 1.0 - new.popularity;
        let mut next = self.clone();
        for s in &mut next.services {
            s.popularity *= scale;
        }
        next.index.insert(new.id.clone(), next.services.len());
        next.services.push(new);
        Ok(next)
    }

    /// Hit rate right after `new` is pushed, either kept only in the cloud or
    /// also cached at the edge.
    pub fn hit_rate_after_push<'a, I>(
        &self,
        deployed: I,
        new: &Service,
        cached_at_edge: bool,
    ) -> Result<f64, CatalogError>
    where
        I: IntoIterator<Item = &'a ServiceId>,
    {
        self.check_new(new)?;
        let hit = self.hit_rate(deployed)?;
        let uncached = hit * (1.0 - new.popularity);
        Ok(if cached_at_edge {
            uncached + new.popularity
        } else {
            uncached
        })
    }
}

/// Distribution of the popularity of a newly arriving service.
///
/// With probability `arrival_prob` a service arrives and its popularity is
/// drawn uniformly from `candidate_popularities`; otherwise nothing arrives.
/// Candidates below the deployment threshold are rejected at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewServiceDistribution {
    candidate_popularities: Vec<f64>,
    arrival_prob: f64,
}

impl NewServiceDistribution {
    pub fn new(
        candidate_popularities: Vec<f64>,
        arrival_prob: f64,
        threshold: f64,
    ) -> Result<Self, CatalogError> {
        if !(0.0..=1.0).contains(&arrival_prob) {
            return Err(CatalogError::BadArrivalProbability(arrival_prob));
        }
        for &g in &candidate_popularities {
            if !(g >= threshold && g <= 1.0) {
                return Err(CatalogError::CandidateBelowThreshold {
                    value: g,
                    threshold,
                });
            }
        }
        Ok(Self {
            candidate_popularities,
            arrival_prob,
        })
    }

    pub fn candidates(&self) -> &[f64] {
        &self.candidate_popularities
    }

    pub fn arrival_prob(&self) -> f64 {
        self.arrival_prob
    }

    pub fn with_arrival_prob(&self, arrival_prob: f64) -> Result<Self, CatalogError> {
        if !(0.0..=1.0).contains(&arrival_prob) {
            return Err(CatalogError::BadArrivalProbability(arrival_prob));
        }
        Ok(Self {
            candidate_popularities: self.candidate_popularities.clone(),
            arrival_prob,
        })
    }

    /// `None` means no service was pushed this draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<f64>, CatalogError> {
        if self.arrival_prob > 0.0 && self.candidate_popularities.is_empty() {
            return Err(CatalogError::EmptyCandidates(self.arrival_prob));
        }
        if !rng.gen_bool(self.arrival_prob) {
            return Ok(None);
        }
        let i = rng.gen_range(0..self.candidate_popularities.len());
        Ok(Some(self.candidate_popularities[i]))
    }
}
