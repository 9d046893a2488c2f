//! Bounded in-flight requests.

use std::sync::{Condvar, Mutex};

use super::{ChatClient, ChatRequest, EmbeddingClient, GatewayError};
use crate::retrieval::embed::EmbeddingVector;

/// Counting semaphore.
pub struct InFlightLimit {
    max: usize,
    active: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a InFlightLimit);

impl InFlightLimit {
    pub fn new(max: usize) -> Self {
        assert!(max >= 1, "in-flight limit must be at least 1");
        InFlightLimit { max, active: Mutex::new(0), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().unwrap();
        while *active >= self.max {
            active = self.cv.wait(active).unwrap();
        }
        *active += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().unwrap() -= 1;
        self.0.cv.notify_one();
    }
}

pub struct Limited<C> {
    inner: C,
    limit: InFlightLimit,
}

impl<C> Limited<C> {
    pub fn new(inner: C, max_in_flight: usize) -> Self {
        Limited { inner, limit: InFlightLimit::new(max_in_flight) }
    }
}

impl<C: ChatClient> ChatClient for Limited<C> {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        let _permit = self.limit.acquire();
        self.inner.complete(request)
    }
}

impl<C: EmbeddingClient> EmbeddingClient for Limited<C> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        let _permit = self.limit.acquire();
        self.inner.embed(texts)
    }

    fn provider_tag(&self) -> String {
        self.inner.provider_tag()
    }
}
