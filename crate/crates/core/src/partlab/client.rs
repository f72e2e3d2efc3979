//! Completion client, on-disk response cache and the caching part labeler.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{build_prompt, normalize_action, parse_response, LookupTable, PartLabError, PartSet, PromptKind};

pub const API_KEY_ENV: &str = "SINC_COMPLETION_API_KEY";
pub const CACHE_DIR_ENV: &str = "SINC_CACHE_DIR";

/// A text-completion backend.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, PartLabError>;
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    pub max_tokens: u32,
    /// Minimum spacing between consecutive requests.
    pub min_interval: Duration,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(api_key: impl Into<String>) -> Self {
        HttpConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo-instruct".into(),
            api_key: api_key.into(),
            max_tokens: 64,
            min_interval: Duration::from_millis(1000),
            timeout: Duration::from_secs(60),
        }
    }

    /// Reads the API key from `SINC_COMPLETION_API_KEY`.
    pub fn from_env() -> Option<Self> {
        std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .map(Self::new)
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    text: String,
}

/// Blocking client for the `/completions` endpoint, rate limited.
pub struct HttpCompletionClient {
    config: HttpConfig,
    agent: ureq::Agent,
    last_request: Mutex<Option<Instant>>,
}

impl HttpCompletionClient {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        HttpCompletionClient {
            config,
            agent,
            last_request: Mutex::new(None),
        }
    }

    pub fn endpoint(&self) -> String {
        format!("{}/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn wait_for_slot(&self) {
        let mut last = self.last_request.lock().unwrap();
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < self.config.min_interval {
                std::thread::sleep(self.config.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, prompt: &str) -> Result<String, PartLabError> {
        self.wait_for_slot();
        let body = CompletionRequest {
            model: &self.config.model,
            prompt,
            max_tokens: self.config.max_tokens,
            temperature: 0.0,
        };
        let unavailable = |e: ureq::Error| PartLabError::ServiceUnavailable(e.to_string());
        let mut resp = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(&body)
            .map_err(unavailable)?;
        let parsed: CompletionResponse = resp.body_mut().read_json().map_err(unavailable)?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.text)
            .ok_or_else(|| PartLabError::ServiceUnavailable("response has no choices".into()))
    }
}

/// One cached completion, stored as `{prompt, response, timestamp}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub prompt: String,
    pub response: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// Completion cache keyed by (prompt kind, normalized action).
///
/// Each entry is one JSON file `<kind>-<hash>.json` under the cache directory.
/// Reads take a shared lock; writes are serialized.
#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: RwLock<HashMap<String, CacheEntry>>,
    write_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        ResponseCache {
            dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn key(kind: PromptKind, action: &str) -> String {
        let digest = Sha256::digest(normalize_action(action).as_bytes());
        format!("{}-{}", kind.slug(), &hex::encode(digest)[..16])
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    pub fn get(&self, kind: PromptKind, action: &str) -> Result<Option<CacheEntry>, PartLabError> {
        let key = Self::key(kind, action);
        if let Some(e) = self.memory.read().unwrap().get(&key) {
            return Ok(Some(e.clone()));
        }
        let Some(path) = self.path_for(&key) else {
            return Ok(None);
        };
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(PartLabError::io(&path, e)),
        };
        let entry = cache_entry_from_json_str(&text)
            .map_err(|e| PartLabError::Schema(format!("{}: {e}", path.display())))?;
        self.memory.write().unwrap().insert(key, entry.clone());
        Ok(Some(entry))
    }

    pub fn put(&self, kind: PromptKind, action: &str, entry: CacheEntry) -> Result<(), PartLabError> {
        let key = Self::key(kind, action);
        let _guard = self.write_lock.lock().unwrap();
        if let Some(path) = self.path_for(&key) {
            let dir = path.parent().expect("cache file has a parent");
            std::fs::create_dir_all(dir).map_err(|e| PartLabError::io(dir, e))?;
            let tmp = path.with_extension("json.tmp");
            let text = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
            std::fs::write(&tmp, text).map_err(|e| PartLabError::io(&tmp, e))?;
            std::fs::rename(&tmp, &path).map_err(|e| PartLabError::io(&path, e))?;
        }
        self.memory.write().unwrap().insert(key, entry);
        Ok(())
    }
}

pub fn cache_entry_from_json_str(s: &str) -> Result<CacheEntry, serde_json::Error> {
    serde_json::from_str(s)
}

/// Resolves actions to part sets through the cache, querying the completion
/// client only on a miss. Without a client it runs offline.
pub struct PartLabeler {
    cache: ResponseCache,
    client: Option<Arc<dyn CompletionClient>>,
    lookup: LookupTable,
    in_flight: Mutex<HashSet<String>>,
    finished: Condvar,
}

impl PartLabeler {
    pub fn new(cache: ResponseCache, client: Option<Arc<dyn CompletionClient>>, lookup: LookupTable) -> Self {
        PartLabeler {
            cache,
            client,
            lookup,
            in_flight: Mutex::new(HashSet::new()),
            finished: Condvar::new(),
        }
    }

    pub fn offline(cache: ResponseCache) -> Self {
        Self::new(cache, None, LookupTable::builtin())
    }

    pub fn is_offline(&self) -> bool {
        self.client.is_none()
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Raw completion text for an action, from cache or the client.
    pub fn fetch_response(&self, action: &str, kind: PromptKind) -> Result<String, PartLabError> {
        let prompt = build_prompt(action, kind)?;
        let key = ResponseCache::key(kind, action);
        loop {
            if let Some(entry) = self.cache.get(kind, action)? {
                return Ok(entry.response);
            }
            let mut in_flight = self.in_flight.lock().unwrap();
            if in_flight.contains(&key) {
                // another thread is querying this prompt; wait and re-check the cache
                let _unused = self.finished.wait(in_flight).unwrap();
                continue;
            }
            in_flight.insert(key.clone());
            break;
        }
        let result = self.query(action, kind, &prompt);
        self.in_flight.lock().unwrap().remove(&key);
        self.finished.notify_all();
        result
    }

    fn query(&self, action: &str, kind: PromptKind, prompt: &str) -> Result<String, PartLabError> {
        // a concurrent writer may have filled the entry between our check and the claim
        if let Some(entry) = self.cache.get(kind, action)? {
            return Ok(entry.response);
        }
        let Some(client) = &self.client else {
            return Err(PartLabError::CacheMiss {
                kind,
                action: action.to_string(),
            });
        };
        let response = client.complete(prompt)?;
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.cache.put(
            kind,
            action,
            CacheEntry {
                prompt: prompt.to_string(),
                response: response.clone(),
                timestamp,
            },
        )?;
        Ok(response)
    }

    pub fn fetch_parts(&self, action: &str, kind: PromptKind) -> Result<PartSet, PartLabError> {
        let response = self.fetch_response(action, kind)?;
        Ok(parse_response(&response, kind, &self.lookup))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partlab::BodyPart;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Canned {
        reply: String,
        calls: AtomicUsize,
        delay: Duration,
    }

    impl CompletionClient for Canned {
        fn complete(&self, _prompt: &str) -> Result<String, PartLabError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(self.delay);
            Ok(self.reply.clone())
        }
    }

    fn canned(reply: &str, delay_ms: u64) -> Arc<Canned> {
        Arc::new(Canned {
            reply: reply.into(),
            calls: AtomicUsize::new(0),
            delay: Duration::from_millis(delay_ms),
        })
    }

    #[test]
    fn offline_miss_then_hit() {
        let dir = tempfile::tempdir().unwrap();
        let labeler = PartLabeler::offline(ResponseCache::at(dir.path()));
        assert!(matches!(
            labeler.fetch_parts("kick", PromptKind::ListFewShot),
            Err(PartLabError::CacheMiss { .. })
        ));
        labeler
            .cache()
            .put(
                PromptKind::ListFewShot,
                "kick",
                CacheEntry { prompt: "p".into(), response: "right leg".into(), timestamp: 0 },
            )
            .unwrap();
        // a fresh labeler over the same directory reads the file
        let again = PartLabeler::offline(ResponseCache::at(dir.path()));
        assert_eq!(
            again.fetch_parts("  KICK ", PromptKind::ListFewShot).unwrap(),
            PartSet::EMPTY.with(BodyPart::RightLeg)
        );
        assert!(matches!(
            again.fetch_parts("kick", PromptKind::ListOnly),
            Err(PartLabError::CacheMiss { .. })
        ));
    }

    #[test]
    fn live_response_is_cached() {
        let dir = tempfile::tempdir().unwrap();
        let client = canned("left leg", 0);
        let labeler = PartLabeler::new(ResponseCache::at(dir.path()), Some(client.clone()), LookupTable::builtin());
        for _ in 0..3 {
            assert_eq!(
                labeler.fetch_parts("step left", PromptKind::ListFewShot).unwrap(),
                PartSet::EMPTY.with(BodyPart::LeftLeg)
            );
        }
        assert_eq!(client.calls.load(Ordering::SeqCst), 1);
        let key = ResponseCache::key(PromptKind::ListFewShot, "step left");
        let text = std::fs::read_to_string(dir.path().join(format!("{key}.json"))).unwrap();
        let entry = cache_entry_from_json_str(&text).unwrap();
        assert_eq!(entry.response, "left leg");
        assert_eq!(entry.prompt, build_prompt("step left", PromptKind::ListFewShot).unwrap());
    }

    #[test]
    fn concurrent_requests_share_one_query() {
        let client = canned("torso", 50);
        let labeler = Arc::new(PartLabeler::new(ResponseCache::in_memory(), Some(client.clone()), LookupTable::builtin()));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let l = labeler.clone();
                std::thread::spawn(move || l.fetch_parts("bow", PromptKind::ListFewShot).unwrap())
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), PartSet::EMPTY.with(BodyPart::Torso));
        }
        assert_eq!(client.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn corrupt_cache_file_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let key = ResponseCache::key(PromptKind::ListFewShot, "jump");
        std::fs::write(dir.path().join(format!("{key}.json")), "{not json").unwrap();
        let cache = ResponseCache::at(dir.path());
        assert!(matches!(cache.get(PromptKind::ListFewShot, "jump"), Err(PartLabError::Schema(_))));
    }

    #[test]
    fn cache_keys() {
        assert_eq!(
            ResponseCache::key(PromptKind::ListOnly, "Walk  Forward"),
            ResponseCache::key(PromptKind::ListOnly, "walk forward")
        );
        assert_ne!(
            ResponseCache::key(PromptKind::ListOnly, "walk"),
            ResponseCache::key(PromptKind::FreeForm, "walk")
        );
        assert!(ResponseCache::key(PromptKind::ListFewShot, "walk").starts_with("fewshot-"));
    }
}
