#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use thinkstream::trace::corpus::{read_sources, SourceItem};
use thinkstream::trace::{load_traces, UtteranceTrace};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn corpus_sources() -> Vec<SourceItem> {
    let f = std::fs::File::open(fixture("corpus_texts.tsv")).unwrap();
    read_sources(BufReader::new(f), "fx").unwrap()
}

pub fn corpus_traces() -> Vec<UtteranceTrace> {
    load_traces(fixture("corpus.jsonl")).unwrap()
}

pub fn trigger_texts() -> Vec<String> {
    std::fs::read_to_string(fixture("trigger_texts.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Request {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    /// Written in order, flushed one by one with `chunk_delay` between.
    pub chunks: Vec<String>,
    pub chunk_delay: Duration,
}

impl Response {
    pub fn json(status: u16, body: impl Into<String>) -> Self {
        Self {
            status,
            content_type: "application/json",
            chunks: vec![body.into()],
            chunk_delay: Duration::ZERO,
        }
    }

    pub fn sse(chunks: Vec<String>, chunk_delay: Duration) -> Self {
        Self {
            status: 200,
            content_type: "text/event-stream",
            chunks,
            chunk_delay,
        }
    }
}

/// A one-thread HTTP/1.1 stub. Every response closes its connection, so
/// bodies are delimited by EOF.
pub struct StubServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Request>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<Request> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut headers = Vec::new();
    let mut len = 0usize;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.eq_ignore_ascii_case("content-length") {
                len = v.parse().unwrap_or(0);
            }
            headers.push((k, v));
        }
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).ok()?;
    Some(Request {
        method,
        path,
        headers,
        body: String::from_utf8_lossy(&body).into_owned(),
    })
}

impl StubServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(&Request) -> Response + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = requests.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let Some(req) = read_request(&mut stream) else { continue };
                let resp = handler(&req);
                log.lock().unwrap().push(req);
                let head = format!(
                    "HTTP/1.1 {} X\r\nContent-Type: {}\r\nConnection: close\r\n\r\n",
                    resp.status, resp.content_type
                );
                if stream.write_all(head.as_bytes()).is_err() {
                    continue;
                }
                for chunk in &resp.chunks {
                    if stream.write_all(chunk.as_bytes()).and_then(|_| stream.flush()).is_err() {
                        break;
                    }
                    if !resp.chunk_delay.is_zero() {
                        thread::sleep(resp.chunk_delay);
                    }
                }
            }
        });
        Self { url, requests }
    }

    pub fn requests(&self) -> Vec<Request> {
        self.requests.lock().unwrap().clone()
    }
}

/// An address nothing listens on.
pub fn dead_url() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", l.local_addr().unwrap());
    drop(l);
    url
}

/// Checks every recorded insertion against the perturbed text and removes
/// them back to front on a char vector. Returns the recovered source.
pub fn unperturb_oracle(p: &thinkstream::trace::perturb::Perturbed) -> Result<String, String> {
    let chars: Vec<char> = p.text.chars().collect();
    let mut cuts: Vec<(usize, usize, String)> = Vec::new();
    for f in &p.fillers {
        cuts.push((f.start, f.end, format!("{}, ", f.filler)));
    }
    for c in &p.corrections {
        if c.marker != c.pattern.marker() {
            return Err(format!("marker {:?} does not belong to {:?}", c.marker, c.pattern));
        }
        cuts.push((c.start, c.end, format!("{}... {}, ", c.wrong_text, c.marker)));
    }
    cuts.sort_by_key(|c| std::cmp::Reverse(c.0));
    let mut out = chars.clone();
    let mut floor = usize::MAX;
    for (s, e, expect) in cuts {
        if e > floor || s >= e || e > chars.len() {
            return Err(format!("span {s}..{e} overlaps or is out of range"));
        }
        let got: String = chars[s..e].iter().collect();
        if got != expect {
            return Err(format!("span {s}..{e} holds {got:?}, expected {expect:?}"));
        }
        out.drain(s..e);
        floor = s;
    }
    Ok(out.into_iter().collect())
}

const CLOSERS: [char; 5] = ['"', '\'', ')', ']', '}'];

fn word_core(tok: &str) -> String {
    let chars: Vec<char> = tok.chars().collect();
    let keep = |c: &char| c.is_alphanumeric() || *c == '\'';
    let (Some(a), Some(b)) = (chars.iter().position(keep), chars.iter().rposition(keep)) else {
        return String::new();
    };
    chars[a..=b].iter().collect::<String>().to_lowercase()
}

fn is_filler_end(tokens: &[&str], i: usize) -> bool {
    use thinkstream::vocab::{CORRECTION, DELAYING, HESITATION, RECOGNIZED_ONLY, TRANSITION};
    let phrases = HESITATION
        .iter()
        .chain(CORRECTION)
        .chain(DELAYING)
        .chain(TRANSITION)
        .chain(RECOGNIZED_ONLY);
    for phrase in phrases {
        let words: Vec<String> = phrase.split(' ').map(word_core).collect();
        if words.len() > i + 1 {
            continue;
        }
        let start = i + 1 - words.len();
        if (0..words.len()).all(|k| word_core(tokens[start + k]) == words[k]) {
            return true;
        }
    }
    false
}

fn clause_final(tok: &str) -> bool {
    let mut chars: Vec<char> = tok.chars().collect();
    while chars.last().is_some_and(|c| CLOSERS.contains(c)) {
        chars.pop();
    }
    let Some(&last) = chars.last() else { return false };
    if !matches!(last, '.' | '!' | '?' | ';' | ':') {
        return false;
    }
    match chars.len() {
        1 => last != '.',
        n => !matches!(chars[n - 2], '.' | '…'),
    }
}

fn comma_final(tok: &str) -> bool {
    let mut chars: Vec<char> = tok.chars().collect();
    while chars.last().is_some_and(|c| CLOSERS.contains(c)) {
        chars.pop();
    }
    chars.last() == Some(&',')
}

fn opens_with_conjunction(tok: &str) -> bool {
    let lower = tok.to_lowercase();
    let rest = lower.trim_start_matches(['"', '\'', '(', '[']);
    ["and", "but", "or", "nor", "yet", "so"].iter().any(|c| {
        rest.strip_prefix(c)
            .is_some_and(|tail| tail.chars().all(|ch| !ch.is_alphanumeric() && ch != '\''))
    })
}

/// Boundary rule written without regexes: a marker follows a token that ends
/// a clause, or a comma-final token right before a coordinating
/// conjunction, unless the token closes a filler phrase.
pub fn boundary_oracle(text: &str) -> Vec<usize> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    (0..tokens.len())
        .filter(|&i| !is_filler_end(&tokens, i))
        .filter(|&i| {
            clause_final(tokens[i])
                || (comma_final(tokens[i]) && tokens.get(i + 1).is_some_and(|n| opens_with_conjunction(n)))
        })
        .collect()
}

pub mod gate_laws {
    use thinkstream::trigger::{gate, HeuristicScorer, TriggerConfig, TriggerReason, TriggerState};
    use thinkstream::vocab;

    fn cfg(tau: f64) -> TriggerConfig {
        TriggerConfig::new(tau, 512).unwrap()
    }

    /// Raising tau or lowering the score never turns a non-fire into a fire.
    pub fn threshold(prefix: &str, s_lo: f64, s_hi: f64, tau_lo: f64, tau_hi: f64) -> Result<(), String> {
        let fires = |s: f64, t: f64| gate(&mut TriggerState::new(), prefix, s, &cfg(t)).fired;
        if fires(s_lo, tau_hi) && !fires(s_hi, tau_lo) {
            return Err(format!("fired at ({s_lo}, {tau_hi}) but not at ({s_hi}, {tau_lo})"));
        }
        for (s, t) in [(s_lo, tau_lo), (s_lo, tau_hi), (s_hi, tau_lo), (s_hi, tau_hi)] {
            let d = gate(&mut TriggerState::new(), prefix, s, &cfg(t));
            if d.fired != (s >= t) {
                return Err(format!("score {s} tau {t}: fired = {}", d.fired));
            }
            if (d.reason == TriggerReason::BelowThreshold) != (s < t) {
                return Err(format!("score {s} tau {t}: reason {:?}", d.reason));
            }
        }
        Ok(())
    }

    /// Over any stream of (prefix, score), two consecutive fires never carry
    /// the same text, and every decision matches a two-line reference model.
    pub fn dedup(stream: &[(String, f64)], tau: f64) -> Result<(), String> {
        let c = cfg(tau);
        let mut state = TriggerState::new();
        let mut last: Option<String> = None;
        let mut prev_fire: Option<String> = None;
        for (prefix, score) in stream {
            let d = gate(&mut state, prefix, *score, &c);
            let key = prefix.trim_end().to_string();
            let want = *score >= tau && last.as_ref() != Some(&key);
            if d.fired != want {
                return Err(format!("{prefix:?} @ {score}: fired {} expected {want}", d.fired));
            }
            if d.fired {
                if prev_fire.as_ref() == Some(&key) {
                    return Err(format!("two consecutive fires on {key:?}"));
                }
                prev_fire = Some(key.clone());
                last = Some(key);
            }
        }
        if state.decisions.len() != stream.len() {
            return Err("not every decision was logged".into());
        }
        Ok(())
    }

    /// A prefix whose last word closes a filler phrase scores zero and never
    /// fires, whatever came before it.
    pub fn filler(prefix: &str, filler: &str, tail: &str, tau: f64) -> Result<(), String> {
        let text = format!("{prefix} {filler}{tail}");
        if !vocab::ends_with_filler(&text) {
            return Err(format!("{text:?} not recognized as filler-final"));
        }
        let s = HeuristicScorer::score_str(&text);
        if s != 0.0 {
            return Err(format!("{text:?} scored {s}"));
        }
        if gate(&mut TriggerState::new(), &text, s, &cfg(tau)).fired {
            return Err(format!("{text:?} fired"));
        }
        Ok(())
    }
}

pub mod schedule {
    use thinkstream::backend::{ResponseRule, Role, ScriptedProfile};
    use thinkstream::orchestrator::prompt::StateSnapshot;
    use thinkstream::trace::UtteranceTrace;
    use thinkstream::trigger::Scorer;

    /// Scores every prefix with the same constant.
    pub struct Always(pub f64);

    impl Scorer for Always {
        fn score(&self, _: &str) -> thinkstream::Result<f64> {
            Ok(self.0)
        }

        fn name(&self) -> &'static str {
            "always"
        }
    }

    pub const THINKER_REPLY: &str = r#"{"corrected_text": "fixed", "key_variables": {"n1": "12", "rate": "3 per hour"}, "plan": ["find the rate", "multiply by the hours", "state the total"]}"#;

    /// Fixed-length replies so every generation's duration is known up front.
    pub fn fixed_profile(ttft_ms: u64, tps: f64, speaker_words: usize) -> ScriptedProfile {
        let speaker: Vec<String> = (0..speaker_words).map(|i| format!("w{i}")).collect();
        ScriptedProfile::new(ttft_ms, tps)
            .with_rule(ResponseRule {
                role: Some(Role::Thinker),
                contains: String::new(),
                reply: Some(THINKER_REPLY.into()),
                answer: None,
            })
            .with_rule(ResponseRule {
                role: Some(Role::Speaker),
                contains: String::new(),
                reply: Some(speaker.join(" ")),
                answer: None,
            })
    }

    pub fn duration(ttft_ms: u64, tps: f64, words: usize) -> u64 {
        ttft_ms + ((words.max(1) - 1) as f64 * 1000.0 / tps).round() as u64
    }

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct Planned {
        pub role: Role,
        pub start_ms: u64,
        pub end_ms: u64,
        pub transcript: String,
        pub interrupted: bool,
    }

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct Schedule {
        pub gens: Vec<Planned>,
        pub accepted: usize,
    }

    impl Schedule {
        pub fn nit(&self) -> usize {
            self.gens.iter().filter(|g| g.interrupted).count()
        }
    }

    /// Replays the lts policy under a scorer that is always above threshold,
    /// with Speaker and Thinker durations fixed in advance.
    pub fn lts_always_fire(trace: &UtteranceTrace, speaker_ms: u64, thinker_ms: u64) -> Schedule {
        let mut gens: Vec<Planned> = Vec::new();
        let mut last_fired: Option<&str> = None;
        let mut thinker_started = false;
        let mut accepted = None;
        let launch = |gens: &mut Vec<Planned>, role, t: u64, text: &str| {
            let d = if role == Role::Speaker { speaker_ms } else { thinker_ms };
            gens.push(Planned {
                role,
                start_ms: t,
                end_ms: t + d,
                transcript: text.to_string(),
                interrupted: false,
            });
            gens.len() - 1
        };
        for ev in &trace.events {
            let t = ev.t_ms;
            let text = ev.cumulative_text.as_str();
            let key = text.trim_end();
            let fired = last_fired != Some(key);
            if fired {
                last_fired = Some(key);
            }
            let in_flight = gens
                .iter()
                .position(|g| g.role == Role::Speaker && !g.interrupted && g.end_ms > t);
            let cancel = |gens: &mut Vec<Planned>, k: usize| {
                gens[k].interrupted = true;
                gens[k].end_ms = t;
            };
            if ev.is_final {
                if let Some(k) = in_flight.filter(|&k| gens[k].transcript == text) {
                    accepted = Some(k);
                } else if let Some(k) = gens
                    .iter()
                    .position(|g| g.role == Role::Speaker && !g.interrupted && g.end_ms <= t && g.transcript == text)
                {
                    accepted = Some(k);
                    if let Some(j) = in_flight {
                        cancel(&mut gens, j);
                    }
                } else {
                    if let Some(j) = in_flight {
                        cancel(&mut gens, j);
                    }
                    accepted = Some(launch(&mut gens, Role::Speaker, t, text));
                }
                break;
            }
            if !fired {
                continue;
            }
            if !thinker_started {
                thinker_started = true;
                launch(&mut gens, Role::Thinker, t, text);
                continue;
            }
            match in_flight {
                Some(k) => {
                    let old = gens[k].transcript.clone();
                    if text.len() > old.len() && text.starts_with(&old) {
                        cancel(&mut gens, k);
                        launch(&mut gens, Role::Speaker, t, text);
                    }
                }
                None => {
                    launch(&mut gens, Role::Speaker, t, text);
                }
            }
        }
        Schedule {
            gens,
            accepted: accepted.expect("trace ends in a final event"),
        }
    }

    /// Speaker-prompt sections for a snapshot, rendered independently of the
    /// prompt builder.
    pub fn injected_sections(s: &StateSnapshot) -> Vec<String> {
        let mut out = Vec::new();
        if !s.plan.is_empty() {
            let body: String = s
                .plan
                .iter()
                .enumerate()
                .map(|(i, p)| format!("{}. {p}\n", i + 1))
                .collect();
            out.push(format!("<plan>\n{body}</plan>\n"));
        }
        if !s.key_variables.is_empty() {
            let body: String = s.key_variables.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
            out.push(format!("<variables>\n{body}</variables>\n"));
        }
        out
    }
}
