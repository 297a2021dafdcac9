//! Deterministic message-passing run of the distribution protocol.
//!
//! Quantum key distribution is replaced by pre-shared seeds. A consumer
//! proves possession of its seed by answering a nonce challenge with a keyed
//! PRF tag (HMAC-SHA-256 truncated to 64 bits); an authenticated pair then
//! expands the seed into a one-time keystream and the supplier broadcasts
//! `μ ⊕ k` as a single encrypted bit.
//!
//! Ledgers hold branch-averaged energies taken from the protocol engine:
//! the supplier is debited `E_S`, every authenticated consumer is credited
//! its measured gain and an adversary is debited the energy its blind
//! feedback deposits. With `E_final` the chain energy after the session,
//! `Σ ledgers + E_final = 0`.

use alloc::collections::{BTreeMap, BTreeSet};

use hmac::{Hmac, KeyInit, Mac};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::ChainModel;
use crate::pauli::UnitVector;
use crate::prelude::*;
use crate::protocol::{
    blind_feedback_energy, run_qed, PartyConfig, PlacementRules, ProtocolReport, Role,
};
use crate::{Error, Result};

/// 256-bit pre-shared secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SharedSeed([u8; 32]);

impl SharedSeed {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        SharedSeed(bytes)
    }

    /// Seed derived from a short integer secret.
    pub fn from_u64(secret: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"qetlab seed");
        h.update(secret.to_le_bytes());
        SharedSeed(h.finalize().into())
    }
}

fn prf(seed: &SharedSeed, parts: &[&[u8]]) -> [u8; 32] {
    let mut mac = <Hmac<Sha256> as KeyInit>::new_from_slice(&seed.0).expect("HMAC takes any key length");
    for p in parts {
        mac.update(p);
    }
    mac.finalize().into_bytes().into()
}

/// 64-bit authentication tag.
pub fn tag(seed: &SharedSeed, parts: &[&[u8]]) -> u64 {
    let out = prf(seed, parts);
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

/// Deterministic keystream of at least `bits` bits for `(seed, context)`.
pub fn expand_keys(seed: &SharedSeed, context: &[u8], bits: usize) -> Keystream {
    let mut bytes = Vec::with_capacity(bits.div_ceil(8) + 32);
    let mut counter = 0u64;
    while bytes.len() * 8 < bits {
        bytes.extend_from_slice(&prf(seed, &[b"expand", context, &counter.to_le_bytes()]));
        counter += 1;
    }
    Keystream { bytes, len: bits }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keystream {
    bytes: Vec<u8>,
    len: usize,
}

impl Keystream {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> u8 {
        assert!(i < self.len, "keystream exhausted");
        (self.bytes[i / 8] >> (i % 8)) & 1
    }
}

/// Proof that a node passed authentication; required for key expansion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthToken {
    node: String,
    seed: SharedSeed,
}

/// One-time-pad discipline: each `(seed, context)` expands at most once.
#[derive(Debug, Clone, Default)]
pub struct KeyRegistry {
    used: BTreeSet<(SharedSeed, Vec<u8>)>,
}

impl KeyRegistry {
    pub fn expand(&mut self, auth: &AuthToken, context: &[u8], bits: usize) -> Result<Keystream> {
        if !self.used.insert((auth.seed, context.to_vec())) {
            return Err(Error::Refused(format!(
                "keystream for {} in this context was already issued",
                auth.node
            )));
        }
        Ok(expand_keys(&auth.seed, context, bits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageKind {
    AuthReq,
    AuthOk,
    AuthFail,
    KeyExpand,
    Outcome,
    Ack,
}

impl MessageKind {
    fn label(self) -> &'static [u8] {
        match self {
            MessageKind::AuthReq => b"AUTH_REQ",
            MessageKind::AuthOk => b"AUTH_OK",
            MessageKind::AuthFail => b"AUTH_FAIL",
            MessageKind::KeyExpand => b"KEY_EXPAND",
            MessageKind::Outcome => b"OUTCOME",
            MessageKind::Ack => b"ACK",
        }
    }
}

/// 128-bit values travel as 32 hex digits; JSON numbers cannot hold them.
mod hex_u128 {
    use crate::prelude::*;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:032x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> core::result::Result<u128, D::Error> {
        let text = String::deserialize(d)?;
        if text.len() != 32 {
            return Err(D::Error::custom("nonce must be 32 hex digits"));
        }
        u128::from_str_radix(&text, 16).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: String,
    pub receiver: String,
    #[serde(with = "hex_u128")]
    pub nonce: u128,
    pub payload: Vec<u8>,
    pub tag: u64,
}

impl Message {
    fn tag_input(&self) -> [Vec<u8>; 4] {
        [
            self.kind.label().to_vec(),
            self.nonce.to_le_bytes().to_vec(),
            self.sender.as_bytes().to_vec(),
            self.payload.clone(),
        ]
    }

    /// Tag under `seed`, or 0 when the pair shares no seed.
    fn sign(mut self, seed: Option<&SharedSeed>) -> Self {
        self.tag = match seed {
            Some(s) => {
                let parts = self.tag_input();
                tag(s, &[&parts[0], &parts[1], &parts[2], &parts[3]])
            }
            None => 0,
        };
        self
    }

    pub fn verifies(&self, seed: &SharedSeed) -> bool {
        let parts = self.tag_input();
        self.tag == tag(seed, &[&parts[0], &parts[1], &parts[2], &parts[3]])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub role: Role,
    pub site: i64,
    pub axis: UnitVector,
    #[serde(skip)]
    shared_key: Option<SharedSeed>,
    ledger: f64,
}

impl Node {
    pub fn new(id: &str, role: Role, site: i64, axis: UnitVector, shared_key: Option<SharedSeed>) -> Result<Self> {
        if role == Role::Adversary && shared_key.is_some() {
            return Err(Error::InvalidInput(format!("adversary {id} cannot hold a key")));
        }
        Ok(Node {
            id: id.to_owned(),
            role,
            site,
            axis,
            shared_key,
            ledger: 0.0,
        })
    }

    pub fn has_key(&self) -> bool {
        self.shared_key.is_some()
    }

    pub fn ledger(&self) -> f64 {
        self.ledger
    }

    fn party(&self) -> PartyConfig {
        PartyConfig {
            site: self.site,
            axis: self.axis,
            role: self.role,
        }
    }
}

/// Supplier side of the challenge–response exchange.
#[derive(Debug, Clone)]
pub struct Authenticator {
    id: String,
    keys: BTreeMap<String, SharedSeed>,
    pending: BTreeMap<u128, String>,
    spent: BTreeSet<u128>,
    rng: ChaCha20Rng,
}

impl Authenticator {
    pub fn new(id: &str, keys: BTreeMap<String, SharedSeed>, rng_seed: u64) -> Self {
        Authenticator {
            id: id.to_owned(),
            keys,
            pending: BTreeMap::new(),
            spent: BTreeSet::new(),
            rng: ChaCha20Rng::seed_from_u64(rng_seed),
        }
    }

    pub fn fresh_nonce(&mut self) -> u128 {
        ((self.rng.next_u64() as u128) << 64) | self.rng.next_u64() as u128
    }

    pub fn challenge(&mut self, to: &str) -> Message {
        let nonce = self.fresh_nonce();
        self.pending.insert(nonce, to.to_owned());
        Message {
            kind: MessageKind::AuthReq,
            sender: self.id.clone(),
            receiver: to.to_owned(),
            nonce,
            payload: to.as_bytes().to_vec(),
            tag: 0,
        }
        .sign(self.keys.get(to))
    }

    /// Checks an `ACK` answering an earlier challenge. Unknown, replayed or
    /// mis-tagged answers fail.
    pub fn verify(&mut self, ack: &Message) -> (Message, Option<AuthToken>) {
        let nonce = self.fresh_nonce();
        let claimed = ack.sender.clone();
        let fresh = !self.spent.contains(&ack.nonce)
            && self.pending.get(&ack.nonce).is_some_and(|to| *to == claimed);
        let seed = self.keys.get(&claimed).copied();
        let ok = ack.kind == MessageKind::Ack
            && fresh
            && seed.is_some_and(|s| ack.tag == response_tag(&s, ack.nonce, &claimed));
        self.pending.remove(&ack.nonce);
        self.spent.insert(ack.nonce);
        let reply = Message {
            kind: if ok { MessageKind::AuthOk } else { MessageKind::AuthFail },
            sender: self.id.clone(),
            receiver: claimed.clone(),
            nonce,
            payload: ack.nonce.to_le_bytes().to_vec(),
            tag: 0,
        }
        .sign(seed.as_ref());
        let token = ok.then(|| AuthToken {
            node: claimed,
            seed: seed.expect("verified"),
        });
        (reply, token)
    }

    fn key_of(&self, id: &str) -> Option<&SharedSeed> {
        self.keys.get(id)
    }
}

/// `PRF(seed, nonce ‖ node_id)`.
pub fn response_tag(seed: &SharedSeed, nonce: u128, node_id: &str) -> u64 {
    tag(seed, &[b"ACK", &nonce.to_le_bytes(), node_id.as_bytes()])
}

/// Node side: answers a challenge addressed to `claimed_id`. Without the
/// seed the node can only guess a tag.
pub fn respond(node: &Node, claimed_id: &str, challenge: &Message, rng: &mut ChaCha20Rng) -> Message {
    let tag = match &node.shared_key {
        Some(seed) => response_tag(seed, challenge.nonce, claimed_id),
        None => rng.next_u64(),
    };
    Message {
        kind: MessageKind::Ack,
        sender: claimed_id.to_owned(),
        receiver: challenge.sender.clone(),
        nonce: challenge.nonce,
        payload: Vec::new(),
        tag,
    }
}

/// Full challenge–response for one node. Returns the exchanged messages and
/// the token on success.
pub fn authenticate(
    supplier: &mut Authenticator,
    node: &Node,
    claimed_id: &str,
    rng: &mut ChaCha20Rng,
) -> (Vec<Message>, Option<AuthToken>) {
    let req = supplier.challenge(claimed_id);
    let ack = respond(node, claimed_id, &req, rng);
    let (reply, token) = supplier.verify(&ack);
    (vec![req, ack, reply], token)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackScenario {
    #[default]
    Honest,
    /// The adversary reads the broadcast ciphertext and feeds back on a guess.
    Eavesdrop,
    /// The adversary poses as a consumer, fails authentication and feeds back blind.
    Impersonate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum LocalAction {
    Measure { mu: u8 },
    Feedback { mu: u8, theta: f64 },
    BlindFeedback { guess: u8, theta: f64 },
}

/// Local operation on the chain and its ledger entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalOp {
    pub node: String,
    #[serde(flatten)]
    pub action: LocalAction,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventBody {
    Message(Message),
    Local(LocalOp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub node: String,
    pub balance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub seed: u64,
    pub scenario: AttackScenario,
    /// Sampled supplier outcome driving the message layer.
    pub mu: u8,
    pub events: Vec<Event>,
    pub ledgers: Vec<LedgerEntry>,
    pub report: ProtocolReport,
    /// `Tr[ρ H]` after every local operation of the session.
    pub final_energy: f64,
}

impl SessionLog {
    pub fn balance(&self, node: &str) -> Option<f64> {
        self.ledgers.iter().find(|l| l.node == node).map(|l| l.balance)
    }

    /// `|Σ ledgers + E_final|`.
    pub fn conservation_defect(&self) -> f64 {
        (self.ledgers.iter().map(|l| l.balance).sum::<f64>() + self.final_energy).abs()
    }
}

/// Recomputes the ledgers by folding the recorded local operations.
pub fn replay(log: &SessionLog) -> Vec<LedgerEntry> {
    let mut ledgers: Vec<LedgerEntry> = log
        .ledgers
        .iter()
        .map(|l| LedgerEntry {
            node: l.node.clone(),
            balance: 0.0,
        })
        .collect();
    for e in &log.events {
        if let EventBody::Local(op) = &e.body {
            if let Some(l) = ledgers.iter_mut().find(|l| l.node == op.node) {
                l.balance += op.energy;
            }
        }
    }
    ledgers
}

/// Session description: parties with optional pre-shared secrets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub role: Role,
    pub site: i64,
    pub axis: UnitVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub scenario: AttackScenario,
    #[serde(default)]
    pub seed: u64,
    /// Adversary feedback angle; defaults to the nearest consumer's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_d: Option<f64>,
    /// Forces the adversary's guess instead of drawing it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary_guess: Option<u8>,
    /// Identity the impersonator claims; defaults to the first consumer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impersonated: Option<String>,
}

struct Clock {
    time: u64,
    events: Vec<Event>,
}

impl Clock {
    fn push(&mut self, body: EventBody) {
        self.events.push(Event {
            time: self.time,
            body,
        });
        self.time += 1;
    }
}

/// Runs the six protocol steps as a message exchange.
pub fn run_session(model: &ChainModel, cfg: &SessionConfig, rules: &PlacementRules) -> Result<SessionLog> {
    let mut nodes = cfg
        .nodes
        .iter()
        .map(|s| Node::new(&s.id, s.role, s.site, s.axis, s.key.map(SharedSeed::from_u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut ids = BTreeSet::new();
    for n in &nodes {
        if !ids.insert(n.id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate node id {}", n.id)));
        }
    }
    let by_role = |r: Role| nodes.iter().enumerate().filter(move |(_, n)| n.role == r).map(|(i, _)| i);
    let suppliers: Vec<usize> = by_role(Role::Supplier).collect();
    let consumers: Vec<usize> = by_role(Role::Consumer).collect();
    let adversaries: Vec<usize> = by_role(Role::Adversary).collect();
    if suppliers.len() != 1 {
        return Err(Error::InvalidInput("exactly one supplier node is required".into()));
    }
    if adversaries.len() > 1 {
        return Err(Error::InvalidInput("at most one adversary node is supported".into()));
    }
    let adversary = adversaries.first().copied();
    if cfg.scenario != AttackScenario::Honest && adversary.is_none() {
        return Err(Error::InvalidInput(format!(
            "scenario {:?} needs an adversary node",
            cfg.scenario
        )));
    }
    let s_idx = suppliers[0];
    let supplier_party = nodes[s_idx].party();
    let consumer_parties: Vec<PartyConfig> = consumers.iter().map(|&i| nodes[i].party()).collect();
    let adversary_party = adversary.map(|i| nodes[i].party());
    rules.check(model, &supplier_party, &consumer_parties, adversary_party.as_ref())?;

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let keys: BTreeMap<String, SharedSeed> = consumers
        .iter()
        .filter_map(|&i| nodes[i].shared_key.map(|k| (nodes[i].id.clone(), k)))
        .collect();
    let mut auth = Authenticator::new(&nodes[s_idx].id, keys, rng.next_u64());
    let mut registry = KeyRegistry::default();
    let mut clock = Clock {
        time: 0,
        events: Vec::new(),
    };
    let credit = |nodes: &mut [Node], clock: &mut Clock, idx: usize, action: LocalAction, energy: f64| {
        nodes[idx].ledger += energy;
        clock.push(EventBody::Local(LocalOp {
            node: nodes[idx].id.clone(),
            action,
            energy,
        }));
    };

    // step 2: authentication
    let mut tokens: Vec<(usize, AuthToken)> = Vec::new();
    for &i in &consumers {
        let id = nodes[i].id.clone();
        let (msgs, token) = authenticate(&mut auth, &nodes[i], &id, &mut rng);
        msgs.into_iter().for_each(|m| clock.push(EventBody::Message(m)));
        if let Some(t) = token {
            tokens.push((i, t));
        }
    }
    if let (AttackScenario::Impersonate, Some(a)) = (cfg.scenario, adversary) {
        let claimed = match &cfg.impersonated {
            Some(id) => {
                if !ids.contains(id.as_str()) {
                    return Err(Error::InvalidInput(format!("unknown node {id}")));
                }
                id.clone()
            }
            None => consumers
                .first()
                .map(|&i| nodes[i].id.clone())
                .unwrap_or_else(|| nodes[a].id.clone()),
        };
        let (msgs, token) = authenticate(&mut auth, &nodes[a], &claimed, &mut rng);
        msgs.into_iter().for_each(|m| clock.push(EventBody::Message(m)));
        if token.is_some() {
            return Err(Error::Refused("unkeyed node passed authentication".into()));
        }
    }

    // step 1 on the chain, for the authenticated consumers only
    let served: Vec<PartyConfig> = tokens.iter().map(|(i, _)| nodes[*i].party()).collect();
    let run = run_qed(model, &supplier_party, &served, rules)?;
    let p0 = run
        .final_state
        .branches
        .iter()
        .find(|b| b.mu == 0)
        .map_or(0.0, |b| b.probability);
    let draw = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mu = if draw < p0 { 0 } else { 1 };
    credit(&mut nodes, &mut clock, s_idx, LocalAction::Measure { mu }, -run.report.e_s);

    // steps 3-6: key expansion, encrypted broadcast, decryption, feedback
    let context = format!("session-{}", cfg.seed);
    let mut ciphertexts = Vec::new();
    for ((i, token), rep) in tokens.iter().zip(&run.report.consumers) {
        let id = nodes[*i].id.clone();
        let seed = auth.key_of(&id).copied();
        let nonce = auth.fresh_nonce();
        clock.push(EventBody::Message(
            Message {
                kind: MessageKind::KeyExpand,
                sender: nodes[s_idx].id.clone(),
                receiver: id.clone(),
                nonce,
                payload: context.as_bytes().to_vec(),
                tag: 0,
            }
            .sign(seed.as_ref()),
        ));
        let key_s = registry.expand(token, context.as_bytes(), 64)?;
        // the consumer derives the same stream from its own copy of the seed
        let key_c = expand_keys(nodes[*i].shared_key.as_ref().expect("keyed"), context.as_bytes(), 64);
        let ct = mu ^ key_s.bit(0);
        let outcome = Message {
            kind: MessageKind::Outcome,
            sender: nodes[s_idx].id.clone(),
            receiver: id.clone(),
            nonce: auth.fresh_nonce(),
            payload: vec![ct],
            tag: 0,
        }
        .sign(seed.as_ref());
        if !outcome.verifies(nodes[*i].shared_key.as_ref().expect("keyed")) {
            return Err(Error::Refused(format!("outcome tag for {id} does not verify")));
        }
        ciphertexts.push(ct);
        clock.push(EventBody::Message(outcome));
        let decrypted = ct ^ key_c.bit(0);
        if decrypted != mu {
            return Err(Error::Refused(format!("{id} decrypted a different outcome")));
        }
        credit(
            &mut nodes,
            &mut clock,
            *i,
            LocalAction::Feedback {
                mu: decrypted,
                theta: rep.theta,
            },
            rep.e_m_meas,
        );
    }

    let mut report = run.report.clone();
    let mut final_energy = run.report.residual_total;
    if let (Some(a), true) = (adversary, cfg.scenario != AttackScenario::Honest) {
        let site = model.resolve_site(nodes[a].site)?;
        let theta = match cfg.theta_d {
            Some(t) => t,
            None => nearest_theta(model, site, &report)?,
        };
        let per_guess = blind_feedback_energy(model, &run.final_state, site, &nodes[a].axis, theta)?;
        // an eavesdropper's best guess from a one-time-padded bit is a coin flip
        let guess = cfg.adversary_guess.unwrap_or((rng.next_u64() & 1) as u8) & 1;
        let deposit = per_guess[guess as usize];
        report.adversary_deposit = Some(0.5 * (per_guess[0] + per_guess[1]));
        final_energy += deposit;
        credit(
            &mut nodes,
            &mut clock,
            a,
            LocalAction::BlindFeedback { guess, theta },
            -deposit,
        );
    }

    Ok(SessionLog {
        seed: cfg.seed,
        scenario: cfg.scenario,
        mu,
        events: clock.events,
        ledgers: nodes
            .iter()
            .map(|n| LedgerEntry {
                node: n.id.clone(),
                balance: n.ledger,
            })
            .collect(),
        report,
        final_energy,
    })
}

fn nearest_theta(model: &ChainModel, site: usize, report: &ProtocolReport) -> Result<f64> {
    let mut best: Option<(usize, f64)> = None;
    for c in &report.consumers {
        let d = model.distance(site, model.resolve_site(c.site)?);
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, c.theta));
        }
    }
    best.map(|(_, t)| t)
        .ok_or_else(|| Error::Degenerate("no authenticated consumer to imitate; set theta_d".into()))
}
