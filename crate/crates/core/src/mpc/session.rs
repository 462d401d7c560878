use std::time::Duration;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::field::FieldElement;
use crate::net::{Frame, MessageKind, NetError, PeerId, Transport};
use crate::shamir::{self, lagrange_at_zero, Share, SharingParams};

use super::compare::ComparisonParams;
use super::{MpcError, SharedValue, SharedVector};

/// Communication counters. Identical across runs with equal public sizes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStats {
    /// Synchronized message exchanges this peer took part in.
    pub rounds: u64,
    /// Invocations of the multiplication protocol (one per product).
    pub multiplications: u64,
    pub bytes_sent: u64,
    pub messages_sent: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct SessionConfig {
    pub session_id: u16,
    pub params: SharingParams,
    pub comparison: ComparisonParams,
    /// Seed for this peer's randomness; `None` draws from the OS.
    pub seed: Option<u64>,
    /// Check every opened value for consistency with a degree-`t` polynomial.
    pub verify_openings: bool,
}

impl SessionConfig {
    pub fn new(params: SharingParams) -> Self {
        Self {
            session_id: 1,
            params,
            comparison: ComparisonParams::default(),
            seed: None,
            verify_openings: cfg!(debug_assertions),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// One computing peer's end of a protocol run.
pub struct Session {
    id: u16,
    me: PeerId,
    params: SharingParams,
    comparison: ComparisonParams,
    verify_openings: bool,
    transport: Box<dyn Transport>,
    rng: ChaCha20Rng,
    round: u32,
    stats: TraceStats,
    recombine: Vec<FieldElement>,
    coeffs: Vec<FieldElement>,
}

fn peer_seed(seed: u64, me: PeerId) -> u64 {
    // splitmix64 finalizer so neighbouring peers get unrelated streams
    let mut z = seed ^ (me as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Session {
    pub fn new(config: SessionConfig, transport: Box<dyn Transport>) -> Result<Self, MpcError> {
        let params = config.params;
        let me = transport.me();
        if me == 0 || me as usize > params.parties() {
            return Err(MpcError::Config(format!("peer id {me} outside 1..={}", params.parties())));
        }
        if 2 * params.threshold() + 1 > params.parties() {
            return Err(MpcError::Config(format!(
                "multiplication needs n >= 2t + 1 (t = {}, n = {})",
                params.threshold(),
                params.parties()
            )));
        }
        config.comparison.validate(&params)?;
        let rng = match config.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(peer_seed(s, me)),
            None => ChaCha20Rng::from_entropy(),
        };
        let points: Vec<usize> = (1..=params.parties()).collect();
        Ok(Self {
            id: config.session_id,
            me,
            params,
            comparison: config.comparison,
            verify_openings: config.verify_openings,
            transport,
            rng,
            round: 0,
            stats: TraceStats::default(),
            recombine: lagrange_at_zero(&points, params.prime()),
            coeffs: Vec::with_capacity(params.threshold() + 1),
        })
    }

    pub fn me(&self) -> PeerId {
        self.me
    }

    pub fn params(&self) -> &SharingParams {
        &self.params
    }

    pub fn comparison(&self) -> &ComparisonParams {
        &self.comparison
    }

    pub fn prime(&self) -> u64 {
        self.params.prime()
    }

    pub fn parties(&self) -> usize {
        self.params.parties()
    }

    pub fn stats(&self) -> TraceStats {
        self.stats
    }

    pub fn transport_label(&self) -> &'static str {
        self.transport.label()
    }

    /// Time since [`Session::start_measurement`] on the transport's clock.
    pub fn elapsed(&mut self) -> Duration {
        self.transport.elapsed()
    }

    pub fn start_measurement(&mut self) {
        self.transport.restart_clock();
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn element(&self, v: u64) -> FieldElement {
        FieldElement::new(v, self.prime())
    }

    /// Public constant as a (degree-0) sharing.
    pub fn constant(&self, v: u64) -> SharedValue {
        SharedValue(self.element(v))
    }

    pub fn zero(&self) -> SharedValue {
        self.constant(0)
    }

    pub fn zeros(&self, len: usize) -> SharedVector {
        SharedVector(vec![self.zero(); len])
    }

    fn others(&self) -> impl Iterator<Item = PeerId> + '_ {
        let me = self.me;
        (1..=self.params.parties() as PeerId).filter(move |&p| p != me)
    }

    /// One synchronized round: send the given payloads, then receive one frame
    /// from each peer in `from`.
    fn exchange(
        &mut self,
        kind: MessageKind,
        outgoing: Vec<(PeerId, Vec<FieldElement>)>,
        from: &[PeerId],
    ) -> Result<Vec<Vec<FieldElement>>, MpcError> {
        self.round = self.round.wrapping_add(1);
        self.stats.rounds += 1;
        for (to, payload) in outgoing {
            let frame = Frame {
                session: self.id,
                round: self.round,
                sender: self.me,
                kind,
                payload,
            };
            let bytes = frame.encode();
            self.stats.bytes_sent += bytes.len() as u64;
            self.stats.messages_sent += 1;
            self.transport.send(to, bytes)?;
        }
        let mut received = Vec::with_capacity(from.len());
        for &peer in from {
            let bytes = self.transport.recv(peer)?;
            let frame = Frame::decode(&bytes, self.prime())?;
            if frame.session != self.id || frame.round != self.round || frame.sender != peer || frame.kind != kind {
                return Err(NetError::Desync {
                    expected: format!("session {} round {} from {peer} kind {kind:?}", self.id, self.round),
                    got: format!(
                        "session {} round {} from {} kind {:?}",
                        frame.session, frame.round, frame.sender, frame.kind
                    ),
                }
                .into());
            }
            received.push(frame.payload);
        }
        Ok(received)
    }

    /// Shares `secret` and appends party `i`'s share to `per_peer[i]`.
    fn share_into(&mut self, secret: FieldElement, per_peer: &mut [Vec<FieldElement>]) {
        let p = self.prime();
        self.coeffs.clear();
        self.coeffs.push(secret);
        for _ in 0..self.params.threshold() {
            self.coeffs.push(FieldElement::new(self.rng.gen_range(0..p), p));
        }
        for (i, out) in per_peer.iter_mut().enumerate().skip(1) {
            out.push(shamir::eval_poly(&self.coeffs, FieldElement::new(i as u64, p)));
        }
    }

    /// Secret-shares values held by the `owners` in one round.
    ///
    /// Each owner supplies `len` values (`mine` must be `Some` exactly when this
    /// peer is an owner). Returns one vector per owner, in `owners` order.
    pub fn input(
        &mut self,
        owners: &[PeerId],
        mine: Option<&[FieldElement]>,
        len: usize,
    ) -> Result<Vec<SharedVector>, MpcError> {
        let n = self.parties();
        let is_owner = owners.contains(&self.me);
        if is_owner != mine.is_some() {
            return Err(MpcError::Config("input ownership mismatch".into()));
        }
        let mut own_shares = Vec::new();
        let mut outgoing: Vec<(PeerId, Vec<FieldElement>)> = Vec::new();
        if let Some(values) = mine {
            if values.len() != len {
                return Err(MpcError::LengthMismatch(values.len(), len));
            }
            let mut per_peer: Vec<Vec<FieldElement>> = vec![Vec::with_capacity(len); n + 1];
            for &v in values {
                self.share_into(v, &mut per_peer);
            }
            own_shares = std::mem::take(&mut per_peer[self.me as usize]);
            outgoing = self
                .others()
                .map(|p| (p, std::mem::take(&mut per_peer[p as usize])))
                .collect();
        }
        let from: Vec<PeerId> = owners.iter().copied().filter(|&o| o != self.me).collect();
        let mut received = self.exchange(MessageKind::Input, outgoing, &from)?.into_iter();
        owners
            .iter()
            .map(|&o| {
                let raw = if o == self.me {
                    std::mem::take(&mut own_shares)
                } else {
                    received.next().expect("one payload per remote owner")
                };
                if raw.len() != len {
                    return Err(MpcError::LengthMismatch(raw.len(), len));
                }
                Ok(raw.into_iter().map(SharedValue).collect())
            })
            .collect()
    }

    /// Element-wise products with BGW degree reduction: one round per batch.
    pub fn mul_batch(&mut self, xs: &[SharedValue], ys: &[SharedValue]) -> Result<SharedVector, MpcError> {
        if xs.len() != ys.len() {
            return Err(MpcError::LengthMismatch(xs.len(), ys.len()));
        }
        let len = xs.len();
        if len == 0 {
            return Ok(SharedVector::default());
        }
        let n = self.parties();
        let mut per_peer: Vec<Vec<FieldElement>> = vec![Vec::with_capacity(len); n + 1];
        for (x, y) in xs.iter().zip(ys) {
            self.share_into(x.0 * y.0, &mut per_peer);
        }
        let mine = std::mem::take(&mut per_peer[self.me as usize]);
        let others: Vec<PeerId> = self.others().collect();
        let outgoing = others
            .iter()
            .map(|&p| (p, std::mem::take(&mut per_peer[p as usize])))
            .collect();
        let received = self.exchange(MessageKind::Multiply, outgoing, &others)?;
        for r in &received {
            if r.len() != len {
                return Err(MpcError::LengthMismatch(r.len(), len));
            }
        }
        self.stats.multiplications += len as u64;

        let me_idx = self.me as usize - 1;
        let out = (0..len)
            .map(|k| {
                let mut acc = self.recombine[me_idx] * mine[k];
                for (&p, sub) in others.iter().zip(&received) {
                    acc += self.recombine[p as usize - 1] * sub[k];
                }
                SharedValue(acc)
            })
            .collect();
        Ok(out)
    }

    pub fn mul(&mut self, x: SharedValue, y: SharedValue) -> Result<SharedValue, MpcError> {
        Ok(self.mul_batch(&[x], &[y])?[0])
    }

    fn reconstruct_all(&self, columns: &[(PeerId, &[FieldElement])], k: usize) -> Result<FieldElement, MpcError> {
        if self.verify_openings {
            let shares: Vec<Share> = columns.iter().map(|(p, v)| Share::new(*p as usize, v[k])).collect();
            Ok(shamir::reconstruct(&shares, &self.params)?)
        } else {
            Ok(columns
                .iter()
                .fold(FieldElement::zero(self.prime()), |acc, (p, v)| {
                    acc + self.recombine[*p as usize - 1] * v[k]
                }))
        }
    }

    /// Opens values to every peer.
    pub fn open_batch(&mut self, xs: &[SharedValue]) -> Result<Vec<FieldElement>, MpcError> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let mine: Vec<FieldElement> = xs.iter().map(|x| x.0).collect();
        let others: Vec<PeerId> = self.others().collect();
        let outgoing = others.iter().map(|&p| (p, mine.clone())).collect();
        let received = self.exchange(MessageKind::Open, outgoing, &others)?;
        self.collect_open(mine, &others, received)
    }

    fn collect_open(
        &self,
        mine: Vec<FieldElement>,
        others: &[PeerId],
        received: Vec<Vec<FieldElement>>,
    ) -> Result<Vec<FieldElement>, MpcError> {
        let len = mine.len();
        for r in &received {
            if r.len() != len {
                return Err(MpcError::LengthMismatch(r.len(), len));
            }
        }
        let mut columns: Vec<(PeerId, &[FieldElement])> = vec![(self.me, &mine)];
        columns.extend(others.iter().copied().zip(received.iter().map(Vec::as_slice)));
        columns.sort_by_key(|c| c.0);
        (0..len).map(|k| self.reconstruct_all(&columns, k)).collect()
    }

    pub fn open(&mut self, x: SharedValue) -> Result<FieldElement, MpcError> {
        Ok(self.open_batch(&[x])?[0])
    }

    /// Opens values to the `recipients` only; returns `Some` on recipients.
    pub fn reveal_to(
        &mut self,
        recipients: &[PeerId],
        xs: &[SharedValue],
    ) -> Result<Option<Vec<FieldElement>>, MpcError> {
        let mine: Vec<FieldElement> = xs.iter().map(|x| x.0).collect();
        let outgoing = recipients
            .iter()
            .filter(|&&r| r != self.me)
            .map(|&r| (r, mine.clone()))
            .collect();
        let receiving = recipients.contains(&self.me);
        let others: Vec<PeerId> = if receiving { self.others().collect() } else { Vec::new() };
        let received = self.exchange(MessageKind::Reveal, outgoing, &others)?;
        if receiving {
            Ok(Some(self.collect_open(mine, &others, received)?))
        } else {
            Ok(None)
        }
    }

    /// Contributors `1..=t+1`: enough that no single peer knows a combined value.
    pub fn contributors(&self) -> Vec<PeerId> {
        (1..=(self.params.threshold() + 1) as PeerId).collect()
    }

    /// Shared uniformly random bits, as the XOR of bits contributed by `t + 1` peers.
    pub fn random_bits(&mut self, count: usize) -> Result<SharedVector, MpcError> {
        let (bits, _) = self.random_bits_and_masks(count, 0, 0)?;
        Ok(bits)
    }

    /// `bit_count` random bits plus `mask_count` random integers below
    /// `(t + 1) * 2^mask_bits`, drawn in a single input round.
    pub(crate) fn random_bits_and_masks(
        &mut self,
        bit_count: usize,
        mask_count: usize,
        mask_bits: u32,
    ) -> Result<(SharedVector, SharedVector), MpcError> {
        if bit_count == 0 && mask_count == 0 {
            return Ok((SharedVector::default(), SharedVector::default()));
        }
        let contributors = self.contributors();
        let p = self.prime();
        let mine = if contributors.contains(&self.me) {
            let mut v = Vec::with_capacity(bit_count + mask_count);
            for _ in 0..bit_count {
                v.push(FieldElement::new(self.rng.gen_range(0..2), p));
            }
            for _ in 0..mask_count {
                let m = if mask_bits >= 64 { self.rng.next_u64() } else { self.rng.gen_range(0..1u64 << mask_bits) };
                v.push(FieldElement::new(m, p));
            }
            Some(v)
        } else {
            None
        };
        let contributions = self.input(&contributors, mine.as_deref(), bit_count + mask_count)?;

        let mut masks = self.zeros(mask_count);
        for c in &contributions {
            for (m, &v) in masks.iter_mut().zip(&c[bit_count..]) {
                *m += v;
            }
        }
        let mut bits: Vec<SharedValue> = contributions[0][..bit_count].to_vec();
        let two = self.element(2);
        for c in &contributions[1..] {
            let other = &c[..bit_count];
            let prod = self.mul_batch(&bits, other)?;
            bits = bits
                .iter()
                .zip(other)
                .zip(prod.iter())
                .map(|((&a, &b), &ab)| a + b - ab * two)
                .collect();
        }
        Ok((SharedVector(bits), masks))
    }

    /// Shares this peer would deliver to input peers for the given values.
    pub fn output_shares(&self, xs: &[SharedValue]) -> Vec<Share> {
        xs.iter().map(|x| Share::new(self.me as usize, x.0)).collect()
    }
}
