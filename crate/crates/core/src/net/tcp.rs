//! TCP transport: one stream per peer pair, with a reader and a writer
//! thread per link so frames are buffered while the session computes.

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};

use super::frame::read_frame_bytes;
use super::mac::TAG_BYTES;
use super::{ClockMode, Frame, LinkShaper, MacKey, MessageKind, NetError, NetProfile, PeerClock, PeerId, Transport};

struct Outgoing {
    bytes: Vec<u8>,
    release_at: Instant,
}

struct TcpLink {
    out: Option<Sender<Outgoing>>,
    inbox: Receiver<Result<Vec<u8>, NetError>>,
    shaper: LinkShaper,
    stream: TcpStream,
    writer: Option<thread::JoinHandle<()>>,
}

pub struct TcpTransport {
    me: PeerId,
    links: Vec<Option<TcpLink>>,
    clock: PeerClock,
    epoch: Instant,
}

/// Connects to `addr`, retrying until `timeout`, and announces ourselves with a hello frame.
pub fn dial(addr: SocketAddr, me: PeerId, session: u16, timeout: Duration) -> Result<TcpStream, NetError> {
    let deadline = Instant::now() + timeout;
    let mut stream = loop {
        match TcpStream::connect(addr) {
            Ok(s) => break s,
            Err(e) if Instant::now() < deadline => {
                tracing::debug!(%addr, error = %e, "dial failed, retrying");
                thread::sleep(Duration::from_millis(50));
            }
            Err(e) => return Err(e.into()),
        }
    };
    stream.set_nodelay(true)?;
    let hello = Frame {
        session,
        round: 0,
        sender: me,
        kind: MessageKind::Hello,
        payload: vec![],
    };
    stream.write_all(&hello.encode())?;
    Ok(stream)
}

/// Builds this peer's links to every other peer: dials the peers with larger
/// ids and accepts the smaller ones on `listener`, which identify themselves
/// with a hello frame for `session`.
pub fn connect_mesh(
    me: PeerId,
    listener: &TcpListener,
    peers: &[(PeerId, SocketAddr)],
    session: u16,
    timeout: Duration,
    profile: Option<NetProfile>,
    mac: Option<MacKey>,
) -> Result<TcpTransport, NetError> {
    let deadline = Instant::now() + timeout;
    let mut streams = Vec::new();
    for &(peer, addr) in peers.iter().filter(|(p, _)| *p > me) {
        streams.push((peer, dial(addr, me, session, timeout)?));
    }
    let mut waiting: Vec<PeerId> = peers.iter().map(|(p, _)| *p).filter(|&p| p < me).collect();
    listener.set_nonblocking(true)?;
    while !waiting.is_empty() {
        match listener.accept() {
            Ok((mut stream, _)) => {
                stream.set_nonblocking(false)?;
                stream.set_read_timeout(Some(timeout))?;
                let hello = Frame::decode(&read_frame_bytes(&mut stream)?, crate::field::DEFAULT_PRIME)?;
                stream.set_read_timeout(None)?;
                if hello.kind != MessageKind::Hello || hello.session != session {
                    tracing::warn!(sender = hello.sender, "ignoring connection without a matching hello");
                    continue;
                }
                let Some(pos) = waiting.iter().position(|&p| p == hello.sender) else {
                    tracing::warn!(sender = hello.sender, "unexpected peer");
                    continue;
                };
                waiting.swap_remove(pos);
                streams.push((hello.sender, stream));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    listener.set_nonblocking(false)?;
                    return Err(NetError::Disconnected(waiting[0]));
                }
                thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(e.into()),
        }
    }
    listener.set_nonblocking(false)?;
    TcpTransport::new(me, streams, profile, mac)
}

impl TcpTransport {
    /// Wraps already-established streams (one per remote peer).
    pub fn new(
        me: PeerId,
        streams: Vec<(PeerId, TcpStream)>,
        profile: Option<NetProfile>,
        mac: Option<MacKey>,
    ) -> Result<Self, NetError> {
        let epoch = Instant::now();
        let max_id = streams.iter().map(|(id, _)| *id).max().unwrap_or(0).max(me);
        let mut links: Vec<Option<TcpLink>> = (0..=max_id).map(|_| None).collect();
        for (peer, stream) in streams {
            stream.set_nodelay(true)?;
            let (out_tx, out_rx) = unbounded::<Outgoing>();
            let (in_tx, in_rx) = unbounded();

            let mut reader = BufReader::new(stream.try_clone()?);
            let rmac = mac.clone();
            thread::spawn(move || {
                let mut seq = 0u64;
                loop {
                    let res = read_frame_bytes(&mut reader).and_then(|bytes| {
                        if let Some(key) = &rmac {
                            let mut tag = [0u8; TAG_BYTES];
                            reader.read_exact(&mut tag)?;
                            if !key.verify(peer, me, seq, &bytes, &tag) {
                                return Err(NetError::BadMac(peer));
                            }
                        }
                        seq += 1;
                        Ok(bytes)
                    });
                    let stop = res.is_err();
                    if in_tx.send(res).is_err() || stop {
                        break;
                    }
                }
            });

            let mut writer = BufWriter::new(stream.try_clone()?);
            let wmac = mac.clone();
            let handle = thread::spawn(move || {
                let mut seq = 0u64;
                for msg in out_rx {
                    let now = Instant::now();
                    if msg.release_at > now {
                        thread::sleep(msg.release_at - now);
                    }
                    let mut ok = writer.write_all(&msg.bytes).is_ok();
                    if let Some(key) = &wmac {
                        ok &= writer.write_all(&key.tag(me, peer, seq, &msg.bytes)).is_ok();
                    }
                    seq += 1;
                    if !ok || writer.flush().is_err() {
                        break;
                    }
                }
            });

            links[peer as usize] = Some(TcpLink {
                out: Some(out_tx),
                inbox: in_rx,
                shaper: LinkShaper::new(profile),
                stream,
                writer: Some(handle),
            });
        }
        Ok(Self {
            me,
            links,
            clock: PeerClock::new(ClockMode::RealTime, epoch),
            epoch,
        })
    }
}

impl Transport for TcpTransport {
    fn me(&self) -> PeerId {
        self.me
    }

    fn send(&mut self, to: PeerId, bytes: Vec<u8>) -> Result<(), NetError> {
        let now = self.clock.now();
        let link = self
            .links
            .get_mut(to as usize)
            .and_then(Option::as_mut)
            .ok_or(NetError::NoLink(to))?;
        let release = link.shaper.schedule(now, bytes.len());
        link.out
            .as_ref()
            .ok_or(NetError::Disconnected(to))?
            .send(Outgoing {
                bytes,
                release_at: self.epoch + release,
            })
            .map_err(|_| NetError::Disconnected(to))
    }

    fn recv(&mut self, from: PeerId) -> Result<Vec<u8>, NetError> {
        let link = self
            .links
            .get(from as usize)
            .and_then(Option::as_ref)
            .ok_or(NetError::NoLink(from))?;
        match link.inbox.recv() {
            Ok(res) => res,
            Err(_) => Err(NetError::Disconnected(from)),
        }
    }

    fn elapsed(&mut self) -> Duration {
        self.clock.window()
    }

    fn restart_clock(&mut self) {
        self.clock.restart();
    }

    fn label(&self) -> &'static str {
        "tcp"
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        for link in self.links.iter_mut().flatten() {
            // flush queued frames before tearing the socket down
            drop(link.out.take());
            if let Some(h) = link.writer.take() {
                let _ = h.join();
            }
            let _ = link.stream.shutdown(Shutdown::Both);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(mac_a: Option<MacKey>, mac_b: Option<MacKey>) -> (TcpTransport, TcpTransport) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let dialer = thread::spawn(move || dial(addr, 1, 7, Duration::from_secs(5)).unwrap());
        let (mut accepted, _) = listener.accept().unwrap();
        let hello = read_frame_bytes(&mut accepted).unwrap();
        let hello = Frame::decode(&hello, crate::field::DEFAULT_PRIME).unwrap();
        assert_eq!((hello.sender, hello.kind, hello.session), (1, MessageKind::Hello, 7));
        let a = TcpTransport::new(1, vec![(2, dialer.join().unwrap())], None, mac_a).unwrap();
        let b = TcpTransport::new(2, vec![(1, accepted)], None, mac_b).unwrap();
        (a, b)
    }

    #[test]
    fn roundtrip_over_loopback() {
        let (mut a, mut b) = pair(None, None);
        let f = Frame {
            session: 7,
            round: 1,
            sender: 1,
            kind: MessageKind::Open,
            payload: vec![crate::field::FieldElement::new(5, crate::field::DEFAULT_PRIME)],
        };
        a.send(2, f.encode()).unwrap();
        b.send(1, f.encode()).unwrap();
        assert_eq!(b.recv(1).unwrap(), f.encode());
        assert_eq!(a.recv(2).unwrap(), f.encode());
    }

    #[test]
    fn authenticated_link() {
        let key = MacKey::new(b"shared".to_vec());
        let (mut a, mut b) = pair(Some(key.clone()), Some(key));
        let frame = Frame {
            session: 7,
            round: 3,
            sender: 1,
            kind: MessageKind::Multiply,
            payload: vec![],
        }
        .encode();
        for _ in 0..3 {
            a.send(2, frame.clone()).unwrap();
            assert_eq!(b.recv(1).unwrap(), frame);
        }
    }

    #[test]
    fn wrong_key_is_rejected() {
        let (mut a, mut b) = pair(Some(MacKey::new(b"one".to_vec())), Some(MacKey::new(b"two".to_vec())));
        let frame = Frame {
            session: 7,
            round: 1,
            sender: 1,
            kind: MessageKind::Open,
            payload: vec![],
        }
        .encode();
        a.send(2, frame).unwrap();
        assert!(matches!(b.recv(1), Err(NetError::BadMac(1))));
    }

    #[test]
    fn three_peer_mesh() {
        let listeners: Vec<TcpListener> = (0..3).map(|_| TcpListener::bind("127.0.0.1:0").unwrap()).collect();
        let addrs: Vec<(PeerId, SocketAddr)> = listeners
            .iter()
            .enumerate()
            .map(|(i, l)| (i as PeerId + 1, l.local_addr().unwrap()))
            .collect();
        let handles: Vec<_> = listeners
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let addrs = addrs.clone();
                thread::spawn(move || {
                    let me = i as PeerId + 1;
                    let others: Vec<_> = addrs.into_iter().filter(|(p, _)| *p != me).collect();
                    let mut t = connect_mesh(me, &l, &others, 9, Duration::from_secs(5), None, None).unwrap();
                    let frame = Frame { session: 9, round: 1, sender: me, kind: MessageKind::Open, payload: vec![] };
                    for &(p, _) in &others {
                        t.send(p, frame.encode()).unwrap();
                    }
                    let mut got: Vec<u8> = others
                        .iter()
                        .map(|&(p, _)| Frame::decode(&t.recv(p).unwrap(), crate::field::DEFAULT_PRIME).unwrap().sender)
                        .collect();
                    got.sort();
                    got
                })
            })
            .collect();
        let results: Vec<Vec<u8>> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert_eq!(results, vec![vec![2, 3], vec![1, 3], vec![1, 2]]);
    }
}
