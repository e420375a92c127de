//! Request/response transports for the skill protocol.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::engine::{ClientId, SkillEngine};
use crate::wire::{decode, encode, SkillMessage, WireError};

/// One correlated exchange: send a request line, get the matching response.
pub trait SkillTransport: Send {
    fn request(
        &mut self,
        msg: &SkillMessage,
        timeout: Duration,
    ) -> Result<SkillMessage, WireError>;
}

/// TCP transport; connects lazily on first use and drops the stream on any
/// error so the next request reconnects from scratch.
pub struct TcpTransport {
    addr: String,
    conn: Option<(TcpStream, BufReader<TcpStream>)>,
}

impl TcpTransport {
    pub fn new(addr: impl Into<String>) -> TcpTransport {
        TcpTransport {
            addr: addr.into(),
            conn: None,
        }
    }

    fn connect(&mut self) -> Result<&mut (TcpStream, BufReader<TcpStream>), WireError> {
        if self.conn.is_none() {
            let stream = TcpStream::connect(&self.addr)?;
            stream.set_nodelay(true).ok();
            let reader = BufReader::new(stream.try_clone()?);
            self.conn = Some((stream, reader));
        }
        Ok(self.conn.as_mut().unwrap())
    }
}

impl SkillTransport for TcpTransport {
    fn request(
        &mut self,
        msg: &SkillMessage,
        timeout: Duration,
    ) -> Result<SkillMessage, WireError> {
        let result = (|| {
            let (stream, reader) = self.connect()?;
            stream.set_read_timeout(Some(timeout))?;
            stream.write_all(encode(msg).as_bytes())?;
            let mut line = String::new();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                return Err(WireError::Closed);
            }
            let response = decode(&line)?;
            if response.id != msg.id {
                return Err(WireError::Correlation {
                    want: msg.id,
                    got: response.id,
                });
            }
            Ok(response)
        })();
        if result.is_err() {
            self.conn = None;
        }
        result
    }
}

/// In-process transport: requests go straight to a shared engine, with the
/// bytes still passed through the wire codec so both paths stay honest.
/// `status` requests step the chart once, which makes runs deterministic.
pub struct InProcTransport {
    engine: Arc<Mutex<SkillEngine>>,
    client: ClientId,
}

impl InProcTransport {
    pub fn new(engine: Arc<Mutex<SkillEngine>>, client: ClientId) -> InProcTransport {
        InProcTransport { engine, client }
    }
}

impl SkillTransport for InProcTransport {
    fn request(
        &mut self,
        msg: &SkillMessage,
        _timeout: Duration,
    ) -> Result<SkillMessage, WireError> {
        let request = decode(&encode(msg))?;
        let response = self
            .engine
            .lock()
            .unwrap()
            .handle(self.client, &request, true);
        decode(&encode(&response))
    }
}
