//! Socket skill server.
//!
//! One thread accepts connections and spawns a handler per client; a
//! separate thread executes the chart engine, stepping every active episode
//! at a fixed cadence. `status` requests answer from the chart's current
//! state. Unknown skills produce an error response and the connection stays
//! open.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use crate::engine::SkillEngine;
use crate::wire::{decode, encode, Op, SkillMessage, WireError};

pub struct SkillServer {
    engine: Arc<Mutex<SkillEngine>>,
    shutdown: Arc<AtomicBool>,
    addr: std::net::SocketAddr,
    threads: Vec<thread::JoinHandle<()>>,
}

impl SkillServer {
    /// Binds and starts serving in the background. `endpoint` may use port 0
    /// to pick a free port; the bound address is available via `addr()`.
    pub fn start(endpoint: &str, engine: SkillEngine) -> std::io::Result<SkillServer> {
        let listener = TcpListener::bind(endpoint)?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let engine = Arc::new(Mutex::new(engine));
        let shutdown = Arc::new(AtomicBool::new(false));
        let mut threads = Vec::new();

        let stepper_engine = Arc::clone(&engine);
        let stepper_shutdown = Arc::clone(&shutdown);
        threads.push(thread::spawn(move || {
            while !stepper_shutdown.load(Ordering::Acquire) {
                stepper_engine.lock().unwrap().step_all();
                thread::sleep(Duration::from_millis(2));
            }
        }));

        let accept_engine = Arc::clone(&engine);
        let accept_shutdown = Arc::clone(&shutdown);
        threads.push(thread::spawn(move || {
            let next_client = AtomicU64::new(1);
            while !accept_shutdown.load(Ordering::Acquire) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let client = next_client.fetch_add(1, Ordering::Relaxed);
                        let engine = Arc::clone(&accept_engine);
                        let shutdown = Arc::clone(&accept_shutdown);
                        // handlers watch the shutdown flag themselves
                        thread::spawn(move || {
                            let _ = serve_connection(stream, client, engine, shutdown);
                        });
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        thread::sleep(Duration::from_millis(2));
                    }
                    Err(_) => break,
                }
            }
        }));

        Ok(SkillServer {
            engine,
            shutdown,
            addr,
            threads,
        })
    }

    pub fn addr(&self) -> std::net::SocketAddr {
        self.addr
    }

    pub fn engine(&self) -> Arc<Mutex<SkillEngine>> {
        Arc::clone(&self.engine)
    }

    /// Stops the stepper and accept loops; live connections close when their
    /// clients disconnect.
    pub fn stop(mut self) {
        self.shutdown.store(true, Ordering::Release);
        for h in self.threads.drain(..) {
            let _ = h.join();
        }
    }

    /// Blocks the calling thread while the server runs (CLI foreground use).
    pub fn join(mut self) {
        for h in self.threads.drain(..) {
            let _ = h.join();
        }
    }
}

fn serve_connection(
    stream: TcpStream,
    client: u64,
    engine: Arc<Mutex<SkillEngine>>,
    shutdown: Arc<AtomicBool>,
) -> Result<(), WireError> {
    stream.set_nodelay(true).ok();
    stream.set_read_timeout(Some(Duration::from_millis(100)))?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    while !shutdown.load(Ordering::Acquire) {
        match reader.read_line(&mut line) {
            Ok(0) => break, // client closed
            Ok(_) => {
                if !line.ends_with('\n') {
                    continue; // partial line, keep reading
                }
                if !line.trim().is_empty() {
                    let response = match decode(&line) {
                        Ok(msg) => engine.lock().unwrap().handle(client, &msg, false),
                        Err(err) => SkillMessage {
                            id: 0,
                            op: Op::Error,
                            skill: String::new(),
                            args: Default::default(),
                            payload: err.to_string(),
                        },
                    };
                    writer.write_all(encode(&response).as_bytes())?;
                }
                line.clear();
            }
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                continue;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
