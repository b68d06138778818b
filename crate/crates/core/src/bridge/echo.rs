//! In-process loopback server speaking the bridge protocol.
//!
//! Denoise requests return `x_t` itself, encode/decode are the identity,
//! and echo returns its payload. Used for protocol conformance tests and to
//! drive the bridge code path without model weights.

use std::io::BufReader;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::protocol::{read_message, write_message, Hello, Message};
use crate::error::Error;

pub struct EchoServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl EchoServer {
    /// Binds an ephemeral localhost port and starts accepting connections.
    pub fn spawn(hello: Hello) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                if let Ok(stream) = conn {
                    std::thread::spawn(move || serve(stream, hello));
                }
            }
        });
        Ok(Self { addr, stop, handle: Some(handle) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for EchoServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, hello: Hello) {
    let _ = stream.set_nodelay(true);
    let mut writer = match stream.try_clone() {
        Ok(w) => w,
        Err(_) => return,
    };
    let mut reader = BufReader::new(stream);
    if write_message(&mut writer, &Message::Hello(hello)).is_err() {
        return;
    }
    loop {
        let reply = match read_message(&mut reader) {
            Ok(Message::Echo(g)) => Message::Echo(g),
            Ok(Message::DenoiseRequest { t, x_t, .. }) => {
                if x_t.shape() != hello.shape {
                    Message::Error(format!("grid {} does not match {}", x_t.shape(), hello.shape))
                } else if t == 0 || t > hello.steps {
                    Message::Error(format!("step {t} outside 1..={}", hello.steps))
                } else {
                    Message::DenoiseResponse(vec![x_t])
                }
            }
            Ok(Message::EncodeRequest(g)) => Message::EncodeResponse(g),
            Ok(Message::DecodeRequest(g)) => Message::DecodeResponse(g),
            Ok(other) => Message::Error(format!("unexpected message type 0x{:02x}", other.kind())),
            Err(Error::Transport(_)) => return,
            Err(e) => {
                let _ = write_message(&mut writer, &Message::Error(e.to_string()));
                return;
            }
        };
        if write_message(&mut writer, &reply).is_err() {
            return;
        }
    }
}
