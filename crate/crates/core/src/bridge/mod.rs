//! Client side of the model bridge: a TCP connection speaking the framing in
//! [`protocol`], and a [`Denoiser`] backed by it.

pub mod echo;
pub mod protocol;

use std::net::{TcpStream, ToSocketAddrs};

use crate::denoiser::{Denoiser, DenoiserRequest, NoisePrediction};
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Shape};
use crate::scalar::Scalar;
use protocol::{read_message, write_message, Hello, Message, PROTOCOL_VERSION};

pub use echo::EchoServer;

/// One connection to a bridge server. Serves one request at a time.
#[derive(Debug)]
pub struct BridgeClient {
    stream: TcpStream,
    hello: Hello,
}

impl BridgeClient {
    /// Connects and waits for the server's hello.
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let mut stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let hello = match read_message(&mut stream)? {
            Message::Hello(h) => h,
            Message::Error(text) => return Err(Error::Remote(text)),
            other => {
                return Err(Error::Protocol(format!("expected hello, got message type 0x{:02x}", other.kind())))
            }
        };
        if hello.version != PROTOCOL_VERSION {
            return Err(Error::Protocol(format!(
                "server speaks protocol {}, client speaks {PROTOCOL_VERSION}",
                hello.version
            )));
        }
        Ok(Self { stream, hello })
    }

    pub fn hello(&self) -> &Hello {
        &self.hello
    }

    fn call(&mut self, request: &Message) -> Result<Message> {
        write_message(&mut self.stream, request)?;
        match read_message(&mut self.stream)? {
            Message::Error(text) => Err(Error::Remote(text)),
            reply => Ok(reply),
        }
    }

    fn check_shape(&self, grid: &ImageGrid<f32>) -> Result<()> {
        if grid.shape() != self.hello.shape {
            return Err(Error::Protocol(format!(
                "grid {} does not match declared shape {}",
                grid.shape(),
                self.hello.shape
            )));
        }
        Ok(())
    }

    /// Loopback request; the server returns the payload unchanged.
    pub fn echo(&mut self, grid: &ImageGrid<f32>) -> Result<ImageGrid<f32>> {
        match self.call(&Message::Echo(grid.clone()))? {
            Message::Echo(g) => Ok(g),
            other => Err(unexpected("echo", &other)),
        }
    }

    pub fn denoise(
        &mut self,
        x_t: &ImageGrid<f32>,
        t: usize,
        condition: Option<&crate::denoiser::Condition>,
        guidance_scale: Option<f32>,
    ) -> Result<NoisePrediction<f32>> {
        self.check_shape(x_t)?;
        if t == 0 || t > self.hello.steps as usize {
            return Err(Error::Protocol(format!("step {t} outside the declared 1..={}", self.hello.steps)));
        }
        let request = Message::DenoiseRequest {
            t: t as u32,
            guidance_scale,
            condition: condition.cloned(),
            x_t: x_t.clone(),
        };
        match self.call(&request)? {
            Message::DenoiseResponse(mut grids) => {
                for g in &grids {
                    self.check_shape(g)?;
                }
                Ok(match grids.len() {
                    1 => NoisePrediction::Single(grids.pop().unwrap()),
                    _ => {
                        let cond = grids.pop().unwrap();
                        NoisePrediction::Pair { uncond: grids.pop().unwrap(), cond }
                    }
                })
            }
            other => Err(unexpected("denoise", &other)),
        }
    }

    /// Pixel grid to latent grid.
    pub fn encode(&mut self, pixels: &ImageGrid<f32>) -> Result<ImageGrid<f32>> {
        match self.call(&Message::EncodeRequest(pixels.clone()))? {
            Message::EncodeResponse(g) => {
                self.check_shape(&g)?;
                Ok(g)
            }
            other => Err(unexpected("encode", &other)),
        }
    }

    /// Latent grid to pixel grid.
    pub fn decode(&mut self, latent: &ImageGrid<f32>) -> Result<ImageGrid<f32>> {
        self.check_shape(latent)?;
        match self.call(&Message::DecodeRequest(latent.clone()))? {
            Message::DecodeResponse(g) => Ok(g),
            other => Err(unexpected("decode", &other)),
        }
    }
}

fn unexpected(what: &str, reply: &Message) -> Error {
    Error::Protocol(format!("unexpected reply type 0x{:02x} to {what} request", reply.kind()))
}

/// Bridge-backed denoiser. Grids cross the wire as `f32`.
#[derive(Debug)]
pub struct BridgeDenoiser {
    client: BridgeClient,
}

impl BridgeDenoiser {
    pub fn new(client: BridgeClient) -> Self {
        Self { client }
    }

    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        Ok(Self::new(BridgeClient::connect(addr)?))
    }

    pub fn client_mut(&mut self) -> &mut BridgeClient {
        &mut self.client
    }
}

impl<S: Scalar> Denoiser<S> for BridgeDenoiser {
    fn grid_shape(&self) -> Shape {
        self.client.hello.shape
    }

    fn declared_steps(&self) -> Option<usize> {
        Some(self.client.hello.steps as usize)
    }

    fn predict(&mut self, request: &DenoiserRequest<'_, S>) -> Result<NoisePrediction<S>> {
        let x = request.x_t.cast::<f32>();
        let scale = request.remote_guidance.map(|g| g.as_f64() as f32);
        Ok(match self.client.denoise(&x, request.t, request.condition, scale)? {
            NoisePrediction::Single(e) => NoisePrediction::Single(e.cast()),
            NoisePrediction::Pair { uncond, cond } => NoisePrediction::Pair { uncond: uncond.cast(), cond: cond.cast() },
        })
    }
}
