//! WebSocket transport over tokio. One task drives the simulation clock and
//! one task per connection moves frames between the socket and its outbox.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use behavior_forge::sim::DT;
use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::Notify;
use tokio_tungstenite::tungstenite::Message as WsMessage;

use crate::outbox::Outbox;
use crate::server::{ClientId, Message, ServerCore, Target};

pub const DEFAULT_PORT: u16 = 8765;
/// Environment variable overriding the listening port.
pub const PORT_ENV: &str = "BEHAVIOR_FORGE_PORT";
const OUTBOX_CAPACITY: usize = 256;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub addr: SocketAddr,
    /// Simulated seconds per wall-clock second.
    pub realtime_factor: f64,
    pub outbox_capacity: usize,
}

impl ServeOptions {
    /// Listens on all interfaces, port from `BEHAVIOR_FORGE_PORT` or 8765.
    pub fn from_env() -> Self {
        let port = std::env::var(PORT_ENV)
            .ok()
            .and_then(|p| p.parse().ok())
            .unwrap_or(DEFAULT_PORT);
        Self::on_port(port)
    }

    pub fn on_port(port: u16) -> Self {
        Self {
            addr: SocketAddr::from(([0, 0, 0, 0], port)),
            realtime_factor: 1.0,
            outbox_capacity: OUTBOX_CAPACITY,
        }
    }
}

struct Client {
    outbox: Outbox,
    notify: Arc<Notify>,
}

struct Shared {
    core: ServerCore,
    clients: HashMap<ClientId, Client>,
}

impl Shared {
    fn route(&mut self, target: Target, msg: Message) {
        let deliver = |c: &mut Client| {
            c.outbox.push(msg.kind, msg.timestamp, msg.payload.clone());
            c.notify.notify_one();
        };
        match target {
            Target::Client(id) => {
                if let Some(c) = self.clients.get_mut(&id) {
                    deliver(c);
                }
            }
            Target::All => self.clients.values_mut().for_each(deliver),
        }
    }
}

#[derive(Clone)]
struct Handle(Arc<Mutex<Shared>>);

impl Handle {
    fn lock(&self) -> MutexGuard<'_, Shared> {
        // A panicking connection task must not take the server down with it.
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }
}

pub struct Server {
    listener: TcpListener,
    handle: Handle,
    options: ServeOptions,
}

impl Server {
    pub async fn bind(core: ServerCore, options: ServeOptions) -> std::io::Result<Self> {
        let listener = TcpListener::bind(options.addr).await?;
        let handle = Handle(Arc::new(Mutex::new(Shared {
            core,
            clients: HashMap::new(),
        })));
        Ok(Self {
            listener,
            handle,
            options,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until the listener fails.
    pub async fn run(self) -> std::io::Result<()> {
        let factor = if self.options.realtime_factor > 0.0 {
            self.options.realtime_factor
        } else {
            1.0
        };
        let ticker = self.handle.clone();
        let clock = tokio::spawn(async move {
            let mut interval = tokio::time::interval(Duration::from_secs_f64(DT / factor));
            interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Burst);
            loop {
                interval.tick().await;
                let mut shared = ticker.lock();
                for msg in shared.core.tick() {
                    shared.route(Target::All, msg);
                }
            }
        });
        let result = loop {
            let (stream, peer) = match self.listener.accept().await {
                Ok(conn) => conn,
                Err(e) => break Err(e),
            };
            let handle = self.handle.clone();
            let capacity = self.options.outbox_capacity;
            tokio::spawn(async move {
                if let Err(e) = connection(handle, stream, capacity).await {
                    log::debug!("connection {peer} closed: {e}");
                }
            });
        };
        clock.abort();
        result
    }
}

async fn connection(
    handle: Handle,
    stream: TcpStream,
    capacity: usize,
) -> Result<(), tokio_tungstenite::tungstenite::Error> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut sink, mut source) = ws.split();
    let notify = Arc::new(Notify::new());
    let id = {
        let mut shared = handle.lock();
        let (id, hello) = shared.core.connect();
        let mut outbox = Outbox::new(capacity);
        outbox.push(hello.kind, hello.timestamp, hello.payload);
        shared.clients.insert(
            id,
            Client {
                outbox,
                notify: notify.clone(),
            },
        );
        notify.notify_one();
        id
    };

    let result = async {
        loop {
            tokio::select! {
                inbound = source.next() => match inbound {
                    Some(Ok(WsMessage::Text(text))) => {
                        let mut shared = handle.lock();
                        for (target, msg) in shared.core.handle_text(id, text.as_str()) {
                            shared.route(target, msg);
                        }
                    }
                    Some(Ok(WsMessage::Binary(bytes))) => {
                        let text = String::from_utf8_lossy(&bytes);
                        let mut shared = handle.lock();
                        for (target, msg) in shared.core.handle_text(id, &text) {
                            shared.route(target, msg);
                        }
                    }
                    Some(Ok(WsMessage::Close(_))) | None => break Ok(()),
                    Some(Ok(_)) => {}
                    Some(Err(e)) => break Err(e),
                },
                _ = notify.notified() => {
                    let frames: Vec<String> = {
                        let mut shared = handle.lock();
                        match shared.clients.get_mut(&id) {
                            Some(c) => c.outbox.drain().iter().map(|e| e.frame()).collect(),
                            None => Vec::new(),
                        }
                    };
                    for frame in frames {
                        sink.send(WsMessage::text(frame)).await?;
                    }
                }
            }
        }
    }
    .await;

    let mut shared = handle.lock();
    shared.clients.remove(&id);
    shared.core.disconnect(id);
    result
}

/// Binds and serves forever.
pub async fn serve(core: ServerCore, options: ServeOptions) -> std::io::Result<()> {
    let server = Server::bind(core, options).await?;
    log::info!("listening on ws://{}", server.local_addr()?);
    server.run().await
}
