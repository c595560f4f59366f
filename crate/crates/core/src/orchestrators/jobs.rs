//! Deferred computations for the coordinator.
//!
//! In lockstep mode a job runs as soon as it is submitted, so results are
//! available in submission order and the run stays deterministic. In
//! threaded mode jobs run on the rayon pool and results are picked up
//! whenever the coordinator next drains the queue; nothing waits for them
//! except [`Jobs::wait_all`].

use std::sync::mpsc::{channel, Receiver, Sender};

pub(crate) enum Jobs<T> {
    Inline(Vec<T>),
    Background {
        tx: Sender<T>,
        rx: Receiver<T>,
        in_flight: usize,
    },
}

impl<T: Send + 'static> Jobs<T> {
    pub(crate) fn new(background: bool) -> Self {
        if background {
            let (tx, rx) = channel();
            Jobs::Background {
                tx,
                rx,
                in_flight: 0,
            }
        } else {
            Jobs::Inline(Vec::new())
        }
    }

    pub(crate) fn submit<F>(&mut self, job: F)
    where
        F: FnOnce() -> T + Send + 'static,
    {
        match self {
            Jobs::Inline(done) => done.push(job()),
            Jobs::Background { tx, in_flight, .. } => {
                let tx = tx.clone();
                *in_flight += 1;
                rayon::spawn(move || {
                    // The receiver only goes away when the run is dropped,
                    // in which case nobody wants the result.
                    let _ = tx.send(job());
                });
            }
        }
    }

    /// Results that are ready now, without blocking.
    pub(crate) fn drain(&mut self) -> Vec<T> {
        match self {
            Jobs::Inline(done) => std::mem::take(done),
            Jobs::Background { rx, in_flight, .. } => {
                let mut out = Vec::new();
                while let Ok(result) = rx.try_recv() {
                    *in_flight -= 1;
                    out.push(result);
                }
                out
            }
        }
    }

    /// Blocks until every submitted job has finished.
    pub(crate) fn wait_all(&mut self) -> Vec<T> {
        match self {
            Jobs::Inline(done) => std::mem::take(done),
            Jobs::Background { rx, in_flight, .. } => {
                let mut out = Vec::with_capacity(*in_flight);
                while *in_flight > 0 {
                    match rx.recv() {
                        Ok(result) => {
                            *in_flight -= 1;
                            out.push(result);
                        }
                        // Unreachable while `tx` is alive; kept so a
                        // logic error cannot turn into a hang.
                        Err(_) => break,
                    }
                }
                out
            }
        }
    }
}
