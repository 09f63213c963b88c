//! Simulation of the joint chain (X_t, xi_t) on a lazily materialized lattice.
//!
//! Sites never seen are fresh uniform spins: `Q0` is doubly stochastic, so a
//! site the walker has not touched keeps the uniform marginal independently of
//! everything else. Each stored site remembers the time at which its value is
//! current; the lazy engine brings a site up to date only when the walker
//! reads it, drawing one flip with probability `(1 - mu^dt) / 2` for the
//! elapsed `dt` steps of `Q0`. The eager [`step`] updates every stored site
//! at every step in canonical site order.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Model, Site};
use crate::rng::{stream, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct SiteRecord {
    value: i8,
    /// Time index at which `value` is the current spin.
    updated: u64,
}

/// Materialized part of the environment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnvState {
    sites: BTreeMap<Site, SiteRecord>,
    mirrored: bool,
}

impl EnvState {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn is_materialized(&self, site: &Site) -> bool {
        self.sites.contains_key(site)
    }

    /// Stored value of a site (its current time may lag behind under the lazy engine).
    pub fn stored(&self, site: &Site) -> Option<i8> {
        self.sites.get(site).map(|r| r.value)
    }

    /// Fresh uniform draws are negated: a coupling device for sign-flip symmetry.
    pub fn set_mirrored(&mut self, mirrored: bool) {
        self.mirrored = mirrored;
    }

    fn fresh(&self, rng: &mut StreamRng) -> i8 {
        let v = if rng.gen::<f64>() < 0.5 { 1 } else { -1 };
        if self.mirrored {
            -v
        } else {
            v
        }
    }

    /// Value of `site` at time `now`, materializing or catching up as needed.
    fn read(
        &mut self,
        site: Site,
        now: u64,
        model: &Model,
        forget_horizon: Option<u64>,
        rng: &mut StreamRng,
    ) -> i8 {
        match self.sites.get(&site).copied() {
            None => {
                let value = self.fresh(rng);
                self.sites.insert(site, SiteRecord { value, updated: now });
                value
            }
            Some(rec) if rec.updated == now => rec.value,
            Some(rec) => {
                let dt = now - rec.updated;
                let value = if forget_horizon.is_some_and(|tau| dt >= tau) {
                    self.fresh(rng)
                } else if rng.gen::<f64>() < model.q0().flip_probability(dt) {
                    -rec.value
                } else {
                    rec.value
                };
                self.sites.insert(site, SiteRecord { value, updated: now });
                value
            }
        }
    }

    fn forget_older_than(&mut self, now: u64, tau: u64) {
        self.sites.retain(|_, r| now - r.updated < tau);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkerState {
    pub position: Site,
    pub time: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialLaw {
    /// Product of uniform spins; nothing is materialized up front.
    ProductUniform,
    /// A finite window of given spins; everything else uniform.
    GivenWindow(BTreeMap<Site, i64>),
}

/// Initial environment and walker (at the origin, time 0).
pub fn init(initial: &InitialLaw) -> Result<(EnvState, WalkerState)> {
    let mut env = EnvState::default();
    if let InitialLaw::GivenWindow(window) = initial {
        for (site, &v) in window {
            let value = crate::model::spin(v)
                .map_err(|_| Error::Malformed(format!("window value {v} at {site:?} is not a spin")))?;
            env.sites.insert(*site, SiteRecord { value, updated: 0 });
        }
    }
    Ok((env, WalkerState { position: Site::ORIGIN, time: 0 }))
}

fn sample_jump(model: &Model, s: i8, rng: &mut StreamRng) -> Site {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let offsets = model.offsets();
    for (i, off) in offsets.iter().enumerate() {
        acc += model.jump_prob(i, s);
        if u < acc {
            return *off;
        }
    }
    // Round-off: fall back to the last offset with positive probability.
    offsets
        .iter()
        .enumerate()
        .rev()
        .find(|(i, _)| model.jump_prob(*i, s) > 0.0)
        .map(|(_, o)| *o)
        .unwrap_or(Site::ORIGIN)
}

/// One eager step: read the spin under the walker, sample the jump, update
/// every materialized site (walker site by `Q1`, others by `Q0`) in canonical
/// order, then move the walker. Returns the spin that was read.
pub fn step(model: &Model, env: &mut EnvState, walker: &mut WalkerState, rng: &mut StreamRng) -> i8 {
    let now = walker.time;
    let s = env.read(walker.position, now, model, None, rng);
    let u = sample_jump(model, s, rng);
    let (flip0, flip1) = (model.q0().flip_probability(1), model.q1().flip_probability(1));
    for (site, rec) in env.sites.iter_mut() {
        debug_assert_eq!(rec.updated, now, "eager step on a lazily updated environment");
        let p = if *site == walker.position { flip1 } else { flip0 };
        if rng.gen::<f64>() < p {
            rec.value = -rec.value;
        }
        rec.updated = now + 1;
    }
    walker.position = walker.position.add(u);
    walker.time = now + 1;
    s
}

fn lazy_step(
    model: &Model,
    env: &mut EnvState,
    walker: &mut WalkerState,
    forget_horizon: Option<u64>,
    rng: &mut StreamRng,
) -> i8 {
    let now = walker.time;
    let s = env.read(walker.position, now, model, forget_horizon, rng);
    let u = sample_jump(model, s, rng);
    let value = if rng.gen::<f64>() < model.q1().flip_probability(1) { -s } else { s };
    env.sites.insert(walker.position, SiteRecord { value, updated: now + 1 });
    walker.position = walker.position.add(u);
    walker.time = now + 1;
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub enum Engine {
    /// Catch sites up on access. Same law as `Eager`, cost independent of the
    /// number of materialized sites.
    #[default]
    Lazy,
    /// Update every materialized site at every step.
    Eager,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions {
    pub engine: Engine,
    /// Drop sites untouched for this many steps (bias per site at most |mu|^tau).
    pub forget_horizon: Option<u64>,
    /// Steps discarded before recording starts.
    pub burn_in: u64,
    pub initial: InitialLaw,
    /// Negate fresh uniform draws (coupling for sign-flip symmetry checks).
    pub mirrored: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            engine: Engine::Lazy,
            forget_horizon: None,
            burn_in: 0,
            initial: InitialLaw::ProductUniform,
            mirrored: false,
        }
    }
}

/// Smallest horizon with `|mu|^tau < tolerance`.
pub fn horizon_for_tolerance(mu: f64, tolerance: f64) -> u64 {
    if mu == 0.0 {
        return 1;
    }
    (tolerance.ln() / mu.abs().ln()).ceil().max(1.0) as u64
}

/// A single running chain.
pub struct Simulator<'m> {
    model: &'m Model,
    env: EnvState,
    walker: WalkerState,
    origin: Site,
    opts: SimOptions,
    rng: StreamRng,
}

impl<'m> Simulator<'m> {
    pub fn new(model: &'m Model, seed: u64, replica: u64, opts: SimOptions) -> Result<Simulator<'m>> {
        let (mut env, walker) = init(&opts.initial)?;
        env.set_mirrored(opts.mirrored);
        let mut sim = Simulator { model, env, walker, origin: Site::ORIGIN, opts, rng: stream(seed, replica) };
        for _ in 0..sim.opts.burn_in {
            sim.advance();
        }
        sim.origin = sim.walker.position;
        Ok(sim)
    }

    /// Returns zeta_t (the spin under the walker) and moves to t + 1.
    pub fn advance(&mut self) -> i8 {
        let s = match self.opts.engine {
            Engine::Lazy => lazy_step(self.model, &mut self.env, &mut self.walker, self.opts.forget_horizon, &mut self.rng),
            Engine::Eager => step(self.model, &mut self.env, &mut self.walker, &mut self.rng),
        };
        if let Some(tau) = self.opts.forget_horizon {
            if self.walker.time % tau == 0 {
                self.env.forget_older_than(self.walker.time, tau);
            }
        }
        s
    }

    /// Reads zeta_t without moving.
    pub fn peek(&mut self) -> i8 {
        let (pos, now) = (self.walker.position, self.walker.time);
        self.env.read(pos, now, self.model, self.opts.forget_horizon, &mut self.rng)
    }

    /// Displacement since recording started.
    pub fn position(&self) -> Site {
        self.walker.position.add(self.origin.neg())
    }

    pub fn env(&self) -> &EnvState {
        &self.env
    }

    /// zeta_0 .. zeta_{n-1}.
    pub fn zeta_sequence(&mut self, n: usize) -> Vec<i8> {
        (0..n).map(|_| self.advance()).collect()
    }
}

/// Recorded path: `zeta[t] = eta_t(0)` and `displacement[t] = X_t` for t = 0..=n.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub zeta: Vec<i8>,
    pub displacement: Vec<Site>,
    pub seed: u64,
    pub replica: u64,
    pub forget_horizon: Option<u64>,
    pub dim: usize,
    pub params_hash: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryMeta {
    pub seed: u64,
    pub params_hash: String,
    pub n: usize,
    pub tau: Option<u64>,
}

/// Runs `n` steps and records every time 0..=n.
pub fn run(model: &Model, n: usize, seed: u64, replica: u64, opts: SimOptions) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::Precondition("trajectory length must be >= 1".into()));
    }
    let forget_horizon = opts.forget_horizon;
    let mut sim = Simulator::new(model, seed, replica, opts)?;
    let mut zeta = Vec::with_capacity(n + 1);
    let mut displacement = Vec::with_capacity(n + 1);
    for _ in 0..n {
        displacement.push(sim.position());
        zeta.push(sim.advance());
    }
    displacement.push(sim.position());
    zeta.push(sim.peek());
    Ok(Trajectory {
        zeta,
        displacement,
        seed,
        replica,
        forget_horizon,
        dim: model.dim(),
        params_hash: model.params().hash(),
    })
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.zeta.len() - 1
    }

    /// CSV with header `t,zeta,x_1,..,x_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = String::from("t,zeta");
        for i in 1..=self.dim {
            header.push_str(&format!(",x_{i}"));
        }
        writeln!(w, "{header}")?;
        for (t, (z, x)) in self.zeta.iter().zip(&self.displacement).enumerate() {
            write!(w, "{t},{z}")?;
            for c in x.coords(self.dim) {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn meta(&self) -> TrajectoryMeta {
        TrajectoryMeta {
            seed: self.seed,
            params_hash: self.params_hash.clone(),
            n: self.steps(),
            tau: self.forget_horizon,
        }
    }
}
