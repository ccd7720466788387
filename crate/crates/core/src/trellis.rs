//! Binary convolutional component codes: specification, trellis realisation,
//! encoding and free-distance search.
//!
//! Generator and feedback polynomials are given in octal with the coefficient
//! of `D^0` in the least significant bit, so `"7"` is `1 + D + D^2` and
//! `"23"` is `1 + D + D^4`.
//!
//! Feed-forward codes and single-input recursive codes use the controller
//! canonical form: one shift register per input holding the register input
//! sequence `w_i(t-1), ..., w_i(t-nu_i)` with the newest bit most significant.
//! Multi-input recursive systematic codes of rate k/(k+1) with a common
//! feedback polynomial use the observer canonical form, which realises the
//! parity equation with a single register of `memory` cells.

use crate::error::{Error, Result};

/// How the encoder treats the end of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    /// Tail steps drive the encoder back to state zero.
    Terminated,
    /// The frame stops after the last information step.
    Truncated,
}

/// A binary convolutional code of rate `k_in / n_out`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvCodeSpec {
    pub k_in: usize,
    pub n_out: usize,
    /// Total number of memory cells (nu).
    pub memory: usize,
    /// `k_in` rows of `n_out` polynomials.
    pub generators: Vec<Vec<u32>>,
    /// One feedback polynomial per input, or empty for a feed-forward code.
    pub feedback: Vec<u32>,
    /// The first `k_in` outputs reproduce the inputs verbatim.
    pub systematic: bool,
    pub termination: Termination,
}

/// Parse an octal polynomial string such as `"23"`.
pub fn parse_octal(text: &str) -> Result<u32> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::Config("empty octal polynomial".into()));
    }
    u32::from_str_radix(t, 8).map_err(|_| Error::Config(format!("'{t}' is not an octal polynomial")))
}

fn degree(poly: u32) -> Option<usize> {
    (poly != 0).then(|| 31 - poly.leading_zeros() as usize)
}

#[inline]
fn coeff(poly: u32, d: usize) -> u32 {
    (poly >> d) & 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Realisation {
    Controller,
    Observer,
}

impl ConvCodeSpec {
    /// Validated constructor.
    pub fn new(
        k_in: usize,
        n_out: usize,
        memory: usize,
        generators: Vec<Vec<u32>>,
        feedback: Vec<u32>,
        systematic: bool,
        termination: Termination,
    ) -> Result<Self> {
        let spec = Self {
            k_in,
            n_out,
            memory,
            generators,
            feedback,
            systematic,
            termination,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Constructor from octal strings, one row of generators per input.
    pub fn from_octal(
        k_in: usize,
        n_out: usize,
        memory: usize,
        generators: &[&[&str]],
        feedback: &[&str],
        systematic: bool,
        termination: Termination,
    ) -> Result<Self> {
        let generators = generators
            .iter()
            .map(|row| row.iter().map(|g| parse_octal(g)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let feedback = feedback.iter().map(|f| parse_octal(f)).collect::<Result<Vec<_>>>()?;
        Self::new(k_in, n_out, memory, generators, feedback, systematic, termination)
    }

    /// The rate-1 memoryless identity code.
    pub fn identity() -> Self {
        Self {
            k_in: 1,
            n_out: 1,
            memory: 0,
            generators: vec![vec![1]],
            feedback: vec![],
            systematic: true,
            termination: Termination::Terminated,
        }
    }

    pub fn rate(&self) -> f64 {
        self.k_in as f64 / self.n_out as f64
    }

    pub fn is_recursive(&self) -> bool {
        !self.feedback.is_empty()
    }

    fn realisation(&self) -> Realisation {
        if self.k_in >= 2 && self.is_recursive() {
            Realisation::Observer
        } else {
            Realisation::Controller
        }
    }

    /// Register length of each input in controller form.
    fn input_memory(&self) -> Vec<usize> {
        if self.k_in == 1 {
            return vec![self.memory];
        }
        self.generators
            .iter()
            .map(|row| row.iter().filter_map(|&g| degree(g)).max().unwrap_or(0))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.k_in == 0 || self.k_in > self.n_out {
            return Err(Error::Config(format!(
                "need 1 <= k_in <= n_out, got k_in={} n_out={}",
                self.k_in, self.n_out
            )));
        }
        if self.k_in > 8 || self.n_out > 16 || self.memory > 16 {
            return Err(Error::Config("code dimensions too large for a trellis".into()));
        }
        if self.generators.len() != self.k_in || self.generators.iter().any(|r| r.len() != self.n_out) {
            return Err(Error::Config(format!(
                "generator matrix must be {} x {}",
                self.k_in, self.n_out
            )));
        }
        for (i, row) in self.generators.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                if degree(g).is_some_and(|d| d > self.memory) {
                    return Err(Error::Config(format!(
                        "generator ({i},{j}) = {g:o} has degree above memory {}",
                        self.memory
                    )));
                }
            }
        }
        if !self.feedback.is_empty() {
            if self.feedback.len() != self.k_in {
                return Err(Error::Config("need one feedback polynomial per input".into()));
            }
            for &f in &self.feedback {
                if f & 1 == 0 {
                    return Err(Error::Config(format!("feedback {f:o} must have a D^0 term")));
                }
                if degree(f).is_some_and(|d| d > self.memory) {
                    return Err(Error::Config(format!("feedback {f:o} has degree above memory")));
                }
            }
        }
        match self.realisation() {
            Realisation::Controller => {
                if self.k_in >= 2 {
                    let total: usize = self.input_memory().iter().sum();
                    if total != self.memory {
                        return Err(Error::Config(format!(
                            "per-input register lengths sum to {total}, memory is {}",
                            self.memory
                        )));
                    }
                }
            }
            Realisation::Observer => {
                let f = self.feedback[0];
                if self.feedback.iter().any(|&x| x != f) {
                    return Err(Error::Config(
                        "multi-input recursive codes need a common feedback polynomial".into(),
                    ));
                }
                if !self.systematic || self.n_out != self.k_in + 1 {
                    return Err(Error::Config(
                        "multi-input recursive codes must be systematic of rate k/(k+1)".into(),
                    ));
                }
                let needed = std::iter::once(f)
                    .chain(self.generators.iter().map(|r| r[self.k_in]))
                    .filter_map(degree)
                    .max()
                    .unwrap_or(0);
                if needed != self.memory {
                    return Err(Error::Config(format!(
                        "observer realisation needs memory {needed}, spec says {}",
                        self.memory
                    )));
                }
            }
        }
        if self.systematic {
            for i in 0..self.k_in {
                for j in 0..self.k_in {
                    let unit = if self.is_recursive() { self.feedback[i] } else { 1 };
                    let want = if i == j { unit } else { 0 };
                    if self.generators[i][j] != want {
                        return Err(Error::Config(format!(
                            "systematic flag set but output {j} does not copy input {j}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn build_trellis(&self) -> Result<Trellis> {
        build_trellis(self)
    }
}

/// Time-invariant trellis of a convolutional code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trellis {
    k_in: usize,
    n_out: usize,
    memory: usize,
    num_states: usize,
    next: Vec<u32>,
    output: Vec<u32>,
    tail_input: Vec<u32>,
    tail_steps: usize,
    systematic: bool,
}

/// Result of encoding one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword {
    pub bits: Vec<u8>,
    pub info_len: usize,
    pub coded_len: usize,
    pub final_state: usize,
}

/// Bounds for searches over error events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_len: usize,
    pub max_weight: u32,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self {
            max_len: 256,
            max_weight: 200,
        }
    }
}

/// Build the trellis of a validated code.
pub fn build_trellis(spec: &ConvCodeSpec) -> Result<Trellis> {
    spec.validate()?;
    let k = spec.k_in;
    let n = spec.n_out;
    let num_states = 1usize << spec.memory;
    let branches = 1usize << k;
    let mut next = vec![0u32; num_states * branches];
    let mut output = vec![0u32; num_states * branches];

    match spec.realisation() {
        Realisation::Controller => {
            let lens = spec.input_memory();
            // Bit offset of each input's register inside the state word; input 0 is most significant.
            let mut offsets = vec![0usize; k];
            let mut acc = 0;
            for i in (0..k).rev() {
                offsets[i] = acc;
                acc += lens[i];
            }
            for s in 0..num_states {
                for u in 0..branches {
                    let mut out = 0u32;
                    let mut ns = 0usize;
                    for i in 0..k {
                        let nu = lens[i];
                        let reg = (s >> offsets[i]) & ((1usize << nu) - 1);
                        // history[d] = w_i(t-d) for d >= 1
                        let hist = |d: usize| ((reg >> (nu - d)) & 1) as u32;
                        let ui = ((u >> (k - 1 - i)) & 1) as u32;
                        let mut w = ui;
                        if spec.is_recursive() {
                            let f = spec.feedback[i];
                            for d in 1..=nu {
                                w ^= coeff(f, d) & hist(d);
                            }
                        }
                        for j in 0..n {
                            let g = spec.generators[i][j];
                            let mut y = coeff(g, 0) & w;
                            for d in 1..=nu {
                                y ^= coeff(g, d) & hist(d);
                            }
                            out ^= y << (n - 1 - j);
                        }
                        if nu > 0 {
                            let new_reg = (reg >> 1) | ((w as usize) << (nu - 1));
                            ns |= new_reg << offsets[i];
                        }
                    }
                    next[s * branches + u] = ns as u32;
                    output[s * branches + u] = out;
                }
            }
        }
        Realisation::Observer => {
            let nu = spec.memory;
            let f = spec.feedback[0];
            // r_d is bit (nu - d) of the state word, so r_1 is most significant.
            for s in 0..num_states {
                let r = |d: usize| -> u32 {
                    if d == 0 || d > nu {
                        0
                    } else {
                        ((s >> (nu - d)) & 1) as u32
                    }
                };
                for u in 0..branches {
                    let ubit = |i: usize| ((u >> (k - 1 - i)) & 1) as u32;
                    let gu = |d: usize| -> u32 {
                        (0..k).fold(0, |a, i| a ^ (coeff(spec.generators[i][k], d) & ubit(i)))
                    };
                    let p = gu(0) ^ r(1);
                    let mut ns = 0usize;
                    for d in 1..=nu {
                        let v = r(d + 1) ^ gu(d) ^ (coeff(f, d) & p);
                        ns |= (v as usize) << (nu - d);
                    }
                    let mut out = 0u32;
                    for i in 0..k {
                        out |= ubit(i) << (n - 1 - i);
                    }
                    out |= p;
                    next[s * branches + u] = ns as u32;
                    output[s * branches + u] = out;
                }
            }
        }
    }

    if next[0] != 0 || output[0] != 0 {
        return Err(Error::Config("zero input from state zero must stay silent".into()));
    }
    let (tail_input, tail_steps) = termination_inputs(num_states, branches, &next)?;
    Ok(Trellis {
        k_in: k,
        n_out: n,
        memory: spec.memory,
        num_states,
        next,
        output,
        tail_input,
        tail_steps,
        systematic: spec.systematic,
    })
}

/// Per-state first input of a shortest path back to state zero.
fn termination_inputs(num_states: usize, branches: usize, next: &[u32]) -> Result<(Vec<u32>, usize)> {
    let mut dist = vec![usize::MAX; num_states];
    let mut tail = vec![0u32; num_states];
    dist[0] = 0;
    let mut round = 0;
    loop {
        let mut changed = false;
        for s in 0..num_states {
            if dist[s] != usize::MAX {
                continue;
            }
            for u in 0..branches {
                let ns = next[s * branches + u] as usize;
                if dist[ns] == round {
                    dist[s] = round + 1;
                    tail[s] = u as u32;
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            break;
        }
        round += 1;
    }
    if dist.iter().any(|&d| d == usize::MAX) {
        return Err(Error::Config("trellis has states that cannot return to zero".into()));
    }
    let steps = dist.iter().copied().max().unwrap_or(0);
    Ok((tail, steps))
}

impl Trellis {
    pub fn k_in(&self) -> usize {
        self.k_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_branches(&self) -> usize {
        1 << self.k_in
    }

    pub fn is_systematic(&self) -> bool {
        self.systematic
    }

    /// Number of steps needed to return to state zero from any state.
    pub fn tail_steps(&self) -> usize {
        self.tail_steps
    }

    #[inline]
    pub fn next_state(&self, state: usize, input: usize) -> usize {
        self.next[state * self.num_branches() + input] as usize
    }

    /// Output label; output `j` sits at bit `n_out - 1 - j`.
    #[inline]
    pub fn output(&self, state: usize, input: usize) -> u32 {
        self.output[state * self.num_branches() + input]
    }

    #[inline]
    pub fn tail_input(&self, state: usize) -> usize {
        self.tail_input[state] as usize
    }

    /// Trellis steps occupied by a frame of `info_steps` information steps.
    pub fn frame_steps(&self, info_steps: usize, termination: Termination) -> usize {
        match termination {
            Termination::Terminated => info_steps + self.tail_steps,
            Termination::Truncated => info_steps,
        }
    }

    /// Coded length in bits of a frame carrying `info_len` information bits.
    pub fn coded_len(&self, info_len: usize, termination: Termination) -> usize {
        self.frame_steps(info_len / self.k_in, termination) * self.n_out
    }

    /// The same code with its systematic outputs removed.
    pub fn parity_only(&self) -> Result<Trellis> {
        if !self.systematic {
            return Err(Error::Config("parity-only view needs a systematic code".into()));
        }
        if self.n_out == self.k_in {
            return Err(Error::Config("code has no parity outputs".into()));
        }
        let n = self.n_out - self.k_in;
        let mask = (1u32 << n) - 1;
        Ok(Trellis {
            n_out: n,
            output: self.output.iter().map(|&o| o & mask).collect(),
            systematic: false,
            ..self.clone()
        })
    }

    /// Encode `info` (one bit per byte, values 0/1).
    pub fn encode(&self, info: &[u8], termination: Termination) -> Result<Codeword> {
        if info.len() % self.k_in != 0 {
            return Err(Error::Input(format!(
                "info length {} not divisible by k_in = {}",
                info.len(),
                self.k_in
            )));
        }
        let steps = info.len() / self.k_in;
        let total = self.frame_steps(steps, termination);
        let mut bits = Vec::with_capacity(total * self.n_out);
        let mut state = 0usize;
        for t in 0..total {
            let input = if t < steps {
                info[t * self.k_in..(t + 1) * self.k_in]
                    .iter()
                    .fold(0usize, |a, &b| (a << 1) | (b & 1) as usize)
            } else {
                self.tail_input(state)
            };
            let out = self.output(state, input);
            for j in 0..self.n_out {
                bits.push(((out >> (self.n_out - 1 - j)) & 1) as u8);
            }
            state = self.next_state(state, input);
        }
        Ok(Codeword {
            coded_len: bits.len(),
            bits,
            info_len: info.len(),
            final_state: state,
        })
    }

    /// Minimum output weight over all error events (paths leaving state zero
    /// with a nonzero input and first returning to it).
    pub fn free_distance(&self, limits: SearchLimits) -> Result<u32> {
        let b = self.num_branches();
        let mut best: Option<u32> = None;
        let mut dist = vec![u32::MAX; self.num_states];
        for u in 1..b {
            let w = self.output(0, u).count_ones();
            let ns = self.next_state(0, u);
            if ns == 0 {
                best = Some(best.map_or(w, |x| x.min(w)));
            } else {
                dist[ns] = dist[ns].min(w);
            }
        }
        for _ in 1..limits.max_len {
            let floor = dist.iter().copied().min().unwrap_or(u32::MAX);
            if floor == u32::MAX || best.is_some_and(|x| floor >= x) {
                break;
            }
            let mut nd = vec![u32::MAX; self.num_states];
            for s in 1..self.num_states {
                if dist[s] == u32::MAX {
                    continue;
                }
                for u in 0..b {
                    let w = dist[s] + self.output(s, u).count_ones();
                    let ns = self.next_state(s, u);
                    if ns == 0 {
                        best = Some(best.map_or(w, |x| x.min(w)));
                    } else {
                        nd[ns] = nd[ns].min(w);
                    }
                }
            }
            dist = nd;
        }
        match best {
            Some(d) if d <= limits.max_weight => Ok(d),
            _ => Err(Error::LimitExceeded(format!(
                "no error event of weight <= {} within {} steps",
                limits.max_weight, limits.max_len
            ))),
        }
    }
}

/// Free distance of a code specification.
pub fn free_distance(spec: &ConvCodeSpec, limits: SearchLimits) -> Result<u32> {
    spec.build_trellis()?.free_distance(limits)
}
