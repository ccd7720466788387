//! Concatenation layouts and their frame bookkeeping.
//!
//! Rates follow the parity-only convention for parallel branches: the
//! information bits are sent once (by the first PCCC encoder, or through the
//! serial branch of an HCTC) and a parallel encoder contributes only parity.
//! With component rates 1/2, 1/2 and 2/3 an HCTC then has rate 1/4.

use crate::error::{Error, Result};
use crate::trellis::{ConvCodeSpec, Trellis};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Pccc,
    Sccc,
    Hctc,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Pccc => "PCCC",
            SchemeKind::Sccc => "SCCC",
            SchemeKind::Hctc => "HCTC",
        })
    }
}

/// Component codes of a concatenation.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    /// Systematic `first` sends info and parity; `second` sees the
    /// interleaved info and sends parity only.
    Pccc { first: ConvCodeSpec, second: ConvCodeSpec },
    Sccc { outer: ConvCodeSpec, inner: ConvCodeSpec },
    /// `parallel` sees the interleaved info and sends parity only; the
    /// serial branch `outer -> interleaver -> inner` carries the information.
    Hctc {
        parallel: ConvCodeSpec,
        outer: ConvCodeSpec,
        inner: ConvCodeSpec,
    },
}

/// A validated concatenated scheme with interleaver lengths and overall rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatScheme {
    pub id: String,
    pub layout: Layout,
    /// Information bits per frame (first interleaver length).
    pub n1: usize,
    /// Second interleaver length: outer code output bits for SCCC/HCTC,
    /// equal to `n1` for PCCC.
    pub n2: usize,
    /// Overall rate, tail bits excluded.
    pub rate: f64,
}

fn check_div(what: &str, a: usize, b: usize) -> Result<()> {
    if b == 0 || a % b != 0 {
        return Err(Error::Config(format!("{what}: {a} is not divisible by {b}")));
    }
    Ok(())
}

fn parity_per_step(c: &ConvCodeSpec) -> Result<usize> {
    if !c.systematic {
        return Err(Error::Config("parallel component must be systematic".into()));
    }
    if c.n_out == c.k_in {
        return Err(Error::Config("parallel component has no parity outputs".into()));
    }
    Ok(c.n_out - c.k_in)
}

impl ConcatScheme {
    pub fn pccc(id: impl Into<String>, first: ConvCodeSpec, second: ConvCodeSpec, n1: usize) -> Result<Self> {
        if first.k_in != second.k_in {
            return Err(Error::Config("PCCC components need equal k_in".into()));
        }
        check_div("PCCC frame", n1, first.k_in)?;
        let steps = n1 / first.k_in;
        let sent = n1 + steps * parity_per_step(&first)? + steps * parity_per_step(&second)?;
        Ok(Self {
            id: id.into(),
            rate: n1 as f64 / sent as f64,
            layout: Layout::Pccc { first, second },
            n1,
            n2: n1,
        })
    }

    pub fn sccc(id: impl Into<String>, outer: ConvCodeSpec, inner: ConvCodeSpec, n1: usize) -> Result<Self> {
        check_div("SCCC frame", n1, outer.k_in)?;
        let n2 = n1 / outer.k_in * outer.n_out;
        check_div("SCCC inner frame", n2, inner.k_in)?;
        let sent = n2 / inner.k_in * inner.n_out;
        Ok(Self {
            id: id.into(),
            rate: n1 as f64 / sent as f64,
            layout: Layout::Sccc { outer, inner },
            n1,
            n2,
        })
    }

    pub fn hctc(
        id: impl Into<String>,
        parallel: ConvCodeSpec,
        outer: ConvCodeSpec,
        inner: ConvCodeSpec,
        n1: usize,
    ) -> Result<Self> {
        if parallel.k_in != outer.k_in {
            return Err(Error::Config(format!(
                "HCTC needs k_p = k_o, got {} and {}",
                parallel.k_in, outer.k_in
            )));
        }
        if outer.n_out != inner.k_in {
            return Err(Error::Config(format!(
                "HCTC needs p_o = p_i, got {} and {}",
                outer.n_out, inner.k_in
            )));
        }
        check_div("HCTC frame", n1, outer.k_in)?;
        let steps = n1 / outer.k_in;
        let n2 = steps * outer.n_out;
        // N2 / p = N1 / k holds by construction; inner has the same step count.
        let sent = steps * parity_per_step(&parallel)? + steps * inner.n_out;
        Ok(Self {
            id: id.into(),
            rate: n1 as f64 / sent as f64,
            layout: Layout::Hctc { parallel, outer, inner },
            n1,
            n2,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        match self.layout {
            Layout::Pccc { .. } => SchemeKind::Pccc,
            Layout::Sccc { .. } => SchemeKind::Sccc,
            Layout::Hctc { .. } => SchemeKind::Hctc,
        }
    }

    /// The same layout with a different first-interleaver length.
    pub fn with_n1(&self, n1: usize) -> Result<Self> {
        let id = self.id.clone();
        match self.layout.clone() {
            Layout::Pccc { first, second } => Self::pccc(id, first, second, n1),
            Layout::Sccc { outer, inner } => Self::sccc(id, outer, inner, n1),
            Layout::Hctc { parallel, outer, inner } => Self::hctc(id, parallel, outer, inner, n1),
        }
    }

    /// The outer code of a serial branch, if any.
    pub fn outer(&self) -> Option<&ConvCodeSpec> {
        match &self.layout {
            Layout::Pccc { .. } => None,
            Layout::Sccc { outer, .. } | Layout::Hctc { outer, .. } => Some(outer),
        }
    }

    /// Build every component trellis.
    pub fn trellises(&self) -> Result<SchemeTrellises> {
        Ok(match &self.layout {
            Layout::Pccc { first, second } => SchemeTrellises::Pccc {
                first: first.build_trellis()?,
                second_parity: second.build_trellis()?.parity_only()?,
            },
            Layout::Sccc { outer, inner } => SchemeTrellises::Sccc {
                outer: outer.build_trellis()?,
                inner: inner.build_trellis()?,
            },
            Layout::Hctc { parallel, outer, inner } => SchemeTrellises::Hctc {
                parallel_parity: parallel.build_trellis()?.parity_only()?,
                outer: outer.build_trellis()?,
                inner: inner.build_trellis()?,
            },
        })
    }
}

/// Trellises in the form the bounds and decoders consume: parallel branches
/// are already reduced to their parity outputs.
#[derive(Debug, Clone)]
pub enum SchemeTrellises {
    Pccc { first: Trellis, second_parity: Trellis },
    Sccc { outer: Trellis, inner: Trellis },
    Hctc {
        parallel_parity: Trellis,
        outer: Trellis,
        inner: Trellis,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trellis::Termination;

    fn rsc57() -> ConvCodeSpec {
        ConvCodeSpec::from_octal(1, 2, 2, &[&["7", "5"]], &["7"], true, Termination::Terminated).unwrap()
    }

    fn ff75() -> ConvCodeSpec {
        ConvCodeSpec::from_octal(1, 2, 2, &[&["7", "5"]], &[], false, Termination::Terminated).unwrap()
    }

    fn rsc23() -> ConvCodeSpec {
        ConvCodeSpec::from_octal(
            2,
            3,
            2,
            &[&["7", "0", "5"], &["0", "7", "3"]],
            &["7", "7"],
            true,
            Termination::Terminated,
        )
        .unwrap()
    }

    #[test]
    fn hctc_rate_is_one_quarter() {
        let s = ConcatScheme::hctc("h", rsc57(), ff75(), rsc23(), 100).unwrap();
        assert_eq!(s.n2, 200);
        assert!((s.rate - 0.25).abs() < 1e-15);
        assert_eq!(s.kind(), SchemeKind::Hctc);
    }

    #[test]
    fn pccc_with_rate_two_thirds_components_is_half() {
        let s = ConcatScheme::pccc("p", rsc23(), rsc23(), 100).unwrap();
        assert!((s.rate - 0.5).abs() < 1e-15);
        assert!(ConcatScheme::pccc("p", rsc23(), rsc23(), 101).is_err());
    }

    #[test]
    fn hctc_rejects_mismatched_p() {
        let acc = ConvCodeSpec::from_octal(1, 1, 1, &[&["3"]], &["3"], true, Termination::Terminated).unwrap();
        assert!(ConcatScheme::hctc("h", rsc57(), ff75(), acc, 100).is_err());
        assert!(ConcatScheme::hctc("h", ff75(), ff75(), rsc23(), 100).is_err());
    }

    #[test]
    fn sccc_rate() {
        let acc = ConvCodeSpec::from_octal(1, 1, 2, &[&["7"]], &["7"], true, Termination::Terminated).unwrap();
        let s = ConcatScheme::sccc("s", ff75(), acc, 100).unwrap();
        assert_eq!(s.n2, 200);
        assert!((s.rate - 0.5).abs() < 1e-15);
    }
}
