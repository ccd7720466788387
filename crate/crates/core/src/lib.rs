pub mod bounds;
pub mod decoder;
pub mod error;
pub mod modem;
pub mod numeric;
pub mod scheme;
pub mod sim;
pub mod spectrum;
pub mod trellis;

pub use bounds::{
    asymptotic_bound, hctc_iowc, pairwise_error_awgn, pairwise_error_rayleigh, pccc_iowc, sccc_iowc, union_bound,
    AsymptoticParams, BoundCurve, Channel, ComponentSpectra, ConcatIOWC, ExponentScan, PepForm, SpectrumConfig,
    SpectrumMethod,
};
pub use error::{Error, Result};
pub use scheme::{ConcatScheme, Layout, SchemeKind};
pub use spectrum::{EventSpectrum, Truncation, WeightSpectrum};
pub use trellis::{build_trellis, free_distance, Codeword, ConvCodeSpec, SearchLimits, Termination, Trellis};
