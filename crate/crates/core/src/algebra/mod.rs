//! Exact arithmetic over Z2, Zp, Z/2^k and Q.

mod gf2;
mod mat;
mod ratrec;
mod ring;

pub use gf2::{solve_gf2, BitVec, Gf2Solution, LinSystemGF2};
pub use mat::Mat;
pub use ratrec::{rat_reconstruct, reconstruction_bound, Fraction};
pub use ring::{format_rational, parse_rational, Elem, Ring};

