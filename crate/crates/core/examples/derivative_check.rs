//! Finite-difference checks of the operator derivatives on random jets. The printed
//! sign convention fails this check; the corrected one passes it.

use gaussflow::oracles::fd_check_derivatives;
use gaussflow::{Signature, Transcription};

fn main() {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    for sig in [Signature::Minkowski, Signature::Euclidean] {
        for form in [Transcription::Corrected, Transcription::AsPrinted] {
            let err = fd_check_derivatives(samples, sig, 1e-6, form, 7);
            println!("{:<10} {form:<10?} worst relative error over {samples} jets: {err:.2e}", sig.name());
        }
    }
}
