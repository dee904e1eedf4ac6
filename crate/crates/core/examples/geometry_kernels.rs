//! Pointwise graph geometry at a few jets in both signatures, with the flow operator
//! and its derivatives under the corrected and the printed sign conventions.

use gaussflow::geometry::{graph_geometry, square_root_inverse_metric};
use gaussflow::operators::{g_derivatives_with, g_value};
use gaussflow::{PointJet, Signature, Transcription};
use nalgebra::{DMatrix, DVector};

fn main() -> gaussflow::Result<()> {
    let p = DVector::from_vec(vec![0.3, -0.4]);
    let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let jet = PointJet::derivatives(p.clone(), r)?;

    for sig in [Signature::Minkowski, Signature::Euclidean] {
        let geo = graph_geometry(&jet, sig)?;
        println!("{}: v = {:.6}", sig.name(), geo.v);
        println!("  kappa = {:?}", geo.kappa);
        println!("  H = {:.6}, |A|^2 = {:.6}", geo.mean_curvature, geo.norm_second_form_sq());
        println!("  G = {:.6}", g_value(&jet, sig)?);

        let b = square_root_inverse_metric(&p, sig, Transcription::Corrected);
        let defect = (&b * &b - sig.inverse_metric(&p)).abs().max();
        println!("  |b b - g^ij| = {defect:.1e}");

        for form in [Transcription::Corrected, Transcription::AsPrinted] {
            let d = g_derivatives_with(&jet, sig, form)?;
            println!("  {form:?}: G_p = [{:.6}, {:.6}]", d.g_p[0], d.g_p[1]);
        }
    }
    Ok(())
}
