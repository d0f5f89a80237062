//! Shear coordinates, strips with wedge cuts, train tracks and the
//! Thurston metric estimators built on them.

pub mod hyp;
pub mod strip;
pub mod traintrack;
pub mod harness;
pub mod surface;
