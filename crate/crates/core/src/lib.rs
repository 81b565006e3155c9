//! Computation of the conformal invariant `lambda` of bounded planar
//! domains by two independent pipelines: an exact Laurent-series route for
//! conformal images of the model annulus, and a numerical route that
//! solves the boundary-blow-up Liouville equation and reads the invariant
//! off the boundary expansion of the defining function `v = e^(-u)`.

pub mod domain;
pub mod mapcalc;
pub mod models;
pub mod expansion;
pub mod harness;
pub mod liouville;
pub mod series;
