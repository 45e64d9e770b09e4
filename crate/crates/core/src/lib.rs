pub mod adiff;
pub mod cli;
pub mod diffops;
pub mod fitter;
pub mod geom;
pub mod io;
pub mod mesher;
pub mod modelscript;
pub mod normalize;
pub mod redistance;
