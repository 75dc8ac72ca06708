//! Plumbing for the blebbing simulator's command line: plain-text
//! configuration, OFF/OBJ mesh files, and legacy-VTK snapshot output.

pub mod config;
pub mod mesh_io;
pub mod vtk;
