//! Checker and evaluator for the Calculus of Dependent Lambda Eliminations.

pub mod cli;
pub mod corpus;
pub mod erase;
pub mod load;
pub mod norm;
pub mod parser;
pub mod pretty;
pub mod pure;
pub mod syntax;
pub mod typecheck;
