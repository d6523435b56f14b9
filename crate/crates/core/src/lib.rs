pub mod corpus;
pub mod da;
pub mod eval;
pub mod fixture;
pub mod forge;
pub mod gql;
pub mod graph;
pub mod quality;
pub mod textgen;
