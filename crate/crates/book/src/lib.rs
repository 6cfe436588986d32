//! The guide's chapters as modules, so `cargo test --doc` runs every code
//! block in `book/src`. Nothing here is meant to be used directly.

macro_rules! chapter {
    ($name:ident, $file:literal) => {
        #[doc = include_str!(concat!("../../../book/src/", $file))]
        pub mod $name {}
    };
}

chapter!(introduction, "introduction.md");
chapter!(silhouettes, "silhouettes.md");
chapter!(descriptors, "descriptors.md");
chapter!(manifolds, "manifolds.md");
chapter!(retrieval, "retrieval.md");
chapter!(evaluation, "evaluation.md");
chapter!(interfaces, "interfaces.md");
