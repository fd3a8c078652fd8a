//! Bundled protomatrices: the shared 2x8 high-rate core, the five published
//! rate-compatible ensembles and the punctured counterexample matrix.

use crate::protomatrix::Protomatrix;

pub const HRC: &str = include_str!("../fixtures/hrc.txt");
pub const HRC_PUNCTURED: &str = include_str!("../fixtures/hrc_punct.txt");
pub const P1: &str = include_str!("../fixtures/p1.txt");
pub const P2: &str = include_str!("../fixtures/p2.txt");
pub const P3: &str = include_str!("../fixtures/p3.txt");
pub const P4: &str = include_str!("../fixtures/p4.txt");
pub const P5: &str = include_str!("../fixtures/p5.txt");
pub const APPENDIX: &str = include_str!("../fixtures/appendix.txt");

fn load(text: &str) -> Protomatrix {
    text.parse().expect("bundled fixture parses")
}

pub fn hrc() -> Protomatrix {
    load(HRC)
}

pub fn hrc_punctured() -> Protomatrix {
    load(HRC_PUNCTURED)
}

pub fn p1() -> Protomatrix {
    load(P1)
}

pub fn p2() -> Protomatrix {
    load(P2)
}

pub fn p3() -> Protomatrix {
    load(P3)
}

pub fn p4() -> Protomatrix {
    load(P4)
}

pub fn p5() -> Protomatrix {
    load(P5)
}

pub fn appendix() -> Protomatrix {
    load(APPENDIX)
}

/// `(name, matrix)` for P1..P5.
pub fn ensembles() -> Vec<(&'static str, Protomatrix)> {
    vec![
        ("P1", p1()),
        ("P2", p2()),
        ("P3", p3()),
        ("P4", p4()),
        ("P5", p5()),
    ]
}
