//! Bundled desk-scale corpus.

use serde::Serialize;

use crate::lang::{generate_inputs, parse_program, InputSpec, ParamSpec, Program, SignPolicy};

pub const CORPUS_SEED: u64 = 0x5EED_2024;
pub const CORPUS_INPUTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub source: &'static str,
    pub inputs: InputSpec,
    pub notes: &'static str,
}

impl CorpusEntry {
    pub fn program(&self) -> Program {
        parse_program(self.source).expect("bundled program parses")
    }

    pub fn input_vectors(&self) -> Vec<Vec<f64>> {
        generate_inputs(&self.inputs).expect("bundled input spec is valid")
    }

    pub fn file_name(&self) -> String {
        format!("{}.fpk", self.name)
    }
}

fn spec(params: &[ParamSpec]) -> InputSpec {
    InputSpec {
        seed: CORPUS_SEED,
        count: CORPUS_INPUTS,
        params: params.to_vec(),
    }
}

pub fn bundled_corpus() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry {
            name: "diff-roots",
            source: include_str!("../../corpus/diff-roots.fpk"),
            inputs: spec(&[ParamSpec::positive(200, 400)]),
            notes: "sqrt(x+1) - sqrt(x) and its square for x beyond 2^53; the difference is \
                    absorbed until its contributors are silenced",
        },
        CorpusEntry {
            name: "cancel-mul",
            source: include_str!("../../corpus/cancel-mul.fpk"),
            inputs: spec(&[ParamSpec::positive(200, 240), ParamSpec::positive(0, 60)]),
            notes: "(a-b)(c-d) with both factors cancelling to zero; needs the e_x*e_y term, and \
                    one factor is absorbed",
        },
        CorpusEntry {
            name: "poly-expand",
            source: include_str!("../../corpus/poly-expand.fpk"),
            inputs: spec(&[ParamSpec::new(-16, -6, SignPolicy::Mixed)]),
            notes: "expanded (x-1)^6 near x = 1: catastrophic cancellation every backend sees",
        },
        CorpusEntry {
            name: "sin-reduce",
            source: include_str!("../../corpus/sin-reduce.fpk"),
            inputs: spec(&[ParamSpec::positive(0, 5)]),
            notes: "Cody-Waite reduction with the 1.5*2^52 rounding trick; the first seven ops \
                    are the reduction",
        },
        CorpusEntry {
            name: "harmonic-acc",
            source: include_str!("../../corpus/harmonic-acc.fpk"),
            inputs: spec(&[ParamSpec::new(-4, 4, SignPolicy::Mixed)]),
            notes: "long accumulation loop; errors grow slowly and never reach the threshold",
        },
        CorpusEntry {
            name: "kahan-acc",
            source: include_str!("../../corpus/kahan-acc.fpk"),
            inputs: spec(&[ParamSpec::new(-4, 4, SignPolicy::Mixed)]),
            notes: "compensated summation; the correction term subtracts values with a shared \
                    error, which a sign error in the subtraction residue doubles instead",
        },
        CorpusEntry {
            name: "cast-chain",
            source: include_str!("../../corpus/cast-chain.fpk"),
            inputs: spec(&[ParamSpec::new(-20, 20, SignPolicy::Mixed)]),
            notes: "binary32 round trips; cast errors stay far below the threshold",
        },
    ]
}

pub fn corpus_entry(name: &str) -> Option<CorpusEntry> {
    bundled_corpus().into_iter().find(|e| e.name == name)
}
