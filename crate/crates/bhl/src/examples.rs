//! Bundled example files: programs (`.bhp`), scenarios (`.scn`), proof
//! scripts (`.bhl`), and CSV datasets. The CLI can list them and write them
//! out; the integration tests run them end to end.

/// One bundled file, addressed by its file name.
pub struct Example {
    pub name: &'static str,
    pub text: &'static str,
}

pub const EXAMPLES: &[Example] = &[
    Example {
        name: "c_drug.bhp",
        text: include_str!("../corpus/c_drug.bhp"),
    },
    Example {
        name: "c_multi.bhp",
        text: include_str!("../corpus/c_multi.bhp"),
    },
    Example {
        name: "c_hack.bhp",
        text: include_str!("../corpus/c_hack.bhp"),
    },
    Example {
        name: "hist_only.bhp",
        text: include_str!("../corpus/hist_only.bhp"),
    },
    Example {
        name: "drugs.scn",
        text: include_str!("../corpus/drugs.scn"),
    },
    Example {
        name: "hack.scn",
        text: include_str!("../corpus/hack.scn"),
    },
    Example {
        name: "wp6.scn",
        text: include_str!("../corpus/wp6.scn"),
    },
    Example {
        name: "c_drug.bhl",
        text: include_str!("../corpus/c_drug.bhl"),
    },
    Example {
        name: "c_multi.bhl",
        text: include_str!("../corpus/c_multi.bhl"),
    },
    Example {
        name: "eg7_ztest.bhl",
        text: include_str!("../corpus/eg7_ztest.bhl"),
    },
    Example {
        name: "eg8_lrt.bhl",
        text: include_str!("../corpus/eg8_lrt.bhl"),
    },
    Example {
        name: "c_hack_bad.bhl",
        text: include_str!("../corpus/c_hack_bad.bhl"),
    },
    Example {
        name: "y1.csv",
        text: include_str!("../corpus/y1.csv"),
    },
    Example {
        name: "y2.csv",
        text: include_str!("../corpus/y2.csv"),
    },
];

pub fn find(name: &str) -> Option<&'static str> {
    EXAMPLES.iter().find(|e| e.name == name).map(|e| e.text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kripke::build_model;
    use crate::proof::script::parse_proof_script;
    use crate::proof::{check_proof, ProofVerdict};
    use crate::scenario::parse_scenario;
    use crate::syntax::parser::parse_program_file;

    #[test]
    fn all_bundled_files_parse() {
        for e in EXAMPLES {
            let res: Result<(), String> = match e.name.rsplit('.').next().unwrap() {
                "bhp" => parse_program_file(e.text).map(|_| ()).map_err(|x| x.to_string()),
                "scn" => parse_scenario(e.text).map(|_| ()).map_err(|x| x.to_string()),
                "bhl" => parse_proof_script(e.text).map(|_| ()).map_err(|x| x.to_string()),
                "csv" => Ok(()),
                other => panic!("unexpected extension {other}"),
            };
            assert!(res.is_ok(), "{}: {}", e.name, res.unwrap_err());
        }
    }

    #[test]
    fn drug_certificates_are_accepted_without_assumptions() {
        let model =
            build_model(&parse_scenario(find("drugs.scn").unwrap()).unwrap(), 1_000_000).unwrap();
        for name in ["c_drug.bhl", "c_multi.bhl", "eg7_ztest.bhl"] {
            let script = parse_proof_script(find(name).unwrap()).unwrap();
            let report = check_proof(&script, Some(&model));
            assert!(report.accepted(), "{name}: {:?}", report.verdict);
            assert!(report.assumed.is_empty(), "{name} left assumptions");
            assert!(!report.scenario_checked.is_empty());
        }
    }

    #[test]
    fn lrt_certificate_is_accepted_with_a_recorded_assumption() {
        let script = parse_proof_script(find("eg8_lrt.bhl").unwrap()).unwrap();
        let report = check_proof(&script, None);
        assert!(report.accepted(), "{:?}", report.verdict);
        assert_eq!(report.assumed.len(), 1);
    }

    #[test]
    fn stale_history_certificate_is_rejected() {
        let script = parse_proof_script(find("c_hack_bad.bhl").unwrap()).unwrap();
        let report = check_proof(&script, None);
        match report.verdict {
            ProofVerdict::Rejected { ref path, .. } => assert_eq!(path, "root.2"),
            ref v => panic!("expected rejection, got {v:?}"),
        }
    }
}
