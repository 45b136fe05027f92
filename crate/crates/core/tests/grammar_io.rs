use std::collections::HashMap;

use ftg::grammar::{export_json, render_avm, Severity};
use ftg::hpsg::{sample_grammar, SAMPLE_GRAMMAR_SRC};
use ftg::{load_grammar, parse_term, TermStore};

#[test]
fn shipped_file_is_the_embedded_grammar() {
    let on_disk = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../grammars/hpsg_paper.ftg")).unwrap();
    assert_eq!(on_disk, SAMPLE_GRAMMAR_SRC);
}

#[test]
fn sample_grammar_inventory() {
    let g = sample_grammar();
    let l = &g.lattice;
    let s = |n: &str| g.sort(n).unwrap();
    assert!(l.leq(s("lex"), s("sign")) && l.leq(s("phrase"), s("sign")));
    assert!(l.leq(s("noun"), s("subst")) && l.leq(s("subst"), s("head")));
    for sub in ["noun", "verb", "adj", "prep", "reltvzr"] {
        assert!(l.leq(s(sub), s("substantive")), "{sub}");
    }
    assert_eq!(l.name(l.glb(s("sign"), s("lex"))), "lex");
    assert_eq!(l.name(l.glb(s("noun"), s("verb"))), "⊥");
    assert!(l.is_closed(s("category")));
    assert!(!l.is_closed(s("sign")));
    let names: Vec<&str> = g.schemata.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["head_subject", "head_complement"]);
}

#[test]
fn every_principle_path_resolves() {
    let g = sample_grammar();
    let mut s = TermStore::new(g.lattice.clone());
    let p = s.new_node(g.sort("phrase").unwrap()).unwrap();
    for path in [
        "synsem.loc.cat.head",
        "synsem.loc.cat.valence.subj",
        "synsem.loc.cat.valence.comps",
        "dtrs.head-dtr.synsem.loc.cat.head",
        "dtrs.subj-dtr",
        "dtrs.comp-dtrs",
    ] {
        let feats: Vec<ftg::Feature> = path.split('.').map(ftg::Feature::new).collect();
        let mut cur = s.sort_of(p);
        for f in &feats {
            cur = g
                .lattice
                .approp_bound(cur, f)
                .unwrap_or_else(|| panic!("{path}: {f} not appropriate for {}", g.lattice.name(cur)));
        }
    }
}

#[test]
fn ambiguous_glb_fixture() {
    let src = "c <| a.\nc <| b.\nd <| a.\nd <| b.\n";
    let errs = load_grammar(src).unwrap_err();
    assert_eq!(errs.len(), 1);
    let msg = &errs[0].message;
    assert!(msg.contains('a') && msg.contains('b'), "{msg}");
    assert!(msg.contains("c") && msg.contains("d"), "{msg}");
}

#[test]
fn caret_diagnostic() {
    let src = "lex <| sign.\nword \"x\" : lex(synsem => nosuch).\n";
    let errs = load_grammar(src).unwrap_err();
    assert_eq!(errs[0].severity, Severity::Error);
    assert_eq!((errs[0].span.line, errs[0].span.col), (2, 26));
    let shown = errs[0].render(src, "x.ftg");
    let expected = format!(
        "error: unknown sort `nosuch`\n --> x.ftg:2:26\n  |\n2 | word \"x\" : lex(synsem => nosuch).\n  | {}^\n",
        " ".repeat(25)
    );
    assert_eq!(shown, expected);
}

#[test]
fn unify_two_category_terms() {
    let g = sample_grammar();
    let mut s = TermStore::new(g.lattice.clone());
    let a = parse_term("category(head => noun)", &g.lattice).unwrap();
    let b = parse_term("category(marking => unmarked)", &g.lattice).unwrap();
    let x = s.instantiate(&a, &mut HashMap::new()).unwrap();
    let y = s.instantiate(&b, &mut HashMap::new()).unwrap();
    s.unify(x, y).unwrap();
    assert_eq!(render_avm(&s, x), "category(head => noun, marking => unmarked)");
    assert_eq!(
        export_json(&s, x).to_string(),
        r#"{"root":"n0","nodes":{"n0":{"sort":"category","features":{"head":"n1","marking":"n2"}},"n1":{"sort":"noun","features":{}},"n2":{"sort":"unmarked","features":{}}}}"#
    );

    let c = parse_term("category(head => verb)", &g.lattice).unwrap();
    let z = s.instantiate(&c, &mut HashMap::new()).unwrap();
    assert!(s.unify(x, z).is_err());
}
