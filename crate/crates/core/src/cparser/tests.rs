use super::*;
use crate::formula::Formula;
use crate::rast::{validate, NodeKind, ParseStatus};

fn parse(src: &str) -> SourceFile {
    let f = parse_str("t.c", src, &ParserConfig::default());
    assert_eq!(f.status, ParseStatus::Ok, "{src}");
    assert_eq!(validate(&f), vec![], "{}", f.dump());
    f
}

fn kinds(f: &SourceFile) -> Vec<String> {
    f.dump().lines().map(|l| l.split(" cond=").next().unwrap().to_owned()).collect()
}

const SPLIT_LOOP: &str = "void f() {\n#ifdef A\n  while (x) {\n#endif\n  stmt;\n#ifdef A\n  }\n#endif\n}\n";

#[test]
fn split_loop_matches_hand_built_model() {
    let f = parse(SPLIT_LOOP);
    assert_eq!(f.dump(), crate::rast::tests::split_loop_model().dump());
}

#[test]
fn simple_function() {
    let f = parse("void f(void) { stmt; }");
    assert_eq!(kinds(&f), vec!["0 Function:f [1-1]", "  1 SingleStatement [1-1]"]);
    assert!(f.nodes.iter().all(|n| n.condition.is_true() && n.presence_condition.is_true()));
}

#[test]
fn elif_siblings() {
    let f = parse("void f() {\n#if A\n  x = 1;\n#elif B\n  x = 2;\n#endif\n}\n");
    let blocks: Vec<_> = f.nodes.iter().filter(|n| matches!(n.kind, NodeKind::CppBlock { .. })).collect();
    assert_eq!(blocks.len(), 2);
    assert_eq!(blocks[0].condition, Formula::var("A"));
    assert_eq!(blocks[1].condition.to_string(), "!A && B");
    assert_eq!(blocks[0].children.len(), 1);
    assert_eq!(blocks[1].children.len(), 1);
    let NodeKind::CppBlock { siblings, .. } = &blocks[0].kind else { panic!() };
    assert_eq!(siblings, &vec![blocks[0].id, blocks[1].id]);
}

#[test]
fn control_structures() {
    let src = "int g(int a) {\n  if (a) x(); else if (b) { y(); } else z();\n  for (i = 0; i < n; i++) { w(); }\n  do { v(); } while (a);\n  switch (a) {\n  case 1: p(); break;\n  default: q();\n  }\n  { bare(); }\n  return a;\n}\n";
    let f = parse(src);
    let k = kinds(&f);
    let expected = [
        "0 Function:g [1-11]",
        "  1 BranchStatement:If [2-2]",
        "    2 SingleStatement [2-2]",
        "  3 BranchStatement:ElseIf [2-2]",
        "    4 SingleStatement [2-2]",
        "  5 BranchStatement:Else [2-2]",
        "    6 SingleStatement [2-2]",
        "  7 LoopStatement:For [3-3]",
        "    8 SingleStatement [3-3]",
        "  9 LoopStatement:DoWhile [4-4]",
        "    10 SingleStatement [4-4]",
        "  11 SwitchStatement [5-8]",
        "    12 CaseStatement:Case [6-6]",
        "      13 SingleStatement [6-6]",
        "      14 SingleStatement [6-6]",
        "    15 CaseStatement:Default [7-7]",
        "      16 SingleStatement [7-7]",
        "  17 SingleStatement [9-9]",
        "  18 SingleStatement [10-10]",
    ];
    assert_eq!(k, expected);
}

#[test]
fn embedded_fragment() {
    let f = parse("void f() {\n  x = foo(a\n#ifdef B\n    , b\n#endif\n  );\n}\n");
    let stmt = f.nodes.iter().find(|n| n.is_statement()).unwrap();
    let NodeKind::SingleStatement { code, .. } = &stmt.kind else { panic!() };
    assert_eq!(code.blocks().len(), 1);
    assert_eq!(code.blocks()[0].presence_condition, Formula::var("B"));
    assert_eq!((stmt.start_line, stmt.end_line), (2, 6));
    assert!(code.text.contains("foo"));
}

#[test]
fn conditional_signature() {
    let f = parse("#ifdef A\nint f(int a) {\n#else\nint f(void) {\n#endif\n  return 0;\n}\n");
    let func = &f.nodes[f.top_level[0]];
    assert!(matches!(&func.kind, NodeKind::Function { name, .. } if name == "f"));
    assert_eq!(func.children.len(), 1);
}

#[test]
fn top_level_items() {
    let src = "#include <x.h>\nstruct s { int a; };\nstatic int t[] = { 1, 2 };\nint g(void);\nextern \"C\" {\nint h(void) { return 1; }\n}\n__attribute__((unused)) static int k(int a) __attribute__((cold)) { return a; }\n";
    let f = parse(src);
    let names: Vec<_> = f
        .nodes
        .iter()
        .filter_map(|n| match &n.kind {
            NodeKind::Function { name, .. } => Some(name.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(names, vec!["h", "k"]);
    assert_eq!(f.top_level.len(), 6);
}

#[test]
fn unequal_closers_fall_back() {
    let f = parse("void f() {\n#ifdef A\n  while (x) {\n#endif\n  s;\n#ifdef B\n  }\n#endif\n}\n");
    assert!(!f.nodes.iter().any(|n| matches!(n.kind, NodeKind::Reference { .. })));
    assert!(f
        .nodes
        .iter()
        .any(|n| matches!(&n.kind, NodeKind::SingleStatement { code, .. } if code.text == "while (x) {")));
}

#[test]
fn skip_and_best_effort() {
    let src = "void f() {\n#ifdef A\n  x;\n}\n";
    let skipped = parse_str("bad.c", src, &ParserConfig::default());
    assert!(skipped.is_skipped());
    let best = parse_str("bad.c", src, &ParserConfig { on_error: OnError::BestEffort, ..ParserConfig::default() });
    assert_eq!(best.status, ParseStatus::Ok);
    assert_eq!(validate(&best), vec![]);
}

#[test]
fn labels_and_macro_blocks() {
    let f =
        parse("void f() {\n  list_for_each(p, h) {\n    use(p);\n  }\nout:\n#ifdef A\n  x;\n#endif\n  return;\n}\n");
    let k = kinds(&f);
    assert_eq!(
        k,
        vec![
            "0 Function:f [1-10]",
            "  1 SingleStatement [2-2]",
            "  2 SingleStatement [3-3]",
            "  3 SingleStatement [5-5]",
            "  4 CppBlock:IFDEF [6-8]",
            "    5 SingleStatement [7-7]",
            "  6 SingleStatement [9-9]",
        ]
    );
}

#[test]
fn do_while_split_by_conditionals() {
    let f = parse("void f() {\n#if A\n  do {\n#endif\n  s;\n#if A\n  } while (x);\n#endif\n}\n");
    assert!(f.nodes.iter().any(|n| matches!(n.kind, NodeKind::Reference { .. })));
}

#[test]
fn deterministic() {
    assert_eq!(parse(SPLIT_LOOP).dump(), parse(SPLIT_LOOP).dump());
}
