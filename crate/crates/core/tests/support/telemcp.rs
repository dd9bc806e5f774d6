//! Generated-case properties of context objects, shared by the property
//! tests and the acceptance run. Payload shapes are written out here by
//! hand rather than read from the registry, so a registry bug cannot hide
//! itself.

use proptest::prelude::*;
use proptest::sample::Index;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use telehub_core::context::{
    canonicalize, decode, make_object, project, to_canonical_bytes, validate_object,
    validate_payload, ContextObject, FieldSelector, Origin, Schema, SCHEMA_VERSION,
};

#[derive(Debug, Clone)]
enum Ty {
    Str,
    Token,
    Nonempty,
    Int,
    Uint,
    Posint,
    Real,
    Unit,
    Bool,
    Enum(&'static [&'static str]),
    Obj(Vec<(&'static str, Ty, bool)>),
    List(Box<Ty>, usize),
}

const DIRECTIONS: &[&str] = &["UL", "DL", "internal"];

fn record_ty() -> Ty {
    Ty::Obj(vec![
        ("protocol", Ty::Token, false),
        ("name", Ty::Token, false),
        ("timestamp_us", Ty::Int, false),
        ("direction", Ty::Enum(DIRECTIONS), false),
        ("index", Ty::Uint, false),
        (
            "raw_ref",
            Ty::Obj(vec![
                ("offset", Ty::Uint, false),
                ("length", Ty::Uint, false),
            ]),
            true,
        ),
    ])
}

fn shape(schema: Schema) -> Ty {
    match schema {
        Schema::MessageRecord => record_ty(),
        Schema::LogWindow => Ty::Obj(vec![
            ("source_id", Ty::Str, false),
            ("start_index", Ty::Uint, false),
            ("end_index", Ty::Uint, false),
            ("records", Ty::List(Box::new(record_ty()), 0), false),
        ]),
        Schema::ProceduralFlow => Ty::Obj(vec![
            ("test_id", Ty::Str, false),
            (
                "steps",
                Ty::List(
                    Box::new(Ty::Obj(vec![
                        ("step_no", Ty::Posint, false),
                        ("protocol", Ty::Token, false),
                        ("name", Ty::Token, false),
                        ("direction", Ty::Enum(DIRECTIONS), true),
                        ("description", Ty::Str, false),
                    ])),
                    1,
                ),
                false,
            ),
        ]),
        Schema::KpiSample => Ty::Obj(vec![
            ("key", Ty::Token, false),
            ("value", Ty::Real, false),
            ("unit", Ty::Str, false),
            ("timestamp_us", Ty::Int, false),
        ]),
        Schema::ApprovalFlag => Ty::Obj(vec![
            ("approved", Ty::Bool, false),
            ("reviewer", Ty::Nonempty, false),
            ("comment", Ty::Str, false),
            ("decided_at_us", Ty::Int, false),
        ]),
        Schema::ValidationVerdict => Ty::Obj(vec![
            ("status", Ty::Enum(&["found", "not_found"]), false),
            ("explanation", Ty::Str, false),
            ("confidence", Ty::Unit, false),
            ("step_no", Ty::Posint, false),
            ("window_start", Ty::Uint, false),
            ("window_end", Ty::Uint, false),
        ]),
        Schema::TextBlob => Ty::Obj(vec![
            ("text", Ty::Str, false),
            ("media_type", Ty::Str, true),
        ]),
    }
}

fn finite_real() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        (-1_000_000i64..1_000_000).prop_map(|i| i as f64),
        (-1000.0f64..1000.0),
    ]
}

fn value_of(ty: &Ty) -> BoxedStrategy<Value> {
    match ty {
        Ty::Str => "(?s).{0,12}".prop_map(Value::from).boxed(),
        Ty::Token => "[A-Za-z0-9_.-]{1,10}".prop_map(Value::from).boxed(),
        Ty::Nonempty => "[A-Za-z][A-Za-z ]{0,10}".prop_map(Value::from).boxed(),
        Ty::Int => any::<i64>().prop_map(Value::from).boxed(),
        Ty::Uint => (0u64..1_000_000).prop_map(Value::from).boxed(),
        Ty::Posint => (1u64..1_000_000).prop_map(Value::from).boxed(),
        Ty::Real => finite_real().prop_map(|x| json!(x)).boxed(),
        Ty::Unit => (0.0f64..=1.0).prop_map(|x| json!(x)).boxed(),
        Ty::Bool => any::<bool>().prop_map(Value::from).boxed(),
        Ty::Enum(values) => prop::sample::select(*values).prop_map(Value::from).boxed(),
        Ty::Obj(fields) => {
            let parts: Vec<BoxedStrategy<Option<(String, Value)>>> = fields
                .iter()
                .map(|(name, t, optional)| {
                    let name = name.to_string();
                    let v = value_of(t);
                    if *optional {
                        prop::option::of(v)
                            .prop_map(move |o| o.map(|v| (name.clone(), v)))
                            .boxed()
                    } else {
                        v.prop_map(move |v| Some((name.clone(), v))).boxed()
                    }
                })
                .collect();
            parts
                .prop_map(|kv| Value::Object(kv.into_iter().flatten().collect::<Map<_, _>>()))
                .boxed()
        }
        Ty::List(item, min) => prop::collection::vec(value_of(item), *min..*min + 4)
            .prop_map(Value::Array)
            .boxed(),
    }
}

/// Makes cross-field invariants hold.
fn fix_invariants(schema: Schema, v: &mut Value) {
    match schema {
        Schema::LogWindow => {
            let start = v["start_index"].as_u64().unwrap();
            let records = v["records"].as_array_mut().unwrap();
            for (i, r) in records.iter_mut().enumerate() {
                r["index"] = json!(start + i as u64);
            }
            let n = records.len() as u64;
            v["end_index"] = json!(start + n);
        }
        Schema::ProceduralFlow => {
            for (i, s) in v["steps"].as_array_mut().unwrap().iter_mut().enumerate() {
                s["step_no"] = json!(i + 1);
            }
        }
        Schema::ValidationVerdict => {
            let a = v["window_start"].as_u64().unwrap();
            let b = v["window_end"].as_u64().unwrap();
            v["window_start"] = json!(a.min(b));
            v["window_end"] = json!(a.max(b));
        }
        _ => {}
    }
}

pub fn payload(schema: Schema) -> BoxedStrategy<Value> {
    value_of(&shape(schema))
        .prop_map(move |mut v| {
            fix_invariants(schema, &mut v);
            v
        })
        .boxed()
}

fn origin() -> impl Strategy<Value = Origin> {
    ("[a-z_]{1,8}", "[a-z0-9-]{1,12}", any::<i64>()).prop_map(|(n, r, t)| Origin::new(n, r, t))
}

fn parents() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[0-9a-f]{64}", 0..3)
}

fn any_schema() -> impl Strategy<Value = Schema> {
    prop::sample::select(Schema::ALL.to_vec())
}

fn object() -> impl Strategy<Value = ContextObject> {
    any_schema().prop_flat_map(|s| {
        (payload(s), origin(), parents()).prop_map(move |(p, o, par)| {
            make_object(s, p, &o, par).expect("generated payload is valid")
        })
    })
}

/// Sorted keys, no insignificant whitespace.
fn reference_canonical(v: &Value) -> String {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let parts: Vec<String> = keys
                .iter()
                .map(|k| {
                    format!(
                        "{}:{}",
                        serde_json::to_string(k).unwrap(),
                        reference_canonical(&m[*k])
                    )
                })
                .collect();
            format!("{{{}}}", parts.join(","))
        }
        Value::Array(a) => format!(
            "[{}]",
            a.iter()
                .map(reference_canonical)
                .collect::<Vec<_>>()
                .join(",")
        ),
        other => serde_json::to_string(other).unwrap(),
    }
}

fn hash_region(o: &ContextObject) -> Value {
    let mut r = json!({"schema": o.schema().as_str(), "schema_version": o.schema_version(), "payload": o.payload()});
    if let Some(sel) = o.selection() {
        r["selection"] = json!(sel);
    }
    r
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `sub` keeps only keys present in `full`, with identical leaves.
fn is_subtree(sub: &Value, full: &Value) -> bool {
    match (sub, full) {
        (Value::Object(a), Value::Object(b)) => a
            .iter()
            .all(|(k, v)| b.get(k).is_some_and(|w| is_subtree(v, w))),
        (Value::Array(a), Value::Array(b)) => {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| is_subtree(x, y))
        }
        (a, b) => a == b,
    }
}

fn paths_of(ty: &Ty, prefix: &str, out: &mut Vec<String>) {
    let mut t = ty;
    while let Ty::List(item, _) = t {
        t = item;
    }
    if let Ty::Obj(fields) = t {
        for (name, ft, _) in fields {
            let p = if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            };
            out.push(p.clone());
            paths_of(ft, &p, out);
        }
    }
}

/// Deterministic runners make acceptance output reproducible; the plain
/// property tests use fresh seeds.
pub fn runner(cases: u32, deterministic: bool) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    if deterministic {
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
    } else {
        TestRunner::new(config)
    }
}

pub fn canonical_fixpoint(runner: &mut TestRunner) -> Result<(), String> {
    runner
        .run(&object(), |o| {
            let bytes = canonicalize(&o).unwrap();
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(&back, &o);
            prop_assert_eq!(canonicalize(&back).unwrap(), bytes.clone());
            prop_assert_eq!(
                String::from_utf8(bytes).unwrap(),
                reference_canonical(&o.to_document())
            );
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn hash_pair() -> impl Strategy<Value = (ContextObject, ContextObject)> {
    any_schema().prop_flat_map(|s| {
        let same = (payload(s), origin(), origin()).prop_map(move |(p, o1, o2)| {
            (
                make_object(s, p.clone(), &o1, vec![]).unwrap(),
                make_object(s, p, &o2, vec![]).unwrap(),
            )
        });
        let other = (payload(s), payload(s), origin()).prop_map(move |(p, q, o)| {
            (
                make_object(s, p, &o, vec![]).unwrap(),
                make_object(s, q, &o, vec![]).unwrap(),
            )
        });
        prop_oneof![same, other]
    })
}

pub fn hash_stability(runner: &mut TestRunner) -> Result<(), String> {
    runner
        .run(&hash_pair(), |(a, b)| {
            let ra = reference_canonical(&hash_region(&a));
            let rb = reference_canonical(&hash_region(&b));
            prop_assert_eq!(a.hash(), sha_hex(ra.as_bytes()));
            prop_assert_eq!(b.hash(), sha_hex(rb.as_bytes()));
            prop_assert_eq!(ra == rb, a.hash() == b.hash());
            prop_assert_eq!(a.recompute_hash(), a.hash());
            prop_assert_eq!(to_canonical_bytes(&hash_region(&a)), ra.into_bytes());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn object_with_paths() -> impl Strategy<Value = (ContextObject, Vec<String>)> {
    object().prop_flat_map(|o| {
        let mut paths = Vec::new();
        paths_of(&shape(o.schema()), "", &mut paths);
        let n = paths.len();
        (Just(o), prop::sample::subsequence(paths, 1..=n))
    })
}

pub fn projection_subset_and_lineage(runner: &mut TestRunner) -> Result<(), String> {
    runner
        .run(&object_with_paths(), |(o, picks)| {
            let sel = FieldSelector::new(o.schema(), picks);
            let p = project(&o, &sel).unwrap();
            prop_assert!(
                is_subtree(p.payload(), o.payload()),
                "{} not within {}",
                p.payload(),
                o.payload()
            );
            prop_assert_eq!(&p.provenance().parent_hashes, &vec![o.hash().to_string()]);
            prop_assert_eq!(p.schema(), o.schema());
            prop_assert!(
                validate_object(&p).is_ok(),
                "{:?}",
                validate_object(&p).messages()
            );
            let bytes = canonicalize(&p).unwrap();
            prop_assert_eq!(decode(&bytes).unwrap(), p.clone());

            let full = project(&o, &FieldSelector::full(o.schema())).unwrap();
            prop_assert_eq!(full.payload(), o.payload());
            prop_assert_eq!(
                &full.provenance().parent_hashes,
                &vec![o.hash().to_string()]
            );
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn single_field_mutation_is_reported(runner: &mut TestRunner) -> Result<(), String> {
    let strategy =
        any_schema().prop_flat_map(|s| (Just(s), payload(s), any::<Index>(), any::<Index>()));
    runner
        .run(&strategy, |(schema, valid, site, choice)| {
            prop_assert!(validate_payload(schema.as_str(), SCHEMA_VERSION, &valid).is_ok());
            let mut sites = Vec::new();
            collect_sites(&valid, &shape(schema), String::new(), false, &mut sites);
            let (ptr, ty, optional) = &sites[site.index(sites.len())];
            let options = mutations(ptr, ty, *optional);
            let m = &options[choice.index(options.len())];
            let mut bad = valid.clone();
            apply(&mut bad, m);
            prop_assert_ne!(&bad, &valid);
            let report = validate_payload(schema.as_str(), SCHEMA_VERSION, &bad);
            prop_assert!(!report.is_ok(), "{:?} on {} went unreported", m, valid);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

#[derive(Debug)]
enum Mutation {
    Remove(String),
    Replace(String, Value),
    AddExtra(String),
}

fn collect_sites(
    v: &Value,
    ty: &Ty,
    ptr: String,
    optional: bool,
    out: &mut Vec<(String, Ty, bool)>,
) {
    out.push((ptr.clone(), ty.clone(), optional));
    match ty {
        Ty::Obj(fields) => {
            for (name, ft, opt) in fields {
                if let Some(fv) = v.get(*name) {
                    collect_sites(fv, ft, format!("{ptr}/{name}"), *opt, out);
                }
            }
        }
        Ty::List(item, _) => {
            for (i, iv) in v.as_array().unwrap().iter().enumerate() {
                collect_sites(iv, item, format!("{ptr}/{i}"), false, out);
            }
        }
        _ => {}
    }
}

fn mutations(ptr: &str, ty: &Ty, optional: bool) -> Vec<Mutation> {
    let mut out = Vec::new();
    let root = ptr.is_empty();
    let is_item = ptr
        .rsplit('/')
        .next()
        .is_some_and(|s| s.parse::<usize>().is_ok());
    if !root && !optional && !is_item {
        out.push(Mutation::Remove(ptr.to_string()));
    }
    let wrong = match ty {
        Ty::Str | Ty::Token | Ty::Nonempty | Ty::Enum(_) => json!(7),
        Ty::Int | Ty::Uint | Ty::Posint | Ty::Real | Ty::Unit => json!("7"),
        Ty::Bool => json!(1),
        Ty::Obj(_) => json!([]),
        Ty::List(..) => json!({}),
    };
    if !root {
        out.push(Mutation::Replace(ptr.to_string(), wrong));
        out.push(Mutation::Replace(ptr.to_string(), Value::Null));
    }
    let domain: &[Value] = match ty {
        Ty::Token => &[json!(""), json!("two words")],
        Ty::Nonempty => &[json!("")],
        Ty::Int => &[json!(0.5)],
        Ty::Uint => &[json!(-1), json!(2.5)],
        Ty::Posint => &[json!(0), json!(-3)],
        Ty::Unit => &[json!(1.5), json!(-0.25)],
        Ty::Enum(_) => &[json!("bogus")],
        _ => &[],
    };
    for d in domain {
        out.push(Mutation::Replace(ptr.to_string(), d.clone()));
    }
    if matches!(ty, Ty::Obj(_)) {
        out.push(Mutation::AddExtra(ptr.to_string()));
    }
    out
}

fn apply(v: &mut Value, m: &Mutation) {
    match m {
        Mutation::Remove(ptr) => {
            let (parent, key) = ptr.rsplit_once('/').unwrap();
            v.pointer_mut(parent)
                .unwrap()
                .as_object_mut()
                .unwrap()
                .remove(key);
        }
        Mutation::Replace(ptr, new) => *v.pointer_mut(ptr).unwrap() = new.clone(),
        Mutation::AddExtra(ptr) => {
            v.pointer_mut(ptr)
                .unwrap()
                .as_object_mut()
                .unwrap()
                .insert("zz_extra".into(), json!(true));
        }
    }
}
