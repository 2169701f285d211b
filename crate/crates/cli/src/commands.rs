use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use scottbench_core::atomicity::{build_atomic_set, is_atomic, Verdict};
use scottbench_core::compiler::{candidate_pool, compile_sentence_with, completion_step, CompiledTheory};
use scottbench_core::generators::{
    check_superstable, derive_seed, gen_example_53, gen_example_superstable, random_colored_order, random_structure,
    rng,
};
use scottbench_core::logic::{isomorphic_bruteforce, parse_formula_infer, print, try_print, FiniteStructure, Signature};
use scottbench_core::orders::{
    classify, e1, emit_class_formulas, encode_order, endpoint_equivalence, recover_order, recover_order_with_edges,
    refine_fixpoint, validate_kmu, ColorEquivalence, OrderTerm, Pairs, RefineMode,
};
use scottbench_core::pool::{Pool, PoolSpec, Quantifiers};
use scottbench_core::scott::{refine_to_fixpoint_with, scott_invariant_with, ScottBuilder};
use scottbench_core::theory::TheoryHandle;
use scottbench_core::Budget;
use serde_json::{json, Value};

use crate::args::{BaseArg, Cli, Command, GenWhat, Global, ModeArgs, Oracle, OrderOp, PairsArg, PoolArgs, QuantArg};
use crate::io::*;
use crate::probe;

/// Printed formulas longer than this many nodes are replaced by their digest.
const PRINT_LIMIT: u64 = 20_000;

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let g = &cli.global;
    let budget = || Budget::new(g.limit_ms, g.limit_mem_mb);
    match &cli.command {
        Command::Scott { input, emit_sentence, invariant } => scott(input, emit_sentence.as_deref(), *invariant, &budget()),
        Command::Iso { a, b, oracle } => iso(a, b, *oracle, g),
        Command::Compile { input, sig, out } => compile(input, sig, out.as_deref(), &budget()),
        Command::Transform { input, compiled, inverse } => transform(input, compiled, *inverse, &budget()),
        Command::Complete { compiled, k, max_steps, pool } => complete(compiled, *k, *max_steps, pool, &budget()),
        Command::Atomic { input, theory, pool, tuple_len } => atomic(input, theory, pool, *tuple_len, &budget()),
        Command::BuildAtomic { input, budget: steps, theory, pool, tuple_len } => {
            build_atomic(input, *steps, theory, pool, *tuple_len, &budget())
        }
        Command::Refine { input, base, s, emit_formulas, stage, mode } => {
            refine(input, *base, s.as_deref(), *emit_formulas, *stage, mode)
        }
        Command::Classify { input, mode } => classify_cmd(input, mode),
        Command::Order { op } => order(op),
        Command::Gen { what } => generate(what, g.seed).map(Outcome::ok),
        Command::Probe { what, trials } => probe::run(what, *trials, g),
    }
}

fn printed(f: &scottbench_core::logic::Formula) -> Value {
    match try_print(f, PRINT_LIMIT) {
        Ok(s) => json!(s),
        Err(_) => Value::Null,
    }
}

fn scott(input: &Path, emit: Option<&Path>, invariant: bool, budget: &Budget) -> CliResult<Outcome> {
    let m = read_structure(input)?;
    let ps = refine_to_fixpoint_with(&m, budget)?;
    let sc = ScottBuilder::new(&m, &ps, budget).scott_sentence()?;
    if let Some(p) = emit {
        let mut text = try_print(&sc, u64::MAX)?;
        text.push('\n');
        write_text(p, &text)?;
    }
    let mut out = json!({
        "size": m.size(),
        "beta": ps.beta(),
        "class_counts": ps.class_counts(ps.beta()),
        "sentence": printed(&sc),
        "sentence_digest": sc.digest_hex(),
        "sentence_dag_size": sc.dag_size(),
    });
    if invariant {
        out["invariant"] = serde_json::to_value(scott_invariant_with(&m, budget)?).expect("serializable");
    }
    Ok(Outcome::ok(out))
}

fn iso(a: &Path, b: &Path, oracle: Oracle, g: &Global) -> CliResult<Outcome> {
    let (ma, mb) = (read_structure(a)?, read_structure(b)?);
    if ma.signature() != mb.signature() {
        return Err(Failure::Usage("the two structures have different signatures".into()));
    }
    let mut out = json!({"oracle": format!("{oracle:?}").to_lowercase()});
    let mut verdicts = Vec::new();
    if oracle != Oracle::Brute {
        let both = [&ma, &mb];
        let invs = both
            .par_iter()
            .map(|m| scott_invariant_with(m, &Budget::new(g.limit_ms, g.limit_mem_mb)))
            .collect::<Result<Vec<_>, _>>()?;
        let same = invs[0].digest == invs[1].digest;
        out["scott"] = json!(same);
        out["invariants"] = serde_json::to_value(&invs).expect("serializable");
        verdicts.push(same);
    }
    if oracle != Oracle::Scott {
        let f = isomorphic_bruteforce(&ma, &mb)?;
        out["brute"] = json!(f.is_some());
        out["bijection"] = json!(f);
        verdicts.push(f.is_some());
    }
    let agree = verdicts.iter().all(|&v| v == verdicts[0]);
    out["isomorphic"] = json!(verdicts[0]);
    out["agree"] = json!(agree);
    Ok(Outcome::check(out, agree, "the Scott invariant and the brute-force oracle disagree"))
}

fn compiled_summary(c: &CompiledTheory) -> Value {
    json!({
        "source_symbols": c.source_signature().relations.len(),
        "symbols": c.signature().relations.len(),
        "subformulas": c.subformulas().len(),
        "axioms": c.axioms().len(),
        "omitted_types": c.omitted_types().len(),
    })
}

fn compile(input: &Path, sig: &Path, out: Option<&Path>, budget: &Budget) -> CliResult<Outcome> {
    let sig = read_signature(sig)?;
    let psi = read_formula(input, &sig)?;
    let c = compile_sentence_with(&psi, &sig, budget)?;
    let mut report = json!({"summary": compiled_summary(&c)});
    match out {
        Some(p) => {
            write_text(p, &render(&c.to_value()))?;
            report["written"] = json!(p.display().to_string());
        }
        None => report["compiled"] = c.to_value(),
    }
    Ok(Outcome::ok(report))
}

fn read_compiled(p: &Path) -> CliResult<CompiledTheory> {
    let v = read_json(p)?;
    CompiledTheory::from_value(&v).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
}

fn transform(input: &Path, compiled: &Path, inverse: bool, budget: &Budget) -> CliResult<Outcome> {
    let c = read_compiled(compiled)?;
    let m = read_structure(input)?;
    if inverse {
        let back = c.inverse_transform(&m)?;
        return Ok(Outcome::ok(json!({"structure": back.to_value()})));
    }
    let h = c.transform_with(&m, budget)?;
    let models = c.models_axioms(&h)?;
    let realized = c.realized_types(&h)?;
    let ok = models && realized.is_empty();
    let out = json!({
        "structure": h.to_value(),
        "models_axioms": models,
        "realized_omitted_types": realized,
    });
    Ok(Outcome::check(out, ok, "the image fails an axiom or realizes an omitted type"))
}

fn pool_spec(p: &PoolArgs, vars: usize) -> PoolSpec {
    PoolSpec {
        max_size: p.pool_size,
        vars,
        quantifiers: match p.quantifiers {
            QuantArg::None => Quantifiers::None,
            QuantArg::Single => Quantifiers::Single,
            QuantArg::Any => Quantifiers::Any,
        },
        max_formulas: p.pool_max,
    }
}

fn complete(compiled: &Path, k: usize, max_steps: usize, pool: &PoolArgs, budget: &Budget) -> CliResult<Outcome> {
    let c = read_compiled(compiled)?;
    let mut t = TheoryHandle::bounded(c.signature().clone(), c.axioms().to_vec(), k)?;
    let p = candidate_pool(&c, &pool_spec(pool, 1))?;
    let mut rounds = Vec::new();
    let mut fixpoint = false;
    for _ in 0..max_steps {
        let added = completion_step(&mut t, &c, &p, budget)?;
        if added.is_empty() {
            fixpoint = true;
            break;
        }
        rounds.push(added.iter().map(print).collect::<Vec<_>>());
    }
    let out = json!({
        "rounds": rounds,
        "steps": rounds.len(),
        "fixpoint": fixpoint,
        "axioms": t.axioms().len(),
        "pool_bound": p.spec().max_size,
        "pool_size": p.len(),
        "pool_truncated": p.truncated(),
        "semantics": format!("bounded models of size <= {k}"),
    });
    Ok(Outcome::check(out, fixpoint, format!("no fixpoint within {max_steps} steps")))
}

fn theory_for(m: &FiniteStructure, theory: &str) -> CliResult<TheoryHandle> {
    if theory == "self" {
        return Ok(TheoryHandle::complete(m.clone()));
    }
    let p = Path::new(theory);
    let v = read_json(p)?;
    TheoryHandle::from_value(&v).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
}

fn atomic(input: &Path, theory: &str, pool: &PoolArgs, tuple_len: usize, budget: &Budget) -> CliResult<Outcome> {
    let m = read_structure(input)?;
    let mut t = theory_for(&m, theory)?;
    let p = Pool::enumerate(m.signature(), &pool_spec(pool, tuple_len.max(1)))?;
    let r = is_atomic(&m, &mut t, &p, tuple_len, budget)?;
    let refuted = r.verdicts.iter().any(|v| v.verdict == Verdict::NotIsolated);
    Ok(Outcome::check(r.to_value(), !refuted, "some tuple's type is not isolated"))
}

fn build_atomic(input: &Path, steps: usize, theory: &str, pool: &PoolArgs, tuple_len: usize, budget: &Budget) -> CliResult<Outcome> {
    let m = read_structure(input)?;
    let mut t = theory_for(&m, theory)?;
    let p = Pool::enumerate(m.signature(), &pool_spec(pool, tuple_len.max(2)))?;
    let (set, r) = build_atomic_set(&m, &mut t, &p, steps, tuple_len, budget)?;
    let mut out = r.to_value();
    out["set"] = json!(set);
    let ok = r.complete && r.verdicts.iter().all(|v| v.verdict != Verdict::NotIsolated);
    Ok(Outcome::check(out, ok, "the construction stopped before closure or produced a non-isolated tuple"))
}

fn mode_of(m: &ModeArgs) -> RefineMode {
    RefineMode {
        pairs: match m.pairs {
            PairsArg::All => Pairs::All,
            PairsArg::Some => Pairs::Some,
        },
        interval: m.interval,
        vertex_strict: m.vertex_strict,
        literal: m.literal,
    }
}

fn refine(input: &Path, base: BaseArg, s: Option<&str>, emit: bool, stage: Option<usize>, mode: &ModeArgs) -> CliResult<Outcome> {
    let (o, table) = read_order(input)?;
    let rep = validate_kmu(&o, &table);
    if !rep.ok {
        return Ok(Outcome::check(json!({"validation": rep.to_value()}), false, "the colored order fails validation"));
    }
    let e: ColorEquivalence = match base {
        BaseArg::E0 => endpoint_equivalence(&o, None)?,
        BaseArg::E1 => e1(&o),
        BaseArg::Es => {
            let s = s.ok_or_else(|| Failure::Usage("--base es needs --s".into()))?;
            endpoint_equivalence(&o, Some(&parse_list(s)?))?
        }
    };
    let r = refine_fixpoint(&o, &e, mode_of(mode))?;
    let mut out = r.to_value();
    out["validation"] = rep.to_value();
    out["nonuniform_colors"] = json!(r.nonuniform(&o));
    let mut ok = true;
    if emit {
        let st = stage.unwrap_or(r.alpha);
        let fs = emit_class_formulas(&o, &r, st)?;
        ok = fs.iter().all(|f| f.exact());
        out["formulas"] = json!({
            "stage": st,
            "classes": fs.iter().map(|f| f.to_value(PRINT_LIMIT)).collect::<Vec<_>>(),
        });
    }
    Ok(Outcome::check(out, ok, "some emitted formula does not define its class on this order"))
}

fn classify_cmd(input: &Path, mode: &ModeArgs) -> CliResult<Outcome> {
    let (o, table) = read_order(input)?;
    let c = classify(&o, &table, mode_of(mode))?;
    let ok = c.validation.ok;
    Ok(Outcome::check(c.to_value(&o), ok, "the colored order fails validation"))
}

fn order(op: &OrderOp) -> CliResult<Outcome> {
    match op {
        OrderOp::Encode { input } => {
            let (o, _) = read_order(input)?;
            let t = encode_order(&o);
            Ok(Outcome::ok(json!({"term": t.to_value(), "text": t.to_string()})))
        }
        OrderOp::Recover { input, term, formulas } => {
            let t = match (input, term) {
                (Some(p), None) => OrderTerm::from_value(&read_json(p)?)?,
                (None, Some(s)) => s.parse::<OrderTerm>()?,
                _ => return Err(Failure::Usage("give the term with --in or --term".into())),
            };
            let normalized = t.normalize();
            let out = match formulas {
                None => {
                    let (n, colors) = recover_order(&t)?;
                    json!({"n": n, "vertex_colors": colors, "normalized": normalized.to_value()})
                }
                Some(p) => {
                    let v = read_json(p)?;
                    let defs = read_defs(&v).map_err(|e| match e {
                        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", p.display())),
                        f => f,
                    })?;
                    let o = recover_order_with_edges(&t, &defs)?;
                    let mut v = o.to_value(None);
                    v["normalized"] = normalized.to_value();
                    v
                }
            };
            Ok(Outcome::ok(out))
        }
    }
}

fn read_defs(v: &Value) -> CliResult<Vec<(u32, scottbench_core::logic::Formula)>> {
    let obj = v.as_object().ok_or_else(|| Failure::Usage("expected an object of color: formula".into()))?;
    obj.iter()
        .map(|(k, f)| {
            let j: u32 = k.parse().map_err(|_| Failure::Usage(format!("`{k}` is not a color id")))?;
            let text = f.as_str().ok_or_else(|| Failure::Usage(format!("formula for {k} is not a string")))?;
            Ok((j, parse_formula_infer(text)?.0))
        })
        .collect()
}

fn parse_rels(s: &str) -> CliResult<Signature> {
    let rels = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (name, ar) = p
                .split_once(':')
                .ok_or_else(|| Failure::Usage(format!("`{p}` is not NAME:ARITY")))?;
            let ar: usize = ar.trim().parse().map_err(|_| Failure::Usage(format!("bad arity in `{p}`")))?;
            Ok((name.trim().to_string(), ar))
        })
        .collect::<CliResult<BTreeMap<String, usize>>>()?;
    Ok(Signature { relations: rels })
}

/// Run a generator; structures come back as JSON with a `"structure"` field
/// when the generator produces one.
pub fn generate(what: &GenWhat, seed: u64) -> CliResult<Value> {
    Ok(match what {
        GenWhat::Example53 { depth, grid, vertex_colors } => {
            let ex = gen_example_53(*depth, *grid, *vertex_colors)?;
            let mut v = ex.to_value();
            v["validation"] = validate_kmu(&ex.order, &ex.table).to_value();
            v["rule_mismatches"] = json!(ex.rule_mismatches());
            v["monochromatic_triples"] = json!(ex.monochromatic_triples());
            v
        }
        GenWhat::Superstable { levels, max_size } => {
            let s = gen_example_superstable(*levels, *max_size)?;
            let mut v = s.to_value();
            v["violations"] = json!(check_superstable(&s, *levels)?);
            v
        }
        GenWhat::RandomStructure { rels, n, density } => {
            let sig = parse_rels(rels)?;
            random_structure(&sig, *n, *density, seed)?.to_value()
        }
        GenWhat::RandomOrder { n, vertex_colors, edge_colors } => {
            let (o, t) = random_colored_order(*n, *vertex_colors, *edge_colors, &mut rng(seed));
            o.to_value(Some(&t))
        }
    })
}

/// The structure a generator produces under `seed`, for the probe.
pub fn generate_structure(what: &GenWhat, seed: u64) -> CliResult<FiniteStructure> {
    Ok(match what {
        GenWhat::Example53 { depth, grid, vertex_colors } => {
            gen_example_53(*depth, *grid, *vertex_colors)?.order.to_structure(true, true)
        }
        GenWhat::Superstable { levels, max_size } => gen_example_superstable(*levels, *max_size)?,
        GenWhat::RandomStructure { rels, n, density } => random_structure(&parse_rels(rels)?, *n, *density, seed)?,
        GenWhat::RandomOrder { n, vertex_colors, edge_colors } => {
            let (o, _) = random_colored_order(*n, *vertex_colors, *edge_colors, &mut rng(seed));
            o.to_structure(true, true)
        }
    })
}

pub fn trial_seed(base: u64, i: usize) -> u64 {
    derive_seed(base, i as u64)
}
