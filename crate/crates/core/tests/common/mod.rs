// SPDX-License-Identifier: Apache-2.0

//! Shared helpers for the integration tests: fixture loading, random
//! stimulus, random netlist and FSM generators, and exhaustive oracles.

#![allow(dead_code)]

pub mod interp;

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::{Path, PathBuf};

use rand::Rng;
use rtlbench::frontend::{parse, Direction, SourceUnit};
use rtlbench::netlist::{elaborate, Aig, Bits, Lit, Netlist, Node, PortBits, PortInfo, Register, SimTrace};
use rtlbench::pipeline::{Config, ShuttleSource};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// `(module name, source)` for every file in the module suite, sorted by name.
pub fn fixture_modules() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(fixtures_dir().join("modules"))
        .expect("fixture module directory")
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "v").then(|| {
                let name = p.file_stem().unwrap().to_string_lossy().into_owned();
                (name, std::fs::read_to_string(&p).unwrap())
            })
        })
        .collect();
    out.sort();
    out
}

pub fn parse_fixture(src: &str) -> SourceUnit {
    parse(src).unwrap_or_else(|e| panic!("fixture does not parse: {e}"))
}

pub fn elaborate_fixture(src: &str, top: &str) -> Netlist {
    elaborate(&parse_fixture(src), top, &BTreeMap::new()).unwrap_or_else(|e| panic!("{top}: {e}"))
}

/// The fixture build configuration with absolute shuttle roots.
pub fn fixture_config() -> Config {
    let path = fixtures_dir().join("fixture.toml");
    let mut cfg = Config::load(&path).expect("fixture config");
    for ShuttleSource { root, .. } in &mut cfg.shuttles {
        if root.is_relative() {
            *root = fixtures_dir().join(&*root);
        }
    }
    cfg
}

// ------------------------------------------------------------- stimulus

fn is_reset_name(name: &str) -> bool {
    let l = name.to_ascii_lowercase();
    l.contains("rst") || l.contains("reset")
}

fn active_low(name: &str) -> bool {
    let l = name.to_ascii_lowercase();
    l.ends_with('n') || l.ends_with("_b") || l.ends_with("_l") || l.starts_with('n')
}

/// One random value per data input. Reset-like inputs are asserted about
/// one cycle in sixteen so that designs get to leave their reset state.
pub fn random_inputs(net: &Netlist, rng: &mut impl Rng) -> BTreeMap<String, Bits> {
    net.inputs
        .iter()
        .map(|p| {
            let bits = if p.bits.len() == 1 && is_reset_name(&p.name) {
                let asserted = rng.gen_ratio(1, 16);
                vec![asserted != active_low(&p.name)]
            } else {
                (0..p.bits.len()).map(|_| rng.gen()).collect()
            };
            (p.name.clone(), Bits(bits))
        })
        .collect()
}

pub fn random_stimulus(net: &Netlist, cycles: usize, rng: &mut impl Rng) -> SimTrace {
    SimTrace {
        cycles: (0..cycles).map(|_| random_inputs(net, rng)).collect(),
    }
}

// ------------------------------------------------------ netlist building

fn lit_of(val: &[u64], l: Lit) -> u64 {
    let v = val[l.var() as usize];
    if l.is_neg() {
        !v
    } else {
        v
    }
}

/// Copies every AND node of `src` into `dst` after the caller has mapped
/// the sources. `flip` mutates one AND node, as in [`mutate_and`].
fn copy_ands(src: &Aig, dst: &mut Aig, map: &mut [Lit], flip: Option<(u32, u8)>) {
    for (v, n) in src.nodes().iter().enumerate() {
        if let Node::And(a, b) = *n {
            let mut la = map[a.var() as usize] ^ a.is_neg();
            let mut lb = map[b.var() as usize] ^ b.is_neg();
            if let Some((fv, which)) = flip {
                if fv as usize == v {
                    if which & 1 != 0 {
                        la = !la;
                    }
                    if which & 2 != 0 {
                        lb = !lb;
                    }
                }
            }
            map[v] = match flip {
                Some((fv, 4)) if fv as usize == v => !dst.and(!la, !lb),
                _ => dst.and(la, lb),
            };
        }
    }
}

/// Fresh AIG with the same sources as `net`, in the same order.
fn clone_sources(net: &Netlist) -> (Aig, Vec<Lit>) {
    let mut g = Aig::new();
    let mut map = vec![Lit::FALSE; net.aig.len()];
    for (v, n) in net.aig.nodes().iter().enumerate() {
        if matches!(n, Node::Input(_) | Node::Latch(_)) {
            map[v] = g.add_source(*n);
        }
    }
    (g, map)
}

fn with_logic(net: &Netlist, aig: Aig, tr: impl Fn(Lit) -> Lit, src: &[Lit]) -> Netlist {
    let ports = |ps: &[PortBits], f: &dyn Fn(Lit) -> Lit| -> Vec<PortBits> {
        ps.iter()
            .map(|p| PortBits {
                name: p.name.clone(),
                signed: p.signed,
                bits: p.bits.iter().map(|l| f(*l)).collect(),
            })
            .collect()
    };
    Netlist {
        top: net.top.clone(),
        ports: net.ports.clone(),
        inputs: ports(&net.inputs, &|l| src[l.var() as usize] ^ l.is_neg()),
        outputs: ports(&net.outputs, &tr),
        registers: net
            .registers
            .iter()
            .map(|r| Register {
                name: r.name.clone(),
                var: src[r.var as usize].var(),
                next: tr(r.next),
                reset: r.reset,
            })
            .collect(),
        aig,
        clock: net.clock.clone(),
        notes: net.notes.clone(),
    }
}

/// `net` with one fan-in of AND node `var` inverted (`which`: 1 left,
/// 2 right, 3 both) or, with `which` 4, the AND turned into an OR.
pub fn mutate_and(net: &Netlist, var: u32, which: u8) -> Netlist {
    let (mut g, mut map) = clone_sources(net);
    let src = map.clone();
    copy_ands(&net.aig, &mut g, &mut map, Some((var, which)));
    with_logic(net, g, |l| map[l.var() as usize] ^ l.is_neg(), &src)
}

/// Equivalent rewrite: every output and next-state function becomes
/// `x ? f|x=1 : f|x=0` for the input bit `x` at flat index `input`.
pub fn shannon_rewrite(net: &Netlist, input: usize) -> Netlist {
    let (mut g, map) = clone_sources(net);
    let x_var = net.input_bits()[input].1.var();
    let x = map[x_var as usize];
    let mut hi = map.clone();
    let mut lo = map.clone();
    hi[x_var as usize] = Lit::TRUE;
    lo[x_var as usize] = Lit::FALSE;
    copy_ands(&net.aig, &mut g, &mut hi, None);
    copy_ands(&net.aig, &mut g, &mut lo, None);
    let mut roots: Vec<Lit> = net.outputs.iter().flat_map(|p| p.bits.iter().copied()).collect();
    roots.extend(net.registers.iter().map(|r| r.next));
    let mut done: BTreeMap<Lit, Lit> = BTreeMap::new();
    for r in roots {
        let pos = Lit::new(r.var(), false);
        if !done.contains_key(&pos) {
            let t = hi[pos.var() as usize];
            let e = lo[pos.var() as usize];
            let m = g.mux(x, t, e);
            done.insert(pos, m);
        }
    }
    with_logic(net, g, |l| done[&Lit::new(l.var(), false)] ^ l.is_neg(), &map)
}

/// AND node variables of `net`.
pub fn and_vars(net: &Netlist) -> Vec<u32> {
    net.aig
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, n)| matches!(n, Node::And(..)))
        .map(|(v, _)| v as u32)
        .collect()
}

/// Random combinational netlist over `n_inputs` one-bit inputs.
pub fn random_comb(rng: &mut impl Rng, n_inputs: usize, n_gates: usize, n_outputs: usize) -> Netlist {
    random_machine(rng, "rc", n_inputs, 0, n_gates, n_outputs)
}

/// Random Mealy machine: `n_state` registers named `s0..`, one-bit inputs
/// `i0..` and outputs `o0..`, all driven by random AND logic.
pub fn random_machine(
    rng: &mut impl Rng,
    top: &str,
    n_inputs: usize,
    n_state: usize,
    n_gates: usize,
    n_outputs: usize,
) -> Netlist {
    let mut g = Aig::new();
    let mut pool = Vec::new();
    let mut inputs = Vec::new();
    let mut ports = Vec::new();
    if n_state > 0 {
        ports.push(PortInfo {
            name: "clk".into(),
            direction: Direction::In,
            width: 1,
        });
    }
    for i in 0..n_inputs {
        let l = g.add_source(Node::Input(i as u32));
        pool.push(l);
        let name = format!("i{i}");
        ports.push(PortInfo {
            name: name.clone(),
            direction: Direction::In,
            width: 1,
        });
        inputs.push(PortBits {
            name,
            signed: false,
            bits: vec![l],
        });
    }
    let mut latches = Vec::new();
    for r in 0..n_state {
        let l = g.add_source(Node::Latch(r as u32));
        pool.push(l);
        latches.push(l);
    }
    let first_gate = pool.len();
    for _ in 0..n_gates {
        loop {
            let a = pool[rng.gen_range(0..pool.len())] ^ rng.gen::<bool>();
            let b = pool[rng.gen_range(0..pool.len())] ^ rng.gen::<bool>();
            let l = g.and(a, b);
            if !l.is_const() && !pool.contains(&l) && !pool.contains(&!l) {
                pool.push(l);
                break;
            }
        }
    }
    let pick = |rng: &mut dyn rand::RngCore| {
        let lo = if pool.len() > first_gate + 4 { pool.len() - (pool.len() - first_gate) / 2 } else { 0 };
        pool[rng.gen_range(lo..pool.len())] ^ rng.gen::<bool>()
    };
    let registers = latches
        .iter()
        .enumerate()
        .map(|(r, l)| Register {
            name: format!("s{r}"),
            var: l.var(),
            next: pick(rng),
            reset: rng.gen(),
        })
        .collect();
    let outputs = (0..n_outputs)
        .map(|o| {
            let name = format!("o{o}");
            ports.push(PortInfo {
                name: name.clone(),
                direction: Direction::Out,
                width: 1,
            });
            PortBits {
                name,
                signed: false,
                bits: vec![pick(rng)],
            }
        })
        .collect();
    Netlist {
        top: top.into(),
        ports,
        aig: g,
        inputs,
        outputs,
        registers,
        clock: (n_state > 0).then(|| "clk".to_string()),
        notes: Vec::new(),
    }
}

/// Same machine with register `r` stored inverted: its reset value, every
/// read and its next-state function are complemented.
pub fn invert_register(net: &Netlist, r: usize) -> Netlist {
    let (mut g, mut map) = clone_sources(net);
    let src = map.clone();
    let v = net.registers[r].var as usize;
    map[v] = !map[v];
    copy_ands(&net.aig, &mut g, &mut map, None);
    let mut out = with_logic(net, g, |l| map[l.var() as usize] ^ l.is_neg(), &src);
    out.registers[r].next = !out.registers[r].next;
    out.registers[r].reset = !out.registers[r].reset;
    out
}

pub fn rename_registers(net: &Netlist, suffix: &str) -> Netlist {
    let mut out = net.clone();
    for r in &mut out.registers {
        r.name.push_str(suffix);
    }
    out
}

// ---------------------------------------------------------------- oracles

/// Exhaustive truth table of a combinational netlist: one bit vector per
/// output bit, indexed by the flat input assignment.
pub fn truth_table(net: &Netlist) -> Vec<Vec<bool>> {
    let n = net.input_bit_count();
    assert!(n <= 20, "too many inputs for an exhaustive table");
    let rows = 1usize << n;
    let mut table = vec![Vec::with_capacity(rows); net.output_bit_count()];
    let mut base = 0;
    while base < rows {
        let words: Vec<u64> = (0..n)
            .map(|i| (0..64).fold(0u64, |acc, lane| acc | (((base + lane) >> i & 1) as u64) << lane))
            .collect();
        let val = net.eval_lanes(&words, &[]);
        for (k, (_, l)) in net.output_bits().into_iter().enumerate() {
            let w = lit_of(&val, l);
            for lane in 0..64.min(rows - base) {
                table[k].push(w >> lane & 1 == 1);
            }
        }
        base += 64;
    }
    table
}

fn eval_single(net: &Netlist, inputs: &[bool], state: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let w = |b: &bool| if *b { !0u64 } else { 0 };
    let (o, s) = net.step_lanes(&inputs.iter().map(w).collect::<Vec<_>>(), &state.iter().map(w).collect::<Vec<_>>());
    (o.iter().map(|x| x & 1 == 1).collect(), s.iter().map(|x| x & 1 == 1).collect())
}

/// Breadth-first search over the product machine from the joint reset
/// state. Returns the shortest input sequence ending in an output mismatch.
pub fn product_distinguishing_trace(g: &Netlist, c: &Netlist) -> Option<SimTrace> {
    assert_eq!(g.input_bit_count(), c.input_bit_count());
    let n = g.input_bit_count();
    assert!(n <= 8 && g.registers.len() + c.registers.len() <= 16);
    let start = (g.reset_state(), c.reset_state());
    let mut seen: HashSet<(Vec<bool>, Vec<bool>)> = HashSet::new();
    let mut parent: Vec<(usize, usize)> = Vec::new();
    let mut nodes = vec![start.clone()];
    seen.insert(start);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let (gs, cs) = nodes[i].clone();
        for a in 0..1usize << n {
            let ins: Vec<bool> = (0..n).map(|b| a >> b & 1 == 1).collect();
            let (go, gn) = eval_single(g, &ins, &gs);
            let (co, cn) = eval_single(c, &ins, &cs);
            if go != co {
                let mut path = vec![a];
                let mut cur = i;
                while cur != 0 {
                    let (p, pa) = parent[cur - 1];
                    path.push(pa);
                    cur = p;
                }
                path.reverse();
                return Some(assignments_to_trace(g, &path));
            }
            let next = (gn, cn);
            if seen.insert(next.clone()) {
                nodes.push(next);
                parent.push((i, a));
                queue.push_back(nodes.len() - 1);
            }
        }
    }
    None
}

fn assignments_to_trace(net: &Netlist, path: &[usize]) -> SimTrace {
    SimTrace {
        cycles: path
            .iter()
            .map(|a| {
                let mut k = 0;
                net.inputs
                    .iter()
                    .map(|p| {
                        let bits = (0..p.bits.len())
                            .map(|_| {
                                let b = a >> k & 1 == 1;
                                k += 1;
                                b
                            })
                            .collect();
                        (p.name.clone(), Bits(bits))
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Whether random simulation from reset tells the two netlists apart within
/// `cycles` cycles, using `batches` x 64 parallel runs.
pub fn random_sim_differs(g: &Netlist, c: &Netlist, cycles: usize, batches: usize, rng: &mut impl Rng) -> bool {
    let n = g.input_bit_count();
    for _ in 0..batches {
        let mut gs = g.reset_lanes();
        let mut cs = c.reset_lanes();
        for _ in 0..cycles {
            let words: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
            let (go, gn) = g.step_lanes(&words, &gs);
            let (co, cn) = c.step_lanes(&words, &cs);
            if go != co {
                return true;
            }
            gs = gn;
            cs = cn;
        }
    }
    false
}
