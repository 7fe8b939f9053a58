mod common;

use std::collections::BTreeSet;

use common::*;
use partloop_core::dsl::kernels::{LJ_KERNEL, PAIR_SQUARES_KERNEL};
use partloop_core::dsl::{bind_constants, parse, CompiledKernel, DslKernel, PlanEntry, Site, Usage};
use partloop_core::engine::{Env, LoopKind, SlotInfo, SlotKind};
use partloop_core::sim::{LjForce, LjParams, FORCE};
use partloop_core::{
    AccessBinding, AccessMode, Backend, Constant, Domain, Dtype, Engine, Error, ParticleDat, ScalarArray, State,
};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn pair_squares_two_particles() {
    let k = DslKernel::from_code(PAIR_SQUARES_KERNEL, &[Constant::new("dimension", 3i64)]).unwrap();
    let mut s = State::with_positions(Domain::cubic(10.0).unwrap(), &[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
    s.attach("b", ParticleDat::zeros("b", 2, 1, Dtype::Float64).unwrap())
        .unwrap();
    for backend in Backend::ALL {
        let mut total = ScalarArray::float("S", 1);
        let mut b = [
            AccessBinding::dat_as("a", "r", AccessMode::Read),
            AccessBinding::dat("b", AccessMode::IncZero),
            AccessBinding::global("S", &mut total, AccessMode::IncZero),
        ];
        Engine::serial().pair_loop(&mut s, &k, &mut b, 3.0, backend).unwrap();
        assert_eq!(s.dat("b").unwrap().as_f64().unwrap(), [1.0, 1.0]);
        assert_eq!(total.value(0), 2.0);
    }
}

#[test]
fn pair_squares_hand_values_off_axis() {
    // |a0 - a1|^2 = 1 + 4 + 4 = 9, so b = 9 each and S = 2 * 81.
    let k = DslKernel::from_code(PAIR_SQUARES_KERNEL, &[Constant::new("dimension", 3i64)]).unwrap();
    let mut s = State::with_positions(Domain::cubic(20.0).unwrap(), &[[1.0; 3], [2.0, 3.0, 3.0]]).unwrap();
    s.attach("b", ParticleDat::zeros("b", 2, 1, Dtype::Float64).unwrap())
        .unwrap();
    let mut total = ScalarArray::float("S", 1);
    let mut b = [
        AccessBinding::dat_as("a", "r", AccessMode::Read),
        AccessBinding::dat("b", AccessMode::IncZero),
        AccessBinding::global("S", &mut total, AccessMode::IncZero),
    ];
    Engine::serial()
        .pair_loop(&mut s, &k, &mut b, 5.0, Backend::AllPairs)
        .unwrap();
    assert_eq!(s.dat("b").unwrap().as_f64().unwrap(), [9.0, 9.0]);
    assert_eq!(total.value(0), 162.0);
}

#[test]
fn binding_modes_are_checked_before_running() {
    let params = LjParams::default();
    let k = DslKernel::from_code(LJ_KERNEL, &params.constants()).unwrap();
    let mut s = random_state(10, 10.0, 0);
    s.attach(FORCE, ParticleDat::zeros(FORCE, 10, 3, Dtype::Float64).unwrap())
        .unwrap();
    let mut u = ScalarArray::float("u", 1);
    let mut b = [
        AccessBinding::dat("r", AccessMode::Read),
        AccessBinding::dat(FORCE, AccessMode::Read),
        AccessBinding::global("u", &mut u, AccessMode::IncZero),
    ];
    let err = Engine::serial()
        .pair_loop(&mut s, &k, &mut b, 2.5, Backend::AllPairs)
        .unwrap_err();
    assert!(
        matches!(err, Error::AccessViolation { ref label, mode: AccessMode::Read, .. } if label == FORCE),
        "{err}"
    );
}

#[test]
fn dsl_lj_reproduces_native_forces() {
    let params = LjParams::default();
    let native = LjForce::native(params).unwrap();
    let dsl = LjForce::dsl(params).unwrap();
    let engine = Engine::serial();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut s = lj_state(5, 0.8442, 1.0, 0.15, seed);
        let backend = Backend::ALL[seed as usize % 3];
        let pe_native = native.compute(&engine, &mut s, backend, true).unwrap().unwrap();
        let f_native = s.dat(FORCE).unwrap().as_f64().unwrap().to_vec();
        let pe_dsl = dsl.compute(&engine, &mut s, backend, true).unwrap().unwrap();
        let f_dsl = s.dat(FORCE).unwrap().as_f64().unwrap();
        for (a, b) in f_native.chunks_exact(3).zip(f_dsl.chunks_exact(3)) {
            let scale = norm2([a[0], a[1], a[2]]).sqrt().max(f64::MIN_POSITIVE);
            for d in 0..3 {
                worst = worst.max((a[d] - b[d]).abs() / scale);
            }
        }
        assert!((pe_native - pe_dsl).abs() <= 1e-12 * pe_native.abs());
    }
    assert!(worst <= 1e-12, "worst relative difference {worst}");
}

/// Test environment: answers every access with a fixed function of the
/// slot and component and records what happened.
#[derive(Default)]
struct Recorder {
    seen: BTreeSet<(usize, Site, Usage)>,
    stores: Vec<(usize, Site, usize, u64)>,
    inputs: Vec<f64>,
}

impl Recorder {
    fn value(&self, slot: usize, site: Site, r: usize) -> f64 {
        let base = self.inputs.get(slot * 8 + r).copied().unwrap_or(0.5);
        if site == Site::J {
            base * 0.75 - 0.125
        } else {
            base
        }
    }

    fn load(&mut self, slot: usize, site: Site, r: usize) -> partloop_core::Result<f64> {
        self.seen.insert((slot, site, Usage::Read));
        Ok(self.value(slot, site, r))
    }

    fn store(&mut self, slot: usize, site: Site, usage: Usage, r: usize, x: f64) -> partloop_core::Result<()> {
        self.seen.insert((slot, site, usage));
        self.stores.push((slot, site, r, x.to_bits()));
        Ok(())
    }
}

impl Env for Recorder {
    fn read_i(&mut self, slot: usize, r: usize) -> partloop_core::Result<f64> {
        self.load(slot, Site::I, r)
    }
    fn read_j(&mut self, slot: usize, r: usize) -> partloop_core::Result<f64> {
        self.load(slot, Site::J, r)
    }
    fn write_i(&mut self, slot: usize, r: usize, x: f64) -> partloop_core::Result<()> {
        self.store(slot, Site::I, Usage::Write, r, x)
    }
    fn inc_i(&mut self, slot: usize, r: usize, x: f64) -> partloop_core::Result<()> {
        self.store(slot, Site::I, Usage::Inc, r, x)
    }
    fn read_global(&mut self, slot: usize, r: usize) -> partloop_core::Result<f64> {
        self.load(slot, Site::Global, r)
    }
    fn write_global(&mut self, slot: usize, r: usize, x: f64) -> partloop_core::Result<()> {
        self.store(slot, Site::Global, Usage::Write, r, x)
    }
    fn inc_global(&mut self, slot: usize, r: usize, x: f64) -> partloop_core::Result<()> {
        self.store(slot, Site::Global, Usage::Inc, r, x)
    }
}

const FUZZ_SLOTS: [(&str, SlotKind); 4] = [
    ("p", SlotKind::Particle),
    ("q", SlotKind::Particle),
    ("g", SlotKind::Global),
    ("h", SlotKind::Global),
];

fn fuzz_slots() -> Vec<SlotInfo<'static>> {
    FUZZ_SLOTS
        .iter()
        .map(|&(label, kind)| SlotInfo {
            label,
            kind,
            mode: AccessMode::ReadWrite,
            ncomp: 4,
            dtype: Dtype::Float64,
        })
        .collect()
}

fn lj_slots() -> Vec<SlotInfo<'static>> {
    let slot = |label, kind, mode| SlotInfo {
        label,
        kind,
        mode,
        ncomp: if kind == SlotKind::Global { 1 } else { 3 },
        dtype: Dtype::Float64,
    };
    vec![
        slot("r", SlotKind::Particle, AccessMode::Read),
        slot("F", SlotKind::Particle, AccessMode::IncZero),
        slot("u", SlotKind::Global, AccessMode::IncZero),
    ]
}

fn run(kernel: &CompiledKernel, slots: &[SlotInfo<'_>], inputs: &[f64]) -> Recorder {
    let map = kernel.link(slots, LoopKind::Pair).unwrap();
    let mut env = Recorder {
        inputs: inputs.to_vec(),
        ..Recorder::default()
    };
    kernel.eval(&map, &mut env).unwrap();
    env
}

#[test]
fn binding_constants_preserves_results_bitwise() {
    let ast = parse(LJ_KERNEL).unwrap();
    let mut r = rng(17);
    for trial in 0..200 {
        let params = LjParams::new(0.5 + r.random::<f64>(), 0.8 + 0.4 * r.random::<f64>(), 2.5).unwrap();
        let constants = params.constants();
        let bound = CompiledKernel::compile(&bind_constants(&ast, &constants).unwrap(), &[]).unwrap();
        let env = CompiledKernel::compile(&ast, &constants).unwrap();
        let inputs: Vec<f64> = (0..24).map(|_| 4.0 * r.random::<f64>()).collect();
        let a = run(&bound, &lj_slots(), &inputs);
        let b = run(&env, &lj_slots(), &inputs);
        assert_eq!(a.stores, b.stores, "trial {trial}");
    }
}

fn expr() -> impl Strategy<Value = String> {
    let comp = 0usize..4;
    let leaf = prop_oneof![
        (-4.0f64..4.0).prop_map(|x| format!("{x:.3}")),
        Just("x".to_string()),
        Just("y".to_string()),
        (
            prop_oneof![Just("p"), Just("q")],
            prop_oneof![Just("i"), Just("j")],
            comp.clone()
        )
            .prop_map(|(l, s, c)| format!("{l}.{s}[{c}]")),
        comp.prop_map(|c| format!("g[{c}]")),
        Just("h".to_string()),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (
                inner.clone(),
                prop_oneof![Just("+"), Just("-"), Just("*"), Just("/")],
                inner.clone()
            )
                .prop_map(|(a, op, b)| format!("({a} {op} {b})")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("sqrt({a} * {a})")),
            (inner.clone(), inner.clone(), inner.clone(), inner)
                .prop_map(|(a, b, c, d)| format!("(({a} < {b}) ? {c} : {d})")),
        ]
    })
}

fn stmt() -> impl Strategy<Value = String> {
    let op = prop_oneof![Just("="), Just("+="), Just("-="), Just("*="), Just("/=")];
    let simple = prop_oneof![
        (prop_oneof![Just("x"), Just("y")], op.clone(), expr()).prop_map(|(v, op, e)| format!("{v} {op} {e};")),
        (prop_oneof![Just("p"), Just("q")], 0usize..4, op.clone(), expr())
            .prop_map(|(l, c, op, e)| format!("{l}.i[{c}] {op} {e};")),
        (0usize..4, op, expr()).prop_map(|(c, op, e)| format!("g[{c}] {op} {e};")),
        expr().prop_map(|e| format!("h += {e};")),
        expr().prop_map(|e| format!("for (int k = 0; k < 3; ++k) {{ p.i[k] += {e}; }}")),
    ];
    simple.prop_recursive(2, 8, 3, |inner| {
        (
            expr(),
            expr(),
            prop::collection::vec(inner.clone(), 0..3),
            prop::collection::vec(inner, 0..3),
        )
            .prop_map(|(a, b, then, otherwise)| {
                format!(
                    "if ({a} < {b}) {{ {} }} else {{ {} }}",
                    then.join(" "),
                    otherwise.join(" ")
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn static_plan_covers_every_runtime_access(
        body in prop::collection::vec(stmt(), 0..8),
        inputs in prop::collection::vec(-2.0f64..2.0, 32),
    ) {
        let code = format!("double x = 0.5; double y = -1.25;\n{}", body.join("\n"));
        let kernel = CompiledKernel::compile(&parse(&code).unwrap(), &[]).unwrap();
        let slots = fuzz_slots();
        let env = run(&kernel, &slots, &inputs);
        let plan: BTreeSet<&PlanEntry> = kernel.plan().iter().collect();
        for (slot, site, usage) in env.seen {
            let entry = PlanEntry { label: slots[slot].label.to_string(), site, usage };
            prop_assert!(plan.contains(&entry), "{entry:?} missing from plan for\n{code}");
        }
    }
}
