use hytm_core::checker::{check_opacity, check_strict_serializability, Outcome, Property, verify_witness};
use hytm_core::metrics::metadata_footprint;
use hytm_core::{gen_random_schedule, run_to_completion, Algorithm, FuzzParams, History, SimConfig, TxId};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = (Algorithm, FuzzParams)> {
    (0usize..3, any::<u64>(), 1u32..6, 1u32..4, 1u32..4, 0.0f64..=1.0).prop_map(|(a, seed, n, x, ops, f)| {
        (
            Algorithm::ALL[a],
            FuzzParams {
                seed,
                n_txns: n,
                n_tobjects: x,
                ops_per_txn: ops,
                fast_fraction: f,
            },
        )
    })
}

fn run(alg: Algorithm, p: FuzzParams) -> History {
    run_to_completion(SimConfig::new(alg, p.n_tobjects), &gen_random_schedule(p).unwrap()).unwrap()
}

/// Stable reinterleaving that keeps every per-transaction order: repeatedly
/// takes the next event of a transaction picked by `picks`.
fn reinterleave(h: &History, picks: &[usize]) -> History {
    let mut queues: Vec<Vec<_>> = Vec::new();
    let mut ids: Vec<TxId> = Vec::new();
    for e in &h.events {
        match ids.iter().position(|&t| t == e.tx) {
            Some(i) => queues[i].push(e.clone()),
            None => {
                ids.push(e.tx);
                queues.push(vec![e.clone()]);
            }
        }
    }
    queues.iter_mut().for_each(|q| q.reverse());
    let mut events = Vec::new();
    let mut k = 0;
    while queues.iter().any(|q| !q.is_empty()) {
        let live: Vec<usize> = (0..queues.len()).filter(|&i| !queues[i].is_empty()).collect();
        let i = live[picks.get(k).copied().unwrap_or(0) % live.len()];
        k += 1;
        let mut e = queues[i].pop().unwrap();
        e.seq = events.len() as u64;
        events.push(e);
    }
    History {
        objects: h.objects.clone(),
        events,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn opacity_implies_strict_serializability((alg, p) in params()) {
        let h = run(alg, p);
        if check_opacity(&h, 8).unwrap().passed() {
            prop_assert!(check_strict_serializability(&h, 8).unwrap().passed());
        }
    }

    #[test]
    fn pass_witnesses_reverify((alg, p) in params()) {
        let h = run(alg, p);
        for prop in [Property::Opacity, Property::StrictSerializability] {
            let v = hytm_core::check(&h, prop, 8).unwrap();
            if let Outcome::Pass { witness, committed } = v.outcome {
                prop_assert!(verify_witness(&h, prop, &witness, &committed.into_iter().collect()));
            }
        }
    }

    #[test]
    fn replay_is_deterministic((alg, p) in params()) {
        prop_assert_eq!(run(alg, p), run(alg, p));
    }

    #[test]
    fn footprint_depends_only_on_projection(
        (alg, p) in params(),
        picks in proptest::collection::vec(any::<usize>(), 0..400),
    ) {
        let h = run(alg, p);
        let shuffled = reinterleave(&h, &picks);
        for t in 1..=u64::from(p.n_txns) {
            prop_assert_eq!(metadata_footprint(&h, TxId(t)), metadata_footprint(&shuffled, TxId(t)));
        }
    }
}
