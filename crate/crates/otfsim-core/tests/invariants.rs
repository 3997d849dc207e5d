//! Cross-module invariant sweeps that exercise the library the way the
//! harness does, at sizes the unit tests keep small.

use otfsim_core::block::{gram, DiagBlockMat};
use otfsim_core::counter::OpCounter;
use otfsim_core::{rng, C64};

use rand::Rng;

/// The recursive inverse agrees with the dense oracle across 100 random
/// instances spanning N_t in {2,3,4}, MN in {4,8,16}, rho in {0, 0.1, 1}.
#[test]
fn inversion_sweep_against_dense_oracle() {
    let shapes = [(2usize, 4usize), (3, 8), (4, 16), (2, 16), (3, 4)];
    let rhos = [0.0, 0.1, 1.0];
    let mut instances = 0usize;
    for (case, &(nt, mn)) in shapes.iter().enumerate() {
        for trial in 0..20u64 {
            let rho = rhos[(trial as usize) % rhos.len()];
            let mut r = rng::indexed_stream(0xdef1, "inv-sweep", &[case as u64, trial]);
            let d = DiagBlockMat::from_fn(nt + 2, nt, mn, |_, _| {
                (0..mn)
                    .map(|_| C64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5))
                    .collect()
            });
            let mut c = OpCounter::new();
            let g = gram(&d, rho, &mut c).unwrap();
            let fast = g.invert(&mut c).unwrap().dense_expand();
            let dense = g.inner().dense_expand().invert().unwrap();
            let diff = fast.add_scaled(&dense, C64::new(-1.0, 0.0)).fro_norm();
            assert!(
                diff <= 1e-8 * dense.fro_norm(),
                "case {case} trial {trial} rho {rho}: {diff:.2e}"
            );
            instances += 1;
        }
    }
    assert_eq!(instances, 100);
}
