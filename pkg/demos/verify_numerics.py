#!/usr/bin/env python3
"""Spot-check the numerical engines: gradients, pseudoinverse, combining.

Everything downstream (training, decoding, SINR tables) rests on three
pieces of arithmetic, each of which has an independent check:

  1. the dense-network backward pass, against central finite differences,
     on the three production architectures and a handful of random ones;
  2. the complex Moore-Penrose pseudoinverse, against its four defining
     conditions and a least-squares dominance test;
  3. the genie-aided maximal-ratio combiner, whose combined desired gain
     must be exactly one.

Prints one PASS/FAIL line per check; runs in a few seconds, all seeded.
"""

import numpy as np

from metasense import ControlSequence, ExperimentConfig, build_environment, gradient_check, init_dense_net, pinv, synthesize_batch
from metasense.beamforming import control_products
from metasense.cli import gradcheck_suite

ok = True


def check(name: str, passed: bool, detail: str) -> None:
    global ok
    ok = ok and passed
    print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


cfg = ExperimentConfig()
rng = np.random.default_rng(0)

# 1. gradients: production shapes first, then random architectures
results = gradcheck_suite(cfg, seed=0, n_archs=8)
worst = max(results, key=lambda r: r.max_rel_err)
check(
    "backprop vs finite differences",
    all(r.max_rel_err < 1e-4 for r in results),
    f"{len(results)} architectures, worst relative error "
    f"{worst.max_rel_err:.2e} ({worst.name})",
)

# 2. pseudoinverse: Moore-Penrose conditions on complex rectangular systems
worst_residual = 0.0
for trial in range(10):
    g = rng.normal(size=(20, 27)) + 1j * rng.normal(size=(20, 27))
    p = pinv(g)
    residuals = (
        np.abs(g @ p @ g - g).max(),
        np.abs(p @ g @ p - p).max(),
        np.abs((g @ p).conj().T - g @ p).max(),
        np.abs((p @ g).conj().T - p @ g).max(),
    )
    worst_residual = max(worst_residual, *residuals)
check(
    "Moore-Penrose conditions",
    worst_residual < 1e-8,
    f"10 complex 20x27 systems, worst residual {worst_residual:.2e}",
)

# the pseudoinverse solution is the least-squares minimizer: no candidate
# vector does better
g = rng.normal(size=(30, 27)) + 1j * rng.normal(size=(30, 27))
y = rng.normal(size=30) + 1j * rng.normal(size=30)
vstar = pinv(g) @ y
best = np.linalg.norm(g @ vstar - y)
candidates = vstar[None, :] + 0.1 * (
    rng.normal(size=(1000, 27)) + 1j * rng.normal(size=(1000, 27))
)
others = np.linalg.norm(candidates @ g.T - y, axis=1)
check(
    "least-squares dominance",
    bool(np.all(others >= best - 1e-12)),
    f"pinv residual {best:.6f} <= best of 1000 perturbations {others.min():.6f}",
)

# 3. combining: unit desired gain in every frame
env = build_environment(cfg)
configs = rng.integers(1, 5, size=(20, 3, 16)).astype(np.int16)
ctrl = ControlSequence(configs=configs, n_states=4)
products = control_products(ctrl, env.basis_tx, env.table)
reflection = np.zeros(27, dtype=complex)
reflection[[3, 11, 20]] = [0.9, -0.6 + 0.3j, 0.8j]
batch = synthesize_batch(
    products, reflection, tx_power_w=1.0, noise_power_w=1e-9,
    rng=np.random.default_rng(7),
)
h = np.einsum("kcm,m->kc", products, reflection)
gain_err = np.abs(np.einsum("kc,kc->k", batch.weights, h) - 1.0).max()
check(
    "genie-aided combiner unit gain",
    gain_err < 1e-12,
    f"max |w.h - 1| = {gain_err:.2e} over 20 frames",
)

print()
print("all checks passed" if ok else "CHECKS FAILED")
raise SystemExit(0 if ok else 1)
