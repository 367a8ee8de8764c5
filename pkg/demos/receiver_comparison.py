#!/usr/bin/env python3
"""Compare anti-jamming receivers: metasurface panels versus zero-forcing.

Three receivers face the same jammed scene:

  none          a conventional antenna per panel center, maximal-ratio
                combining that ignores the jammer entirely
  zero_forcing  the same antennas, but the combiner projects the desired
                channel onto the orthogonal complement of the jammer's
                direct path before combining
  proposed      the full metasurface system (48 reconfigurable elements
                across three panels) under a random, untrained control
                sequence

The jamming signal reaches every receiver twice: on the direct line-of-sight
path and reflected off the occupied grid cells.  Zero-forcing nulls the
direct path but the diffuse reflected component survives, so its SINR still
degrades as the jam power rises.  The metasurface aperture collects far more
signal energy, which is why even an untrained control sequence clears both
conventional receivers; training the control policy widens the gap further.

Runs in a few seconds; 300 trials per cell, all draws seeded and paired
across methods and powers.
"""

import numpy as np

from metasense import ControlSequence, ExperimentConfig, build_environment, comparison_table

cfg = ExperimentConfig()
env = build_environment(cfg)
rng = np.random.default_rng(0)
configs = rng.integers(1, cfg.n_states + 1, size=(cfg.n_frames, cfg.n_rf, cfg.n_elements))
ctrl = ControlSequence(configs=configs.astype(np.int16), n_states=cfg.n_states)

powers = [100.0, 200.0, 300.0]
table = comparison_table(cfg, ctrl, powers, n_trials=300, seed=0, env=env)

print(f"{'jam power':>12s} | {'none':>10s} | {'zero_forcing':>12s} | {'proposed':>10s}")
print("-" * 55)
for power in powers:
    none_db = table.lookup("none", power)
    zf_db = table.lookup("zero_forcing", power)
    prop_db = table.lookup("proposed", power)
    print(f"{power:>9.0f} mW | {none_db:>7.2f} dB | {zf_db:>9.2f} dB | "
          f"{prop_db:>7.2f} dB")

print()
for power in powers:
    assert table.lookup("proposed", power) > table.lookup("zero_forcing", power)
    assert table.lookup("zero_forcing", power) > table.lookup("none", power)
print("ordering holds at every power: proposed > zero_forcing > none")
print("\nCSV form (byte-deterministic for a fixed seed):\n")
print(table.to_csv())
