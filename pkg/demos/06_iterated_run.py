"""
Iterating the update
====================

Each round draws a fresh family, builds moments, solves for the
coefficients and applies the update; the post-selected state seeds the next
round. Runs the same loop the ``genqcp run`` command uses. Energies are in
rescaled units; ``raw`` undoes the shift and scale (negative total profit).
"""

from pathlib import Path

from genqcp.experiment import ExperimentConfig, run_qcp

cfg = ExperimentConfig.from_toml(Path(__file__).with_name("knapsack6.toml"))
cfg.output = None

for mode in ("exact", "sampled"):
    cfg.estimation = mode
    rep = run_qcp(cfg, write=False)
    print(f"--- {mode} moments")
    print(f"start energy {rep['initial']['energy']:.4f}")
    for r in rep["iterations"]:
        print(f"  round {r['iteration']}: lambda0 {r['lambda0']:.4f}  energy {r['energy_after']:.4f}  "
              f"infeasible {r['infeasible_weight']:.2e}  p_success {r['success_probability']:.3f}"
              f"{'  (exact fallback)' if r['fallback'] else ''}")
    final = rep["final"]
    print(f"final energy {final['energy']:.4f} (raw {final['raw_energy']:.3f}), "
          f"optimum {rep['baseline']['optimum']:.4f}, "
          f"feasible shots {final['feasible_fraction']:.3f}")
