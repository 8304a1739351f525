"""
Learning from multilevel feedback
=================================

A short run of the optimistic agent on the 5x5 map: plan against the
optimistic reward, act once, receive one level, refit.  Files land in
``demo_output/`` (CSV, JSON and two SVG curves).
"""

# %%
import numpy as np

from kfeed.harness import desk_config, emit_results, run_batch

config = desk_config(episodes=300, runs=3, out="demo_output")
batch = run_batch(config)

# %%
first, last = batch.decile_means()
print(f"estimated optimum {batch.v_star:.3f}")
print(f"mean true value: first 10% {first:.3f}, last 10% {last:.3f}")
print("mean value every 30 episodes:", np.round(batch.mean.reshape(10, -1).mean(axis=1), 3))

for name, path in emit_results(batch, config.out).items():
    print("wrote", path)
