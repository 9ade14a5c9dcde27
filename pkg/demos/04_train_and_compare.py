"""Train the joint policy on the small shell and race it against the
comparators on paired episodes.

Training length is a command-line knob; 300 episodes (the default,
~90 s) reproduces the acceptance-level result, 60 episodes gives a
quick look.
"""
import sys
import time

import numpy as np

from leosem.baselines import BaselineSpec
from leosem.config import tiny_config
from leosem.experiment import evaluate, train

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 300
cfg = tiny_config(seed=0)

t0 = time.time()
result = train(cfg, episodes=episodes)
print(f"trained {episodes} episodes in {time.time() - t0:.0f}s "
      f"({result.curve[-1]['updates']} policy updates)")

returns = [row["mean_session_return"] for row in result.curve]
w = min(50, max(len(returns) // 4, 1))
print(f"mean session return: first {w} episodes {np.mean(returns[:w]):+.2f}, "
      f"last {w} episodes {np.mean(returns[-w:]):+.2f}")

contenders = [
    ("trained policy", None, result.params),
    ("shortest path", BaselineSpec(kind="shortest_path"), None),
    ("greedy queue", BaselineSpec(kind="greedy_queue"), None),
    ("random", BaselineSpec(kind="random"), None),
    ("no relay, C=64", BaselineSpec(kind="policy_no_relay", fixed_budget=64),
     result.params),
]
print(f"\n{'policy':<16} {'delivery':>8} {'delay s':>8} {'quality':>8} {'objective':>9}")
for name, spec, params in contenders:
    bundle, _, _ = evaluate(cfg, params, episodes=30, baseline=spec)
    print(f"{name:<16} {bundle.delivery_rate:8.3f} "
          f"{(bundle.mean_delay_s if bundle.mean_delay_s else float('nan')):8.3f} "
          f"{(bundle.mean_quality if bundle.mean_quality else float('nan')):8.3f} "
          f"{(bundle.objective if bundle.objective else float('nan')):9.4f}")
