"""SNR and load sweeps of a trained policy, emitted as plot-ready CSV.

Trains briefly, then sweeps the base SNR offset (quality should rise)
and the number of concurrent flows on a queue-constrained variant
(drop rate and delay should rise).  Writes sweep tables next to this
script under demos/out/.
"""
import dataclasses
import pathlib
import sys

from leosem.config import tiny_config
from leosem.experiment import train, sweep
from leosem.metrics import write_rows_csv
from leosem.experiment import SWEEP_COLUMNS

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 150
cfg = tiny_config(seed=0)
result = train(cfg, episodes=episodes)
out_dir = pathlib.Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

snr_rows = sweep(cfg, "snr", [-5, 0, 5, 10, 15], result.params, episodes=15)
write_rows_csv(out_dir / "sweep_snr.csv", SWEEP_COLUMNS, snr_rows)
print("SNR offset sweep:")
for r in snr_rows:
    print(f"  {r['value']:+5.1f} dB: quality={r['mean_quality']:.3f} "
          f"delivery={r['delivery_rate']:.3f}")

stressed = dataclasses.replace(cfg, simulation=dataclasses.replace(
    cfg.simulation, q_max_packets=60, sessions_per_flow=6, frame_interval_s=1.5))
load_rows = sweep(stressed, "load", [1, 2, 4, 6, 8], result.params, episodes=15)
write_rows_csv(out_dir / "sweep_load.csv", SWEEP_COLUMNS, load_rows)
print("\nconcurrent-flow sweep (q_max=60):")
for r in load_rows:
    print(f"  {int(r['value'])} flows: drop={r['drop_rate']:.3f} "
          f"delay={r['mean_delay_s']:.3f}s")

print(f"\nwrote {out_dir / 'sweep_snr.csv'} and {out_dir / 'sweep_load.csv'}")
