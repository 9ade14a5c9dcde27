"""Walk through the orbital geometry and the time-varying link graph.

Builds the default 10x7 shell, shows satellite motion, the +Grid
neighbor structure, and how link SNR/rate/availability evolve slot by
slot under the stochastic channel.
"""
import numpy as np

from leosem import (ChannelConfig, ChannelModel, ConstellationConfig,
                    build_constellation, link_rate)

cfg = ConstellationConfig()  # 10 planes x 7 sats at 570 km
con = build_constellation(cfg)

print(f"shell: {cfg.num_planes} planes x {cfg.sats_per_plane} sats "
      f"= {cfg.num_sats} satellites")
print(f"orbit radius {cfg.orbit_radius_km:.0f} km, period {cfg.period_s / 60:.1f} min")

p = con.position(0, 0.0)
print(f"\nsat 0 at t=0: {np.round(p.xyz, 1)} km (|r| = {np.linalg.norm(p.xyz):.1f})")
p_half = con.position(0, cfg.period_s / 2)
print(f"sat 0 half an orbit later: {np.round(p_half.xyz, 1)} km")

print("\n+Grid ports of satellite 0 (plane 0, slot 0):")
for port, neighbor in sorted(con.ports[0].items()):
    names = {0: "intra +", 1: "intra -", 2: "plane +", 3: "plane -"}
    print(f"  port {port} ({names[port]}) -> sat {neighbor}")

# Attach a channel and look at a few snapshots.
channel = ChannelModel(ChannelConfig(seed=7), con.edge_index, slot_length_s=0.1)
for slot in (0, 5, 10):
    snap = con.snapshot(slot * 0.1, channel)
    up = snap.available_edges()
    dists = [e.distance_km for e in up]
    snrs = [e.snr_db for e in up]
    print(f"\nslot {slot}: {len(up)}/{len(snap.edges)} links up, "
          f"distance {min(dists):.0f}..{max(dists):.0f} km, "
          f"SNR {min(snrs):.1f}..{max(snrs):.1f} dB")

print("\nShannon rate at a few SNRs (1 MHz):")
for snr in (-5, 0, 5, 10, 15):
    print(f"  {snr:+3d} dB -> {link_rate(snr, 1e6) / 1e6:.3f} Mbit/s")
