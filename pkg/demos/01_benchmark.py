"""The 48-launch benchmark: four organizations learn each other's services.

Four organizations of six PLCs each interleave 12 operator launches apiece.
The first request to a peer pays a full Contract Net negotiation
(NewOverlap); later requests ride the established link (ExtendOverlap) or
find the descriptor already in the local directory (Local / SharedAlready).
"""

from orgscada import hop_count_oracle, make_benchmark, render_table, run

result = run(make_benchmark())

print(render_table(result.report, "text"))
print()
print("per-class summary (ms):")
for path, stats in result.report.summary().items():
    print(
        f"  {path:14s} n={stats['count']:2d} "
        f"mean={stats['mean']:6.1f} min={stats['min']:3d} max={stats['max']:3d}"
    )

print()
print("every row equals hops x 100 ms per the protocol oracle:")
bad = [
    r
    for r in result.report.rows
    if r.t_service_ms != hop_count_oracle(r.path_class) * 100
]
print(f"  violations: {len(bad)}")
