"""Method comparison on seeded synthetic ensembles (the desk-scale bench).

Runs every individual model (after NMS), the pooled-NMS and pooled-Soft-NMS
baselines, and weighted circle fusion over a handful of seeds, then prints
the markdown table and the paired sign tests behind the ordering claims.
Use more seeds (the acceptance suite uses 20) for tighter p-values.
"""

from circlefuse import SynthConfig, bench_table1, paired_sign_test

result = bench_table1(SynthConfig(seed=0), seeds=list(range(8)))
print(result.to_markdown())

wcf_series = result.series("wcf")
nms_series = result.series("nms-pool")
soft_series = result.series("soft-nms-pool")
avg_series = result.series("model avg.")

print()
print(f"sign test WCF > nms-pool:       p = {paired_sign_test(wcf_series, nms_series):.2e}")
print(f"sign test WCF > model avg.:     p = {paired_sign_test(wcf_series, avg_series):.2e}")
print(f"sign test nms-pool > soft-pool: p = {paired_sign_test(nms_series, soft_series):.2e}")
