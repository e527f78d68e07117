"""
Chaotic twin experiment with censored observations
==================================================

All four assimilation schemes cycle on the 40-variable chaotic model with a
detection limit censoring roughly 80% of the observations. The point of the
comparison: explicitly assimilating the "out of range" flags (semi-qualitative
EnKF, partial deterministic EnKF) beats throwing them away (ignore scheme),
while the uncensored run bounds what is achievable.

Desk scale: 1200 steps, 3 seeds, about a minute. Bump STEPS/SEEDS for the
full five-year experiment.
"""
import numpy as np

from enkfsq import FilterKind, make_config, run_twin_experiment, write_run_csv
from enkfsq.metrics import moving_average

STEPS = 1200
SEEDS = (0, 1, 2)

print(f"{'scheme':10s} {'rmse':>7s} {'spread':>7s} {'or-frac':>8s}")
series = {}
for kind in FilterKind:
    cfg = make_config("l40", steps=STEPS, seeds=SEEDS, filter=kind)
    records = run_twin_experiment(cfg, threads=len(SEEDS))
    live = [r for r in records if not r.diverged]
    rmse = np.mean([r.metrics.time_avg_rmse for r in live])
    spread = np.mean([np.mean(r.metrics.aes_series) for r in live])
    or_frac = np.mean([r.or_counts.mean() / 40 for r in live])
    series[kind.value] = live[0]
    print(f"{kind.value:10s} {rmse:7.3f} {spread:7.3f} {or_frac:8.2f}")
    write_run_csv(f"l40_{kind.value}_seed{live[0].seed}.csv", live[0])

free = series["enkf-all"].time_avg_free_rmse
print(f"{'free run':10s} {free:7.3f}     (no assimilation)")
print("\nper-run CSVs written (step,rmse,aes,n_or)")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available; skipping the figure")
else:
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for name, rec in series.items():
        t = rec.analysis_steps
        ax.plot(t, rec.metrics.rmse_series, alpha=0.25)
        ax.plot(t, moving_average(rec.metrics.rmse_series, 25),
                label=name, lw=2)
    ax.plot(series["enkf-all"].analysis_steps,
            series["enkf-all"].free_rmse_series, "k:", label="free run")
    ax.set_xlabel("model step")
    ax.set_ylabel("forecast RMSE")
    ax.legend(ncol=3)
    fig.tight_layout()
    fig.savefig("l40_twin_experiment.png", dpi=120)
    print("wrote l40_twin_experiment.png")
