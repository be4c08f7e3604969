"""Four schedulers on the same scenarios.

Runs a reduced version of the baseline comparison (same topology, same
job streams, every scheduler sees identical arrivals) and prints the
resulting flowtime statistics plus the per-job reduction against greedy.
"""

from insuresim import ExperimentConfig, compare_schedulers
from insuresim.experiments import MEDIUM_LAM


def main():
    config = ExperimentConfig(jobs=40, lam=MEDIUM_LAM, seeds=(0, 1))
    print(f"comparing on {config.jobs} jobs, lam={config.lam}, "
          f"seeds {list(config.seeds)} (takes about a minute)\n")
    result = compare_schedulers(config)

    print("pooled mean flowtime:")
    for name, mean in sorted(result.means.items(), key=lambda kv: kv[1]):
        bar = "#" * int(mean / 2)
        print(f"  {name:<12} {mean:8.2f}  {bar}")

    stats = {}
    for row in result.metrics:
        if row["seed"] == "all":
            stats.setdefault(row["scheduler"], {})[row["statistic"]] = row["value"]
    print("\ntail behaviour (p95) and copy spend:")
    for name in sorted(stats):
        s = stats[name]
        print(f"  {name:<12} p95 {s['p95_flowtime']:8.2f}   "
              f"copies {s['copies_launched']:5.0f}")

    wins = sum(1 for row in result.reduction if row["reduction"] > 0)
    print(f"\njobs faster under {config.scheduler} than {config.reference}: "
          f"{wins} of {len(result.reduction)}")
    best = max(result.reduction, key=lambda r: r["reduction"])
    print(f"largest single-job reduction: {best['job']} "
          f"{best['reference']:.2f} -> {best['candidate']:.2f} "
          f"({best['reduction']:.0%})")


if __name__ == "__main__":
    main()
