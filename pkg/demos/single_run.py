"""One simulation pass, narrated.

Generates a small desk-scale scenario, runs the insurance scheduler, and
walks through what the engine recorded: the first few trace events, where
copies went, and how job flowtimes came out.
"""

from collections import Counter

from insuresim import (
    EngineConfig,
    ExperimentConfig,
    build_scenario,
    make_scheduler,
    simulate,
)


def main():
    config = ExperimentConfig(clusters=6, jobs=12, lam=2.0, seeds=(0,))
    scenario = build_scenario(config, seed=0)
    total_tasks = sum(len(j.tasks) for j in scenario.jobs)
    print(f"scenario: {len(scenario.topology.clusters)} clusters, "
          f"{scenario.topology.total_slots()} slots, "
          f"{len(scenario.jobs)} jobs, {total_tasks} tasks")

    scheduler = make_scheduler("insurance", epsilon=0.6)
    result = simulate(scenario, scheduler, seed=0,
                      config=EngineConfig(model_refresh=4.0))

    narrated = ("launch", "complete", "kill", "job_done")
    story = [e for e in result.trace if e["kind"] in narrated]
    print("\nfirst eight copy events:")
    for event in story[:8]:
        if event["kind"] == "launch":
            print(f"  t={event['t']:6.2f} launch   {event['task']:<10} "
                  f"copy {event['copy']} on {event['cluster']} "
                  f"(work {event['work']:.0f}, rate {event['rate']:.1f})")
        elif event["kind"] == "complete":
            print(f"  t={event['t']:6.2f} complete {event['task']:<10} "
                  f"copy {event['copy']} on {event['cluster']}")
        elif event["kind"] == "kill":
            print(f"  t={event['t']:6.2f} kill     {event['task']:<10} "
                  f"copy {event['copy']} ({event['cause']})")
        else:
            print(f"  t={event['t']:6.2f} job_done {event['job']} "
                  f"flowtime {event['flowtime']:.2f}")

    placements = Counter(e["cluster"] for e in result.trace
                         if e["kind"] == "launch")
    print("\ncopies per cluster:",
          " ".join(f"{c}={n}" for c, n in sorted(placements.items())))
    kills = Counter(e["cause"] for e in result.trace if e["kind"] == "kill")
    print("kill causes:       ",
          " ".join(f"{k}={n}" for k, n in sorted(kills.items())) or "none")

    print(f"\ncopies launched {result.copies_launched}, "
          f"killed {result.copies_killed}, makespan {result.makespan:.2f}")
    print("job flowtimes:")
    for job_id in sorted(result.flowtimes):
        print(f"  {job_id:<6} {result.flowtimes[job_id]:8.2f}")
    mean = sum(result.flowtimes.values()) / len(result.flowtimes)
    print(f"mean flowtime {mean:.2f}")


if __name__ == "__main__":
    main()
