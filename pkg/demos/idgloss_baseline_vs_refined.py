"""ID glossing on synthetic glosses: visual baseline against the gated refinement.

Each gloss has two true variants plus one planted singleton of a variant. The
table compares fragmentation of the baseline and the refined partitions on
held-out evaluation embeddings, then lists every MERGE/KEEP decision.
"""

import argparse

from signagent.metrics import evaluate_clusters, format_cluster_table
from signagent.synth import SynthConfig, annotate_task2, build_fixture


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--glosses", type=int, default=8)
    args = p.parse_args()

    fx = build_fixture(SynthConfig(seed=args.seed, n_sentences=1, n_idgloss=args.glosses))
    records = annotate_task2(fx)
    emb = {k: v for g in fx.task2 for k, v in g.eval_embeddings.items()}
    baseline = {gid: {c["cluster_id"]: c["members"] for c in r["baseline"]["clusters"]} for gid, r in records.items()}
    refined = {gid: {c["cluster_id"]: c["members"] for c in r["clusters"]} for gid, r in records.items()
               if r["validation"]["status"] == "valid"}
    print(format_cluster_table({"visual baseline": evaluate_clusters(baseline, emb),
                                "gated refinement": evaluate_clusters(refined, emb)}), end="")
    print()
    for gid, r in sorted(records.items()):
        for a in r["adjustments"]:
            print(f"{gid:>10}  {a['operation']:<5} {a['rationale']}")


if __name__ == "__main__":
    main()
