"""Write the small bundled input fixture used by the pipeline tests.

Usage: python3 scripts/make_fixture.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from topicbias.synth import PlantedSpec, generate


def main(out: Path) -> None:
    spec = PlantedSpec(topic_count=3, docs_per_topic=60, element_count=120, links_per_element=4,
                       similarity_mode="aligned", similarity_candidates=10, seed=11)
    corpus = generate(spec)
    corpus.write(out)
    # citations: mostly within a topic, a few across topics, plus outside documents
    rng = np.random.default_rng(11)
    rows = []
    by_topic = {}
    for d, t in corpus.doc_topic.items():
        by_topic.setdefault(t, []).append(d)
    for d, t in sorted(corpus.doc_topic.items()):
        for cited in rng.choice(by_topic[t], size=2, replace=False):
            if cited != d:
                rows.append((d, str(cited)))
        if rng.random() < 0.1:
            other = str(rng.choice(sorted(corpus.doc_topic)))
            if other != d:
                rows.append((d, other))
    for n in range(30):
        t = n % spec.topic_count
        for cited in rng.choice(by_topic[t], size=3, replace=False):
            rows.append((f"x{n:03d}", str(cited)))
    with open(out / "citations.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("citing_id\tcited_id\n")
        for a, b in rows:
            fh.write(f"{a}\t{b}\n")
    (out / "run.conf").write_text(
        "# small, fast settings for the bundled fixture\n"
        "min_per_bin = 1\n"
        "sweep_count = 6\n"
        "k = 10\n"
        "seed = 3\n",
        encoding="utf-8",
    )


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "tests" / "data" / "tiny")
