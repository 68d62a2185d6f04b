"""Wall-clock time of a full run on a planted corpus of about 10^4 nodes.

Usage: python3 scripts/sweep_timing.py [--topics 20] [--docs 300] [--elements 4300] [--sweep 50] [--workers 1]
"""

import argparse
import json
import tempfile
import time
from pathlib import Path

from topicbias.pipeline import RunConfig, run_pipeline
from topicbias.synth import PlantedSpec, generate


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--topics", type=int, default=20)
    parser.add_argument("--docs", type=int, default=300)
    parser.add_argument("--elements", type=int, default=4300)
    parser.add_argument("--sweep", type=int, default=50)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()
    spec = PlantedSpec(topic_count=args.topics, docs_per_topic=args.docs, element_count=args.elements,
                       links_per_element=5, seed=7)
    with tempfile.TemporaryDirectory() as tmp:
        src = Path(tmp) / "in"
        generate(spec).write(src)
        start = time.perf_counter()
        manifest = run_pipeline(RunConfig(inputs=str(src), output=str(Path(tmp) / "out"), min_per_bin=1,
                                          sweep_count=args.sweep, workers=args.workers, write_assignments=False))
        total = time.perf_counter() - start
    print(json.dumps({"nodes": manifest.counts["nodes"], "seconds": round(total, 2),
                      "stages": manifest.timings}, indent=1))


if __name__ == "__main__":
    main()
