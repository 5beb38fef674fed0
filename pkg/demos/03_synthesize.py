"""
Synthesizing a program from examples
====================================

Draw a random target program, hide it behind five input-output examples,
then search for any program that reproduces them.
"""

import numpy as np

from contsynth import SynthesisConfig, estimate_token_probs, generate_corpus, synthesize
from contsynth.corpus import generate_spec
from contsynth.dsl import parse_program

# token frequencies from a small corpus bias the bins towards common tokens
corpus = generate_corpus([4], 50, seed=0)
probs = estimate_token_probs(corpus)

target = parse_program("Filter(>0),Map(*2),Sort,Reverse")
spec = generate_spec(target, 5, np.random.default_rng(3))
for ex in spec:
    print(ex.input, "->", ex.output)

config = SynthesisConfig.setup("best", 4, probs, time_budget=30, seed=0)
result = synthesize(spec, config)
print()
print("found:", result.found, f"({result.stop_reason}, {result.wall_time:.1f} s)")
print("generations", result.generations, "restarts", result.restarts,
      "programs explored", result.programs_explored)

# the found program need not be the target, only equivalent on the examples
for entry in result.restart_log[:5]:
    print(entry)

# the same entry under different setups
for name in ("no-restart", "uniform-bin", "multi-group"):
    r = synthesize(spec, SynthesisConfig.setup(name, 4, probs, time_budget=10, seed=0))
    print(f"{name:<12} {r.stop_reason:<10} {r.wall_time:5.1f} s  {r.found}")
