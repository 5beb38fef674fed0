"""
A tour of the list DSL
======================

Programs are comma-separated token names.  Each token maps a value (an int,
a list of ints, or Null) to a new value.
"""

from contsynth import default_inventory, edit_distance, execute, parse_program
from contsynth.specification import Specification, error, satisfies

inv = default_inventory()
print(len(inv), "tokens, e.g.", [t.name for t in inv][:6])

# run a program step by step
prog = parse_program("Map(+1),Sort,Filter(Even),Reverse")
x = (5, 0, -3, 1, 4)
value = x
for tok in prog:
    value = execute(parse_program(tok.name), value)
    print(f"{tok.name:>14}  ->  {value}")

# out-of-range results become Null, and Null propagates
print(execute(parse_program("Map(**2),Sum"), (200, 3)))

# integer results are promoted to one-element lists where a list is expected
print(execute(parse_program("Sum,Reverse"), (1, 2, 3)))

# distances between outputs drive the search
print(edit_distance((1, 2, 3), (1, 3)), edit_distance(4, (4,)), edit_distance(None, (1, 2)))

spec = Specification.from_pairs([((3, 1, 2), (3, 2, 1)), ((7, 4, 4, 9), (9, 7, 4, 4))])
for text in ("Reverse", "Sort", "Sort,Reverse"):
    p = parse_program(text)
    print(f"{text:<14} error={error(p, spec)} satisfies={satisfies(p, spec)}")
