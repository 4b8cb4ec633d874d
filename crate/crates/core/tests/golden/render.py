# SPDX-License-Identifier: Apache-2.0
# Regenerates the golden prompts: python3 render.py
import pathlib
import re

here = pathlib.Path(__file__).parent
template = (here / "../../assets/prompts/initial.txt").read_text()
slots = {
    "problem_statement": "Given two integers a and b, print their sum.\n\nInput\nTwo integers a and b.\n\nOutput\nOne integer.",
    "generator": "import sys\na, b = int(sys.argv[1]), int(sys.argv[2])\nprint(a, b)\n",
}
out = re.sub(r"\{(\w+)\}", lambda m: slots.get(m.group(1), m.group(0)), template)
(here / "initial_sum.txt").write_text(out)
