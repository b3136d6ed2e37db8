"""Rubric fixture cases: (candidate response text, references, expected).

expected is "Correct", "Incorrect", or "needs_tools".
"""

RUBRIC_CASES = [
    # numeric equivalence after rounding to two decimals
    (r"\boxed{2.909}", [r"\frac{32}{11}"], "Correct"),
    (r"\boxed{\frac{32}{11}}", [r"\frac{96}{33}"], "Correct"),
    (r"\boxed{2.91}", [r"\frac{32}{11}"], "Correct"),
    (r"\boxed{2.8}", [r"\frac{32}{11}"], "Incorrect"),
    (r"\boxed{4.887241058965765}", ["3.4429464400122507"], "Incorrect"),
    # unit forgiveness: bare number vs number with unit
    (r"\boxed{16}", ["16km"], "Correct"),
    (r"\boxed{16km}", ["16"], "Correct"),
    (r"\boxed{20}", ["20db"], "Correct"),
    (r"\boxed{15km}", ["16"], "Incorrect"),
    # multi-part, order-free
    (r"\boxed{27/7, -8/7}", [r"\frac{27}{7}, -\frac{8}{7}"], "Correct"),
    (r"\boxed{-8/7, 27/7}", [r"\frac{27}{7}, -\frac{8}{7}"], "Correct"),
    (r"\boxed{27/7}", [r"\frac{27}{7}, -\frac{8}{7}"], "Incorrect"),  # partial match
    (r"\boxed{27/7, 8/7}", [r"\frac{27}{7}, -\frac{8}{7}"], "Incorrect"),
    # expressions
    (r"\boxed{\sqrt{4}}", ["2"], "Correct"),
    (r"\boxed{2\pi}", ["6.2832"], "Correct"),
    (r"\boxed{50\%}", ["0.5"], "Correct"),
    # choices
    ("Answer: C", ["C"], "Correct"),
    ("Answer: B", ["C"], "Incorrect"),
    # plain text
    (r"\boxed{Paris}", ["paris"], "Correct"),
    (r"\boxed{Lyon}", ["Paris"], "Incorrect"),
    # identity
    (r"\boxed{4}", ["4"], "Correct"),
    # incomplete responses are always Incorrect
    ("We compute the integral and so the val", ["4"], "Incorrect"),
    ("the answer is probably seven " * 30, ["7"], "Incorrect"),
    # cross-unit comparison escalates to tools
    (r"-7.00~\text{kJ/mol}", [r"5.48e22 eV\mole"], "needs_tools"),
    # intervals: openness must match exactly
    (r"\boxed{[0, 1)}", ["[0,1)"], "Correct"),
    (r"\boxed{[0, 1]}", ["[0,1)"], "Incorrect"),
    # multiple equivalent references: any match suffices
    (r"\boxed{0.5}", ["1/2", "0.5"], "Correct"),
    # multiple inequivalent references: all must match
    (r"\boxed{3}", ["3", "4"], "Incorrect"),
    (r"\boxed{3, 4}", ["3", "4"], "Correct"),
]
