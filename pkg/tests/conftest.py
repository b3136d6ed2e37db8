import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from toolverify.sandbox import ScriptedExecutor

# --- replay fixtures: the three worked verification conversations ---------

CALC_CODE = (
    "def main():\n"
    "    import math\n"
    "    cand = 8*math.sqrt(5 + 2.5*math.sqrt(3))/5\n"
    "    gold = math.sqrt(1604*(2+math.sqrt(3))/505)\n"
    "    print(cand, gold)\n"
    "\n"
    'if __name__ == "__main__":\n'
    "    main()"
)
CALC_STDOUT = "4.887241058965765 3.4429464400122507\n"

STRING_CODE = (
    "def main():\n"
    "    import sys\n"
    '    correct = "AUUGCUCGAAUUUAUAGGACUUUUUUCUAUAAAGAAUAGUUUGGACUUGAAAUGUAUUUAAAAACAAGAGGUUGGUAGAUUAUCAGCCUCUUUCUUGUCGUUGAAAAAG"\n'
    '    candidate = "ACGGGUUUCCCGGGAAACCCCAAAAUGGGGCCCCUGUCGGGUUUUAUUCCCUGUCGUCGCCCUUUUUGGGA"\n'
    "    sys.stdout.write(str(correct == candidate))\n"
    "\n"
    'if __name__ == "__main__":\n'
    "    main()"
)
STRING_STDOUT = "False"

UNIT_RESPONSE_BODY = "Unit parsed value: 4.369056352122534e+22 electron_volt / mole"


def tool_call_block(name: str, arguments: dict) -> str:
    return "<tool_call>\n" + json.dumps({"name": name, "arguments": arguments}) + "\n</tool_call>"


CASE_CALC = {
    "question": (
        "A block of mass m=100 g slides down a wedge of mass M=10 kg with angle 30 degrees "
        "and maximum height h=2 m, friction coefficient 1/2, wedge initially moving at 1 m/s. "
        "Find the exact time for the block to slide to the bottom of the wedge."
    ),
    "candidate": "Final Answer: \\[\\boxed{\\frac{8\\sqrt{5 + 2.5\\sqrt{3}}}{5}}\\]",
    "references": ["t = $\\sqrt{(1604(2+\\sqrt{3})/505)}$ s"],
    "replies": [
        "Let me compare the two expressions numerically.\n"
        + tool_call_block("python_interpreter", {"code": CALC_CODE}),
        "The candidate evaluates to about 4.89 s and the reference to about 3.44 s. "
        "Since 4.89 != 3.44 the candidate does not match the gold answer. \\boxed{[Incorrect]}",
    ],
    "expected_label": "Incorrect",
    "expected_u": 1,
    "tool_stdout": CALC_STDOUT,
}

CASE_STRING = {
    "question": "Generate the RNA sequence for the given dot-bracket secondary structure.",
    "candidate": "AUUGCUCGAAUUUAUAGGACUUUUUUCUAUAAAGAAUAGUUUGGACUUGAAAUG"
    "UAUUUAAAAACAAGAGGUUGGUAGAUUAUCAGCCUCUUUCUUGUCGUUGAAAAAG",
    "references": ["ACGGGUUUCCCGGGAAACCCCAAAAUGGGGCCCCUGUCGGGUUUUAUUCCCUGUCGUCGCCCUUUUUGGGA"],
    "replies": [
        "I will compare the two sequences exactly.\n"
        + tool_call_block("python_interpreter", {"code": STRING_CODE}),
        "The candidate RNA sequence does not match the gold sequence at all. \\boxed{Incorrect}",
    ],
    "expected_label": "Incorrect",
    "expected_u": 1,
    "tool_stdout": STRING_STDOUT,
}

CASE_UNIT = {
    "question": "Please provide the LUMO energy value for this molecule.\nO=C1C=C(CO)C(=N)N1",
    "candidate": "-7.00~\\text{kJ/mol}",
    "references": ["5.48e22 eV\\mole"],
    "replies": [
        "The units differ, so convert the candidate value first.\n"
        + tool_call_block(
            "unit_conversion",
            {"value": 7.0, "source_unit": "kJ/mol", "target_unit": "eV/mole"},
        ),
        "The converted candidate is roughly 4.37e22 eV/mole, nowhere near 5.48e22 eV/mole. "
        "\\boxed{[Incorrect]}",
    ],
    "expected_label": "Incorrect",
    "expected_u": 1,
    "tool_body": UNIT_RESPONSE_BODY,
}

REPLAY_CASES = [CASE_CALC, CASE_STRING, CASE_UNIT]


@pytest.fixture
def stub_executor():
    """Deterministic executor replaying the canned code->stdout pairs."""
    ex = ScriptedExecutor()
    ex.add(CALC_CODE, CALC_STDOUT)
    ex.add(STRING_CODE, STRING_STDOUT)
    return ex
