"""Tool-augmented answer verification and RLVR reward infrastructure."""

from .equiv import AnswerValue, EquivConfig, RubricOutcome, is_equivalent, parse_answer, verify_by_rubric
from .extract import ExtractedAnswer, RawResponse, extract_final_answer, extract_verdict
from .reward import RolloutGroup, RolloutRecord, advantages, dapo_objective, group_filter, shaped_reward
from .verifier import VerificationTask, Verdict, verify, verify_batch

__version__ = "0.1.0"
