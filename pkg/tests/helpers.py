"""Assistant-text builders shared across the test modules."""

CLARIFY_TEXT = "<think>Key facts are absent.</think><answer>insufficient information</answer>"


def solve_text(answer: str) -> str:
    return f"<think>Working it out.</think><answer>{answer}</answer>"
